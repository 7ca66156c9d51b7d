//! Independent numerical oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;

use lpcopula::copula::density_from_gap;
use lpcopula::{CopulaParams, RngStream};

/// Tanh-sinh quadrature of `f` over `[0, len]`.
///
/// `f` receives the distances to both endpoints so singular integrands can
/// be evaluated without cancellation. Halves the step until two successive
/// levels agree to `tol` (relative).
pub fn tanh_sinh<F: Fn(f64, f64) -> f64>(len: f64, tol: f64, f: F) -> f64 {
    tanh_sinh_nodes(len, tol, |ln_w, l, r| ln_w.exp() * f(l, r))
}

/// As [`tanh_sinh`] for a positive integrand given by its logarithm; the
/// weight is folded in before exponentiating so huge values near an
/// endpoint singularity don't overflow.
pub fn tanh_sinh_ln<F: Fn(f64, f64) -> f64>(len: f64, tol: f64, ln_f: F) -> f64 {
    tanh_sinh_nodes(len, tol, |ln_w, l, r| (ln_w + ln_f(l, r)).exp())
}

fn tanh_sinh_nodes<F: Fn(f64, f64, f64) -> f64>(len: f64, tol: f64, term: F) -> f64 {
    const U_MAX: f64 = 6.0;
    let node = |u: f64| -> f64 {
        let z = FRAC_PI_2 * u.sinh();
        let left = len / (1.0 + (-2.0 * z).exp());
        let right = len / (1.0 + (2.0 * z).exp());
        if left <= 0.0 || right <= 0.0 {
            return 0.0;
        }
        // ln of len/2 · π/2 · cosh u · sech² z
        let ln_sech = std::f64::consts::LN_2 - z.abs() - (-2.0 * z.abs()).exp().ln_1p();
        let ln_w = (0.5 * len * FRAC_PI_2 * u.cosh()).ln() + 2.0 * ln_sech;
        term(ln_w, left, right)
    };
    let mut h = 0.5;
    let mut sum: f64 = {
        let k = (U_MAX / h) as i64;
        (-k..=k).map(|i| node(i as f64 * h)).sum()
    };
    let mut estimate = sum * h;
    for _ in 0..12 {
        h *= 0.5;
        let k = (U_MAX / h) as i64;
        // only the odd nodes are new
        let fresh: f64 = (-k..=k)
            .filter(|i| i % 2 != 0)
            .map(|i| node(i as f64 * h))
            .sum();
        sum += fresh;
        let next = sum * h;
        if (next - estimate).abs() <= tol * next.abs() {
            return next;
        }
        estimate = next;
    }
    estimate
}

/// `∫₀ᵇ g(t) (1/p) (b - t)^{1/p - 1} dt`: the mass of the density along the
/// last coordinate, written in the gap variable `t = b - x^p`.
fn last_axis_mass(params: &CopulaParams, p: f64, b: f64, tol: f64) -> f64 {
    tanh_sinh_ln(b, tol, |tl, tr| {
        density_from_gap(params, tl).unwrap().ln() + (1.0 / p - 1.0) * tr.ln() - p.ln()
    })
}

/// `∫∫_{[0,1]²} c(x, y) dx dy` for the bivariate positive copula.
pub fn bivariate_mass(p: f64, tol: f64) -> f64 {
    let params = CopulaParams::new(2, p);
    tanh_sinh(1.0, tol, |xl, xr| {
        // b = 1 - x^p with x = 1 - xr, accurate near both ends
        let b = if xl < 0.5 {
            1.0 - xl.powf(p)
        } else {
            -(p * (-xr).ln_1p()).exp_m1()
        };
        if b <= 0.0 {
            0.0
        } else {
            last_axis_mass(&params, p, b, tol)
        }
    })
}

/// Monte Carlo over the first two coordinates, quadrature over the third.
/// Returns (estimate, standard error).
pub fn trivariate_mass(p: f64, samples: usize, seed: u64) -> (f64, f64) {
    let params = CopulaParams::new(3, p);
    let mut rng = RngStream::new(seed);
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..samples {
        let (x, y) = (rng.uniform(), rng.uniform());
        let b = 1.0 - x.powf(p) - y.powf(p);
        let v = if b > 0.0 {
            last_axis_mass(&params, p, b, 1e-10)
        } else {
            0.0
        };
        s += v;
        s2 += v * v;
    }
    let k = samples as f64;
    let mean = s / k;
    let var = (s2 / k - mean * mean) * k / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// `S_β` of a permutation coupling by direct pair enumeration.
pub fn brute_objective(sigma: &[usize], beta: f64) -> f64 {
    let m = sigma.len();
    let mut total = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            let dx = (i as f64 - j as f64) / m as f64;
            let dy = (sigma[i] as f64 - sigma[j] as f64) / m as f64;
            total += (dx * dx + dy * dy).powf(beta / 2.0);
        }
    }
    2.0 * total / (m * (m - 1)) as f64
}

/// Global maximum of `S_β` over all permutations of `0..m` (Heap's algorithm).
pub fn brute_force_optimum(m: usize, beta: f64) -> f64 {
    let mut sigma: Vec<usize> = (0..m).collect();
    let mut c = vec![0usize; m];
    let mut best = brute_objective(&sigma, beta);
    let mut i = 0;
    while i < m {
        if c[i] < i {
            if i % 2 == 0 {
                sigma.swap(0, i);
            } else {
                sigma.swap(c[i], i);
            }
            best = best.max(brute_objective(&sigma, beta));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}
