//! Estimating `p` from observations of the positive copula.
//!
//! If some observation lies outside the `L_{n-1}` unit ball, the likelihood
//! is zero below a threshold `p*` and unbounded as `p` decreases to it, so
//! `p*` itself is returned. Otherwise the likelihood is bounded on
//! `(n-1, ∞)` and is maximized numerically.

use serde::{Serialize, Serializer};

use crate::copula::{
    ln_density_constant, ln_density_unchecked, ln_sum_pow, CopulaParams, VariantTag,
};
use crate::error::{Error, Result};
use crate::sampler::SampleBatch;

pub const DEFAULT_P_MAX: f64 = 1e3;

const ROOT_TOL: f64 = 1e-12;
const GOLDEN_TOL: f64 = 1e-8;
const MLE_STARTS: usize = 3;
// Smallest p - (n - 1) searched by the likelihood maximizer.
const MIN_EXCESS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FitMethod {
    /// Interior maximum of a bounded likelihood.
    Mle,
    /// Support-boundary estimator; the likelihood is unbounded.
    PStar,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub n: usize,
    pub m: usize,
    pub p_hat: f64,
    pub method: FitMethod,
    /// Log-likelihood at `p_hat`; `+inf` for the boundary estimator.
    #[serde(serialize_with = "serialize_loglik")]
    pub loglik: f64,
    pub iterations: usize,
    /// The maximizer ended at the upper end of the search range.
    pub hit_p_max: bool,
}

fn serialize_loglik<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if *v > 0.0 {
        s.serialize_str("+inf")
    } else {
        s.serialize_str("-inf")
    }
}

fn check_unit_open(x: &[f64]) -> Result<()> {
    for &v in x {
        if v.is_nan() || v < 0.0 {
            return Err(Error::domain(format!("coordinate {v} is not in [0, 1)")));
        }
        if v >= 1.0 {
            return Err(Error::domain(format!(
                "coordinate {v} >= 1: no finite p puts this point inside the unit ball"
            )));
        }
    }
    Ok(())
}

/// The unique `p > n - 1` with `‖x‖ₚ = 1`, or `None` if `‖x‖_{n-1} <= 1`.
///
/// `p ↦ ‖x‖ₚ` is continuous and decreasing, so the root is bracketed
/// between `n - 1` and the first doubling of `n` that lands inside the ball.
pub fn norm_root_p(x: &[f64], n: usize) -> Result<Option<f64>> {
    if n < 2 || x.len() != n {
        return Err(Error::domain(format!(
            "expected a point of dimension n = {n} >= 2"
        )));
    }
    check_unit_open(x)?;
    let lo0 = (n - 1) as f64;
    // sign of ln Σ xᵢ^p equals sign of ‖x‖ₚ - 1
    let f = |p: f64| ln_sum_pow(x, p);
    if f(lo0) <= 0.0 {
        return Ok(None);
    }
    let mut lo = lo0;
    let mut hi = n as f64;
    while f(hi) >= 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > ROOT_TOL * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

fn check_batch(batch: &SampleBatch) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::domain("empty batch"));
    }
    if batch.variant != VariantTag::Positive {
        return Err(Error::domain(format!(
            "inference needs a positive-variant batch, got {}",
            batch.variant
        )));
    }
    if batch.dim() < 2 {
        return Err(Error::domain("dimension must be at least 2"));
    }
    Ok(())
}

/// Smallest `p >= n - 1` keeping every observation inside the Lp unit ball.
pub fn p_star(batch: &SampleBatch) -> Result<f64> {
    check_batch(batch)?;
    let n = batch.dim();
    let mut best = (n - 1) as f64;
    for row in batch.iter_rows() {
        if let Some(root) = norm_root_p(row, n)? {
            best = best.max(root);
        }
    }
    Ok(best)
}

/// `Σᵢ ln c⁺(x⁽ⁱ⁾; p)`, `-inf` if any observation is outside the support.
pub fn log_likelihood(batch: &SampleBatch, p: f64) -> Result<f64> {
    check_batch(batch)?;
    let n = batch.dim();
    if p.is_nan() || p <= (n - 1) as f64 || p.is_infinite() {
        return Err(Error::domain(format!(
            "log-likelihood needs finite p > n - 1, got {p}"
        )));
    }
    let ln_const = ln_density_constant(n, p);
    let mut total = 0.0;
    for row in batch.iter_rows() {
        let v = ln_density_unchecked(n, p, ln_const, row);
        if v == f64::NEG_INFINITY {
            return Ok(v);
        }
        total += v;
    }
    Ok(total)
}

/// Golden-section maximization of `f` on `[a, b]`.
fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64, usize) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iters = 0;
    while (b - a).abs() > tol {
        iters += 1;
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    // compare against the bracket ends so boundary maxima are found
    let mid = 0.5 * (a + b);
    let mut best = (mid, f(mid));
    for t in [a, b] {
        let v = f(t);
        if v > best.1 {
            best = (t, v);
        }
    }
    (best.0, best.1, iters)
}

/// Estimate `p`: the boundary estimator `p*` when it binds, else the
/// maximum-likelihood estimate on `(n - 1, p_max]`.
pub fn fit(batch: &SampleBatch, p_max: f64) -> Result<FitResult> {
    check_batch(batch)?;
    let n = batch.dim();
    let floor = (n - 1) as f64;
    if p_max.is_nan() || p_max <= floor + MIN_EXCESS {
        return Err(Error::domain(format!(
            "p_max must exceed n - 1, got {p_max}"
        )));
    }
    let ps = p_star(batch)?;
    if ps > floor {
        return Ok(FitResult {
            n,
            m: batch.len(),
            p_hat: ps,
            method: FitMethod::PStar,
            loglik: f64::INFINITY,
            iterations: 0,
            hit_p_max: false,
        });
    }

    // Search over t = ln(p - (n - 1)).
    let objective = |t: f64| log_likelihood(batch, floor + t.exp()).unwrap_or(f64::NEG_INFINITY);
    let t_lo = MIN_EXCESS.ln();
    let t_hi = (p_max - floor).ln();
    let width = (t_hi - t_lo) / MLE_STARTS as f64;
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    let mut iterations = 0;
    for k in 0..MLE_STARTS {
        let a = t_lo + k as f64 * width;
        let (t, v, it) = golden_max(objective, a, a + width, GOLDEN_TOL);
        iterations += it;
        if v > best.1 || best.0.is_nan() {
            best = (t, v);
        }
    }
    let (t, loglik) = best;
    Ok(FitResult {
        n,
        m: batch.len(),
        p_hat: floor + t.exp(),
        method: FitMethod::Mle,
        loglik,
        iterations,
        hit_p_max: t_hi - t <= 10.0 * GOLDEN_TOL,
    })
}

impl FitResult {
    pub fn params(&self) -> CopulaParams {
        CopulaParams::new(self.n, self.p_hat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::lp_norm;
    use crate::sampler::sample_copula;
    use crate::specfun::RngStream;

    fn batch(n: usize, rows: &[Vec<f64>]) -> SampleBatch {
        SampleBatch::from_rows(
            CopulaParams::new(n, n as f64),
            VariantTag::Positive,
            0,
            rows,
        )
        .unwrap()
    }

    #[test]
    fn root_examples() {
        assert!((norm_root_p(&[0.8, 0.6], 2).unwrap().unwrap() - 2.0).abs() < 1e-10);
        let want = 2f64.ln() / (10.0f64 / 9.0).ln();
        assert!((norm_root_p(&[0.9, 0.9], 2).unwrap().unwrap() - want).abs() < 1e-10);
        assert_eq!(norm_root_p(&[0.5, 0.5], 2).unwrap(), None);
        assert!(norm_root_p(&[1.0, 0.2], 2).is_err());
        assert!(norm_root_p(&[0.2, 0.2, 0.2], 2).is_err());
    }

    #[test]
    fn root_for_deep_corner_points() {
        let x = [0.999, 0.999, 0.999];
        let p = norm_root_p(&x, 3).unwrap().unwrap();
        assert!((lp_norm(&x, p) - 1.0).abs() < 1e-9);
        // closed form: 3 * 0.999^p = 1
        assert!((p - 3f64.ln() / (1.0f64 / 0.999).ln()).abs() < 1e-6);
    }

    #[test]
    fn p_star_examples() {
        assert_eq!(
            p_star(&batch(2, &[vec![0.3, 0.3], vec![0.2, 0.5]])).unwrap(),
            1.0
        );
        assert!(
            (p_star(&batch(2, &[vec![0.8, 0.6], vec![0.1, 0.1]])).unwrap() - 2.0).abs() < 1e-10
        );
        let ps = p_star(&batch(2, &[vec![0.8, 0.6], vec![0.9, 0.9]])).unwrap();
        assert!((ps - 6.578_813_478_960_584).abs() < 1e-9);
        let empty = SampleBatch::from_rows(CopulaParams::new(2, 2.0), VariantTag::Positive, 0, &[])
            .unwrap();
        assert!(p_star(&empty).is_err());
    }

    #[test]
    fn loglik_support() {
        let b = batch(2, &[vec![0.8, 0.6]]);
        assert_eq!(log_likelihood(&b, 1.5).unwrap(), f64::NEG_INFINITY);
        let b = batch(2, &[vec![1e-9, 1e-9]]);
        let p: f64 = 3.0;
        let ln_const = -crate::specfun::log_gamma(1.0 + 1.0 / p).unwrap()
            - crate::specfun::log_gamma(1.0 - 1.0 / p).unwrap();
        assert!((log_likelihood(&b, p).unwrap() - ln_const).abs() < 1e-12);
        assert!(log_likelihood(&b, 1.0).is_err());
    }

    #[test]
    fn loglik_peaks_near_truth() {
        let mut wins = 0;
        for seed in 0..20 {
            let b = sample_copula(
                &mut RngStream::new(seed),
                &CopulaParams::new(2, 2.5),
                10_000,
                VariantTag::Positive,
            )
            .unwrap();
            let at = log_likelihood(&b, 2.5).unwrap();
            if at > log_likelihood(&b, 1.8).unwrap() && at > log_likelihood(&b, 4.0).unwrap() {
                wins += 1;
            }
        }
        assert_eq!(wins, 20);
    }

    #[test]
    fn fit_uses_boundary_estimator_when_it_binds() {
        let b = batch(2, &[vec![0.3, 0.3], vec![0.9, 0.9], vec![0.1, 0.4]]);
        let r = fit(&b, DEFAULT_P_MAX).unwrap();
        assert_eq!(r.method, FitMethod::PStar);
        assert!(r.loglik.is_infinite());
        let max_norm = b
            .iter_rows()
            .map(|x| lp_norm(x, r.p_hat))
            .fold(0.0, f64::max);
        assert!((max_norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mle_matches_grid_oracle() {
        // Keep only rows inside the L1 ball so the likelihood stays bounded.
        let raw = sample_copula(
            &mut RngStream::new(4),
            &CopulaParams::new(2, 1.6),
            400,
            VariantTag::Positive,
        )
        .unwrap();
        let rows: Vec<Vec<f64>> = raw
            .iter_rows()
            .filter(|r| r[0] + r[1] < 0.97)
            .map(|r| r.to_vec())
            .collect();
        let b = batch(2, &rows);
        let r = fit(&b, 50.0).unwrap();
        assert_eq!(r.method, FitMethod::Mle);
        assert!(r.loglik.is_finite());
        let grid_best = (1..20_000)
            .map(|i| 1.0 + i as f64 * 49.0 / 20_000.0)
            .map(|p| log_likelihood(&b, p).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(
            r.loglik >= grid_best - 1e-9,
            "{} vs {}",
            r.loglik,
            grid_best
        );
    }

    #[test]
    fn single_interior_point_runs_the_mle_path() {
        let b = batch(2, &[vec![0.01, 0.02]]);
        let r = fit(&b, DEFAULT_P_MAX).unwrap();
        assert_eq!(r.method, FitMethod::Mle);
        assert!(r.p_hat.is_finite() && r.loglik.is_finite());
        assert!(r.hit_p_max);
    }

    #[test]
    fn fit_recovers_p() {
        let mut good = 0;
        for seed in 0..20 {
            let b = sample_copula(
                &mut RngStream::new(seed),
                &CopulaParams::new(2, 3.0),
                2000,
                VariantTag::Positive,
            )
            .unwrap();
            let r = fit(&b, DEFAULT_P_MAX).unwrap();
            if (r.p_hat - 3.0).abs() <= 0.3 {
                good += 1;
            }
        }
        assert!(good >= 18);
    }

    #[test]
    fn fit_rejects_bad_batches() {
        let empty = SampleBatch::from_rows(CopulaParams::new(2, 2.0), VariantTag::Positive, 0, &[])
            .unwrap();
        assert!(fit(&empty, DEFAULT_P_MAX).is_err());
        let circ = SampleBatch::from_rows(
            CopulaParams::new(2, 2.0),
            VariantTag::Circular,
            0,
            &[vec![0.1, 0.2]],
        )
        .unwrap();
        assert!(fit(&circ, DEFAULT_P_MAX).is_err());
    }
}
