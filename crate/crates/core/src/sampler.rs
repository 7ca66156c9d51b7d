//! Exact i.i.d. generation from the copulas.
//!
//! Every row is generated from its own sub-stream keyed by `(batch key, row)`,
//! so batches are identical regardless of how rows are split across threads.

use rayon::prelude::*;
use serde::Serialize;

use crate::copula::{
    lp_norm, radial_law, transform_in_place, CopulaParams, RadialLaw, Shape, VariantTag,
};
use crate::error::{Error, Result};
use crate::specfun::{sample_ln_beta, sample_pgen_normal_abs, RngStream};

/// An `m × n` row-major matrix of draws with the law it came from.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleBatch {
    pub data: Vec<f64>,
    pub rows: usize,
    pub params: CopulaParams,
    pub variant: VariantTag,
    pub seed: u64,
}

impl SampleBatch {
    pub fn from_rows(
        params: CopulaParams,
        variant: VariantTag,
        seed: u64,
        rows: &[Vec<f64>],
    ) -> Result<Self> {
        let n = params.n;
        let mut data = Vec::with_capacity(rows.len() * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::domain(format!(
                    "row {i} has {} columns, expected {n}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            data,
            rows: rows.len(),
            params,
            variant,
            seed,
        })
    }

    pub fn dim(&self) -> usize {
        self.params.n
    }

    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.dim();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn iter_rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim())
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.iter_rows().map(|r| r[j]).collect()
    }
}

/// Fills `out` with `(|Z₁|, …, |Zₙ|) / ‖Z‖ₚ` for i.i.d. p-generalized normal `Zᵢ`.
fn angular_row(rng: &mut RngStream, p: f64, out: &mut [f64]) {
    loop {
        for v in out.iter_mut() {
            *v = sample_pgen_normal_abs(rng, p);
        }
        let norm = lp_norm(out, p);
        if norm > 0.0 && norm.is_finite() {
            for v in out.iter_mut() {
                *v = (*v / norm).min(1.0);
            }
            return;
        }
    }
}

/// `m` rows from the positive Lp-uniform law on the unit sphere.
pub fn sample_angular(rng: &mut RngStream, n: usize, p: f64, m: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::domain(format!(
            "dimension must be at least 2, got {n}"
        )));
    }
    if !(1.0..f64::INFINITY).contains(&p) {
        return Err(Error::domain(format!(
            "angular law needs finite p >= 1, got {p}"
        )));
    }
    let mut data = vec![0.0; m * n];
    for row in data.chunks_exact_mut(n) {
        angular_row(rng, p, row);
    }
    Ok(data)
}

fn sample_radius(rng: &mut RngStream, law: &RadialLaw) -> f64 {
    match *law {
        RadialLaw::PointMassOne { .. } => 1.0,
        RadialLaw::TransformedBeta { p, .. } => {
            let (a, b) = law.beta_shapes().expect("transformed beta");
            (sample_ln_beta(rng, a, b) / p).exp()
        }
        RadialLaw::LinfMax { .. } => unreachable!("p = inf rows are drawn directly"),
    }
}

fn fill_rows<F>(m: usize, n: usize, key: u64, row_fn: F) -> Vec<f64>
where
    F: Fn(&mut RngStream, &mut [f64]) + Sync,
{
    let mut data = vec![0.0; m * n];
    data.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let mut rng = RngStream::derive(key, i as u64);
        row_fn(&mut rng, row);
    });
    data
}

/// `m` i.i.d. rows from the copula, in the requested variant.
///
/// Consumes one word from `rng` to key the batch; rows are then generated
/// from independent sub-streams.
pub fn sample_copula(
    rng: &mut RngStream,
    params: &CopulaParams,
    m: usize,
    variant: VariantTag,
) -> Result<SampleBatch> {
    params.check()?;
    if m == 0 {
        return Err(Error::domain("sample size must be at least 1"));
    }
    let n = params.n;
    let law = radial_law(params)?;
    let key = rand::RngCore::next_u64(rng);
    let data = match params.p {
        Shape::Infinite => fill_rows(m, n, key, |rng, row| {
            for v in row.iter_mut() {
                *v = rng.uniform_open();
            }
            transform_in_place(row, VariantTag::Positive, variant, rng);
        }),
        Shape::Finite(p) => fill_rows(m, n, key, |rng, row| {
            angular_row(rng, p, row);
            let r = sample_radius(rng, &law);
            for v in row.iter_mut() {
                *v *= r;
            }
            transform_in_place(row, VariantTag::Positive, variant, rng);
        }),
    };
    Ok(SampleBatch {
        data,
        rows: m,
        params: *params,
        variant,
        seed: rng.seed(),
    })
}

/// Positive copula rows for integer `p`, obtained by projecting the
/// `(p+1)`-dimensional Lp-uniform law onto its first `n` coordinates.
pub fn sample_integer_p_projection(
    rng: &mut RngStream,
    p: u32,
    n: usize,
    m: usize,
) -> Result<SampleBatch> {
    if p < 1 {
        return Err(Error::domain("p must be a positive integer"));
    }
    if n < 2 || n > p as usize + 1 {
        return Err(Error::domain(format!(
            "projection needs 2 <= n <= p + 1 = {}, got n = {n}",
            p + 1
        )));
    }
    if m == 0 {
        return Err(Error::domain("sample size must be at least 1"));
    }
    let full = p as usize + 1;
    let pf = p as f64;
    let key = rand::RngCore::next_u64(rng);
    let data = fill_rows(m, n, key, |rng, row| {
        let mut sphere = vec![0.0; full];
        angular_row(rng, pf, &mut sphere);
        row.copy_from_slice(&sphere[..n]);
    });
    Ok(SampleBatch {
        data,
        rows: m,
        params: CopulaParams::new(n, pf),
        variant: VariantTag::Positive,
        seed: rng.seed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::{angular_marginal_cdf, rho};
    use crate::stats::{ks_statistic, ks_two_sample, pearson};

    #[test]
    fn angular_rows_have_unit_norm() {
        let mut rng = RngStream::new(1);
        for (n, p) in [(2, 1.0), (3, 2.5), (5, 7.0), (2, 300.0)] {
            let data = sample_angular(&mut rng, n, p, 2000).unwrap();
            for row in data.chunks_exact(n) {
                assert!((lp_norm(row, p) - 1.0).abs() < 1e-12);
            }
        }
        assert!(sample_angular(&mut rng, 1, 2.0, 1).is_err());
        assert!(sample_angular(&mut rng, 2, 0.5, 1).is_err());
    }

    #[test]
    fn angular_marginal_law() {
        let mut rng = RngStream::new(2);
        let data = sample_angular(&mut rng, 3, 2.0, 100_000).unwrap();
        let first: Vec<f64> = data.chunks_exact(3).map(|r| r[0]).collect();
        let d = ks_statistic(&first, |u| angular_marginal_cdf(3, 2.0, u).unwrap());
        assert!(d < 0.01, "{d}");

        let data = sample_angular(&mut rng, 2, 1.0, 100_000).unwrap();
        let mean = data.chunks_exact(2).map(|r| r[0]).sum::<f64>() / 100_000.0;
        assert!((mean - 0.5).abs() < 0.005);
    }

    #[test]
    fn copula_marginals_are_uniform() {
        let mut rng = RngStream::new(3);
        let batch = sample_copula(
            &mut rng,
            &CopulaParams::new(2, 2.0),
            100_000,
            VariantTag::Positive,
        )
        .unwrap();
        for j in 0..2 {
            let d = ks_statistic(&batch.column(j), |u| u.clamp(0.0, 1.0));
            assert!(d < 0.006, "coordinate {j}: {d}");
        }
    }

    #[test]
    fn singular_cases_live_on_the_sphere() {
        let mut rng = RngStream::new(4);
        let batch = sample_copula(
            &mut rng,
            &CopulaParams::new(3, 2.0),
            5000,
            VariantTag::Positive,
        )
        .unwrap();
        assert!(batch
            .iter_rows()
            .all(|r| (lp_norm(r, 2.0) - 1.0).abs() < 1e-12));
        let batch = sample_copula(
            &mut rng,
            &CopulaParams::new(2, 1.0),
            10_000,
            VariantTag::Positive,
        )
        .unwrap();
        assert!(batch.iter_rows().all(|r| (r[0] + r[1] - 1.0).abs() < 1e-12));
    }

    #[test]
    fn positive_rows_are_inside_the_ball() {
        let mut rng = RngStream::new(5);
        for (n, p) in [(2, 1.3), (3, 2.2), (4, 3.5)] {
            let batch = sample_copula(
                &mut rng,
                &CopulaParams::new(n, p),
                5000,
                VariantTag::Positive,
            )
            .unwrap();
            for r in batch.iter_rows() {
                assert!(r.iter().all(|&v| (0.0..=1.0).contains(&v)));
                assert!(lp_norm(r, p) <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn variants_have_their_supports() {
        let mut rng = RngStream::new(6);
        let params = CopulaParams::new(2, 2.5);
        let signed = sample_copula(&mut rng, &params, 4000, VariantTag::Signed).unwrap();
        assert!(signed.data.iter().all(|v| (-1.0..=1.0).contains(v)));
        assert!(signed.data.iter().any(|&v| v < 0.0));
        let circ = sample_copula(&mut rng, &params, 4000, VariantTag::Circular).unwrap();
        assert!(circ.data.iter().all(|v| (0.0..=1.0).contains(v)));
        for r in circ.iter_rows() {
            let centred: Vec<f64> = r.iter().map(|v| 2.0 * v - 1.0).collect();
            assert!(lp_norm(&centred, 2.5) <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn batches_are_reproducible() {
        let params = CopulaParams::new(3, 2.7);
        let a = sample_copula(&mut RngStream::new(8), &params, 300, VariantTag::Circular).unwrap();
        let b = sample_copula(&mut RngStream::new(8), &params, 300, VariantTag::Circular).unwrap();
        assert_eq!(a, b);
        let c = sample_copula(&mut RngStream::new(9), &params, 300, VariantTag::Circular).unwrap();
        assert_ne!(a.data, c.data);
        // A prefix of a larger batch equals the smaller batch.
        let d = sample_copula(&mut RngStream::new(8), &params, 600, VariantTag::Circular).unwrap();
        assert_eq!(&d.data[..900], &a.data[..]);
    }

    #[test]
    fn nonexistent_params_are_rejected() {
        let mut rng = RngStream::new(1);
        assert!(sample_copula(
            &mut rng,
            &CopulaParams::new(4, 2.0),
            10,
            VariantTag::Positive
        )
        .is_err());
        assert!(sample_copula(
            &mut rng,
            &CopulaParams::new(2, 2.0),
            0,
            VariantTag::Positive
        )
        .is_err());
    }

    #[test]
    fn projection_sampler() {
        let mut rng = RngStream::new(10);
        let batch = sample_integer_p_projection(&mut rng, 2, 3, 2000).unwrap();
        assert!(batch
            .iter_rows()
            .all(|r| (lp_norm(r, 2.0) - 1.0).abs() < 1e-12));

        let proj = sample_integer_p_projection(&mut rng, 2, 2, 100_000).unwrap();
        let direct = sample_copula(
            &mut rng,
            &CopulaParams::new(2, 2.0),
            100_000,
            VariantTag::Positive,
        )
        .unwrap();
        for j in 0..2 {
            assert!(ks_two_sample(&proj.column(j), &direct.column(j)) < 0.01);
        }

        let proj = sample_integer_p_projection(&mut rng, 3, 2, 100_000).unwrap();
        let r = pearson(&proj.column(0), &proj.column(1));
        assert!((r - rho(3.0).unwrap()).abs() < 0.01, "{r}");

        assert!(sample_integer_p_projection(&mut rng, 2, 4, 10).is_err());
    }

    #[test]
    fn infinite_p_is_independent_uniform() {
        let mut rng = RngStream::new(12);
        let batch = sample_copula(
            &mut rng,
            &CopulaParams::infinite(2),
            50_000,
            VariantTag::Positive,
        )
        .unwrap();
        assert!(pearson(&batch.column(0), &batch.column(1)).abs() < 0.02);
        assert!(ks_statistic(&batch.column(1), |u| u.clamp(0.0, 1.0)) < 0.01);
    }
}
