//! Closed-form laws of the Lp-norm spherical copulas.
//!
//! Three variants share one underlying law:
//!
//! - **positive**: `X⁺ = R · U⁺` on `[0,1]^n`, supported on the positive
//!   part of the Lp unit ball;
//! - **signed**: `X = (Z₁X⁺₁, …, ZₙX⁺ₙ)` with i.i.d. fair signs `Zᵢ`, on `[-1,1]^n`;
//! - **circular**: `X° = (X + 1)/2`, back on `[0,1]^n`.
//!
//! For finite `p > n - 1` the positive density is
//!
//! ```text
//! c⁺(x) = (1 - ‖x‖ₚᵖ)^(-(n-1)/p) / (Γ(1 + 1/p)^(n-1) · Γ(1 - (n-1)/p)),   x ≥ 0, ‖x‖ₚ < 1
//! ```
//!
//! At `p = n - 1` the law lives on the sphere itself and has no density. At
//! `p = ∞` the copula is the independence copula.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::sampler::SampleBatch;
use crate::specfun::{digamma, ln_gamma_unchecked, regularized_beta, RngStream};

/// Shape parameter `p`, either a finite real or infinity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    Finite(f64),
    Infinite,
}

impl Shape {
    pub fn finite(self) -> Option<f64> {
        match self {
            Shape::Finite(p) => Some(p),
            Shape::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Shape::Infinite)
    }
}

impl From<f64> for Shape {
    fn from(p: f64) -> Self {
        if p == f64::INFINITY {
            Shape::Infinite
        } else {
            Shape::Finite(p)
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Finite(p) => write!(f, "{p}"),
            Shape::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
            return Ok(Shape::Infinite);
        }
        let p: f64 = t
            .parse()
            .map_err(|_| Error::Parse(format!("invalid shape `{s}`")))?;
        if p.is_nan() {
            return Err(Error::Parse(format!("invalid shape `{s}`")));
        }
        Ok(Shape::from(p))
    }
}

impl Serialize for Shape {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Shape::Finite(p) => serializer.serialize_f64(*p),
            Shape::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Shape {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(p) => Ok(Shape::from(p)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Dimension and shape. Construction is unchecked; law evaluations call
/// [`CopulaParams::check`] first.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CopulaParams {
    pub n: usize,
    pub p: Shape,
}

impl CopulaParams {
    pub fn new(n: usize, p: impl Into<Shape>) -> Self {
        Self { n, p: p.into() }
    }

    pub fn infinite(n: usize) -> Self {
        Self {
            n,
            p: Shape::Infinite,
        }
    }

    /// Errors unless the copula exists for these parameters.
    pub fn check(&self) -> Result<()> {
        if copula_exists(self.n, self.p)? {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "no Lp-norm spherical copula for n = {} and p = {}: finite p requires p >= n - 1 = {}",
                self.n,
                self.p,
                self.n - 1
            )))
        }
    }

    /// `p` as a finite real strictly above `n - 1`, the range with a density.
    fn absolutely_continuous_p(&self) -> Result<f64> {
        self.check()?;
        match self.p {
            Shape::Infinite => Err(Error::domain(
                "p = inf is the independence copula; use density_linf",
            )),
            Shape::Finite(p) if p == (self.n - 1) as f64 => Err(Error::Singular(format!(
                "p = n - 1 = {p}: the copula lives on the unit sphere and has no density"
            ))),
            Shape::Finite(p) => Ok(p),
        }
    }
}

/// Which transform of the underlying signed vector a sample or density refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantTag {
    Positive,
    Signed,
    Circular,
}

impl fmt::Display for VariantTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VariantTag::Positive => "positive",
            VariantTag::Signed => "signed",
            VariantTag::Circular => "circular",
        })
    }
}

impl FromStr for VariantTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" | "plus" => Ok(VariantTag::Positive),
            "signed" => Ok(VariantTag::Signed),
            "circular" | "circ" => Ok(VariantTag::Circular),
            other => Err(Error::domain(format!("unknown variant `{other}`"))),
        }
    }
}

/// Whether the n-dimensional copula with shape `p` exists.
pub fn copula_exists(n: usize, p: impl Into<Shape>) -> Result<bool> {
    if n < 2 {
        return Err(Error::domain(format!(
            "dimension must be at least 2, got {n}"
        )));
    }
    match p.into() {
        Shape::Infinite => Ok(true),
        Shape::Finite(p) if p.is_nan() => Err(Error::domain("p is NaN")),
        Shape::Finite(p) => Ok(p >= 1.0 && p >= (n - 1) as f64),
    }
}

/// Whether a `d`-variate copula with shape `p` extends to dimension `n > d`.
pub fn extendable(d: usize, n: usize, p: f64) -> Result<bool> {
    if !copula_exists(d, p)? {
        return Err(Error::domain(format!("no copula for d = {d}, p = {p}")));
    }
    if n <= d {
        return Err(Error::domain(format!(
            "target dimension {n} must exceed {d}"
        )));
    }
    if p.is_infinite() {
        return Ok(true);
    }
    Ok(n as f64 <= p + 1.0)
}

/// `ln Σ |xᵢ|^p`, factoring out the largest coordinate.
pub(crate) fn ln_sum_pow(x: &[f64], p: f64) -> f64 {
    let max = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return f64::NEG_INFINITY;
    }
    let scaled: f64 = x.iter().map(|v| (v.abs() / max).powf(p)).sum();
    p * max.ln() + scaled.ln()
}

/// The Lp norm, including `p = ∞`.
pub fn lp_norm(x: &[f64], p: impl Into<Shape>) -> f64 {
    match p.into() {
        Shape::Infinite => x.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        Shape::Finite(p) => {
            let max = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if max == 0.0 || max.is_infinite() {
                return max;
            }
            let scaled: f64 = x.iter().map(|v| (v.abs() / max).powf(p)).sum();
            max * scaled.powf(1.0 / p)
        }
    }
}

pub(crate) fn ln_density_constant(n: usize, p: f64) -> f64 {
    let k = (n - 1) as f64;
    -k * ln_gamma_unchecked(1.0 + 1.0 / p) - ln_gamma_unchecked(1.0 - k / p)
}

/// Positive-copula density as a function of the gap `1 - ‖x‖ₚᵖ`.
///
/// The density depends on `x` only through this gap. Returns 0 for
/// `gap <= 0` (on or outside the unit sphere).
pub fn density_from_gap(params: &CopulaParams, gap: f64) -> Result<f64> {
    let p = params.absolutely_continuous_p()?;
    if gap.is_nan() || gap > 1.0 {
        return Err(Error::domain(format!(
            "gap must lie in (-inf, 1], got {gap}"
        )));
    }
    if gap <= 0.0 {
        return Ok(0.0);
    }
    let k = (params.n - 1) as f64;
    Ok((ln_density_constant(params.n, p) - k / p * gap.ln()).exp())
}

/// Density of the positive copula on `[0,1]^n`.
pub fn density_positive(params: &CopulaParams, x: &[f64]) -> Result<f64> {
    Ok(log_density_positive(params, x)?.exp())
}

/// Log of [`density_positive`]; `-inf` outside the support.
pub fn log_density_positive(params: &CopulaParams, x: &[f64]) -> Result<f64> {
    let p = params.absolutely_continuous_p()?;
    check_point(params.n, x)?;
    Ok(ln_density_unchecked(
        params.n,
        p,
        ln_density_constant(params.n, p),
        x,
    ))
}

pub(crate) fn ln_density_unchecked(n: usize, p: f64, ln_const: f64, x: &[f64]) -> f64 {
    if x.iter().any(|&v| v < 0.0) {
        return f64::NEG_INFINITY;
    }
    let ln_s = ln_sum_pow(x, p);
    if ln_s >= 0.0 {
        return f64::NEG_INFINITY;
    }
    let gap = -ln_s.exp_m1();
    ln_const - (n - 1) as f64 / p * gap.ln()
}

/// Independence-copula density, the `p = ∞` member: 1 on the open unit cube.
pub fn density_linf(n: usize, x: &[f64]) -> Result<f64> {
    check_point(n, x)?;
    Ok(if x.iter().all(|&v| v > 0.0 && v < 1.0) {
        1.0
    } else {
        0.0
    })
}

fn check_point(n: usize, x: &[f64]) -> Result<()> {
    if x.len() != n {
        return Err(Error::domain(format!(
            "point has {} coordinates, expected {n}",
            x.len()
        )));
    }
    if x.iter().any(|v| v.is_nan()) {
        return Err(Error::domain("NaN coordinate"));
    }
    Ok(())
}

/// Density of any variant.
pub fn density_variant(params: &CopulaParams, x: &[f64], variant: VariantTag) -> Result<f64> {
    params.check()?;
    let n = params.n;
    check_point(n, x)?;
    match (params.p, variant) {
        (Shape::Infinite, VariantTag::Signed) => {
            let inside = x.iter().all(|&v| v > -1.0 && v < 1.0);
            Ok(if inside { 0.5f64.powi(n as i32) } else { 0.0 })
        }
        (Shape::Infinite, _) => density_linf(n, x),
        (_, VariantTag::Positive) => density_positive(params, x),
        (_, VariantTag::Signed) => {
            if x.iter().any(|&v| !(-1.0..=1.0).contains(&v)) {
                return Ok(0.0);
            }
            let abs: Vec<f64> = x.iter().map(|v| v.abs()).collect();
            Ok(density_positive(params, &abs)? * 0.5f64.powi(n as i32))
        }
        (_, VariantTag::Circular) => {
            if x.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Ok(0.0);
            }
            let folded: Vec<f64> = x.iter().map(|v| (2.0 * v - 1.0).abs()).collect();
            density_positive(params, &folded)
        }
    }
}

/// Law of the radius `R = ‖X⁺‖ₚ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadialLaw {
    /// `R^p ~ Beta(n/p, 1 - (n-1)/p)`, for `p > n - 1`.
    TransformedBeta { n: usize, p: f64 },
    /// `R = 1` almost surely, for `p = n - 1`.
    PointMassOne { n: usize },
    /// `R` distributed as the maximum of `n` uniforms, for `p = ∞`.
    LinfMax { n: usize },
}

pub fn radial_law(params: &CopulaParams) -> Result<RadialLaw> {
    params.check()?;
    let n = params.n;
    Ok(match params.p {
        Shape::Infinite => RadialLaw::LinfMax { n },
        Shape::Finite(p) if p == (n - 1) as f64 => RadialLaw::PointMassOne { n },
        Shape::Finite(p) => RadialLaw::TransformedBeta { n, p },
    })
}

impl RadialLaw {
    /// Beta shapes of `R^p` for the transformed-Beta case.
    pub fn beta_shapes(&self) -> Option<(f64, f64)> {
        match *self {
            RadialLaw::TransformedBeta { n, p } => {
                let n = n as f64;
                Some((n / p, 1.0 - (n - 1.0) / p))
            }
            _ => None,
        }
    }

    /// Density of `R`. The point mass has none; callers must branch on it.
    pub fn pdf(&self, r: f64) -> Result<f64> {
        match *self {
            RadialLaw::PointMassOne { .. } => Err(Error::Singular(
                "radius is identically one; no density".into(),
            )),
            _ if !(r > 0.0 && r < 1.0) => Ok(0.0),
            RadialLaw::LinfMax { n } => Ok(n as f64 * r.powi(n as i32 - 1)),
            RadialLaw::TransformedBeta { n, p } => {
                let k = (n - 1) as f64;
                let ln_c = ln_gamma_unchecked(1.0 / p)
                    - ln_gamma_unchecked(n as f64 / p)
                    - ln_gamma_unchecked(1.0 - k / p);
                let gap = -(p * r.ln()).exp_m1();
                Ok((ln_c + k * r.ln() - k / p * gap.ln()).exp())
            }
        }
    }

    /// `P(R <= r)`.
    pub fn cdf(&self, r: f64) -> f64 {
        if r.is_nan() {
            return f64::NAN;
        }
        match *self {
            RadialLaw::PointMassOne { .. } => {
                if r >= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            _ if r <= 0.0 => 0.0,
            _ if r >= 1.0 => 1.0,
            RadialLaw::LinfMax { n } => r.powi(n as i32),
            RadialLaw::TransformedBeta { p, .. } => {
                let (a, b) = self.beta_shapes().expect("transformed beta");
                let ln_x = p * r.ln();
                let x = ln_x.exp();
                regularized_beta(x, ln_x, (-x).ln_1p(), a, b)
            }
        }
    }
}

pub fn radial_pdf(law: &RadialLaw, r: f64) -> Result<f64> {
    law.pdf(r)
}

/// `E(R^p) = n / (p + 1)`.
pub fn radial_moment_p(params: &CopulaParams) -> Result<f64> {
    params.check()?;
    match params.p {
        Shape::Infinite => Err(Error::domain("E(R^p) is undefined for p = inf")),
        Shape::Finite(p) => Ok(params.n as f64 / (p + 1.0)),
    }
}

/// Pearson correlation of the bivariate positive copula,
/// `4 Γ(2/p)² / (Γ(1/p) Γ(3/p)) - 3`.
pub fn rho(p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::domain(format!("rho needs p >= 1, got {p}")));
    }
    if p == 1.0 {
        return Ok(-1.0);
    }
    if p.is_infinite() {
        return Ok(0.0);
    }
    let ln_ratio = 4f64.ln() + 2.0 * ln_gamma_unchecked(2.0 / p)
        - ln_gamma_unchecked(1.0 / p)
        - ln_gamma_unchecked(3.0 / p);
    Ok(ln_ratio.exp() - 3.0)
}

/// `4ψ(2x) - ψ(x) - 3ψ(3x)`, the derivative of `ln(Γ(2x)² / (Γ(x)Γ(3x)))`.
///
/// Negative on `(0, 1)`, which makes `rho` increasing in `p = 1/x`.
pub fn rho_log_derivative(x: f64) -> Result<f64> {
    Ok(4.0 * digamma(2.0 * x)? - digamma(x)? - 3.0 * digamma(3.0 * x)?)
}

/// CDF of one coordinate of the positive angular law, `|Uᵢ|^p ~ Beta(1/p, (n-1)/p)`.
pub fn angular_marginal_cdf(n: usize, p: f64, u: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::domain(format!(
            "dimension must be at least 2, got {n}"
        )));
    }
    if !(1.0..f64::INFINITY).contains(&p) {
        return Err(Error::domain(format!(
            "angular marginal needs finite p >= 1, got {p}"
        )));
    }
    if u.is_nan() {
        return Err(Error::domain("NaN argument"));
    }
    if u <= 0.0 {
        return Ok(0.0);
    }
    if u >= 1.0 {
        return Ok(1.0);
    }
    let ln_x = p * u.ln();
    let x = ln_x.exp();
    Ok(regularized_beta(
        x,
        ln_x,
        (-x).ln_1p(),
        1.0 / p,
        (n - 1) as f64 / p,
    ))
}

/// Moves a batch between variants.
///
/// Positive to signed draws one fresh sign per entry in row-major order; the
/// affine and absolute-value legs are deterministic and leave `rng` untouched.
pub fn transform(
    batch: &SampleBatch,
    target: VariantTag,
    rng: &mut RngStream,
) -> Result<SampleBatch> {
    let mut out = batch.clone();
    transform_in_place(&mut out.data, out.variant, target, rng);
    out.variant = target;
    Ok(out)
}

pub(crate) fn transform_in_place(
    data: &mut [f64],
    from: VariantTag,
    to: VariantTag,
    rng: &mut RngStream,
) {
    use VariantTag::*;
    match (from, to) {
        (a, b) if a == b => {}
        (Positive, Signed) => data.iter_mut().for_each(|v| *v *= rng.sign()),
        (Signed, Circular) => data.iter_mut().for_each(|v| *v = 0.5 * (*v + 1.0)),
        (Circular, Signed) => data.iter_mut().for_each(|v| *v = 2.0 * *v - 1.0),
        (Signed, Positive) => data.iter_mut().for_each(|v| *v = v.abs()),
        (Positive, Circular) => {
            transform_in_place(data, Positive, Signed, rng);
            transform_in_place(data, Signed, Circular, rng);
        }
        (Circular, Positive) => {
            transform_in_place(data, Circular, Signed, rng);
            transform_in_place(data, Signed, Positive, rng);
        }
        _ => unreachable!(),
    }
}

/// A draw from the uniform law on the positive part of the L∞ unit sphere:
/// `n` uniforms divided by their maximum.
pub fn linf_sphere_sample(rng: &mut RngStream, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::domain("dimension must be at least 1"));
    }
    let mut u: Vec<f64> = (0..n).map(|_| rng.uniform_open()).collect();
    let (argmax, max) =
        u.iter().copied().enumerate().fold(
            (0, 0.0),
            |best, (i, v)| if v > best.1 { (i, v) } else { best },
        );
    for (i, v) in u.iter_mut().enumerate() {
        *v = if i == argmax { 1.0 } else { *v / max };
    }
    Ok(u)
}

/// Joint CDF of the first `k = u.len()` coordinates of the L∞ sphere law:
/// the mixture `(1/n) Σᵢ U_{i:k} + ((n-k)/n) U_k`, right-continuous at the atoms.
pub fn linf_marginal_cdf(n: usize, u: &[f64]) -> Result<f64> {
    let k = u.len();
    if k == 0 || k > n {
        return Err(Error::domain(format!(
            "need 1 <= k <= n, got k = {k}, n = {n}"
        )));
    }
    if u.iter().any(|v| v.is_nan()) {
        return Err(Error::domain("NaN argument"));
    }
    let clamped: Vec<f64> = u.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let nf = n as f64;
    let interior = (n - k) as f64 / nf * clamped.iter().product::<f64>();
    let atoms: f64 = (0..k)
        .filter(|&i| clamped[i] >= 1.0)
        .map(|i| {
            clamped
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, v)| v)
                .product::<f64>()
        })
        .sum();
    Ok(interior + atoms / nf)
}
