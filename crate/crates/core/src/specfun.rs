//! Special functions and scalar samplers.
//!
//! Everything else in the crate sits on top of these: log-Gamma for density
//! constants, digamma for the correlation monotonicity check, the regularized
//! incomplete Beta for marginal and radial CDFs, and Gamma/Beta/p-generalized
//! normal draws for the samplers.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Deterministic, splittable random stream.
///
/// A stream is identified by `(seed, stream_id)`. Two streams with the same
/// pair produce identical sequences; different ids give independent
/// sequences derived from the same seed.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::derive(seed, 0)
    }

    pub fn derive(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    /// A sub-stream of this stream's seed. Does not consume from `self`.
    pub fn substream(&self, id: u64) -> Self {
        Self::derive(self.seed, id)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draw on `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw on the open interval `(0, 1)`.
    pub fn uniform_open(&mut self) -> f64 {
        ((self.inner.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Fair random sign, `+1.0` or `-1.0`.
    pub fn sign(&mut self) -> f64 {
        if self.inner.next_u32() & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Lemire-style rejection keeps the draw unbiased.
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX - n + 1) % n;
        loop {
            let v = self.inner.next_u64();
            if v <= zone {
                return (v % n) as usize;
            }
        }
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "{name} must be positive and finite, got {x}"
        )))
    }
}

const LANCZOS_G: f64 = 5.242_187_5;
const LANCZOS_COEF: [f64; 14] = [
    57.156_235_665_862_923_5,
    -59.597_960_355_475_491_2,
    14.136_097_974_741_747_1,
    -0.491_913_816_097_620_199,
    0.339_946_499_848_118_887e-4,
    0.465_236_289_270_485_756e-4,
    -0.983_744_753_048_795_646e-4,
    0.158_088_703_224_912_494e-3,
    -0.210_264_441_724_104_883e-3,
    0.217_439_618_115_212_643e-3,
    -0.164_318_106_536_763_890e-3,
    0.844_182_239_838_527_433e-4,
    -0.261_908_384_015_814_087e-4,
    0.368_991_826_595_316_234e-5,
];

fn lanczos_ln_gamma(x: f64) -> f64 {
    let mut y = x;
    let tmp = x + LANCZOS_G;
    let tmp = (x + 0.5) * tmp.ln() - tmp;
    let mut ser = 0.999_999_999_999_997_092;
    for c in LANCZOS_COEF {
        y += 1.0;
        ser += c / y;
    }
    tmp + (2.506_628_274_631_000_5 * ser / x).ln()
}

/// `ln Γ(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    check_positive("log_gamma argument", x)?;
    Ok(ln_gamma_unchecked(x))
}

/// `ln Γ(x)` without argument validation; `x` must be positive and finite.
pub(crate) fn ln_gamma_unchecked(x: f64) -> f64 {
    if x == 1.0 || x == 2.0 {
        return 0.0;
    }
    if x < 0.5 {
        // Γ(x) = Γ(x + 1) / x keeps the Lanczos sum in its accurate range.
        lanczos_ln_gamma(x + 1.0) - x.ln()
    } else {
        lanczos_ln_gamma(x)
    }
}

/// `ln B(a, b)`.
pub(crate) fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma_unchecked(a) + ln_gamma_unchecked(b) - ln_gamma_unchecked(a + b)
}

/// Digamma function ψ(x) = Γ'(x)/Γ(x) for `x > 0`.
///
/// Shifts the argument above 10 with ψ(x) = ψ(x + 1) − 1/x and finishes with
/// the asymptotic Bernoulli expansion.
pub fn digamma(x: f64) -> Result<f64> {
    check_positive("digamma argument", x)?;
    let mut x = x;
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    // B2k / 2k for k = 1..7
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2
                                        * (1.0 / 132.0
                                            - inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
    Ok(acc + x.ln() - 0.5 / x - series)
}

/// Regularized incomplete Beta function `I_x(alpha, beta)`.
///
/// Returns 0 for `x <= 0` and 1 for `x >= 1`.
pub fn beta_cdf(x: f64, alpha: f64, beta: f64) -> Result<f64> {
    check_positive("alpha", alpha)?;
    check_positive("beta", beta)?;
    if x.is_nan() {
        return Err(Error::domain("beta_cdf evaluated at NaN"));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    if x >= 1.0 {
        return Ok(1.0);
    }
    Ok(regularized_beta(x, x.ln(), (-x).ln_1p(), alpha, beta))
}

/// `I_x(a, b)` with `ln x` and `ln(1 - x)` supplied by the caller.
///
/// Callers evaluating at `x = r^p` for large `p` pass `ln x = p ln r`
/// directly, so the prefactor `x^a` survives even when `x` itself
/// underflows to zero.
pub(crate) fn regularized_beta(x: f64, ln_x: f64, ln_1mx: f64, a: f64, b: f64) -> f64 {
    let ln_front = a * ln_x + b * ln_1mx - ln_beta(a, b);
    let value = if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_continued_fraction(x, a, b) / a
    } else {
        let y = 1.0 - x;
        1.0 - ln_front.exp() * beta_continued_fraction(y, b, a) / b
    };
    value.clamp(0.0, 1.0)
}

/// Modified Lentz evaluation of the incomplete Beta continued fraction.
fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    const MAX_ITER: usize = 10_000;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Natural log of a Gamma(shape, 1) draw.
///
/// Working in log space lets shapes far below one (which appear as `1/p` or
/// `n/p` for large `p`) produce draws whose magnitude is below `f64::MIN_POSITIVE`.
pub(crate) fn sample_ln_gamma(rng: &mut RngStream, shape: f64) -> f64 {
    if shape < 1.0 {
        // G(a) = G(a + 1) * U^(1/a)
        let boost = rng.uniform_open().ln() / shape;
        return sample_gamma_marsaglia(rng, shape + 1.0).ln() + boost;
    }
    sample_gamma_marsaglia(rng, shape).ln()
}

/// Marsaglia-Tsang squeeze for `shape >= 1`.
fn sample_gamma_marsaglia(rng: &mut RngStream, shape: f64) -> f64 {
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let (x, v) = loop {
            let x = rng.standard_normal();
            let v = 1.0 + c * x;
            if v > 0.0 {
                break (x, v * v * v);
            }
        };
        let u = rng.uniform_open();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 {
            return d * v;
        }
        if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// One Gamma(shape, 1) draw.
pub fn sample_gamma(rng: &mut RngStream, shape: f64) -> Result<f64> {
    check_positive("gamma shape", shape)?;
    Ok(sample_ln_gamma(rng, shape).exp())
}

/// `ln` of a Beta(alpha, beta) draw built from two Gamma draws.
pub(crate) fn sample_ln_beta(rng: &mut RngStream, alpha: f64, beta: f64) -> f64 {
    let la = sample_ln_gamma(rng, alpha);
    let lb = sample_ln_gamma(rng, beta);
    // ln(Ga / (Ga + Gb)) = -ln(1 + exp(lb - la))
    let diff = lb - la;
    if diff > 0.0 {
        -(diff + (-diff).exp().ln_1p())
    } else {
        -diff.exp().ln_1p()
    }
}

/// One Beta(alpha, beta) draw as `G1 / (G1 + G2)`.
pub fn sample_beta(rng: &mut RngStream, alpha: f64, beta: f64) -> Result<f64> {
    check_positive("alpha", alpha)?;
    check_positive("beta", beta)?;
    Ok(sample_ln_beta(rng, alpha, beta).exp())
}

/// `|X|` for `X` p-generalized normal: `(2T)^(1/p)` with `T ~ Gamma(1/p)`.
pub(crate) fn sample_pgen_normal_abs(rng: &mut RngStream, p: f64) -> f64 {
    ((std::f64::consts::LN_2 + sample_ln_gamma(rng, 1.0 / p)) / p).exp()
}

/// One draw from the p-generalized normal law with density proportional to
/// `exp(-|x|^p / 2)`.
pub fn sample_pgen_normal(rng: &mut RngStream, p: f64) -> Result<f64> {
    if !(1.0..f64::INFINITY).contains(&p) {
        return Err(Error::domain(format!(
            "p-generalized normal needs finite p >= 1, got {p}"
        )));
    }
    let magnitude = sample_pgen_normal_abs(rng, p);
    Ok(rng.sign() * magnitude)
}
