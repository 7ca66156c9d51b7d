//! Generalized Gini mean difference `S_β = E‖X - Y‖₂^β` and a pairwise-swap
//! local search over discretized bivariate copulas.
//!
//! A discretized copula on `m` grid points is a permutation `σ` placing mass
//! `1/m` on each `(uᵢ, u_σ(i))` with `uᵢ = (i + 1/2)/m`. The search maximizes
//! `S_β` over permutations by accepting any strictly improving transposition
//! until a full sweep over all pairs finds none.

use rayon::prelude::*;
use serde::Serialize;

use crate::copula::{lp_norm, CopulaParams, VariantTag};
use crate::error::{Error, Result};
use crate::sampler::sample_copula;
use crate::specfun::RngStream;

/// Above this many points [`s_beta_empirical`] is usually run with pair subsampling.
pub const EXACT_PAIR_LIMIT: usize = 20_000;

/// Relative improvement a swap must exceed to be accepted.
pub const IMPROVEMENT_TOL: f64 = 1e-12;

// Largest m for which the optimizer tabulates ‖·‖^β over grid offsets.
const TABLE_LIMIT: usize = 4096;

// Largest m for which the optimizer keeps the m × m placement sums.
const SCREEN_LIMIT: usize = 2048;

// Slack, relative to the objective, between the screening delta and the
// acceptance threshold; far above the drift of the incremental sums.
const SCREEN_MARGIN: f64 = 1e-9;

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 2.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "beta must lie in (0, 2), got {beta}"
        )))
    }
}

#[inline]
fn pow_half(d2: f64, beta: f64) -> f64 {
    if beta == 1.0 {
        d2.sqrt()
    } else {
        d2.powf(0.5 * beta)
    }
}

/// Pairwise (cascade) summation of a slice.
fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 64 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// How [`s_beta_empirical`] visits pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PairSampling {
    /// Every ordered pair `i ≠ j`.
    All,
    /// `pairs` uniformly drawn pairs `i ≠ j`, keyed by `seed`.
    Subsample { pairs: usize, seed: u64 },
}

/// An `S_β` estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SBetaEstimate {
    pub value: f64,
    /// For exact evaluation, the first-order U-statistic error
    /// `sqrt(4 Var(h₁) / m)`; for subsampling, the spread of the sampled pair
    /// terms over `sqrt(pairs)`, conditional on the points.
    pub std_error: f64,
    pub pairs: u64,
}

fn check_points(points: &[f64], dim: usize) -> Result<usize> {
    if dim == 0 || !points.len().is_multiple_of(dim) {
        return Err(Error::domain(
            "point buffer length is not a multiple of the dimension",
        ));
    }
    let m = points.len() / dim;
    if m < 2 {
        return Err(Error::domain(format!("need at least 2 points, got {m}")));
    }
    Ok(m)
}

#[inline]
fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// U-statistic `1/(m(m-1)) Σ_{i≠j} ‖xᵢ - xⱼ‖₂^β` over row-major `points`.
pub fn s_beta_empirical(
    points: &[f64],
    dim: usize,
    beta: f64,
    sampling: PairSampling,
) -> Result<SBetaEstimate> {
    check_beta(beta)?;
    let m = check_points(points, dim)?;
    match sampling {
        PairSampling::All => {
            let row_means: Vec<f64> = (0..m)
                .into_par_iter()
                .map(|i| {
                    let xi = &points[i * dim..(i + 1) * dim];
                    let terms: Vec<f64> = points
                        .chunks_exact(dim)
                        .map(|xj| pow_half(dist2(xi, xj), beta))
                        .collect();
                    pairwise_sum(&terms) / (m - 1) as f64
                })
                .collect();
            let value = pairwise_sum(&row_means) / m as f64;
            let var = row_means
                .iter()
                .map(|h| (h - value) * (h - value))
                .sum::<f64>()
                / (m - 1).max(1) as f64;
            Ok(SBetaEstimate {
                value,
                std_error: (4.0 * var / m as f64).sqrt(),
                pairs: (m as u64) * (m as u64 - 1),
            })
        }
        PairSampling::Subsample { pairs, seed } => {
            if pairs < 2 {
                return Err(Error::domain("subsampling needs at least 2 pairs"));
            }
            let mut rng = RngStream::new(seed);
            let terms: Vec<f64> = (0..pairs)
                .map(|_| {
                    let i = rng.index(m);
                    let mut j = rng.index(m - 1);
                    if j >= i {
                        j += 1;
                    }
                    pow_half(
                        dist2(
                            &points[i * dim..(i + 1) * dim],
                            &points[j * dim..(j + 1) * dim],
                        ),
                        beta,
                    )
                })
                .collect();
            let value = pairwise_sum(&terms) / pairs as f64;
            let var =
                terms.iter().map(|t| (t - value) * (t - value)).sum::<f64>() / (pairs - 1) as f64;
            Ok(SBetaEstimate {
                value,
                std_error: (var / pairs as f64).sqrt(),
                pairs: pairs as u64,
            })
        }
    }
}

/// A permutation coupling on the midpoint grid `uᵢ = (i + 1/2)/m`.
///
/// Indices are zero-based here; files written by the CLI are one-based.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PermutationCoupling {
    sigma: Vec<usize>,
}

impl PermutationCoupling {
    pub fn new(sigma: Vec<usize>) -> Result<Self> {
        let m = sigma.len();
        if m < 2 {
            return Err(Error::domain("a coupling needs at least 2 grid points"));
        }
        let mut seen = vec![false; m];
        for &s in &sigma {
            if s >= m || seen[s] {
                return Err(Error::domain("sigma is not a permutation of 0..m"));
            }
            seen[s] = true;
        }
        Ok(Self { sigma })
    }

    pub fn identity(m: usize) -> Result<Self> {
        Self::new((0..m).collect())
    }

    pub fn reversal(m: usize) -> Result<Self> {
        Self::new((0..m).rev().collect())
    }

    pub fn random(rng: &mut RngStream, m: usize) -> Result<Self> {
        let mut sigma: Vec<usize> = (0..m).collect();
        rng.shuffle(&mut sigma);
        Self::new(sigma)
    }

    pub fn m(&self) -> usize {
        self.sigma.len()
    }

    pub fn sigma(&self) -> &[usize] {
        &self.sigma
    }

    pub fn grid(&self, i: usize) -> f64 {
        (i as f64 + 0.5) / self.m() as f64
    }

    /// Support points `(uᵢ, u_σ(i))`, row-major.
    pub fn points(&self) -> Vec<f64> {
        (0..self.m())
            .flat_map(|i| [self.grid(i), self.grid(self.sigma[i])])
            .collect()
    }

    pub fn swap(&mut self, i: usize, j: usize) {
        self.sigma.swap(i, j);
    }
}

/// `S_β` of the discrete coupling.
pub fn coupling_objective(c: &PermutationCoupling, beta: f64) -> Result<f64> {
    Ok(s_beta_empirical(&c.points(), 2, beta, PairSampling::All)?.value)
}

/// Change in [`coupling_objective`] from exchanging `σ(i)` and `σ(j)`.
///
/// Only pairs touching `i` or `j` change, and the `(i, j)` distance itself is
/// invariant under the exchange, so this costs `O(m)`.
pub fn swap_delta(c: &PermutationCoupling, beta: f64, i: usize, j: usize) -> Result<f64> {
    check_beta(beta)?;
    let m = c.m();
    if i >= m || j >= m {
        return Err(Error::domain(format!(
            "swap indices ({i}, {j}) out of range for m = {m}"
        )));
    }
    if i == j {
        return Ok(0.0);
    }
    let (si, sj) = (c.grid(c.sigma[i]), c.grid(c.sigma[j]));
    let (ui, uj) = (c.grid(i), c.grid(j));
    let mut acc = 0.0;
    for k in 0..m {
        if k == i || k == j {
            continue;
        }
        let (uk, sk) = (c.grid(k), c.grid(c.sigma[k]));
        let d = |u: f64, s: f64| pow_half((u - uk) * (u - uk) + (s - sk) * (s - sk), beta);
        acc += d(ui, sj) + d(uj, si) - d(ui, si) - d(uj, sj);
    }
    Ok(2.0 * acc / (m as f64 * (m - 1) as f64))
}

/// `‖·‖^β` between two grid points, by integer offsets.
enum Distances {
    Table { m: usize, values: Vec<f64> },
    Direct { m: f64, beta: f64 },
}

impl Distances {
    fn new(m: usize, beta: f64) -> Self {
        if m <= TABLE_LIMIT {
            let mf = m as f64;
            let mut values = vec![0.0; m * m];
            for a in 0..m {
                for b in 0..m {
                    let (x, y) = (a as f64 / mf, b as f64 / mf);
                    values[a * m + b] = pow_half(x * x + y * y, beta);
                }
            }
            Distances::Table { m, values }
        } else {
            Distances::Direct { m: m as f64, beta }
        }
    }

    #[inline]
    fn get(&self, a: usize, b: usize) -> f64 {
        match self {
            Distances::Table { m, values } => values[a * m + b],
            Distances::Direct { m, beta } => {
                let (x, y) = (a as f64 / m, b as f64 / m);
                pow_half(x * x + y * y, *beta)
            }
        }
    }
}

/// Incremental state for the local search: unnormalized row sums
/// `rᵢ = Σₖ ‖Pᵢ - Pₖ‖^β` over the current coupling.
struct SwapState<'a> {
    sigma: Vec<usize>,
    rows: Vec<f64>,
    dist: &'a Distances,
}

impl<'a> SwapState<'a> {
    fn new(sigma: Vec<usize>, dist: &'a Distances) -> Self {
        let mut s = Self {
            rows: vec![0.0; sigma.len()],
            sigma,
            dist,
        };
        s.refresh();
        s
    }

    fn row_sum(&self, i: usize, si: usize) -> f64 {
        (0..self.sigma.len())
            .map(|k| self.dist.get(i.abs_diff(k), si.abs_diff(self.sigma[k])))
            .sum()
    }

    fn refresh(&mut self) {
        let rows: Vec<f64> = (0..self.sigma.len())
            .map(|i| self.row_sum(i, self.sigma[i]))
            .collect();
        self.rows = rows;
    }

    fn total(&self) -> f64 {
        let m = self.sigma.len() as f64;
        pairwise_sum(&self.rows) / (m * (m - 1.0))
    }

    /// Unnormalized delta; divide by `m(m-1)/2` for the objective scale.
    fn delta(&self, i: usize, j: usize) -> f64 {
        let (si, sj) = (self.sigma[i], self.sigma[j]);
        let dij = i.abs_diff(j);
        let cross = self.dist.get(dij, si.abs_diff(sj));
        // row sums of the moved points; the k = i, j terms are dropped below
        let (mut new_i, mut new_j) = (0.0, 0.0);
        match self.dist {
            Distances::Table { m, values } => {
                let m = *m;
                let values = &values[..m * m];
                // four independent accumulators to break the add latency chain
                let mut acc = [0.0f64; 4];
                let chunks = self.sigma.chunks_exact(4);
                let tail = chunks.remainder();
                for (c, chunk) in chunks.enumerate() {
                    for (l, &sk) in chunk.iter().enumerate() {
                        let k = 4 * c + l;
                        acc[l] += values[i.abs_diff(k) * m + sj.abs_diff(sk)]
                            + values[j.abs_diff(k) * m + si.abs_diff(sk)];
                    }
                }
                for (l, &sk) in tail.iter().enumerate() {
                    let k = self.sigma.len() - tail.len() + l;
                    acc[l] += values[i.abs_diff(k) * m + sj.abs_diff(sk)]
                        + values[j.abs_diff(k) * m + si.abs_diff(sk)];
                }
                new_i = (acc[0] + acc[1]) + (acc[2] + acc[3]);
            }
            Distances::Direct { .. } => {
                for (k, &sk) in self.sigma.iter().enumerate() {
                    new_i += self.dist.get(i.abs_diff(k), sj.abs_diff(sk));
                    new_j += self.dist.get(j.abs_diff(k), si.abs_diff(sk));
                }
            }
        }
        let drop = self.dist.get(0, sj.abs_diff(si)) + self.dist.get(dij, 0);
        let old = self.rows[i] - cross + self.rows[j] - cross;
        (new_i - drop) + (new_j - drop) - old
    }

    fn apply(&mut self, i: usize, j: usize) {
        let (si, sj) = (self.sigma[i], self.sigma[j]);
        for k in 0..self.sigma.len() {
            if k == i || k == j {
                continue;
            }
            let sk = self.sigma[k];
            let (di, dj) = (i.abs_diff(k), j.abs_diff(k));
            self.rows[k] += self.dist.get(di, sj.abs_diff(sk)) - self.dist.get(di, si.abs_diff(sk))
                + self.dist.get(dj, si.abs_diff(sk))
                - self.dist.get(dj, sj.abs_diff(sk));
        }
        self.sigma.swap(i, j);
        self.rows[i] = self.row_sum(i, sj);
        self.rows[j] = self.row_sum(j, si);
    }
}

/// `R[a][s] = Σₖ ‖(a, s) - (k, σₖ)‖^β` for every row `a` and column `s`, so
/// the delta of any swap is four lookups. Used to screen candidates once few
/// swaps are accepted per sweep; the exact O(m) delta still decides.
struct PlacementSums {
    m: usize,
    /// `ext[d][x + m - 1] = ‖(d, x)‖^β` for `|x| < m`.
    ext: Vec<f64>,
    sums: Vec<f64>,
}

impl PlacementSums {
    fn new(m: usize, beta: f64) -> Self {
        let mf = m as f64;
        let w = 2 * m - 1;
        let mut ext = vec![0.0; m * w];
        for d in 0..m {
            for x in 0..w {
                // same expression as the distance table, bit for bit
                let (a, b) = (d as f64 / mf, x.abs_diff(m - 1) as f64 / mf);
                ext[d * w + x] = pow_half(a * a + b * b, beta);
            }
        }
        Self {
            m,
            ext,
            sums: vec![0.0; m * m],
        }
    }

    #[inline]
    fn ext_row(&self, d: usize, s: usize) -> &[f64] {
        // entries ‖(d, t - s)‖^β for t = 0..m
        let start = d * (2 * self.m - 1) + (self.m - 1 - s);
        &self.ext[start..start + self.m]
    }

    fn rebuild(&mut self, sigma: &[usize]) {
        let m = self.m;
        let mut sums = std::mem::take(&mut self.sums);
        sums.par_chunks_mut(m).enumerate().for_each(|(a, row)| {
            row.fill(0.0);
            for (k, &sk) in sigma.iter().enumerate() {
                for (r, e) in row.iter_mut().zip(self.ext_row(a.abs_diff(k), sk)) {
                    *r += e;
                }
            }
        });
        self.sums = sums;
    }

    #[inline]
    fn at(&self, a: usize, s: usize) -> f64 {
        self.sums[a * self.m + s]
    }

    /// Unnormalized delta of swapping `i` and `j`, up to accumulated drift.
    fn delta(&self, i: usize, j: usize, si: usize, sj: usize) -> f64 {
        let dij = i.abs_diff(j);
        let off = self.m - 1;
        let w = 2 * self.m - 1;
        let cross = self.ext[dij * w + off + si.abs_diff(sj)];
        let drop = self.ext[off + si.abs_diff(sj)] + self.ext[dij * w + off];
        self.at(i, sj) + self.at(j, si) - self.at(i, si) - self.at(j, sj) - 2.0 * drop + 2.0 * cross
    }

    /// Moves point `i` from column `si` to `sj` and point `j` the other way.
    fn apply(&mut self, i: usize, j: usize, si: usize, sj: usize) {
        let m = self.m;
        let mut sums = std::mem::take(&mut self.sums);
        for (a, row) in sums.chunks_exact_mut(m).enumerate() {
            let (di, dj) = (a.abs_diff(i), a.abs_diff(j));
            let (i_new, i_old) = (self.ext_row(di, sj), self.ext_row(di, si));
            let (j_new, j_old) = (self.ext_row(dj, si), self.ext_row(dj, sj));
            for t in 0..m {
                row[t] += (i_new[t] - i_old[t]) + (j_new[t] - j_old[t]);
            }
        }
        self.sums = sums;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SwapOptions {
    pub max_sweeps: usize,
    pub restarts: usize,
}

impl Default for SwapOptions {
    fn default() -> Self {
        Self {
            max_sweeps: 1000,
            restarts: 1,
        }
    }
}

/// Objective after one sweep of one restart.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceEntry {
    pub restart: usize,
    pub sweep: usize,
    pub objective: f64,
    pub accepted: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SwapResult {
    pub coupling: PermutationCoupling,
    pub objective: f64,
    /// Sweeps run by the restart that produced `coupling`.
    pub sweeps_used: usize,
    /// Whether that restart ended on a sweep without improvement.
    pub locally_optimal: bool,
    pub trace: Vec<TraceEntry>,
}

/// Pairwise-swap local search for `max S_β` over permutation couplings.
pub fn swap_optimize(
    rng: &mut RngStream,
    m: usize,
    beta: f64,
    options: SwapOptions,
) -> Result<SwapResult> {
    swap_search(rng, m, beta, options, true)
}

fn swap_search(
    rng: &mut RngStream,
    m: usize,
    beta: f64,
    options: SwapOptions,
    screening: bool,
) -> Result<SwapResult> {
    check_beta(beta)?;
    if m < 2 {
        return Err(Error::domain(format!(
            "grid size must be at least 2, got {m}"
        )));
    }
    if options.restarts == 0 || options.max_sweeps == 0 {
        return Err(Error::domain("restarts and max_sweeps must be positive"));
    }
    let dist = Distances::new(m, beta);
    let mut screen = (screening && m <= SCREEN_LIMIT).then(|| PlacementSums::new(m, beta));
    let half_norm = (m * (m - 1)) as f64 / 2.0;
    let mut pairs: Vec<(u32, u32)> = (0..m as u32)
        .flat_map(|i| (i + 1..m as u32).map(move |j| (i, j)))
        .collect();
    let mut trace = Vec::new();
    let mut best: Option<(Vec<usize>, f64, usize, bool)> = None;

    for restart in 0..options.restarts {
        let start = PermutationCoupling::random(rng, m)?;
        let mut state = SwapState::new(start.sigma, &dist);
        let mut objective = state.total();
        let mut sweeps = 0;
        let mut converged = false;
        let mut screen_fresh = false;
        let mut last_accepted = usize::MAX;
        while sweeps < options.max_sweeps {
            sweeps += 1;
            let sweep_start = objective;
            rng.shuffle(&mut pairs);
            // screening pays off once a sweep moves few points
            let sums = match screen.as_mut() {
                Some(ps) if last_accepted <= m => {
                    if !screen_fresh {
                        ps.rebuild(&state.sigma);
                        screen_fresh = true;
                    }
                    Some(ps)
                }
                _ => {
                    screen_fresh = false;
                    None
                }
            };
            let mut accepted = 0;
            match sums {
                Some(ps) => {
                    for &(i, j) in &pairs {
                        let (i, j) = (i as usize, j as usize);
                        let threshold = IMPROVEMENT_TOL * objective.abs();
                        let (si, sj) = (state.sigma[i], state.sigma[j]);
                        if ps.delta(i, j, si, sj) / half_norm
                            <= threshold - SCREEN_MARGIN * objective.abs()
                        {
                            continue;
                        }
                        let delta = state.delta(i, j) / half_norm;
                        if delta > threshold {
                            state.apply(i, j);
                            ps.apply(i, j, si, sj);
                            objective += delta;
                            accepted += 1;
                        }
                    }
                }
                None => {
                    for &(i, j) in &pairs {
                        let (i, j) = (i as usize, j as usize);
                        let delta = state.delta(i, j) / half_norm;
                        if delta > IMPROVEMENT_TOL * objective.abs() {
                            state.apply(i, j);
                            objective += delta;
                            accepted += 1;
                        }
                    }
                }
            }
            // re-anchor the running sums against drift
            state.refresh();
            let fresh = state.total();
            debug_assert!(fresh >= sweep_start - 1e-9 * sweep_start.abs());
            objective = fresh;
            last_accepted = accepted;
            trace.push(TraceEntry {
                restart,
                sweep: sweeps,
                objective,
                accepted,
            });
            if accepted == 0 {
                converged = true;
                break;
            }
        }
        if best.as_ref().is_none_or(|b| objective > b.1) {
            best = Some((state.sigma, objective, sweeps, converged));
        }
    }

    let (sigma, _, sweeps_used, locally_optimal) = best.expect("at least one restart");
    let coupling = PermutationCoupling::new(sigma)?;
    let objective = coupling_objective(&coupling, beta)?;
    Ok(SwapResult {
        coupling,
        objective,
        sweeps_used,
        locally_optimal,
        trace,
    })
}

/// Fraction of support points with `‖2x - 1‖ₚ <= 1 + slack`.
pub fn support_inside_fraction(c: &PermutationCoupling, p: f64, slack: f64) -> f64 {
    let pts = c.points();
    let inside = pts
        .chunks_exact(2)
        .filter(|x| lp_norm(&[2.0 * x[0] - 1.0, 2.0 * x[1] - 1.0], p) <= 1.0 + slack)
        .count();
    inside as f64 / c.m() as f64
}

/// Heuristic optimum next to the circular `L_{3-β}` copula's `S_β`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConjectureReport {
    pub beta: f64,
    pub p: f64,
    pub m: usize,
    pub heuristic_value: f64,
    pub copula_value_mc: f64,
    pub copula_value_se: f64,
    pub mc_samples: usize,
    pub mc_sampling: PairSampling,
    pub support_inside_fraction: f64,
    pub sweeps_used: usize,
    pub locally_optimal: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConjectureRun {
    pub report: ConjectureReport,
    pub swap: SwapResult,
}

/// Pair sampling used for Monte Carlo `S_β` of `mc_samples` points.
pub fn default_pair_sampling(mc_samples: usize, seed: u64) -> PairSampling {
    if mc_samples <= EXACT_PAIR_LIMIT {
        PairSampling::All
    } else {
        PairSampling::Subsample {
            pairs: 50 * mc_samples,
            seed,
        }
    }
}

/// Runs the swap search and the Monte Carlo reference side by side.
pub fn run_conjecture(
    rng: &mut RngStream,
    beta: f64,
    m: usize,
    mc_samples: usize,
    options: SwapOptions,
) -> Result<ConjectureRun> {
    check_beta(beta)?;
    if mc_samples < 2 {
        return Err(Error::domain("need at least 2 Monte Carlo samples"));
    }
    let p = 3.0 - beta;
    let swap = swap_optimize(rng, m, beta, options)?;
    let batch = sample_copula(
        rng,
        &CopulaParams::new(2, p),
        mc_samples,
        VariantTag::Circular,
    )?;
    let sampling = default_pair_sampling(mc_samples, rand::RngCore::next_u64(rng));
    let mc = s_beta_empirical(&batch.data, 2, beta, sampling)?;
    let report = ConjectureReport {
        beta,
        p,
        m,
        heuristic_value: swap.objective,
        copula_value_mc: mc.value,
        copula_value_se: mc.std_error,
        mc_samples,
        mc_sampling: sampling,
        support_inside_fraction: support_inside_fraction(&swap.coupling, p, 0.0),
        sweeps_used: swap.sweeps_used,
        locally_optimal: swap.locally_optimal,
    };
    Ok(ConjectureRun { report, swap })
}

pub fn conjecture_report(
    rng: &mut RngStream,
    beta: f64,
    m: usize,
    mc_samples: usize,
) -> Result<ConjectureReport> {
    Ok(run_conjecture(rng, beta, m, mc_samples, SwapOptions::default())?.report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn s_beta_small_cases() {
        let v = s_beta_empirical(&[0.3, 0.3, 0.3, 0.3], 2, 1.3, PairSampling::All).unwrap();
        assert_eq!(v.value, 0.0);
        let v = s_beta_empirical(&[0.0, 0.0, 1.0, 1.0], 2, 1.0, PairSampling::All).unwrap();
        assert!((v.value - 2f64.sqrt()).abs() < 1e-15);
        assert!(s_beta_empirical(&[0.0, 0.0], 2, 1.0, PairSampling::All).is_err());
        assert!(s_beta_empirical(&[0.0, 0.0, 1.0, 1.0], 2, 0.0, PairSampling::All).is_err());
        assert!(s_beta_empirical(&[0.0, 0.0, 1.0, 1.0], 2, 2.0, PairSampling::All).is_err());
    }

    #[test]
    fn s_beta_scaling_and_translation() {
        let mut rng = RngStream::new(1);
        let pts: Vec<f64> = (0..200).map(|_| rng.uniform()).collect();
        let beta = 0.7;
        let base = s_beta_empirical(&pts, 2, beta, PairSampling::All)
            .unwrap()
            .value;
        let scaled: Vec<f64> = pts.iter().map(|v| 3.0 * v).collect();
        let s = s_beta_empirical(&scaled, 2, beta, PairSampling::All)
            .unwrap()
            .value;
        assert!((s / base - 3f64.powf(beta)).abs() < 1e-12);
        let shifted: Vec<f64> = pts.iter().map(|v| v + 0.25).collect();
        let t = s_beta_empirical(&shifted, 2, beta, PairSampling::All)
            .unwrap()
            .value;
        assert!((t - base).abs() < 1e-12 * base);
    }

    #[test]
    fn subsampling_tracks_exact_value() {
        let mut rng = RngStream::new(2);
        let pts: Vec<f64> = (0..4000).map(|_| rng.uniform()).collect();
        let exact = s_beta_empirical(&pts, 2, 1.0, PairSampling::All).unwrap();
        let sub = s_beta_empirical(
            &pts,
            2,
            1.0,
            PairSampling::Subsample {
                pairs: 400_000,
                seed: 9,
            },
        )
        .unwrap();
        assert!((exact.value - sub.value).abs() < 4.0 * sub.std_error);
    }

    #[test]
    fn coupling_objective_at_m2() {
        let id = PermutationCoupling::identity(2).unwrap();
        let rev = PermutationCoupling::reversal(2).unwrap();
        let h = 2f64.sqrt() / 2.0;
        assert!((coupling_objective(&id, 1.0).unwrap() - h).abs() < 1e-15);
        assert!((coupling_objective(&rev, 1.0).unwrap() - h).abs() < 1e-15);
        assert!(PermutationCoupling::new(vec![0, 0, 1]).is_err());
    }

    #[test]
    fn swap_delta_matches_recompute_on_all_m3_swaps() {
        for sigma in [[0, 1, 2], [2, 0, 1], [1, 2, 0], [2, 1, 0]] {
            for beta in [0.5, 1.0, 1.5] {
                let c = PermutationCoupling::new(sigma.to_vec()).unwrap();
                let before = coupling_objective(&c, beta).unwrap();
                for (i, j) in [(0, 1), (0, 2), (1, 2)] {
                    let mut d = c.clone();
                    d.swap(i, j);
                    let want = coupling_objective(&d, beta).unwrap() - before;
                    let got = swap_delta(&c, beta, i, j).unwrap();
                    assert!((got - want).abs() < 1e-14, "{sigma:?} {beta} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn swap_delta_agrees_with_incremental_state() {
        let mut rng = RngStream::new(3);
        let m = 60;
        let beta = 1.3;
        let c = PermutationCoupling::random(&mut rng, m).unwrap();
        let dist = Distances::new(m, beta);
        let state = SwapState::new(c.sigma().to_vec(), &dist);
        let half = (m * (m - 1)) as f64 / 2.0;
        for _ in 0..200 {
            let (i, j) = (rng.index(m), rng.index(m));
            if i == j {
                assert_eq!(swap_delta(&c, beta, i, j).unwrap(), 0.0);
                continue;
            }
            let a = swap_delta(&c, beta, i, j).unwrap();
            let b = state.delta(i, j) / half;
            assert!((a - b).abs() <= 1e-9 * coupling_objective(&c, beta).unwrap());
        }
    }

    #[test]
    fn double_swap_is_neutral() {
        let mut rng = RngStream::new(4);
        let mut c = PermutationCoupling::random(&mut rng, 30).unwrap();
        let d1 = swap_delta(&c, 0.8, 3, 17).unwrap();
        c.swap(3, 17);
        let d2 = swap_delta(&c, 0.8, 3, 17).unwrap();
        assert!((d1 + d2).abs() < 1e-12);
    }

    #[test]
    fn grid_relabeling_symmetry() {
        let mut rng = RngStream::new(5);
        let c = PermutationCoupling::random(&mut rng, 40).unwrap();
        let m = c.m();
        let mut mirrored = vec![0; m];
        for i in 0..m {
            mirrored[m - 1 - i] = m - 1 - c.sigma()[i];
        }
        let d = PermutationCoupling::new(mirrored).unwrap();
        for beta in [0.5, 1.0, 1.7] {
            let a = coupling_objective(&c, beta).unwrap();
            let b = coupling_objective(&d, beta).unwrap();
            assert!((a - b).abs() <= 1e-14 * a);
        }
    }

    #[test]
    fn optimizer_at_m2_picks_the_better_permutation() {
        for beta in [0.5, 1.0, 1.9] {
            let r = swap_optimize(
                &mut RngStream::new(6),
                2,
                beta,
                SwapOptions {
                    max_sweeps: 10,
                    restarts: 3,
                },
            )
            .unwrap();
            let best = coupling_objective(&PermutationCoupling::identity(2).unwrap(), beta)
                .unwrap()
                .max(coupling_objective(&PermutationCoupling::reversal(2).unwrap(), beta).unwrap());
            assert!((r.objective - best).abs() < 1e-15);
        }
    }

    #[test]
    fn optimizer_trace_is_monotone_and_locally_optimal() {
        let r = swap_optimize(
            &mut RngStream::new(7),
            50,
            1.2,
            SwapOptions {
                max_sweeps: 500,
                restarts: 2,
            },
        )
        .unwrap();
        for w in r.trace.windows(2) {
            if w[0].restart == w[1].restart {
                assert!(w[1].objective >= w[0].objective - 1e-12);
            }
        }
        assert!(r.locally_optimal);
        for i in 0..50 {
            for j in i + 1..50 {
                let d = swap_delta(&r.coupling, 1.2, i, j).unwrap();
                assert!(d <= IMPROVEMENT_TOL * r.objective + 1e-15, "({i},{j}) {d}");
            }
        }
    }

    #[test]
    fn screening_does_not_change_the_search() {
        for (m, beta, seed) in [(40, 1.0, 1), (150, 0.5, 2), (150, 1.5, 3), (300, 1.0, 4)] {
            let opts = SwapOptions {
                max_sweeps: 1000,
                restarts: 2,
            };
            let a = swap_search(&mut RngStream::new(seed), m, beta, opts, true).unwrap();
            let b = swap_search(&mut RngStream::new(seed), m, beta, opts, false).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn placement_sums_match_direct_deltas() {
        let (m, beta) = (50, 1.3);
        let mut rng = RngStream::new(9);
        let c = PermutationCoupling::random(&mut rng, m).unwrap();
        let dist = Distances::new(m, beta);
        let mut state = SwapState::new(c.sigma.clone(), &dist);
        let mut ps = PlacementSums::new(m, beta);
        ps.rebuild(&state.sigma);
        for _ in 0..200 {
            let (i, j) = (rng.index(m), rng.index(m));
            if i == j {
                continue;
            }
            let (si, sj) = (state.sigma[i], state.sigma[j]);
            let (fast, exact) = (ps.delta(i, j, si, sj), state.delta(i, j));
            assert!((fast - exact).abs() < 1e-10, "{fast} vs {exact}");
            if rng.uniform() < 0.3 {
                state.apply(i, j);
                ps.apply(i, j, si, sj);
            }
        }
    }

    #[test]
    fn optimizer_beats_trivial_couplings() {
        let m = 200;
        let r = swap_optimize(&mut RngStream::new(8), m, 1.0, SwapOptions::default()).unwrap();
        let id = coupling_objective(&PermutationCoupling::identity(m).unwrap(), 1.0).unwrap();
        let rev = coupling_objective(&PermutationCoupling::reversal(m).unwrap(), 1.0).unwrap();
        assert!(r.objective >= id && r.objective >= rev);
    }

    #[test]
    fn conjecture_rejects_closed_interval_ends() {
        let mut rng = RngStream::new(1);
        assert!(conjecture_report(&mut rng, 0.0, 10, 100).is_err());
        assert!(conjecture_report(&mut rng, 2.0, 10, 100).is_err());
    }
}
