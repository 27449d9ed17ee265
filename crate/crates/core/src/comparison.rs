//! Monte Carlo statistics for the ordering conclusion and the Picard tower.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{
    event_grid_for, integrate_on, integrate_tower, sample_noise, CoupledSystem, DelaySource, GridSpec, PathRecord,
    ProblemDynamics,
};
use crate::error::{Error, Result};
use crate::model::ComparisonPair;
use crate::randomness::RngPolicy;

/// Paths per reduction block. Block sums are combined in a fixed pairwise
/// tree, so results do not depend on the thread count.
pub const REDUCTION_BLOCK: usize = 256;

/// Tolerance of the filtered chain-violation count in tower reports.
pub const CHAIN_EPSILON: f64 = 1e-8;

trait Accumulator: Send + Sized {
    fn merge(self, other: Self) -> Self;
}

fn pairwise<A: Accumulator>(mut items: Vec<A>) -> Option<A> {
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut it = items.into_iter();
        while let Some(a) = it.next() {
            next.push(match it.next() {
                Some(b) => a.merge(b),
                None => a,
            });
        }
        items = next;
    }
    items.pop()
}

/// Accumulate `per_path(i)` for `i in 0..n_paths` into `A`, deterministically.
fn reduce_paths<A, F, G>(n_paths: u64, init: G, per_path: F) -> Result<A>
where
    A: Accumulator,
    G: Fn() -> A + Sync,
    F: Fn(u64, &mut A) -> Result<()> + Sync,
{
    let blocks = n_paths.div_ceil(REDUCTION_BLOCK as u64);
    let sums = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = init();
            let lo = b * REDUCTION_BLOCK as u64;
            let hi = (lo + REDUCTION_BLOCK as u64).min(n_paths);
            for i in lo..hi {
                per_path(i, &mut acc)?;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<A>>>()?;
    Ok(pairwise(sums).unwrap_or_else(init))
}

/// `t ↦ E(X₂(t) − X₁(t))⁺` with Monte Carlo standard errors.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PositivePartCurve {
    pub t: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl PositivePartCurve {
    /// Columns `t,mean,stderr`.
    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        let rows = (0..self.t.len()).map(|i| vec![self.t[i], self.mean[i], self.stderr[i]]);
        crate::export::write_csv(w, &["t", "mean", "stderr"], rows)
    }

    /// Largest `mean / stderr` over nodes with positive mean; 0 when the curve
    /// vanishes.
    pub fn max_z_score(&self) -> f64 {
        self.mean
            .iter()
            .zip(&self.stderr)
            .filter(|(m, _)| **m > 0.0)
            .map(|(m, s)| if *s > 0.0 { m / s } else { f64::INFINITY })
            .fold(0.0, f64::max)
    }
}

/// Settings for [`ordering_statistics`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderingConfig {
    pub n_paths: u64,
    pub epsilon: f64,
    /// Restrict every statistic to grid nodes with `t` in `[lo, hi]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<(f64, f64)>,
}

impl OrderingConfig {
    pub fn new(n_paths: u64, epsilon: f64) -> Self {
        Self {
            n_paths,
            epsilon,
            window: None,
        }
    }

    pub fn with_window(mut self, lo: f64, hi: f64) -> Self {
        self.window = Some((lo, hi));
        self
    }

    fn contains(&self, t: f64) -> bool {
        self.window.is_none_or(|(lo, hi)| t >= lo && t <= hi)
    }
}

/// Pathwise ordering statistics of a coupled pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderingReport {
    pub n_paths: u64,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<(f64, f64)>,
    /// Fraction of paths with `min (X₁ − X₂) < −ε` over the grid.
    pub violation_prob: f64,
    /// Same with `ε = 0`.
    pub raw_violation_prob: f64,
    /// Fraction of paths with `X₁ − X₂ < −ε` at the last uniform node.
    pub terminal_violation_prob: f64,
    /// `max (X₂ − X₁)⁺` over all paths and nodes.
    pub max_violation: f64,
    pub positive_part_curve: PositivePartCurve,
}

struct OrderingAcc {
    violations: u64,
    raw: u64,
    terminal: u64,
    max_violation: f64,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl Accumulator for OrderingAcc {
    fn merge(mut self, other: Self) -> Self {
        self.violations += other.violations;
        self.raw += other.raw;
        self.terminal += other.terminal;
        self.max_violation = self.max_violation.max(other.max_violation);
        for (a, b) in self.sum.iter_mut().zip(other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(other.sum_sq) {
            *a += b;
        }
        self
    }
}

/// Uniform node times in the window, used as curve abscissae.
fn curve_times(grid: &GridSpec, config: &OrderingConfig) -> Vec<f64> {
    grid.uniform_times().into_iter().filter(|&t| config.contains(t)).collect()
}

/// Simulate `config.n_paths` coupled paths and summarize `X₁ ≥ X₂`.
/// Both pre-jump and post-jump values enter the minimum gap.
pub fn ordering_statistics<S: CoupledSystem + ?Sized>(
    system: &S,
    config: &OrderingConfig,
    grid: &GridSpec,
    policy: &RngPolicy,
) -> Result<OrderingReport> {
    if !(config.epsilon >= 0.0) {
        return Err(Error::invalid("epsilon must be nonnegative"));
    }
    if config.n_paths == 0 {
        return Err(Error::invalid("n_paths must be positive"));
    }
    let times = curve_times(grid, config);
    let m = times.len();
    let eps = config.epsilon;
    let acc = reduce_paths(
        config.n_paths,
        || OrderingAcc {
            violations: 0,
            raw: 0,
            terminal: 0,
            max_violation: 0.0,
            sum: vec![0.0; m],
            sum_sq: vec![0.0; m],
        },
        |i, acc| {
            let noise = sample_noise(policy, i, system.mark_space(), grid)?;
            let (up, lo) = system.integrate_coupled(&noise, grid).map_err(|e| e.with_path(i))?;
            let mut min_gap = f64::INFINITY;
            for (k, &t) in up.times().iter().enumerate() {
                if config.contains(t) {
                    let g = (up.values_pre()[k] - lo.values_pre()[k]).min(up.values_post()[k] - lo.values_post()[k]);
                    min_gap = min_gap.min(g);
                }
            }
            if min_gap < -eps {
                acc.violations += 1;
            }
            if min_gap < 0.0 {
                acc.raw += 1;
                acc.max_violation = acc.max_violation.max(-min_gap);
            }
            let grid = up.grid();
            let nodes = grid.uniform_nodes();
            let mut last = None;
            let mut j = 0;
            for &node in nodes {
                let t = grid.times()[node];
                if !config.contains(t) {
                    continue;
                }
                let p = (lo.values_post()[node] - up.values_post()[node]).max(0.0);
                acc.sum[j] += p;
                acc.sum_sq[j] += p * p;
                j += 1;
                last = Some(node);
            }
            if let Some(node) = last {
                if up.values_post()[node] - lo.values_post()[node] < -eps {
                    acc.terminal += 1;
                }
            }
            Ok(())
        },
    )?;
    let n = config.n_paths as f64;
    let mean: Vec<f64> = acc.sum.iter().map(|s| s / n).collect();
    let stderr = acc
        .sum_sq
        .iter()
        .zip(&mean)
        .map(|(sq, mu)| {
            if config.n_paths < 2 {
                return 0.0;
            }
            let var = ((sq - n * mu * mu) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        })
        .collect();
    Ok(OrderingReport {
        n_paths: config.n_paths,
        epsilon: eps,
        window: config.window,
        violation_prob: acc.violations as f64 / n,
        raw_violation_prob: acc.raw as f64 / n,
        terminal_violation_prob: acc.terminal as f64 / n,
        max_violation: acc.max_violation,
        positive_part_curve: PositivePartCurve {
            t: times,
            mean,
            stderr,
        },
    })
}

/// Monte Carlo estimate of `E(X₂(t) − X₁(t))⁺` at the uniform nodes.
pub fn positive_part_curve<S: CoupledSystem + ?Sized>(
    system: &S,
    n_paths: u64,
    grid: &GridSpec,
    policy: &RngPolicy,
) -> Result<PositivePartCurve> {
    Ok(ordering_statistics(system, &OrderingConfig::new(n_paths, 0.0), grid, policy)?.positive_part_curve)
}

/// `β = 5(L + √L(1 + √Λ))` and the quantities of the contraction estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaConstant {
    pub beta: f64,
    /// `L + √L(1 + √Λ)`
    pub growth_coefficient: f64,
    /// `β − (2L + 3√L(1 + √Λ))`
    pub decay_gap: f64,
    /// `growth_coefficient / decay_gap`
    pub contraction_ratio: f64,
}

pub fn compute_beta(lipschitz: f64, total_mass: f64) -> Result<BetaConstant> {
    if !(lipschitz > 0.0 && lipschitz.is_finite()) {
        return Err(Error::invalid(format!("Lipschitz constant must be positive, got {lipschitz}")));
    }
    if !(total_mass >= 0.0 && total_mass.is_finite()) {
        return Err(Error::invalid(format!("total mark mass must be nonnegative, got {total_mass}")));
    }
    let s = lipschitz.sqrt() * (1.0 + total_mass.sqrt());
    let growth = lipschitz + s;
    let beta = 5.0 * growth;
    let decay_gap = beta - (2.0 * lipschitz + 3.0 * s);
    Ok(BetaConstant {
        beta,
        growth_coefficient: growth,
        decay_gap,
        contraction_ratio: growth / decay_gap,
    })
}

// ∫₀ʰ e^{−βr} dr / h and ∫₀ʰ (r/h) e^{−βr} dr / h as functions of x = βh.
fn exp_weights(x: f64) -> (f64, f64) {
    if x.abs() < 1e-4 {
        (1.0 - x / 2.0 + x * x / 6.0, 0.5 - x / 3.0 + x * x / 8.0)
    } else {
        let e = (-x).exp();
        (-(-x).exp_m1() / x, (1.0 - e * (1.0 + x)) / (x * x))
    }
}

/// `∫₀ᵀ |v(s)|² e^{−βs} ds` for a càdlàg path known on an event grid:
/// `|v|²` is interpolated linearly on each interval from the post-jump value
/// at the left node to the pre-jump value at the right node, and the weight
/// is integrated exactly.
pub fn weighted_norm(times: &[f64], pre: &[f64], post: &[f64], beta: f64) -> Result<f64> {
    if !(beta >= 0.0) {
        return Err(Error::invalid("beta must be nonnegative"));
    }
    if pre.len() != times.len() || post.len() != times.len() {
        return Err(Error::GridMismatch("value arrays differ in length from the time grid".into()));
    }
    let mut acc = 0.0;
    for k in 0..times.len().saturating_sub(1) {
        let (s, h) = (times[k], times[k + 1] - times[k]);
        let (p, q) = (post[k] * post[k], pre[k + 1] * pre[k + 1]);
        let (e1, e2) = exp_weights(beta * h);
        acc += (-beta * s).exp() * h * (p * e1 + (q - p) * e2);
    }
    Ok(acc)
}

/// [`weighted_norm`] of `a − b` for two paths on the same event grid.
pub fn weighted_norm_diff(a: &PathRecord, b: &PathRecord, beta: f64) -> Result<f64> {
    if a.times() != b.times() {
        return Err(Error::GridMismatch("paths live on different event grids".into()));
    }
    let pre: Vec<f64> = a.values_pre().iter().zip(b.values_pre()).map(|(x, y)| x - y).collect();
    let post: Vec<f64> = a.values_post().iter().zip(b.values_post()).map(|(x, y)| x - y).collect();
    weighted_norm(a.times(), &pre, &post, beta)
}

/// Picard tower settings. `n_iterates` counts the frozen-delay iterates
/// `X₃, …, X_{n_iterates+2}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationConfig {
    pub n_iterates: usize,
    /// Weighted-norm exponent; computed from the lower member's Lipschitz
    /// bound and the total mark mass when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

impl IterationConfig {
    /// Iterates up to and including `X_level`.
    pub fn up_to_level(level: usize) -> Self {
        Self {
            n_iterates: level.saturating_sub(2),
            beta: None,
        }
    }

    pub fn max_level(&self) -> usize {
        self.n_iterates + 2
    }

    fn resolve_beta(&self, pair: &ComparisonPair) -> Result<f64> {
        if let Some(b) = self.beta {
            if !(b > 0.0) {
                return Err(Error::invalid("beta must be positive"));
            }
            return Ok(b);
        }
        let lip = pair.lower().coefficients.lipschitz_bound.ok_or_else(|| {
            Error::invalid("no beta given and the lower member declares no Lipschitz bound")
        })?;
        Ok(compute_beta(lip, pair.mark_space().total_mass())?.beta)
    }
}

/// Per-iterate tower statistics, indexed by level `n ≥ 3`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TowerLevel {
    pub level: usize,
    /// Fraction of (path, node) pairs with `X_n > X_{n−1}` (`X₁` precedes `X₃`).
    pub chain_violation_raw: f64,
    /// Same with slack [`CHAIN_EPSILON`].
    pub chain_violation_eps: f64,
    /// `E ∫ e^{−βs} |X_n − X_{n−1}|² ds`, present for `n ≥ 4`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm_sq: Option<f64>,
    /// `norm_sq(n) / norm_sq(n−1)`, present for `n ≥ 5`; 0 when both vanish.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm_ratio: Option<f64>,
    /// Mean over paths of `max_grid |X_n − X₂|`.
    pub gap_mean: f64,
    /// Max over paths of `max_grid |X_n − X₂|`.
    pub gap_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TowerReport {
    pub n_paths: u64,
    pub beta: f64,
    pub chain_epsilon: f64,
    /// (path, node) pairs per level.
    pub nodes_per_level: u64,
    pub levels: Vec<TowerLevel>,
}

impl TowerReport {
    pub fn level(&self, n: usize) -> Option<&TowerLevel> {
        self.levels.iter().find(|l| l.level == n)
    }

    pub fn max_norm_ratio(&self) -> f64 {
        self.levels.iter().filter_map(|l| l.norm_ratio).fold(0.0, f64::max)
    }
}

struct TowerAcc {
    nodes: u64,
    raw: Vec<u64>,
    eps: Vec<u64>,
    norm: Vec<f64>,
    gap_sum: Vec<f64>,
    gap_max: Vec<f64>,
}

impl Accumulator for TowerAcc {
    fn merge(mut self, o: Self) -> Self {
        self.nodes += o.nodes;
        for i in 0..self.raw.len() {
            self.raw[i] += o.raw[i];
            self.eps[i] += o.eps[i];
            self.norm[i] += o.norm[i];
            self.gap_sum[i] += o.gap_sum[i];
            self.gap_max[i] = self.gap_max[i].max(o.gap_max[i]);
        }
        self
    }
}

fn sup_gap(a: &PathRecord, b: &PathRecord) -> f64 {
    let d = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    d(a.values_pre(), b.values_pre()).max(d(a.values_post(), b.values_post()))
}

/// Build `X₁` and `X₂` directly, then `X₃` with the lower coefficients and the
/// delay frozen to `X₁`, and each `X_n` frozen to `X_{n−1}`, all under one
/// noise realization per path.
pub fn picard_tower_report(
    pair: &ComparisonPair,
    config: &IterationConfig,
    n_paths: u64,
    grid: &GridSpec,
    policy: &RngPolicy,
) -> Result<TowerReport> {
    if config.n_iterates < 2 {
        return Err(Error::invalid("the tower needs at least 2 frozen iterates"));
    }
    if n_paths == 0 {
        return Err(Error::invalid("n_paths must be positive"));
    }
    let beta = config.resolve_beta(pair)?;
    let k = config.n_iterates;
    let acc = reduce_paths(
        n_paths,
        || TowerAcc {
            nodes: 0,
            raw: vec![0; k],
            eps: vec![0; k],
            norm: vec![0.0; k],
            gap_sum: vec![0.0; k],
            gap_max: vec![0.0; k],
        },
        |i, acc| {
            let mut run = || -> Result<()> {
                let noise = sample_noise(policy, i, pair.mark_space(), grid)?;
                if pair.tau() != grid.tau() || grid.horizon() > pair.horizon() {
                    return Err(Error::invalid("grid does not match the pair's delay and horizon"));
                }
                let eg = event_grid_for(grid, &noise)?;
                let x1 = integrate_on(&ProblemDynamics::new(pair.upper()), &noise, &eg, DelaySource::Own)?;
                let x2 = integrate_on(&ProblemDynamics::new(pair.lower()), &noise, &eg, DelaySource::Own)?;
                let tower = integrate_tower(pair.lower(), &x1, k, &noise)?;
                acc.nodes += 2 * eg.len() as u64;
                for (j, cur) in tower.iter().enumerate() {
                    let prev = if j == 0 { &x1 } else { &tower[j - 1] };
                    for (pv, cv) in [(prev.values_pre(), cur.values_pre()), (prev.values_post(), cur.values_post())] {
                        for (p, c) in pv.iter().zip(cv) {
                            if c > p {
                                acc.raw[j] += 1;
                            }
                            if *c > p + CHAIN_EPSILON {
                                acc.eps[j] += 1;
                            }
                        }
                    }
                    if j >= 1 {
                        acc.norm[j] += weighted_norm_diff(cur, prev, beta)?;
                    }
                    let g = sup_gap(cur, &x2);
                    acc.gap_sum[j] += g;
                    acc.gap_max[j] = acc.gap_max[j].max(g);
                }
                Ok(())
            };
            run().map_err(|e| e.with_path(i))
        },
    )?;
    let n = n_paths as f64;
    let nodes = acc.nodes as f64;
    let mut levels = Vec::with_capacity(k);
    for j in 0..k {
        let norm_sq = (j >= 1).then(|| acc.norm[j] / n);
        let norm_ratio = (j >= 2).then(|| {
            let (num, den) = (acc.norm[j], acc.norm[j - 1]);
            if num == 0.0 {
                0.0
            } else {
                num / den
            }
        });
        levels.push(TowerLevel {
            level: j + 3,
            chain_violation_raw: acc.raw[j] as f64 / nodes,
            chain_violation_eps: acc.eps[j] as f64 / nodes,
            norm_sq,
            norm_ratio,
            gap_mean: acc.gap_sum[j] / n,
            gap_max: acc.gap_max[j],
        });
    }
    Ok(TowerReport {
        n_paths,
        beta,
        chain_epsilon: CHAIN_EPSILON,
        nodes_per_level: acc.nodes,
        levels,
    })
}
