//! Jump-adapted Euler integration with a càdlàg delay buffer.
//!
//! Between consecutive event-grid nodes the scheme takes one explicit Euler
//! step using the state and the delayed state at the left node. At a jump node
//! the Euler-evolved value is the pre-jump state `X(t⁻)`, and the jump
//! coefficient is evaluated at `(X(t⁻), X((t−τ)⁻), t, u)`.
//!
//! Uniform nodes sit at `k·dt` with `dt = τ / lag_steps`, so the delayed
//! argument of a uniform node is read by index from `lag_steps` nodes
//! earlier. Jump nodes look up the delayed value by time with piecewise
//! constant right-continuous interpolation.

use std::borrow::Cow;
use std::io::{self, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export::format_number;
use crate::model::{CoefficientSet, ComparisonPair, Drift, JumpForm, SddeProblem, Segment};
use crate::randomness::{
    derive_path_stream, sample_brownian_increments, sample_jump_events, JumpEvent, MarkSpace, NoiseRealization,
    PathStream, RngPolicy,
};

/// Paths are aborted once `|X|` exceeds this.
pub const BLOWUP_LIMIT: f64 = 1e12;

/// Uniform step `dt = tau / lag_steps` on `[0, horizon]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    tau: f64,
    lag_steps: usize,
    horizon: f64,
}

impl GridSpec {
    pub fn new(tau: f64, lag_steps: usize, horizon: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::invalid(format!("tau must be positive, got {tau}")));
        }
        if lag_steps == 0 {
            return Err(Error::invalid("grid needs at least one step per delay"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
        }
        Ok(Self {
            tau,
            lag_steps,
            horizon,
        })
    }

    /// Accepts `dt` only when `tau / dt` is a positive integer (to 1e-9
    /// relative).
    pub fn from_dt(dt: f64, tau: f64, horizon: f64) -> Result<Self> {
        if !(dt > 0.0 && dt <= tau) {
            return Err(Error::invalid(format!("dt must lie in (0, tau], got {dt}")));
        }
        let ratio = tau / dt;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-9 * ratio {
            return Err(Error::invalid(format!("dt = {dt} does not divide tau = {tau}")));
        }
        Self::new(tau, n as usize, horizon)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn lag_steps(&self) -> usize {
        self.lag_steps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.tau / self.lag_steps as f64
    }

    /// Same grid with a different horizon.
    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        Self::new(self.tau, self.lag_steps, horizon)
    }

    /// Number of lattice nodes `k·dt` strictly before the horizon, and whether
    /// the horizon itself is a lattice node.
    fn lattice(&self) -> (usize, bool) {
        let dt = self.dt();
        let steps = (self.horizon / dt).round();
        if steps >= 1.0 && (steps * dt - self.horizon).abs() <= 1e-9 * self.horizon {
            (steps as usize, true)
        } else {
            ((self.horizon / dt).ceil() as usize, false)
        }
    }

    /// `0, dt, 2dt, …` followed by the horizon.
    pub fn uniform_times(&self) -> Vec<f64> {
        let dt = self.dt();
        let (before, _) = self.lattice();
        let mut times: Vec<f64> = (0..before).map(|k| k as f64 * dt).collect();
        if times.last().is_some_and(|&t| t >= self.horizon) {
            times.pop();
        }
        times.push(self.horizon);
        times
    }
}

/// Merged uniform and jump nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct EventGrid {
    times: Vec<f64>,
    uniform_slot: Vec<Option<usize>>,
    jump_slot: Vec<Option<usize>>,
    uniform_nodes: Vec<usize>,
    aligned_uniform: usize,
    lag_steps: usize,
    tau: f64,
}

impl EventGrid {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index into the jump list for nodes carrying a jump.
    pub fn jump_at(&self, node: usize) -> Option<usize> {
        self.jump_slot[node]
    }

    pub fn is_jump(&self, node: usize) -> bool {
        self.jump_slot[node].is_some()
    }

    /// Node indices of the uniform grid, in time order.
    pub fn uniform_nodes(&self) -> &[usize] {
        &self.uniform_nodes
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Latest node with time `<= s`.
    fn node_at_or_before(&self, s: f64) -> usize {
        self.times.partition_point(|&t| t <= s).saturating_sub(1)
    }
}

/// Sorted union of the uniform grid and the jump times.
pub fn build_event_grid(grid: &GridSpec, jumps: &[JumpEvent]) -> Result<EventGrid> {
    if let Some(j) = jumps.iter().find(|j| !(j.time > 0.0 && j.time <= grid.horizon)) {
        return Err(Error::invalid(format!(
            "jump at t = {} lies outside (0, {}]",
            j.time, grid.horizon
        )));
    }
    if jumps.windows(2).any(|w| w[0].time >= w[1].time) {
        return Err(Error::invalid("jump times must be strictly increasing"));
    }
    let uniform = grid.uniform_times();
    let (_, horizon_aligned) = grid.lattice();
    let aligned_uniform = if horizon_aligned { uniform.len() } else { uniform.len() - 1 };

    let cap = uniform.len() + jumps.len();
    let mut times = Vec::with_capacity(cap);
    let mut uniform_slot = Vec::with_capacity(cap);
    let mut jump_slot = Vec::with_capacity(cap);
    let mut uniform_nodes = Vec::with_capacity(uniform.len());
    let (mut i, mut j) = (0, 0);
    while i < uniform.len() || j < jumps.len() {
        let tu = uniform.get(i).copied().unwrap_or(f64::INFINITY);
        let tj = jumps.get(j).map_or(f64::INFINITY, |e| e.time);
        let node = times.len();
        if tu < tj {
            times.push(tu);
            uniform_slot.push(Some(i));
            jump_slot.push(None);
            uniform_nodes.push(node);
            i += 1;
        } else if tj < tu {
            times.push(tj);
            uniform_slot.push(None);
            jump_slot.push(Some(j));
            j += 1;
        } else {
            times.push(tu);
            uniform_slot.push(Some(i));
            jump_slot.push(Some(j));
            uniform_nodes.push(node);
            i += 1;
            j += 1;
        }
    }
    Ok(EventGrid {
        times,
        uniform_slot,
        jump_slot,
        uniform_nodes,
        aligned_uniform,
        lag_steps: grid.lag_steps,
        tau: grid.tau,
    })
}

/// Draw jumps on `(0, T]`, build the event grid, and sample `W` on it.
pub fn sample_noise(policy: &RngPolicy, path_index: u64, marks: &MarkSpace, grid: &GridSpec) -> Result<NoiseRealization> {
    let stream = derive_path_stream(policy, path_index);
    let jumps = sample_jump_events(marks, grid.horizon, &stream)?;
    noise_with_jumps(grid, jumps, &stream)
}

/// Noise with prescribed jumps; `W` is sampled on the resulting event grid.
pub fn noise_with_jumps(grid: &GridSpec, jumps: Vec<JumpEvent>, stream: &PathStream) -> Result<NoiseRealization> {
    let eg = build_event_grid(grid, &jumps)?;
    let brownian = sample_brownian_increments(&eg.times[1..], stream)?;
    NoiseRealization::new(grid.horizon, brownian, jumps, stream.id())
}

/// A simulated càdlàg path on the event grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PathRecord {
    grid: Arc<EventGrid>,
    initial: Segment,
    pre: Vec<f64>,
    post: Vec<f64>,
}

impl PathRecord {
    pub fn grid(&self) -> &Arc<EventGrid> {
        &self.grid
    }

    pub fn initial(&self) -> &Segment {
        &self.initial
    }

    pub fn times(&self) -> &[f64] {
        &self.grid.times
    }

    /// `X(t⁻)` at every node.
    pub fn values_pre(&self) -> &[f64] {
        &self.pre
    }

    /// `X(t)` at every node.
    pub fn values_post(&self) -> &[f64] {
        &self.post
    }

    pub fn jump_flags(&self) -> Vec<bool> {
        self.grid.jump_slot.iter().map(Option::is_some).collect()
    }

    pub fn horizon(&self) -> f64 {
        *self.grid.times.last().expect("grid is never empty")
    }

    /// Post-jump values at the uniform nodes.
    pub fn uniform_values(&self) -> Vec<f64> {
        self.grid.uniform_nodes.iter().map(|&n| self.post[n]).collect()
    }

    /// `X(s)` for `s ∈ [-τ, T]`.
    pub fn value_at(&self, s: f64) -> Result<f64> {
        if s <= 0.0 {
            return self.initial.evaluate(s);
        }
        if s > self.horizon() {
            return Err(Error::invalid(format!("t = {s} is past the horizon {}", self.horizon())));
        }
        Ok(self.post[self.grid.node_at_or_before(s)])
    }

    /// `X(s⁻)` for `s ∈ [-τ, T]`.
    pub fn left_limit_at(&self, s: f64) -> Result<f64> {
        if s <= 0.0 {
            return self.initial.left_limit(s);
        }
        if s > self.horizon() {
            return Err(Error::invalid(format!("t = {s} is past the horizon {}", self.horizon())));
        }
        let i = self.grid.node_at_or_before(s);
        Ok(if self.grid.times[i] == s { self.pre[i] } else { self.post[i] })
    }

    /// CSV with columns `time,value_pre,value_post,jump_flag`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "time,value_pre,value_post,jump_flag")?;
        for (k, &t) in self.grid.times.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{}",
                format_number(t),
                format_number(self.pre[k]),
                format_number(self.post[k]),
                u8::from(self.grid.is_jump(k))
            )?;
        }
        Ok(())
    }
}

/// Coefficients as seen by the integrator. The diffusion may depend on the
/// delayed state, which only quarantined counterexample systems use.
pub trait Dynamics {
    fn drift(&self, x: f64, y: f64, t: f64) -> f64;
    fn diffusion(&self, x: f64, y: f64, t: f64) -> f64;
    fn jump(&self, x: f64, y: f64, t: f64, u: f64) -> f64;
    fn initial(&self) -> &Segment;
}

/// An [`SddeProblem`] with its compensator (if any) folded into the drift.
pub struct ProblemDynamics<'a> {
    drift: Cow<'a, Drift>,
    coefficients: &'a CoefficientSet,
    initial: &'a Segment,
}

impl<'a> ProblemDynamics<'a> {
    pub fn new(p: &'a SddeProblem) -> Self {
        let drift = match p.jump_form {
            JumpForm::PureJump => Cow::Borrowed(&p.coefficients.drift),
            JumpForm::Compensated => Cow::Owned(p.effective_drift()),
        };
        Self {
            drift,
            coefficients: &p.coefficients,
            initial: &p.initial,
        }
    }
}

impl Dynamics for ProblemDynamics<'_> {
    #[inline]
    fn drift(&self, x: f64, y: f64, t: f64) -> f64 {
        self.drift.eval(x, y, t)
    }

    #[inline]
    fn diffusion(&self, x: f64, _y: f64, t: f64) -> f64 {
        self.coefficients.diffusion.eval(x, t)
    }

    #[inline]
    fn jump(&self, x: f64, y: f64, t: f64, u: f64) -> f64 {
        self.coefficients.jump.eval(x, y, t, u)
    }

    fn initial(&self) -> &Segment {
        self.initial
    }
}

/// Where delayed arguments are read from.
#[derive(Clone, Copy, Debug)]
pub enum DelaySource<'a> {
    /// The path being integrated (a genuine delay equation).
    Own,
    /// A previously computed path on the same event grid.
    Frozen(&'a PathRecord),
}

struct DelayView<'a> {
    grid: &'a EventGrid,
    segment: &'a Segment,
    pre: &'a [f64],
    post: &'a [f64],
}

impl DelayView<'_> {
    /// `X(t_k − τ)` (or its left limit) for node `k`.
    fn lookup(&self, k: usize, left: bool) -> f64 {
        let g = self.grid;
        if let Some(slot) = g.uniform_slot[k].filter(|&s| s < g.aligned_uniform) {
            if slot >= g.lag_steps {
                let node = g.uniform_nodes[slot - g.lag_steps];
                return self.node_value(node, left);
            }
            return self.segment_value((g.times[k] - g.tau).min(0.0), left);
        }
        let s = g.times[k] - g.tau;
        if s <= 0.0 {
            return self.segment_value(s.max(-g.tau), left);
        }
        let node = g.node_at_or_before(s);
        if left && g.times[node] == s {
            self.node_value(node, true)
        } else {
            self.post[node]
        }
    }

    fn node_value(&self, node: usize, left: bool) -> f64 {
        match (left, node) {
            (false, _) => self.post[node],
            (true, 0) => self.segment_value(0.0, true),
            (true, _) => self.pre[node],
        }
    }

    fn segment_value(&self, theta: f64, left: bool) -> f64 {
        let v = if left {
            self.segment.left_limit(theta)
        } else {
            self.segment.evaluate(theta)
        };
        v.expect("delayed time clamped into [-tau, 0]")
    }
}

fn check_noise(eg: &EventGrid, noise: &NoiseRealization) -> Result<()> {
    let sk = &noise.brownian().times;
    if sk.as_slice() != &eg.times[1..] {
        return Err(Error::GridMismatch(format!(
            "brownian skeleton has {} times, event grid has {} nodes after 0",
            sk.len(),
            eg.times.len() - 1
        )));
    }
    Ok(())
}

/// Event grid for `noise` under `grid`, verified against the Brownian skeleton.
pub fn event_grid_for(grid: &GridSpec, noise: &NoiseRealization) -> Result<Arc<EventGrid>> {
    let eg = build_event_grid(grid, noise.jumps())?;
    check_noise(&eg, noise)?;
    Ok(Arc::new(eg))
}

/// Integrate `dynamics` on a prepared event grid.
pub fn integrate_on<D: Dynamics + ?Sized>(
    dynamics: &D,
    noise: &NoiseRealization,
    grid: &Arc<EventGrid>,
    source: DelaySource<'_>,
) -> Result<PathRecord> {
    let eg: &EventGrid = grid;
    if eg.tau != dynamics.initial().tau() {
        return Err(Error::invalid("event grid delay differs from the problem delay"));
    }
    if let DelaySource::Frozen(src) = source {
        if !Arc::ptr_eq(&src.grid, grid) && src.grid.times != eg.times {
            return Err(Error::GridMismatch("frozen delay source lives on a different event grid".into()));
        }
    }
    let n = eg.len();
    let w = &noise.brownian().values;
    let jumps = noise.jumps();
    let x0 = dynamics.initial().evaluate(0.0)?;
    let mut pre = Vec::with_capacity(n);
    let mut post = Vec::with_capacity(n);
    pre.push(x0);
    post.push(x0);

    for k in 0..n - 1 {
        let (delayed, delayed_left) = {
            let view = match source {
                DelaySource::Own => DelayView {
                    grid: eg,
                    segment: dynamics.initial(),
                    pre: &pre,
                    post: &post,
                },
                DelaySource::Frozen(src) => DelayView {
                    grid: eg,
                    segment: &src.initial,
                    pre: &src.pre,
                    post: &src.post,
                },
            };
            let d = view.lookup(k, false);
            let dl = eg.jump_slot[k + 1].map(|_| view.lookup(k + 1, true));
            (d, dl)
        };
        let t = eg.times[k];
        let x = post[k];
        let step = eg.times[k + 1] - t;
        let w_prev = if k == 0 { 0.0 } else { w[k - 1] };
        let dw = w[k] - w_prev;
        let evolved = x + dynamics.drift(x, delayed, t) * step + dynamics.diffusion(x, delayed, t) * dw;
        let t_next = eg.times[k + 1];
        let after = match (eg.jump_slot[k + 1], delayed_left) {
            (Some(j), Some(dl)) => evolved + dynamics.jump(evolved, dl, t_next, jumps[j].mark),
            _ => evolved,
        };
        if !(evolved.abs() <= BLOWUP_LIMIT && after.abs() <= BLOWUP_LIMIT) {
            return Err(Error::PathBlowup {
                time: t_next,
                path_index: Some(noise.stream_id().path_index),
            });
        }
        pre.push(evolved);
        post.push(after);
    }

    Ok(PathRecord {
        grid: Arc::clone(grid),
        initial: dynamics.initial().clone(),
        pre,
        post,
    })
}

/// Integrate any [`Dynamics`] as a genuine delay equation.
pub fn integrate_dynamics<D: Dynamics + ?Sized>(
    dynamics: &D,
    noise: &NoiseRealization,
    grid: &GridSpec,
) -> Result<PathRecord> {
    let eg = event_grid_for(grid, noise)?;
    integrate_on(dynamics, noise, &eg, DelaySource::Own)
}

/// Euler path of one problem. Compensated problems are integrated through
/// their pure-jump rewrite.
pub fn integrate_path(p: &SddeProblem, noise: &NoiseRealization, grid: &GridSpec) -> Result<PathRecord> {
    check_problem_grid(p, grid)?;
    integrate_dynamics(&ProblemDynamics::new(p), noise, grid)
}

fn check_problem_grid(p: &SddeProblem, grid: &GridSpec) -> Result<()> {
    if p.tau() != grid.tau {
        return Err(Error::invalid(format!(
            "grid delay {} differs from problem delay {}",
            grid.tau,
            p.tau()
        )));
    }
    if grid.horizon > p.horizon {
        return Err(Error::invalid("grid horizon exceeds the problem horizon"));
    }
    Ok(())
}

/// Both members of a pair under one noise realization.
pub fn integrate_coupled(
    pair: &ComparisonPair,
    noise: &NoiseRealization,
    grid: &GridSpec,
) -> Result<(PathRecord, PathRecord)> {
    check_problem_grid(pair.upper(), grid)?;
    let eg = event_grid_for(grid, noise)?;
    let upper = integrate_on(&ProblemDynamics::new(pair.upper()), noise, &eg, DelaySource::Own)?;
    let lower = integrate_on(&ProblemDynamics::new(pair.lower()), noise, &eg, DelaySource::Own)?;
    Ok((upper, lower))
}

/// Non-delay equation obtained by freezing the delayed argument of `base` to
/// `source`.
pub fn integrate_frozen(
    base: &SddeProblem,
    source: &PathRecord,
    noise: &NoiseRealization,
) -> Result<PathRecord> {
    integrate_on(&ProblemDynamics::new(base), noise, &source.grid, DelaySource::Frozen(source))
}

/// Successive iterates: the first freezes the delay to `first_source`, each
/// later one to its predecessor.
pub fn integrate_tower(
    base: &SddeProblem,
    first_source: &PathRecord,
    levels: usize,
    noise: &NoiseRealization,
) -> Result<Vec<PathRecord>> {
    let mut out: Vec<PathRecord> = Vec::with_capacity(levels);
    for _ in 0..levels {
        let next = {
            let src = out.last().unwrap_or(first_source);
            integrate_frozen(base, src, noise)?
        };
        out.push(next);
    }
    Ok(out)
}

/// Two systems that can be integrated side by side under shared noise.
pub trait CoupledSystem: Sync {
    fn tau(&self) -> f64;
    fn horizon(&self) -> f64;
    fn mark_space(&self) -> &MarkSpace;
    fn integrate_coupled(&self, noise: &NoiseRealization, grid: &GridSpec) -> Result<(PathRecord, PathRecord)>;
}

impl CoupledSystem for ComparisonPair {
    fn tau(&self) -> f64 {
        ComparisonPair::tau(self)
    }

    fn horizon(&self) -> f64 {
        ComparisonPair::horizon(self)
    }

    fn mark_space(&self) -> &MarkSpace {
        ComparisonPair::mark_space(self)
    }

    fn integrate_coupled(&self, noise: &NoiseRealization, grid: &GridSpec) -> Result<(PathRecord, PathRecord)> {
        integrate_coupled(self, noise, grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Diffusion, Jump, MarkProfile};
    use crate::randomness::{RngPolicy, StreamId};

    fn ev(t: f64) -> JumpEvent {
        JumpEvent { time: t, mark: 0.0 }
    }

    fn problem(drift: Drift, diffusion: Diffusion, jump: Jump, marks: MarkSpace, xi: Segment, form: JumpForm) -> SddeProblem {
        let horizon = 1.0;
        SddeProblem::new(
            CoefficientSet {
                drift,
                diffusion,
                jump,
                mark_space: marks,
                lipschitz_bound: None,
            },
            xi,
            horizon,
            form,
        )
        .unwrap()
    }

    #[test]
    fn event_grid_merges_jumps() {
        let g = GridSpec::new(0.5, 1, 1.0).unwrap();
        let eg = build_event_grid(&g, &[ev(0.3)]).unwrap();
        assert_eq!(eg.times(), &[0.0, 0.3, 0.5, 1.0]);
        assert!(eg.is_jump(1) && !eg.is_jump(2));
        let eg = build_event_grid(&g, &[]).unwrap();
        assert_eq!(eg.times(), &[0.0, 0.5, 1.0]);
        let eg = build_event_grid(&g, &[ev(0.5)]).unwrap();
        assert_eq!(eg.times(), &[0.0, 0.5, 1.0]);
        assert!(eg.is_jump(1));
        assert!(build_event_grid(&g, &[ev(1.5)]).is_err());
        assert!(build_event_grid(&g, &[ev(0.0)]).is_err());
    }

    #[test]
    fn grid_from_dt_requires_division() {
        assert!(GridSpec::from_dt(0.25, 1.0, 2.0).is_ok());
        assert!(GridSpec::from_dt(0.3, 1.0, 2.0).is_err());
        assert!(GridSpec::from_dt(2.0, 1.0, 2.0).is_err());
        let g = GridSpec::new(1.0, 3, 1.0).unwrap();
        let u = g.uniform_times();
        assert_eq!(u.len(), 4);
        assert_eq!(*u.last().unwrap(), 1.0);
    }

    #[test]
    fn ragged_horizon_appends_endpoint() {
        let g = GridSpec::new(1.0, 4, 1.1).unwrap();
        let u = g.uniform_times();
        assert_eq!(u, vec![0.0, 0.25, 0.5, 0.75, 1.0, 1.1]);
    }

    #[test]
    fn constant_drift_is_exact() {
        let p = problem(
            Drift::affine(0.0, 0.0, 1.0),
            Diffusion::zero(),
            Jump::zero(),
            MarkSpace::empty(),
            Segment::constant(1.0, 0.0).unwrap(),
            JumpForm::PureJump,
        );
        let g = GridSpec::new(1.0, 8, 1.0).unwrap();
        let noise = sample_noise(&RngPolicy::new(1), 0, p.mark_space(), &g).unwrap();
        let path = integrate_path(&p, &noise, &g).unwrap();
        for (t, x) in path.times().iter().zip(path.values_post()) {
            assert_eq!(t, x);
        }
    }

    #[test]
    fn unit_jumps_count() {
        let marks = MarkSpace::degenerate(0.0, 1.0).unwrap();
        let p = problem(
            Drift::zero(),
            Diffusion::zero(),
            Jump::affine(0.0, 0.0, 1.0),
            marks,
            Segment::constant(1.0, 2.5).unwrap(),
            JumpForm::PureJump,
        );
        let g = GridSpec::new(1.0, 16, 1.0).unwrap();
        for i in 0..50 {
            let noise = sample_noise(&RngPolicy::new(2), i, p.mark_space(), &g).unwrap();
            let path = integrate_path(&p, &noise, &g).unwrap();
            let last = *path.values_post().last().unwrap();
            assert_eq!(last, 2.5 + noise.jumps().len() as f64);
            for (k, flag) in path.jump_flags().into_iter().enumerate() {
                if !flag {
                    assert_eq!(path.values_pre()[k], path.values_post()[k]);
                }
            }
        }
    }

    #[test]
    fn delayed_linear_jump_closed_form_at_half() {
        // X(t) = c(1 + Σγ − tΛγ) on [0, τ]
        let marks = MarkSpace::degenerate(0.0, 1.0).unwrap();
        let jump = Jump::MultiplicativeMark {
            rho: MarkProfile::constant(0.3),
            alpha: 0.0,
            beta: 1.0,
            offset: 0.0,
        };
        let p = problem(
            Drift::zero(),
            Diffusion::zero(),
            jump,
            marks,
            Segment::constant(1.0, -1.0).unwrap(),
            JumpForm::Compensated,
        );
        let g = GridSpec::new(1.0, 8, 1.0).unwrap();
        let stream = derive_path_stream(&RngPolicy::new(0), 0);
        let noise = noise_with_jumps(&g, vec![ev(0.2), ev(0.7)], &stream).unwrap();
        let path = integrate_path(&p, &noise, &g).unwrap();
        let x = path.value_at(0.5).unwrap();
        assert!((x - (-1.15)).abs() < 1e-12, "{x}");
        assert!((path.left_limit_at(0.2).unwrap() - (-1.0 + 0.3 * 0.2)).abs() < 1e-14);
    }

    #[test]
    fn first_window_reads_initial_segment() {
        // drift = y exposes the delayed lookup directly
        let xi = Segment::from_steps(1.0, vec![(-1.0, 2.0), (-0.5, -3.0), (-0.25, 1.0)]).unwrap();
        let p = problem(
            Drift::affine(0.0, 1.0, 0.0),
            Diffusion::zero(),
            Jump::zero(),
            MarkSpace::empty(),
            xi.clone(),
            JumpForm::PureJump,
        );
        let g = GridSpec::new(1.0, 8, 1.0).unwrap();
        let noise = sample_noise(&RngPolicy::new(0), 0, p.mark_space(), &g).unwrap();
        let path = integrate_path(&p, &noise, &g).unwrap();
        let dt = g.dt();
        for k in 0..8 {
            let inc = path.values_post()[k + 1] - path.values_post()[k];
            let expect = xi.evaluate(k as f64 * dt - 1.0).unwrap() * dt;
            assert!((inc - expect).abs() < 1e-14, "k={k}");
        }
    }

    #[test]
    fn blowup_is_reported() {
        let p = problem(
            Drift::affine(0.0, 0.0, 1e13),
            Diffusion::zero(),
            Jump::zero(),
            MarkSpace::empty(),
            Segment::constant(1.0, 0.0).unwrap(),
            JumpForm::PureJump,
        );
        let g = GridSpec::new(1.0, 4, 1.0).unwrap();
        let noise = sample_noise(&RngPolicy::new(0), 7, p.mark_space(), &g).unwrap();
        match integrate_path(&p, &noise, &g) {
            Err(Error::PathBlowup { time, path_index }) => {
                assert_eq!(time, 0.25);
                assert_eq!(path_index, Some(7));
            }
            other => panic!("expected blowup, got {other:?}"),
        }
    }

    #[test]
    fn mismatched_noise_grid_is_rejected() {
        let p = problem(
            Drift::zero(),
            Diffusion::zero(),
            Jump::zero(),
            MarkSpace::empty(),
            Segment::constant(1.0, 0.0).unwrap(),
            JumpForm::PureJump,
        );
        let g8 = GridSpec::new(1.0, 8, 1.0).unwrap();
        let g4 = GridSpec::new(1.0, 4, 1.0).unwrap();
        let noise = sample_noise(&RngPolicy::new(0), 0, p.mark_space(), &g8).unwrap();
        assert!(matches!(integrate_path(&p, &noise, &g4), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn path_lookup_is_total() {
        let p = problem(
            Drift::affine(0.0, 0.0, 1.0),
            Diffusion::zero(),
            Jump::zero(),
            MarkSpace::empty(),
            Segment::constant(1.0, -4.0).unwrap(),
            JumpForm::PureJump,
        );
        let g = GridSpec::new(1.0, 4, 1.0).unwrap();
        let noise = NoiseRealization::new(
            1.0,
            crate::randomness::BrownianSkeleton {
                times: vec![0.25, 0.5, 0.75, 1.0],
                values: vec![0.0; 4],
            },
            vec![],
            StreamId { seed: 0, path_index: 0 },
        )
        .unwrap();
        let path = integrate_path(&p, &noise, &g).unwrap();
        assert_eq!(path.value_at(-1.0).unwrap(), -4.0);
        assert_eq!(path.value_at(0.0).unwrap(), -4.0);
        assert_eq!(path.value_at(0.3).unwrap(), -3.75);
        assert_eq!(path.value_at(1.0).unwrap(), -3.0);
        assert!(path.value_at(1.2).is_err());
        assert!(path.value_at(-1.2).is_err());
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let p = problem(
            Drift::zero(),
            Diffusion::zero(),
            Jump::affine(0.0, 0.0, 1.0),
            MarkSpace::degenerate(0.0, 1.0).unwrap(),
            Segment::constant(1.0, 0.0).unwrap(),
            JumpForm::PureJump,
        );
        let g = GridSpec::new(1.0, 2, 1.0).unwrap();
        let stream = derive_path_stream(&RngPolicy::new(0), 0);
        let noise = noise_with_jumps(&g, vec![ev(0.25)], &stream).unwrap();
        let path = integrate_path(&p, &noise, &g).unwrap();
        let mut buf = Vec::new();
        path.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "time,value_pre,value_post,jump_flag");
        assert_eq!(lines.len(), 5);
        assert!(lines[2].ends_with(",1"));
        assert!(lines[2].starts_with("2.5000000000000000e-1,"));
    }
}
