//! Built-in systems: the classical counterexamples with closed-form oracles and
//! two families that satisfy every comparison hypothesis.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::comparison::{ordering_statistics, OrderingConfig};
use crate::conditions::{check_pair, ConditionReport, DomainSample};
use crate::engine::{event_grid_for, integrate_on, CoupledSystem, DelaySource, Dynamics, GridSpec, PathRecord};
use crate::error::{Error, Result};
use crate::model::{
    CoefficientSet, ComparisonPair, Diffusion, Drift, Jump, JumpForm, MarkProfile, PairKind, SddeProblem, Segment,
};
use crate::randomness::{MarkSpace, NoiseRealization, RngPolicy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioId {
    #[serde(rename = "ex2_3")]
    Ex2_3,
    #[serde(rename = "ex2_4")]
    Ex2_4,
    #[serde(rename = "ex2_5")]
    Ex2_5,
    #[serde(rename = "ex3_2")]
    Ex3_2,
    AffineTheorem,
    LemmaPureJump,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 6] = [
        ScenarioId::Ex2_3,
        ScenarioId::Ex2_4,
        ScenarioId::Ex2_5,
        ScenarioId::Ex3_2,
        ScenarioId::AffineTheorem,
        ScenarioId::LemmaPureJump,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioId::Ex2_3 => "ex2_3",
            ScenarioId::Ex2_4 => "ex2_4",
            ScenarioId::Ex2_5 => "ex2_5",
            ScenarioId::Ex3_2 => "ex3_2",
            ScenarioId::AffineTheorem => "affine_theorem",
            ScenarioId::LemmaPureJump => "lemma_pure_jump",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ScenarioId::Ex2_3 => "compensated jumps, jump coefficient increasing in the delay: ordering fails",
            ScenarioId::Ex2_4 => "diffusion depending on the delayed state: ordering fails",
            ScenarioId::Ex2_5 => "jump coefficient decreasing in the delay: ordering fails",
            ScenarioId::Ex3_2 => "compensated pair with jump coefficient proportional to the drift",
            ScenarioId::AffineTheorem => "affine delay pair satisfying every hypothesis",
            ScenarioId::LemmaPureJump => "delay-free pair with ordered jump coefficients",
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioId::ALL.into_iter().find(|id| id.as_str() == s).ok_or_else(|| {
            let valid: Vec<_> = ScenarioId::ALL.iter().map(|id| id.as_str()).collect();
            Error::invalid(format!("unknown scenario '{s}'; valid ids: {}", valid.join(", ")))
        })
    }
}

/// Parameter overrides. Absent fields take the scenario's defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioParams {
    /// Negative initial constant of the counterexamples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Total jump intensity of the default single-atom mark space.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Full mark space; takes precedence over `lambda`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marks: Option<MarkSpace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<MarkProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<MarkProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// Jump offset of the upper member in the delay-free pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi_upper: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi_lower: Option<f64>,
}

impl ScenarioParams {
    fn marks(&self) -> Result<MarkSpace> {
        match &self.marks {
            Some(m) => Ok(m.clone()),
            None => MarkSpace::degenerate(0.0, self.lambda.unwrap_or(1.0)),
        }
    }

    fn tau(&self) -> f64 {
        self.tau.unwrap_or(1.0)
    }

    fn horizon(&self) -> f64 {
        self.horizon.unwrap_or(2.0)
    }

    fn c(&self) -> Result<f64> {
        let c = self.c.unwrap_or(-1.0);
        if !(c < 0.0) {
            return Err(Error::invalid(format!("c < 0 required, got c = {c}")));
        }
        Ok(c)
    }
}

/// Closed-form paths on `[0, τ]` as functions of the noise realization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Oracle {
    /// Lower `c(1 + Σ_{tᵢ≤t} γ(uᵢ) − t∫γλ)`, upper `0`.
    CompensatedLinear { c: f64, gamma: MarkProfile, gamma_mass: f64 },
    /// Lower `c(1 + W(t) − N(t))`, upper `0`.
    DelayedDiffusion { c: f64 },
    /// Lower `c(1 − 2N(t))`, upper `0`.
    DoublingJumps { c: f64 },
}

impl Oracle {
    /// `(upper, lower)` at an event-grid time `t ∈ [0, τ]` (right-continuous).
    pub fn eval(&self, noise: &NoiseRealization, t: f64) -> Result<(f64, f64)> {
        let lower = match self {
            Oracle::CompensatedLinear { c, gamma, gamma_mass } => {
                let jumps: f64 = noise
                    .jumps()
                    .iter()
                    .take_while(|j| j.time <= t)
                    .map(|j| gamma.eval(j.mark))
                    .sum();
                c * (1.0 + jumps - t * gamma_mass)
            }
            Oracle::DelayedDiffusion { c } => {
                let w = noise
                    .brownian_at(t)
                    .ok_or_else(|| Error::invalid(format!("t = {t} is not a Brownian skeleton time")))?;
                c * (1.0 + w - noise.jump_count_until(t) as f64)
            }
            Oracle::DoublingJumps { c } => c * (1.0 - 2.0 * noise.jump_count_until(t) as f64),
        };
        Ok((0.0, lower))
    }
}

/// Pair whose diffusion reads the delayed state, `dX = X(t−τ)dW − X(t−τ)dN`.
/// Lies outside [`ComparisonPair`] by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct DelayedDiffusionPair {
    upper: Segment,
    lower: Segment,
    horizon: f64,
    marks: MarkSpace,
}

struct DelayedDiffusion<'a>(&'a Segment);

impl Dynamics for DelayedDiffusion<'_> {
    fn drift(&self, _x: f64, _y: f64, _t: f64) -> f64 {
        0.0
    }

    fn diffusion(&self, _x: f64, y: f64, _t: f64) -> f64 {
        y
    }

    fn jump(&self, _x: f64, y: f64, _t: f64, _u: f64) -> f64 {
        -y
    }

    fn initial(&self) -> &Segment {
        self.0
    }
}

impl CoupledSystem for DelayedDiffusionPair {
    fn tau(&self) -> f64 {
        self.upper.tau()
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn mark_space(&self) -> &MarkSpace {
        &self.marks
    }

    fn integrate_coupled(&self, noise: &NoiseRealization, grid: &GridSpec) -> Result<(PathRecord, PathRecord)> {
        if grid.tau() != self.tau() || grid.horizon() > self.horizon {
            return Err(Error::invalid("grid does not match the system's delay and horizon"));
        }
        let eg = event_grid_for(grid, noise)?;
        let up = integrate_on(&DelayedDiffusion(&self.upper), noise, &eg, DelaySource::Own)?;
        let lo = integrate_on(&DelayedDiffusion(&self.lower), noise, &eg, DelaySource::Own)?;
        Ok((up, lo))
    }
}

#[derive(Clone, Debug, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum ScenarioSystem {
    Pair(ComparisonPair),
    DelayedDiffusion(DelayedDiffusionPair),
}

/// Headline Monte Carlo statistic of a counterexample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleStatistic {
    pub name: String,
    pub estimate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BuiltScenario {
    pub id: ScenarioId,
    pub params: ScenarioParams,
    pub system: ScenarioSystem,
    pub oracle: Option<Oracle>,
    /// Jump intensity used by the exact-law oracle.
    lambda: f64,
}

impl BuiltScenario {
    pub fn build(id: ScenarioId, params: &ScenarioParams) -> Result<Self> {
        match id {
            ScenarioId::Ex2_3 => ex2_3(params),
            ScenarioId::Ex2_4 => ex2_4(params),
            ScenarioId::Ex2_5 => ex2_5(params),
            ScenarioId::Ex3_2 => ex3_2(params),
            ScenarioId::AffineTheorem => affine_theorem(params),
            ScenarioId::LemmaPureJump => lemma_pure_jump(params),
        }
    }

    pub fn with_defaults(id: ScenarioId) -> Result<Self> {
        Self::build(id, &ScenarioParams::default())
    }

    pub fn pair(&self) -> Option<&ComparisonPair> {
        match &self.system {
            ScenarioSystem::Pair(p) => Some(p),
            ScenarioSystem::DelayedDiffusion(_) => None,
        }
    }

    pub fn coupled(&self) -> &dyn CoupledSystem {
        match &self.system {
            ScenarioSystem::Pair(p) => p,
            ScenarioSystem::DelayedDiffusion(d) => d,
        }
    }

    pub fn tau(&self) -> f64 {
        self.coupled().tau()
    }

    pub fn horizon(&self) -> f64 {
        self.coupled().horizon()
    }

    /// Hypothesis checks, or a structural rejection for systems outside the
    /// comparison class.
    pub fn conditions(&self, sample: &DomainSample) -> Result<ConditionReport> {
        match &self.system {
            ScenarioSystem::Pair(p) => check_pair(p, sample),
            ScenarioSystem::DelayedDiffusion(_) => Ok(ConditionReport::rejected(
                "diffusion coefficient depends on the delayed state; comparison pairs require g(x, t)",
            )),
        }
    }

    pub fn default_domain(&self) -> DomainSample {
        DomainSample::for_horizon(self.horizon())
    }

    /// True when Euler reproduces the exact solution: no diffusion and
    /// piecewise-constant initial data.
    pub fn exactly_representable(&self) -> bool {
        match &self.system {
            ScenarioSystem::Pair(p) => {
                p.upper().coefficients.diffusion == Diffusion::zero() && p.lower().coefficients.diffusion == Diffusion::zero()
            }
            ScenarioSystem::DelayedDiffusion(_) => false,
        }
    }

    /// 0 for exactly representable systems, `dt` otherwise.
    pub fn default_epsilon(&self, grid: &GridSpec) -> f64 {
        if self.exactly_representable() {
            0.0
        } else {
            grid.dt()
        }
    }

    /// `[0, τ]` for the counterexamples, whose oracles live there.
    pub fn oracle_window(&self) -> Option<(f64, f64)> {
        self.oracle.as_ref().map(|_| (0.0, self.tau()))
    }

    /// `1 − e^{−λt}`, the exact probability that the lower path of the
    /// doubling-jump counterexample is positive at `t ≤ τ`.
    pub fn exact_positive_probability(&self, t: f64) -> Option<f64> {
        match self.oracle {
            Some(Oracle::DoublingJumps { .. }) => Some(-(-self.lambda * t).exp_m1()),
            _ => None,
        }
    }

    /// Monte Carlo estimate of the quantity each counterexample is known for,
    /// with `ε = 0` on `[0, τ]`.
    pub fn oracle_statistic(&self, n_paths: u64, grid: &GridSpec, policy: &RngPolicy) -> Result<Option<OracleStatistic>> {
        let tau = self.tau();
        let cfg = OrderingConfig::new(n_paths, 0.0).with_window(0.0, tau);
        match self.oracle {
            Some(Oracle::DoublingJumps { .. }) => {
                let r = ordering_statistics(self.coupled(), &cfg, grid, policy)?;
                Ok(Some(OracleStatistic {
                    name: "P(X(tau) > 0)".into(),
                    estimate: r.terminal_violation_prob,
                    exact: self.exact_positive_probability(tau),
                }))
            }
            Some(Oracle::DelayedDiffusion { .. }) => {
                let r = ordering_statistics(self.coupled(), &cfg, grid, policy)?;
                Ok(Some(OracleStatistic {
                    name: "P(X(t) > 0 for some grid t <= tau)".into(),
                    estimate: r.raw_violation_prob,
                    exact: None,
                }))
            }
            Some(Oracle::CompensatedLinear { .. }) => {
                let r = ordering_statistics(self.coupled(), &cfg, grid, policy)?;
                Ok(Some(OracleStatistic {
                    name: "P(X(t) < 0 for every grid t <= tau)".into(),
                    estimate: 1.0 - r.raw_violation_prob,
                    exact: Some(1.0),
                }))
            }
            None => Ok(None),
        }
    }
}

fn coefficients(drift: Drift, diffusion: Diffusion, jump: Jump, marks: &MarkSpace, lip: Option<f64>) -> CoefficientSet {
    CoefficientSet {
        drift,
        diffusion,
        jump,
        mark_space: marks.clone(),
        lipschitz_bound: lip,
    }
}

fn problem(c: CoefficientSet, tau: f64, xi: f64, horizon: f64, form: JumpForm) -> Result<SddeProblem> {
    SddeProblem::new(c, Segment::constant(tau, xi)?, horizon, form)
}

fn finish(id: ScenarioId, params: &ScenarioParams, system: ScenarioSystem, oracle: Option<Oracle>, marks: &MarkSpace) -> BuiltScenario {
    BuiltScenario {
        id,
        params: params.clone(),
        system,
        oracle,
        lambda: marks.total_mass(),
    }
}

fn ex2_3(p: &ScenarioParams) -> Result<BuiltScenario> {
    let (c, tau, horizon, marks) = (p.c()?, p.tau(), p.horizon(), p.marks()?);
    let gamma = p.gamma.unwrap_or(MarkProfile::constant(0.3));
    if !(gamma.min_on(&marks) > 0.0) {
        return Err(Error::invalid("gamma(u) > 0 required on the mark support"));
    }
    let gamma_mass = gamma.integral(&marks);
    if !(tau * gamma_mass < 1.0) {
        return Err(Error::invalid(format!(
            "tau * int gamma d(lambda) < 1 required, got {}",
            tau * gamma_mass
        )));
    }
    let jump = Jump::MultiplicativeMark {
        rho: gamma,
        alpha: 0.0,
        beta: 1.0,
        offset: 0.0,
    };
    let coeff = coefficients(Drift::zero(), Diffusion::zero(), jump, &marks, None);
    let upper = problem(coeff.clone(), tau, 0.0, horizon, JumpForm::Compensated)?;
    let lower = problem(coeff, tau, c, horizon, JumpForm::Compensated)?;
    let pair = ComparisonPair::new(upper, lower, PairKind::SharedJump)?;
    Ok(finish(
        ScenarioId::Ex2_3,
        p,
        ScenarioSystem::Pair(pair),
        Some(Oracle::CompensatedLinear { c, gamma, gamma_mass }),
        &marks,
    ))
}

fn ex2_4(p: &ScenarioParams) -> Result<BuiltScenario> {
    let (c, tau, horizon, marks) = (p.c()?, p.tau(), p.horizon(), p.marks()?);
    if !(horizon > 0.0) {
        return Err(Error::invalid("horizon must be positive"));
    }
    let system = DelayedDiffusionPair {
        upper: Segment::constant(tau, 0.0)?,
        lower: Segment::constant(tau, c)?,
        horizon,
        marks: marks.clone(),
    };
    Ok(finish(
        ScenarioId::Ex2_4,
        p,
        ScenarioSystem::DelayedDiffusion(system),
        Some(Oracle::DelayedDiffusion { c }),
        &marks,
    ))
}

fn ex2_5(p: &ScenarioParams) -> Result<BuiltScenario> {
    let (c, tau, horizon, marks) = (p.c()?, p.tau(), p.horizon(), p.marks()?);
    if !(marks.total_mass() > 0.0) {
        return Err(Error::invalid("lambda > 0 required"));
    }
    let gated = Jump::IndicatorGated {
        rho: MarkProfile::constant(1.0),
        alpha: 0.0,
        beta: -2.0,
        offset: 0.0,
    };
    let upper = problem(
        coefficients(Drift::zero(), Diffusion::zero(), gated, &marks, None),
        tau,
        0.0,
        horizon,
        JumpForm::PureJump,
    )?;
    let lower = problem(
        coefficients(Drift::zero(), Diffusion::zero(), Jump::affine(0.0, -2.0, 0.0), &marks, None),
        tau,
        c,
        horizon,
        JumpForm::PureJump,
    )?;
    let pair = ComparisonPair::new(upper, lower, PairKind::OrderedJump)?;
    Ok(finish(
        ScenarioId::Ex2_5,
        p,
        ScenarioSystem::Pair(pair),
        Some(Oracle::DoublingJumps { c }),
        &marks,
    ))
}

fn ex3_2(p: &ScenarioParams) -> Result<BuiltScenario> {
    let (tau, horizon, marks) = (p.tau(), p.horizon(), p.marks()?);
    let rho = p.rho.unwrap_or(MarkProfile::constant(0.5));
    let (a, b, c0) = (p.a.unwrap_or(-0.2), p.b.unwrap_or(0.4), p.c0.unwrap_or(0.0));
    let (delta, sigma) = (p.delta.unwrap_or(0.5), p.sigma.unwrap_or(0.2));
    let (xi1, xi2) = (p.xi_upper.unwrap_or(0.0), p.xi_lower.unwrap_or(-0.5));
    if !(rho.min_on(&marks) > 0.0) {
        return Err(Error::invalid("rho(u) > 0 required on the mark support"));
    }
    let rho_mass = rho.integral(&marks);
    if !(rho_mass < 1.0) {
        return Err(Error::invalid(format!("int rho d(lambda) < 1 required, got {rho_mass}")));
    }
    if !(delta >= 0.0) {
        return Err(Error::invalid("drift domination f1 >= f2 requires delta >= 0"));
    }
    if !(xi1 >= xi2) {
        return Err(Error::invalid("initial ordering xi1 >= xi2 required"));
    }
    let rho_sq = marks.integrate(|u| rho.eval(u).powi(2));
    let lip = ((a * a + b * b) * (1.0 + rho_sq)).max(sigma * sigma).max(f64::MIN_POSITIVE);
    let jump = Jump::MultiplicativeMark {
        rho,
        alpha: a,
        beta: b,
        offset: c0,
    };
    let f2 = Drift::affine(a, b, c0);
    let upper = problem(
        coefficients(f2.shifted(delta), Diffusion::linear(sigma), jump.clone(), &marks, Some(lip)),
        tau,
        xi1,
        horizon,
        JumpForm::Compensated,
    )?;
    let lower = problem(
        coefficients(f2, Diffusion::linear(sigma), jump, &marks, Some(lip)),
        tau,
        xi2,
        horizon,
        JumpForm::Compensated,
    )?;
    let pair = ComparisonPair::new(upper, lower, PairKind::SharedJump)?;
    Ok(finish(ScenarioId::Ex3_2, p, ScenarioSystem::Pair(pair), None, &marks))
}

fn affine_theorem(p: &ScenarioParams) -> Result<BuiltScenario> {
    let (tau, horizon, marks) = (p.tau(), p.horizon(), p.marks()?);
    let (a, b, c0) = (p.a.unwrap_or(-0.5), p.b.unwrap_or(0.5), p.c0.unwrap_or(0.0));
    let (delta, sigma) = (p.delta.unwrap_or(0.5), p.sigma.unwrap_or(0.3));
    let (kappa, mu) = (p.kappa.unwrap_or(-0.5), p.mu.unwrap_or(0.3));
    let (xi1, xi2) = (p.xi_upper.unwrap_or(0.5), p.xi_lower.unwrap_or(0.0));
    if !(b >= 0.0) {
        return Err(Error::invalid("drift must be nondecreasing in the delayed state: b >= 0"));
    }
    if !(delta >= 0.0) {
        return Err(Error::invalid("drift domination f1 >= f2 requires delta >= 0"));
    }
    if !(mu >= 0.0) {
        return Err(Error::invalid("jump coefficient must be nondecreasing in the delayed state: mu >= 0"));
    }
    if !(kappa >= -1.0) {
        return Err(Error::invalid(format!(
            "state-jump monotonicity x + gamma(x, z) nondecreasing in x requires kappa >= -1, got {kappa}"
        )));
    }
    if !(xi1 >= xi2) {
        return Err(Error::invalid("initial ordering xi1 >= xi2 required"));
    }
    let lip = (a * a + b * b + marks.total_mass() * (kappa * kappa + mu * mu))
        .max(sigma * sigma)
        .max(f64::MIN_POSITIVE);
    let jump = Jump::affine(kappa, mu, 0.0);
    let f2 = Drift::affine(a, b, c0);
    let upper = problem(
        coefficients(f2.shifted(delta), Diffusion::linear(sigma), jump.clone(), &marks, Some(lip)),
        tau,
        xi1,
        horizon,
        JumpForm::PureJump,
    )?;
    let lower = problem(
        coefficients(f2, Diffusion::linear(sigma), jump, &marks, Some(lip)),
        tau,
        xi2,
        horizon,
        JumpForm::PureJump,
    )?;
    let pair = ComparisonPair::new(upper, lower, PairKind::SharedJump)?;
    Ok(finish(ScenarioId::AffineTheorem, p, ScenarioSystem::Pair(pair), None, &marks))
}

fn lemma_pure_jump(p: &ScenarioParams) -> Result<BuiltScenario> {
    let (tau, horizon, marks) = (p.tau(), p.horizon(), p.marks()?);
    let (a, c0) = (p.a.unwrap_or(-0.5), p.c0.unwrap_or(0.0));
    let (delta, sigma) = (p.delta.unwrap_or(0.3), p.sigma.unwrap_or(0.3));
    let (kappa, eta) = (p.kappa.unwrap_or(-0.5), p.eta.unwrap_or(0.2));
    let (xi1, xi2) = (p.xi_upper.unwrap_or(0.5), p.xi_lower.unwrap_or(0.0));
    if !(delta >= 0.0) {
        return Err(Error::invalid("drift domination f1 >= f2 requires delta >= 0"));
    }
    if !(eta >= 0.0) {
        return Err(Error::invalid("jump domination gamma1 >= gamma2 requires eta >= 0"));
    }
    if !(kappa >= -1.0) {
        return Err(Error::invalid(format!(
            "state-jump monotonicity x + gamma(x) nondecreasing in x requires kappa >= -1, got {kappa}"
        )));
    }
    if !(xi1 >= xi2) {
        return Err(Error::invalid("initial ordering xi1 >= xi2 required"));
    }
    let lip = (a * a + marks.total_mass() * kappa * kappa).max(sigma * sigma).max(f64::MIN_POSITIVE);
    let f2 = Drift::affine(a, 0.0, c0);
    let upper = problem(
        coefficients(f2.shifted(delta), Diffusion::linear(sigma), Jump::affine(kappa, 0.0, eta), &marks, Some(lip)),
        tau,
        xi1,
        horizon,
        JumpForm::PureJump,
    )?;
    let lower = problem(
        coefficients(f2, Diffusion::linear(sigma), Jump::affine(kappa, 0.0, 0.0), &marks, Some(lip)),
        tau,
        xi2,
        horizon,
        JumpForm::PureJump,
    )?;
    let pair = ComparisonPair::new(upper, lower, PairKind::OrderedJump)?;
    Ok(finish(ScenarioId::LemmaPureJump, p, ScenarioSystem::Pair(pair), None, &marks))
}
