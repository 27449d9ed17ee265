//! Sampled checks of the comparison hypotheses.
//!
//! Coefficients are black boxes, so a check can only ever report
//! `PASS_SAMPLED` (no violation found on the sample) or `FAIL` with a concrete
//! witness. Monotonicity is tested on every ordered pair of sampled points.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{CoefficientSet, ComparisonPair, Drift, JumpForm, Segment};
use crate::randomness::linspace;

/// Absolute slack on every sampled inequality.
pub const TOLERANCE: f64 = 1e-12;

/// Number of uniform probes of `[-τ, 0]` used by the initial-ordering check.
pub const INITIAL_PROBES: usize = 1000;

/// Sample box and resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSample {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub t_nodes: Vec<f64>,
    /// Points per state axis (and per continuous mark axis).
    pub count: usize,
    /// Extra uniformly drawn points per state axis.
    #[serde(default)]
    pub random_probes: usize,
    #[serde(default)]
    pub seed: u64,
}

impl DomainSample {
    /// `[-5, 5]²`, 21 points per axis plus 8 random probes, `t ∈ {0, T/2, T}`.
    pub fn for_horizon(horizon: f64) -> Self {
        Self {
            x: (-5.0, 5.0),
            y: (-5.0, 5.0),
            t_nodes: vec![0.0, 0.5 * horizon, horizon],
            count: 21,
            random_probes: 8,
            seed: 0,
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        if self.count < 2 {
            return Err(crate::Error::invalid("domain sample needs at least 2 points per axis"));
        }
        if !(self.x.0 < self.x.1 && self.y.0 < self.y.1) {
            return Err(crate::Error::invalid("domain sample box is empty"));
        }
        if self.t_nodes.is_empty() {
            return Err(crate::Error::invalid("domain sample needs at least one time node"));
        }
        Ok(())
    }

    fn axis(&self, range: (f64, f64), salt: u64) -> Vec<f64> {
        let mut pts = linspace(range.0, range.1, self.count);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ salt);
        pts.extend((0..self.random_probes).map(|_| rng.random_range(range.0..=range.1)));
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    pub fn x_axis(&self) -> Vec<f64> {
        self.axis(self.x, 0x78)
    }

    pub fn y_axis(&self) -> Vec<f64> {
        self.axis(self.y, 0x79)
    }
}

/// Point at which an inequality `lhs >= rhs` failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub inequality: String,
}

impl Witness {
    fn new(inequality: &str, lhs: f64, rhs: f64) -> Self {
        Self {
            x: None,
            y: None,
            z: None,
            t: None,
            u: None,
            theta: None,
            lhs,
            rhs,
            inequality: inequality.to_string(),
        }
    }

    /// `rhs − lhs`; positive for a genuine violation.
    pub fn violation(&self) -> f64 {
        self.rhs - self.lhs
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    PassSampled,
    Fail { witness: Witness },
    NotApplicable { reason: String },
}

impl Verdict {
    pub fn is_fail(&self) -> bool {
        matches!(self, Verdict::Fail { .. })
    }

    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::PassSampled)
    }

    pub fn witness(&self) -> Option<&Witness> {
        match self {
            Verdict::Fail { witness } => Some(witness),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConditionKey {
    DriftDomination,
    JumpDomination,
    StateJumpMonotone,
    DelayMonotoneDrift,
    DelayMonotoneJump,
    CompensatedDelayMonotone,
    InitialOrdering,
}

impl ConditionKey {
    pub const ALL: [ConditionKey; 7] = [
        ConditionKey::DriftDomination,
        ConditionKey::JumpDomination,
        ConditionKey::StateJumpMonotone,
        ConditionKey::DelayMonotoneDrift,
        ConditionKey::DelayMonotoneJump,
        ConditionKey::CompensatedDelayMonotone,
        ConditionKey::InitialOrdering,
    ];
}

/// Per-condition verdicts, or a structural rejection when the system lies
/// outside the class the checks are defined for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub conditions: BTreeMap<ConditionKey, Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structural_rejection: Option<String>,
}

impl ConditionReport {
    pub fn rejected(reason: impl Into<String>) -> Self {
        Self {
            conditions: BTreeMap::new(),
            structural_rejection: Some(reason.into()),
        }
    }

    pub fn verdict(&self, key: ConditionKey) -> Option<&Verdict> {
        self.conditions.get(&key)
    }

    pub fn failed(&self) -> Vec<ConditionKey> {
        self.conditions
            .iter()
            .filter(|(_, v)| v.is_fail())
            .map(|(k, _)| *k)
            .collect()
    }

    /// True when any check failed or the system was structurally rejected.
    pub fn has_failure(&self) -> bool {
        self.structural_rejection.is_some() || self.conditions.values().any(Verdict::is_fail)
    }
}

fn fail(w: Witness) -> Verdict {
    Verdict::Fail { witness: w }
}

/// `f₁(x, y, t) ≥ f₂(x, y, t)` on the sample.
pub fn check_drift_domination(upper: &Drift, lower: &Drift, sample: &DomainSample) -> Verdict {
    let (xs, ys) = (sample.x_axis(), sample.y_axis());
    for &t in &sample.t_nodes {
        for &x in &xs {
            for &y in &ys {
                let (a, b) = (upper.eval(x, y, t), lower.eval(x, y, t));
                if a < b - TOLERANCE {
                    let mut w = Witness::new("f1(x,y,t) >= f2(x,y,t)", a, b);
                    (w.x, w.y, w.t) = (Some(x), Some(y), Some(t));
                    return fail(w);
                }
            }
        }
    }
    Verdict::PassSampled
}

/// `γ₁(x, y, t, u) ≥ γ₂(x, y, t, u)` on the sample.
pub fn check_jump_domination(upper: &CoefficientSet, lower: &CoefficientSet, sample: &DomainSample) -> Verdict {
    let (xs, ys) = (sample.x_axis(), sample.y_axis());
    let us = upper.mark_space.support_nodes(sample.count);
    for &t in &sample.t_nodes {
        for &u in &us {
            for &x in &xs {
                for &y in &ys {
                    let a = upper.jump.eval(x, y, t, u);
                    let b = lower.jump.eval(x, y, t, u);
                    if a < b - TOLERANCE {
                        let mut w = Witness::new("gamma1(x,y,t,u) >= gamma2(x,y,t,u)", a, b);
                        (w.x, w.y, w.t, w.u) = (Some(x), Some(y), Some(t), Some(u));
                        return fail(w);
                    }
                }
            }
        }
    }
    Verdict::PassSampled
}

/// Scan every ordered pair `lo < hi` of `axis`; report the first where
/// `values[hi] < values[lo] − TOLERANCE`.
fn first_decrease(values: &[f64]) -> Option<(usize, usize)> {
    for hi in 1..values.len() {
        for lo in 0..hi {
            if values[hi] < values[lo] - TOLERANCE {
                return Some((lo, hi));
            }
        }
    }
    None
}

/// `x + γ(x, z, t, u) ≤ y + γ(y, z, t, u)` whenever `x ≤ y`.
pub fn check_state_jump_monotone(coeffs: &CoefficientSet, sample: &DomainSample) -> Verdict {
    let (xs, zs) = (sample.x_axis(), sample.y_axis());
    let us = coeffs.mark_space.support_nodes(sample.count);
    let mut column = Vec::with_capacity(xs.len());
    for &t in &sample.t_nodes {
        for &u in &us {
            for &z in &zs {
                column.clear();
                column.extend(xs.iter().map(|&x| x + coeffs.jump.eval(x, z, t, u)));
                if let Some((lo, hi)) = first_decrease(&column) {
                    let mut w = Witness::new("y + gamma(y,z,t,u) >= x + gamma(x,z,t,u) for x <= y", column[hi], column[lo]);
                    (w.x, w.y, w.z, w.t, w.u) = (Some(xs[lo]), Some(xs[hi]), Some(z), Some(t), Some(u));
                    return fail(w);
                }
            }
        }
    }
    Verdict::PassSampled
}

/// Target of a delay-monotonicity check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DelayTarget {
    Drift,
    Jump,
}

/// Nondecreasing in the delayed argument: `h(x, y, …) ≥ h(x, z, …)` for `y ≥ z`.
pub fn check_delay_monotone(coeffs: &CoefficientSet, sample: &DomainSample, which: DelayTarget) -> Verdict {
    match which {
        DelayTarget::Drift => delay_monotone_by(sample, &[f64::NAN], "f2(x,y,t) >= f2(x,z,t) for y >= z", |x, y, t, _| {
            coeffs.drift.eval(x, y, t)
        }),
        DelayTarget::Jump => delay_monotone_by(
            sample,
            &coeffs.mark_space.support_nodes(sample.count),
            "gamma(x,y,t,u) >= gamma(x,z,t,u) for y >= z",
            |x, y, t, u| coeffs.jump.eval(x, y, t, u),
        ),
    }
}

fn delay_monotone_by(
    sample: &DomainSample,
    marks: &[f64],
    inequality: &str,
    h: impl Fn(f64, f64, f64, f64) -> f64,
) -> Verdict {
    let (xs, ys) = (sample.x_axis(), sample.y_axis());
    let mut column = Vec::with_capacity(ys.len());
    for &t in &sample.t_nodes {
        for &u in marks {
            for &x in &xs {
                column.clear();
                column.extend(ys.iter().map(|&y| h(x, y, t, u)));
                if let Some((lo, hi)) = first_decrease(&column) {
                    let mut w = Witness::new(inequality, column[hi], column[lo]);
                    (w.x, w.y, w.z, w.t) = (Some(x), Some(ys[hi]), Some(ys[lo]), Some(t));
                    w.u = (!u.is_nan()).then_some(u);
                    return fail(w);
                }
            }
        }
    }
    Verdict::PassSampled
}

/// `f₂ − ∫γλ` and `γ` both nondecreasing in the delayed argument. The
/// compensator uses the same quadrature as the pure-jump rewrite.
pub fn check_compensated_monotone(coeffs: &CoefficientSet, sample: &DomainSample) -> Verdict {
    let marks = &coeffs.mark_space;
    let part_one = delay_monotone_by(
        sample,
        &[f64::NAN],
        "f2(x,y,t) - int gamma(x,y,t,u) lambda(du) >= same at z for y >= z",
        |x, y, t, _| coeffs.drift.eval(x, y, t) - coeffs.jump.compensator(x, y, t, marks),
    );
    if part_one.is_fail() {
        return part_one;
    }
    check_delay_monotone(coeffs, sample, DelayTarget::Jump)
}

/// `ξ₁(θ) ≥ ξ₂(θ)` at both segments' breakpoints plus uniform probes.
pub fn check_initial_ordering(upper: &Segment, lower: &Segment) -> Verdict {
    if upper.tau() != lower.tau() {
        return Verdict::NotApplicable {
            reason: "segments have different delays".into(),
        };
    }
    let tau = upper.tau();
    let mut thetas: Vec<f64> = upper.breakpoints().iter().chain(lower.breakpoints()).copied().collect();
    thetas.extend(linspace(-tau, 0.0, INITIAL_PROBES));
    for theta in thetas {
        let a = upper.evaluate(theta).expect("probe inside segment domain");
        let b = lower.evaluate(theta).expect("probe inside segment domain");
        if a < b - TOLERANCE {
            let mut w = Witness::new("xi1(theta) >= xi2(theta)", a, b);
            w.theta = Some(theta);
            return fail(w);
        }
    }
    Verdict::PassSampled
}

/// Every applicable hypothesis for `pair`.
///
/// Drift and jump domination compare the two members. State monotonicity is
/// checked on the upper jump coefficient; delay monotonicity on the lower
/// member's coefficients. Pure-jump pairs use the drift monotonicity check,
/// compensated pairs the compensated one.
pub fn check_pair(pair: &ComparisonPair, sample: &DomainSample) -> crate::Result<ConditionReport> {
    sample.validate()?;
    let (up, lo) = (&pair.upper().coefficients, &pair.lower().coefficients);
    let mut conditions = BTreeMap::new();
    conditions.insert(ConditionKey::DriftDomination, check_drift_domination(&up.drift, &lo.drift, sample));
    conditions.insert(ConditionKey::JumpDomination, check_jump_domination(up, lo, sample));
    conditions.insert(ConditionKey::StateJumpMonotone, check_state_jump_monotone(up, sample));
    conditions.insert(ConditionKey::DelayMonotoneJump, check_delay_monotone(lo, sample, DelayTarget::Jump));
    match pair.jump_form() {
        JumpForm::PureJump => {
            conditions.insert(
                ConditionKey::DelayMonotoneDrift,
                check_delay_monotone(lo, sample, DelayTarget::Drift),
            );
            conditions.insert(
                ConditionKey::CompensatedDelayMonotone,
                Verdict::NotApplicable {
                    reason: "pure-jump pair".into(),
                },
            );
        }
        JumpForm::Compensated => {
            conditions.insert(
                ConditionKey::DelayMonotoneDrift,
                Verdict::NotApplicable {
                    reason: "compensated pair: replaced by CompensatedDelayMonotone".into(),
                },
            );
            conditions.insert(ConditionKey::CompensatedDelayMonotone, check_compensated_monotone(lo, sample));
        }
    }
    conditions.insert(
        ConditionKey::InitialOrdering,
        check_initial_ordering(&pair.upper().initial, &pair.lower().initial),
    );
    Ok(ConditionReport {
        conditions,
        structural_rejection: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Diffusion, Jump, MarkProfile};
    use crate::randomness::MarkSpace;

    fn sample() -> DomainSample {
        DomainSample::for_horizon(1.0)
    }

    fn with_jump(jump: Jump) -> CoefficientSet {
        CoefficientSet {
            drift: Drift::zero(),
            diffusion: Diffusion::zero(),
            jump,
            mark_space: MarkSpace::degenerate(0.0, 1.0).unwrap(),
            lipschitz_bound: None,
        }
    }

    #[test]
    fn drift_domination_cases() {
        let f2 = Drift::affine(0.5, -0.2, 0.1);
        assert!(check_drift_domination(&f2.shifted(1.0), &f2, &sample()).is_pass());
        assert!(check_drift_domination(&f2, &f2, &sample()).is_pass());
        let v = check_drift_domination(&Drift::affine(1.0, 0.0, 0.0), &Drift::affine(1.0, 0.0, 1.0), &sample());
        let w = v.witness().expect("fail carries witness");
        assert!((w.violation() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn state_monotone_cases() {
        assert!(check_state_jump_monotone(&with_jump(Jump::affine(-0.5, 0.0, 0.0)), &sample()).is_pass());
        assert!(check_state_jump_monotone(&with_jump(Jump::affine(-2.0, 0.0, 0.0)), &sample()).is_fail());
        assert!(check_state_jump_monotone(&with_jump(Jump::affine(0.0, 3.0, 1.0)), &sample()).is_pass());
        // boundary: x + γ constant in x
        assert!(check_state_jump_monotone(&with_jump(Jump::affine(-1.0, 0.5, 0.0)), &sample()).is_pass());
    }

    #[test]
    fn delay_monotone_cases() {
        let positive_rho = Jump::MultiplicativeMark {
            rho: MarkProfile::constant(0.5),
            alpha: 0.0,
            beta: 1.0,
            offset: 0.0,
        };
        assert!(check_delay_monotone(&with_jump(positive_rho), &sample(), DelayTarget::Jump).is_pass());
        let v = check_delay_monotone(&with_jump(Jump::affine(0.0, -2.0, 0.0)), &sample(), DelayTarget::Jump);
        let w = v.witness().unwrap();
        assert!(w.y.unwrap() > w.z.unwrap());
        let mut c = with_jump(Jump::zero());
        c.drift = Drift::affine(3.0, 0.0, 1.0);
        assert!(check_delay_monotone(&c, &sample(), DelayTarget::Drift).is_pass());
        c.drift = Drift::affine(0.0, -0.1, 0.0);
        assert!(check_delay_monotone(&c, &sample(), DelayTarget::Drift).is_fail());
    }

    #[test]
    fn compensated_monotone_cases() {
        // f2 = 0, γ = y, Λ = 1: f2 − ∫γλ = −y is decreasing
        let v = check_compensated_monotone(&with_jump(Jump::affine(0.0, 1.0, 0.0)), &sample());
        assert!(v.witness().unwrap().inequality.starts_with("f2(x,y,t) - int"));
        // γ independent of y, f2 increasing in y
        let mut c = with_jump(Jump::affine(0.3, 0.0, 1.0));
        c.drift = Drift::affine(0.0, 0.7, 0.0);
        assert!(check_compensated_monotone(&c, &sample()).is_pass());
        // ρ·f2 with ∫ρλ = 0.5 < 1
        let mut c = with_jump(Jump::MultiplicativeMark {
            rho: MarkProfile::constant(0.5),
            alpha: -0.2,
            beta: 0.4,
            offset: 0.1,
        });
        c.drift = Drift::affine(-0.2, 0.4, 0.1);
        assert!(check_compensated_monotone(&c, &sample()).is_pass());
    }

    #[test]
    fn jump_domination_cases() {
        let g = with_jump(Jump::affine(0.2, 0.3, 0.0));
        assert!(check_jump_domination(&g, &g, &sample()).is_pass());
        let up = with_jump(Jump::affine(0.2, 0.3, 0.1));
        assert!(check_jump_domination(&up, &g, &sample()).is_pass());
        let down = with_jump(Jump::affine(0.2, 0.3, -0.1));
        assert!(check_jump_domination(&down, &g, &sample()).is_fail());
    }

    #[test]
    fn initial_ordering_cases() {
        let zero = Segment::constant(1.0, 0.0).unwrap();
        let neg = Segment::constant(1.0, -1.0).unwrap();
        assert!(check_initial_ordering(&zero, &neg).is_pass());
        assert!(check_initial_ordering(&zero, &zero).is_pass());
        let crossing = Segment::from_steps(1.0, vec![(-1.0, -1.0), (-0.5, 1.0)]).unwrap();
        let v = check_initial_ordering(&zero, &crossing);
        let theta = v.witness().unwrap().theta.unwrap();
        assert!(theta >= -0.5);
    }

    #[test]
    fn witness_serializes_with_fields() {
        let v = check_drift_domination(&Drift::affine(1.0, 0.0, 0.0), &Drift::affine(1.0, 0.0, 1.0), &sample());
        let s = serde_json::to_value(&v).unwrap();
        assert_eq!(s["verdict"], "FAIL");
        assert!(s["witness"]["x"].is_number());
        assert!(s["witness"].get("theta").is_none());
        let p = serde_json::to_value(Verdict::PassSampled).unwrap();
        assert_eq!(p["verdict"], "PASS_SAMPLED");
    }
}
