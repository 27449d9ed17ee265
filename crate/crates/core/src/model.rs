//! Problem definitions: initial segments, coefficient families, pure-jump and
//! compensated forms, and coupled comparison pairs.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::randomness::MarkSpace;

/// Càdlàg step function on `[-tau, 0]`.
///
/// `breakpoints[0] == -tau`; the value on `[breakpoints[i], breakpoints[i+1])`
/// is `values[i]`, and the last piece extends to `0` inclusive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SegmentRepr")]
pub struct Segment {
    tau: f64,
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct SegmentRepr {
    tau: f64,
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<SegmentRepr> for Segment {
    type Error = Error;

    fn try_from(r: SegmentRepr) -> Result<Self> {
        Segment::from_steps(r.tau, r.breakpoints.into_iter().zip(r.values).collect())
    }
}

impl Segment {
    pub fn constant(tau: f64, value: f64) -> Result<Self> {
        Self::from_steps(tau, vec![(-tau, value)])
    }

    /// Build from `(start, value)` pieces; the first start must be `-tau`.
    pub fn from_steps(tau: f64, steps: Vec<(f64, f64)>) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::invalid(format!("delay tau must be positive, got {tau}")));
        }
        let Some(first) = steps.first() else {
            return Err(Error::invalid("segment needs at least one piece"));
        };
        if first.0 != -tau {
            return Err(Error::invalid(format!(
                "segment must start at -tau = {}, got {}",
                -tau, first.0
            )));
        }
        if steps.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::invalid("segment breakpoints must be strictly increasing"));
        }
        if steps.iter().any(|s| s.0 > 0.0 || !s.1.is_finite()) {
            return Err(Error::invalid("segment breakpoints must lie in [-tau, 0] with finite values"));
        }
        let (breakpoints, values) = steps.into_iter().unzip();
        Ok(Self {
            tau,
            breakpoints,
            values,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn check_domain(&self, theta: f64) -> Result<()> {
        if theta < -self.tau || theta > 0.0 || theta.is_nan() {
            return Err(Error::OutOfDomain { theta, tau: self.tau });
        }
        Ok(())
    }

    /// `ξ(θ)`, right-continuous.
    pub fn evaluate(&self, theta: f64) -> Result<f64> {
        self.check_domain(theta)?;
        let i = self.breakpoints.partition_point(|&b| b <= theta);
        Ok(self.values[i - 1])
    }

    /// `ξ(θ⁻)`; at `θ = -tau` this is `ξ(-tau)`.
    pub fn left_limit(&self, theta: f64) -> Result<f64> {
        self.check_domain(theta)?;
        let i = self.breakpoints.partition_point(|&b| b < theta);
        Ok(self.values[i.max(1) - 1])
    }
}

/// `ρ(u) = offset + slope · u`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkProfile {
    pub offset: f64,
    #[serde(default)]
    pub slope: f64,
}

impl MarkProfile {
    pub fn constant(value: f64) -> Self {
        Self {
            offset: value,
            slope: 0.0,
        }
    }

    /// `ρ(u) = u`.
    pub fn identity() -> Self {
        Self {
            offset: 0.0,
            slope: 1.0,
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.offset + self.slope * u
    }

    /// `∫ ρ dλ`.
    pub fn integral(&self, marks: &MarkSpace) -> f64 {
        marks.integrate(|u| self.eval(u))
    }

    /// Smallest value over the mark support (affine in `u`).
    pub fn min_on(&self, marks: &MarkSpace) -> f64 {
        use crate::randomness::MarkSampler;
        match marks.sampler() {
            MarkSampler::Degenerate { mark } => self.eval(*mark),
            MarkSampler::Discrete { atoms } => atoms
                .iter()
                .filter(|a| a.mass > 0.0)
                .map(|a| self.eval(a.mark))
                .fold(f64::INFINITY, f64::min),
            MarkSampler::Uniform { lo, hi } => self.eval(*lo).min(self.eval(*hi)),
        }
    }
}

macro_rules! custom_fn {
    ($name:ident, $($arg:ident),+) => {
        #[derive(Clone)]
        pub struct $name(pub Arc<dyn Fn($($arg),+) -> f64 + Send + Sync>);

        impl $name {
            pub fn new(f: impl Fn($($arg),+) -> f64 + Send + Sync + 'static) -> Self {
                Self(Arc::new(f))
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!(stringify!($name), "(<fn>)"))
            }
        }

        impl PartialEq for $name {
            fn eq(&self, other: &Self) -> bool {
                Arc::ptr_eq(&self.0, &other.0)
            }
        }
    };
}

custom_fn!(CustomDrift, f64, f64, f64);
custom_fn!(CustomDiffusion, f64, f64);
custom_fn!(CustomJump, f64, f64, f64, f64);

/// Drift `f(x, y, t)` with `y` the delayed state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Drift {
    /// `a·x + b·y + c`
    Affine { a: f64, b: f64, c: f64 },
    /// `base(x, y, t) − ∫ jump(x, y, t, u) λ(du)`
    Compensated {
        base: Box<Drift>,
        jump: Jump,
        marks: MarkSpace,
    },
    #[serde(skip)]
    Custom(CustomDrift),
}

impl Drift {
    pub fn affine(a: f64, b: f64, c: f64) -> Self {
        Drift::Affine { a, b, c }
    }

    pub fn zero() -> Self {
        Drift::affine(0.0, 0.0, 0.0)
    }

    pub fn custom(f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Drift::Custom(CustomDrift::new(f))
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        match self {
            Drift::Affine { a, b, c } => a * x + b * y + c,
            Drift::Compensated { base, jump, marks } => base.eval(x, y, t) - jump.compensator(x, y, t, marks),
            Drift::Custom(f) => (f.0)(x, y, t),
        }
    }

    /// Same drift shifted by a constant.
    pub fn shifted(&self, delta: f64) -> Self {
        match self {
            Drift::Affine { a, b, c } => Drift::affine(*a, *b, c + delta),
            other => {
                let inner = other.clone();
                Drift::custom(move |x, y, t| inner.eval(x, y, t) + delta)
            }
        }
    }
}

/// Diffusion `g(x, t)`; no delayed argument.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Diffusion {
    /// `sigma·x + offset`
    Affine { sigma: f64, offset: f64 },
    #[serde(skip)]
    Custom(CustomDiffusion),
}

impl Diffusion {
    pub fn zero() -> Self {
        Diffusion::Affine {
            sigma: 0.0,
            offset: 0.0,
        }
    }

    pub fn linear(sigma: f64) -> Self {
        Diffusion::Affine { sigma, offset: 0.0 }
    }

    pub fn custom(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Diffusion::Custom(CustomDiffusion::new(f))
    }

    #[inline]
    pub fn eval(&self, x: f64, t: f64) -> f64 {
        match self {
            Diffusion::Affine { sigma, offset } => sigma * x + offset,
            Diffusion::Custom(f) => (f.0)(x, t),
        }
    }
}

/// Jump coefficient `γ(x, y, t, u)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Jump {
    /// `ρ(u)·(alpha·x + beta·y + offset)`
    MultiplicativeMark {
        rho: MarkProfile,
        alpha: f64,
        beta: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `1{y < 0}·ρ(u)·(alpha·x + beta·y + offset)`
    IndicatorGated {
        rho: MarkProfile,
        alpha: f64,
        beta: f64,
        #[serde(default)]
        offset: f64,
    },
    #[serde(skip)]
    Custom(CustomJump),
}

impl Jump {
    pub fn zero() -> Self {
        Jump::MultiplicativeMark {
            rho: MarkProfile::constant(0.0),
            alpha: 0.0,
            beta: 0.0,
            offset: 0.0,
        }
    }

    /// `alpha·x + beta·y + offset`, independent of the mark.
    pub fn affine(alpha: f64, beta: f64, offset: f64) -> Self {
        Jump::MultiplicativeMark {
            rho: MarkProfile::constant(1.0),
            alpha,
            beta,
            offset,
        }
    }

    pub fn custom(f: impl Fn(f64, f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Jump::Custom(CustomJump::new(f))
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64, t: f64, u: f64) -> f64 {
        match self {
            Jump::MultiplicativeMark {
                rho,
                alpha,
                beta,
                offset,
            } => rho.eval(u) * (alpha * x + beta * y + offset),
            Jump::IndicatorGated {
                rho,
                alpha,
                beta,
                offset,
            } => {
                if y < 0.0 {
                    rho.eval(u) * (alpha * x + beta * y + offset)
                } else {
                    0.0
                }
            }
            Jump::Custom(f) => (f.0)(x, y, t, u),
        }
    }

    /// `∫ γ(x, y, t, u) λ(du)`. Mark-separable families integrate `ρ` once.
    pub fn compensator(&self, x: f64, y: f64, t: f64, marks: &MarkSpace) -> f64 {
        match self {
            Jump::MultiplicativeMark {
                rho,
                alpha,
                beta,
                offset,
            } => rho.integral(marks) * (alpha * x + beta * y + offset),
            Jump::IndicatorGated {
                rho,
                alpha,
                beta,
                offset,
            } => {
                if y < 0.0 {
                    rho.integral(marks) * (alpha * x + beta * y + offset)
                } else {
                    0.0
                }
            }
            Jump::Custom(f) => marks.integrate(|u| (f.0)(x, y, t, u)),
        }
    }
}

/// Drift, diffusion, jump coefficient and characteristic measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub drift: Drift,
    pub diffusion: Diffusion,
    pub jump: Jump,
    pub mark_space: MarkSpace,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz_bound: Option<f64>,
}

/// Whether jumps are driven by `N(dt, du)` or by `Ñ(dt, du)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpForm {
    PureJump,
    Compensated,
}

/// One delay equation on `[0, horizon]` with its initial segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SddeProblemRepr")]
pub struct SddeProblem {
    pub coefficients: CoefficientSet,
    pub initial: Segment,
    pub horizon: f64,
    pub jump_form: JumpForm,
}

#[derive(Deserialize)]
struct SddeProblemRepr {
    coefficients: CoefficientSet,
    initial: Segment,
    horizon: f64,
    jump_form: JumpForm,
}

impl TryFrom<SddeProblemRepr> for SddeProblem {
    type Error = Error;

    fn try_from(r: SddeProblemRepr) -> Result<Self> {
        SddeProblem::new(r.coefficients, r.initial, r.horizon, r.jump_form)
    }
}

impl SddeProblem {
    pub fn new(coefficients: CoefficientSet, initial: Segment, horizon: f64, jump_form: JumpForm) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
        }
        if let Some(l) = coefficients.lipschitz_bound {
            if !(l > 0.0) {
                return Err(Error::invalid(format!("lipschitz bound must be positive, got {l}")));
            }
        }
        Ok(Self {
            coefficients,
            initial,
            horizon,
            jump_form,
        })
    }

    pub fn tau(&self) -> f64 {
        self.initial.tau()
    }

    pub fn mark_space(&self) -> &MarkSpace {
        &self.coefficients.mark_space
    }

    /// Drift the engine actually integrates: `f` for pure-jump problems,
    /// `f − ∫γλ` for compensated ones.
    pub fn effective_drift(&self) -> Drift {
        match self.jump_form {
            JumpForm::PureJump => self.coefficients.drift.clone(),
            JumpForm::Compensated => Drift::Compensated {
                base: Box::new(self.coefficients.drift.clone()),
                jump: self.coefficients.jump.clone(),
                marks: self.coefficients.mark_space.clone(),
            },
        }
    }
}

/// Rewrite a compensated problem against `N(dt, du)`, moving the compensator
/// into the drift.
pub fn compensated_to_pure(p: &SddeProblem) -> Result<SddeProblem> {
    if p.jump_form != JumpForm::Compensated {
        return Err(Error::invalid("problem is already in pure-jump form"));
    }
    let mut coefficients = p.coefficients.clone();
    coefficients.drift = p.effective_drift();
    Ok(SddeProblem {
        coefficients,
        initial: p.initial.clone(),
        horizon: p.horizon,
        jump_form: JumpForm::PureJump,
    })
}

/// Which hypothesis class a pair is built for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    /// Both members share the jump coefficient (delay comparison theorem).
    SharedJump,
    /// Jump coefficients may differ and are checked for pointwise order.
    OrderedJump,
}

/// Two systems driven by the same noise; `upper` is claimed to dominate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ComparisonPairRepr")]
pub struct ComparisonPair {
    upper: SddeProblem,
    lower: SddeProblem,
    kind: PairKind,
}

#[derive(Deserialize)]
struct ComparisonPairRepr {
    upper: SddeProblem,
    lower: SddeProblem,
    kind: PairKind,
}

impl TryFrom<ComparisonPairRepr> for ComparisonPair {
    type Error = Error;

    fn try_from(r: ComparisonPairRepr) -> Result<Self> {
        ComparisonPair::new(r.upper, r.lower, r.kind)
    }
}

impl ComparisonPair {
    /// Checks the structural invariants. The initial ordering is a hypothesis
    /// and is left to the condition checker.
    pub fn new(upper: SddeProblem, lower: SddeProblem, kind: PairKind) -> Result<Self> {
        if upper.tau() != lower.tau() {
            return Err(Error::invalid("pair members must share the delay tau"));
        }
        if upper.horizon != lower.horizon {
            return Err(Error::invalid("pair members must share the horizon"));
        }
        if upper.jump_form != lower.jump_form {
            return Err(Error::invalid("pair members must share the jump form"));
        }
        if upper.coefficients.mark_space != lower.coefficients.mark_space {
            return Err(Error::invalid("pair members must share the mark space"));
        }
        if upper.coefficients.diffusion != lower.coefficients.diffusion {
            return Err(Error::invalid("pair members must share the diffusion coefficient"));
        }
        if kind == PairKind::SharedJump && upper.coefficients.jump != lower.coefficients.jump {
            return Err(Error::invalid("shared-jump pair members must share the jump coefficient"));
        }
        Ok(Self { upper, lower, kind })
    }

    pub fn upper(&self) -> &SddeProblem {
        &self.upper
    }

    pub fn lower(&self) -> &SddeProblem {
        &self.lower
    }

    pub fn kind(&self) -> PairKind {
        self.kind
    }

    pub fn tau(&self) -> f64 {
        self.upper.tau()
    }

    pub fn horizon(&self) -> f64 {
        self.upper.horizon
    }

    pub fn jump_form(&self) -> JumpForm {
        self.upper.jump_form
    }

    pub fn mark_space(&self) -> &MarkSpace {
        self.upper.mark_space()
    }
}

/// Box over which coefficient growth and Lipschitz ratios are sampled.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationBox {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub seed: u64,
}

impl Default for ValidationBox {
    fn default() -> Self {
        Self {
            x: (-10.0, 10.0),
            y: (-10.0, 10.0),
            seed: 0,
        }
    }
}

/// A ratio growing by more than this factor between the half-size box and the
/// full box is reported as super-linear.
pub const SCALING_WARN_FACTOR: f64 = 2.0;

/// Sampled local-Lipschitz and linear-growth diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub samples: usize,
    pub lipschitz_estimate: f64,
    pub lipschitz_estimate_inner: f64,
    pub growth_ratio_max: f64,
    pub growth_ratio_inner: f64,
    pub lipschitz_warn: bool,
    pub growth_warn: bool,
    pub warnings: Vec<String>,
}

/// [`validate_problem_in`] over the default box `[-10, 10]²`.
pub fn validate_problem(p: &SddeProblem, sample_budget: usize) -> Result<ValidationReport> {
    validate_problem_in(p, sample_budget, &ValidationBox::default())
}

/// Sample difference quotients of `|Δf|² + |Δg|² + ∫|Δγ|²λ` and growth ratios
/// of `|f|² + |g|² + ∫|γ|²λ` over `(1 + x² + y²)`. Half the budget is spent on
/// the half-size box so super-linear behaviour shows up as a scaling jump.
pub fn validate_problem_in(p: &SddeProblem, sample_budget: usize, region: &ValidationBox) -> Result<ValidationReport> {
    if sample_budget < 100 {
        return Err(Error::invalid("validation needs a sample budget of at least 100"));
    }
    let c = &p.coefficients;
    let drift = p.effective_drift();
    let marks = &c.mark_space;
    let mut rng = ChaCha8Rng::seed_from_u64(region.seed);

    let sq_norm = |x: f64, y: f64, t: f64| {
        let f = drift.eval(x, y, t);
        let g = c.diffusion.eval(x, t);
        let gam = marks.integrate(|u| c.jump.eval(x, y, t, u).powi(2));
        f * f + g * g + gam
    };
    let sq_diff = |x1: f64, y1: f64, x2: f64, y2: f64, t: f64| {
        let df = drift.eval(x1, y1, t) - drift.eval(x2, y2, t);
        let dg = c.diffusion.eval(x1, t) - c.diffusion.eval(x2, t);
        let dgam = marks.integrate(|u| (c.jump.eval(x1, y1, t, u) - c.jump.eval(x2, y2, t, u)).powi(2));
        df * df + dg * dg + dgam
    };

    let mut run = |scale: f64, budget: usize| {
        let (x0, x1) = (region.x.0 * scale, region.x.1 * scale);
        let (y0, y1) = (region.y.0 * scale, region.y.1 * scale);
        let mut lip: f64 = 0.0;
        let mut growth: f64 = 0.0;
        for _ in 0..budget {
            let t = p.horizon * rng.random::<f64>();
            let xa = rng.random_range(x0..=x1);
            let ya = rng.random_range(y0..=y1);
            let xb = rng.random_range(x0..=x1);
            let yb = rng.random_range(y0..=y1);
            let denom = (xa - xb).powi(2) + (ya - yb).powi(2);
            if denom > 0.0 {
                lip = lip.max(sq_diff(xa, ya, xb, yb, t) / denom);
            }
            growth = growth.max(sq_norm(xa, ya, t) / (1.0 + xa * xa + ya * ya));
        }
        (lip, growth)
    };
    let inner_budget = sample_budget / 2;
    let (lip_inner, growth_inner) = run(0.5, inner_budget);
    let (lip_outer, growth_outer) = run(1.0, sample_budget - inner_budget);
    let lipschitz_estimate = lip_inner.max(lip_outer);
    let growth_ratio_max = growth_inner.max(growth_outer);

    let mut warnings = Vec::new();
    let mut lipschitz_warn = false;
    let mut growth_warn = false;
    if let Some(bound) = c.lipschitz_bound {
        if lipschitz_estimate > bound {
            lipschitz_warn = true;
            warnings.push(format!(
                "sampled Lipschitz ratio {lipschitz_estimate} exceeds the declared bound {bound}"
            ));
        }
        if growth_ratio_max > bound {
            growth_warn = true;
            warnings.push(format!("sampled growth ratio {growth_ratio_max} exceeds the declared bound {bound}"));
        }
    }
    if lip_outer > SCALING_WARN_FACTOR * lip_inner && lip_outer > 0.0 {
        lipschitz_warn = true;
        warnings.push(format!(
            "Lipschitz ratio grows from {lip_inner} to {lip_outer} when the box doubles"
        ));
    }
    if growth_outer > SCALING_WARN_FACTOR * growth_inner && growth_outer > 0.0 {
        growth_warn = true;
        warnings.push(format!(
            "growth ratio grows from {growth_inner} to {growth_outer} when the box doubles"
        ));
    }

    Ok(ValidationReport {
        samples: sample_budget,
        lipschitz_estimate,
        lipschitz_estimate_inner: lip_inner,
        growth_ratio_max,
        growth_ratio_inner: growth_inner,
        lipschitz_warn,
        growth_warn,
        warnings,
    })
}
