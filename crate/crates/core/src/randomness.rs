//! Reproducible noise: Brownian skeletons, finite-activity Poisson random
//! measures and counter-based per-path substreams.
//!
//! Every path owns a [`PathStream`] derived from `(master_seed, path_index)`.
//! Each noise channel (Brownian increments, jump count, jump times, marks)
//! draws from its own ChaCha8 generator whose key mixes the master seed with
//! the channel tag and whose stream word is the path index. Nothing depends on
//! the order in which paths are simulated.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

/// Tolerance on `sum(atom masses) == total_mass` for discrete mark spaces.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// One atom of a discrete characteristic measure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkAtom {
    pub mark: f64,
    pub mass: f64,
}

/// Shape of the normalized mark distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarkSampler {
    /// Every jump carries the same mark.
    Degenerate { mark: f64 },
    /// Finitely many atoms; masses sum to the total mass.
    Discrete { atoms: Vec<MarkAtom> },
    /// Constant density on `[lo, hi]`.
    Uniform { lo: f64, hi: f64 },
}

/// A characteristic measure with finite total mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MarkSpaceRepr")]
pub struct MarkSpace {
    total_mass: f64,
    sampler: MarkSampler,
}

#[derive(Deserialize)]
struct MarkSpaceRepr {
    total_mass: f64,
    sampler: MarkSampler,
}

impl TryFrom<MarkSpaceRepr> for MarkSpace {
    type Error = Error;

    fn try_from(r: MarkSpaceRepr) -> Result<Self> {
        MarkSpace::new(r.total_mass, r.sampler)
    }
}

impl MarkSpace {
    pub fn new(total_mass: f64, sampler: MarkSampler) -> Result<Self> {
        if !(total_mass.is_finite() && total_mass >= 0.0) {
            return Err(Error::invalid(format!(
                "mark space total mass must be finite and nonnegative, got {total_mass}"
            )));
        }
        match &sampler {
            MarkSampler::Degenerate { mark } => {
                if !mark.is_finite() {
                    return Err(Error::invalid("degenerate mark must be finite"));
                }
            }
            MarkSampler::Discrete { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::invalid("discrete mark space needs at least one atom"));
                }
                if atoms.iter().any(|a| !(a.mass >= 0.0 && a.mark.is_finite() && a.mass.is_finite())) {
                    return Err(Error::invalid("discrete atoms need finite marks and nonnegative masses"));
                }
                let sum: f64 = atoms.iter().map(|a| a.mass).sum();
                if (sum - total_mass).abs() > MASS_TOLERANCE {
                    return Err(Error::invalid(format!(
                        "discrete atom masses sum to {sum}, expected total mass {total_mass}"
                    )));
                }
            }
            MarkSampler::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::invalid(format!("uniform marks need lo < hi, got [{lo}, {hi}]")));
                }
            }
        }
        Ok(Self { total_mass, sampler })
    }

    /// All jumps carry `mark`; total intensity `total_mass`.
    pub fn degenerate(mark: f64, total_mass: f64) -> Result<Self> {
        Self::new(total_mass, MarkSampler::Degenerate { mark })
    }

    pub fn discrete(atoms: Vec<MarkAtom>) -> Result<Self> {
        let total = atoms.iter().map(|a| a.mass).sum();
        Self::new(total, MarkSampler::Discrete { atoms })
    }

    /// Lebesgue measure on `[lo, hi]` scaled by `density`.
    pub fn uniform(lo: f64, hi: f64, density: f64) -> Result<Self> {
        Self::new(density * (hi - lo), MarkSampler::Uniform { lo, hi })
    }

    /// Zero measure: no jumps ever happen.
    pub fn empty() -> Self {
        Self {
            total_mass: 0.0,
            sampler: MarkSampler::Degenerate { mark: 0.0 },
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn sampler(&self) -> &MarkSampler {
        &self.sampler
    }

    /// `∫ h(u) λ(du)`. Exact for point masses, Gauss-Legendre with
    /// [`quadrature::GAUSS_NODES`] nodes for uniform marks.
    pub fn integrate(&self, h: impl Fn(f64) -> f64) -> f64 {
        if self.total_mass == 0.0 {
            return 0.0;
        }
        match &self.sampler {
            MarkSampler::Degenerate { mark } => self.total_mass * h(*mark),
            MarkSampler::Discrete { atoms } => atoms.iter().map(|a| a.mass * h(a.mark)).sum(),
            MarkSampler::Uniform { lo, hi } => {
                let density = self.total_mass / (hi - lo);
                density * quadrature::integrate(*lo, *hi, h)
            }
        }
    }

    /// Draw one mark from `λ / λ(Y)`.
    pub fn sample_mark<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.sampler {
            MarkSampler::Degenerate { mark } => *mark,
            MarkSampler::Discrete { atoms } => {
                let target = rng.random::<f64>() * self.total_mass;
                let mut acc = 0.0;
                for a in atoms {
                    acc += a.mass;
                    if target < acc {
                        return a.mark;
                    }
                }
                // rounding in the cumulative sum; fall back to the last charged atom
                atoms.iter().rev().find(|a| a.mass > 0.0).unwrap_or(&atoms[0]).mark
            }
            MarkSampler::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        }
    }

    /// Representative marks for sampled hypothesis checks.
    pub fn support_nodes(&self, count: usize) -> Vec<f64> {
        match &self.sampler {
            MarkSampler::Degenerate { mark } => vec![*mark],
            MarkSampler::Discrete { atoms } => atoms.iter().map(|a| a.mark).collect(),
            MarkSampler::Uniform { lo, hi } => linspace(*lo, *hi, count.max(2)),
        }
    }
}

pub(crate) fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (count - 1) as f64;
    (0..count)
        .map(|i| if i + 1 == count { hi } else { lo + step * i as f64 })
        .collect()
}

/// One atom of the Poisson random measure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub mark: f64,
}

/// Brownian motion observed at an increasing set of positive times; `W(0) = 0`
/// is implicit.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BrownianSkeleton {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl BrownianSkeleton {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Identifies the substream a realization was drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamId {
    pub seed: u64,
    pub path_index: u64,
}

/// One shared noise input: a Brownian skeleton and a list of jump events.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseRealization {
    horizon: f64,
    brownian: BrownianSkeleton,
    jumps: Vec<JumpEvent>,
    stream_id: StreamId,
}

impl NoiseRealization {
    pub fn new(
        horizon: f64,
        brownian: BrownianSkeleton,
        jumps: Vec<JumpEvent>,
        stream_id: StreamId,
    ) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
        }
        if brownian.times.len() != brownian.values.len() {
            return Err(Error::invalid("brownian skeleton times and values differ in length"));
        }
        check_increasing(&brownian.times, "brownian skeleton")?;
        if brownian.times.first().is_some_and(|&t| t <= 0.0)
            || brownian.times.last().is_some_and(|&t| t > horizon)
        {
            return Err(Error::invalid("brownian skeleton times must lie in (0, T]"));
        }
        let jump_times: Vec<f64> = jumps.iter().map(|j| j.time).collect();
        check_increasing(&jump_times, "jump events")?;
        if jump_times.first().is_some_and(|&t| t <= 0.0) || jump_times.last().is_some_and(|&t| t > horizon) {
            return Err(Error::invalid("jump times must lie in (0, T]"));
        }
        Ok(Self {
            horizon,
            brownian,
            jumps,
            stream_id,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn brownian(&self) -> &BrownianSkeleton {
        &self.brownian
    }

    pub fn jumps(&self) -> &[JumpEvent] {
        &self.jumps
    }

    pub fn stream_id(&self) -> StreamId {
        self.stream_id
    }

    /// Number of jumps in `(0, t]`.
    pub fn jump_count_until(&self, t: f64) -> usize {
        self.jumps.partition_point(|j| j.time <= t)
    }

    /// `W(t)` at a skeleton time, `0` at `t = 0`.
    pub fn brownian_at(&self, t: f64) -> Option<f64> {
        if t == 0.0 {
            return Some(0.0);
        }
        self.brownian
            .times
            .binary_search_by(|probe| probe.total_cmp(&t))
            .ok()
            .map(|i| self.brownian.values[i])
    }
}

fn check_increasing(times: &[f64], what: &str) -> Result<()> {
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid(format!("{what}: non-finite time")));
    }
    if times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid(format!("{what}: times must be strictly increasing")));
    }
    Ok(())
}

/// Master seed for a whole experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngPolicy {
    pub master_seed: u64,
}

impl RngPolicy {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }
}

/// Independent noise channels of a path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Channel {
    Brownian,
    JumpCount,
    JumpTime,
    Mark,
}

impl Channel {
    fn tag(self) -> u64 {
        match self {
            Channel::Brownian => 0x6272_6f77_6e69_616e,
            Channel::JumpCount => 0x6a75_6d70_636e_7421,
            Channel::JumpTime => 0x6a75_6d70_7469_6d65,
            Channel::Mark => 0x6d61_726b_7321_2121,
        }
    }
}

/// Per-path stream handle. Cheap to copy; each call to [`PathStream::rng`]
/// restarts the channel from its first output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PathStream {
    master_seed: u64,
    path_index: u64,
}

impl PathStream {
    pub fn id(&self) -> StreamId {
        StreamId {
            seed: self.master_seed,
            path_index: self.path_index,
        }
    }

    /// Generator for one channel of this path.
    pub fn rng(&self, channel: Channel) -> ChaCha8Rng {
        let mut state = mix64(self.master_seed ^ mix64(channel.tag()));
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            chunk.copy_from_slice(&mix64(state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.path_index);
        rng
    }
}

/// Stream for `path_index` under `policy`.
pub fn derive_path_stream(policy: &RngPolicy, path_index: u64) -> PathStream {
    PathStream {
        master_seed: policy.master_seed,
        path_index,
    }
}

/// First `n` raw outputs of a channel; used to fingerprint streams.
pub fn stream_prefix(stream: &PathStream, channel: Channel, n: usize) -> Vec<u64> {
    let mut rng = stream.rng(channel);
    (0..n).map(|_| rng.next_u64()).collect()
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Compound-Poisson realization of `N(dt, du)` on `(0, horizon]`.
pub fn sample_jump_events(space: &MarkSpace, horizon: f64, stream: &PathStream) -> Result<Vec<JumpEvent>> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
    }
    let intensity = space.total_mass() * horizon;
    if intensity == 0.0 {
        return Ok(Vec::new());
    }
    let mut count_rng = stream.rng(Channel::JumpCount);
    let poisson = Poisson::new(intensity).map_err(|e| Error::invalid(format!("poisson intensity: {e}")))?;
    let count = poisson.sample(&mut count_rng) as usize;

    let mut time_rng = stream.rng(Channel::JumpTime);
    // 1 - U maps [0, 1) onto (0, 1]
    let draw_time = |rng: &mut ChaCha8Rng| horizon * (1.0 - rng.random::<f64>());
    let mut times: Vec<f64> = (0..count).map(|_| draw_time(&mut time_rng)).collect();
    times.sort_by(f64::total_cmp);
    while let Some(i) = (1..times.len()).find(|&i| times[i] == times[i - 1]) {
        times[i] = draw_time(&mut time_rng);
        times.sort_by(f64::total_cmp);
    }

    let mut mark_rng = stream.rng(Channel::Mark);
    Ok(times
        .into_iter()
        .map(|time| JumpEvent {
            time,
            mark: space.sample_mark(&mut mark_rng),
        })
        .collect())
}

/// Brownian values at `times` using the path's Brownian channel.
pub fn sample_brownian_increments(times: &[f64], stream: &PathStream) -> Result<BrownianSkeleton> {
    sample_brownian_with(times, &mut stream.rng(Channel::Brownian))
}

/// Brownian values at `times` from an explicit generator.
pub fn sample_brownian_with<R: Rng + ?Sized>(times: &[f64], rng: &mut R) -> Result<BrownianSkeleton> {
    check_increasing(times, "brownian times")?;
    if times.first().is_some_and(|&t| t <= 0.0) {
        return Err(Error::invalid("brownian times must start after 0"));
    }
    let mut values = Vec::with_capacity(times.len());
    let mut w = 0.0;
    let mut prev = 0.0;
    for &t in times {
        let z: f64 = StandardNormal.sample(rng);
        w += (t - prev).sqrt() * z;
        values.push(w);
        prev = t;
    }
    Ok(BrownianSkeleton {
        times: times.to_vec(),
        values,
    })
}
