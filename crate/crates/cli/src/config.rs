use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use sdde_lab::{ComparisonPair, GridSpec, ScenarioId, ScenarioParams};

pub const DEFAULT_DT: &str = "tau/128";
pub const DEFAULT_PATH_EXPORTS: usize = 4;
pub const DEFAULT_TOWER_LEVEL: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    Ordering,
    Curve,
    Tower,
    Conditions,
    Paths,
}

pub fn default_outputs() -> Vec<Output> {
    vec![Output::Conditions, Output::Ordering, Output::Curve]
}

/// Step size, either `"tau/n"` or a number that must divide `τ`.
#[derive(Clone, Debug, PartialEq)]
pub enum StepSpec {
    Fraction(usize),
    Value(f64),
}

impl StepSpec {
    pub fn grid(&self, tau: f64, horizon: f64) -> sdde_lab::Result<GridSpec> {
        match *self {
            StepSpec::Fraction(n) => GridSpec::new(tau, n, horizon),
            StepSpec::Value(dt) => GridSpec::from_dt(dt, tau, horizon),
        }
    }
}

impl fmt::Display for StepSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepSpec::Fraction(n) => write!(f, "tau/{n}"),
            StepSpec::Value(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for StepSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if let Some(n) = s.strip_prefix("tau/") {
            return match n.trim().parse::<usize>() {
                Ok(n) if n > 0 => Ok(StepSpec::Fraction(n)),
                _ => Err(format!("dt '{s}': expected tau/n with a positive integer n")),
            };
        }
        match s.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(StepSpec::Value(v)),
            _ => Err(format!("dt '{s}': expected \"tau/n\" or a positive number")),
        }
    }
}

impl Serialize for StepSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            StepSpec::Fraction(_) => s.serialize_str(&self.to_string()),
            StepSpec::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for StepSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::Number(v) => format!("{v}").parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Experiment description, read from `--config` and overridden by flags.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ScenarioParams>,
    /// Inline pair used instead of a built-in scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ComparisonPair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<StepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<Vec<Output>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tower_level: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_exports: Option<usize>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Fill unset fields of `self` from `base`.
    pub fn or(self, base: RunConfig) -> RunConfig {
        RunConfig {
            scenario: self.scenario.or(base.scenario),
            params: self.params.or(base.params),
            problem: self.problem.or(base.problem),
            n_paths: self.n_paths.or(base.n_paths),
            dt: self.dt.or(base.dt),
            seed: self.seed.or(base.seed),
            epsilon: self.epsilon.or(base.epsilon),
            outputs: self.outputs.or(base.outputs),
            output_dir: self.output_dir.or(base.output_dir),
            threads: self.threads.or(base.threads),
            tower_level: self.tower_level.or(base.tower_level),
            path_exports: self.path_exports.or(base.path_exports),
        }
    }

    pub fn validate(self) -> Result<Resolved> {
        let target = match (self.scenario, self.problem.clone()) {
            (Some(_), Some(_)) => bail!("config names both a scenario and an inline problem"),
            (None, None) => bail!("no scenario given; use --scenario or an inline \"problem\""),
            (Some(id), None) => Target::Scenario(id, self.params.clone().unwrap_or_default()),
            (None, Some(p)) => {
                if self.params.is_some() {
                    bail!("\"params\" only applies to built-in scenarios");
                }
                Target::Inline(p)
            }
        };
        let seed = self.seed.context("a seed is required (--seed or \"seed\")")?;
        let n_paths = self.n_paths.unwrap_or(1000);
        if n_paths == 0 {
            bail!("n_paths must be at least 1");
        }
        if let Some(e) = self.epsilon {
            if !(e >= 0.0) {
                bail!("epsilon must be nonnegative, got {e}");
            }
        }
        let tower_level = self.tower_level.unwrap_or(DEFAULT_TOWER_LEVEL);
        if tower_level < 4 {
            bail!("tower_level must be at least 4, got {tower_level}");
        }
        if self.threads == Some(0) {
            bail!("threads must be at least 1");
        }
        let mut outputs = self.outputs.clone().unwrap_or_else(default_outputs);
        outputs.sort();
        outputs.dedup();
        Ok(Resolved {
            target,
            n_paths,
            dt: self.dt.clone().unwrap_or_else(|| DEFAULT_DT.parse().unwrap()),
            seed,
            epsilon: self.epsilon,
            outputs,
            output_dir: self.output_dir.clone().unwrap_or_else(|| PathBuf::from("sdde-out")),
            threads: self.threads,
            tower_level,
            path_exports: self.path_exports.unwrap_or(DEFAULT_PATH_EXPORTS),
        })
    }
}

#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum Target {
    Scenario(ScenarioId, ScenarioParams),
    Inline(ComparisonPair),
}

/// Validated configuration with defaults applied.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub target: Target,
    pub n_paths: u64,
    pub dt: StepSpec,
    pub seed: u64,
    pub epsilon: Option<f64>,
    pub outputs: Vec<Output>,
    pub output_dir: PathBuf,
    pub threads: Option<usize>,
    pub tower_level: usize,
    pub path_exports: usize,
}

impl Resolved {
    pub fn wants(&self, o: Output) -> bool {
        self.outputs.contains(&o)
    }

    /// Config that reproduces this run; output directory and thread count
    /// are left out since they do not affect results.
    pub fn echo(&self) -> RunConfig {
        let (scenario, params, problem) = match &self.target {
            Target::Scenario(id, p) => (Some(*id), Some(p.clone()), None),
            Target::Inline(pair) => (None, None, Some(pair.clone())),
        };
        RunConfig {
            scenario,
            params,
            problem,
            n_paths: Some(self.n_paths),
            dt: Some(self.dt.clone()),
            seed: Some(self.seed),
            epsilon: self.epsilon,
            outputs: Some(self.outputs.clone()),
            output_dir: None,
            threads: None,
            tower_level: Some(self.tower_level),
            path_exports: Some(self.path_exports),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_spec_parsing() {
        assert_eq!("tau/128".parse::<StepSpec>().unwrap(), StepSpec::Fraction(128));
        assert_eq!("0.25".parse::<StepSpec>().unwrap(), StepSpec::Value(0.25));
        assert!("tau/0".parse::<StepSpec>().is_err());
        assert!("tau/x".parse::<StepSpec>().is_err());
        assert!("-1".parse::<StepSpec>().is_err());
        let v: StepSpec = serde_json::from_str("0.5").unwrap();
        assert_eq!(v, StepSpec::Value(0.5));
        assert_eq!(serde_json::to_string(&StepSpec::Fraction(8)).unwrap(), "\"tau/8\"");
    }

    #[test]
    fn value_step_must_divide_tau() {
        assert!(StepSpec::Value(0.3).grid(1.0, 2.0).is_err());
        assert_eq!(StepSpec::Value(0.25).grid(1.0, 2.0).unwrap().lag_steps(), 4);
    }

    #[test]
    fn missing_seed_is_rejected() {
        let c = RunConfig {
            scenario: Some(ScenarioId::Ex2_5),
            ..RunConfig::default()
        };
        assert!(c.validate().unwrap_err().to_string().contains("seed"));
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = serde_json::from_str::<RunConfig>("{\n  \"scenario\": \"ex2_5\",\n  \"n_pathz\": 3\n}").unwrap_err();
        assert_eq!(err.line(), 3);
        let err = serde_json::from_str::<RunConfig>("{\"scenario\": \"nope\"}").unwrap_err().to_string();
        assert!(err.contains("affine_theorem"), "{err}");
    }

    #[test]
    fn flags_override_file() {
        let file = RunConfig {
            seed: Some(1),
            n_paths: Some(10),
            ..RunConfig::default()
        };
        let flags = RunConfig {
            seed: Some(2),
            ..RunConfig::default()
        };
        let merged = flags.or(file);
        assert_eq!((merged.seed, merged.n_paths), (Some(2), Some(10)));
    }
}
