use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use sdde_lab::engine::sample_noise;
use sdde_lab::export::{to_json_string, REPORT_SCHEMA};
use sdde_lab::{
    check_pair, ordering_statistics, picard_tower_report, BuiltScenario, ComparisonPair, ConditionReport,
    CoupledSystem, Diffusion, DomainSample, GridSpec, IterationConfig, OracleStatistic, OrderingConfig,
    OrderingReport, RngPolicy, TowerReport, Verdict,
};

use crate::config::{Output, Resolved, RunConfig, Target};

/// Exit status of a completed run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Clean,
    ConditionFailed,
}

#[allow(clippy::large_enum_variant)]
enum System {
    Scenario(BuiltScenario),
    Inline(ComparisonPair),
}

impl System {
    fn coupled(&self) -> &dyn CoupledSystem {
        match self {
            System::Scenario(s) => s.coupled(),
            System::Inline(p) => p,
        }
    }

    fn pair(&self) -> Option<&ComparisonPair> {
        match self {
            System::Scenario(s) => s.pair(),
            System::Inline(p) => Some(p),
        }
    }

    fn conditions(&self) -> sdde_lab::Result<ConditionReport> {
        match self {
            System::Scenario(s) => s.conditions(&s.default_domain()),
            System::Inline(p) => check_pair(p, &DomainSample::for_horizon(p.horizon())),
        }
    }

    fn default_epsilon(&self, grid: &GridSpec) -> f64 {
        match self {
            System::Scenario(s) => s.default_epsilon(grid),
            System::Inline(p) => {
                let zero = Diffusion::zero();
                if p.upper().coefficients.diffusion == zero && p.lower().coefficients.diffusion == zero {
                    0.0
                } else {
                    grid.dt()
                }
            }
        }
    }
}

#[derive(Serialize)]
struct Tool {
    name: &'static str,
    version: &'static str,
    core_version: &'static str,
}

#[derive(Serialize)]
struct Seeds {
    master_seed: u64,
    generator: &'static str,
    path_streams: String,
}

#[derive(Serialize)]
struct OrderingSummary {
    epsilon: f64,
    violation_prob: f64,
    raw_violation_prob: f64,
    terminal_violation_prob: f64,
    max_violation: f64,
}

#[derive(Serialize)]
struct TowerSummary {
    beta: f64,
    max_norm_ratio: f64,
    max_chain_violation_eps: f64,
}

#[derive(Serialize)]
struct Summary<'a> {
    schema: &'static str,
    tool: Tool,
    config: RunConfig,
    seeds: Seeds,
    grid: GridEcho,
    #[serde(skip_serializing_if = "Option::is_none")]
    conditions: Option<BTreeMap<String, String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    structural_rejection: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    violation_prob: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ordering: Option<OrderingSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<OracleStatistic>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tower: Option<TowerSummary>,
    artifacts: Vec<String>,
    exit_code: i32,
}

#[derive(Serialize)]
struct GridEcho {
    tau: f64,
    lag_steps: usize,
    dt: f64,
    horizon: f64,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: &'static str,
    #[serde(flatten)]
    report: &'a T,
}

fn write_json<T: Serialize>(dir: &Path, name: &str, report: &T, artifacts: &mut Vec<String>) -> Result<()> {
    let text = to_json_string(&Envelope {
        schema: REPORT_SCHEMA,
        report,
    })?;
    fs::write(dir.join(name), text).with_context(|| format!("writing {name}"))?;
    artifacts.push(name.to_string());
    Ok(())
}

fn create(dir: &Path, name: &str, artifacts: &mut Vec<String>) -> Result<BufWriter<File>> {
    let f = File::create(dir.join(name)).with_context(|| format!("creating {name}"))?;
    artifacts.push(name.to_string());
    Ok(BufWriter::new(f))
}

fn verdict_label(v: &Verdict) -> String {
    match v {
        Verdict::PassSampled => "PASS_SAMPLED".into(),
        Verdict::Fail { .. } => "FAIL".into(),
        Verdict::NotApplicable { .. } => "NOT_APPLICABLE".into(),
    }
}

pub fn execute(cfg: &Resolved) -> Result<Status> {
    let system = match &cfg.target {
        Target::Scenario(id, params) => System::Scenario(BuiltScenario::build(*id, params)?),
        Target::Inline(pair) => System::Inline(pair.clone()),
    };
    let coupled = system.coupled();
    let grid = cfg.dt.grid(coupled.tau(), coupled.horizon())?;
    let policy = RngPolicy::new(cfg.seed);
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    let mut artifacts = Vec::new();

    let conditions = if cfg.wants(Output::Conditions) {
        let r = system.conditions()?;
        write_json(dir, "conditions.json", &r, &mut artifacts)?;
        Some(r)
    } else {
        None
    };

    let epsilon = cfg.epsilon.unwrap_or_else(|| system.default_epsilon(&grid));
    let ordering: Option<OrderingReport> = if cfg.wants(Output::Ordering) || cfg.wants(Output::Curve) {
        Some(ordering_statistics(coupled, &OrderingConfig::new(cfg.n_paths, epsilon), &grid, &policy)?)
    } else {
        None
    };
    if let Some(r) = &ordering {
        if cfg.wants(Output::Ordering) {
            write_json(dir, "ordering.json", r, &mut artifacts)?;
        }
        if cfg.wants(Output::Curve) {
            r.positive_part_curve.write_csv(create(dir, "curve_positive_part.csv", &mut artifacts)?)?;
        }
    }

    let oracle = match &system {
        System::Scenario(s) => s.oracle_statistic(cfg.n_paths, &grid, &policy)?,
        System::Inline(_) => None,
    };

    let tower: Option<TowerReport> = if cfg.wants(Output::Tower) {
        let Some(pair) = system.pair() else {
            bail!("the tower needs a comparison pair; this scenario lies outside that class");
        };
        let r = picard_tower_report(pair, &IterationConfig::up_to_level(cfg.tower_level), cfg.n_paths, &grid, &policy)?;
        write_json(dir, "tower.json", &r, &mut artifacts)?;
        Some(r)
    } else {
        None
    };

    if cfg.wants(Output::Paths) {
        for i in 0..cfg.path_exports.min(cfg.n_paths as usize) as u64 {
            let noise = sample_noise(&policy, i, coupled.mark_space(), &grid)?;
            let (up, lo) = coupled.integrate_coupled(&noise, &grid).map_err(|e| e.with_path(i))?;
            up.write_csv(create(dir, &format!("paths_{i}_upper.csv"), &mut artifacts)?)?;
            lo.write_csv(create(dir, &format!("paths_{i}_lower.csv"), &mut artifacts)?)?;
        }
    }

    let status = match &conditions {
        Some(r) if r.has_failure() => Status::ConditionFailed,
        _ => Status::Clean,
    };
    artifacts.push("summary.json".into());
    let summary = Summary {
        schema: REPORT_SCHEMA,
        tool: Tool {
            name: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            core_version: sdde_lab::VERSION,
        },
        config: cfg.echo(),
        seeds: Seeds {
            master_seed: cfg.seed,
            generator: "chacha8",
            path_streams: "key = mix(master_seed, channel), stream = path index".into(),
        },
        grid: GridEcho {
            tau: grid.tau(),
            lag_steps: grid.lag_steps(),
            dt: grid.dt(),
            horizon: grid.horizon(),
        },
        conditions: conditions
            .as_ref()
            .map(|r| r.conditions.iter().map(|(k, v)| (format!("{k:?}"), verdict_label(v))).collect()),
        structural_rejection: conditions.as_ref().and_then(|r| r.structural_rejection.as_deref()),
        violation_prob: ordering.as_ref().map(|r| r.violation_prob),
        ordering: ordering.as_ref().map(|r| OrderingSummary {
            epsilon: r.epsilon,
            violation_prob: r.violation_prob,
            raw_violation_prob: r.raw_violation_prob,
            terminal_violation_prob: r.terminal_violation_prob,
            max_violation: r.max_violation,
        }),
        oracle,
        tower: tower.as_ref().map(|t| TowerSummary {
            beta: t.beta,
            max_norm_ratio: t.max_norm_ratio(),
            max_chain_violation_eps: t.levels.iter().map(|l| l.chain_violation_eps).fold(0.0, f64::max),
        }),
        artifacts,
        exit_code: match status {
            Status::Clean => 0,
            Status::ConditionFailed => 2,
        },
    };
    fs::write(dir.join("summary.json"), to_json_string(&summary)?).context("writing summary.json")?;
    Ok(status)
}
