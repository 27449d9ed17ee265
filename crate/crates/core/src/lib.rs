//! Simulation and verification tools for one-dimensional stochastic delay
//! equations with Poisson jumps.
//!
//! The crate integrates coupled pairs of delay equations under one shared
//! noise realization, checks comparison hypotheses by dense sampling, runs
//! Monte Carlo ordering statistics, and builds the frozen-delay iteration
//! tower that converges to the lower system.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

/// Crate version, echoed in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod comparison;
pub mod conditions;
pub mod engine;
pub mod error;
pub mod export;
pub mod model;
pub mod quadrature;
pub mod randomness;
pub mod scenarios;

pub use comparison::{
    compute_beta, ordering_statistics, picard_tower_report, positive_part_curve, weighted_norm, weighted_norm_diff,
    BetaConstant, IterationConfig, OrderingConfig, OrderingReport, PositivePartCurve, TowerLevel, TowerReport,
};
pub use conditions::{check_pair, ConditionKey, ConditionReport, DomainSample, Verdict, Witness};
pub use engine::{
    build_event_grid, integrate_coupled, integrate_path, integrate_tower, sample_noise, CoupledSystem, GridSpec,
    PathRecord,
};
pub use error::{Error, Result};
pub use model::{
    compensated_to_pure, validate_problem, CoefficientSet, ComparisonPair, Diffusion, Drift, Jump, JumpForm,
    MarkProfile, PairKind, SddeProblem, Segment,
};
pub use randomness::{derive_path_stream, JumpEvent, MarkSpace, NoiseRealization, RngPolicy};
pub use scenarios::{BuiltScenario, Oracle, OracleStatistic, ScenarioId, ScenarioParams, ScenarioSystem};
