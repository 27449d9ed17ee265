//! Shared fixtures for the engine benchmarks.

use sdde_lab::{BuiltScenario, GridSpec, ScenarioId};

pub fn scenario(id: ScenarioId) -> BuiltScenario {
    BuiltScenario::with_defaults(id).expect("built-in defaults are valid")
}

/// Grid with `lag_steps` steps per delay over the scenario horizon.
pub fn grid(s: &BuiltScenario, lag_steps: usize) -> GridSpec {
    GridSpec::new(s.tau(), lag_steps, s.horizon()).expect("valid grid")
}
