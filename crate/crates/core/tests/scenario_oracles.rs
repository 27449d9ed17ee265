use sdde_lab::engine::sample_noise;
use sdde_lab::*;

fn check_oracle(id: ScenarioId, lag_steps: usize, realizations: u64, tol: f64) {
    let s = BuiltScenario::with_defaults(id).unwrap();
    let grid = GridSpec::new(s.tau(), lag_steps, s.horizon()).unwrap();
    let oracle = s.oracle.clone().unwrap();
    let policy = RngPolicy::new(2024);
    for i in 0..realizations {
        let noise = sample_noise(&policy, i, s.coupled().mark_space(), &grid).unwrap();
        let (up, lo) = s.coupled().integrate_coupled(&noise, &grid).unwrap();
        for (k, &t) in lo.times().iter().enumerate().filter(|(_, &t)| t <= s.tau()) {
            let (ou, ol) = oracle.eval(&noise, t).unwrap();
            assert!((lo.values_post()[k] - ol).abs() <= tol, "{id} path {i} t={t}");
            assert!((up.values_post()[k] - ou).abs() <= tol);
        }
    }
}

#[test]
fn doubling_jumps_oracle_is_exact() {
    check_oracle(ScenarioId::Ex2_5, 32, 300, 0.0);
}

#[test]
fn delayed_diffusion_oracle() {
    check_oracle(ScenarioId::Ex2_4, 64, 300, 1e-12);
}

#[test]
fn compensated_linear_oracle() {
    check_oracle(ScenarioId::Ex2_3, 64, 300, 1e-12);
}

#[test]
fn doubling_jumps_upper_is_zero_on_whole_horizon() {
    let s = BuiltScenario::with_defaults(ScenarioId::Ex2_5).unwrap();
    let grid = GridSpec::new(1.0, 16, 2.0).unwrap();
    for i in 0..200 {
        let noise = sample_noise(&RngPolicy::new(1), i, s.coupled().mark_space(), &grid).unwrap();
        let (up, _) = s.coupled().integrate_coupled(&noise, &grid).unwrap();
        assert!(up.values_pre().iter().chain(up.values_post()).all(|&v| v == 0.0));
    }
}

#[test]
fn mark_dependent_gamma_oracle() {
    let params = ScenarioParams {
        marks: Some(MarkSpace::uniform(0.0, 1.0, 0.8).unwrap()),
        gamma: Some(MarkProfile { offset: 0.1, slope: 0.5 }),
        ..ScenarioParams::default()
    };
    let s = BuiltScenario::build(ScenarioId::Ex2_3, &params).unwrap();
    let grid = GridSpec::new(1.0, 64, 2.0).unwrap();
    let oracle = s.oracle.clone().unwrap();
    for i in 0..100 {
        let noise = sample_noise(&RngPolicy::new(5), i, s.coupled().mark_space(), &grid).unwrap();
        let (_, lo) = s.coupled().integrate_coupled(&noise, &grid).unwrap();
        for (k, &t) in lo.times().iter().enumerate().filter(|(_, &t)| t <= 1.0) {
            let (_, ol) = oracle.eval(&noise, t).unwrap();
            assert!((lo.values_post()[k] - ol).abs() <= 1e-12);
            assert!(lo.values_post()[k] < 0.0);
        }
    }
}

#[test]
fn pair_json_round_trip() {
    let s = BuiltScenario::with_defaults(ScenarioId::AffineTheorem).unwrap();
    let pair = s.pair().unwrap();
    let json = serde_json::to_string(pair).unwrap();
    let back: ComparisonPair = serde_json::from_str(&json).unwrap();
    assert_eq!(&back, pair);
}

#[test]
fn condition_report_json_shape() {
    let s = BuiltScenario::with_defaults(ScenarioId::Ex2_5).unwrap();
    let r = s.conditions(&s.default_domain()).unwrap();
    let v: serde_json::Value = serde_json::from_str(&export::to_json_string(&r).unwrap()).unwrap();
    assert_eq!(v["conditions"]["DelayMonotoneJump"]["verdict"], "FAIL");
    assert_eq!(v["conditions"]["DriftDomination"]["verdict"], "PASS_SAMPLED");
    assert_eq!(v["conditions"]["CompensatedDelayMonotone"]["verdict"], "NOT_APPLICABLE");
    let rejected = BuiltScenario::with_defaults(ScenarioId::Ex2_4).unwrap();
    let r = rejected.conditions(&rejected.default_domain()).unwrap();
    assert!(r.has_failure());
}
