use proptest::prelude::*;

use sdde_lab::conditions::{check_delay_monotone, check_drift_domination, check_state_jump_monotone, DelayTarget};
use sdde_lab::engine::{event_grid_for, integrate_frozen, integrate_on, sample_noise, DelaySource, ProblemDynamics};
use sdde_lab::*;

fn affine_pair(b: f64, delta: f64, kappa: f64, mu: f64, sigma: f64) -> ComparisonPair {
    let params = ScenarioParams {
        b: Some(b),
        delta: Some(delta),
        kappa: Some(kappa),
        mu: Some(mu),
        sigma: Some(sigma),
        ..ScenarioParams::default()
    };
    let s = BuiltScenario::build(ScenarioId::AffineTheorem, &params).unwrap();
    s.pair().unwrap().clone()
}

fn coeffs(drift: Drift, jump: Jump) -> CoefficientSet {
    CoefficientSet {
        drift,
        diffusion: Diffusion::zero(),
        jump,
        mark_space: MarkSpace::degenerate(0.0, 1.0).unwrap(),
        lipschitz_bound: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn segment_right_continuous(v0 in -5.0f64..5.0, v1 in -5.0f64..5.0, cut in -0.9f64..-0.1, k in 10i32..=20) {
        let seg = Segment::from_steps(1.0, vec![(-1.0, v0), (cut, v1)]).unwrap();
        prop_assert_eq!(seg.evaluate(cut).unwrap(), v1);
        prop_assert_eq!(seg.evaluate(cut + 2f64.powi(-k)).unwrap(), v1);
        prop_assert_eq!(seg.evaluate(cut - 2f64.powi(-k)).unwrap(), v0);
        prop_assert_eq!(seg.left_limit(cut).unwrap(), v0);
    }

    #[test]
    fn fail_witness_really_violates(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -1.0f64..1.0,
                                    alpha in -3.0f64..1.0, beta in -2.0f64..2.0) {
        let sample = DomainSample::for_horizon(1.0);
        let drift = Drift::affine(a, b, c);
        let other = Drift::affine(a + 0.1, b - 0.2, c);
        if let Some(w) = check_drift_domination(&drift, &other, &sample).witness() {
            let (x, y, t) = (w.x.unwrap(), w.y.unwrap(), w.t.unwrap());
            prop_assert!(drift.eval(x, y, t) < other.eval(x, y, t) - 1e-12);
        }
        let cs = coeffs(drift.clone(), Jump::affine(alpha, beta, 0.0));
        if let Some(w) = check_state_jump_monotone(&cs, &sample).witness() {
            let (x, y, z, t, u) = (w.x.unwrap(), w.y.unwrap(), w.z.unwrap(), w.t.unwrap(), w.u.unwrap());
            prop_assert!(x <= y);
            prop_assert!(y + cs.jump.eval(y, z, t, u) < x + cs.jump.eval(x, z, t, u) - 1e-12);
        } else {
            prop_assert!(alpha >= -1.0);
        }
        for which in [DelayTarget::Drift, DelayTarget::Jump] {
            if let Some(w) = check_delay_monotone(&cs, &sample, which).witness() {
                let (x, y, z, t) = (w.x.unwrap(), w.y.unwrap(), w.z.unwrap(), w.t.unwrap());
                prop_assert!(y >= z);
                let (hy, hz) = match which {
                    DelayTarget::Drift => (cs.drift.eval(x, y, t), cs.drift.eval(x, z, t)),
                    DelayTarget::Jump => {
                        let u = w.u.unwrap();
                        (cs.jump.eval(x, y, t, u), cs.jump.eval(x, z, t, u))
                    }
                };
                prop_assert!(hy < hz - 1e-12);
            }
        }
    }

    #[test]
    fn theorem_pairs_pass_every_check(b in 0.0f64..1.0, delta in 0.0f64..1.0, kappa in -1.0f64..0.5, mu in 0.0f64..1.0) {
        let pair = affine_pair(b, delta, kappa, mu, 0.3);
        let r = check_pair(&pair, &DomainSample::for_horizon(2.0)).unwrap();
        prop_assert!(r.failed().is_empty(), "{:?}", r.failed());
    }

    #[test]
    fn tower_level_three_matches_frozen_entry_point(seed in any::<u64>(), b in 0.0f64..1.0, mu in 0.0f64..1.0) {
        let pair = affine_pair(b, 0.5, -0.5, mu, 0.3);
        let grid = GridSpec::new(1.0, 32, 2.0).unwrap();
        let noise = sample_noise(&RngPolicy::new(seed), 0, pair.mark_space(), &grid).unwrap();
        let eg = event_grid_for(&grid, &noise).unwrap();
        let x1 = integrate_on(&ProblemDynamics::new(pair.upper()), &noise, &eg, DelaySource::Own).unwrap();
        let tower = integrate_tower(pair.lower(), &x1, 3, &noise).unwrap();
        let x3 = integrate_frozen(pair.lower(), &x1, &noise).unwrap();
        prop_assert_eq!(tower[0].values_post(), x3.values_post());
        prop_assert_eq!(tower[0].values_pre(), x3.values_pre());
        let x4 = integrate_frozen(pair.lower(), &x3, &noise).unwrap();
        prop_assert_eq!(tower[1].values_post(), x4.values_post());
    }

    #[test]
    fn event_grid_contains_uniform_nodes_and_jumps(seed in any::<u64>(), lambda in 0.0f64..20.0) {
        let marks = MarkSpace::degenerate(0.0, lambda).unwrap();
        let grid = GridSpec::new(1.0, 8, 2.5).unwrap();
        let noise = sample_noise(&RngPolicy::new(seed), 3, &marks, &grid).unwrap();
        let eg = event_grid_for(&grid, &noise).unwrap();
        let times = eg.times();
        prop_assert!(times.windows(2).all(|w| w[0] < w[1]));
        for t in grid.uniform_times() {
            prop_assert!(times.contains(&t));
        }
        for j in noise.jumps() {
            prop_assert!(times.contains(&j.time));
        }
        prop_assert_eq!(eg.uniform_nodes().len(), grid.uniform_times().len());
    }
}

#[test]
fn zero_violation_implies_zero_curve() {
    let s = BuiltScenario::with_defaults(ScenarioId::LemmaPureJump).unwrap();
    let grid = GridSpec::new(1.0, 32, 2.0).unwrap();
    let r = ordering_statistics(s.coupled(), &OrderingConfig::new(500, 0.0), &grid, &RngPolicy::new(3)).unwrap();
    assert_eq!(r.violation_prob, 0.0);
    assert!(r.positive_part_curve.mean.iter().all(|&m| m == 0.0));
    assert!(r.positive_part_curve.stderr.iter().all(|&m| m == 0.0));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let s = BuiltScenario::with_defaults(ScenarioId::Ex3_2).unwrap();
    let grid = GridSpec::new(1.0, 32, 2.0).unwrap();
    let run = || {
        let r = ordering_statistics(s.coupled(), &OrderingConfig::new(700, 0.01), &grid, &RngPolicy::new(17)).unwrap();
        export::to_json_string(&r).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn blowup_reports_path_index() {
    let p = SddeProblem::new(
        CoefficientSet {
            drift: Drift::affine(200.0, 0.0, 0.0),
            diffusion: Diffusion::zero(),
            jump: Jump::zero(),
            mark_space: MarkSpace::empty(),
            lipschitz_bound: None,
        },
        Segment::constant(1.0, 1.0).unwrap(),
        2.0,
        JumpForm::PureJump,
    )
    .unwrap();
    let pair = ComparisonPair::new(p.clone(), p, PairKind::SharedJump).unwrap();
    let grid = GridSpec::new(1.0, 4, 2.0).unwrap();
    let err = ordering_statistics(&pair, &OrderingConfig::new(3, 0.0), &grid, &RngPolicy::new(0)).unwrap_err();
    match err {
        Error::PathBlowup { path_index, .. } => assert!(path_index.is_some()),
        other => panic!("unexpected {other}"),
    }
}
