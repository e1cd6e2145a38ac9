use segmkt::policy::{
    check_predictions, reform_effects, stc_cap_mechanics, sweep_firing_cost, PolicyError, ReformScenario, Verdict,
    DEFAULT_F_GRID,
};
use segmkt::{ModelParams, RenewalCap};

#[test]
fn default_sweep_claims_hold_and_survive_refinement() {
    let coarse = check_predictions(&sweep_firing_cost(&ModelParams::baseline(), &DEFAULT_F_GRID).unwrap()).unwrap();
    for c in &coarse.claims {
        assert_eq!(c.verdict, Verdict::Holds, "{}: {} -> {}", c.name, c.at_low_f, c.at_high_f);
    }
    let fine_base = ModelParams {
        grid_size: 1001,
        ..ModelParams::baseline()
    };
    let fine = check_predictions(&sweep_firing_cost(&fine_base, &DEFAULT_F_GRID).unwrap()).unwrap();
    assert_eq!(coarse.verdicts(), fine.verdicts());
}

#[test]
fn sweep_guards() {
    let base = ModelParams {
        grid_size: 101,
        ..ModelParams::baseline()
    };
    assert_eq!(sweep_firing_cost(&base, &[]), Err(PolicyError::EmptySweep));

    let one = sweep_firing_cost(&base, &[1.0]).unwrap();
    assert_eq!(
        check_predictions(&one),
        Err(PolicyError::InsufficientPoints { need: 2, got: 1 })
    );

    let mut two = sweep_firing_cost(&base, &[0.5, 2.0]).unwrap();
    two.points[1].params.unemployment_flow += 0.01;
    assert_eq!(
        check_predictions(&two),
        Err(PolicyError::ScenarioMismatch {
            field: "unemployment_flow"
        })
    );

    // repeated firing cost: nothing to compare
    let same = sweep_firing_cost(&base, &[1.0, 1.0]).unwrap();
    let r = check_predictions(&same).unwrap();
    assert!(r.claims.iter().all(|c| c.verdict == Verdict::NotTestable && !c.monotone));
}

#[test]
fn sweep_points_are_sorted_and_independent_of_input_order() {
    let base = ModelParams {
        grid_size: 101,
        ..ModelParams::baseline()
    };
    let a = sweep_firing_cost(&base, &[4.0, 0.5, 2.0]).unwrap();
    let b = sweep_firing_cost(&base, &[0.5, 2.0, 4.0]).unwrap();
    // shut markets carry NaN tenure and wages, so compare the printed form
    assert_eq!(format!("{a:?}"), format!("{b:?}"));
    assert!(a.points.windows(2).all(|w| w[0].firing_cost < w[1].firing_cost));
}

#[test]
fn placebo_reform_changes_nothing() {
    let p = ModelParams {
        grid_size: 101,
        ..ModelParams::baseline()
    };
    let fx = reform_effects(&ReformScenario::placebo(&p)).unwrap();
    for e in &fx.effects {
        assert_eq!(e.delta, 0.0, "{}", e.outcome);
    }
}

#[test]
fn scenario_may_only_touch_firing_cost_and_cap() {
    let pre = ModelParams::baseline();
    let post = ModelParams {
        informal_penalty: 0.8,
        ..pre.clone()
    };
    assert_eq!(
        ReformScenario::new(pre.clone(), post),
        Err(PolicyError::InvalidScenario {
            field: "informal_penalty"
        })
    );
    let s = ReformScenario::baseline();
    assert!(ReformScenario::new(s.pre.clone(), s.post.clone()).is_ok());
}

#[test]
fn cap_mechanics() {
    let with = |k| ModelParams {
        grid_size: 101,
        firing_cost: 1.0,
        stc_renewal_cap: RenewalCap::Finite(k),
        ..ModelParams::baseline()
    };
    assert_eq!(
        stc_cap_mechanics(&ModelParams::baseline()).unwrap_err(),
        PolicyError::UnboundedCap
    );
    let one = stc_cap_mechanics(&with(1)).unwrap();
    assert_eq!(one.stc_by_counter.len(), 1);
    assert!((one.expected_stc_spell - 1.0).abs() < 1e-12, "{}", one.expected_stc_spell);

    let mut last = 0.0;
    for k in [1, 2, 6, 24] {
        let m = stc_cap_mechanics(&with(k)).unwrap();
        assert!((0.0..=1.0).contains(&m.forced_conversion_rate));
        assert!(m.expected_stc_spell >= last - 1e-12, "K={k}: {} < {last}", m.expected_stc_spell);
        assert!(m.expected_stc_spell <= k as f64 + 1e-9);
        last = m.expected_stc_spell;
    }
}
