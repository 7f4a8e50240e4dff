use proptest::prelude::*;

use sdlp::dgp::{simulate_simplified_income, MarkovChain, SimplifiedIncomeConfig};
use sdlp::estimators::{
    fit_state_var, fit_state_var_on, irf_backshift, irf_fixed, irf_moving, lp_state_with, project_effects_on_states,
    InteractionSpec, LpOptions, VarModel,
};
use sdlp::oracles::EffectRecord;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn all_constructions_agree_on_impact(seed in 0u64..10_000, pi00 in 0.5f64..0.95, pi11 in 0.5f64..0.95) {
        let cfg = SimplifiedIncomeConfig { pi00, pi11, ..Default::default() };
        let panel = simulate_simplified_income(&cfg, 4_000, seed).unwrap();
        let (p, end) = (1, panel.len() - 2);
        let opts = LpOptions { rows: Some((p, end)), ..Default::default() };
        let lp = lp_state_with(&panel, &InteractionSpec::binary(0.5), 0, &opts).unwrap();
        let models: Vec<VarModel> =
            (0..=2).map(|l| fit_state_var_on(&panel, p, Some(1 + l), Some((p + l, end + l))).unwrap()).collect();
        let chain = cfg.chain().unwrap();
        for s in 0..2 {
            let reference = lp[0].evaluate_at_state(s as f64);
            prop_assert!((irf_fixed(&models[0], s, 0).unwrap()[0] - reference).abs() < 1e-8);
            prop_assert!((irf_moving(&models[0], &chain, s, 0).unwrap()[0] - reference).abs() < 1e-8);
            prop_assert!((irf_backshift(&models, s, 2).unwrap()[0] - reference).abs() < 1e-8);
        }
    }

    #[test]
    fn moving_equals_fixed_when_regimes_coincide(seed in 0u64..10_000, pi00 in 0.05f64..0.95, pi11 in 0.05f64..0.95) {
        let panel = simulate_simplified_income(&SimplifiedIncomeConfig::default(), 3_000, seed).unwrap();
        let mut model = fit_state_var(&panel, 2, 1).unwrap();
        model.regimes[1] = model.regimes[0].clone();
        let chain = MarkovChain::two_state(pi00, pi11).unwrap();
        let fixed = irf_fixed(&model, 0, 8).unwrap();
        let moving = irf_moving(&model, &chain, 0, 8).unwrap();
        for (a, b) in fixed.iter().zip(&moving) {
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn projection_of_constant_effects_is_that_constant(
        value in -5.0f64..5.0,
        states in proptest::collection::vec(-3.0f64..3.0, 20..200),
    ) {
        let effects: Vec<EffectRecord> = states
            .iter()
            .enumerate()
            .map(|(t, &s)| EffectRecord { t, horizon: 0, value, state_lag1: s })
            .collect();
        prop_assume!(states.iter().any(|&s| (s - states[0]).abs() > 1e-3));
        let coefs = project_effects_on_states(&effects, &InteractionSpec::linear()).unwrap();
        prop_assert!((coefs[0] - value).abs() < 1e-10);
        prop_assert!(coefs[1].abs() < 1e-10);
    }
}
