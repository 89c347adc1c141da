use qsep::attacks::{
    forgery_game, owsg_game, subset_pair_money, wiesner_money, wiesner_owsg, EchoForger, MoneyParams, OwsgParams,
    StatisticalForger,
};
use qsep::tomography::Estimator;

#[test]
fn statistical_forger_beats_wiesner_money_with_exact_estimators() {
    let s = wiesner_money(3).unwrap();
    let p = MoneyParams::default();
    let g = forgery_game(&s, &StatisticalForger { params: p.clone() }, 2, 20, 11).unwrap();
    assert_eq!(g.aborts, 0);
    assert_eq!(g.verify_oracle_calls, 0);
    assert!(g.rate >= 0.95, "rate {}", g.rate);
    for r in &g.records {
        let single = r.single_accept.unwrap();
        assert!(single >= s.mu * (1.0 - 10.0 * p.eta) - 2.0 * p.effective_eps());
        assert_eq!(r.chosen_key, Some(r.key));
    }
}

#[test]
fn statistical_forger_beats_subset_pair_money() {
    let s = subset_pair_money(2, 2).unwrap();
    let g = forgery_game(&s, &StatisticalForger { params: MoneyParams::default() }, 1, 20, 12).unwrap();
    assert_eq!(g.aborts, 0);
    assert_eq!(g.verify_oracle_calls, 0);
    assert!(g.rate >= 0.9, "rate {}", g.rate);
    assert!(g.records.iter().all(|r| r.forger_queries > 0));
}

#[test]
fn single_key_scheme_forces_the_right_key() {
    let s = qsep::attacks::MoneyScheme::new(
        "one-key",
        6,
        Some(vec!["101100".parse().unwrap()]),
        3,
        3,
        1.0,
        wiesner_money(3).unwrap().mint_circuit_builder(),
        wiesner_money(3).unwrap().verify_circuit_builder(),
    )
    .unwrap();
    let g = forgery_game(&s, &StatisticalForger { params: MoneyParams::default() }, 2, 10, 1).unwrap();
    assert_eq!(g.successes, 10);
}

#[test]
fn echo_with_garbage_matches_the_mixed_state_rate() {
    let s = wiesner_money(3).unwrap();
    let trials = 4000;
    let g = forgery_game(&s, &EchoForger { pad: 1 }, 2, trials, 5).unwrap();
    // the padded register is maximally mixed and verifies with probability 1/8
    let p = 1.0 / 8.0;
    let sigma = (p * (1.0 - p) / trials as f64).sqrt();
    assert!((g.rate - p).abs() <= 3.0 * sigma, "rate {}", g.rate);
}

#[test]
fn owsg_attack_against_wiesner_in_both_modes() {
    let c = wiesner_owsg(2).unwrap();
    for estimator in [Estimator::Exact, Estimator::Measured] {
        let p = OwsgParams {
            estimator,
            ..OwsgParams::default()
        };
        let g = owsg_game(&c, &p, 40, 21).unwrap();
        assert!(g.rate >= 0.9, "{estimator:?} rate {}", g.rate);
        for r in g.records.iter().filter(|r| r.key.is_some()) {
            assert!(r.real_accept.unwrap() >= 0.5 - p.slack);
        }
    }
}
