//! Configuration text round-trips.

use proptest::prelude::*;
use rarefaction_lab::harness::SweepConfig;

proptest! {
    #[test]
    fn echo_parses_back_to_the_same_config(
        gamma in 1.01f64..3.0,
        mu in 0.1f64..5.0,
        rho_right in 1.0f64..10.0,
        eps in prop::collection::vec(1e-4f64..0.5, 1..5),
        nx in 10usize..5000,
        seed in any::<u64>(),
        modes in 1usize..=4,
    ) {
        let mut eps = eps;
        eps.sort_by(|a, b| b.total_cmp(a));
        let cfg = SweepConfig {
            gamma,
            mu,
            rho_right,
            eps_list: eps,
            nx,
            pert_seed: seed,
            pert_modes: modes,
            ..SweepConfig::default()
        };
        prop_assert_eq!(SweepConfig::parse(&cfg.echo()).unwrap(), cfg);
    }
}

#[test]
fn json_and_key_value_forms_agree() {
    let json = r#"{"gamma": 1.4, "eps_list": [0.1, 0.05], "T": 2.0, "snapshots": "all"}"#;
    let kv = "gamma = 1.4\neps_list = 0.1, 0.05 # two runs\nT = 2\nsnapshots = all\n";
    assert_eq!(SweepConfig::parse(json).unwrap(), SweepConfig::parse(kv).unwrap());
}

#[test]
fn unknown_keys_and_bad_values_are_config_errors() {
    for text in ["colour = red", "nx = many", "snapshots = some", "just words"] {
        assert_eq!(SweepConfig::parse(text).unwrap_err().exit_code(), 2, "{text}");
    }
}
