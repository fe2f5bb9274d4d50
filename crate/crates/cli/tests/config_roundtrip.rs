use proptest::prelude::*;
use qtraj_cli::{parse_config, OutputFormat, Overrides};

fn overrides() -> Overrides {
    Overrides { output_dir: Some("unused".into()), ..Default::default() }
}

fn format() -> impl Strategy<Value = OutputFormat> {
    prop_oneof![Just(OutputFormat::Csv), Just(OutputFormat::Json), Just(OutputFormat::Both)]
}

proptest! {
    // A resolved config written out and parsed again is the same config;
    // re-running from a manifest depends on this.
    #[test]
    fn resolved_configs_survive_a_round_trip(
        seed in any::<u64>(),
        gamma in 0.01f64..2.0,
        eta_frac in 0.01f64..0.99,
        paths in 1usize..5000,
        fmt in format(),
    ) {
        let eta = eta_frac * 0.05 / gamma;
        let text = serde_json::json!({
            "scenario": "decay_counting",
            "seed": seed,
            "format": fmt,
            "params": {"gamma": gamma, "eta": eta, "paths": paths},
        })
        .to_string();
        let first = parse_config(&text, &overrides()).unwrap();
        let again = parse_config(&serde_json::to_string(&first).unwrap(), &overrides()).unwrap();
        prop_assert_eq!(&first, &again);
        prop_assert_eq!(first.seed, seed);
    }

    #[test]
    fn ising_configs_survive_a_round_trip(l in 2usize..64, temperature in 0.05f64..20.0, blocks in 1usize..20, extra in 0usize..500) {
        let text = serde_json::json!({
            "scenario": "ising",
            "params": {"l": l, "temperature": temperature, "sweeps": blocks + extra, "blocks": blocks},
        })
        .to_string();
        let first = parse_config(&text, &overrides()).unwrap();
        let again = parse_config(&serde_json::to_string(&first).unwrap(), &overrides()).unwrap();
        prop_assert_eq!(first, again);
    }
}
