use proptest::prelude::*;
use streamctl_cli::{parse_config, RunConfig};
use streamctl_core::reason::TrainMode;
use streamctl_core::sim::{DifficultyMix, MixComponent};
use streamctl_core::CompressionOperator;

fn config_strategy() -> impl Strategy<Value = RunConfig> {
    (
        (0u64..1 << 40, 0.01f64..=1.0, 0.0f64..=1.0, 1usize..10),
        (0.0f64..=1.0, 0.0f64..=1.0),
        (
            2usize..16,
            0.001f64..1.0,
            0.05f64..0.95,
            0.0f64..0.5,
            0usize..1000,
            any::<bool>(),
        ),
        (1usize..300, 1usize..128, 0.0f64..0.999, 0usize..500),
        prop_oneof![
            Just(CompressionOperator::SimilarityDrop),
            (1usize..8).prop_map(|kernel| CompressionOperator::AveragePool { kernel }),
            (0.05f64..=1.0)
                .prop_map(|keep_fraction| CompressionOperator::DiversityPrune { keep_fraction }),
        ],
        prop_oneof![
            Just(DifficultyMix::Uniform),
            (0.0f64..=1.0, 0.0f64..0.5).prop_map(|(center, spread)| DifficultyMix::Mixture {
                components: vec![MixComponent {
                    weight: 1.0,
                    center
                }],
                spread,
            }),
        ],
    )
        .prop_map(|(mem, band, tr, env, operator, difficulty)| {
            let mut c = RunConfig {
                seed: mem.0,
                ..RunConfig::default()
            };
            c.memory.tau_hist = mem.1;
            c.memory.tau_near = mem.1 + (1.0 - mem.1) * mem.2;
            c.memory.window = mem.3;
            c.memory.operator = operator;
            c.band.eta = band.0;
            c.band.gamma = band.1;
            c.trainer.group_size = tr.0;
            c.trainer.learning_rate = tr.1;
            c.trainer.clip_epsilon = tr.2;
            c.trainer.kl_coeff = tr.3;
            c.trainer.steps = tr.4;
            c.trainer.mode = if tr.5 {
                TrainMode::Vanilla
            } else {
                TrainMode::TargetBalanced
            };
            c.environment.stream.length = env.0;
            c.environment.stream.dim = env.1;
            c.environment.stream.temporal_correlation = env.2;
            c.environment.queries.count = env.3;
            c.environment.queries.difficulty = difficulty;
            c
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn save_then_load_is_identity(config in config_strategy()) {
        config.validate().unwrap();
        let text = config.to_toml().unwrap();
        prop_assert_eq!(parse_config(&text, Vec::new()).unwrap(), config);
    }
}

#[test]
fn unknown_keys_abort_before_side_effects() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let text = format!(
        "out = {:?}\n[band]\neta = 0.3\ngama = 0.2\n",
        out.to_str().unwrap()
    );
    assert!(parse_config(&text, Vec::new()).is_err());
    assert!(!out.exists());
}
