use proptest::prelude::*;
use streamctl_core::math::sigmoid;
use streamctl_core::reason::{
    band_penalties, clipped_term, group_advantages, modulated_reward, naive_reward, BandConfig,
    BRANCHES,
};
use streamctl_core::respond::{
    generate_boundary_dataset, readiness_action, readiness_probability, train_readiness_head,
    ReadinessAction, ReadinessHead, ReadinessLabel,
};
use streamctl_core::sim::{generate_stream, jsd, memory_fidelity, SyntheticStreamConfig};
use streamctl_core::{replay_stream, CompressionOperator, CompressionPolicy, Frame, MemoryState};

fn frames_strategy() -> impl Strategy<Value = Vec<Frame>> {
    (1usize..4, 1usize..4, 1usize..12).prop_flat_map(|(positions, dim, len)| {
        prop::collection::vec(
            prop::collection::vec(prop::collection::vec(-3i32..4, dim), positions),
            len,
        )
        .prop_map(|raw| {
            raw.into_iter()
                .enumerate()
                .map(|(i, toks)| Frame {
                    index: i + 1,
                    tokens: toks
                        .into_iter()
                        .map(|t| t.into_iter().map(f64::from).collect())
                        .collect(),
                })
                .collect()
        })
    })
}

fn operator_strategy() -> impl Strategy<Value = CompressionOperator> {
    prop_oneof![
        Just(CompressionOperator::SimilarityDrop),
        (1usize..4).prop_map(|kernel| CompressionOperator::AveragePool { kernel }),
        (0.1f64..=1.0)
            .prop_map(|keep_fraction| CompressionOperator::DiversityPrune { keep_fraction }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn memory_zone_invariants(
        frames in frames_strategy(),
        tau_hist in 0.01f64..=1.0,
        extra in 0.0f64..=1.0,
        window in 1usize..5,
        op in operator_strategy(),
    ) {
        let tau_near = tau_hist + (1.0 - tau_hist) * extra;
        let policy = CompressionPolicy::new(tau_near, tau_hist, window, op).unwrap();
        let mut state = MemoryState::new();
        let mut pushed = 0;
        for f in &frames {
            state.push(f, &policy).unwrap();
            pushed += f.tokens.len();
            prop_assert_eq!(state.input_token_count(), pushed);
            prop_assert!(state.retained_token_count() <= state.input_token_count());
            let r = state.drop_ratio();
            prop_assert!((0.0..=1.0).contains(&r));
            if let (Some(h), Some(n)) = (
                state.historical_tokens().iter().map(|t| t.frame).max(),
                state.nearby_tokens().iter().map(|t| t.frame).min(),
            ) {
                prop_assert!(n > h);
            }
            let fid = memory_fidelity(&state);
            prop_assert!((0.0..=1.0).contains(&fid));
        }
        prop_assert_eq!(replay_stream(&frames, &policy).unwrap(), state);
    }

    #[test]
    fn drop_ratio_is_monotone_in_tau_on_correlated_streams(
        seed in 0u64..1000,
        correlation in 0.5f64..0.999,
        taus in (0.01f64..=1.0, 0.01f64..=1.0),
    ) {
        let (lo, hi) = if taus.0 <= taus.1 { taus } else { (taus.1, taus.0) };
        let frames = generate_stream(&SyntheticStreamConfig {
            length: 20,
            tokens_per_frame: 6,
            dim: 4,
            temporal_correlation: correlation,
            seed,
        }).unwrap();
        let run = |tau| {
            let p = CompressionPolicy::new(tau, tau, 3, CompressionOperator::SimilarityDrop).unwrap();
            replay_stream(&frames, &p).unwrap().drop_ratio()
        };
        prop_assert!(run(lo) >= run(hi));
    }

    #[test]
    fn penalties_exclusive_and_neutral_in_band(
        rho in 0.0f64..=1.0,
        eta in 0.0f64..=1.0,
        gamma in 0.0f64..=1.0,
    ) {
        let band = BandConfig::new(eta, gamma).unwrap();
        let p = band_penalties(rho, &band);
        prop_assert_eq!(p.delta_esc * p.delta_ans, 0.0);
        prop_assert!((0.0..=1.0).contains(&p.delta_esc) && (0.0..=1.0).contains(&p.delta_ans));
        for (e, c) in BRANCHES {
            let r = modulated_reward(e, c, p).r;
            if band.contains(rho) {
                prop_assert_eq!(r, naive_reward(e, c));
            } else if rho > band.upper() {
                if e { prop_assert!(r < naive_reward(e, c)); } else { prop_assert_eq!(r, naive_reward(e, c)); }
            } else if rho < band.lower() {
                if e { prop_assert_eq!(r, naive_reward(e, c)); } else { prop_assert!(r < naive_reward(e, c)); }
            }
        }
    }

    #[test]
    fn advantages_sum_to_zero(rewards in prop::collection::vec(-3.0f64..3.0, 2..33)) {
        let adv = group_advantages(&rewards, 1e-6);
        prop_assert!(adv.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn constant_groups_have_zero_advantage(r in -5.0f64..5.0, g in 2usize..33) {
        prop_assert_eq!(group_advantages(&vec![r; g], 1e-6), vec![0.0; g]);
    }

    #[test]
    fn clipped_term_is_min_of_operands(w in 0.0f64..3.0, a in -3.0f64..3.0, eps in 0.01f64..0.99) {
        let clipped = if w < 1.0 - eps { 1.0 - eps } else if w > 1.0 + eps { 1.0 + eps } else { w };
        let raw = w * a;
        let cl = clipped * a;
        let expected = if raw < cl { raw } else { cl };
        prop_assert_eq!(clipped_term(w, a, eps), expected);
        if a > 0.0 {
            prop_assert!(clipped_term(w, a, eps) <= (1.0 + eps) * a + 1e-12);
        }
    }

    #[test]
    fn jsd_is_symmetric_and_bounded(
        raw in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..10),
    ) {
        let (mut p, mut q): (Vec<f64>, Vec<f64>) = raw.into_iter().unzip();
        p[0] += 1e-3;
        q[0] += 1e-3;
        let (sp, sq): (f64, f64) = (p.iter().sum(), q.iter().sum());
        p.iter_mut().for_each(|x| *x /= sp);
        q.iter_mut().for_each(|x| *x /= sq);
        let a = jsd(&p, &q).unwrap();
        let b = jsd(&q, &p).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((0.0..=std::f64::consts::LN_2).contains(&a));
    }

    #[test]
    fn action_agrees_with_logit_sign(
        w in prop::collection::vec(-5.0f64..5.0, 3),
        b in -5.0f64..5.0,
        f in prop::collection::vec(-5.0f64..5.0, 3),
    ) {
        let head = ReadinessHead::new(w.clone(), b);
        let p = readiness_probability(&head, &f).unwrap();
        let z: f64 = w.iter().zip(&f).map(|(x, y)| x * y).sum::<f64>() + b;
        prop_assert_eq!(p, sigmoid(z));
        prop_assert_eq!(readiness_action(p) == ReadinessAction::EmitRoutine, z < 0.0);
    }

    #[test]
    fn boundary_labels_follow_offsets(len in 1usize..60, clue_frac in 0.0f64..1.0) {
        let clue = 1 + ((len - 1) as f64 * clue_frac) as usize;
        let d = generate_boundary_dataset(clue, len, |s| vec![s as f64]).unwrap();
        for e in &d {
            prop_assert_eq!(e.label == ReadinessLabel::Ready, e.step_offset >= 0);
            prop_assert!((-3..=2).contains(&e.step_offset));
            prop_assert_eq!(e.step as i64, clue as i64 + e.step_offset);
            prop_assert!(e.step >= 1 && e.step <= len);
        }
    }

    #[test]
    fn readiness_training_is_deterministic(seed in 0u64..1000, clue in 4usize..20) {
        let d = generate_boundary_dataset(clue, 30, |s| vec![s as f64 - clue as f64, 1.0]).unwrap();
        let a = train_readiness_head(&d, 20, 0.5, seed).unwrap();
        let b = train_readiness_head(&d, 20, 0.5, seed).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn no_compression_identity() {
    let frames = generate_stream(&SyntheticStreamConfig {
        length: 40,
        tokens_per_frame: 16,
        dim: 8,
        temporal_correlation: 0.9,
        seed: 1,
    })
    .unwrap();
    let policy = CompressionPolicy::new(1.0, 1.0, 3, CompressionOperator::SimilarityDrop).unwrap();
    let state = replay_stream(&frames, &policy).unwrap();
    assert_eq!(state.drop_ratio(), 0.0);
    assert_eq!(state.retained_token_count(), 640);
}
