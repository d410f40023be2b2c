use proptest::prelude::*;
use warpshrink::config::{emit_config, parse_config};
use warpshrink::design::DesignSpec;
use warpshrink::harness::ExperimentConfig;
use warpshrink::shrinkage::{HardHyper, HardScale, LargeVarHyper, RuleSpec, SmallVarHyper, TauMode};
use warpshrink::signals::TestSignal;

fn signal() -> impl Strategy<Value = TestSignal> {
    prop_oneof![
        Just(TestSignal::Blocks),
        Just(TestSignal::Bumps),
        Just(TestSignal::HeaviSine),
        Just(TestSignal::Doppler),
        Just(TestSignal::Zero),
    ]
}

fn design() -> impl Strategy<Value = DesignSpec> {
    prop_oneof![
        Just(DesignSpec::Uniform),
        (0.0f64..0.999).prop_map(|amplitude| DesignSpec::Sine { amplitude }),
        (0.01f64..2.0, 0.01f64..0.99).prop_map(|(width, floor)| DesignSpec::Hole2 { width, floor }),
        "[a-z][a-z0-9_./]{0,20}".prop_map(|path| DesignSpec::Custom { path }),
    ]
}

fn rule() -> impl Strategy<Value = RuleSpec> {
    let pos = || 1e-3f64..50.0;
    prop_oneof![
        (pos(), pos(), pos(), 0.0f64..4.0).prop_map(|(c1, c2, alpha, beta)| {
            RuleSpec::SmallVarBayes(SmallVarHyper { c1, c2, alpha, beta })
        }),
        (pos(), pos(), pos(), 0..3usize).prop_map(|(q, w_scale, tau_scale, m)| {
            let tau_mode = [TauMode::Theory, TauMode::SimVariance, TauMode::SimDeviation][m];
            RuleSpec::LargeVarBayes(LargeVarHyper { q, w_scale, tau_scale, tau_mode })
        }),
        any::<bool>().prop_map(|literal| RuleSpec::HardUniversal(HardHyper {
            scale: if literal { HardScale::Literal } else { HardScale::Coefficient },
        })),
    ]
}

fn config() -> impl Strategy<Value = ExperimentConfig> {
    (
        (signal(), design(), rule()),
        (3usize..100_000, 1e-3f64..100.0, 1usize..1000, any::<u64>()),
        (any::<bool>(), 6u32..=20, proptest::option::of(0.0f64..10.0)),
        proptest::collection::btree_set(3usize..1_000_000, 3..6),
    )
        .prop_map(|((signal, design, rule), (n, rsnr, runs, seed), (haar, resolution, sigma), rate)| {
            ExperimentConfig {
                signal,
                design,
                rule,
                n,
                rsnr,
                runs,
                seed,
                wavelet: if haar { "haar".into() } else { "symmlet8".into() },
                resolution,
                sigma,
                rate_n: rate.into_iter().collect(),
            }
        })
}

proptest! {
    #[test]
    fn parse_emit_parse(cfgs in proptest::collection::vec(config(), 1..5)) {
        let text = emit_config(&cfgs);
        let back = parse_config(&text).unwrap();
        prop_assert_eq!(&back, &cfgs);
        prop_assert_eq!(emit_config(&back), text);
    }
}
