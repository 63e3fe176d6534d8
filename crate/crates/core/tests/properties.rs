use gblgp::analysis::{median_absolute_deviation, wilcoxon_rank_sum, Alternative};
use gblgp::program::{Op, Program};
use gblgp::scfg::{update_probabilities, Grammar, ProportionTable, Sampler, SamplerBudget};
use gblgp::variation::{mutate, random_program, MutationConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn grammar_with_weights(weights: &[f64]) -> Grammar {
    let g = Grammar::extended();
    let mut k = 0;
    let probs = g
        .rules()
        .iter()
        .map(|r| {
            let raw: Vec<f64> = r
                .probs
                .iter()
                .map(|_| {
                    k += 1;
                    weights[k % weights.len()]
                })
                .collect();
            let sum: f64 = raw.iter().sum();
            raw.iter().map(|w| w / sum).collect()
        })
        .collect();
    g.with_probabilities(probs).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mutation_respects_bounds(seed in any::<u64>(), registers in 1usize..10, max_size in 1usize..40) {
        let config = MutationConfig {
            max_size,
            operators: vec![Op::Add, Op::Mul, Op::Sin, Op::Load],
            ..MutationConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = random_program(&config, registers, max_size.min(10), &mut rng);
        for _ in 0..200 {
            p = mutate(&p, &config, None, &mut rng);
            prop_assert!(!p.is_empty() && p.len() <= max_size);
            prop_assert!(p.max_register() < registers);
        }
        let mut a = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let mut b = ChaCha8Rng::seed_from_u64(seed ^ 1);
        prop_assert_eq!(mutate(&p, &config, None, &mut a), mutate(&p, &config, None, &mut b));
    }

    #[test]
    fn grammar_mutation_keeps_tags_in_range(seed in any::<u64>()) {
        let g = Grammar::extended();
        let config = MutationConfig::default().with_grammar(&g);
        let sampler = Sampler::new(&g, SamplerBudget { register_count: 13, max_instructions: 200 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = sampler.sample_or_fallback(&mut rng);
        for _ in 0..100 {
            p = mutate(&p, &config, Some(&g), &mut rng);
            for i in p.instructions() {
                if let Some(tag) = i.production {
                    prop_assert!(g.production(tag).is_some());
                }
            }
        }
    }

    #[test]
    fn sampled_programs_are_fully_effective(
        seed in any::<u64>(),
        weights in prop::collection::vec(0.01f64..1.0, 3..12),
        registers in 2usize..14,
    ) {
        let g = grammar_with_weights(&weights);
        let budget = SamplerBudget { register_count: registers, max_instructions: 60 };
        let sampler = Sampler::new(&g, budget).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let p = sampler.sample_or_fallback(&mut rng);
            prop_assert!(p.len() <= 60);
            prop_assert!(p.max_register() < registers);
            prop_assert_eq!(p.code_size().effective, p.len());
            prop_assert!(p.instructions().iter().all(|i| i.production.is_some()));
        }
    }

    #[test]
    fn update_keeps_distributions(alpha in 0.0f64..=1.0, weights in prop::collection::vec(0.0f64..5.0, 3..12)) {
        let g = Grammar::extended();
        let mut k = 0;
        let counts: Vec<Vec<usize>> = g.rules().iter().map(|r| r.probs.iter().map(|_| {
            k += 1;
            weights[k % weights.len()].floor() as usize
        }).collect()).collect();
        let used: Vec<bool> = counts.iter().map(|row| row.iter().sum::<usize>() > 0).collect();
        let proportions = counts.iter().map(|row| {
            let total: usize = row.iter().sum();
            row.iter().map(|&c| if total > 0 { c as f64 / total as f64 } else { 0.0 }).collect()
        }).collect();
        let table = ProportionTable { counts, proportions, used };
        let updated = update_probabilities(&g, &table, alpha).unwrap();
        for rule in updated.rules() {
            prop_assert!((rule.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(rule.probs.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn program_text_round_trips(seed in any::<u64>(), size in 1usize..30) {
        let config = MutationConfig { inputs: 3, constants: vec![1.0, -2.5, 0.125], ..MutationConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_program(&config, 7, size, &mut rng);
        let back: Program = p.to_string().parse().unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn mad_is_translation_invariant_and_scales(
        values in prop::collection::vec(-1e3f64..1e3, 1..40),
        shift in -1e3f64..1e3,
        scale in -10.0f64..10.0,
    ) {
        let mad = median_absolute_deviation(&values).unwrap();
        let shifted: Vec<f64> = values.iter().map(|v| v + shift).collect();
        let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
        prop_assert!((median_absolute_deviation(&shifted).unwrap() - mad).abs() <= 1e-9 * (1.0 + mad + shift.abs()));
        prop_assert!((median_absolute_deviation(&scaled).unwrap() - scale.abs() * mad).abs() <= 1e-9 * (1.0 + mad * scale.abs()));
    }

    #[test]
    fn rank_sum_p_is_symmetric_probability(
        a in prop::collection::vec(-5i32..5, 1..30),
        b in prop::collection::vec(-5i32..5, 1..30),
    ) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let ab = wilcoxon_rank_sum(&a, &b, Alternative::TwoSided).unwrap().p_value;
        let ba = wilcoxon_rank_sum(&b, &a, Alternative::TwoSided).unwrap().p_value;
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((ab - ba).abs() < 1e-12);
    }
}
