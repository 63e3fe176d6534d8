use serde::{Deserialize, Serialize};

use super::{Grammar, GrammarError};
use crate::program::Program;

/// Pooled production usage of a set of programs, shaped like the grammar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProportionTable {
    pub counts: Vec<Vec<usize>>,
    /// `counts` normalised per rule; all zeros for unused rules.
    pub proportions: Vec<Vec<f64>>,
    pub used: Vec<bool>,
}

/// Counts production tags over every instruction of every program and
/// normalises per rule. Untracked instructions are skipped.
pub fn usage_proportions<'a, I>(programs: I, grammar: &Grammar) -> Result<ProportionTable, GrammarError>
where
    I: IntoIterator<Item = &'a Program>,
{
    let mut counts: Vec<Vec<usize>> = grammar.rules().iter().map(|r| vec![0; r.productions.len()]).collect();
    for program in programs {
        for tag in program.instructions().iter().filter_map(|i| i.production) {
            let slot = counts
                .get_mut(tag.rule)
                .and_then(|row| row.get_mut(tag.production))
                .ok_or(GrammarError::TagOutOfRange { tag })?;
            *slot += 1;
        }
    }
    let mut proportions = Vec::with_capacity(counts.len());
    let mut used = Vec::with_capacity(counts.len());
    for row in &counts {
        let total: usize = row.iter().sum();
        used.push(total > 0);
        proportions.push(if total > 0 {
            row.iter().map(|&c| c as f64 / total as f64).collect()
        } else {
            vec![0.0; row.len()]
        });
    }
    Ok(ProportionTable { counts, proportions, used })
}

/// Moves every used rule towards its observed proportions:
/// `p' = (1 - alpha) * p + alpha * prop`. Unused rules are left unchanged.
pub fn update_probabilities(grammar: &Grammar, table: &ProportionTable, alpha: f64) -> Result<Grammar, GrammarError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(GrammarError::LearningRate(alpha));
    }
    let rules = grammar.rules();
    let shape_ok = table.proportions.len() == rules.len()
        && table.used.len() == rules.len()
        && rules.iter().zip(&table.proportions).all(|(r, p)| r.probs.len() == p.len());
    if !shape_ok {
        return Err(GrammarError::ShapeMismatch);
    }
    let probs = rules
        .iter()
        .zip(&table.proportions)
        .zip(&table.used)
        .map(|((rule, props), &used)| {
            if !used {
                return rule.probs.clone();
            }
            rule.probs.iter().zip(props).map(|(&p, &q)| (1.0 - alpha) * p + alpha * q).collect()
        })
        .collect();
    grammar.with_probabilities(probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::{Instruction, Op, Operand};
    use crate::scfg::{ProductionId, Sampler, SamplerBudget, ScriptedChooser};

    fn x_plus_one(g: &Grammar) -> Program {
        let sampler = Sampler::new(g, SamplerBudget { register_count: 13, max_instructions: 200 }).unwrap();
        sampler.sample_with(&mut ScriptedChooser::new([0, 2, 2, 2, 0, 2, 1, 0])).unwrap()
    }

    #[test]
    fn counts_one_program() {
        let g = Grammar::polynomial();
        let p = Program::new(
            vec![
                Instruction::load(0, Operand::Input(0)).tagged(ProductionId::new(0, 0)),
                Instruction::identity(0).tagged(ProductionId::new(0, 2)),
                Instruction::identity(0),
            ],
            1,
        )
        .unwrap();
        let table = usage_proportions([&p], &g).unwrap();
        assert_eq!(table.proportions[0], vec![0.5, 0.0, 0.5]);
        assert_eq!(table.used, vec![true, false, false, false, false]);
    }

    #[test]
    fn x_plus_one_usage() {
        let g = Grammar::polynomial();
        let table = usage_proportions([&x_plus_one(&g)], &g).unwrap();
        assert_eq!(table.proportions[1], vec![0.0, 0.0, 1.0]);
        assert_eq!(table.counts[1], vec![0, 0, 2]);
        assert_eq!(table.counts[2], vec![0, 1, 1]);
        assert_eq!(table.proportions[0], vec![0.5, 0.0, 0.5]);
        assert!(table.used.iter().all(|&u| u));
    }

    #[test]
    fn out_of_range_tag() {
        let g = Grammar::polynomial();
        let p = Program::new(vec![Instruction::load(0, Operand::Constant(1.0)).tagged(ProductionId::new(3, 9))], 1)
            .unwrap();
        assert!(matches!(usage_proportions([&p], &g), Err(GrammarError::TagOutOfRange { .. })));
    }

    #[test]
    fn learning_rate_extremes() {
        let g = Grammar::polynomial();
        let table = usage_proportions([&x_plus_one(&g)], &g).unwrap();
        assert_eq!(update_probabilities(&g, &table, 0.0).unwrap(), g);
        let full = update_probabilities(&g, &table, 1.0).unwrap();
        for (rule, props) in full.rules().iter().zip(&table.proportions) {
            assert_eq!(&rule.probs, props);
        }
        assert!(matches!(update_probabilities(&g, &table, 1.5), Err(GrammarError::LearningRate(_))));
        assert!(matches!(update_probabilities(&g, &table, -0.1), Err(GrammarError::LearningRate(_))));
    }

    #[test]
    fn single_step() {
        let g = crate::scfg::parse_grammar("S := S + S | 1 | probs 0.5 0.5\n").unwrap();
        let p = Program::new(
            vec![Instruction::binary(0, Op::Add, Operand::Constant(1.0), Operand::Constant(1.0))
                .tagged(ProductionId::new(0, 0))],
            1,
        )
        .unwrap();
        let table = usage_proportions([&p], &g).unwrap();
        let updated = update_probabilities(&g, &table, 0.1).unwrap();
        assert!((updated.rule(0).probs[0] - 0.55).abs() < 1e-15);
        assert!((updated.rule(0).probs[1] - 0.45).abs() < 1e-15);
    }

    #[test]
    fn unused_rules_keep_their_distribution() {
        let g = Grammar::polynomial();
        let p = Program::new(vec![Instruction::load(0, Operand::Input(0)).tagged(ProductionId::new(4, 0))], 1).unwrap();
        let table = usage_proportions([&p], &g).unwrap();
        let updated = update_probabilities(&g, &table, 0.5).unwrap();
        assert_eq!(updated.rule(3).probs, g.rule(3).probs);
    }

    #[test]
    fn shape_mismatch() {
        let g = Grammar::polynomial();
        let table = usage_proportions(std::iter::empty(), &Grammar::extended()).unwrap();
        assert!(matches!(update_probabilities(&g, &table, 0.1), Err(GrammarError::ShapeMismatch)));
    }
}
