//! Leftmost derivation of linear programs.
//!
//! Each derivation step at destination register `r[k]` draws one production
//! and emits exactly one instruction after the instructions of its
//! sub-derivations:
//!
//! * `A op B`: derive `A` into `r[k]`, `B` into `r[k+1]`, emit `r[k] = r[k] op r[k+1]`;
//! * `f(A)`: derive `A` into `r[k]`, emit `r[k] = f(r[k])`;
//! * `A` or `(A)`: derive `A` into `r[k]`, emit the identity `r[k] = r[k]`;
//! * terminals: emit the load `r[k] = c` or `r[k] = xd`.
//!
//! The left operand keeps the parent's register and the right operand takes
//! the next one, so sibling subtrees never share a register and a
//! right-leaning chain of `n` binary nodes needs registers `r[0]..=r[n]`.
//!
//! Two budgets keep derivations finite. Productions that split or recurse
//! (`A op B`, `(A)`) are masked once `r[k+1]` would fall outside the register
//! file, and any production whose cheapest completion no longer fits in the
//! remaining instruction budget is masked. The surviving probabilities are
//! renormalised.

use rand::Rng;

use super::{Grammar, Production, ProductionId};
use crate::program::{Instruction, Op, Operand, Program};

/// Attempts made by [`Sampler::sample_or_fallback`] before it gives up and
/// returns a single terminal load.
pub const MAX_SAMPLE_RETRIES: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SamplerBudget {
    pub register_count: usize,
    pub max_instructions: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SampleError {
    #[error("sampler needs at least 2 registers and 1 instruction")]
    InvalidBudget,
    #[error("start rule cannot be derived within {max_instructions} instructions")]
    Unreachable { max_instructions: usize },
    #[error("no admissible production left for rule {rule} at r[{register}]")]
    Exhausted { rule: usize, register: usize },
}

/// Picks a production given the masked, unnormalised weights of a rule.
/// Returns `None` when nothing admissible remains.
pub trait Chooser {
    fn choose(&mut self, rule: usize, weights: &[f64]) -> Option<usize>;
}

/// Draws productions proportionally to their weights.
pub struct RngChooser<'a, R: Rng + ?Sized>(pub &'a mut R);

impl<R: Rng + ?Sized> Chooser for RngChooser<'_, R> {
    fn choose(&mut self, _rule: usize, weights: &[f64]) -> Option<usize> {
        let total: f64 = weights.iter().sum();
        if total.is_nan() || total <= 0.0 {
            return None;
        }
        let mut target = self.0.gen::<f64>() * total;
        let mut last_positive = None;
        for (j, &w) in weights.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            if target < w {
                return Some(j);
            }
            target -= w;
            last_positive = Some(j);
        }
        last_positive
    }
}

/// Replays a fixed sequence of production indices in leftmost order.
/// A scripted choice whose weight is zero (masked or improbable) fails.
#[derive(Debug, Clone)]
pub struct ScriptedChooser {
    choices: std::collections::VecDeque<usize>,
}

impl ScriptedChooser {
    pub fn new(choices: impl IntoIterator<Item = usize>) -> Self {
        ScriptedChooser { choices: choices.into_iter().collect() }
    }

    pub fn remaining(&self) -> usize {
        self.choices.len()
    }
}

impl Chooser for ScriptedChooser {
    fn choose(&mut self, _rule: usize, weights: &[f64]) -> Option<usize> {
        let j = self.choices.pop_front()?;
        (weights.get(j).copied().unwrap_or(0.0) > 0.0).then_some(j)
    }
}

pub struct Sampler<'g> {
    grammar: &'g Grammar,
    budget: SamplerBudget,
    rule_costs: Vec<usize>,
}

struct Derivation<'c, C: ?Sized> {
    chooser: &'c mut C,
    out: Vec<Instruction>,
}

impl<'g> Sampler<'g> {
    pub fn new(grammar: &'g Grammar, budget: SamplerBudget) -> Result<Self, SampleError> {
        if budget.register_count < 2 || budget.max_instructions == 0 {
            return Err(SampleError::InvalidBudget);
        }
        let rule_costs = grammar.min_derivation_costs();
        if rule_costs[grammar.start()] > budget.max_instructions {
            return Err(SampleError::Unreachable { max_instructions: budget.max_instructions });
        }
        Ok(Sampler { grammar, budget, rule_costs })
    }

    pub fn grammar(&self) -> &Grammar {
        self.grammar
    }

    pub fn budget(&self) -> SamplerBudget {
        self.budget
    }

    /// One derivation attempt with the given chooser.
    pub fn sample_with<C: Chooser + ?Sized>(&self, chooser: &mut C) -> Result<Program, SampleError> {
        let mut derivation = Derivation { chooser, out: Vec::new() };
        self.derive(&mut derivation, self.grammar.start(), 0, 0)?;
        Ok(Program::new(derivation.out, self.budget.register_count).expect("sampler emits valid programs"))
    }

    /// One derivation attempt drawing from `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Program, SampleError> {
        self.sample_with(&mut RngChooser(rng))
    }

    /// Retries up to [`MAX_SAMPLE_RETRIES`] times, then falls back to a single
    /// load of a uniformly chosen terminal.
    pub fn sample_or_fallback<R: Rng + ?Sized>(&self, rng: &mut R) -> Program {
        for _ in 0..MAX_SAMPLE_RETRIES {
            if let Ok(program) = self.sample(rng) {
                return program;
            }
        }
        self.fallback(rng)
    }

    fn fallback<R: Rng + ?Sized>(&self, rng: &mut R) -> Program {
        let terminals: Vec<(ProductionId, &Production)> = self
            .grammar
            .rules()
            .iter()
            .enumerate()
            .flat_map(|(i, rule)| {
                rule.productions.iter().enumerate().map(move |(j, p)| (ProductionId::new(i, j), p))
            })
            .filter(|(_, p)| p.is_terminal())
            .collect();
        let (id, production) = terminals[rng.gen_range(0..terminals.len())];
        let instruction = terminal_load(0, production).tagged(id);
        Program::new(vec![instruction], self.budget.register_count).expect("single load is valid")
    }

    fn derive<C: Chooser + ?Sized>(
        &self,
        d: &mut Derivation<'_, C>,
        rule_index: usize,
        register: usize,
        reserve: usize,
    ) -> Result<(), SampleError> {
        let rule = self.grammar.rule(rule_index);
        let available = self.budget.max_instructions.saturating_sub(d.out.len() + reserve);
        let last_register = register + 1 >= self.budget.register_count;
        let weights: Vec<f64> = rule
            .productions
            .iter()
            .zip(&rule.probs)
            .map(|(production, &p)| {
                let fits = self.grammar.production_cost(production, &self.rule_costs) <= available;
                let masked = last_register && production.is_expanding();
                if fits && !masked {
                    p
                } else {
                    0.0
                }
            })
            .collect();
        let j = d
            .chooser
            .choose(rule_index, &weights)
            .ok_or(SampleError::Exhausted { rule: rule_index, register })?;
        let tag = ProductionId::new(rule_index, j);
        let k = register;
        let instruction = match rule.productions[j] {
            Production::Binary { left, op, right } => {
                self.derive(d, left, k, reserve + 1 + self.rule_costs[right])?;
                self.derive(d, right, k + 1, reserve + 1)?;
                Instruction::binary(k, op, Operand::Register(k), Operand::Register(k + 1))
            }
            Production::Unary { func, arg } => {
                self.derive(d, arg, k, reserve + 1)?;
                Instruction::unary(k, func, Operand::Register(k))
            }
            Production::Bracket(inner) | Production::PassThrough(inner) => {
                self.derive(d, inner, k, reserve + 1)?;
                Instruction::identity(k)
            }
            ref terminal => terminal_load(k, terminal),
        };
        d.out.push(instruction.tagged(tag));
        Ok(())
    }
}

fn terminal_load(register: usize, production: &Production) -> Instruction {
    match *production {
        Production::Constant(c) => Instruction::load(register, Operand::Constant(c)),
        Production::Input(d) => Instruction::load(register, Operand::Input(d)),
        _ => unreachable!("not a terminal production"),
    }
}

/// `true` for the instruction kinds a sampler can emit for a production.
pub fn emits(production: &Production, op: Op) -> bool {
    match production {
        Production::Binary { op: p, .. } => *p == op,
        Production::Unary { func, .. } => *func == op,
        Production::Bracket(_) | Production::PassThrough(_) => op == Op::Identity,
        Production::Constant(_) | Production::Input(_) => op == Op::Load,
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::scfg::parse_grammar;

    fn budget(register_count: usize, max_instructions: usize) -> SamplerBudget {
        SamplerBudget { register_count, max_instructions }
    }

    fn tags(p: &Program) -> Vec<(usize, usize)> {
        p.instructions().iter().map(|i| i.production.map(|t| (t.rule, t.production)).unwrap()).collect()
    }

    #[test]
    fn x_plus_one_derivation() {
        let g = Grammar::polynomial();
        let sampler = Sampler::new(&g, budget(13, 200)).unwrap();
        // Exp+Term, Exp->Term, Term->Factor, Factor->X, X->x1,
        // Term->Factor, Factor->Num, Num->1
        let mut script = ScriptedChooser::new([0, 2, 2, 2, 0, 2, 1, 0]);
        let p = sampler.sample_with(&mut script).unwrap();
        assert_eq!(script.remaining(), 0);
        assert_eq!(
            p.to_string(),
            "# registers: 13\n\
             0: r[0] = x1  # prod (4,0)\n\
             1: r[0] = r[0]  # prod (2,2)\n\
             2: r[0] = r[0]  # prod (1,2)\n\
             3: r[0] = r[0]  # prod (0,2)\n\
             4: r[1] = 1  # prod (3,0)\n\
             5: r[1] = r[1]  # prod (2,1)\n\
             6: r[1] = r[1]  # prod (1,2)\n\
             7: r[0] = r[0] + r[1]  # prod (0,0)\n"
        );
        assert_eq!(tags(&p)[7], (0, 0));
        assert_eq!(p.evaluate(&[3.0]).unwrap(), 4.0);
        assert_eq!(p.decode_expression(), "x1+1");
    }

    #[test]
    fn single_terminal_start_rule() {
        let g = parse_grammar("S := 7 | probs 1\n").unwrap();
        let p = Sampler::new(&g, budget(2, 10)).unwrap().sample(&mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.evaluate(&[]).unwrap(), 7.0);
    }

    #[test]
    fn samples_respect_budget_and_are_fully_effective() {
        let g = Grammar::polynomial();
        let sampler = Sampler::new(&g, budget(13, 200)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let p = sampler.sample_or_fallback(&mut rng);
            assert!(p.len() <= 200);
            assert!(p.max_register() < 13);
            assert!(p.effective_mask().into_iter().all(|e| e));
            assert_eq!(p.output_register(), 0);
        }
    }

    #[test]
    fn tight_budget_still_terminates() {
        let g = Grammar::extended();
        let sampler = Sampler::new(&g, budget(2, 12)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let p = sampler.sample_or_fallback(&mut rng);
            assert!(p.len() <= 12 && p.max_register() < 2);
        }
    }

    #[test]
    fn pass_through_only_grammar_uses_r0() {
        let g = parse_grammar(
            "Exp := Exp + Term | Term | probs 0 1\nTerm := Term * Num | Num | probs 0 1\nNum := 1 | 2 | probs 0.5 0.5\n",
        )
        .unwrap();
        let sampler = Sampler::new(&g, budget(4, 50)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            assert_eq!(sampler.sample(&mut rng).unwrap().max_register(), 0);
        }
    }

    #[test]
    fn impossible_grammars_are_rejected() {
        let g = parse_grammar("S := S + S | probs 1\n").unwrap();
        assert!(matches!(Sampler::new(&g, budget(4, 100)), Err(SampleError::Unreachable { .. })));
        let g = Grammar::polynomial();
        assert!(matches!(Sampler::new(&g, budget(1, 100)), Err(SampleError::InvalidBudget)));
        assert!(matches!(Sampler::new(&g, budget(4, 3)), Err(SampleError::Unreachable { .. })));
    }

    #[test]
    fn exhaustion_then_fallback() {
        // Only binary splits or an unreachable-at-the-edge terminal path.
        let g = parse_grammar("S := S + T | T | probs 0.5 0.5\nT := (S) | probs 1\n").unwrap();
        assert_eq!(g.min_derivation_costs(), vec![usize::MAX; 2]);
        let g = parse_grammar("S := S + S | (S) | 1 | probs 0.5 0.5 0\n").unwrap();
        let sampler = Sampler::new(&g, budget(3, 50)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert!(sampler.sample(&mut rng).is_err());
        let p = sampler.sample_or_fallback(&mut rng);
        assert_eq!(p.len(), 1);
        assert_eq!(p.instructions()[0].production, Some(ProductionId::new(0, 2)));
    }

    #[test]
    fn rng_chooser_respects_zero_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut chooser = RngChooser(&mut rng);
        for _ in 0..100 {
            assert_eq!(chooser.choose(0, &[0.0, 2.0, 0.0]), Some(1));
        }
        assert_eq!(chooser.choose(0, &[0.0, 0.0]), None);
    }
}
