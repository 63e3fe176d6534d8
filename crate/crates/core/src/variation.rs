//! Effective macro- and micro-mutation.
//!
//! Every operator here only touches effective code: insertions pick a
//! destination that is read later, deletions and micro-mutations pick an
//! effective instruction. When a grammar is supplied the changed instruction
//! is re-tagged with [`reassociate`]; effects on neighbouring instructions'
//! tags are ignored.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::program::{Instruction, Op, OpClass, Operand, Program};
use crate::scfg::{Grammar, Production, ProductionId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MutationConfig {
    pub macro_rate: f64,
    pub insertion_prob: f64,
    pub deletion_prob: f64,
    pub micro_rate: f64,
    pub min_size: usize,
    pub max_size: usize,
    pub constants: Vec<f64>,
    /// Operators random instructions may use. `Identity` is never drawn.
    pub operators: Vec<Op>,
    /// Input dimension operands may reference.
    pub inputs: usize,
}

impl Default for MutationConfig {
    fn default() -> Self {
        MutationConfig {
            macro_rate: 0.75,
            insertion_prob: 0.66,
            deletion_prob: 0.33,
            micro_rate: 0.25,
            min_size: 1,
            max_size: 200,
            constants: (1..=9).map(f64::from).collect(),
            operators: vec![Op::Add, Op::Sub, Op::Mul, Op::Div, Op::Load],
            inputs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid mutation configuration: {0}")]
pub struct MutationConfigError(pub String);

impl MutationConfig {
    /// Uses the grammar's operators (plus loads), constants and inputs.
    pub fn with_grammar(mut self, grammar: &Grammar) -> Self {
        self.operators = grammar.operators();
        self.operators.push(Op::Load);
        let constants = grammar.constants();
        if !constants.is_empty() {
            self.constants = constants;
        }
        self.inputs = grammar.input_dimension();
        self
    }

    pub fn validate(&self) -> Result<(), MutationConfigError> {
        let rate = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(MutationConfigError(format!("{name} = {v} outside [0, 1]")))
            }
        };
        rate("macro_rate", self.macro_rate)?;
        rate("micro_rate", self.micro_rate)?;
        rate("insertion_prob", self.insertion_prob)?;
        rate("deletion_prob", self.deletion_prob)?;
        if self.insertion_prob + self.deletion_prob <= 0.0 {
            return Err(MutationConfigError("insertion_prob + deletion_prob must be positive".into()));
        }
        if self.min_size == 0 || self.max_size < self.min_size {
            return Err(MutationConfigError(format!("size bounds [{}, {}]", self.min_size, self.max_size)));
        }
        if self.operators.is_empty() || self.operators.contains(&Op::Identity) {
            return Err(MutationConfigError("operator pool must be non-empty and exclude identity".into()));
        }
        if self.constants.is_empty() && self.inputs == 0 {
            return Err(MutationConfigError("need at least one constant or input".into()));
        }
        Ok(())
    }

    /// Insertion probability after renormalising insertion + deletion.
    pub fn insertion_share(&self) -> f64 {
        self.insertion_prob / (self.insertion_prob + self.deletion_prob)
    }
}

fn random_operand<R: Rng + ?Sized>(config: &MutationConfig, register_count: usize, rng: &mut R) -> Operand {
    if rng.gen_bool(0.5) {
        return Operand::Register(rng.gen_range(0..register_count));
    }
    let use_input = match (config.inputs, config.constants.is_empty()) {
        (0, _) => false,
        (_, true) => true,
        _ => rng.gen_bool(0.5),
    };
    if use_input {
        Operand::Input(rng.gen_range(0..config.inputs))
    } else {
        Operand::Constant(*config.constants.choose(rng).expect("non-empty"))
    }
}

fn random_instruction<R: Rng + ?Sized>(
    config: &MutationConfig,
    register_count: usize,
    dest: usize,
    rng: &mut R,
) -> Instruction {
    let op = *config.operators.choose(rng).expect("non-empty operator pool");
    let mut operand = || random_operand(config, register_count, rng);
    match op.class() {
        OpClass::Binary => Instruction::binary(dest, op, operand(), operand()),
        OpClass::Unary => Instruction::unary(dest, op, operand()),
        OpClass::Load | OpClass::Identity => Instruction::load(dest, operand()),
    }
}

/// `size` uniformly random, untracked instructions.
pub fn random_program<R: Rng + ?Sized>(
    config: &MutationConfig,
    register_count: usize,
    size: usize,
    rng: &mut R,
) -> Program {
    let instructions = (0..size.max(1))
        .map(|_| {
            let dest = rng.gen_range(0..register_count);
            random_instruction(config, register_count, dest, rng)
        })
        .collect();
    Program::new(instructions, register_count).expect("random instructions are in range")
}

fn rebuild(program: &Program, instructions: Vec<Instruction>) -> Program {
    Program::new(instructions, program.register_count()).expect("mutation keeps programs valid")
}

/// Inserts an effective random instruction (probability
/// [`MutationConfig::insertion_share`]) or deletes a random effective one.
/// Insertion at `max_size` becomes deletion; deletion at `min_size` leaves
/// the program unchanged.
pub fn macro_mutate<R: Rng + ?Sized>(
    program: &Program,
    config: &MutationConfig,
    grammar: Option<&Grammar>,
    rng: &mut R,
) -> Program {
    let len = program.len();
    let insert = rng.gen_bool(config.insertion_share()) && len < config.max_size;
    if insert {
        let pos = rng.gen_range(0..=len);
        insert_at(program, config, grammar, pos, rng)
    } else {
        if len <= config.min_size {
            return program.clone();
        }
        let effective: Vec<usize> = effective_positions(program);
        let victim = *effective.choose(rng).expect("last instruction is effective");
        let mut instructions = program.instructions().to_vec();
        instructions.remove(victim);
        rebuild(program, instructions)
    }
}

/// Inserts a random instruction before position `pos`, writing a register
/// that is live there. When nothing is live at `pos` the instruction is
/// appended and writes the output register instead.
pub fn insert_at<R: Rng + ?Sized>(
    program: &Program,
    config: &MutationConfig,
    grammar: Option<&Grammar>,
    pos: usize,
    rng: &mut R,
) -> Program {
    let live: Vec<usize> = program
        .live_registers_at(pos)
        .into_iter()
        .enumerate()
        .filter_map(|(r, live)| live.then_some(r))
        .collect();
    let (pos, dest) = match live.choose(rng) {
        Some(&dest) => (pos, dest),
        None => (program.len(), program.output_register()),
    };
    let mut instruction = random_instruction(config, program.register_count(), dest, rng);
    let mut instructions = program.instructions().to_vec();
    if let Some(grammar) = grammar {
        instruction.production = reassociate(&instruction, grammar, &instructions[..pos]);
    }
    instructions.insert(pos, instruction);
    rebuild(program, instructions)
}

fn effective_positions(program: &Program) -> Vec<usize> {
    program.effective_mask().into_iter().enumerate().filter_map(|(i, e)| e.then_some(i)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Element {
    Destination,
    Operator,
    Operand,
}

/// Changes one element (destination, operator or one operand) of a random
/// effective instruction to a different admissible value, then re-tags it.
pub fn micro_mutate<R: Rng + ?Sized>(
    program: &Program,
    config: &MutationConfig,
    grammar: Option<&Grammar>,
    rng: &mut R,
) -> Program {
    let effective = effective_positions(program);
    let index = *effective.choose(rng).expect("last instruction is effective");
    let original = &program.instructions()[index];
    let register_count = program.register_count();

    let destinations: Vec<usize> = if index + 1 == program.len() {
        (0..register_count).filter(|&r| r != original.dest).collect()
    } else {
        program
            .live_registers_at(index + 1)
            .into_iter()
            .enumerate()
            .filter_map(|(r, live)| (live && r != original.dest).then_some(r))
            .collect()
    };
    let operators: Vec<Op> = config
        .operators
        .iter()
        .copied()
        .filter(|&op| op != original.op && op.class() == original.op.class())
        .filter(|op| matches!(op.class(), OpClass::Binary | OpClass::Unary))
        .collect();

    let mut elements = vec![Element::Operand];
    if !destinations.is_empty() {
        elements.push(Element::Destination);
    }
    if !operators.is_empty() {
        elements.push(Element::Operator);
    }

    let mut mutated = original.clone();
    match *elements.choose(rng).expect("operand is always applicable") {
        Element::Destination => {
            let dest = *destinations.choose(rng).expect("non-empty");
            mutated = match original.op.class() {
                OpClass::Load | OpClass::Identity => Instruction::load(dest, original.args[0]),
                _ => Instruction { dest, ..original.clone() },
            };
        }
        Element::Operator => mutated.op = *operators.choose(rng).expect("non-empty"),
        Element::Operand => {
            let slot = rng.gen_range(0..original.args.len());
            let current = original.args[slot];
            // A pool with a single possible operand cannot change it.
            let replacement = (0..64)
                .map(|_| random_operand(config, register_count, rng))
                .find(|&o| o != current)
                .unwrap_or(current);
            mutated = match original.op.class() {
                OpClass::Load | OpClass::Identity => Instruction::load(original.dest, replacement),
                _ => {
                    let mut m = original.clone();
                    m.args[slot] = replacement;
                    m
                }
            };
        }
    }
    mutated.production = original.production;
    let mut instructions = program.instructions().to_vec();
    if let Some(grammar) = grammar {
        mutated.production = reassociate(&mutated, grammar, &instructions[..index]);
    }
    instructions[index] = mutated;
    rebuild(program, instructions)
}

/// Applies macro-mutation with probability `macro_rate` and, independently,
/// micro-mutation with probability `micro_rate`; when neither fires a
/// macro-mutation is forced.
pub fn mutate<R: Rng + ?Sized>(
    program: &Program,
    config: &MutationConfig,
    grammar: Option<&Grammar>,
    rng: &mut R,
) -> Program {
    let mut apply_macro = rng.gen_bool(config.macro_rate);
    let apply_micro = rng.gen_bool(config.micro_rate);
    if !apply_macro && !apply_micro {
        apply_macro = true;
    }
    let mut child = program.clone();
    if apply_macro {
        child = macro_mutate(&child, config, grammar, rng);
    }
    if apply_micro {
        child = micro_mutate(&child, config, grammar, rng);
    }
    child
}

fn productions(grammar: &Grammar) -> impl Iterator<Item = (ProductionId, &Production)> {
    grammar.rules().iter().enumerate().flat_map(|(i, rule)| {
        rule.productions.iter().enumerate().map(move |(j, p)| (ProductionId::new(i, j), p))
    })
}

/// Finds the production an instruction corresponds to.
///
/// Operators map to the production using them, constant and input loads to
/// the matching terminal. A register copy (identity or load of another
/// register) maps to the pass-through production whose right-hand side is
/// the rule that produced the copied register, found by following
/// `context` (the instructions preceding this one) back to its most recent
/// writer. An instruction whose current tag already fits is left as is.
/// Returns `None` when no production fits.
pub fn reassociate(instruction: &Instruction, grammar: &Grammar, context: &[Instruction]) -> Option<ProductionId> {
    if let Some(source) = instruction.register_copy_source() {
        let rule = writer_rule(source, grammar, context)?;
        let fits = |p: &Production| p.passes_through() == Some(rule);
        if let Some(tag) = instruction.production {
            if grammar.production(tag).is_some_and(fits) {
                return Some(tag);
            }
        }
        return productions(grammar).find(|(_, p)| fits(p)).map(|(id, _)| id);
    }

    let fits = |p: &Production| match (p, instruction.op, instruction.args[0]) {
        (Production::Binary { op, .. }, this, _) => *op == this,
        (Production::Unary { func, .. }, this, _) => *func == this,
        (Production::Constant(c), Op::Load, Operand::Constant(v)) => *c == v,
        (Production::Input(d), Op::Load, Operand::Input(v)) => *d == v,
        _ => false,
    };
    if let Some(tag) = instruction.production {
        if grammar.production(tag).is_some_and(fits) {
            return Some(tag);
        }
    }
    productions(grammar).find(|(_, p)| fits(p)).map(|(id, _)| id)
}

/// Rule whose derivation produced the current value of `register`.
fn writer_rule(register: usize, grammar: &Grammar, context: &[Instruction]) -> Option<usize> {
    let position = context.iter().rposition(|i| i.dest == register)?;
    let writer = &context[position];
    let tag = match writer.production.filter(|&t| grammar.production(t).is_some()) {
        Some(tag) => tag,
        None => reassociate(writer, grammar, &context[..position])?,
    };
    Some(tag.rule)
}
