//! Register-machine programs.
//!
//! A [`Program`] is an ordered list of [`Instruction`]s executed against a
//! register file initialised to `0.0`. Each instruction writes exactly one
//! register; the destination of the final instruction is the program output.
//!
//! Arithmetic is *protected* so evaluation is total and always finite:
//!
//! | operation | rule |
//! |-----------|------|
//! | `a / b`   | `1.0` when `abs(b) < 1e-9` |
//! | `ln(a)`   | `ln(abs(a))`, or `0.0` when `abs(a) < 1e-9` |
//! | `exp(a)`  | `exp(min(a, 32))` |
//! | any result | non-finite values are replaced by `0.0` |

mod decode;
mod effective;
mod text;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::scfg::ProductionId;

pub use decode::ExpressionTooLarge;
pub use effective::CodeSize;

/// Divisors and logarithm arguments smaller than this are treated as zero.
pub const PROTECTION_EPSILON: f64 = 1e-9;

/// Upper clamp applied to the argument of `exp`.
pub const EXP_CLAMP: f64 = 32.0;

/// Fitness assigned when the mean absolute error is not finite.
pub const WORST_FITNESS: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProgramError {
    #[error("program has no instructions")]
    Empty,
    #[error("register count must be positive")]
    NoRegisters,
    #[error("instruction {index}: register r[{register}] out of range (register count {count})")]
    RegisterOutOfRange { index: usize, register: usize, count: usize },
    #[error("instruction {index}: operator `{op}` expects {expected} operand(s), found {found}")]
    Arity { index: usize, op: Op, expected: usize, found: usize },
    #[error("instruction {index}: identity must read its own destination register")]
    IdentityMismatch { index: usize },
    #[error("program reads x{needed} but only {got} input(s) were supplied")]
    MissingInputs { needed: usize, got: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// A source operand of an instruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Operand {
    Register(usize),
    Constant(f64),
    /// Zero-based input dimension; rendered as `x1`, `x2`, ...
    Input(usize),
}

impl Operand {
    #[inline]
    fn read(self, registers: &[f64], inputs: &[f64]) -> f64 {
        match self {
            Operand::Register(r) => registers[r],
            Operand::Constant(c) => c,
            Operand::Input(d) => inputs[d],
        }
    }

    pub fn register(self) -> Option<usize> {
        match self {
            Operand::Register(r) => Some(r),
            _ => None,
        }
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Register(r) => write!(f, "r[{r}]"),
            Operand::Constant(c) => write!(f, "{c}"),
            Operand::Input(d) => write!(f, "x{}", d + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Sin,
    Cos,
    Exp,
    Ln,
    /// Copies one operand into the destination register.
    Load,
    /// `r[k] = r[k]`; records a pass-through derivation step.
    Identity,
}

/// Operators grouped by how many operands they take and how they may be
/// swapped for one another by micro-mutation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpClass {
    Binary,
    Unary,
    Load,
    Identity,
}

impl Op {
    pub const BINARY: [Op; 4] = [Op::Add, Op::Sub, Op::Mul, Op::Div];
    pub const UNARY: [Op; 4] = [Op::Sin, Op::Cos, Op::Exp, Op::Ln];

    pub fn arity(self) -> usize {
        match self.class() {
            OpClass::Binary => 2,
            _ => 1,
        }
    }

    pub fn class(self) -> OpClass {
        match self {
            Op::Add | Op::Sub | Op::Mul | Op::Div => OpClass::Binary,
            Op::Sin | Op::Cos | Op::Exp | Op::Ln => OpClass::Unary,
            Op::Load => OpClass::Load,
            Op::Identity => OpClass::Identity,
        }
    }

    /// Infix symbol for binary operators, function name for unary ones.
    pub fn symbol(self) -> &'static str {
        match self {
            Op::Add => "+",
            Op::Sub => "-",
            Op::Mul => "*",
            Op::Div => "/",
            Op::Sin => "sin",
            Op::Cos => "cos",
            Op::Exp => "exp",
            Op::Ln => "ln",
            Op::Load => "load",
            Op::Identity => "identity",
        }
    }

    pub fn from_binary_symbol(s: &str) -> Option<Op> {
        Op::BINARY.into_iter().find(|op| op.symbol() == s)
    }

    pub fn from_function_name(s: &str) -> Option<Op> {
        Op::UNARY.into_iter().find(|op| op.symbol() == s)
    }

    /// Applies the operator under protected semantics. `b` is ignored for
    /// unary operators.
    #[inline]
    pub fn apply(self, a: f64, b: f64) -> f64 {
        let value = match self {
            Op::Add => a + b,
            Op::Sub => a - b,
            Op::Mul => a * b,
            Op::Div => {
                if b.abs() < PROTECTION_EPSILON {
                    1.0
                } else {
                    a / b
                }
            }
            Op::Sin => a.sin(),
            Op::Cos => a.cos(),
            Op::Exp => a.min(EXP_CLAMP).exp(),
            Op::Ln => {
                if a.abs() < PROTECTION_EPSILON {
                    0.0
                } else {
                    a.abs().ln()
                }
            }
            Op::Load | Op::Identity => a,
        };
        if value.is_finite() {
            value
        } else {
            0.0
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// One register-machine statement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instruction {
    pub dest: usize,
    pub op: Op,
    pub args: Vec<Operand>,
    /// Grammar production that emitted (or was re-associated with) this
    /// instruction; `None` means untracked.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub production: Option<ProductionId>,
}

impl Instruction {
    pub fn binary(dest: usize, op: Op, a: Operand, b: Operand) -> Self {
        debug_assert_eq!(op.class(), OpClass::Binary);
        Instruction { dest, op, args: vec![a, b], production: None }
    }

    pub fn unary(dest: usize, op: Op, a: Operand) -> Self {
        debug_assert_eq!(op.class(), OpClass::Unary);
        Instruction { dest, op, args: vec![a], production: None }
    }

    /// `r[dest] = source`. A load of the destination register itself is
    /// normalised to an identity.
    pub fn load(dest: usize, source: Operand) -> Self {
        if source == Operand::Register(dest) {
            return Self::identity(dest);
        }
        Instruction { dest, op: Op::Load, args: vec![source], production: None }
    }

    pub fn identity(dest: usize) -> Self {
        Instruction {
            dest,
            op: Op::Identity,
            args: vec![Operand::Register(dest)],
            production: None,
        }
    }

    pub fn tagged(mut self, production: ProductionId) -> Self {
        self.production = Some(production);
        self
    }

    /// Registers read by this instruction.
    pub fn sources(&self) -> impl Iterator<Item = usize> + '_ {
        self.args.iter().filter_map(|a| a.register())
    }

    /// Copies one register into another (`Load` of a register or `Identity`).
    pub fn register_copy_source(&self) -> Option<usize> {
        match self.op {
            Op::Load | Op::Identity => self.args[0].register(),
            _ => None,
        }
    }

    fn validate(&self, index: usize, register_count: usize) -> Result<(), ProgramError> {
        let expected = self.op.arity();
        if self.args.len() != expected {
            return Err(ProgramError::Arity {
                index,
                op: self.op,
                expected,
                found: self.args.len(),
            });
        }
        for register in std::iter::once(self.dest).chain(self.sources()) {
            if register >= register_count {
                return Err(ProgramError::RegisterOutOfRange {
                    index,
                    register,
                    count: register_count,
                });
            }
        }
        if self.op == Op::Identity && self.args[0] != Operand::Register(self.dest) {
            return Err(ProgramError::IdentityMismatch { index });
        }
        Ok(())
    }

    #[inline]
    fn execute(&self, registers: &mut [f64], inputs: &[f64]) {
        let a = self.args[0].read(registers, inputs);
        let b = match self.args.get(1) {
            Some(operand) => operand.read(registers, inputs),
            None => 0.0,
        };
        registers[self.dest] = self.op.apply(a, b);
    }
}

/// A validated, non-empty instruction sequence over a fixed register file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProgram", into = "RawProgram")]
pub struct Program {
    instructions: Vec<Instruction>,
    register_count: usize,
    input_arity: usize,
}

#[derive(Serialize, Deserialize)]
struct RawProgram {
    register_count: usize,
    instructions: Vec<Instruction>,
}

impl TryFrom<RawProgram> for Program {
    type Error = ProgramError;

    fn try_from(raw: RawProgram) -> Result<Self, Self::Error> {
        Program::new(raw.instructions, raw.register_count)
    }
}

impl From<Program> for RawProgram {
    fn from(program: Program) -> Self {
        RawProgram { register_count: program.register_count, instructions: program.instructions }
    }
}

impl Program {
    pub fn new(instructions: Vec<Instruction>, register_count: usize) -> Result<Self, ProgramError> {
        if register_count == 0 {
            return Err(ProgramError::NoRegisters);
        }
        if instructions.is_empty() {
            return Err(ProgramError::Empty);
        }
        let mut input_arity = 0;
        for (index, instruction) in instructions.iter().enumerate() {
            instruction.validate(index, register_count)?;
            for arg in &instruction.args {
                if let Operand::Input(d) = arg {
                    input_arity = input_arity.max(d + 1);
                }
            }
        }
        Ok(Program { instructions, register_count, input_arity })
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn into_instructions(self) -> Vec<Instruction> {
        self.instructions
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    /// Always `false`; programs are non-empty by construction.
    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    pub fn register_count(&self) -> usize {
        self.register_count
    }

    /// Number of inputs the program needs (highest `x` index read).
    pub fn input_arity(&self) -> usize {
        self.input_arity
    }

    pub fn output_register(&self) -> usize {
        self.instructions[self.instructions.len() - 1].dest
    }

    /// Highest register index written or read by any instruction.
    pub fn max_register(&self) -> usize {
        self.instructions
            .iter()
            .flat_map(|i| std::iter::once(i.dest).chain(i.sources()))
            .max()
            .unwrap_or(0)
    }

    pub fn evaluate(&self, inputs: &[f64]) -> Result<f64, ProgramError> {
        let mut registers = vec![0.0; self.register_count];
        self.evaluate_into(inputs, &mut registers)
    }

    /// Evaluates using a caller-provided scratch register file.
    pub fn evaluate_into(&self, inputs: &[f64], registers: &mut Vec<f64>) -> Result<f64, ProgramError> {
        if inputs.len() < self.input_arity {
            return Err(ProgramError::MissingInputs { needed: self.input_arity, got: inputs.len() });
        }
        registers.clear();
        registers.resize(self.register_count, 0.0);
        for instruction in &self.instructions {
            instruction.execute(registers, inputs);
        }
        Ok(registers[self.output_register()])
    }

    /// Mean absolute error over `(inputs, target)` cases. A non-finite mean
    /// (accumulated overflow) maps to [`WORST_FITNESS`].
    pub fn mean_absolute_error<'a, I>(&self, cases: I) -> Result<f64, ProgramError>
    where
        I: IntoIterator<Item = (&'a [f64], f64)>,
    {
        let mut registers = Vec::with_capacity(self.register_count);
        let mut total = 0.0;
        let mut count = 0usize;
        for (inputs, target) in cases {
            total += (self.evaluate_into(inputs, &mut registers)? - target).abs();
            count += 1;
        }
        let mae = total / count as f64;
        Ok(if mae.is_finite() { mae } else { WORST_FITNESS })
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::square_plus_x;
    use super::*;

    #[test]
    fn square_plus_x_at_two() {
        assert_eq!(square_plus_x().evaluate(&[2.0]).unwrap(), 6.0);
        assert_eq!(square_plus_x().output_register(), 4);
    }

    #[test]
    fn single_load_of_input() {
        let p = Program::new(vec![Instruction::load(0, Operand::Input(0))], 1).unwrap();
        assert_eq!(p.evaluate(&[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn registers_start_at_zero() {
        let p = Program::new(
            vec![Instruction::binary(0, Op::Add, Operand::Register(3), Operand::Constant(2.0))],
            4,
        )
        .unwrap();
        assert_eq!(p.evaluate(&[]).unwrap(), 2.0);
    }

    #[test]
    fn protected_operators() {
        assert_eq!(Op::Div.apply(5.0, 0.0), 1.0);
        assert_eq!(Op::Div.apply(5.0, 1e-10), 1.0);
        assert_eq!(Op::Div.apply(6.0, 2.0), 3.0);
        assert_eq!(Op::Ln.apply(0.0, 0.0), 0.0);
        assert_eq!(Op::Ln.apply(-std::f64::consts::E, 0.0), 1.0);
        assert_eq!(Op::Exp.apply(1000.0, 0.0), EXP_CLAMP.exp());
        assert_eq!(Op::Mul.apply(1e200, 1e200), 0.0);
        assert_eq!(Op::Sin.apply(f64::INFINITY, 0.0), 0.0);
    }

    #[test]
    fn structural_errors() {
        let out_of_range = Program::new(vec![Instruction::load(3, Operand::Constant(1.0))], 2);
        assert!(matches!(out_of_range, Err(ProgramError::RegisterOutOfRange { register: 3, .. })));

        let bad_source = Program::new(
            vec![Instruction::binary(0, Op::Add, Operand::Register(0), Operand::Register(7))],
            2,
        );
        assert!(matches!(bad_source, Err(ProgramError::RegisterOutOfRange { register: 7, .. })));

        assert_eq!(Program::new(vec![], 2), Err(ProgramError::Empty));

        let arity = Instruction { dest: 0, op: Op::Add, args: vec![Operand::Constant(1.0)], production: None };
        assert!(matches!(Program::new(vec![arity], 1), Err(ProgramError::Arity { .. })));

        let identity = Instruction { dest: 0, op: Op::Identity, args: vec![Operand::Register(1)], production: None };
        assert!(matches!(Program::new(vec![identity], 2), Err(ProgramError::IdentityMismatch { .. })));
    }

    #[test]
    fn missing_inputs_is_an_error() {
        let p = Program::new(vec![Instruction::load(0, Operand::Input(2))], 1).unwrap();
        assert_eq!(p.input_arity(), 3);
        assert!(matches!(p.evaluate(&[1.0]), Err(ProgramError::MissingInputs { needed: 3, got: 1 })));
    }

    #[test]
    fn load_of_own_register_is_identity() {
        assert_eq!(Instruction::load(2, Operand::Register(2)).op, Op::Identity);
    }

    #[test]
    fn exact_program_has_zero_error() {
        let p = square_plus_x();
        let xs: Vec<[f64; 1]> = (0..10).map(|i| [i as f64 * 0.3 - 1.0]).collect();
        let cases = xs.iter().map(|x| (&x[..], x[0] * x[0] + x[0]));
        assert_eq!(p.mean_absolute_error(cases).unwrap(), 0.0);
    }

    #[test]
    fn overflowing_error_maps_to_worst_fitness() {
        let p = Program::new(vec![Instruction::load(0, Operand::Constant(1.5e308))], 1).unwrap();
        let xs = [[0.0]; 20];
        let cases = xs.iter().map(|x| (&x[..], -1.0e308));
        assert_eq!(p.mean_absolute_error(cases).unwrap(), WORST_FITNESS);
    }

    #[test]
    fn json_round_trip_validates() {
        let p = square_plus_x();
        let json = serde_json::to_string(&p).unwrap();
        let back: Program = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);

        let broken = json.replace("\"register_count\":5", "\"register_count\":2");
        assert!(serde_json::from_str::<Program>(&broken).is_err());
    }
}
