//! Line-oriented program listing:
//!
//! ```text
//! # registers: 2
//! 0: r[0] = x1  # prod (4,0)
//! 1: r[1] = 1  # prod (3,0)
//! 2: r[0] = r[0] + r[1]  # prod (0,0)
//! ```
//!
//! The header is optional when parsing; without it the register count is
//! one more than the highest register mentioned.

use std::fmt;
use std::str::FromStr;

use super::{Instruction, Op, OpClass, Operand, Program, ProgramError};
use crate::scfg::ProductionId;

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r[{}] = ", self.dest)?;
        match self.op.class() {
            OpClass::Binary => write!(f, "{} {} {}", self.args[0], self.op.symbol(), self.args[1])?,
            OpClass::Unary => write!(f, "{}({})", self.op.symbol(), self.args[0])?,
            OpClass::Load | OpClass::Identity => write!(f, "{}", self.args[0])?,
        }
        if let Some(ProductionId { rule, production }) = self.production {
            write!(f, "  # prod ({rule},{production})")?;
        }
        Ok(())
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# registers: {}", self.register_count)?;
        for (i, instruction) in self.instructions.iter().enumerate() {
            writeln!(f, "{i}: {instruction}")?;
        }
        Ok(())
    }
}

fn parse_error(line: usize, message: impl Into<String>) -> ProgramError {
    ProgramError::Parse { line, message: message.into() }
}

fn parse_register(token: &str) -> Option<usize> {
    token.strip_prefix("r[")?.strip_suffix(']')?.parse().ok()
}

fn parse_operand(token: &str) -> Option<Operand> {
    if let Some(r) = parse_register(token) {
        return Some(Operand::Register(r));
    }
    if let Some(d) = token.strip_prefix('x') {
        let d: usize = d.parse().ok()?;
        return (d >= 1).then(|| Operand::Input(d - 1));
    }
    token.parse::<f64>().ok().map(Operand::Constant)
}

fn parse_tag(comment: &str) -> Option<ProductionId> {
    let inner = comment.trim().strip_prefix("prod")?.trim().strip_prefix('(')?.strip_suffix(')')?;
    let (rule, production) = inner.split_once(',')?;
    Some(ProductionId { rule: rule.trim().parse().ok()?, production: production.trim().parse().ok()? })
}

fn parse_instruction(line_no: usize, line: &str) -> Result<Instruction, ProgramError> {
    let (body, comment) = match line.split_once('#') {
        Some((body, comment)) => (body, Some(comment)),
        None => (line, None),
    };
    let body = match body.split_once(':') {
        Some((index, rest)) if index.trim().parse::<usize>().is_ok() => rest,
        _ => body,
    };
    let (lhs, rhs) = body.split_once('=').ok_or_else(|| parse_error(line_no, "expected `r[k] = ...`"))?;
    let dest = parse_register(lhs.trim()).ok_or_else(|| parse_error(line_no, "bad destination register"))?;
    let operand = |token: &str| parse_operand(token).ok_or_else(|| parse_error(line_no, format!("bad operand `{token}`")));

    let tokens: Vec<&str> = rhs.split_whitespace().collect();
    let mut instruction = match tokens.as_slice() {
        [a, op, b] => {
            let op = Op::from_binary_symbol(op).ok_or_else(|| parse_error(line_no, format!("unknown operator `{op}`")))?;
            Instruction::binary(dest, op, operand(a)?, operand(b)?)
        }
        [single] => match single.split_once('(') {
            Some((name, rest)) if !name.is_empty() => {
                let op = Op::from_function_name(name)
                    .ok_or_else(|| parse_error(line_no, format!("unknown function `{name}`")))?;
                let arg = rest.strip_suffix(')').ok_or_else(|| parse_error(line_no, "unclosed `(`"))?;
                Instruction::unary(dest, op, operand(arg)?)
            }
            _ => Instruction::load(dest, operand(single)?),
        },
        _ => return Err(parse_error(line_no, "unrecognised instruction form")),
    };
    if let Some(comment) = comment {
        instruction.production = parse_tag(comment);
    }
    Ok(instruction)
}

impl FromStr for Program {
    type Err = ProgramError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut register_count = None;
        let mut instructions = Vec::new();
        for (i, raw) in s.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(n) = comment.trim().strip_prefix("registers:") {
                    let n = n.trim().parse().map_err(|_| parse_error(line_no, "bad register count"))?;
                    register_count = Some(n);
                }
                continue;
            }
            instructions.push(parse_instruction(line_no, line)?);
        }
        let register_count = register_count.unwrap_or_else(|| {
            instructions
                .iter()
                .flat_map(|i| std::iter::once(i.dest).chain(i.sources()))
                .max()
                .map_or(1, |r| r + 1)
        });
        Program::new(instructions, register_count)
    }
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::square_plus_x;
    use super::*;

    #[test]
    fn listing_format() {
        let text = square_plus_x().to_string();
        assert_eq!(
            text,
            "# registers: 5\n0: r[1] = x1 * 1\n1: r[2] = x1 * r[1]\n2: r[0] = r[2] + 3\n3: r[4] = r[2] + r[1]\n"
        );
        assert_eq!(text.parse::<Program>().unwrap(), square_plus_x());
    }

    #[test]
    fn tags_and_functions_parse() {
        let p: Program = "0: r[0] = x2  # prod (4,1)\n1: r[0] = r[0]  # prod (2,2)\n2: r[0] = ln(r[0])\n3: r[1] = -2.5\n"
            .parse()
            .unwrap();
        assert_eq!(p.register_count(), 2);
        assert_eq!(p.instructions()[0].args, vec![Operand::Input(1)]);
        assert_eq!(p.instructions()[0].production, Some(ProductionId { rule: 4, production: 1 }));
        assert_eq!(p.instructions()[1].op, Op::Identity);
        assert_eq!(p.instructions()[2].op, Op::Ln);
        assert_eq!(p.instructions()[3].args, vec![Operand::Constant(-2.5)]);
        assert_eq!(p.to_string().parse::<Program>().unwrap(), p);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = "r[0] = x1\nr[0] = r[0] % 2\n".parse::<Program>().unwrap_err();
        assert!(matches!(err, ProgramError::Parse { line: 2, .. }), "{err}");
        let err = "r[0] = foo(x1)".parse::<Program>().unwrap_err();
        assert!(matches!(err, ProgramError::Parse { line: 1, .. }));
        assert!(matches!("# registers: 1\nr[3] = 1".parse::<Program>(), Err(ProgramError::RegisterOutOfRange { .. })));
    }
}
