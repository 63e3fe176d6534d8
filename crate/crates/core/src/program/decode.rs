use super::{Op, OpClass, Operand, Program};

/// Returned by [`Program::decode_expression_bounded`] when the expanded
/// expression would exceed the length limit. Register reuse can make the
/// infix form exponentially longer than the program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("decoded expression exceeds {limit} characters")]
pub struct ExpressionTooLarge {
    pub limit: usize,
}

/// Infix text plus whether it needs brackets when used as a binary operand.
#[derive(Clone)]
pub(crate) struct Rendered {
    pub text: String,
    pub compound: bool,
}

impl Rendered {
    pub fn atom(text: String) -> Self {
        Rendered { text, compound: false }
    }

    fn wrapped(&self) -> String {
        if self.compound {
            format!("({})", self.text)
        } else {
            self.text.clone()
        }
    }
}

pub(crate) fn render_operand(operand: Operand, registers: &[Rendered]) -> Rendered {
    match operand {
        Operand::Register(r) => registers[r].clone(),
        Operand::Constant(c) => Rendered { text: format!("{c}"), compound: c < 0.0 },
        Operand::Input(d) => Rendered::atom(format!("x{}", d + 1)),
    }
}

/// Renders `op` applied to already-rendered operands. Copies return their
/// operand unchanged.
pub(crate) fn render_op(op: Op, a: &Rendered, b: Option<&Rendered>) -> Rendered {
    match op.class() {
        OpClass::Binary => {
            let b = b.expect("binary operator needs two operands");
            Rendered { text: format!("{}{}{}", a.wrapped(), op.symbol(), b.wrapped()), compound: true }
        }
        OpClass::Unary => Rendered::atom(format!("{}({})", op.symbol(), a.text)),
        OpClass::Load | OpClass::Identity => a.clone(),
    }
}

impl Program {
    /// Back-substitutes the effective instructions into a single infix
    /// expression over `x1..xD`.
    pub fn decode_expression(&self) -> String {
        self.decode_expression_bounded(usize::MAX).expect("unbounded decode cannot fail")
    }

    pub fn decode_expression_bounded(&self, limit: usize) -> Result<String, ExpressionTooLarge> {
        let mut registers = vec![Rendered::atom("0".to_string()); self.register_count];
        for (instruction, effective) in self.instructions.iter().zip(self.effective_mask()) {
            if !effective {
                continue;
            }
            let a = render_operand(instruction.args[0], &registers);
            let b = instruction.args.get(1).map(|&o| render_operand(o, &registers));
            let value = render_op(instruction.op, &a, b.as_ref());
            if value.text.len() > limit {
                return Err(ExpressionTooLarge { limit });
            }
            registers[instruction.dest] = value;
        }
        Ok(registers[self.output_register()].text.clone())
    }
}
