use serde::{Deserialize, Serialize};

use super::Program;

/// Effective and total instruction counts of a program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CodeSize {
    pub effective: usize,
    pub total: usize,
}

impl CodeSize {
    /// Share of effective instructions, in percent.
    pub fn effective_percentage(self) -> f64 {
        100.0 * self.effective as f64 / self.total as f64
    }
}

impl Program {
    /// Marks the instructions that contribute to the output register.
    ///
    /// Backward liveness pass: the final instruction is effective; an earlier
    /// instruction is effective iff its destination is live at that point,
    /// in which case the destination is killed and its sources become live.
    pub fn effective_mask(&self) -> Vec<bool> {
        let mut live = vec![false; self.register_count];
        let mut mask = vec![false; self.instructions.len()];
        live[self.output_register()] = true;
        for (i, instruction) in self.instructions.iter().enumerate().rev() {
            if !live[instruction.dest] {
                continue;
            }
            mask[i] = true;
            live[instruction.dest] = false;
            for source in instruction.sources() {
                live[source] = true;
            }
        }
        mask
    }

    pub fn code_size(&self) -> CodeSize {
        CodeSize {
            effective: self.effective_mask().into_iter().filter(|&e| e).count(),
            total: self.instructions.len(),
        }
    }

    /// Registers whose value at position `pos` (before instruction `pos`
    /// executes) is read by effective code. `pos == len()` yields only the
    /// output register.
    pub fn live_registers_at(&self, pos: usize) -> Vec<bool> {
        let mut live = vec![false; self.register_count];
        live[self.output_register()] = true;
        for instruction in self.instructions[pos..].iter().rev() {
            if !live[instruction.dest] {
                continue;
            }
            live[instruction.dest] = false;
            for source in instruction.sources() {
                live[source] = true;
            }
        }
        live
    }

    /// The program with its non-effective instructions removed. Output is
    /// unchanged for every input.
    pub fn without_introns(&self) -> Program {
        let mask = self.effective_mask();
        let instructions = self
            .instructions
            .iter()
            .zip(mask)
            .filter(|(_, effective)| *effective)
            .map(|(i, _)| i.clone())
            .collect();
        Program { instructions, register_count: self.register_count, input_arity: self.input_arity }
    }
}
