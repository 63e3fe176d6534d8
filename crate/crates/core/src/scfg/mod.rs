//! Stochastic context-free grammars over register-machine programs.
//!
//! A [`Grammar`] is an ordered list of [`Rule`]s, each carrying a probability
//! vector over its [`Production`]s. The first rule is the start symbol.
//! Programs are sampled from a grammar by a leftmost derivation that emits
//! one instruction per derivation step (see [`Sampler`]); every emitted
//! instruction remembers its [`ProductionId`], so usage can be counted back
//! ([`usage_proportions`]) and the probabilities moved towards it
//! ([`update_probabilities`]).

mod parse;
mod sample;
mod update;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::program::Op;

pub use parse::parse_grammar;
pub use sample::{
    Chooser, RngChooser, SampleError, Sampler, SamplerBudget, ScriptedChooser, MAX_SAMPLE_RETRIES,
};
pub use sample::emits;
pub use update::{update_probabilities, usage_proportions, ProportionTable};

/// Tolerance on the sum of a probability vector.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Which production of which rule derived an instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProductionId {
    pub rule: usize,
    pub production: usize,
}

impl ProductionId {
    pub fn new(rule: usize, production: usize) -> Self {
        ProductionId { rule, production }
    }
}

impl fmt::Display for ProductionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.rule, self.production)
    }
}

/// Right-hand side of a rule. Non-terminals are referenced by rule index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Production {
    /// `A op B`; `A` is derived into the current register, `B` into the next.
    Binary { left: usize, op: Op, right: usize },
    /// `f(A)`
    Unary { func: Op, arg: usize },
    /// `(A)`
    Bracket(usize),
    /// `A`
    PassThrough(usize),
    Constant(f64),
    /// Zero-based input dimension (`x1` is `Input(0)`).
    Input(usize),
}

impl Production {
    /// Non-terminals on the right-hand side, in derivation order.
    pub fn nonterminals(&self) -> Vec<usize> {
        match *self {
            Production::Binary { left, right, .. } => vec![left, right],
            Production::Unary { arg, .. } => vec![arg],
            Production::Bracket(inner) | Production::PassThrough(inner) => vec![inner],
            Production::Constant(_) | Production::Input(_) => vec![],
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, Production::Constant(_) | Production::Input(_))
    }

    /// Productions that emit an identity instruction.
    pub fn passes_through(&self) -> Option<usize> {
        match *self {
            Production::Bracket(inner) | Production::PassThrough(inner) => Some(inner),
            _ => None,
        }
    }

    /// Productions masked out when the register or instruction budget runs
    /// low: binary splits and bracketed recursion.
    pub fn is_expanding(&self) -> bool {
        matches!(self, Production::Binary { .. } | Production::Bracket(_))
    }

    fn write_dsl(&self, grammar: &Grammar, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = |i: usize| grammar.rules[i].name.as_str();
        match *self {
            Production::Binary { left, op, right } => write!(f, "{} {} {}", name(left), op.symbol(), name(right)),
            Production::Unary { func, arg } => write!(f, "{}({})", func.symbol(), name(arg)),
            Production::Bracket(inner) => write!(f, "({})", name(inner)),
            Production::PassThrough(inner) => f.write_str(name(inner)),
            Production::Constant(c) => write!(f, "{c}"),
            Production::Input(d) => write!(f, "x{}", d + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub name: String,
    pub productions: Vec<Production>,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GrammarError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("rule `{rule}`: {message}")]
    Invalid { rule: String, message: String },
    #[error("grammar has no input rule (a rule whose productions are all `xN` terminals)")]
    NoInputRule,
    #[error("instruction tag {tag} does not exist in the grammar")]
    TagOutOfRange { tag: ProductionId },
    #[error("proportion table shape does not match the grammar")]
    ShapeMismatch,
    #[error("learning rate {0} outside [0, 1]")]
    LearningRate(f64),
}

/// An SCFG: terminals, non-terminals, start symbol, rules and probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grammar {
    rules: Vec<Rule>,
    start: usize,
}

/// Terminal symbols as they appear in the DSL.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Terminal {
    Operator(&'static str),
    Constant(String),
    Input(usize),
}

impl Grammar {
    /// Builds a grammar after checking every invariant: probability vectors
    /// match their productions, are non-negative and sum to one, and every
    /// referenced non-terminal exists.
    pub fn new(rules: Vec<Rule>, start: usize) -> Result<Self, GrammarError> {
        let invalid = |rule: &Rule, message: String| GrammarError::Invalid { rule: rule.name.clone(), message };
        if start >= rules.len() {
            return Err(GrammarError::Invalid { rule: String::new(), message: format!("start rule {start} does not exist") });
        }
        for rule in &rules {
            if rule.productions.is_empty() {
                return Err(invalid(rule, "no productions".into()));
            }
            if rule.productions.len() != rule.probs.len() {
                return Err(invalid(
                    rule,
                    format!("{} productions but {} probabilities", rule.productions.len(), rule.probs.len()),
                ));
            }
            if rule.probs.iter().any(|&p| !p.is_finite() || p < 0.0) {
                return Err(invalid(rule, "probabilities must be finite and non-negative".into()));
            }
            let sum: f64 = rule.probs.iter().sum();
            if (sum - 1.0).abs() > SUM_TOLERANCE {
                return Err(invalid(rule, format!("probabilities sum to {sum}")));
            }
            for production in &rule.productions {
                if production.nonterminals().iter().any(|&nt| nt >= rules.len()) {
                    return Err(invalid(rule, "reference to a missing rule".into()));
                }
                match production {
                    Production::Binary { op, .. } if op.arity() != 2 => {
                        return Err(invalid(rule, format!("`{op}` is not a binary operator")))
                    }
                    Production::Unary { func, .. } if func.class() != crate::program::OpClass::Unary => {
                        return Err(invalid(rule, format!("`{func}` is not a function")))
                    }
                    _ => {}
                }
            }
        }
        Ok(Grammar { rules, start })
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule(&self, index: usize) -> &Rule {
        &self.rules[index]
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn rule_index(&self, name: &str) -> Option<usize> {
        self.rules.iter().position(|r| r.name == name)
    }

    pub fn production(&self, id: ProductionId) -> Option<&Production> {
        self.rules.get(id.rule)?.productions.get(id.production)
    }

    /// Probability vectors, one per rule.
    pub fn probabilities(&self) -> Vec<Vec<f64>> {
        self.rules.iter().map(|r| r.probs.clone()).collect()
    }

    pub fn nonterminals(&self) -> Vec<&str> {
        self.rules.iter().map(|r| r.name.as_str()).collect()
    }

    pub fn terminals(&self) -> BTreeSet<Terminal> {
        let mut set = BTreeSet::new();
        for production in self.rules.iter().flat_map(|r| &r.productions) {
            match *production {
                Production::Binary { op, .. } => {
                    set.insert(Terminal::Operator(op.symbol()));
                }
                Production::Unary { func, .. } => {
                    set.insert(Terminal::Operator(func.symbol()));
                }
                Production::Bracket(_) => {
                    set.insert(Terminal::Operator("("));
                    set.insert(Terminal::Operator(")"));
                }
                Production::PassThrough(_) => {}
                Production::Constant(c) => {
                    set.insert(Terminal::Constant(c.to_string()));
                }
                Production::Input(d) => {
                    set.insert(Terminal::Input(d));
                }
            }
        }
        set
    }

    /// Binary and unary operators appearing in any production.
    pub fn operators(&self) -> Vec<Op> {
        let mut ops = Vec::new();
        for production in self.rules.iter().flat_map(|r| &r.productions) {
            let op = match *production {
                Production::Binary { op, .. } => op,
                Production::Unary { func, .. } => func,
                _ => continue,
            };
            if !ops.contains(&op) {
                ops.push(op);
            }
        }
        ops
    }

    /// Constant terminals, in grammar order.
    pub fn constants(&self) -> Vec<f64> {
        let mut constants = Vec::new();
        for production in self.rules.iter().flat_map(|r| &r.productions) {
            if let Production::Constant(c) = *production {
                if !constants.contains(&c) {
                    constants.push(c);
                }
            }
        }
        constants
    }

    fn input_rule(&self) -> Option<usize> {
        self.rules.iter().position(|r| r.productions.iter().all(|p| matches!(p, Production::Input(_))))
    }

    /// Number of inputs the grammar can reference.
    pub fn input_dimension(&self) -> usize {
        self.rules
            .iter()
            .flat_map(|r| &r.productions)
            .filter_map(|p| match p {
                Production::Input(d) => Some(d + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// Replaces the input rule with `x1 | ... | xD` under a uniform
    /// distribution.
    pub fn with_inputs(&self, dimension: usize) -> Result<Grammar, GrammarError> {
        let index = self.input_rule().ok_or(GrammarError::NoInputRule)?;
        let mut rules = self.rules.clone();
        rules[index].productions = (0..dimension).map(Production::Input).collect();
        rules[index].probs = vec![1.0 / dimension as f64; dimension];
        Grammar::new(rules, self.start)
    }

    /// The grammar with every probability vector replaced.
    pub fn with_probabilities(&self, probs: Vec<Vec<f64>>) -> Result<Grammar, GrammarError> {
        if probs.len() != self.rules.len() {
            return Err(GrammarError::ShapeMismatch);
        }
        let mut rules = self.rules.clone();
        for (rule, p) in rules.iter_mut().zip(probs) {
            rule.probs = p;
        }
        Grammar::new(rules, self.start)
    }

    /// Fewest instructions needed to fully derive each rule;
    /// `usize::MAX` for rules that cannot terminate.
    pub fn min_derivation_costs(&self) -> Vec<usize> {
        let mut cost = vec![usize::MAX; self.rules.len()];
        loop {
            let mut changed = false;
            for (i, rule) in self.rules.iter().enumerate() {
                for production in &rule.productions {
                    let c = self.production_cost(production, &cost);
                    if c < cost[i] {
                        cost[i] = c;
                        changed = true;
                    }
                }
            }
            if !changed {
                return cost;
            }
        }
    }

    pub(crate) fn production_cost(&self, production: &Production, rule_costs: &[usize]) -> usize {
        production
            .nonterminals()
            .iter()
            .try_fold(1usize, |acc, &nt| acc.checked_add(rule_costs[nt]).filter(|&c| c < usize::MAX))
            .unwrap_or(usize::MAX)
    }

    /// The polynomial grammar: `+ - * /`, constants 1..9 and one input.
    pub fn polynomial() -> Grammar {
        parse_grammar(POLYNOMIAL_GRAMMAR).expect("bundled grammar parses")
    }

    /// The polynomial grammar extended with `sin cos exp ln`.
    pub fn extended() -> Grammar {
        parse_grammar(EXTENDED_GRAMMAR).expect("bundled grammar parses")
    }

    pub fn builtin(name: &str) -> Option<Grammar> {
        match name {
            "polynomial" => Some(Grammar::polynomial()),
            "extended" => Some(Grammar::extended()),
            _ => None,
        }
    }
}

pub const POLYNOMIAL_GRAMMAR: &str = include_str!("../../grammars/polynomial.scfg");
pub const EXTENDED_GRAMMAR: &str = include_str!("../../grammars/extended.scfg");

/// Writes the grammar back in DSL form; [`parse_grammar`] reads it again.
impl fmt::Display for Grammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for rule in &self.rules {
            write!(f, "{} :=", rule.name)?;
            for production in &rule.productions {
                f.write_str(" ")?;
                production.write_dsl(self, f)?;
                f.write_str(" |")?;
            }
            f.write_str(" probs")?;
            for p in &rule.probs {
                write!(f, " {p}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
