//! Grammar DSL, one rule per line:
//!
//! ```text
//! # comment
//! Exp := Exp + Term | Exp - Term | Term | probs 0.5 0.25 0.25
//! ```
//!
//! Production forms: `A op B` (op one of `+ - * /`), `f(A)` (f one of
//! `sin cos exp ln`), `(A)`, `A`, a numeric constant, or an input `xN`.
//! Probabilities are renormalised to sum to one.

use std::collections::HashMap;

use super::{Grammar, GrammarError, Production, Rule};
use crate::program::Op;

struct Line<'a> {
    number: usize,
    lhs: &'a str,
    alternatives: Vec<&'a str>,
    probs: &'a str,
}

fn error(line: usize, message: impl Into<String>) -> GrammarError {
    GrammarError::Parse { line, message: message.into() }
}

fn is_identifier(token: &str) -> bool {
    let mut chars = token.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn split_line(number: usize, text: &str) -> Result<Option<Line<'_>>, GrammarError> {
    let text = text.split('#').next().unwrap_or("").trim();
    if text.is_empty() {
        return Ok(None);
    }
    let (lhs, rhs) = text.split_once(":=").ok_or_else(|| error(number, "expected `LHS := ...`"))?;
    let lhs = lhs.trim();
    if !is_identifier(lhs) {
        return Err(error(number, format!("`{lhs}` is not a valid rule name")));
    }
    let mut parts: Vec<&str> = rhs.split('|').map(str::trim).collect();
    let probs = parts
        .pop()
        .and_then(|last| last.strip_prefix("probs"))
        .ok_or_else(|| error(number, "rule must end with `| probs p1 p2 ...`"))?;
    if parts.iter().any(|p| p.is_empty()) {
        return Err(error(number, "empty production"));
    }
    if parts.is_empty() {
        return Err(error(number, format!("rule `{lhs}` has no productions")));
    }
    Ok(Some(Line { number, lhs, alternatives: parts, probs }))
}

fn parse_production(line: usize, text: &str, names: &HashMap<&str, usize>) -> Result<Production, GrammarError> {
    let nonterminal = |token: &str| {
        names.get(token).copied().ok_or_else(|| {
            if is_identifier(token) {
                error(line, format!("unknown non-terminal `{token}`"))
            } else {
                error(line, format!("`{token}` is not a non-terminal"))
            }
        })
    };
    let tokens: Vec<&str> = text.split_whitespace().collect();
    match tokens.as_slice() {
        [left, op, right] => {
            let op = Op::from_binary_symbol(op).ok_or_else(|| error(line, format!("unknown operator `{op}`")))?;
            Ok(Production::Binary { left: nonterminal(left)?, op, right: nonterminal(right)? })
        }
        [token] => {
            if let Some(inner) = token.strip_prefix('(').and_then(|t| t.strip_suffix(')')) {
                return Ok(Production::Bracket(nonterminal(inner)?));
            }
            if let Some((name, rest)) = token.split_once('(') {
                let func = Op::from_function_name(name).ok_or_else(|| error(line, format!("unknown function `{name}`")))?;
                let arg = rest.strip_suffix(')').ok_or_else(|| error(line, format!("unclosed `(` in `{token}`")))?;
                return Ok(Production::Unary { func, arg: nonterminal(arg)? });
            }
            if let Some(&index) = names.get(token) {
                return Ok(Production::PassThrough(index));
            }
            if let Some(d) = token.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()) {
                if d == 0 {
                    return Err(error(line, "inputs are numbered from x1"));
                }
                return Ok(Production::Input(d - 1));
            }
            if let Ok(c) = token.parse::<f64>() {
                if c.is_finite() {
                    return Ok(Production::Constant(c));
                }
            }
            nonterminal(token).map(Production::PassThrough)
        }
        _ => Err(error(line, format!("unsupported production `{text}`"))),
    }
}

fn parse_probs(line: usize, text: &str, expected: usize) -> Result<Vec<f64>, GrammarError> {
    let probs = text
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| error(line, format!("bad probability `{t}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    if probs.len() != expected {
        return Err(error(line, format!("{expected} productions but {} probabilities", probs.len())));
    }
    if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(error(line, format!("negative or invalid probability {p}")));
    }
    let sum: f64 = probs.iter().sum();
    if sum <= 0.0 {
        return Err(error(line, "probabilities sum to zero"));
    }
    if (sum - 1.0).abs() <= 1e-12 {
        return Ok(probs);
    }
    Ok(probs.into_iter().map(|p| p / sum).collect())
}

/// Parses the grammar DSL. Rules keep file order; the first is the start
/// symbol.
pub fn parse_grammar(text: &str) -> Result<Grammar, GrammarError> {
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if let Some(line) = split_line(i + 1, raw)? {
            lines.push(line);
        }
    }
    if lines.is_empty() {
        return Err(error(1, "grammar has no rules"));
    }

    let mut names = HashMap::new();
    for (index, line) in lines.iter().enumerate() {
        if names.insert(line.lhs, index).is_some() {
            return Err(error(line.number, format!("rule `{}` defined twice", line.lhs)));
        }
    }

    let mut rules = Vec::with_capacity(lines.len());
    for line in &lines {
        let productions = line
            .alternatives
            .iter()
            .map(|alt| parse_production(line.number, alt, &names))
            .collect::<Result<Vec<_>, _>>()?;
        let probs = parse_probs(line.number, line.probs, productions.len())?;
        rules.push(Rule { name: line.lhs.to_string(), productions, probs });
    }
    Grammar::new(rules, 0)
}
