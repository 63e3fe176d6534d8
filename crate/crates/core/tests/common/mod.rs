//! Oracles shared by the integration tests.
#![allow(dead_code)]

use gblgp::program::{Op, Operand, Program};
use gblgp::scfg::{Grammar, Production};
use gblgp::variation::MutationConfig;

pub fn protected(op: &str, a: f64, b: f64) -> f64 {
    let v = match op {
        "+" => a + b,
        "-" => a - b,
        "*" => a * b,
        "/" => {
            if b.abs() < 1e-9 {
                1.0
            } else {
                a / b
            }
        }
        "sin" => a.sin(),
        "cos" => a.cos(),
        "exp" => a.min(32.0).exp(),
        "ln" => {
            if a.abs() < 1e-9 {
                0.0
            } else {
                a.abs().ln()
            }
        }
        other => panic!("unknown operator {other}"),
    };
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

pub fn all_ops_config() -> MutationConfig {
    let mut operators = Op::BINARY.to_vec();
    operators.extend(Op::UNARY);
    operators.push(Op::Load);
    MutationConfig { operators, inputs: 2, ..MutationConfig::default() }
}

// Forward taint: instruction i matters iff a value it wrote reaches the
// output register.
pub fn taint_oracle(program: &Program) -> Vec<bool> {
    let n = program.len();
    (0..n)
        .map(|i| {
            let mut tainted = vec![false; program.register_count()];
            for (j, instr) in program.instructions().iter().enumerate() {
                let from_sources = instr.args.iter().any(|a| matches!(a, Operand::Register(r) if tainted[*r]));
                tainted[instr.dest] = j == i || (j > i && from_sources);
            }
            tainted[program.output_register()]
        })
        .collect()
}

// Expression tree rebuilt purely from the production tags, which are a
// postorder listing of the derivation.
pub enum Node {
    Leaf(String, f64),
    Input(usize),
    Unary(&'static str, Box<Node>),
    Binary(&'static str, Box<Node>, Box<Node>),
}

pub fn rebuild(program: &Program, grammar: &Grammar) -> Node {
    let mut stack: Vec<(usize, Node)> = Vec::new();
    for instr in program.instructions() {
        let tag = instr.production.expect("sampled instructions are tagged");
        let production = grammar.production(tag).unwrap();
        let node = match *production {
            Production::Binary { left, op, right } => {
                let (r_rule, r) = stack.pop().unwrap();
                let (l_rule, l) = stack.pop().unwrap();
                assert_eq!((l_rule, r_rule), (left, right));
                Node::Binary(op.symbol(), Box::new(l), Box::new(r))
            }
            Production::Unary { func, arg } => {
                let (rule, inner) = stack.pop().unwrap();
                assert_eq!(rule, arg);
                Node::Unary(func.symbol(), Box::new(inner))
            }
            Production::Bracket(inner) | Production::PassThrough(inner) => {
                let (rule, node) = stack.pop().unwrap();
                assert_eq!(rule, inner);
                node
            }
            Production::Constant(c) => Node::Leaf(format!("{c}"), c),
            Production::Input(d) => Node::Input(d),
        };
        stack.push((tag.rule, node));
    }
    assert_eq!(stack.len(), 1);
    let (rule, root) = stack.pop().unwrap();
    assert_eq!(rule, grammar.start());
    root
}

pub fn render(node: &Node) -> (String, bool) {
    match node {
        Node::Leaf(text, c) => (text.clone(), *c < 0.0),
        Node::Input(d) => (format!("x{}", d + 1), false),
        Node::Unary(f, inner) => (format!("{f}({})", render(inner).0), false),
        Node::Binary(op, l, r) => {
            let wrap = |(t, compound): (String, bool)| if compound { format!("({t})") } else { t };
            (format!("{}{op}{}", wrap(render(l)), wrap(render(r))), true)
        }
    }
}

pub fn eval_tree(node: &Node, x: &[f64]) -> f64 {
    match node {
        Node::Leaf(_, c) => *c,
        Node::Input(d) => x[*d],
        Node::Unary(f, inner) => protected(f, eval_tree(inner, x), 0.0),
        Node::Binary(op, l, r) => protected(op, eval_tree(l, x), eval_tree(r, x)),
    }
}

pub fn enumerate_p(a: &[f64], b: &[f64]) -> f64 {
    let combined: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = combined.len();
    let rank = |v: f64| {
        let below = combined.iter().filter(|&&w| w < v).count() as f64;
        let equal = combined.iter().filter(|&&w| w == v).count() as f64;
        below + (equal + 1.0) / 2.0
    };
    let ranks: Vec<f64> = combined.iter().map(|&v| rank(v)).collect();
    let mean = a.len() as f64 * (n as f64 + 1.0) / 2.0;
    let observed = (ranks[..a.len()].iter().sum::<f64>() - mean).abs();
    let (mut extreme, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != a.len() {
            continue;
        }
        total += 1;
        let sum: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if (sum - mean).abs() >= observed - 1e-9 {
            extreme += 1;
        }
    }
    extreme as f64 / total as f64
}

