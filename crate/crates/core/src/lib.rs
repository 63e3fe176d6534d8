//! Grammar-based linear genetic programming for symbolic regression.
//!
//! Register-machine programs ([`program`]) are sampled from a stochastic
//! context-free grammar ([`scfg`]) whose production probabilities are
//! learned from the best programs of each generation. [`evolution`] holds
//! that algorithm, the effective-mutation baseline built on [`variation`]
//! and two hybrids. [`benchmarks`] generates the regression datasets and
//! [`analysis`] summarises and compares runs.

pub mod program;
pub mod scfg;
pub mod variation;
pub mod benchmarks;
pub mod evolution;
pub mod analysis;

// The guide's code listings run as doctests.
#[cfg(doctest)]
pub mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/programs.md")]
    pub mod programs {}
    #[doc = include_str!("../../../book/src/grammars.md")]
    pub mod grammars {}
    #[doc = include_str!("../../../book/src/learning.md")]
    pub mod learning {}
    #[doc = include_str!("../../../book/src/mutation.md")]
    pub mod mutation {}
    #[doc = include_str!("../../../book/src/algorithms.md")]
    pub mod algorithms {}
    #[doc = include_str!("../../../book/src/benchmarks.md")]
    pub mod benchmarks {}
    #[doc = include_str!("../../../book/src/statistics.md")]
    pub mod statistics {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub mod experiments {}
}
