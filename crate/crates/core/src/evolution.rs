//! The four search drivers: the mutation-only baseline (`effmut`), grammar
//! resampling (`gblgp`) and the two hybrids.
//!
//! A generation of the steady-state algorithms is
//! [`AlgorithmConfig::steps`] tournament steps. Fitness is the train MAE;
//! lower is better.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::index;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::benchmarks::Dataset;
use crate::program::{Program, WORST_FITNESS};
use crate::scfg::{
    update_probabilities, usage_proportions, Grammar, GrammarError, SampleError, Sampler, SamplerBudget,
};
use crate::variation::{mutate, random_program, MutationConfig, MutationConfigError};

/// Longest decoded expression kept in a [`RunRecord`].
pub const EXPRESSION_LIMIT: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Effmut,
    Gblgp,
    Hybrid1,
    Hybrid2,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Effmut, Algorithm::Gblgp, Algorithm::Hybrid1, Algorithm::Hybrid2];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Effmut => "effmut",
            Algorithm::Gblgp => "gblgp",
            Algorithm::Hybrid1 => "hybrid1",
            Algorithm::Hybrid2 => "hybrid2",
        }
    }

    pub fn uses_grammar(self) -> bool {
        self != Algorithm::Effmut
    }

    /// Register count of the reference configuration.
    pub fn default_registers(self) -> usize {
        if self.uses_grammar() {
            13
        } else {
            8
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = EvolutionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| EvolutionError::Config(format!("unknown algorithm `{s}`")))
    }
}

/// Which MAE decides success.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuccessSet {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmConfig {
    pub algorithm: Algorithm,
    pub population_size: usize,
    pub generations: usize,
    pub elite: usize,
    pub tournament_size: usize,
    pub registers: usize,
    /// Individuals the grammar is learned from.
    pub top_n: usize,
    /// Hybrid v1 resamples on generations divisible by this.
    pub resample_period: usize,
    pub alpha: f64,
    /// Size of effmut's random initial programs.
    pub initial_size: usize,
    /// Sampler instruction budget.
    pub max_instructions: usize,
    /// Tournament steps per steady-state generation; `None` is half the
    /// population, rounded up.
    pub steps_per_generation: Option<usize>,
    pub success_threshold: f64,
    pub success_set: SuccessSet,
    pub mutation: MutationConfig,
    pub seed: u64,
}

impl AlgorithmConfig {
    /// The reference parameter set for `algorithm`.
    pub fn new(algorithm: Algorithm) -> Self {
        AlgorithmConfig {
            algorithm,
            population_size: 100,
            generations: 100,
            elite: 1,
            tournament_size: 2,
            registers: algorithm.default_registers(),
            top_n: 3,
            resample_period: 2,
            alpha: 0.1,
            initial_size: 20,
            max_instructions: 200,
            steps_per_generation: None,
            success_threshold: 1e-5,
            success_set: SuccessSet::Test,
            mutation: MutationConfig::default(),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn steps(&self) -> usize {
        self.steps_per_generation.unwrap_or(self.population_size.div_ceil(2))
    }

    pub fn validate(&self) -> Result<(), EvolutionError> {
        let fail = |m: String| Err(EvolutionError::Config(m));
        if self.population_size == 0 || self.generations == 0 || self.tournament_size == 0 {
            return fail("population size, generations and tournament size must be positive".into());
        }
        if self.elite == 0 || self.elite >= self.population_size {
            return fail(format!("elite {} must be in [1, population size)", self.elite));
        }
        if self.tournament_size < 2 || 2 * self.tournament_size > self.population_size {
            return fail(format!(
                "tournament size {} needs 2 <= size and two disjoint tournaments in a population of {}",
                self.tournament_size, self.population_size
            ));
        }
        if self.top_n == 0 || self.top_n > self.population_size {
            return fail(format!("N = {} must be in [1, population size]", self.top_n));
        }
        if self.resample_period == 0 {
            return fail("s must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return fail(format!("alpha = {} outside [0, 1]", self.alpha));
        }
        if self.registers == 0 || (self.algorithm.uses_grammar() && self.registers < 2) {
            return fail(format!("{} registers is too few", self.registers));
        }
        if self.initial_size == 0 || self.max_instructions == 0 || self.steps() == 0 {
            return fail("sizes and steps must be positive".into());
        }
        self.mutation.validate()?;
        Ok(())
    }
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        AlgorithmConfig::new(Algorithm::Gblgp)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvolutionError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("grammar has {grammar} inputs but the data has {data}")]
    Dimension { grammar: usize, data: usize },
    #[error("train and test data differ in width ({train} vs {test})")]
    DataShape { train: usize, test: usize },
    #[error("{0} needs a grammar")]
    MissingGrammar(Algorithm),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Mutation(#[from] MutationConfigError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub program: Program,
    pub fitness: f64,
}

impl Individual {
    pub fn evaluate(program: Program, data: &Dataset) -> Self {
        let fitness = fitness(&program, data);
        Individual { program, fitness }
    }
}

/// MAE on `data`; [`WORST_FITNESS`] when it cannot be computed.
pub fn fitness(program: &Program, data: &Dataset) -> f64 {
    program.mean_absolute_error(data.cases()).unwrap_or(WORST_FITNESS)
}

/// Index of the fittest individual, ties to the lower index.
pub fn best_index(population: &[Individual]) -> usize {
    ranked(population)[0]
}

/// Indices sorted by fitness, ties to the lower index.
pub fn ranked(population: &[Individual]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..population.len()).collect();
    order.sort_by(|&a, &b| population[a].fitness.total_cmp(&population[b].fitness));
    order
}

/// Winner and loser among the given contestants: lowest fitness wins, the
/// loser is the highest-fitness remaining contestant, ties to the lower index.
fn decide(fitnesses: &[f64], contestants: &[usize]) -> (usize, usize) {
    let mut sorted = contestants.to_vec();
    sorted.sort_unstable();
    let winner = *sorted
        .iter()
        .min_by(|&&a, &&b| fitnesses[a].total_cmp(&fitnesses[b]))
        .expect("non-empty tournament");
    let loser = *sorted
        .iter()
        .filter(|&&i| i != winner)
        .rev()
        .max_by(|&&a, &&b| fitnesses[a].total_cmp(&fitnesses[b]))
        .unwrap_or(&winner);
    (winner, loser)
}

/// Samples `size` distinct individuals and returns `(winner, loser)`.
pub fn tournament<R: Rng + ?Sized>(
    fitnesses: &[f64],
    size: usize,
    rng: &mut R,
) -> Result<(usize, usize), EvolutionError> {
    if fitnesses.is_empty() || size == 0 || size > fitnesses.len() {
        return Err(EvolutionError::Config(format!(
            "tournament of {size} over {} individuals",
            fitnesses.len()
        )));
    }
    let contestants = index::sample(rng, fitnesses.len(), size).into_vec();
    Ok(decide(fitnesses, &contestants))
}

/// Everything a generation step reads besides the population and grammar.
#[derive(Debug, Clone, Copy)]
pub struct Context<'a> {
    pub config: &'a AlgorithmConfig,
    pub mutation: &'a MutationConfig,
    pub train: &'a Dataset,
}

impl Context<'_> {
    fn budget(&self) -> SamplerBudget {
        SamplerBudget { register_count: self.config.registers, max_instructions: self.config.max_instructions }
    }
}

/// One steady-state generation. Each step runs two disjoint tournaments,
/// copies each winner over its loser and mutates the original winner.
/// Since the best individual wins every tournament it enters, it is never
/// overwritten. With a grammar, mutated instructions are re-tagged.
pub fn effmut_generation<R: Rng + ?Sized>(
    population: &mut [Individual],
    grammar: Option<&Grammar>,
    ctx: &Context<'_>,
    rng: &mut R,
) {
    let size = ctx.config.tournament_size;
    let mut fitnesses: Vec<f64> = population.iter().map(|i| i.fitness).collect();
    let protected: Vec<usize> = ranked(population).into_iter().take(ctx.config.elite).collect();
    for _ in 0..ctx.config.steps() {
        let drawn = index::sample(rng, population.len(), 2 * size).into_vec();
        for contestants in drawn.chunks(size) {
            let (winner, loser) = decide(&fitnesses, contestants);
            if winner == loser || protected.contains(&loser) {
                continue;
            }
            population[loser] = population[winner].clone();
            fitnesses[loser] = fitnesses[winner];
            let child = mutate(&population[winner].program, ctx.mutation, grammar, rng);
            population[winner] = Individual::evaluate(child, ctx.train);
            fitnesses[winner] = population[winner].fitness;
        }
    }
}

fn learn(population: &[Individual], grammar: &Grammar, ctx: &Context<'_>) -> Result<Grammar, EvolutionError> {
    let top = ranked(population).into_iter().take(ctx.config.top_n).map(|i| &population[i].program);
    let table = usage_proportions(top, grammar)?;
    Ok(update_probabilities(grammar, &table, ctx.config.alpha)?)
}

fn elites(population: &[Individual], ctx: &Context<'_>, strip_introns: bool) -> Vec<Individual> {
    ranked(population)
        .into_iter()
        .take(ctx.config.elite)
        .map(|i| {
            let mut e = population[i].clone();
            if strip_introns {
                e.program = e.program.without_introns();
            }
            e
        })
        .collect()
}

fn sample_individuals<R: Rng + ?Sized>(
    grammar: &Grammar,
    count: usize,
    ctx: &Context<'_>,
    rng: &mut R,
) -> Result<Vec<Individual>, EvolutionError> {
    let sampler = Sampler::new(grammar, ctx.budget())?;
    Ok((0..count).map(|_| Individual::evaluate(sampler.sample_or_fallback(rng), ctx.train)).collect())
}

/// Learns the grammar from the `N` best individuals and replaces everything
/// but the elite with fresh samples. Returns the updated grammar.
///
/// The elite keeps its behaviour but loses non-effective instructions, so a
/// resampled population is entirely effective code.
pub fn gblgp_generation<R: Rng + ?Sized>(
    population: &mut Vec<Individual>,
    grammar: &Grammar,
    ctx: &Context<'_>,
    rng: &mut R,
) -> Result<Grammar, EvolutionError> {
    let updated = learn(population, grammar, ctx)?;
    let mut next = elites(population, ctx, true);
    let fresh = sample_individuals(&updated, ctx.config.population_size - next.len(), ctx, rng)?;
    next.extend(fresh);
    *population = next;
    Ok(updated)
}

/// Resamples like [`gblgp_generation`] when `generation` is a multiple of the
/// resample period and runs a steady-state generation otherwise.
pub fn hybrid1_generation<R: Rng + ?Sized>(
    population: &mut Vec<Individual>,
    grammar: &Grammar,
    ctx: &Context<'_>,
    generation: usize,
    rng: &mut R,
) -> Result<Grammar, EvolutionError> {
    if is_resample_generation(ctx.config, generation) {
        gblgp_generation(population, grammar, ctx, rng)
    } else {
        effmut_generation(population, Some(grammar), ctx, rng);
        Ok(grammar.clone())
    }
}

pub fn is_resample_generation(config: &AlgorithmConfig, generation: usize) -> bool {
    match config.algorithm {
        Algorithm::Effmut => false,
        Algorithm::Gblgp => true,
        Algorithm::Hybrid1 => generation.is_multiple_of(config.resample_period),
        Algorithm::Hybrid2 => false,
    }
}

/// Learns the grammar, then builds the next population from the elite,
/// half of the remainder (rounded up) sampled fresh, and the rest from
/// tournament rounds that each pass on the winner and a mutant of it.
pub fn hybrid2_generation<R: Rng + ?Sized>(
    population: &mut Vec<Individual>,
    grammar: &Grammar,
    ctx: &Context<'_>,
    rng: &mut R,
) -> Result<Grammar, EvolutionError> {
    let updated = learn(population, grammar, ctx)?;
    let mut next = elites(population, ctx, false);
    let remaining = ctx.config.population_size - next.len();
    let sampled = remaining.div_ceil(2);
    next.extend(sample_individuals(&updated, sampled, ctx, rng)?);

    let fitnesses: Vec<f64> = population.iter().map(|i| i.fitness).collect();
    let mut bred = Vec::with_capacity(remaining - sampled + 1);
    while bred.len() < remaining - sampled {
        let (winner, _) = tournament(&fitnesses, ctx.config.tournament_size, rng)?;
        let parent = &population[winner];
        let child = mutate(&parent.program, ctx.mutation, Some(&updated), rng);
        bred.push(parent.clone());
        bred.push(Individual::evaluate(child, ctx.train));
    }
    bred.truncate(remaining - sampled);
    next.extend(bred);
    *population = next;
    Ok(updated)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationTelemetry {
    pub generation: usize,
    pub best_train_mae: f64,
    pub best_test_mae: f64,
    /// Mean over the population of each program's effective percentage.
    pub mean_effective_percentage: f64,
    pub mean_effective_size: f64,
    pub mean_total_size: f64,
    pub resampled: bool,
    /// Rule probabilities after this generation, for grammar-based runs.
    pub probabilities: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub benchmark: String,
    pub config: AlgorithmConfig,
    /// Initial grammar in DSL form.
    pub grammar: Option<String>,
    pub rule_names: Vec<String>,
    pub best_program: Program,
    pub best_listing: String,
    pub best_expression: String,
    pub train_mae: f64,
    pub test_mae: f64,
    pub success: bool,
    pub effective_size: usize,
    pub total_size: usize,
    pub final_probabilities: Option<Vec<Vec<f64>>>,
    pub telemetry: Vec<GenerationTelemetry>,
    pub wall_clock_seconds: f64,
}

impl RunRecord {
    /// MAE on the split that decides success.
    pub fn success_mae(&self) -> f64 {
        match self.config.success_set {
            SuccessSet::Train => self.train_mae,
            SuccessSet::Test => self.test_mae,
        }
    }

    /// The record with its timing zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> RunRecord {
        RunRecord { wall_clock_seconds: 0.0, ..self.clone() }
    }
}

/// A run in progress, advanced one generation at a time.
#[derive(Debug, Clone)]
pub struct Evolution<'d> {
    config: AlgorithmConfig,
    mutation: MutationConfig,
    initial_grammar: Option<Grammar>,
    grammar: Option<Grammar>,
    train: &'d Dataset,
    test: &'d Dataset,
    population: Vec<Individual>,
    generation: usize,
    rng: ChaCha8Rng,
}

impl<'d> Evolution<'d> {
    /// Validates the setup and builds the initial population. For effmut
    /// a grammar only supplies the operator and constant pool.
    pub fn new(
        config: AlgorithmConfig,
        grammar: Option<&Grammar>,
        train: &'d Dataset,
        test: &'d Dataset,
    ) -> Result<Self, EvolutionError> {
        config.validate()?;
        if train.dimension() != test.dimension() {
            return Err(EvolutionError::DataShape { train: train.dimension(), test: test.dimension() });
        }
        if config.algorithm.uses_grammar() && grammar.is_none() {
            return Err(EvolutionError::MissingGrammar(config.algorithm));
        }
        if let Some(g) = grammar {
            if g.input_dimension() != train.dimension() {
                return Err(EvolutionError::Dimension { grammar: g.input_dimension(), data: train.dimension() });
            }
        }
        let mut mutation = match grammar {
            Some(g) => config.mutation.clone().with_grammar(g),
            None => config.mutation.clone(),
        };
        mutation.inputs = train.dimension();
        mutation.validate()?;

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let population: Vec<Individual> = if config.algorithm.uses_grammar() {
            let g = grammar.expect("checked above");
            let budget = SamplerBudget { register_count: config.registers, max_instructions: config.max_instructions };
            let sampler = Sampler::new(g, budget)?;
            (0..config.population_size)
                .map(|_| Individual::evaluate(sampler.sample_or_fallback(&mut rng), train))
                .collect()
        } else {
            (0..config.population_size)
                .map(|_| {
                    let program = random_program(&mutation, config.registers, config.initial_size, &mut rng);
                    Individual::evaluate(program, train)
                })
                .collect()
        };
        let grammar = grammar.filter(|_| config.algorithm.uses_grammar()).cloned();
        Ok(Evolution {
            config,
            mutation,
            initial_grammar: grammar.clone(),
            grammar,
            train,
            test,
            population,
            generation: 0,
            rng,
        })
    }

    pub fn config(&self) -> &AlgorithmConfig {
        &self.config
    }

    pub fn population(&self) -> &[Individual] {
        &self.population
    }

    pub fn grammar(&self) -> Option<&Grammar> {
        self.grammar.as_ref()
    }

    /// Generations completed so far.
    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn best(&self) -> &Individual {
        &self.population[best_index(&self.population)]
    }

    /// Runs one generation and reports on the population it produced.
    pub fn step(&mut self) -> Result<GenerationTelemetry, EvolutionError> {
        let ctx = Context { config: &self.config, mutation: &self.mutation, train: self.train };
        let g = self.generation;
        let rng = &mut self.rng;
        let population = &mut self.population;
        let resampled = is_resample_generation(&self.config, g);
        self.grammar = match (self.config.algorithm, self.grammar.as_ref()) {
            (Algorithm::Effmut, _) => {
                effmut_generation(population, None, &ctx, rng);
                None
            }
            (Algorithm::Gblgp, Some(grammar)) => Some(gblgp_generation(population, grammar, &ctx, rng)?),
            (Algorithm::Hybrid1, Some(grammar)) => Some(hybrid1_generation(population, grammar, &ctx, g, rng)?),
            (Algorithm::Hybrid2, Some(grammar)) => Some(hybrid2_generation(population, grammar, &ctx, rng)?),
            (algorithm, None) => return Err(EvolutionError::MissingGrammar(algorithm)),
        };
        self.generation += 1;
        Ok(self.telemetry(g, resampled))
    }

    fn telemetry(&self, generation: usize, resampled: bool) -> GenerationTelemetry {
        let n = self.population.len() as f64;
        let sizes: Vec<_> = self.population.iter().map(|i| i.program.code_size()).collect();
        let best = self.best();
        GenerationTelemetry {
            generation,
            best_train_mae: best.fitness,
            best_test_mae: fitness(&best.program, self.test),
            mean_effective_percentage: sizes.iter().map(|s| s.effective_percentage()).sum::<f64>() / n,
            mean_effective_size: sizes.iter().map(|s| s.effective as f64).sum::<f64>() / n,
            mean_total_size: sizes.iter().map(|s| s.total as f64).sum::<f64>() / n,
            resampled,
            probabilities: self.grammar.as_ref().map(Grammar::probabilities),
        }
    }

    /// Summarises the current population's best individual.
    pub fn record(&self, telemetry: Vec<GenerationTelemetry>, wall_clock_seconds: f64) -> RunRecord {
        let best = self.best();
        let test_mae = fitness(&best.program, self.test);
        let size = best.program.code_size();
        let success_mae = match self.config.success_set {
            SuccessSet::Train => best.fitness,
            SuccessSet::Test => test_mae,
        };
        RunRecord {
            benchmark: self.train.provenance.benchmark.clone(),
            config: self.config.clone(),
            grammar: self.initial_grammar.as_ref().map(Grammar::to_string),
            rule_names: self
                .grammar
                .as_ref()
                .map(|g| g.rules().iter().map(|r| r.name.clone()).collect())
                .unwrap_or_default(),
            best_program: best.program.clone(),
            best_listing: best.program.to_string(),
            best_expression: best
                .program
                .decode_expression_bounded(EXPRESSION_LIMIT)
                .unwrap_or_else(|_| "<expression too large>".to_string()),
            train_mae: best.fitness,
            test_mae,
            success: success_mae < self.config.success_threshold,
            effective_size: size.effective,
            total_size: size.total,
            final_probabilities: self.grammar.as_ref().map(Grammar::probabilities),
            telemetry,
            wall_clock_seconds,
        }
    }
}

/// Runs `config.generations` generations from `config.seed`.
pub fn run(
    config: &AlgorithmConfig,
    grammar: Option<&Grammar>,
    train: &Dataset,
    test: &Dataset,
) -> Result<RunRecord, EvolutionError> {
    let start = Instant::now();
    let mut evolution = Evolution::new(config.clone(), grammar, train, test)?;
    let mut telemetry = Vec::with_capacity(config.generations);
    for _ in 0..config.generations {
        telemetry.push(evolution.step()?);
    }
    Ok(evolution.record(telemetry, start.elapsed().as_secs_f64()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::{Benchmark, Split};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn nguyen1() -> (Dataset, Dataset) {
        Benchmark::by_name("nguyen1").unwrap().train_test(0).unwrap()
    }

    fn small(algorithm: Algorithm) -> AlgorithmConfig {
        AlgorithmConfig { population_size: 20, generations: 6, ..AlgorithmConfig::new(algorithm) }
    }

    #[test]
    fn tournament_rules() {
        assert_eq!(tournament(&[1.0, 5.0], 2, &mut rng(0)).unwrap(), (0, 1));
        assert_eq!(tournament(&[5.0, 1.0], 2, &mut rng(0)).unwrap(), (1, 0));
        assert_eq!(tournament(&[2.0, 2.0], 2, &mut rng(0)).unwrap(), (0, 1));
        assert_eq!(decide(&[3.0, 1.0, 3.0, 1.0], &[2, 3, 0, 1]), (1, 0));
        assert!(tournament(&[], 2, &mut rng(0)).is_err());
        assert!(tournament(&[1.0], 2, &mut rng(0)).is_err());
        let f: Vec<f64> = (0..100).map(f64::from).collect();
        assert_eq!(tournament(&f, 2, &mut rng(9)).unwrap(), tournament(&f, 2, &mut rng(9)).unwrap());
    }

    #[test]
    fn config_defaults_and_validation() {
        let c = AlgorithmConfig::new(Algorithm::Effmut);
        assert_eq!((c.registers, c.steps()), (8, 50));
        assert_eq!(AlgorithmConfig::new(Algorithm::Hybrid2).registers, 13);
        assert!(c.validate().is_ok());
        assert!(AlgorithmConfig { top_n: 101, ..c.clone() }.validate().is_err());
        assert!(AlgorithmConfig { alpha: 2.0, ..c.clone() }.validate().is_err());
        assert!(AlgorithmConfig { elite: 0, ..c.clone() }.validate().is_err());
        assert!(AlgorithmConfig { population_size: 3, ..c }.validate().is_err());
        assert_eq!("Hybrid1".parse::<Algorithm>().unwrap(), Algorithm::Hybrid1);
        assert!("gp".parse::<Algorithm>().is_err());
    }

    #[test]
    fn population_size_and_elitism_hold() {
        let (train, test) = nguyen1();
        let grammar = Grammar::polynomial();
        for algorithm in Algorithm::ALL {
            let config = small(algorithm).with_seed(3);
            let mut evolution = Evolution::new(config, Some(&grammar), &train, &test).unwrap();
            let mut best = evolution.best().fitness;
            for _ in 0..6 {
                let t = evolution.step().unwrap();
                assert_eq!(evolution.population().len(), 20, "{algorithm}");
                assert!(t.best_train_mae <= best, "{algorithm}: {} > {best}", t.best_train_mae);
                assert!((0.0..=100.0).contains(&t.mean_effective_percentage));
                best = t.best_train_mae;
                if let Some(g) = evolution.grammar() {
                    for rule in g.rules() {
                        assert!((rule.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn zero_alpha_freezes_grammar() {
        let (train, test) = nguyen1();
        let grammar = Grammar::polynomial();
        let config = AlgorithmConfig { alpha: 0.0, ..small(Algorithm::Gblgp) };
        let record = run(&config, Some(&grammar), &train, &test).unwrap();
        for t in &record.telemetry {
            assert_eq!(t.probabilities.as_ref().unwrap(), &grammar.probabilities());
        }
    }

    #[test]
    fn grammar_runs_stay_effective() {
        let (train, test) = nguyen1();
        let grammar = Grammar::polynomial();
        let record = run(&small(Algorithm::Gblgp), Some(&grammar), &train, &test).unwrap();
        assert!(record.telemetry.iter().all(|t| t.mean_effective_percentage == 100.0));
        let hybrid = run(&small(Algorithm::Hybrid1), Some(&grammar), &train, &test).unwrap();
        for t in &hybrid.telemetry {
            assert_eq!(t.resampled, t.generation % 2 == 0);
            if t.resampled {
                assert_eq!(t.mean_effective_percentage, 100.0);
            }
        }
    }

    #[test]
    fn hybrid1_period_one_matches_gblgp() {
        let (train, test) = nguyen1();
        let grammar = Grammar::polynomial();
        let base = small(Algorithm::Gblgp);
        let v1 = AlgorithmConfig { algorithm: Algorithm::Hybrid1, resample_period: 1, ..base.clone() };
        let a = run(&base, Some(&grammar), &train, &test).unwrap();
        let b = run(&v1, Some(&grammar), &train, &test).unwrap();
        assert_eq!(a.telemetry, b.telemetry);
        assert_eq!(a.best_program, b.best_program);
    }

    #[test]
    fn hybrid2_split() {
        let (train, _) = nguyen1();
        let grammar = Grammar::polynomial();
        let config = AlgorithmConfig::new(Algorithm::Hybrid2);
        let mutation = config.mutation.clone().with_grammar(&grammar);
        let ctx = Context { config: &config, mutation: &mutation, train: &train };
        let mut r = rng(1);
        let sampler = Sampler::new(&grammar, ctx.budget()).unwrap();
        let mut population: Vec<Individual> =
            (0..100).map(|_| Individual::evaluate(sampler.sample_or_fallback(&mut r), &train)).collect();
        hybrid2_generation(&mut population, &grammar, &ctx, &mut r).unwrap();
        assert_eq!(population.len(), 100);
    }

    #[test]
    fn runs_are_reproducible() {
        let (train, test) = nguyen1();
        let grammar = Grammar::polynomial();
        for algorithm in Algorithm::ALL {
            let config = small(algorithm).with_seed(11);
            let a = run(&config, Some(&grammar), &train, &test).unwrap();
            let b = run(&config, Some(&grammar), &train, &test).unwrap();
            assert_eq!(a.without_timing(), b.without_timing());
            let json = serde_json::to_string(&a).unwrap();
            assert_eq!(serde_json::from_str::<RunRecord>(&json).unwrap(), a);
        }
    }

    #[test]
    fn setup_errors() {
        let (train, test) = nguyen1();
        let k5 = Benchmark::by_name("keijzer5").unwrap().generate(Split::Train, 0).unwrap();
        let g = Grammar::polynomial();
        assert!(matches!(
            Evolution::new(small(Algorithm::Gblgp), None, &train, &test),
            Err(EvolutionError::MissingGrammar(_))
        ));
        assert!(matches!(
            Evolution::new(small(Algorithm::Gblgp), Some(&g), &k5, &k5),
            Err(EvolutionError::Dimension { .. })
        ));
        assert!(matches!(
            Evolution::new(small(Algorithm::Effmut), None, &train, &k5),
            Err(EvolutionError::DataShape { .. })
        ));
        assert!(Evolution::new(small(Algorithm::Effmut), None, &train, &test).is_ok());
    }
}
