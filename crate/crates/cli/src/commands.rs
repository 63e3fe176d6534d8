use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use gblgp::analysis::{
    aggregate_by_benchmark, effective_code_rows, probability_rows, render_text, write_effective_code_csv,
    write_pairwise_csv, write_probability_csv, write_summary_csv, Aggregate,
};
use gblgp::evolution::{run, RunRecord};
use gblgp::scfg::{Grammar, Production, Sampler, SamplerBudget};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::manifest::{resolve_grammar, ExperimentManifest, Job, Plan};
use crate::{CliError, DEFAULT_OUTPUT_DIR};

pub const RECORDS_DIR: &str = "records";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const PAIRWISE_CSV: &str = "pairwise.csv";
pub const SUMMARY_TXT: &str = "summary.txt";
pub const EFFECTIVE_CODE_CSV: &str = "effective_code.csv";
pub const PROBABILITY_CSV: &str = "probability_trace.csv";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Takes precedence over the manifest's directory.
    pub output_dir: Option<PathBuf>,
    /// Used when neither the options nor the manifest name a directory.
    pub default_output_dir: Option<PathBuf>,
    /// Worker threads; all cores when `None`.
    pub jobs: Option<usize>,
    /// Keep existing records instead of rerunning them.
    pub resume: bool,
    pub quiet: bool,
}

#[derive(Debug, Clone)]
pub struct ReportOutcome {
    pub output_dir: PathBuf,
    pub records: usize,
    pub aggregates: Vec<Aggregate>,
    /// Files that could not be read as run records, with the reason.
    pub skipped: Vec<(PathBuf, String)>,
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

fn run_job(plan: &Plan, job: &Job) -> Result<RunRecord, CliError> {
    let bench = &plan.benchmarks[job.benchmark];
    let (train, test) = bench.train_test(job.dataset_seed)?;
    Ok(run(&job.config, plan.grammars[job.benchmark].as_ref(), &train, &test)?)
}

/// Executes every job of the manifest, writing each record as soon as its
/// run finishes, then rebuilds the summaries from the output directory.
pub fn run_experiment(manifest_path: &Path, options: &RunOptions) -> Result<ReportOutcome, CliError> {
    let manifest = ExperimentManifest::load(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let plan = manifest.resolve(base)?;
    let output_dir = options
        .output_dir
        .clone()
        .or_else(|| plan.output_dir.clone())
        .or_else(|| options.default_output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
    let records_dir = output_dir.join(RECORDS_DIR);
    fs::create_dir_all(&records_dir).map_err(|e| CliError::io(&records_dir, e))?;

    let pending: Vec<&Job> = plan
        .jobs
        .iter()
        .filter(|job| {
            let path = records_dir.join(job.file_name(&plan));
            !(options.resume && read_record(&path).is_ok())
        })
        .collect();
    let total = pending.len();
    let done = std::sync::atomic::AtomicUsize::new(0);
    let execute = || {
        pending
            .par_iter()
            .map(|job| {
                let record = run_job(&plan, job)?;
                let path = records_dir.join(job.file_name(&plan));
                let json = serde_json::to_vec_pretty(&record).expect("records serialize");
                write_atomic(&path, &json)?;
                let n = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
                if !options.quiet {
                    eprintln!(
                        "[{n}/{total}] {} {} seed {}: test MAE {:.3e}{}",
                        record.benchmark,
                        record.config.algorithm,
                        record.config.seed,
                        record.test_mae,
                        if record.success { " (success)" } else { "" }
                    );
                }
                Ok(())
            })
            .collect::<Result<Vec<()>, CliError>>()
    };
    match options.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Manifest(format!("thread pool: {e}")))?
            .install(execute)?,
        None => execute()?,
    };
    report(&output_dir)
}

fn read_record(path: &Path) -> Result<RunRecord, String> {
    let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

/// Reads every record under `dir` (or `dir/records`) and writes the summary
/// tables and plot data into `dir`. Unreadable files are skipped and listed.
pub fn report(dir: &Path) -> Result<ReportOutcome, CliError> {
    let nested = dir.join(RECORDS_DIR);
    let source = if nested.is_dir() { nested } else { dir.to_path_buf() };
    let entries = fs::read_dir(&source).map_err(|e| CliError::io(&source, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for path in paths {
        match read_record(&path) {
            Ok(r) => records.push(r),
            Err(reason) => skipped.push((path, reason)),
        }
    }
    if records.is_empty() {
        return Err(CliError::NoRecords(source));
    }
    records.sort_by(|a, b| {
        (&a.benchmark, a.config.algorithm, a.config.seed).cmp(&(&b.benchmark, b.config.algorithm, b.config.seed))
    });

    let aggregates = aggregate_by_benchmark(&records)?;
    let summaries: Vec<_> = aggregates.iter().flat_map(|a| a.summaries.clone()).collect();
    let pairwise: Vec<_> = aggregates.iter().flat_map(|a| a.pairwise.clone()).collect();
    let text = aggregates.iter().map(render_text).collect::<Vec<_>>().join("\n");

    let mut buf = Vec::new();
    write_summary_csv(&summaries, &mut buf)?;
    write_atomic(&dir.join(SUMMARY_CSV), &buf)?;
    buf.clear();
    write_pairwise_csv(&pairwise, &mut buf)?;
    write_atomic(&dir.join(PAIRWISE_CSV), &buf)?;
    write_atomic(&dir.join(SUMMARY_TXT), text.as_bytes())?;
    buf.clear();
    write_effective_code_csv(&effective_code_rows(&records), &mut buf)?;
    write_atomic(&dir.join(EFFECTIVE_CODE_CSV), &buf)?;
    buf.clear();
    write_probability_csv(&probability_rows(&records), &mut buf)?;
    write_atomic(&dir.join(PROBABILITY_CSV), &buf)?;

    Ok(ReportOutcome { output_dir: dir.to_path_buf(), records: records.len(), aggregates, skipped })
}

/// Parses a grammar and describes its rules, terminals and inputs.
pub fn grammar_check(spec: &str) -> Result<String, CliError> {
    let grammar = resolve_grammar(spec, Path::new("."))?;
    let mut out = String::new();
    let costs = grammar.min_derivation_costs();
    let _ = writeln!(out, "ok: {} rules, start `{}`", grammar.rules().len(), grammar.rule(grammar.start()).name);
    for (rule, cost) in grammar.rules().iter().zip(&costs) {
        let _ = writeln!(
            out,
            "  {:<10} {} productions, min derivation {} instructions",
            rule.name,
            rule.productions.len(),
            cost
        );
    }
    let operators: Vec<String> = grammar.operators().iter().map(|o| o.symbol().to_string()).collect();
    let _ = writeln!(out, "operators: {}", operators.join(" "));
    let constants: Vec<String> = grammar.constants().iter().map(f64::to_string).collect();
    let _ = writeln!(out, "constants: {}", constants.join(" "));
    let _ = writeln!(out, "inputs: {}", grammar.input_dimension());
    Ok(out)
}

/// Samples one program and lists it with its production tags, each tag
/// followed by the production it names.
pub fn sample(
    spec: &str,
    seed: u64,
    budget: SamplerBudget,
    inputs: Option<usize>,
) -> Result<String, CliError> {
    let mut grammar: Grammar = resolve_grammar(spec, Path::new("."))?;
    if let Some(d) = inputs {
        grammar = grammar.with_inputs(d).map_err(|source| CliError::Grammar { path: spec.into(), source })?;
    }
    let sampler = Sampler::new(&grammar, budget)?;
    let program = sampler.sample(&mut ChaCha8Rng::seed_from_u64(seed))?;
    let mut out = String::new();
    let _ = writeln!(out, "# registers: {}", program.register_count());
    for (i, instr) in program.instructions().iter().enumerate() {
        let production = instr
            .production
            .and_then(|tag| grammar.production(tag).map(|p| (tag, p)))
            .map(|(tag, p)| format!("  {} -> {}", grammar.rule(tag.rule).name, describe(p, &grammar)))
            .unwrap_or_default();
        let _ = writeln!(out, "{i}: {instr}{production}");
    }
    let _ = writeln!(out, "expression: {}", program.decode_expression());
    Ok(out)
}

fn describe(production: &Production, grammar: &Grammar) -> String {
    let name = |r: usize| grammar.rule(r).name.as_str();
    match *production {
        Production::Binary { left, op, right } => format!("{} {} {}", name(left), op.symbol(), name(right)),
        Production::Unary { func, arg } => format!("{}({})", func.symbol(), name(arg)),
        Production::Bracket(inner) => format!("({})", name(inner)),
        Production::PassThrough(inner) => name(inner).to_string(),
        Production::Constant(c) => c.to_string(),
        Production::Input(d) => format!("x{}", d + 1),
    }
}
