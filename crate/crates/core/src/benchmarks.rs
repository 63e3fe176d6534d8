//! Symbolic regression targets and their datasets.
//!
//! ```
//! use gblgp::benchmarks::{Benchmark, Split};
//!
//! let nguyen1 = Benchmark::by_name("nguyen1").unwrap();
//! assert_eq!(nguyen1.evaluate(&[1.0]).unwrap(), 3.0);
//! let train = nguyen1.generate(Split::Train, 7).unwrap();
//! assert_eq!((train.len(), train.dimension()), (20, 1));
//! ```

use std::io::{Read, Write};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Names accepted by [`Benchmark::by_name`].
pub const BENCHMARK_NAMES: [&str; 9] =
    ["nguyen1", "nguyen2", "nguyen3", "nguyen4", "nguyen6", "keijzer4", "keijzer5", "korns3", "korns5"];

/// Smallest `w` korns5 draws accept before resampling.
pub const KORNS5_MIN_W: f64 = 1e-6;

const GRID_TOLERANCE: f64 = 1e-12;
const MAX_ROW_RETRIES: usize = 1000;

#[derive(Debug, thiserror::Error)]
pub enum BenchmarkError {
    #[error("unknown benchmark `{0}`")]
    Unknown(String),
    #[error("{name}: input {inputs:?} is outside the function's domain")]
    Domain { name: String, inputs: Vec<f64> },
    #[error("{name}: expected {expected} inputs, got {actual}")]
    Arity { name: String, expected: usize, actual: usize },
    #[error("invalid sampling: {0}")]
    Sampling(String),
    #[error("invalid variable order {0:?}")]
    VariableOrder(Vec<usize>),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sampling {
    /// `count` iid draws from `[low, high]`.
    Uniform { low: f64, high: f64, count: usize },
    /// `start, start + step, ...` up to `stop` inclusive.
    Grid { start: f64, stop: f64, step: f64 },
}

impl Sampling {
    fn validate(&self) -> Result<(), BenchmarkError> {
        let ok = match *self {
            Sampling::Uniform { low, high, count } => count > 0 && low.is_finite() && high.is_finite() && low <= high,
            Sampling::Grid { start, stop, step } => step > 0.0 && start.is_finite() && stop.is_finite() && start <= stop,
        };
        if ok {
            Ok(())
        } else {
            Err(BenchmarkError::Sampling(format!("{self:?}")))
        }
    }

    /// Grid points, computed as `start + i * step` to avoid drift.
    pub fn grid_points(start: f64, stop: f64, step: f64) -> Vec<f64> {
        let n = ((stop - start) / step + GRID_TOLERANCE).floor() as usize;
        (0..=n).map(|i| start + i as f64 * step).collect()
    }
}

impl std::fmt::Display for Sampling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Sampling::Uniform { low, high, count } => write!(f, "U[{low},{high},{count}]"),
            Sampling::Grid { start, stop, step } => write!(f, "E[{start},{stop},{step}]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn stream(self) -> u64 {
        match self {
            Split::Train => 0,
            Split::Test => 1,
        }
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

type Target = fn(&[f64]) -> f64;

/// A named target function with train and test sampling plans.
///
/// Sampling plans hold one entry per variable in the function's own order.
/// Column `i` of a generated dataset holds variable `order[i]`.
#[derive(Debug, Clone)]
pub struct Benchmark {
    name: &'static str,
    formula: &'static str,
    variables: &'static [&'static str],
    target: Target,
    admissible: fn(&[f64]) -> bool,
    train: Vec<Sampling>,
    test: Vec<Sampling>,
    order: Vec<usize>,
}

fn everywhere(_: &[f64]) -> bool {
    true
}

fn polynomial(x: f64, degree: i32) -> f64 {
    (1..=degree).rev().fold(0.0, |acc, _| (acc + 1.0) * x)
}

fn nguyen6(v: &[f64]) -> f64 {
    let x = v[0];
    x.sin() * (x + x * x).sin()
}

fn keijzer4(v: &[f64]) -> f64 {
    let x = v[0];
    let (s, c) = x.sin_cos();
    x * x * x * (-x).exp() * c * s * (s * s * c - 1.0)
}

fn keijzer5(v: &[f64]) -> f64 {
    let (x, y, z) = (v[0], v[1], v[2]);
    30.0 * x * z / ((x - 10.0) * y * y)
}

fn korns3(v: &[f64]) -> f64 {
    let (x, y, vv, w) = (v[0], v[1], v[3], v[4]);
    -5.41 + 4.9 * (vv - x + y / w) / (3.0 * w)
}

fn korns5(v: &[f64]) -> f64 {
    3.0 + 2.13 * v[4].ln()
}

fn korns5_admissible(v: &[f64]) -> bool {
    v[4] >= KORNS5_MIN_W
}

const X: &[&str] = &["x"];
const XYZ: &[&str] = &["x", "y", "z"];
const KORNS: &[&str] = &["x", "y", "z", "v", "w"];

fn uniform(low: f64, high: f64, count: usize) -> Sampling {
    Sampling::Uniform { low, high, count }
}

impl Benchmark {
    fn new(
        name: &'static str,
        formula: &'static str,
        variables: &'static [&'static str],
        target: Target,
        train: Vec<Sampling>,
        test: Vec<Sampling>,
    ) -> Self {
        Benchmark {
            name,
            formula,
            variables,
            target,
            admissible: everywhere,
            train,
            test,
            order: (0..variables.len()).collect(),
        }
    }

    pub fn by_name(name: &str) -> Result<Benchmark, BenchmarkError> {
        let u1 = || vec![uniform(-1.0, 1.0, 20)];
        let b = match name {
            "nguyen1" => Benchmark::new(name_of(name), "x^3+x^2+x", X, |v| polynomial(v[0], 3), u1(), u1()),
            "nguyen2" => Benchmark::new(name_of(name), "x^4+x^3+x^2+x", X, |v| polynomial(v[0], 4), u1(), u1()),
            "nguyen3" => Benchmark::new(name_of(name), "x^5+x^4+x^3+x^2+x", X, |v| polynomial(v[0], 5), u1(), u1()),
            "nguyen4" => {
                Benchmark::new(name_of(name), "x^6+x^5+x^4+x^3+x^2+x", X, |v| polynomial(v[0], 6), u1(), u1())
            }
            "nguyen6" => Benchmark::new(name_of(name), "sin(x)*sin(x+x^2)", X, nguyen6, u1(), u1()),
            "keijzer4" => Benchmark::new(
                name_of(name),
                "x^3*exp(-x)*cos(x)*sin(x)*(sin(x)^2*cos(x)-1)",
                X,
                keijzer4,
                vec![Sampling::Grid { start: 0.0, stop: 10.0, step: 0.05 }],
                vec![Sampling::Grid { start: 0.05, stop: 10.05, step: 0.05 }],
            ),
            "keijzer5" => {
                let plan = |n| vec![uniform(-1.0, 1.0, n), uniform(1.0, 2.0, n), uniform(-1.0, 1.0, n)];
                Benchmark::new(name_of(name), "30*x*z/((x-10)*y^2)", XYZ, keijzer5, plan(500), plan(10_000))
            }
            "korns3" => Benchmark::new(
                name_of(name),
                "-5.41+4.9*(v-x+y/w)/(3*w)",
                KORNS,
                korns3,
                vec![uniform(-50.0, 50.0, 500); 5],
                vec![uniform(-50.0, 50.0, 10_000); 5],
            ),
            "korns5" => Benchmark {
                admissible: korns5_admissible,
                ..Benchmark::new(
                    name_of(name),
                    "3+2.13*ln(w)",
                    KORNS,
                    korns5,
                    vec![uniform(0.0, 50.0, 500); 5],
                    vec![uniform(0.0, 50.0, 10_000); 5],
                )
            },
            other => return Err(BenchmarkError::Unknown(other.to_string())),
        };
        Ok(b)
    }

    pub fn all() -> Vec<Benchmark> {
        BENCHMARK_NAMES.iter().map(|n| Benchmark::by_name(n).expect("registered")).collect()
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn formula(&self) -> &'static str {
        self.formula
    }

    pub fn dimension(&self) -> usize {
        self.variables.len()
    }

    /// Variable names in dataset column order.
    pub fn columns(&self) -> Vec<&'static str> {
        self.order.iter().map(|&i| self.variables[i]).collect()
    }

    pub fn sampling(&self, split: Split) -> &[Sampling] {
        match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
        }
    }

    /// Replaces the sampling plan of one split, one entry per variable or a
    /// single entry shared by all of them.
    pub fn with_sampling(mut self, split: Split, plan: Vec<Sampling>) -> Result<Self, BenchmarkError> {
        let plan = match plan.len() {
            1 => vec![plan[0]; self.dimension()],
            n if n == self.dimension() => plan,
            n => return Err(BenchmarkError::Sampling(format!("{n} plans for {} variables", self.dimension()))),
        };
        check_plan(&plan)?;
        match split {
            Split::Train => self.train = plan,
            Split::Test => self.test = plan,
        }
        Ok(self)
    }

    /// Assigns variables to columns: column `i` holds variable `order[i]`.
    pub fn with_variable_order(mut self, order: Vec<usize>) -> Result<Self, BenchmarkError> {
        let mut seen = vec![false; self.dimension()];
        for &v in &order {
            if v >= seen.len() || std::mem::replace(&mut seen[v], true) {
                return Err(BenchmarkError::VariableOrder(order));
            }
        }
        if order.len() != self.dimension() {
            return Err(BenchmarkError::VariableOrder(order));
        }
        self.order = order;
        Ok(self)
    }

    /// Target value for one row given in column order.
    pub fn evaluate(&self, columns: &[f64]) -> Result<f64, BenchmarkError> {
        if columns.len() != self.dimension() {
            return Err(BenchmarkError::Arity {
                name: self.name.to_string(),
                expected: self.dimension(),
                actual: columns.len(),
            });
        }
        let mut natural = vec![0.0; columns.len()];
        for (column, &variable) in self.order.iter().enumerate() {
            natural[variable] = columns[column];
        }
        let y = (self.target)(&natural);
        let in_domain = match self.name {
            "korns5" => natural[4] > 0.0,
            _ => true,
        };
        if in_domain && y.is_finite() {
            Ok(y)
        } else {
            Err(BenchmarkError::Domain { name: self.name.to_string(), inputs: columns.to_vec() })
        }
    }

    fn row_admissible(&self, natural: &[f64]) -> bool {
        (self.admissible)(natural)
    }

    /// Draws the dataset for `split`. Train and test use different streams
    /// of the same seed. Uniform rows outside the domain are redrawn; grid
    /// points outside it are an error.
    pub fn generate(&self, split: Split, seed: u64) -> Result<Dataset, BenchmarkError> {
        let plan = self.sampling(split);
        check_plan(plan)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(split.stream());

        let naturals: Vec<Vec<f64>> = if plan.iter().all(|s| matches!(s, Sampling::Uniform { .. })) {
            let count = match plan[0] {
                Sampling::Uniform { count, .. } => count,
                Sampling::Grid { .. } => unreachable!(),
            };
            let mut rows = Vec::with_capacity(count);
            for _ in 0..count {
                let mut attempts = 0;
                let row = loop {
                    let row: Vec<f64> = plan
                        .iter()
                        .map(|s| match *s {
                            Sampling::Uniform { low, high, .. } => rng.gen_range(low..=high),
                            Sampling::Grid { .. } => unreachable!(),
                        })
                        .collect();
                    if self.row_admissible(&row) && (self.target)(&row).is_finite() {
                        break row;
                    }
                    attempts += 1;
                    if attempts >= MAX_ROW_RETRIES {
                        return Err(BenchmarkError::Domain { name: self.name.to_string(), inputs: row });
                    }
                };
                rows.push(row);
            }
            rows
        } else {
            let axes: Vec<Vec<f64>> = plan
                .iter()
                .map(|s| match *s {
                    Sampling::Grid { start, stop, step } => Ok(Sampling::grid_points(start, stop, step)),
                    Sampling::Uniform { .. } => {
                        Err(BenchmarkError::Sampling("grids cannot be mixed with uniform draws".into()))
                    }
                })
                .collect::<Result<_, _>>()?;
            cartesian(&axes)
        };

        let mut inputs = Vec::with_capacity(naturals.len());
        let mut targets = Vec::with_capacity(naturals.len());
        for natural in naturals {
            let columns: Vec<f64> = self.order.iter().map(|&v| natural[v]).collect();
            if !self.row_admissible(&natural) {
                return Err(BenchmarkError::Domain { name: self.name.to_string(), inputs: columns });
            }
            targets.push(self.evaluate(&columns)?);
            inputs.push(columns);
        }
        let provenance = Provenance {
            benchmark: self.name.to_string(),
            split: Some(split),
            seed: Some(seed),
            sampling: plan.iter().map(Sampling::to_string).collect(),
            columns: self.columns().iter().map(|s| s.to_string()).collect(),
        };
        Dataset::new(inputs, targets, provenance)
    }

    /// Train and test datasets for one run seed.
    pub fn train_test(&self, seed: u64) -> Result<(Dataset, Dataset), BenchmarkError> {
        Ok((self.generate(Split::Train, seed)?, self.generate(Split::Test, seed)?))
    }
}

fn name_of(name: &str) -> &'static str {
    BENCHMARK_NAMES.iter().find(|n| **n == name).expect("registered name")
}

fn check_plan(plan: &[Sampling]) -> Result<(), BenchmarkError> {
    plan.iter().try_for_each(Sampling::validate)?;
    let counts: Vec<usize> = plan
        .iter()
        .filter_map(|s| match s {
            Sampling::Uniform { count, .. } => Some(*count),
            Sampling::Grid { .. } => None,
        })
        .collect();
    if counts.windows(2).any(|w| w[0] != w[1]) {
        return Err(BenchmarkError::Sampling(format!("uniform plans disagree on the row count: {counts:?}")));
    }
    Ok(())
}

fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    axes.iter().fold(vec![Vec::new()], |rows, axis| {
        rows.iter()
            .flat_map(|row| {
                axis.iter().map(move |&v| {
                    let mut next = row.clone();
                    next.push(v);
                    next
                })
            })
            .collect()
    })
}

/// Target value of a registered benchmark, inputs in default column order.
pub fn target_value(name: &str, inputs: &[f64]) -> Result<f64, BenchmarkError> {
    Benchmark::by_name(name)?.evaluate(inputs)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub benchmark: String,
    pub split: Option<Split>,
    pub seed: Option<u64>,
    pub sampling: Vec<String>,
    pub columns: Vec<String>,
}

/// Input rows and targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<f64>, provenance: Provenance) -> Result<Self, BenchmarkError> {
        if inputs.len() != targets.len() {
            return Err(BenchmarkError::Dataset(format!("{} rows but {} targets", inputs.len(), targets.len())));
        }
        if inputs.is_empty() {
            return Err(BenchmarkError::Dataset("no rows".into()));
        }
        let d = inputs[0].len();
        if d == 0 || inputs.iter().any(|r| r.len() != d) {
            return Err(BenchmarkError::Dataset("rows must share a non-zero width".into()));
        }
        if inputs.iter().flatten().chain(&targets).any(|v| !v.is_finite()) {
            return Err(BenchmarkError::Dataset("non-finite value".into()));
        }
        Ok(Dataset { inputs, targets, provenance })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// `(row, target)` pairs, the shape fitness evaluation consumes.
    pub fn cases(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.inputs.iter().map(Vec::as_slice).zip(self.targets.iter().copied())
    }

    /// CSV with header `x1,...,xD,y`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), BenchmarkError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.dimension()).map(|i| format!("x{i}")).collect();
        header.push("y".into());
        w.write_record(&header)?;
        for (row, y) in self.cases() {
            w.write_record(row.iter().chain([&y]).map(|v| v.to_string()))?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, BenchmarkError> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        let d = header.len().saturating_sub(1);
        let expected = (1..=d).map(|i| format!("x{i}")).chain(["y".to_string()]);
        if d == 0 || !header.iter().eq(expected.collect::<Vec<_>>().iter().map(String::as_str)) {
            return Err(BenchmarkError::Dataset(format!("bad header `{}`", header.iter().collect::<Vec<_>>().join(","))));
        }
        let mut inputs = Vec::new();
        let mut targets = Vec::new();
        for (i, record) in r.records().enumerate() {
            let values = record?
                .iter()
                .map(|f| f.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| BenchmarkError::Dataset(format!("row {}: {e}", i + 2)))?;
            let (y, x) = values.split_last().expect("header width enforced");
            targets.push(*y);
            inputs.push(x.to_vec());
        }
        let provenance = Provenance { columns: (1..=d).map(|i| format!("x{i}")).collect(), ..Default::default() };
        Dataset::new(inputs, targets, provenance)
    }
}
