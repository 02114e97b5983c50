//! `lab`: run experiments, read off weight constants, apply operators to sampled data.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use lab_core::grid::{Extension, Grid, RealFunction};
use lab_core::harness::{self, ExperimentId, HarnessError};
use lab_core::operators::OperatorHandle;
use lab_core::weights::{self, ScanOptions, HAT_AQ2};

const EXIT_PARSE: u8 = 2;
const EXIT_VACUOUS: u8 = 3;
const EXIT_VIOLATION: u8 = 4;
const EXIT_OTHER: u8 = 1;

#[derive(Parser)]
#[command(name = "lab", version, about = "Weighted restricted weak-type experiments on the line")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a config file and write rows.csv, summary.json and plots/.
    Run {
        experiment: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the grid size of the config.
        #[arg(long = "grid-N")]
        grid_n: Option<usize>,
        /// Overrides the seed of the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Weight constants.
    Weights {
        #[command(subcommand)]
        command: WeightsCommand,
    },
    /// Apply an operator to samples read from a CSV file; writes `x,value` to stdout.
    Ops {
        /// id, hilbert, maximal, sharp_hilbert or sharp_id.
        op: String,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = Grid::DESK_HALF_LENGTH)]
        half_length: f64,
        #[arg(long, value_enum, default_value_t = ExtensionArg::Zero)]
        extension: ExtensionArg,
    },
    /// List the experiments.
    List,
}

#[derive(Subcommand)]
enum WeightsCommand {
    /// Print one constant of a weight given in the config language.
    Constant {
        name: ConstantName,
        #[arg(long)]
        weight: String,
        /// Exponent for `ap` and `apr`.
        #[arg(long)]
        q: Option<f64>,
        #[arg(long = "grid-N", default_value_t = Grid::DESK_POINTS)]
        grid_n: usize,
        #[arg(long, default_value_t = Grid::DESK_HALF_LENGTH)]
        half_length: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ConstantName {
    A1,
    Ap,
    Apr,
    FujiiWilson,
    RhInf,
    Rh1,
    HatAq2,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExtensionArg {
    Zero,
    Periodic,
}

enum Failure {
    Parse(String),
    Other(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Parse(p) => Failure::Parse(p.to_string()),
            e => Failure::Other(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { experiment, config, out, grid_n, seed } => run(&experiment, config, out, grid_n, seed),
        Command::Weights { command: WeightsCommand::Constant { name, weight, q, grid_n, half_length } } => {
            constant(name, &weight, q, grid_n, half_length).map(|_| ExitCode::SUCCESS)
        }
        Command::Ops { op, input, half_length, extension } => ops(&op, input, half_length, extension).map(|_| ExitCode::SUCCESS),
        Command::List => {
            for e in ExperimentId::ALL {
                println!("{}  {}", e.name().to_uppercase(), e.describe());
            }
            Ok(ExitCode::SUCCESS)
        }
    };
    match result {
        Ok(code) => code,
        Err(Failure::Parse(msg)) => {
            eprintln!("parse error: {msg}");
            ExitCode::from(EXIT_PARSE)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_OTHER)
        }
    }
}

fn run(experiment: &str, config: PathBuf, out: PathBuf, grid_n: Option<usize>, seed: Option<u64>) -> Result<ExitCode, Failure> {
    let id: ExperimentId = experiment.parse().map_err(Failure::Parse)?;
    let text = fs::read_to_string(&config).map_err(|e| Failure::Other(format!("{}: {e}", config.display())))?;
    let specs = harness::parse_config(&text).map_err(|e| Failure::Parse(format!("{}:{e}", config.display())))?;
    let mut spec = specs
        .into_iter()
        .find(|s| s.name == id)
        .ok_or_else(|| Failure::Parse(format!("{} has no `{id}` block", config.display())))?;
    if let Some(n) = grid_n {
        spec.grid.n = n;
        spec.grid.build().map_err(|e| Failure::Parse(format!("--grid-N: {e}")))?;
    }
    if let Some(s) = seed {
        spec.seed = s;
    }
    let report = harness::run(&spec)?;
    harness::write_report(&report, &out)?;
    let s = &report.summary;
    println!("{}: {} cases ({} vacuous), max ratio {:.6e}", id, s.cases, s.vacuous_cases, s.max_ratio);
    for d in &s.diagnostics {
        println!("note: {d}");
    }
    if s.all_vacuous {
        eprintln!("every case is vacuous: the weights fail their class tests");
        return Ok(ExitCode::from(EXIT_VACUOUS));
    }
    if !s.violations.is_empty() {
        for v in &s.violations {
            eprintln!("violation: {v}");
        }
        return Ok(ExitCode::from(EXIT_VIOLATION));
    }
    Ok(ExitCode::SUCCESS)
}

fn constant(name: ConstantName, weight: &str, q: Option<f64>, n: usize, half_length: f64) -> Result<(), Failure> {
    let expr = harness::parse_weight(weight).map_err(|e| Failure::Parse(e.to_string()))?;
    let grid = Grid::new(half_length, n).map_err(|e| Failure::Parse(e.to_string()))?;
    let w = expr.evaluate(grid).map_err(|e| Failure::Other(e.to_string()))?;
    let opts = ScanOptions::default();
    let need_q = || q.ok_or_else(|| Failure::Parse("this constant needs --q".into()));
    let other = |e: weights::WeightError| Failure::Other(e.to_string());
    let value = match name {
        ConstantName::A1 => weights::a1_constant(w.function()),
        ConstantName::Ap => weights::ap_constant(w.function(), need_q()?, opts).map_err(other)?,
        ConstantName::Apr => weights::apr_constant(w.function(), need_q()?, opts).map_err(other)?,
        ConstantName::FujiiWilson => weights::fujii_wilson(w.function(), opts),
        ConstantName::RhInf => weights::rh_inf_constant(w.function(), opts),
        ConstantName::Rh1 => weights::rh1_bound(&w, opts).map_err(other)?,
        ConstantName::HatAq2 => w
            .certified(HAT_AQ2)
            .ok_or_else(|| Failure::Other("the weight carries no hatq2 certificate".into()))?,
    };
    println!("{}", harness::report::format_real(value));
    Ok(())
}

fn read_samples(path: &PathBuf) -> Result<Vec<f64>, Failure> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Failure::Other(format!("{}: {e}", path.display())))?;
    let mut column = None;
    let mut values = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))?;
        let col = match column {
            Some(c) => c,
            None => {
                // an optional header names a `value` column; otherwise the last column is used
                let c = record.iter().position(|f| f == "value").unwrap_or(record.len().saturating_sub(1));
                column = Some(c);
                if record.get(c).is_some_and(|f| f.parse::<f64>().is_err()) {
                    continue;
                }
                c
            }
        };
        let field = record.get(col).unwrap_or("");
        let v = field
            .parse::<f64>()
            .map_err(|_| Failure::Parse(format!("{}:{}: malformed real literal `{field}`", path.display(), line + 1)))?;
        values.push(v);
    }
    Ok(values)
}

fn ops(op: &str, input: PathBuf, half_length: f64, extension: ExtensionArg) -> Result<(), Failure> {
    let handle: OperatorHandle = op.parse().map_err(|e: lab_core::operators::OperatorError| Failure::Parse(e.to_string()))?;
    let values = read_samples(&input)?;
    let grid = Grid::new(half_length, values.len()).map_err(|e| Failure::Parse(e.to_string()))?;
    let extension = match extension {
        ExtensionArg::Zero => Extension::ZeroPadded,
        ExtensionArg::Periodic => Extension::Periodic,
    };
    let f = RealFunction::new(grid, values, extension).map_err(|e| Failure::Other(e.to_string()))?;
    let out = handle.apply(&f);
    let stdout = io::stdout();
    let mut w = csv::Writer::from_writer(stdout.lock());
    let io_err = |e: csv::Error| Failure::Other(e.to_string());
    w.write_record(["x", "value"]).map_err(io_err)?;
    for (i, v) in out.samples().iter().enumerate() {
        w.write_record([harness::report::format_real(grid.point(i)), harness::report::format_real(*v)]).map_err(io_err)?;
    }
    w.flush().map_err(|e| Failure::Other(e.to_string()))?;
    io::stdout().flush().map_err(|e| Failure::Other(e.to_string()))?;
    Ok(())
}
