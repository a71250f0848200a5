use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use himdiag::simulate::{Model, Pipeline, ShiftSet};
use himdiag::Estimator;
use himdiag_cli::{CliConfig, Command, OutputFormat, ResponseColumn, DEFAULT_GLM_M, DEFAULT_KAPPAS};

/// Influence diagnostics for high-dimensional regression.
#[derive(Parser)]
#[command(name = "himdiag", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Marginal-correlation influence scores, p-values and FDR flags.
    Diagnose {
        #[command(flatten)]
        io: DataArgs,
        #[arg(long, default_value_t = himdiag::DEFAULT_ALPHA)]
        alpha: f64,
        #[arg(long, default_value = "moment")]
        estimator: Estimator,
    },
    /// Classical Cook's distance (requires n > p + 1).
    Cook {
        #[command(flatten)]
        io: DataArgs,
    },
    /// Marginal logistic influence scores and the top-m observations.
    GlmDiagnose {
        #[command(flatten)]
        io: DataArgs,
        #[arg(long, default_value_t = DEFAULT_GLM_M)]
        m: usize,
    },
    /// Seeded Monte Carlo study over a grid of contamination strengths.
    Simulate(SimArgs),
}

#[derive(Args)]
struct DataArgs {
    /// CSV file; a non-numeric first line is read as a header.
    #[arg(long)]
    input: PathBuf,
    /// Response column, by header name or zero-based index.
    #[arg(long)]
    response: ResponseColumn,
    /// Report destination; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    format: OutputFormat,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long, default_value = "m1")]
    model: Model,
    /// Comma-separated contamination strengths.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_KAPPAS)]
    kappa: Vec<f64>,
    #[arg(long = "s-set", default_value = "s1")]
    s_set: ShiftSet,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long = "n-infl")]
    n_infl: Option<usize>,
    #[arg(long, default_value_t = himdiag::DEFAULT_ALPHA)]
    alpha: f64,
    /// Screening size; floor(n / ln n) when omitted.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    /// Comma-separated subset of HIM, SIS, SIS+HIM, LASSO, LASSO+HIM, GLM-HIM.
    #[arg(long, value_delimiter = ',')]
    pipelines: Option<Vec<Pipeline>>,
    /// Aggregated table destination.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
    #[arg(long)]
    threads: Option<usize>,
}

fn data_config(command: Command, io: DataArgs) -> CliConfig {
    let mut c = CliConfig::new(command);
    c.input_path = Some(io.input);
    c.response_column = Some(io.response);
    c.output_path = io.output;
    c.format = io.format;
    c.threads = io.threads;
    c
}

fn main() {
    let config = match Cli::parse().command {
        Sub::Diagnose { io, alpha, estimator } => {
            let mut c = data_config(Command::Diagnose, io);
            c.alpha = alpha;
            c.estimator = estimator;
            c
        }
        Sub::Cook { io } => data_config(Command::Cook, io),
        Sub::GlmDiagnose { io, m } => {
            let mut c = data_config(Command::GlmDiagnose, io);
            c.m = m;
            c
        }
        Sub::Simulate(a) => {
            let mut c = CliConfig::new(Command::Simulate);
            c.model = a.model;
            c.kappas = a.kappa;
            c.s_set = a.s_set;
            c.n = a.n;
            c.p = a.p;
            c.n_infl = a.n_infl;
            c.alpha = a.alpha;
            c.d = a.d;
            c.seed = a.seed;
            c.replications = a.reps;
            c.pipelines = a.pipelines;
            c.output_path = a.output;
            c.format = a.format;
            c.threads = a.threads;
            c
        }
    };
    std::process::exit(himdiag_cli::run(&config));
}
