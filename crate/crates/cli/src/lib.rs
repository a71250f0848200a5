//! Command implementations behind the `himdiag` binary.
//!
//! Each `cmd_*` function validates its configuration, runs one analysis and
//! writes a single report. Exit codes: 0 on success (flagged observations are
//! a normal result), 2 for configuration errors, 3 for data errors.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use himdiag::simulate::{run_replications, Model, Pipeline, ShiftSet, SimulationSpec, SimulationTable, CSV_HEADER};
use himdiag::{cooks_distance_deletion, cooks_distance_hat, diagnose, glm_him_scores, ols_fit, rank_influential};
use himdiag::{DataMatrix, Estimator};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;

pub const DEFAULT_KAPPAS: [f64; 5] = [0.0, 0.4, 0.8, 1.2, 1.6];
pub const DEFAULT_GLM_M: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("parse error at line {line}, column {column}: {message}")]
    ParseCell { line: usize, column: usize, message: String },
    #[error("data error: {0}")]
    Data(#[from] himdiag::Error),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            _ => EXIT_DATA,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Diagnose,
    Cook,
    GlmDiagnose,
    Simulate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for OutputFormat {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(CliError::Config(format!("unknown format '{other}'"))),
        }
    }
}

/// Response selector: a header name, or a zero-based column index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResponseColumn {
    Name(String),
    Index(usize),
}

impl std::str::FromStr for ResponseColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => ResponseColumn::Index(i),
            Err(_) => ResponseColumn::Name(s.to_owned()),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub command: Command,
    pub input_path: Option<PathBuf>,
    pub response_column: Option<ResponseColumn>,
    pub alpha: f64,
    pub estimator: Estimator,
    /// Screening size; `floor(n / ln n)` when unset.
    pub d: Option<usize>,
    /// Number of observations flagged by `glm-diagnose`.
    pub m: usize,
    pub seed: u64,
    pub replications: usize,
    pub output_path: Option<PathBuf>,
    pub format: OutputFormat,
    pub model: Model,
    pub kappas: Vec<f64>,
    pub s_set: ShiftSet,
    pub n: Option<usize>,
    pub p: Option<usize>,
    pub n_infl: Option<usize>,
    /// Worker threads; the global rayon pool when unset.
    pub threads: Option<usize>,
    /// Simulation pipelines; every pipeline that fits the model when unset.
    pub pipelines: Option<Vec<Pipeline>>,
}

impl CliConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            input_path: None,
            response_column: None,
            alpha: himdiag::DEFAULT_ALPHA,
            estimator: Estimator::Moment,
            d: None,
            m: DEFAULT_GLM_M,
            seed: 0,
            replications: 200,
            output_path: None,
            format: OutputFormat::Json,
            model: Model::M1,
            kappas: DEFAULT_KAPPAS.to_vec(),
            s_set: ShiftSet::S1,
            n: None,
            p: None,
            n_infl: None,
            threads: None,
            pipelines: None,
        }
    }

    /// Checks the fields the command needs before any work is done.
    pub fn validate(&self) -> CliResult<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::Config(format!("--alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.threads == Some(0) {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        match self.command {
            Command::Diagnose | Command::Cook | Command::GlmDiagnose => {
                if self.input_path.is_none() {
                    return Err(CliError::Config("--input is required".into()));
                }
                if self.response_column.is_none() {
                    return Err(CliError::Config("--response is required".into()));
                }
                if self.command == Command::GlmDiagnose && self.m == 0 {
                    return Err(CliError::Config("--m must be positive".into()));
                }
            }
            Command::Simulate => {
                if self.replications == 0 {
                    return Err(CliError::Config("--reps must be positive".into()));
                }
                if self.kappas.is_empty() {
                    return Err(CliError::Config("--kappa needs at least one value".into()));
                }
                if self.d == Some(0) {
                    return Err(CliError::Config("--d must be positive".into()));
                }
                self.simulation_spec().validate().map_err(|e| CliError::Config(e.to_string()))?;
                for p in self.pipelines() {
                    if !p.supports(self.model) {
                        return Err(CliError::Config(format!("pipeline {p} does not apply to model {}", self.model)));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn simulation_spec(&self) -> SimulationSpec {
        let mut spec = SimulationSpec::new(self.model);
        spec.n = self.n.unwrap_or(spec.n);
        spec.p = self.p.unwrap_or(spec.p);
        spec.n_infl = self.n_infl.unwrap_or(spec.n_infl);
        spec.s_set = self.s_set;
        spec.alpha = self.alpha;
        spec.seed = self.seed;
        spec.replications = self.replications;
        spec.sis_size = self.d;
        spec
    }

    pub fn pipelines(&self) -> Vec<Pipeline> {
        self.pipelines.clone().unwrap_or_else(|| Pipeline::defaults_for(self.model))
    }
}

fn is_numeric(cell: &str) -> bool {
    cell.trim().parse::<f64>().is_ok()
}

/// Reads a numeric table and splits off the response column.
///
/// A header is assumed when any cell of the first line fails to parse as a
/// number. Every other cell must be a finite number.
pub fn read_csv(path: &Path, response: &ResponseColumn) -> CliResult<DataMatrix> {
    let io_err = |source| CliError::Io { path: path.to_owned(), source };
    let file = std::fs::File::open(path).map_err(io_err)?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(file);

    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| CliError::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(records.len() + 1, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        records.push((line, rec));
    }
    if records.is_empty() {
        return Err(CliError::Parse { line: 1, message: "file is empty".into() });
    }

    let header: Option<Vec<String>> = if records[0].1.iter().any(|c| !is_numeric(c)) {
        let (_, rec) = records.remove(0);
        Some(rec.iter().map(|c| c.trim().to_owned()).collect())
    } else {
        None
    };
    let width = header.as_ref().map_or_else(|| records.first().map_or(0, |r| r.1.len()), Vec::len);

    let resp = match response {
        ResponseColumn::Name(name) => header
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| CliError::Config(format!("response column '{name}' not found in header")))?,
        ResponseColumn::Index(i) => {
            // A header that literally names a column "0", "1", ... cannot
            // exist since such a line would not be detected as a header.
            if *i >= width {
                return Err(CliError::Config(format!("response index {i} out of range for {width} columns")));
            }
            *i
        }
    };

    let n = records.len();
    let p = width.saturating_sub(1);
    let mut x = vec![0.0; n * p];
    let mut y = vec![0.0; n];
    for (i, (line, rec)) in records.iter().enumerate() {
        if rec.len() != width {
            return Err(CliError::Parse {
                line: *line,
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        for (c, cell) in rec.iter().enumerate() {
            let v = cell.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                CliError::ParseCell {
                    line: *line,
                    column: c + 1,
                    message: format!("'{}' is not a finite number", cell.trim()),
                }
            })?;
            match c.cmp(&resp) {
                std::cmp::Ordering::Equal => y[i] = v,
                std::cmp::Ordering::Less => x[c * n + i] = v,
                std::cmp::Ordering::Greater => x[(c - 1) * n + i] = v,
            }
        }
    }

    let data = DataMatrix::from_columns(n, p, x, y)?;
    Ok(match header {
        Some(mut names) => {
            names.remove(resp);
            data.with_column_names(names)?
        }
        None => data,
    })
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> CliResult<()> {
    let io_err = |source| CliError::Io { path: path.to_owned(), source };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(contents).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

fn emit(config: &CliConfig, contents: &str) -> CliResult<()> {
    match &config.output_path {
        Some(path) => write_atomic(path, contents.as_bytes()),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(contents.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|source| CliError::Io { path: "<stdout>".into(), source })
        }
    }
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    match threads {
        None => Ok(f()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CliError::Config(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn load(config: &CliConfig) -> CliResult<DataMatrix> {
    let path = config.input_path.as_deref().expect("validated");
    if !path.exists() {
        return Err(CliError::Config(format!("input file {} does not exist", path.display())));
    }
    read_csv(path, config.response_column.as_ref().expect("validated"))
}

/// Per-observation report shared by the three data commands.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservationReport {
    pub meta: serde_json::Value,
    pub scores: Vec<f64>,
    pub statistics: Option<Vec<f64>>,
    pub pvalues: Option<Vec<f64>>,
    pub flagged: Vec<usize>,
    pub params: serde_json::Value,
}

impl ObservationReport {
    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("report serializes");
                s.push('\n');
                s
            }
            OutputFormat::Csv => {
                let mut s = String::from("row,score,statistic,pvalue,flagged\n");
                let opt = |v: &Option<Vec<f64>>, k: usize| v.as_ref().map_or(String::new(), |v| v[k].to_string());
                for k in 0..self.scores.len() {
                    let flagged = self.flagged.binary_search(&k).is_ok();
                    let _ = writeln!(
                        s,
                        "{k},{},{},{},{}",
                        self.scores[k],
                        opt(&self.statistics, k),
                        opt(&self.pvalues, k),
                        u8::from(flagged)
                    );
                }
                s
            }
        }
    }
}

fn meta(command: &str, config: &CliConfig, data: &DataMatrix) -> serde_json::Value {
    json!({
        "command": command,
        "input": config.input_path.as_ref().map(|p| p.display().to_string()),
        "n": data.n(),
        "p": data.p(),
        "version": env!("CARGO_PKG_VERSION"),
    })
}

pub fn diagnose_report(config: &CliConfig) -> CliResult<ObservationReport> {
    config.validate()?;
    let data = load(config)?;
    let report = with_pool(config.threads, || diagnose(&data, config.alpha, config.estimator))??;
    Ok(ObservationReport {
        meta: meta("diagnose", config, &data),
        scores: report.scores.d,
        statistics: Some(report.scores.stat),
        pvalues: Some(report.pvalues),
        flagged: report.flagged,
        params: json!(report.provenance.params),
    })
}

pub fn cook_report(config: &CliConfig) -> CliResult<ObservationReport> {
    config.validate()?;
    let data = load(config)?;
    if data.n() <= data.p() + 1 {
        return Err(CliError::Data(himdiag::Error::DimensionError(format!(
            "Cook's distance needs n > p + 1 (an intercept plus p slopes with residual degrees \
             of freedom), got n = {} and p = {}",
            data.n(),
            data.p()
        ))));
    }
    let fit = ols_fit(&data)?;
    let scores = match cooks_distance_hat(&fit) {
        Ok(d) => d,
        // The closed form breaks down at unit leverage; the refit form
        // reports which observation is responsible.
        Err(himdiag::Error::ExactLeverage(_)) => cooks_distance_deletion(&data)?,
        Err(e) => return Err(e.into()),
    };
    Ok(ObservationReport {
        meta: meta("cook", config, &data),
        scores,
        statistics: None,
        pvalues: None,
        flagged: Vec::new(),
        params: json!({ "denominator": "(p+1) sigma^2", "sigma2": fit.sigma2 }),
    })
}

pub fn glm_report(config: &CliConfig) -> CliResult<ObservationReport> {
    config.validate()?;
    let data = load(config)?;
    let scores = with_pool(config.threads, || glm_him_scores(&data))??;
    let mut flagged = rank_influential(&scores.d, config.m)?;
    flagged.sort_unstable();
    Ok(ObservationReport {
        meta: meta("glm-diagnose", config, &data),
        scores: scores.d,
        statistics: None,
        pvalues: None,
        flagged,
        params: json!({
            "family": "binomial",
            "link": "logit",
            "m": config.m,
            "failed_predictors": scores.failed_predictors,
            "failed_refits": scores.fit_failures.len(),
        }),
    })
}

pub fn simulate_table(config: &CliConfig) -> CliResult<SimulationTable> {
    config.validate()?;
    let spec = config.simulation_spec();
    let pipelines = config.pipelines();
    Ok(with_pool(config.threads, || run_replications(&spec, &config.kappas, &pipelines))??)
}

/// Aggregated table as CSV, one row per (kappa, pipeline, metric).
pub fn table_csv(table: &SimulationTable) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for r in &table.rows {
        w.write_record([
            r.model.to_string(),
            r.kappa.to_string(),
            r.s_set.clone(),
            r.pipeline.clone(),
            r.metric.clone(),
            r.mean.to_string(),
            r.mc_se.to_string(),
            r.n_reps.to_string(),
            r.n_failures.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// Human-readable table with right-aligned columns.
pub fn table_aligned(table: &SimulationTable) -> String {
    let mut cells: Vec<Vec<String>> = vec![CSV_HEADER.iter().map(|s| s.to_string()).collect()];
    for r in &table.rows {
        cells.push(vec![
            r.model.to_string(),
            format!("{:.1}", r.kappa),
            r.s_set.clone(),
            r.pipeline.clone(),
            r.metric.clone(),
            format!("{:.4}", r.mean),
            format!("{:.4}", r.mc_se),
            r.n_reps.to_string(),
            r.n_failures.to_string(),
        ]);
    }
    let widths: Vec<usize> =
        (0..CSV_HEADER.len()).map(|c| cells.iter().map(|row| row[c].len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for row in &cells {
        let line: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn finish(result: CliResult<()>) -> i32 {
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("himdiag: {e}");
            e.exit_code()
        }
    }
}

pub fn cmd_diagnose(config: &CliConfig) -> i32 {
    finish(diagnose_report(config).and_then(|r| emit(config, &r.render(config.format))))
}

pub fn cmd_cook(config: &CliConfig) -> i32 {
    finish(cook_report(config).and_then(|r| emit(config, &r.render(config.format))))
}

pub fn cmd_glm_diagnose(config: &CliConfig) -> i32 {
    finish(glm_report(config).and_then(|r| emit(config, &r.render(config.format))))
}

/// Runs the simulation, prints the aligned table and writes the CSV to
/// `--output` (or the JSON rows when `--format json`).
pub fn cmd_simulate(config: &CliConfig) -> i32 {
    finish(simulate_table(config).and_then(|table| {
        print!("{}", table_aligned(&table));
        match (&config.output_path, config.format) {
            (Some(path), OutputFormat::Csv) => write_atomic(path, table_csv(&table).as_bytes()),
            (Some(path), OutputFormat::Json) => {
                let mut s = serde_json::to_string_pretty(&table.rows).expect("rows serialize");
                s.push('\n');
                write_atomic(path, s.as_bytes())
            }
            (None, _) => Ok(()),
        }
    }))
}

pub fn run(config: &CliConfig) -> i32 {
    match config.command {
        Command::Diagnose => cmd_diagnose(config),
        Command::Cook => cmd_cook(config),
        Command::GlmDiagnose => cmd_glm_diagnose(config),
        Command::Simulate => cmd_simulate(config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
        let path = dir.path().join(name);
        std::fs::write(&path, body).unwrap();
        path
    }

    #[test]
    fn header_detection_and_response_by_name() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "t.csv", "y,x1\n1,2\n2,5\n4,4\n");
        let data = read_csv(&path, &ResponseColumn::Name("y".into())).unwrap();
        assert_eq!((data.n(), data.p()), (3, 1));
        assert_eq!(data.y(), &[1.0, 2.0, 4.0]);
        assert_eq!(data.column(0), &[2.0, 5.0, 4.0]);
        assert_eq!(data.column_names().unwrap(), &["x1".to_owned()]);
    }

    #[test]
    fn response_by_index_without_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "t.csv", "1,9,2\n2,8,5\n4,1,4\n5,0,3\n");
        let data = read_csv(&path, &ResponseColumn::Index(1)).unwrap();
        assert_eq!(data.y(), &[9.0, 8.0, 1.0, 0.0]);
        assert_eq!(data.column(1), &[2.0, 5.0, 4.0, 3.0]);
    }

    #[test]
    fn parse_errors_locate_the_cell() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "nan.csv", "y,a\n1,2\n2,NaN\n3,1\n");
        match read_csv(&path, &ResponseColumn::Name("y".into())) {
            Err(CliError::ParseCell { line, column, .. }) => assert_eq!((line, column), (3, 2)),
            other => panic!("unexpected {other:?}"),
        }
        let path = write(&dir, "ragged.csv", "1,2\n2,3,4\n");
        assert!(matches!(read_csv(&path, &ResponseColumn::Index(0)), Err(CliError::Parse { line: 2, .. })));
        let path = write(&dir, "word.csv", "1,2\n2,abc\n");
        assert!(matches!(read_csv(&path, &ResponseColumn::Index(0)), Err(CliError::ParseCell { line: 2, column: 2, .. })));
    }

    #[test]
    fn missing_response_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "t.csv", "y,x1\n1,2\n2,5\n4,4\n");
        let err = read_csv(&path, &ResponseColumn::Name("z".into())).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_CONFIG);
        let err = read_csv(&path, &ResponseColumn::Index(2)).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_CONFIG);
    }

    #[test]
    fn config_requires_fields_per_command() {
        let mut c = CliConfig::new(Command::Diagnose);
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
        c.input_path = Some("x.csv".into());
        c.response_column = Some(ResponseColumn::Index(0));
        assert!(c.validate().is_ok());
        c.alpha = 1.0;
        assert!(c.validate().is_err());

        let mut s = CliConfig::new(Command::Simulate);
        assert!(s.validate().is_ok());
        s.pipelines = Some(vec![Pipeline::GlmHim]);
        assert!(s.validate().is_err());
        s.model = Model::Logistic;
        assert!(s.validate().is_ok());
        s.n_infl = Some(500);
        assert!(s.validate().is_err());
    }

    #[test]
    fn aligned_table_has_equal_width_lines() {
        let mut c = CliConfig::new(Command::Simulate);
        c.n = Some(30);
        c.p = Some(40);
        c.n_infl = Some(3);
        c.replications = 2;
        c.kappas = vec![0.0, 1.6];
        c.pipelines = Some(vec![Pipeline::Him, Pipeline::Sis]);
        let table = simulate_table(&c).unwrap();
        let text = table_aligned(&table);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), table.rows.len() + 1);
        assert!(lines.iter().all(|l| l.len() == lines[0].len()));
        let csv = table_csv(&table);
        assert!(csv.starts_with("model,kappa,s_set,pipeline,metric,mean,mc_se,n_reps,n_failures\n"));
    }
}
