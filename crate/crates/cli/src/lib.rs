//! Command implementations behind the `wasp` binary.

pub mod report;
pub mod svg;

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use wasp_core::accuracy::AccuracyMatrix;
use wasp_core::dataset::{load_csv, synthesize_portfolio_table};
use wasp_core::engine::{run, RunConfig};
use wasp_core::matrix::LabeledMatrix;
use wasp_core::voting::{ecdf_auc_vote, hold_election, EcdfCurve, Election, VotingMatrix};
use wasp_core::{ErrorCategory, WaspError};

use report::ReportDocument;

pub const ACCURACY_FILE: &str = "accuracy_matrix.csv";
pub const W1_FILE: &str = "w1.csv";
pub const W2_FILE: &str = "w2.csv";
pub const W3_FILE: &str = "w3.csv";
pub const ECDF_FILE: &str = "ecdf.csv";
pub const REPORT_FILE: &str = "report.json";
pub const SVG_FILE: &str = "ecdf.svg";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read config {path}: {source}")]
    ConfigRead {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    ConfigParse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed ECDF file: {0}")]
    Ecdf(String),
    #[error(transparent)]
    Wasp(#[from] WaspError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigRead { .. } | CliError::ConfigParse { .. } => 2,
            CliError::Ecdf(_) => 3,
            CliError::Output { .. } => 4,
            CliError::Wasp(e) => match e.category() {
                ErrorCategory::Config => 2,
                ErrorCategory::Data => 3,
                ErrorCategory::Runtime => 4,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Options shared by `run` and `vote`.
#[derive(Debug, Clone, Default)]
pub struct OutputOptions {
    pub tie_break: bool,
    pub plot: bool,
}

pub struct RunRequest<'a> {
    pub config: &'a Path,
    pub data: &'a Path,
    pub out: &'a Path,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub options: OutputOptions,
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|source| CliError::ConfigRead {
        path: path.to_path_buf(),
        source,
    })?;
    let config: RunConfig = serde_json::from_str(&text).map_err(|source| CliError::ConfigParse {
        path: path.to_path_buf(),
        source,
    })?;
    config.validate()?;
    Ok(config)
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Output {
        path: dir.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })
}

pub fn cmd_run(req: &RunRequest<'_>) -> Result<ReportDocument> {
    let mut config = load_config(req.config)?;
    if let Some(seed) = req.seed {
        config.master_seed = seed;
    }
    if req.workers.is_some() {
        config.workers = req.workers;
    }
    config.validate()?;
    let schema = config
        .schema
        .as_ref()
        .ok_or_else(|| WaspError::Config("the config needs a `schema` to read the data file".into()))?;
    let frame = load_csv(req.data, schema)?;
    log::info!("loaded n = {}, k = {}, q = {}", frame.n(), frame.k(), frame.q());

    let output = run(&config, &frame)?;
    prepare_dir(req.out)?;
    output.accuracy.values.write_csv(req.out.join(ACCURACY_FILE))?;
    let mut report = write_election(&output.election, req.out, &req.options)?;
    report.accuracy_matrix.rows = output.accuracy.nrows();
    report.metadata = Some(output.metadata);
    report.final_predictions = output.final_predictions;
    report.winner_accuracy = output.winner_accuracy;
    report.artifacts.insert(0, ACCURACY_FILE.into());
    write_report(&report, req.out)?;
    Ok(report)
}

pub fn cmd_vote(matrix: &Path, out: &Path, options: &OutputOptions) -> Result<ReportDocument> {
    let a = AccuracyMatrix::from_values(LabeledMatrix::read_csv(matrix)?)?;
    let election = hold_election(&a)?;
    prepare_dir(out)?;
    let mut report = write_election(&election, out, options)?;
    report.accuracy_matrix.file = matrix.display().to_string();
    report.accuracy_matrix.rows = a.nrows();
    write_report(&report, out)?;
    Ok(report)
}

fn write_election(election: &Election, out: &Path, options: &OutputOptions) -> Result<ReportDocument> {
    election.w1.values.write_csv(out.join(W1_FILE))?;
    election.w2.values.write_csv(out.join(W2_FILE))?;
    election.w3.values.write_csv(out.join(W3_FILE))?;
    write_ecdf_csv(&election.ecdf, &out.join(ECDF_FILE))?;
    let mut artifacts = vec![
        W1_FILE.to_string(),
        W2_FILE.into(),
        W3_FILE.into(),
        ECDF_FILE.into(),
        REPORT_FILE.into(),
    ];
    if options.plot {
        write_text(&out.join(SVG_FILE), &svg::render_ecdf(&election.ecdf))?;
        artifacts.push(SVG_FILE.into());
    }
    let mut report = ReportDocument::from_election(election, options.tie_break)?;
    report.artifacts = artifacts;
    Ok(report)
}

fn write_report(report: &ReportDocument, out: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    write_text(&out.join(REPORT_FILE), &(text + "\n"))
}

/// Draws the ECDF plot from either a scaled matrix (`w3.csv`) or ECDF step
/// data (`ecdf.csv`), recognised by the header.
pub fn cmd_plot_ecdf(input: &Path, out_svg: &Path) -> Result<()> {
    let text = fs::read_to_string(input).map_err(WaspError::from)?;
    let curves = if text.starts_with("generator,") {
        let w3 = VotingMatrix::scaled(LabeledMatrix::read_csv_from(text.as_bytes())?)?;
        ecdf_auc_vote(&w3)?.1
    } else {
        read_ecdf_csv(&text)?
    };
    if let Some(parent) = out_svg.parent().filter(|p| !p.as_os_str().is_empty()) {
        prepare_dir(parent)?;
    }
    write_text(out_svg, &svg::render_ecdf(&curves))
}

pub fn cmd_synth(n: usize, k: usize, seed: u64, out: &Path) -> Result<()> {
    let table = synthesize_portfolio_table(n, k, seed)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        prepare_dir(parent)?;
    }
    table.write_csv(out)?;
    Ok(())
}

/// One line per step: `strategy,x,cdf`.
pub fn write_ecdf_csv(curves: &[EcdfCurve], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(WaspError::from)?;
    let io = |e: csv::Error| CliError::Wasp(WaspError::from(e));
    writer.write_record(["strategy", "x", "cdf"]).map_err(io)?;
    for curve in curves {
        for (x, f) in curve.x.iter().zip(&curve.cdf) {
            writer
                .write_record([curve.strategy.as_str(), &x.to_string(), &f.to_string()])
                .map_err(io)?;
        }
    }
    writer.flush().map_err(WaspError::from)?;
    Ok(())
}

/// Parses ECDF step data and recomputes each curve's area on `[0, 1]`.
pub fn read_ecdf_csv(text: &str) -> Result<Vec<EcdfCurve>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(WaspError::from)?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header != ["strategy", "x", "cdf"] {
        return Err(CliError::Ecdf("expected header strategy,x,cdf".into()));
    }
    let mut curves: Vec<EcdfCurve> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(WaspError::from)?;
        let number = |j: usize| -> Result<f64> {
            record
                .get(j)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| CliError::Ecdf(format!("line {}: bad number in column {}", i + 2, header[j])))
        };
        let (x, f) = (number(1)?, number(2)?);
        if !(0.0..=1.0).contains(&x) || !(f > 0.0 && f <= 1.0) {
            return Err(CliError::Ecdf(format!("line {}: point ({x}, {f}) lies outside [0, 1]", i + 2)));
        }
        let name = record[0].trim();
        if curves.last().is_none_or(|c| c.strategy != name) {
            curves.push(EcdfCurve {
                strategy: name.to_string(),
                x: Vec::new(),
                cdf: Vec::new(),
                auc: 0.0,
            });
        }
        let curve = curves.last_mut().expect("pushed above");
        if curve.x.last().is_some_and(|&prev| x <= prev) || curve.cdf.last().is_some_and(|&prev| f < prev) {
            return Err(CliError::Ecdf(format!("line {}: steps of `{name}` must increase", i + 2)));
        }
        curve.x.push(x);
        curve.cdf.push(f);
    }
    if curves.is_empty() {
        return Err(CliError::Ecdf("no steps".into()));
    }
    for curve in &mut curves {
        let mut area = 0.0;
        for i in 0..curve.x.len() {
            let next = curve.x.get(i + 1).copied().unwrap_or(1.0);
            area += curve.cdf[i] * (next - curve.x[i]);
        }
        curve.auc = area;
    }
    Ok(curves)
}
