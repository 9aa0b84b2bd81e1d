//! Orchestration behind the command-line interface: resolved command
//! specs, file output, the run manifest, and manifest replay.
//!
//! Every run writes its outputs plus a `manifest.json` holding the
//! fully resolved configuration, so the run can be repeated bit-exactly
//! from the manifest alone.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bound::{self, BoundConfig, BoundReport};
use crate::error::{Error, Result};
use crate::mlp::Dataset;
use crate::optimize::FitConfig;
use crate::selection::{self, PenaltySpec, SelectionResult};
use crate::simulation::{self, SimConfig};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Fully resolved `simulate` run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateSpec {
    pub sim: SimConfig,
    /// Also write each replication's dataset as `data_rep{r}.csv`.
    #[serde(default)]
    pub dump_data: bool,
}

/// Fully resolved `select` run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectSpec {
    pub data_path: PathBuf,
    pub k_max: usize,
    pub criterion: PenaltySpec,
    pub fit: FitConfig,
}

/// Fully resolved `bound` run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundSpec {
    pub bound: BoundConfig,
    pub n: usize,
}

/// The command a manifest records, with every default materialized.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "lowercase")]
pub enum ResolvedCommand {
    Simulate(SimulateSpec),
    Select(SelectSpec),
    Bound(BoundSpec),
}

impl ResolvedCommand {
    pub fn name(&self) -> &'static str {
        match self {
            ResolvedCommand::Simulate(_) => "simulate",
            ResolvedCommand::Select(_) => "select",
            ResolvedCommand::Bound(_) => "bound",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            ResolvedCommand::Simulate(s) => s.sim.rng_seed,
            ResolvedCommand::Select(s) => s.fit.rng_seed,
            ResolvedCommand::Bound(s) => s.bound.rng_seed,
        }
    }
}

/// Written alongside every run's outputs; replaying it reproduces the
/// output files byte for byte.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: ResolvedCommand,
    pub seed: u64,
    /// Output file names, relative to the manifest's directory.
    pub outputs: Vec<String>,
    pub timestamp: String,
    pub argv: Vec<String>,
}

impl RunManifest {
    fn new(command: ResolvedCommand, outputs: Vec<String>, argv: Vec<String>) -> Self {
        RunManifest {
            seed: command.seed(),
            command,
            outputs,
            timestamp: chrono::Utc::now().to_rfc3339(),
            argv,
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Study(format!("manifest serialization: {e}")))?;
        fs::write(dir.join(MANIFEST_FILE), text + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("manifest parse: {e}")))
    }
}

/// Writes a dataset as CSV with header `x1,...,xd,y`, 17 significant
/// digits per value so reading it back is lossless.
pub fn write_dataset_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    for j in 1..=data.d() {
        out.push_str(&format!("x{j},"));
    }
    out.push_str("y\n");
    for i in 0..data.n() {
        for v in data.row(i).iter() {
            out.push_str(&format!("{v:.16e},"));
        }
        out.push_str(&format!("{:.16e}\n", data.targets()[i]));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a dataset CSV: a header row, then `d ≥ 1` input columns and
/// one target column of finite numbers. Errors name the offending data
/// row and column, both 1-based and counted below the header.
pub fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader
        .headers()
        .map_err(|e| Error::CsvFormat(format!("unreadable header: {e}")))?
        .clone();
    let width = headers.len();
    if width < 2 {
        return Err(Error::CsvFormat(format!(
            "need at least one input column and one target column, found {width} column(s)"
        )));
    }
    if headers.iter().all(|h| h.parse::<f64>().is_ok()) {
        return Err(Error::CsvFormat(
            "first row is numeric; a header row is required".into(),
        ));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut targets: Vec<f64> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row_no = i + 1;
        let record = record.map_err(|e| Error::CsvFormat(format!("row {row_no}: {e}")))?;
        if record.len() != width {
            return Err(Error::CsvFormat(format!(
                "row {row_no} has {} fields, expected {width}",
                record.len()
            )));
        }
        let mut values = Vec::with_capacity(width);
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::CsvData {
                row: row_no,
                column: j + 1,
                message: format!("'{field}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::CsvData {
                    row: row_no,
                    column: j + 1,
                    message: format!("'{field}' is not finite"),
                });
            }
            values.push(v);
        }
        targets.push(values.pop().expect("width >= 2"));
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::CsvFormat("no data rows".into()));
    }
    Dataset::from_rows(&rows, targets)
}

fn prepare_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Runs the replication study and writes `table.csv`, `table.md`, the
/// optional data dumps, and the manifest. Returns the manifest and the
/// rendered markdown table.
pub fn execute_simulate(
    spec: &SimulateSpec,
    out_dir: &Path,
    argv: Vec<String>,
) -> Result<(RunManifest, String)> {
    spec.sim.validate()?;
    prepare_out_dir(out_dir)?;
    let table = simulation::run_study(&spec.sim)?;

    let mut outputs = vec!["table.csv".to_string(), "table.md".to_string()];
    let mut csv_buf = Vec::new();
    table.write_csv(&mut csv_buf)?;
    fs::write(out_dir.join("table.csv"), csv_buf)?;
    let markdown = table.to_markdown();
    fs::write(out_dir.join("table.md"), &markdown)?;

    if spec.dump_data {
        for rep in 0..spec.sim.reps {
            let seed = crate::seed::derive_seed(
                spec.sim.rng_seed,
                &[crate::seed::STREAM_DATA, rep as u64],
            );
            let data = simulation::gen_dataset(&simulation::true_theta(), spec.sim.n, seed)?;
            let name = format!("data_rep{rep}.csv");
            write_dataset_csv(&data, &out_dir.join(&name))?;
            outputs.push(name);
        }
    }

    let manifest = RunManifest::new(ResolvedCommand::Simulate(spec.clone()), outputs, argv);
    manifest.save(out_dir)?;
    Ok((manifest, markdown))
}

/// Fits all widths on the CSV dataset, applies the criterion, and
/// writes `selection.csv` plus the manifest.
pub fn execute_select(
    spec: &SelectSpec,
    out_dir: &Path,
    argv: Vec<String>,
) -> Result<(RunManifest, SelectionResult)> {
    spec.fit.validate()?;
    if spec.k_max < 1 {
        return Err(Error::InvalidConfig("k_max must be >= 1".into()));
    }
    let data = read_dataset_csv(&spec.data_path)?;
    prepare_out_dir(out_dir)?;
    let result = selection::select(spec.criterion, &data, spec.k_max, &spec.fit)?;

    let mut buf = Vec::new();
    result.write_csv(&mut buf)?;
    fs::write(out_dir.join("selection.csv"), buf)?;

    let manifest = RunManifest::new(
        ResolvedCommand::Select(spec.clone()),
        vec!["selection.csv".to_string()],
        argv,
    );
    manifest.save(out_dir)?;
    Ok((manifest, result))
}

/// Runs the bound verifier on the simulated model and writes
/// `bound_report.csv` plus the manifest.
pub fn execute_bound(
    spec: &BoundSpec,
    out_dir: &Path,
    argv: Vec<String>,
) -> Result<(RunManifest, BoundReport)> {
    spec.bound.validate()?;
    prepare_out_dir(out_dir)?;
    let report = bound::verify_inequality(
        &spec.bound,
        simulation::true_architecture(),
        &simulation::true_theta(),
        spec.n,
    )?;

    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    fs::write(out_dir.join("bound_report.csv"), buf)?;

    let manifest = RunManifest::new(
        ResolvedCommand::Bound(spec.clone()),
        vec!["bound_report.csv".to_string()],
        argv,
    );
    manifest.save(out_dir)?;
    Ok((manifest, report))
}

/// Re-runs the command recorded in a manifest, writing into `out_dir`.
/// The data outputs are byte-identical to the original run's.
pub fn replay(manifest_path: &Path, out_dir: &Path) -> Result<RunManifest> {
    let manifest = RunManifest::load(manifest_path)?;
    let argv = manifest.argv.clone();
    match &manifest.command {
        ResolvedCommand::Simulate(spec) => execute_simulate(spec, out_dir, argv).map(|r| r.0),
        ResolvedCommand::Select(spec) => execute_select(spec, out_dir, argv).map(|r| r.0),
        ResolvedCommand::Bound(spec) => execute_bound(spec, out_dir, argv).map(|r| r.0),
    }
}
