//! The simulated regression model and the replication study.
//!
//! Data are drawn from a fixed two-input, three-unit network plus
//! uniform noise: inputs are bivariate normal with covariance `3·I`,
//! targets add independent noise uniform on `[-1, 1]`. The study fits
//! every candidate width once per replication and tallies which width
//! each configured criterion picks.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::{Architecture, Dataset, ParamVector};
use crate::optimize::FitConfig;
use crate::selection::{self, PenaltySpec};
use crate::seed::{derive_seed, rng_from, STREAM_DATA, STREAM_FIT};

/// Standard deviation of each input coordinate (variance 3).
const INPUT_SD: f64 = 1.7320508075688772;

/// Architecture of the generating network: two inputs, three units.
pub fn true_architecture() -> Architecture {
    Architecture::new(2, 3).expect("static dimensions")
}

/// The generating parameter vector:
/// `f(x, y) = tanh(6x - 2y) + 2 tanh(8 - x + 3y) - 3 tanh(2 - 6x - 2y) + 1.5`.
pub fn true_theta() -> ParamVector {
    ParamVector::from_parts(
        1.5,
        &[1.0, 2.0, -3.0],
        &[0.0, 8.0, 2.0],
        &[vec![6.0, -2.0], vec![-1.0, 3.0], vec![-6.0, -2.0]],
    )
    .expect("static parameter layout")
}

/// The generating regression surface, written out directly.
pub fn true_regression(x: f64, y: f64) -> f64 {
    (6.0 * x - 2.0 * y).tanh() + 2.0 * (8.0 - x + 3.0 * y).tanh()
        - 3.0 * (2.0 - 6.0 * x - 2.0 * y).tanh()
        + 1.5
}

/// Variance of the noise, `Var(U[-1,1]) = (1-(-1))^2/12 = 1/3`, exact.
pub fn noise_variance() -> f64 {
    1.0 / 3.0
}

/// Draws `n` points from the model with regression function `theta`:
/// standard-normal-times-`sqrt(3)` inputs and uniform `[-1,1]` noise.
/// All draws come from one ChaCha stream, so the dataset is a pure
/// function of `(theta, n, seed)`.
pub fn gen_dataset(theta: &ParamVector, n: usize, seed: u64) -> Result<Dataset> {
    if n < 1 {
        return Err(Error::InvalidConfig("n must be >= 1".into()));
    }
    let d = theta.arch().d;
    let mut rng = rng_from(seed);
    let normal = Normal::new(0.0, INPUT_SD).expect("valid normal");
    let mut inputs = Array2::<f64>::zeros((n, d));
    for mut row in inputs.rows_mut() {
        for v in row.iter_mut() {
            *v = normal.sample(&mut rng);
        }
    }
    let mut targets = Array1::<f64>::zeros(n);
    for (i, t) in targets.iter_mut().enumerate() {
        let row: Vec<f64> = inputs.row(i).to_vec();
        *t = theta.eval(&row)? + rng.gen_range(-1.0..=1.0);
    }
    Dataset::new(inputs, targets)
}

/// [`gen_dataset`] at the generating network [`true_theta`].
pub fn gen_true_data(n: usize, seed: u64) -> Result<Dataset> {
    gen_dataset(&true_theta(), n, seed)
}

/// Settings for a replication study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub reps: usize,
    pub k_max: usize,
    pub criteria: Vec<PenaltySpec>,
    /// Per-fit settings; its `rng_seed` is ignored in favor of seeds
    /// derived from `rng_seed` below, one per replication.
    pub fit: FitConfig,
    pub rng_seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(Error::InvalidConfig("n must be >= 10".into()));
        }
        if self.reps < 1 {
            return Err(Error::InvalidConfig("reps must be >= 1".into()));
        }
        if self.k_max < 1 {
            return Err(Error::InvalidConfig("k_max must be >= 1".into()));
        }
        if self.criteria.is_empty() {
            return Err(Error::InvalidConfig("at least one criterion required".into()));
        }
        self.fit.validate()
    }
}

/// Selection counts for one criterion, indexed by width minus one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionCounts {
    pub spec: PenaltySpec,
    pub counts: Vec<usize>,
}

/// Selection-frequency table over all configured criteria.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTable {
    pub n: usize,
    pub reps: usize,
    pub k_max: usize,
    pub rng_seed: u64,
    pub rows: Vec<CriterionCounts>,
}

impl SelectionTable {
    /// Count of replications in which `spec` chose width `k`.
    pub fn count(&self, spec: PenaltySpec, k: usize) -> usize {
        self.rows
            .iter()
            .find(|r| r.spec == spec)
            .map_or(0, |r| r.counts.get(k - 1).copied().unwrap_or(0))
    }

    /// Count of replications in which `spec` chose a width satisfying
    /// `pred` (e.g. `|k| k > 3` for over-selection).
    pub fn count_where(&self, spec: PenaltySpec, pred: impl Fn(usize) -> bool) -> usize {
        self.rows.iter().find(|r| r.spec == spec).map_or(0, |r| {
            r.counts
                .iter()
                .enumerate()
                .filter(|(i, _)| pred(i + 1))
                .map(|(_, c)| c)
                .sum()
        })
    }

    /// Writes `criterion,regime,k,count` rows, one per (criterion, width).
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "criterion,regime,k,count")?;
        for row in &self.rows {
            for (i, c) in row.counts.iter().enumerate() {
                writeln!(
                    out,
                    "{},{},{},{}",
                    row.spec.family.label(),
                    row.spec.regime.label(),
                    i + 1,
                    c
                )?;
            }
        }
        Ok(())
    }

    /// Renders the table as markdown: one row per criterion, one column
    /// per candidate width.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "Selected hidden-unit counts over {} replications (n = {}, seed = {}).\n\n",
            self.reps, self.n, self.rng_seed
        ));
        out.push_str("| criterion |");
        for k in 1..=self.k_max {
            out.push_str(&format!(" k={k} |"));
        }
        out.push_str("\n|---|");
        out.push_str(&"---|".repeat(self.k_max));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!("| {} |", row.spec));
            for c in &row.counts {
                out.push_str(&format!(" {c} |"));
            }
            out.push('\n');
        }
        out
    }
}

/// Runs the replication study: per replication, draw a dataset, fit all
/// widths once, and let every criterion pick its width from the shared
/// fit curve. Replications run in parallel; each derives its data and
/// fit seeds from `(rng_seed, replication index)`, so the table does not
/// depend on thread count.
pub fn run_study(config: &SimConfig) -> Result<SelectionTable> {
    config.validate()?;
    let theta0 = true_theta();
    let per_rep: Vec<Result<Vec<usize>>> = (0..config.reps)
        .into_par_iter()
        .map(|rep| {
            let data_seed = derive_seed(config.rng_seed, &[STREAM_DATA, rep as u64]);
            let fit_seed = derive_seed(config.rng_seed, &[STREAM_FIT, rep as u64]);
            let data = gen_dataset(&theta0, config.n, data_seed)?;
            let fit_config = FitConfig {
                rng_seed: fit_seed,
                ..config.fit.clone()
            };
            let fits = selection::fit_all_k(&data, config.k_max, &fit_config)
                .map_err(|e| Error::Study(format!("replication {rep}: {e}")))?;
            config
                .criteria
                .iter()
                .map(|spec| {
                    selection::select_from_fits(*spec, data.n(), data.d(), &fits)
                        .map(|r| r.chosen_k)
                        .map_err(|e| Error::Study(format!("replication {rep}: {e}")))
                })
                .collect()
        })
        .collect();

    let mut rows: Vec<CriterionCounts> = config
        .criteria
        .iter()
        .map(|spec| CriterionCounts {
            spec: *spec,
            counts: vec![0; config.k_max],
        })
        .collect();
    for rep in per_rep {
        for (row, k) in rows.iter_mut().zip(rep?) {
            row.counts[k - 1] += 1;
        }
    }
    Ok(SelectionTable {
        n: config.n,
        reps: config.reps,
        k_max: config.k_max,
        rng_seed: config.rng_seed,
        rows,
    })
}
