//! Penalized least-squares selection of the hidden-layer width.
//!
//! Every candidate width `k` in `1..=k_max` is fitted by [`optimize::fit`];
//! a criterion value is then computed from the fitted mean squared error
//! plus a complexity penalty, and the smallest-criterion width wins (ties
//! go to the smaller width). Four penalty weights are available, each in
//! three variance regimes: known noise variance, a plugin estimate, or a
//! log-scale criterion that needs no variance at all.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::{Architecture, Dataset};
use crate::optimize::{self, FitConfig, FitResult};
use crate::seed::{derive_seed, STREAM_FIT};

/// Growth rate of the penalty in the sample size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PenaltyFamily {
    /// Weight 2/n.
    Aic,
    /// Weight ln(n)/n.
    Bic,
    /// Weight sqrt(n)/n.
    Sp,
    /// Weight n^(3/4)/n.
    Vsp,
}

impl PenaltyFamily {
    pub const ALL: [PenaltyFamily; 4] = [
        PenaltyFamily::Aic,
        PenaltyFamily::Bic,
        PenaltyFamily::Sp,
        PenaltyFamily::Vsp,
    ];

    /// Penalty weight per parameter, before the variance factor.
    fn rate(self, n: usize) -> f64 {
        let n = n as f64;
        match self {
            PenaltyFamily::Aic => 2.0 / n,
            PenaltyFamily::Bic => n.ln() / n,
            PenaltyFamily::Sp => n.sqrt() / n,
            PenaltyFamily::Vsp => n.powf(0.75) / n,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PenaltyFamily::Aic => "AIC",
            PenaltyFamily::Bic => "BIC",
            PenaltyFamily::Sp => "SP",
            PenaltyFamily::Vsp => "VSP",
        }
    }
}

impl FromStr for PenaltyFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "AIC" => Ok(PenaltyFamily::Aic),
            "BIC" => Ok(PenaltyFamily::Bic),
            "SP" => Ok(PenaltyFamily::Sp),
            "VSP" => Ok(PenaltyFamily::Vsp),
            other => Err(Error::InvalidConfig(format!(
                "unknown penalty family '{other}' (expected AIC, BIC, SP, or VSP)"
            ))),
        }
    }
}

/// How the variance factor in the penalty is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum VarianceRegime {
    /// The noise variance is given.
    Known(f64),
    /// The candidate's own fitted mean squared error stands in for it.
    Plugin,
    /// Criterion on the log scale; no variance factor.
    LogMse,
}

impl VarianceRegime {
    pub fn label(&self) -> &'static str {
        match self {
            VarianceRegime::Known(_) => "known",
            VarianceRegime::Plugin => "plugin",
            VarianceRegime::LogMse => "log",
        }
    }
}

/// A penalty family paired with a variance regime, e.g. `BIC:known`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub family: PenaltyFamily,
    pub regime: VarianceRegime,
}

impl PenaltySpec {
    pub fn new(family: PenaltyFamily, regime: VarianceRegime) -> Self {
        PenaltySpec { family, regime }
    }

    /// Parses `FAMILY:regime`, e.g. `SP:log` or `bic:known`. The known
    /// regime takes its variance from `sigma2`, which must then be a
    /// positive finite number.
    pub fn parse(text: &str, sigma2: Option<f64>) -> Result<Self> {
        let (family_text, regime_text) = text.split_once(':').ok_or_else(|| {
            Error::InvalidConfig(format!(
                "criterion '{text}' must have the form FAMILY:regime, e.g. BIC:known"
            ))
        })?;
        let family: PenaltyFamily = family_text.trim().parse()?;
        let regime = match regime_text.trim().to_ascii_lowercase().as_str() {
            "known" => {
                let s2 = sigma2.ok_or_else(|| {
                    Error::InvalidConfig(format!(
                        "criterion '{text}' uses the known-variance regime and requires sigma2"
                    ))
                })?;
                if !(s2 > 0.0) || !s2.is_finite() {
                    return Err(Error::InvalidConfig(format!(
                        "sigma2 must be a positive finite number, got {s2}"
                    )));
                }
                VarianceRegime::Known(s2)
            }
            "plugin" => VarianceRegime::Plugin,
            "log" => VarianceRegime::LogMse,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown variance regime '{other}' (expected known, plugin, or log)"
                )))
            }
        };
        Ok(PenaltySpec { family, regime })
    }

    /// Penalty term for a model with `param_dim` parameters fitted on `n`
    /// points. In the plugin regime `mse_hat` must be the candidate's own
    /// fitted mean squared error.
    pub fn penalty(&self, n: usize, param_dim: usize, mse_hat: Option<f64>) -> Result<f64> {
        if n == 0 {
            return Err(Error::InvalidConfig("n must be >= 1".into()));
        }
        let variance = match self.regime {
            VarianceRegime::Known(s2) => s2,
            VarianceRegime::LogMse => 1.0,
            VarianceRegime::Plugin => {
                let m = mse_hat.ok_or(Error::MissingPluginVariance)?;
                if !(m > 0.0) || !m.is_finite() {
                    return Err(Error::DegeneratePluginVariance(m));
                }
                m
            }
        };
        Ok(variance * param_dim as f64 * self.family.rate(n))
    }

    /// Criterion value: the penalty added to `mse_hat`, or to its log in
    /// the log regime.
    pub fn criterion_value(&self, n: usize, param_dim: usize, mse_hat: f64) -> Result<f64> {
        let goodness = match self.regime {
            VarianceRegime::LogMse => {
                if !(mse_hat > 0.0) {
                    return Err(Error::DegenerateZeroMse);
                }
                mse_hat.ln()
            }
            _ => mse_hat,
        };
        Ok(goodness + self.penalty(n, param_dim, Some(mse_hat))?)
    }
}

impl fmt::Display for PenaltySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.family.label(), self.regime.label())
    }
}

/// One candidate width's score sheet.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateScore {
    pub k: usize,
    pub param_dim: usize,
    pub mse_hat: f64,
    pub penalty: f64,
    pub criterion: f64,
    pub chosen: bool,
}

/// Outcome of a selection run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionResult {
    pub spec: PenaltySpec,
    pub n: usize,
    pub chosen_k: usize,
    pub scores: Vec<CandidateScore>,
}

impl SelectionResult {
    /// Writes `k,D,mse_hat,penalty,criterion,chosen` rows.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "k,D,mse_hat,penalty,criterion,chosen")?;
        for s in &self.scores {
            writeln!(
                out,
                "{},{},{:.16e},{:.16e},{:.16e},{}",
                s.k, s.param_dim, s.mse_hat, s.penalty, s.criterion, s.chosen
            )?;
        }
        Ok(())
    }
}

/// Fits every width `1..=k_max` on the same data, deriving one fit seed
/// per width from the config seed. The returned list is ordered by `k`.
pub fn fit_all_k(data: &Dataset, k_max: usize, config: &FitConfig) -> Result<Vec<FitResult>> {
    if k_max < 1 {
        return Err(Error::InvalidConfig("k_max must be >= 1".into()));
    }
    (1..=k_max)
        .map(|k| {
            let arch = Architecture::new(data.d(), k)?;
            let per_k = FitConfig {
                rng_seed: derive_seed(config.rng_seed, &[STREAM_FIT, k as u64]),
                ..config.clone()
            };
            optimize::fit(arch, data, &per_k)
        })
        .collect()
}

/// Applies one criterion to an existing fit curve (as produced by
/// [`fit_all_k`], ordered by `k` starting at 1) without refitting.
pub fn select_from_fits(
    spec: PenaltySpec,
    n: usize,
    d: usize,
    fits: &[FitResult],
) -> Result<SelectionResult> {
    if fits.is_empty() {
        return Err(Error::InvalidConfig("no fitted candidates".into()));
    }
    let mut scores = Vec::with_capacity(fits.len());
    for (i, fit) in fits.iter().enumerate() {
        let k = i + 1;
        let param_dim = Architecture::new(d, k)?.param_dim();
        let penalty = spec.penalty(n, param_dim, Some(fit.mse_hat))?;
        let criterion = spec.criterion_value(n, param_dim, fit.mse_hat)?;
        scores.push(CandidateScore {
            k,
            param_dim,
            mse_hat: fit.mse_hat,
            penalty,
            criterion,
            chosen: false,
        });
    }
    // strict `<` keeps the earlier (smaller) width on ties
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if s.criterion < scores[best].criterion {
            best = i;
        }
    }
    scores[best].chosen = true;
    Ok(SelectionResult {
        spec,
        n,
        chosen_k: scores[best].k,
        scores,
    })
}

/// Fits all widths up to `k_max` and selects by the given criterion.
pub fn select(
    spec: PenaltySpec,
    data: &Dataset,
    k_max: usize,
    config: &FitConfig,
) -> Result<SelectionResult> {
    let fits = fit_all_k(data, k_max, config)?;
    select_from_fits(spec, data.n(), data.d(), &fits)
}
