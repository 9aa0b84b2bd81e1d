//! The generalized derivative, the overfitting statistic, and a
//! Monte-Carlo verifier of the overfitting bound.
//!
//! For a candidate parameter θ and the generating parameter θ⁰, the
//! per-point contrast is `Δ²(x,y) = (y - f_θ(x))² - (y - f_θ⁰(x))²`.
//! The generalized derivative is the normalized exponential contrast
//! `d^λ_θ = (e^{-λΔ²} - 1) / ‖e^{-λΔ²} - 1‖₂`, whose population norm is
//! estimated by Monte Carlo from the known generating distribution. The
//! verifier draws many θ, compares the scaled in-sample improvement
//! `n·(E_n(θ⁰) - E_n(θ))` against the bound
//! `(1/2λ)·(Σd)²/Σ(d)₋²`, and reports any violations.

use ndarray::Array1;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::{Architecture, Dataset, ParamVector};
use crate::optimize::{self, FitConfig};
use crate::seed::{derive_seed, rng_from, STREAM_CHECK, STREAM_DATA, STREAM_DRAW, STREAM_FIT, STREAM_NORM};
use crate::simulation;

/// Below this Monte-Carlo norm the candidate is treated as identical to
/// the generator and the draw is skipped.
const NORM_FLOOR: f64 = 1e-12;

/// Half-width of the box the random θ draws live in.
const DRAW_BOX: f64 = 100.0;

/// Settings for the bound verifier.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundConfig {
    /// Exponential tilt; must be positive.
    pub lambda: f64,
    /// Monte-Carlo sample size for the norm estimate.
    pub norm_mc_samples: usize,
    /// Number of random candidate draws (the fitted candidate is added
    /// on top).
    pub theta_draws: usize,
    pub rng_seed: u64,
    /// Replace every candidate, including the fitted one, by θ⁰. All
    /// draws then hit the degeneracy path; used to exercise it.
    #[serde(default)]
    pub force_theta0: bool,
}

impl Default for BoundConfig {
    fn default() -> Self {
        BoundConfig {
            lambda: 0.5,
            norm_mc_samples: 100_000,
            theta_draws: 200,
            rng_seed: 0,
            force_theta0: false,
        }
    }
}

impl BoundConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "lambda must be a positive finite number, got {}",
                self.lambda
            )));
        }
        if self.norm_mc_samples < 1_000 {
            return Err(Error::InvalidConfig(
                "norm_mc_samples must be >= 1000 for a usable norm estimate".into(),
            ));
        }
        if self.theta_draws < 1 {
            return Err(Error::InvalidConfig("theta_draws must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-point contrast `(y - f_θ(x))² - (y - f_θ⁰(x))²`.
pub fn delta_sq(theta: &ParamVector, theta0: &ParamVector, x: &[f64], y: f64) -> Result<f64> {
    let r_theta = y - theta.eval(x)?;
    let r_zero = y - theta0.eval(x)?;
    Ok(r_theta * r_theta - r_zero * r_zero)
}

/// Contrast for every row of a dataset, vectorized.
fn delta_sq_batch(theta: &ParamVector, theta0: &ParamVector, data: &Dataset) -> Result<Array1<f64>> {
    let pred_t = theta.predict(data.inputs())?;
    let pred_0 = theta0.predict(data.inputs())?;
    let y = data.targets();
    Ok(ndarray::Zip::from(y)
        .and(&pred_t)
        .and(&pred_0)
        .map_collect(|&y, &ft, &f0| {
            let (rt, r0) = (y - ft, y - f0);
            rt * rt - r0 * r0
        }))
}

/// Monte-Carlo estimate of `‖e^{-λΔ²} - 1‖₂` over `mc_samples` fresh
/// points from the generating model `theta0`.
pub fn norm_estimate(
    theta: &ParamVector,
    theta0: &ParamVector,
    lambda: f64,
    mc_samples: usize,
    seed: u64,
) -> Result<f64> {
    norm_estimate_with_se(theta, theta0, lambda, mc_samples, seed).map(|(norm, _)| norm)
}

/// [`norm_estimate`] together with the delta-method standard error of
/// the estimate.
pub fn norm_estimate_with_se(
    theta: &ParamVector,
    theta0: &ParamVector,
    lambda: f64,
    mc_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let fresh = simulation::gen_dataset(theta0, mc_samples, seed)?;
    let deltas = delta_sq_batch(theta, theta0, &fresh)?;
    let m = mc_samples as f64;
    let mut sum_sq = 0.0;
    let mut sum_fourth = 0.0;
    for &d2 in deltas.iter() {
        let u = (-lambda * d2).exp_m1();
        let q = u * u;
        sum_sq += q;
        sum_fourth += q * q;
    }
    let mean_sq = sum_sq / m;
    let norm = mean_sq.sqrt();
    if norm < NORM_FLOOR {
        return Err(Error::ThetaIndistinguishable);
    }
    // Var of the mean of q, pushed through the square root.
    let var_q = (sum_fourth / m - mean_sq * mean_sq).max(0.0);
    let se_norm = (var_q / m).sqrt() / (2.0 * norm);
    Ok((norm, se_norm))
}

/// The generalized derivative `(e^{-λΔ²(x,y)} - 1) / norm` at one point.
pub fn gen_derivative(
    theta: &ParamVector,
    theta0: &ParamVector,
    lambda: f64,
    x: &[f64],
    y: f64,
    norm: f64,
) -> Result<f64> {
    if !(norm > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "norm must be positive, got {norm}"
        )));
    }
    let d2 = delta_sq(theta, theta0, x, y)?;
    Ok(((-lambda * d2).exp_m1()) / norm)
}

/// Scaled in-sample improvement `n·(E_n(θ⁰) - E_n(θ))`; positive
/// exactly when θ fits the sample better than θ⁰.
pub fn overfit_statistic(data: &Dataset, theta0: &ParamVector, theta: &ParamVector) -> Result<f64> {
    let n = data.n() as f64;
    Ok(n * (theta0.mse(data)? - theta.mse(data)?))
}

/// Bound statistic from a sample of generalized-derivative values:
/// `(1/2λ)·(Σd)²/Σ(d)₋²` when `Σd > 0`, else 0. The negative-part sum
/// must be positive, otherwise the ratio is undefined.
pub fn bound_statistic_from_derivatives(derivatives: &Array1<f64>, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let sum: f64 = derivatives.sum();
    let neg_sq: f64 = derivatives
        .iter()
        .map(|&d| {
            let neg = d.min(0.0);
            neg * neg
        })
        .sum();
    if neg_sq <= 0.0 {
        return Err(Error::NoNegativePart);
    }
    if sum <= 0.0 {
        return Ok(0.0);
    }
    Ok(sum * sum / (2.0 * lambda * neg_sq))
}

/// Bound statistic over the rows of `data` for the candidate `theta`.
pub fn bound_statistic(
    data: &Dataset,
    theta: &ParamVector,
    theta0: &ParamVector,
    lambda: f64,
    norm: f64,
) -> Result<f64> {
    if !(norm > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "norm must be positive, got {norm}"
        )));
    }
    let deltas = delta_sq_batch(theta, theta0, data)?;
    let derivatives = deltas.mapv(|d2| (-lambda * d2).exp_m1() / norm);
    bound_statistic_from_derivatives(&derivatives, lambda)
}

/// `log(1+u) ≤ u - (u)₋²/2` for `u > -1`; the pointwise step behind the
/// bound.
pub fn elementary_inequality_holds(u: f64) -> bool {
    let neg = u.min(0.0);
    u.ln_1p() <= u - 0.5 * neg * neg
}

/// One candidate's comparison of the two statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThetaRecord {
    /// 0..theta_draws-1 are random draws; the last index is the fitted
    /// candidate.
    pub theta_index: usize,
    pub overfit_stat: f64,
    pub bound_stat: f64,
    pub norm_estimate: f64,
    pub violated: bool,
}

/// Outcome of [`verify_inequality`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub lambda: f64,
    pub n: usize,
    pub records: Vec<ThetaRecord>,
    /// Draws skipped because the candidate was indistinguishable from
    /// the generator (norm below threshold) or had no negative part.
    pub skipped_degenerate: usize,
    pub violation_count: usize,
    /// Largest overfit/bound ratio among candidates with a positive
    /// bound; absent when every bound degenerated to zero.
    pub max_ratio: Option<f64>,
    /// Failures in the elementary-inequality sweep (expected 0).
    pub elementary_check_failures: usize,
}

impl BoundReport {
    /// `violations: V / T` with T the number of evaluated candidates.
    pub fn summary_line(&self) -> String {
        format!("violations: {} / {}", self.violation_count, self.records.len())
    }

    /// Writes `theta_index,overfit_stat,bound_stat,norm_estimate,violated`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "theta_index,overfit_stat,bound_stat,norm_estimate,violated")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{}",
                r.theta_index, r.overfit_stat, r.bound_stat, r.norm_estimate, r.violated
            )?;
        }
        Ok(())
    }
}

fn random_candidate(arch: Architecture, seed: u64) -> ParamVector {
    let mut rng = rng_from(seed);
    let values: Vec<f64> = (0..arch.param_dim())
        .map(|_| rng.gen_range(-DRAW_BOX..=DRAW_BOX))
        .collect();
    ParamVector::from_vec(arch, values).expect("dimension by construction")
}

/// Draws a dataset of size `n` from the generating model, fits `arch`
/// on it, and checks `overfit ≤ bound` for `theta_draws` random
/// candidates plus the fitted one. The norm uses a fresh Monte-Carlo
/// substream per candidate; a violation is counted only when the gap
/// exceeds the norm's propagated 3-standard-error band plus a small
/// float tolerance. Also sweeps the elementary inequality on 10⁶
/// random points of `(-1, 10]`.
pub fn verify_inequality(
    config: &BoundConfig,
    arch: Architecture,
    theta0: &ParamVector,
    n: usize,
) -> Result<BoundReport> {
    config.validate()?;
    if arch.d != theta0.arch().d || arch.k < theta0.arch().k {
        return Err(Error::InvalidConfig(format!(
            "candidate architecture {}x{} cannot realize the generator {}x{}",
            arch.d,
            arch.k,
            theta0.arch().d,
            theta0.arch().k
        )));
    }
    let data = simulation::gen_dataset(theta0, n, derive_seed(config.rng_seed, &[STREAM_DATA, 0]))?;

    // Candidate list: random draws, then the fitted parameter. Forcing
    // θ⁰ replaces the draws and drops the fit so every path degenerates.
    let mut candidates: Vec<ParamVector> = Vec::with_capacity(config.theta_draws + 1);
    if config.force_theta0 {
        for _ in 0..config.theta_draws {
            candidates.push(theta0.clone());
        }
    } else {
        for i in 0..config.theta_draws {
            candidates.push(random_candidate(
                arch,
                derive_seed(config.rng_seed, &[STREAM_DRAW, i as u64]),
            ));
        }
        let fit_config = FitConfig {
            rng_seed: derive_seed(config.rng_seed, &[STREAM_FIT, 0]),
            ..FitConfig::default()
        };
        candidates.push(optimize::fit(arch, &data, &fit_config)?.theta_hat);
    }

    let evaluated: Vec<(usize, Result<ThetaRecord>)> = candidates
        .par_iter()
        .enumerate()
        .map(|(i, theta)| {
            let norm_seed = derive_seed(config.rng_seed, &[STREAM_NORM, i as u64]);
            let record = evaluate_candidate(config, &data, theta, theta0, i, norm_seed);
            (i, record)
        })
        .collect();

    let mut records = Vec::new();
    let mut skipped = 0;
    for (_, outcome) in evaluated {
        match outcome {
            Ok(r) => records.push(r),
            Err(Error::ThetaIndistinguishable) | Err(Error::NoNegativePart) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    let violation_count = records.iter().filter(|r| r.violated).count();
    let max_ratio = records
        .iter()
        .filter(|r| r.bound_stat > 0.0)
        .map(|r| r.overfit_stat / r.bound_stat)
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))));

    let elementary_check_failures =
        elementary_sweep(derive_seed(config.rng_seed, &[STREAM_CHECK, 0]), 1_000_000);

    Ok(BoundReport {
        lambda: config.lambda,
        n,
        records,
        skipped_degenerate: skipped,
        violation_count,
        max_ratio,
        elementary_check_failures,
    })
}

fn evaluate_candidate(
    config: &BoundConfig,
    data: &Dataset,
    theta: &ParamVector,
    theta0: &ParamVector,
    index: usize,
    norm_seed: u64,
) -> Result<ThetaRecord> {
    let (norm, se) = norm_estimate_with_se(
        theta,
        theta0,
        config.lambda,
        config.norm_mc_samples,
        norm_seed,
    )?;
    let overfit = overfit_statistic(data, theta0, theta)?;
    let deltas = delta_sq_batch(theta, theta0, data)?;
    let contrast = deltas.mapv(|d2| (-config.lambda * d2).exp_m1());

    let bound_at = |v: f64| -> Result<f64> {
        let derivatives = contrast.mapv(|c| c / v);
        bound_statistic_from_derivatives(&derivatives, config.lambda)
    };
    let bound = bound_at(norm)?;
    // Slack: re-evaluate the bound across the norm's 3-SE band and keep
    // the most permissive value, then allow for float roundoff.
    let hi = (norm + 3.0 * se).max(NORM_FLOOR);
    let lo = (norm - 3.0 * se).max(NORM_FLOOR);
    let slack_bound = bound.max(bound_at(hi)?).max(bound_at(lo)?);
    let tolerance = 1e-6 * (1.0 + overfit.abs() + bound.abs());
    let violated = overfit > slack_bound + tolerance;

    Ok(ThetaRecord {
        theta_index: index,
        overfit_stat: overfit,
        bound_stat: bound,
        norm_estimate: norm,
        violated,
    })
}

/// Counts failures of the elementary inequality over `count` uniform
/// draws from `(-1, 10]`.
fn elementary_sweep(seed: u64, count: usize) -> usize {
    let mut rng = rng_from(seed);
    let mut failures = 0;
    for _ in 0..count {
        let u = rng.gen_range(-1.0..=10.0);
        if u <= -1.0 {
            continue;
        }
        if !elementary_inequality_holds(u) {
            failures += 1;
        }
    }
    failures
}
