//! Box-constrained BFGS with multi-restart for the least-squares fit.
//!
//! Each restart runs plain BFGS with a backtracking Armijo line search;
//! accepted iterates are clamped into the parameter box. The fit keeps
//! the best restart. All randomness comes from the configured seed, one
//! ChaCha stream per restart, so results do not depend on scheduling.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mlp::{Architecture, Dataset, ParamVector};

const ARMIJO_C1: f64 = 1e-4;
const BACKTRACK_FACTOR: f64 = 0.5;
const MAX_BACKTRACKS: usize = 50;
const CURVATURE_FLOOR: f64 = 1e-10;

/// Settings for the multi-restart fit.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct FitConfig {
    /// Independent random initializations per architecture.
    pub restarts: usize,
    /// Iteration cap per restart.
    pub max_iterations: usize,
    /// Convergence threshold on the gradient sup-norm.
    pub gradient_tolerance: f64,
    /// Initial parameters are drawn uniformly from this interval around 0.
    pub init_half_width: f64,
    /// Half-width of the parameter box.
    pub box_bound: f64,
    pub rng_seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            restarts: 10,
            max_iterations: 500,
            gradient_tolerance: 1e-6,
            init_half_width: 1.0,
            box_bound: 100.0,
            rng_seed: 0,
        }
    }
}

impl FitConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.restarts < 1 {
            return Err(Error::InvalidConfig("restarts must be >= 1".into()));
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidConfig("max_iterations must be >= 1".into()));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(Error::InvalidConfig("gradient_tolerance must be > 0".into()));
        }
        if !(self.init_half_width > 0.0) || !(self.box_bound > 0.0) {
            return Err(Error::InvalidConfig(
                "init_half_width and box_bound must be > 0".into(),
            ));
        }
        if self.init_half_width > self.box_bound {
            return Err(Error::InvalidConfig(
                "init_half_width must not exceed box_bound".into(),
            ));
        }
        Ok(())
    }
}

/// Best-restart outcome of [`fit`].
#[derive(Debug, Clone)]
pub struct FitResult {
    pub theta_hat: ParamVector,
    pub mse_hat: f64,
    pub restart_index: usize,
    pub iterations_used: usize,
    pub converged: bool,
}

/// One accepted iterate in a restart's descent trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub restart_index: usize,
    pub iteration: usize,
    pub objective: f64,
    pub gradient_norm: f64,
}

/// Writes trace records as `restart_index,iteration,objective,gradient_norm`.
pub fn write_trace_csv<W: std::io::Write>(records: &[TraceRecord], mut out: W) -> Result<()> {
    writeln!(out, "restart_index,iteration,objective,gradient_norm")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{}",
            r.restart_index, r.iteration, r.objective, r.gradient_norm
        )?;
    }
    Ok(())
}

/// Final state of a single BFGS run.
#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub x: Array1<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn sup_norm(v: &Array1<f64>) -> f64 {
    v.iter().fold(0.0, |m, &x| m.max(x.abs()))
}

fn clamp_into_box(x: &mut Array1<f64>, bound: f64) {
    x.mapv_inplace(|v| v.clamp(-bound, bound));
}

/// Minimizes `objective` from `x0` inside the box `[-box_bound, box_bound]^D`.
///
/// The callback returns the objective value and its gradient. A
/// non-finite value or gradient aborts the run with an error so the
/// caller can discard the restart. When `trace` is supplied, every
/// accepted iterate is appended (with `restart_index` left at 0 for the
/// caller to fill in).
pub fn bfgs_minimize<F>(
    mut objective: F,
    x0: &Array1<f64>,
    config: &FitConfig,
    mut trace: Option<&mut Vec<TraceRecord>>,
) -> Result<BfgsOutcome>
where
    F: FnMut(&Array1<f64>) -> (f64, Array1<f64>),
{
    let dim = x0.len();
    let mut x = x0.clone();
    clamp_into_box(&mut x, config.box_bound);
    let (mut fx, mut grad) = objective(&x);
    check_finite(fx, &grad)?;

    let mut inv_hessian = Array2::<f64>::eye(dim);
    let mut iterations = 0;
    let mut converged = sup_norm(&grad) < config.gradient_tolerance;
    record(&mut trace, 0, fx, sup_norm(&grad));

    while !converged && iterations < config.max_iterations {
        let mut direction = -inv_hessian.dot(&grad);
        let mut slope = direction.dot(&grad);
        if !(slope < 0.0) {
            // Not a descent direction; reset the curvature model.
            inv_hessian = Array2::eye(dim);
            direction = -grad.clone();
            slope = direction.dot(&grad);
        }

        // Backtracking Armijo search, evaluating the clamped candidate so
        // descent holds for the point actually kept.
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let mut candidate = &x + &(step * &direction);
            clamp_into_box(&mut candidate, config.box_bound);
            let (f_new, g_new) = objective(&candidate);
            check_finite(f_new, &g_new)?;
            if f_new <= fx + ARMIJO_C1 * step * slope {
                accepted = Some((candidate, f_new, g_new));
                break;
            }
            step *= BACKTRACK_FACTOR;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            break; // line search failed; best point so far stands
        };

        let s = &x_new - &x;
        let y = &g_new - &grad;
        let sy = s.dot(&y);
        if sy > CURVATURE_FLOOR {
            // H <- (I - r s y^T) H (I - r y s^T) + r s s^T
            let rho = 1.0 / sy;
            let hy = inv_hessian.dot(&y);
            let yhy = y.dot(&hy);
            let s_col = s.view().insert_axis(ndarray::Axis(1));
            let hy_col = hy.view().insert_axis(ndarray::Axis(1));
            let term = rho * (1.0 + rho * yhy);
            inv_hessian = inv_hessian + term * s_col.dot(&s_col.t())
                - rho * (s_col.dot(&hy_col.t()) + hy_col.dot(&s_col.t()));
        }

        x = x_new;
        fx = f_new;
        grad = g_new;
        iterations += 1;
        let gnorm = sup_norm(&grad);
        record(&mut trace, iterations, fx, gnorm);
        converged = gnorm < config.gradient_tolerance;
    }

    Ok(BfgsOutcome {
        x,
        value: fx,
        iterations,
        converged,
    })
}

fn check_finite(value: f64, grad: &Array1<f64>) -> Result<()> {
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("objective or gradient".into()));
    }
    Ok(())
}

fn record(trace: &mut Option<&mut Vec<TraceRecord>>, iteration: usize, f: f64, g: f64) {
    if let Some(t) = trace.as_deref_mut() {
        t.push(TraceRecord {
            restart_index: 0,
            iteration,
            objective: f,
            gradient_norm: g,
        });
    }
}

fn initial_point(arch: Architecture, config: &FitConfig, restart: usize) -> Array1<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    rng.set_stream(restart as u64);
    let h = config.init_half_width;
    Array1::from_iter((0..arch.param_dim()).map(|_| rng.gen_range(-h..=h)))
}

fn run_restart(
    arch: Architecture,
    data: &Dataset,
    config: &FitConfig,
    restart: usize,
    trace: Option<&mut Vec<TraceRecord>>,
) -> Result<BfgsOutcome> {
    let x0 = initial_point(arch, config, restart);
    let objective = |x: &Array1<f64>| {
        let theta = ParamVector::new(arch, x.clone()).expect("dimension fixed by caller");
        theta
            .mse_with_gradient(data)
            .expect("data validated by caller")
    };
    bfgs_minimize(objective, &x0, config, trace)
}

/// Least-squares fit of the given architecture: `restarts` independent
/// BFGS runs from small random initializations, keeping the best final
/// value. Deterministic for a fixed `rng_seed`.
pub fn fit(arch: Architecture, data: &Dataset, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    // Validate dimensions once up front.
    ParamVector::zeros(arch).mse(data)?;

    let outcomes: Vec<(usize, Result<BfgsOutcome>)> = (0..config.restarts)
        .into_par_iter()
        .map(|r| (r, run_restart(arch, data, config, r, None)))
        .collect();
    pick_best(arch, outcomes)
}

/// Like [`fit`], but also returns the per-restart descent traces.
pub fn fit_traced(
    arch: Architecture,
    data: &Dataset,
    config: &FitConfig,
) -> Result<(FitResult, Vec<TraceRecord>)> {
    config.validate()?;
    ParamVector::zeros(arch).mse(data)?;

    let outcomes: Vec<(usize, Result<BfgsOutcome>, Vec<TraceRecord>)> = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let mut trace = Vec::new();
            let outcome = run_restart(arch, data, config, r, Some(&mut trace));
            for rec in &mut trace {
                rec.restart_index = r;
            }
            (r, outcome, trace)
        })
        .collect();

    let mut all_traces = Vec::new();
    let mut flat = Vec::new();
    for (r, outcome, trace) in outcomes {
        all_traces.extend(trace);
        flat.push((r, outcome));
    }
    Ok((pick_best(arch, flat)?, all_traces))
}

fn pick_best(arch: Architecture, outcomes: Vec<(usize, Result<BfgsOutcome>)>) -> Result<FitResult> {
    let mut best: Option<(usize, BfgsOutcome)> = None;
    for (r, outcome) in outcomes {
        let Ok(o) = outcome else { continue }; // failed restart is skipped
        match &best {
            Some((_, b)) if b.value <= o.value => {}
            _ => best = Some((r, o)),
        }
    }
    let (restart_index, o) = best.ok_or(Error::NoSuccessfulRestart)?;
    Ok(FitResult {
        theta_hat: ParamVector::new(arch, o.x).expect("optimizer preserves dimension"),
        mse_hat: o.value,
        restart_index,
        iterations_used: o.iterations,
        converged: o.converged,
    })
}
