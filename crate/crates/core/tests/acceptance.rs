//! End-to-end acceptance checks: selection patterns at desk scale, the
//! overfitting-bound verifier, derivative normalization, and manifest
//! reproducibility. Each check prints one `ACCEPT NN name: PASS|FAIL`
//! line.

use std::sync::OnceLock;

use mlpsel::bound::{
    elementary_inequality_holds, gen_derivative, norm_estimate, verify_inequality, BoundConfig,
};
use mlpsel::mlp::ParamVector;
use mlpsel::optimize::FitConfig;
use mlpsel::runner::{self, BoundSpec, SimulateSpec, MANIFEST_FILE};
use mlpsel::seed::rng_from;
use mlpsel::selection::{PenaltyFamily, PenaltySpec, VarianceRegime};
use mlpsel::simulation::{
    gen_true_data, noise_variance, run_study, true_theta, SelectionTable, SimConfig,
};
use rand::Rng;

fn accept(number: u8, name: &str, pass: bool, detail: String) {
    println!(
        "ACCEPT {number:02} {name}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "acceptance check {number:02} {name} failed: {detail}");
}

fn known(family: PenaltyFamily) -> PenaltySpec {
    PenaltySpec::new(family, VarianceRegime::Known(noise_variance()))
}

fn study(n: usize, criteria: Vec<PenaltySpec>, seed: u64) -> SelectionTable {
    run_study(&SimConfig {
        n,
        reps: 20,
        k_max: 6,
        criteria,
        fit: FitConfig::default(),
        rng_seed: seed,
    })
    .expect("study")
}

fn study_known_500() -> &'static SelectionTable {
    static TABLE: OnceLock<SelectionTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        study(
            500,
            vec![
                known(PenaltyFamily::Bic),
                known(PenaltyFamily::Sp),
                known(PenaltyFamily::Aic),
            ],
            1,
        )
    })
}

fn study_log_500() -> &'static SelectionTable {
    static TABLE: OnceLock<SelectionTable> = OnceLock::new();
    // The log regime needs no variance input; none appears in this run.
    TABLE.get_or_init(|| {
        study(
            500,
            vec![PenaltySpec::new(PenaltyFamily::Sp, VarianceRegime::LogMse)],
            2,
        )
    })
}

fn study_100() -> &'static SelectionTable {
    static TABLE: OnceLock<SelectionTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        study(
            100,
            vec![
                known(PenaltyFamily::Vsp),
                PenaltySpec::new(PenaltyFamily::Bic, VarianceRegime::Plugin),
            ],
            3,
        )
    })
}

fn study_1000() -> &'static SelectionTable {
    static TABLE: OnceLock<SelectionTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        study(
            1000,
            vec![
                PenaltySpec::new(PenaltyFamily::Bic, VarianceRegime::Plugin),
                known(PenaltyFamily::Bic),
                known(PenaltyFamily::Aic),
            ],
            4,
        )
    })
}

#[test]
fn a01_gradient_matches_finite_differences() {
    let step = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let data = gen_true_data(20, 900 + i).unwrap();
        let arch = mlpsel::Architecture::new(2, 3).unwrap();
        let mut rng = rng_from(800 + i);
        let values: Vec<f64> = (0..arch.param_dim())
            .map(|_| rng.gen_range(-1.5..=1.5))
            .collect();
        let theta = ParamVector::from_vec(arch, values.clone()).unwrap();
        let analytic = theta.mse_gradient(&data).unwrap();
        for j in 0..arch.param_dim() {
            let mut plus = values.clone();
            plus[j] += step;
            let mut minus = values.clone();
            minus[j] -= step;
            let fd = (ParamVector::from_vec(arch, plus).unwrap().mse(&data).unwrap()
                - ParamVector::from_vec(arch, minus).unwrap().mse(&data).unwrap())
                / (2.0 * step);
            let rel = (analytic[j] - fd).abs() / fd.abs().max(1.0);
            worst = worst.max(rel);
        }
    }
    accept(
        1,
        "gradient-check",
        worst < 1e-5,
        format!("worst relative error {worst:.3e} over 100 instances"),
    );
}

#[test]
fn a02_bic_and_sp_concentrate_at_three_units() {
    let table = study_known_500();
    let bic = table.count(known(PenaltyFamily::Bic), 3);
    let sp = table.count(known(PenaltyFamily::Sp), 3);
    accept(
        2,
        "consistency-n500",
        bic >= 18 && sp >= 18,
        format!("BIC {bic}/20 and SP {sp}/20 at k=3"),
    );
}

#[test]
fn a03_aic_over_selects() {
    let table = study_known_500();
    let over = table.count_where(known(PenaltyFamily::Aic), |k| k > 3);
    accept(3, "aic-over-selection", over >= 14, format!("AIC {over}/20 at k>3"));
}

#[test]
fn a04_vsp_under_selects_at_small_n() {
    let table = study_100();
    let under = table.count_where(known(PenaltyFamily::Vsp), |k| k < 3);
    accept(
        4,
        "vsp-small-sample",
        under >= 10,
        format!("VSP {under}/20 at k<3 with n=100"),
    );
}

#[test]
fn a05_log_regime_is_consistent_without_variance() {
    let table = study_log_500();
    let hits = table.count(
        PenaltySpec::new(PenaltyFamily::Sp, VarianceRegime::LogMse),
        3,
    );
    accept(5, "log-regime-n500", hits >= 18, format!("SP:log {hits}/20 at k=3"));
}

#[test]
fn a06_plugin_variance_pathology_and_recovery() {
    let plugin = PenaltySpec::new(PenaltyFamily::Bic, VarianceRegime::Plugin);
    let over_small = study_100().count_where(plugin, |k| k > 3);
    let hits_large = study_1000().count(plugin, 3);
    accept(
        6,
        "plugin-pathology",
        over_small >= 8 && hits_large >= 18,
        format!("BIC:plugin {over_small}/20 at k>3 with n=100, {hits_large}/20 at k=3 with n=1000"),
    );
}

/// Companion patterns on the shared n=1000 study: the known-variance
/// criteria keep behaving as at n=500.
#[test]
fn a06b_known_variance_patterns_at_n1000() {
    let table = study_1000();
    let bic = table.count(known(PenaltyFamily::Bic), 3);
    let aic_over = table.count_where(known(PenaltyFamily::Aic), |k| k > 3);
    assert!(bic >= 18, "BIC:known {bic}/20 at k=3 with n=1000");
    assert!(aic_over >= 10, "AIC:known {aic_over}/20 at k>3 with n=1000");
}

#[test]
fn a07_overfit_never_beats_the_bound() {
    let config = BoundConfig {
        lambda: 0.5,
        norm_mc_samples: 100_000,
        theta_draws: 200,
        rng_seed: 5,
        force_theta0: false,
    };
    let report = verify_inequality(
        &config,
        mlpsel::Architecture::new(2, 3).unwrap(),
        &true_theta(),
        500,
    )
    .unwrap();
    let total = report.records.len();
    accept(
        7,
        "bound-verification",
        report.violation_count == 0 && total == 201 && report.skipped_degenerate == 0,
        format!(
            "{} violations over {total} candidates (max ratio {:.6})",
            report.violation_count,
            report.max_ratio.unwrap_or(0.0)
        ),
    );
}

#[test]
fn a08_generalized_derivative_is_standardized() {
    // Small random perturbations of the generator's output layer; the
    // tilt 1/(2 sigma^2) keeps the derivative's population mean at zero
    // to high order under the uniform noise, and output-layer moves keep
    // its fourth moment tame so the fixed bands below have real margin.
    let lambda = 1.5;
    let eval_m = 100_000;
    let mean_band = 3.0 / (eval_m as f64).sqrt();
    let theta0 = true_theta();
    let mut worst_mean: f64 = 0.0;
    let mut worst_m2_gap: f64 = 0.0;
    for i in 0..20u64 {
        let mut rng = rng_from(1000 + i);
        let mut values: Vec<f64> = theta0.values().to_vec();
        for v in values.iter_mut().take(1 + theta0.arch().k) {
            *v += rng.gen_range(-0.01..=0.01);
        }
        let theta = ParamVector::from_vec(theta0.arch(), values).unwrap();
        let norm = norm_estimate(&theta, &theta0, lambda, 1_000_000, 2000 + i).unwrap();
        let fresh = gen_true_data(eval_m, 3000 + i).unwrap();
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for t in 0..fresh.n() {
            let row = fresh.row(t).to_vec();
            let d = gen_derivative(&theta, &theta0, lambda, &row, fresh.targets()[t], norm)
                .unwrap();
            sum += d;
            sum_sq += d * d;
        }
        let mean = sum / eval_m as f64;
        let m2 = sum_sq / eval_m as f64;
        worst_mean = worst_mean.max(mean.abs());
        worst_m2_gap = worst_m2_gap.max((m2 - 1.0).abs());
    }
    accept(
        8,
        "derivative-normalization",
        worst_mean <= mean_band && worst_m2_gap <= 0.02,
        format!(
            "worst |mean| {worst_mean:.5} (band {mean_band:.5}), worst |m2-1| {worst_m2_gap:.5} (band 0.02) over 20 draws"
        ),
    );
}

#[test]
fn a09_elementary_inequality_sweep() {
    let mut rng = rng_from(6);
    let mut failures = 0usize;
    let mut checked = 0usize;
    while checked < 1_000_000 {
        let u = rng.gen_range(-1.0..=10.0);
        if u <= -1.0 {
            continue;
        }
        checked += 1;
        if !elementary_inequality_holds(u) {
            failures += 1;
        }
    }
    accept(
        9,
        "elementary-inequality",
        failures == 0,
        format!("{failures} failures over {checked} points"),
    );
}

#[test]
fn a10_manifest_replay_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut all_identical = true;
    let mut detail = Vec::new();

    // simulate, with data dumps
    let sim_spec = SimulateSpec {
        sim: SimConfig {
            n: 60,
            reps: 3,
            k_max: 3,
            criteria: vec![known(PenaltyFamily::Bic)],
            fit: FitConfig {
                restarts: 4,
                max_iterations: 150,
                ..FitConfig::default()
            },
            rng_seed: 7,
        },
        dump_data: true,
    };
    let sim_a = dir.path().join("sim_a");
    let (sim_manifest, _) =
        runner::execute_simulate(&sim_spec, &sim_a, vec!["test".into()]).unwrap();
    let sim_b = dir.path().join("sim_b");
    runner::replay(&sim_a.join(MANIFEST_FILE), &sim_b).unwrap();
    for name in &sim_manifest.outputs {
        let same = std::fs::read(sim_a.join(name)).unwrap() == std::fs::read(sim_b.join(name)).unwrap();
        all_identical &= same;
        if !same {
            detail.push(format!("simulate/{name}"));
        }
    }

    // bound
    let bound_spec = BoundSpec {
        bound: BoundConfig {
            lambda: 0.5,
            norm_mc_samples: 5_000,
            theta_draws: 5,
            rng_seed: 8,
            force_theta0: false,
        },
        n: 80,
    };
    let bound_a = dir.path().join("bound_a");
    let (bound_manifest, _) =
        runner::execute_bound(&bound_spec, &bound_a, vec!["test".into()]).unwrap();
    let bound_b = dir.path().join("bound_b");
    runner::replay(&bound_a.join(MANIFEST_FILE), &bound_b).unwrap();
    for name in &bound_manifest.outputs {
        let same =
            std::fs::read(bound_a.join(name)).unwrap() == std::fs::read(bound_b.join(name)).unwrap();
        all_identical &= same;
        if !same {
            detail.push(format!("bound/{name}"));
        }
    }

    accept(
        10,
        "manifest-replay",
        all_identical,
        if detail.is_empty() {
            "all replayed outputs byte-identical".to_string()
        } else {
            format!("differing files: {}", detail.join(", "))
        },
    );
}
