//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits nonzero if any failed.
//!
//! Run alone with `cargo test -p allospec --test acceptance`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use allospec::bounds::{condition_general, subgaussian_k};
use allospec::experiments::{
    calibrate, run_davis_kahan_check, run_misclassification, run_opnorm, run_recovery, run_subgaussian_check,
    Calibration, ExperimentConfig, SummaryRow,
};
use allospec::model::{build_model, mixture_covariance, mixture_spectrum, ModelSpec};
use allospec::numerics::{eig_sym, std_normal_cdf};
use allospec::sampler::RngStream;
use common::*;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn config(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    let mut cfg = ExperimentConfig::load(&path, &[]).expect("sample config loads");
    cfg.workers = 0;
    cfg
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed <= Duration::from_secs(limit_secs)
}

/// Mixture spectrum: leading eigenvector shared with the first component,
/// closed-form leading eigenvalue, and the bound on the second eigenvalue.
fn mixture_spectrum_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = RngStream::new(9001, 0);
    let (mut worst_align, mut worst_l1, mut worst_l2_excess, mut worst_witness) = (0.0f64, 0.0f64, f64::MIN, 0.0f64);
    let models = 120;
    for i in 0..models {
        let shared = i % 3 == 0;
        let spec = random_model_spec(&mut rng, 50, shared);
        let model = build_model(&spec).unwrap();
        let mix = eig_sym(&mixture_covariance(&model)).unwrap();
        let first = eig_sym(model.sigma1()).unwrap();
        let second = eig_sym(model.sigma2()).unwrap();
        let (p1, p2) = (model.pi1(), model.pi2());

        worst_align = worst_align.max(1.0 - mix.vector(0).dot(&first.vector(0)).abs());
        let closed_l1 = p1 * first.values[0] + p2 * second.values[0] + 4.0 * p1 * p2 * model.mu_norm().powi(2);
        worst_l1 = worst_l1.max(rel(mix.values[0], closed_l1));
        let l2_bound = p1 * first.values[1] + p2 * second.values[1];
        worst_l2_excess = worst_l2_excess.max(mix.values[1] - l2_bound);
        if shared {
            worst_witness = worst_witness.max(rel(mix.values[1], l2_bound));
        }
        // The library's closed form agrees with the independent evaluation.
        worst_l1 = worst_l1.max(rel(mixture_spectrum(&model).unwrap().lambda1_mix, closed_l1));
    }
    let elapsed = start.elapsed();
    let pass = worst_align <= 1e-9
        && worst_l1 <= 1e-9
        && worst_l2_excess <= 1e-10
        && worst_witness <= 1e-9
        && within(elapsed, 10);
    outcome(
        pass,
        format!(
            "{models} models; 1-|<g,g1>| max {worst_align:.1e}, lambda1 rel err max {worst_l1:.1e}, \
             lambda2 excess max {worst_l2_excess:.1e}, shared-tail equality rel err max {worst_witness:.1e}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

/// Sub-gaussian constant and the exponential-moment check.
fn subgaussian_constant() -> Outcome {
    let start = Instant::now();
    let k = subgaussian_k();
    let exact = (32.0 / (4.0 - std::f64::consts::E)).sqrt();
    let displayed = (k * 1e4).trunc() / 1e4;
    let mut cfg = config("misclassification.json");
    cfg.m_grid = vec![1];
    // Low and high signal; the μ direction is the worst case at high η.
    cfg.eta_grid = Some(vec![1.0, 64.0]);
    cfg.directions = 20;
    cfg.draws = 1_000_000;
    cfg.seed = 4;
    let rows = run_subgaussian_check(&cfg).unwrap();
    let elapsed = start.elapsed();
    let failures = rows.iter().filter(|r| !r.pass).count();
    let worst = rows.iter().map(|r| r.estimate).fold(f64::MIN, f64::max);
    let pass = k == exact
        && displayed == 4.9966
        && rows.len() == 40
        && rows.iter().all(|r| r.draws >= 1_000_000)
        && failures == 0
        && within(elapsed, 120);
    outcome(
        pass,
        format!(
            "K = {k:.11}; {} directions x {} draws, {failures} failures, largest estimate {worst:.5}, {:.1}s",
            rows.len(),
            cfg.draws,
            elapsed.as_secs_f64()
        ),
    )
}

static SYMMETRIC_RUN: OnceLock<(Vec<SummaryRow>, ExperimentConfig, Duration)> = OnceLock::new();

/// Misclassification grid on the model whose components share `λ₁`.
fn symmetric_run() -> &'static (Vec<SummaryRow>, ExperimentConfig, Duration) {
    SYMMETRIC_RUN.get_or_init(|| {
        let cfg = config("misclassification.json");
        let start = Instant::now();
        let rows = run_misclassification(&cfg).unwrap();
        (rows, cfg, start.elapsed())
    })
}

fn oracle_convergence() -> Outcome {
    let (rows, cfg, elapsed) = symmetric_run();
    let spec = &cfg.model_spec;
    let symmetric = spec.eigvals1[0] == spec.eigvals2[0];
    let mut pass = symmetric && cfg.reps == 500 && rows.len() == 3 && within(*elapsed, 300);
    let mut parts = Vec::new();
    for r in rows {
        let oracle = std_normal_cdf(-r.eta.sqrt());
        let z = (r.emp_misclass - oracle) / r.emp_stderr;
        pass &= z.abs() <= 3.0 && r.m == 10_000 && r.n == 10;
        parts.push(format!(
            "eta={:.2}: {:.5} vs {:.5} (z={z:+.2})",
            r.eta, r.emp_misclass, oracle
        ));
    }
    outcome(pass, format!("{}, {:.1}s", parts.join("; "), elapsed.as_secs_f64()))
}

static CALIBRATION: OnceLock<(Calibration, Duration)> = OnceLock::new();

fn calibration() -> &'static (Calibration, Duration) {
    CALIBRATION.get_or_init(|| {
        let cfg = config("opnorm.json");
        let start = Instant::now();
        let cal = calibrate(&cfg).unwrap();
        (cal, start.elapsed())
    })
}

/// Wherever the sample-size condition holds under calibrated constants the
/// empirical rate respects the bound, and the Mills envelope dominates the
/// bound where it applies.
fn bound_coherence() -> Outcome {
    let (rows, cfg, _) = symmetric_run();
    let k = calibration().0.constants;
    let mut pass = cfg.reps >= 500;
    let mut holding = 0;
    let mut parts = Vec::new();
    for (r, p) in rows.iter().zip(cfg.grid()) {
        let sm = build_model(&p.spec).unwrap().summary().unwrap();
        let cond = condition_general(r.m as f64, r.n as f64, cfg.alpha, &sm, &k).unwrap();
        if cond.holds {
            holding += 1;
            pass &= r.emp_misclass <= r.misclass_bound;
        }
        if (1.0 - cfg.alpha) * r.eta.sqrt() >= 1.0 {
            pass &= r.mills_bound >= r.misclass_bound;
        }
        parts.push(format!(
            "eta={:.2}: condition {} (lhs {:.3} rhs {:.3}), emp {:.4} bound {:.4} mills {:.4}",
            r.eta, cond.holds, cond.lhs, cond.rhs, r.emp_misclass, r.misclass_bound, r.mills_bound
        ));
    }
    outcome(
        pass,
        format!(
            "C={:.4} c={:.3}; condition holds at {holding}/{} points; {}",
            k.big_c,
            k.small_c,
            rows.len(),
            parts.join("; ")
        ),
    )
}

/// Ratio of the empirical operator-norm quantile to the bound with `C = 1`,
/// across seeds and sample sizes.
fn calibration_stability() -> Outcome {
    let (cal, cal_time) = calibration();
    let start = Instant::now();
    let mut c_hats: Vec<(u64, usize, f64)> = cal.opnorm.iter().map(|r| (r.seed, r.m, r.c_hat)).collect();
    let base = config("opnorm.json");
    for seed in [base.seed + 1, base.seed + 2] {
        let mut cfg = base.clone();
        cfg.seed = seed;
        c_hats.extend(run_opnorm(&cfg).unwrap().iter().map(|r| (r.seed, r.m, r.c_hat)));
    }
    let elapsed = start.elapsed() + *cal_time;
    let values: Vec<f64> = c_hats.iter().map(|c| c.2).collect();
    let (lo, hi) = (
        values.iter().copied().fold(f64::INFINITY, f64::min),
        values.iter().copied().fold(f64::MIN, f64::max),
    );
    let spread = hi / lo - 1.0;
    let pass = base.n_grid.is_empty()
        && base.model_spec.n == 20
        && base.m_grid == [2000, 8000]
        && base.u_grid == [2.0]
        && base.reps == 2000
        && values.len() == 6
        && values.iter().all(|v| v.is_finite() && *v > 0.0)
        && spread <= 0.25
        && within(elapsed, 300);
    let listing: Vec<String> = c_hats
        .iter()
        .map(|(s, m, c)| format!("seed {s} m {m}: {c:.5}"))
        .collect();
    outcome(
        pass,
        format!(
            "{}; spread {:.1}%, {:.1}s",
            listing.join(", "),
            100.0 * spread,
            elapsed.as_secs_f64()
        ),
    )
}

/// Per-replication eigenvector perturbation inequality and the gap floor.
fn davis_kahan() -> Outcome {
    let mut cfg = config("opnorm.json");
    cfg.m_grid = vec![200, 2000];
    cfg.reps = 600;
    cfg.seed = 6;
    let rows = run_davis_kahan_check(&cfg).unwrap();
    let holds = rows.iter().filter(|r| r.holds).count();
    let gap_ok = rows.iter().all(|r| r.gap_ok);

    let mut rng = RngStream::new(9006, 0);
    let mut worst_gap = f64::INFINITY;
    for _ in 0..100 {
        let spec = ModelSpec {
            pi1: 0.5,
            ..random_model_spec(&mut rng, 30, false)
        };
        let model = build_model(&spec).unwrap();
        let e = eig_sym(&mixture_covariance(&model)).unwrap();
        worst_gap = worst_gap.min(e.values[0] - e.values[1] - model.mu_norm().powi(2));
    }
    let pass = rows.len() >= 1000
        && holds == rows.len()
        && gap_ok
        && worst_gap >= -1e-9
        && rows.iter().all(|r| r.n <= 30 && r.m >= 10 * r.n);
    outcome(
        pass,
        format!(
            "{holds}/{} replications hold; gap floor met on sampled grid: {gap_ok}; \
             min gap - |mu|^2 over 100 random models {worst_gap:.3e}",
            rows.len()
        ),
    )
}

/// Exact recovery becomes more likely along the consistency sweep.
fn consistency_trend() -> Outcome {
    let cfg = config("recovery_sweep.json");
    let start = Instant::now();
    let rows = run_recovery(&cfg).unwrap();
    let elapsed = start.elapsed();
    let expected: Vec<(usize, usize)> = [20usize, 50, 100]
        .iter()
        .map(|&n| (n, (n as f64).powf(1.5).ceil() as usize * 10))
        .collect();
    let shape_ok = cfg.reps == 200
        && rows.iter().map(|r| (r.n, r.m)).collect::<Vec<_>>() == expected
        && rows.iter().all(|r| rel(r.eta, r.n as f64) < 1e-12);
    let monotone = rows.windows(2).all(|w| {
        let slack = 3.0 * (w[0].recovery_stderr.powi(2) + w[1].recovery_stderr.powi(2)).sqrt();
        w[1].recovery_prob >= w[0].recovery_prob - slack
    });
    let last = rows.last().unwrap().recovery_prob;
    let pass = shape_ok && monotone && last >= 0.99 && within(elapsed, 900);
    let listing: Vec<String> = rows
        .iter()
        .map(|r| format!("n={} m={}: {:.3}±{:.3}", r.n, r.m, r.recovery_prob, r.recovery_stderr))
        .collect();
    outcome(pass, format!("{}; {:.1}s", listing.join(", "), elapsed.as_secs_f64()))
}

/// Every experiment kind gives byte-identical output for any worker count.
fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let cases: [(&str, &str, &[&str]); 5] = [
        ("simulate", "misclassification.json", &["reps=24", "m_grid=[500]"]),
        ("sweep-recovery", "recovery_sweep.json", &["reps=16", "n_grid=[20,30]"]),
        ("opnorm", "opnorm.json", &["reps=40", "m_grid=[300]"]),
        ("subgaussian", "opnorm.json", &["draws=5000", "directions=4"]),
        ("davis-kahan", "opnorm.json", &["reps=20", "m_grid=[300]"]),
    ];
    let mut mismatched = Vec::new();
    for (sub, file, sets) in cases {
        let mut outputs = Vec::new();
        for workers in ["1", "4"] {
            let out = dir.path().join(format!("{sub}-{workers}.csv"));
            let mut cmd = Command::new(env!("CARGO_BIN_EXE_allospec"));
            cmd.arg(sub)
                .arg("--config")
                .arg(configs.join(file))
                .arg("--output")
                .arg(&out);
            cmd.args(["--workers", workers, "--seed", "77"]);
            for s in sets {
                cmd.args(["--set", s]);
            }
            let status = cmd.output().unwrap();
            assert!(
                status.status.success(),
                "{sub}: {}",
                String::from_utf8_lossy(&status.stderr)
            );
            outputs.push(std::fs::read(&out).unwrap());
        }
        if outputs[0] != outputs[1] || outputs[0].is_empty() {
            mismatched.push(sub);
        }
    }
    outcome(
        mismatched.is_empty(),
        if mismatched.is_empty() {
            "5 experiment kinds, workers 1 vs 4: identical CSV".to_string()
        } else {
            format!("differing output: {}", mismatched.join(", "))
        },
    )
}

/// Eigensolver invariants, characteristic-polynomial agreement and `Φ`.
fn numerics_floor() -> Outcome {
    let mut rng = RngStream::new(9009, 0);
    let (mut worst_resid, mut worst_orth) = (0.0f64, 0.0f64);
    for i in 0..1000 {
        let n = 1 + i % 64;
        let a = random_spd(&mut rng, n);
        let e = eig_sym(&a).unwrap();
        let scale = a.frobenius_norm();
        let v = &e.vectors;
        for k in 0..n {
            let col = v.column(k);
            let av = a.matvec(&col);
            let r: f64 = av
                .iter()
                .zip(&col)
                .map(|(x, y)| (x - e.values[k] * y).powi(2))
                .sum::<f64>()
                .sqrt();
            worst_resid = worst_resid.max(r / scale);
        }
        let vtv = v.transpose().matmul(v);
        for p in 0..n {
            for q in 0..n {
                let target = if p == q { 1.0 } else { 0.0 };
                worst_orth = worst_orth.max((vtv.get(p, q) - target).abs());
            }
        }
    }
    let mut worst_poly = 0.0f64;
    for i in 0..100 {
        let n = 1 + i % 5;
        let a = random_spd(&mut rng, n);
        let roots = char_poly_roots(&a);
        let e = eig_sym(&a).unwrap();
        if roots.len() != n {
            worst_poly = f64::INFINITY;
            continue;
        }
        for (l, r) in e.values.iter().zip(&roots) {
            worst_poly = worst_poly.max(rel(*l, *r));
        }
    }
    let mut worst_phi = 0.0f64;
    for &(x, p) in PHI_TABLE.iter() {
        worst_phi = worst_phi.max((std_normal_cdf(x) - p).abs());
    }
    let mut x = -10.0;
    while x <= 10.0 {
        worst_phi = worst_phi.max((std_normal_cdf(x) - phi_quadrature(x)).abs());
        x += 0.01;
    }
    let pass = worst_resid <= 1e-12 && worst_orth <= 1e-12 && worst_poly <= 1e-8 && worst_phi <= 1e-12;
    outcome(
        pass,
        format!(
            "1000 SPD: residual/|A|_F max {worst_resid:.1e}, orthonormality max {worst_orth:.1e}; \
             char-poly rel err max {worst_poly:.1e}; Phi abs err max {worst_phi:.1e}"
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("mixture spectrum suite", mixture_spectrum_suite),
        ("sub-gaussian constant", subgaussian_constant),
        ("oracle misclassification convergence", oracle_convergence),
        ("bound and condition coherence", bound_coherence),
        ("operator-norm calibration stability", calibration_stability),
        ("per-replication eigenvector perturbation", davis_kahan),
        ("exact-recovery consistency trend", consistency_trend),
        ("determinism across worker counts", determinism),
        ("numerics floor", numerics_floor),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.pass {
            failed += 1;
        }
        println!(
            "criterion {}: {} [{name}] ({:.1}s) {}",
            i + 1,
            if result.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            result.detail
        );
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
