//! Operator-norm concentration of the sample covariance and calibration of
//! the unnamed absolute constants.

use serde::Serialize;

use super::config::{ExperimentConfig, GridPoint};
use super::output::Tabular;
use super::runner::{mean_stderr, order_statistic, run_reps};
use super::stream_for;
use crate::bounds::{opnorm_bound, opnorm_bound_defined, Constants};
use crate::error::{Error, Result};
use crate::format::Cell;
use crate::model::{build_model, mixture_covariance};
use crate::numerics::op_norm;
use crate::sampler::{sample_cov, MixtureSampler, RngStream};

pub(crate) const TAG_OPNORM: u64 = 3;
pub(crate) const TAG_NORM_TAIL: u64 = 6;

/// Quantile of `‖S_m − Σ‖_op` at one `(m, n, u)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpNormRow {
    pub m: usize,
    pub n: usize,
    pub eta: f64,
    pub u: f64,
    pub reps: usize,
    /// Target level `1 − 2e^{−u}`.
    pub q: f64,
    /// False when `q ≤ 0`; the quantile and ratio are then NaN.
    pub defined: bool,
    pub opnorm_quantile: f64,
    pub mean_opnorm: f64,
    pub opnorm_stderr: f64,
    /// Concentration bound evaluated with `C = 1`.
    pub bound_c1: f64,
    /// `opnorm_quantile / bound_c1`: the smallest `C` the data support here.
    pub c_hat: f64,
    pub failed_reps: usize,
    pub seed: u64,
    pub model_hash: String,
}

impl Tabular for OpNormRow {
    const HEADER: &'static [&'static str] = &[
        "m",
        "n",
        "eta",
        "u",
        "reps",
        "q",
        "defined",
        "opnorm_quantile",
        "mean_opnorm",
        "opnorm_stderr",
        "bound_c1",
        "c_hat",
        "failed_reps",
        "seed",
        "model_hash",
    ];

    fn cells(&self) -> Vec<String> {
        vec![
            self.m.cell(),
            self.n.cell(),
            self.eta.cell(),
            self.u.cell(),
            self.reps.cell(),
            self.q.cell(),
            self.defined.cell(),
            self.opnorm_quantile.cell(),
            self.mean_opnorm.cell(),
            self.opnorm_stderr.cell(),
            self.bound_c1.cell(),
            self.c_hat.cell(),
            self.failed_reps.cell(),
            self.seed.cell(),
            self.model_hash.cell(),
        ]
    }
}

fn opnorm_point(cfg: &ExperimentConfig, p: &GridPoint) -> Result<Vec<OpNormRow>> {
    let model = build_model(&p.spec)?;
    let sigma = mixture_covariance(&model);
    let sampler = MixtureSampler::new(&model)?;
    let results = run_reps(cfg.reps, cfg.workers, |rep| {
        let mut rng = stream_for(cfg.seed, TAG_OPNORM, p.index, rep);
        let s = sampler.sample(p.m, &mut rng)?;
        op_norm(&sample_cov(&s).sub(&sigma))
    })
    .require_any()?;

    let mut sorted: Vec<f64> = results.successes().copied().collect();
    let (mean, se) = mean_stderr(sorted.iter().copied());
    sorted.sort_by(f64::total_cmp);
    let sm = model.summary()?;
    let unit = Constants {
        big_c: 1.0,
        ..cfg.constants
    };
    cfg.u_grid
        .iter()
        .map(|&u| {
            let b = opnorm_bound(p.m as f64, p.n as f64, u, &sm, &unit)?;
            let defined = opnorm_bound_defined(u);
            let quantile = if defined {
                order_statistic(&sorted, b.prob)
            } else {
                f64::NAN
            };
            Ok(OpNormRow {
                m: p.m,
                n: p.n,
                eta: sm.snr(),
                u,
                reps: sorted.len(),
                q: b.prob,
                defined,
                opnorm_quantile: quantile,
                mean_opnorm: mean,
                opnorm_stderr: se,
                bound_c1: b.bound,
                c_hat: quantile / b.bound,
                failed_reps: results.failed(),
                seed: cfg.seed,
                model_hash: model.hash(),
            })
        })
        .collect()
}

/// For every `(m, n)` grid point and every `u` in `u_grid`: the empirical
/// `(1 − 2e^{−u})`-quantile of `‖S_m − Σ‖_op` and its ratio to the
/// concentration bound with `C = 1`.
pub fn run_opnorm(cfg: &ExperimentConfig) -> Result<Vec<OpNormRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for p in cfg.grid() {
        rows.extend(opnorm_point(cfg, &p)?);
    }
    Ok(rows)
}

/// Empirical tail `P(|‖g‖ − √n| ≥ t)` of a standard normal vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormTailRow {
    pub n: usize,
    pub t: f64,
    pub draws: usize,
    pub p_hat: f64,
    pub stderr: f64,
    /// Largest `c` with `2 exp(−c t²/K_g⁴) ≥ p_hat − 3·stderr`; infinite when
    /// that lower envelope is not positive.
    pub c_max: f64,
}

impl Tabular for NormTailRow {
    const HEADER: &'static [&'static str] = &["n", "t", "draws", "p_hat", "stderr", "c_max"];

    fn cells(&self) -> Vec<String> {
        vec![
            self.n.cell(),
            self.t.cell(),
            self.draws.cell(),
            self.p_hat.cell(),
            self.stderr.cell(),
            self.c_max.cell(),
        ]
    }
}

fn norm_tail_rows(cfg: &ExperimentConfig, n: usize, dim_index: usize) -> Result<Vec<NormTailRow>> {
    // deviations |‖g‖ − √n| for every draw, split into blocks across workers
    let blocks = cfg.tail_draws.div_ceil(NORM_TAIL_BLOCK);
    let results = run_reps(blocks, cfg.workers, |b| {
        let mut rng = stream_for(cfg.seed, TAG_NORM_TAIL, dim_index, b);
        let len = NORM_TAIL_BLOCK.min(cfg.tail_draws - b * NORM_TAIL_BLOCK);
        Ok(norm_deviations(&mut rng, n, len))
    })
    .require_any()?;
    let devs: Vec<f64> = results.successes().flatten().copied().collect();
    let k4 = cfg.constants.k_g.powi(4);
    Ok(cfg
        .t_grid
        .iter()
        .map(|&t| {
            let hits = devs.iter().filter(|&&d| d >= t).count() as f64;
            let total = devs.len() as f64;
            let p = hits / total;
            let se = (p * (1.0 - p) / (total - 1.0)).sqrt();
            let lower = p - 3.0 * se;
            let c_max = if lower > 0.0 {
                -k4 * (lower / 2.0).ln() / (t * t)
            } else {
                f64::INFINITY
            };
            NormTailRow {
                n,
                t,
                draws: devs.len(),
                p_hat: p,
                stderr: se,
                c_max,
            }
        })
        .collect())
}

const NORM_TAIL_BLOCK: usize = 10_000;

fn norm_deviations(rng: &mut RngStream, n: usize, len: usize) -> Vec<f64> {
    let mut g = vec![0.0; n];
    let root = (n as f64).sqrt();
    (0..len)
        .map(|_| {
            rng.fill_normal(&mut g);
            (g.iter().map(|x| x * x).sum::<f64>().sqrt() - root).abs()
        })
        .collect()
}

/// Calibrated constants with the evidence behind them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub constants: Constants,
    /// Largest per-point ratio before the safety factor.
    pub max_c_hat: f64,
    pub safety_factor: f64,
    pub opnorm: Vec<OpNormRow>,
    pub norm_tail: Vec<NormTailRow>,
}

/// Safety factor applied to the largest observed operator-norm ratio.
pub const CALIBRATION_SAFETY: f64 = 1.5;

/// Smallest replication count for which calibration is attempted.
pub const CALIBRATION_MIN_REPS: usize = 500;

/// Pins `C` and `c` empirically: `Ĉ` is [`CALIBRATION_SAFETY`] times the
/// largest `c_hat` of [`run_opnorm`] over the grid, and `ĉ` the smallest
/// `c_max` over the `t`-grid and the grid's dimensions. `K` and `K_g` are
/// taken from the configuration unchanged.
pub fn calibrate(cfg: &ExperimentConfig) -> Result<Calibration> {
    if cfg.reps < CALIBRATION_MIN_REPS {
        return Err(Error::config(
            "reps",
            format!(
                "calibration needs at least {CALIBRATION_MIN_REPS} replications, got {}",
                cfg.reps
            ),
        ));
    }
    let opnorm = run_opnorm(cfg)?;
    let max_c_hat = opnorm
        .iter()
        .filter(|r| r.defined)
        .map(|r| r.c_hat)
        .fold(f64::NAN, f64::max);
    if !max_c_hat.is_finite() || max_c_hat <= 0.0 {
        return Err(Error::config(
            "u_grid",
            "no grid point has u > ln 2; the quantile is undefined everywhere",
        ));
    }

    let mut dims: Vec<usize> = cfg.grid().iter().map(|p| p.n).collect();
    dims.dedup();
    let mut norm_tail = Vec::new();
    for (i, &n) in dims.iter().enumerate() {
        norm_tail.extend(norm_tail_rows(cfg, n, i)?);
    }
    let c_hat = norm_tail.iter().map(|r| r.c_max).fold(f64::INFINITY, f64::min);
    if !c_hat.is_finite() {
        return Err(Error::config(
            "t_grid",
            "every t is too deep in the tail for the available draws; add smaller t or more tail_draws",
        ));
    }

    Ok(Calibration {
        constants: Constants {
            big_c: CALIBRATION_SAFETY * max_c_hat,
            small_c: c_hat,
            ..cfg.constants
        },
        max_c_hat,
        safety_factor: CALIBRATION_SAFETY,
        opnorm,
        norm_tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;

    fn cfg() -> ExperimentConfig {
        let mut c = ExperimentConfig::new(ModelSpec::diag_example().with_dim(4));
        c.m_grid = vec![200];
        c.reps = 40;
        c.u_grid = vec![std::f64::consts::LN_2, 2.0];
        c
    }

    #[test]
    fn boundary_u_is_flagged() {
        let rows = run_opnorm(&cfg()).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(!rows[0].defined && rows[0].opnorm_quantile.is_nan());
        assert!(rows[1].defined && rows[1].c_hat > 0.0 && rows[1].c_hat.is_finite());
        assert_eq!(rows[1].q, 1.0 - 2.0 * (-2f64).exp());
    }

    #[test]
    fn calibration_refuses_few_reps() {
        let e = calibrate(&cfg()).unwrap_err();
        assert!(e.to_string().starts_with("reps"));
    }

    #[test]
    fn norm_tail_envelope() {
        let mut c = cfg();
        c.tail_draws = 20_000;
        c.t_grid = vec![0.5, 1.0, 50.0];
        let rows = norm_tail_rows(&c, 10, 0).unwrap();
        assert!(rows[0].p_hat > rows[1].p_hat);
        assert!(rows[0].c_max.is_finite());
        assert_eq!(rows[2].p_hat, 0.0);
        assert_eq!(rows[2].c_max, f64::INFINITY);
    }
}
