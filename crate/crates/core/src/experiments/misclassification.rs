//! Misclassification and exact-recovery simulations.

use serde::Serialize;

use super::config::{ExperimentConfig, GridPoint};
use super::output::Tabular;
use super::runner::{mean_stderr, run_reps};
use super::stream_for;
use crate::bounds::{
    condition_general, mills_bound, misclassification_bound, opnorm_bound, recovery_lower, regime_check,
    within_eps_lower, Constants,
};
use crate::clustering::{misclassification_count, oracle_misclassification_prob, spectral_cluster};
use crate::error::{Error, Result};
use crate::format::Cell;
use crate::model::build_model;
use crate::sampler::MixtureSampler;

pub(crate) const TAG_MISCLASSIFICATION: u64 = 1;
pub(crate) const TAG_RECOVERY: u64 = 2;

/// Per-replication outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
struct RepOutcome {
    misclass_rate: f64,
    misclustering_rate: f64,
    recovered: bool,
    within_eps: bool,
}

/// Empirical and theoretical quantities at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub m: usize,
    pub n: usize,
    /// Realized signal-to-noise ratio of the model at this point.
    pub eta: f64,
    /// Successful replications.
    pub reps: usize,
    /// Per-point misclassification probability, pooled over points within a
    /// replication, averaged over replications.
    pub emp_misclass: f64,
    pub emp_stderr: f64,
    pub oracle_misclass: f64,
    pub misclass_bound: f64,
    pub mills_bound: f64,
    pub condition_holds: bool,
    pub condition_lhs: f64,
    pub condition_rhs: f64,
    pub mean_misclustering: f64,
    pub misclustering_stderr: f64,
    pub recovery_prob: f64,
    pub recovery_stderr: f64,
    /// Empirical `P(#misclassified ≤ εm)`.
    pub emp_within_eps: f64,
    pub within_eps_stderr: f64,
    pub within_eps_lower: f64,
    pub recovery_lower: f64,
    pub opnorm_bound: f64,
    pub nm_ratio: f64,
    pub logm_n_ratio: f64,
    pub n_over_eta: f64,
    pub in_regime: bool,
    pub failed_reps: usize,
    pub seed: u64,
    pub model_hash: String,
    pub constants: Constants,
}

impl Tabular for SummaryRow {
    const HEADER: &'static [&'static str] = &[
        "m",
        "n",
        "eta",
        "reps",
        "emp_misclass",
        "emp_stderr",
        "oracle_misclass",
        "misclass_bound",
        "mills_bound",
        "condition_holds",
        "condition_lhs",
        "condition_rhs",
        "mean_misclustering",
        "misclustering_stderr",
        "recovery_prob",
        "recovery_stderr",
        "emp_within_eps",
        "within_eps_stderr",
        "within_eps_lower",
        "recovery_lower",
        "opnorm_bound",
        "nm_ratio",
        "logm_n_ratio",
        "n_over_eta",
        "in_regime",
        "failed_reps",
        "seed",
        "model_hash",
        "C",
        "c",
        "K",
        "K_g",
    ];

    fn cells(&self) -> Vec<String> {
        vec![
            self.m.cell(),
            self.n.cell(),
            self.eta.cell(),
            self.reps.cell(),
            self.emp_misclass.cell(),
            self.emp_stderr.cell(),
            self.oracle_misclass.cell(),
            self.misclass_bound.cell(),
            self.mills_bound.cell(),
            self.condition_holds.cell(),
            self.condition_lhs.cell(),
            self.condition_rhs.cell(),
            self.mean_misclustering.cell(),
            self.misclustering_stderr.cell(),
            self.recovery_prob.cell(),
            self.recovery_stderr.cell(),
            self.emp_within_eps.cell(),
            self.within_eps_stderr.cell(),
            self.within_eps_lower.cell(),
            self.recovery_lower.cell(),
            self.opnorm_bound.cell(),
            self.nm_ratio.cell(),
            self.logm_n_ratio.cell(),
            self.n_over_eta.cell(),
            self.in_regime.cell(),
            self.failed_reps.cell(),
            self.seed.cell(),
            self.model_hash.cell(),
            self.constants.big_c.cell(),
            self.constants.small_c.cell(),
            self.constants.k.cell(),
            self.constants.k_g.cell(),
        ]
    }
}

fn run_point(cfg: &ExperimentConfig, p: &GridPoint, tag: u64) -> Result<SummaryRow> {
    if p.m < 2 {
        return Err(Error::config("m_grid", "clustering needs m >= 2"));
    }
    let model = build_model(&p.spec)?;
    let oracle = oracle_misclassification_prob(&model)?;
    let sampler = MixtureSampler::new(&model)?;
    let mu = model.mu().as_slice();
    let eps_count = cfg.epsilon * p.m as f64;

    let results = run_reps(cfg.reps, cfg.workers, |rep| {
        let mut rng = stream_for(cfg.seed, tag, p.index, rep);
        let s = sampler.sample(p.m, &mut rng)?;
        let r = spectral_cluster(&s)?;
        let k = misclassification_count(&s, &r.fit, mu)?;
        Ok(RepOutcome {
            misclass_rate: k as f64 / p.m as f64,
            misclustering_rate: r.misclustering_rate,
            recovered: r.exact_recovery,
            within_eps: k as f64 <= eps_count,
        })
    })
    .require_any()?;

    let ok: Vec<RepOutcome> = results.successes().copied().collect();
    let (emp, emp_se) = mean_stderr(ok.iter().map(|o| o.misclass_rate));
    let (mcl, mcl_se) = mean_stderr(ok.iter().map(|o| o.misclustering_rate));
    let (rec, rec_se) = mean_stderr(ok.iter().map(|o| o.recovered as u8 as f64));
    let (weps, weps_se) = mean_stderr(ok.iter().map(|o| o.within_eps as u8 as f64));

    let sm = model.summary()?;
    let eta = sm.snr();
    let (m, n) = (p.m as f64, p.n as f64);
    let k = &cfg.constants;
    let cond = condition_general(m, n, cfg.alpha, &sm, k)?;
    let regime = regime_check(m, n, eta, cfg.regime)?;
    Ok(SummaryRow {
        m: p.m,
        n: p.n,
        eta,
        reps: ok.len(),
        emp_misclass: emp,
        emp_stderr: emp_se,
        oracle_misclass: oracle,
        misclass_bound: misclassification_bound(cfg.alpha, &sm, n)?,
        mills_bound: mills_bound(cfg.alpha, eta, n)?,
        condition_holds: cond.holds,
        condition_lhs: cond.lhs,
        condition_rhs: cond.rhs,
        mean_misclustering: mcl,
        misclustering_stderr: mcl_se,
        recovery_prob: rec,
        recovery_stderr: rec_se,
        emp_within_eps: weps,
        within_eps_stderr: weps_se,
        within_eps_lower: within_eps_lower(cfg.epsilon, cfg.alpha, &sm, n)?.raw,
        recovery_lower: recovery_lower(m, cfg.alpha, eta, n)?.raw,
        opnorm_bound: opnorm_bound(m, n, n, &sm, k)?.bound,
        nm_ratio: regime.nm_ratio,
        logm_n_ratio: regime.logm_n_ratio,
        n_over_eta: regime.n_over_eta,
        in_regime: regime.in_regime,
        failed_reps: results.failed(),
        seed: cfg.seed,
        model_hash: model.hash(),
        constants: *k,
    })
}

/// Per grid point: `reps` independent samples, each clustered and scored
/// against the labels with the sign fixed by `μ`.
pub fn run_misclassification(cfg: &ExperimentConfig) -> Result<Vec<SummaryRow>> {
    cfg.validate()?;
    cfg.grid()
        .iter()
        .map(|p| run_point(cfg, p, TAG_MISCLASSIFICATION))
        .collect()
}

/// Same measurements as [`run_misclassification`] on independent streams,
/// intended for sweeps where `m` and `η` grow with `n`; the headline column
/// is `recovery_prob`.
pub fn run_recovery(cfg: &ExperimentConfig) -> Result<Vec<SummaryRow>> {
    cfg.validate()?;
    cfg.grid().iter().map(|p| run_point(cfg, p, TAG_RECOVERY)).collect()
}
