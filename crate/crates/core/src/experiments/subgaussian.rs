//! Monte Carlo check of the sub-gaussian bound for one-dimensional
//! projections `⟨X, x⟩` of the mixture.

use serde::Serialize;

use super::config::ExperimentConfig;
use super::output::Tabular;
use super::runner::{mean_stderr, run_reps};
use super::stream_for;
use crate::error::Result;
use crate::format::Cell;
use crate::model::{build_model, mixture_covariance};
use crate::numerics::{dot, Vector};
use crate::sampler::MixtureSampler;

pub(crate) const TAG_SUBGAUSSIAN: u64 = 4;
const TAG_DIRECTIONS: u64 = 0x5d;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionKind {
    /// `μ/‖μ‖`.
    Mu,
    /// A unit vector orthogonal to `μ`.
    Orthogonal,
    Random,
}

impl DirectionKind {
    fn as_str(self) -> &'static str {
        match self {
            DirectionKind::Mu => "mu",
            DirectionKind::Orthogonal => "orthogonal",
            DirectionKind::Random => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgaussianRow {
    pub n: usize,
    pub eta: f64,
    pub direction: usize,
    pub kind: DirectionKind,
    /// Exact `E⟨X, x⟩²`.
    pub second_moment: f64,
    pub draws: usize,
    pub k: f64,
    /// Estimate of `E exp(⟨X,x⟩² / (K² E⟨X,x⟩²))`.
    pub estimate: f64,
    pub stderr: f64,
    /// `estimate ≤ 2 + 3·stderr`.
    pub pass: bool,
    /// Smallest `K` for which the estimate is at most 2.
    pub k_hat: f64,
    pub seed: u64,
    pub model_hash: String,
}

impl Tabular for SubgaussianRow {
    const HEADER: &'static [&'static str] = &[
        "n",
        "eta",
        "direction",
        "kind",
        "second_moment",
        "draws",
        "K",
        "estimate",
        "stderr",
        "pass",
        "k_hat",
        "seed",
        "model_hash",
    ];

    fn cells(&self) -> Vec<String> {
        vec![
            self.n.cell(),
            self.eta.cell(),
            self.direction.cell(),
            self.kind.as_str().cell(),
            self.second_moment.cell(),
            self.draws.cell(),
            self.k.cell(),
            self.estimate.cell(),
            self.stderr.cell(),
            self.pass.cell(),
            self.k_hat.cell(),
            self.seed.cell(),
            self.model_hash.cell(),
        ]
    }
}

/// `μ/‖μ‖`, a unit vector orthogonal to it, then uniformly random unit
/// vectors, `count` in total.
pub fn probe_directions(mu: &Vector, count: usize, seed: u64, grid_index: usize) -> Vec<(DirectionKind, Vector)> {
    let n = mu.dim();
    let u = mu.normalized();
    let mut out = vec![(DirectionKind::Mu, u.clone())];
    if count >= 2 {
        // the coordinate axis least aligned with μ, with its μ-component removed
        let j = (0..n)
            .min_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs()))
            .expect("n >= 1");
        let mut v = vec![0.0; n];
        v[j] = 1.0;
        let p = u[j];
        v.iter_mut().zip(u.iter()).for_each(|(x, y)| *x -= p * y);
        out.push((DirectionKind::Orthogonal, Vector::from_vec(v).normalized()));
    }
    let mut rng = stream_for(seed, TAG_DIRECTIONS, grid_index, 0);
    let mut v = vec![0.0; n];
    while out.len() < count {
        rng.fill_normal(&mut v);
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-8 {
            out.push((
                DirectionKind::Random,
                Vector::from_vec(v.iter().map(|x| x / norm).collect()),
            ));
        }
    }
    out.truncate(count);
    out
}

/// `E exp(r / K²)` estimated over the normalized squares `r`.
fn exp_moment(r: &[f64], k: f64) -> (f64, f64) {
    let inv = 1.0 / (k * k);
    mean_stderr(r.iter().map(|x| (x * inv).exp()))
}

/// Smallest `K` with estimate at most 2, by bisection (the estimate is
/// decreasing in `K`).
fn k_hat(r: &[f64]) -> f64 {
    let (mut lo, mut hi) = (1e-3, 1.0);
    while exp_moment(r, hi).0 > 2.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if exp_moment(r, mid).0 > 2.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-9 * hi {
            break;
        }
    }
    hi
}

/// For each grid point (only `n` and `η` matter) and each probe direction,
/// estimates the exponential moment from `draws` fresh mixture draws.
pub fn run_subgaussian_check(cfg: &ExperimentConfig) -> Result<Vec<SubgaussianRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let mut seen = Vec::new();
    for p in cfg.grid() {
        // m does not enter this check
        let key = (p.n, p.eta_target.map(f64::to_bits));
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);

        let model = build_model(&p.spec)?;
        let sigma = mixture_covariance(&model);
        let sampler = MixtureSampler::new(&model)?;
        let eta = model.summary()?.snr();
        let hash = model.hash();
        let dirs = probe_directions(model.mu(), cfg.directions, cfg.seed, p.index);
        let results = run_reps(dirs.len(), cfg.workers, |d| {
            let (kind, x) = &dirs[d];
            let second = sigma.quad_form(x);
            let mut rng = stream_for(cfg.seed, TAG_SUBGAUSSIAN, p.index, d);
            let mut pt = vec![0.0; p.n];
            let mut z = vec![0.0; p.n];
            let r: Vec<f64> = (0..cfg.draws)
                .map(|_| {
                    sampler.draw_into(&mut rng, &mut pt, &mut z);
                    let y = dot(&pt, x);
                    y * y / second
                })
                .collect();
            let (estimate, stderr) = exp_moment(&r, cfg.constants.k);
            Ok(SubgaussianRow {
                n: p.n,
                eta,
                direction: d,
                kind: *kind,
                second_moment: second,
                draws: cfg.draws,
                k: cfg.constants.k,
                estimate,
                stderr,
                pass: estimate <= 2.0 + 3.0 * stderr,
                k_hat: k_hat(&r),
                seed: cfg.seed,
                model_hash: hash.clone(),
            })
        })
        .require_any()?;
        rows.extend(results.outcomes.into_iter().flatten());
    }
    Ok(rows)
}
