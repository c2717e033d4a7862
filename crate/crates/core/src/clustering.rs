//! Clustering by the sign of the leading principal score, and the two error
//! metrics: label-aware misclassification and label-symmetric misclustering.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::AllometricModel;
use crate::numerics::{dot, std_normal_cdf, top_eigvec, Matrix, Vector};
use crate::sampler::{second_moment, LabeledSample};

/// Fit produced from the points alone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralFit {
    /// Unit leading eigenvector of the uncentered sample covariance.
    pub gamma1_hat: Vector,
    pub lambda1_hat: f64,
    /// `⟨γ̂₁, Xᵢ⟩`.
    pub scores: Vec<f64>,
    /// Sign of each score; a score of exactly zero maps to `+1`.
    pub signs: Vec<i8>,
    /// Set when the sample covariance has (numerically) no leading gap, so
    /// `γ̂₁` is not well defined.
    pub ill_conditioned: bool,
}

/// Fit plus evaluation against the true labels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterResult {
    pub fit: SpectralFit,
    /// `#{i : θᵢ · signᵢ < 0}` before any alignment.
    pub disagreements: usize,
    /// `min(k, m − k) / m` with `k` the disagreements.
    pub misclustering_rate: f64,
    pub exact_recovery: bool,
}

impl ClusterResult {
    pub fn gamma1_hat(&self) -> &Vector {
        &self.fit.gamma1_hat
    }
}

/// Clusters raw points. This is the deployment path and never sees labels.
pub fn cluster_points(points: &Matrix) -> Result<SpectralFit> {
    if points.rows() < 2 {
        return Err(Error::InvalidInput("clustering needs at least 2 points".into()));
    }
    let s = second_moment(points);
    let top = top_eigvec(&s, None)?;
    let scores: Vec<f64> = points.iter_rows().map(|x| dot(&top.vector, x)).collect();
    let signs = scores.iter().map(|&v| if v < 0.0 { -1 } else { 1 }).collect();
    Ok(SpectralFit {
        gamma1_hat: top.vector,
        lambda1_hat: top.value,
        scores,
        signs,
        ill_conditioned: top.ill_conditioned,
    })
}

/// Clusters `s` from its points, then scores the partition against the
/// labels.
pub fn spectral_cluster(s: &LabeledSample) -> Result<ClusterResult> {
    let fit = cluster_points(s.points())?;
    let m = s.m();
    let disagreements = s
        .labels()
        .iter()
        .zip(&fit.signs)
        .filter(|(t, g)| (**t as i32) * (**g as i32) < 0)
        .count();
    let mis = disagreements.min(m - disagreements);
    Ok(ClusterResult {
        fit,
        disagreements,
        misclustering_rate: mis as f64 / m as f64,
        exact_recovery: mis == 0,
    })
}

/// Number of points with `θᵢ ⟨γ̃₁, Xᵢ⟩ < 0`, where `γ̃₁ = ±γ̂₁` is oriented
/// so that `⟨γ̃₁, align⟩ > 0`. In simulation `align = μ`.
pub fn misclassification_count(s: &LabeledSample, fit: &SpectralFit, align: &[f64]) -> Result<usize> {
    if align.len() != s.n() || align.iter().all(|&a| a == 0.0) {
        return Err(Error::InvalidInput(
            "alignment direction must be a nonzero vector of the sample's dimension".into(),
        ));
    }
    let d = dot(&fit.gamma1_hat, align);
    if d == 0.0 {
        return Err(Error::SignConventionUndefined);
    }
    let flip = if d > 0.0 { 1.0 } else { -1.0 };
    Ok(s.labels()
        .iter()
        .zip(&fit.scores)
        .filter(|(t, score)| (**t as f64) * flip * **score < 0.0)
        .count())
}

/// `½Φ(−‖μ‖/√λ₁(Σ₁)) + ½Φ(−‖μ‖/√λ₁(Σ₂))`: the per-point error of the
/// classifier that knows the true leading eigenvector. Equal weights only.
pub fn oracle_misclassification_prob(model: &AllometricModel) -> Result<f64> {
    if model.pi1() != 0.5 {
        return Err(Error::Unsupported(format!(
            "oracle misclassification probability requires pi1 = 0.5, got {}",
            model.pi1()
        )));
    }
    let sm = model.summary()?;
    Ok(oracle_prob_from(sm.mu_norm, sm.lambda1))
}

pub(crate) fn oracle_prob_from(mu_norm: f64, lambda1: [f64; 2]) -> f64 {
    0.5 * std_normal_cdf(-mu_norm / lambda1[0].sqrt()) + 0.5 * std_normal_cdf(-mu_norm / lambda1[1].sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, ModelSpec};
    use proptest::prelude::*;

    fn sample_of(labels: Vec<i8>, rows: &[[f64; 2]]) -> LabeledSample {
        let data = rows.iter().flatten().copied().collect();
        LabeledSample::from_parts(labels, Matrix::from_row_major(rows.len(), 2, data).unwrap()).unwrap()
    }

    #[test]
    fn two_separated_points() {
        let s = sample_of(vec![1, -1], &[[3.0, 0.0], [-3.0, 0.0]]);
        let r = spectral_cluster(&s).unwrap();
        assert!((r.gamma1_hat()[0].abs() - 1.0).abs() < 1e-15);
        assert_eq!(r.misclustering_rate, 0.0);
        assert!(r.exact_recovery);
        assert_eq!(misclassification_count(&s, &r.fit, &[1.0, 0.0]).unwrap(), 0);
        assert_eq!(misclassification_count(&s, &r.fit, &[-1.0, 0.0]).unwrap(), 2);
    }

    #[test]
    fn orthogonal_alignment_is_undefined() {
        let s = sample_of(vec![1, -1], &[[3.0, 0.0], [-3.0, 0.0]]);
        let r = spectral_cluster(&s).unwrap();
        assert!(matches!(
            misclassification_count(&s, &r.fit, &[0.0, 1.0]),
            Err(Error::SignConventionUndefined)
        ));
    }

    #[test]
    fn zero_score_maps_to_plus() {
        let s = sample_of(vec![1, -1, 1], &[[3.0, 0.0], [-3.0, 0.0], [0.0, 0.5]]);
        let r = spectral_cluster(&s).unwrap();
        assert_eq!(r.fit.scores[2], 0.0);
        assert_eq!(r.fit.signs[2], 1);
    }

    #[test]
    fn needs_two_points() {
        let s = sample_of(vec![1], &[[1.0, 0.0]]);
        assert!(spectral_cluster(&s).is_err());
    }

    #[test]
    fn oracle_values() {
        let spec = ModelSpec {
            mu_norm: 3.0,
            ..ModelSpec::diag_example()
        };
        let p = oracle_misclassification_prob(&build_model(&spec).unwrap()).unwrap();
        assert!((p - 0.11273122760015756).abs() < 1e-14);
        let far = ModelSpec {
            mu_norm: 1e3,
            ..ModelSpec::diag_example()
        };
        assert!(oracle_misclassification_prob(&build_model(&far).unwrap()).unwrap() < 1e-300);
        let sym = ModelSpec {
            mu_norm: 2.0,
            eigvals1: vec![4.0, 1.0],
            eigvals2: vec![4.0, 0.5],
            ..ModelSpec::diag_example()
        };
        let p = oracle_misclassification_prob(&build_model(&sym).unwrap()).unwrap();
        assert!((p - std_normal_cdf(-1.0)).abs() < 1e-16);
        let skew = ModelSpec {
            pi1: 0.3,
            ..ModelSpec::diag_example()
        };
        assert!(matches!(
            oracle_misclassification_prob(&build_model(&skew).unwrap()),
            Err(Error::Unsupported(_))
        ));
    }

    proptest! {
        #[test]
        fn metrics_match_brute_force(
            pts in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0, any::<bool>()), 2..40),
            flip in any::<bool>(),
        ) {
            let labels: Vec<i8> = pts.iter().map(|p| if p.2 { 1 } else { -1 }).collect();
            let rows: Vec<[f64; 2]> = pts.iter().map(|p| [p.0, p.1]).collect();
            let s = sample_of(labels.clone(), &rows);
            let Ok(r) = spectral_cluster(&s) else { return Ok(()); };

            // misclustering is symmetric under a global label flip
            let flipped = sample_of(labels.iter().map(|t| -t).collect(), &rows);
            let rf = spectral_cluster(&flipped).unwrap();
            prop_assert_eq!(r.misclustering_rate, rf.misclustering_rate);
            prop_assert!(r.misclustering_rate <= 0.5);
            prop_assert_eq!(r.exact_recovery, r.misclustering_rate == 0.0);

            let align = if flip { [1.0, 0.3] } else { [-1.0, -0.3] };
            let d = dot(r.gamma1_hat(), &align);
            prop_assume!(d != 0.0);
            let g: Vec<f64> = r.gamma1_hat().iter().map(|v| v * d.signum()).collect();
            let brute = rows
                .iter()
                .zip(&labels)
                .filter(|(x, t)| (**t as f64) * (g[0] * x[0] + g[1] * x[1]) < 0.0)
                .count();
            let k = misclassification_count(&s, &r.fit, &align).unwrap();
            prop_assert_eq!(k, brute);
            let neg = [-align[0], -align[1]];
            let k_neg = misclassification_count(&s, &r.fit, &neg).unwrap();
            let zeros = r.fit.scores.iter().filter(|v| **v == 0.0).count();
            prop_assert_eq!(k + k_neg + zeros, s.m());
        }
    }
}
