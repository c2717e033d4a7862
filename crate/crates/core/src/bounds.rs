//! Closed-form evaluators for the misclassification and concentration
//! bounds, and the sample-size conditions under which they apply.
//!
//! Everything here is a pure function of a [`ModelSummary`] and the absolute
//! constants in [`Constants`]. Two of those constants have no known numeric
//! value and default to configurable choices; see [`Constants::default`].

use std::f64::consts::{E, LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AllometricModel, ModelSummary};
use crate::numerics::std_normal_cdf;

/// `√(32 / (4 − e))`, a sub-gaussian constant valid for every
/// one-dimensional projection of the mixture.
pub fn subgaussian_k() -> f64 {
    (32.0 / (4.0 - E)).sqrt()
}

/// Sub-gaussian norm of a standard normal variable, `√(8/3)`.
pub fn gaussian_k() -> f64 {
    (8.0f64 / 3.0).sqrt()
}

/// Absolute constants entering the bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    /// Operator-norm concentration constant.
    pub big_c: f64,
    /// Constant of the Gaussian norm-concentration tail.
    pub small_c: f64,
    pub k: f64,
    pub k_g: f64,
}

impl Default for Constants {
    /// `C = 1` and `c = 0.01` are implementation choices; `K` and `K_g` are
    /// the exact values above.
    fn default() -> Self {
        Constants {
            big_c: 1.0,
            small_c: 0.01,
            k: subgaussian_k(),
            k_g: gaussian_k(),
        }
    }
}

impl Constants {
    /// `c₁ = 1 + K_g² / √c`, always recomputed.
    pub fn c1(&self) -> f64 {
        1.0 + self.k_g * self.k_g / self.small_c.sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.big_c) {
            return Err(Error::config("constants.C", "must be positive and finite"));
        }
        if !positive(self.small_c) {
            return Err(Error::config("constants.c", "must be positive and finite"));
        }
        if !(self.k.is_finite() && self.k >= 1.0) {
            return Err(Error::config("constants.K", "must be finite and at least 1"));
        }
        if !positive(self.k_g) {
            return Err(Error::config("constants.K_g", "must be positive and finite"));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstantsRepr {
    #[serde(rename = "C", default = "default_big_c")]
    big_c: f64,
    #[serde(rename = "c", default = "default_small_c")]
    small_c: f64,
    #[serde(rename = "K", default = "subgaussian_k")]
    k: f64,
    #[serde(rename = "K_g", default = "gaussian_k")]
    k_g: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c1: Option<f64>,
}

fn default_big_c() -> f64 {
    Constants::default().big_c
}

fn default_small_c() -> f64 {
    Constants::default().small_c
}

impl Serialize for Constants {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ConstantsRepr {
            big_c: self.big_c,
            small_c: self.small_c,
            k: self.k,
            k_g: self.k_g,
            c1: Some(self.c1()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Constants {
    /// A `c1` key is accepted so that echoed constants read back, but it must
    /// agree with the value derived from `c` and `K_g`.
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = ConstantsRepr::deserialize(d)?;
        let k = Constants {
            big_c: r.big_c,
            small_c: r.small_c,
            k: r.k,
            k_g: r.k_g,
        };
        if let Some(c1) = r.c1 {
            if (c1 - k.c1()).abs() > 1e-12 * k.c1().abs() {
                return Err(serde::de::Error::custom(format!(
                    "c1 = {c1} is inconsistent with c and K_g (expected {})",
                    k.c1()
                )));
            }
        }
        Ok(k)
    }
}

/// A probability-valued quantity clamped to `[0, 1]`, keeping the raw value
/// so vacuous regimes stay visible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Clamped {
    pub value: f64,
    pub raw: f64,
}

impl Clamped {
    pub fn new(raw: f64) -> Self {
        Clamped {
            value: raw.clamp(0.0, 1.0),
            raw,
        }
    }

    pub fn is_vacuous(&self) -> bool {
        self.raw != self.value
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn check_equal_weights(model: &ModelSummary) -> Result<()> {
    if model.pi1 == 0.5 {
        Ok(())
    } else {
        Err(Error::Unsupported(format!(
            "misclassification bounds require pi1 = 0.5, got {}",
            model.pi1
        )))
    }
}

fn check_counts(m: f64, n: f64) -> Result<()> {
    if !(m >= 1.0 && m.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "sample size m must be at least 1, got {m}"
        )));
    }
    if !(n >= 1.0 && n.is_finite()) {
        return Err(Error::InvalidInput(format!("dimension n must be at least 1, got {n}")));
    }
    Ok(())
}

/// High-probability bound on `‖S_m − Σ‖_op`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OpNormBound {
    pub bound: f64,
    /// Probability with which the bound holds, `1 − 2e^{−u}` (may be
    /// negative for `u < ln 2`).
    pub prob: f64,
}

/// `C K² (√((n+u)/m) + (n+u)/m) ((λ₁(Σ₁)+λ₁(Σ₂))/2 + ‖μ‖²)`.
pub fn opnorm_bound(m: f64, n: f64, u: f64, model: &ModelSummary, k: &Constants) -> Result<OpNormBound> {
    check_counts(m, n)?;
    if !(u >= 0.0) {
        return Err(Error::InvalidInput(format!("u must be nonnegative, got {u}")));
    }
    let r = (n + u) / m;
    let scale = 0.5 * (model.lambda1[0] + model.lambda1[1]) + model.mu_norm * model.mu_norm;
    Ok(OpNormBound {
        bound: k.big_c * k.k * k.k * (r.sqrt() + r) * scale,
        prob: 1.0 - 2.0 * (-u).exp(),
    })
}

/// Whether `u` is large enough for [`OpNormBound::prob`] to be positive.
pub fn opnorm_bound_defined(u: f64) -> bool {
    u > LN_2
}

/// Both sides of a sample-size condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Condition {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl Condition {
    fn new(lhs: f64, rhs: f64) -> Self {
        Condition {
            lhs,
            rhs,
            holds: lhs <= rhs,
        }
    }
}

fn growth(m: f64, n: f64) -> f64 {
    let r = 2.0 * n / m;
    r.sqrt() + r
}

/// The sample-size condition of the main misclassification theorem:
///
/// `√2 C K² (√(2n/m) + 2n/m) ((λ₁(Σ₁)+λ₁(Σ₂))/‖μ‖² + 2) ≤ α‖μ‖ / (c₁√(n·maxλ₁) + ‖μ‖)`.
pub fn condition_general(m: f64, n: f64, alpha: f64, model: &ModelSummary, k: &Constants) -> Result<Condition> {
    check_alpha(alpha)?;
    check_equal_weights(model)?;
    check_counts(m, n)?;
    let mu_sq = model.mu_norm * model.mu_norm;
    let lhs = 2f64.sqrt() * k.big_c * k.k * k.k * growth(m, n) * ((model.lambda1[0] + model.lambda1[1]) / mu_sq + 2.0);
    let rhs = alpha * model.mu_norm / (k.c1() * (n * model.max_lambda1()).sqrt() + model.mu_norm);
    Ok(Condition::new(lhs, rhs))
}

/// The simplified, signal-to-noise form of [`condition_general`]:
///
/// `2^{3/2} C K² (√(2n/m) + 2n/m)(1/η + 1) ≤ α / (c₁√(n/η) + 1)`.
///
/// It implies [`condition_general`] and coincides with it when both components
/// share `λ₁`.
pub fn condition_snr(m: f64, n: f64, alpha: f64, eta: f64, k: &Constants) -> Result<Condition> {
    check_alpha(alpha)?;
    check_counts(m, n)?;
    if !(eta > 0.0) {
        return Err(Error::InvalidInput(format!("eta must be positive, got {eta}")));
    }
    let lhs = 2f64.powf(1.5) * k.big_c * k.k * k.k * growth(m, n) * (1.0 / eta + 1.0);
    let rhs = alpha / (k.c1() * (n / eta).sqrt() + 1.0);
    Ok(Condition::new(lhs, rhs))
}

/// `Φ(−(1−α)‖μ‖/√maxλ₁) + 6e^{−n}`, the per-point misclassification bound.
/// Meaningful only where [`condition_general`] holds.
pub fn misclassification_bound(alpha: f64, model: &ModelSummary, n: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(std_normal_cdf(-(1.0 - alpha) * model.mu_norm / model.max_lambda1().sqrt()) + 6.0 * (-n).exp())
}

/// The Mills-ratio relaxation of [`misclassification_bound`]:
/// `exp(−(1−α)²η/2) / √(2π(1−α)²η) + 6e^{−n}`.
pub fn mills_bound(alpha: f64, eta: f64, n: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(eta > 0.0) {
        return Err(Error::InvalidInput(format!("eta must be positive, got {eta}")));
    }
    let s = (1.0 - alpha).powi(2) * eta;
    Ok((-s / 2.0).exp() / (2.0 * PI * s).sqrt() + 6.0 * (-n).exp())
}

/// Lower bound on `P(#misclassified ≤ εm)` from Markov's inequality on the
/// per-point bound: `1 − Φ(…)/ε − 6e^{−n}/ε`.
pub fn within_eps_lower(epsilon: f64, alpha: f64, model: &ModelSummary, n: f64) -> Result<Clamped> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "epsilon must lie in (0, 1], got {epsilon}"
        )));
    }
    Ok(Clamped::new(1.0 - misclassification_bound(alpha, model, n)? / epsilon))
}

/// Union-bound lower bound on the exact-recovery probability:
/// `1 − m·exp(−(1−α)²η/2)/√(2π(1−α)²η) − 6m e^{−n}`.
pub fn recovery_lower(m: f64, alpha: f64, eta: f64, n: f64) -> Result<Clamped> {
    Ok(Clamped::new(1.0 - m * mills_bound(alpha, eta, n)?))
}

/// Thresholds defining the asymptotic regime `n/m → 0`, `ln m / n → 0`,
/// `n/η = O(1)` at finite size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegimeThresholds {
    pub nm_ratio: f64,
    pub logm_n_ratio: f64,
    pub n_over_eta: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        RegimeThresholds {
            nm_ratio: 0.1,
            logm_n_ratio: 0.1,
            n_over_eta: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Regime {
    pub nm_ratio: f64,
    pub logm_n_ratio: f64,
    pub n_over_eta: f64,
    pub in_regime: bool,
    pub thresholds: RegimeThresholds,
}

pub fn regime_check(m: f64, n: f64, eta: f64, thresholds: RegimeThresholds) -> Result<Regime> {
    check_counts(m, n)?;
    let nm_ratio = n / m;
    let logm_n_ratio = m.ln() / n;
    let n_over_eta = n / eta;
    Ok(Regime {
        nm_ratio,
        logm_n_ratio,
        n_over_eta,
        in_regime: nm_ratio <= thresholds.nm_ratio
            && logm_n_ratio <= thresholds.logm_n_ratio
            && n_over_eta <= thresholds.n_over_eta,
        thresholds,
    })
}

/// Inputs for [`bound_report`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundInputs {
    pub alpha: f64,
    pub epsilon: f64,
    /// Dimension entering the bounds; defaults to the model's.
    pub n: f64,
    /// Sample size; the sample-size dependent fields are omitted without it.
    pub m: Option<f64>,
    pub u: f64,
}

/// Every bound at one `(m, n, α, ε, u)`, with all inputs echoed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub version: &'static str,
    pub model_hash: String,
    pub constants: Constants,
    pub inputs: BoundInputs,
    pub mu_norm: f64,
    pub lambda1: [f64; 2],
    pub eta: f64,
    pub oracle_misclass: Option<f64>,
    pub misclass_bound: Clamped,
    pub mills_bound: Clamped,
    pub within_eps_lower: Clamped,
    pub condition_general: Option<Condition>,
    pub condition_snr: Option<Condition>,
    pub condition_holds: Option<bool>,
    pub opnorm_bound: Option<OpNormBound>,
    pub recovery_lower: Option<Clamped>,
    pub regime: Option<Regime>,
}

pub fn bound_report(
    model: &AllometricModel,
    inputs: BoundInputs,
    k: &Constants,
    thresholds: RegimeThresholds,
) -> Result<BoundReport> {
    k.validate()?;
    let sm = model.summary()?;
    check_equal_weights(&sm)?;
    let eta = sm.snr();
    let n = inputs.n;
    let (general, snr_form, opnorm_bound, recovery, regime) = match inputs.m {
        Some(m) => (
            Some(condition_general(m, n, inputs.alpha, &sm, k)?),
            Some(condition_snr(m, n, inputs.alpha, eta, k)?),
            Some(opnorm_bound(m, n, inputs.u, &sm, k)?),
            Some(recovery_lower(m, inputs.alpha, eta, n)?),
            Some(regime_check(m, n, eta, thresholds)?),
        ),
        None => (None, None, None, None, None),
    };
    Ok(BoundReport {
        version: crate::VERSION,
        model_hash: model.hash(),
        constants: *k,
        inputs,
        mu_norm: sm.mu_norm,
        lambda1: sm.lambda1,
        eta,
        oracle_misclass: Some(crate::clustering::oracle_prob_from(sm.mu_norm, sm.lambda1)),
        misclass_bound: Clamped::new(misclassification_bound(inputs.alpha, &sm, n)?),
        mills_bound: Clamped::new(mills_bound(inputs.alpha, eta, n)?),
        within_eps_lower: within_eps_lower(inputs.epsilon, inputs.alpha, &sm, n)?,
        condition_holds: general.map(|c| c.holds),
        condition_general: general,
        condition_snr: snr_form,
        opnorm_bound,
        recovery_lower: recovery,
        regime,
    })
}
