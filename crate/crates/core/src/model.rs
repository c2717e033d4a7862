//! Allometric-extension mixture models.
//!
//! Component 1 is `N(μ, Σ₁)`, component 2 is `N(−μ, Σ₂)`, mixed with weights
//! `π₁` and `π₂ = 1 − π₁`. The relationship requires the leading eigenvectors
//! of `Σ₁` and `Σ₂` to coincide and to be parallel to `μ₁ − μ₂ = 2μ`; this
//! crate fixes the sign so that `γ₁ ∝ +μ`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{fnv1a_hex, to_json};
use crate::numerics::{dot, eig_sym, Matrix, SymMatrix, Vector};
use crate::sampler::RngStream;

/// Alignment tolerance for models built by [`build_model`].
pub const TOL_ALIGN_CONSTRUCTED: f64 = 1e-10;
/// Alignment tolerance for models read from files.
pub const TOL_ALIGN_FILE: f64 = 1e-6;

// stream ids reserved for model construction
const STREAM_MU_DIRECTION: u64 = 0x6d75_5f64_6972;
const STREAM_TAIL_ROTATION: u64 = 0x7461_696c_726f;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MuDirection {
    /// `μ` along the first coordinate axis.
    Axis,
    /// `μ` along a uniformly random direction.
    Random(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailBasis {
    /// `Σ₂` uses the same eigenvectors as `Σ₁`.
    Shared,
    /// The trailing `n − 1` eigenvectors of `Σ₂` are a random rotation of
    /// those of `Σ₁` inside the orthogonal complement of `μ`.
    Independent(u64),
}

fn parse_seeded(s: &str, name: &str) -> Option<u64> {
    s.strip_prefix(name)?
        .strip_prefix('(')?
        .strip_suffix(')')?
        .trim()
        .parse()
        .ok()
}

impl FromStr for MuDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "axis" {
            return Ok(MuDirection::Axis);
        }
        parse_seeded(s, "random").map(MuDirection::Random).ok_or_else(|| {
            Error::config(
                "mu_direction",
                format!("expected \"axis\" or \"random(<seed>)\", got {s:?}"),
            )
        })
    }
}

impl fmt::Display for MuDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MuDirection::Axis => f.write_str("axis"),
            MuDirection::Random(seed) => write!(f, "random({seed})"),
        }
    }
}

impl FromStr for TailBasis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "shared" {
            return Ok(TailBasis::Shared);
        }
        parse_seeded(s, "independent")
            .map(TailBasis::Independent)
            .ok_or_else(|| {
                Error::config(
                    "tail_basis",
                    format!("expected \"shared\" or \"independent(<seed>)\", got {s:?}"),
                )
            })
    }
}

impl fmt::Display for TailBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TailBasis::Shared => f.write_str("shared"),
            TailBasis::Independent(seed) => write!(f, "independent({seed})"),
        }
    }
}

macro_rules! string_serde {
    ($t:ty) => {
        impl Serialize for $t {
            fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

string_serde!(MuDirection);
string_serde!(TailBasis);

fn default_pi1() -> f64 {
    0.5
}

/// Parameters from which [`build_model`] constructs an exact model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub n: usize,
    pub mu_norm: f64,
    pub mu_direction: MuDirection,
    /// Descending positive eigenvalues of `Σ₁`.
    pub eigvals1: Vec<f64>,
    /// Descending positive eigenvalues of `Σ₂`.
    pub eigvals2: Vec<f64>,
    pub tail_basis: TailBasis,
    #[serde(default = "default_pi1")]
    pub pi1: f64,
}

impl ModelSpec {
    /// The `n = 2` model with `Σ₁ = diag(4, 1)`, `Σ₂ = diag(9, 1)`, `μ = e₁`.
    pub fn diag_example() -> Self {
        ModelSpec {
            n: 2,
            mu_norm: 1.0,
            mu_direction: MuDirection::Axis,
            eigvals1: vec![4.0, 1.0],
            eigvals2: vec![9.0, 1.0],
            tail_basis: TailBasis::Shared,
            pi1: 0.5,
        }
    }

    /// Resizes both spectra to dimension `n`, truncating or repeating the
    /// last eigenvalue.
    pub fn with_dim(&self, n: usize) -> Self {
        let resize = |v: &[f64]| -> Vec<f64> {
            let last = *v.last().unwrap_or(&1.0);
            (0..n).map(|i| v.get(i).copied().unwrap_or(last)).collect()
        };
        ModelSpec {
            n,
            eigvals1: resize(&self.eigvals1),
            eigvals2: resize(&self.eigvals2),
            ..self.clone()
        }
    }

    /// Sets `‖μ‖` so that the signal-to-noise ratio equals `eta`.
    pub fn with_snr(&self, eta: f64) -> Self {
        let top = self.eigvals1[0].max(self.eigvals2[0]);
        ModelSpec {
            mu_norm: (eta * top).sqrt(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::config("n", "dimension must be at least 2"));
        }
        if !(self.mu_norm.is_finite() && self.mu_norm > 0.0) {
            return Err(Error::config("mu_norm", "must be a positive finite number"));
        }
        if !(self.pi1 > 0.0 && self.pi1 < 1.0) {
            return Err(Error::config("pi1", "must lie in (0, 1)"));
        }
        for (which, vals) in [(1u8, &self.eigvals1), (2, &self.eigvals2)] {
            let field = format!("eigvals{which}");
            if vals.len() != self.n {
                return Err(Error::config(
                    field,
                    format!("expected {} eigenvalues, got {}", self.n, vals.len()),
                ));
            }
            if vals.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::config(field, "eigenvalues must be positive and finite"));
            }
            if vals[0] <= vals[1] {
                return Err(Error::LeadingGap { which });
            }
            if vals[1..].windows(2).any(|w| w[1] > w[0]) {
                return Err(Error::config(field, "eigenvalues must be listed in descending order"));
            }
        }
        Ok(())
    }
}

/// The mixture `π₁ N(μ, Σ₁) + π₂ N(−μ, Σ₂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AllometricModel {
    mu: Vector,
    sigma1: SymMatrix,
    sigma2: SymMatrix,
    pi1: f64,
}

impl AllometricModel {
    /// Assembles a model from raw parts, checking only shapes and ranges.
    /// The allometric invariants are checked by [`validate_model`].
    pub fn from_parts(mu: Vector, sigma1: SymMatrix, sigma2: SymMatrix, pi1: f64) -> Result<Self> {
        let n = mu.dim();
        if sigma1.n() != n || sigma2.n() != n {
            return Err(Error::InvalidInput(format!(
                "dimension mismatch: mu has {n} entries, sigma1 is {}x{0}, sigma2 is {}x{1}",
                sigma1.n(),
                sigma2.n()
            )));
        }
        if !sigma1.is_finite() || !sigma2.is_finite() {
            return Err(Error::InvalidInput("covariance matrices must be finite".into()));
        }
        if !(pi1 > 0.0 && pi1 < 1.0) {
            return Err(Error::InvalidInput("pi1 must lie in (0, 1)".into()));
        }
        Ok(AllometricModel {
            mu,
            sigma1,
            sigma2,
            pi1,
        })
    }

    pub fn n(&self) -> usize {
        self.mu.dim()
    }

    pub fn mu(&self) -> &Vector {
        &self.mu
    }

    pub fn sigma1(&self) -> &SymMatrix {
        &self.sigma1
    }

    pub fn sigma2(&self) -> &SymMatrix {
        &self.sigma2
    }

    /// Covariance of component `which` (1 or 2).
    pub fn sigma(&self, which: Component) -> &SymMatrix {
        match which {
            Component::First => &self.sigma1,
            Component::Second => &self.sigma2,
        }
    }

    pub fn pi1(&self) -> f64 {
        self.pi1
    }

    pub fn pi2(&self) -> f64 {
        1.0 - self.pi1
    }

    pub fn mu_norm(&self) -> f64 {
        self.mu.norm()
    }

    /// Leading spectra of both components and `‖μ‖`, the only model
    /// quantities the bounds depend on.
    pub fn summary(&self) -> Result<ModelSummary> {
        let e1 = eig_sym(&self.sigma1)?;
        let e2 = eig_sym(&self.sigma2)?;
        Ok(ModelSummary {
            mu_norm: self.mu_norm(),
            lambda1: [e1.values[0], e2.values[0]],
            lambda2: [e1.values[1], e2.values[1]],
            pi1: self.pi1,
        })
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            n: self.n(),
            mu: self.mu.as_slice().to_vec(),
            sigma1: self.sigma1.packed_lower().to_vec(),
            sigma2: self.sigma2.packed_lower().to_vec(),
            pi1: self.pi1,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        to_json(&self.to_file())
    }

    /// Short content hash of the serialized model, for provenance.
    pub fn hash(&self) -> String {
        let json = self.to_json().expect("model serializes");
        fnv1a_hex(json.as_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    First,
    Second,
}

/// Model quantities entering the closed-form bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub mu_norm: f64,
    /// `[λ₁(Σ₁), λ₁(Σ₂)]`.
    pub lambda1: [f64; 2],
    /// `[λ₂(Σ₁), λ₂(Σ₂)]`.
    pub lambda2: [f64; 2],
    pub pi1: f64,
}

impl ModelSummary {
    pub fn max_lambda1(&self) -> f64 {
        self.lambda1[0].max(self.lambda1[1])
    }

    /// `η = ‖μ‖² / max(λ₁(Σ₁), λ₁(Σ₂))`.
    pub fn snr(&self) -> f64 {
        self.mu_norm * self.mu_norm / self.max_lambda1()
    }
}

/// On-disk model: `Σ` matrices as row-major packed lower triangles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub n: usize,
    pub mu: Vec<f64>,
    pub sigma1: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub pi1: f64,
}

impl ModelFile {
    pub fn into_model(self) -> Result<AllometricModel> {
        if self.mu.len() != self.n {
            return Err(Error::config(
                "mu",
                format!("expected {} entries, got {}", self.n, self.mu.len()),
            ));
        }
        let mu = Vector::new(self.mu).map_err(|e| Error::config("mu", e.to_string()))?;
        let sigma1 =
            SymMatrix::from_packed_lower(self.n, self.sigma1).map_err(|e| Error::config("sigma1", e.to_string()))?;
        let sigma2 =
            SymMatrix::from_packed_lower(self.n, self.sigma2).map_err(|e| Error::config("sigma2", e.to_string()))?;
        AllometricModel::from_parts(mu, sigma1, sigma2, self.pi1)
    }
}

/// Reads a model file; the model is validated at [`TOL_ALIGN_FILE`].
pub fn load_model(path: &Path) -> Result<AllometricModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ModelFile = crate::experiments::parse_json(path, &text)?;
    let model = file.into_model()?;
    validate_model(&model, TOL_ALIGN_FILE)?.into_result()?;
    Ok(model)
}

/// Orthonormal basis (as matrix columns) whose first column is the unit
/// vector `u`, from the Householder reflection mapping `e₁` to `u`.
fn basis_with_first(u: &[f64]) -> Matrix {
    let n = u.len();
    let mut w: Vec<f64> = u.iter().map(|x| -x).collect();
    w[0] += 1.0;
    let ww = dot(&w, &w);
    let mut h = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let id = if i == j { 1.0 } else { 0.0 };
            let v = if ww > 0.0 { id - 2.0 * w[i] * w[j] / ww } else { id };
            h.set(i, j, v);
        }
    }
    h
}

/// Haar-random orthogonal matrix of size `k` by Gram–Schmidt on a Gaussian
/// matrix (columns orthonormalized in order, twice for stability).
fn random_orthogonal(k: usize, rng: &mut RngStream) -> Matrix {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    while cols.len() < k {
        let mut v = vec![0.0; k];
        rng.fill_normal(&mut v);
        for _ in 0..2 {
            for c in &cols {
                let p = dot(&v, c);
                v.iter_mut().zip(c).for_each(|(x, y)| *x -= p * y);
            }
        }
        let nv = dot(&v, &v).sqrt();
        if nv > 1e-8 {
            v.iter_mut().for_each(|x| *x /= nv);
            cols.push(v);
        }
    }
    let mut q = Matrix::zeros(k, k);
    for (j, c) in cols.iter().enumerate() {
        for (i, x) in c.iter().enumerate() {
            q.set(i, j, *x);
        }
    }
    q
}

/// `Σ_k λ_k b_k b_kᵀ` over the columns `b_k` of `basis`.
fn compose(basis: &Matrix, eigvals: &[f64]) -> SymMatrix {
    let mut s = SymMatrix::zeros(basis.rows());
    for (k, &lam) in eigvals.iter().enumerate() {
        s.add_outer(lam, &basis.column(k));
    }
    s
}

/// Constructs the model described by `spec`. `γ₁(Σ₁) = γ₁(Σ₂) = μ/‖μ‖` holds
/// by construction.
pub fn build_model(spec: &ModelSpec) -> Result<AllometricModel> {
    spec.validate()?;
    let n = spec.n;
    let direction = match spec.mu_direction {
        MuDirection::Axis => Vector::axis(n, 0),
        MuDirection::Random(seed) => {
            let mut rng = RngStream::new(seed, STREAM_MU_DIRECTION);
            let mut v = vec![0.0; n];
            loop {
                rng.fill_normal(&mut v);
                let nv = dot(&v, &v).sqrt();
                if nv > 1e-8 {
                    v.iter_mut().for_each(|x| *x /= nv);
                    break;
                }
            }
            Vector::new(v)?
        }
    };

    let basis1 = basis_with_first(&direction);
    let basis2 = match spec.tail_basis {
        TailBasis::Shared => basis1.clone(),
        TailBasis::Independent(seed) => {
            let mut rng = RngStream::new(seed, STREAM_TAIL_ROTATION);
            let q = random_orthogonal(n - 1, &mut rng);
            let mut b = basis1.clone();
            for i in 0..n {
                for j in 1..n {
                    let v: f64 = (1..n).map(|k| basis1.get(i, k) * q.get(k - 1, j - 1)).sum();
                    b.set(i, j, v);
                }
            }
            b
        }
    };

    let mu = direction.scaled(spec.mu_norm);
    AllometricModel::from_parts(
        mu,
        compose(&basis1, &spec.eigvals1),
        compose(&basis2, &spec.eigvals2),
        spec.pi1,
    )
}

/// One checked invariant with its measured value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub holds: bool,
    /// The measured quantity (see `threshold` for the comparison).
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub tol: f64,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Converts a failed report into the error for its first failing check.
    pub fn into_result(self) -> Result<Self> {
        if self.passed {
            return Ok(self);
        }
        let failed = self
            .checks
            .iter()
            .find(|c| !c.holds)
            .expect("failed report has a failing check");
        Err(match failed.name {
            "sigma1_leading_gap" => Error::LeadingGap { which: 1 },
            "sigma2_leading_gap" => Error::LeadingGap { which: 2 },
            _ => Error::config(failed.name, failed.detail.clone()),
        })
    }
}

/// Checks every model invariant at tolerance `tol`, reporting the slack of
/// each. The sign of `γ₁(Σ₂)` is aligned to `γ₁(Σ₁)` before comparing.
pub fn validate_model(m: &AllometricModel, tol: f64) -> Result<ValidationReport> {
    let e1 = eig_sym(&m.sigma1)?;
    let e2 = eig_sym(&m.sigma2)?;
    let mut checks = Vec::new();

    for (name, e) in [("sigma1_spd", &e1), ("sigma2_spd", &e2)] {
        let min = *e.values.last().expect("n >= 1");
        checks.push(Check {
            name,
            holds: min > 0.0,
            measured: min,
            threshold: 0.0,
            detail: format!("smallest eigenvalue {min:e} must be > 0"),
        });
    }
    for (name, e) in [("sigma1_leading_gap", &e1), ("sigma2_leading_gap", &e2)] {
        let (l1, l2) = (e.values[0], e.values.get(1).copied().unwrap_or(f64::NEG_INFINITY));
        let gap = l1 - l2;
        let threshold = tol * l1.abs();
        checks.push(Check {
            name,
            holds: gap > threshold,
            measured: gap,
            threshold,
            detail: format!("leading gap required: lambda1 - lambda2 = {gap:e}"),
        });
    }

    let mu_norm = m.mu_norm();
    checks.push(Check {
        name: "mu_nonzero",
        holds: mu_norm > 0.0,
        measured: mu_norm,
        threshold: 0.0,
        detail: "mu must be nonzero".into(),
    });

    let g1 = e1.vector(0);
    let g2 = e2.vector(0);
    let eig_slack = 1.0 - dot(&g1, &g2).abs();
    checks.push(Check {
        name: "eigvec_alignment",
        holds: eig_slack <= tol,
        measured: eig_slack,
        threshold: tol,
        detail: format!("1 - |<gamma1(S1), gamma1(S2)>| = {eig_slack:e}"),
    });
    let mu_slack = if mu_norm > 0.0 {
        1.0 - (dot(&g1, &m.mu) / mu_norm).abs()
    } else {
        1.0
    };
    checks.push(Check {
        name: "mu_alignment",
        holds: mu_slack <= tol,
        measured: mu_slack,
        threshold: tol,
        detail: format!("1 - |<gamma1(S1), mu/|mu|>| = {mu_slack:e}"),
    });

    let passed = checks.iter().all(|c| c.holds);
    Ok(ValidationReport { passed, tol, checks })
}

/// `Σ = E[XXᵀ] = π₁Σ₁ + π₂Σ₂ + 4π₁π₂ μμᵀ`.
pub fn mixture_covariance(m: &AllometricModel) -> SymMatrix {
    let (p1, p2) = (m.pi1(), m.pi2());
    let mut s = m.sigma1.scaled(p1).add(&m.sigma2.scaled(p2));
    s.add_outer(4.0 * p1 * p2, &m.mu);
    s
}

/// Closed-form leading eigenstructure of the mixture covariance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureEigen {
    /// `π₁λ₁(Σ₁) + π₂λ₁(Σ₂) + π₁π₂‖μ₁ − μ₂‖²`.
    pub lambda1_mix: f64,
    /// `γ₁(Σ₁)`, signed along `+μ`.
    pub gamma1_mix: Vector,
    /// `π₁λ₂(Σ₁) + π₂λ₂(Σ₂)`, an upper bound on `λ₂(Σ)`.
    pub lambda2_mix_bound: f64,
}

pub fn mixture_spectrum(m: &AllometricModel) -> Result<MixtureEigen> {
    let e1 = eig_sym(&m.sigma1)?;
    let e2 = eig_sym(&m.sigma2)?;
    let (p1, p2) = (m.pi1(), m.pi2());
    let mu_sq = dot(&m.mu, &m.mu);
    let mut gamma = e1.vector(0);
    if dot(&gamma, &m.mu) < 0.0 {
        gamma = gamma.scaled(-1.0);
    }
    Ok(MixtureEigen {
        lambda1_mix: p1 * e1.values[0] + p2 * e2.values[0] + p1 * p2 * 4.0 * mu_sq,
        gamma1_mix: gamma,
        lambda2_mix_bound: p1 * e1.values[1] + p2 * e2.values[1],
    })
}

/// Signal-to-noise ratio `η = ‖μ‖² / max(λ₁(Σ₁), λ₁(Σ₂))`.
pub fn snr(m: &AllometricModel) -> Result<f64> {
    Ok(m.summary()?.snr())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diag_example_is_exact() {
        let m = build_model(&ModelSpec::diag_example()).unwrap();
        assert_eq!(m.sigma1(), &SymMatrix::from_diag(&[4.0, 1.0]));
        assert_eq!(m.sigma2(), &SymMatrix::from_diag(&[9.0, 1.0]));
        assert_eq!(m.mu().as_slice(), &[1.0, 0.0]);
        assert_eq!(mixture_covariance(&m), SymMatrix::from_diag(&[7.5, 1.0]));

        let q = mixture_spectrum(&m).unwrap();
        assert_eq!(q.lambda1_mix, 7.5);
        assert_eq!(q.gamma1_mix.as_slice(), &[1.0, 0.0]);
        assert_eq!(q.lambda2_mix_bound, 1.0);
        assert!((snr(&m).unwrap() - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn unequal_weights_closed_form() {
        let spec = ModelSpec {
            pi1: 0.25,
            ..ModelSpec::diag_example()
        };
        let q = mixture_spectrum(&build_model(&spec).unwrap()).unwrap();
        assert!((q.lambda1_mix - 8.5).abs() < 1e-14);
    }

    #[test]
    fn snr_of_unit_example() {
        let spec = ModelSpec {
            mu_norm: 3.0,
            ..ModelSpec::diag_example()
        };
        assert!((snr(&build_model(&spec).unwrap()).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gap_violation_is_rejected() {
        let spec = ModelSpec {
            n: 3,
            eigvals1: vec![1.0, 1.0, 0.5],
            eigvals2: vec![2.0, 1.0, 0.5],
            ..ModelSpec::diag_example()
        };
        let err = build_model(&spec).unwrap_err();
        assert!(matches!(err, Error::LeadingGap { which: 1 }));
        assert!(err.to_string().contains("leading gap required"));
    }

    #[test]
    fn independent_tail_changes_trailing_eigenvectors() {
        let spec = ModelSpec {
            n: 3,
            mu_norm: 2.0,
            mu_direction: MuDirection::Random(5),
            eigvals1: vec![5.0, 2.0, 1.0],
            eigvals2: vec![6.0, 3.0, 0.5],
            tail_basis: TailBasis::Independent(9),
            pi1: 0.5,
        };
        let m = build_model(&spec).unwrap();
        let report = validate_model(&m, TOL_ALIGN_CONSTRUCTED).unwrap();
        assert!(report.passed, "{report:?}");
        let e1 = eig_sym(m.sigma1()).unwrap();
        let e2 = eig_sym(m.sigma2()).unwrap();
        for k in 1..3 {
            let overlap = dot(&e1.vector(k), &e2.vector(k)).abs();
            assert!(overlap < 1.0 - 1e-6, "eigenvector {k} unchanged: {overlap}");
        }
    }

    #[test]
    fn rotated_sigma2_fails_alignment() {
        let m = build_model(&ModelSpec::diag_example()).unwrap();
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        // R diag(9, 1) Rᵀ for a rotation by 0.3 rad
        let rotated = SymMatrix::from_fn(2, |i, j| {
            let r = [[c, -s], [s, c]];
            r[i][0] * 9.0 * r[j][0] + r[i][1] * 1.0 * r[j][1]
        });
        let bad = AllometricModel::from_parts(m.mu().clone(), m.sigma1().clone(), rotated, 0.5).unwrap();
        let report = validate_model(&bad, TOL_ALIGN_CONSTRUCTED).unwrap();
        assert!(!report.passed);
        assert!(!report.check("eigvec_alignment").unwrap().holds);
        assert!(report.check("mu_alignment").unwrap().holds);
    }

    #[test]
    fn equal_leading_eigenvalues_fail_gap() {
        let m = AllometricModel::from_parts(
            Vector::axis(2, 0),
            SymMatrix::from_diag(&[2.0, 2.0]),
            SymMatrix::from_diag(&[3.0, 1.0]),
            0.5,
        )
        .unwrap();
        let report = validate_model(&m, TOL_ALIGN_CONSTRUCTED).unwrap();
        assert!(!report.check("sigma1_leading_gap").unwrap().holds);
        assert!(matches!(report.into_result(), Err(Error::LeadingGap { which: 1 })));
    }

    #[test]
    fn spec_strings_round_trip() {
        for s in ["axis", "random(42)"] {
            assert_eq!(s.parse::<MuDirection>().unwrap().to_string(), s);
        }
        for s in ["shared", "independent(7)"] {
            assert_eq!(s.parse::<TailBasis>().unwrap().to_string(), s);
        }
        assert!("random".parse::<MuDirection>().is_err());
        assert!("independent(x)".parse::<TailBasis>().is_err());
    }

    #[test]
    fn with_dim_pads_with_last_value() {
        let s = ModelSpec::diag_example().with_dim(4);
        assert_eq!(s.eigvals1, vec![4.0, 1.0, 1.0, 1.0]);
        assert_eq!(s.with_dim(2).eigvals2, vec![9.0, 1.0]);
        assert!((s.with_snr(2.0).mu_norm - 18f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn file_round_trip_preserves_bits() {
        let spec = ModelSpec {
            n: 4,
            mu_norm: 1.7,
            mu_direction: MuDirection::Random(3),
            eigvals1: vec![3.0, 1.0, 0.7, 0.2],
            eigvals2: vec![5.0, 2.0, 1.0, 0.1],
            tail_basis: TailBasis::Independent(4),
            pi1: 0.3,
        };
        let m = build_model(&spec).unwrap();
        let json = m.to_json().unwrap();
        let back: ModelFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back.into_model().unwrap(), m);
    }
}
