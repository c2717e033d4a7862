//! Sampling from the two-component mixture and derived sample quantities.

mod rng;

pub use rng::{mix64, philox4x32_10, RngStream};

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{AllometricModel, Component};
use crate::numerics::{spd_sqrt_pair, Matrix, SymMatrix};

/// Labeled draws `Xᵢ = θᵢ μ + g_i^{(θᵢ)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    labels: Vec<i8>,
    points: Matrix,
    model_hash: String,
    seed: u64,
    stream_id: u64,
}

impl LabeledSample {
    /// Wraps externally produced points; `labels` must be `±1` and match the
    /// number of rows.
    pub fn from_parts(labels: Vec<i8>, points: Matrix) -> Result<Self> {
        if labels.len() != points.rows() {
            return Err(Error::InvalidInput(format!(
                "{} labels for {} points",
                labels.len(),
                points.rows()
            )));
        }
        if labels.iter().any(|&t| t != 1 && t != -1) {
            return Err(Error::InvalidInput("labels must be +1 or -1".into()));
        }
        Ok(LabeledSample {
            labels,
            points,
            model_hash: String::new(),
            seed: 0,
            stream_id: 0,
        })
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }

    pub fn m(&self) -> usize {
        self.points.rows()
    }

    pub fn n(&self) -> usize {
        self.points.cols()
    }

    /// Hash of the generating model, empty for samples built by
    /// [`LabeledSample::from_parts`].
    pub fn model_hash(&self) -> &str {
        &self.model_hash
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// CSV dump with header `theta,x1,...,xn`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta");
        for j in 1..=self.n() {
            let _ = write!(out, ",x{j}");
        }
        out.push('\n');
        for (t, row) in self.labels.iter().zip(self.points.iter_rows()) {
            let _ = write!(out, "{t}");
            for x in row {
                out.push(',');
                out.push_str(&crate::format::sig17(*x));
            }
            out.push('\n');
        }
        out
    }
}

/// Symmetric square roots of both component covariances, computed once and
/// reused across replications.
#[derive(Debug, Clone)]
pub struct MixtureSampler {
    mu: Vec<f64>,
    pi1: f64,
    root: [Matrix; 2],
    inv_root: [SymMatrix; 2],
    model_hash: String,
}

impl MixtureSampler {
    pub fn new(model: &AllometricModel) -> Result<Self> {
        let (r1, i1) = spd_sqrt_pair(model.sigma1())?;
        let (r2, i2) = spd_sqrt_pair(model.sigma2())?;
        Ok(MixtureSampler {
            mu: model.mu().as_slice().to_vec(),
            pi1: model.pi1(),
            root: [r1.to_dense(), r2.to_dense()],
            inv_root: [i1, i2],
            model_hash: model.hash(),
        })
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    /// Draws one labeled point into `x`, using `z` as scratch for the
    /// standard normal vector. Per point the stream yields one uniform for
    /// the label followed by `n` normals.
    pub fn draw_into(&self, rng: &mut RngStream, x: &mut [f64], z: &mut [f64]) -> i8 {
        let theta: i8 = if rng.next_f64() < self.pi1 { 1 } else { -1 };
        rng.fill_normal(z);
        let a = &self.root[if theta == 1 { 0 } else { 1 }];
        let sign = theta as f64;
        for (i, xi) in x.iter_mut().enumerate() {
            let row = a.row(i);
            let mut acc = 0.0;
            for (aij, zj) in row.iter().zip(z.iter()) {
                acc += aij * zj;
            }
            *xi = sign * self.mu[i] + acc;
        }
        theta
    }

    pub fn sample(&self, m: usize, rng: &mut RngStream) -> Result<LabeledSample> {
        if m == 0 {
            return Err(Error::InvalidInput("sample size m must be at least 1".into()));
        }
        let n = self.n();
        let mut points = Matrix::zeros(m, n);
        let mut labels = Vec::with_capacity(m);
        let mut z = vec![0.0; n];
        for i in 0..m {
            labels.push(self.draw_into(rng, points.row_mut(i), &mut z));
        }
        Ok(LabeledSample {
            labels,
            points,
            model_hash: self.model_hash.clone(),
            seed: rng.seed(),
            stream_id: rng.stream_id(),
        })
    }

    /// `Σ_which^{-1/2}` for component `which`.
    pub fn inv_root(&self, which: Component) -> &SymMatrix {
        match which {
            Component::First => &self.inv_root[0],
            Component::Second => &self.inv_root[1],
        }
    }
}

/// Draws `m` labeled points. Builds the square roots on every call; use
/// [`MixtureSampler`] when sampling repeatedly from one model.
pub fn sample(m: usize, model: &AllometricModel, rng: &mut RngStream) -> Result<LabeledSample> {
    MixtureSampler::new(model)?.sample(m, rng)
}

/// Uncentered second-moment matrix `S_m = (1/m) Σ XᵢXᵢᵀ`.
pub fn sample_cov(s: &LabeledSample) -> SymMatrix {
    second_moment(s.points())
}

/// `(1/m) Σ xᵢxᵢᵀ` over the rows of `points`.
pub fn second_moment(points: &Matrix) -> SymMatrix {
    let (m, n) = (points.rows(), points.cols());
    let mut acc = vec![0.0; n * (n + 1) / 2];
    for row in points.iter_rows() {
        let mut k = 0;
        for i in 0..n {
            let xi = row[i];
            for xj in &row[..=i] {
                acc[k] += xi * xj;
                k += 1;
            }
        }
    }
    let inv_m = 1.0 / m.max(1) as f64;
    acc.iter_mut().for_each(|v| *v *= inv_m);
    SymMatrix::from_packed_lower(n, acc).expect("packed length matches")
}

/// Rows `Σ_which^{-1/2}(Xᵢ − s μ)` for every point, with `s = +1` for the
/// first component and `−1` for the second. Restricted to points carrying
/// the matching label these are standard normal vectors.
pub fn whiten(s: &LabeledSample, model: &AllometricModel, which: Component) -> Result<Matrix> {
    let inv = crate::numerics::spd_inv_sqrt(model.sigma(which))?;
    whiten_with(s.points(), model.mu().as_slice(), &inv, which)
}

pub(crate) fn whiten_with(points: &Matrix, mu: &[f64], inv_root: &SymMatrix, which: Component) -> Result<Matrix> {
    let n = mu.len();
    if points.cols() != n || inv_root.n() != n {
        return Err(Error::InvalidInput(
            "dimension mismatch between sample and model".into(),
        ));
    }
    let sign = match which {
        Component::First => 1.0,
        Component::Second => -1.0,
    };
    let mut out = Matrix::zeros(points.rows(), n);
    let mut centered = vec![0.0; n];
    for (i, row) in points.iter_rows().enumerate() {
        for j in 0..n {
            centered[j] = row[j] - sign * mu[j];
        }
        out.row_mut(i).copy_from_slice(&inv_root.matvec(&centered));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, mixture_covariance, ModelSpec, MuDirection, TailBasis};

    fn small_model(pi1: f64) -> AllometricModel {
        build_model(&ModelSpec {
            n: 3,
            mu_norm: 1.5,
            mu_direction: MuDirection::Random(11),
            eigvals1: vec![4.0, 1.0, 0.5],
            eigvals2: vec![6.0, 2.0, 0.3],
            tail_basis: TailBasis::Independent(12),
            pi1,
        })
        .unwrap()
    }

    #[test]
    fn sample_cov_small_cases() {
        let one = LabeledSample::from_parts(vec![1], Matrix::from_row_major(1, 2, vec![1.0, 0.0]).unwrap()).unwrap();
        assert_eq!(sample_cov(&one), SymMatrix::from_diag(&[1.0, 0.0]));
        let two = LabeledSample::from_parts(
            vec![1, -1],
            Matrix::from_row_major(2, 2, vec![1.0, 0.0, -1.0, 0.0]).unwrap(),
        )
        .unwrap();
        assert_eq!(sample_cov(&two), SymMatrix::from_diag(&[1.0, 0.0]));
    }

    #[test]
    fn rejects_bad_parts() {
        let pts = Matrix::zeros(2, 2);
        assert!(LabeledSample::from_parts(vec![1], pts.clone()).is_err());
        assert!(LabeledSample::from_parts(vec![1, 0], pts).is_err());
    }

    #[test]
    fn deterministic_per_stream() {
        let m = small_model(0.5);
        let a = sample(50, &m, &mut RngStream::new(1, 2)).unwrap();
        let b = sample(50, &m, &mut RngStream::new(1, 2)).unwrap();
        let c = sample(50, &m, &mut RngStream::new(1, 3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_csv(), b.to_csv());
        assert_ne!(a.points(), c.points());
        assert_eq!(a.model_hash(), m.hash());
    }

    #[test]
    fn label_marginal_within_envelope() {
        for pi1 in [0.5, 0.3] {
            let mm = 100_000;
            let s = sample(mm, &small_model(pi1), &mut RngStream::new(7, 0)).unwrap();
            let p = s.labels().iter().filter(|&&t| t == 1).count() as f64 / mm as f64;
            assert!(
                (p - pi1).abs() <= 4.0 * (pi1 * (1.0 - pi1) / mm as f64).sqrt(),
                "pi1={pi1} p={p}"
            );
        }
    }

    #[test]
    fn mean_within_clt_envelope() {
        let model = small_model(0.5);
        let mm = 200_000;
        let s = sample(mm, &model, &mut RngStream::new(3, 4)).unwrap();
        let mut mean = [0.0; 3];
        for row in s.points().iter_rows() {
            mean.iter_mut().zip(row).for_each(|(a, x)| *a += x / mm as f64);
        }
        let lam = crate::numerics::eig_sym(&mixture_covariance(&model)).unwrap().values[0];
        let norm = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm <= 4.0 * (lam / mm as f64).sqrt() * 3f64.sqrt(), "{norm}");
    }

    #[test]
    fn whitening_a_mean_gives_zero() {
        let model = small_model(0.5);
        let mu = model.mu().as_slice().to_vec();
        let s = LabeledSample::from_parts(vec![1], Matrix::from_row_major(1, 3, mu).unwrap()).unwrap();
        let w = whiten(&s, &model, Component::First).unwrap();
        assert!(w.as_slice().iter().all(|x| x.abs() < 1e-14));
        let neg: Vec<f64> = model.mu().iter().map(|x| -x).collect();
        let s = LabeledSample::from_parts(vec![-1], Matrix::from_row_major(1, 3, neg).unwrap()).unwrap();
        let w = whiten(&s, &model, Component::Second).unwrap();
        assert!(w.as_slice().iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn whitened_first_component_is_isotropic() {
        let model = small_model(0.5);
        let s = sample(100_000, &model, &mut RngStream::new(5, 6)).unwrap();
        let w = whiten(&s, &model, Component::First).unwrap();
        let rows: Vec<f64> = s
            .labels()
            .iter()
            .zip(w.iter_rows())
            .filter(|(t, _)| **t == 1)
            .flat_map(|(_, r)| r.iter().copied())
            .collect();
        let k = rows.len() / 3;
        let cov = second_moment(&Matrix::from_row_major(k, 3, rows).unwrap());
        // entry variance is 1 on the diagonal (2 for x²), 1 off it
        for i in 0..3 {
            for j in 0..=i {
                let target = if i == j { 1.0 } else { 0.0 };
                let se = if i == j {
                    (2.0 / k as f64).sqrt()
                } else {
                    (1.0 / k as f64).sqrt()
                };
                assert!(
                    (cov.get(i, j) - target).abs() <= 3.0 * se,
                    "({i},{j}) = {}",
                    cov.get(i, j)
                );
            }
        }
    }

    #[test]
    fn csv_header() {
        let s = sample(2, &small_model(0.5), &mut RngStream::new(0, 0)).unwrap();
        let csv = s.to_csv();
        assert!(csv.starts_with("theta,x1,x2,x3\n"));
        assert_eq!(csv.lines().count(), 3);
    }
}
