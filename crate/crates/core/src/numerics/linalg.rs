//! Dense symmetric linear algebra.
//!
//! Everything here is deterministic: the Jacobi sweep order is fixed, ties in
//! the eigenvalue sort keep their original index order, and eigenvector signs
//! are normalized. Identical input bits give identical output bits.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const JACOBI_MAX_SWEEPS: usize = 64;
const JACOBI_REL_TOL: f64 = 1e-13;

/// Dimension from which [`top_eigvec`] switches from the full Jacobi
/// decomposition to power iteration.
pub const POWER_ITERATION_MIN_DIM: usize = 256;
const POWER_MAX_ITER: usize = 100_000;
const POWER_ANGLE_TOL: f64 = 1e-12;
const POWER_STALL_WINDOW: usize = 1000;
const GAP_WARN_REL: f64 = 1e-12;
const SPD_REL_FLOOR: f64 = 1e-12;

/// A real vector with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidInput("vector must have dimension >= 1".into()));
        }
        if let Some(i) = entries.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("vector entry {i} is not finite")));
        }
        Ok(Vector(entries))
    }

    pub(crate) fn from_vec(entries: Vec<f64>) -> Self {
        debug_assert!(!entries.is_empty());
        Vector(entries)
    }

    /// The `i`-th standard basis vector of dimension `n`.
    pub fn axis(n: usize, i: usize) -> Self {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        Vector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Vector(self.0.iter().map(|x| x * factor).collect())
    }

    pub fn normalized(&self) -> Self {
        self.scaled(1.0 / self.norm())
    }
}

impl Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Vector::new(v)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                for (o, b) in out.row_mut(i).iter_mut().zip(orow) {
                    *o += a * b;
                }
            }
        }
        out
    }
}

/// Symmetric matrix stored as a single packed triangle, so symmetry holds
/// exactly. Entry `(i, j)` with `i >= j` lives at `i * (i + 1) / 2 + j`,
/// i.e. the lower triangle in row-major order (equivalently the upper
/// triangle in column-major order).
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    packed: Vec<f64>,
}

#[inline]
fn packed_index(i: usize, j: usize) -> usize {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    r * (r + 1) / 2 + c
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            packed: vec![0.0; n * (n + 1) / 2],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![1.0; n])
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = SymMatrix::zeros(diag.len());
        for (i, d) in diag.iter().enumerate() {
            m.set(i, i, *d);
        }
        m
    }

    /// Builds from a function evaluated on the lower triangle (`i >= j`).
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut packed = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in 0..=i {
                packed.push(f(i, j));
            }
        }
        SymMatrix { n, packed }
    }

    /// Builds from the packed row-major lower triangle.
    pub fn from_packed_lower(n: usize, packed: Vec<f64>) -> Result<Self> {
        if packed.len() != n * (n + 1) / 2 {
            return Err(Error::InvalidInput(format!(
                "packed triangle of a {n}x{n} matrix needs {} entries, got {}",
                n * (n + 1) / 2,
                packed.len()
            )));
        }
        Ok(SymMatrix { n, packed })
    }

    /// Builds from full rows; only the upper triangle (`j >= i`) is read.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput("matrix rows must all have length n".into()));
        }
        Ok(SymMatrix::from_fn(n, |i, j| rows[j][i]))
    }

    /// Symmetric part of a square dense matrix, taking the upper triangle.
    pub fn from_upper(m: &Matrix) -> Self {
        assert_eq!(m.rows(), m.cols());
        SymMatrix::from_fn(m.rows(), |i, j| m.get(j, i))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.packed[packed_index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.packed[packed_index(i, j)] = value;
    }

    pub fn packed_lower(&self) -> &[f64] {
        &self.packed
    }

    pub fn to_dense(&self) -> Matrix {
        let n = self.n;
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = self.get(i, j);
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.packed.iter().all(|x| x.is_finite())
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..=i {
                let v = self.get(i, j);
                s += if i == j { v * v } else { 2.0 * v * v };
            }
        }
        s.sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.packed.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.n, other.n);
        self.packed
            .iter()
            .zip(&other.packed)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let base = i * (i + 1) / 2;
            let row = &self.packed[base..base + i + 1];
            let mut acc = 0.0;
            for (j, a) in row.iter().enumerate() {
                acc += a * x[j];
                if j < i {
                    y[j] += a * x[i];
                }
            }
            y[i] += acc;
        }
        y
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.matvec(x))
    }

    pub fn scaled(&self, factor: f64) -> SymMatrix {
        SymMatrix {
            n: self.n,
            packed: self.packed.iter().map(|x| x * factor).collect(),
        }
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.n, other.n);
        SymMatrix {
            n: self.n,
            packed: self.packed.iter().zip(&other.packed).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        self.add(&other.scaled(-1.0))
    }

    /// `self += alpha * x x^T`.
    pub fn add_outer(&mut self, alpha: f64, x: &[f64]) {
        assert_eq!(x.len(), self.n);
        let mut k = 0;
        for i in 0..self.n {
            let axi = alpha * x[i];
            for xj in &x[..=i] {
                self.packed[k] += axi * xj;
                k += 1;
            }
        }
    }

    /// Product with a dense matrix of matching size, `self * m`.
    pub fn mul_dense(&self, m: &Matrix) -> Matrix {
        self.to_dense().matmul(m)
    }

    /// Lower bound on the spectrum from Gershgorin discs.
    pub fn gershgorin_lower(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let radius: f64 = (0..self.n).filter(|&j| j != i).map(|j| self.get(i, j).abs()).sum();
                self.get(i, i) - radius
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomp {
    /// λ₁ ≥ λ₂ ≥ … ≥ λₙ.
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector for `values[k]`.
    pub vectors: Matrix,
}

impl EigenDecomp {
    pub fn vector(&self, k: usize) -> Vector {
        Vector::from_vec(self.vectors.column(k))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_finite(a: &SymMatrix) -> Result<()> {
    if a.n() == 0 {
        return Err(Error::InvalidInput("matrix dimension must be >= 1".into()));
    }
    if !a.is_finite() {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    Ok(())
}

/// Flips `v` so its largest-magnitude entry (lowest index on ties) is positive.
fn normalize_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Full eigen-decomposition by cyclic Jacobi rotations.
///
/// Sweeps visit pairs `(p, q)`, `p < q`, in row order and stop once the
/// off-diagonal Frobenius mass is at most `1e-13 * ‖A‖_F` (at most 64 sweeps).
pub fn eig_sym(a: &SymMatrix) -> Result<EigenDecomp> {
    check_finite(a)?;
    let n = a.n();
    let mut w = a.to_dense().data;
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let target = JACOBI_REL_TOL * a.frobenius_norm();
    let off_norm = |w: &[f64]| -> f64 {
        let mut s = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                s += 2.0 * w[p * n + q] * w[p * n + q];
            }
        }
        s.sqrt()
    };

    let mut converged = false;
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        if off_norm(&w) <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = w[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = w[p * n + p];
                let aqq = w[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                w[p * n + p] = app - t * apq;
                w[q * n + q] = aqq + t * apq;
                w[p * n + q] = 0.0;
                w[q * n + p] = 0.0;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = w[k * n + p];
                    let akq = w[k * n + q];
                    let nkp = akp - s * (akq + tau * akp);
                    let nkq = akq + s * (akp - tau * akq);
                    w[k * n + p] = nkp;
                    w[p * n + k] = nkp;
                    w[k * n + q] = nkq;
                    w[q * n + k] = nkq;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = vkp - s * (vkq + tau * vkp);
                    v[k * n + q] = vkq + s * (vkp - tau * vkq);
                }
            }
        }
    }
    if !converged {
        let residual = off_norm(&w);
        if residual > target {
            return Err(Error::NonConvergence {
                sweeps: JACOBI_MAX_SWEEPS,
                residual,
            });
        }
    }

    let diag: Vec<f64> = (0..n).map(|i| w[i * n + i]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal eigenvalues keep their original index order
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).expect("finite eigenvalues"));

    let values = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    let mut col = vec![0.0; n];
    for (k, &src) in order.iter().enumerate() {
        for (r, c) in col.iter_mut().enumerate() {
            *c = v[r * n + src];
        }
        normalize_sign(&mut col);
        for (r, c) in col.iter().enumerate() {
            vectors.set(r, k, *c);
        }
    }
    Ok(EigenDecomp { values, vectors })
}

/// Leading eigenpair.
#[derive(Debug, Clone, PartialEq)]
pub struct TopEigen {
    pub value: f64,
    pub vector: Vector,
    /// Set when the relative gap `(λ₁ − λ₂)/|λ₁|` is below `1e-12` (or power
    /// iteration ran out of iterations), i.e. the eigenvector is not well
    /// determined.
    pub ill_conditioned: bool,
}

/// Largest eigenvalue and its unit eigenvector.
///
/// With a `hint` the sign is chosen so that `⟨γ₁, hint⟩ ≥ 0`; otherwise the
/// [`eig_sym`] sign convention applies.
pub fn top_eigvec(a: &SymMatrix, hint: Option<&[f64]>) -> Result<TopEigen> {
    check_finite(a)?;
    if let Some(h) = hint {
        if h.len() != a.n() {
            return Err(Error::InvalidInput("hint dimension does not match matrix".into()));
        }
        if norm(h) <= 0.0 {
            return Err(Error::InvalidInput("hint must be nonzero".into()));
        }
    }
    let mut top = if a.n() < POWER_ITERATION_MIN_DIM {
        top_from_decomposition(a)?
    } else {
        power_iteration(a)
    };
    if let Some(h) = hint {
        if dot(&top.vector, h) < 0.0 {
            top.vector = top.vector.scaled(-1.0);
        }
    }
    Ok(top)
}

fn top_from_decomposition(a: &SymMatrix) -> Result<TopEigen> {
    let eig = eig_sym(a)?;
    let l1 = eig.values[0];
    let ill_conditioned = match eig.values.get(1) {
        Some(l2) => (l1 - l2) < GAP_WARN_REL * l1.abs().max(f64::MIN_POSITIVE),
        None => false,
    };
    Ok(TopEigen {
        value: l1,
        vector: eig.vector(0),
        ill_conditioned,
    })
}

/// Power iteration for the largest eigenvalue, shifted so the iteration matrix
/// is positive semidefinite. Starts from the normalized all-ones vector and
/// restarts once from a perturbed start if the iteration stalls (the iterate
/// collapses to zero or stops moving toward a fixed point).
pub(crate) fn power_iteration(a: &SymMatrix) -> TopEigen {
    let n = a.n();
    let shift = (-a.gershgorin_lower()).max(0.0);
    let start = vec![1.0 / (n as f64).sqrt(); n];

    let (mut v, mut converged, stalled) = power_run(a, shift, start);
    if stalled {
        let mut start = vec![1.0; n];
        start[0] += 1e-6;
        let s = norm(&start);
        start.iter_mut().for_each(|x| *x /= s);
        let rerun = power_run(a, shift, start);
        v = rerun.0;
        converged = rerun.1;
    }
    normalize_sign(&mut v);
    let value = a.quad_form(&v);
    TopEigen {
        value,
        vector: Vector::from_vec(v),
        ill_conditioned: !converged,
    }
}

/// Returns `(vector, converged, stalled)`.
fn power_run(a: &SymMatrix, shift: f64, mut v: Vec<f64>) -> (Vec<f64>, bool, bool) {
    let mut best_change = f64::INFINITY;
    let mut since_best = 0;
    for _ in 0..POWER_MAX_ITER {
        let mut w = a.matvec(&v);
        for (wi, vi) in w.iter_mut().zip(&v) {
            *wi += shift * vi;
        }
        let wn = norm(&w);
        if wn == 0.0 {
            return (v, false, true);
        }
        w.iter_mut().for_each(|x| *x /= wn);
        let change = w.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        v = w;
        if change <= POWER_ANGLE_TOL {
            return (v, true, false);
        }
        if change < best_change * (1.0 - 1e-3) {
            best_change = change;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= POWER_STALL_WINDOW {
                return (v, false, true);
            }
        }
    }
    (v, false, false)
}

/// `Σ_k f(λ_k) v_k v_kᵀ` for an SPD input, rejecting eigenvalues at or below
/// `1e-12 · λ₁`.
fn spd_function(a: &SymMatrix, f: impl Fn(f64) -> f64) -> Result<SymMatrix> {
    let eig = eig_sym(a)?;
    check_spd(&eig)?;
    Ok(spectral_compose(&eig, f))
}

fn check_spd(eig: &EigenDecomp) -> Result<()> {
    let l1 = eig.values[0];
    let floor = SPD_REL_FLOOR * l1;
    for (index, &value) in eig.values.iter().enumerate() {
        if !(l1 > 0.0) || value <= floor {
            return Err(Error::NotPositiveDefinite { index, value });
        }
    }
    Ok(())
}

fn spectral_compose(eig: &EigenDecomp, f: impl Fn(f64) -> f64) -> SymMatrix {
    let n = eig.values.len();
    let mut out = SymMatrix::zeros(n);
    for (k, &lam) in eig.values.iter().enumerate() {
        out.add_outer(f(lam), &eig.vectors.column(k));
    }
    out
}

/// Symmetric square root of an SPD matrix.
pub fn spd_sqrt(a: &SymMatrix) -> Result<SymMatrix> {
    spd_function(a, f64::sqrt)
}

/// Inverse of the symmetric square root of an SPD matrix.
pub fn spd_inv_sqrt(a: &SymMatrix) -> Result<SymMatrix> {
    spd_function(a, |l| 1.0 / l.sqrt())
}

/// `(A^{1/2}, A^{-1/2})` from a single decomposition.
pub fn spd_sqrt_pair(a: &SymMatrix) -> Result<(SymMatrix, SymMatrix)> {
    let eig = eig_sym(a)?;
    check_spd(&eig)?;
    Ok((
        spectral_compose(&eig, f64::sqrt),
        spectral_compose(&eig, |l| 1.0 / l.sqrt()),
    ))
}

/// Operator (spectral) norm, `max |λ_k|`.
pub fn op_norm(a: &SymMatrix) -> Result<f64> {
    let eig = eig_sym(a)?;
    let first = eig.values[0].abs();
    let last = eig.values[eig.values.len() - 1].abs();
    Ok(first.max(last))
}
