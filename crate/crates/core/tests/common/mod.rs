//! Independent oracles shared by the integration suites. None of these call
//! into the library's numerics.

#![allow(dead_code)]

use allospec::model::{ModelSpec, MuDirection, TailBasis};
use allospec::numerics::SymMatrix;
use allospec::sampler::RngStream;

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut d = 1.0;
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        if a[p][k] == 0.0 {
            return 0.0;
        }
        if p != k {
            a.swap(p, k);
            d = -d;
        }
        d *= a[k][k];
        let (top, rest) = a.split_at_mut(k + 1);
        let pivot = &top[k];
        for row in rest.iter_mut() {
            let f = row[k] / pivot[k];
            row.iter_mut().zip(pivot).skip(k).for_each(|(x, p)| *x -= f * p);
        }
    }
    d
}

fn char_poly_at(a: &SymMatrix, x: f64) -> f64 {
    let n = a.n();
    det((0..n)
        .map(|i| (0..n).map(|j| a.get(i, j) - if i == j { x } else { 0.0 }).collect())
        .collect())
}

/// Roots of `det(A − xI)` in descending order, found by scanning the
/// Gershgorin interval for sign changes and bisecting each bracket. Assumes
/// distinct eigenvalues, which holds almost surely for random matrices.
pub fn char_poly_roots(a: &SymMatrix) -> Vec<f64> {
    let n = a.n();
    let radius = (0..n)
        .map(|i| (0..n).map(|j| a.get(i, j).abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let (lo, hi) = (-radius - 1.0, radius + 1.0);
    let steps = 200_000;
    let h = (hi - lo) / steps as f64;
    let mut roots = Vec::new();
    let mut x0 = lo;
    let mut f0 = char_poly_at(a, x0);
    for k in 1..=steps {
        let x1 = lo + k as f64 * h;
        let f1 = char_poly_at(a, x1);
        if f1 == 0.0 {
            roots.push(x1);
        } else if f0 != 0.0 && (f0 < 0.0) != (f1 < 0.0) {
            let (mut a_, mut b_, mut fa) = (x0, x1, f0);
            for _ in 0..200 {
                let mid = 0.5 * (a_ + b_);
                if mid <= a_ || mid >= b_ {
                    break;
                }
                let fm = char_poly_at(a, mid);
                if (fm < 0.0) == (fa < 0.0) {
                    a_ = mid;
                    fa = fm;
                } else {
                    b_ = mid;
                }
            }
            roots.push(0.5 * (a_ + b_));
        }
        x0 = x1;
        f0 = f1;
    }
    roots.sort_by(|x, y| y.total_cmp(x));
    roots
}

/// Nodes and weights of `order`-point Gauss–Legendre quadrature on [−1, 1].
fn gauss_legendre(order: usize) -> Vec<(f64, f64)> {
    (0..order)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=order {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = order as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// `Φ(x)` by integrating the density. The lower tail is integrated directly
/// so small probabilities keep their relative accuracy.
pub fn phi_quadrature(x: f64) -> f64 {
    if x > 0.0 {
        return 1.0 - phi_quadrature(-x);
    }
    let rule = gauss_legendre(20);
    let density = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let width = 0.25;
    let mut total = 0.0;
    // ∫_{−∞}^{x} φ = ∫_0^{40} φ(x − s) ds to well below double precision.
    for panel in 0..160 {
        let a = panel as f64 * width;
        let mid = a + 0.5 * width;
        total += rule
            .iter()
            .map(|&(t, w)| w * density(x - (mid + 0.5 * width * t)))
            .sum::<f64>()
            * 0.5
            * width;
    }
    total
}

pub fn uniform(rng: &mut RngStream, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.next_f64()
}

/// `B Bᵀ / n + δ I` with standard normal `B`.
pub fn random_spd(rng: &mut RngStream, n: usize) -> SymMatrix {
    let b: Vec<f64> = (0..n * n).map(|_| rng.next_normal()).collect();
    let delta = uniform(rng, 0.01, 1.0);
    SymMatrix::from_fn(n, |i, j| {
        let s: f64 = (0..n).map(|k| b[i * n + k] * b[j * n + k]).sum();
        s / n as f64 + if i == j { delta } else { 0.0 }
    })
}

fn descending_spectrum(rng: &mut RngStream, n: usize) -> Vec<f64> {
    let top = uniform(rng, 2.0, 20.0);
    let mut tail: Vec<f64> = (1..n).map(|_| uniform(rng, 0.05, top / 1.2)).collect();
    tail.sort_by(|a, b| b.total_cmp(a));
    let mut v = vec![top];
    v.extend(tail);
    v
}

/// A random valid model spec with `2 ≤ n ≤ max_n` and `π₁ ∈ [0.1, 0.9]`.
pub fn random_model_spec(rng: &mut RngStream, max_n: usize, shared_tail: bool) -> ModelSpec {
    let n = 2 + (rng.next_u64() % (max_n as u64 - 1)) as usize;
    ModelSpec {
        n,
        mu_norm: uniform(rng, 0.1, 5.0),
        mu_direction: MuDirection::Random(rng.next_u64()),
        eigvals1: descending_spectrum(rng, n),
        eigvals2: descending_spectrum(rng, n),
        tail_basis: if shared_tail {
            TailBasis::Shared
        } else {
            TailBasis::Independent(rng.next_u64())
        },
        pi1: uniform(rng, 0.1, 0.9),
    }
}

/// Reference values of `Φ` at negative arguments, from standard tables.
pub const PHI_TABLE: [(f64, f64); 6] = [
    (-0.5, 0.308_537_538_725_986_9),
    (-1.0, 0.158_655_253_931_457_05),
    (-2.0, 0.022_750_131_948_179_21),
    (-3.0, 0.001_349_898_031_630_094_6),
    (-5.0, 2.866_515_718_791_939e-7),
    (-8.0, 6.220_960_574_271_785e-16),
];
