//! Dense symmetric linear algebra and the standard normal distribution function.

mod linalg;
mod normal;

pub use linalg::{
    dot, eig_sym, norm, op_norm, spd_inv_sqrt, spd_sqrt, spd_sqrt_pair, top_eigvec, EigenDecomp, Matrix, SymMatrix,
    TopEigen, Vector, POWER_ITERATION_MIN_DIM,
};
pub use normal::{erfc, std_normal_cdf, std_normal_pdf};

#[doc(hidden)]
pub fn power_iteration(a: &SymMatrix) -> TopEigen {
    linalg::power_iteration(a)
}
