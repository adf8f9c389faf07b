//! Partial transposition of optimal measurements with respect to the split
//! training set | data qubit.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::blocks::symmetric_eigenvalues;
use crate::error::{domain, Result};
use crate::oracle::dense::partial_transpose;
use crate::oracle::states::{build_average_states, lm_povm_element, povm_error, pure_seed_operator};

/// Largest `n` for the dense partial-transpose test.
pub const PPT_MAX_N: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PptReport {
    pub n: usize,
    /// Smallest eigenvalue of `E_0^{T_B}` for the learning-machine element.
    pub min_eigenvalue: f64,
    /// `|P(E_0) - P_Helstrom|`: the element is an optimal measurement.
    pub optimality_gap: f64,
    /// `‖R(E_0 - P_+)R‖_max` with `R` the projector onto the range of `σ_0 - σ_1`.
    pub support_deviation: f64,
    /// Smallest eigenvalue of `P_+^{T_B}` for the bare projector onto the positive
    /// part of `σ_0 - σ_1`, which differs from `E_0` only on the kernel of `σ_0 - σ_1`.
    pub bare_projector_min_eigenvalue: f64,
}

fn positive_part_projector(diff: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = nalgebra::SymmetricEigen::new(diff.clone());
    let mut out = DMatrix::zeros(diff.nrows(), diff.ncols());
    for (k, value) in eig.eigenvalues.iter().enumerate() {
        if *value > 1e-12 {
            let v = eig.eigenvectors.column(k);
            out += v * v.transpose();
        }
    }
    out
}

fn range_projector(op: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = nalgebra::SymmetricEigen::new(op.clone());
    let mut out = DMatrix::zeros(op.nrows(), op.ncols());
    for (k, value) in eig.eigenvalues.iter().enumerate() {
        if value.abs() > 1e-12 {
            let v = eig.eigenvectors.column(k);
            out += v * v.transpose();
        }
    }
    out
}

/// Builds the optimal learning-machine element `E_0 = ∫ U(Ω ⊗ [↑])U†` for pure
/// states, checks that it attains the Helstrom error, and returns the smallest
/// eigenvalue of its partial transpose on the data qubit.
pub fn ppt_check(n: usize) -> Result<PptReport> {
    if n == 0 || n > PPT_MAX_N {
        return domain(format!(
            "the partial-transpose test runs for 1 <= n <= {PPT_MAX_N}, got {n}"
        ));
    }
    let qubits = 2 * n + 1;
    let (s0, s1) = build_average_states(n, n, 1.0)?;
    let diff = &s0.matrix - &s1.matrix;
    let e0 = lm_povm_element(n, &pure_seed_operator(n)?)?;
    let helstrom = 0.5 - 0.25 * crate::blocks::symmetric_trace_norm(&diff);
    let bare = positive_part_projector(&diff);
    let range = range_projector(&diff);
    let min = |m: &DMatrix<f64>| symmetric_eigenvalues(m).into_iter().fold(f64::INFINITY, f64::min);
    Ok(PptReport {
        n,
        min_eigenvalue: min(&partial_transpose(&e0, qubits, n)),
        optimality_gap: (povm_error(&s0, &s1, &e0) - helstrom).abs(),
        support_deviation: (&range * (&e0 - &bare) * &range).amax(),
        bare_projector_min_eigenvalue: min(&partial_transpose(&bare, qubits, n)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn learning_machine_element_is_ppt_and_optimal() {
        for n in 1..=2 {
            let report = ppt_check(n).unwrap();
            assert!(report.min_eigenvalue >= -1e-10, "{report:?}");
            assert!(report.optimality_gap < 1e-12);
            assert!(report.support_deviation < 1e-10);
        }
        let report = ppt_check(1).unwrap();
        assert!(report.bare_projector_min_eigenvalue < -0.1);
        assert!(ppt_check(4).is_err());
    }
}
