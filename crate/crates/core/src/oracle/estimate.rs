//! Estimate-and-discriminate machines with finite estimation measurements.
//!
//! Each training register is measured with a POVM on its symmetric subspace;
//! the data qubit is then discriminated against the two conditional states
//! `ρ^α_0 ∝ tr_A(1_{AB}/d · M_α)` and `ρ^i_1 ∝ tr_C(1_{BC}/d · M'_i)`.

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Result};
use crate::oracle::dense::{spin_copies, symmetric_projector};
use crate::oracle::sampling::{gauss_legendre, Qubit};
use crate::su2::HalfInteger;

type C64 = Complex<f64>;
type CMatrix = DMatrix<C64>;

/// Completeness tolerance of an estimation POVM.
pub const COMPLETENESS_TOL: f64 = 1e-9;
/// Largest register handled here.
pub const MAX_ESTIMATION_QUBITS: usize = 6;

fn max_modulus(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// A POVM on the symmetric subspace of `n` qubits, elements in the Dicke basis
/// `|n/2, m⟩`, `m = -n/2, ..., n/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationPovm {
    pub n: usize,
    pub elements: Vec<CMatrix>,
}

fn dicke_isometry(n: usize) -> Result<DMatrix<f64>> {
    let top = HalfInteger::half_of(n as i64);
    let copies = spin_copies(n)?;
    Ok(copies
        .into_iter()
        .find(|(j, _)| *j == top)
        .map(|(_, c)| c[0].clone())
        .expect("the symmetric irrep is always present"))
}

/// Dicke components of `|s⟩^{⊗n}` for the unit vector `s`.
pub fn coherent_state(n: usize, direction: [f64; 3]) -> Vec<C64> {
    let q = Qubit::from_bloch(direction);
    let ln_binomial = |k: usize| {
        use crate::su2::ln_factorial;
        ln_factorial(n as u64) - ln_factorial(k as u64) - ln_factorial((n - k) as u64)
    };
    // index i ↔ m = -n/2 + i, i.e. i spins up
    (0..=n)
        .map(|i| q.up.powu(i as u32) * q.down.powu((n - i) as u32) * (0.5 * ln_binomial(i)).exp())
        .collect()
}

impl EstimationPovm {
    /// Checks positivity and `Σ_α M_α = 1`.
    pub fn new(n: usize, elements: Vec<CMatrix>) -> Result<Self> {
        if n == 0 || n > MAX_ESTIMATION_QUBITS {
            return domain(format!(
                "estimation registers hold 1 to {MAX_ESTIMATION_QUBITS} qubits, got {n}"
            ));
        }
        let d = n + 1;
        if elements.is_empty() {
            return domain("a POVM needs at least one element");
        }
        let mut total = CMatrix::zeros(d, d);
        for (idx, e) in elements.iter().enumerate() {
            if e.nrows() != d || e.ncols() != d {
                return domain(format!("element {idx} is not {d}×{d}"));
            }
            if max_modulus(&(e - e.adjoint())) > COMPLETENESS_TOL {
                return domain(format!("element {idx} is not Hermitian"));
            }
            let low = e
                .clone()
                .symmetric_eigenvalues()
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            if low < -COMPLETENESS_TOL {
                return domain(format!("element {idx} has negative eigenvalue {low:.3e}"));
            }
            total += e;
        }
        let residual = max_modulus(&(total - CMatrix::identity(d, d)));
        if residual > COMPLETENESS_TOL {
            return domain(format!("POVM is incomplete: ‖Σ M - 1‖_max = {residual:.3e}"));
        }
        Ok(Self { n, elements })
    }

    /// Elements `c_α |s_α⟩⟨s_α|^{⊗n}`.
    pub fn coherent(n: usize, elements: &[(f64, [f64; 3])]) -> Result<Self> {
        let built = elements
            .iter()
            .map(|&(c, s)| {
                let v = nalgebra::DVector::from_vec(coherent_state(n, s));
                &v * v.adjoint() * C64::new(c, 0.0)
            })
            .collect();
        Self::new(n, built)
    }

    /// The trivial measurement with the single outcome `1`.
    pub fn trivial(n: usize) -> Result<Self> {
        Self::new(n, vec![CMatrix::identity(n + 1, n + 1)])
    }

    /// Gauss–Legendre × uniform-azimuth discretization of the continuous covariant POVM,
    /// exact on the symmetric subspace when `order > n`.
    pub fn covariant(n: usize, order: usize) -> Result<Self> {
        let d = (n + 1) as f64;
        let mut elements = Vec::new();
        for (z, w) in gauss_legendre(order) {
            let rho = (1.0 - z * z).sqrt();
            for k in 0..2 * order {
                let phi = PI * k as f64 / order as f64;
                elements.push((d * w / 2.0 / (2 * order) as f64, [rho * phi.cos(), rho * phi.sin(), z]));
            }
        }
        Self::coherent(n, &elements)
    }

    /// Whether every element is a multiple of a coherent projector `U[ψ^0]U†`.
    pub fn has_estimation_form(&self) -> bool {
        self.elements.iter().all(|e| {
            let mut eigen: Vec<f64> = e.clone().symmetric_eigenvalues().iter().cloned().collect();
            eigen.sort_by(|a, b| b.total_cmp(a));
            if eigen[0] <= COMPLETENESS_TOL || eigen[1..].iter().any(|x| x.abs() > COMPLETENESS_TOL) {
                return false;
            }
            // A rank-one element is coherent iff its range vector is |s⟩^{⊗n} for the s given by its Bloch vector.
            let v = e
                .column_iter()
                .max_by(|a, b| a.norm().total_cmp(&b.norm()))
                .expect("column");
            let v = v / C64::new(v.norm(), 0.0);
            let bloch = bloch_of_symmetric(self.n, &v.clone_owned());
            let len = (bloch[0].powi(2) + bloch[1].powi(2) + bloch[2].powi(2)).sqrt();
            (len - 1.0).abs() < 1e-8
        })
    }
}

/// Bloch vector of one qubit of a normalized symmetric state given in the Dicke basis.
fn bloch_of_symmetric(n: usize, v: &nalgebra::DVector<C64>) -> [f64; 3] {
    // ⟨J⟩ = (n/2) s for coherent states; |⟨J⟩| < n/2 otherwise.
    let j = n as f64 / 2.0;
    let mut jz = 0.0;
    let mut jplus = C64::new(0.0, 0.0);
    for i in 0..=n {
        let m = -j + i as f64;
        jz += m * v[i].norm_sqr();
        if i < n {
            let factor = ((j - m) * (j + m + 1.0)).sqrt();
            jplus += v[i + 1].conj() * v[i] * factor;
        }
    }
    [jplus.re / j, jplus.im / j, jz / j]
}

/// One estimation outcome reduced to what the data qubit sees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionalState {
    pub probability: f64,
    pub bloch: [f64; 3],
}

/// `p_α = tr(M_α)/d_n` and the Bloch vector of `tr_A(1_{AB} M_α)/(d_{n+1} p_α)`,
/// computed with explicit matrices on `n + 1` qubits.
pub fn conditional_states(povm: &EstimationPovm) -> Result<Vec<ConditionalState>> {
    let n = povm.n;
    let qubits = n + 1;
    let iso = dicke_isometry(n)?.map(|x| C64::new(x, 0.0));
    let projector = symmetric_projector(qubits)?.map(|x| C64::new(x, 0.0)) / C64::new((n + 2) as f64, 0.0);
    povm.elements
        .par_iter()
        .map(|e| {
            let full = &iso * e * iso.adjoint();
            let with_data = full.kronecker(&CMatrix::identity(2, 2));
            let product = &projector * with_data;
            // tr_A: the data qubit is the last one
            let mut reduced = CMatrix::zeros(2, 2);
            for a in 0..(1usize << n) {
                for b in 0..2 {
                    for b2 in 0..2 {
                        reduced[(b, b2)] += product[(2 * a + b, 2 * a + b2)];
                    }
                }
            }
            let probability = (reduced[(0, 0)] + reduced[(1, 1)]).re;
            if probability <= 0.0 {
                return Ok(ConditionalState {
                    probability: 0.0,
                    bloch: [0.0; 3],
                });
            }
            let rho = reduced / C64::new(probability, 0.0);
            Ok(ConditionalState {
                probability,
                bloch: [
                    2.0 * rho[(0, 1)].re,
                    -2.0 * rho[(0, 1)].im,
                    (rho[(0, 0)] - rho[(1, 1)]).re,
                ],
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdResult {
    pub n: usize,
    /// `Σ_{α,i} p_α p'_i |r^α_0 - r^i_1|`.
    pub delta: f64,
    pub error_probability: f64,
    /// Both POVMs have the optimal-estimation form, so every conditional
    /// Bloch vector is the estimate shrunk by `n/(n+2)`.
    pub estimation_form: bool,
}

/// Error `(1 - Δ/2)/2` of the machine that estimates with `m` on `A` and `m_prime` on `C`.
pub fn ed_error_finite(m: &EstimationPovm, m_prime: &EstimationPovm, n: usize) -> Result<EdResult> {
    if m.n != n || m_prime.n != n {
        return domain(format!("POVMs act on {} and {} qubits, expected {n}", m.n, m_prime.n));
    }
    let first = conditional_states(m)?;
    let second = conditional_states(m_prime)?;
    let delta: f64 = first
        .par_iter()
        .map(|a| {
            second
                .iter()
                .map(|b| {
                    let d2: f64 = (0..3).map(|k| (a.bloch[k] - b.bloch[k]).powi(2)).sum();
                    a.probability * b.probability * d2.sqrt()
                })
                .sum::<f64>()
        })
        .sum();
    Ok(EdResult {
        n,
        delta,
        error_probability: (1.0 - delta / 2.0) / 2.0,
        estimation_form: m.has_estimation_form() && m_prime.has_estimation_form(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machines::{ed_bias_continuous, shrink_factor};

    #[test]
    fn best_single_copy_pair() {
        let z = EstimationPovm::coherent(1, &[(1.0, [0.0, 0.0, 1.0]), (1.0, [0.0, 0.0, -1.0])]).unwrap();
        let x = EstimationPovm::coherent(1, &[(1.0, [1.0, 0.0, 0.0]), (1.0, [-1.0, 0.0, 0.0])]).unwrap();
        let result = ed_error_finite(&z, &x, 1).unwrap();
        assert!((result.delta - 2f64.sqrt() / 3.0).abs() < 1e-12);
        assert!(result.estimation_form);
        let same = ed_error_finite(&z, &z, 1).unwrap();
        assert!((same.delta - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn conditional_vectors_shrink() {
        for n in 1..=3 {
            let povm = EstimationPovm::covariant(n, n + 2).unwrap();
            let eta = shrink_factor(n as i64).unwrap();
            for state in conditional_states(&povm).unwrap().iter().take(5) {
                let len = state.bloch.iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!((len - eta).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn continuous_limit() {
        let povm = EstimationPovm::covariant(1, 70).unwrap();
        assert_eq!(povm.elements.len(), 9800);
        let result = ed_error_finite(&povm, &povm, 1).unwrap();
        assert!(
            (result.delta - ed_bias_continuous(1).unwrap()).abs() < 2e-3,
            "{}",
            result.delta
        );
    }

    #[test]
    fn trivial_and_invalid_povms() {
        let trivial = EstimationPovm::trivial(2).unwrap();
        let result = ed_error_finite(&trivial, &trivial, 2).unwrap();
        assert!(result.delta.abs() < 1e-15);
        assert!(!result.estimation_form);
        assert!(EstimationPovm::coherent(1, &[(1.0, [0.0, 0.0, 1.0])]).is_err());
        let z = EstimationPovm::coherent(1, &[(1.0, [0.0, 0.0, 1.0]), (1.0, [0.0, 0.0, -1.0])]).unwrap();
        assert!(ed_error_finite(&z, &trivial, 1).is_err());
    }
}
