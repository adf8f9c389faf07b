//! Average states built as explicit matrices, and the block quantities they
//! must reproduce.

use nalgebra::{DMatrix, DVector};

use crate::blocks::{average_state_diff_mixed, block_weights, BlockLabel, BlockOperator, SpectrumParams};
use crate::error::{domain, Error, Result};
use crate::mixed::gamma_up_mixed;
use crate::oracle::dense::{
    check_qubits, coupled_pair_vectors, haar_moment, kron, project_up_and_trace, reorder_operator, spin_copies,
    DenseBasis, DenseOperator, Register,
};
use crate::sdp::Seed;
use crate::su2::{cg, HalfInteger};

/// Largest `n_A + n_C` accepted by [`build_average_states`].
pub const MAX_TRAINING_QUBITS: usize = 8;

fn layout(na: usize, nc: usize) -> DenseBasis {
    DenseBasis::Product(vec![(Register::A, na), (Register::B, 1), (Register::C, nc)])
}

fn check_sizes(na: usize, nc: usize, r: f64) -> Result<()> {
    if na == 0 || nc == 0 {
        return domain("each training register needs at least one qubit");
    }
    if na + nc > MAX_TRAINING_QUBITS {
        return domain(format!(
            "n_A + n_C = {} exceeds the dense limit of {MAX_TRAINING_QUBITS}",
            na + nc
        ));
    }
    crate::blocks::check_purity(r)
}

/// `σ_0 = ∫ρ_0^{⊗(n_A+1)} ⊗ ∫ρ_1^{⊗n_C}` and `σ_1 = ∫ρ_0^{⊗n_A} ⊗ ∫ρ_1^{⊗(n_C+1)}`
/// on qubits ordered `A, B, C`.
pub fn build_average_states(na: usize, nc: usize, r: f64) -> Result<(DenseOperator, DenseOperator)> {
    check_sizes(na, nc, r)?;
    check_qubits(na + nc + 1)?;
    let sigma0 = kron(&haar_moment(na + 1, r)?, &haar_moment(nc, r)?);
    let sigma1 = kron(&haar_moment(na, r)?, &haar_moment(nc + 1, r)?);
    Ok((
        DenseOperator::new(sigma0, layout(na, nc))?,
        DenseOperator::new(sigma1, layout(na, nc))?,
    ))
}

/// Minimum error `½(1 - ‖p_0 σ_0 - p_1 σ_1‖₁)` for discriminating two known states.
pub fn helstrom(sigma0: &DenseOperator, sigma1: &DenseOperator, p0: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p0) {
        return domain(format!("prior {p0} is not a probability"));
    }
    if sigma0.dimension() != sigma1.dimension() {
        return domain("states act on different spaces");
    }
    let diff = &sigma0.matrix * p0 - &sigma1.matrix * (1.0 - p0);
    Ok(0.5 * (1.0 - crate::blocks::symmetric_trace_norm(&diff)))
}

/// `Γ↑ = tr_B([↑](σ_0 - σ_1))` on `A ⊗ C`.
pub fn gamma_dense(sigma0: &DenseOperator, sigma1: &DenseOperator, na: usize) -> Result<DenseOperator> {
    let qubits = sigma0.dimension().trailing_zeros() as usize;
    let nc = qubits - na - 1;
    let diff = &sigma0.matrix - &sigma1.matrix;
    DenseOperator::new(
        project_up_and_trace(&diff, qubits, na),
        DenseBasis::Product(vec![(Register::A, na), (Register::C, nc)]),
    )
}

/// One copy of each irrep of a register, with the multiplicity.
struct Irreps {
    copies: Vec<(HalfInteger, Vec<DMatrix<f64>>)>,
}

impl Irreps {
    fn new(k: usize) -> Result<Self> {
        Ok(Self {
            copies: spin_copies(k)?,
        })
    }

    fn of(&self, j: HalfInteger) -> &[DMatrix<f64>] {
        self.copies
            .iter()
            .find(|(spin, _)| *spin == j)
            .map(|(_, c)| c.as_slice())
            .unwrap_or(&[])
    }
}

/// `Σ_ξ Σ_copies (p_ξ/ν_ξ) W Γ↑_ξ Wᵀ` on `A ⊗ C`, which must equal [`gamma_dense`].
pub fn gamma_from_blocks(n: usize, r: f64) -> Result<DMatrix<f64>> {
    check_sizes(n, n, r)?;
    let params = SpectrumParams::new(n as i64, r)?;
    let irreps = Irreps::new(n)?;
    let dim = 1usize << (2 * n);
    let mut out = DMatrix::zeros(dim, dim);
    for (label, p) in crate::blocks::block_labels(params)? {
        let gamma = gamma_up_mixed(label, params)?;
        let (copies_a, copies_c) = (irreps.of(label.ja), irreps.of(label.jc));
        let nu = (copies_a.len() * copies_c.len()) as f64;
        for a in copies_a {
            for c in copies_c {
                out += embed_pair_operator(&gamma, a, c) * (p / nu);
            }
        }
    }
    Ok(out)
}

/// A [`BlockOperator`] on the pair space mapped into the product space of `A ⊗ C`.
fn embed_pair_operator(op: &BlockOperator, a: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
    let vectors = coupled_pair_vectors(op.label, a, c);
    let dim = a.nrows() * c.nrows();
    let mut out = DMatrix::zeros(dim, dim);
    for sector in &op.sectors {
        let columns: Vec<&DVector<f64>> = sector
            .basis
            .iter()
            .map(|b| {
                &vectors
                    .iter()
                    .find(|(j, m, _)| *j == b.j_ac && *m == sector.m)
                    .expect("pair basis vector")
                    .2
            })
            .collect();
        for (i, vi) in columns.iter().enumerate() {
            for (k, vk) in columns.iter().enumerate() {
                let x = sector.matrix[(i, k)];
                if x != 0.0 {
                    out += *vi * vk.transpose() * x;
                }
            }
        }
    }
    out
}

/// `Σ_ξ p_ξ (σ_{0,ξ} - σ_{1,ξ}) ⊗ 1_ν/ν` rebuilt on qubits `A, B, C` from the
/// invariant block form; must equal `σ_0 - σ_1`.
pub fn state_diff_from_blocks(n: usize, r: f64) -> Result<DMatrix<f64>> {
    check_sizes(n, n, r)?;
    let params = SpectrumParams::new(n as i64, r)?;
    let irreps = Irreps::new(n)?;
    let qubits = 2 * n + 1;
    let dim = 1usize << qubits;
    let mut acb = DMatrix::zeros(dim, dim);
    for (label, p) in crate::blocks::block_labels(params)? {
        let op = average_state_diff_mixed(label, params)?.to_block_operator();
        let (copies_a, copies_c) = (irreps.of(label.ja), irreps.of(label.jc));
        let nu = (copies_a.len() * copies_c.len()) as f64;
        for a in copies_a {
            for c in copies_c {
                let pair = coupled_pair_vectors(label, a, c);
                for sector in &op.sectors {
                    let columns: Vec<DVector<f64>> = sector
                        .basis
                        .iter()
                        .map(|b| with_data_qubit(&pair, b.j_ac, b.total, sector.m))
                        .collect();
                    for (i, vi) in columns.iter().enumerate() {
                        for (k, vk) in columns.iter().enumerate() {
                            let x = sector.matrix[(i, k)];
                            if x != 0.0 {
                                acb += vi * vk.transpose() * (x * p / nu);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(reorder_operator(&acb, qubits, &acb_to_abc(n)))
}

/// Qubit map from the order `A, C, B` to `A, B, C`.
fn acb_to_abc(n: usize) -> Vec<usize> {
    (0..n).chain((n + 1)..(2 * n + 1)).chain(std::iter::once(n)).collect()
}

/// `|(j_AC, B) J, M⟩` in the product order `A, C, B`.
fn with_data_qubit(
    pair: &[(HalfInteger, HalfInteger, DVector<f64>)],
    j_ac: HalfInteger,
    total: HalfInteger,
    m: HalfInteger,
) -> DVector<f64> {
    let len = pair[0].2.len() * 2;
    let mut out = DVector::zeros(len);
    for (mb, b_index) in [(HalfInteger::HALF, 0usize), (-HalfInteger::HALF, 1usize)] {
        let m_ac = m - mb;
        if m_ac.abs() > j_ac {
            continue;
        }
        let coefficient = cg(j_ac, m_ac, HalfInteger::HALF, mb, total, m);
        if coefficient == 0.0 {
            continue;
        }
        let v = &pair
            .iter()
            .find(|(j, mm, _)| *j == j_ac && *mm == m_ac)
            .expect("pair vector")
            .2;
        let mut data = DVector::zeros(2);
        data[b_index] = 1.0;
        out += v.kronecker(&data) * coefficient;
    }
    out
}

/// Seed operator `Ω = Σ_ξ Σ_copies W Ω_ξ Wᵀ` on `A ⊗ C` from a block SDP solution.
pub fn seed_operator(n: usize, seed: &Seed) -> Result<DMatrix<f64>> {
    let irreps = Irreps::new(n)?;
    let dim = 1usize << (2 * n);
    let mut out = DMatrix::zeros(dim, dim);
    let mut labels: Vec<BlockLabel> = seed.blocks.iter().map(|b| b.key.label).collect();
    labels.sort();
    labels.dedup();
    for label in labels {
        let (copies_a, copies_c) = (irreps.of(label.ja), irreps.of(label.jc));
        if copies_a.is_empty() || copies_c.is_empty() {
            return Err(Error::Integrity(format!(
                "seed block {label:?} does not fit {n} qubits"
            )));
        }
        for a in copies_a {
            for c in copies_c {
                let pair = coupled_pair_vectors(label, a, c);
                for block in seed.blocks.iter().filter(|b| b.key.label == label) {
                    let columns: Vec<&DVector<f64>> = block
                        .basis
                        .iter()
                        .map(|j| {
                            &pair
                                .iter()
                                .find(|(jj, m, _)| jj == j && *m == block.key.m)
                                .expect("pair vector")
                                .2
                        })
                        .collect();
                    for (i, vi) in columns.iter().enumerate() {
                        for (k, vk) in columns.iter().enumerate() {
                            out += *vi * vk.transpose() * block.matrix[(i, k)];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// The learning-machine POVM element `E_0 = ∫ dU U(Ω ⊗ [↑])U†` on `A, B, C`.
pub fn lm_povm_element(n: usize, omega: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let qubits = 2 * n + 1;
    check_qubits(qubits)?;
    let up = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
    let acb = kron(omega, &up);
    crate::oracle::dense::twirl(&reorder_operator(&acb, qubits, &acb_to_abc(n)), qubits)
}

/// Error `½ - ½ tr[(σ_0 - σ_1) E_0]` of the two-outcome measurement `{E_0, 1 - E_0}`.
pub fn povm_error(sigma0: &DenseOperator, sigma1: &DenseOperator, e0: &DMatrix<f64>) -> f64 {
    0.5 - 0.5 * ((&sigma0.matrix - &sigma1.matrix) * e0).trace()
}

/// The pure-state seed `Σ_j √(2j+1)|j, 0⟩` on the symmetric subspaces of `A ⊗ C`.
pub fn pure_seed_operator(n: usize) -> Result<DMatrix<f64>> {
    let irreps = Irreps::new(n)?;
    let top = HalfInteger::half_of(n as i64);
    let sym = &irreps.of(top)[0];
    let label = BlockLabel::symmetric(n as i64);
    let mut phi = DVector::zeros(1usize << (2 * n));
    for (j, m, v) in coupled_pair_vectors(label, sym, sym) {
        if m == HalfInteger::ZERO {
            phi += v * (j.dimension() as f64).sqrt();
        }
    }
    Ok(&phi * phi.transpose())
}

/// `Σ_j p_j` for `ρ^{⊗n}`; must be 1.
pub fn block_probability_total(n: i64, r: f64) -> Result<f64> {
    Ok(block_weights(SpectrumParams::new(n, r)?)?.iter().map(|w| w.p).sum())
}
