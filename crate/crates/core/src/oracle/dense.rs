//! Explicit matrices on qubit registers. Qubit 0 is the most significant bit
//! of a basis index and bit value 0 means spin up.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::blocks::{symmetric_eigenvalues, symmetric_trace_norm, BlockLabel};
use crate::error::{domain, Error, Result};
use crate::su2::{cg, HalfInteger};

/// Largest register handled by the dense layer.
pub const MAX_QUBITS: usize = 11;
const NULL_TOL: f64 = 1e-9;

/// A named group of consecutive qubits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Register {
    A,
    B,
    C,
}

/// How the rows and columns of a [`DenseOperator`] are labelled.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum DenseBasis {
    /// Computational basis with registers in the listed order.
    Product(Vec<(Register, usize)>),
    /// Coupled `|j_AC, m⟩` vectors of one block.
    Coupled(BlockLabel),
}

/// Real symmetric matrix with its basis descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    pub matrix: DMatrix<f64>,
    pub basis: DenseBasis,
}

impl DenseOperator {
    pub fn new(matrix: DMatrix<f64>, basis: DenseBasis) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Integrity("dense operator must be square".into()));
        }
        let op = Self { matrix, basis };
        let defect = op.hermiticity_defect();
        if defect > 1e-10 {
            return Err(Error::Integrity(format!(
                "dense operator is not symmetric (defect {defect:.3e})"
            )));
        }
        Ok(op)
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    pub fn trace_norm(&self) -> f64 {
        symmetric_trace_norm(&self.matrix)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        symmetric_eigenvalues(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Residual `‖[X, Y]‖_max`.
    pub fn commutator_residual(&self, other: &DMatrix<f64>) -> f64 {
        (&self.matrix * other - other * &self.matrix).amax()
    }
}

pub(crate) fn check_qubits(qubits: usize) -> Result<()> {
    if qubits > MAX_QUBITS {
        return domain(format!("{qubits} qubits exceed the dense limit of {MAX_QUBITS}"));
    }
    Ok(())
}

fn bit(index: usize, qubits: usize, q: usize) -> usize {
    (index >> (qubits - 1 - q)) & 1
}

/// Basis index with the bits of every transposition in `pairs` exchanged.
fn permute_index(index: usize, qubits: usize, pairs: &[(usize, usize)]) -> usize {
    let mut out = index;
    for &(i, j) in pairs {
        let (bi, bj) = (bit(index, qubits, i), bit(index, qubits, j));
        if bi != bj {
            out ^= (1 << (qubits - 1 - i)) | (1 << (qubits - 1 - j));
        }
    }
    out
}

/// Perfect matchings of `items`.
fn pairings(items: &[usize]) -> Vec<Vec<(usize, usize)>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let first = items[0];
    let mut out = Vec::new();
    for k in 1..items.len() {
        let rest: Vec<usize> = items[1..]
            .iter()
            .enumerate()
            .filter(|(i, _)| *i + 1 != k)
            .map(|(_, &x)| x)
            .collect();
        for mut tail in pairings(&rest) {
            tail.insert(0, (first, items[k]));
            out.push(tail);
        }
    }
    out
}

fn double_factorial(odd: usize) -> f64 {
    (1..=odd).rev().step_by(2).map(|k| k as f64).product()
}

/// `∫ dψ ρ_ψ^{⊗k}` for `ρ_ψ = r[ψ] + (1-r)/2` with Haar-random `ψ`.
///
/// Expanding `ρ_ψ = (1 + r s·σ)/2` and using the isotropic moments of the
/// Bloch vector `s` turns the average into a signed sum of qubit transpositions,
/// via `σ_i·σ_j = 2 SWAP_ij - 1`.
pub fn haar_moment(k: usize, r: f64) -> Result<DMatrix<f64>> {
    check_qubits(k)?;
    let dim = 1usize << k;
    // Coefficient of each involution, keyed by its sorted transpositions.
    let mut terms: HashMap<Vec<(usize, usize)>, f64> = HashMap::new();
    for subset in 0usize..(1 << k) {
        let members: Vec<usize> = (0..k).filter(|q| subset >> q & 1 == 1).collect();
        if members.len() % 2 == 1 {
            continue;
        }
        let weight = r.powi(members.len() as i32) / double_factorial(members.len() + 1);
        for matching in pairings(&members) {
            let p = matching.len();
            // Π_pairs (2 SWAP - 1) = Σ_T 2^{|T|} (-1)^{p-|T|} SWAP_T
            for chosen in 0usize..(1 << p) {
                let swaps: Vec<(usize, usize)> = (0..p).filter(|t| chosen >> t & 1 == 1).map(|t| matching[t]).collect();
                let t = swaps.len();
                let sign = if (p - t).is_multiple_of(2) { 1.0 } else { -1.0 };
                *terms.entry(swaps).or_insert(0.0) += weight * sign * (1u64 << t) as f64;
            }
        }
    }
    let scale = 0.5f64.powi(k as i32);
    let mut out = DMatrix::zeros(dim, dim);
    for (swaps, coefficient) in terms {
        for x in 0..dim {
            out[(permute_index(x, k, &swaps), x)] += scale * coefficient;
        }
    }
    Ok(out)
}

/// Projector onto the symmetric subspace of `k` qubits, as the average of all permutations.
pub fn symmetric_projector(k: usize) -> Result<DMatrix<f64>> {
    check_qubits(k)?;
    let dim = 1usize << k;
    let mut out = DMatrix::zeros(dim, dim);
    let perms: Vec<Vec<usize>> = permutations(k);
    let weight = 1.0 / perms.len() as f64;
    for perm in &perms {
        for x in 0..dim {
            let mut y = 0;
            for (q, &target) in perm.iter().enumerate() {
                y |= bit(x, k, q) << (k - 1 - target);
            }
            out[(y, x)] += weight;
        }
    }
    Ok(out)
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for tail in permutations(k - 1) {
        for pos in 0..=tail.len() {
            let mut p = tail.clone();
            p.insert(pos, k - 1);
            out.push(p);
        }
    }
    out
}

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Total `J_z` and `J_+` of a `k`-qubit register.
pub fn spin_operators(k: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let dim = 1usize << k;
    let mut jz = DMatrix::zeros(dim, dim);
    let mut jp = DMatrix::zeros(dim, dim);
    for x in 0..dim {
        let ones = x.count_ones() as f64;
        jz[(x, x)] = k as f64 / 2.0 - ones;
        for q in 0..k {
            if bit(x, k, q) == 1 {
                jp[(x ^ (1 << (k - 1 - q)), x)] += 1.0;
            }
        }
    }
    (jz, jp)
}

/// Every copy of every spin-`j` irrep in `k` qubits, as isometries whose columns
/// are `|j, m⟩` for `m = -j, ..., j` in the Condon–Shortley convention.
pub fn spin_copies(k: usize) -> Result<Vec<(HalfInteger, Vec<DMatrix<f64>>)>> {
    check_qubits(k)?;
    let dim = 1usize << k;
    let (_, jp) = spin_operators(k);
    let jm = jp.transpose();
    let mut out = Vec::new();
    for j in crate::su2::spins_of(k as i64) {
        // Basis states with m = j have (k - 2j)/2 spins down.
        let downs = ((k as i64 - j.twice()) / 2) as u32;
        let top: Vec<usize> = (0..dim).filter(|x| x.count_ones() == downs).collect();
        let restricted = DMatrix::from_fn(dim, top.len(), |row, col| jp[(row, top[col])]);
        let gram = restricted.transpose() * &restricted;
        let eig = SymmetricEigen::new(gram);
        let mut copies = Vec::new();
        for (idx, value) in eig.eigenvalues.iter().enumerate() {
            if value.abs() > NULL_TOL {
                continue;
            }
            let coefficients = eig.eigenvectors.column(idx);
            let mut highest = DVector::zeros(dim);
            for (c, &x) in coefficients.iter().zip(&top) {
                highest[x] = *c;
            }
            let size = j.dimension();
            let mut iso = DMatrix::zeros(dim, size);
            iso.set_column(size - 1, &highest);
            let mut m = j;
            for col in (0..size - 1).rev() {
                let norm = ((j + m).value() * (j - m + HalfInteger::ONE).value()).sqrt();
                let lowered = &jm * iso.column(col + 1) / norm;
                iso.set_column(col, &lowered);
                m = m - HalfInteger::ONE;
            }
            copies.push(iso);
        }
        let expected = crate::su2::multiplicity(k as i64, j)? as usize;
        if copies.len() != expected {
            return Err(Error::Integrity(format!(
                "found {} copies of spin {j} in {k} qubits, expected {expected}",
                copies.len()
            )));
        }
        out.push((j, copies));
    }
    Ok(out)
}

/// `|j_A m_A⟩|j_C m_C⟩` coupled to `|j, m⟩` for every `j` of the block, as columns in
/// the order of [`crate::blocks::BlockSpace::Pair`] sectors (by `m`, then `j`).
pub fn coupled_pair_vectors(
    label: BlockLabel,
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Vec<(HalfInteger, HalfInteger, DVector<f64>)> {
    let mut out = Vec::new();
    let top = label.ja + label.jc;
    for m in top.projections() {
        for j in label.coupled_spins().filter(|j| j.twice() >= m.twice().abs()) {
            let mut v = DVector::zeros(a.nrows() * c.nrows());
            for (ia, ma) in label.ja.projections().enumerate() {
                let mc = m - ma;
                if mc.abs() > label.jc {
                    continue;
                }
                let ic = (mc + label.jc).twice() as usize / 2;
                let coefficient = cg(label.ja, ma, label.jc, mc, j, m);
                if coefficient != 0.0 {
                    v += a.column(ia).kronecker(&c.column(ic)) * coefficient;
                }
            }
            out.push((j, m, v));
        }
    }
    out
}

/// Reorders qubits: `perm[q]` is the new position of old qubit `q`.
pub fn reorder_qubits(vector: &DVector<f64>, qubits: usize, perm: &[usize]) -> DVector<f64> {
    let mut out = DVector::zeros(vector.len());
    for x in 0..vector.len() {
        let mut y = 0;
        for (q, &target) in perm.iter().enumerate() {
            y |= bit(x, qubits, q) << (qubits - 1 - target);
        }
        out[y] = vector[x];
    }
    out
}

/// Same as [`reorder_qubits`] applied to both sides of an operator.
pub fn reorder_operator(op: &DMatrix<f64>, qubits: usize, perm: &[usize]) -> DMatrix<f64> {
    let dim = op.nrows();
    let map: Vec<usize> = (0..dim)
        .map(|x| {
            let mut y = 0;
            for (q, &target) in perm.iter().enumerate() {
                y |= bit(x, qubits, q) << (qubits - 1 - target);
            }
            y
        })
        .collect();
    let mut out = DMatrix::zeros(dim, dim);
    for x in 0..dim {
        for z in 0..dim {
            out[(map[x], map[z])] = op[(x, z)];
        }
    }
    out
}

/// `tr_q([↑]_q X)`: the block of `X` with qubit `q` up on both sides.
pub fn project_up_and_trace(op: &DMatrix<f64>, qubits: usize, q: usize) -> DMatrix<f64> {
    let kept: Vec<usize> = (0..op.nrows()).filter(|&x| bit(x, qubits, q) == 0).collect();
    DMatrix::from_fn(kept.len(), kept.len(), |i, k| op[(kept[i], kept[k])])
}

/// Partial transpose on qubit `q`.
pub fn partial_transpose(op: &DMatrix<f64>, qubits: usize, q: usize) -> DMatrix<f64> {
    let mask = 1usize << (qubits - 1 - q);
    let dim = op.nrows();
    DMatrix::from_fn(dim, dim, |x, z| {
        let (bx, bz) = (x & mask, z & mask);
        op[((x & !mask) | bz, (z & !mask) | bx)]
    })
}

/// The SU(2) group average `∫ dU U^{⊗k} X U^{†⊗k}`, computed exactly from the
/// isotypic decomposition: each irrep factor is replaced by its normalized trace.
pub fn twirl(op: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    let dim = 1usize << k;
    if op.nrows() != dim || op.ncols() != dim {
        return domain(format!("operator of size {} does not act on {k} qubits", op.nrows()));
    }
    let mut out = DMatrix::zeros(dim, dim);
    for (j, copies) in spin_copies(k)? {
        let size = j.dimension() as f64;
        for mu in &copies {
            for nu in &copies {
                let t = (mu.transpose() * op * nu).trace() / size;
                if t != 0.0 {
                    out += mu * nu.transpose() * t;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_moment_is_normalized_symmetric_projector() {
        for k in 1..=4 {
            let moment = haar_moment(k, 1.0).unwrap();
            let projector = symmetric_projector(k).unwrap();
            assert!((moment - projector / (k as f64 + 1.0)).amax() < 1e-14);
        }
    }

    #[test]
    fn mixed_moment_single_qubit_and_trace() {
        let m = haar_moment(1, 0.4).unwrap();
        assert!((m - DMatrix::identity(2, 2) * 0.5).amax() < 1e-15);
        let m = haar_moment(3, 0.7).unwrap();
        assert!((m.trace() - 1.0).abs() < 1e-14);
        // two-qubit moment: (1 + r²/3 Σ σ_a⊗σ_a)/4
        let m = haar_moment(2, 0.5).unwrap();
        assert!((m[(0, 0)] - (1.0 + 0.25 / 3.0) / 4.0).abs() < 1e-15);
        assert!((m[(1, 2)] - 2.0 * 0.25 / 3.0 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn spin_copies_are_orthonormal_and_complete() {
        for k in 1..=5 {
            let (jz, jp) = spin_operators(k);
            let mut total = DMatrix::<f64>::zeros(1 << k, 1 << k);
            for (j, copies) in spin_copies(k).unwrap() {
                for iso in &copies {
                    let gram = iso.transpose() * iso;
                    assert!((gram - DMatrix::identity(iso.ncols(), iso.ncols())).amax() < 1e-12);
                    for (col, m) in j.projections().enumerate() {
                        let v = iso.column(col);
                        assert!((&jz * v - v * m.value()).amax() < 1e-12);
                        if m != j {
                            // J+ |j,m⟩ = √((j-m)(j+m+1)) |j,m+1⟩
                            let factor = ((j - m).value() * (j + m + HalfInteger::ONE).value()).sqrt();
                            assert!((&jp * v - iso.column(col + 1) * factor).amax() < 1e-12);
                        }
                    }
                    total += iso * iso.transpose();
                }
            }
            assert!((total - DMatrix::identity(1 << k, 1 << k)).amax() < 1e-12);
        }
    }

    #[test]
    fn twirl_properties() {
        let k = 3;
        let (jz, jp) = spin_operators(k);
        let x = DMatrix::from_fn(8, 8, |i, j| {
            ((i * 7 + j * 3) % 5) as f64 + if i == j { 1.0 } else { 0.0 }
        });
        let x = &x + x.transpose();
        let t = twirl(&x, k).unwrap();
        assert!((t.trace() - x.trace()).abs() < 1e-12);
        assert!((&t * &jz - &jz * &t).amax() < 1e-12);
        assert!((&t * &jp - &jp * &t).amax() < 1e-12);
        assert!((twirl(&t, k).unwrap() - &t).amax() < 1e-12);
        let up = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!((twirl(&up, 1).unwrap() - DMatrix::identity(2, 2) * 0.5).amax() < 1e-15);
    }

    #[test]
    fn partial_transpose_of_product() {
        let a = DMatrix::from_row_slice(2, 2, &[0.7, 0.2, 0.2, 0.3]);
        let b = DMatrix::from_row_slice(2, 2, &[0.5, -0.4, 0.1, 0.5]);
        let pt = partial_transpose(&kron(&a, &b), 2, 1);
        assert!((pt - kron(&a, &b.transpose())).amax() < 1e-15);
        let pt = partial_transpose(&kron(&a, &b), 2, 0);
        assert!((pt - kron(&a.transpose(), &b)).amax() < 1e-15);
    }

    #[test]
    fn reorder_round_trip() {
        let v = DVector::from_fn(8, |i, _| i as f64);
        let perm = [2, 0, 1];
        let w = reorder_qubits(&v, 3, &perm);
        // old qubit 0 is now qubit 2: index 0b100 -> 0b001
        assert_eq!(w[1], 4.0);
        let inverse = [1, 2, 0];
        assert_eq!(reorder_qubits(&w, 3, &inverse), v);
    }
}
