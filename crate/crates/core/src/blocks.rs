//! Block algebra of the training register.
//!
//! `n` copies of a depolarized qubit decompose into spin-`j` blocks with
//! weights `p_j`. For a pair of training subsystems `A`, `C` (plus the data
//! qubit `B`) every operator of interest is stored per block label
//! `ξ = {j_A, j_C}`, either sector by sector in total magnetic number
//! ([`BlockOperator`]) or, when it commutes with global rotations, as one small
//! matrix per total spin ([`InvariantOperator`]).

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::su2::{cg, ln_multiplicity, spins_of, HalfInteger};

/// Tolerance above which an asymmetric sector is rejected.
pub const HERMITICITY_TOL: f64 = 1e-10;

/// Number of copies and Bloch-vector length of the source states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumParams {
    pub n: i64,
    pub r: f64,
}

impl SpectrumParams {
    pub fn new(n: i64, r: f64) -> Result<Self> {
        if n < 0 {
            return domain(format!("qubit count must be non-negative, got {n}"));
        }
        check_purity(r)?;
        Ok(Self { n, r })
    }
}

pub(crate) fn check_purity(r: f64) -> Result<()> {
    if !(r > 0.0 && r <= 1.0) {
        return domain(format!("purity must lie in (0, 1], got {r}"));
    }
    Ok(())
}

/// Spectrum of the normalized spin-`j` component of `ρ^{⊗n}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockWeights {
    pub j: HalfInteger,
    /// `a_m` for `m = -j, ..., j`.
    pub a: Vec<f64>,
    pub c_j: f64,
    /// Probability `p_j` of landing in the spin-`j` block.
    pub p: f64,
}

/// Eigenvalues `a_m ∝ ((1-r)/2)^{j-m} ((1+r)/2)^{j+m}` of the normalized block state.
fn block_spectrum(j: HalfInteger, r: f64) -> Vec<f64> {
    let size = j.dimension();
    if r == 1.0 {
        let mut a = vec![0.0; size];
        a[size - 1] = 1.0;
        return a;
    }
    let t = (1.0 - r) / (1.0 + r);
    // index k = j + m; weight t^{j-m} = t^{2j-k}
    let mut a: Vec<f64> = (0..size).map(|k| t.powi((size - 1 - k) as i32)).collect();
    let total: f64 = a.iter().sum();
    a.iter_mut().for_each(|x| *x /= total);
    a
}

/// `c_j = [((1+r)/2)^{2j+1} - ((1-r)/2)^{2j+1}] / r`, evaluated without cancellation.
fn ln_c(j: HalfInteger, r: f64) -> f64 {
    let plus = (1.0 + r) / 2.0;
    let t = (1.0 - r) / (1.0 + r);
    let mut geometric = 0.0;
    let mut power = 1.0;
    for _ in 0..j.dimension() {
        geometric += power;
        power *= t;
    }
    j.twice() as f64 * plus.ln() + geometric.ln()
}

/// Spectra and block probabilities of `ρ^{⊗n}` for every spin `j` it carries.
pub fn block_weights(params: SpectrumParams) -> Result<Vec<BlockWeights>> {
    check_purity(params.r)?;
    let SpectrumParams { n, r } = params;
    let ln_det = ((1.0 - r * r) / 4.0).ln();
    spins_of(n)
        .map(|j| {
            let ln_cj = ln_c(j, r);
            let pairs = (n - j.twice()) / 2;
            let ln_p = ln_multiplicity(n, j)? + ln_cj + if pairs == 0 { 0.0 } else { pairs as f64 * ln_det };
            Ok(BlockWeights {
                j,
                a: block_spectrum(j, r),
                c_j: ln_cj.exp(),
                p: ln_p.exp(),
            })
        })
        .collect()
}

/// `⟨J_z⟩_j = Σ_m m a_m` in the normalized spin-`j` block.
pub fn jz_expectation(j: HalfInteger, r: f64) -> Result<f64> {
    check_purity(r)?;
    if j.twice() < 0 {
        return domain(format!("negative spin {j}"));
    }
    Ok(block_spectrum(j, r)
        .iter()
        .zip(j.projections())
        .map(|(a, m)| a * m.value())
        .sum())
}

/// Invariant subspace label `ξ = {j_A, j_C}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct BlockLabel {
    pub ja: HalfInteger,
    pub jc: HalfInteger,
}

impl BlockLabel {
    /// A label admissible for `n` copies in each of `A` and `C`.
    pub fn new(n: i64, ja: HalfInteger, jc: HalfInteger) -> Result<Self> {
        Self::unbalanced(n, n, ja, jc)
    }

    pub fn unbalanced(na: i64, nc: i64, ja: HalfInteger, jc: HalfInteger) -> Result<Self> {
        for (count, j, name) in [(na, ja, "j_A"), (nc, jc, "j_C")] {
            if j.twice() < 0 || j.twice() > count || (count - j.twice()) % 2 != 0 {
                return domain(format!("{name} = {j} is not a spin carried by {count} qubits"));
            }
        }
        Ok(Self { ja, jc })
    }

    /// The label of the fully symmetric blocks, `{n/2, n/2}`.
    pub fn symmetric(n: i64) -> Self {
        Self {
            ja: HalfInteger::half_of(n),
            jc: HalfInteger::half_of(n),
        }
    }

    /// Coupled spins `j_AC` from `|j_A - j_C|` to `j_A + j_C`.
    pub fn coupled_spins(&self) -> impl DoubleEndedIterator<Item = HalfInteger> + Clone {
        HalfInteger::range_inclusive((self.ja - self.jc).abs(), self.ja + self.jc)
    }
}

/// Labels `ξ` for `n` copies per training subsystem with weights `p_ξ = p_{j_A} p_{j_C}`,
/// ordered `j_A` outer, `j_C` inner, both ascending.
pub fn block_labels(params: SpectrumParams) -> Result<Vec<(BlockLabel, f64)>> {
    let weights = block_weights(params)?;
    let mut out = Vec::with_capacity(weights.len() * weights.len());
    for wa in &weights {
        for wc in &weights {
            out.push((BlockLabel { ja: wa.j, jc: wc.j }, wa.p * wc.p));
        }
    }
    Ok(out)
}

/// Which Hilbert space the sectors of a [`BlockOperator`] live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockSpace {
    /// Training pair `A ⊗ C`, coupled basis `|j_AC, m⟩`.
    Pair,
    /// Training pair plus data qubit, coupled basis `|(j_AC) B; J, M⟩`.
    PairWithData,
}

/// One coupled basis vector; on [`BlockSpace::Pair`] `total == j_ac`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BasisState {
    pub j_ac: HalfInteger,
    pub total: HalfInteger,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sector {
    pub m: HalfInteger,
    pub basis: Vec<BasisState>,
    pub matrix: DMatrix<f64>,
}

impl Serialize for Sector {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Dump<'a> {
            m: HalfInteger,
            basis: &'a [BasisState],
            matrix: Vec<Vec<f64>>,
        }
        Dump {
            m: self.m,
            basis: &self.basis,
            matrix: matrix_rows(&self.matrix),
        }
        .serialize(serializer)
    }
}

pub(crate) fn matrix_rows(matrix: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..matrix.nrows())
        .map(|i| (0..matrix.ncols()).map(|k| matrix[(i, k)]).collect())
        .collect()
}

/// A real symmetric operator stored per total magnetic number in a coupled basis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockOperator {
    pub label: BlockLabel,
    pub space: BlockSpace,
    pub sectors: Vec<Sector>,
}

impl BlockOperator {
    /// The zero operator with the sector layout of `space`.
    pub fn zeros(label: BlockLabel, space: BlockSpace) -> Self {
        let sectors = match space {
            BlockSpace::Pair => {
                let top = label.ja + label.jc;
                top.projections()
                    .map(|m| {
                        let basis: Vec<BasisState> = label
                            .coupled_spins()
                            .filter(|j| j.twice() >= m.twice().abs())
                            .map(|j| BasisState { j_ac: j, total: j })
                            .collect();
                        let d = basis.len();
                        Sector {
                            m,
                            basis,
                            matrix: DMatrix::zeros(d, d),
                        }
                    })
                    .collect()
            }
            BlockSpace::PairWithData => {
                let top = label.ja + label.jc + HalfInteger::HALF;
                top.projections()
                    .map(|m| {
                        let basis: Vec<BasisState> = triple_totals(label)
                            .into_iter()
                            .filter(|total| total.twice() >= m.twice().abs())
                            .flat_map(|total| {
                                triple_channels(label, total)
                                    .into_iter()
                                    .map(move |j_ac| BasisState { j_ac, total })
                            })
                            .collect();
                        let d = basis.len();
                        Sector {
                            m,
                            basis,
                            matrix: DMatrix::zeros(d, d),
                        }
                    })
                    .collect()
            }
        };
        Self { label, space, sectors }
    }

    pub fn sector(&self, m: HalfInteger) -> Option<&Sector> {
        self.sectors.iter().find(|s| s.m == m)
    }

    pub fn trace(&self) -> f64 {
        self.sectors.iter().map(|s| s.matrix.trace()).sum()
    }

    /// Largest entrywise deviation from symmetry.
    pub fn hermiticity_defect(&self) -> f64 {
        self.sectors
            .iter()
            .map(|s| (&s.matrix - s.matrix.transpose()).amax())
            .fold(0.0, f64::max)
    }

    /// Sum of absolute eigenvalues over all sectors.
    pub fn trace_norm(&self) -> Result<f64> {
        let defect = self.hermiticity_defect();
        if defect > HERMITICITY_TOL {
            return Err(Error::Integrity(format!(
                "sector matrices are not Hermitian (defect {defect:e})"
            )));
        }
        Ok(self.sectors.iter().map(|s| symmetric_trace_norm(&s.matrix)).sum())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.sectors.iter_mut().for_each(|s| s.matrix *= factor);
        out
    }

    /// `self + factor * other`; both must share label and space.
    pub fn add_scaled(&self, factor: f64, other: &BlockOperator) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (s, o) in out.sectors.iter_mut().zip(&other.sectors) {
            s.matrix += &o.matrix * factor;
        }
        Ok(out)
    }

    /// Largest entrywise difference to a compatible operator.
    pub fn max_abs_diff(&self, other: &BlockOperator) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self
            .sectors
            .iter()
            .zip(&other.sectors)
            .map(|(a, b)| (&a.matrix - &b.matrix).amax())
            .fold(0.0, f64::max))
    }

    fn check_compatible(&self, other: &BlockOperator) -> Result<()> {
        if self.label != other.label || self.space != other.space {
            return Err(Error::Integrity("block operators live on different spaces".into()));
        }
        Ok(())
    }
}

/// Sum of absolute eigenvalues of a symmetric matrix, after symmetrization.
pub fn symmetric_trace_norm(matrix: &DMatrix<f64>) -> f64 {
    symmetric_eigenvalues(matrix).iter().map(|x| x.abs()).sum()
}

pub fn symmetric_eigenvalues(matrix: &DMatrix<f64>) -> Vec<f64> {
    match matrix.nrows() {
        0 => Vec::new(),
        1 => vec![matrix[(0, 0)]],
        _ => {
            let sym = (matrix + matrix.transpose()) * 0.5;
            sym.symmetric_eigenvalues().iter().copied().collect()
        }
    }
}

/// `J_z` of subsystem `A` or `C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    A,
    C,
}

/// `J_z^A` or `J_z^C` in the coupled `|j_AC, m⟩` basis of block `label`.
///
/// Uses the closed-form tridiagonal matrix elements, which stay accurate at
/// spins where the Racah sum for Clebsch–Gordan coefficients cancels badly.
pub fn coupled_jz(label: BlockLabel, which: Subsystem) -> BlockOperator {
    let mut op = BlockOperator::zeros(label, BlockSpace::Pair);
    let (own, other, sign) = match which {
        Subsystem::A => (label.ja.value(), label.jc.value(), 1.0),
        Subsystem::C => (label.jc.value(), label.ja.value(), -1.0),
    };
    let diff2 = (label.ja.value() - label.jc.value()).powi(2);
    let top2 = (label.ja.value() + label.jc.value() + 1.0).powi(2);
    for sector in &mut op.sectors {
        let m = sector.m.value();
        for (row, state) in sector.basis.iter().enumerate() {
            let j = state.j_ac.value();
            if j > 0.0 {
                let casimir = j * (j + 1.0);
                sector.matrix[(row, row)] = m * (casimir + own * (own + 1.0) - other * (other + 1.0)) / (2.0 * casimir);
            }
            // ⟨j - 1, m| J_z^A |j, m⟩; rows are ordered by ascending j_AC.
            if row > 0 {
                let j2 = j * j;
                let value =
                    ((j2 - m * m) * (j2 - diff2) * (top2 - j2)).max(0.0).sqrt() / (2.0 * j * (4.0 * j2 - 1.0).sqrt());
                sector.matrix[(row - 1, row)] = sign * value;
                sector.matrix[(row, row - 1)] = sign * value;
            }
        }
    }
    op
}

/// Total spins `J` of `A ⊗ C ⊗ B` within block `label`, ascending.
fn triple_totals(label: BlockLabel) -> Vec<HalfInteger> {
    let lo = (label.ja - label.jc).abs();
    let bottom = if lo.twice() == 0 {
        HalfInteger::HALF
    } else {
        lo - HalfInteger::HALF
    };
    HalfInteger::range_inclusive(bottom, label.ja + label.jc + HalfInteger::HALF).collect()
}

/// Intermediate spins `j_AC = J ± 1/2` admissible in block `label`, ascending.
fn triple_channels(label: BlockLabel, total: HalfInteger) -> Vec<HalfInteger> {
    let lo = (label.ja - label.jc).abs();
    let hi = label.ja + label.jc;
    [total - HalfInteger::HALF, total + HalfInteger::HALF]
        .into_iter()
        .filter(|j| j.twice() >= lo.twice() && j.twice() <= hi.twice())
        .collect()
}

/// Rotation-invariant building blocks on `A ⊗ B ⊗ C`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InvariantTerm {
    Identity,
    /// Projector onto total spin `J_AB` of `A ⊗ B`, identity on `C`.
    ProjectorAB(HalfInteger),
    /// Projector onto total spin `J_BC` of `B ⊗ C`, identity on `A`.
    ProjectorBC(HalfInteger),
}

/// The restriction of a rotation-invariant operator to one total spin `J`,
/// indexed by the intermediate spins `j_AC`.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantBlock {
    pub total: HalfInteger,
    pub channels: Vec<HalfInteger>,
    pub matrix: DMatrix<f64>,
}

/// A rotation-invariant operator on block `label` of `A ⊗ B ⊗ C`, stored by
/// Schur's lemma as one matrix per total spin (each repeated `2J + 1` times).
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantOperator {
    pub label: BlockLabel,
    pub blocks: Vec<InvariantBlock>,
}

/// Product-basis amplitudes at fixed total `M`, indexed by `(m_A, m_B)` with `m_C` implied.
struct TripleVector {
    ja: HalfInteger,
    jc: HalfInteger,
    m: HalfInteger,
    amp: Vec<f64>,
}

impl TripleVector {
    fn index(&self, ma: HalfInteger, mb: HalfInteger) -> usize {
        let ia = ((ma.twice() + self.ja.twice()) / 2) as usize;
        let ib = usize::from(mb.twice() > 0);
        2 * ia + ib
    }

    fn get(&self, ma: HalfInteger, mb: HalfInteger) -> f64 {
        self.amp[self.index(ma, mb)]
    }

    /// `|(j_A j_C) j_ac, 1/2; J M⟩`.
    fn coupled(label: BlockLabel, j_ac: HalfInteger, total: HalfInteger, m: HalfInteger) -> Self {
        let BlockLabel { ja, jc } = label;
        let mut v = Self {
            ja,
            jc,
            m,
            amp: vec![0.0; 2 * ja.dimension()],
        };
        let half = HalfInteger::HALF;
        for ma in ja.projections() {
            for mb in [-half, half] {
                let mc = m - ma - mb;
                if mc.abs() > jc {
                    continue;
                }
                let value = cg(ja, ma, jc, mc, j_ac, ma + mc) * cg(j_ac, ma + mc, half, mb, total, m);
                let k = v.index(ma, mb);
                v.amp[k] = value;
            }
        }
        v
    }

    /// Components along `|J_AB, M - m_C⟩ ⊗ |m_C⟩`, one per `m_C`.
    fn ab_components(&self, j_ab: HalfInteger) -> Vec<f64> {
        let half = HalfInteger::HALF;
        self.jc
            .projections()
            .map(|mc| {
                let m_ab = self.m - mc;
                let mut acc = 0.0;
                for mb in [-half, half] {
                    let ma = m_ab - mb;
                    if ma.abs() > self.ja {
                        continue;
                    }
                    acc += self.get(ma, mb) * cg(self.ja, ma, half, mb, j_ab, m_ab);
                }
                acc
            })
            .collect()
    }

    /// Components along `|m_A⟩ ⊗ |J_BC, M - m_A⟩`, one per `m_A`.
    fn bc_components(&self, j_bc: HalfInteger) -> Vec<f64> {
        let half = HalfInteger::HALF;
        self.ja
            .projections()
            .map(|ma| {
                let m_bc = self.m - ma;
                let mut acc = 0.0;
                for mb in [-half, half] {
                    let mc = m_bc - mb;
                    if mc.abs() > self.jc {
                        continue;
                    }
                    acc += self.get(ma, mb) * cg(half, mb, self.jc, mc, j_bc, m_bc);
                }
                acc
            })
            .collect()
    }

    fn dot(&self, other: &TripleVector) -> f64 {
        self.amp.iter().zip(&other.amp).map(|(a, b)| a * b).sum()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl InvariantOperator {
    /// `Σ_k coeff_k · term_k` restricted to block `label`.
    pub fn from_terms(label: BlockLabel, terms: &[(f64, InvariantTerm)]) -> Self {
        let blocks = triple_totals(label)
            .into_iter()
            .map(|total| {
                let channels = triple_channels(label, total);
                let vectors: Vec<TripleVector> = channels
                    .iter()
                    .map(|&j_ac| TripleVector::coupled(label, j_ac, total, total))
                    .collect();
                let d = channels.len();
                let mut matrix = DMatrix::zeros(d, d);
                for &(coeff, term) in terms {
                    let components: Option<Vec<Vec<f64>>> = match term {
                        InvariantTerm::Identity => None,
                        InvariantTerm::ProjectorAB(j) => Some(vectors.iter().map(|v| v.ab_components(j)).collect()),
                        InvariantTerm::ProjectorBC(j) => Some(vectors.iter().map(|v| v.bc_components(j)).collect()),
                    };
                    for row in 0..d {
                        for col in 0..d {
                            let value = match &components {
                                None => vectors[row].dot(&vectors[col]),
                                Some(c) => dot(&c[row], &c[col]),
                            };
                            matrix[(row, col)] += coeff * value;
                        }
                    }
                }
                InvariantBlock {
                    total,
                    channels,
                    matrix,
                }
            })
            .collect();
        Self { label, blocks }
    }

    pub fn trace(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.total.dimension() as f64 * b.matrix.trace())
            .sum()
    }

    /// `Σ_J (2J + 1) ‖X_J‖₁`.
    pub fn trace_norm(&self) -> Result<f64> {
        let mut total = 0.0;
        for block in &self.blocks {
            let defect = (&block.matrix - block.matrix.transpose()).amax();
            if defect > HERMITICITY_TOL {
                return Err(Error::Integrity(format!(
                    "invariant block J = {} is not Hermitian (defect {defect:e})",
                    block.total
                )));
            }
            total += block.total.dimension() as f64 * symmetric_trace_norm(&block.matrix);
        }
        Ok(total)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.blocks.iter_mut().for_each(|b| b.matrix *= factor);
        out
    }

    pub fn add_scaled(&self, factor: f64, other: &InvariantOperator) -> Result<Self> {
        if self.label != other.label {
            return Err(Error::Integrity("invariant operators on different blocks".into()));
        }
        let mut out = self.clone();
        for (b, o) in out.blocks.iter_mut().zip(&other.blocks) {
            b.matrix += &o.matrix * factor;
        }
        Ok(out)
    }

    pub fn max_abs_diff(&self, other: &InvariantOperator) -> Result<f64> {
        if self.label != other.label {
            return Err(Error::Integrity("invariant operators on different blocks".into()));
        }
        Ok(self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| (&a.matrix - &b.matrix).amax())
            .fold(0.0, f64::max))
    }

    fn block(&self, total: HalfInteger) -> Option<&InvariantBlock> {
        self.blocks.iter().find(|b| b.total == total)
    }

    /// Expands the operator over every total-`M` sector of the coupled basis.
    pub fn to_block_operator(&self) -> BlockOperator {
        let mut op = BlockOperator::zeros(self.label, BlockSpace::PairWithData);
        for sector in &mut op.sectors {
            let mut start = 0;
            while start < sector.basis.len() {
                let total = sector.basis[start].total;
                let block = self.block(total).expect("sector totals come from the same label");
                let d = block.channels.len();
                sector.matrix.view_mut((start, start), (d, d)).copy_from(&block.matrix);
                start += d;
            }
        }
        op
    }

    /// `tr_B[(1 ⊗ |↑⟩⟨↑| ⊗ 1) X]` as an operator on `A ⊗ C`.
    pub fn partial_trace_up(&self) -> BlockOperator {
        let mut op = BlockOperator::zeros(self.label, BlockSpace::Pair);
        let half = HalfInteger::HALF;
        for sector in &mut op.sectors {
            let m = sector.m;
            let basis = sector.basis.clone();
            for (row, left) in basis.iter().enumerate() {
                for (col, right) in basis.iter().enumerate() {
                    let mut value = 0.0;
                    for block in &self.blocks {
                        let Some(i) = block.channels.iter().position(|&j| j == left.j_ac) else {
                            continue;
                        };
                        let Some(k) = block.channels.iter().position(|&j| j == right.j_ac) else {
                            continue;
                        };
                        let amp_l = cg(left.j_ac, m, half, half, block.total, m + half);
                        let amp_r = cg(right.j_ac, m, half, half, block.total, m + half);
                        value += amp_l * amp_r * block.matrix[(i, k)];
                    }
                    sector.matrix[(row, col)] = value;
                }
            }
        }
        op
    }
}

/// `σ_0^n - σ_1^n` for pure training states, on the symmetric block `{n/2, n/2}`.
///
/// `σ_0 = P_sym(AB) ⊗ 1_C / (d_{n+1} d_n)` and symmetrically for `σ_1`.
pub fn average_state_diff_pure(n: i64) -> Result<InvariantOperator> {
    if n < 1 {
        return domain(format!("average states need n >= 1, got {n}"));
    }
    let label = BlockLabel::symmetric(n);
    let top = HalfInteger::half_of(n + 1);
    let norm = 1.0 / (((n + 2) * (n + 1)) as f64);
    Ok(InvariantOperator::from_terms(
        label,
        &[
            (norm, InvariantTerm::ProjectorAB(top)),
            (-norm, InvariantTerm::ProjectorBC(top)),
        ],
    ))
}

/// Terms of the conditional state on block `{j_A, j_C}` when the data qubit
/// joins subsystem `X` (spin `jx`, the other training spin being `jy`).
fn conditional_state_terms(
    jx: HalfInteger,
    jy: HalfInteger,
    r: f64,
    joined: fn(HalfInteger) -> InvariantTerm,
) -> Result<Vec<(f64, InvariantTerm)>> {
    let j = jx.value();
    let e = r * jz_expectation(jx, r)?;
    let spectator = jy.dimension() as f64;
    let mut terms = vec![(
        (j + 1.0 + e) / (2.0 * j + 1.0) / (2.0 * j + 2.0) / spectator,
        joined(jx + HalfInteger::HALF),
    )];
    if jx.twice() > 0 {
        terms.push((
            (j - e) / (2.0 * j + 1.0) / (2.0 * j) / spectator,
            joined(jx - HalfInteger::HALF),
        ));
    }
    Ok(terms)
}

/// `σ_{0,ξ} - σ_{1,ξ}` on block `ξ` for training states of purity `r`.
pub fn average_state_diff_mixed(label: BlockLabel, params: SpectrumParams) -> Result<InvariantOperator> {
    BlockLabel::new(params.n, label.ja, label.jc)?;
    check_purity(params.r)?;
    let mut terms = conditional_state_terms(label.ja, label.jc, params.r, InvariantTerm::ProjectorAB)?;
    let negative = conditional_state_terms(label.jc, label.ja, params.r, InvariantTerm::ProjectorBC)?;
    terms.extend(negative.into_iter().map(|(c, t)| (-c, t)));
    Ok(InvariantOperator::from_terms(label, &terms))
}

/// Large-`n` density of `x = 2j/n` under the block distribution `p_j`,
/// `√(n/2π) (1-x²)^{-1/2} x(1+r)/(r(1+x)) exp(-n H((1+x)/2 ‖ (1+r)/2))`.
pub fn asymptotic_block_distribution(n: i64, r: f64, x: f64) -> Result<f64> {
    if n < 1 {
        return domain(format!("n must be positive, got {n}"));
    }
    if !(r > 0.0 && r < 1.0) || !(x > 0.0 && x < 1.0) {
        return domain(format!("x = {x} and r = {r} must lie strictly inside (0, 1)"));
    }
    let n = n as f64;
    let s = (1.0 + x) / 2.0;
    let t = (1.0 + r) / 2.0;
    let relative_entropy = s * (s / t).ln() + (1.0 - s) * ((1.0 - s) / (1.0 - t)).ln();
    Ok(
        (n / (2.0 * std::f64::consts::PI)).sqrt() / (1.0 - x * x).sqrt() * x * (1.0 + r) / (r * (1.0 + x))
            * (-n * relative_entropy).exp(),
    )
}

/// Sector layout summary used by debug dumps: `m → basis size`.
pub fn sector_sizes(op: &BlockOperator) -> BTreeMap<i64, usize> {
    op.sectors.iter().map(|s| (s.m.twice(), s.basis.len())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(twice: i64) -> HalfInteger {
        HalfInteger::from_twice(twice)
    }

    #[test]
    fn pure_weights_sit_in_the_top_block() {
        let w = block_weights(SpectrumParams::new(2, 1.0).unwrap()).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w[1].j, h(2));
        assert_eq!(w[1].a, vec![0.0, 0.0, 1.0]);
        assert!((w[1].p - 1.0).abs() < 1e-15);
        assert_eq!(w[0].p, 0.0);
        for n in 0..=20 {
            let w = block_weights(SpectrumParams::new(n, 1.0).unwrap()).unwrap();
            assert!(w.last().unwrap().p > 1.0 - 1e-9);
        }
    }

    #[test]
    fn single_qubit_weights() {
        let w = block_weights(SpectrumParams::new(1, 0.5).unwrap()).unwrap();
        assert_eq!(w.len(), 1);
        assert!((w[0].a[0] - 0.25).abs() < 1e-15);
        assert!((w[0].a[1] - 0.75).abs() < 1e-15);
        assert!((w[0].c_j - 1.0).abs() < 1e-15);
        assert!((w[0].p - 1.0).abs() < 1e-15);
    }

    #[test]
    fn weights_are_normalized() {
        for n in [1, 2, 5, 10, 40, 200] {
            for r in [0.05, 0.3, 0.5, 0.8, 0.99, 1.0] {
                let w = block_weights(SpectrumParams::new(n, r).unwrap()).unwrap();
                let total: f64 = w.iter().map(|b| b.p).sum();
                assert!((total - 1.0).abs() < 1e-12, "n={n} r={r} total={total}");
                for b in &w {
                    assert!(b.a.iter().all(|&a| a >= 0.0));
                    assert!((b.a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }
        }
        assert!(SpectrumParams::new(3, 0.0).is_err());
        assert!(block_weights(SpectrumParams { n: 3, r: 0.0 }).is_err());
    }

    #[test]
    fn jz_expectation_examples() {
        assert_eq!(jz_expectation(h(7), 1.0).unwrap(), 3.5);
        assert!((jz_expectation(h(1), 0.5).unwrap() - 0.25).abs() < 1e-15);
        let approx = 10.0 - 0.2 / 1.6;
        assert!((jz_expectation(h(20), 0.8).unwrap() - approx).abs() < 1e-8);
    }

    fn coupled_jz_from_cg(label: BlockLabel, which: Subsystem) -> BlockOperator {
        let mut op = BlockOperator::zeros(label, BlockSpace::Pair);
        for sector in &mut op.sectors {
            let m = sector.m;
            let product: Vec<(HalfInteger, HalfInteger)> = label
                .ja
                .projections()
                .map(|ma| (ma, m - ma))
                .filter(|(_, mc)| mc.abs() <= label.jc)
                .collect();
            let transform = DMatrix::from_fn(sector.basis.len(), product.len(), |row, col| {
                let (ma, mc) = product[col];
                cg(label.ja, ma, label.jc, mc, sector.basis[row].j_ac, m)
            });
            let mut weighted = transform.clone();
            for (col, &(ma, mc)) in product.iter().enumerate() {
                let w = match which {
                    Subsystem::A => ma.value(),
                    Subsystem::C => mc.value(),
                };
                weighted.column_mut(col).scale_mut(w);
            }
            sector.matrix = &weighted * transform.transpose();
        }
        op
    }

    #[test]
    fn coupled_jz_matches_clebsch_gordan_construction() {
        for ja in 0..=8 {
            for jc in 0..=8 {
                let label = BlockLabel { ja: h(ja), jc: h(jc) };
                for which in [Subsystem::A, Subsystem::C] {
                    let fast = coupled_jz(label, which);
                    let slow = coupled_jz_from_cg(label, which);
                    for (a, b) in fast.sectors.iter().zip(&slow.sectors) {
                        assert!((&a.matrix - &b.matrix).amax() < 1e-13, "{label:?} {which:?} m={}", a.m);
                    }
                }
            }
        }
    }

    #[test]
    fn coupled_jz_two_qubits() {
        let label = BlockLabel::symmetric(1);
        let jz_a = coupled_jz(label, Subsystem::A);
        let zero = jz_a.sector(h(0)).unwrap();
        assert_eq!(zero.basis[0].j_ac, h(0));
        assert!((zero.matrix[(1, 0)].abs() - 0.5).abs() < 1e-15);
        assert!((jz_a.sector(h(2)).unwrap().matrix[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((jz_a.sector(h(-2)).unwrap().matrix[(0, 0)] + 0.5).abs() < 1e-15);
        for label in [BlockLabel { ja: h(3), jc: h(1) }, BlockLabel { ja: h(2), jc: h(4) }] {
            assert!(coupled_jz(label, Subsystem::A).trace().abs() < 1e-13);
            assert!(coupled_jz(label, Subsystem::C).trace().abs() < 1e-13);
        }
    }

    #[test]
    fn trace_norm_basics() {
        let label = BlockLabel { ja: h(1), jc: h(1) };
        let mut op = BlockOperator::zeros(label, BlockSpace::Pair);
        assert_eq!(op.trace_norm().unwrap(), 0.0);
        let zero = op.sectors.iter_mut().find(|s| s.m == h(0)).unwrap();
        zero.matrix[(0, 0)] = 1.0;
        zero.matrix[(1, 1)] = -1.0;
        assert!((op.trace_norm().unwrap() - 2.0).abs() < 1e-15);
        let zero = op.sectors.iter_mut().find(|s| s.m == h(0)).unwrap();
        zero.matrix[(0, 1)] = 1e-3;
        assert!(matches!(op.trace_norm(), Err(Error::Integrity(_))));
    }

    #[test]
    fn pure_difference_trace_norms() {
        let diff = average_state_diff_pure(1).unwrap();
        assert!(diff.trace().abs() < 1e-15);
        assert!((diff.trace_norm().unwrap() - 1.0 / 3.0f64.sqrt()).abs() < 1e-14);
        let p2 = 0.5 - (8.0f64.sqrt() + 2.0 * 5.0f64.sqrt()) / 36.0;
        let diff = average_state_diff_pure(2).unwrap();
        assert!((diff.trace_norm().unwrap() - 4.0 * (0.5 - p2)).abs() < 1e-14);
        assert!(average_state_diff_pure(0).is_err());
    }

    #[test]
    fn invariant_and_sector_forms_agree() {
        for n in 1..=4 {
            let diff = average_state_diff_pure(n).unwrap();
            let expanded = diff.to_block_operator();
            assert!((expanded.trace_norm().unwrap() - diff.trace_norm().unwrap()).abs() < 1e-13);
            assert!((expanded.trace() - diff.trace()).abs() < 1e-13);
        }
        let params = SpectrumParams::new(3, 0.6).unwrap();
        let diff = average_state_diff_mixed(BlockLabel { ja: h(3), jc: h(1) }, params).unwrap();
        let expanded = diff.to_block_operator();
        assert!((expanded.trace_norm().unwrap() - diff.trace_norm().unwrap()).abs() < 1e-13);
    }

    #[test]
    fn identity_term_is_the_identity() {
        let label = BlockLabel { ja: h(2), jc: h(3) };
        let id = InvariantOperator::from_terms(label, &[(1.0, InvariantTerm::Identity)]);
        let dim = (label.ja.dimension() * label.jc.dimension() * 2) as f64;
        assert!((id.trace() - dim).abs() < 1e-12);
        let both = InvariantOperator::from_terms(
            label,
            &[
                (1.0, InvariantTerm::ProjectorAB(h(3))),
                (1.0, InvariantTerm::ProjectorAB(h(1))),
            ],
        );
        assert!(both.max_abs_diff(&id).unwrap() < 1e-13);
    }

    #[test]
    fn equal_spin_blocks_are_scaled_pure_differences() {
        for tj in 1..=6 {
            let j = h(tj);
            let n = tj + 2; // any n carrying spin j
            let label = BlockLabel { ja: j, jc: j };
            let pure = average_state_diff_pure(tj).unwrap();
            for r in [0.1, 0.5, 0.9, 1.0] {
                let params = SpectrumParams::new(n, r).unwrap();
                let mixed = average_state_diff_mixed(label, params).unwrap();
                let factor = r * jz_expectation(j, r).unwrap() / j.value();
                let scaled = pure.scaled(factor);
                assert!(mixed.max_abs_diff(&scaled).unwrap() < 1e-12, "j={j} r={r}");
            }
        }
    }

    #[test]
    fn mixed_reduces_to_pure() {
        for n in 1..=4 {
            let mixed =
                average_state_diff_mixed(BlockLabel::symmetric(n), SpectrumParams::new(n, 1.0).unwrap()).unwrap();
            let pure = average_state_diff_pure(n).unwrap();
            assert!(mixed.max_abs_diff(&pure).unwrap() < 1e-13);
        }
        let diff =
            average_state_diff_mixed(BlockLabel { ja: h(2), jc: h(0) }, SpectrumParams::new(2, 0.6).unwrap()).unwrap();
        assert!(diff.trace().abs() < 1e-13);
        assert!(
            average_state_diff_mixed(BlockLabel { ja: h(1), jc: h(0) }, SpectrumParams::new(2, 0.6).unwrap()).is_err()
        );
    }

    #[test]
    fn trace_norm_dominates_trace() {
        let params = SpectrumParams::new(4, 0.7).unwrap();
        for (label, _) in block_labels(params).unwrap() {
            let diff = average_state_diff_mixed(label, params).unwrap();
            let id = InvariantOperator::from_terms(label, &[(1.0, InvariantTerm::Identity)]);
            let shifted = diff.add_scaled(0.3, &id).unwrap();
            assert!(shifted.trace_norm().unwrap() >= shifted.trace().abs() - 1e-12);
            assert!((id.trace_norm().unwrap() - id.trace()).abs() < 1e-10);
        }
    }

    #[test]
    fn label_weights_sum_to_one() {
        for n in 1..=8 {
            for r in [0.2, 0.7, 1.0] {
                let total: f64 = block_labels(SpectrumParams::new(n, r).unwrap())
                    .unwrap()
                    .iter()
                    .map(|(_, p)| p)
                    .sum();
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn asymptotic_density_tracks_exact_weights() {
        let (n, r) = (200, 0.7);
        let xs: Vec<f64> = (1..1000).map(|k| k as f64 / 1000.0).collect();
        let values: Vec<f64> = xs
            .iter()
            .map(|&x| asymptotic_block_distribution(n, r, x).unwrap())
            .collect();
        let integral: f64 = values.iter().sum::<f64>() / 1000.0;
        assert!((integral - 1.0).abs() < 0.05, "integral {integral}");
        let (argmax, _) = xs
            .iter()
            .zip(&values)
            .fold((0.0, f64::MIN), |acc, (&x, &v)| if v > acc.1 { (x, v) } else { acc });
        assert!((argmax - r).abs() < 0.02);
        let exact = block_weights(SpectrumParams::new(n, r).unwrap()).unwrap();
        let best = exact.iter().max_by(|a, b| a.p.total_cmp(&b.p)).unwrap();
        assert!((best.j.value() * 2.0 / n as f64 - argmax).abs() < 0.02);
        let at_mode = (n as f64 / (2.0 * std::f64::consts::PI)).sqrt() / (1.0 - r * r).sqrt();
        assert!((asymptotic_block_distribution(n, r, r).unwrap() - at_mode).abs() < 1e-12);
        assert!(asymptotic_block_distribution(n, r, 1.0).is_err());
        assert!(asymptotic_block_distribution(n, 1.0, 0.5).is_err());
    }

    #[test]
    fn partial_trace_of_identity() {
        let label = BlockLabel { ja: h(1), jc: h(3) };
        let id = InvariantOperator::from_terms(label, &[(1.0, InvariantTerm::Identity)]);
        let reduced = id.partial_trace_up();
        for sector in &reduced.sectors {
            let eye = DMatrix::<f64>::identity(sector.basis.len(), sector.basis.len());
            assert!((&sector.matrix - eye).amax() < 1e-13);
        }
    }

    #[test]
    fn dump_serializes_sectors() {
        let op = coupled_jz(BlockLabel::symmetric(1), Subsystem::A);
        let json = serde_json::to_value(&op).unwrap();
        assert_eq!(json["space"], "pair");
        assert_eq!(json["sectors"].as_array().unwrap().len(), 3);
        assert_eq!(sector_sizes(&op).get(&0), Some(&2));
    }
}
