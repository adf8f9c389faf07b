//! Block-diagonal semidefinite programs with diagonal trace constraints.
//!
//! The primal problem is
//!
//! ```text
//! maximize   Σ_b w_b tr(C_b X_b)
//! subject to Σ_{(b,i) ∈ k} (X_b)_{ii} = t_k   for every constraint k,
//!            X_b ⪰ 0,
//! ```
//!
//! where every diagonal entry of every block belongs to exactly one constraint.
//! Its dual is `min t·y` subject to `Diag(y) - w_b C_b ⪰ 0`. The solver follows
//! the dual central path with a log-barrier and damped Newton steps, and reads
//! a primal point off the barrier Hessian.

use std::collections::HashMap;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::Serialize;

use crate::blocks::{matrix_rows, symmetric_eigenvalues, BlockLabel, BlockOperator, BlockSpace};
use crate::error::{Error, Result};
use crate::machines::SeedCompleteness;
use crate::su2::HalfInteger;

/// Default certified duality gap.
pub const DEFAULT_TOL: f64 = 1e-8;
/// Default cap on the total number of Newton steps per connected component.
pub const DEFAULT_MAX_ITERATIONS: usize = 100_000;

const BARRIER_GROWTH: f64 = 8.0;
const CENTERING_TOL: f64 = 1e-9;
/// Newton steps allowed per barrier stage before the stage counts as stalled.
const STAGE_STEP_CAP: usize = 200;
/// Consecutive stages without halving the gap after which a component stops at its best point.
const STALL_STAGES: usize = 4;

/// Best certified point seen by a component solve.
struct Iterate {
    gap: f64,
    objective: f64,
    blocks: Vec<DMatrix<f64>>,
    y: DVector<f64>,
}

/// Block identifier `(ξ, m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct BlockKey {
    pub label: BlockLabel,
    pub m: HalfInteger,
}

/// One PSD variable with its cost.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpBlock {
    pub key: BlockKey,
    /// Spin `j` of each diagonal entry; selects the constraint it enters.
    pub basis: Vec<HalfInteger>,
    pub weight: f64,
    pub cost: DMatrix<f64>,
}

/// `Σ_m ⟨j,m|X_{m,ξ}|j,m⟩ = target` for one `(ξ, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constraint {
    pub label: BlockLabel,
    pub j: HalfInteger,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSdpProblem {
    pub blocks: Vec<SdpBlock>,
    pub constraints: Vec<Constraint>,
    /// `membership[b][i]`: constraint index of diagonal entry `i` of block `b`.
    membership: Vec<Vec<usize>>,
}

impl BlockSdpProblem {
    /// Problem with the completeness targets `2j + 1` for every `(ξ, j)` that occurs.
    pub fn new(blocks: Vec<SdpBlock>) -> Result<Self> {
        let mut constraints: Vec<Constraint> = Vec::new();
        for block in &blocks {
            for &j in &block.basis {
                if !constraints.iter().any(|c| c.label == block.key.label && c.j == j) {
                    constraints.push(Constraint {
                        label: block.key.label,
                        j,
                        target: j.dimension() as f64,
                    });
                }
            }
        }
        constraints.sort_by_key(|c| (c.label, c.j));
        Self::with_constraints(blocks, constraints)
    }

    /// Problem with explicitly given constraint targets.
    pub fn with_constraints(blocks: Vec<SdpBlock>, constraints: Vec<Constraint>) -> Result<Self> {
        let index: HashMap<(BlockLabel, HalfInteger), usize> = constraints
            .iter()
            .enumerate()
            .map(|(k, c)| ((c.label, c.j), k))
            .collect();
        if index.len() != constraints.len() {
            return Err(Error::Domain("duplicate constraint".into()));
        }
        let mut used = vec![false; constraints.len()];
        let mut membership = Vec::with_capacity(blocks.len());
        for block in &blocks {
            let d = block.basis.len();
            if block.cost.nrows() != d || block.cost.ncols() != d {
                return Err(Error::Domain(format!(
                    "cost of block {:?} has the wrong shape",
                    block.key
                )));
            }
            let defect = (&block.cost - block.cost.transpose()).amax();
            if defect > crate::blocks::HERMITICITY_TOL {
                return Err(Error::Integrity(format!(
                    "cost of block {:?} is not Hermitian",
                    block.key
                )));
            }
            if !(block.weight >= 0.0 && block.weight.is_finite()) {
                return Err(Error::Domain(format!("block weight {} is invalid", block.weight)));
            }
            let mut row = Vec::with_capacity(d);
            for j in &block.basis {
                let k = *index.get(&(block.key.label, *j)).ok_or_else(|| {
                    Error::Domain(format!("entry j = {j} of block {:?} has no constraint", block.key))
                })?;
                used[k] = true;
                row.push(k);
            }
            membership.push(row);
        }
        for (k, c) in constraints.iter().enumerate() {
            if c.target < 0.0 || (!used[k] && c.target != 0.0) {
                return Err(Error::Infeasible(format!(
                    "constraint (ξ = {{{}, {}}}, j = {}) with target {} cannot be met",
                    c.label.ja, c.label.jc, c.j, c.target
                )));
            }
            if c.target == 0.0 {
                return Err(Error::Domain("zero constraint targets are not supported".into()));
            }
        }
        Ok(Self {
            blocks,
            constraints,
            membership,
        })
    }

    /// The learning-machine problem: costs `2Γ↑_{m,ξ}` with weights `p_ξ`, so the
    /// optimal objective is the bias `Δ^LM`.
    pub fn learning_machine(gammas: &[(BlockOperator, f64)]) -> Result<Self> {
        let mut blocks = Vec::new();
        for (gamma, weight) in gammas {
            if gamma.space != BlockSpace::Pair {
                return Err(Error::Domain("Γ↑ must act on the training pair".into()));
            }
            for sector in &gamma.sectors {
                blocks.push(SdpBlock {
                    key: BlockKey {
                        label: gamma.label,
                        m: sector.m,
                    },
                    basis: sector.basis.iter().map(|b| b.j_ac).collect(),
                    weight: *weight,
                    cost: &sector.matrix * 2.0,
                });
            }
        }
        Self::new(blocks)
    }

    /// The same problem with all costs multiplied by `factor`.
    pub fn scaled_costs(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.blocks.iter_mut().for_each(|b| b.cost *= factor);
        out
    }

    fn weighted_cost(&self, b: usize) -> DMatrix<f64> {
        &self.blocks[b].cost * self.blocks[b].weight
    }

    /// Connected components: groups of constraints linked through shared blocks.
    fn components(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        let n = self.constraints.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for row in &self.membership {
            for w in row.windows(2) {
                let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
                if a != b {
                    parent[a] = b;
                }
            }
        }
        let mut groups: Vec<(usize, Vec<usize>, Vec<usize>)> = Vec::new();
        for k in 0..n {
            let root = find(&mut parent, k);
            match groups.iter_mut().find(|g| g.0 == root) {
                Some(g) => g.1.push(k),
                None => groups.push((root, vec![k], Vec::new())),
            }
        }
        for (b, row) in self.membership.iter().enumerate() {
            if let Some(&k) = row.first() {
                let root = find(&mut parent, k);
                groups.iter_mut().find(|g| g.0 == root).expect("root exists").2.push(b);
            }
        }
        groups.into_iter().map(|(_, c, b)| (c, b)).collect()
    }
}

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

/// One optimized block `Ω_{m,ξ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedBlock {
    pub key: BlockKey,
    pub basis: Vec<HalfInteger>,
    pub matrix: DMatrix<f64>,
}

/// Solution of a [`BlockSdpProblem`].
#[derive(Debug, Clone, PartialEq)]
pub struct Seed {
    pub blocks: Vec<SeedBlock>,
    /// Primal objective `Σ_b w_b tr(C_b Ω_b)`.
    pub objective: f64,
    /// Dual variables, one per constraint.
    pub dual: Vec<f64>,
    /// Certified upper bound on the optimum.
    pub dual_bound: f64,
    pub gap: f64,
    /// Primal objective after each barrier stage.
    pub history: Vec<f64>,
    pub iterations: usize,
}

impl SeedCompleteness for Seed {
    fn completeness_sums(&self) -> Vec<(BlockLabel, HalfInteger, f64)> {
        let mut sums: Vec<(BlockLabel, HalfInteger, f64)> = Vec::new();
        for block in &self.blocks {
            for (i, &j) in block.basis.iter().enumerate() {
                let value = block.matrix[(i, i)];
                match sums.iter_mut().find(|(l, jj, _)| *l == block.key.label && *jj == j) {
                    Some(entry) => entry.2 += value,
                    None => sums.push((block.key.label, j, value)),
                }
            }
        }
        sums
    }
}

impl Seed {
    /// Smallest eigenvalue over all blocks.
    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|b| symmetric_eigenvalues(&b.matrix))
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest violation of the constraints of `problem`.
    pub fn constraint_residual(&self, problem: &BlockSdpProblem) -> f64 {
        constraint_residuals(problem, &self.blocks)
            .iter()
            .map(|r| r.abs())
            .fold(0.0, f64::max)
    }

    /// JSON-friendly view with eigenvalues and constraint residuals.
    pub fn dump(&self, problem: &BlockSdpProblem) -> SeedDump {
        SeedDump {
            objective: self.objective,
            dual_bound: self.dual_bound,
            gap: self.gap,
            iterations: self.iterations,
            blocks: self
                .blocks
                .iter()
                .map(|b| SeedBlockDump {
                    key: b.key,
                    basis: b.basis.clone(),
                    matrix: matrix_rows(&b.matrix),
                    eigenvalues: symmetric_eigenvalues(&b.matrix),
                })
                .collect(),
            constraints: problem
                .constraints
                .iter()
                .zip(constraint_residuals(problem, &self.blocks))
                .map(|(c, residual)| ConstraintDump {
                    label: c.label,
                    j: c.j,
                    target: c.target,
                    residual,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedDump {
    pub objective: f64,
    pub dual_bound: f64,
    pub gap: f64,
    pub iterations: usize,
    pub blocks: Vec<SeedBlockDump>,
    pub constraints: Vec<ConstraintDump>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedBlockDump {
    pub key: BlockKey,
    pub basis: Vec<HalfInteger>,
    pub matrix: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstraintDump {
    pub label: BlockLabel,
    pub j: HalfInteger,
    pub target: f64,
    pub residual: f64,
}

fn constraint_residuals(problem: &BlockSdpProblem, blocks: &[SeedBlock]) -> Vec<f64> {
    let mut sums = vec![0.0; problem.constraints.len()];
    for (row, block) in problem.membership.iter().zip(blocks) {
        for (i, &k) in row.iter().enumerate() {
            sums[k] += block.matrix[(i, i)];
        }
    }
    sums.iter()
        .zip(&problem.constraints)
        .map(|(s, c)| s - c.target)
        .collect()
}

/// Upper bound on the optimum from the dual variables stored in `primal`,
/// shifted just enough to make every dual slack PSD.
pub fn dual_bound(problem: &BlockSdpProblem, primal: &Seed) -> f64 {
    let y = &primal.dual;
    let mut shift = vec![0.0f64; problem.constraints.len()];
    for (b, row) in problem.membership.iter().enumerate() {
        if row.is_empty() {
            continue;
        }
        let slack = DMatrix::from_diagonal(&DVector::from_iterator(row.len(), row.iter().map(|&k| y[k])))
            - problem.weighted_cost(b);
        let deficit = (-symmetric_eigenvalues(&slack).into_iter().fold(f64::INFINITY, f64::min)).max(0.0);
        for &k in row {
            shift[k] = shift[k].max(deficit);
        }
    }
    problem
        .constraints
        .iter()
        .enumerate()
        .map(|(k, c)| c.target * (y[k] + shift[k]))
        .sum()
}

/// Solves `problem` to a certified duality gap of `options.tol`.
pub fn solve(problem: &BlockSdpProblem, options: SolverOptions) -> Result<Seed> {
    let total_dim: usize = problem.blocks.iter().map(|b| b.basis.len()).sum();
    let mut blocks: Vec<Option<SeedBlock>> = vec![None; problem.blocks.len()];
    let mut dual = vec![0.0; problem.constraints.len()];
    let mut stages: Vec<Vec<f64>> = Vec::new();
    let mut iterations = 0;
    for (constraints, members) in problem.components() {
        let dim: usize = members.iter().map(|&b| problem.blocks[b].basis.len()).sum();
        let share = options.tol * dim as f64 / total_dim.max(1) as f64;
        let component = Component::new(problem, constraints, members);
        let solution = component.solve(share, options.max_iterations)?;
        iterations += solution.iterations;
        for (k, y) in component.constraints.iter().zip(&solution.dual) {
            dual[*k] = *y;
        }
        for (b, x) in component.members.iter().zip(solution.blocks) {
            blocks[*b] = Some(SeedBlock {
                key: problem.blocks[*b].key,
                basis: problem.blocks[*b].basis.clone(),
                matrix: x,
            });
        }
        stages.push(solution.history);
    }
    let blocks: Vec<SeedBlock> = blocks
        .into_iter()
        .zip(&problem.blocks)
        .map(|(x, block)| {
            x.unwrap_or_else(|| SeedBlock {
                key: block.key,
                basis: block.basis.clone(),
                matrix: DMatrix::zeros(0, 0),
            })
        })
        .collect();
    let objective = blocks
        .iter()
        .enumerate()
        .map(|(b, x)| (problem.weighted_cost(b).component_mul(&x.matrix)).sum())
        .sum();
    // Components finish after different numbers of stages; the running total holds
    // finished components at their final value.
    let longest = stages.iter().map(Vec::len).max().unwrap_or(0);
    let history = (0..longest)
        .map(|s| stages.iter().map(|h| h[s.min(h.len() - 1)]).sum())
        .collect();
    let mut seed = Seed {
        blocks,
        objective,
        dual,
        dual_bound: 0.0,
        gap: 0.0,
        history,
        iterations,
    };
    seed.dual_bound = dual_bound(problem, &seed);
    seed.gap = seed.dual_bound - seed.objective;
    if seed.gap.is_nan() || seed.gap > options.tol {
        return Err(Error::Solver {
            message: format!(
                "certified gap {:.3e} exceeds the tolerance {:.3e}",
                seed.gap, options.tol
            ),
            best_objective: seed.objective,
            gap: seed.gap,
        });
    }
    Ok(seed)
}

struct Component {
    constraints: Vec<usize>,
    members: Vec<usize>,
    /// Local constraint index of every diagonal entry of every member block.
    local: Vec<Vec<usize>>,
    targets: DVector<f64>,
    costs: Vec<DMatrix<f64>>,
    scale: f64,
}

struct ComponentSolution {
    blocks: Vec<DMatrix<f64>>,
    dual: Vec<f64>,
    history: Vec<f64>,
    iterations: usize,
}

impl Component {
    fn new(problem: &BlockSdpProblem, constraints: Vec<usize>, members: Vec<usize>) -> Self {
        let position: HashMap<usize, usize> = constraints.iter().enumerate().map(|(i, &k)| (k, i)).collect();
        let local = members
            .iter()
            .map(|&b| problem.membership[b].iter().map(|k| position[k]).collect())
            .collect();
        let targets = DVector::from_iterator(
            constraints.len(),
            constraints.iter().map(|&k| problem.constraints[k].target),
        );
        let raw: Vec<DMatrix<f64>> = members.iter().map(|&b| problem.weighted_cost(b)).collect();
        let scale = raw.iter().map(|c| c.amax()).fold(0.0, f64::max);
        let costs = if scale > 0.0 {
            raw.iter().map(|c| c / scale).collect()
        } else {
            raw
        };
        Self {
            constraints,
            members,
            local,
            targets,
            costs,
            scale,
        }
    }

    fn initial_slacks(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        self.local
            .iter()
            .zip(&self.costs)
            .map(|(row, cost)| {
                DMatrix::from_diagonal(&DVector::from_iterator(row.len(), row.iter().map(|&k| y[k]))) - cost
            })
            .collect()
    }

    /// Slacks after moving `y` by `step`. Slacks are carried along with `y` rather than
    /// recomputed as `Diag(y) - C`, which would cancel catastrophically near the optimum.
    fn moved_slacks(&self, slacks: &[DMatrix<f64>], step: &DVector<f64>) -> Vec<DMatrix<f64>> {
        slacks
            .iter()
            .zip(&self.local)
            .map(|(s, row)| {
                let mut moved = s.clone();
                for (i, &k) in row.iter().enumerate() {
                    moved[(i, i)] += step[k];
                }
                moved
            })
            .collect()
    }

    /// Barrier value `t b·y - Σ log det S`, or `None` outside the dual cone.
    fn barrier(&self, y: &DVector<f64>, slacks: &[DMatrix<f64>], t: f64) -> Option<f64> {
        let mut value = t * self.targets.dot(y);
        for s in slacks {
            let chol = Cholesky::<f64, Dyn>::new(s.clone())?;
            value -= 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
        }
        Some(value)
    }

    fn inverses(slacks: &[DMatrix<f64>]) -> Option<Vec<DMatrix<f64>>> {
        slacks
            .iter()
            .map(|s| Cholesky::<f64, Dyn>::new(s.clone()).map(|c| c.inverse()))
            .collect()
    }

    /// Primal point `S^{-1}/t`, rescaled by a diagonal congruence so that every
    /// constraint holds exactly while staying positive semidefinite.
    fn primal(&self, inverses: &[DMatrix<f64>], t: f64) -> Vec<DMatrix<f64>> {
        let mut blocks: Vec<DMatrix<f64>> = inverses.iter().map(|s| (s + s.transpose()) * (0.5 / t)).collect();
        let mut sums = vec![0.0; self.constraints.len()];
        for (x, row) in blocks.iter().zip(&self.local) {
            for (i, &c) in row.iter().enumerate() {
                sums[c] += x[(i, i)];
            }
        }
        for (x, row) in blocks.iter_mut().zip(&self.local) {
            let d: Vec<f64> = row.iter().map(|&c| (self.targets[c] / sums[c]).sqrt()).collect();
            for i in 0..row.len() {
                for l in 0..row.len() {
                    x[(i, l)] *= d[i] * d[l];
                }
            }
        }
        blocks
    }

    fn objective(&self, blocks: &[DMatrix<f64>]) -> f64 {
        self.costs
            .iter()
            .zip(blocks)
            .map(|(c, x)| c.component_mul(x).sum())
            .sum()
    }

    fn solve(&self, tol: f64, max_iterations: usize) -> Result<ComponentSolution> {
        let k = self.constraints.len();
        let dim: usize = self.local.iter().map(Vec::len).sum();
        if self.scale == 0.0 {
            // Zero objective: y = 0 is dual optimal, any feasible point is primal optimal.
            let identities: Vec<DMatrix<f64>> = self
                .local
                .iter()
                .map(|row| DMatrix::identity(row.len(), row.len()))
                .collect();
            return Ok(ComponentSolution {
                blocks: self.primal(&identities, 1.0),
                dual: vec![0.0; k],
                history: vec![0.0],
                iterations: 0,
            });
        }
        let tol = tol / self.scale;
        let top = self
            .costs
            .iter()
            .flat_map(symmetric_eigenvalues)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut y = DVector::from_element(k, top + 1.0);
        let mut slacks = self.initial_slacks(&y);
        let mut t = dim as f64 / self.targets.sum();
        let mut history = Vec::new();
        let mut iterations = 0;
        let mut best: Option<Iterate> = None;
        let mut stalled = 0;
        loop {
            // Centering by damped Newton steps.
            for _ in 0..STAGE_STEP_CAP {
                if iterations >= max_iterations {
                    let (objective, gap) = best
                        .as_ref()
                        .map_or((f64::NAN, f64::INFINITY), |b| (b.objective, b.gap));
                    return Err(Error::Solver {
                        message: format!("Newton step cap {max_iterations} reached"),
                        best_objective: objective * self.scale,
                        gap: gap * self.scale,
                    });
                }
                iterations += 1;
                let inverses = Self::inverses(&slacks)
                    .ok_or_else(|| Error::Integrity("dual iterate left the feasible cone".into()))?;
                let mut gradient = &self.targets * t;
                let mut hessian = DMatrix::<f64>::zeros(k, k);
                for (inv, row) in inverses.iter().zip(&self.local) {
                    for (i, &a) in row.iter().enumerate() {
                        gradient[a] -= inv[(i, i)];
                        for (l, &c) in row.iter().enumerate() {
                            hessian[(a, c)] += inv[(i, l)] * inv[(i, l)];
                        }
                    }
                }
                let step = match Cholesky::<f64, Dyn>::new(hessian.clone()) {
                    Some(chol) => -chol.solve(&gradient),
                    None => {
                        -hessian
                            .pseudo_inverse(1e-300)
                            .map_err(|e| Error::Integrity(e.to_string()))?
                            * &gradient
                    }
                };
                let decrement = -gradient.dot(&step);
                if decrement / 2.0 <= CENTERING_TOL {
                    break;
                }
                let current = self.barrier(&y, &slacks, t).expect("iterate is feasible");
                let mut alpha = 1.0;
                let mut moved = false;
                while alpha >= 1e-14 {
                    let scaled = &step * alpha;
                    let candidate = self.moved_slacks(&slacks, &scaled);
                    let next_y = &y + &scaled;
                    if let Some(value) = self.barrier(&next_y, &candidate, t) {
                        if value <= current - 0.25 * alpha * decrement {
                            y = next_y;
                            slacks = candidate;
                            moved = true;
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                if !moved {
                    break;
                }
            }
            let inverses = Self::inverses(&slacks)
                .ok_or_else(|| Error::Integrity("dual iterate left the feasible cone".into()))?;
            let blocks = self.primal(&inverses, t);
            let objective = self.objective(&blocks);
            let gap = self.targets.dot(&y) - objective;
            history.push(objective * self.scale);
            let previous = best.as_ref().map_or(f64::INFINITY, |b| b.gap);
            stalled = if gap < 0.5 * previous { 0 } else { stalled + 1 };
            if gap < previous {
                best = Some(Iterate {
                    gap,
                    objective,
                    blocks,
                    y: y.clone(),
                });
            }
            let done = gap <= tol && dim as f64 / t <= tol;
            // Past the precision floor the gap stops shrinking; the caller checks the total.
            if done || stalled >= STALL_STAGES {
                let Iterate { blocks, y, .. } = best.expect("at least one stage ran");
                return Ok(ComponentSolution {
                    blocks,
                    dual: y.iter().map(|v| v * self.scale).collect(),
                    history,
                    iterations,
                });
            }
            t *= BARRIER_GROWTH;
        }
    }
}
