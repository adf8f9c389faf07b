//! Depolarized training data: block-wise `Γ↑`, the learning-machine SDP, the
//! programmable bound from block trace norms, and purity sweeps.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::blocks::{
    average_state_diff_mixed, block_labels, check_purity, coupled_jz, jz_expectation, BlockLabel, BlockOperator,
    SpectrumParams, Subsystem,
};
use crate::error::{domain, Error, Result};
use crate::format::full_precision;
use crate::machines::{MachineKind, MachineReport, Method};
use crate::sdp::{solve, BlockSdpProblem, Seed, SolverOptions};
use crate::su2::HalfInteger;

/// Blocks with `p_ξ` below this are left out of sums and SDPs.
pub const BLOCK_WEIGHT_CUTOFF: f64 = 1e-15;
/// Largest `n` accepted by the SDP-based learning-machine risk.
pub const SDP_MAX_N: i64 = 24;

/// Coefficient `r⟨J_z⟩_j / (j(j+1))` multiplying `J_z` of one training subsystem.
pub fn gamma_coefficient(j: HalfInteger, r: f64) -> Result<f64> {
    if j.twice() == 0 {
        return Ok(0.0);
    }
    Ok(r * jz_expectation(j, r)? / j.casimir())
}

/// `Γ↑_ξ = [c_A J_z^A - c_C J_z^C] / (2 (2j_A+1)(2j_C+1))` in the coupled basis of `ξ`.
pub fn gamma_up_mixed(label: BlockLabel, params: SpectrumParams) -> Result<BlockOperator> {
    BlockLabel::new(params.n, label.ja, label.jc)?;
    check_purity(params.r)?;
    let ca = gamma_coefficient(label.ja, params.r)?;
    let cc = gamma_coefficient(label.jc, params.r)?;
    let norm = 2.0 * (label.ja.dimension() * label.jc.dimension()) as f64;
    coupled_jz(label, Subsystem::A)
        .scaled(ca / norm)
        .add_scaled(-cc / norm, &coupled_jz(label, Subsystem::C))
}

fn check_n(n: i64) -> Result<()> {
    if n < 1 {
        return domain(format!("n must be at least 1, got {n}"));
    }
    Ok(())
}

fn relevant_labels(params: SpectrumParams) -> Result<Vec<(BlockLabel, f64)>> {
    Ok(block_labels(params)?
        .into_iter()
        .filter(|(_, p)| *p >= BLOCK_WEIGHT_CUTOFF)
        .collect())
}

/// `Σ_ξ p_ξ ‖σ_{0,ξ} - σ_{1,ξ}‖₁`.
pub fn programmable_bias(params: SpectrumParams) -> Result<f64> {
    let terms: Result<Vec<f64>> = relevant_labels(params)?
        .par_iter()
        .map(|(label, p)| Ok(p * average_state_diff_mixed(*label, params)?.trace_norm()?))
        .collect();
    Ok(terms?.iter().sum())
}

/// Optimal programmable error `1/2 - Σ_ξ p_ξ ‖σ_{0,ξ} - σ_{1,ξ}‖₁ / 4` at purity `r`.
pub fn mixed_programmable_risk(n: i64, r: f64) -> Result<MachineReport> {
    check_n(n)?;
    let params = SpectrumParams::new(n, r)?;
    let error = 0.5 - programmable_bias(params)? / 4.0;
    Ok(MachineReport::new(MachineKind::Opt, n, r, error, Method::ClosedForm))
}

/// Learning-machine risk from the block SDP together with its certificate.
#[derive(Debug, Clone)]
pub struct MixedLmResult {
    pub report: MachineReport,
    pub problem: BlockSdpProblem,
    pub seed: Seed,
}

impl MixedLmResult {
    pub fn solver_gap(&self) -> f64 {
        self.seed.gap
    }
}

/// The learning-machine SDP at `(n, r)`.
pub fn learning_machine_problem(params: SpectrumParams) -> Result<BlockSdpProblem> {
    let gammas: Result<Vec<(BlockOperator, f64)>> = relevant_labels(params)?
        .into_iter()
        .map(|(label, p)| Ok((gamma_up_mixed(label, params)?, p)))
        .collect();
    BlockSdpProblem::learning_machine(&gammas?)
}

/// Learning-machine error at purity `r`, optimizing the seed blockwise by SDP.
pub fn mixed_lm_risk(n: i64, r: f64, options: SolverOptions) -> Result<MixedLmResult> {
    check_n(n)?;
    if n > SDP_MAX_N {
        return domain(format!("the seed SDP is limited to n <= {SDP_MAX_N}, got {n}"));
    }
    let params = SpectrumParams::new(n, r)?;
    let problem = learning_machine_problem(params)?;
    let seed = solve(&problem, options).map_err(|e| match e {
        Error::Solver {
            message,
            best_objective,
            gap,
        } => Error::Solver {
            message: format!("{message} (n = {n}, r = {r})"),
            best_objective,
            gap,
        },
        other => other,
    })?;
    let error = (1.0 - seed.objective / 2.0) / 2.0;
    Ok(MixedLmResult {
        report: MachineReport::new(MachineKind::Lm, n, r, error, Method::Sdp),
        problem,
        seed,
    })
}

/// Bias `Σ_ξ p_ξ 2⟨φ_ξ|Γ↑_ξ|φ_ξ⟩` of the feasible seed `φ_ξ = Σ_j √(2j+1)|j, 0⟩`,
/// a lower bound on the optimal learning-machine bias.
pub fn covariant_seed_bias(params: SpectrumParams) -> Result<f64> {
    let terms: Result<Vec<f64>> = relevant_labels(params)?
        .par_iter()
        .map(|(label, p)| {
            let gamma = gamma_up_mixed(*label, params)?;
            let sector = gamma
                .sector(HalfInteger::ZERO)
                .ok_or_else(|| Error::Integrity("Γ↑ has no m = 0 sector".into()))?;
            let phi: Vec<f64> = sector
                .basis
                .iter()
                .map(|b| (b.j_ac.dimension() as f64).sqrt())
                .collect();
            let mut value = 0.0;
            for (i, a) in phi.iter().enumerate() {
                for (k, b) in phi.iter().enumerate() {
                    value += a * sector.matrix[(i, k)] * b;
                }
            }
            Ok(2.0 * p * value)
        })
        .collect();
    Ok(terms?.iter().sum())
}

/// Error of the learning machine built from the covariant seed on every block;
/// an upper bound on the SDP optimum that stays cheap for large `n`.
pub fn covariant_seed_risk(n: i64, r: f64) -> Result<MachineReport> {
    check_n(n)?;
    let params = SpectrumParams::new(n, r)?;
    let delta = covariant_seed_bias(params)?;
    Ok(MachineReport::new(
        MachineKind::Lm,
        n,
        r,
        (1.0 - delta / 2.0) / 2.0,
        Method::ClosedForm,
    ))
}

/// Scale factor relating block differences to pure differences at large `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticScale {
    /// `r (1 - (1-r)/(n r²))`.
    pub factor: f64,
    /// False when `n r² <= 1`, where the expansion is not meaningful.
    pub expansion_valid: bool,
    /// Exact `‖σ_{0,ξ} - σ_{1,ξ}‖₁ / ‖σ_0^{2j} - σ_1^{2j}‖₁` at the block nearest
    /// `j_{A/C} = r n_{A/C} / 2` with `n_{A/C} = n ± δ√n` and `j = (j_A + j_C)/2`.
    pub exact_ratio: f64,
    pub label: BlockLabel,
}

fn nearest_spin(n: i64, target: f64) -> HalfInteger {
    let twice = (2.0 * target).round() as i64;
    let twice = twice.clamp(0, n);
    // parity of 2j must match n
    let twice = if (n - twice) % 2 == 0 {
        twice
    } else if twice < n {
        twice + 1
    } else {
        twice - 1
    };
    HalfInteger::from_twice(twice)
}

/// Large-`n` proportionality factor between mixed block differences and pure ones.
pub fn unbalanced_block_diff_asymptotic(n: i64, r: f64, delta: f64) -> Result<AsymptoticScale> {
    check_n(n)?;
    check_purity(r)?;
    let nf = n as f64;
    let factor = r * (1.0 - (1.0 - r) / (nf * r * r));
    let shift = (delta * nf.sqrt()).round() as i64;
    let (na, nc) = (n + shift, n - shift);
    if nc < 1 {
        return domain(format!("δ = {delta} leaves no copies in the smaller training set"));
    }
    let ja = nearest_spin(na, r * na as f64 / 2.0);
    let jc = nearest_spin(nc, r * nc as f64 / 2.0);
    let label = BlockLabel::unbalanced(na, nc, ja, jc)?;
    let na_params = SpectrumParams::new(na.max(nc), r)?;
    let mixed = mixed_block_diff_unchecked(label, na_params.r)?;
    let mean = (ja + jc).twice();
    if mean % 2 != 0 {
        return domain("the two block spins do not share a parity");
    }
    let pure = crate::blocks::average_state_diff_pure(mean / 2)?;
    Ok(AsymptoticScale {
        factor,
        expansion_valid: nf * r * r > 1.0,
        exact_ratio: mixed.trace_norm()? / pure.trace_norm()?,
        label,
    })
}

fn mixed_block_diff_unchecked(label: BlockLabel, r: f64) -> Result<crate::blocks::InvariantOperator> {
    // The label only fixes the block; any n carrying both spins gives the same operator.
    let n = label.ja.twice().max(label.jc.twice());
    let n = if (n - label.ja.twice()) % 2 == 0 && (n - label.jc.twice()) % 2 == 0 {
        n
    } else {
        n + 1
    };
    average_state_diff_mixed(label, SpectrumParams::new(n, r)?)
}

/// Purity sweep configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub n_min: i64,
    pub n_max: i64,
    pub r_min: f64,
    pub r_max: f64,
    pub steps: usize,
    pub tol: f64,
    pub max_iterations: usize,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_min < 1 || self.n_max < self.n_min {
            return domain(format!("invalid n range {}..={}", self.n_min, self.n_max));
        }
        if self.n_max > SDP_MAX_N {
            return domain(format!("sweeps are limited to n <= {SDP_MAX_N}"));
        }
        if self.steps < 1 {
            return domain("steps must be at least 1");
        }
        if !(self.r_min > 0.0 && self.r_min <= self.r_max && self.r_max <= 1.0) {
            return domain(format!(
                "purity grid [{}, {}] must lie inside (0, 1]",
                self.r_min, self.r_max
            ));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return domain("tolerance must be positive");
        }
        Ok(())
    }

    /// Purities `r_min, ..., r_max` in `steps` equal increments.
    pub fn purities(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.r_max];
        }
        let span = self.r_max - self.r_min;
        (0..self.steps)
            .map(|i| {
                if i + 1 == self.steps {
                    self.r_max
                } else {
                    self.r_min + span * i as f64 / (self.steps - 1) as f64
                }
            })
            .collect()
    }
}

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: i64,
    pub r: f64,
    pub r_lm: f64,
    pub r_opt: f64,
    pub rel_gap: f64,
    pub solver_gap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

fn sweep_point(n: i64, r: f64, options: SolverOptions) -> SweepRow {
    let opt = mixed_programmable_risk(n, r).map(|rep| rep.excess_risk);
    let lm = mixed_lm_risk(n, r, options);
    match (opt, lm) {
        (Ok(r_opt), Ok(lm)) => {
            let r_lm = lm.report.excess_risk;
            SweepRow {
                n,
                r,
                r_lm,
                r_opt,
                rel_gap: (r_lm - r_opt) / r_opt,
                solver_gap: lm.solver_gap(),
                failure: None,
            }
        }
        (opt, lm) => SweepRow {
            n,
            r,
            r_lm: lm.as_ref().map(|l| l.report.excess_risk).unwrap_or(f64::NAN),
            r_opt: *opt.as_ref().unwrap_or(&f64::NAN),
            rel_gap: f64::NAN,
            solver_gap: match &lm {
                Err(Error::Solver { gap, .. }) => *gap,
                _ => f64::NAN,
            },
            failure: Some(
                [opt.err(), lm.err()]
                    .into_iter()
                    .flatten()
                    .map(|e| e.to_string())
                    .collect::<Vec<_>>()
                    .join("; "),
            ),
        },
    }
}

/// Excess risks of the learning machine and of the programmable bound over a grid.
/// Rows are ordered by `n`, then `r`; failures are recorded per row.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepTable> {
    config.validate()?;
    let options = SolverOptions {
        tol: config.tol,
        max_iterations: config.max_iterations,
    };
    let grid: Vec<(i64, f64)> = (config.n_min..=config.n_max)
        .flat_map(|n| config.purities().into_iter().map(move |r| (n, r)))
        .collect();
    let rows = grid.par_iter().map(|&(n, r)| sweep_point(n, r, options)).collect();
    Ok(SweepTable { rows })
}

pub const SWEEP_HEADER: [&str; 6] = ["n", "r", "R_lm", "R_opt", "rel_gap", "solver_gap"];

impl SweepTable {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(SWEEP_HEADER)?;
        for row in &self.rows {
            csv.write_record([
                row.n.to_string(),
                full_precision(row.r),
                full_precision(row.r_lm),
                full_precision(row.r_opt),
                full_precision(row.rel_gap),
                full_precision(row.solver_gap),
            ])?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn failures(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.failure.is_some())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machines::{gamma_up_pure, lm_error, programmable_error_pure, verify_seed};

    fn h(twice: i64) -> HalfInteger {
        HalfInteger::from_twice(twice)
    }

    #[test]
    fn gamma_examples() {
        for n in 1..=5 {
            let mixed = gamma_up_mixed(BlockLabel::symmetric(n), SpectrumParams::new(n, 1.0).unwrap()).unwrap();
            assert!(mixed.max_abs_diff(&gamma_up_pure(n).unwrap()).unwrap() < 1e-15);
        }
        let params = SpectrumParams::new(4, 0.35).unwrap();
        for (label, _) in block_labels(params).unwrap() {
            assert!(gamma_up_mixed(label, params).unwrap().trace().abs() < 1e-14);
        }
        let gamma = gamma_up_mixed(BlockLabel::symmetric(1), SpectrumParams::new(1, 0.5).unwrap()).unwrap();
        let element = gamma.sector(h(0)).unwrap().matrix[(1, 0)].abs();
        assert!((element - 0.125 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn gamma_is_the_conditional_difference() {
        for n in 1..=4 {
            for r in [0.3, 0.7, 1.0] {
                let params = SpectrumParams::new(n, r).unwrap();
                for (label, _) in block_labels(params).unwrap() {
                    let reduced = average_state_diff_mixed(label, params).unwrap().partial_trace_up();
                    let gamma = gamma_up_mixed(label, params).unwrap();
                    assert!(reduced.max_abs_diff(&gamma).unwrap() < 1e-13, "n={n} r={r} {label:?}");
                }
            }
        }
    }

    #[test]
    fn programmable_risk_examples() {
        for n in 1..=6 {
            let report = mixed_programmable_risk(n, 1.0).unwrap();
            assert!((report.error_probability - programmable_error_pure(n).unwrap()).abs() < 1e-13);
        }
        // Large-n trend 1/2 - r/3 + 1/(3rn).
        let (n, r) = (60, 0.8);
        let report = mixed_programmable_risk(n, r).unwrap();
        let trend = 0.5 - r / 3.0 + 1.0 / (3.0 * r * n as f64);
        assert!((report.error_probability - trend).abs() < 0.1 / n as f64);
    }

    #[test]
    fn single_copy_lm_is_optimal() {
        for r in [0.1, 0.25, 0.5, 0.75, 1.0] {
            let lm = mixed_lm_risk(1, r, SolverOptions::default()).unwrap();
            let opt = mixed_programmable_risk(1, r).unwrap();
            assert!((lm.report.excess_risk - opt.excess_risk).abs() < 1e-8, "r={r}");
            assert!(verify_seed(&lm.seed));
        }
    }

    #[test]
    fn pure_limit_matches_closed_form() {
        for n in 1..=5 {
            let lm = mixed_lm_risk(n, 1.0, SolverOptions::default()).unwrap();
            assert!((lm.report.error_probability - lm_error(n).unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn seed_bound_sandwich() {
        for n in 2..=4 {
            for r in [0.3, 0.6, 0.9] {
                let opt = mixed_programmable_risk(n, r).unwrap().excess_risk;
                let lm = mixed_lm_risk(n, r, SolverOptions::default())
                    .unwrap()
                    .report
                    .excess_risk;
                let seed = covariant_seed_risk(n, r).unwrap().excess_risk;
                assert!(opt <= lm + 1e-8 && lm <= seed + 1e-8, "n={n} r={r}: {opt} {lm} {seed}");
            }
        }
    }

    #[test]
    fn asymptotic_scale_examples() {
        let unit = unbalanced_block_diff_asymptotic(30, 1.0, 0.0).unwrap();
        assert_eq!(unit.factor, 1.0);
        let scale = unbalanced_block_diff_asymptotic(50, 0.8, 0.0).unwrap();
        assert!((scale.factor - 0.795).abs() < 1e-15);
        assert!(scale.expansion_valid);
        assert!((scale.exact_ratio - scale.factor).abs() < 1e-6);
        for delta in [1.0, 2.0] {
            let s = unbalanced_block_diff_asymptotic(50, 0.8, delta).unwrap();
            assert_eq!(s.factor, scale.factor);
        }
        assert!(!unbalanced_block_diff_asymptotic(2, 0.5, 0.0).unwrap().expansion_valid);
    }

    #[test]
    fn sweep_grid_and_csv() {
        let config = SweepConfig {
            n_min: 1,
            n_max: 2,
            r_min: 0.5,
            r_max: 1.0,
            steps: 3,
            tol: 1e-8,
            max_iterations: 100_000,
        };
        assert_eq!(config.purities(), vec![0.5, 0.75, 1.0]);
        let table = run_sweep(&config).unwrap();
        assert_eq!(table.rows.len(), 6);
        assert_eq!(table.failures().count(), 0);
        for row in &table.rows {
            assert!(row.r_lm >= row.r_opt - 1e-7);
            if row.n == 1 {
                assert!(row.rel_gap.abs() <= 1e-6);
            }
        }
        let mut out = Vec::new();
        table.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("n,r,R_lm,R_opt,rel_gap,solver_gap\n"));
        assert_eq!(text.lines().count(), 7);
        let bad = SweepConfig { r_min: 0.0, ..config };
        assert!(run_sweep(&bad).is_err());
    }
}
