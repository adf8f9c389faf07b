//! Named invariant checks grouped by module, reported as JSON.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::blocks::{
    average_state_diff_mixed, average_state_diff_pure, block_weights, jz_expectation, BlockLabel, SpectrumParams,
};
use crate::error::{domain, Result};
use crate::machines::{
    ed_bias_n1_optimal, ed_error_continuous, ed_error_n1_optimal, gamma_up_pure, lm_bias, lm_error, lm_error_from_bias,
    lm_error_from_projections, lm_seed, programmable_error_pure, programmable_error_unbalanced, reversed_lm_error,
};
use crate::mixed::{mixed_lm_risk, mixed_programmable_risk};
use crate::oracle::estimate::{ed_error_finite, EstimationPovm};
use crate::oracle::ppt::ppt_check;
use crate::oracle::sampling::{simulate_lm, Discretization, RandomSource};
use crate::oracle::states::{
    build_average_states, gamma_dense, gamma_from_blocks, helstrom, lm_povm_element, povm_error, pure_seed_operator,
    seed_operator, state_diff_from_blocks,
};
use crate::sdp::{SolverOptions, DEFAULT_MAX_ITERATIONS};
use crate::su2::{clebsch_gordan, multiplicity, recoupling_overlap, spins_of, wigner_6j, Branch, HalfInteger};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Su2,
    Blocks,
    Machines,
    Mixed,
    Oracle,
    All,
}

impl Suite {
    pub const MODULES: [Suite; 5] = [Suite::Su2, Suite::Blocks, Suite::Machines, Suite::Mixed, Suite::Oracle];

    fn name(self) -> &'static str {
        match self {
            Suite::Su2 => "su2",
            Suite::Blocks => "blocks",
            Suite::Machines => "machines",
            Suite::Mixed => "mixed",
            Suite::Oracle => "oracle",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::MODULES
            .into_iter()
            .chain([Suite::All])
            .find(|suite| suite.name() == s)
            .map_or_else(|| domain(format!("unknown suite {s:?}")), Ok)
    }
}

/// How `got` is compared with `expected`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `|got - expected| <= tolerance`
    Absolute,
    /// `|got - expected| <= tolerance |expected|`
    Relative,
    /// `got <= expected + tolerance`
    AtMost,
    /// `got >= expected - tolerance`
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub id: String,
    pub suite: Suite,
    /// The property under test.
    pub anchor: String,
    pub comparison: Comparison,
    pub expected: f64,
    pub got: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(
        suite: Suite,
        id: &str,
        anchor: &str,
        comparison: Comparison,
        expected: f64,
        got: f64,
        tolerance: f64,
    ) -> Self {
        let pass = match comparison {
            Comparison::Absolute => (got - expected).abs() <= tolerance,
            Comparison::Relative => (got - expected).abs() <= tolerance * expected.abs(),
            Comparison::AtMost => got <= expected + tolerance,
            Comparison::AtLeast => got >= expected - tolerance,
        };
        Self {
            id: id.to_string(),
            suite,
            anchor: anchor.to_string(),
            comparison,
            expected,
            got,
            tolerance,
            pass,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub seed: u64,
    /// SDP duality-gap tolerance.
    pub tol: f64,
    pub trials: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 7,
            tol: crate::sdp::DEFAULT_TOL,
            trials: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub options: VerifyOptions,
    pub passed: usize,
    pub failed: usize,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.failed == 0
    }
}

/// Runs one suite, or every suite for [`Suite::All`].
pub fn run(suite: Suite, options: VerifyOptions) -> Result<VerifyReport> {
    if options.tol.is_nan() || options.tol <= 0.0 {
        return domain("tolerance must be positive");
    }
    if options.trials == 0 {
        return domain("at least one Monte Carlo trial is required");
    }
    let suites: Vec<Suite> = if suite == Suite::All {
        Suite::MODULES.to_vec()
    } else {
        vec![suite]
    };
    let mut checks = Vec::new();
    for s in suites {
        checks.extend(match s {
            Suite::Su2 => su2_checks()?,
            Suite::Blocks => block_checks()?,
            Suite::Machines => machine_checks()?,
            Suite::Mixed => mixed_checks(options)?,
            Suite::Oracle => oracle_checks(options)?,
            Suite::All => unreachable!("expanded above"),
        });
    }
    let passed = checks.iter().filter(|c| c.pass).count();
    Ok(VerifyReport {
        suite,
        options,
        passed,
        failed: checks.len() - passed,
        checks,
    })
}

fn max_over<I: IntoIterator<Item = Result<f64>>>(values: I) -> Result<f64> {
    values.into_iter().try_fold(0.0f64, |acc, v| Ok(acc.max(v?)))
}

fn su2_checks() -> Result<Vec<Check>> {
    use Comparison::*;
    let s = Suite::Su2;
    let mut out = Vec::new();

    let mut worst = 0.0f64;
    for j1 in spins_of(6).chain(spins_of(5)) {
        for j2 in spins_of(4).chain(spins_of(3)) {
            for big in HalfInteger::range_inclusive((j1 - j2).abs(), j1 + j2) {
                for big2 in HalfInteger::range_inclusive((j1 - j2).abs(), j1 + j2) {
                    let m = HalfInteger::from_twice(big.twice().min(big2.twice()) % 2);
                    let mut sum = 0.0;
                    for m1 in j1.projections() {
                        let m2 = m - m1;
                        if m2.abs() <= j2 {
                            sum += clebsch_gordan(j1, m1, j2, m2, big, m)? * clebsch_gordan(j1, m1, j2, m2, big2, m)?;
                        }
                    }
                    worst = worst.max((sum - if big == big2 { 1.0 } else { 0.0 }).abs());
                }
            }
        }
    }
    out.push(Check::new(
        s,
        "cg_orthonormality",
        "Clebsch–Gordan rows are orthonormal",
        Absolute,
        0.0,
        worst,
        1e-12,
    ));

    let mut worst = 0.0f64;
    let h = HalfInteger::from_twice;
    for (a, b, c, d) in [
        (h(2), h(3), h(1), h(2)),
        (h(4), h(4), h(2), h(2)),
        (h(3), h(5), h(3), h(1)),
        (h(6), h(6), h(6), h(6)),
    ] {
        let xs: Vec<HalfInteger> = HalfInteger::range_inclusive((a - b).abs(), a + b).collect();
        for f in HalfInteger::range_inclusive((a - d).abs().max((b - c).abs()), (a + d).min(b + c)) {
            for g in HalfInteger::range_inclusive((a - d).abs().max((b - c).abs()), (a + d).min(b + c)) {
                let mut sum = 0.0;
                for &x in &xs {
                    sum += x.dimension() as f64
                        * f.dimension() as f64
                        * wigner_6j(a, b, x, c, d, f)?
                        * wigner_6j(a, b, x, c, d, g)?;
                }
                worst = worst.max((sum - if f == g { 1.0 } else { 0.0 }).abs());
            }
        }
    }
    out.push(Check::new(
        s,
        "sixj_orthogonality",
        "6j symbols are orthogonal in their third argument",
        Absolute,
        0.0,
        worst,
        1e-12,
    ));

    let mut worst = 0.0f64;
    for n in 1..=40i64 {
        for total in HalfInteger::range_inclusive(HalfInteger::HALF, HalfInteger::half_of(2 * n + 1)) {
            let mut sum = recoupling_overlap(n, total - HalfInteger::HALF, Branch::Plus)?.powi(2);
            let above = total + HalfInteger::HALF;
            if above.twice() <= 2 * n {
                sum += recoupling_overlap(n, above, Branch::Minus)?.powi(2);
            }
            worst = worst.max((sum - 1.0).abs());
        }
    }
    out.push(Check::new(
        s,
        "recoupling_unitarity_fixed_total",
        "the two coupling orders are related by a unitary at fixed total spin",
        Absolute,
        0.0,
        worst,
        1e-13,
    ));

    let worst = max_over((0..=24i64).map(|n| {
        let total: u128 = spins_of(n)
            .map(|j| multiplicity(n, j).map(|m| m * j.dimension() as u128))
            .sum::<Result<u128>>()?;
        Ok((total as f64 - 2f64.powi(n as i32)).abs())
    }))?;
    out.push(Check::new(
        s,
        "multiplicities_fill_space",
        "Σ_j ν_j (2j+1) = 2^n",
        Absolute,
        0.0,
        worst,
        0.0,
    ));
    Ok(out)
}

fn block_checks() -> Result<Vec<Check>> {
    use Comparison::*;
    let s = Suite::Blocks;
    let mut out = Vec::new();

    let mut worst = 0.0f64;
    for n in [1, 2, 5, 20, 60] {
        for r in [0.05, 0.3, 0.8, 1.0] {
            let total: f64 = block_weights(SpectrumParams::new(n, r)?)?.iter().map(|w| w.p).sum();
            worst = worst.max((total - 1.0).abs());
        }
    }
    out.push(Check::new(
        s,
        "block_probabilities_normalized",
        "Σ_j p_j = 1",
        Absolute,
        0.0,
        worst,
        1e-12,
    ));

    let mut worst = 0.0f64;
    for n in 1..=6i64 {
        for r in [0.3, 0.7] {
            let params = SpectrumParams::new(n, r)?;
            for w in block_weights(params)? {
                if w.j.twice() == 0 {
                    continue;
                }
                let label = BlockLabel::new(n, w.j, w.j)?;
                let mixed = average_state_diff_mixed(label, params)?;
                let pure = average_state_diff_pure(w.j.twice())?;
                let factor = r * jz_expectation(w.j, r)? / w.j.value();
                worst = worst.max(mixed.max_abs_diff(&pure.scaled(factor))?);
            }
        }
    }
    out.push(Check::new(
        s,
        "equal_spin_scaling",
        "equal-spin mixed blocks are scaled pure differences",
        Absolute,
        0.0,
        worst,
        1e-12,
    ));

    let worst = max_over((1..=40i64).map(|n| {
        let norm = gamma_up_pure(n)?.trace_norm()?;
        Ok((norm - n as f64 / (3.0 * (n as f64 + 1.0))).abs())
    }))?;
    out.push(Check::new(
        s,
        "gamma_trace_norm",
        "‖Γ↑‖₁ = n/(3(n+1))",
        Absolute,
        0.0,
        worst,
        1e-10,
    ));

    let worst = max_over((1..=8i64).map(|n| {
        let params = SpectrumParams::new(n, 0.6)?;
        max_over(
            crate::blocks::block_labels(params)?
                .into_iter()
                .map(|(label, _)| Ok(crate::mixed::gamma_up_mixed(label, params)?.trace().abs())),
        )
    }))?;
    out.push(Check::new(
        s,
        "gamma_traceless",
        "tr Γ↑_ξ = 0",
        Absolute,
        0.0,
        worst,
        1e-13,
    ));

    let worst = max_over((1..=6i64).map(|n| {
        let params = SpectrumParams::new(n, 0.45)?;
        max_over(crate::blocks::block_labels(params)?.into_iter().map(|(label, _)| {
            let op = average_state_diff_mixed(label, params)?;
            Ok((op.trace_norm()? - op.to_block_operator().trace_norm()?).abs())
        }))
    }))?;
    out.push(Check::new(
        s,
        "invariant_form_trace_norm",
        "trace norms agree between the invariant and sector forms",
        Absolute,
        0.0,
        worst,
        1e-12,
    ));
    Ok(out)
}

fn machine_checks() -> Result<Vec<Check>> {
    use Comparison::*;
    let s = Suite::Machines;
    let sqrt3 = 3f64.sqrt();
    let sqrt2 = 2f64.sqrt();
    let mut out = Vec::new();

    let worst = max_over((1..=20).map(|n| Ok((lm_error(n)? - programmable_error_pure(n)?).abs())))?;
    out.push(Check::new(
        s,
        "lm_equals_opt_n1_20",
        "the learning machine is optimal",
        Absolute,
        0.0,
        worst,
        1e-12,
    ));

    let worst = max_over((1..=60).map(|n| Ok((lm_error_from_bias(n)? - lm_error_from_projections(n)?).abs())))?;
    out.push(Check::new(
        s,
        "seed_bias_equals_projection_sum",
        "two evaluations of the learning-machine error agree",
        Absolute,
        0.0,
        worst,
        1e-12,
    ));

    out.push(Check::new(
        s,
        "opt_error_n1",
        "P_e(1) = (6-√3)/12",
        Absolute,
        (6.0 - sqrt3) / 12.0,
        programmable_error_pure(1)?,
        1e-12,
    ));
    out.push(Check::new(
        s,
        "lm_excess_n1",
        "R_LM(1) = (4-√3)/12",
        Absolute,
        (4.0 - sqrt3) / 12.0,
        lm_error(1)? - 1.0 / 6.0,
        1e-12,
    ));
    out.push(Check::new(
        s,
        "ed_excess_n1",
        "R_ED(1) = (4-√2)/12",
        Absolute,
        (4.0 - sqrt2) / 12.0,
        ed_error_n1_optimal() - 1.0 / 6.0,
        1e-12,
    ));
    out.push(Check::new(
        s,
        "lm_bias_n1",
        "Δ_LM(1) = 1/√3",
        Absolute,
        1.0 / sqrt3,
        lm_bias(1)?,
        1e-12,
    ));
    out.push(Check::new(
        s,
        "ed_bias_bound_n1",
        "Δ_ED(1) = √2/3",
        Absolute,
        sqrt2 / 3.0,
        ed_bias_n1_optimal(),
        1e-12,
    ));

    for n in [1, 10, 100] {
        let from_norm = 0.5 * (1.0 - gamma_up_pure(n)?.trace_norm()? / 2.0);
        out.push(Check::new(
            s,
            &format!("reversed_n{n}"),
            "measuring the data qubit first leaves the Helstrom error of Γ↑",
            Absolute,
            from_norm,
            reversed_lm_error(n)?,
            1e-12,
        ));
    }
    out.push(Check::new(
        s,
        "reversed_limit",
        "reversed error tends to 5/12",
        Absolute,
        5.0 / 12.0,
        reversed_lm_error(1 << 40)?,
        1e-12,
    ));

    let worst =
        max_over((1..=10).map(|n| Ok((programmable_error_unbalanced(n, n)? - programmable_error_pure(n)?).abs())))?;
    out.push(Check::new(
        s,
        "unbalanced_reduces_to_balanced",
        "n_A = n_C recovers the balanced error",
        Absolute,
        0.0,
        worst,
        1e-12,
    ));
    let (na, nc) = (400.0, 300.0);
    out.push(Check::new(
        s,
        "unbalanced_asymptotic_400_300",
        "P ≈ 1/6 + (1/n_A + 1/n_C)/6",
        Absolute,
        1.0 / 6.0 + (1.0 / na + 1.0 / nc) / 6.0,
        programmable_error_unbalanced(400, 300)?,
        1e-4,
    ));

    let n = 1000;
    let opt = n as f64 * (programmable_error_pure(n)? - 1.0 / 6.0);
    let ed = n as f64 * (ed_error_continuous(n)? - 1.0 / 6.0);
    out.push(Check::new(
        s,
        "opt_excess_scaling_n1000",
        "n R_opt → 1/3",
        Relative,
        1.0 / 3.0,
        opt,
        0.02,
    ));
    out.push(Check::new(
        s,
        "ed_excess_scaling_n1000",
        "n R_ED → 2/3",
        Relative,
        2.0 / 3.0,
        ed,
        0.02,
    ));
    out.push(Check::new(
        s,
        "ed_to_lm_excess_ratio_n1000",
        "R_ED / R_LM → 2",
        Absolute,
        2.0,
        ed / opt,
        0.05,
    ));
    Ok(out)
}

/// Grid used by the mixed-state checks.
pub fn purity_grid() -> Vec<f64> {
    (1..=10).map(|k| k as f64 / 10.0).collect()
}

fn mixed_checks(options: VerifyOptions) -> Result<Vec<Check>> {
    use Comparison::*;
    let s = Suite::Mixed;
    let solver = SolverOptions {
        tol: options.tol,
        max_iterations: DEFAULT_MAX_ITERATIONS,
    };
    let mut out = Vec::new();
    let grid = purity_grid();

    let worst = max_over(grid.iter().map(|&r| {
        let lm = mixed_lm_risk(1, r, solver)?.report.excess_risk;
        Ok((lm - mixed_programmable_risk(1, r)?.excess_risk).abs())
    }))?;
    out.push(Check::new(
        s,
        "n1_lm_equals_opt",
        "one copy: the learning machine is optimal at every purity",
        Absolute,
        0.0,
        worst,
        1e-6,
    ));

    let mut gaps = Vec::new();
    let mut dominance = f64::INFINITY;
    for &r in &grid {
        let opt = mixed_programmable_risk(2, r)?.excess_risk;
        let lm = mixed_lm_risk(2, r, solver)?.report.excess_risk;
        gaps.push((lm - opt) / opt);
        dominance = dominance.min(lm - opt);
    }
    let worst = gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    out.push(Check::new(
        s,
        "n2_worst_gap_le_0.5pct",
        "two copies: relative excess over the optimum",
        AtMost,
        0.005,
        worst,
        0.0,
    ));
    out.push(Check::new(
        s,
        "n2_gap_positive",
        "two copies: the learning machine is not optimal",
        AtLeast,
        0.0,
        worst,
        0.0,
    ));
    out.push(Check::new(
        s,
        "n2_lm_dominates_opt",
        "R_LM ≥ R_opt",
        AtLeast,
        0.0,
        dominance,
        1e-7,
    ));

    let mut margin = f64::INFINITY;
    for &r in &grid {
        let risks: Vec<f64> = (1..=5)
            .map(|n| Ok(mixed_programmable_risk(n, r)?.excess_risk))
            .collect::<Result<_>>()?;
        for w in risks.windows(2) {
            margin = margin.min(w[0] - w[1]);
        }
    }
    out.push(Check::new(
        s,
        "opt_decreasing_in_n",
        "R_opt(n, r) strictly decreases for n = 1..5",
        AtLeast,
        0.0,
        margin,
        0.0,
    ));

    // R_LM ≥ R_opt, so n r R_opt already bounds the asymptotic quantity from below.
    for n in [20, 40, 80] {
        let r = 0.8;
        let lower = n as f64 * r * mixed_programmable_risk(n, r)?.excess_risk;
        out.push(Check::new(
            s,
            &format!("asymptotic_nrR_n{n}"),
            "n r R_LM → 1/3 (lower bound from R_opt)",
            Relative,
            1.0 / 3.0,
            lower,
            0.05,
        ));
    }
    Ok(out)
}

fn oracle_checks(options: VerifyOptions) -> Result<Vec<Check>> {
    use Comparison::*;
    let s = Suite::Oracle;
    let mut out = Vec::new();
    let solver = SolverOptions {
        tol: options.tol,
        max_iterations: DEFAULT_MAX_ITERATIONS,
    };

    let mut worst_opt = 0.0f64;
    let mut worst_lm = 0.0f64;
    for n in 1..=3usize {
        let (s0, s1) = build_average_states(n, n, 1.0)?;
        worst_opt = worst_opt.max((helstrom(&s0, &s1, 0.5)? - programmable_error_pure(n as i64)?).abs());
        let e0 = lm_povm_element(n, &pure_seed_operator(n)?)?;
        worst_lm = worst_lm.max((povm_error(&s0, &s1, &e0) - lm_error(n as i64)?).abs());
    }
    out.push(Check::new(
        s,
        "dense_opt_pure_n1_3",
        "dense Helstrom error equals the closed form",
        Absolute,
        0.0,
        worst_opt,
        1e-9,
    ));
    out.push(Check::new(
        s,
        "dense_lm_pure_n1_3",
        "dense learning-machine POVM reproduces its error",
        Absolute,
        0.0,
        worst_lm,
        1e-9,
    ));

    let mut worst_opt = 0.0f64;
    let mut worst_lm = 0.0f64;
    let mut worst_gamma = 0.0f64;
    let mut worst_diff = 0.0f64;
    for n in 1..=2usize {
        for r in [0.3, 0.7] {
            let (s0, s1) = build_average_states(n, n, r)?;
            worst_opt = worst_opt
                .max((helstrom(&s0, &s1, 0.5)? - mixed_programmable_risk(n as i64, r)?.error_probability).abs());
            let lm = mixed_lm_risk(n as i64, r, solver)?;
            let e0 = lm_povm_element(n, &seed_operator(n, &lm.seed)?)?;
            worst_lm = worst_lm.max((povm_error(&s0, &s1, &e0) - lm.report.error_probability).abs());
            worst_diff = worst_diff.max((state_diff_from_blocks(n, r)? - (&s0.matrix - &s1.matrix)).amax());
        }
    }
    for n in 1..=3usize {
        for r in [0.3, 0.7, 1.0] {
            let (s0, s1) = build_average_states(n, n, r)?;
            let gamma = gamma_dense(&s0, &s1, n)?;
            worst_gamma = worst_gamma.max((gamma_from_blocks(n, r)? - &gamma.matrix).amax());
        }
    }
    out.push(Check::new(
        s,
        "dense_opt_mixed_n1_2",
        "dense Helstrom error equals the block trace-norm sum",
        Absolute,
        0.0,
        worst_opt,
        1e-9,
    ));
    out.push(Check::new(
        s,
        "dense_lm_mixed_n1_2",
        "SDP seed embedded densely reproduces its error",
        Absolute,
        0.0,
        worst_lm,
        1e-9,
    ));
    out.push(Check::new(
        s,
        "dense_gamma_mixed_n1_3",
        "Γ↑_ξ blocks rebuild tr_B([↑](σ_0-σ_1))",
        Absolute,
        0.0,
        worst_gamma,
        1e-10,
    ));
    out.push(Check::new(
        s,
        "dense_state_diff_mixed_n1_2",
        "invariant blocks rebuild σ_0 - σ_1",
        Absolute,
        0.0,
        worst_diff,
        1e-10,
    ));

    for n in 1..=3 {
        let report = ppt_check(n)?;
        out.push(Check::new(
            s,
            &format!("ppt_n{n}"),
            "optimal learning-machine POVM has positive partial transpose",
            AtLeast,
            0.0,
            report.min_eigenvalue,
            1e-10,
        ));
    }

    let result = simulate_lm(
        &lm_seed(1)?,
        Discretization::MonteCarlo { trials: options.trials },
        RandomSource::new(options.seed),
    )?;
    out.push(Check::new(
        s,
        "monte_carlo_lm_n1",
        "sampled learning machine within 3 standard errors",
        Absolute,
        programmable_error_pure(1)?,
        result.error_rate,
        3.0 * result.std_error,
    ));
    let worst = max_over((1..=3).map(|n| {
        let q = simulate_lm(
            &lm_seed(n)?,
            Discretization::Quadrature {
                order: 2 * n as usize + 4,
            },
            RandomSource::new(options.seed),
        )?;
        Ok((q.error_rate - programmable_error_pure(n)?).abs())
    }))?;
    out.push(Check::new(
        s,
        "quadrature_lm_n1_3",
        "integrated learning machine equals the closed form",
        Absolute,
        0.0,
        worst,
        1e-10,
    ));

    let z = EstimationPovm::coherent(1, &[(1.0, [0.0, 0.0, 1.0]), (1.0, [0.0, 0.0, -1.0])])?;
    let x = EstimationPovm::coherent(1, &[(1.0, [1.0, 0.0, 0.0]), (1.0, [-1.0, 0.0, 0.0])])?;
    let ed = ed_error_finite(&z, &x, 1)?;
    out.push(Check::new(
        s,
        "ed_orthogonal_axes_n1",
        "estimates along z and x reach Δ = √2/3",
        Absolute,
        2f64.sqrt() / 3.0,
        ed.delta,
        1e-12,
    ));
    Ok(out)
}
