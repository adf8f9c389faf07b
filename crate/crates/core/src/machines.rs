//! Closed-form error probabilities of the classification machines.
//!
//! Every machine sees `n` training copies of each of two unknown qubit states
//! (subsystems `A` and `C`) and one data qubit `B`. Errors are averaged over
//! Haar-random pairs of states; the excess risk subtracts the error of
//! discriminating the same pair with the states known, [`baseline_error`].

use serde::Serialize;

use crate::blocks::{coupled_jz, BlockLabel, BlockOperator, Subsystem};
use crate::error::{domain, Error, Result};
use crate::su2::{cg, recoupling_coefficient, CouplingOrder, CouplingScheme, HalfInteger};

/// Tolerance at which the two learning-machine code paths must agree.
pub const LM_PATH_AGREEMENT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MachineKind {
    /// Optimal programmable discriminator.
    Opt,
    /// Learning machine with the covariant seed.
    Lm,
    /// Estimate-and-discriminate with the continuous covariant estimator.
    EdContinuous,
    /// Estimate-and-discriminate with the best finite measurement at `n = 1`.
    EdN1,
    /// Learning machine that measures the data qubit first.
    Reversed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Sdp,
    Oracle,
}

/// Error probability and excess risk of one machine at one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MachineReport {
    pub machine: MachineKind,
    pub n: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_a: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_c: Option<i64>,
    pub r: f64,
    pub error_probability: f64,
    pub excess_risk: f64,
    pub method: Method,
}

impl MachineReport {
    pub fn new(machine: MachineKind, n: i64, r: f64, error_probability: f64, method: Method) -> Self {
        Self {
            machine,
            n,
            n_a: None,
            n_c: None,
            r,
            error_probability,
            excess_risk: error_probability - baseline_error(r),
            method,
        }
    }
}

/// Average error of discriminating two Haar-random known states of purity `r`: `1/2 - r/3`.
pub fn baseline_error(r: f64) -> f64 {
    0.5 - r / 3.0
}

fn check_n(n: i64, min: i64) -> Result<()> {
    if n < min {
        return domain(format!("qubit count must be at least {min}, got {n}"));
    }
    Ok(())
}

/// Optimal programmable error with `n` pure copies per class:
/// `1/2 - Σ_{k=0}^{n} k √(d_n² - k²) / (d_n² d_{n+1})`.
pub fn programmable_error_pure(n: i64) -> Result<f64> {
    check_n(n, 0)?;
    let d = (n + 1) as f64;
    let sum: f64 = (0..=n).map(|k| k as f64 * (d * d - (k * k) as f64).sqrt()).sum();
    Ok(0.5 - sum / (d * d * (d + 1.0)))
}

/// Leading large-`n` behaviour `1/6 + 1/(3n)` of [`programmable_error_pure`].
pub fn programmable_error_asymptotic(n: i64) -> Result<f64> {
    check_n(n, 1)?;
    Ok(1.0 / 6.0 + 1.0 / (3.0 * n as f64))
}

/// Optimal programmable error with `n_a` copies of one state and `n_c` of the other.
pub fn programmable_error_unbalanced(n_a: i64, n_c: i64) -> Result<f64> {
    check_n(n_a, 0)?;
    check_n(n_c, 0)?;
    let (na, nc) = if n_a >= n_c { (n_a, n_c) } else { (n_c, n_a) };
    let (naf, ncf) = (na as f64, nc as f64);
    let d0 = (naf + 2.0) * (ncf + 1.0);
    let d1 = (naf + 1.0) * (ncf + 2.0);
    let mixing = 4.0 * d0 * d1 / ((d0 + d1) * (d0 + d1));
    let sum: f64 = (0..=nc)
        .map(|k| {
            let k = k as f64;
            let overlap = (naf - ncf + k + 1.0) * (k + 1.0) / ((naf + 1.0) * (ncf + 1.0));
            (naf - ncf + 2.0 * k + 2.0) * (1.0 - mixing * overlap).max(0.0).sqrt()
        })
        .sum();
    Ok(0.25 * (1.0 + d0 / d1 - (d0 + d1) / (d0 * d1) * sum))
}

/// Large-`n` behaviour `(1 + 1/n_A + 1/n_C)/6` of [`programmable_error_unbalanced`].
pub fn programmable_error_unbalanced_asymptotic(n_a: i64, n_c: i64) -> Result<f64> {
    check_n(n_a, 1)?;
    check_n(n_c, 1)?;
    Ok((1.0 + 1.0 / n_a as f64 + 1.0 / n_c as f64) / 6.0)
}

/// The `m = 0` seed state `Σ_j c_j |j, 0⟩` of a covariant learning measurement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedVector {
    pub n: i64,
    /// Coefficients for `j = 0, ..., n`.
    pub coefficients: Vec<f64>,
}

/// The optimal pure-state seed, `c_j = √(2j + 1)`.
pub fn lm_seed(n: i64) -> Result<SeedVector> {
    check_n(n, 1)?;
    Ok(SeedVector {
        n,
        coefficients: (0..=n).map(|j| ((2 * j + 1) as f64).sqrt()).collect(),
    })
}

/// Access to the completeness sums `Σ_m ⟨j,m|Ω_m|j,m⟩` of a seed.
pub trait SeedCompleteness {
    /// `(label, j, sum)` for every constrained pair.
    fn completeness_sums(&self) -> Vec<(BlockLabel, HalfInteger, f64)>;
}

impl SeedCompleteness for SeedVector {
    fn completeness_sums(&self) -> Vec<(BlockLabel, HalfInteger, f64)> {
        let label = BlockLabel::symmetric(self.n);
        self.coefficients
            .iter()
            .enumerate()
            .map(|(j, c)| (label, HalfInteger::from_int(j as i64), c * c))
            .collect()
    }
}

/// Tolerance of the seed completeness check.
pub const SEED_COMPLETENESS_TOL: f64 = 1e-10;

/// Largest deviation of the completeness sums from `2j + 1`.
pub fn seed_residual(seed: &dyn SeedCompleteness) -> f64 {
    seed.completeness_sums()
        .iter()
        .map(|(_, j, sum)| (sum - j.dimension() as f64).abs())
        .fold(0.0, f64::max)
}

/// Whether the seed generates a resolution of the identity.
pub fn verify_seed(seed: &dyn SeedCompleteness) -> bool {
    let sums = seed.completeness_sums();
    !sums.is_empty() && seed_residual(seed) <= SEED_COMPLETENESS_TOL
}

/// `Γ↑ = (J_z^A - J_z^C) / (d_n² d_{n+1})` on the symmetric block.
pub fn gamma_up_pure(n: i64) -> Result<BlockOperator> {
    check_n(n, 1)?;
    let label = BlockLabel::symmetric(n);
    let d = (n + 1) as f64;
    coupled_jz(label, Subsystem::A)
        .add_scaled(-1.0, &coupled_jz(label, Subsystem::C))
        .map(|op| op.scaled(1.0 / (d * d * (d + 1.0))))
}

/// `⟨φ|Γ_0|φ⟩` for an `m = 0` seed state on the symmetric block.
pub fn seed_bias(gamma: &BlockOperator, seed: &SeedVector) -> Result<f64> {
    let sector = gamma
        .sector(HalfInteger::ZERO)
        .ok_or_else(|| Error::Integrity("Γ↑ has no m = 0 sector".into()))?;
    if sector.basis.len() != seed.coefficients.len() {
        return Err(Error::Integrity("seed and Γ↑ have different sizes".into()));
    }
    let mut value = 0.0;
    for (i, ci) in seed.coefficients.iter().enumerate() {
        for (k, ck) in seed.coefficients.iter().enumerate() {
            value += ci * sector.matrix[(i, k)] * ck;
        }
    }
    Ok(value)
}

/// Coefficients of `P_sym(BC) |φ⟩|↑⟩` along `|J = j - 1/2, 1/2⟩`, `j = 1, ..., n + 1`:
/// `√j (√(d_n + j) - √(d_n - j)) / √(2 d_n)`.
pub fn projection_coefficients(n: i64) -> Result<Vec<f64>> {
    check_n(n, 1)?;
    let d = (n + 1) as f64;
    Ok((1..=n + 1)
        .map(|j| {
            let j = j as f64;
            j.sqrt() * ((d + j).sqrt() - (d - j).sqrt()) / (2.0 * d).sqrt()
        })
        .collect())
}

/// The same projection computed from Clebsch–Gordan coefficients and 6j recoupling.
pub fn projection_coefficients_recoupled(n: i64) -> Result<Vec<f64>> {
    check_n(n, 1)?;
    let half = HalfInteger::HALF;
    let jn = HalfInteger::half_of(n);
    let j_cb = jn + half;
    let to = CouplingScheme::new(CouplingOrder::DataWithC, j_cb, jn, half)?;
    (1..=n + 1)
        .map(|k| {
            let total = HalfInteger::from_twice(2 * k - 1);
            let mut amplitude = 0.0;
            for j in [total - half, total + half] {
                if j.twice() > 2 * n {
                    continue;
                }
                let weight = (j.dimension() as f64).sqrt() * cg(j, HalfInteger::ZERO, half, half, total, half);
                let from = CouplingScheme::new(CouplingOrder::TrainingFirst, j, jn, jn)?;
                amplitude += weight * recoupling_coefficient(jn, jn, half, from, to, total)?;
            }
            Ok(amplitude)
        })
        .collect()
}

/// Learning-machine error with the covariant seed, computed from
/// `Δ = 2⟨φ|Γ↑|φ⟩` and cross-checked against the projection-norm formula.
pub fn lm_error(n: i64) -> Result<f64> {
    let via_bias = lm_error_from_bias(n)?;
    let via_projection = lm_error_from_projections(n)?;
    if (via_bias - via_projection).abs() > LM_PATH_AGREEMENT_TOL {
        return Err(Error::Integrity(format!(
            "learning-machine paths disagree at n = {n}: {via_bias} vs {via_projection}"
        )));
    }
    Ok(via_bias)
}

/// `(1 - Δ/2)/2` with `Δ = 2⟨φ|Γ↑|φ⟩`.
pub fn lm_error_from_bias(n: i64) -> Result<f64> {
    let delta = lm_bias(n)?;
    Ok((1.0 - delta / 2.0) / 2.0)
}

/// `Δ^LM = 2⟨φ|Γ↑|φ⟩` at the optimal seed.
pub fn lm_bias(n: i64) -> Result<f64> {
    Ok(2.0 * seed_bias(&gamma_up_pure(n)?, &lm_seed(n)?)?)
}

/// `2 ‖P_sym(BC)|φ⟩|↑⟩‖² / (2 d_n d_{n+1})`; the two spin-down/up terms are equal by symmetry.
pub fn lm_error_from_projections(n: i64) -> Result<f64> {
    let norm: f64 = projection_coefficients(n)?.iter().map(|c| c * c).sum();
    let d = (n + 1) as f64;
    Ok(2.0 * norm / (2.0 * d * (d + 1.0)))
}

/// `n / (n + 2)`: shrinking of the estimated Bloch vector after `n` copies.
pub fn shrink_factor(n: i64) -> Result<f64> {
    check_n(n, 1)?;
    Ok(n as f64 / (n + 2) as f64)
}

/// `Δ^{E&D} = 4n / (3(n + 2))` of the continuous estimate-and-discriminate machine.
pub fn ed_bias_continuous(n: i64) -> Result<f64> {
    Ok(4.0 / 3.0 * shrink_factor(n)?)
}

pub fn ed_error_continuous(n: i64) -> Result<f64> {
    Ok((1.0 - ed_bias_continuous(n)? / 2.0) / 2.0)
}

/// `Σ_{α,i} p_α p'_i |r_0^α - r_1^i|` over weighted estimate directions, each shrunk by `eta`.
pub fn ed_bias_from_directions(first: &[(f64, [f64; 3])], second: &[(f64, [f64; 3])], eta: f64) -> f64 {
    let mut delta = 0.0;
    for (p, u) in first {
        for (q, v) in second {
            let dist = (0..3).map(|k| (eta * (u[k] - v[k])).powi(2)).sum::<f64>().sqrt();
            delta += p * q * dist;
        }
    }
    delta
}

/// `Δ = √2/3` at `n = 1` from measuring one training copy along `z` and the other along `x`.
pub fn ed_bias_n1_optimal() -> f64 {
    let z = [(0.5, [0.0, 0.0, 1.0]), (0.5, [0.0, 0.0, -1.0])];
    let x = [(0.5, [1.0, 0.0, 0.0]), (0.5, [-1.0, 0.0, 0.0])];
    ed_bias_from_directions(&z, &x, 1.0 / 3.0)
}

pub fn ed_error_n1_optimal() -> f64 {
    (1.0 - ed_bias_n1_optimal() / 2.0) / 2.0
}

/// Error when the data qubit is measured first: `(1 - n/(6(n+1)))/2`.
pub fn reversed_lm_error(n: i64) -> Result<f64> {
    check_n(n, 1)?;
    let n = n as f64;
    Ok(0.5 * (1.0 - n / (6.0 * (n + 1.0))))
}

/// `log₂(2(n+1)(2n+1))`, a bound on the classical memory of the learning machine.
pub fn memory_bound_bits(n: i64) -> Result<f64> {
    check_n(n, 1)?;
    let n = n as f64;
    Ok((2.0 * (n + 1.0) * (2.0 * n + 1.0)).log2())
}

/// Pure-state closed-form report for `machine` at `n`.
pub fn closed_form_report(machine: MachineKind, n: i64) -> Result<MachineReport> {
    let error = match machine {
        MachineKind::Opt => programmable_error_pure(n)?,
        MachineKind::Lm => lm_error(n)?,
        MachineKind::EdContinuous => ed_error_continuous(n)?,
        MachineKind::EdN1 => {
            if n != 1 {
                return domain(format!(
                    "the finite estimate-and-discriminate machine is defined for n = 1, got {n}"
                ));
            }
            ed_error_n1_optimal()
        }
        MachineKind::Reversed => reversed_lm_error(n)?,
    };
    Ok(MachineReport::new(machine, n, 1.0, error, Method::ClosedForm))
}

/// Closed-form report for unbalanced training sets (programmable machine only).
pub fn unbalanced_report(n_a: i64, n_c: i64) -> Result<MachineReport> {
    let error = programmable_error_unbalanced(n_a, n_c)?;
    let mut report = MachineReport::new(MachineKind::Opt, n_a.min(n_c), 1.0, error, Method::ClosedForm);
    report.n_a = Some(n_a);
    report.n_c = Some(n_c);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::BlockSpace;

    const SQRT3: f64 = 1.732_050_807_568_877_2;

    #[test]
    fn baseline_examples() {
        assert!((baseline_error(1.0) - 1.0 / 6.0).abs() < 1e-16);
        assert!((baseline_error(0.5) - 1.0 / 3.0).abs() < 1e-16);
        assert!((baseline_error(1e-12) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn programmable_examples() {
        assert_eq!(programmable_error_pure(0).unwrap(), 0.5);
        assert!((programmable_error_pure(1).unwrap() - (6.0 - SQRT3) / 12.0).abs() < 1e-15);
        let n2 = 0.5 - (8.0f64.sqrt() + 2.0 * 5.0f64.sqrt()) / 36.0;
        assert!((programmable_error_pure(2).unwrap() - n2).abs() < 1e-15);
        assert!((programmable_error_pure(2).unwrap() - 0.297207).abs() < 1e-6);
        assert!(programmable_error_pure(-1).is_err());
        assert!((programmable_error_asymptotic(100).unwrap() - 0.17).abs() < 1e-15);
    }

    #[test]
    fn programmable_error_decreases_towards_one_sixth() {
        let mut previous = 0.5;
        for n in 1..=200 {
            let p = programmable_error_pure(n).unwrap();
            assert!(p < previous && p > 1.0 / 6.0);
            previous = p;
        }
        let mut scaled = Vec::new();
        for n in [100, 1000, 10000] {
            let p = programmable_error_pure(n).unwrap();
            scaled.push((p - programmable_error_asymptotic(n).unwrap()).abs() * n as f64);
        }
        assert!(scaled[0] > scaled[1] && scaled[1] > scaled[2]);
    }

    #[test]
    fn unbalanced_specializes_to_balanced() {
        for n in 0..=10 {
            let diff = programmable_error_unbalanced(n, n).unwrap() - programmable_error_pure(n).unwrap();
            assert!(diff.abs() < 1e-12, "n={n} diff={diff}");
        }
        let p = programmable_error_unbalanced(1, 0).unwrap();
        assert!((p - 0.375).abs() < 1e-12);
        assert_eq!(
            programmable_error_unbalanced(3, 1).unwrap(),
            programmable_error_unbalanced(1, 3).unwrap()
        );
        let residual = programmable_error_unbalanced(400, 300).unwrap()
            - programmable_error_unbalanced_asymptotic(400, 300).unwrap();
        assert!(residual.abs() <= 1e-4);
    }

    #[test]
    fn seed_examples() {
        let seed = lm_seed(1).unwrap();
        assert_eq!(seed.coefficients, vec![1.0, SQRT3]);
        for n in 1..=10 {
            let seed = lm_seed(n).unwrap();
            let norm: f64 = seed.coefficients.iter().map(|c| c * c).sum();
            assert!((norm - ((n + 1) * (n + 1)) as f64).abs() < 1e-10);
            assert!(verify_seed(&seed));
            let doubled = SeedVector {
                n,
                coefficients: seed.coefficients.iter().map(|c| 2.0 * c).collect(),
            };
            assert!(!verify_seed(&doubled));
        }
    }

    #[test]
    fn gamma_up_examples() {
        let gamma = gamma_up_pure(1).unwrap();
        assert_eq!(gamma.space, BlockSpace::Pair);
        let zero = gamma.sector(HalfInteger::ZERO).unwrap();
        assert!((zero.matrix[(1, 0)].abs() - 1.0 / 12.0).abs() < 1e-15);
        for n in 1..=8 {
            let gamma = gamma_up_pure(n).unwrap();
            assert!(gamma.trace().abs() < 1e-13);
            let expected = n as f64 / (3.0 * (n + 1) as f64);
            assert!((gamma.trace_norm().unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn lm_examples() {
        assert!((lm_bias(1).unwrap() - 1.0 / SQRT3).abs() < 1e-15);
        assert!((lm_error(1).unwrap() - (0.5 - 1.0 / (4.0 * SQRT3))).abs() < 1e-15);
        assert!((lm_error(2).unwrap() - 0.297207).abs() < 1e-6);
    }

    #[test]
    fn lm_is_optimal() {
        for n in 1..=20 {
            assert!(
                (lm_error(n).unwrap() - programmable_error_pure(n).unwrap()).abs() < 1e-12,
                "n={n}"
            );
        }
    }

    #[test]
    fn projection_coefficients_from_recoupling() {
        for n in 1..=12 {
            let closed = projection_coefficients(n).unwrap();
            let recoupled = projection_coefficients_recoupled(n).unwrap();
            for (a, b) in closed.iter().zip(&recoupled) {
                assert!((a.abs() - b.abs()).abs() < 1e-12, "n={n}");
            }
        }
        let norms: Vec<f64> = (1..=4)
            .map(|n| projection_coefficients(n).unwrap().iter().map(|c| c * c).sum())
            .collect();
        for (got, want) in norms.iter().zip([2.1340, 3.5665, 5.3154, 7.3872]) {
            assert!((got - want).abs() < 1e-4);
        }
    }

    #[test]
    fn ed_examples() {
        assert!((ed_bias_continuous(1).unwrap() - 4.0 / 9.0).abs() < 1e-15);
        assert!((ed_error_continuous(1).unwrap() - 7.0 / 18.0).abs() < 1e-15);
        assert_eq!(shrink_factor(2).unwrap(), 0.5);
        assert!((ed_bias_n1_optimal() - 2.0f64.sqrt() / 3.0).abs() < 1e-15);
        let excess = ed_error_n1_optimal() - baseline_error(1.0);
        assert!((excess - (4.0 - 2.0f64.sqrt()) / 12.0).abs() < 1e-15);
        let lm_excess = lm_error(1).unwrap() - baseline_error(1.0);
        assert!((excess / lm_excess - 1.15).abs() < 0.02);
        assert!(ed_error_n1_optimal() < ed_error_continuous(1).unwrap());
    }

    #[test]
    fn machine_ordering() {
        for n in 1..=50 {
            let lm = lm_error(n).unwrap();
            let ed = ed_error_continuous(n).unwrap();
            let rev = reversed_lm_error(n).unwrap();
            assert!(lm <= ed && ed < rev, "n={n}");
        }
    }

    #[test]
    fn excess_risk_asymptotics() {
        // n (P - 1/6) approaches 1/3 and 2/3 with corrections of order n^{-1/2} and n^{-1}.
        let scaled = |p: f64, n: i64| (p - 1.0 / 6.0) * n as f64;
        let mut previous = f64::INFINITY;
        for n in [100, 1000, 10_000, 100_000] {
            let lm = scaled(programmable_error_pure(n).unwrap(), n);
            let deviation = (lm * 3.0 - 1.0).abs();
            assert!(deviation < previous);
            assert!(deviation * (n as f64).sqrt() < 1.0);
            previous = deviation;
        }
        let n = 10_000;
        let lm = scaled(programmable_error_pure(n).unwrap(), n);
        let ed = scaled(ed_error_continuous(n).unwrap(), n);
        assert!((lm * 3.0 - 1.0).abs() < 0.02);
        assert!((ed * 1.5 - 1.0).abs() < 0.02);
        assert!((ed / lm - 2.0).abs() < 0.05);
    }

    #[test]
    fn reversed_examples() {
        assert!((reversed_lm_error(1).unwrap() - 11.0 / 24.0).abs() < 1e-15);
        assert!((reversed_lm_error(1_000_000_000).unwrap() - 5.0 / 12.0).abs() < 1e-9);
        for n in 1..=6 {
            let norm = gamma_up_pure(n).unwrap().trace_norm().unwrap();
            assert!((reversed_lm_error(n).unwrap() - (1.0 - norm / 2.0) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn memory_bound_examples() {
        assert!((memory_bound_bits(1).unwrap() - 12f64.log2()).abs() < 1e-15);
        assert!((memory_bound_bits(10).unwrap() - 462f64.log2()).abs() < 1e-15);
        let ratio = memory_bound_bits(1 << 40).unwrap() / 40.0;
        assert!((ratio - 2.0).abs() < 0.1);
    }

    #[test]
    fn report_excess_matches_baseline() {
        let report = closed_form_report(MachineKind::Lm, 1).unwrap();
        assert!((report.excess_risk - (4.0 - SQRT3) / 12.0).abs() < 1e-15);
        assert!((report.error_probability - report.excess_risk - baseline_error(report.r)).abs() < 1e-12);
        assert!(closed_form_report(MachineKind::EdN1, 2).is_err());
        let json = serde_json::to_value(unbalanced_report(3, 1).unwrap()).unwrap();
        assert_eq!(json["machine"], "opt");
        assert_eq!(json["n_a"], 3);
    }
}
