//! SU(2) coupling toolkit.
//!
//! Angular momenta and magnetic numbers are carried as [`HalfInteger`]s, which
//! store twice the physical value so that half-integers stay exact. Coupling
//! coefficients follow the Condon–Shortley phase convention and are evaluated
//! in double precision through a table of log-factorials.

use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Serialize, Serializer};

use crate::error::{domain, Error, Result};

/// An exact multiple of one half, stored as its double.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct HalfInteger {
    twice: i64,
}

impl HalfInteger {
    pub const ZERO: HalfInteger = HalfInteger { twice: 0 };
    pub const HALF: HalfInteger = HalfInteger { twice: 1 };
    pub const ONE: HalfInteger = HalfInteger { twice: 2 };

    /// Builds the half-integer whose double is `twice`.
    pub const fn from_twice(twice: i64) -> Self {
        Self { twice }
    }

    pub const fn from_int(value: i64) -> Self {
        Self { twice: 2 * value }
    }

    /// Half of `count`; `HalfInteger::half_of(n)` is the spin of `n` aligned qubits.
    pub const fn half_of(count: i64) -> Self {
        Self { twice: count }
    }

    pub const fn twice(self) -> i64 {
        self.twice
    }

    pub fn value(self) -> f64 {
        self.twice as f64 / 2.0
    }

    pub const fn is_integer(self) -> bool {
        self.twice % 2 == 0
    }

    pub const fn abs(self) -> Self {
        Self {
            twice: self.twice.abs(),
        }
    }

    /// Dimension `2j + 1` of the spin-`j` irrep.
    pub fn dimension(self) -> usize {
        debug_assert!(self.twice >= 0);
        (self.twice + 1) as usize
    }

    /// `j(j + 1)`.
    pub fn casimir(self) -> f64 {
        let j = self.value();
        j * (j + 1.0)
    }

    /// Whether `self - other` is an integer.
    pub const fn same_parity(self, other: HalfInteger) -> bool {
        (self.twice - other.twice) % 2 == 0
    }

    /// The values `lo, lo + 1, ..., hi` (empty when `hi < lo`).
    pub fn range_inclusive(lo: HalfInteger, hi: HalfInteger) -> impl DoubleEndedIterator<Item = HalfInteger> + Clone {
        let start = lo.twice;
        let count = if hi.twice >= lo.twice {
            ((hi.twice - lo.twice) / 2 + 1) as usize
        } else {
            0
        };
        (0..count).map(move |k| HalfInteger::from_twice(start + 2 * k as i64))
    }

    /// Magnetic numbers `-j, ..., j` of a spin `j`.
    pub fn projections(self) -> impl DoubleEndedIterator<Item = HalfInteger> + Clone {
        HalfInteger::range_inclusive(-self, self)
    }
}

impl Add for HalfInteger {
    type Output = HalfInteger;
    fn add(self, rhs: Self) -> Self {
        Self::from_twice(self.twice + rhs.twice)
    }
}

impl Sub for HalfInteger {
    type Output = HalfInteger;
    fn sub(self, rhs: Self) -> Self {
        Self::from_twice(self.twice - rhs.twice)
    }
}

impl Neg for HalfInteger {
    type Output = HalfInteger;
    fn neg(self) -> Self {
        Self::from_twice(-self.twice)
    }
}

impl fmt::Display for HalfInteger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

impl FromStr for HalfInteger {
    type Err = Error;

    /// Accepts `"3"`, `"3/2"`, `"-1/2"` and decimal forms such as `"1.5"`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((num, den)) = s.split_once('/') {
            let num: i64 = num
                .trim()
                .parse()
                .map_err(|_| Error::Domain(format!("bad half-integer {s:?}")))?;
            return match den.trim() {
                "2" => Ok(Self::from_twice(num)),
                "1" => Ok(Self::from_int(num)),
                _ => domain(format!("bad half-integer {s:?}: denominator must be 1 or 2")),
            };
        }
        if let Ok(i) = s.parse::<i64>() {
            return Ok(Self::from_int(i));
        }
        let x: f64 = s
            .parse()
            .map_err(|_| Error::Domain(format!("bad half-integer {s:?}")))?;
        let twice = (2.0 * x).round();
        if (2.0 * x - twice).abs() > 1e-12 || !twice.is_finite() {
            return domain(format!("{s:?} is not a multiple of 1/2"));
        }
        Ok(Self::from_twice(twice as i64))
    }
}

impl Serialize for HalfInteger {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.value())
    }
}

/// Order in which the three subsystems of a training pair plus data qubit are coupled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingOrder {
    /// `(AC)B`: training subsystems first, then the data qubit.
    TrainingFirst,
    /// `A(CB)`: the data qubit joins `C` first, then `A`.
    DataWithC,
}

/// A coupling order together with its intermediate angular momentum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CouplingScheme {
    pub order: CouplingOrder,
    pub intermediate: HalfInteger,
}

impl CouplingScheme {
    pub fn new(order: CouplingOrder, intermediate: HalfInteger, left: HalfInteger, right: HalfInteger) -> Result<Self> {
        if !triangle(left, right, intermediate) {
            return domain(format!(
                "intermediate momentum {intermediate} cannot arise from {left} and {right}"
            ));
        }
        Ok(Self { order, intermediate })
    }
}

/// Which of the two total momenta `j ± 1/2` reachable by adding a spin-1/2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn shift(self) -> HalfInteger {
        match self {
            Branch::Plus => HalfInteger::HALF,
            Branch::Minus => -HalfInteger::HALF,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

/// Triangle rule with integer perimeter.
pub fn triangle(a: HalfInteger, b: HalfInteger, c: HalfInteger) -> bool {
    let (a, b, c) = (a.twice, b.twice, c.twice);
    a >= 0 && b >= 0 && c >= 0 && c <= a + b && c >= (a - b).abs() && (a + b + c) % 2 == 0
}

const LOG_FACTORIAL_TABLE: usize = 4096;

fn log_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = Vec::with_capacity(LOG_FACTORIAL_TABLE);
        table.push(0.0);
        for i in 1..LOG_FACTORIAL_TABLE {
            let prev = table[i - 1];
            table.push(prev + (i as f64).ln());
        }
        table
    })
}

/// `ln(k!)`.
pub fn ln_factorial(k: u64) -> f64 {
    let table = log_factorial_table();
    if (k as usize) < table.len() {
        table[k as usize]
    } else {
        let mut acc = table[table.len() - 1];
        for i in table.len() as u64..=k {
            acc += (i as f64).ln();
        }
        acc
    }
}

fn lf(twice_value: i64) -> f64 {
    debug_assert!(twice_value >= 0 && twice_value % 2 == 0);
    ln_factorial((twice_value / 2) as u64)
}

/// Dimension `m + 1` of the symmetric subspace of `m` qubits.
pub fn dim(qubits: i64) -> Result<u64> {
    if qubits < 0 {
        return domain(format!("qubit count must be non-negative, got {qubits}"));
    }
    Ok(qubits as u64 + 1)
}

fn check_momentum(j: HalfInteger, name: &str) -> Result<()> {
    if j.twice < 0 {
        return domain(format!("angular momentum {name} = {j} is negative"));
    }
    Ok(())
}

fn check_projection(j: HalfInteger, m: HalfInteger, name: &str) -> Result<()> {
    if !j.same_parity(m) {
        return domain(format!("magnetic number {name} = {m} has the wrong parity for j = {j}"));
    }
    Ok(())
}

/// Clebsch–Gordan coefficient `<j1 m1; j2 m2 | J M>` (Condon–Shortley).
///
/// Selection-rule violations yield exactly zero; negative momenta or magnetic
/// numbers of the wrong parity are domain errors.
pub fn clebsch_gordan(
    j1: HalfInteger,
    m1: HalfInteger,
    j2: HalfInteger,
    m2: HalfInteger,
    total: HalfInteger,
    total_m: HalfInteger,
) -> Result<f64> {
    check_momentum(j1, "j1")?;
    check_momentum(j2, "j2")?;
    check_momentum(total, "J")?;
    check_projection(j1, m1, "m1")?;
    check_projection(j2, m2, "m2")?;
    check_projection(total, total_m, "M")?;
    Ok(cg(j1, m1, j2, m2, total, total_m))
}

/// Unchecked Clebsch–Gordan evaluation for internally generated quantum numbers.
pub(crate) fn cg(
    j1: HalfInteger,
    m1: HalfInteger,
    j2: HalfInteger,
    m2: HalfInteger,
    total: HalfInteger,
    total_m: HalfInteger,
) -> f64 {
    let (tj1, tm1, tj2, tm2, tj, tm) = (j1.twice, m1.twice, j2.twice, m2.twice, total.twice, total_m.twice);
    if tm1 + tm2 != tm || !triangle(j1, j2, total) {
        return 0.0;
    }
    if tm1.abs() > tj1 || tm2.abs() > tj2 || tm.abs() > tj {
        return 0.0;
    }
    let prefactor = 0.5
        * (((tj + 1) as f64).ln() + lf(tj + tj1 - tj2) + lf(tj - tj1 + tj2) + lf(tj1 + tj2 - tj)
            - lf(tj1 + tj2 + tj + 2)
            + lf(tj + tm)
            + lf(tj - tm)
            + lf(tj1 - tm1)
            + lf(tj1 + tm1)
            + lf(tj2 - tm2)
            + lf(tj2 + tm2));
    // Summation index k (doubled) runs over all values keeping every factorial argument non-negative.
    let lower = 0.max(tj2 - tj - tm1).max(tj1 - tj + tm2);
    let upper = (tj1 + tj2 - tj).min(tj1 - tm1).min(tj2 + tm2);
    let mut sum = 0.0;
    let mut k = lower;
    while k <= upper {
        let denom = lf(k)
            + lf(tj1 + tj2 - tj - k)
            + lf(tj1 - tm1 - k)
            + lf(tj2 + tm2 - k)
            + lf(tj - tj2 + tm1 + k)
            + lf(tj - tj1 - tm2 + k);
        let term = (prefactor - denom).exp();
        if (k / 2) % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
        k += 2;
    }
    sum
}

fn ln_triangle_coefficient(a: i64, b: i64, c: i64) -> f64 {
    lf(a + b - c) + lf(a - b + c) + lf(-a + b + c) - lf(a + b + c + 2)
}

/// Wigner 6j symbol `{j1 j2 j12; j3 J j23}` via the Racah formula.
///
/// Any triad violating the triangle rule gives zero.
pub fn wigner_6j(
    j1: HalfInteger,
    j2: HalfInteger,
    j12: HalfInteger,
    j3: HalfInteger,
    total: HalfInteger,
    j23: HalfInteger,
) -> Result<f64> {
    for (j, name) in [
        (j1, "j1"),
        (j2, "j2"),
        (j12, "j12"),
        (j3, "j3"),
        (total, "J"),
        (j23, "j23"),
    ] {
        check_momentum(j, name)?;
    }
    Ok(sixj(j1, j2, j12, j3, total, j23))
}

pub(crate) fn sixj(
    a: HalfInteger,
    b: HalfInteger,
    c: HalfInteger,
    d: HalfInteger,
    e: HalfInteger,
    f: HalfInteger,
) -> f64 {
    // {a b c; d e f}: triads (a b c), (a e f), (d b f), (d e c).
    if !(triangle(a, b, c) && triangle(a, e, f) && triangle(d, b, f) && triangle(d, e, c)) {
        return 0.0;
    }
    let (a, b, c, d, e, f) = (a.twice, b.twice, c.twice, d.twice, e.twice, f.twice);
    let ln_delta = 0.5
        * (ln_triangle_coefficient(a, b, c)
            + ln_triangle_coefficient(a, e, f)
            + ln_triangle_coefficient(d, b, f)
            + ln_triangle_coefficient(d, e, c));
    let alphas = [a + b + c, a + e + f, d + b + f, d + e + c];
    let betas = [a + b + d + e, b + c + e + f, c + a + f + d];
    let lower = *alphas.iter().max().unwrap();
    let upper = *betas.iter().min().unwrap();
    let mut sum = 0.0;
    let mut t = lower;
    while t <= upper {
        let mut ln_term = lf(t + 2) + ln_delta;
        for alpha in alphas {
            ln_term -= lf(t - alpha);
        }
        for beta in betas {
            ln_term -= lf(beta - t);
        }
        let term = ln_term.exp();
        if (t / 2) % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
        t += 2;
    }
    sum
}

fn phase(twice_exponent: i64) -> f64 {
    debug_assert!(twice_exponent % 2 == 0);
    if (twice_exponent / 2).rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Signed overlap `<A(CB) j_cb; J M | (AC)B j_ac; J M>` between the two coupling
/// orders of three momenta, built from a 6j symbol. Independent of `M`.
pub fn recoupling_coefficient(
    ja: HalfInteger,
    jc: HalfInteger,
    jb: HalfInteger,
    training_first: CouplingScheme,
    data_with_c: CouplingScheme,
    total: HalfInteger,
) -> Result<f64> {
    if training_first.order != CouplingOrder::TrainingFirst || data_with_c.order != CouplingOrder::DataWithC {
        return domain("recoupling_coefficient expects an (AC)B scheme and an A(CB) scheme");
    }
    let j_ac = training_first.intermediate;
    let j_cb = data_with_c.intermediate;
    let sign = phase(ja.twice + jc.twice + jb.twice + total.twice);
    let norm = (((j_ac.twice + 1) * (j_cb.twice + 1)) as f64).sqrt();
    Ok(sign * norm * sixj(ja, jc, j_ac, jb, total, j_cb))
}

/// Closed-form overlap between the `A(CB)` and `(AC)B` bases for `j_A = j_C = n/2`,
/// `j_B = 1/2`, `j_CB = (n+1)/2`, `j_AC = j` and `J = j ± 1/2`:
/// `sqrt((n + 3/2 ± (j + 1/2)) / (2(n + 1)))`.
pub fn recoupling_overlap(n: i64, j: HalfInteger, branch: Branch) -> Result<f64> {
    if n < 0 {
        return domain(format!("qubit count must be non-negative, got {n}"));
    }
    if !j.is_integer() || j.twice < 0 || j.twice > 2 * n {
        return domain(format!("j_AC = {j} is not a coupled momentum of two spin-{}/2", n));
    }
    let total = j + branch.shift();
    if total.twice < 0 {
        return domain(format!("J = {total} is negative"));
    }
    let numerator = n as f64 + 1.5 + branch.sign() * (j.value() + 0.5);
    Ok((numerator / (2.0 * (n as f64 + 1.0))).sqrt())
}

/// Multiplicity of the spin-`j` irrep inside `n` qubits:
/// `binom(n, n/2 - j) (2j + 1) / (n/2 + j + 1)`.
pub fn multiplicity(n: i64, j: HalfInteger) -> Result<u128> {
    validate_spin_of(n, j)?;
    let k = ((n - j.twice) / 2) as u64;
    let n = n as u64;
    let full = binomial_u128(n, k).ok_or_else(|| Error::Domain(format!("multiplicity overflow at n = {n}")))?;
    let prev = if k == 0 {
        0
    } else {
        binomial_u128(n, k - 1).ok_or_else(|| Error::Domain(format!("multiplicity overflow at n = {n}")))?
    };
    Ok(full - prev)
}

/// Natural logarithm of [`multiplicity`], usable far beyond the `u128` range.
pub fn ln_multiplicity(n: i64, j: HalfInteger) -> Result<f64> {
    validate_spin_of(n, j)?;
    let k = ((n - j.twice) / 2) as u64;
    let n_u = n as u64;
    Ok(
        ln_factorial(n_u) - ln_factorial(k) - ln_factorial(n_u - k) + ((j.twice + 1) as f64).ln()
            - ((n_u - k + 1) as f64).ln(),
    )
}

fn validate_spin_of(n: i64, j: HalfInteger) -> Result<()> {
    if n < 0 {
        return domain(format!("qubit count must be non-negative, got {n}"));
    }
    if j.twice < 0 || j.twice > n {
        return domain(format!("j = {j} is outside [0, n/2] for n = {n}"));
    }
    if (n - j.twice) % 2 != 0 {
        return domain(format!("j = {j} has the wrong parity for n = {n}"));
    }
    Ok(())
}

fn binomial_u128(n: u64, k: u64) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Spins `j` carried by `n` qubits, ascending: `0 (or 1/2), ..., n/2`.
pub fn spins_of(n: i64) -> impl DoubleEndedIterator<Item = HalfInteger> + Clone {
    HalfInteger::range_inclusive(HalfInteger::from_twice(n.rem_euclid(2)), HalfInteger::half_of(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn h(twice: i64) -> HalfInteger {
        HalfInteger::from_twice(twice)
    }

    #[test]
    fn parses_and_prints_half_integers() {
        assert_eq!("3/2".parse::<HalfInteger>().unwrap(), h(3));
        assert_eq!("-1/2".parse::<HalfInteger>().unwrap(), h(-1));
        assert_eq!("2".parse::<HalfInteger>().unwrap(), h(4));
        assert_eq!("1.5".parse::<HalfInteger>().unwrap(), h(3));
        assert!("1/3".parse::<HalfInteger>().is_err());
        assert!("0.3".parse::<HalfInteger>().is_err());
        assert_eq!(h(3).to_string(), "3/2");
        assert_eq!(h(4).to_string(), "2");
    }

    #[test]
    fn dim_examples() {
        assert_eq!(dim(0).unwrap(), 1);
        assert_eq!(dim(1).unwrap(), 2);
        assert_eq!(dim(5).unwrap(), 6);
        assert!(matches!(dim(-1), Err(Error::Domain(_))));
    }

    #[test]
    fn clebsch_gordan_examples() {
        let one = HalfInteger::ONE;
        let half = HalfInteger::HALF;
        let z = HalfInteger::ZERO;
        let plus = clebsch_gordan(one, z, half, half, h(3), half).unwrap();
        assert!((plus - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let minus = clebsch_gordan(one, z, half, half, half, half).unwrap();
        assert!((minus + (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(clebsch_gordan(z, z, z, z, z, z).unwrap(), 1.0);
        let sq = clebsch_gordan(one, z, half, half, h(3), half).unwrap().powi(2);
        assert!((sq - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn clebsch_gordan_selection_rules_and_domain() {
        let half = HalfInteger::HALF;
        // M != m1 + m2
        assert_eq!(clebsch_gordan(half, half, half, half, h(2), h(0)).unwrap(), 0.0);
        // triangle violation
        assert_eq!(clebsch_gordan(half, half, half, half, h(4), h(2)).unwrap(), 0.0);
        // |m| > j
        assert_eq!(clebsch_gordan(half, h(3), half, -half, h(2), h(2)).unwrap(), 0.0);
        assert!(matches!(
            clebsch_gordan(h(-1), half, half, half, h(2), h(2)),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            clebsch_gordan(h(2), half, half, half, h(2), h(2)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn spin_half_coupling_signs() {
        // <j ± 1/2, 1/2 | j, 0; 1/2, 1/2> = ± sqrt((j + 1/2 ± 1/2) / (2j + 1))
        for tj in (0..=20).step_by(2) {
            let j = h(tj);
            let jv = j.value();
            let plus = cg(j, h(0), h(1), h(1), j + h(1), h(1));
            assert!((plus - ((jv + 1.0) / (2.0 * jv + 1.0)).sqrt()).abs() < 1e-14);
            if tj > 0 {
                let minus = cg(j, h(0), h(1), h(1), j - h(1), h(1));
                assert!((minus + (jv / (2.0 * jv + 1.0)).sqrt()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn coupling_to_spin_half_probabilities() {
        // |<j+1/2, m+1/2 | j, m; 1/2, 1/2>|^2 = (j + m + 1)/(2j + 1)
        for tj in 0..8 {
            let j = h(tj);
            for m in j.projections() {
                let up = cg(j, m, h(1), h(1), j + h(1), m + h(1)).powi(2);
                let expected = (j.value() + m.value() + 1.0) / (2.0 * j.value() + 1.0);
                assert!((up - expected).abs() < 1e-14);
                if tj > 0 {
                    let down = cg(j, m, h(1), h(1), j - h(1), m + h(1)).powi(2);
                    let expected = (j.value() - m.value()) / (2.0 * j.value() + 1.0);
                    assert!((down - expected).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn sixj_examples() {
        let z = HalfInteger::ZERO;
        let half = HalfInteger::HALF;
        let one = HalfInteger::ONE;
        assert_eq!(wigner_6j(z, z, z, z, z, z).unwrap(), 1.0);
        assert!((wigner_6j(half, half, one, half, half, z).unwrap() - 0.5).abs() < 1e-15);
        assert!((wigner_6j(half, half, one, half, half, one).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(wigner_6j(half, half, h(4), half, half, z).unwrap(), 0.0);
        assert!(wigner_6j(h(-2), half, one, half, half, z).is_err());
    }

    /// Explicit product-basis recoupling of three momenta, independent of the Racah formula.
    fn explicit_recoupling(
        j1: HalfInteger,
        j2: HalfInteger,
        j3: HalfInteger,
        j12: HalfInteger,
        j23: HalfInteger,
        total: HalfInteger,
    ) -> f64 {
        // <(j1 j2) j12, j3; J M | j1, (j2 j3) j23; J M> at M = J.
        let big_m = total;
        let mut overlap = 0.0;
        for m1 in j1.projections() {
            for m2 in j2.projections() {
                let m3 = big_m - m1 - m2;
                if m3.abs() > j3 {
                    continue;
                }
                let left = cg(j1, m1, j2, m2, j12, m1 + m2) * cg(j12, m1 + m2, j3, m3, total, big_m);
                let right = cg(j2, m2, j3, m3, j23, m2 + m3) * cg(j1, m1, j23, m2 + m3, total, big_m);
                overlap += left * right;
            }
        }
        overlap
    }

    #[test]
    fn sixj_matches_explicit_recoupling() {
        let mut checked = 0;
        for t1 in 0..=3 {
            for t2 in 0..=3 {
                for t3 in 0..=3 {
                    for t12 in 0..=6 {
                        for t23 in 0..=6 {
                            for tj in 0..=9 {
                                let (j1, j2, j3, j12, j23, jt) = (h(t1), h(t2), h(t3), h(t12), h(t23), h(tj));
                                if !(triangle(j1, j2, j12)
                                    && triangle(j12, j3, jt)
                                    && triangle(j2, j3, j23)
                                    && triangle(j1, j23, jt))
                                {
                                    continue;
                                }
                                let racah = phase(t1 + t2 + t3 + tj)
                                    * (((t12 + 1) * (t23 + 1)) as f64).sqrt()
                                    * sixj(j1, j2, j12, j3, jt, j23);
                                let explicit = explicit_recoupling(j1, j2, j3, j12, j23, jt);
                                assert!((racah - explicit).abs() < 1e-13, "{t1} {t2} {t3} {t12} {t23} {tj}");
                                checked += 1;
                            }
                        }
                    }
                }
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn recoupling_overlap_examples() {
        let one = HalfInteger::ONE;
        assert!((recoupling_overlap(1, one, Branch::Plus).unwrap() - 1.0).abs() < 1e-15);
        assert!((recoupling_overlap(1, one, Branch::Minus).unwrap() - 0.5).abs() < 1e-15);
        assert!((recoupling_overlap(2, one, Branch::Plus).unwrap() - (5.0f64 / 6.0).sqrt()).abs() < 1e-15);
        assert!(recoupling_overlap(2, HalfInteger::ZERO, Branch::Minus).is_err());
        assert!(recoupling_overlap(2, h(6), Branch::Plus).is_err());
    }

    #[test]
    fn recoupling_overlap_matches_sixj_magnitude() {
        for n in 1..=8i64 {
            let jn = HalfInteger::half_of(n);
            let j_cb = jn + HalfInteger::HALF;
            for j in HalfInteger::range_inclusive(HalfInteger::ZERO, HalfInteger::from_int(n)) {
                for branch in [Branch::Plus, Branch::Minus] {
                    let total = j + branch.shift();
                    if total.twice() < 0 {
                        continue;
                    }
                    let from = CouplingScheme::new(CouplingOrder::TrainingFirst, j, jn, jn).unwrap();
                    let to = CouplingScheme::new(CouplingOrder::DataWithC, j_cb, jn, HalfInteger::HALF).unwrap();
                    let signed = recoupling_coefficient(jn, jn, HalfInteger::HALF, from, to, total).unwrap();
                    let closed = recoupling_overlap(n, j, branch).unwrap();
                    assert!((signed.abs() - closed).abs() < 1e-13, "n={n} j={j} {branch:?}");
                }
            }
        }
    }

    #[test]
    fn recoupling_unitarity_at_fixed_total() {
        // For fixed J the A(CB) state with j_CB = (n+1)/2 expands over j_AC = J ∓ 1/2,
        // so overlap(J - 1/2, +)^2 + overlap(J + 1/2, -)^2 = 1.
        for n in 1..=10i64 {
            for total in HalfInteger::range_inclusive(HalfInteger::HALF, HalfInteger::half_of(2 * n + 1)) {
                let mut sum = 0.0;
                let below = total - HalfInteger::HALF;
                sum += recoupling_overlap(n, below, Branch::Plus).unwrap().powi(2);
                let above = total + HalfInteger::HALF;
                if above.twice() <= 2 * n {
                    sum += recoupling_overlap(n, above, Branch::Minus).unwrap().powi(2);
                }
                assert!((sum - 1.0).abs() < 1e-14, "n={n} J={total}");
            }
        }
    }

    #[test]
    fn multiplicity_examples() {
        assert_eq!(multiplicity(2, HalfInteger::ONE).unwrap(), 1);
        assert_eq!(multiplicity(2, HalfInteger::ZERO).unwrap(), 1);
        assert_eq!(multiplicity(4, HalfInteger::ONE).unwrap(), 3);
        assert!(matches!(multiplicity(3, HalfInteger::ONE), Err(Error::Domain(_))));
        assert!(matches!(multiplicity(2, h(6)), Err(Error::Domain(_))));
    }

    #[test]
    fn multiplicities_fill_the_qubit_space() {
        for n in 0..=20i64 {
            let total: u128 = spins_of(n)
                .map(|j| multiplicity(n, j).unwrap() * j.dimension() as u128)
                .sum();
            assert_eq!(total, 1u128 << n);
            for j in spins_of(n) {
                let exact = multiplicity(n, j).unwrap() as f64;
                assert!((ln_multiplicity(n, j).unwrap() - exact.ln()).abs() < 1e-12);
            }
        }
    }

    fn arb_spin(max_twice: i64) -> impl Strategy<Value = HalfInteger> {
        (0..=max_twice).prop_map(HalfInteger::from_twice)
    }

    proptest! {
        #[test]
        fn clebsch_gordan_orthonormal(j1 in arb_spin(8), j2 in arb_spin(8), k in 0usize..64, l in 0usize..64) {
            let m1s: Vec<_> = j1.projections().collect();
            let m2s: Vec<_> = j2.projections().collect();
            let (m1, m2) = (m1s[k % m1s.len()], m2s[l % m2s.len()]);
            let lo = HalfInteger::from_twice((j1.twice() - j2.twice()).abs());
            let mut sum = 0.0;
            for total in HalfInteger::range_inclusive(lo, j1 + j2) {
                sum += cg(j1, m1, j2, m2, total, m1 + m2).powi(2);
            }
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }

        #[test]
        fn sixj_orthogonality(j1 in arb_spin(6), j2 in arb_spin(6), j3 in arb_spin(6), jt in arb_spin(6), a in 0i64..8, b in 0i64..8) {
            // sum_{j12} (2 j12 + 1)(2 j23 + 1) {j1 j2 j12; j3 J j23}{j1 j2 j12; j3 J j23'} = delta
            let lo = HalfInteger::from_twice((j2.twice() - j3.twice()).abs());
            let candidates: Vec<_> = HalfInteger::range_inclusive(lo, j2 + j3).filter(|&j23| triangle(j1, j23, jt)).collect();
            prop_assume!(!candidates.is_empty());
            let j23 = candidates[a as usize % candidates.len()];
            let j23p = candidates[b as usize % candidates.len()];
            let lo12 = HalfInteger::from_twice((j1.twice() - j2.twice()).abs());
            let mut sum = 0.0;
            for j12 in HalfInteger::range_inclusive(lo12, j1 + j2) {
                sum += (j12.twice() + 1) as f64 * (j23.twice() + 1) as f64
                    * sixj(j1, j2, j12, j3, jt, j23) * sixj(j1, j2, j12, j3, jt, j23p);
            }
            let expected = if j23 == j23p { 1.0 } else { 0.0 };
            prop_assert!((sum - expected).abs() < 1e-12);
        }
    }
}
