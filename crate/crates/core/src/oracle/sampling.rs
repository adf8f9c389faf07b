//! Sampled and integrated runs of the two-stage learning machine on pure qubits:
//! a covariant measurement on the training set yields a rotation `u`, then a
//! Stern–Gerlach measurement along `u` labels the data qubit.

use std::f64::consts::PI;

use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Result};
use crate::machines::{verify_seed, SeedVector};
use crate::su2::{cg, HalfInteger};

type C64 = Complex<f64>;

/// Name and version of the pseudo-random generator, stamped into outputs.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.9), one stream per chunk";
/// Trials per independent random stream; results do not depend on the thread count.
pub const CHUNK: usize = 4096;
/// Default Gauss–Legendre order of the quadrature runs.
pub const DEFAULT_QUADRATURE_ORDER: usize = 24;

/// A seeded family of independent random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RandomSource {
    pub seed: u64,
    pub algorithm: &'static str,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            algorithm: RNG_ALGORITHM,
        }
    }

    /// Generator for stream `index`.
    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }
}

/// A pure qubit `α|↑⟩ + β|↓⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Qubit {
    pub up: C64,
    pub down: C64,
}

impl Qubit {
    pub fn from_bloch(bloch: [f64; 3]) -> Self {
        let theta = bloch[2].clamp(-1.0, 1.0).acos();
        let phi = bloch[1].atan2(bloch[0]);
        Self {
            up: C64::new((theta / 2.0).cos(), 0.0),
            down: C64::from_polar((theta / 2.0).sin(), phi),
        }
    }

    pub fn bloch(&self) -> [f64; 3] {
        let cross = self.up.conj() * self.down;
        [
            2.0 * cross.re,
            2.0 * cross.im,
            self.up.norm_sqr() - self.down.norm_sqr(),
        ]
    }
}

/// A Haar-random pure qubit, returned as its Bloch unit vector.
pub fn haar_qubit<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(0.0..2.0 * PI);
    let rho = (1.0 - z * z).max(0.0).sqrt();
    [rho * phi.cos(), rho * phi.sin(), z]
}

/// An SU(2) matrix `[[a, -b*], [b, a*]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    a: C64,
    b: C64,
}

impl Rotation {
    pub const IDENTITY: Rotation = Rotation {
        a: C64::new(1.0, 0.0),
        b: C64::new(0.0, 0.0),
    };

    /// `e^{-iασ_z/2} e^{-iβσ_y/2} e^{-iγσ_z/2}`.
    pub fn euler(alpha: f64, beta: f64, gamma: f64) -> Self {
        let (c, s) = ((beta / 2.0).cos(), (beta / 2.0).sin());
        Self {
            a: C64::from_polar(c, -(alpha + gamma) / 2.0),
            b: C64::from_polar(s, (alpha - gamma) / 2.0),
        }
    }

    /// Haar-random rotation up to a global sign, from Euler angles with uniform `cos β`.
    pub fn haar<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let alpha = rng.random_range(0.0..2.0 * PI);
        let cos_beta: f64 = rng.random_range(-1.0..=1.0);
        let gamma = rng.random_range(0.0..2.0 * PI);
        Self::euler(alpha, cos_beta.acos(), gamma)
    }

    pub fn apply(&self, q: Qubit) -> Qubit {
        Qubit {
            up: self.a * q.up - self.b.conj() * q.down,
            down: self.b * q.up + self.a.conj() * q.down,
        }
    }

    pub fn inverse(&self) -> Self {
        Self {
            a: self.a.conj(),
            b: -self.b,
        }
    }
}

/// `√C(n, k)` for the Dicke amplitudes of product states.
fn binomial_sqrt(n: usize) -> Vec<f64> {
    use crate::su2::ln_factorial;
    (0..=n)
        .map(|k| (0.5 * (ln_factorial(n as u64) - ln_factorial(k as u64) - ln_factorial((n - k) as u64))).exp())
        .collect()
}

/// The seed state `Σ_j c_j |j, 0⟩` contracted against product training states.
struct SeedAmplitude {
    n: usize,
    /// `w[k]` multiplies `|m_A = n/2 - k⟩|m_C = -(n/2 - k)⟩`.
    weights: Vec<f64>,
    binomial: Vec<f64>,
    bound: f64,
}

impl SeedAmplitude {
    fn new(seed: &SeedVector) -> Self {
        let n = seed.n as usize;
        let top = HalfInteger::half_of(seed.n);
        let weights = (0..=n)
            .map(|k| {
                let ma = top - HalfInteger::from_int(k as i64);
                seed.coefficients
                    .iter()
                    .enumerate()
                    .map(|(j, c)| c * cg(top, ma, top, -ma, HalfInteger::from_int(j as i64), HalfInteger::ZERO))
                    .sum()
            })
            .collect();
        Self {
            n,
            weights,
            binomial: binomial_sqrt(n),
            bound: seed.coefficients.iter().map(|c| c * c).sum(),
        }
    }

    /// `|⟨φ|a^{⊗n} c^{⊗n}⟩|²`, the outcome density of the identity rotation.
    fn density(&self, a: Qubit, c: Qubit) -> f64 {
        let n = self.n;
        let mut amplitude = C64::new(0.0, 0.0);
        for k in 0..=n {
            // A has n - k spins up, C has k spins up.
            let da = a.up.powu((n - k) as u32) * a.down.powu(k as u32) * self.binomial[k];
            let dc = c.up.powu(k as u32) * c.down.powu((n - k) as u32) * self.binomial[k];
            amplitude += da * dc * self.weights[k];
        }
        amplitude.norm_sqr()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Discretization {
    /// Sampled episodes: Haar states, a rejection-sampled outcome `u`, a sampled Stern–Gerlach click.
    MonteCarlo { trials: usize },
    /// Euler-angle quadrature over `u` and a sphere quadrature over the second state,
    /// with the first state fixed by rotation invariance.
    Quadrature { order: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    pub n: i64,
    pub error_rate: f64,
    /// Zero for quadrature runs.
    pub std_error: f64,
    pub discretization: Discretization,
    pub proposals: u64,
    pub rng: Option<RandomSource>,
}

/// Empirical error of the learning machine with seed `seed`.
pub fn simulate_lm(
    seed: &SeedVector,
    discretization: Discretization,
    source: RandomSource,
) -> Result<SimulationResult> {
    simulate_lm_in_frame(seed, discretization, source, Rotation::IDENTITY)
}

/// As [`simulate_lm`], with both hidden states rotated by `frame` in every episode.
pub fn simulate_lm_in_frame(
    seed: &SeedVector,
    discretization: Discretization,
    source: RandomSource,
    frame: Rotation,
) -> Result<SimulationResult> {
    if seed.n < 1 || seed.coefficients.len() != seed.n as usize + 1 {
        return domain(format!("seed for n = {} must carry n + 1 coefficients", seed.n));
    }
    if !verify_seed(seed) {
        return domain("seed does not resolve the identity; rescale it so that c_j² = 2j + 1");
    }
    let amplitude = SeedAmplitude::new(seed);
    match discretization {
        Discretization::MonteCarlo { trials } => {
            if trials == 0 {
                return domain("at least one trial is required");
            }
            let chunks = trials.div_ceil(CHUNK);
            let (errors, proposals) = (0..chunks)
                .into_par_iter()
                .map(|chunk| {
                    let count = CHUNK.min(trials - chunk * CHUNK);
                    run_chunk(&amplitude, &mut source.stream(chunk as u64), count, frame)
                })
                .reduce(|| (0, 0), |x, y| (x.0 + y.0, x.1 + y.1));
            let p = errors as f64 / trials as f64;
            Ok(SimulationResult {
                n: seed.n,
                error_rate: p,
                std_error: (p * (1.0 - p) / trials as f64).sqrt(),
                discretization,
                proposals,
                rng: Some(source),
            })
        }
        Discretization::Quadrature { order } => {
            if order < 2 {
                return domain("quadrature order must be at least 2");
            }
            Ok(SimulationResult {
                n: seed.n,
                error_rate: integrate(&amplitude, order, frame),
                std_error: 0.0,
                discretization,
                proposals: 0,
                rng: None,
            })
        }
    }
}

fn run_chunk(amplitude: &SeedAmplitude, rng: &mut ChaCha8Rng, count: usize, frame: Rotation) -> (u64, u64) {
    let mut errors = 0;
    let mut proposals = 0;
    for _ in 0..count {
        let psi0 = frame.apply(Qubit::from_bloch(haar_qubit(rng)));
        let psi1 = frame.apply(Qubit::from_bloch(haar_qubit(rng)));
        // Outcome density of u is |⟨φ|(u†ψ_0)^{⊗n}(u†ψ_1)^{⊗n}⟩|² ≤ ‖φ‖².
        let (a, c) = loop {
            proposals += 1;
            let inverse = Rotation::haar(rng).inverse();
            let (a, c) = (inverse.apply(psi0), inverse.apply(psi1));
            let accept: f64 = rng.random();
            if accept * amplitude.bound < amplitude.density(a, c) {
                break (a, c);
            }
        };
        let label = rng.random_bool(0.5);
        let data = if label { c } else { a };
        let click_up = rng.random::<f64>() < data.up.norm_sqr();
        // Up means "label 0".
        if click_up == label {
            errors += 1;
        }
    }
    (errors, proposals)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(order);
    for i in 0..order {
        let mut x = (PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut derivative = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            derivative = order as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / derivative;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * derivative * derivative)));
    }
    out
}

/// `½ - ½ E[p(u)(|⟨↑|u†ψ_0⟩|² - |⟨↑|u†ψ_1⟩|²)]` with `ψ_0 = |↑⟩` in the rotated frame.
fn integrate(amplitude: &SeedAmplitude, order: usize, frame: Rotation) -> f64 {
    let nodes = gauss_legendre(order);
    let angles: Vec<f64> = (0..order).map(|k| 2.0 * PI * k as f64 / order as f64).collect();
    let psi0 = frame.apply(Qubit::from_bloch([0.0, 0.0, 1.0]));
    let rotations: Vec<(Rotation, f64)> = nodes
        .iter()
        .flat_map(|&(cb, wb)| {
            let angles = &angles;
            angles.iter().flat_map(move |&alpha| {
                angles.iter().map(move |&gamma| {
                    (
                        Rotation::euler(alpha, cb.acos(), gamma).inverse(),
                        wb / 2.0 / (order * order) as f64,
                    )
                })
            })
        })
        .collect();
    let seconds: Vec<(Qubit, f64)> = nodes
        .iter()
        .flat_map(|&(z, w)| {
            angles.iter().map(move |&phi| {
                let rho = (1.0 - z * z).sqrt();
                (
                    frame.apply(Qubit::from_bloch([rho * phi.cos(), rho * phi.sin(), z])),
                    w / 2.0 / order as f64,
                )
            })
        })
        .collect();
    let bias: f64 = seconds
        .par_iter()
        .map(|&(psi1, w1)| {
            let mut sum = 0.0;
            for &(inverse, wu) in &rotations {
                let (a, c) = (inverse.apply(psi0), inverse.apply(psi1));
                sum += wu * amplitude.density(a, c) * (a.up.norm_sqr() - c.up.norm_sqr());
            }
            w1 * sum
        })
        .sum();
    0.5 - 0.5 * bias
}
