//! Brute-force cross-checks: explicit matrices, sampled and integrated
//! measurement runs, and the partial-transpose test.

pub mod dense;
pub mod estimate;
pub mod ppt;
pub mod sampling;
pub mod states;

pub use dense::{DenseBasis, DenseOperator, Register};
pub use estimate::{ed_error_finite, EdResult, EstimationPovm};
pub use ppt::{ppt_check, PptReport};
pub use sampling::{haar_qubit, simulate_lm, Discretization, RandomSource, SimulationResult};
pub use states::{build_average_states, gamma_dense, helstrom};
