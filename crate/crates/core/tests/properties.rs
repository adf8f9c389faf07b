use nalgebra::DMatrix;
use proptest::prelude::*;

use qclass::blocks::{block_labels, block_weights, BlockLabel, BlockOperator, BlockSpace, SpectrumParams};
use qclass::format::full_precision;
use qclass::machines::{ed_error_continuous, lm_error, lm_seed, programmable_error_pure, reversed_lm_error};
use qclass::mixed::{gamma_up_mixed, mixed_lm_risk, mixed_programmable_risk};
use qclass::oracle::dense::{kron, spin_operators};
use qclass::oracle::sampling::{simulate_lm, simulate_lm_in_frame, Discretization, RandomSource, Rotation};
use qclass::oracle::states::build_average_states;
use qclass::sdp::SolverOptions;
use qclass::su2::HalfInteger;

fn y_rotation(theta: f64, qubits: usize) -> DMatrix<f64> {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let u = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
    (1..qubits).fold(u.clone(), |acc, _| kron(&acc, &u))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn spin_weights_are_a_distribution(n in 1i64..60, r in 0.01f64..=1.0) {
        let weights = block_weights(SpectrumParams::new(n, r).unwrap()).unwrap();
        prop_assert!(weights.iter().all(|w| w.p >= 0.0));
        prop_assert!((weights.iter().map(|w| w.p).sum::<f64>() - 1.0).abs() < 1e-12);
        let labels = block_labels(SpectrumParams::new(n, r).unwrap()).unwrap();
        prop_assert!((labels.iter().map(|(_, p)| p).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trace_norm_bounds_trace(entries in prop::collection::vec(-1.0f64..1.0, 64)) {
        let label = BlockLabel::symmetric(2);
        let mut op = BlockOperator::zeros(label, BlockSpace::Pair);
        let mut it = entries.iter().cycle();
        for sector in &mut op.sectors {
            let d = sector.matrix.nrows();
            for i in 0..d {
                for k in 0..=i {
                    let v = *it.next().unwrap();
                    sector.matrix[(i, k)] = v;
                    sector.matrix[(k, i)] = v;
                }
            }
        }
        prop_assert!(op.trace_norm().unwrap() >= op.trace().abs() - 1e-12);
    }

    #[test]
    fn gamma_blocks_are_traceless(n in 1i64..10, r in 0.05f64..=1.0) {
        let params = SpectrumParams::new(n, r).unwrap();
        for (label, _) in block_labels(params).unwrap() {
            prop_assert!(gamma_up_mixed(label, params).unwrap().trace().abs() < 1e-13);
        }
    }

    #[test]
    fn pure_machines_are_ordered(n in 1i64..400) {
        let opt = programmable_error_pure(n).unwrap();
        let lm = lm_error(n).unwrap();
        prop_assert!(opt > 1.0 / 6.0);
        prop_assert!(programmable_error_pure(n + 1).unwrap() < opt);
        prop_assert!(lm <= ed_error_continuous(n).unwrap() + 1e-15);
        prop_assert!(ed_error_continuous(n).unwrap() < reversed_lm_error(n).unwrap());
    }

    #[test]
    fn printed_floats_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(full_precision(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }

    #[test]
    fn half_integers_round_trip(twice in -400i64..400) {
        let h = HalfInteger::from_twice(twice);
        prop_assert_eq!(h.to_string().parse::<HalfInteger>().unwrap(), h);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn learning_machine_never_beats_the_optimum(n in 1i64..=3, r in 0.1f64..=1.0) {
        let lm = mixed_lm_risk(n, r, SolverOptions::default()).unwrap();
        let opt = mixed_programmable_risk(n, r).unwrap();
        prop_assert!(lm.report.excess_risk >= opt.excess_risk - 1e-7);
    }

    #[test]
    fn average_states_are_covariant(n in 1usize..=2, r in 0.1f64..=1.0, theta in 0.0f64..6.3) {
        let (s0, s1) = build_average_states(n, n, r).unwrap();
        let qubits = 2 * n + 1;
        let (jz, _) = spin_operators(qubits);
        let u = y_rotation(theta, qubits);
        for s in [&s0, &s1] {
            prop_assert!(s.commutator_residual(&jz) <= 1e-10);
            let rotated = &u * &s.matrix * u.transpose();
            prop_assert!((rotated - &s.matrix).amax() <= 1e-10);
        }
    }

    #[test]
    fn sampled_machine_is_rotation_invariant(seed in any::<u64>(), a in 0.0f64..6.3, b in 0.0f64..3.2, c in 0.0f64..6.3) {
        let disc = Discretization::MonteCarlo { trials: 40_000 };
        let plain = simulate_lm(&lm_seed(1).unwrap(), disc, RandomSource::new(seed)).unwrap();
        let turned = simulate_lm_in_frame(&lm_seed(1).unwrap(), disc, RandomSource::new(seed ^ 1), Rotation::euler(a, b, c)).unwrap();
        let spread = (plain.std_error.powi(2) + turned.std_error.powi(2)).sqrt();
        prop_assert!((plain.error_rate - turned.error_rate).abs() <= 4.0 * spread);
    }
}
