//! Randomized property tests over the library's core invariants.

use num_complex::Complex64;
use proptest::prelude::*;

use crabforge::crab::{
    sample_basis, synthesize_signal, BasisTable, CrabCoefficients, RandomizationMode,
};
use crabforge::gates::GateKind;
use crabforge::model::{assemble_hamiltonian, ControlValues, TransmonModel, NUM_CHANNELS};
use crabforge::optimize::{evaluate_solution, SynthesisConfig};
use crabforge::propagate::{infidelity, propagate, ControlGrid, FidelityForm};
use crabforge::robustness::{
    apply_coefficient_distortion, apply_white_noise, half_normal_mean, DisturbanceConfig,
};
use crabforge::seeds::derive_seed;
use crabforge::spectrum::amplitude_spectrum;

fn control_values_strategy() -> impl Strategy<Value = ControlValues> {
    let r = -2.0..2.0f64;
    (r.clone(), r.clone(), r.clone(), r.clone(), r)
        .prop_map(|(delta1, delta2, f1, f2, g)| ControlValues {
            delta1,
            delta2,
            f1,
            f2,
            g,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn assembled_hamiltonians_are_hermitian(values in control_values_strategy()) {
        let model = TransmonModel::default();
        let h = assemble_hamiltonian(&model, &values).unwrap();
        prop_assert!(h.hermiticity_deviation() < 1e-12);
    }

    #[test]
    fn seed_derivation_is_deterministic_and_tag_sensitive(
        base in any::<u64>(),
        tag_a in any::<u64>(),
        tag_b in any::<u64>(),
    ) {
        prop_assert_eq!(derive_seed(base, &[tag_a]), derive_seed(base, &[tag_a]));
        prop_assume!(tag_a != tag_b);
        prop_assert_ne!(derive_seed(base, &[tag_a]), derive_seed(base, &[tag_b]));
        prop_assert_ne!(derive_seed(base, &[tag_a, tag_b]), derive_seed(base, &[tag_b, tag_a]));
    }

    #[test]
    fn half_normal_mean_scales_linearly(sigma in 0.0..1e3f64, factor in 0.0..100.0f64) {
        let direct = half_normal_mean(sigma * factor).unwrap();
        let scaled = factor * half_normal_mean(sigma).unwrap();
        let bound = 1e-12 * direct.abs().max(scaled.abs()).max(1e-300);
        prop_assert!((direct - scaled).abs() <= bound);
    }

    #[test]
    fn db_ladder_is_strictly_decreasing(
        start in 1e-6..10.0f64,
        step_db in -6.0..-0.1f64,
    ) {
        let config = DisturbanceConfig {
            start_sigma: start,
            step_db,
            ..DisturbanceConfig::default()
        };
        let ratio = 10f64.powf(step_db / 20.0);
        for n in 0..60 {
            let here = config.sigma_at(n);
            let next = config.sigma_at(n + 1);
            prop_assert!(next < here);
            prop_assert!((next / here - ratio).abs() < 1e-12);
        }
    }

    #[test]
    fn coefficient_flatten_round_trips(seed in any::<u64>(), nc in 1usize..8) {
        let model = TransmonModel::default();
        let basis = sample_basis(&model, nc, RandomizationMode::Qutip, seed).unwrap();
        let mut rng = crabforge::seeds::make_rng(derive_seed(seed, &[7]));
        let mut coeffs = CrabCoefficients::zeros(nc);
        for row in &mut coeffs.channels {
            for c in row.iter_mut() {
                *c = rand::Rng::random_range(&mut rng, -1.0..1.0);
            }
        }
        let flat = coeffs.flatten();
        prop_assert_eq!(flat.len(), NUM_CHANNELS * 2 * nc);
        let back = CrabCoefficients::from_flat(&flat, nc).unwrap();
        prop_assert_eq!(back, coeffs.clone());
        prop_assert_eq!(basis.coefficients_per_channel(), 2 * nc);
    }

    #[test]
    fn synthesis_is_linear_in_coefficients(
        seed in any::<u64>(),
        alpha in -3.0..3.0f64,
        t_frac in 0.0..1.0f64,
    ) {
        let model = TransmonModel::default();
        let nc = 4;
        let basis = sample_basis(&model, nc, RandomizationMode::Original, seed).unwrap();
        let mut rng = crabforge::seeds::make_rng(derive_seed(seed, &[13]));
        let mut a = CrabCoefficients::zeros(nc);
        let mut b = CrabCoefficients::zeros(nc);
        for row in a.channels.iter_mut().chain(b.channels.iter_mut()) {
            for c in row.iter_mut() {
                *c = rand::Rng::random_range(&mut rng, -1.0..1.0);
            }
        }
        let combined = CrabCoefficients {
            channels: a
                .channels
                .iter()
                .zip(&b.channels)
                .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + alpha * y).collect())
                .collect(),
        };
        let t = t_frac * model.gate_time;
        for ch in 0..NUM_CHANNELS {
            let lhs = synthesize_signal(&basis, &combined, ch, t).unwrap();
            let rhs = synthesize_signal(&basis, &a, ch, t).unwrap()
                + alpha * synthesize_signal(&basis, &b, ch, t).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-10, "channel {}: {} vs {}", ch, lhs, rhs);
        }
    }

    #[test]
    fn parseval_identity_is_tight(seed in any::<u64>(), n in 16usize..200) {
        let mut rng = crabforge::seeds::make_rng(seed);
        let samples: Vec<f64> = (0..n)
            .map(|_| rand::Rng::random_range(&mut rng, -2.0..2.0))
            .collect();
        let spectrum = amplitude_spectrum(&samples, 0.04).unwrap();
        prop_assert!(spectrum.parseval_residual(&samples).unwrap() < 1e-9);
    }

    #[test]
    fn disturbances_are_seed_reproducible(seed in any::<u64>(), sigma in 0.0..2.0f64) {
        let model = TransmonModel::default();
        let basis = sample_basis(&model, 3, RandomizationMode::Qutip, seed).unwrap();
        let mut coeffs = CrabCoefficients::zeros(3);
        coeffs.channels[2][0] = 0.3;
        let grid = BasisTable::new(&basis, 24).unwrap().fill_grid(&coeffs).unwrap();
        let a = apply_white_noise(&grid, sigma, seed).unwrap();
        let b = apply_white_noise(&grid, sigma, seed).unwrap();
        prop_assert_eq!(a, b);

        let solution = crabforge::crab::CrabSolution {
            basis,
            coefficients: coeffs,
            model,
            gate: GateKind::Cnot,
            achieved_infidelity: 0.5,
            rng_seed: seed,
        };
        let da = apply_coefficient_distortion(&solution, sigma, seed).unwrap();
        let db = apply_coefficient_distortion(&solution, sigma, seed).unwrap();
        prop_assert_eq!(da, db);
    }
}

proptest! {
    // propagation-heavy cases kept small
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn propagation_is_unitary_for_random_controls(seed in any::<u64>()) {
        let model = TransmonModel::default();
        let nc = 3;
        let basis = sample_basis(&model, nc, RandomizationMode::Qutip, seed).unwrap();
        let mut rng = crabforge::seeds::make_rng(derive_seed(seed, &[21]));
        let mut coeffs = CrabCoefficients::zeros(nc);
        for row in &mut coeffs.channels {
            for c in row.iter_mut() {
                *c = rand::Rng::random_range(&mut rng, -0.6..0.6);
            }
        }
        let grid = BasisTable::new(&basis, 120).unwrap().fill_grid(&coeffs).unwrap();
        let result = propagate(&model, &grid).unwrap();
        prop_assert!(result.full_unitary.unitarity_deviation() < 1e-9);
        prop_assert!(result.leakage >= 0.0 && result.leakage <= 1.0);

        // global phase on the target leaves the infidelity unchanged
        let target = GateKind::Cnot.target_unitary();
        let base = infidelity(&result, &target, FidelityForm::Linear).unwrap();
        let phase = Complex64::from_polar(1.0, 1.234);
        let rotated = target.scale(phase);
        let shifted = infidelity(&result, &rotated, FidelityForm::Linear).unwrap();
        prop_assert!((base - shifted).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&base));
    }

    #[test]
    fn stored_solutions_reevaluate_identically(seed in any::<u64>()) {
        let model = TransmonModel::default();
        let synth = SynthesisConfig {
            num_components: 2,
            num_steps: 40,
            ..SynthesisConfig::default()
        };
        let opt = crabforge::optimize::OptimizerConfig {
            max_cost_evaluations: 150,
            restart_limit: 1,
            ..crabforge::optimize::OptimizerConfig::default()
        };
        let outcome =
            crabforge::optimize::optimize_gate(&model, GateKind::Phase, &synth, &opt, seed)
                .unwrap();
        let again = evaluate_solution(&outcome.solution, &synth).unwrap();
        prop_assert_eq!(again.to_bits(), outcome.solution.achieved_infidelity.to_bits());
    }
}

#[test]
fn clamped_cost_matches_manually_clamped_signals() {
    let model = TransmonModel::default();
    let nc = 3;
    let bound = 0.2;
    let basis = sample_basis(&model, nc, RandomizationMode::Qutip, 77).unwrap();
    let mut coeffs = CrabCoefficients::zeros(nc);
    coeffs.channels[2][0] = 0.9;
    coeffs.channels[0][4] = -0.7;
    let synth_clamped = SynthesisConfig {
        num_components: nc,
        num_steps: 64,
        clamp: Some(bound),
        ..SynthesisConfig::default()
    };
    let target = GateKind::Cnot.target_unitary();
    let mut ctx = crabforge::optimize::CostContext::new(
        &model,
        &basis,
        &target,
        &synth_clamped,
    )
    .unwrap();
    let clamped_cost = ctx.evaluate_coefficients(&coeffs).unwrap();

    let grid = BasisTable::new(&basis, 64).unwrap().fill_grid(&coeffs).unwrap();
    let mut clipped = grid.values().to_vec();
    for v in &mut clipped {
        *v = v.clamp(-bound, bound);
    }
    let clipped_grid = ControlGrid::new(grid.num_steps(), grid.dt(), clipped).unwrap();
    let result = propagate(&model, &clipped_grid).unwrap();
    let direct = infidelity(&result, &target, FidelityForm::Linear).unwrap();
    assert_eq!(clamped_cost.to_bits(), direct.to_bits());
}
