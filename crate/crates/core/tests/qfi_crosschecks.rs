//! Fisher-information cross-checks: every analytic or spectral QFI value
//! must agree with the independent Bures finite-difference route, and the
//! closed-form values for GHZ-type states must come out exactly.

use rand::Rng;

use sensornet_core::encoding::QubitAssignment;
use sensornet_core::ghz;
use sensornet_core::metrology::{
    self, cramer_rao_bound, continuity_bound, qfi_bures_oracle, qfi_mixed, qfi_pure,
    ParameterizedFamily,
};
use sensornet_core::qcore::{self, C64, QuantumState};
use sensornet_core::rng;
use sensornet_core::tol;

const FD_STEP: f64 = 1e-5;
// Mixed-state fidelities come out of an eigensolver with absolute noise
// near 1e-12; the step must keep the Bures increment well above it.
const MIXED_FD_STEP: f64 = 1e-4;

fn random_pure(n_qubits: usize, rng: &mut rng::SimRng) -> QuantumState {
    let dim = 1usize << n_qubits;
    let amps: Vec<C64> = (0..dim)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let amps: Vec<C64> = amps.iter().map(|a| a / norm).collect();
    QuantumState::pure_from_slice(&amps).unwrap()
}

fn random_diag(dim: usize, rng: &mut rng::SimRng) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect()
}

#[test]
fn pure_qfi_agrees_with_the_bures_route_on_random_families() {
    let mut rng = rng::stream(0x51AB, &[]);
    for trial in 0..50 {
        let state = random_pure(2, &mut rng);
        let diag = random_diag(4, &mut rng);
        let family = ParameterizedFamily::from_diagonal(state, diag);

        let analytic = qfi_pure(&family).unwrap().value;
        let bures = qfi_bures_oracle(&family, FD_STEP).unwrap().value;
        let tolerance = 2e-3 * analytic.max(1.0);
        assert!(
            (analytic - bures).abs() < tolerance,
            "trial {trial}: analytic {analytic} vs bures {bures}"
        );
    }
}

#[test]
fn mixed_qfi_agrees_with_the_bures_route_on_random_families() {
    let mut rng = rng::stream(0x313A, &[]);
    for trial in 0..30 {
        // Full-rank mixed state: a rank-2 reduction blended with a bit of
        // the maximally mixed state, so every Uhlmann eigenvalue stays
        // well conditioned.
        let big = random_pure(3, &mut rng);
        let reduced = qcore::partial_trace(&big, &[0, 1]).unwrap();
        let mut rho = reduced.density_matrix() * C64::new(0.8, 0.0);
        for i in 0..4 {
            rho[(i, i)] += C64::new(0.05, 0.0);
        }
        let state = QuantumState::mixed(rho).unwrap();
        let diag = random_diag(4, &mut rng);
        let family = ParameterizedFamily::from_diagonal(state, diag);

        let spectral = qfi_mixed(&family, tol::QFI_TRUNCATION_TOL).unwrap().value;
        let bures = qfi_bures_oracle(&family, MIXED_FD_STEP).unwrap().value;
        let tolerance = 5e-3 * spectral.max(1.0);
        assert!(
            (spectral - bures).abs() < tolerance,
            "trial {trial}: spectral {spectral} vs bures {bures}"
        );
    }
}

#[test]
fn rank_deficient_qfi_agrees_with_a_coarse_bures_route() {
    // Dense rank-2 states put sqrt(eps)-sized noise into the Uhlmann
    // fidelity through their near-zero eigenvalues, so the difference
    // quotient needs a coarser step to rise above it. This is also the
    // regime that exercises the truncated-support handling.
    let mut rng = rng::stream(0xDEF1C, &[]);
    for trial in 0..30 {
        let big = random_pure(3, &mut rng);
        let reduced = qcore::partial_trace(&big, &[0, 1]).unwrap();
        let diag = random_diag(4, &mut rng);
        let family = ParameterizedFamily::from_diagonal(reduced, diag);

        let spectral = qfi_mixed(&family, tol::QFI_TRUNCATION_TOL).unwrap().value;
        let bures = qfi_bures_oracle(&family, 1e-2).unwrap().value;
        let tolerance = 1e-2 * spectral.max(1.0);
        assert!(
            (spectral - bures).abs() < tolerance,
            "trial {trial}: spectral {spectral} vs bures {bures}"
        );
    }
}

#[test]
fn ghz_reaches_heisenberg_scaling() {
    for n in 2..=6 {
        let state = ghz::ghz_state(n).unwrap();
        let assignment = QubitAssignment::one_per_node(n);
        let family =
            ParameterizedFamily::along_direction(state, &assignment, &vec![1.0; n]).unwrap();
        let qfi = qfi_pure(&family).unwrap().value;
        assert!(
            (qfi - (n * n) as f64).abs() < 1e-9,
            "n {n}: qfi {qfi}"
        );
    }
}

#[test]
fn product_states_stay_at_the_standard_quantum_limit() {
    for n in 2..=6 {
        let state = QuantumState::plus_product(n).unwrap();
        let assignment = QubitAssignment::one_per_node(n);
        let family =
            ParameterizedFamily::along_direction(state, &assignment, &vec![1.0; n]).unwrap();
        let qfi = qfi_pure(&family).unwrap().value;
        assert!((qfi - n as f64).abs() < 1e-9, "n {n}: qfi {qfi}");
    }
}

#[test]
fn dephased_ghz_follows_the_coherence_squared_law() {
    for &coherence in &[0.3, 0.7, 0.95] {
        let state = ghz::dephased_ghz(3, coherence).unwrap();
        let assignment = QubitAssignment::one_per_node(3);
        let family =
            ParameterizedFamily::along_direction(state, &assignment, &[1.0, 1.0, 1.0]).unwrap();
        let qfi = qfi_mixed(&family, tol::QFI_TRUNCATION_TOL).unwrap().value;
        let expected = coherence * coherence * 9.0;
        assert!(
            (qfi - expected).abs() < 1e-8,
            "coherence {coherence}: qfi {qfi} vs {expected}"
        );

        let bures = qfi_bures_oracle(&family, MIXED_FD_STEP).unwrap().value;
        assert!((qfi - bures).abs() < 5e-3 * expected.max(1.0));
    }
}

#[test]
fn qfi_differences_respect_the_continuity_bound() {
    // Generator for the all-ones direction on 3 qubits has inf-norm 3.
    let h_norm = 3.0;
    let assignment = QubitAssignment::one_per_node(3);
    let pure = ghz::ghz_state(3).unwrap();
    let pure_family =
        ParameterizedFamily::along_direction(pure.clone(), &assignment, &[1.0, 1.0, 1.0]).unwrap();
    let pure_qfi = qfi_pure(&pure_family).unwrap().value;

    for &coherence in &[0.8, 0.9, 0.99] {
        let noisy = ghz::dephased_ghz(3, coherence).unwrap();
        let noisy_family =
            ParameterizedFamily::along_direction(noisy.clone(), &assignment, &[1.0, 1.0, 1.0])
                .unwrap();
        let noisy_qfi = qfi_mixed(&noisy_family, tol::QFI_TRUNCATION_TOL)
            .unwrap()
            .value;
        let f = qcore::fidelity(&pure, &noisy).unwrap();
        let bound = continuity_bound(f, h_norm).unwrap();
        let diff = (pure_qfi - noisy_qfi).abs();
        assert!(
            diff <= bound + 1e-9,
            "coherence {coherence}: diff {diff} exceeds bound {bound}"
        );
    }
}

#[test]
fn black_box_families_match_their_phase_encoded_twins() {
    // The same physical family expressed both ways must produce the same
    // number through the two completely different code paths.
    let state = ghz::ghz_state(2).unwrap();
    let assignment = QubitAssignment::one_per_node(2);
    let encoded =
        ParameterizedFamily::along_direction(state, &assignment, &[1.0, 1.0]).unwrap();
    let analytic = qfi_pure(&encoded).unwrap().value;

    let twin = ParameterizedFamily::black_box(
        move |t| {
            let base = ghz::ghz_state(2).unwrap();
            let assignment = QubitAssignment::one_per_node(2);
            let family =
                ParameterizedFamily::along_direction(base, &assignment, &[1.0, 1.0]).unwrap();
            family.state_at(t)
        },
        0.0,
    );
    let numeric = qfi_pure(&twin).unwrap().value;
    assert!(
        (analytic - numeric).abs() < 1e-4 * analytic,
        "analytic {analytic} vs black box {numeric}"
    );
}

#[test]
fn cramer_rao_bound_arithmetic() {
    assert!((cramer_rao_bound(4.0, 100).unwrap() - 0.0025).abs() < 1e-15);
    assert!((cramer_rao_bound(9.0, 1).unwrap() - 1.0 / 9.0).abs() < 1e-15);
    assert!(cramer_rao_bound(0.0, 100).is_err());
    assert!(cramer_rao_bound(4.0, 0).is_err());
}

#[test]
fn hiding_leaves_phase_sum_states_silent() {
    // The co-varying direction (one node up, the honest rest compensating)
    // is exactly the direction the privacy analysis scores; on GHZ it
    // must vanish while the frozen direction does not.
    let state = ghz::ghz_state(3).unwrap();
    let assignment = QubitAssignment::one_per_node(3);

    let covarying =
        ParameterizedFamily::along_direction(state.clone(), &assignment, &[1.0, -0.5, -0.5])
            .unwrap();
    assert!(qfi_pure(&covarying).unwrap().value.abs() < 1e-12);

    let frozen =
        ParameterizedFamily::along_direction(state, &assignment, &[1.0, 0.0, 0.0]).unwrap();
    let frozen_qfi = qfi_pure(&frozen).unwrap().value;
    assert!((frozen_qfi - 1.0).abs() < 1e-10, "frozen {frozen_qfi}");
}

#[test]
fn privacy_epsilon_ranks_known_states_correctly() {
    let assignment = QubitAssignment::one_per_node(3);
    let phases = sensornet_core::encoding::PhaseVector::uniform(3, 0.2);
    let honest = [0usize, 1, 2];

    let ghz_leak = metrology::privacy_epsilon(
        &ghz::ghz_state(3).unwrap(),
        &assignment,
        &phases,
        &honest,
        tol::QFI_TRUNCATION_TOL,
    )
    .unwrap();
    assert!(ghz_leak.epsilon < 1e-12);

    let product_leak = metrology::privacy_epsilon(
        &QuantumState::plus_product(3).unwrap(),
        &assignment,
        &phases,
        &honest,
        tol::QFI_TRUNCATION_TOL,
    )
    .unwrap();
    // Each node's best hiding on a product state still leaves QFI 1,
    // normalized by the squared honest count.
    assert!((product_leak.epsilon - 1.0 / 9.0).abs() < 1e-9);
    assert!(product_leak.epsilon > ghz_leak.epsilon);
}
