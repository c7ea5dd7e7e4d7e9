//! End-to-end protocol behavior: copy accounting, noise response,
//! adversary stream alignment, and the verification-to-sensing pipeline.

use std::collections::BTreeMap;

use sensornet_core::adversary::{
    AdversaryModel, ChannelSpec, DishonestBehavior, NetworkTopology, SourceAttack, VerifierRole,
};
use sensornet_core::encoding::{LinearFunctionSpec, PhaseVector};
use sensornet_core::qcore::QuantumState;
use sensornet_core::sensing::{self, SensingParams};
use sensornet_core::verification::{self, RunOptions, VerificationParams};

fn all_honest(n: usize) -> NetworkTopology {
    let honest: Vec<usize> = (0..n).collect();
    NetworkTopology::new(n, &honest, VerifierRole::Node { index: 0 }).unwrap()
}

// Constants inside the verifier-led window 3/(2m) < c < (n-1)^2/4 for the
// sizes these tests touch, with the test count pinned down for speed.
fn valid_params(n: usize, n_test: usize) -> VerificationParams {
    let (m, c) = match n {
        2 => (8.0, 0.2),
        3 => (4.0, 0.5),
        _ => (1.0, 2.0),
    };
    let mut params = VerificationParams::new(m, c, n, 1).unwrap();
    params.n_test_override = Some(n_test);
    params
}

#[test]
fn honest_runs_accept_across_sizes_with_exact_copy_accounting() {
    for n in 2..=5 {
        let params = valid_params(n, 7);
        let out = verification::run_verification(
            &params,
            &all_honest(n),
            &AdversaryModel::none(),
            41 + n as u64,
        )
        .unwrap();
        assert!(out.accepted, "n {n}");
        assert_eq!(out.transcript.average_failure_rate, 0.0);
        assert_eq!(out.transcript.copies_tested, n * 7);
        assert_eq!(
            out.transcript.copies_tested + out.transcript.copies_discarded + 1,
            out.transcript.n_total
        );
        assert!(out.transcript.target_copy_index < out.transcript.n_total);
        assert_eq!(out.effective_n, n);
    }
}

#[test]
fn observed_failure_rate_rises_with_dephasing_strength() {
    let topo = all_honest(3);
    let mut means = Vec::new();
    for &p in &[0.02, 0.06, 0.12] {
        let model = AdversaryModel::uniform_channel(3, ChannelSpec::Dephasing { p });
        let params = valid_params(3, 20);
        let mut total = 0.0;
        for seed in 0..50u64 {
            let out = verification::run_verification(&params, &topo, &model, seed).unwrap();
            total += out.transcript.average_failure_rate;
        }
        means.push(total / 50.0);
    }
    assert!(
        means[0] < means[1] && means[1] < means[2],
        "means {means:?}"
    );
    // Exact per-test failure probability for dephasing p on every qubit
    // of a 3-qubit resource is (1 - (1-2p)^3)/2; the empirical means sit
    // on it within sampling noise.
    for (&p, &mean) in [0.02f64, 0.06, 0.12].iter().zip(&means) {
        let exact = (1.0 - (1.0 - 2.0 * p).powi(3)) / 2.0;
        assert!(
            (mean - exact).abs() < 0.03,
            "p {p}: mean {mean} vs exact {exact}"
        );
    }
}

#[test]
fn changing_one_liars_rate_leaves_the_rest_of_the_coalition_untouched() {
    // Nodes 1 and 2 are dishonest. Raising node 1's flip rate must not
    // shift node 2's draws or any honest presentation draw: same copies,
    // same node-2 outcomes, same honest outcomes, test by test.
    let topo = NetworkTopology::new(4, &[0, 3], VerifierRole::Node { index: 0 }).unwrap();
    let run = |q1: f64| {
        let mut behavior = BTreeMap::new();
        behavior.insert(
            1,
            DishonestBehavior {
                report_flip_prob: q1,
                ..DishonestBehavior::default()
            },
        );
        behavior.insert(
            2,
            DishonestBehavior {
                report_flip_prob: 0.5,
                ..DishonestBehavior::default()
            },
        );
        let model = AdversaryModel {
            dishonest_behavior: behavior,
            coordination_seed: 99,
            ..AdversaryModel::default()
        };
        verification::run_verification_with(
            &valid_params(4, 15),
            &topo,
            &model,
            7,
            &[],
            &RunOptions { record_tests: true },
        )
        .unwrap()
    };

    let quiet = run(0.0);
    let loud = run(0.9);
    let qr = &quiet.transcript.records;
    let lr = &loud.transcript.records;
    assert_eq!(qr.len(), lr.len());
    assert!(!qr.is_empty());

    let mut node1_changed = false;
    for (a, b) in qr.iter().zip(lr.iter()) {
        assert_eq!(a.copy_index, b.copy_index);
        assert_eq!(a.generator_index, b.generator_index);
        assert_eq!(a.node_outcomes[0], b.node_outcomes[0]);
        assert_eq!(a.node_outcomes[2], b.node_outcomes[2], "node 2 drifted");
        assert_eq!(a.node_outcomes[3], b.node_outcomes[3]);
        node1_changed |= a.node_outcomes[1] != b.node_outcomes[1];
    }
    assert!(node1_changed, "node 1 never lied at q = 0.9");
}

#[test]
fn hopeless_sources_never_slip_through_in_five_hundred_runs() {
    let topo = all_honest(3);
    let model = AdversaryModel {
        source_attack: SourceAttack::FixedState(QuantumState::all_zeros(3).unwrap()),
        ..AdversaryModel::default()
    };
    let params = valid_params(3, 10);
    let mut accepted = 0;
    for seed in 0..500u64 {
        let out = verification::run_verification(&params, &topo, &model, seed).unwrap();
        if out.accepted {
            accepted += 1;
        }
        // Every test of an all-zeros copy is a coin flip; the observed
        // rate stays far above the acceptance threshold.
        assert!(out.transcript.average_failure_rate > 0.05);
    }
    assert_eq!(accepted, 0);
}

#[test]
fn sensing_precision_follows_heisenberg_scaling() {
    // At n theta = pi/2 the average-phase estimator has variance
    // 1/(nu n^2); doubling n must quarter it. Checked through the actual
    // protocol, not the formula.
    let nu = 400;
    let mut mse = Vec::new();
    for &n in &[2usize, 4] {
        let theta = std::f64::consts::FRAC_PI_2 / n as f64;
        let params = SensingParams::new(
            nu,
            valid_params(n, 5),
            LinearFunctionSpec::average(n),
            PhaseVector::uniform(n, theta),
        )
        .unwrap();
        let mut total = 0.0;
        for rep in 0..60u64 {
            let report = sensing::run_sensing_protocol(
                &params,
                &all_honest(n),
                &AdversaryModel::none(),
                1000 + rep,
            )
            .unwrap();
            total += report.squared_error;
            assert_eq!(report.rounds_used, nu);
        }
        mse.push(total / 60.0);
    }
    let observed_ratio = mse[0] / mse[1];
    assert!(
        observed_ratio > 2.0 && observed_ratio < 8.0,
        "variance ratio {observed_ratio}, predicted 4 within factor 2"
    );
    for (i, &n) in [2usize, 4].iter().enumerate() {
        let predicted = 1.0 / (nu as f64 * (n * n) as f64);
        assert!(
            mse[i] / predicted < 2.0 && mse[i] / predicted > 0.5,
            "n {n}: mse {} vs predicted {predicted}",
            mse[i]
        );
    }
}

#[test]
fn estimator_variance_saturates_the_cramer_rao_bound_for_ghz() {
    // QFI of the n-qubit GHZ family in the average direction is n^2, so
    // the Cramer-Rao floor for scale 1/n over nu rounds is 1/(nu n^2),
    // which is exactly the estimator variance the report computes.
    use sensornet_core::metrology::cramer_rao_bound;
    for n in [2usize, 4, 6] {
        let nu = 250;
        let scale = 1.0 / n as f64;
        let variance = scale * scale / nu as f64;
        let crb = cramer_rao_bound((n * n) as f64, nu).unwrap();
        assert!((variance - crb).abs() < 1e-15, "n {n}");
    }
}

#[test]
fn transcripts_round_trip_through_json() {
    let topo = all_honest(4);
    let model = AdversaryModel::uniform_channel(4, ChannelSpec::Depolarizing { p: 0.05 });
    let out = verification::run_verification_with(
        &valid_params(4, 6),
        &topo,
        &model,
        11,
        &[],
        &RunOptions { record_tests: true },
    )
    .unwrap();
    let json = serde_json::to_string(&out.transcript).unwrap();
    let back: verification::VerificationTranscript = serde_json::from_str(&json).unwrap();
    assert_eq!(back.n_test, out.transcript.n_test);
    assert_eq!(
        back.per_generator_failures,
        out.transcript.per_generator_failures
    );
    assert_eq!(back.records, out.transcript.records);
    assert_eq!(back.accepted, out.transcript.accepted);
}

#[test]
fn same_seed_reproduces_the_whole_sensing_report() {
    let params = SensingParams::new(
        25,
        valid_params(3, 8),
        LinearFunctionSpec::average(3),
        PhaseVector::uniform(3, 0.4),
    )
    .unwrap();
    let topo = all_honest(3);
    let model = AdversaryModel::uniform_channel(3, ChannelSpec::Dephasing { p: 0.02 });
    let a = sensing::run_sensing_protocol(&params, &topo, &model, 314).unwrap();
    let b = sensing::run_sensing_protocol(&params, &topo, &model, 314).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    let c = sensing::run_sensing_protocol(&params, &topo, &model, 315).unwrap();
    assert_ne!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&c).unwrap()
    );
}

#[test]
fn generalized_resources_verify_cleanly() {
    // Weight vector (2, -1): three physical qubits, X conjugation on the
    // last. A noiseless run must accept with zero observed failures. The
    // window constants follow the three-qubit resource, not the node
    // count.
    let function = LinearFunctionSpec::new(1.0, vec![2, -1]).unwrap();
    let mut verification = VerificationParams::new(4.0, 0.5, 2, 1).unwrap();
    verification.n_test_override = Some(6);
    let params =
        SensingParams::new(10, verification, function, PhaseVector(vec![0.2, 0.5])).unwrap();
    let topo = all_honest(2);
    let report =
        sensing::run_sensing_protocol(&params, &topo, &AdversaryModel::none(), 8).unwrap();
    assert_eq!(report.rounds_used, 10);
    assert_eq!(report.mean_accepted_failure_rate, 0.0);
    assert!((report.true_phase_sum - (2.0 * 0.2 - 0.5)).abs() < 1e-12);
}
