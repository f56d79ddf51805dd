//! Cross-module pipeline checks: builder → transpiler → schedule timing,
//! Markovian invariance of the snapshot-noise decay, and the noisy-vs-ideal
//! Rabi comparison.

use std::f64::consts::PI;

use zenoq::experiments::{decay_sweep, rabi_sweep, sweep_csv, Backend};
use zenoq::simulator::{noisy_distribution, run_ideal, NoiseModel};
use zenoq::transpiler::lower;
use zenoq::zeno::{
    build_decay_circuit, build_rabi_circuit, record_survival_from_distribution, DecayModel,
    DecaySpec, RabiSpec,
};
use zenoq::{DeviceSnapshot, Instruction};

/// The six-measurement free-decay circuit on the nairobi-like snapshot, at
/// the reference 10.25 µs observation time, must schedule to a running time
/// (up to readout) within 2% of 41024 dt.
#[test]
fn six_measurement_decay_running_time_matches_the_reference_scale() {
    let device = DeviceSnapshot::builtin("nairobi-like").unwrap();
    let spec = DecaySpec::new(10.25, 6, DecayModel::SnapshotNoise).unwrap();
    let built = build_decay_circuit(&spec, &device).unwrap();
    let lowered = lower(&built.circuit, &device).unwrap();
    let running = lowered.schedule.measure_start(&lowered.circuit) as f64;
    let reference = 41024.0;
    assert!(
        (running - reference).abs() / reference < 0.02,
        "running time {running} dt is more than 2% from {reference} dt"
    );
    // Delay rounding stays within half a granularity step per delay.
    for adj in &lowered.delay_adjustments {
        assert!(adj.error_dt.unsigned_abs() <= device.granularity_dt / 2);
    }
    // Everything on basis gates and coupling edges.
    for instr in lowered.circuit.instructions() {
        if instr.is_gate() {
            assert!(device.is_basis_gate(instr.name()));
            let q = instr.qubits();
            if q.len() == 2 {
                assert!(device.has_directed_edge(q[0], q[1]));
            }
        }
    }
}

/// With relaxation-only noise the survival probability cannot depend on the
/// number of intermediate measurements: Markovian decay is exponential and
/// [e^{-t/N·T1}]^N = e^{-t/T1}. This is the boundary that motivates the
/// pseudomode model.
#[test]
fn markovian_decay_survival_is_flat_in_the_measurement_count() {
    let device = DeviceSnapshot::linear(7);
    let noise = NoiseModel::from_snapshot(&device)
        .with_dephasing(false)
        .with_readout(false);
    let t_us = 9.0;
    let mut survivals = Vec::new();
    for n in [1u32, 2, 4, 6] {
        let spec = DecaySpec::new(t_us, n, DecayModel::SnapshotNoise).unwrap();
        let built = build_decay_circuit(&spec, &device).unwrap();
        let lowered = lower(&built.circuit, &device).unwrap();
        let (dist, _) = noisy_distribution(&lowered.circuit, &noise).unwrap();
        // Marginal survival of the system bit (clbit 0).
        let p: f64 = dist
            .probs()
            .iter()
            .enumerate()
            .filter(|(i, _)| i & 1 == 1)
            .map(|(_, &v)| v)
            .sum();
        // Matches the exponential over this schedule's decay window up to
        // the O((Δt_CNOT/T1)²) corrections the swap blocks introduce (the
        // excitation passes through two-excitation states mid-swap).
        let window_us =
            lowered.schedule.measure_start(&lowered.circuit) as f64 * device.dt_ns * 1e-3;
        let expect = (-window_us / device.qubits[0].t1_us).exp();
        assert!(
            (p - expect).abs() < 1e-3,
            "N={n}: survival {p} deviates from the Markovian value {expect}"
        );
        survivals.push(p);
    }
    // Flat across N: no Zeno enhancement can come from Markovian noise.
    for pair in survivals.windows(2) {
        assert!(
            (pair[1] - pair[0]).abs() < 1e-3,
            "survival varies with N: {survivals:?}"
        );
    }
}

/// Under the full snapshot noise the Rabi survival sits below the ideal
/// curve and the gap grows with the number of measurements (more gates,
/// more ancillas, more readout).
#[test]
fn noisy_rabi_survival_underestimates_the_ideal_curve() {
    let device = DeviceSnapshot::builtin("nairobi-like").unwrap();
    let noise = NoiseModel::from_snapshot(&device);
    let theta = PI / 2.0;
    let mut gaps = Vec::new();
    for n in [1u32, 2, 4] {
        let spec = RabiSpec::new(theta, n).unwrap();
        let logical = build_rabi_circuit(&spec).unwrap();
        let lowered = lower(&logical, &device).unwrap();
        let ideal = run_ideal(&logical).unwrap().distribution;
        let (noisy, _) = noisy_distribution(&lowered.circuit, &noise).unwrap();
        let records: Vec<usize> = (1..=n as usize).collect();
        let p_ideal = record_survival_from_distribution(&ideal, 0, &records, 0, 1).p;
        let p_noisy = record_survival_from_distribution(&noisy, 0, &records, 0, 1).p;
        assert!(p_noisy < p_ideal, "N={n}: {p_noisy} not below {p_ideal}");
        gaps.push(p_ideal - p_noisy);
    }
    assert!(
        gaps.windows(2).all(|w| w[1] > w[0]),
        "noise gap should grow with N: {gaps:?}"
    );
}

/// Return trajectories make the plain marginal sit strictly above the
/// repeated-measurement survival; both are exposed and must not be mixed up.
#[test]
fn marginal_survival_exceeds_record_survival() {
    let spec = RabiSpec::new(PI / 2.0, 2).unwrap();
    let out = run_ideal(&build_rabi_circuit(&spec).unwrap()).unwrap();
    let record = record_survival_from_distribution(&out.distribution, 0, &[1, 2], 0, 1).p;
    let marginal: f64 = out
        .distribution
        .probs()
        .iter()
        .enumerate()
        .filter(|(i, _)| i & 1 == 0)
        .map(|(_, &v)| v)
        .sum();
    assert!((record - 0.72855).abs() < 1e-4);
    assert!((marginal - 0.75).abs() < 1e-9);
    assert!(marginal > record);
}

/// The whole sweep layer is deterministic: identical seeds give identical
/// CSV bytes, and the decay builder emits identical circuits.
#[test]
fn sweeps_and_lowering_are_reproducible() {
    let device = DeviceSnapshot::builtin("lima-like").unwrap();
    let a = rabi_sweep(&[PI / 2.0, PI / 5.0], &[0, 1, 2], 3000, Backend::Noisy, &device, 99)
        .unwrap();
    let b = rabi_sweep(&[PI / 2.0, PI / 5.0], &[0, 1, 2], 3000, Backend::Noisy, &device, 99)
        .unwrap();
    assert_eq!(sweep_csv(&a), sweep_csv(&b));

    let spec = DecaySpec::new(8.0, 2, DecayModel::SnapshotNoise).unwrap();
    let c1 = build_decay_circuit(&spec, &device).unwrap();
    let c2 = build_decay_circuit(&spec, &device).unwrap();
    assert_eq!(c1.circuit.to_json(), c2.circuit.to_json());

    let grid = [0.0, 2.0, 4.0, 6.0, 8.0];
    let s1 = decay_sweep(&grid, 2, &DecayModel::SnapshotNoise, 2000, Backend::Noisy, &device, 5)
        .unwrap();
    let s2 = decay_sweep(&grid, 2, &DecayModel::SnapshotNoise, 2000, Backend::Noisy, &device, 5)
        .unwrap();
    assert_eq!(sweep_csv(&s1.rows), sweep_csv(&s2.rows));
    assert_eq!(s1.fit, s2.fit);
}

/// Lowering the Rabi circuit onto the nairobi-like device keeps every CNOT
/// on a coupling edge and only emits basis gates.
#[test]
fn lowered_rabi_circuit_respects_the_device() {
    let device = DeviceSnapshot::builtin("nairobi-like").unwrap();
    let spec = RabiSpec::new(PI / 3.0, 2).unwrap();
    let lowered = lower(&build_rabi_circuit(&spec).unwrap(), &device).unwrap();
    for instr in lowered.circuit.instructions() {
        if instr.is_gate() {
            assert!(device.is_basis_gate(instr.name()), "{instr:?}");
            if let Instruction::Cx { control, target } = instr {
                assert!(device.has_directed_edge(*control, *target));
            }
        }
    }
}
