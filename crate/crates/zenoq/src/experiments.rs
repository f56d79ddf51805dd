//! Experiment sweep drivers and the report files the CLI writes: survival
//! CSVs, Zeno-fit JSON, calibration matrices and mitigation reports.

use serde::Serialize;

use crate::circuit::Circuit;
use crate::device::DeviceSnapshot;
use crate::error::{Error, Result};
use crate::mitigation::{
    assemble_matrix, calibration_circuits_on, fidelity, mitigate_constrained, mitigate_inverse,
    CalibrationMatrix,
};
use crate::simulator::{
    run_ideal, run_noisy, run_sampling, CountsHistogram, NoiseModel,
};
use crate::transpiler::lower;
use crate::zeno::{
    build_decay_circuit, build_rabi_circuit, fit_zeno_time_from, record_survival,
    record_survival_from_distribution, theory_decay, theory_rabi, DecayModel, DecaySpec,
    ProbEstimate, RabiSpec, SurvivalPoint, ZenoFit,
};

/// Which simulation backend a sweep runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Ideal,
    Sampling,
    Noisy,
}

impl std::str::FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Backend> {
        match s {
            "ideal" => Ok(Backend::Ideal),
            "sampling" => Ok(Backend::Sampling),
            "noisy" => Ok(Backend::Noisy),
            other => Err(Error::InvalidArgument(format!(
                "unknown backend '{other}' (expected ideal, sampling or noisy)"
            ))),
        }
    }
}

/// One sweep measurement row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub experiment: String,
    pub theta_or_t: f64,
    pub n: u32,
    pub shots: u64,
    pub p: f64,
    pub stderr: f64,
    pub p_theory: f64,
}

/// Render sweep rows as CSV.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("experiment,theta_or_t,n,shots,p,stderr,p_theory\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.experiment, r.theta_or_t, r.n, r.shots, r.p, r.stderr, r.p_theory
        ));
    }
    out
}

/// Parse a sweep CSV back into rows.
pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty sweep CSV".into()))?;
    if header.trim() != "experiment,theta_or_t,n,shots,p,stderr,p_theory" {
        return Err(Error::Parse(format!("unexpected sweep CSV header '{header}'")));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Parse(format!(
                "line {}: expected 7 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let parse_f = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("line {}: bad number '{s}'", lineno + 2)))
        };
        rows.push(SweepRow {
            experiment: fields[0].to_string(),
            theta_or_t: parse_f(fields[1])?,
            n: fields[2]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad n", lineno + 2)))?,
            shots: fields[3]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad shots", lineno + 2)))?,
            p: parse_f(fields[4])?,
            stderr: parse_f(fields[5])?,
            p_theory: parse_f(fields[6])?,
        });
    }
    Ok(rows)
}

/// splitmix64 step, used to derive independent per-cell seeds.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent per-cell seed from a base seed and two indices.
pub fn derive_seed(base: u64, lane: u64, index: u64) -> u64 {
    splitmix64(base ^ splitmix64(lane.wrapping_mul(0x100_0000).wrapping_add(index)))
}

fn record_bits(n: u32) -> Vec<usize> {
    (1..=n as usize).collect()
}

/// Run the Rabi θ/N grid on the chosen backend. The survival column is the
/// repeated-measurement (record) survival; `p_theory` is the closed form,
/// with the bare-rotation `cos²(θ/2)` at N = 0.
pub fn rabi_sweep(
    thetas: &[f64],
    ns: &[u32],
    shots: u64,
    backend: Backend,
    snapshot: &DeviceSnapshot,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for (ti, &theta) in thetas.iter().enumerate() {
        for &n in ns {
            let spec = RabiSpec::new(theta, n)?.with_shots(shots);
            let circuit = build_rabi_circuit(&spec)?;
            let records = record_bits(n);
            let cell_seed = derive_seed(seed, ti as u64, n as u64);
            let est = run_survival(&circuit, &records, 0, backend, snapshot, shots, cell_seed)?;
            let p_theory = if n == 0 {
                (theta / 2.0).cos().powi(2)
            } else {
                theory_rabi(theta, n)?
            };
            rows.push(SweepRow {
                experiment: "rabi".into(),
                theta_or_t: theta,
                n,
                shots,
                p: est.p,
                stderr: est.stderr,
                p_theory,
            });
        }
    }
    Ok(rows)
}

fn run_survival(
    circuit: &Circuit,
    records: &[usize],
    target: u8,
    backend: Backend,
    snapshot: &DeviceSnapshot,
    shots: u64,
    seed: u64,
) -> Result<ProbEstimate> {
    match backend {
        Backend::Ideal => {
            let out = run_ideal(circuit)?;
            Ok(record_survival_from_distribution(
                &out.distribution,
                0,
                records,
                target,
                shots,
            ))
        }
        Backend::Sampling => {
            let hist = run_sampling(circuit, shots, seed)?;
            record_survival(&hist, 0, records, target)
        }
        Backend::Noisy => {
            let lowered = lower(circuit, snapshot)?;
            let noise = NoiseModel::from_snapshot(snapshot);
            let out = run_noisy(&lowered.circuit, &noise, shots, seed)?;
            record_survival(&out.histogram, 0, records, target)
        }
    }
}

/// Result of a decay sweep over a time grid at fixed N.
#[derive(Debug, Clone)]
pub struct DecaySweep {
    pub rows: Vec<SweepRow>,
    pub points: Vec<SurvivalPoint>,
    pub fit: ZenoFit,
    pub home_qubit: usize,
    pub obs_time_us: f64,
}

/// Tabular fit report: one row of device, qubit, observation time and
/// fitted Zeno time.
#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub device: String,
    pub qubit: usize,
    pub n_measurements: u32,
    pub obs_time_us: f64,
    pub t_us: f64,
    pub sigma_us: f64,
    pub residual_norm: f64,
}

impl FitReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit report serialization cannot fail")
    }
}

/// Zeno-time fit with retries from progressively larger starting values,
/// for grids that push the first guess out of the quadratic regime.
pub fn fit_with_retry(points: &[SurvivalPoint], n: u32) -> Result<ZenoFit> {
    let t_max = points.iter().map(|p| p.t_us).fold(0.0, f64::max);
    let mut t0 = match crate::zeno::fit_zeno_time(points, n) {
        Ok(fit) => return Ok(fit),
        Err(Error::Domain(_)) | Err(Error::NonConvergence(_)) => 2.0 * t_max / n as f64,
        Err(e) => return Err(e),
    };
    for _ in 0..3 {
        t0 *= 2.0;
        match fit_zeno_time_from(points, n, t0) {
            Ok(fit) => return Ok(fit),
            Err(Error::Domain(_)) | Err(Error::NonConvergence(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    fit_zeno_time_from(points, n, t0 * 2.0)
}

/// Run a free-decay time grid at fixed N and fit the Zeno time.
///
/// Pseudomode runs are exact-dynamics circuits on the ideal or sampling
/// backend; snapshot-noise runs require the noisy backend. The theory column
/// holds the Zeno curve with T = 1/g for the pseudomode, and the Markovian
/// exponential for snapshot noise (whose N-independence is the point).
pub fn decay_sweep(
    t_grid_us: &[f64],
    n: u32,
    model: &DecayModel,
    shots: u64,
    backend: Backend,
    snapshot: &DeviceSnapshot,
    seed: u64,
) -> Result<DecaySweep> {
    if t_grid_us.is_empty() {
        return Err(Error::InvalidArgument("empty time grid".into()));
    }
    match (&model, backend) {
        (DecayModel::Pseudomode { .. }, Backend::Noisy) => {
            return Err(Error::Unsupported(
                "the pseudomode model is exact dynamics; run it on the ideal or sampling backend"
                    .into(),
            ))
        }
        (DecayModel::SnapshotNoise, b) if b != Backend::Noisy => {
            return Err(Error::Unsupported(
                "snapshot-noise decay only makes sense on the noisy backend".into(),
            ))
        }
        _ => {}
    }
    let mut rows = Vec::new();
    let mut points = Vec::new();
    let mut home = 0usize;
    for (ti, &t_us) in t_grid_us.iter().enumerate() {
        let est = if t_us == 0.0 {
            // The t = 0 point is definitional: nothing has evolved yet.
            ProbEstimate { p: 1.0, stderr: 0.0 }
        } else {
            let spec = DecaySpec::new(t_us, n, model.clone())?.with_shots(shots);
            let built = build_decay_circuit(&spec, snapshot)?;
            home = built.home_qubit;
            let cell_seed = derive_seed(seed, 7 + ti as u64, n as u64);
            run_survival(
                &built.circuit,
                &built.record_clbits,
                1,
                backend,
                snapshot,
                shots,
                cell_seed,
            )?
        };
        let p_theory = match model {
            DecayModel::Pseudomode { g_rad_per_us } => {
                theory_decay(t_us, n, 1.0 / g_rad_per_us).unwrap_or(f64::NAN)
            }
            DecayModel::SnapshotNoise => {
                let readout_us =
                    snapshot.dt_to_us(snapshot.duration_dt("measure", &[home])?);
                let t1 = snapshot.qubit(home)?.t1_us;
                (-(t_us - readout_us).max(0.0) / t1).exp()
            }
        };
        rows.push(SweepRow {
            experiment: "decay".into(),
            theta_or_t: t_us,
            n,
            shots,
            p: est.p,
            stderr: est.stderr,
            p_theory,
        });
        points.push(SurvivalPoint {
            t_us,
            n_measurements: n,
            p: est.p,
            stderr: est.stderr,
        });
    }
    let fit = fit_with_retry(&points, n)?;
    let obs_time_us = t_grid_us.iter().copied().fold(0.0, f64::max);
    Ok(DecaySweep { rows, points, fit, home_qubit: home, obs_time_us })
}

// ---------------------------------------------------------------------------
// Calibration + mitigation pipeline
// ---------------------------------------------------------------------------

/// The data behind one three-panel mitigation comparison: output
/// distributions, fidelities against the ideal distribution, and marginal
/// survival probabilities of the system qubit.
#[derive(Debug, Clone, Serialize)]
pub struct MitigationReport {
    pub theta: f64,
    pub n_measurements: u32,
    pub m_qubits: usize,
    pub shots: u64,
    pub condition_number: f64,
    pub ideal: Vec<f64>,
    pub raw: Vec<f64>,
    pub inverse: Vec<f64>,
    pub constrained: Vec<f64>,
    pub fidelity_raw: f64,
    pub fidelity_inverse: f64,
    pub fidelity_constrained: f64,
    /// True when the inverse quasi-distribution had negative entries that
    /// were clipped for fidelity scoring.
    pub inverse_clipped: bool,
    pub survival_ideal: f64,
    pub survival_raw: f64,
    pub survival_inverse: f64,
    pub survival_constrained: f64,
}

impl MitigationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// Marginal probability that one bit of a (quasi-)distribution reads
/// `target`.
pub fn marginal_bit_probability(values: &[f64], bit: usize, target: u8) -> f64 {
    values
        .iter()
        .enumerate()
        .filter(|(i, _)| ((i >> bit) & 1) as u8 == target)
        .map(|(_, &v)| v)
        .sum()
}

/// Calibration matrix for the register an already-lowered experiment
/// actually reads out, simulated under the given noise model.
pub fn calibrate_register(
    register: &[usize],
    noise: &NoiseModel,
    shots: u64,
    seed: u64,
) -> Result<CalibrationMatrix> {
    let circuits = calibration_circuits_on(register, noise.snapshot().n_qubits)?;
    let hists: Vec<CountsHistogram> = circuits
        .iter()
        .enumerate()
        .map(|(j, c)| {
            run_noisy(c, noise, shots, derive_seed(seed, 101, j as u64))
                .map(|out| out.histogram)
        })
        .collect::<Result<_>>()?;
    assemble_matrix(&hists)
}

/// Run one Rabi configuration under noise, calibrate its readout register,
/// and compare raw, inverse-mitigated and simplex-constrained distributions
/// against the ideal one.
pub fn rabi_mitigation_report(
    theta: f64,
    n: u32,
    shots: u64,
    noise: &NoiseModel,
    seed: u64,
) -> Result<MitigationReport> {
    let spec = RabiSpec::new(theta, n)?.with_shots(shots);
    let logical = build_rabi_circuit(&spec)?;
    let snapshot = noise.snapshot();
    let lowered = lower(&logical, snapshot)?;
    // The register the experiment actually reads, in clbit order.
    let register: Vec<usize> = lowered
        .circuit
        .measurements()
        .iter()
        .map(|&(_, q)| q)
        .collect();
    let a = calibrate_register(&register, noise, shots, seed)?;
    let condition_number = a.condition_number()?;

    let ideal = run_ideal(&logical)?.distribution;
    let raw_hist = run_noisy(&lowered.circuit, noise, shots, derive_seed(seed, 11, 0))?.histogram;
    let raw = raw_hist.to_distribution()?;
    let inverse = mitigate_inverse(&a, &raw)?;
    let constrained = mitigate_constrained(&a, &raw)?;

    let f_raw = fidelity(raw.probs(), ideal.probs())?;
    let f_inv = fidelity(inverse.values(), ideal.probs())?;
    let f_con = fidelity(constrained.probs(), ideal.probs())?;

    Ok(MitigationReport {
        theta,
        n_measurements: n,
        m_qubits: register.len(),
        shots,
        condition_number,
        ideal: ideal.probs().to_vec(),
        raw: raw.probs().to_vec(),
        inverse: inverse.values().to_vec(),
        constrained: constrained.probs().to_vec(),
        fidelity_raw: f_raw.value,
        fidelity_inverse: f_inv.value,
        fidelity_constrained: f_con.value,
        inverse_clipped: f_inv.clipped,
        survival_ideal: marginal_bit_probability(ideal.probs(), 0, 0),
        survival_raw: marginal_bit_probability(raw.probs(), 0, 0),
        survival_inverse: marginal_bit_probability(inverse.values(), 0, 0),
        survival_constrained: marginal_bit_probability(constrained.probs(), 0, 0),
    })
}

/// Standalone calibration report: matrix plus condition number, produced by
/// the `calibrate` command alongside a mitigation report.
pub fn calibration_matrix_for(
    m_qubits: usize,
    noise: &NoiseModel,
    shots: u64,
    seed: u64,
) -> Result<CalibrationMatrix> {
    let register: Vec<usize> = (0..m_qubits).collect();
    calibrate_register(&register, noise, shots, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn ideal_rabi_sweep_matches_theory_exactly() {
        let snap = DeviceSnapshot::builtin("nairobi-like").unwrap();
        let thetas = [PI / 2.0];
        let ns = [0u32, 1, 2, 3, 4];
        let rows = rabi_sweep(&thetas, &ns, 20000, Backend::Ideal, &snap, 1).unwrap();
        assert_eq!(rows.len(), 5);
        for r in &rows {
            assert!(
                (r.p - r.p_theory).abs() < 1e-12,
                "n={}: {} vs {}",
                r.n,
                r.p,
                r.p_theory
            );
        }
    }

    #[test]
    fn sweep_csv_round_trips() {
        let snap = DeviceSnapshot::builtin("lima-like").unwrap();
        let rows = rabi_sweep(&[PI / 3.0], &[1, 2], 1000, Backend::Sampling, &snap, 9).unwrap();
        let text = sweep_csv(&rows);
        let back = parse_sweep_csv(&text).unwrap();
        assert_eq!(rows, back);
    }

    #[test]
    fn sampling_sweeps_are_deterministic() {
        let snap = DeviceSnapshot::builtin("lima-like").unwrap();
        let a = rabi_sweep(&[PI / 2.0], &[1, 2, 3], 2000, Backend::Sampling, &snap, 4).unwrap();
        let b = rabi_sweep(&[PI / 2.0], &[1, 2, 3], 2000, Backend::Sampling, &snap, 4).unwrap();
        assert_eq!(sweep_csv(&a), sweep_csv(&b));
    }

    #[test]
    fn pseudomode_decay_sweep_recovers_the_zeno_time() {
        let snap = DeviceSnapshot::linear(8);
        let g = 1.0 / 15.8;
        let grid = [0.0, 2.05, 4.1, 6.15, 8.2, 10.25];
        let sweep = decay_sweep(
            &grid,
            6,
            &DecayModel::Pseudomode { g_rad_per_us: g },
            20000,
            Backend::Sampling,
            &snap,
            12,
        )
        .unwrap();
        assert!((sweep.fit.t_us - 15.8).abs() < 0.5, "{}", sweep.fit.t_us);
        assert_eq!(sweep.obs_time_us, 10.25);
    }

    #[test]
    fn decay_backend_pairings_are_enforced() {
        let snap = DeviceSnapshot::linear(8);
        assert!(matches!(
            decay_sweep(
                &[1.0],
                2,
                &DecayModel::Pseudomode { g_rad_per_us: 0.1 },
                100,
                Backend::Noisy,
                &snap,
                1,
            ),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(
            decay_sweep(
                &[1.0],
                2,
                &DecayModel::SnapshotNoise,
                100,
                Backend::Ideal,
                &snap,
                1,
            ),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn noiseless_snapshot_yields_identity_calibration_and_near_unit_fidelity() {
        let mut snap = DeviceSnapshot::linear(4);
        for q in &mut snap.qubits {
            q.readout_p01 = 0.0;
            q.readout_p10 = 0.0;
        }
        let noise = NoiseModel::from_snapshot(&snap)
            .with_relaxation(false)
            .with_dephasing(false);
        let a = calibration_matrix_for(3, &noise, 5000, 2).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((a.get(i, j) - expect).abs() < 1e-12);
            }
        }
        let report = rabi_mitigation_report(PI / 2.0, 2, 20000, &noise, 3).unwrap();
        // Only sampling noise separates raw from ideal here.
        assert!(report.fidelity_raw > 0.999);
        assert!(report.fidelity_inverse > 0.999);
        assert!(report.fidelity_constrained > 0.999);
    }

    #[test]
    fn mitigation_report_improves_fidelity_under_readout_noise() {
        let snap = DeviceSnapshot::builtin("nairobi-like").unwrap();
        let noise = NoiseModel::from_snapshot(&snap)
            .with_relaxation(false)
            .with_dephasing(false);
        let report = rabi_mitigation_report(PI / 2.0, 2, 20000, &noise, 21).unwrap();
        assert!(report.fidelity_inverse >= report.fidelity_raw);
        assert!(report.fidelity_constrained >= report.fidelity_raw);
        assert!(report.constrained.iter().all(|&v| v >= 0.0));
        assert!((report.constrained.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(report.condition_number >= 1.0);
        // The mitigated survival should not be farther from ideal than raw,
        // beyond sampling noise.
        let stderr = (report.survival_ideal * (1.0 - report.survival_ideal)
            / report.shots as f64)
            .sqrt();
        let err_con = (report.survival_constrained - report.survival_ideal).abs();
        let err_raw = (report.survival_raw - report.survival_ideal).abs();
        assert!(err_con <= err_raw + 4.0 * stderr);
    }
}
