//! Simulation backends: exact statevector ("ideal"), seeded shot sampling
//! over the ideal distribution ("sampling"), and noisy density-matrix
//! evolution with relaxation/dephasing channels plus readout confusion
//! ("noisy").
//!
//! Determinism contract: a run is a pure function of (circuit, noise model,
//! shots, seed). Sampling derives one pseudorandom stream per shot from the
//! seed, so any internal execution order produces identical histograms.
//!
//! Bitstrings are little-endian over the measured clbits: clbit 0 is the
//! rightmost character, and distribution index bit `j` belongs to the j-th
//! smallest measured clbit.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{schedule, Circuit, Instruction};
use crate::device::DeviceSnapshot;
use crate::error::{Error, Result};
use crate::gates::c;
use crate::states::{DensityMatrix, StateVector};

pub use crate::gates::xy_matrix as xy_gate;

/// Hard cap for the statevector backends.
pub const MAX_IDEAL_QUBITS: usize = 10;
/// Hard cap for the density-matrix backend.
pub const MAX_NOISY_QUBITS: usize = 7;

// ---------------------------------------------------------------------------
// Distributions and histograms
// ---------------------------------------------------------------------------

/// Probabilities over 2^M bitstring outcomes; entries in [0, 1], unit sum.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityDistribution {
    probs: Vec<f64>,
}

impl ProbabilityDistribution {
    pub fn new(mut probs: Vec<f64>) -> Result<ProbabilityDistribution> {
        if !probs.len().is_power_of_two() || probs.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "distribution length {} is not a power of two",
                probs.len()
            )));
        }
        for p in &mut probs {
            if !p.is_finite() || *p < -1e-9 || *p > 1.0 + 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "probability {p} outside [0, 1]"
                )));
            }
            *p = p.clamp(0.0, 1.0);
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(ProbabilityDistribution { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn n_bits(&self) -> usize {
        self.probs.len().trailing_zeros() as usize
    }

    /// CSV rows `bitstring,probability`, one per outcome.
    pub fn to_csv(&self) -> String {
        let bits = self.n_bits();
        let mut out = String::from("bitstring,probability\n");
        for (i, p) in self.probs.iter().enumerate() {
            out.push_str(&format!("{},{}\n", bitstring(i, bits), p));
        }
        out
    }
}

/// Render a basis index as a bitstring with clbit 0 rightmost.
pub fn bitstring(index: usize, n_bits: usize) -> String {
    (0..n_bits)
        .rev()
        .map(|b| if (index >> b) & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Parse a bitstring back into its basis index.
pub fn bitstring_index(s: &str) -> Result<usize> {
    let mut idx = 0usize;
    for (rank, ch) in s.chars().enumerate() {
        let bit = match ch {
            '0' => 0usize,
            '1' => 1,
            other => return Err(Error::Parse(format!("invalid bitstring character '{other}'"))),
        };
        idx = (idx << 1) | bit;
        if rank > 63 {
            return Err(Error::SizeLimit("bitstring too long".into()));
        }
    }
    Ok(idx)
}

/// Bit of a bitstring at clbit position `clbit` (0 = rightmost character).
pub fn bitstring_bit(s: &str, clbit: usize) -> u8 {
    let bytes = s.as_bytes();
    if bytes[bytes.len() - 1 - clbit] == b'1' {
        1
    } else {
        0
    }
}

/// Shot counts per measured bitstring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsHistogram {
    pub shots: u64,
    pub counts: BTreeMap<String, u64>,
}

impl CountsHistogram {
    pub fn new(shots: u64, counts: BTreeMap<String, u64>) -> Result<CountsHistogram> {
        let total: u64 = counts.values().sum();
        if total != shots {
            return Err(Error::InvalidArgument(format!(
                "counts sum to {total}, expected {shots} shots"
            )));
        }
        let mut len = None;
        for key in counts.keys() {
            match len {
                None => len = Some(key.len()),
                Some(l) if l != key.len() => {
                    return Err(Error::InvalidArgument(
                        "inconsistent bitstring lengths".into(),
                    ))
                }
                _ => {}
            }
            bitstring_index(key)?;
        }
        Ok(CountsHistogram { shots, counts })
    }

    pub fn n_bits(&self) -> Option<usize> {
        self.counts.keys().next().map(|k| k.len())
    }

    /// Empirical distribution over 2^M outcomes.
    pub fn to_distribution(&self) -> Result<ProbabilityDistribution> {
        let bits = self.n_bits().ok_or(Error::EmptyHistogram)?;
        let mut probs = vec![0.0f64; 1 << bits];
        for (key, &count) in &self.counts {
            probs[bitstring_index(key)?] += count as f64 / self.shots as f64;
        }
        ProbabilityDistribution::new(probs)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("histogram serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<CountsHistogram> {
        let h: CountsHistogram =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        CountsHistogram::new(h.shots, h.counts)
    }
}

// ---------------------------------------------------------------------------
// Ideal backend
// ---------------------------------------------------------------------------

/// Final state and outcome distribution of a noiseless run.
#[derive(Debug, Clone)]
pub struct IdealOutcome {
    pub state: StateVector,
    pub distribution: ProbabilityDistribution,
}

/// Exact statevector evolution. Delays and barriers are ignored; the
/// distribution is the squared-magnitude marginal over the measured clbits
/// (over all qubits when nothing is measured).
pub fn run_ideal(circuit: &Circuit) -> Result<IdealOutcome> {
    if circuit.n_qubits() > MAX_IDEAL_QUBITS {
        return Err(Error::SizeLimit(format!(
            "ideal backend supports at most {MAX_IDEAL_QUBITS} qubits, got {}",
            circuit.n_qubits()
        )));
    }
    let mut state = StateVector::zero(circuit.n_qubits().max(1));
    for instr in circuit.instructions() {
        match instr {
            Instruction::Delay { .. } | Instruction::Barrier { .. } | Instruction::Measure { .. } => {}
            _ => {
                let (u, targets) = instr
                    .unitary()
                    .ok_or_else(|| Error::InvalidArgument("non-finite gate angle".into()))?;
                state = state.apply(&u, &targets)?;
            }
        }
    }
    let measured = circuit.measurements();
    let qubit_for_rank: Vec<usize> = if measured.is_empty() {
        (0..circuit.n_qubits()).collect()
    } else {
        measured.iter().map(|&(_, q)| q).collect()
    };
    let distribution = marginal_distribution(&state.probabilities(), &qubit_for_rank)?;
    Ok(IdealOutcome { state, distribution })
}

/// Marginalize full-basis probabilities onto the listed qubits (bit `j` of
/// the result indexes `qubits[j]`).
fn marginal_distribution(full: &[f64], qubits: &[usize]) -> Result<ProbabilityDistribution> {
    let m = qubits.len();
    let mut probs = vec![0.0f64; 1 << m];
    for (i, &p) in full.iter().enumerate() {
        let mut out = 0usize;
        for (rank, &q) in qubits.iter().enumerate() {
            out |= ((i >> q) & 1) << rank;
        }
        probs[out] += p;
    }
    ProbabilityDistribution::new(probs)
}

/// Multinomial sampling from a distribution: one derived pseudorandom stream
/// per shot, so results cannot depend on execution order.
pub fn sample_distribution(
    dist: &ProbabilityDistribution,
    shots: u64,
    seed: u64,
) -> CountsHistogram {
    let n_bits = dist.n_bits();
    // Cumulative sums over the outcomes with nonzero probability only, so a
    // stray u ≈ 1 can never land on an impossible outcome.
    let mut support: Vec<usize> = Vec::new();
    let mut cdf: Vec<f64> = Vec::new();
    let mut acc = 0.0f64;
    for (i, &p) in dist.probs().iter().enumerate() {
        if p > 0.0 {
            acc += p;
            support.push(i);
            cdf.push(acc);
        }
    }
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for shot in 0..shots {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(shot);
        let u: f64 = rng.gen();
        let pos = cdf.partition_point(|&cv| cv <= u).min(support.len() - 1);
        *counts.entry(bitstring(support[pos], n_bits)).or_insert(0) += 1;
    }
    CountsHistogram { shots, counts }
}

/// Sample the ideal distribution of a circuit.
pub fn run_sampling(circuit: &Circuit, shots: u64, seed: u64) -> Result<CountsHistogram> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be at least 1".into()));
    }
    let ideal = run_ideal(circuit)?;
    Ok(sample_distribution(&ideal.distribution, shots, seed))
}

// ---------------------------------------------------------------------------
// Noise channels
// ---------------------------------------------------------------------------

/// Kraus operators (row-major 2x2) of the combined relaxation + dephasing
/// channel over an interval of `delta_us`: populations relax by
/// `e^{-Δt/T1}` and the off-diagonal element decays by exactly `e^{-Δt/T2}`.
/// Infinite times disable the respective process.
pub fn relaxation_dephasing_kraus(
    delta_us: f64,
    t1_us: f64,
    t2_us: f64,
) -> Result<Vec<[Complex64; 4]>> {
    if !(delta_us >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "negative interval {delta_us} us"
        )));
    }
    if !(t1_us > 0.0) || !(t2_us > 0.0) {
        return Err(Error::InvalidArgument("T1 and T2 must be positive".into()));
    }
    if t2_us > 2.0 * t1_us {
        return Err(Error::InvalidArgument(format!(
            "T2 = {t2_us} exceeds 2*T1 = {}",
            2.0 * t1_us
        )));
    }
    let gamma = 1.0 - (-delta_us / t1_us).exp();
    let ad_offdiag = (1.0 - gamma).sqrt();
    let total_offdiag = (-delta_us / t2_us).exp();
    // Extra pure dephasing beyond what amplitude damping already causes.
    let extra = if ad_offdiag > 0.0 {
        (total_offdiag / ad_offdiag).min(1.0)
    } else {
        1.0
    };
    let p_z = (1.0 - extra) / 2.0;
    let zero = c(0.0, 0.0);
    let k0 = [c(1.0, 0.0), zero, zero, c(ad_offdiag, 0.0)];
    let k1 = [zero, c(gamma.sqrt(), 0.0), zero, zero];
    let mut kraus = Vec::with_capacity(4);
    let keep = (1.0 - p_z).sqrt();
    let flip = p_z.sqrt();
    kraus.push(scale2(&k0, keep));
    if gamma > 0.0 {
        kraus.push(scale2(&k1, keep));
    }
    if p_z > 0.0 {
        // Z·K0 and Z·K1 (the latter equals K1 since its second row is zero).
        let zk0 = [c(1.0, 0.0), zero, zero, c(-ad_offdiag, 0.0)];
        kraus.push(scale2(&zk0, flip));
        if gamma > 0.0 {
            kraus.push(scale2(&k1, flip));
        }
    }
    Ok(kraus)
}

fn scale2(m: &[Complex64; 4], s: f64) -> [Complex64; 4] {
    [m[0] * s, m[1] * s, m[2] * s, m[3] * s]
}

/// Maximum deviation of `Σ K†K` from the identity.
pub fn kraus_completeness_error(kraus: &[[Complex64; 4]]) -> f64 {
    let mut sum = [c(0.0, 0.0); 4];
    for k in kraus {
        let kd = [k[0].conj(), k[2].conj(), k[1].conj(), k[3].conj()];
        sum[0] += kd[0] * k[0] + kd[1] * k[2];
        sum[1] += kd[0] * k[1] + kd[1] * k[3];
        sum[2] += kd[2] * k[0] + kd[3] * k[2];
        sum[3] += kd[2] * k[1] + kd[3] * k[3];
    }
    [
        (sum[0] - c(1.0, 0.0)).norm(),
        sum[1].norm(),
        sum[2].norm(),
        (sum[3] - c(1.0, 0.0)).norm(),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// Idle a single qubit for `dt_count` hardware dt under T1/T2 noise.
pub fn idle_channel(
    rho: &DensityMatrix,
    qubit: usize,
    dt_count: u64,
    t1_us: f64,
    t2_us: f64,
    dt_ns: f64,
) -> Result<DensityMatrix> {
    let delta_us = dt_count as f64 * dt_ns * 1e-3;
    let kraus = relaxation_dephasing_kraus(delta_us, t1_us, t2_us)?;
    rho.apply_single_qubit_kraus(&kraus, qubit)
}

// ---------------------------------------------------------------------------
// Noisy backend
// ---------------------------------------------------------------------------

/// Which noise processes act, and where they come from. Parameters are
/// always taken from the snapshot, never free-floating.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    pub relaxation: bool,
    pub dephasing: bool,
    pub readout: bool,
    /// Apply idle noise during explicit delays and scheduling gaps.
    pub idle_noise_on_delays: bool,
    /// Apply idle noise on a gate's qubits for the gate's scheduled duration.
    pub noise_on_gate_durations: bool,
    snapshot: DeviceSnapshot,
}

impl NoiseModel {
    /// All processes enabled with the snapshot's parameters.
    pub fn from_snapshot(snapshot: &DeviceSnapshot) -> NoiseModel {
        NoiseModel {
            relaxation: true,
            dephasing: true,
            readout: true,
            idle_noise_on_delays: true,
            noise_on_gate_durations: true,
            snapshot: snapshot.clone(),
        }
    }

    pub fn snapshot(&self) -> &DeviceSnapshot {
        &self.snapshot
    }

    pub fn with_relaxation(mut self, on: bool) -> Self {
        self.relaxation = on;
        self
    }

    pub fn with_dephasing(mut self, on: bool) -> Self {
        self.dephasing = on;
        self
    }

    pub fn with_readout(mut self, on: bool) -> Self {
        self.readout = on;
        self
    }

    /// Effective (T1, T2) for a qubit after applying the enable flags;
    /// disabled relaxation means infinite T1, disabled dephasing leaves only
    /// the off-diagonal decay that relaxation itself implies.
    pub fn effective_times(&self, qubit: usize) -> Result<(f64, f64)> {
        let props = self.snapshot.qubit(qubit)?;
        let t1 = if self.relaxation { props.t1_us } else { f64::INFINITY };
        let t2 = if self.dephasing { props.t2_us.min(2.0 * t1) } else { 2.0 * t1 };
        Ok((t1, t2))
    }

    fn is_trivial_idle(&self) -> bool {
        !self.relaxation && !self.dephasing
    }
}

/// Density-matrix result of a noisy run.
#[derive(Debug, Clone)]
pub struct NoisyOutcome {
    pub histogram: CountsHistogram,
    /// State right before readout (readout confusion is classical and is
    /// applied to the outcome distribution, not to this matrix).
    pub final_density: DensityMatrix,
}

/// Exact outcome distribution of the noisy evolution (before sampling),
/// together with the final density matrix.
pub fn noisy_distribution(
    circuit: &Circuit,
    noise: &NoiseModel,
) -> Result<(ProbabilityDistribution, DensityMatrix)> {
    let n = circuit.n_qubits();
    if n > MAX_NOISY_QUBITS {
        return Err(Error::SizeLimit(format!(
            "noisy backend supports at most {MAX_NOISY_QUBITS} qubits, got {n}"
        )));
    }
    let snapshot = noise.snapshot();
    for instr in circuit.instructions() {
        if instr.is_gate() && !snapshot.is_basis_gate(instr.name()) {
            return Err(Error::NonBasisGate {
                gate: instr.name().into(),
                basis: snapshot.basis_gates.clone(),
            });
        }
    }
    let sched = schedule(circuit, snapshot)?;

    let mut order: Vec<usize> = (0..circuit.len()).collect();
    order.sort_by_key(|&i| (sched.starts[i], i));

    let mut rho = DensityMatrix::zero(n.max(1));
    let mut clock = vec![0u64; n];

    let idle = |rho: &DensityMatrix, q: usize, dt: u64| -> Result<DensityMatrix> {
        if dt == 0 || noise.is_trivial_idle() {
            return Ok(rho.clone());
        }
        let (t1, t2) = noise.effective_times(q)?;
        idle_channel(rho, q, dt, t1, t2, snapshot.dt_ns)
    };

    for &i in &order {
        let instr = &circuit.instructions()[i];
        let (start, dur) = (sched.starts[i], sched.durations[i]);
        let qubits = instr.qubits();
        // Catch up waiting qubits to the instruction start.
        for &q in &qubits {
            if clock[q] < start && noise.idle_noise_on_delays {
                rho = idle(&rho, q, start - clock[q])?;
            }
            clock[q] = start;
        }
        match instr {
            Instruction::Barrier { .. } => {}
            Instruction::Delay { qubit, dt } => {
                if noise.idle_noise_on_delays {
                    rho = idle(&rho, *qubit, *dt)?;
                }
            }
            Instruction::Measure { .. } => {
                // Readout is classical; decoherence after the measure start
                // cannot change the recorded outcome.
            }
            _ => {
                let (u, targets) = instr
                    .unitary()
                    .ok_or_else(|| Error::InvalidArgument("non-finite gate angle".into()))?;
                rho = rho.apply(&u, &targets)?;
                if noise.noise_on_gate_durations {
                    for &q in &targets {
                        rho = idle(&rho, q, dur)?;
                    }
                }
            }
        }
        for &q in &qubits {
            clock[q] = start + dur;
        }
    }

    let measured = circuit.measurements();
    let qubit_for_rank: Vec<usize> = if measured.is_empty() {
        (0..n).collect()
    } else {
        measured.iter().map(|&(_, q)| q).collect()
    };
    let mut probs = marginal_distribution(&rho.diagonal_probs(), &qubit_for_rank)?
        .probs()
        .to_vec();
    if noise.readout {
        for (rank, &q) in qubit_for_rank.iter().enumerate() {
            let props = snapshot.qubit(q)?;
            apply_confusion_axis(&mut probs, rank, props.readout_p01, props.readout_p10);
        }
    }
    Ok((ProbabilityDistribution::new(probs)?, rho))
}

/// Apply the single-qubit readout confusion channel along one bit axis of a
/// probability vector: columns [1-p01, p01] for true 0, [p10, 1-p10] for
/// true 1.
fn apply_confusion_axis(probs: &mut [f64], rank: usize, p01: f64, p10: f64) {
    let stride = 1usize << rank;
    let dim = probs.len();
    let mut i = 0;
    while i < dim {
        for j in i..i + stride {
            let p0 = probs[j];
            let p1 = probs[j + stride];
            probs[j] = (1.0 - p01) * p0 + p10 * p1;
            probs[j + stride] = p01 * p0 + (1.0 - p10) * p1;
        }
        i += 2 * stride;
    }
}

/// Noisy density-matrix run: gate unitaries interleaved with idle channels
/// per the ASAP schedule, readout confusion on the final distribution, then
/// seeded multinomial sampling.
pub fn run_noisy(
    circuit: &Circuit,
    noise: &NoiseModel,
    shots: u64,
    seed: u64,
) -> Result<NoisyOutcome> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be at least 1".into()));
    }
    let (dist, rho) = noisy_distribution(circuit, noise)?;
    Ok(NoisyOutcome {
        histogram: sample_distribution(&dist, shots, seed),
        final_density: rho,
    })
}
