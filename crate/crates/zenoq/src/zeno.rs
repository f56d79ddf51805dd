//! Zeno experiment builders, survival-probability theory curves, Zeno-time
//! computation and fitting.
//!
//! Two survival notions coexist and are deliberately distinct:
//!
//! - [`record_survival`]: the probability that the system is found in its
//!   initial state at the end *and* every intermediate ancilla record agrees
//!   — the repeated-measurement survival probability. For an ideal Rabi run
//!   this equals `cos^{2N}(θ/2N)` exactly, and it is the quantity the theory
//!   curves and the Zeno-time fit describe.
//! - [`survival_probability`]: the plain marginal of the system bit,
//!   ancillas summed over. Return trajectories (flip and flip back between
//!   checks) contribute to it at O(sin⁴), so it sits slightly *above* the
//!   theory curve; it is the quantity the mitigation reports marginalize.
//!
//! Internal units: energies in rad/µs with ħ = 1, times in µs.

use num_complex::Complex64;
use serde::Serialize;

use crate::circuit::{Circuit, Instruction};
use crate::device::DeviceSnapshot;
use crate::error::{Error, Result};
use crate::gates::c;
use crate::simulator::{bitstring_bit, CountsHistogram, ProbabilityDistribution};
use crate::states::StateVector;

/// Shot count used by the modeled experiments unless overridden.
pub const DEFAULT_SHOTS: u64 = 20000;
/// Default ancilla budget for the Rabi experiment.
pub const ANCILLA_BUDGET: usize = 6;

// ---------------------------------------------------------------------------
// Specs
// ---------------------------------------------------------------------------

/// Rabi-evolution experiment: total rotation θ = 2ωt divided into N equal
/// slices, each followed by an ancilla measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct RabiSpec {
    pub theta: f64,
    pub n_measurements: u32,
    pub shots: u64,
}

impl RabiSpec {
    pub fn new(theta: f64, n_measurements: u32) -> Result<RabiSpec> {
        let spec = RabiSpec {
            theta,
            n_measurements,
            shots: DEFAULT_SHOTS,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_shots(mut self, shots: u64) -> Self {
        self.shots = shots;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 2.0 * std::f64::consts::PI) {
            return Err(Error::InvalidArgument(format!(
                "theta = {} outside (0, 2π]",
                self.theta
            )));
        }
        if self.n_measurements as usize > ANCILLA_BUDGET {
            return Err(Error::AncillaBudget {
                requested: self.n_measurements as usize,
                budget: ANCILLA_BUDGET,
            });
        }
        if self.shots == 0 {
            return Err(Error::InvalidArgument("shots must be at least 1".into()));
        }
        Ok(())
    }
}

/// How the free decay is modeled.
#[derive(Debug, Clone, PartialEq)]
pub enum DecayModel {
    /// System qubit coherently exchanging its excitation with one
    /// environment qubit at rate `g`; survival per segment is cos²(g·τ),
    /// which has the quadratic short-time behavior the Zeno formula needs.
    Pseudomode { g_rad_per_us: f64 },
    /// Idle delays under the snapshot's T1/T2 channels. Markovian, so the
    /// survival is measurement-count independent; kept as the documented
    /// null model.
    SnapshotNoise,
}

/// Free-decay experiment: prepare |1⟩, evolve for `total_time_us` split into
/// N equal segments, measure after each segment.
#[derive(Debug, Clone, PartialEq)]
pub struct DecaySpec {
    pub total_time_us: f64,
    pub n_measurements: u32,
    pub model: DecayModel,
    pub shots: u64,
}

impl DecaySpec {
    pub fn new(total_time_us: f64, n_measurements: u32, model: DecayModel) -> Result<DecaySpec> {
        let spec = DecaySpec {
            total_time_us,
            n_measurements,
            model,
            shots: DEFAULT_SHOTS,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_shots(mut self, shots: u64) -> Self {
        self.shots = shots;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.total_time_us > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "total time {} must be positive",
                self.total_time_us
            )));
        }
        if self.n_measurements == 0 {
            return Err(Error::InvalidArgument(
                "decay needs at least one measurement".into(),
            ));
        }
        if let DecayModel::Pseudomode { g_rad_per_us } = self.model {
            if !(g_rad_per_us > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "coupling g = {g_rad_per_us} must be positive"
                )));
            }
        }
        if self.shots == 0 {
            return Err(Error::InvalidArgument("shots must be at least 1".into()));
        }
        Ok(())
    }
}

/// One measured survival point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalPoint {
    pub t_us: f64,
    pub n_measurements: u32,
    pub p: f64,
    pub stderr: f64,
}

/// Estimated probability with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbEstimate {
    pub p: f64,
    pub stderr: f64,
}

/// Fitted Zeno time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZenoFit {
    pub t_us: f64,
    pub sigma_us: f64,
    /// Weighted residual norm at the optimum (the χ value).
    pub residual_norm: f64,
}

// ---------------------------------------------------------------------------
// Circuit builders
// ---------------------------------------------------------------------------

/// Rabi QZE circuit: qubit 0 is the system, qubits 1..=N fresh ancillas.
/// N segments of `U3(θ/N, -π/2, π/2)`, each followed by `CX(0 → ancilla)`;
/// N = 0 degenerates to the bare rotation. Qubit i is measured into clbit i.
pub fn build_rabi_circuit(spec: &RabiSpec) -> Result<Circuit> {
    spec.validate()?;
    let n_meas = spec.n_measurements as usize;
    let n_qubits = 1 + n_meas;
    let mut circuit = Circuit::new(n_qubits, n_qubits);
    let segments = n_meas.max(1);
    for k in 0..segments {
        circuit.push(Instruction::U3 {
            qubit: 0,
            theta: spec.theta / segments as f64,
            phi: -std::f64::consts::FRAC_PI_2,
            lambda: std::f64::consts::FRAC_PI_2,
        })?;
        if n_meas > 0 {
            circuit.push(Instruction::Cx { control: 0, target: k + 1 })?;
        }
    }
    circuit.push(Instruction::Barrier { qubits: (0..n_qubits).collect() })?;
    for q in 0..n_qubits {
        circuit.push(Instruction::Measure { qubit: q, clbit: q })?;
    }
    Ok(circuit)
}

/// Free-decay circuit together with its wire bookkeeping.
///
/// Clbit convention (both models): clbit 0 is the system, clbits 1..=N the
/// measurement records in order; the pseudomode environment qubit is read
/// into clbit N+1.
#[derive(Debug, Clone)]
pub struct DecayCircuit {
    pub circuit: Circuit,
    /// Physical qubit the system starts on.
    pub home_qubit: usize,
    pub n_measurements: u32,
    /// Clbits carrying the intermediate records, in time order.
    pub record_clbits: Vec<usize>,
}

/// Build the free-decay circuit for a spec on a device.
///
/// Pseudomode: `X` on the system, then N blocks of `XY(2g·t/N)` against the
/// environment qubit plus `CX` to a fresh ancilla (fully abstract; run it on
/// the ideal or sampling backend).
///
/// Snapshot-noise: delays and CNOTs on the physical coupling map. The
/// checkpoints are placed at equal fractions of the evolution window, the
/// window being the total time minus the state-preparation X and the final
/// readout; each segment's delay absorbs that segment's gate time, so a
/// segment whose gates exceed the budget is an error. Records never move:
/// when the system runs out of adjacent fresh qubits it swaps itself into a
/// fresh one and records onto the wire it just left.
pub fn build_decay_circuit(spec: &DecaySpec, device: &DeviceSnapshot) -> Result<DecayCircuit> {
    spec.validate()?;
    match spec.model {
        DecayModel::Pseudomode { g_rad_per_us } => build_pseudomode(spec, device, g_rad_per_us),
        DecayModel::SnapshotNoise => build_snapshot_decay(spec, device),
    }
}

fn build_pseudomode(
    spec: &DecaySpec,
    device: &DeviceSnapshot,
    g: f64,
) -> Result<DecayCircuit> {
    let n = spec.n_measurements as usize;
    if n + 2 > device.n_qubits {
        return Err(Error::AncillaBudget {
            requested: n,
            budget: device.n_qubits.saturating_sub(2),
        });
    }
    let n_qubits = n + 2; // system, environment, N ancillas
    let mut circuit = Circuit::new(n_qubits, n_qubits);
    circuit.push(Instruction::X { qubit: 0 })?;
    let tau = spec.total_time_us / n as f64;
    for k in 0..n {
        circuit.push(Instruction::Xy { a: 0, b: 1, beta: 2.0 * g * tau })?;
        circuit.push(Instruction::Cx { control: 0, target: 2 + k })?;
    }
    circuit.push(Instruction::Barrier { qubits: (0..n_qubits).collect() })?;
    circuit.push(Instruction::Measure { qubit: 0, clbit: 0 })?;
    for k in 0..n {
        circuit.push(Instruction::Measure { qubit: 2 + k, clbit: 1 + k })?;
    }
    circuit.push(Instruction::Measure { qubit: 1, clbit: n + 1 })?;
    Ok(DecayCircuit {
        circuit,
        home_qubit: 0,
        n_measurements: spec.n_measurements,
        record_clbits: (1..=n).collect(),
    })
}

/// One measurement segment of the snapshot-noise plan.
#[derive(Debug, Clone)]
struct SegmentPlan {
    swaps: Vec<(usize, usize)>,
    cx: (usize, usize),
    record: usize,
    new_system: usize,
}

fn build_snapshot_decay(spec: &DecaySpec, device: &DeviceSnapshot) -> Result<DecayCircuit> {
    let n = spec.n_measurements as usize;
    if n + 1 > device.n_qubits {
        return Err(Error::AncillaBudget {
            requested: n,
            budget: device.n_qubits.saturating_sub(1),
        });
    }
    let map = device.coupling_map();
    // Home: the best-connected qubit, ties to the smallest index.
    let home = (0..device.n_qubits)
        .max_by_key(|&q| (map.neighbors(q).map(|v| v.len()).unwrap_or(0), usize::MAX - q))
        .unwrap_or(0);
    let plan = plan_records(&map, home, n).ok_or_else(|| {
        Error::Unsupported(format!(
            "cannot place {n} measurement records on '{}' starting from qubit {home}",
            device.name
        ))
    })?;

    let x_dt = device.duration_dt("x", &[home])?;
    let readout_dt = device.duration_dt("measure", &[home])?;
    let total_dt = device.us_to_dt(spec.total_time_us);
    let evolution_dt = total_dt
        .checked_sub(x_dt + readout_dt)
        .ok_or_else(|| Error::InvalidArgument(format!(
            "total time {} us is shorter than preparation plus readout",
            spec.total_time_us
        )))?;

    let mut circuit = Circuit::new(device.n_qubits, n + 1);
    circuit.push(Instruction::X { qubit: home })?;
    let mut system = home;
    let mut previous_checkpoint = 0u64;
    for (k, seg) in plan.iter().enumerate() {
        let mut gates_dt = 0u64;
        for &(a, b) in &seg.swaps {
            gates_dt += device
                .swap_orientation_cost(a, b)?
                .min(device.swap_orientation_cost(b, a)?);
        }
        gates_dt += device.duration_dt("cx", &[seg.cx.0, seg.cx.1])?;
        let checkpoint =
            ((k as u64 + 1) * evolution_dt) / n as u64;
        let budget = checkpoint - previous_checkpoint;
        let delay_dt = budget.checked_sub(gates_dt).ok_or(Error::InfeasibleSegment {
            segment: k + 1,
            gates_dt,
            budget_dt: budget,
        })?;
        circuit.push(Instruction::Delay { qubit: system, dt: delay_dt })?;
        for &(a, b) in &seg.swaps {
            circuit.push(Instruction::Swap { a, b })?;
        }
        circuit.push(Instruction::Cx { control: seg.cx.0, target: seg.cx.1 })?;
        system = seg.new_system;
        previous_checkpoint = checkpoint;
    }
    let mut measured = vec![system];
    measured.extend(plan.iter().map(|s| s.record));
    circuit.push(Instruction::Barrier { qubits: measured.clone() })?;
    circuit.push(Instruction::Measure { qubit: system, clbit: 0 })?;
    for (k, seg) in plan.iter().enumerate() {
        circuit.push(Instruction::Measure { qubit: seg.record, clbit: 1 + k })?;
    }
    Ok(DecayCircuit {
        circuit,
        home_qubit: home,
        n_measurements: spec.n_measurements,
        record_clbits: (1..=n).collect(),
    })
}

/// Deterministic backtracking search for a record placement: at each step,
/// walk the system through fresh qubits to a fresh target, then either
/// record onto the target (system stays put) or swap into the target and
/// record onto the wire just vacated.
fn plan_records(
    map: &crate::device::CouplingMap,
    home: usize,
    n_records: usize,
) -> Option<Vec<SegmentPlan>> {
    let n_qubits = map.n_qubits();
    let mut failed = std::collections::HashSet::new();
    fn path_through_free(
        map: &crate::device::CouplingMap,
        free: &dyn Fn(usize) -> bool,
        from: usize,
        to: usize,
    ) -> Option<Vec<usize>> {
        // BFS distances to `to` within the free subgraph (plus `from`).
        let n = map.n_qubits();
        let admissible = |q: usize| q == from || free(q);
        let mut dist = vec![usize::MAX; n];
        let mut queue = std::collections::VecDeque::new();
        dist[to] = 0;
        queue.push_back(to);
        while let Some(u) = queue.pop_front() {
            for &v in map.neighbors(u).ok()? {
                if admissible(v) && dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        if dist[from] == usize::MAX {
            return None;
        }
        let mut path = vec![from];
        let mut cur = from;
        while cur != to {
            let next = map
                .neighbors(cur)
                .ok()?
                .iter()
                .copied()
                .find(|&v| admissible(v) && dist[v] + 1 == dist[cur])?;
            path.push(next);
            cur = next;
        }
        Some(path)
    }

    fn search(
        map: &crate::device::CouplingMap,
        system: usize,
        used: u32,
        remaining: usize,
        failed: &mut std::collections::HashSet<(usize, u32, usize)>,
    ) -> Option<Vec<SegmentPlan>> {
        if remaining == 0 {
            return Some(Vec::new());
        }
        if failed.contains(&(system, used, remaining)) {
            return None;
        }
        let n = map.n_qubits();
        let free = |q: usize| q < n && q != system && used & (1 << q) == 0;
        let mut targets: Vec<usize> = (0..n).filter(|&q| free(q)).collect();
        let base = map.distances_from(system);
        targets.sort_by_key(|&q| (base[q], q));
        for f in targets {
            let Some(path) = path_through_free(map, &free, system, f) else {
                continue;
            };
            let swaps: Vec<(usize, usize)> = path
                .windows(2)
                .take(path.len() - 2)
                .map(|w| (w[0], w[1]))
                .collect();
            let adj = path[path.len() - 2];
            // Variant 1: record onto the target, system stays adjacent.
            let seg = SegmentPlan {
                swaps: swaps.clone(),
                cx: (adj, f),
                record: f,
                new_system: adj,
            };
            if let Some(mut rest) = search(map, adj, used | (1 << f), remaining - 1, failed) {
                rest.insert(0, seg);
                return Some(rest);
            }
            // Variant 2: swap into the target, record onto the vacated wire.
            let mut swaps2 = swaps;
            swaps2.push((adj, f));
            let seg = SegmentPlan {
                swaps: swaps2,
                cx: (f, adj),
                record: adj,
                new_system: f,
            };
            if let Some(mut rest) = search(map, f, used | (1 << adj), remaining - 1, failed) {
                rest.insert(0, seg);
                return Some(rest);
            }
        }
        failed.insert((system, used, remaining));
        None
    }

    if n_records >= n_qubits {
        return None;
    }
    search(map, home, 0, n_records, &mut failed)
}

// ---------------------------------------------------------------------------
// Survival probabilities
// ---------------------------------------------------------------------------

fn binomial_stderr(p: f64, shots: u64) -> f64 {
    (p * (1.0 - p) / shots as f64).sqrt()
}

/// Marginal survival: fraction of shots whose system bit reads `target`,
/// all other bits summed over.
pub fn survival_probability(
    hist: &CountsHistogram,
    system_bit: usize,
    target: u8,
) -> Result<ProbEstimate> {
    let bits = hist.n_bits().ok_or(Error::EmptyHistogram)?;
    if system_bit >= bits {
        return Err(Error::ClbitOutOfRange { index: system_bit, n_clbits: bits });
    }
    let hit: u64 = hist
        .counts
        .iter()
        .filter(|(key, _)| bitstring_bit(key, system_bit) == target)
        .map(|(_, &n)| n)
        .sum();
    let p = hit as f64 / hist.shots as f64;
    Ok(ProbEstimate { p, stderr: binomial_stderr(p, hist.shots) })
}

/// Repeated-measurement survival: fraction of shots where the system bit and
/// every record bit read `target` — "never seen to leave the initial state".
pub fn record_survival(
    hist: &CountsHistogram,
    system_bit: usize,
    record_bits: &[usize],
    target: u8,
) -> Result<ProbEstimate> {
    let bits = hist.n_bits().ok_or(Error::EmptyHistogram)?;
    for &b in std::iter::once(&system_bit).chain(record_bits) {
        if b >= bits {
            return Err(Error::ClbitOutOfRange { index: b, n_clbits: bits });
        }
    }
    let hit: u64 = hist
        .counts
        .iter()
        .filter(|(key, _)| {
            bitstring_bit(key, system_bit) == target
                && record_bits.iter().all(|&b| bitstring_bit(key, b) == target)
        })
        .map(|(_, &n)| n)
        .sum();
    let p = hit as f64 / hist.shots as f64;
    Ok(ProbEstimate { p, stderr: binomial_stderr(p, hist.shots) })
}

/// Exact record survival from an outcome distribution (ideal backend),
/// with the binomial stderr the given shot count would carry.
pub fn record_survival_from_distribution(
    dist: &ProbabilityDistribution,
    system_bit: usize,
    record_bits: &[usize],
    target: u8,
    shots: u64,
) -> ProbEstimate {
    let mut p = 0.0;
    for (i, &prob) in dist.probs().iter().enumerate() {
        let ok = ((i >> system_bit) & 1) as u8 == target
            && record_bits
                .iter()
                .all(|&b| ((i >> b) & 1) as u8 == target);
        if ok {
            p += prob;
        }
    }
    ProbEstimate { p, stderr: binomial_stderr(p, shots) }
}

// ---------------------------------------------------------------------------
// Theory curves
// ---------------------------------------------------------------------------

/// `[cos²(θ/2N)]^N`: survival of the segmented Rabi rotation under N
/// projective checks.
pub fn theory_rabi(theta: f64, n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain(
            "theory_rabi needs N ≥ 1; a bare rotation survives with cos²(θ/2)".into(),
        ));
    }
    if !theta.is_finite() {
        return Err(Error::InvalidArgument("non-finite theta".into()));
    }
    Ok((theta / (2.0 * n as f64)).cos().powi(2 * n as i32))
}

/// Large-N limit `exp(-θ²/4N)` of [`theory_rabi`].
pub fn theory_rabi_limit(theta: f64, n: u32) -> f64 {
    (-theta * theta / (4.0 * n as f64)).exp()
}

/// `[1 - (t/NT)²]^N`: free-decay survival under N checks within the
/// quadratic (Zeno) regime. Requires `t < N·T`.
pub fn theory_decay(t_us: f64, n: u32, t_zeno_us: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("theory_decay needs N ≥ 1".into()));
    }
    if !(t_zeno_us > 0.0) {
        return Err(Error::Domain(format!("Zeno time {t_zeno_us} must be positive")));
    }
    if !(t_us >= 0.0) {
        return Err(Error::Domain(format!("time {t_us} must be nonnegative")));
    }
    let u = t_us / (n as f64 * t_zeno_us);
    if u >= 1.0 {
        return Err(Error::Domain(format!(
            "t = {t_us} is outside the quadratic regime t < N·T = {}",
            n as f64 * t_zeno_us
        )));
    }
    Ok((1.0 - u * u).powi(n as i32))
}

/// Large-N limit `exp(-t²/NT²)` of [`theory_decay`].
pub fn theory_decay_limit(t_us: f64, n: u32, t_zeno_us: f64) -> f64 {
    (-t_us * t_us / (n as f64 * t_zeno_us * t_zeno_us)).exp()
}

// ---------------------------------------------------------------------------
// Zeno time from a Hamiltonian
// ---------------------------------------------------------------------------

/// Hermitian Hamiltonian in ħ = 1 units (entries in rad/µs).
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    dim: usize,
    data: Vec<Complex64>,
}

impl Hamiltonian {
    pub fn from_entries(dim: usize, data: Vec<Complex64>) -> Result<Hamiltonian> {
        if !dim.is_power_of_two() || data.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!(
                "expected a power-of-two square matrix, got dim {dim} with {} entries",
                data.len()
            )));
        }
        for i in 0..dim {
            for j in 0..dim {
                if (data[i * dim + j] - data[j * dim + i].conj()).norm() > 1e-10 {
                    return Err(Error::InvalidArgument("Hamiltonian is not Hermitian".into()));
                }
            }
        }
        Ok(Hamiltonian { dim, data })
    }

    /// ħω·σx: the Rabi Hamiltonian.
    pub fn rabi(omega_rad_per_us: f64) -> Hamiltonian {
        Hamiltonian {
            dim: 2,
            data: vec![
                c(0.0, 0.0),
                c(omega_rad_per_us, 0.0),
                c(omega_rad_per_us, 0.0),
                c(0.0, 0.0),
            ],
        }
    }

    /// ħg·(σ⁺σ⁻ + σ⁻σ⁺) between the system (bit 0) and one environment mode
    /// (bit 1): the pseudomode exchange Hamiltonian.
    pub fn exchange(g_rad_per_us: f64) -> Hamiltonian {
        let mut data = vec![c(0.0, 0.0); 16];
        // Couples |01⟩ (row 1) and |10⟩ (row 2).
        data[6] = c(g_rad_per_us, 0.0);
        data[9] = c(g_rad_per_us, 0.0);
        Hamiltonian { dim: 4, data }
    }

    fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![c(0.0, 0.0); self.dim];
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[i] += self.data[i * self.dim + j] * psi[j];
            }
        }
        out
    }
}

/// Zeno time `T = ħ / sqrt(⟨H²⟩ - ⟨H⟩²)` of a state under a Hamiltonian:
/// the timescale of the initial quadratic decay `p(t) ≈ 1 - (t/T)²`.
pub fn zeno_time(h: &Hamiltonian, psi0: &StateVector) -> Result<f64> {
    if psi0.amplitudes().len() != h.dim {
        return Err(Error::DimensionMismatch(format!(
            "state dimension {} does not match Hamiltonian dimension {}",
            psi0.amplitudes().len(),
            h.dim
        )));
    }
    let hpsi = h.apply(psi0.amplitudes());
    let mean: Complex64 = psi0
        .amplitudes()
        .iter()
        .zip(&hpsi)
        .map(|(a, b)| a.conj() * b)
        .sum();
    let second: f64 = hpsi.iter().map(|z| z.norm_sqr()).sum();
    let variance = second - mean.re * mean.re;
    if variance <= 1e-14 * second.max(1.0) {
        return Err(Error::Domain(
            "zero energy variance: the state is stationary and has no Zeno time".into(),
        ));
    }
    Ok(1.0 / variance.sqrt())
}

// ---------------------------------------------------------------------------
// Zeno-time fit
// ---------------------------------------------------------------------------

const FIT_MAX_ITERATIONS: usize = 200;

/// Weighted nonlinear least squares of `[1 - (t/NT)²]^N` over T, weights
/// 1/stderr² (zero stderrs are floored at the smallest positive stderr).
/// The initial T comes from the quadratic estimate at the smallest positive
/// time; `fit_zeno_time_from` accepts an explicit starting value instead.
pub fn fit_zeno_time(points: &[SurvivalPoint], n: u32) -> Result<ZenoFit> {
    let t0 = initial_zeno_guess(points, n)?;
    fit_zeno_time_from(points, n, t0)
}

fn initial_zeno_guess(points: &[SurvivalPoint], n: u32) -> Result<f64> {
    check_fit_inputs(points, n)?;
    let t_max = points.iter().map(|p| p.t_us).fold(0.0, f64::max);
    let floor = 1.05 * t_max / n as f64;
    let mut best: Option<f64> = None;
    let mut smallest_t = f64::INFINITY;
    for p in points {
        if p.t_us > 0.0 && p.p < 1.0 && p.p > 0.0 && p.t_us < smallest_t {
            smallest_t = p.t_us;
            // p^{1/N} = 1 - (t/NT)² solved for T.
            let root = 1.0 - p.p.powf(1.0 / n as f64);
            if root > 0.0 {
                best = Some(p.t_us / (n as f64 * root.sqrt()));
            }
        }
    }
    Ok(best.unwrap_or(2.0 * t_max / n as f64).max(floor))
}

fn check_fit_inputs(points: &[SurvivalPoint], n: u32) -> Result<()> {
    if points.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if n == 0 {
        return Err(Error::Domain("fit needs N ≥ 1".into()));
    }
    for p in points {
        if !(p.t_us >= 0.0) || !p.p.is_finite() || !(p.stderr >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "invalid survival point (t={}, p={}, stderr={})",
                p.t_us, p.p, p.stderr
            )));
        }
    }
    Ok(())
}

/// Zeno-time fit from an explicit starting value (used for retries).
pub fn fit_zeno_time_from(points: &[SurvivalPoint], n: u32, t_start_us: f64) -> Result<ZenoFit> {
    check_fit_inputs(points, n)?;
    let floor = points
        .iter()
        .map(|p| p.stderr)
        .filter(|&s| s > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !floor.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    let weights: Vec<f64> = points
        .iter()
        .map(|p| 1.0 / p.stderr.max(floor).powi(2))
        .collect();
    let t_max = points.iter().map(|p| p.t_us).fold(0.0, f64::max);
    let t_min_feasible = t_max / n as f64;
    if !(t_start_us > t_min_feasible) {
        return Err(Error::Domain(format!(
            "starting Zeno time {t_start_us} violates t < N·T for the largest t = {t_max}"
        )));
    }

    let cost_of = |t: f64| -> Result<f64> {
        let mut acc = 0.0;
        for (p, w) in points.iter().zip(&weights) {
            let f = theory_decay(p.t_us, n, t)?;
            acc += w * (p.p - f).powi(2);
        }
        Ok(acc)
    };

    let mut t = t_start_us;
    let mut cost = cost_of(t)?;
    let mut damping = 1e-3;
    let nf = n as f64;
    for _ in 0..FIT_MAX_ITERATIONS {
        // Analytic Jacobian: ∂f/∂T = 2N u² (1-u²)^{N-1} / T with u = t/(NT).
        let mut jtj = 0.0;
        let mut jtr = 0.0;
        for (p, w) in points.iter().zip(&weights) {
            let u = p.t_us / (nf * t);
            let base = 1.0 - u * u;
            let f = base.powi(n as i32);
            let jac = 2.0 * nf * u * u * base.powi(n as i32 - 1) / t;
            let r = p.p - f;
            jtj += w * jac * jac;
            jtr += w * jac * r;
        }
        if jtj <= 0.0 {
            return Err(Error::Domain("flat model: no time dependence in the data".into()));
        }
        let step = jtr / (jtj * (1.0 + damping));
        let t_new = t + step;
        if !(t_new > t_min_feasible) || !t_new.is_finite() {
            damping *= 4.0;
            if damping > 1e12 {
                return Err(Error::NonConvergence(FIT_MAX_ITERATIONS));
            }
            continue;
        }
        let cost_new = cost_of(t_new)?;
        if cost_new <= cost {
            let converged = step.abs() < 1e-12 * t.max(1.0) || (cost - cost_new) < 1e-18;
            t = t_new;
            cost = cost_new;
            damping = (damping / 3.0).max(1e-12);
            if converged {
                let sigma = (1.0 / jtj).sqrt();
                return Ok(ZenoFit {
                    t_us: t,
                    sigma_us: sigma,
                    residual_norm: cost.sqrt(),
                });
            }
        } else {
            damping *= 4.0;
            if damping > 1e12 {
                break;
            }
        }
    }
    Err(Error::NonConvergence(FIT_MAX_ITERATIONS))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{run_ideal, run_sampling};
    use std::collections::BTreeMap;
    use std::f64::consts::PI;

    #[test]
    fn theory_rabi_values() {
        assert!((theory_rabi(PI / 2.0, 1).unwrap() - 0.5).abs() < 1e-12);
        let p10 = theory_rabi(PI / 2.0, 10).unwrap();
        assert!((p10 - 0.9401).abs() < 5e-4, "{p10}");
        assert!(matches!(theory_rabi(1.0, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn theory_rabi_limit_converges() {
        let exact = theory_rabi(PI / 2.0, 50).unwrap();
        assert!((exact - theory_rabi_limit(PI / 2.0, 50)).abs() < 1e-3);
    }

    #[test]
    fn theory_decay_limit_converges() {
        let exact = theory_decay(10.25, 50, 15.8).unwrap();
        assert!((exact - theory_decay_limit(10.25, 50, 15.8)).abs() < 1e-4);
    }

    #[test]
    fn theory_rabi_monotone_in_n_and_saturates() {
        for &theta in &[PI, PI / 2.0, PI / 3.0, PI / 4.0, PI / 5.0, PI / 6.0, 0.3] {
            let mut last = theory_rabi(theta, 1).unwrap();
            for n in 2..=60 {
                let p = theory_rabi(theta, n).unwrap();
                assert!(p >= last, "theta={theta} n={n}: {p} < {last}");
                last = p;
            }
            let saturated = theory_rabi(theta, 400).unwrap();
            assert!(saturated > 0.99, "theta={theta}: saturation failed at {saturated}");
        }
    }

    #[test]
    fn theory_decay_values_and_domain() {
        assert!((theory_decay(0.0, 6, 15.8).unwrap() - 1.0).abs() < 1e-15);
        // Spot value: t = 10.25 µs, N = 6, T = 15.8 µs.
        let p = theory_decay(10.25, 6, 15.8).unwrap();
        assert!((p - 0.932).abs() < 1e-3, "{p}");
        // Just inside the boundary evaluates; outside errors.
        assert!(theory_decay(6.0 * 15.8 * 0.999, 6, 15.8).unwrap() < 1e-10);
        assert!(matches!(
            theory_decay(6.0 * 15.8, 6, 15.8),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn zeno_time_of_rabi_hamiltonian() {
        for omega in [0.5, 1.0, 3.7] {
            let t = zeno_time(&Hamiltonian::rabi(omega), &StateVector::zero(1)).unwrap();
            assert!((t - 1.0 / omega).abs() < 1e-12);
        }
    }

    #[test]
    fn zeno_time_rejects_stationary_states() {
        // |+⟩ is an eigenstate of σx.
        let plus = StateVector::from_amplitudes(vec![
            c(1.0 / 2.0f64.sqrt(), 0.0),
            c(1.0 / 2.0f64.sqrt(), 0.0),
        ])
        .unwrap();
        assert!(matches!(
            zeno_time(&Hamiltonian::rabi(1.0), &plus),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn zeno_time_of_pseudomode_exchange() {
        // |1,0⟩: system excited, environment empty (basis index 1).
        let mut amps = vec![c(0.0, 0.0); 4];
        amps[1] = c(1.0, 0.0);
        let psi = StateVector::from_amplitudes(amps).unwrap();
        for g in [0.05, 1.0 / 15.8, 0.4] {
            let t = zeno_time(&Hamiltonian::exchange(g), &psi).unwrap();
            assert!((t - 1.0 / g).abs() < 1e-10, "g={g}");
        }
    }

    #[test]
    fn rabi_circuit_shapes() {
        let spec = RabiSpec::new(PI / 2.0, 2).unwrap();
        let circuit = build_rabi_circuit(&spec).unwrap();
        assert_eq!(circuit.n_qubits(), 3);
        // 2 rotations, 2 CNOTs, barrier, 3 measures.
        assert_eq!(circuit.len(), 8);
        let zero = RabiSpec::new(PI, 0).unwrap();
        let bare = build_rabi_circuit(&zero).unwrap();
        assert_eq!(bare.n_qubits(), 1);
        assert!(matches!(RabiSpec::new(PI, 7), Err(Error::AncillaBudget { .. })));
        assert!(RabiSpec::new(0.0, 1).is_err());
    }

    #[test]
    fn rabi_ideal_record_survival_matches_theory() {
        for (theta, n) in [(PI / 2.0, 2u32), (PI, 1), (PI / 3.0, 4)] {
            let spec = RabiSpec::new(theta, n).unwrap();
            let out = run_ideal(&build_rabi_circuit(&spec).unwrap()).unwrap();
            let records: Vec<usize> = (1..=n as usize).collect();
            let est = record_survival_from_distribution(
                &out.distribution,
                0,
                &records,
                0,
                spec.shots,
            );
            assert!(
                (est.p - theory_rabi(theta, n).unwrap()).abs() < 1e-12,
                "theta={theta} n={n}"
            );
        }
        // N = 2, θ = π/2: cos⁴(π/8) ≈ 0.7286.
        let spec = RabiSpec::new(PI / 2.0, 2).unwrap();
        let out = run_ideal(&build_rabi_circuit(&spec).unwrap()).unwrap();
        let est = record_survival_from_distribution(&out.distribution, 0, &[1, 2], 0, 1);
        assert!((est.p - 0.7286).abs() < 1e-4);
    }

    #[test]
    fn bare_pi_rotation_fully_flips() {
        let spec = RabiSpec::new(PI, 0).unwrap();
        let out = run_ideal(&build_rabi_circuit(&spec).unwrap()).unwrap();
        let est = record_survival_from_distribution(&out.distribution, 0, &[], 0, 1);
        assert!(est.p < 1e-15, "survival {} after a full flip", est.p);
    }

    #[test]
    fn rabi_ideal_survival_increases_with_n() {
        let mut last = 0.0;
        for n in 1..=6u32 {
            let spec = RabiSpec::new(PI / 2.0, n).unwrap();
            let out = run_ideal(&build_rabi_circuit(&spec).unwrap()).unwrap();
            let records: Vec<usize> = (1..=n as usize).collect();
            let est = record_survival_from_distribution(&out.distribution, 0, &records, 0, 1);
            assert!(est.p > last, "n={n}");
            last = est.p;
        }
    }

    #[test]
    fn sampled_rabi_survival_within_four_sigma() {
        // θ = π/2, N = 3: p within 4σ of cos⁶(π/12) ≈ 0.812.
        let spec = RabiSpec::new(PI / 2.0, 3).unwrap();
        let hist = run_sampling(&build_rabi_circuit(&spec).unwrap(), spec.shots, 11).unwrap();
        let est = record_survival(&hist, 0, &[1, 2, 3], 0).unwrap();
        let p = theory_rabi(PI / 2.0, 3).unwrap();
        let sigma = (p * (1.0 - p) / spec.shots as f64).sqrt();
        assert!((est.p - p).abs() < 4.0 * sigma, "est={} theory={p}", est.p);
    }

    #[test]
    fn survival_probability_is_the_marginal() {
        let mut counts = BTreeMap::new();
        counts.insert("00".into(), 5000u64);
        counts.insert("01".into(), 5000);
        counts.insert("10".into(), 5000);
        counts.insert("11".into(), 5000);
        let hist = CountsHistogram::new(20000, counts).unwrap();
        let est = survival_probability(&hist, 0, 0).unwrap();
        assert!((est.p - 0.5).abs() < 1e-12);
        assert!((est.stderr - (0.25f64 / 20000.0).sqrt()).abs() < 1e-12);
        // All shots on "000" with target 0: p = 1.
        let mut counts = BTreeMap::new();
        counts.insert("000".into(), 777u64);
        let hist = CountsHistogram::new(777, counts).unwrap();
        assert!((survival_probability(&hist, 0, 0).unwrap().p - 1.0).abs() < 1e-15);
        assert!((record_survival(&hist, 0, &[1, 2], 0).unwrap().p - 1.0).abs() < 1e-15);
        assert!(matches!(
            survival_probability(&hist, 5, 0),
            Err(Error::ClbitOutOfRange { .. })
        ));
    }

    #[test]
    fn pseudomode_circuit_survival_is_cos_power_2n() {
        let device = DeviceSnapshot::linear(8);
        let g = 1.0 / 15.8;
        for n in [1u32, 3, 6] {
            let spec = DecaySpec::new(10.25, n, DecayModel::Pseudomode { g_rad_per_us: g })
                .unwrap();
            let built = build_decay_circuit(&spec, &device).unwrap();
            let out = run_ideal(&built.circuit).unwrap();
            let est = record_survival_from_distribution(
                &out.distribution,
                0,
                &built.record_clbits,
                1,
                1,
            );
            let expect = (g * 10.25 / n as f64).cos().powi(2 * n as i32);
            assert!((est.p - expect).abs() < 1e-9, "n={n}: {} vs {expect}", est.p);
        }
    }

    #[test]
    fn pseudomode_single_segment_is_cos_squared() {
        let device = DeviceSnapshot::linear(3);
        let g = 0.11;
        let t = 4.0;
        let spec = DecaySpec::new(t, 1, DecayModel::Pseudomode { g_rad_per_us: g }).unwrap();
        let built = build_decay_circuit(&spec, &device).unwrap();
        let out = run_ideal(&built.circuit).unwrap();
        let est = record_survival_from_distribution(&out.distribution, 0, &[1], 1, 1);
        assert!((est.p - (g * t).cos().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn pseudomode_budget_is_checked() {
        let device = DeviceSnapshot::linear(4);
        let spec = DecaySpec::new(1.0, 3, DecayModel::Pseudomode { g_rad_per_us: 0.1 }).unwrap();
        assert!(matches!(
            build_decay_circuit(&spec, &device),
            Err(Error::AncillaBudget { .. })
        ));
    }

    #[test]
    fn snapshot_decay_plan_covers_nairobi_n6() {
        let device = DeviceSnapshot::builtin("nairobi-like").unwrap();
        let spec = DecaySpec::new(10.25, 6, DecayModel::SnapshotNoise).unwrap();
        let built = build_decay_circuit(&spec, &device).unwrap();
        // Six records on six distinct qubits, none of them the final system.
        let measures = built.circuit.measurements();
        assert_eq!(measures.len(), 7);
        let qubits: std::collections::HashSet<usize> =
            measures.iter().map(|&(_, q)| q).collect();
        assert_eq!(qubits.len(), 7);
        // All two-qubit gates on coupling edges.
        for instr in built.circuit.instructions() {
            if let Instruction::Cx { control, target } = instr {
                assert!(device.has_directed_edge(*control, *target));
            }
            if let Instruction::Swap { a, b } = instr {
                assert!(device.coupling_map().are_adjacent(*a, *b));
            }
        }
    }

    #[test]
    fn snapshot_decay_infeasible_when_time_is_too_short() {
        let device = DeviceSnapshot::builtin("nairobi-like").unwrap();
        // 2 µs cannot hold six segments of swaps and CNOTs.
        let spec = DecaySpec::new(2.0, 6, DecayModel::SnapshotNoise).unwrap();
        assert!(matches!(
            build_decay_circuit(&spec, &device),
            Err(Error::InfeasibleSegment { .. }) | Err(Error::InvalidArgument(_))
        ));
    }

    fn synthetic_points(t_zeno: f64, n: u32, times: &[f64], shots: u64) -> Vec<SurvivalPoint> {
        times
            .iter()
            .map(|&t| {
                let p = theory_decay(t, n, t_zeno).unwrap();
                SurvivalPoint {
                    t_us: t,
                    n_measurements: n,
                    p,
                    stderr: (p * (1.0 - p) / shots as f64).sqrt(),
                }
            })
            .collect()
    }

    #[test]
    fn fit_recovers_exact_synthetic_data() {
        let times = [0.0, 2.05, 4.1, 6.15, 8.2, 10.25];
        let points = synthetic_points(15.8, 6, &times, 20000);
        let fit = fit_zeno_time(&points, 6).unwrap();
        assert!((fit.t_us - 15.8).abs() < 1e-6, "{}", fit.t_us);
        assert!(fit.sigma_us > 0.0);
        assert!(fit.residual_norm < 1e-6);
    }

    #[test]
    fn fit_recovers_noisy_synthetic_data_within_half_micro() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let times = [0.0, 2.05, 4.1, 6.15, 8.2, 10.25];
        let shots = 20000u64;
        let points: Vec<SurvivalPoint> = times
            .iter()
            .map(|&t| {
                let p = theory_decay(t, 6, 15.8).unwrap();
                let hits = (0..shots).filter(|_| rng.gen::<f64>() < p).count();
                let p_hat = hits as f64 / shots as f64;
                SurvivalPoint {
                    t_us: t,
                    n_measurements: 6,
                    p: p_hat,
                    stderr: (p_hat * (1.0 - p_hat) / shots as f64).sqrt(),
                }
            })
            .collect();
        let fit = fit_zeno_time(&points, 6).unwrap();
        assert!((fit.t_us - 15.8).abs() < 0.5, "{}", fit.t_us);
    }

    #[test]
    fn fit_rejects_too_few_points_and_degenerate_weights() {
        let points = synthetic_points(15.8, 6, &[0.0, 2.0], 100);
        assert!(matches!(
            fit_zeno_time(&points, 6),
            Err(Error::InvalidArgument(_))
        ));
        let mut flat = synthetic_points(15.8, 6, &[0.0, 2.0, 4.0], 100);
        for p in &mut flat {
            p.p = 1.0;
            p.stderr = 0.0;
        }
        assert!(matches!(
            fit_zeno_time(&flat, 6),
            Err(Error::DegenerateWeights)
        ));
    }

    #[test]
    fn fit_from_explicit_start_validates_feasibility() {
        let points = synthetic_points(15.8, 6, &[0.0, 5.0, 10.0], 20000);
        assert!(matches!(
            fit_zeno_time_from(&points, 6, 1.0),
            Err(Error::Domain(_))
        ));
        let fit = fit_zeno_time_from(&points, 6, 40.0).unwrap();
        assert!((fit.t_us - 15.8).abs() < 1e-6);
    }
}
