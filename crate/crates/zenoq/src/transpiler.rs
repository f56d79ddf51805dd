//! Lowering of abstract circuits onto a device: basis-gate decomposition,
//! SWAP-insertion routing against the coupling map, and delay quantization.
//!
//! Routing is greedy: each two-qubit gate whose operands are not adjacent is
//! preceded by SWAPs along the lexicographically smallest shortest path, and
//! the induced logical-to-physical permutation persists (no swap-back). The
//! circuits this crate targets are small enough that search-based routing
//! would buy nothing.

use std::f64::consts::PI;

use crate::circuit::{schedule, Circuit, Instruction, Schedule};
use crate::device::DeviceSnapshot;
use crate::error::{Error, Result};
use crate::gates::{permutation_matrix, UnitaryMatrix};

/// Logical-to-physical wire assignment produced by routing.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    logical_to_physical: Vec<usize>,
}

impl Layout {
    pub fn identity(n: usize) -> Layout {
        Layout {
            logical_to_physical: (0..n).collect(),
        }
    }

    pub fn physical(&self, logical: usize) -> usize {
        self.logical_to_physical[logical]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.logical_to_physical
    }

    fn swap_physical(&mut self, pa: usize, pb: usize) {
        for p in &mut self.logical_to_physical {
            if *p == pa {
                *p = pb;
            } else if *p == pb {
                *p = pa;
            }
        }
    }

    /// Permutation unitary mapping the original wire labeling onto this
    /// layout: `unitary_of(routed) = permutation_unitary() · unitary_of(input)`.
    pub fn permutation_unitary(&self) -> UnitaryMatrix {
        permutation_matrix(&self.logical_to_physical)
    }
}

/// Result of routing: the physical circuit plus the final layout.
#[derive(Debug, Clone)]
pub struct RoutedCircuit {
    pub circuit: Circuit,
    pub layout: Layout,
}

/// Fully lowered circuit with its schedule and delay-rounding report.
#[derive(Debug, Clone)]
pub struct Lowered {
    pub circuit: Circuit,
    pub layout: Layout,
    pub schedule: Schedule,
    pub delay_adjustments: Vec<DelayAdjustment>,
}

/// Rounding applied to one delay during quantization.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DelayAdjustment {
    /// Index into the quantized circuit's instruction list.
    pub instruction: usize,
    pub original_dt: u64,
    pub quantized_dt: u64,
    /// `quantized - original`; positive when rounded by excess.
    pub error_dt: i64,
}

/// Decompose a U3 rotation into the standard five-gate alternating pattern
/// `RZ(λ) · SX · RZ(θ+π) · SX · RZ(φ+π)` (program order), which equals the
/// U3 matrix up to a global phase.
pub fn decompose_u3(qubit: usize, theta: f64, phi: f64, lambda: f64) -> Vec<Instruction> {
    vec![
        Instruction::Rz { qubit, phi: lambda },
        Instruction::Sx { qubit },
        Instruction::Rz { qubit, phi: theta + PI },
        Instruction::Sx { qubit },
        Instruction::Rz { qubit, phi: phi + PI },
    ]
}

fn decompose_pass(circuit: &Circuit) -> Result<Circuit> {
    let mut out = Circuit::new(circuit.n_qubits(), circuit.n_clbits());
    for instr in circuit.instructions() {
        match instr {
            Instruction::U3 { qubit, theta, phi, lambda } => {
                for g in decompose_u3(*qubit, *theta, *phi, *lambda) {
                    out.push(g)?;
                }
            }
            other => out.push(other.clone())?,
        }
    }
    Ok(out)
}

/// The 3-CNOT realization of SWAP on a directed edge, oriented to minimize
/// the summed directed CNOT durations (ties keep the lower-indexed control
/// first so lowering stays deterministic).
fn swap_as_cnots(pa: usize, pb: usize, device: &DeviceSnapshot) -> Result<[Instruction; 3]> {
    if !device.has_directed_edge(pa, pb) || !device.has_directed_edge(pb, pa) {
        // One-directional hardware would need basis-change tricks that are
        // out of scope; the bundled snapshots list both directions.
        let (a, b) = if device.has_directed_edge(pa, pb) { (pb, pa) } else { (pa, pb) };
        return Err(Error::NoDirectedEdge(a, b));
    }
    let cost_ab = device.swap_orientation_cost(pa, pb)?;
    let cost_ba = device.swap_orientation_cost(pb, pa)?;
    let (first, second) = if cost_ab < cost_ba || (cost_ab == cost_ba && pa < pb) {
        (pa, pb)
    } else {
        (pb, pa)
    };
    Ok([
        Instruction::Cx { control: first, target: second },
        Instruction::Cx { control: second, target: first },
        Instruction::Cx { control: first, target: second },
    ])
}

/// Route a circuit onto the device coupling map. Every two-qubit gate in the
/// output acts on a directed coupling edge; SWAPs (both routing-inserted and
/// explicit) become 3-CNOT blocks. The returned layout satisfies
/// `unitary_of(routed) = P · unitary_of(input)` with `P` the layout's
/// permutation unitary (measurement-free circuits).
pub fn route(circuit: &Circuit, device: &DeviceSnapshot) -> Result<RoutedCircuit> {
    if circuit.n_qubits() > device.n_qubits {
        return Err(Error::SizeLimit(format!(
            "circuit uses {} qubits but device '{}' has {}",
            circuit.n_qubits(),
            device.name,
            device.n_qubits
        )));
    }
    let map = device.coupling_map();
    let mut out = Circuit::new(device.n_qubits, circuit.n_clbits());
    let mut layout = Layout::identity(device.n_qubits);

    let bring_adjacent =
        |out: &mut Circuit, layout: &mut Layout, pa: usize, pb: usize| -> Result<usize> {
            if map.are_adjacent(pa, pb) {
                return Ok(pa);
            }
            let path = map.shortest_path(pa, pb)?;
            // Swap the first operand forward until it neighbors the second.
            for w in path.windows(2).take(path.len() - 2) {
                for g in swap_as_cnots(w[0], w[1], device)? {
                    out.push(g)?;
                }
                layout.swap_physical(w[0], w[1]);
            }
            Ok(path[path.len() - 2])
        };

    for instr in circuit.instructions() {
        match instr {
            Instruction::Cx { control, target } | Instruction::Ecr { control, target } => {
                let (pc, pt) = (layout.physical(*control), layout.physical(*target));
                let pc = bring_adjacent(&mut out, &mut layout, pc, pt)?;
                if !device.has_directed_edge(pc, pt) {
                    return Err(Error::NoDirectedEdge(pc, pt));
                }
                out.push(match instr {
                    Instruction::Cx { .. } => Instruction::Cx { control: pc, target: pt },
                    _ => Instruction::Ecr { control: pc, target: pt },
                })?;
            }
            Instruction::Swap { a, b } => {
                let (pa, pb) = (layout.physical(*a), layout.physical(*b));
                let pa = bring_adjacent(&mut out, &mut layout, pa, pb)?;
                for g in swap_as_cnots(pa, pb, device)? {
                    out.push(g)?;
                }
            }
            Instruction::Xy { .. } => {
                return Err(Error::NotLowerable(
                    "xy".into(),
                    "the exchange gate has no device realization".into(),
                ));
            }
            Instruction::U3 { qubit, theta, phi, lambda } => {
                out.push(Instruction::U3 {
                    qubit: layout.physical(*qubit),
                    theta: *theta,
                    phi: *phi,
                    lambda: *lambda,
                })?;
            }
            Instruction::Rz { qubit, phi } => {
                out.push(Instruction::Rz { qubit: layout.physical(*qubit), phi: *phi })?;
            }
            Instruction::Sx { qubit } => {
                out.push(Instruction::Sx { qubit: layout.physical(*qubit) })?;
            }
            Instruction::X { qubit } => {
                out.push(Instruction::X { qubit: layout.physical(*qubit) })?;
            }
            Instruction::Delay { qubit, dt } => {
                out.push(Instruction::Delay { qubit: layout.physical(*qubit), dt: *dt })?;
            }
            Instruction::Measure { qubit, clbit } => {
                // Clbits keep their logical meaning across routing.
                out.push(Instruction::Measure {
                    qubit: layout.physical(*qubit),
                    clbit: *clbit,
                })?;
            }
            Instruction::Barrier { qubits } => {
                out.push(Instruction::Barrier {
                    qubits: qubits.iter().map(|&q| layout.physical(q)).collect(),
                })?;
            }
        }
    }
    Ok(RoutedCircuit { circuit: out, layout })
}

/// Round every delay to the nearest multiple of the device granularity,
/// ties rounding up. Each delay moves by at most granularity/2, so N delays
/// stay within the N·granularity worst-case bound on the total time.
pub fn quantize_delays(circuit: &Circuit, device: &DeviceSnapshot) -> Circuit {
    let g = device.granularity_dt;
    let mut out = Circuit::new(circuit.n_qubits(), circuit.n_clbits());
    for instr in circuit.instructions() {
        let quantized = match instr {
            Instruction::Delay { qubit, dt } => {
                let rounded = ((2 * dt + g) / (2 * g)) * g;
                Instruction::Delay { qubit: *qubit, dt: rounded }
            }
            other => other.clone(),
        };
        out.push(quantized).expect("quantization preserves validity");
    }
    out
}

/// Per-delay rounding report between a circuit and its quantized form.
pub fn delay_adjustments(original: &Circuit, quantized: &Circuit) -> Vec<DelayAdjustment> {
    original
        .instructions()
        .iter()
        .zip(quantized.instructions())
        .enumerate()
        .filter_map(|(i, (before, after))| match (before, after) {
            (Instruction::Delay { dt: b, .. }, Instruction::Delay { dt: a, .. }) => {
                Some(DelayAdjustment {
                    instruction: i,
                    original_dt: *b,
                    quantized_dt: *a,
                    error_dt: *a as i64 - *b as i64,
                })
            }
            _ => None,
        })
        .collect()
}

/// Full lowering pipeline: U3 decomposition, routing, delay quantization and
/// ASAP scheduling. The output uses only the device basis gates (plus
/// delays, measurements and barriers).
pub fn lower(circuit: &Circuit, device: &DeviceSnapshot) -> Result<Lowered> {
    let decomposed = decompose_pass(circuit)?;
    let routed = route(&decomposed, device)?;
    let quantized = quantize_delays(&routed.circuit, device);
    let adjustments = delay_adjustments(&routed.circuit, &quantized);
    for instr in quantized.instructions() {
        if instr.is_gate() && !device.is_basis_gate(instr.name()) {
            return Err(Error::NonBasisGate {
                gate: instr.name().into(),
                basis: device.basis_gates.clone(),
            });
        }
    }
    let sched = schedule(&quantized, device)?;
    Ok(Lowered {
        circuit: quantized,
        layout: routed.layout,
        schedule: sched,
        delay_adjustments: adjustments,
    })
}
