//! Circuit intermediate representation: ordered instruction list over qubit
//! and clbit registers, with duration accounting against a device snapshot.
//!
//! Measurement is terminal per qubit. There is no mid-circuit measurement
//! instruction; a projective measurement in the middle of an evolution is
//! emulated by entangling with a fresh ancilla through a CNOT, and the
//! ancilla is read out at the end.

use serde::{Deserialize, Serialize};

use crate::device::DeviceSnapshot;
use crate::error::{Error, Result};
use crate::gates::{
    cx_matrix, ecr_matrix, rz_matrix, swap_matrix, sx_matrix, u3_matrix, x_matrix, xy_matrix,
    UnitaryMatrix,
};

pub const CIRCUIT_SCHEMA: &str = "zenoq-circuit-v1";

/// One circuit instruction. Angles are radians; delays are dt counts.
#[derive(Debug, Clone, PartialEq)]
pub enum Instruction {
    U3 { qubit: usize, theta: f64, phi: f64, lambda: f64 },
    Rz { qubit: usize, phi: f64 },
    Sx { qubit: usize },
    X { qubit: usize },
    Cx { control: usize, target: usize },
    Ecr { control: usize, target: usize },
    Xy { a: usize, b: usize, beta: f64 },
    Swap { a: usize, b: usize },
    Delay { qubit: usize, dt: u64 },
    Measure { qubit: usize, clbit: usize },
    Barrier { qubits: Vec<usize> },
}

impl Instruction {
    /// Lower-case gate name, matching snapshot duration and basis-gate keys.
    pub fn name(&self) -> &'static str {
        match self {
            Instruction::U3 { .. } => "u3",
            Instruction::Rz { .. } => "rz",
            Instruction::Sx { .. } => "sx",
            Instruction::X { .. } => "x",
            Instruction::Cx { .. } => "cx",
            Instruction::Ecr { .. } => "ecr",
            Instruction::Xy { .. } => "xy",
            Instruction::Swap { .. } => "swap",
            Instruction::Delay { .. } => "delay",
            Instruction::Measure { .. } => "measure",
            Instruction::Barrier { .. } => "barrier",
        }
    }

    /// Qubits touched by this instruction, in role order.
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Instruction::U3 { qubit, .. }
            | Instruction::Rz { qubit, .. }
            | Instruction::Sx { qubit }
            | Instruction::X { qubit }
            | Instruction::Delay { qubit, .. }
            | Instruction::Measure { qubit, .. } => vec![*qubit],
            Instruction::Cx { control, target } | Instruction::Ecr { control, target } => {
                vec![*control, *target]
            }
            Instruction::Xy { a, b, .. } | Instruction::Swap { a, b } => vec![*a, *b],
            Instruction::Barrier { qubits } => qubits.clone(),
        }
    }

    pub fn is_gate(&self) -> bool {
        !matches!(
            self,
            Instruction::Delay { .. } | Instruction::Measure { .. } | Instruction::Barrier { .. }
        )
    }

    /// Gate matrix together with its target list (None for non-gates).
    pub fn unitary(&self) -> Option<(UnitaryMatrix, Vec<usize>)> {
        match self {
            Instruction::U3 { qubit, theta, phi, lambda } => {
                Some((u3_matrix(*theta, *phi, *lambda).ok()?, vec![*qubit]))
            }
            Instruction::Rz { qubit, phi } => Some((rz_matrix(*phi).ok()?, vec![*qubit])),
            Instruction::Sx { qubit } => Some((sx_matrix(), vec![*qubit])),
            Instruction::X { qubit } => Some((x_matrix(), vec![*qubit])),
            Instruction::Cx { control, target } => {
                Some((cx_matrix(), vec![*control, *target]))
            }
            Instruction::Ecr { control, target } => {
                Some((ecr_matrix(), vec![*control, *target]))
            }
            Instruction::Xy { a, b, beta } => Some((xy_matrix(*beta).ok()?, vec![*a, *b])),
            Instruction::Swap { a, b } => Some((swap_matrix(), vec![*a, *b])),
            _ => None,
        }
    }
}

/// Ordered instruction list over `n_qubits` qubits and `n_clbits` clbits.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    n_clbits: usize,
    instructions: Vec<Instruction>,
    measured: Vec<bool>,
    clbit_written: Vec<bool>,
}

impl Circuit {
    pub fn new(n_qubits: usize, n_clbits: usize) -> Circuit {
        Circuit {
            n_qubits,
            n_clbits,
            instructions: Vec::new(),
            measured: vec![false; n_qubits],
            clbit_written: vec![false; n_clbits],
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_clbits(&self) -> usize {
        self.n_clbits
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    /// Append an instruction, enforcing index ranges, arity distinctness and
    /// per-qubit measurement terminality.
    pub fn push(&mut self, instr: Instruction) -> Result<()> {
        let qubits = instr.qubits();
        for (i, &q) in qubits.iter().enumerate() {
            if q >= self.n_qubits {
                return Err(Error::QubitOutOfRange { index: q, n_qubits: self.n_qubits });
            }
            if qubits[..i].contains(&q) {
                return Err(Error::DuplicateTarget(q));
            }
            if self.measured[q] && !matches!(instr, Instruction::Barrier { .. }) {
                return Err(Error::MeasuredQubitReused(q));
            }
        }
        if let Instruction::Delay { .. } = instr {
            // dt is unsigned; nothing further to check.
        }
        if let Instruction::Measure { qubit, clbit } = instr {
            if clbit >= self.n_clbits {
                return Err(Error::ClbitOutOfRange { index: clbit, n_clbits: self.n_clbits });
            }
            if self.clbit_written[clbit] {
                return Err(Error::ClbitConflict(clbit));
            }
            self.clbit_written[clbit] = true;
            self.measured[qubit] = true;
        }
        self.instructions.push(instr);
        Ok(())
    }

    /// Builder-style append.
    pub fn with(mut self, instr: Instruction) -> Result<Circuit> {
        self.push(instr)?;
        Ok(self)
    }

    /// Measured (clbit, qubit) pairs sorted by clbit.
    pub fn measurements(&self) -> Vec<(usize, usize)> {
        let mut pairs: Vec<(usize, usize)> = self
            .instructions
            .iter()
            .filter_map(|i| match i {
                Instruction::Measure { qubit, clbit } => Some((*clbit, *qubit)),
                _ => None,
            })
            .collect();
        pairs.sort_unstable();
        pairs
    }

    /// Product of the embedded instruction unitaries, in program order.
    /// Requires a measurement- and delay-free circuit on at most 6 qubits.
    pub fn unitary_of(&self) -> Result<UnitaryMatrix> {
        if self.n_qubits > 6 {
            return Err(Error::SizeLimit(format!(
                "unitary_of supports at most 6 qubits, circuit has {}",
                self.n_qubits
            )));
        }
        let mut total = UnitaryMatrix::identity(1 << self.n_qubits);
        for instr in &self.instructions {
            match instr {
                Instruction::Barrier { .. } => continue,
                Instruction::Measure { .. } | Instruction::Delay { .. } => {
                    return Err(Error::Unsupported(format!(
                        "unitary_of applies to gate-only circuits, found '{}'",
                        instr.name()
                    )));
                }
                _ => {
                    let (u, targets) = instr
                        .unitary()
                        .ok_or_else(|| Error::InvalidArgument("non-finite gate angle".into()))?;
                    total = u.embed(&targets, self.n_qubits)?.mul(&total);
                }
            }
        }
        Ok(total)
    }

    pub fn to_json(&self) -> String {
        let doc = CircuitDoc::from(self);
        serde_json::to_string_pretty(&doc).expect("circuit serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Circuit> {
        let doc: CircuitDoc =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        doc.into_circuit()
    }
}

/// As-soon-as-possible schedule of a circuit on a device, in dt units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule {
    /// Start time of each instruction, aligned with the instruction list.
    pub starts: Vec<u64>,
    /// Duration of each instruction in dt.
    pub durations: Vec<u64>,
    /// Critical-path end time.
    pub total_duration: u64,
}

impl Schedule {
    /// Latest start time among measurement instructions (0 if none): the
    /// point where the evolution stops and readout begins.
    pub fn measure_start(&self, circuit: &Circuit) -> u64 {
        circuit
            .instructions()
            .iter()
            .zip(&self.starts)
            .filter(|(i, _)| matches!(i, Instruction::Measure { .. }))
            .map(|(_, &s)| s)
            .max()
            .unwrap_or(0)
    }
}

/// Duration in dt of one instruction on the snapshot. SWAP is priced as its
/// cheaper 3-CNOT realization; Delay carries its own dt count; Barrier is
/// free.
pub fn instruction_duration_dt(instr: &Instruction, device: &DeviceSnapshot) -> Result<u64> {
    match instr {
        Instruction::Delay { dt, .. } => Ok(*dt),
        Instruction::Barrier { .. } => Ok(0),
        Instruction::Swap { a, b } => {
            Ok(device
                .swap_orientation_cost(*a, *b)?
                .min(device.swap_orientation_cost(*b, *a)?))
        }
        _ => device.duration_dt(instr.name(), &instr.qubits()),
    }
}

/// ASAP schedule: each instruction starts as soon as all of its qubits are
/// free; barriers synchronize their qubits at zero duration.
pub fn schedule(circuit: &Circuit, device: &DeviceSnapshot) -> Result<Schedule> {
    let mut ready = vec![0u64; circuit.n_qubits()];
    let mut starts = Vec::with_capacity(circuit.len());
    let mut durations = Vec::with_capacity(circuit.len());
    for instr in circuit.instructions() {
        let qubits = instr.qubits();
        let start = qubits.iter().map(|&q| ready[q]).max().unwrap_or(0);
        let duration = instruction_duration_dt(instr, device)?;
        for &q in &qubits {
            ready[q] = start + duration;
        }
        starts.push(start);
        durations.push(duration);
    }
    let total_duration = ready.into_iter().max().unwrap_or(0);
    Ok(Schedule { starts, durations, total_duration })
}

// ---------------------------------------------------------------------------
// Serialization document
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct InstructionDoc {
    kind: String,
    qubits: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dt: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    clbit: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CircuitDoc {
    schema: String,
    n_qubits: usize,
    n_clbits: usize,
    instructions: Vec<InstructionDoc>,
}

impl From<&Circuit> for CircuitDoc {
    fn from(c: &Circuit) -> CircuitDoc {
        let instructions = c
            .instructions
            .iter()
            .map(|i| {
                let mut doc = InstructionDoc {
                    kind: i.name().to_string(),
                    qubits: i.qubits(),
                    params: Vec::new(),
                    dt: None,
                    clbit: None,
                };
                match i {
                    Instruction::U3 { theta, phi, lambda, .. } => {
                        doc.params = vec![*theta, *phi, *lambda]
                    }
                    Instruction::Rz { phi, .. } => doc.params = vec![*phi],
                    Instruction::Xy { beta, .. } => doc.params = vec![*beta],
                    Instruction::Delay { dt, .. } => doc.dt = Some(*dt),
                    Instruction::Measure { clbit, .. } => doc.clbit = Some(*clbit),
                    _ => {}
                }
                doc
            })
            .collect();
        CircuitDoc {
            schema: CIRCUIT_SCHEMA.to_string(),
            n_qubits: c.n_qubits,
            n_clbits: c.n_clbits,
            instructions,
        }
    }
}

impl CircuitDoc {
    fn into_circuit(self) -> Result<Circuit> {
        if self.schema != CIRCUIT_SCHEMA {
            return Err(Error::Parse(format!(
                "unrecognized circuit schema '{}'",
                self.schema
            )));
        }
        let mut circuit = Circuit::new(self.n_qubits, self.n_clbits);
        for (idx, doc) in self.instructions.into_iter().enumerate() {
            let q = |i: usize| -> Result<usize> {
                doc.qubits.get(i).copied().ok_or_else(|| {
                    Error::Parse(format!("instruction {idx}: missing qubit operand {i}"))
                })
            };
            let p = |i: usize| -> Result<f64> {
                doc.params.get(i).copied().ok_or_else(|| {
                    Error::Parse(format!("instruction {idx}: missing parameter {i}"))
                })
            };
            let instr = match doc.kind.as_str() {
                "u3" => Instruction::U3 { qubit: q(0)?, theta: p(0)?, phi: p(1)?, lambda: p(2)? },
                "rz" => Instruction::Rz { qubit: q(0)?, phi: p(0)? },
                "sx" => Instruction::Sx { qubit: q(0)? },
                "x" => Instruction::X { qubit: q(0)? },
                "cx" => Instruction::Cx { control: q(0)?, target: q(1)? },
                "ecr" => Instruction::Ecr { control: q(0)?, target: q(1)? },
                "xy" => Instruction::Xy { a: q(0)?, b: q(1)?, beta: p(0)? },
                "swap" => Instruction::Swap { a: q(0)?, b: q(1)? },
                "delay" => Instruction::Delay {
                    qubit: q(0)?,
                    dt: doc.dt.ok_or_else(|| {
                        Error::Parse(format!("instruction {idx}: delay without dt"))
                    })?,
                },
                "measure" => Instruction::Measure {
                    qubit: q(0)?,
                    clbit: doc.clbit.ok_or_else(|| {
                        Error::Parse(format!("instruction {idx}: measure without clbit"))
                    })?,
                },
                "barrier" => Instruction::Barrier { qubits: doc.qubits.clone() },
                other => {
                    return Err(Error::Parse(format!(
                        "instruction {idx}: unknown kind '{other}'"
                    )))
                }
            };
            circuit.push(instr)?;
        }
        Ok(circuit)
    }
}
