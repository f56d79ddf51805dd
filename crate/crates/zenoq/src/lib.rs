//! Quantum Zeno effect experiment toolkit.
//!
//! The crate reproduces repeated-measurement (Zeno) experiments on a single
//! qubit end to end on classical hardware:
//!
//! - [`gates`] / [`states`]: dense complex linear algebra for quantum states,
//!   gate application, tensor products and partial traces;
//! - [`circuit`]: an instruction-list IR with delays in hardware dt units,
//!   terminal measurements and ASAP duration accounting;
//! - [`device`]: frozen device snapshots (coupling map, basis gates, T1/T2,
//!   readout errors, gate durations);
//! - [`transpiler`]: basis-gate lowering, SWAP-insertion routing and delay
//!   quantization;
//! - [`simulator`]: exact statevector, seeded shot-sampling and noisy
//!   density-matrix backends;
//! - [`zeno`]: experiment builders, survival-probability theory curves,
//!   Zeno-time computation and fitting;
//! - [`mitigation`]: readout/SPAM calibration and correction;
//! - [`experiments`]: sweep drivers and report files behind the CLI.

// Validation guards are written as `!(x > 0.0)` on purpose: unlike
// `x <= 0.0`, the negated form also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index-based loops mirror the row/column arithmetic in the matrix kernels.
#![allow(clippy::needless_range_loop)]

pub mod circuit;
pub mod device;
pub mod error;
pub mod experiments;
pub mod gates;
pub mod mitigation;
pub mod simulator;
pub mod states;
pub mod transpiler;
pub mod zeno;

pub use circuit::{schedule, Circuit, Instruction, Schedule};
pub use device::{CouplingMap, DeviceSnapshot, QubitProperties};
pub use error::{Error, Result};
pub use gates::{u3_matrix, UnitaryMatrix};
pub use simulator::{
    idle_channel, run_ideal, run_noisy, run_sampling, CountsHistogram, NoiseModel,
    ProbabilityDistribution,
};
pub use states::{DensityMatrix, StateVector};
pub use transpiler::{decompose_u3, lower, quantize_delays, route, Layout, Lowered};
pub use zeno::{
    build_decay_circuit, build_rabi_circuit, fit_zeno_time, theory_decay, theory_rabi,
    zeno_time, DecayModel, DecaySpec, Hamiltonian, RabiSpec, SurvivalPoint, ZenoFit,
};
