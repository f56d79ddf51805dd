//! Pure and mixed quantum states over n qubits.
//!
//! Basis ordering is little-endian throughout the crate: qubit 0 is the least
//! significant bit of a basis index. `tensor(a, b)` puts `a`'s qubits on the
//! low-order bits. This convention is fixed once here and pinned by tests,
//! since every bitstring produced downstream depends on it.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gates::{c, check_targets, UnitaryMatrix};

/// `Σ|amplitude|² = 1` must hold to this tolerance.
pub const NORM_TOL: f64 = 1e-10;
/// Hermiticity / unit-trace tolerance for density matrices.
pub const DENSITY_TOL: f64 = 1e-10;
/// Smallest admissible eigenvalue of a density matrix.
pub const PSD_TOL: f64 = 1e-9;

/// Apply a k-qubit matrix (row-major, dimension 2^k) to the amplitudes of an
/// n-qubit vector in place, acting on `targets`.
fn apply_kernel(amps: &mut [Complex64], mat: &[Complex64], targets: &[usize]) {
    let k = targets.len();
    let sub = 1usize << k;
    let dim = amps.len();
    let mask: usize = targets.iter().map(|&t| 1usize << t).sum();
    let mut scratch = vec![c(0.0, 0.0); sub];
    let mut base = 0usize;
    loop {
        // `base` iterates over indices with all target bits clear.
        for m in 0..sub {
            let mut g = base;
            for (j, &t) in targets.iter().enumerate() {
                g |= ((m >> j) & 1) << t;
            }
            scratch[m] = amps[g];
        }
        for mp in 0..sub {
            let mut acc = c(0.0, 0.0);
            for m in 0..sub {
                acc += mat[mp * sub + m] * scratch[m];
            }
            let mut g = base;
            for (j, &t) in targets.iter().enumerate() {
                g |= ((mp >> j) & 1) << t;
            }
            amps[g] = acc;
        }
        // Advance to the next index whose target bits are all zero.
        base = ((base | mask) + 1) & !mask;
        if base >= dim {
            break;
        }
    }
}

fn conjugated(mat: &[Complex64]) -> Vec<Complex64> {
    mat.iter().map(|z| z.conj()).collect()
}

// ---------------------------------------------------------------------------
// StateVector
// ---------------------------------------------------------------------------

/// Normalized pure state of `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// The all-|0⟩ state.
    pub fn zero(n_qubits: usize) -> Self {
        let mut amps = vec![c(0.0, 0.0); 1 << n_qubits];
        amps[0] = c(1.0, 0.0);
        Self { n_qubits, amps }
    }

    /// Build from amplitudes, validating normalization.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        if !amps.len().is_power_of_two() || amps.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "amplitude vector of length {} is not a power of two",
                amps.len()
            )));
        }
        if amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("non-finite amplitude".into()));
        }
        let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized((norm - 1.0).abs()));
        }
        let n_qubits = amps.len().trailing_zeros() as usize;
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude(&self, basis_index: usize) -> Complex64 {
        self.amps[basis_index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `(U ⊗ I_rest)|ψ⟩` with the matrix acting on `targets`.
    pub fn apply(&self, u: &UnitaryMatrix, targets: &[usize]) -> Result<StateVector> {
        check_targets(targets, self.n_qubits, u.dim())?;
        let mut amps = self.amps.clone();
        apply_kernel(&mut amps, u.data(), targets);
        Ok(StateVector {
            n_qubits: self.n_qubits,
            amps,
        })
    }

    /// Kronecker product; `self`'s qubits become the low-order bits.
    pub fn tensor(&self, other: &StateVector) -> StateVector {
        let da = self.amps.len();
        let db = other.amps.len();
        let mut amps = vec![c(0.0, 0.0); da * db];
        for ib in 0..db {
            for ia in 0..da {
                amps[ib * da + ia] = self.amps[ia] * other.amps[ib];
            }
        }
        StateVector {
            n_qubits: self.n_qubits + other.n_qubits,
            amps,
        }
    }

    /// Basis-outcome probabilities `|amplitude|²`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|z| z.norm_sqr()).collect()
    }
}

// ---------------------------------------------------------------------------
// DensityMatrix
// ---------------------------------------------------------------------------

/// Mixed state of `n_qubits` qubits; Hermitian, unit trace, PSD.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    data: Vec<Complex64>, // row-major 2^n x 2^n
}

impl DensityMatrix {
    /// |ψ⟩⟨ψ| of a pure state.
    pub fn from_state_vector(psi: &StateVector) -> Self {
        let dim = psi.amps.len();
        let mut data = vec![c(0.0, 0.0); dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                data[i * dim + j] = psi.amps[i] * psi.amps[j].conj();
            }
        }
        Self {
            n_qubits: psi.n_qubits,
            data,
        }
    }

    /// The |0...0⟩⟨0...0| state.
    pub fn zero(n_qubits: usize) -> Self {
        Self::from_state_vector(&StateVector::zero(n_qubits))
    }

    /// Build from row-major entries, validating Hermiticity, trace and
    /// positive semidefiniteness (minimum eigenvalue ≥ -1e-9).
    pub fn from_entries(n_qubits: usize, data: Vec<Complex64>) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries, got {}",
                dim * dim,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidDensityMatrix("non-finite entry".into()));
        }
        let mut herm_err = 0.0f64;
        for i in 0..dim {
            for j in 0..dim {
                herm_err = herm_err.max((data[i * dim + j] - data[j * dim + i].conj()).norm());
            }
        }
        if herm_err > DENSITY_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "not Hermitian (max asymmetry {herm_err:e})"
            )));
        }
        let trace: Complex64 = (0..dim).map(|i| data[i * dim + i]).sum();
        if (trace - c(1.0, 0.0)).norm() > DENSITY_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "trace is {trace} instead of 1"
            )));
        }
        if !is_psd_within(&data, dim, PSD_TOL) {
            return Err(Error::InvalidDensityMatrix(format!(
                "not positive semidefinite (eigenvalue below -{PSD_TOL:e})"
            )));
        }
        Ok(Self { n_qubits, data })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1usize << self.n_qubits
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim() + col]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn trace(&self) -> Complex64 {
        let dim = self.dim();
        (0..dim).map(|i| self.data[i * dim + i]).sum()
    }

    /// Diagonal entries as real probabilities.
    pub fn diagonal_probs(&self) -> Vec<f64> {
        let dim = self.dim();
        (0..dim).map(|i| self.data[i * dim + i].re).collect()
    }

    /// Maximum deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let dim = self.dim();
        let mut e = 0.0f64;
        for i in 0..dim {
            for j in 0..dim {
                e = e.max((self.data[i * dim + j] - self.data[j * dim + i].conj()).norm());
            }
        }
        e
    }

    /// `U ρ U†` with the matrix acting on `targets`.
    pub fn apply(&self, u: &UnitaryMatrix, targets: &[usize]) -> Result<DensityMatrix> {
        check_targets(targets, self.n_qubits, u.dim())?;
        let dim = self.dim();
        let mut data = self.data.clone();
        // U·ρ: transform each column.
        let mut col = vec![c(0.0, 0.0); dim];
        for j in 0..dim {
            for i in 0..dim {
                col[i] = data[i * dim + j];
            }
            apply_kernel(&mut col, u.data(), targets);
            for i in 0..dim {
                data[i * dim + j] = col[i];
            }
        }
        // (U·ρ)·U†: transform each row with conj(U).
        let cu = conjugated(u.data());
        for i in 0..dim {
            apply_kernel(&mut data[i * dim..(i + 1) * dim], &cu, targets);
        }
        Ok(DensityMatrix {
            n_qubits: self.n_qubits,
            data,
        })
    }

    /// `Σ_k K_k ρ K_k†` for single-qubit Kraus operators (each row-major 2x2).
    pub fn apply_single_qubit_kraus(
        &self,
        kraus: &[[Complex64; 4]],
        qubit: usize,
    ) -> Result<DensityMatrix> {
        if qubit >= self.n_qubits {
            return Err(Error::QubitOutOfRange {
                index: qubit,
                n_qubits: self.n_qubits,
            });
        }
        let dim = self.dim();
        let mut out = vec![c(0.0, 0.0); dim * dim];
        let targets = [qubit];
        let mut col = vec![c(0.0, 0.0); dim];
        for k in kraus {
            let mut term = self.data.clone();
            for j in 0..dim {
                for i in 0..dim {
                    col[i] = term[i * dim + j];
                }
                apply_kernel(&mut col, k, &targets);
                for i in 0..dim {
                    term[i * dim + j] = col[i];
                }
            }
            let ck: Vec<Complex64> = k.iter().map(|z| z.conj()).collect();
            for i in 0..dim {
                apply_kernel(&mut term[i * dim..(i + 1) * dim], &ck, &targets);
            }
            for (o, t) in out.iter_mut().zip(&term) {
                *o += t;
            }
        }
        Ok(DensityMatrix {
            n_qubits: self.n_qubits,
            data: out,
        })
    }

    /// Reduced density matrix on the kept qubits; result qubit `j`
    /// corresponds to `keep[j]`.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        if keep.is_empty() {
            return Err(Error::InvalidArgument("empty keep list".into()));
        }
        for (i, &q) in keep.iter().enumerate() {
            if q >= self.n_qubits {
                return Err(Error::QubitOutOfRange {
                    index: q,
                    n_qubits: self.n_qubits,
                });
            }
            if keep[..i].contains(&q) {
                return Err(Error::DuplicateTarget(q));
            }
        }
        let traced: Vec<usize> = (0..self.n_qubits).filter(|q| !keep.contains(q)).collect();
        let kdim = 1usize << keep.len();
        let tdim = 1usize << traced.len();
        let dim = self.dim();
        let index = |kept_bits: usize, env_bits: usize| -> usize {
            let mut g = 0usize;
            for (j, &q) in keep.iter().enumerate() {
                g |= ((kept_bits >> j) & 1) << q;
            }
            for (j, &q) in traced.iter().enumerate() {
                g |= ((env_bits >> j) & 1) << q;
            }
            g
        };
        let mut data = vec![c(0.0, 0.0); kdim * kdim];
        for a in 0..kdim {
            for b in 0..kdim {
                let mut acc = c(0.0, 0.0);
                for e in 0..tdim {
                    acc += self.data[index(a, e) * dim + index(b, e)];
                }
                data[a * kdim + b] = acc;
            }
        }
        Ok(DensityMatrix {
            n_qubits: keep.len(),
            data,
        })
    }

    /// Kronecker product; `self`'s qubits become the low-order bits.
    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        let da = self.dim();
        let db = other.dim();
        let dim = da * db;
        let mut data = vec![c(0.0, 0.0); dim * dim];
        for ib in 0..db {
            for jb in 0..db {
                let ob = other.data[ib * db + jb];
                for ia in 0..da {
                    for ja in 0..da {
                        data[(ib * da + ia) * dim + (jb * da + ja)] =
                            ob * self.data[ia * da + ja];
                    }
                }
            }
        }
        DensityMatrix {
            n_qubits: self.n_qubits + other.n_qubits,
            data,
        }
    }

    pub fn max_diff(&self, other: &DensityMatrix) -> f64 {
        assert_eq!(self.n_qubits, other.n_qubits);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// PSD check via Cholesky of `A + tol·I`: succeeds iff the minimum eigenvalue
/// of `A` is at least `-tol` (up to roundoff).
fn is_psd_within(data: &[Complex64], dim: usize, tol: f64) -> bool {
    let mut a: Vec<Complex64> = data.to_vec();
    for i in 0..dim {
        a[i * dim + i] += c(tol, 0.0);
    }
    let mut l = vec![c(0.0, 0.0); dim * dim];
    for j in 0..dim {
        let mut d = a[j * dim + j].re;
        for k in 0..j {
            d -= l[j * dim + k].norm_sqr();
        }
        if d < -1e-12 {
            return false;
        }
        let d = d.max(0.0).sqrt();
        l[j * dim + j] = c(d, 0.0);
        for i in (j + 1)..dim {
            let mut s = a[i * dim + j];
            for k in 0..j {
                s -= l[i * dim + k] * l[j * dim + k].conj();
            }
            l[i * dim + j] = if d > 0.0 { s / d } else { c(0.0, 0.0) };
        }
    }
    true
}
