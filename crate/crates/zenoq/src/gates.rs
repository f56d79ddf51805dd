//! Gate matrices and dense complex unitaries.
//!
//! All multi-qubit matrices use little-endian subspace ordering: basis index
//! `m` assigns bit `j` of `m` to `targets[j]` when the matrix is applied or
//! embedded. `kron(a, b)` places `a` on the low-order bits.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Shorthand constructor for complex entries.
#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Tolerance for the unitarity check `U†U = I`.
pub const UNITARY_TOL: f64 = 1e-10;

/// Dense square complex matrix with power-of-two dimension, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl UnitaryMatrix {
    /// Identity of the given (power-of-two) dimension.
    pub fn identity(dim: usize) -> Self {
        assert!(dim.is_power_of_two(), "dimension must be a power of two");
        let mut data = vec![c(0.0, 0.0); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = c(1.0, 0.0);
        }
        Self { dim, data }
    }

    /// Build from row-major entries, validating shape and unitarity.
    pub fn from_vec(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if !dim.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "matrix dimension {dim} is not a power of two"
            )));
        }
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries, got {}",
                dim * dim,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("non-finite matrix entry".into()));
        }
        let m = Self { dim, data };
        let err = m.unitarity_error();
        if err > UNITARY_TOL {
            return Err(Error::NotUnitary(err));
        }
        Ok(m)
    }

    pub(crate) fn from_vec_unchecked(dim: usize, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), dim * dim);
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of qubits the matrix acts on.
    pub fn n_qubits(&self) -> usize {
        self.dim.trailing_zeros() as usize
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim + col]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// Matrix product `self * rhs`.
    pub fn mul(&self, rhs: &UnitaryMatrix) -> UnitaryMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in matrix product");
        let n = self.dim;
        let mut out = vec![c(0.0, 0.0); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        UnitaryMatrix { dim: n, data: out }
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> UnitaryMatrix {
        let n = self.dim;
        let mut out = vec![c(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                out[j * n + i] = self.data[i * n + j].conj();
            }
        }
        UnitaryMatrix { dim: n, data: out }
    }

    /// Kronecker product with `self` on the low-order qubits.
    pub fn kron(&self, high: &UnitaryMatrix) -> UnitaryMatrix {
        let (da, db) = (self.dim, high.dim);
        let dim = da * db;
        let mut out = vec![c(0.0, 0.0); dim * dim];
        for ib in 0..db {
            for jb in 0..db {
                let hb = high.data[ib * db + jb];
                for ia in 0..da {
                    for ja in 0..da {
                        out[(ib * da + ia) * dim + (jb * da + ja)] =
                            hb * self.data[ia * da + ja];
                    }
                }
            }
        }
        UnitaryMatrix { dim, data: out }
    }

    /// Embed this k-qubit matrix into an n-qubit space, acting on `targets`
    /// (subspace bit `j` of the matrix maps to qubit `targets[j]`).
    pub fn embed(&self, targets: &[usize], n_qubits: usize) -> Result<UnitaryMatrix> {
        check_targets(targets, n_qubits, self.dim)?;
        let dim = 1usize << n_qubits;
        let k = targets.len();
        let sub = 1usize << k;
        let mut out = vec![c(0.0, 0.0); dim * dim];
        for g in 0..dim {
            let mut m = 0usize;
            for (j, &t) in targets.iter().enumerate() {
                m |= ((g >> t) & 1) << j;
            }
            let rest = {
                let mut r = g;
                for &t in targets {
                    r &= !(1usize << t);
                }
                r
            };
            for mp in 0..sub {
                let amp = self.data[mp * sub + m];
                if amp.norm_sqr() == 0.0 {
                    continue;
                }
                let mut gp = rest;
                for (j, &t) in targets.iter().enumerate() {
                    gp |= ((mp >> j) & 1) << t;
                }
                out[gp * dim + g] = amp;
            }
        }
        Ok(UnitaryMatrix { dim, data: out })
    }

    /// Maximum absolute entry of `U†U - I`.
    pub fn unitarity_error(&self) -> f64 {
        let prod = self.dagger().mul(self);
        let n = self.dim;
        let mut max = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) };
                max = max.max((prod.data[i * n + j] - expect).norm());
            }
        }
        max
    }

    /// Maximum absolute entrywise difference.
    pub fn max_diff(&self, other: &UnitaryMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Entrywise equality up to a global phase (the phase is taken from the
    /// largest-magnitude entry of `other`).
    pub fn eq_up_to_global_phase(&self, other: &UnitaryMatrix, tol: f64) -> bool {
        assert_eq!(self.dim, other.dim);
        let mut best = 0usize;
        let mut best_mag = 0.0f64;
        for (i, z) in other.data.iter().enumerate() {
            let m = z.norm();
            if m > best_mag {
                best_mag = m;
                best = i;
            }
        }
        if best_mag < tol {
            return self.max_diff(other) <= tol;
        }
        let phase = self.data[best] / other.data[best];
        if (phase.norm() - 1.0).abs() > 1e-6 {
            return false;
        }
        self.data
            .iter()
            .zip(&other.data)
            .all(|(a, b)| (a - phase * b).norm() <= tol)
    }
}

pub(crate) fn check_targets(targets: &[usize], n_qubits: usize, dim: usize) -> Result<()> {
    if dim != 1usize << targets.len() {
        return Err(Error::DimensionMismatch(format!(
            "matrix of dimension {dim} does not act on {} qubits",
            targets.len()
        )));
    }
    for (i, &t) in targets.iter().enumerate() {
        if t >= n_qubits {
            return Err(Error::QubitOutOfRange {
                index: t,
                n_qubits,
            });
        }
        if targets[..i].contains(&t) {
            return Err(Error::DuplicateTarget(t));
        }
    }
    Ok(())
}

fn check_finite(angles: &[f64]) -> Result<()> {
    if angles.iter().any(|a| !a.is_finite()) {
        return Err(Error::InvalidArgument("non-finite gate angle".into()));
    }
    Ok(())
}

/// The general single-qubit rotation
/// `[[cos(θ/2), -e^{iλ} sin(θ/2)], [e^{iφ} sin(θ/2), e^{i(φ+λ)} cos(θ/2)]]`.
pub fn u3_matrix(theta: f64, phi: f64, lambda: f64) -> Result<UnitaryMatrix> {
    check_finite(&[theta, phi, lambda])?;
    let (ct, st) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let el = Complex64::from_polar(1.0, lambda);
    let ep = Complex64::from_polar(1.0, phi);
    let epl = Complex64::from_polar(1.0, phi + lambda);
    Ok(UnitaryMatrix::from_vec_unchecked(
        2,
        vec![c(ct, 0.0), -el * st, ep * st, epl * ct],
    ))
}

/// Z rotation `diag(e^{-iφ/2}, e^{iφ/2})`.
pub fn rz_matrix(phi: f64) -> Result<UnitaryMatrix> {
    check_finite(&[phi])?;
    Ok(UnitaryMatrix::from_vec_unchecked(
        2,
        vec![
            Complex64::from_polar(1.0, -phi / 2.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            Complex64::from_polar(1.0, phi / 2.0),
        ],
    ))
}

/// Square root of X.
pub fn sx_matrix() -> UnitaryMatrix {
    UnitaryMatrix::from_vec_unchecked(
        2,
        vec![c(0.5, 0.5), c(0.5, -0.5), c(0.5, -0.5), c(0.5, 0.5)],
    )
}

/// Pauli X.
pub fn x_matrix() -> UnitaryMatrix {
    UnitaryMatrix::from_vec_unchecked(2, vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
}

/// CNOT with the control on subspace bit 0 and the target on subspace bit 1.
pub fn cx_matrix() -> UnitaryMatrix {
    let o = c(0.0, 0.0);
    let l = c(1.0, 0.0);
    UnitaryMatrix::from_vec_unchecked(
        4,
        vec![
            l, o, o, o, //
            o, o, o, l, //
            o, o, l, o, //
            o, l, o, o,
        ],
    )
}

/// Echoed cross-resonance gate, `(X_0 - X_1 Y_0)/√2` with subspace bit 0 on
/// the control side. Locally equivalent to CNOT:
/// `CX = (X ⊗ I) · ECR · (S† ⊗ √X†)` (control factor first), which is the
/// fixed pre-rotation choice this crate uses.
pub fn ecr_matrix() -> UnitaryMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let o = c(0.0, 0.0);
    let r = c(s, 0.0);
    let i = c(0.0, s);
    let ni = c(0.0, -s);
    UnitaryMatrix::from_vec_unchecked(
        4,
        vec![
            o, r, o, i, //
            r, o, ni, o, //
            o, i, o, r, //
            ni, o, r, o,
        ],
    )
}

/// The 4x4 SWAP permutation matrix.
pub fn swap_matrix() -> UnitaryMatrix {
    let o = c(0.0, 0.0);
    let l = c(1.0, 0.0);
    UnitaryMatrix::from_vec_unchecked(
        4,
        vec![
            l, o, o, o, //
            o, o, l, o, //
            o, l, o, o, //
            o, o, o, l,
        ],
    )
}

/// Partial-iSWAP exchange block: identity on |00⟩ and |11⟩, rotation of the
/// {|01⟩, |10⟩} block by β/2, i.e. `exp(-i β (σxσx + σyσy)/4)`.
///
/// Starting from one excitation, the survival amplitude after `xy(2gt)` is
/// `cos(gt)`, so this realizes the quadratic short-time decay of a qubit
/// exchanging its excitation with a single environment mode.
pub fn xy_matrix(beta: f64) -> Result<UnitaryMatrix> {
    check_finite(&[beta])?;
    let (cb, sb) = ((beta / 2.0).cos(), (beta / 2.0).sin());
    let o = c(0.0, 0.0);
    let l = c(1.0, 0.0);
    Ok(UnitaryMatrix::from_vec_unchecked(
        4,
        vec![
            l, o, o, o, //
            o, c(cb, 0.0), c(0.0, -sb), o, //
            o, c(0.0, -sb), c(cb, 0.0), o, //
            o, o, o, l,
        ],
    ))
}

/// Permutation unitary for a wire relabeling: bit `l` of the input index is
/// moved to bit `perm[l]` of the output index.
pub fn permutation_matrix(perm: &[usize]) -> UnitaryMatrix {
    let n = perm.len();
    let dim = 1usize << n;
    let mut data = vec![c(0.0, 0.0); dim * dim];
    for g in 0..dim {
        let mut gp = 0usize;
        for (l, &p) in perm.iter().enumerate() {
            gp |= ((g >> l) & 1) << p;
        }
        data[gp * dim + g] = c(1.0, 0.0);
    }
    UnitaryMatrix { dim, data }
}
