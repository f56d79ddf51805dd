//! SPAM error mitigation: calibration circuits, confusion-matrix assembly,
//! plain-inverse correction, simplex-constrained correction, and classical
//! fidelity scoring.
//!
//! The constrained corrector solves `argmin ‖A·q - p‖₂` over the probability
//! simplex with the full calibration matrix. Because the calibration
//! circuits prepare their basis states with the same noisy X gates the
//! experiment uses, state-preparation error is baked into A's columns, so
//! the correction addresses both preparation and readout error. Plain
//! inversion is kept alongside for comparison; it can return negative
//! quasi-probabilities.

use crate::circuit::{Circuit, Instruction};
use crate::error::{Error, Result};
use crate::simulator::{bitstring_index, CountsHistogram, ProbabilityDistribution};

/// Largest calibration register this module supports.
pub const MAX_CALIBRATION_QUBITS: usize = 7;

/// Column-stochastic confusion matrix: `a[i][j] = P(measure i | prepare j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationMatrix {
    m_qubits: usize,
    shots: u64,
    a: Vec<f64>, // row-major, dim = 2^m
}

impl CalibrationMatrix {
    pub fn identity(m_qubits: usize) -> CalibrationMatrix {
        let dim = 1usize << m_qubits;
        let mut a = vec![0.0; dim * dim];
        for i in 0..dim {
            a[i * dim + i] = 1.0;
        }
        CalibrationMatrix { m_qubits, shots: 0, a }
    }

    /// Build from row-major entries, validating column-stochasticity.
    pub fn from_entries(m_qubits: usize, shots: u64, a: Vec<f64>) -> Result<CalibrationMatrix> {
        let dim = 1usize << m_qubits;
        if a.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries, got {}",
                dim * dim,
                a.len()
            )));
        }
        for j in 0..dim {
            let mut sum = 0.0;
            for i in 0..dim {
                let v = a[i * dim + j];
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "calibration entry ({i}, {j}) = {v} is negative or non-finite"
                    )));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "calibration column {j} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(CalibrationMatrix { m_qubits, shots, a })
    }

    pub fn m_qubits(&self) -> usize {
        self.m_qubits
    }

    pub fn dim(&self) -> usize {
        1usize << self.m_qubits
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.a[row * self.dim() + col]
    }

    /// 1-norm condition number `‖A‖₁·‖A⁻¹‖₁`; flags near-singular
    /// calibrations before anyone trusts an inversion.
    pub fn condition_number(&self) -> Result<f64> {
        let dim = self.dim();
        let lu = LuFactors::new(self.a.clone(), dim)?;
        let mut inv_norm = 0.0f64;
        let mut e = vec![0.0; dim];
        for j in 0..dim {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = lu.solve(&e);
            inv_norm = inv_norm.max(col.iter().map(|v| v.abs()).sum());
        }
        let a_norm = (0..dim)
            .map(|j| (0..dim).map(|i| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max);
        Ok(a_norm * inv_norm)
    }

    /// CSV: a header line `m,<M>,shots,<S>` then the 2^M rows.
    pub fn to_csv(&self) -> String {
        let dim = self.dim();
        let mut out = format!("m,{},shots,{}\n", self.m_qubits, self.shots);
        for i in 0..dim {
            let row: Vec<String> = (0..dim).map(|j| self.get(i, j).to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<CalibrationMatrix> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty calibration CSV".into()))?;
        let fields: Vec<&str> = header.split(',').collect();
        if fields.len() != 4 || fields[0] != "m" || fields[2] != "shots" {
            return Err(Error::Parse("calibration CSV header must be m,<M>,shots,<S>".into()));
        }
        let m: usize = fields[1].parse().map_err(|_| Error::Parse("bad M".into()))?;
        let shots: u64 = fields[3].parse().map_err(|_| Error::Parse("bad shots".into()))?;
        let dim = 1usize << m;
        let mut a = Vec::with_capacity(dim * dim);
        for line in lines.filter(|l| !l.trim().is_empty()) {
            for cell in line.split(',') {
                a.push(cell.trim().parse::<f64>().map_err(|_| {
                    Error::Parse(format!("bad calibration entry '{cell}'"))
                })?);
            }
        }
        CalibrationMatrix::from_entries(m, shots, a)
    }
}

/// Real-valued, sum-to-one vector; plain inversion may push entries
/// negative.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiDistribution {
    values: Vec<f64>,
}

impl QuasiDistribution {
    pub fn new(values: Vec<f64>) -> Result<QuasiDistribution> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite quasi-probability".into()));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "quasi-distribution sums to {sum}, expected 1"
            )));
        }
        Ok(QuasiDistribution { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn has_negative_entries(&self) -> bool {
        self.values.iter().any(|&v| v < 0.0)
    }
}

/// Calibration circuits over qubits 0..M: circuit j applies X wherever bit j
/// is set, then measures qubit i into clbit i.
pub fn build_calibration_circuits(m_qubits: usize) -> Result<Vec<Circuit>> {
    let qubits: Vec<usize> = (0..m_qubits).collect();
    calibration_circuits_on(&qubits, m_qubits)
}

/// Calibration circuits preparing basis states on the given physical qubits
/// (clbit i reads `qubits[i]`), for calibrating an experiment whose routing
/// placed its register there.
pub fn calibration_circuits_on(qubits: &[usize], n_qubits: usize) -> Result<Vec<Circuit>> {
    let m = qubits.len();
    if m == 0 || m > MAX_CALIBRATION_QUBITS {
        return Err(Error::SizeLimit(format!(
            "calibration supports 1..={MAX_CALIBRATION_QUBITS} qubits, got {m}"
        )));
    }
    let mut circuits = Vec::with_capacity(1 << m);
    for j in 0..1usize << m {
        let mut c = Circuit::new(n_qubits, m);
        for (bit, &q) in qubits.iter().enumerate() {
            if (j >> bit) & 1 == 1 {
                c.push(Instruction::X { qubit: q })?;
            }
        }
        c.push(Instruction::Barrier { qubits: qubits.to_vec() })?;
        for (bit, &q) in qubits.iter().enumerate() {
            c.push(Instruction::Measure { qubit: q, clbit: bit })?;
        }
        circuits.push(c);
    }
    Ok(circuits)
}

/// Assemble the confusion matrix from the 2^M calibration histograms, in
/// preparation order: column j is histogram j normalized.
pub fn assemble_matrix(histograms: &[CountsHistogram]) -> Result<CalibrationMatrix> {
    let count = histograms.len();
    if !count.is_power_of_two() || count < 2 {
        return Err(Error::DimensionMismatch(format!(
            "expected 2^M histograms, got {count}"
        )));
    }
    let m = count.trailing_zeros() as usize;
    let dim = count;
    let shots = histograms[0].shots;
    let mut a = vec![0.0f64; dim * dim];
    for (j, hist) in histograms.iter().enumerate() {
        if hist.shots != shots {
            return Err(Error::InvalidArgument(format!(
                "histogram {j} has {} shots, expected {shots}",
                hist.shots
            )));
        }
        for (key, &n) in &hist.counts {
            let i = bitstring_index(key)?;
            if i >= dim {
                return Err(Error::DimensionMismatch(format!(
                    "bitstring '{key}' does not fit {m} qubits"
                )));
            }
            a[i * dim + j] += n as f64 / shots as f64;
        }
    }
    CalibrationMatrix::from_entries(m, shots, a)
}

/// Plain inverse correction `A⁻¹·p`. The result sums to one but may carry
/// negative quasi-probabilities.
pub fn mitigate_inverse(
    a: &CalibrationMatrix,
    p_meas: &ProbabilityDistribution,
) -> Result<QuasiDistribution> {
    let dim = a.dim();
    if p_meas.len() != dim {
        return Err(Error::DimensionMismatch(format!(
            "distribution length {} does not match calibration dimension {dim}",
            p_meas.len()
        )));
    }
    let lu = LuFactors::new(a.a.clone(), dim)?;
    QuasiDistribution::new(lu.solve(p_meas.probs()))
}

const SIMPLEX_SOLVER_MAX_ITERATIONS: usize = 2000;

/// Constrained correction: `argmin ‖A·q - p‖₂` over `q ≥ 0, Σq = 1`,
/// solved by an active-set method on the equality-constrained least-squares
/// subproblems. Always returns a true probability distribution and agrees
/// with [`mitigate_inverse`] whenever that result already lies on the
/// simplex.
pub fn mitigate_constrained(
    a: &CalibrationMatrix,
    p_meas: &ProbabilityDistribution,
) -> Result<ProbabilityDistribution> {
    let dim = a.dim();
    if p_meas.len() != dim {
        return Err(Error::DimensionMismatch(format!(
            "distribution length {} does not match calibration dimension {dim}",
            p_meas.len()
        )));
    }
    let p = p_meas.probs();
    // Gram matrix and right-hand side of the normal equations.
    let mut gram = vec![0.0f64; dim * dim];
    let mut atp = vec![0.0f64; dim];
    for i in 0..dim {
        for j in 0..dim {
            let mut acc = 0.0;
            for k in 0..dim {
                acc += a.get(k, i) * a.get(k, j);
            }
            gram[i * dim + j] = acc;
        }
        atp[i] = (0..dim).map(|k| a.get(k, i) * p[k]).sum();
    }

    let mut support: Vec<usize> = (0..dim).collect();
    for _ in 0..SIMPLEX_SOLVER_MAX_ITERATIONS {
        let (x, nu) = solve_equality_ls(&gram, &atp, &support)?;
        // Drop the most negative coordinate, if any.
        if let Some((pos, _)) = x
            .iter()
            .enumerate()
            .filter(|(_, &v)| v < -1e-12)
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        {
            support.remove(pos);
            if support.is_empty() {
                return Err(Error::NonConvergence(SIMPLEX_SOLVER_MAX_ITERATIONS));
            }
            continue;
        }
        // Assemble the candidate and check the excluded gradients.
        let mut q = vec![0.0f64; dim];
        for (&idx, &v) in support.iter().zip(&x) {
            q[idx] = v.max(0.0);
        }
        let grad = |i: usize| -> f64 {
            let mut acc = -atp[i];
            for (j, &qj) in q.iter().enumerate() {
                if qj != 0.0 {
                    acc += gram[i * dim + j] * qj;
                }
            }
            acc
        };
        let violator = (0..dim)
            .filter(|i| !support.contains(i))
            .map(|i| (i, grad(i) + nu))
            .filter(|&(_, slack)| slack < -1e-10)
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        match violator {
            Some((idx, _)) => {
                support.push(idx);
                support.sort_unstable();
            }
            None => {
                let sum: f64 = q.iter().sum();
                // Exact simplex membership up to roundoff.
                for v in &mut q {
                    *v /= sum;
                }
                return ProbabilityDistribution::new(q);
            }
        }
    }
    Err(Error::NonConvergence(SIMPLEX_SOLVER_MAX_ITERATIONS))
}

/// Solve `min ‖A_S x - p‖` s.t. `Σx = 1` through its KKT system; returns the
/// coordinates on the support and the equality multiplier.
fn solve_equality_ls(
    gram: &[f64],
    atp: &[f64],
    support: &[usize],
) -> Result<(Vec<f64>, f64)> {
    let dim = (gram.len() as f64).sqrt() as usize;
    let s = support.len();
    let n = s + 1;
    let mut kkt = vec![0.0f64; n * n];
    let mut rhs = vec![0.0f64; n];
    for (r, &i) in support.iter().enumerate() {
        for (cidx, &j) in support.iter().enumerate() {
            kkt[r * n + cidx] = gram[i * dim + j];
        }
        kkt[r * n + s] = 1.0;
        kkt[s * n + r] = 1.0;
        rhs[r] = atp[i];
    }
    rhs[s] = 1.0;
    let lu = LuFactors::new(kkt, n)?;
    let sol = lu.solve(&rhs);
    Ok((sol[..s].to_vec(), sol[s]))
}

/// Classical (Bhattacharyya) fidelity `F = [Σ√(p_i·q_i)]²` with its
/// clipping flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityScore {
    pub value: f64,
    /// True when negative quasi-probability entries had to be clipped to
    /// zero (and the vector renormalized) before scoring.
    pub clipped: bool,
}

/// Fidelity between two (possibly quasi-) distributions. Negative entries
/// are clipped at zero with renormalization, and the flag reports it.
pub fn fidelity(p: &[f64], q: &[f64]) -> Result<FidelityScore> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch(format!(
            "fidelity inputs of length {} and {}",
            p.len(),
            q.len()
        )));
    }
    let clip = |v: &[f64]| -> (Vec<f64>, bool) {
        let clipped = v.iter().any(|&x| x < 0.0);
        let pos: Vec<f64> = v.iter().map(|&x| x.max(0.0)).collect();
        let sum: f64 = pos.iter().sum();
        if sum > 0.0 {
            (pos.iter().map(|&x| x / sum).collect(), clipped)
        } else {
            (pos, clipped)
        }
    };
    let (pc, p_clipped) = clip(p);
    let (qc, q_clipped) = clip(q);
    let root_sum: f64 = pc.iter().zip(&qc).map(|(&a, &b)| (a * b).sqrt()).sum();
    Ok(FidelityScore {
        value: (root_sum * root_sum).clamp(0.0, 1.0),
        clipped: p_clipped || q_clipped,
    })
}

// ---------------------------------------------------------------------------
// Dense LU with partial pivoting
// ---------------------------------------------------------------------------

struct LuFactors {
    n: usize,
    lu: Vec<f64>,
    pivots: Vec<usize>,
}

impl LuFactors {
    fn new(mut a: Vec<f64>, n: usize) -> Result<LuFactors> {
        let mut pivots = vec![0usize; n];
        for col in 0..n {
            let (pivot_row, pivot_val) = (col..n)
                .map(|r| (r, a[r * n + col].abs()))
                .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
                .unwrap();
            if pivot_val < 1e-13 {
                return Err(Error::SingularMatrix(pivot_val));
            }
            pivots[col] = pivot_row;
            if pivot_row != col {
                for j in 0..n {
                    a.swap(col * n + j, pivot_row * n + j);
                }
            }
            let diag = a[col * n + col];
            for r in col + 1..n {
                let factor = a[r * n + col] / diag;
                a[r * n + col] = factor;
                for j in col + 1..n {
                    a[r * n + j] -= factor * a[col * n + j];
                }
            }
        }
        Ok(LuFactors { n, lu: a, pivots })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        for col in 0..n {
            x.swap(col, self.pivots[col]);
        }
        for r in 1..n {
            for c in 0..r {
                x[r] -= self.lu[r * n + c] * x[c];
            }
        }
        for r in (0..n).rev() {
            for c in r + 1..n {
                x[r] -= self.lu[r * n + c] * x[c];
            }
            x[r] /= self.lu[r * n + r];
        }
        x
    }
}
