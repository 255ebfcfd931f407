//! Minimal deterministic numeric substrate: dense row-major matrices, a
//! numerically stable softmax, ReLU with backward mask, first-index argmax,
//! and a seeded portable PRNG.
//!
//! Everything is `f64`. One-dimensional data is plain `Vec<f64>`/`&[f64]`;
//! only matrices and probability distributions get dedicated types.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of finite `f64` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixWire", into = "MatrixWire")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Wire form of [`Matrix`]: shape-tagged so files stay self-describing.
#[derive(Serialize, Deserialize)]
struct MatrixWire {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl From<Matrix> for MatrixWire {
    fn from(m: Matrix) -> Self {
        MatrixWire {
            rows: m.rows,
            cols: m.cols,
            data: m.data,
        }
    }
}

impl TryFrom<MatrixWire> for Matrix {
    type Error = Error;

    fn try_from(w: MatrixWire) -> Result<Self> {
        Matrix::new(w.rows, w.cols, w.data)
    }
}

impl Matrix {
    /// Builds a matrix from row-major data, validating shape and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument {
                arg: "matrix shape",
                reason: format!("dimensions must be positive, got {rows}x{cols}"),
            });
        }
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                op: "Matrix::new",
                expected: format!("{rows}x{cols} = {} elements", rows * cols),
                got: format!("{} elements", data.len()),
            });
        }
        if !data.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("matrix data"));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Stacks row slices into a matrix; all rows must share one width.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyInput("matrix rows"))?;
        let cols = first.len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::ShapeMismatch {
                    op: "Matrix::from_rows",
                    expected: format!("row of width {cols}"),
                    got: format!("row of width {}", row.len()),
                });
            }
            data.extend_from_slice(row);
        }
        Matrix::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Matrix-vector product `out[i] = Σ_j m[i,j]·v[j]`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::ShapeMismatch {
                op: "matvec",
                expected: format!("vector of length {}", self.cols),
                got: format!("length {}", v.len()),
            });
        }
        let mut out = vec![0.0; self.rows];
        for (i, o) in out.iter_mut().enumerate() {
            let row = self.row(i);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(v) {
                acc += a * b;
            }
            *o = acc;
        }
        Ok(out)
    }

    /// Transposed product `out[j] = Σ_i m[i,j]·v[i]`.
    pub fn matvec_transpose(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.rows {
            return Err(Error::ShapeMismatch {
                op: "matvec_transpose",
                expected: format!("vector of length {}", self.rows),
                got: format!("length {}", v.len()),
            });
        }
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (j, o) in out.iter_mut().enumerate() {
                *o += self.get(i, j) * vi;
            }
        }
        Ok(out)
    }

    /// Per-column mean over all rows (temporal pooling for clips).
    pub fn column_means(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (o, x) in out.iter_mut().zip(self.row(i)) {
                *o += x;
            }
        }
        let inv = 1.0 / self.rows as f64;
        for o in &mut out {
            *o *= inv;
        }
        out
    }
}

/// Probability distribution over classes: nonnegative, sums to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbDist(Vec<f64>);

impl From<ProbDist> for Vec<f64> {
    fn from(p: ProbDist) -> Self {
        p.0
    }
}

impl TryFrom<Vec<f64>> for ProbDist {
    type Error = Error;

    fn try_from(p: Vec<f64>) -> Result<Self> {
        ProbDist::new(p)
    }
}

impl ProbDist {
    /// Validates nonnegativity and that the entries sum to 1 within 1e-9.
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::EmptyInput("probability distribution"));
        }
        if !p.iter().all(|x| x.is_finite() && *x >= 0.0) {
            return Err(Error::InvalidArgument {
                arg: "probabilities",
                reason: "entries must be finite and nonnegative".to_string(),
            });
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument {
                arg: "probabilities",
                reason: format!("entries sum to {sum}, expected 1"),
            });
        }
        Ok(ProbDist(p))
    }

    /// Constructor for internal paths that guarantee the invariant
    /// (softmax, averaging of two valid distributions).
    pub(crate) fn new_unchecked(p: Vec<f64>) -> Self {
        ProbDist(p)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Deref for ProbDist {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Numerically stable softmax: subtracts the max logit before
/// exponentiating, so entries up to |z| = 700 never overflow.
pub fn softmax(z: &[f64]) -> Result<ProbDist> {
    if z.is_empty() {
        return Err(Error::EmptyInput("softmax input"));
    }
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = z.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for o in &mut out {
        *o /= sum;
    }
    Ok(ProbDist::new_unchecked(out))
}

/// ReLU with a 0/1 mask recording which inputs were strictly positive;
/// the mask is reused by the backward pass.
pub fn relu(v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let out: Vec<f64> = v.iter().map(|&x| x.max(0.0)).collect();
    let mask: Vec<f64> = v.iter().map(|&x| if x > 0.0 { 1.0 } else { 0.0 }).collect();
    (out, mask)
}

/// Smallest index attaining the maximum value (deterministic tie-break).
pub fn argmax_first(v: &[f64]) -> Result<usize> {
    if v.is_empty() {
        return Err(Error::EmptyInput("argmax input"));
    }
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Seeded 64-bit PRNG with a fixed, documented algorithm (splitmix64:
/// a Weyl-sequence increment followed by two xor-shift/multiply mixing
/// steps). The stream depends only on the seed, so every run with the
/// same seed sees the same draws in the same order.
///
/// Derived draws are layered on the `u64` stream in a fixed way:
/// - `next_f64`: top 53 bits of one `u64`, uniform in [0, 1);
/// - `gen_range(n)`: one `u64` reduced modulo `n`;
/// - `gaussian`: Box–Muller over exactly two uniforms (cosine branch);
/// - `shuffle`: Fisher–Yates from the back, one `gen_range` per position.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform draw in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, n). Modulo reduction; the bias is below
    /// 2^-50 for the desk-scale `n` used here.
    pub fn gen_range(&mut self, n: usize) -> usize {
        assert!(n > 0, "gen_range requires n > 0");
        (self.next_u64() % n as u64) as usize
    }

    /// One standard-normal draw via Box–Muller. Always consumes exactly
    /// two uniforms (the sine branch is discarded) so the stream position
    /// is a fixed function of the number of draws.
    pub fn gaussian(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64(); // (0, 1], keeps ln finite
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// `n` independent standard-normal draws.
    pub fn gaussian_vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.gaussian()).collect()
    }

    /// In-place Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.gen_range(i + 1);
            items.swap(i, j);
        }
    }
}
