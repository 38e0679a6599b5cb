//! Dense complex matrix helpers on top of `faer`.

use faer::linalg::matmul::matmul;
use faer::traits::Conjugate;
use faer::{Accum, Mat, MatRef, Par, Side};

pub use faer::c64;

/// Dense complex matrix.
pub type CMat = Mat<c64>;

pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub const ONE: c64 = c64 { re: 1.0, im: 0.0 };
pub const I: c64 = c64 { re: 0.0, im: 1.0 };

pub fn zeros(rows: usize, cols: usize) -> CMat {
    Mat::zeros(rows, cols)
}

pub fn identity(n: usize) -> CMat {
    Mat::identity(n, n)
}

pub fn real_diag(values: &[f64]) -> CMat {
    let n = values.len();
    Mat::from_fn(n, n, |i, j| if i == j { c64::new(values[i], 0.0) } else { ZERO })
}

pub fn dagger(m: MatRef<'_, c64>) -> CMat {
    m.adjoint().to_owned()
}

pub fn scaled(m: MatRef<'_, c64>, s: c64) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s)
}

/// `dst += s * m`
pub fn add_scaled(dst: &mut CMat, m: MatRef<'_, c64>, s: c64) {
    for j in 0..dst.ncols() {
        for i in 0..dst.nrows() {
            dst[(i, j)] += m[(i, j)] * s;
        }
    }
}

/// `a * b` without spawning threads. Either side may be a conjugated view.
pub fn mul<L, R>(a: MatRef<'_, L>, b: MatRef<'_, R>) -> CMat
where
    L: Conjugate<Canonical = c64>,
    R: Conjugate<Canonical = c64>,
{
    let mut out = Mat::zeros(a.nrows(), b.ncols());
    matmul(out.as_mut(), Accum::Replace, a, b, ONE, Par::Seq);
    out
}

pub fn commutator(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> CMat {
    let mut out = mul(a, b);
    matmul(out.as_mut(), Accum::Add, b, a, -ONE, Par::Seq);
    out
}

pub fn trace(m: MatRef<'_, c64>) -> c64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// Tr[A·B] in O(n²).
pub fn trace_product(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> c64 {
    let mut acc = ZERO;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn kron(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> CMat {
    let (br, bc) = (b.nrows(), b.ncols());
    Mat::from_fn(a.nrows() * br, a.ncols() * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

pub fn max_abs(m: MatRef<'_, c64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].norm());
        }
    }
    best
}

/// max |M − M†| entrywise.
pub fn hermitian_defect(m: MatRef<'_, c64>) -> f64 {
    let n = m.nrows();
    let mut best = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            best = best.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    best
}

/// Replace `m` by (M + M†)/2.
pub fn symmetrize(m: &mut CMat) {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..j {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
        m[(j, j)] = c64::new(m[(j, j)].re, 0.0);
    }
}

/// Eigendecomposition of a Hermitian matrix; eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

pub fn eigh(m: MatRef<'_, c64>) -> crate::Result<Eigh> {
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| crate::Error::Eigen(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let values = (0..m.nrows()).map(|i| s[i].re).collect();
    Ok(Eigh { values, vectors: evd.U().to_owned() })
}

pub fn eigvalsh(m: MatRef<'_, c64>) -> crate::Result<Vec<f64>> {
    let vals = m
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| crate::Error::Eigen(format!("{e:?}")))?;
    Ok(vals)
}

impl Eigh {
    /// V·diag(f(λ))·V†
    pub fn apply_fn(&self, f: impl Fn(f64) -> c64) -> CMat {
        let v = &self.vectors;
        let n = v.nrows();
        let phases: Vec<c64> = self.values.iter().map(|&l| f(l)).collect();
        let scaled = Mat::from_fn(n, n, |i, j| v[(i, j)] * phases[j]);
        let mut out = Mat::zeros(n, n);
        matmul(out.as_mut(), Accum::Replace, scaled.as_ref(), v.adjoint(), ONE, Par::Seq);
        out
    }

    /// exp(−i·H·t) for the decomposed H.
    pub fn propagator(&self, t: f64) -> CMat {
        self.apply_fn(|l| c64::cis(-l * t))
    }

    /// Index ranges of eigenvalues equal within `tol` (absolute).
    pub fn degenerate_blocks(&self, tol: f64) -> Vec<std::ops::Range<usize>> {
        degenerate_blocks(&self.values, tol)
    }
}

/// Groups sorted values into runs whose consecutive gaps are below `tol`.
pub fn degenerate_blocks(values: &[f64], tol: f64) -> Vec<std::ops::Range<usize>> {
    let mut blocks = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || (values[i] - values[i - 1]).abs() > tol {
            blocks.push(start..i);
            start = i;
        }
    }
    blocks
}

/// exp(−i·H·t) for Hermitian H.
pub fn expm_hermitian(h: MatRef<'_, c64>, t: f64) -> crate::Result<CMat> {
    Ok(eigh(h)?.propagator(t))
}
