//! Closed-form polarization for a time-independent Hamiltonian.
//!
//! With ρ(0) = I/N + 2(J_μ·n)/N and H static,
//! P(t) = (4/N) Σ_kl |⟨k|J_μ·n|l⟩|² cos((E_k − E_l) t),
//! evaluated as one matrix product against a table of phases.

use crate::linalg::{c64, eigh, mul, CMat, Eigh};
use crate::spin::{angular_momentum, embed, HilbertLayout};
use crate::{Error, Result};
use faer::linalg::matmul::matmul;
use faer::{Accum, MatRef, Par};

/// Eigensystem of H together with the muon spin operator in that basis.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub eig: Eigh,
    /// |⟨k|J_μ·n|l⟩|² as a complex matrix (imaginary part zero).
    weights: CMat,
}

impl SpectralData {
    pub fn new(h: MatRef<'_, c64>, layout: &HilbertLayout, axis: [f64; 3]) -> Result<Self> {
        if layout.dims()[0] != 2 {
            return Err(Error::InvalidArgument("site 0 must be a spin-1/2 muon".into()));
        }
        if h.nrows() != layout.total() {
            return Err(Error::DimensionMismatch { expected: layout.total(), found: h.nrows() });
        }
        let eig = eigh(h)?;
        let s = embed(angular_momentum(0.5)?.along(axis).as_ref(), 0, layout)?;
        let sv = mul(s.as_ref(), eig.vectors.as_ref());
        let st = mul(eig.vectors.adjoint(), sv.as_ref());
        let weights = CMat::from_fn(st.nrows(), st.ncols(), |i, j| c64::new(st[(i, j)].norm_sqr(), 0.0));
        Ok(Self { eig, weights })
    }

    /// Transition frequencies and weights (ω ≥ 0), merged within `tol`.
    pub fn lines(&self, tol: f64) -> Vec<(f64, f64)> {
        let n = self.eig.values.len();
        let norm = 4.0 / n as f64;
        let mut raw: Vec<(f64, f64)> = Vec::new();
        for k in 0..n {
            for l in 0..n {
                let w = self.weights[(k, l)].re * norm;
                if w > 0.0 {
                    raw.push(((self.eig.values[k] - self.eig.values[l]).abs(), w));
                }
            }
        }
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (f, w) in raw {
            match out.last_mut() {
                Some(last) if (f - last.0).abs() <= tol => last.1 += w,
                _ => out.push((f, w)),
            }
        }
        out
    }

    pub fn polarization(&self, times: &[f64]) -> Vec<f64> {
        let n = self.eig.values.len();
        let mut out = Vec::with_capacity(times.len());
        const CHUNK: usize = 256;
        for chunk in times.chunks(CHUNK) {
            let phase = CMat::from_fn(n, chunk.len(), |l, t| c64::cis(-self.eig.values[l] * chunk[t]));
            let mut y = CMat::zeros(n, chunk.len());
            matmul(y.as_mut(), Accum::Replace, self.weights.as_ref(), phase.as_ref(), c64::new(1.0, 0.0), Par::Seq);
            for t in 0..chunk.len() {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += (phase[(k, t)].conj() * y[(k, t)]).re;
                }
                out.push(4.0 * acc / n as f64);
            }
        }
        out
    }
}

/// P(t) along the initial muon axis for static `h`.
pub fn static_polarization(h: MatRef<'_, c64>, layout: &HilbertLayout, axis: [f64; 3], times: &[f64]) -> Result<Vec<f64>> {
    Ok(SpectralData::new(h, layout, axis)?.polarization(times))
}
