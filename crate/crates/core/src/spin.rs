//! Angular-momentum matrices and the multi-spin product space.
//!
//! Operators are dimensionless (J/ħ). Each site uses the J_z eigenbasis
//! ordered m = +j … −j, and the joint space is the Kronecker product with
//! site 0 as the most significant factor, so kets read left to right in
//! site order (muon first).

use crate::linalg::{c64, zeros, CMat, ZERO};
use crate::{Error, Result};
use faer::MatRef;

/// Largest spin handled by [`angular_momentum`].
pub const MAX_SPIN: f64 = 4.5;

/// Matrix representation of (Jx, Jy, Jz) for one spin.
#[derive(Debug, Clone)]
pub struct SpinOperatorTriple {
    pub j: f64,
    pub jx: CMat,
    pub jy: CMat,
    pub jz: CMat,
}

impl SpinOperatorTriple {
    pub fn dim(&self) -> usize {
        self.jz.nrows()
    }

    pub fn components(&self) -> [&CMat; 3] {
        [&self.jx, &self.jy, &self.jz]
    }

    /// J·n for a (not necessarily unit) direction n.
    pub fn along(&self, n: [f64; 3]) -> CMat {
        let d = self.dim();
        CMat::from_fn(d, d, |r, c| {
            self.jx[(r, c)] * n[0] + self.jy[(r, c)] * n[1] + self.jz[(r, c)] * n[2]
        })
    }
}

/// Checks that 2j is a non-negative integer and returns the dimension 2j+1.
pub fn spin_dimension(j: f64) -> Result<usize> {
    let two_j = 2.0 * j;
    if !two_j.is_finite() || two_j < 0.0 || (two_j - two_j.round()).abs() > 1e-9 || j > MAX_SPIN {
        return Err(Error::InvalidSpin(j));
    }
    Ok(two_j.round() as usize + 1)
}

/// Ladder-operator construction of the spin-j matrices.
pub fn angular_momentum(j: f64) -> Result<SpinOperatorTriple> {
    let d = spin_dimension(j)?;
    let m: Vec<f64> = (0..d).map(|k| j - k as f64).collect();
    let mut jz = zeros(d, d);
    let mut jx = zeros(d, d);
    let mut jy = zeros(d, d);
    for k in 0..d {
        jz[(k, k)] = c64::new(m[k], 0.0);
    }
    // <m+1|J+|m> sits at (k-1, k) since row k-1 carries m+1.
    for k in 1..d {
        let mk = m[k];
        let amp = (j * (j + 1.0) - mk * (mk + 1.0)).sqrt();
        jx[(k - 1, k)] = c64::new(0.5 * amp, 0.0);
        jx[(k, k - 1)] = c64::new(0.5 * amp, 0.0);
        jy[(k - 1, k)] = c64::new(0.0, -0.5 * amp);
        jy[(k, k - 1)] = c64::new(0.0, 0.5 * amp);
    }
    Ok(SpinOperatorTriple { j, jx, jy, jz })
}

/// Subsystem dimensions of the joint space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertLayout {
    dims: Vec<usize>,
    strides: Vec<usize>,
}

impl HilbertLayout {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidArgument(format!("invalid subsystem dimensions {dims:?}")));
        }
        let mut strides = vec![1; dims.len()];
        for k in (0..dims.len() - 1).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        Ok(Self { dims, strides })
    }

    pub fn from_spins(spins: &[f64]) -> Result<Self> {
        let dims = spins.iter().map(|&j| spin_dimension(j)).collect::<Result<Vec<_>>>()?;
        Self::new(dims)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_sites(&self) -> usize {
        self.dims.len()
    }

    /// N_s = Π d_i
    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn stride(&self, site: usize) -> usize {
        self.strides[site]
    }

    /// Local index of `site` inside the joint basis index.
    pub fn digit(&self, index: usize, site: usize) -> usize {
        (index / self.strides[site]) % self.dims[site]
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.dims.len() {
            return Err(Error::SiteOutOfRange { index: site, len: self.dims.len() });
        }
        Ok(())
    }
}

/// I ⊗ … ⊗ op ⊗ … ⊗ I with `op` acting on `site`.
pub fn embed(op: MatRef<'_, c64>, site: usize, layout: &HilbertLayout) -> Result<CMat> {
    embed_sites(op, &[site], layout)
}

/// Embeds an operator acting on the ordered product of `sites`
/// (first listed site most significant) into the joint space.
pub fn embed_sites(op: MatRef<'_, c64>, sites: &[usize], layout: &HilbertLayout) -> Result<CMat> {
    for (k, &s) in sites.iter().enumerate() {
        layout.check_site(s)?;
        if sites[..k].contains(&s) {
            return Err(Error::InvalidArgument(format!("site {s} listed twice")));
        }
    }
    let local_dims: Vec<usize> = sites.iter().map(|&s| layout.dims[s]).collect();
    let local_total: usize = local_dims.iter().product();
    if op.nrows() != local_total || op.ncols() != local_total {
        return Err(Error::DimensionMismatch { expected: local_total, found: op.nrows() });
    }
    let n = layout.total();
    let mut out = zeros(n, n);
    let mut local_strides = vec![1; sites.len()];
    for k in (0..sites.len().saturating_sub(1)).rev() {
        local_strides[k] = local_strides[k + 1] * local_dims[k + 1];
    }
    for col in 0..n {
        let mut local_col = 0;
        let mut base = col;
        for (k, &s) in sites.iter().enumerate() {
            let digit = layout.digit(col, s);
            local_col += digit * local_strides[k];
            base -= digit * layout.strides[s];
        }
        for local_row in 0..local_total {
            let v = op[(local_row, local_col)];
            if v == ZERO {
                continue;
            }
            let mut row = base;
            for (k, &s) in sites.iter().enumerate() {
                row += (local_row / local_strides[k]) % local_dims[k] * layout.strides[s];
            }
            out[(row, col)] += v;
        }
    }
    Ok(out)
}

/// Left-multiplies every column of `kets` by `op` acting on `site`,
/// without forming the joint-space operator.
pub fn apply_site_operator(
    op: MatRef<'_, c64>,
    site: usize,
    layout: &HilbertLayout,
    kets: &mut CMat,
) -> Result<()> {
    layout.check_site(site)?;
    let d = layout.dims[site];
    if op.nrows() != d || op.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, found: op.nrows() });
    }
    if kets.nrows() != layout.total() {
        return Err(Error::DimensionMismatch { expected: layout.total(), found: kets.nrows() });
    }
    let stride = layout.strides[site];
    let m: Vec<c64> = (0..d * d).map(|k| op[(k / d, k % d)]).collect();
    let mut buf = vec![ZERO; d];
    for c in 0..kets.ncols() {
        let col = kets.col_as_slice_mut(c);
        for block in col.chunks_exact_mut(stride * d) {
            if d == 2 {
                let (lo, hi) = block.split_at_mut(stride);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let (a, b) = (*x, *y);
                    *x = m[0] * a + m[1] * b;
                    *y = m[2] * a + m[3] * b;
                }
                continue;
            }
            for inner in 0..stride {
                for (a, slot) in buf.iter_mut().enumerate() {
                    *slot = block[inner + a * stride];
                }
                for r in 0..d {
                    let row = &m[r * d..(r + 1) * d];
                    block[inner + r * stride] = row.iter().zip(&buf).map(|(o, v)| o * v).sum();
                }
            }
        }
    }
    Ok(())
}

/// Partial trace of a joint-space density matrix, keeping `keep` (in
/// ascending site order).
pub fn partial_trace(rho: MatRef<'_, c64>, keep: &[usize], layout: &HilbertLayout) -> Result<CMat> {
    let n = layout.total();
    if rho.nrows() != n || rho.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: rho.nrows() });
    }
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    for &s in &keep {
        layout.check_site(s)?;
    }
    let kept_dims: Vec<usize> = keep.iter().map(|&s| layout.dims[s]).collect();
    let m: usize = kept_dims.iter().product();
    let local = |index: usize| -> usize {
        keep.iter().zip(&kept_dims).fold(0, |acc, (&s, &d)| acc * d + layout.digit(index, s))
    };
    let traced = |index: usize| -> usize {
        (0..layout.num_sites())
            .filter(|s| !keep.contains(s))
            .fold(0, |acc, s| acc * layout.dims[s] + layout.digit(index, s))
    };
    let mut out = zeros(m, m);
    for c in 0..n {
        let (lc, tc) = (local(c), traced(c));
        for r in 0..n {
            if traced(r) == tc {
                out[(local(r), lc)] += rho[(r, c)];
            }
        }
    }
    Ok(out)
}
