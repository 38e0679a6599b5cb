//! Density matrices, their time evolution and the muon observables.

mod propagate;
mod spectral;

pub use propagate::{
    evolve, evolve_collect, evolve_state, EvolveOptions, EvolveStats, Method, SplitOrder, State,
    StepControl,
};
pub use spectral::{static_polarization, SpectralData};

use crate::linalg::{c64, eigh, eigvalsh, hermitian_defect, trace, zeros, CMat, Eigh};
use crate::spin::{angular_momentum, apply_site_operator, partial_trace, HilbertLayout};
use crate::{Error, Result};
use faer::MatRef;

/// Tolerance used when validating density matrices.
pub const DENSITY_TOL: f64 = 1e-10;

/// Hermitian, unit-trace, positive semidefinite ρ.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    rho: CMat,
}

impl DensityMatrix {
    pub fn new(rho: CMat) -> Result<Self> {
        if rho.nrows() != rho.ncols() {
            return Err(Error::DimensionMismatch { expected: rho.nrows(), found: rho.ncols() });
        }
        let defect = hermitian_defect(rho.as_ref());
        if defect > DENSITY_TOL {
            return Err(Error::InvalidArgument(format!("density matrix not Hermitian ({defect:e})")));
        }
        let tr = trace(rho.as_ref());
        if (tr.re - 1.0).abs() > DENSITY_TOL || tr.im.abs() > DENSITY_TOL {
            return Err(Error::InvalidArgument(format!("density matrix trace {tr}")));
        }
        let min = eigvalsh(rho.as_ref())?.into_iter().fold(f64::INFINITY, f64::min);
        if min < -DENSITY_TOL {
            return Err(Error::InvalidArgument(format!("density matrix eigenvalue {min:e}")));
        }
        Ok(Self { rho })
    }

    /// Wraps a matrix produced by a unitary evolution without re-checking it.
    pub(crate) fn new_unchecked(rho: CMat) -> Self {
        Self { rho }
    }

    /// ρ = K·K†.
    pub fn from_kets(kets: MatRef<'_, c64>) -> Self {
        Self { rho: crate::linalg::mul(kets, kets.adjoint()) }
    }

    /// I/N
    pub fn maximally_mixed(n: usize) -> Self {
        Self { rho: crate::linalg::real_diag(&vec![1.0 / n as f64; n]) }
    }

    pub fn matrix(&self) -> &CMat {
        &self.rho
    }

    pub fn into_matrix(self) -> CMat {
        self.rho
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn trace(&self) -> f64 {
        trace(self.rho.as_ref()).re
    }

    /// Tr ρ²
    pub fn purity(&self) -> f64 {
        let mut acc = 0.0;
        for j in 0..self.dim() {
            for i in 0..self.dim() {
                acc += self.rho[(i, j)].norm_sqr();
            }
        }
        acc
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(eigvalsh(self.rho.as_ref())?.into_iter().fold(f64::INFINITY, f64::min))
    }

    pub fn hermitian_defect(&self) -> f64 {
        hermitian_defect(self.rho.as_ref())
    }

    /// Re Tr[ρ·O]
    pub fn expectation(&self, op: MatRef<'_, c64>) -> f64 {
        crate::linalg::trace_product(self.rho.as_ref(), op).re
    }
}

/// Muon spin-up state along `axis` on site 0, unit-normalized.
fn muon_up(axis: [f64; 3]) -> Result<[c64; 2]> {
    let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    if !((norm - 1.0).abs() < 1e-9) {
        return Err(Error::InvalidArgument(format!("muon axis {axis:?} is not a unit vector")));
    }
    let s = angular_momentum(0.5)?;
    let e = eigh(s.along(axis).as_ref())?;
    // eigenvalues ascending: column 1 is +1/2
    Ok([e.vectors[(0, 1)], e.vectors[(1, 1)]])
}

fn check_muon_layout(layout: &HilbertLayout) -> Result<()> {
    if layout.dims()[0] != 2 {
        return Err(Error::InvalidArgument("site 0 must be a spin-1/2 muon".into()));
    }
    Ok(())
}

/// ρ(0) = |↑ₙ⟩⟨↑ₙ| ⊗ Πᵢ I/dᵢ for the muon polarized along `muon_axis`.
pub fn initial_state(layout: &HilbertLayout, muon_axis: [f64; 3]) -> Result<DensityMatrix> {
    let k = initial_kets(layout, muon_axis)?;
    Ok(DensityMatrix::from_kets(k.as_ref()))
}

/// A factor K with ρ(0) = K·K†: one column per basis state of the
/// unpolarized spins, each weighted 1/√(N/2).
pub fn initial_kets(layout: &HilbertLayout, muon_axis: [f64; 3]) -> Result<CMat> {
    check_muon_layout(layout)?;
    let up = muon_up(muon_axis)?;
    let n = layout.total();
    let rest = n / 2;
    let w = 1.0 / (rest as f64).sqrt();
    let mut k = zeros(n, rest);
    for c in 0..rest {
        k[(c, c)] = up[0] * w;
        k[(rest + c, c)] = up[1] * w;
    }
    Ok(k)
}

/// Polarization time series P(t) in [−1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizationSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl PolarizationSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: times.len(), found: values.len() });
        }
        Ok(Self { times, values })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Checks that two time grids coincide.
pub fn same_grid(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch(format!("{} vs {} points", a.len(), b.len())));
    }
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        if (x - y).abs() > 1e-12 * (1.0 + x.abs()) {
            return Err(Error::GridMismatch(format!("point {i}: {x} vs {y}")));
        }
    }
    Ok(())
}

/// Pointwise mean of two orientations.
pub fn orientation_average(p1: &PolarizationSeries, p2: &PolarizationSeries) -> Result<PolarizationSeries> {
    same_grid(&p1.times, &p2.times)?;
    let values = p1.values.iter().zip(&p2.values).map(|(a, b)| 0.5 * (a + b)).collect();
    Ok(PolarizationSeries { times: p1.times.clone(), values })
}

/// 2·Tr[ρ·(J_μ·n)] for one propagated state.
pub fn polarization_of(state: &State, layout: &HilbertLayout, axis: [f64; 3]) -> Result<f64> {
    check_muon_layout(layout)?;
    let op = angular_momentum(0.5)?.along(axis);
    Ok(2.0 * site_expectation(state, op.as_ref(), 0, layout)?)
}

/// Re Tr[ρ·O_site] without building the joint-space operator.
pub fn site_expectation(state: &State, op: MatRef<'_, c64>, site: usize, layout: &HilbertLayout) -> Result<f64> {
    match state {
        State::Kets(k) => {
            let mut ok = k.clone();
            apply_site_operator(op, site, layout, &mut ok)?;
            let mut acc = 0.0;
            for c in 0..k.ncols() {
                for r in 0..k.nrows() {
                    acc += (k[(r, c)].conj() * ok[(r, c)]).re;
                }
            }
            Ok(acc)
        }
        State::Density(rho) => {
            let mut orho = rho.clone();
            apply_site_operator(op, site, layout, &mut orho)?;
            Ok(trace(orho.as_ref()).re)
        }
    }
}

/// P(t) along z for a sequence of density matrices.
pub fn muon_polarization(
    times: &[f64],
    rhos: &[DensityMatrix],
    layout: &HilbertLayout,
) -> Result<PolarizationSeries> {
    if times.len() != rhos.len() {
        return Err(Error::DimensionMismatch { expected: times.len(), found: rhos.len() });
    }
    let values = rhos
        .iter()
        .map(|r| polarization_of(&State::Density(r.matrix().clone()), layout, [0.0, 0.0, 1.0]))
        .collect::<Result<Vec<_>>>()?;
    PolarizationSeries::new(times.to_vec(), values)
}

/// Population of one degenerate subspace of H₀.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelPopulation {
    pub energy: f64,
    pub degeneracy: usize,
    pub population: f64,
}

/// Degeneracy tolerance for grouping H₀ eigenvalues, relative to the spread.
pub const DEGENERACY_RTOL: f64 = 1e-9;

/// ⟨k|ρ|k⟩ for each eigenvector of `eig`, in eigenvalue order.
pub fn state_populations(rho: &DensityMatrix, eig: &Eigh) -> Vec<f64> {
    let v = &eig.vectors;
    let rv = crate::linalg::mul(rho.matrix().as_ref(), v.as_ref());
    (0..v.ncols())
        .map(|k| (0..v.nrows()).map(|i| (v[(i, k)].conj() * rv[(i, k)]).re).sum())
        .collect()
}

/// Populations summed within each degenerate subspace of H₀, which makes
/// them independent of the basis chosen inside a subspace.
pub fn eigen_populations(rho: &DensityMatrix, h0: MatRef<'_, c64>) -> Result<Vec<LevelPopulation>> {
    let eig = eigh(h0)?;
    Ok(eigen_populations_with(rho, &eig))
}

pub fn eigen_populations_with(rho: &DensityMatrix, eig: &Eigh) -> Vec<LevelPopulation> {
    let pops = state_populations(rho, eig);
    let spread = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = DEGENERACY_RTOL * spread.max(1e-300);
    eig.degenerate_blocks(tol)
        .into_iter()
        .map(|b| LevelPopulation {
            energy: eig.values[b.clone()].iter().sum::<f64>() / b.len() as f64,
            degeneracy: b.len(),
            population: pops[b].iter().sum(),
        })
        .collect()
}

/// 2×2 reduced density matrix of the muon.
pub fn muon_reduced_state(rho: &DensityMatrix, layout: &HilbertLayout) -> Result<CMat> {
    check_muon_layout(layout)?;
    partial_trace(rho.matrix().as_ref(), &[0], layout)
}

/// Tr[ρ_μ²] from the muon polarization vector: (1 + |P|²)/2.
pub fn muon_purity_from_polarization(p: [f64; 3]) -> f64 {
    0.5 * (1.0 + p[0] * p[0] + p[1] * p[1] + p[2] * p[2])
}

/// Muon reduced-state purity of a propagated state.
pub fn muon_purity(state: &State, layout: &HilbertLayout) -> Result<f64> {
    let p = [
        polarization_of(state, layout, [1.0, 0.0, 0.0])?,
        polarization_of(state, layout, [0.0, 1.0, 0.0])?,
        polarization_of(state, layout, [0.0, 0.0, 1.0])?,
    ];
    Ok(muon_purity_from_polarization(p))
}

/// Convolves a series with a normalized Gaussian of the given FWHM (μs),
/// renormalizing the kernel where it runs off the grid.
pub fn gaussian_smear(series: &PolarizationSeries, fwhm: f64) -> Result<PolarizationSeries> {
    if !(fwhm >= 0.0) {
        return Err(Error::InvalidArgument(format!("smearing width {fwhm}")));
    }
    if fwhm == 0.0 {
        return Ok(series.clone());
    }
    let sigma = fwhm / (8.0 * std::f64::consts::LN_2).sqrt();
    let t = &series.times;
    let values = t
        .iter()
        .map(|&ti| {
            let (mut num, mut den) = (0.0, 0.0);
            for (j, &tj) in t.iter().enumerate() {
                let z = (tj - ti) / sigma;
                if z.abs() > 6.0 {
                    continue;
                }
                let w = (-0.5 * z * z).exp();
                num += w * series.values[j];
                den += w;
            }
            num / den
        })
        .collect();
    PolarizationSeries::new(t.clone(), values)
}

/// Average of P over a bin of the given width centred on each grid point.
///
/// P is replaced by the quadratic through the point and its two nearest
/// neighbours, whose bin average is P(c) + P''·w²/24. The grid should be
/// comparable to the bin width.
pub fn bin_average(series: &PolarizationSeries, width: f64) -> Result<PolarizationSeries> {
    if !(width >= 0.0 && width.is_finite()) {
        return Err(Error::InvalidArgument(format!("bin width {width}")));
    }
    let (t, p) = (&series.times, &series.values);
    let n = t.len();
    if width == 0.0 || n < 3 {
        return Ok(series.clone());
    }
    let values = (0..n)
        .map(|k| {
            let j = k.clamp(1, n - 2) - 1;
            let d1 = (p[j + 1] - p[j]) / (t[j + 1] - t[j]);
            let d2 = (p[j + 2] - p[j + 1]) / (t[j + 2] - t[j + 1]);
            let curvature = 2.0 * (d2 - d1) / (t[j + 2] - t[j]);
            p[k] + curvature * width * width / 24.0
        })
        .collect();
    PolarizationSeries::new(t.clone(), values)
}
