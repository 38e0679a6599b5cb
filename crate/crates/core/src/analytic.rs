//! The isolated F–μ–F complex: closed-form eigensystem, level diagrams,
//! drive transitions and muon entanglement measures.

use crate::hamiltonian::{dipole_hamiltonian_with, zeeman_hamiltonian, Cluster, PairSelection, SpinSite};
use crate::linalg::{c64, eigh, CMat, ZERO};
use crate::spin::HilbertLayout;
use crate::units::{dipolar_coupling, gyromagnetic, rad_per_us_to_khz};
use crate::{Error, Result};
use nalgebra::Vector3;

/// Two fluorines placed relative to a muon at the origin (Å).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FmufGeometry {
    pub f1: Vector3<f64>,
    pub f2: Vector3<f64>,
    /// Include the F1–F2 coupling as well as the two μ–F bonds.
    pub include_ff: bool,
}

impl FmufGeometry {
    /// Linear, equidistant complex with the bond along z.
    pub fn linear(r: f64) -> Self {
        Self { f1: Vector3::new(0.0, 0.0, r), f2: Vector3::new(0.0, 0.0, -r), include_ff: false }
    }

    pub fn explicit(f1: [f64; 3], f2: [f64; 3]) -> Self {
        Self { f1: f1.into(), f2: f2.into(), include_ff: false }
    }

    pub fn with_ff(mut self, include: bool) -> Self {
        self.include_ff = include;
        self
    }

    /// Mean μ–F distance r̄, which sets the ω_D unit.
    pub fn mean_bond(&self) -> f64 {
        0.5 * (self.f1.norm() + self.f2.norm())
    }

    /// ħω_D/ħ in rad·μs⁻¹ at the mean bond length.
    pub fn omega_d(&self) -> f64 {
        omega_d(self.mean_bond())
    }

    pub fn cluster(&self) -> Result<Cluster> {
        Cluster::new(
            vec![
                SpinSite::new("mu", 0.5, gyromagnetic::MUON, [0.0; 3]),
                SpinSite::new("F1", 0.5, gyromagnetic::FLUORINE_19, self.f1.into()),
                SpinSite::new("F2", 0.5, gyromagnetic::FLUORINE_19, self.f2.into()),
            ],
            1,
        )
    }

    fn pairs(&self) -> PairSelection {
        if self.include_ff {
            PairSelection::All
        } else {
            PairSelection::MuonOnly
        }
    }

    /// H₀ in rad·μs⁻¹.
    pub fn hamiltonian(&self) -> Result<CMat> {
        dipole_hamiltonian_with(&self.cluster()?, self.pairs())
    }
}

/// μ–F dipolar frequency at distance `r` (Å), rad·μs⁻¹.
pub fn omega_d(r: f64) -> f64 {
    dipolar_coupling(gyromagnetic::MUON, gyromagnetic::FLUORINE_19, r)
}

/// Closed-form energies of the linear equidistant complex in units of ω_D,
/// ascending, each doubly degenerate.
pub fn analytic_energies() -> [f64; 4] {
    let s3 = 3f64.sqrt();
    [-1.0, (1.0 - s3) / 2.0, 0.0, (1.0 + s3) / 2.0]
}

/// Index of a three-spin basis ket written as e.g. "udu" (muon first).
pub fn basis_index(label: &str) -> usize {
    label.chars().fold(0, |acc, ch| 2 * acc + usize::from(matches!(ch, 'd' | '↓')))
}

/// The eight closed-form eigenvectors |1⟩…|8⟩ in the product basis.
pub fn analytic_eigenvectors() -> [[f64; 8]; 8] {
    let s3 = 3f64.sqrt();
    let lo = ((3.0 + s3) / 12.0).sqrt();
    let hi = ((3.0 - s3) / 12.0).sqrt();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = [[0.0; 8]; 8];
    let mut set = |k: usize, terms: &[(&str, f64)]| {
        for (label, c) in terms {
            v[k][basis_index(label)] = *c;
        }
    };
    set(0, &[("uuu", 1.0)]);
    set(1, &[("ddd", 1.0)]);
    set(2, &[("duu", lo * (1.0 - s3)), ("uud", lo), ("udu", lo)]);
    set(3, &[("udd", lo * (1.0 - s3)), ("ddu", lo), ("dud", lo)]);
    set(4, &[("uud", h), ("udu", -h)]);
    set(5, &[("ddu", h), ("dud", -h)]);
    set(6, &[("duu", hi * (1.0 + s3)), ("uud", hi), ("udu", hi)]);
    set(7, &[("udd", hi * (1.0 + s3)), ("ddu", hi), ("dud", hi)]);
    v
}

/// One (possibly degenerate) energy level.
#[derive(Debug, Clone)]
pub struct EigenLevel {
    /// In units of ω_D.
    pub energy: f64,
    pub degeneracy: usize,
    /// Orthonormal basis of the level, product-basis amplitudes.
    pub vectors: Vec<Vec<c64>>,
}

impl EigenLevel {
    /// Squared norm of the projection of `state` onto this level.
    pub fn overlap(&self, state: &[c64]) -> f64 {
        self.vectors
            .iter()
            .map(|v| v.iter().zip(state).map(|(a, b)| a.conj() * b).sum::<c64>().norm_sqr())
            .sum()
    }
}

/// Groups eigenpairs of a Hermitian matrix into levels (energies divided by `unit`).
pub fn levels_of(h: &CMat, unit: f64, tol: f64) -> Result<Vec<EigenLevel>> {
    let e = eigh(h.as_ref())?;
    let n = h.nrows();
    Ok(e.degenerate_blocks(tol * unit)
        .into_iter()
        .map(|b| EigenLevel {
            energy: e.values[b.clone()].iter().sum::<f64>() / (b.len() as f64 * unit),
            degeneracy: b.len(),
            vectors: b.map(|k| (0..n).map(|i| e.vectors[(i, k)]).collect()).collect(),
        })
        .collect())
}

/// Numerical eigensystem of the F–μ–F dipolar Hamiltonian in ω_D units.
pub fn fmuf_eigensystem(geom: &FmufGeometry) -> Result<Vec<EigenLevel>> {
    levels_of(&geom.hamiltonian()?, geom.omega_d(), 1e-9)
}

/// Level energies along a field sweep.
#[derive(Debug, Clone)]
pub struct LevelSweep {
    pub fields: Vec<f64>,
    /// `sorted[f]`: ascending eigenvalues at field f (rad·μs⁻¹).
    pub sorted: Vec<Vec<f64>>,
    /// `tracked[f][k]`: energy of the level that continues branch k.
    pub tracked: Vec<Vec<f64>>,
}

/// Eigenvalues of H₀ + H_Z(B·axis) for each field value (mT), with branches
/// followed by eigenvector overlap so that crossings keep their labels.
pub fn levels_vs_field(
    cluster: &Cluster,
    pairs: PairSelection,
    axis: [f64; 3],
    fields: &[f64],
) -> Result<LevelSweep> {
    if fields.iter().any(|b| !b.is_finite()) {
        return Err(Error::InvalidArgument("field values must be finite".into()));
    }
    let h0 = dipole_hamiltonian_with(cluster, pairs)?;
    let zeeman = zeeman_hamiltonian(cluster, axis)?;
    let n = h0.nrows();
    let mut sorted = Vec::with_capacity(fields.len());
    let mut tracked = Vec::with_capacity(fields.len());
    let mut prev: Option<CMat> = None;
    for &b in fields {
        let mut h = h0.clone();
        crate::linalg::add_scaled(&mut h, zeeman.as_ref(), c64::new(b, 0.0));
        let e = eigh(h.as_ref())?;
        let (order, vectors) = match &prev {
            None => ((0..n).collect::<Vec<_>>(), e.vectors.clone()),
            Some(p) => {
                let ov = crate::linalg::mul(p.adjoint(), e.vectors.as_ref());
                let mut cand: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
                for i in 0..n {
                    for j in 0..n {
                        cand.push((ov[(i, j)].norm_sqr(), i, j));
                    }
                }
                cand.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
                let mut order = vec![usize::MAX; n];
                let mut used = vec![false; n];
                for (_, i, j) in cand {
                    if order[i] == usize::MAX && !used[j] {
                        order[i] = j;
                        used[j] = true;
                    }
                }
                let v = CMat::from_fn(n, n, |r, k| e.vectors[(r, order[k])]);
                (order, v)
            }
        };
        tracked.push(order.iter().map(|&j| e.values[j]).collect());
        sorted.push(e.values.clone());
        prev = Some(vectors);
    }
    Ok(LevelSweep { fields: fields.to_vec(), sorted, tracked })
}

/// One pair of levels connected by the drive.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub from_level: usize,
    pub to_level: usize,
    /// |ΔE| in ω_D units.
    pub frequency: f64,
    pub frequency_khz: f64,
    /// ‖P_to V P_from‖_F with V = Σᵢ (γᵢ/2π) J_i·axis, MHz·T⁻¹.
    pub drive_matrix_element: f64,
    pub allowed: bool,
    pub on_resonance: bool,
}

/// Relative cut below which a drive matrix element counts as zero.
pub const ALLOWED_THRESHOLD: f64 = 1e-6;

/// Σᵢ (γᵢ/2π)·Jᵢ·axis on the cluster's joint space.
pub fn drive_operator(cluster: &Cluster, axis: [f64; 3]) -> Result<CMat> {
    let n = cluster.dim();
    let mut v = crate::linalg::zeros(n, n);
    for (i, s) in cluster.sites().iter().enumerate() {
        let op = cluster.spin(i).along([axis[0] * s.gamma, axis[1] * s.gamma, axis[2] * s.gamma]);
        v += crate::spin::embed(op.as_ref(), i, cluster.layout())?;
    }
    Ok(v)
}

/// Basis-independent coupling between two levels: Frobenius norm of the
/// drive operator restricted to their subspaces.
pub fn drive_element(levels: &[EigenLevel], drive: &CMat, from: usize, to: usize) -> f64 {
    let mut acc = 0.0;
    for a in &levels[from].vectors {
        let va: Vec<c64> = (0..drive.nrows())
            .map(|r| (0..drive.ncols()).map(|c| drive[(r, c)] * a[c]).sum())
            .collect();
        for b in &levels[to].vectors {
            let m: c64 = b.iter().zip(&va).map(|(x, y)| x.conj() * y).sum();
            acc += m.norm_sqr();
        }
    }
    acc.sqrt()
}

/// Every pair of distinct levels with its drive coupling. `omega_unit` is
/// the rad·μs⁻¹ value of one energy unit, used for the kHz column.
pub fn transition_table(levels: &[EigenLevel], drive: &CMat, omega_unit: f64) -> Vec<Transition> {
    let mut out = Vec::new();
    for from in 0..levels.len() {
        for to in from + 1..levels.len() {
            let frequency = (levels[to].energy - levels[from].energy).abs();
            out.push(Transition {
                from_level: from,
                to_level: to,
                frequency,
                frequency_khz: rad_per_us_to_khz(frequency * omega_unit),
                drive_matrix_element: drive_element(levels, drive, from, to),
                allowed: false,
                on_resonance: false,
            });
        }
    }
    let max = out.iter().map(|t| t.drive_matrix_element).fold(0.0, f64::max);
    for t in &mut out {
        t.allowed = t.drive_matrix_element > ALLOWED_THRESHOLD * max && t.frequency > 0.0;
    }
    if let Some(top) = out
        .iter_mut()
        .filter(|t| t.allowed)
        .max_by(|a, b| a.frequency.total_cmp(&b.frequency))
    {
        top.on_resonance = true;
    }
    out
}

/// Distinct allowed frequencies, merged within `tol`.
pub fn allowed_frequencies(table: &[Transition], tol: f64) -> Vec<f64> {
    let mut f: Vec<f64> = table.iter().filter(|t| t.allowed).map(|t| t.frequency).collect();
    f.sort_by(f64::total_cmp);
    f.dedup_by(|a, b| (*a - *b).abs() <= tol);
    f
}

/// Purity of the muon's reduced state, Tr[(Tr_rest |ψ⟩⟨ψ|)²].
pub fn muon_reduced_purity(state: &[c64], layout: &HilbertLayout) -> Result<f64> {
    if layout.dims()[0] != 2 {
        return Err(Error::InvalidArgument("site 0 must be a spin-1/2 muon".into()));
    }
    if state.len() != layout.total() {
        return Err(Error::DimensionMismatch { expected: layout.total(), found: state.len() });
    }
    let norm: f64 = state.iter().map(|a| a.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("state norm² {norm} is not 1")));
    }
    let half = state.len() / 2;
    let (up, down) = state.split_at(half);
    let mut r = [[ZERO; 2]; 2];
    for k in 0..half {
        let a = [up[k], down[k]];
        for i in 0..2 {
            for j in 0..2 {
                r[i][j] += a[i] * a[j].conj();
            }
        }
    }
    Ok(r[0][0].norm_sqr() + r[1][1].norm_sqr() + 2.0 * r[0][1].norm_sqr())
}
