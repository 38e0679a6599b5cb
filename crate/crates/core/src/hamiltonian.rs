//! Spin clusters, the dipolar Hamiltonian, Zeeman terms and the RF drive.

use crate::linalg::{c64, hermitian_defect, zeros, CMat};
use crate::spin::{angular_momentum, embed_sites, HilbertLayout, SpinOperatorTriple};
use crate::units::{dipolar_coupling, larmor_rate};
use crate::{Error, Result};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Bond groups whose muon distances are rescaled together in a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BondGroup {
    F12,
    Li12,
    F34,
}

impl BondGroup {
    pub const ALL: [BondGroup; 3] = [BondGroup::F12, BondGroup::Li12, BondGroup::F34];

    pub fn name(self) -> &'static str {
        match self {
            BondGroup::F12 => "F12",
            BondGroup::Li12 => "Li12",
            BondGroup::F34 => "F34",
        }
    }
}

impl std::str::FromStr for BondGroup {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "F12" => Ok(BondGroup::F12),
            "Li12" => Ok(BondGroup::Li12),
            "F34" => Ok(BondGroup::F34),
            other => Err(Error::Config(format!("unknown bond group '{other}'"))),
        }
    }
}

/// Multiplicative factors on muon–site displacement vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BondScales {
    pub f12: f64,
    pub li12: f64,
    pub f34: f64,
}

impl Default for BondScales {
    fn default() -> Self {
        Self { f12: 1.0, li12: 1.0, f34: 1.0 }
    }
}

impl BondScales {
    pub const SANITY_BOUNDS: (f64, f64) = (0.5, 1.5);

    pub fn new(f12: f64, li12: f64, f34: f64) -> Result<Self> {
        let s = Self { f12, li12, f34 };
        s.validate()?;
        Ok(s)
    }

    pub fn get(&self, group: BondGroup) -> f64 {
        match group {
            BondGroup::F12 => self.f12,
            BondGroup::Li12 => self.li12,
            BondGroup::F34 => self.f34,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = Self::SANITY_BOUNDS;
        for g in BondGroup::ALL {
            let v = self.get(g);
            if !(v > lo && v < hi) {
                return Err(Error::ScaleOutOfRange { group: g.name(), value: v });
            }
        }
        Ok(())
    }
}

/// One magnetic moment of the cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinSite {
    pub label: String,
    pub j: f64,
    /// γ/(2π) in MHz·T⁻¹.
    pub gamma: f64,
    /// Lab-frame position in Å, before any bond scaling.
    pub position: Vector3<f64>,
    pub group: Option<BondGroup>,
}

impl SpinSite {
    pub fn new(label: impl Into<String>, j: f64, gamma: f64, position: [f64; 3]) -> Self {
        Self {
            label: label.into(),
            j,
            gamma,
            position: Vector3::from(position),
            group: None,
        }
    }

    pub fn with_group(mut self, group: BondGroup) -> Self {
        self.group = Some(group);
        self
    }
}

/// Ordered sites for one orientation, muon at index 0.
#[derive(Debug, Clone)]
pub struct Cluster {
    sites: Vec<SpinSite>,
    orientation_id: u8,
    bond_scales: BondScales,
    layout: HilbertLayout,
    spins: Vec<SpinOperatorTriple>,
}

impl Cluster {
    pub fn new(sites: Vec<SpinSite>, orientation_id: u8) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::InvalidArgument("cluster has no sites".into()));
        }
        let spins = sites
            .iter()
            .map(|s| angular_momentum(s.j))
            .collect::<Result<Vec<_>>>()?;
        let layout = HilbertLayout::new(spins.iter().map(|s| s.dim()).collect())?;
        let cluster = Self { sites, orientation_id, bond_scales: BondScales::default(), layout, spins };
        cluster.check_distinct()?;
        Ok(cluster)
    }

    fn check_distinct(&self) -> Result<()> {
        let p = self.positions();
        for a in 0..p.len() {
            for b in a + 1..p.len() {
                if (p[a] - p[b]).norm() < 1e-9 {
                    return Err(Error::CoincidentSites(a, b));
                }
            }
        }
        Ok(())
    }

    pub fn sites(&self) -> &[SpinSite] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn orientation_id(&self) -> u8 {
        self.orientation_id
    }

    pub fn bond_scales(&self) -> BondScales {
        self.bond_scales
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.total()
    }

    pub fn spin(&self, site: usize) -> &SpinOperatorTriple {
        &self.spins[site]
    }

    /// Lab-frame positions after bond scaling about the muon.
    pub fn positions(&self) -> Vec<Vector3<f64>> {
        let origin = self.sites[0].position;
        self.sites
            .iter()
            .map(|s| match s.group {
                Some(g) => origin + (s.position - origin) * self.bond_scales.get(g),
                None => s.position,
            })
            .collect()
    }

    /// |r_i − r_μ| for every site (0 for the muon itself).
    pub fn muon_distances(&self) -> Vec<f64> {
        let p = self.positions();
        p.iter().map(|r| (r - p[0]).norm()).collect()
    }

    /// Keeps the listed sites in the given order; index 0 must stay first.
    pub fn subset(&self, indices: &[usize]) -> Result<Cluster> {
        let mut sites = Vec::with_capacity(indices.len());
        for &i in indices {
            let site = self
                .sites
                .get(i)
                .ok_or(Error::SiteOutOfRange { index: i, len: self.sites.len() })?;
            sites.push(site.clone());
        }
        let mut c = Cluster::new(sites, self.orientation_id)?;
        c.bond_scales = self.bond_scales;
        Ok(c)
    }

    /// Rigid translation of every raw position.
    pub fn translated(&self, shift: Vector3<f64>) -> Cluster {
        let mut c = self.clone();
        for s in &mut c.sites {
            s.position += shift;
        }
        c
    }

    /// Applies a rotation matrix to every raw position.
    pub fn rotated(&self, rotation: &nalgebra::Matrix3<f64>) -> Cluster {
        let mut c = self.clone();
        for s in &mut c.sites {
            s.position = rotation * s.position;
        }
        c
    }
}

/// Returns a copy of `cluster` whose grouped muon bonds are scaled by the
/// given factors, measured from the unscaled geometry.
pub fn scale_bonds(cluster: &Cluster, scales: BondScales) -> Result<Cluster> {
    scales.validate()?;
    let mut c = cluster.clone();
    c.bond_scales = scales;
    c.check_distinct()?;
    Ok(c)
}

/// Which pairs enter the dipolar sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairSelection {
    #[default]
    All,
    /// Only pairs that include site 0.
    MuonOnly,
}

/// Two-site dipolar tensor D[Jᵢ·Jⱼ − 3(Jᵢ·n)(Jⱼ·n)] on the local product space.
fn pair_tensor(a: &SpinOperatorTriple, b: &SpinOperatorTriple, n: [f64; 3], coupling: f64) -> CMat {
    let (da, db) = (a.dim(), b.dim());
    let an = a.along(n);
    let bn = b.along(n);
    let comps_a = a.components();
    let comps_b = b.components();
    CMat::from_fn(da * db, da * db, |r, c| {
        let (ra, rb, ca, cb) = (r / db, r % db, c / db, c % db);
        let mut dot = c64::new(0.0, 0.0);
        for k in 0..3 {
            dot += comps_a[k][(ra, ca)] * comps_b[k][(rb, cb)];
        }
        (dot - an[(ra, ca)] * bn[(rb, cb)] * 3.0) * coupling
    })
}

/// Static dipolar Hamiltonian H₀/ħ in rad·μs⁻¹ over every pair of sites.
pub fn dipole_hamiltonian(cluster: &Cluster) -> Result<CMat> {
    dipole_hamiltonian_with(cluster, PairSelection::All)
}

pub fn dipole_hamiltonian_with(cluster: &Cluster, pairs: PairSelection) -> Result<CMat> {
    let n = cluster.dim();
    let mut h = zeros(n, n);
    let pos = cluster.positions();
    for a in 0..cluster.len() {
        for b in a + 1..cluster.len() {
            if pairs == PairSelection::MuonOnly && a != 0 {
                continue;
            }
            let r = pos[b] - pos[a];
            let dist = r.norm();
            if dist < 1e-9 {
                return Err(Error::CoincidentSites(a, b));
            }
            let unit = r / dist;
            let d = dipolar_coupling(cluster.sites[a].gamma, cluster.sites[b].gamma, dist);
            let local = pair_tensor(cluster.spin(a), cluster.spin(b), unit.into(), d);
            h += embed_sites(local.as_ref(), &[a, b], cluster.layout())?;
        }
    }
    Ok(h)
}

/// Zeeman term −Σᵢ γᵢ Jᵢ·B in rad·μs⁻¹ for a field `b_mt` in mT.
pub fn zeeman_hamiltonian(cluster: &Cluster, b_mt: [f64; 3]) -> Result<CMat> {
    let n = cluster.dim();
    let mut h = zeros(n, n);
    for (i, site) in cluster.sites.iter().enumerate() {
        let w = larmor_rate(site.gamma);
        let field = [-w * b_mt[0], -w * b_mt[1], -w * b_mt[2]];
        if field.iter().all(|&f| f == 0.0) {
            continue;
        }
        let local = cluster.spin(i).along(field);
        h += embed_sites(local.as_ref(), &[i], cluster.layout())?;
    }
    Ok(h)
}

/// Linearly polarized RF drive B(t) = [0, B_y cos(ω_c t + φ), 0].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    /// mT
    pub amplitude_by: f64,
    /// rad·μs⁻¹
    pub omega_c: f64,
    /// rad
    pub phase: f64,
    pub enabled: bool,
}

impl DriveSpec {
    pub fn off() -> Self {
        Self { amplitude_by: 0.0, omega_c: 0.0, phase: 0.0, enabled: false }
    }

    pub fn new(amplitude_by: f64, omega_c: f64) -> Self {
        Self { amplitude_by, omega_c, phase: 0.0, enabled: true }
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude_by >= 0.0) || !self.amplitude_by.is_finite() {
            return Err(Error::InvalidArgument(format!("drive amplitude {} mT", self.amplitude_by)));
        }
        if self.enabled && !(self.omega_c > 0.0 && self.omega_c.is_finite()) {
            return Err(Error::InvalidArgument(format!("drive frequency {} rad/us", self.omega_c)));
        }
        if !self.phase.is_finite() {
            return Err(Error::InvalidArgument("drive phase is not finite".into()));
        }
        Ok(())
    }

    /// True when the drive contributes nothing.
    pub fn is_null(&self) -> bool {
        !self.enabled || self.amplitude_by == 0.0
    }

    pub fn field_at(&self, t: f64) -> f64 {
        if self.is_null() {
            0.0
        } else {
            self.amplitude_by * (self.omega_c * t + self.phase).cos()
        }
    }

    /// ∫ₐᵇ B_y cos(ω s + φ) ds in mT·μs.
    pub fn field_integral(&self, a: f64, b: f64) -> f64 {
        if self.is_null() {
            return 0.0;
        }
        let w = self.omega_c;
        self.amplitude_by * ((w * b + self.phase).sin() - (w * a + self.phase).sin()) / w
    }
}

/// A Hermitian H(t), in rad·μs⁻¹.
pub trait TimeDependentHamiltonian: Send + Sync {
    fn dim(&self) -> usize;
    fn at(&self, t: f64) -> CMat;
    /// True when H(t) does not depend on t.
    fn is_static(&self) -> bool {
        false
    }
    /// Drive period in μs, if any.
    fn period(&self) -> Option<f64> {
        None
    }
    /// Static plus site-local time-dependent decomposition, when available.
    fn split(&self) -> Option<SplitForm<'_>> {
        None
    }
}

/// H(t) = H_s + f(t)·Σᵢ Vᵢ where each Vᵢ acts on a single site and
/// F(a, b) = ∫ₐᵇ f is known in closed form.
pub struct SplitForm<'a> {
    pub static_part: &'a CMat,
    pub layout: &'a HilbertLayout,
    pub local_terms: &'a [(usize, CMat)],
    pub envelope: &'a (dyn Fn(f64) -> f64 + Sync),
    pub envelope_integral: &'a (dyn Fn(f64, f64) -> f64 + Sync),
}

/// A constant Hamiltonian.
#[derive(Debug, Clone)]
pub struct StaticHamiltonian(pub CMat);

impl TimeDependentHamiltonian for StaticHamiltonian {
    fn dim(&self) -> usize {
        self.0.nrows()
    }
    fn at(&self, _t: f64) -> CMat {
        self.0.clone()
    }
    fn is_static(&self) -> bool {
        true
    }
}

/// Arbitrary H(t) from a closure.
pub struct FnHamiltonian<F: Fn(f64) -> CMat + Send + Sync> {
    pub dim: usize,
    pub f: F,
    pub period: Option<f64>,
}

impl<F: Fn(f64) -> CMat + Send + Sync> TimeDependentHamiltonian for FnHamiltonian<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn at(&self, t: f64) -> CMat {
        (self.f)(t)
    }
    fn period(&self) -> Option<f64> {
        self.period
    }
}

/// H(t) = H₀ + zeeman([0, B_y cos(ω_c t + φ), 0]).
pub struct DrivenHamiltonian {
    h0: CMat,
    /// Zeeman operator per unit B_y (mT⁻¹).
    drive_operator: CMat,
    /// Single-site pieces of `drive_operator` scaled by B_y.
    local_terms: Vec<(usize, CMat)>,
    layout: HilbertLayout,
    drive: DriveSpec,
    envelope: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    integral: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl DrivenHamiltonian {
    pub fn h0(&self) -> &CMat {
        &self.h0
    }

    pub fn drive(&self) -> DriveSpec {
        self.drive
    }

    pub fn drive_operator(&self) -> &CMat {
        &self.drive_operator
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }
}

impl TimeDependentHamiltonian for DrivenHamiltonian {
    fn dim(&self) -> usize {
        self.h0.nrows()
    }

    fn at(&self, t: f64) -> CMat {
        let b = self.drive.field_at(t);
        if b == 0.0 {
            return self.h0.clone();
        }
        let mut h = self.h0.clone();
        crate::linalg::add_scaled(&mut h, self.drive_operator.as_ref(), c64::new(b, 0.0));
        h
    }

    fn is_static(&self) -> bool {
        self.drive.is_null()
    }

    fn period(&self) -> Option<f64> {
        if self.drive.is_null() {
            None
        } else {
            Some(2.0 * std::f64::consts::PI / self.drive.omega_c)
        }
    }

    fn split(&self) -> Option<SplitForm<'_>> {
        Some(SplitForm {
            static_part: &self.h0,
            layout: &self.layout,
            local_terms: &self.local_terms,
            envelope: &*self.envelope,
            envelope_integral: &*self.integral,
        })
    }
}

/// Builds the driven Hamiltonian with the full dipolar H₀.
pub fn driven_hamiltonian(cluster: &Cluster, drive: DriveSpec) -> Result<DrivenHamiltonian> {
    driven_hamiltonian_from(cluster, dipole_hamiltonian(cluster)?, drive)
}

/// As [`driven_hamiltonian`] with a precomputed H₀.
pub fn driven_hamiltonian_from(cluster: &Cluster, h0: CMat, drive: DriveSpec) -> Result<DrivenHamiltonian> {
    drive.validate()?;
    if h0.nrows() != cluster.dim() || h0.ncols() != cluster.dim() {
        return Err(Error::DimensionMismatch { expected: cluster.dim(), found: h0.nrows() });
    }
    let defect = hermitian_defect(h0.as_ref());
    if defect > 1e-10 * (1.0 + crate::linalg::max_abs(h0.as_ref())) {
        return Err(Error::NonHermitian(defect));
    }
    let drive_operator = zeeman_hamiltonian(cluster, [0.0, 1.0, 0.0])?;
    let local_terms = cluster
        .sites()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let w = -larmor_rate(s.gamma);
            (i, cluster.spin(i).along([0.0, w, 0.0]))
        })
        .collect();
    let d = drive;
    Ok(DrivenHamiltonian {
        h0,
        drive_operator,
        local_terms,
        layout: cluster.layout().clone(),
        drive,
        envelope: Box::new(move |t| d.field_at(t)),
        integral: Box::new(move |a, b| d.field_integral(a, b)),
    })
}
