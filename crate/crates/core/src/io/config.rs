//! Cluster configuration files (TOML).
//!
//! Positions are given in the crystal frame (a, b, c) exactly as tabulated;
//! `frame` names which crystal axis becomes lab x, y and z.

use crate::hamiltonian::{scale_bonds, BondGroup, BondScales, Cluster, SpinSite};
use crate::units::gyromagnetic;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Largest allowed gap between a computed and a tabulated muon distance, Å.
pub const DISTANCE_COLUMN_TOL: f64 = 1e-3;

/// Positions carry four decimals, so each coordinate of a displacement is
/// uncertain by up to 1e-4 Å and a distance by √3·1e-4 Å; two orientations
/// can therefore disagree by twice that.
pub const ORIENTATION_EQUIVALENCE_TOL: f64 = 2.0 * 1.732_050_807_568_877_2e-4;

/// Required number of sites per orientation.
pub const SITES_PER_ORIENTATION: usize = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteConfig {
    pub label: String,
    pub species: String,
    pub j: f64,
    /// γ/(2π), MHz·T⁻¹
    pub gamma: f64,
    /// Crystal-frame (a, b, c) position, Å.
    pub position: [f64; 3],
    /// Tabulated |r_iμ| for validation, Å.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<BondGroup>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientationConfig {
    pub id: u8,
    #[serde(rename = "site")]
    pub sites: Vec<SiteConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    /// Crystal axes that become lab (x, y, z).
    #[serde(default = "default_frame")]
    pub frame: [String; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bond_scales: Option<BondScales>,
    #[serde(rename = "orientation")]
    pub orientations: Vec<OrientationConfig>,
}

fn default_frame() -> [String; 3] {
    ["b".into(), "c".into(), "a".into()]
}

fn site(label: &str, species: &str, pos: [f64; 3], distance: f64, group: Option<BondGroup>) -> SiteConfig {
    let (j, gamma) = match species {
        "mu" => (0.5, gyromagnetic::MUON),
        "F" => (0.5, gyromagnetic::FLUORINE_19),
        "Li" => (1.5, gyromagnetic::LITHIUM_7),
        _ => unreachable!("built-in species"),
    };
    SiteConfig { label: label.into(), species: species.into(), j, gamma, position: pos, distance: Some(distance), group }
}

impl ClusterConfig {
    /// The μF₂Li₂F₂ cluster in LiY₀.₀₀₄Ho₀.₉₉₆F₄, two orientations.
    pub fn liyf4() -> Self {
        use BondGroup::*;
        let o1 = vec![
            site("mu", "mu", [2.6417, 1.3201, 1.2929], 0.0, None),
            site("F1", "F", [3.6870, 1.5906, 0.9277], 1.1398, Some(F12)),
            site("F2", "F", [1.5773, 1.0138, 1.7129], 1.1846, Some(F12)),
            site("Li1", "Li", [2.9183, -0.1888, 3.0538], 2.3353, Some(Li12)),
            site("Li2", "Li", [2.1918, 2.9164, -0.4962], 2.4396, Some(Li12)),
            site("F3", "F", [1.6618, 1.1420, -0.9762], 2.4781, Some(F34)),
            site("F4", "F", [3.5750, 1.5075, 3.6399], 2.5326, Some(F34)),
        ];
        let o2 = vec![
            site("mu", "mu", [-3.9468, 5.2685, 4.0078], 0.0, None),
            site("F1", "F", [-4.2174, 6.3137, 3.6426], 1.1398, Some(F12)),
            site("F2", "F", [-3.6405, 4.2040, 4.4277], 1.1846, Some(F12)),
            site("Li1", "Li", [-2.4379, 5.5450, 5.7686], 2.3353, Some(Li12)),
            site("Li2", "Li", [-5.5431, 4.8186, 2.2187], 2.4396, Some(Li12)),
            site("F3", "F", [-3.7687, 4.2885, 1.7387], 2.4781, Some(F34)),
            site("F4", "F", [-4.1343, 6.2017, 6.3547], 2.5326, Some(F34)),
        ];
        Self {
            frame: default_frame(),
            bond_scales: None,
            orientations: vec![OrientationConfig { id: 1, sites: o1 }, OrientationConfig { id: 2, sites: o2 }],
        }
    }

    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse { path: origin.into(), message: e.to_string() })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    /// Index into (a, b, c) for each lab axis.
    pub fn frame_permutation(&self) -> Result<[usize; 3]> {
        let mut perm = [0; 3];
        for (k, name) in self.frame.iter().enumerate() {
            perm[k] = match name.as_str() {
                "a" => 0,
                "b" => 1,
                "c" => 2,
                other => return Err(Error::Config(format!("unknown crystal axis '{other}'"))),
            };
        }
        let mut sorted = perm;
        sorted.sort_unstable();
        if sorted != [0, 1, 2] {
            return Err(Error::Config(format!("frame {:?} is not a permutation of a, b, c", self.frame)));
        }
        Ok(perm)
    }

    fn orientation_cluster(&self, o: &OrientationConfig, perm: [usize; 3]) -> Result<Cluster> {
        if o.sites.len() != SITES_PER_ORIENTATION {
            return Err(Error::Config(format!(
                "orientation {} has {} sites, expected {SITES_PER_ORIENTATION}",
                o.id,
                o.sites.len()
            )));
        }
        let first = &o.sites[0];
        if !first.species.starts_with("mu") || first.j != 0.5 {
            return Err(Error::Config(format!("orientation {}: the first site must be the spin-1/2 muon", o.id)));
        }
        if let Some(s) = o.sites[1..].iter().find(|s| s.species.starts_with("mu")) {
            return Err(Error::Config(format!("orientation {}: extra muon site '{}'", o.id, s.label)));
        }
        let sites = o
            .sites
            .iter()
            .map(|s| {
                if !(s.gamma > 0.0) {
                    return Err(Error::Config(format!("site {}: gamma must be positive", s.label)));
                }
                let p = s.position;
                let mut site = SpinSite::new(s.label.clone(), s.j, s.gamma, [p[perm[0]], p[perm[1]], p[perm[2]]]);
                site.group = s.group;
                Ok(site)
            })
            .collect::<Result<Vec<_>>>()?;
        let cluster = Cluster::new(sites, o.id)?;
        for (s, d) in o.sites.iter().zip(cluster.muon_distances()) {
            if let Some(tab) = s.distance {
                if (tab - d).abs() > DISTANCE_COLUMN_TOL {
                    return Err(Error::Config(format!(
                        "orientation {} site {}: position gives |r| = {d:.5} Å but the table says {tab}",
                        o.id, s.label
                    )));
                }
            }
        }
        match self.bond_scales {
            Some(s) => scale_bonds(&cluster, s),
            None => Ok(cluster),
        }
    }

    /// Lab-frame clusters, one per orientation.
    pub fn clusters(&self) -> Result<Vec<Cluster>> {
        if self.orientations.is_empty() {
            return Err(Error::Config("no orientations".into()));
        }
        let perm = self.frame_permutation()?;
        let clusters = self
            .orientations
            .iter()
            .map(|o| self.orientation_cluster(o, perm))
            .collect::<Result<Vec<_>>>()?;
        let reference = sorted_distances(&clusters[0]);
        for c in &clusters[1..] {
            let other = sorted_distances(c);
            let worst = reference.iter().zip(&other).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if worst > ORIENTATION_EQUIVALENCE_TOL {
                return Err(Error::Config(format!(
                    "orientation {} is not equivalent to orientation {}: distances differ by {worst:.2e} Å",
                    c.orientation_id(),
                    clusters[0].orientation_id()
                )));
            }
        }
        Ok(clusters)
    }
}

/// Muon–site distances in ascending order, using unscaled positions.
pub fn sorted_distances(cluster: &Cluster) -> Vec<f64> {
    let origin = cluster.sites()[0].position;
    let mut d: Vec<f64> = cluster.sites().iter().map(|s| (s.position - origin).norm()).collect();
    d.sort_by(f64::total_cmp);
    d
}

/// Reads a configuration file and returns both orientations.
pub fn load_cluster(path: &Path) -> Result<Vec<Cluster>> {
    ClusterConfig::load(path)?.clusters()
}

/// Which sites of each orientation take part in a simulation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClusterSubset {
    Full,
    /// Muon plus the two nearest fluorines.
    MuF2,
    Labels(Vec<String>),
}

impl std::str::FromStr for ClusterSubset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" | "muf2li2f2" => Ok(ClusterSubset::Full),
            "muf2" => Ok(ClusterSubset::MuF2),
            _ => {
                let labels: Vec<String> = s.split(',').map(|l| l.trim().to_string()).filter(|l| !l.is_empty()).collect();
                if labels.is_empty() {
                    return Err(Error::InvalidArgument(format!("empty cluster subset '{s}'")));
                }
                Ok(ClusterSubset::Labels(labels))
            }
        }
    }
}

impl std::fmt::Display for ClusterSubset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ClusterSubset::Full => write!(f, "full"),
            ClusterSubset::MuF2 => write!(f, "muF2"),
            ClusterSubset::Labels(l) => write!(f, "{}", l.join(",")),
        }
    }
}

impl ClusterSubset {
    pub fn apply(&self, cluster: &Cluster) -> Result<Cluster> {
        let labels: Vec<String> = match self {
            ClusterSubset::Full => return Ok(cluster.clone()),
            ClusterSubset::MuF2 => vec!["mu".into(), "F1".into(), "F2".into()],
            ClusterSubset::Labels(l) => l.clone(),
        };
        let mut idx = Vec::with_capacity(labels.len());
        for l in &labels {
            let i = cluster
                .sites()
                .iter()
                .position(|s| &s.label == l)
                .ok_or_else(|| Error::InvalidArgument(format!("no site labelled '{l}'")))?;
            idx.push(i);
        }
        if idx.first() != Some(&0) {
            return Err(Error::InvalidArgument("cluster subset must start with the muon".into()));
        }
        cluster.subset(&idx)
    }
}
