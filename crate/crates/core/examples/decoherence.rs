//! Zero-field muon depolarization: the μF₂ core alone against the full
//! seven-spin cluster, orientation averaged. The extra spins damp the
//! coherent F–μ–F oscillation.

use fmuf::dynamics::static_polarization;
use fmuf::hamiltonian::{dipole_hamiltonian, scale_bonds};
use fmuf::io::{ClusterConfig, ClusterSubset};
use fmuf::model::{time_grid, FitParams};

fn main() -> fmuf::Result<()> {
    let scales = FitParams::published().scales();
    let times = time_grid(15.0, 0.5)?;
    let mut core = vec![0.0; times.len()];
    let mut full = vec![0.0; times.len()];
    for cluster in ClusterConfig::liyf4().clusters()? {
        let scaled = scale_bonds(&cluster, scales)?;
        let small = ClusterSubset::MuF2.apply(&scaled)?;
        let z = [0.0, 0.0, 1.0];
        let p_core = static_polarization(dipole_hamiltonian(&small)?.as_ref(), small.layout(), z, &times)?;
        let p_full = static_polarization(dipole_hamiltonian(&scaled)?.as_ref(), scaled.layout(), z, &times)?;
        for k in 0..times.len() {
            core[k] += 0.5 * p_core[k];
            full[k] += 0.5 * p_full[k];
        }
    }
    println!("{:>6} {:>9} {:>9}", "t (us)", "muF2", "full");
    for k in 0..times.len() {
        println!("{:6.1} {:9.4} {:9.4}", times[k], core[k], full[k]);
    }
    Ok(())
}
