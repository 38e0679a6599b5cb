//! Drive-allowed transitions of the μF₂ core of the LiYF₄ site under a
//! field along the RF axis.

use fmuf::analytic::{allowed_frequencies, drive_operator, levels_of, omega_d, transition_table};
use fmuf::hamiltonian::{dipole_hamiltonian, scale_bonds};
use fmuf::io::{ClusterConfig, ClusterSubset};
use fmuf::model::FitParams;

fn main() -> fmuf::Result<()> {
    let params = FitParams::published();
    let cluster = &ClusterConfig::liyf4().clusters()?[0];
    let core = ClusterSubset::MuF2.apply(&scale_bonds(cluster, params.scales())?)?;
    let d = core.muon_distances();
    let unit = omega_d(0.5 * (d[1] + d[2]));

    let levels = levels_of(&dipole_hamiltonian(&core)?, unit, 1e-9)?;
    let table = transition_table(&levels, &drive_operator(&core, [0.0, 1.0, 0.0])?, unit);
    println!("{:>4} {:>4} {:>10} {:>10} {:>10}", "from", "to", "omega_D", "kHz", "element");
    for t in table.iter().filter(|t| t.allowed) {
        println!(
            "{:>4} {:>4} {:>10.5} {:>10.2} {:>10.4}{}",
            t.from_level,
            t.to_level,
            t.frequency,
            t.frequency_khz,
            t.drive_matrix_element,
            if t.on_resonance { "  <- highest" } else { "" }
        );
    }
    println!("distinct allowed lines: {:?}", allowed_frequencies(&table, 1e-6));
    println!("fitted drive frequency: {:.1} kHz", params.f_rel * 550.0);
    Ok(())
}
