//! A lone muon in a static field, driven at its Larmor frequency by a weak
//! transverse RF field. The spin-up population follows cos²(Ωt/2) with
//! Ω = γB_y/2.

use fmuf::dynamics::{evolve, initial_state, polarization_of, EvolveOptions};
use fmuf::hamiltonian::{driven_hamiltonian_from, zeeman_hamiltonian, Cluster, DriveSpec, SpinSite};
use fmuf::model::time_grid;
use fmuf::units::{gyromagnetic, larmor_rate};

fn main() -> fmuf::Result<()> {
    let muon = Cluster::new(vec![SpinSite::new("mu", 0.5, gyromagnetic::MUON, [0.0; 3])], 1)?;
    let (b_z, b_y) = (5.0, 0.1);
    let omega0 = larmor_rate(gyromagnetic::MUON) * b_z;
    let rabi = larmor_rate(gyromagnetic::MUON) * b_y / 2.0;
    let h = driven_hamiltonian_from(&muon, zeeman_hamiltonian(&muon, [0.0, 0.0, b_z])?, DriveSpec::new(b_y, omega0))?;

    let period = 2.0 * std::f64::consts::PI / rabi;
    let times = time_grid(period, period / 16.0)?;
    let rho0 = initial_state(muon.layout(), [0.0, 0.0, 1.0])?;
    println!("Rabi period {period:.2} us");
    println!("{:>8} {:>10} {:>10}", "t (us)", "P_up", "RWA");
    evolve(&h, &rho0, &times, &EvolveOptions::default(), |_, t, s| {
        let up = 0.5 * (1.0 + polarization_of(s, muon.layout(), [0.0, 0.0, 1.0])?);
        println!("{t:8.3} {up:10.5} {:10.5}", (0.5 * rabi * t).cos().powi(2));
        Ok(())
    })?;
    Ok(())
}
