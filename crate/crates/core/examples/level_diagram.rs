//! Energy levels of the linear F–μ–F complex: closed form against numerical
//! diagonalization, then a short sweep of a field along the bond axis.

use fmuf::analytic::{analytic_energies, fmuf_eigensystem, levels_vs_field, FmufGeometry};
use fmuf::hamiltonian::PairSelection;

fn main() -> fmuf::Result<()> {
    let geom = FmufGeometry::linear(1.18);
    println!("omega_D = {:.4} rad/us at r = 1.18 A", geom.omega_d());
    println!("{:>10} {:>10} {:>4}", "numeric", "closed", "deg");
    for (level, exact) in fmuf_eigensystem(&geom)?.iter().zip(analytic_energies()) {
        println!("{:>10.6} {:>10.6} {:>4}", level.energy, exact, level.degeneracy);
    }

    let fields: Vec<f64> = (0..=8).map(|k| 0.25 * k as f64).collect();
    let sweep = levels_vs_field(&geom.cluster()?, PairSelection::MuonOnly, [0.0, 0.0, 1.0], &fields)?;
    println!("\nfield (mT) and levels in units of omega_D");
    for (b, e) in sweep.fields.iter().zip(&sweep.tracked) {
        let scaled: Vec<String> = e.iter().map(|v| format!("{:+.3}", v / geom.omega_d())).collect();
        println!("{b:5.2}  {}", scaled.join(" "));
    }
    Ok(())
}
