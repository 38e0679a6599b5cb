//! RF-on minus RF-off asymmetry at the resonant 550 kHz drive and the
//! off-resonant 825 kHz drive. Uses the fast fixed-step settings, so it
//! runs in seconds.

use fmuf::io::ClusterConfig;
use fmuf::model::{model_asymmetry, time_grid, FitParams, ModelSettings};

fn main() -> fmuf::Result<()> {
    let params = FitParams::published();
    let clusters = ClusterConfig::liyf4().clusters()?;
    let times = time_grid(12.5, 0.25)?;
    let settings = ModelSettings::fast(0.1);
    let mut columns = Vec::new();
    for f0 in [550.0, 825.0] {
        let on = model_asymmetry(&params, f0, true, &clusters, &times, &settings)?;
        let off = model_asymmetry(&params, f0, false, &clusters, &times, &settings)?;
        columns.push(on.asymmetry.iter().zip(&off.asymmetry).map(|(a, b)| a - b).collect::<Vec<_>>());
    }
    println!("{:>6} {:>10} {:>10}", "t (us)", "550 kHz", "825 kHz");
    for (k, t) in times.iter().enumerate().step_by(2) {
        println!("{t:6.2} {:10.4} {:10.4}", columns[0][k], columns[1][k]);
    }
    for (f0, d) in [550, 825].iter().zip(&columns) {
        let area: f64 = d.iter().map(|v| v.abs() * 0.25).sum();
        println!("{f0} kHz: sum |dA| dt = {area:.3} %.us");
    }
    Ok(())
}
