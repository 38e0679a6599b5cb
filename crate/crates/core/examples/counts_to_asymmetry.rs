//! Forward/backward positron counts to asymmetry: simulates decay counts
//! from a known polarization, writes and re-reads them as a counts table,
//! and recovers A(t) with its Poisson error bars.

use fmuf::asymmetry::experimental_asymmetry;
use fmuf::io::spectrum_io::counts_table;
use fmuf::io::{load_spectrum, SpectrumFormat};
use fmuf::model::time_grid;
use fmuf::units::MUON_LIFETIME_US;
use rand::SeedableRng;
use rand_distr::{Distribution, Poisson};

fn main() -> fmuf::Result<()> {
    let (alpha, a_true, n0) = (1.05, 0.2, 2.0e5);
    let times = time_grid(10.0, 0.5)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let mut draw = |mean: f64| Poisson::new(mean).unwrap().sample(&mut rng);
    let (mut nf, mut nb) = (Vec::new(), Vec::new());
    for &t in &times {
        let p = (-0.2 * t).exp();
        let decay = n0 * (-t / MUON_LIFETIME_US).exp();
        nf.push(draw(decay * (1.0 + a_true * p)));
        nb.push(draw(alpha * decay * (1.0 - a_true * p)));
    }

    let dir = std::env::temp_dir().join("fmuf-counts-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("counts.csv");
    counts_table(&times, &nf, &nb).write(&path)?;
    let from_file = load_spectrum(&path, SpectrumFormat::Counts { alpha })?;
    let direct = experimental_asymmetry(&times, &nf, &nb, alpha)?;
    assert_eq!(from_file.asymmetry, direct.asymmetry);

    println!("{:>6} {:>9} {:>9} {:>9}", "t (us)", "A", "sigma", "true");
    for k in 0..times.len() {
        let t = times[k];
        println!("{t:6.1} {:9.4} {:9.4} {:9.4}", direct.asymmetry[k], direct.sigma[k], a_true * (-0.2 * t).exp());
    }
    println!("wrote {}", path.display());
    Ok(())
}
