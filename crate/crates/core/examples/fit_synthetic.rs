//! Differential-evolution fit of synthetic RF-on/off spectra. The μF₂ core
//! keeps each model evaluation cheap; only the F1/F2 bond scale is
//! constrained by it, so the other two scales are pinned.

use fmuf::asymmetry::Spectrum;
use fmuf::de::DeSettings;
use fmuf::fit::{fit, FitBounds, FitData, FitSettings};
use fmuf::io::{ClusterConfig, ClusterSubset};
use fmuf::model::{model_asymmetry, time_grid, FitParams, ModelSettings};
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

fn main() -> fmuf::Result<()> {
    let truth = FitParams::published();
    let clusters = ClusterConfig::liyf4()
        .clusters()?
        .iter()
        .map(|c| ClusterSubset::MuF2.apply(c))
        .collect::<fmuf::Result<Vec<_>>>()?;
    let times = time_grid(12.5, 0.1)?;
    let settings = ModelSettings::fast(0.05);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let mut synth = |rf_on| -> fmuf::Result<Spectrum> {
        let clean = model_asymmetry(&truth, 550.0, rf_on, &clusters, &times, &settings)?;
        let a = clean.asymmetry.iter().map(|v| v + noise.sample(&mut rng)).collect();
        Spectrum::new(times.clone(), a, vec![0.3; times.len()])
    };
    let data = FitData::new(synth(true)?, synth(false)?, 550.0)?;

    let mut bounds = FitBounds::default();
    for b in [&mut bounds.lower, &mut bounds.upper] {
        b.s_li12 = truth.s_li12;
        b.s_f34 = truth.s_f34;
    }
    let fit_settings = FitSettings {
        de: DeSettings { population: Some(12), max_evaluations: Some(360), seed: 3, ..Default::default() },
        model: settings,
        ..Default::default()
    };
    let report = fit(&data, &clusters, &bounds, &fit_settings)?;
    println!("{:>8} {:>10} {:>10}", "param", "fitted", "true");
    for ((name, a), b) in FitParams::NAMES.iter().zip(report.params.to_array()).zip(truth.to_array()) {
        println!("{name:>8} {a:10.4} {b:10.4}");
    }
    println!("chi2_red {:.3} after {} evaluations", report.chi2_red, report.evaluations);
    Ok(())
}
