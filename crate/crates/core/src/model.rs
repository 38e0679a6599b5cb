//! Fit parameters and the model pipeline from cluster geometry to asymmetry.
//!
//! A(t) = A₀·P(t) + A₁·exp(−λ₁t) + A₂, where P is the orientation-averaged
//! muon polarization of the bond-scaled clusters under the RF drive with
//! ω_c = 2π·f_rel·f₀ and B_y = g_rel·ω_c/γ_μ.

use crate::asymmetry::Spectrum;
use crate::dynamics::{
    evolve_state, initial_kets, orientation_average, polarization_of, static_polarization, EvolveOptions,
    Method, PolarizationSeries, SplitOrder, State, StepControl,
};
use crate::hamiltonian::{dipole_hamiltonian, driven_hamiltonian_from, scale_bonds, BondScales, Cluster, DriveSpec};
use crate::units::{gyromagnetic, khz_to_rad_per_us, larmor_rate, muon_field_for_energy, rad_per_us_to_nev};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// The nine fitted quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    pub s_f12: f64,
    pub s_li12: f64,
    pub s_f34: f64,
    pub f_rel: f64,
    pub g_rel: f64,
    /// %
    pub a0: f64,
    /// %
    pub a1: f64,
    /// μs⁻¹
    pub lambda1: f64,
    /// %
    pub a2: f64,
}

impl FitParams {
    pub const NAMES: [&'static str; 9] = ["s_F12", "s_Li12", "s_F34", "f_rel", "g_rel", "A0", "A1", "lambda1", "A2"];
    pub const UNITS: [&'static str; 9] = ["", "", "", "", "", "%", "%", "1/us", "%"];

    /// Published best fit to the 550 kHz RF-on/off data.
    pub fn published() -> Self {
        Self {
            s_f12: 1.0391,
            s_li12: 0.8763,
            s_f34: 0.8959,
            f_rel: 0.9472,
            g_rel: 0.0775,
            a0: 18.5257,
            a1: 3.4304,
            lambda1: 0.4810,
            a2: -1.1786,
        }
    }

    pub fn to_array(&self) -> [f64; 9] {
        [self.s_f12, self.s_li12, self.s_f34, self.f_rel, self.g_rel, self.a0, self.a1, self.lambda1, self.a2]
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if v.len() != 9 {
            return Err(Error::DimensionMismatch { expected: 9, found: v.len() });
        }
        Ok(Self {
            s_f12: v[0],
            s_li12: v[1],
            s_f34: v[2],
            f_rel: v[3],
            g_rel: v[4],
            a0: v[5],
            a1: v[6],
            lambda1: v[7],
            a2: v[8],
        })
    }

    pub fn scales(&self) -> BondScales {
        BondScales { f12: self.s_f12, li12: self.s_li12, f34: self.s_f34 }
    }

    /// ω_c in rad·μs⁻¹.
    pub fn omega_c(&self, f0_khz: f64) -> f64 {
        khz_to_rad_per_us(self.f_rel * f0_khz)
    }

    /// B_y = g_rel·ħω_c/(ħγ_μ) in mT.
    pub fn field_by(&self, f0_khz: f64) -> f64 {
        self.g_rel * self.omega_c(f0_khz) / larmor_rate(gyromagnetic::MUON)
    }

    pub fn drive(&self, f0_khz: f64, rf_on: bool, phase: f64) -> DriveSpec {
        if rf_on {
            DriveSpec::new(self.field_by(f0_khz), self.omega_c(f0_khz)).with_phase(phase)
        } else {
            DriveSpec::off()
        }
    }

    /// Eq.-4 background terms A₁·exp(−λ₁t) + A₂.
    pub fn background(&self, t: f64) -> f64 {
        self.a1 * (-self.lambda1 * t).exp() + self.a2
    }

    pub fn derived(&self, f0_khz: f64, cluster: &Cluster) -> Result<DerivedQuantities> {
        let scaled = scale_bonds(cluster, self.scales())?;
        let d = scaled.muon_distances();
        let labels = scaled.sites().iter().map(|s| s.label.clone());
        let bonds = labels.zip(d).skip(1).collect();
        let f_c = self.f_rel * f0_khz;
        let e_c = rad_per_us_to_nev(khz_to_rad_per_us(f_c));
        let g_c = self.g_rel * e_c;
        Ok(DerivedQuantities { bond_lengths: bonds, f_c_khz: f_c, e_c_nev: e_c, g_c_nev: g_c, b_y_mt: muon_field_for_energy(g_c) })
    }
}

/// Quantities computed from a parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedQuantities {
    /// (label, scaled |r′_μ,i| in Å) for every non-muon site.
    pub bond_lengths: Vec<(String, f64)>,
    pub f_c_khz: f64,
    pub e_c_nev: f64,
    pub g_c_nev: f64,
    pub b_y_mt: f64,
}

/// Numerical settings of the model pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSettings {
    /// Propagation settings for the driven case.
    pub evolve: EvolveOptions,
    /// Initial muon polarization direction (lab frame), also the measured axis.
    pub muon_axis: [f64; 3],
    /// RF phase at t = 0.
    pub drive_phase: f64,
    /// Optional Gaussian smearing of P(t), FWHM in μs; 0 disables it.
    pub smearing_fwhm: f64,
    /// Width of the data bins in μs. When positive, each model value is the
    /// average of P over its bin instead of the value at the bin centre.
    pub bin_width: f64,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            evolve: EvolveOptions::default()
                .with_method(Method::Split(SplitOrder::Yoshida4))
                .with_tol(1e-6),
            muon_axis: [0.0, 0.0, 1.0],
            drive_phase: 0.0,
            smearing_fwhm: 0.0,
            bin_width: 0.0,
        }
    }
}

impl ModelSettings {
    /// Cheaper fixed-step propagation for use inside fits.
    pub fn fast(max_substep: f64) -> Self {
        let mut s = Self::default();
        s.evolve = s
            .evolve
            .with_method(Method::Split(SplitOrder::Strang))
            .with_control(StepControl::Fixed { max_substep });
        s.evolve.period_fraction = 1.0;
        s
    }
}

/// P(t) of one cluster (already bond-scaled) under `drive`. The drive and
/// the initial state refer to t = 0, which need not be on the grid.
pub fn cluster_polarization(
    cluster: &Cluster,
    drive: DriveSpec,
    times: &[f64],
    settings: &ModelSettings,
) -> Result<Vec<f64>> {
    let h0 = dipole_hamiltonian(cluster)?;
    if drive.is_null() {
        return static_polarization(h0.as_ref(), cluster.layout(), settings.muon_axis, times);
    }
    let h = driven_hamiltonian_from(cluster, h0, drive)?;
    let k0 = initial_kets(cluster.layout(), settings.muon_axis)?;
    let skip = usize::from(times.first().is_some_and(|&t| t > 0.0));
    let grid: Vec<f64> = if skip == 1 { std::iter::once(0.0).chain(times.iter().copied()).collect() } else { times.to_vec() };
    let mut out = Vec::with_capacity(times.len());
    evolve_state(&h, State::Kets(k0), &grid, &settings.evolve, |i, _, s| {
        if i >= skip {
            out.push(polarization_of(s, cluster.layout(), settings.muon_axis)?);
        }
        Ok(())
    })?;
    Ok(out)
}

/// Orientation-averaged P(t) for the given parameters.
pub fn model_polarization(
    params: &FitParams,
    f0_khz: f64,
    rf_on: bool,
    clusters: &[Cluster],
    times: &[f64],
    settings: &ModelSettings,
) -> Result<PolarizationSeries> {
    if clusters.is_empty() {
        return Err(Error::InvalidArgument("no cluster orientations supplied".into()));
    }
    let drive = params.drive(f0_khz, rf_on, settings.drive_phase);
    drive.validate()?;
    // P(0) anchors the bin average of the first bin.
    let lead = usize::from(settings.bin_width > 0.0 && times.first().is_some_and(|&t| t > 0.0));
    let grid: Vec<f64> = std::iter::repeat_n(0.0, lead).chain(times.iter().copied()).collect();
    let curves = clusters
        .par_iter()
        .map(|c| {
            let scaled = scale_bonds(c, params.scales())?;
            let p = cluster_polarization(&scaled, drive, &grid, settings)?;
            PolarizationSeries::new(grid.clone(), p)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut avg = curves[0].clone();
    if curves.len() == 2 {
        avg = orientation_average(&curves[0], &curves[1])?;
    } else if curves.len() > 2 {
        let n = curves.len() as f64;
        for k in 0..avg.len() {
            avg.values[k] = curves.iter().map(|c| c.values[k]).sum::<f64>() / n;
        }
    }
    if settings.smearing_fwhm > 0.0 {
        avg = crate::dynamics::gaussian_smear(&avg, settings.smearing_fwhm)?;
    }
    if settings.bin_width > 0.0 {
        avg = crate::dynamics::bin_average(&avg, settings.bin_width)?;
    }
    if lead == 1 {
        avg = PolarizationSeries::new(avg.times[1..].to_vec(), avg.values[1..].to_vec())?;
    }
    Ok(avg)
}

/// A(t) = A₀P(t) + A₁exp(−λ₁t) + A₂ for a given polarization curve.
pub fn apply_asymmetry_model(params: &FitParams, p: &PolarizationSeries) -> Result<Vec<f64>> {
    Ok(p.times
        .iter()
        .zip(&p.values)
        .map(|(&t, &pv)| params.a0 * pv + params.background(t))
        .collect())
}

/// Full pipeline to a model spectrum (σ = 0).
pub fn model_asymmetry(
    params: &FitParams,
    f0_khz: f64,
    rf_on: bool,
    clusters: &[Cluster],
    times: &[f64],
    settings: &ModelSettings,
) -> Result<Spectrum> {
    let p = model_polarization(params, f0_khz, rf_on, clusters, times, settings)?;
    let a = apply_asymmetry_model(params, &p)?;
    Ok(Spectrum::noiseless(times.to_vec(), a)?.with_meta(Some(rf_on), Some(f0_khz)))
}

/// Uniform grid 0, dt, 2dt, … up to and including t_max (to rounding).
pub fn time_grid(t_max: f64, dt: f64) -> Result<Vec<f64>> {
    if !(t_max >= 0.0 && dt > 0.0 && t_max.is_finite()) {
        return Err(Error::InvalidArgument(format!("invalid grid t_max={t_max}, dt={dt}")));
    }
    let n = (t_max / dt + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| k as f64 * dt).collect())
}
