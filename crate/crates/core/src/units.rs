//! Physical constants and the unit system used throughout the crate.
//!
//! Lengths are in Å, times in μs, magnetic fields in mT and every
//! Hamiltonian is stored as H/ħ in rad·μs⁻¹. Gyromagnetic ratios are
//! quoted as γ/(2π) in MHz·T⁻¹, which is how they appear in tables.

use std::f64::consts::PI;

/// Reduced Planck constant, J·s (CODATA 2018, exact).
pub const HBAR: f64 = 1.054_571_817e-34;
/// μ₀/4π in T·m·A⁻¹ (CODATA 2018).
pub const MU0_OVER_4PI: f64 = 1.000_000_000_55e-7;
/// Elementary charge, C (exact).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Muon lifetime τ_μ in μs.
pub const MUON_LIFETIME_US: f64 = 2.196_981_1;

const ANGSTROM: f64 = 1e-10;
const PER_SECOND_TO_PER_US: f64 = 1e-6;

/// γ/(2π) in MHz·T⁻¹ for the species in the cluster.
pub mod gyromagnetic {
    /// Positive muon.
    pub const MUON: f64 = 135.538_8;
    /// ¹⁹F nucleus.
    pub const FLUORINE_19: f64 = 40.053;
    /// ⁷Li nucleus.
    pub const LITHIUM_7: f64 = 16.548;
}

/// γ in rad·s⁻¹·T⁻¹ from γ/(2π) in MHz·T⁻¹.
pub fn gamma_si(gamma_mhz_per_t: f64) -> f64 {
    2.0 * PI * gamma_mhz_per_t * 1e6
}

/// Larmor rate per unit field: rad·μs⁻¹ per mT.
pub fn larmor_rate(gamma_mhz_per_t: f64) -> f64 {
    // rad/s/T -> rad/s/mT -> rad/us/mT
    gamma_si(gamma_mhz_per_t) * 1e-3 * PER_SECOND_TO_PER_US
}

/// Dipolar coupling D = (μ₀/4π)·ħ·γᵢγⱼ/r³ expressed as an angular
/// frequency in rad·μs⁻¹, for spin operators normalized as J/ħ.
pub fn dipolar_coupling(gamma_i: f64, gamma_j: f64, r_angstrom: f64) -> f64 {
    let r = r_angstrom * ANGSTROM;
    MU0_OVER_4PI * HBAR * gamma_si(gamma_i) * gamma_si(gamma_j) / (r * r * r) * PER_SECOND_TO_PER_US
}

pub fn khz_to_rad_per_us(f_khz: f64) -> f64 {
    2.0 * PI * f_khz * 1e-3
}

pub fn rad_per_us_to_khz(omega: f64) -> f64 {
    omega / (2.0 * PI) * 1e3
}

/// ħω in neV for ω in rad·μs⁻¹.
pub fn rad_per_us_to_nev(omega: f64) -> f64 {
    HBAR * omega / PER_SECOND_TO_PER_US / ELEMENTARY_CHARGE * 1e9
}

pub fn nev_to_rad_per_us(energy_nev: f64) -> f64 {
    energy_nev * 1e-9 * ELEMENTARY_CHARGE / HBAR * PER_SECOND_TO_PER_US
}

/// Field in mT whose muon Zeeman energy ħγ_μB equals `energy_nev`.
pub fn muon_field_for_energy(energy_nev: f64) -> f64 {
    nev_to_rad_per_us(energy_nev) / larmor_rate(gyromagnetic::MUON)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn muon_larmor_rate() {
        // 135.5388 kHz/mT
        assert!((rad_per_us_to_khz(larmor_rate(gyromagnetic::MUON)) - 135.5388).abs() < 1e-9);
    }

    #[test]
    fn dipolar_scale_at_one_point_two_angstrom() {
        let w = dipolar_coupling(gyromagnetic::MUON, gyromagnetic::FLUORINE_19, 1.2);
        assert!((w - 1.3082).abs() < 1e-3, "{w}");
        // 1/r^3 scaling
        let w2 = dipolar_coupling(gyromagnetic::MUON, gyromagnetic::FLUORINE_19, 2.4);
        assert!((w / w2 - 8.0).abs() < 1e-12);
    }

    #[test]
    fn energy_round_trip() {
        let w = 3.27;
        assert!((nev_to_rad_per_us(rad_per_us_to_nev(w)) - w).abs() < 1e-12);
    }
}
