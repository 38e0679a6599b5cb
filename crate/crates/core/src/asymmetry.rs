//! Asymmetry spectra: detector counts to asymmetry, differences and χ².

use crate::{Error, Result};

/// Asymmetry in % against time in μs.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub times: Vec<f64>,
    /// %
    pub asymmetry: Vec<f64>,
    /// 1σ in %
    pub sigma: Vec<f64>,
    /// Bins usable in a χ² sum.
    pub valid: Vec<bool>,
    pub rf_on: Option<bool>,
    /// Nominal drive frequency f₀ in kHz.
    pub f0_khz: Option<f64>,
}

impl Spectrum {
    /// A spectrum where every bin with a positive, finite σ is valid.
    pub fn new(times: Vec<f64>, asymmetry: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        let n = times.len();
        for len in [asymmetry.len(), sigma.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, found: len });
            }
        }
        let valid = sigma
            .iter()
            .zip(&asymmetry)
            .map(|(s, a)| *s > 0.0 && s.is_finite() && a.is_finite())
            .collect();
        Ok(Self { times, asymmetry, sigma, valid, rf_on: None, f0_khz: None })
    }

    /// Model output without uncertainties.
    pub fn noiseless(times: Vec<f64>, asymmetry: Vec<f64>) -> Result<Self> {
        let n = times.len();
        let mut s = Self::new(times, asymmetry, vec![0.0; n])?;
        s.valid = s.asymmetry.iter().map(|a| a.is_finite()).collect();
        Ok(s)
    }

    pub fn with_meta(mut self, rf_on: Option<bool>, f0_khz: Option<f64>) -> Self {
        self.rf_on = rf_on;
        self.f0_khz = f0_khz;
        self
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Merges runs of `factor` consecutive bins. Values are σ-weighted means
    /// of the valid members, times are the plain means, and an incomplete
    /// trailing run is dropped. A merged bin without valid members is invalid.
    pub fn pack(&self, factor: usize) -> Result<Spectrum> {
        if factor == 0 {
            return Err(Error::InvalidArgument("pack factor must be positive".into()));
        }
        let groups = self.len() / factor;
        let mut out = Spectrum {
            times: Vec::with_capacity(groups),
            asymmetry: Vec::with_capacity(groups),
            sigma: Vec::with_capacity(groups),
            valid: Vec::with_capacity(groups),
            rf_on: self.rf_on,
            f0_khz: self.f0_khz,
        };
        for g in 0..groups {
            let r = g * factor..(g + 1) * factor;
            out.times.push(self.times[r.clone()].iter().sum::<f64>() / factor as f64);
            let (mut wsum, mut asum) = (0.0, 0.0);
            for k in r.filter(|&k| self.valid[k] && self.sigma[k] > 0.0) {
                let w = self.sigma[k].powi(-2);
                wsum += w;
                asum += w * self.asymmetry[k];
            }
            if wsum > 0.0 {
                out.asymmetry.push(asum / wsum);
                out.sigma.push(wsum.sqrt().recip());
                out.valid.push(true);
            } else {
                out.asymmetry.push(0.0);
                out.sigma.push(0.0);
                out.valid.push(false);
            }
        }
        Ok(out)
    }
}

/// (N_F − αN_B)/(N_F + αN_B) as a fraction, or `None` when the
/// denominator vanishes.
pub fn asymmetry_fraction(nf: f64, nb: f64, alpha: f64) -> Option<f64> {
    let den = nf + alpha * nb;
    (den > 0.0).then(|| (nf - alpha * nb) / den)
}

/// Poisson propagation of counting errors on the fractional asymmetry:
/// σ = 2α·√(N_F N_B (N_F + N_B)) / (N_F + αN_B)².
pub fn asymmetry_sigma(nf: f64, nb: f64, alpha: f64) -> Option<f64> {
    let den = nf + alpha * nb;
    (den > 0.0).then(|| 2.0 * alpha * (nf * nb * (nf + nb)).sqrt() / (den * den))
}

/// Builds an asymmetry spectrum (in %) from forward/backward counts.
/// Bins with zero total counts, or with no counts in one detector (σ = 0),
/// are kept but flagged invalid.
pub fn experimental_asymmetry(times: &[f64], nf: &[f64], nb: &[f64], alpha: f64) -> Result<Spectrum> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    for len in [nf.len(), nb.len()] {
        if len != times.len() {
            return Err(Error::DimensionMismatch { expected: times.len(), found: len });
        }
    }
    if nf.iter().chain(nb).any(|c| !(*c >= 0.0 && c.is_finite())) {
        return Err(Error::InvalidArgument("counts must be finite and non-negative".into()));
    }
    let n = times.len();
    let mut asym = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    let mut valid = Vec::with_capacity(n);
    for k in 0..n {
        match (asymmetry_fraction(nf[k], nb[k], alpha), asymmetry_sigma(nf[k], nb[k], alpha)) {
            (Some(a), Some(s)) => {
                asym.push(100.0 * a);
                sigma.push(100.0 * s);
                valid.push(s > 0.0);
            }
            _ => {
                asym.push(0.0);
                sigma.push(0.0);
                valid.push(false);
            }
        }
    }
    Ok(Spectrum { times: times.to_vec(), asymmetry: asym, sigma, valid, rf_on: None, f0_khz: None })
}

/// a_on − a_off with uncertainties added in quadrature.
pub fn difference_spectrum(on: &Spectrum, off: &Spectrum) -> Result<Spectrum> {
    crate::dynamics::same_grid(&on.times, &off.times)?;
    let n = on.len();
    Ok(Spectrum {
        times: on.times.clone(),
        asymmetry: (0..n).map(|k| on.asymmetry[k] - off.asymmetry[k]).collect(),
        sigma: (0..n).map(|k| on.sigma[k].hypot(off.sigma[k])).collect(),
        valid: (0..n).map(|k| on.valid[k] && off.valid[k]).collect(),
        rf_on: None,
        f0_khz: on.f0_khz,
    })
}

/// Cutoff on χ² evaluation, μs.
pub const CHI2_CUTOFF_US: f64 = 12.5;

/// Σ((A_data − A_model)/σ)² over valid data bins with t ≤ cutoff, and the
/// number of bins used.
pub fn chi_squared_sum(model: &Spectrum, data: &Spectrum, cutoff: f64) -> Result<(f64, usize)> {
    crate::dynamics::same_grid(&model.times, &data.times)?;
    if !(cutoff > 0.0) {
        return Err(Error::InvalidArgument(format!("cutoff {cutoff} must be positive")));
    }
    let mut sum = 0.0;
    let mut count = 0;
    for k in 0..data.len() {
        if data.times[k] <= cutoff && data.valid[k] && data.sigma[k] > 0.0 {
            let r = (data.asymmetry[k] - model.asymmetry[k]) / data.sigma[k];
            sum += r * r;
            count += 1;
        }
    }
    Ok((sum, count))
}

/// Reduced χ² with `n_free` fitted parameters.
pub fn chi_squared_reduced(model: &Spectrum, data: &Spectrum, cutoff: f64, n_free: usize) -> Result<f64> {
    let (sum, count) = chi_squared_sum(model, data, cutoff)?;
    reduce(sum, count, n_free)
}

pub(crate) fn reduce(sum: f64, count: usize, n_free: usize) -> Result<f64> {
    if count <= n_free {
        return Err(Error::InsufficientPoints { needed: n_free, found: count });
    }
    Ok(sum / (count - n_free) as f64)
}
