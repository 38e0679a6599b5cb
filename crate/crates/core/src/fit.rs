//! Joint RF-on/RF-off fitting of the asymmetry model.
//!
//! The objective pools the residuals of both spectra into one reduced χ²
//! with nine free parameters. Polarization curves depend only on the bond
//! scales, f_rel and g_rel, so they are cached on a quantized key; the
//! RF-off curve depends on the scales alone.
//!
//! With `profile_amplitudes` set, the optimizer only searches the five
//! nonlinear parameters. For each candidate, (A₀, A₁, A₂) are solved as a
//! box-constrained weighted least-squares problem and λ₁ by a 1-D search.

use crate::asymmetry::{reduce, Spectrum, CHI2_CUTOFF_US};
use crate::de::{differential_evolution, differential_evolution_from, DeSettings};
use crate::hamiltonian::{BondScales, Cluster};
use crate::model::{model_polarization, DerivedQuantities, FitParams, ModelSettings};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

/// Number of fitted parameters entering the reduced χ².
pub const N_FREE: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitBounds {
    pub lower: FitParams,
    pub upper: FitParams,
}

impl Default for FitBounds {
    fn default() -> Self {
        Self {
            lower: FitParams { s_f12: 0.8, s_li12: 0.8, s_f34: 0.8, f_rel: 0.8, g_rel: 0.0, a0: 0.0, a1: 0.0, lambda1: 0.0, a2: -5.0 },
            upper: FitParams { s_f12: 1.2, s_li12: 1.2, s_f34: 1.2, f_rel: 1.2, g_rel: 0.3, a0: 30.0, a1: 10.0, lambda1: 5.0, a2: 5.0 },
        }
    }
}

impl FitBounds {
    /// Bounds collapsed onto a single point.
    pub fn fixed(p: FitParams) -> Self {
        Self { lower: p, upper: p }
    }

    pub fn pairs(&self) -> [(f64, f64); 9] {
        let (lo, hi) = (self.lower.to_array(), self.upper.to_array());
        std::array::from_fn(|i| (lo[i], hi[i]))
    }

    pub fn validate(&self) -> Result<()> {
        for (i, (lo, hi)) in self.pairs().into_iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidArgument(format!(
                    "bounds for {} = [{lo}, {hi}] are not a finite ordered interval",
                    FitParams::NAMES[i]
                )));
            }
        }
        let (lo, hi) = BondScales::SANITY_BOUNDS;
        for i in 0..3 {
            let (a, b) = self.pairs()[i];
            if a <= lo || b >= hi {
                return Err(Error::InvalidArgument(format!(
                    "bounds for {} must lie inside ({lo}, {hi})",
                    FitParams::NAMES[i]
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: &FitParams) -> bool {
        p.to_array().iter().zip(self.pairs()).all(|(v, (lo, hi))| lo <= *v && *v <= hi)
    }
}

/// RF-on and RF-off spectra measured at the same nominal frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct FitData {
    pub on: Spectrum,
    pub off: Spectrum,
    /// kHz
    pub f0_khz: f64,
}

impl FitData {
    pub fn new(on: Spectrum, off: Spectrum, f0_khz: f64) -> Result<Self> {
        if !(f0_khz > 0.0 && f0_khz.is_finite()) {
            return Err(Error::InvalidArgument(format!("nominal frequency {f0_khz} kHz must be positive")));
        }
        if on.is_empty() || off.is_empty() {
            return Err(Error::InsufficientPoints { needed: N_FREE + 1, found: 0 });
        }
        Ok(Self { on, off, f0_khz })
    }
}

fn pooled(parts: [(f64, usize); 2]) -> Result<f64> {
    reduce(parts[0].0 + parts[1].0, parts[0].1 + parts[1].1, N_FREE)
}

/// Pooled reduced χ² of both spectra against the model, v = 9, t ≤ 12.5 μs.
pub fn joint_objective(params: &FitParams, data: &FitData, clusters: &[Cluster], settings: &ModelSettings) -> Result<f64> {
    let mut parts = [(0.0, 0); 2];
    for (k, (spec, rf)) in [(&data.on, true), (&data.off, false)].into_iter().enumerate() {
        let m = crate::model::model_asymmetry(params, data.f0_khz, rf, clusters, &spec.times, settings)?;
        parts[k] = crate::asymmetry::chi_squared_sum(&m, spec, CHI2_CUTOFF_US)?;
    }
    pooled(parts)
}

/// Weighted design rows (P, exp(−λt), 1)/σ and targets A/σ over usable bins.
struct Rows {
    t: Vec<f64>,
    p: Vec<f64>,
    w: Vec<f64>,
    y: Vec<f64>,
}

impl Rows {
    fn new() -> Self {
        Self { t: Vec::new(), p: Vec::new(), w: Vec::new(), y: Vec::new() }
    }

    fn extend(&mut self, spec: &Spectrum, p: &[f64], cutoff: f64) {
        for k in 0..spec.len() {
            if spec.times[k] <= cutoff && spec.valid[k] && spec.sigma[k] > 0.0 {
                self.t.push(spec.times[k]);
                self.p.push(p[k]);
                self.w.push(1.0 / spec.sigma[k]);
                self.y.push(spec.asymmetry[k]);
            }
        }
    }

    fn len(&self) -> usize {
        self.t.len()
    }

    /// Gram matrix, projection and Σy² of the weighted problem at λ₁.
    fn normal_equations(&self, lambda1: f64) -> (Matrix3<f64>, Vector3<f64>, f64) {
        let mut g = Matrix3::zeros();
        let mut b = Vector3::zeros();
        let mut yy = 0.0;
        for k in 0..self.len() {
            let w = self.w[k];
            let x = Vector3::new(self.p[k] * w, (-lambda1 * self.t[k]).exp() * w, w);
            let y = self.y[k] * w;
            g += x * x.transpose();
            b += x * y;
            yy += y * y;
        }
        (g, b, yy)
    }
}

/// Minimizes aᵀGa − 2bᵀa + c over a box by checking every face of it:
/// each coordinate is either free or pinned to one of its bounds.
fn box_least_squares(g: &Matrix3<f64>, b: &Vector3<f64>, c: f64, lo: [f64; 3], hi: [f64; 3]) -> ([f64; 3], f64) {
    let value = |a: &Vector3<f64>| a.dot(&(g * a)) - 2.0 * b.dot(a) + c;
    let mut best = ([lo[0], lo[1], lo[2]], f64::INFINITY);
    for code in 0..27 {
        let state: [usize; 3] = [code % 3, (code / 3) % 3, code / 9];
        let mut a = Vector3::zeros();
        let mut free = Vec::with_capacity(3);
        for i in 0..3 {
            match state[i] {
                0 => free.push(i),
                1 => a[i] = lo[i],
                _ => a[i] = hi[i],
            }
        }
        if !free.is_empty() {
            let n = free.len();
            let gs = DMatrix::from_fn(n, n, |r, s| g[(free[r], free[s])]);
            let rhs = DVector::from_fn(n, |r, _| b[free[r]] - (0..3).map(|j| g[(free[r], j)] * a[j]).sum::<f64>());
            let Some(sol) = gs.cholesky().map(|ch| ch.solve(&rhs)) else { continue };
            let mut feasible = true;
            for (r, &i) in free.iter().enumerate() {
                let v = sol[r];
                let slack = 1e-12 * (1.0 + hi[i].abs().max(lo[i].abs()));
                if !v.is_finite() || v < lo[i] - slack || v > hi[i] + slack {
                    feasible = false;
                    break;
                }
                a[i] = v.clamp(lo[i], hi[i]);
            }
            if !feasible {
                continue;
            }
        }
        let v = value(&a);
        if v < best.1 {
            best = ([a[0], a[1], a[2]], v);
        }
    }
    best
}

/// Best (A₀, A₁, λ₁, A₂) within bounds for fixed polarization curves, and
/// the resulting pooled χ² sum and bin count.
pub fn profile_linear(
    data: &FitData,
    p_on: &[f64],
    p_off: &[f64],
    bounds: &FitBounds,
    cutoff: f64,
) -> Result<([f64; 4], f64, usize)> {
    if p_on.len() != data.on.len() {
        return Err(Error::DimensionMismatch { expected: data.on.len(), found: p_on.len() });
    }
    if p_off.len() != data.off.len() {
        return Err(Error::DimensionMismatch { expected: data.off.len(), found: p_off.len() });
    }
    let mut rows = Rows::new();
    rows.extend(&data.on, p_on, cutoff);
    rows.extend(&data.off, p_off, cutoff);
    Ok(profile_rows(&rows, bounds))
}

fn profile_rows(rows: &Rows, bounds: &FitBounds) -> ([f64; 4], f64, usize) {
    let (l, u) = (&bounds.lower, &bounds.upper);
    let lo = [l.a0, l.a1, l.a2];
    let hi = [u.a0, u.a1, u.a2];
    let solve = |lambda: f64| {
        let (g, b, c) = rows.normal_equations(lambda);
        box_least_squares(&g, &b, c, lo, hi)
    };
    let (lam_lo, lam_hi) = (l.lambda1, u.lambda1);
    let mut best_lambda = lam_lo;
    let mut best = solve(lam_lo);
    if lam_hi > lam_lo {
        const GRID: usize = 48;
        let step = (lam_hi - lam_lo) / GRID as f64;
        let mut best_k = 0;
        for k in 1..=GRID {
            let lam = lam_lo + k as f64 * step;
            let r = solve(lam);
            if r.1 < best.1 {
                best = r;
                best_lambda = lam;
                best_k = k;
            }
        }
        // golden-section refinement inside the neighbouring grid cells
        let (mut a, mut b) = (lam_lo + best_k.saturating_sub(1) as f64 * step, (lam_lo + (best_k + 1) as f64 * step).min(lam_hi));
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut x1 = b - phi * (b - a);
        let mut x2 = a + phi * (b - a);
        let (mut f1, mut f2) = (solve(x1), solve(x2));
        while b - a > 1e-9 * (1.0 + b.abs()) {
            if f1.1 <= f2.1 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - phi * (b - a);
                f1 = solve(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + phi * (b - a);
                f2 = solve(x2);
            }
        }
        for (x, f) in [(x1, f1), (x2, f2)] {
            if f.1 < best.1 {
                best = f;
                best_lambda = x;
            }
        }
    }
    // recompute from residuals; the quadratic form loses digits near zero
    let ([a0, a1, a2], _) = best;
    let sum = (0..rows.len())
        .map(|k| {
            let m = a0 * rows.p[k] + a1 * (-best_lambda * rows.t[k]).exp() + a2;
            ((rows.y[k] - m) * rows.w[k]).powi(2)
        })
        .sum();
    ([a0, a1, best_lambda, a2], sum, rows.len())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSettings {
    pub de: DeSettings,
    pub model: ModelSettings,
    /// Solve (A₀, A₁, A₂) and λ₁ inside the objective instead of searching them.
    pub profile_amplitudes: bool,
    /// Grid spacing of the memo cache; candidates are snapped to it before
    /// evaluation, so cached and recomputed values agree exactly.
    pub quantum: f64,
    /// χ² cutoff in μs.
    pub cutoff: f64,
    /// Budget of a preliminary search over the bond scales against the
    /// RF-off spectrum alone (cheap: no drive). Its best members seed half
    /// of the joint population. Counted in the overall evaluation budget;
    /// 0 skips it.
    pub prefit_evaluations: usize,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            de: DeSettings::default(),
            model: ModelSettings::fast(0.05),
            profile_amplitudes: true,
            quantum: 1e-6,
            cutoff: CHI2_CUTOFF_US,
            prefit_evaluations: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub params: FitParams,
    pub chi2_red: f64,
    pub f0_khz: f64,
    pub derived: DerivedQuantities,
    /// Best χ²_red after initialization and after each generation.
    pub history: Vec<f64>,
    pub evaluations: usize,
    pub generations: usize,
    /// Polarization curves actually computed (the rest came from the cache).
    pub propagations: usize,
    /// Evaluations spent in the RF-off prefit, included in `evaluations`.
    pub prefit_evaluations: usize,
}

type Curve = Arc<Vec<f64>>;

struct Objective<'a> {
    data: &'a FitData,
    clusters: &'a [Cluster],
    bounds: &'a FitBounds,
    settings: &'a FitSettings,
    on: Mutex<HashMap<[i64; 5], Curve>>,
    off: Mutex<HashMap<[i64; 3], Curve>>,
    propagations: AtomicUsize,
}

impl<'a> Objective<'a> {
    fn key<const N: usize>(&self, v: &[f64]) -> [i64; N] {
        std::array::from_fn(|i| (v[i] / self.settings.quantum).round() as i64)
    }

    fn snap(&self, v: f64) -> f64 {
        (v / self.settings.quantum).round() * self.settings.quantum
    }

    fn curve<const N: usize>(
        &self,
        cache: &Mutex<HashMap<[i64; N], Curve>>,
        key: [i64; N],
        params: &FitParams,
        rf_on: bool,
        times: &[f64],
    ) -> Result<Curve> {
        if let Some(c) = cache.lock().expect("cache poisoned").get(&key) {
            return Ok(c.clone());
        }
        let p = model_polarization(params, self.data.f0_khz, rf_on, self.clusters, times, &self.settings.model)?;
        self.propagations.fetch_add(1, Ordering::Relaxed);
        let c = Arc::new(p.values);
        cache.lock().expect("cache poisoned").insert(key, c.clone());
        Ok(c)
    }

    /// Reduced χ² of the RF-off spectrum alone for a set of bond scales,
    /// with the linear parameters profiled (seven free parameters).
    fn evaluate_off(&self, scales: &[f64]) -> Result<f64> {
        let mut p = self.bounds.lower;
        p.s_f12 = self.snap(scales[0]);
        p.s_li12 = self.snap(scales[1]);
        p.s_f34 = self.snap(scales[2]);
        let key = self.key(&[p.s_f12, p.s_li12, p.s_f34]);
        let off = self.curve(&self.off, key, &p, false, &self.data.off.times)?;
        let mut rows = Rows::new();
        rows.extend(&self.data.off, &off, self.settings.cutoff);
        let (_, sum, count) = profile_rows(&rows, self.bounds);
        reduce(sum, count, 7)
    }

    /// Pooled χ²_red and the full parameter set it was evaluated at.
    fn evaluate(&self, params: &FitParams) -> Result<(FitParams, f64)> {
        let mut p = *params;
        p.s_f12 = self.snap(p.s_f12);
        p.s_li12 = self.snap(p.s_li12);
        p.s_f34 = self.snap(p.s_f34);
        p.f_rel = self.snap(p.f_rel);
        p.g_rel = self.snap(p.g_rel);
        let nl = [p.s_f12, p.s_li12, p.s_f34, p.f_rel, p.g_rel];
        let on = self.curve(&self.on, self.key(&nl), &p, true, &self.data.on.times)?;
        let off = self.curve(&self.off, self.key(&nl[..3]), &p, false, &self.data.off.times)?;

        let cutoff = self.settings.cutoff;
        if self.settings.profile_amplitudes {
            let mut rows = Rows::new();
            rows.extend(&self.data.on, &on, cutoff);
            rows.extend(&self.data.off, &off, cutoff);
            let ([a0, a1, l1, a2], sum, count) = profile_rows(&rows, self.bounds);
            p.a0 = a0;
            p.a1 = a1;
            p.lambda1 = l1;
            p.a2 = a2;
            return Ok((p, reduce(sum, count, N_FREE)?));
        }
        let mut parts = [(0.0, 0); 2];
        for (k, (spec, curve)) in [(&self.data.on, &on), (&self.data.off, &off)].into_iter().enumerate() {
            for i in 0..spec.len() {
                if spec.times[i] <= cutoff && spec.valid[i] && spec.sigma[i] > 0.0 {
                    let r = (spec.asymmetry[i] - (p.a0 * curve[i] + p.background(spec.times[i]))) / spec.sigma[i];
                    parts[k].0 += r * r;
                    parts[k].1 += 1;
                }
            }
        }
        Ok((p, pooled(parts)?))
    }
}

/// Differential-evolution fit of both spectra. Candidates whose propagation
/// fails are scored +∞ rather than aborting the run.
pub fn fit(data: &FitData, clusters: &[Cluster], bounds: &FitBounds, settings: &FitSettings) -> Result<FitReport> {
    bounds.validate()?;
    if clusters.is_empty() {
        return Err(Error::InvalidArgument("no cluster orientations supplied".into()));
    }
    if !(settings.quantum > 0.0 && settings.quantum.is_finite()) {
        return Err(Error::InvalidArgument(format!("cache quantum {} must be positive", settings.quantum)));
    }
    let obj = Objective {
        data,
        clusters,
        bounds,
        settings,
        on: Mutex::new(HashMap::new()),
        off: Mutex::new(HashMap::new()),
        propagations: AtomicUsize::new(0),
    };
    let all = bounds.pairs();
    let searched: &[(f64, f64)] = if settings.profile_amplitudes { &all[..5] } else { &all };
    let to_params = |x: &[f64]| {
        let mut v = bounds.lower.to_array();
        v[..x.len()].copy_from_slice(x);
        FitParams::from_slice(&v)
    };

    let mut init = Vec::new();
    let mut prefit_evaluations = 0;
    let mut de_settings = settings.de;
    if settings.prefit_evaluations > 0 {
        let pre = DeSettings {
            max_evaluations: Some(settings.prefit_evaluations),
            seed: settings.de.seed.wrapping_add(1),
            ..settings.de
        };
        let r = differential_evolution(|x| obj.evaluate_off(x).unwrap_or(f64::INFINITY), &all[..3], &pre)?;
        prefit_evaluations = r.evaluations;
        let np = settings.de.population.unwrap_or(15 * searched.len());
        let mut order: Vec<usize> = (0..r.values.len()).collect();
        order.sort_by(|&a, &b| r.values[a].total_cmp(&r.values[b]));
        for &i in order.iter().take(np.div_ceil(2)) {
            let mut m = vec![f64::NAN; searched.len()];
            m[..3].copy_from_slice(&r.population[i]);
            init.push(m);
        }
        if let Some(b) = de_settings.max_evaluations.as_mut() {
            *b = b.saturating_sub(prefit_evaluations);
        }
    }
    let de = differential_evolution_from(
        |x| to_params(x).and_then(|p| obj.evaluate(&p)).map_or(f64::INFINITY, |(_, v)| v),
        searched,
        &de_settings,
        &init,
    )?;
    let (params, chi2_red) = obj.evaluate(&to_params(&de.best)?)?;
    Ok(FitReport {
        params,
        chi2_red,
        f0_khz: data.f0_khz,
        derived: params.derived(data.f0_khz, &clusters[0])?,
        history: de.history,
        evaluations: de.evaluations + prefit_evaluations,
        generations: de.generations,
        propagations: obj.propagations.load(Ordering::Relaxed),
        prefit_evaluations,
    })
}
