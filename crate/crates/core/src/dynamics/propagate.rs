//! Time stepping for dρ/dt = −i[H(t), ρ].
//!
//! Every step is an exact unitary: either the exponential of a fourth-order
//! Magnus generator, or a symmetric splitting into exp(−iH_s h) and
//! closed-form single-site drive rotations. Errors are controlled per output
//! interval by step doubling.

use super::DensityMatrix;
use crate::hamiltonian::{SplitForm, TimeDependentHamiltonian};
use crate::linalg::{c64, eigh, hermitian_defect, max_abs, mul, symmetrize, trace, CMat, Eigh, I};
use crate::spin::{apply_site_operator, HilbertLayout};
use crate::{Error, Result};
use faer::MatRef;
use std::collections::HashMap;

/// What is being propagated.
#[derive(Debug, Clone)]
pub enum State {
    /// The full N×N density matrix.
    Density(CMat),
    /// A factor K with ρ = K·K†.
    Kets(CMat),
}

impl State {
    pub fn dim(&self) -> usize {
        match self {
            State::Density(m) | State::Kets(m) => m.nrows(),
        }
    }

    pub fn to_density(&self) -> DensityMatrix {
        match self {
            State::Density(m) => DensityMatrix::new_unchecked(m.clone()),
            State::Kets(k) => DensityMatrix::from_kets(k.as_ref()),
        }
    }

    /// Factorizes ρ through its eigendecomposition, dropping null directions.
    pub fn kets_from_density(rho: &DensityMatrix) -> Result<State> {
        let e = eigh(rho.matrix().as_ref())?;
        let top = e.values.iter().fold(0.0f64, |m, &v| m.max(v));
        let keep: Vec<usize> = (0..e.values.len()).filter(|&k| e.values[k] > 1e-14 * top).collect();
        let n = rho.dim();
        let k = CMat::from_fn(n, keep.len(), |i, c| e.vectors[(i, keep[c])] * e.values[keep[c]].sqrt());
        Ok(State::Kets(k))
    }

    fn apply_unitary(&mut self, u: MatRef<'_, c64>) {
        match self {
            State::Kets(k) => *k = mul(u, k.as_ref()),
            State::Density(rho) => {
                let left = mul(u, rho.as_ref());
                *rho = mul(left.as_ref(), u.adjoint());
            }
        }
    }

    fn apply_site_unitary(&mut self, u: MatRef<'_, c64>, site: usize, layout: &HilbertLayout) -> Result<()> {
        match self {
            State::Kets(k) => apply_site_operator(u, site, layout, k),
            State::Density(rho) => {
                apply_site_operator(u, site, layout, rho)?;
                let mut t = rho.adjoint().to_owned();
                apply_site_operator(u, site, layout, &mut t)?;
                *rho = t.adjoint().to_owned();
                Ok(())
            }
        }
    }

    /// Upper bound on |Tr[O(ρ_a − ρ_b)]| over ‖O‖ ≤ 1.
    fn distance(&self, other: &State) -> f64 {
        let frob = |a: &CMat, b: &CMat| (a - b).norm_l2();
        match (self, other) {
            (State::Kets(a), State::Kets(b)) => {
                (a.norm_l2() + b.norm_l2()) * frob(a, b)
            }
            (State::Density(a), State::Density(b)) => (a.nrows() as f64).sqrt() * frob(a, b),
            _ => f64::INFINITY,
        }
    }

    fn restore(&mut self) {
        if let State::Density(rho) = self {
            if hermitian_defect(rho.as_ref()) > 1e-12 {
                symmetrize(rho);
            }
            let tr = trace(rho.as_ref()).re;
            if (tr - 1.0).abs() > 1e-12 {
                *rho = crate::linalg::scaled(rho.as_ref(), c64::new(1.0 / tr, 0.0));
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitOrder {
    /// Second order, one exp(−iH_s h) per step.
    Strang,
    /// Fourth-order triple-jump composition of Strang steps.
    Yoshida4,
    /// Drive kicks at t, t + h/2 and t + h with Simpson weights around two
    /// half steps of H_s. The error is O(εh⁴ + ε²h²) for a drive of
    /// strength ε, so for weak drives it is close to fourth order at the
    /// cost of two static exponentials per step.
    WeakDrive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Exponential of the two-point Gauss–Legendre Magnus generator.
    Magnus4,
    /// Static/drive splitting; requires a Hamiltonian with a split form.
    Split(SplitOrder),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepControl {
    /// Step doubling against `tol`.
    Adaptive,
    /// Uniform substeps no longer than the given length (μs).
    Fixed { max_substep: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    /// Target accuracy for any observable with unit operator norm.
    pub tol: f64,
    pub method: Method,
    pub control: StepControl,
    /// Substeps never exceed this fraction of the drive period.
    pub period_fraction: f64,
    /// Upper limit on substeps per output interval before giving up.
    pub max_substeps: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            method: Method::Magnus4,
            control: StepControl::Adaptive,
            period_fraction: 1.0 / 40.0,
            max_substeps: 1 << 14,
        }
    }
}

impl EvolveOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_control(mut self, control: StepControl) -> Self {
        self.control = control;
        self
    }

    fn order(&self) -> i32 {
        match self.method {
            Method::Magnus4 | Method::Split(SplitOrder::Yoshida4) => 4,
            Method::Split(SplitOrder::Strang) | Method::Split(SplitOrder::WeakDrive) => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvolveStats {
    pub substeps: usize,
    pub rejected_intervals: usize,
    pub exponentials: usize,
}

const STEP_KEY_SCALE: f64 = (1u64 << 40) as f64;
const GAUSS_OFFSET: f64 = 0.288_675_134_594_812_9; // √3/6
const YOSHIDA_W1: f64 = 1.351_207_191_959_657_8; // 1/(2 − 2^{1/3})
const YOSHIDA_W0: f64 = -1.702_414_383_919_315_5; // 1 − 2·w1

/// Cached exponentials and local eigensystems shared by all steps.
struct Stepper<'a, H: TimeDependentHamiltonian + ?Sized> {
    h: &'a H,
    method: Method,
    split: Option<SplitForm<'a>>,
    static_eig: Option<Eigh>,
    local_eigs: Vec<(usize, Eigh)>,
    cache: HashMap<i64, CMat>,
    stats: EvolveStats,
}

impl<'a, H: TimeDependentHamiltonian + ?Sized> Stepper<'a, H> {
    fn new(h: &'a H, method: Method) -> Result<Self> {
        let split = match method {
            Method::Split(_) if !h.is_static() => Some(h.split().ok_or_else(|| {
                Error::InvalidArgument("splitting requested for a Hamiltonian without a split form".into())
            })?),
            _ => None,
        };
        let mut static_eig = None;
        let mut local_eigs = Vec::new();
        if h.is_static() {
            let h0 = h.at(0.0);
            check_hermitian(&h0)?;
            static_eig = Some(eigh(h0.as_ref())?);
        } else if let Some(s) = &split {
            check_hermitian(s.static_part)?;
            static_eig = Some(eigh(s.static_part.as_ref())?);
            for (site, op) in s.local_terms {
                check_hermitian(op)?;
                local_eigs.push((*site, eigh(op.as_ref())?));
            }
        }
        Ok(Self { h, method, split, static_eig, local_eigs, cache: HashMap::new(), stats: EvolveStats::default() })
    }

    /// exp(−iH_s h), shared by all steps whose lengths agree to 2⁻⁴⁰ μs;
    /// grid spacings computed as differences differ in their last bits.
    fn static_propagator(&mut self, h: f64) -> &CMat {
        let key = (h * STEP_KEY_SCALE).round() as i64;
        if !self.cache.contains_key(&key) {
            if self.cache.len() > 16 {
                self.cache.clear();
            }
            let u = self.static_eig.as_ref().expect("static part").propagator(h);
            self.stats.exponentials += 1;
            self.cache.insert(key, u);
        }
        &self.cache[&key]
    }

    /// Local drive flow from time a to b.
    fn drive_flow(&self, state: &mut State, a: f64, b: f64) -> Result<()> {
        let split = self.split.as_ref().expect("split form");
        let theta = (split.envelope_integral)(a, b);
        if theta == 0.0 {
            return Ok(());
        }
        for (site, e) in &self.local_eigs {
            let u = e.propagator(theta);
            state.apply_site_unitary(u.as_ref(), *site, split.layout)?;
        }
        Ok(())
    }

    /// Kick by the drive frozen at time t for a duration w.
    fn drive_kick(&self, state: &mut State, t: f64, w: f64) -> Result<()> {
        let split = self.split.as_ref().expect("split form");
        let theta = (split.envelope)(t) * w;
        if theta == 0.0 {
            return Ok(());
        }
        for (site, e) in &self.local_eigs {
            let u = e.propagator(theta);
            state.apply_site_unitary(u.as_ref(), *site, split.layout)?;
        }
        Ok(())
    }

    fn weak_drive(&mut self, state: &mut State, t: f64, h: f64) -> Result<()> {
        let u = self.static_propagator(0.5 * h).clone();
        self.drive_kick(state, t, h / 6.0)?;
        state.apply_unitary(u.as_ref());
        self.drive_kick(state, t + 0.5 * h, 2.0 * h / 3.0)?;
        state.apply_unitary(u.as_ref());
        self.drive_kick(state, t + h, h / 6.0)
    }

    fn strang(&mut self, state: &mut State, t: f64, h: f64) -> Result<()> {
        self.drive_flow(state, t, t + 0.5 * h)?;
        let u = self.static_propagator(h).clone();
        state.apply_unitary(u.as_ref());
        self.drive_flow(state, t + 0.5 * h, t + h)
    }

    fn step(&mut self, state: &mut State, t: f64, h: f64) -> Result<()> {
        self.stats.substeps += 1;
        if self.h.is_static() {
            let u = self.static_propagator(h).clone();
            state.apply_unitary(u.as_ref());
            return Ok(());
        }
        match self.method {
            Method::Magnus4 => {
                let h1 = self.h.at(t + (0.5 - GAUSS_OFFSET) * h);
                let h2 = self.h.at(t + (0.5 + GAUSS_OFFSET) * h);
                check_hermitian(&h1)?;
                // H_eff = (H1 + H2)/2 − i(√3/12)·h·[H2, H1]
                let comm = crate::linalg::commutator(h2.as_ref(), h1.as_ref());
                let mut heff = &h1 + &h2;
                heff = crate::linalg::scaled(heff.as_ref(), c64::new(0.5, 0.0));
                crate::linalg::add_scaled(&mut heff, comm.as_ref(), -I * (0.5 * GAUSS_OFFSET * h));
                symmetrize(&mut heff);
                let u = eigh(heff.as_ref())?.propagator(h);
                self.stats.exponentials += 1;
                state.apply_unitary(u.as_ref());
                Ok(())
            }
            Method::Split(SplitOrder::Strang) => self.strang(state, t, h),
            Method::Split(SplitOrder::WeakDrive) => self.weak_drive(state, t, h),
            Method::Split(SplitOrder::Yoshida4) => {
                let (h1, h0) = (YOSHIDA_W1 * h, YOSHIDA_W0 * h);
                self.strang(state, t, h1)?;
                self.strang(state, t + h1, h0)?;
                self.strang(state, t + h1 + h0, h1)
            }
        }
    }

    fn run(&mut self, state: &State, a: f64, b: f64, n: usize) -> Result<State> {
        let mut s = state.clone();
        let h = (b - a) / n as f64;
        for k in 0..n {
            self.step(&mut s, a + k as f64 * h, h)?;
            s.restore();
        }
        Ok(s)
    }
}

fn check_hermitian(h: &CMat) -> Result<()> {
    let defect = hermitian_defect(h.as_ref());
    if defect > 1e-10 * (1.0 + max_abs(h.as_ref())) {
        return Err(Error::NonHermitian(defect));
    }
    Ok(())
}

fn check_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidArgument("empty time grid".into()));
    }
    if times[0] != 0.0 {
        return Err(Error::InvalidArgument(format!("time grid starts at {} instead of 0", times[0])));
    }
    if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("time grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// Propagates `state0` through `times` (starting at 0), calling `observe`
/// with the state at every grid point.
pub fn evolve_state<H: TimeDependentHamiltonian + ?Sized>(
    h: &H,
    state0: State,
    times: &[f64],
    opts: &EvolveOptions,
    mut observe: impl FnMut(usize, f64, &State) -> Result<()>,
) -> Result<EvolveStats> {
    check_grid(times)?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {} must be positive", opts.tol)));
    }
    if state0.dim() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), found: state0.dim() });
    }
    let mut stepper = Stepper::new(h, opts.method)?;
    let mut state = state0;
    observe(0, times[0], &state)?;
    let total = times[times.len() - 1] - times[0];
    let cap = match h.period() {
        Some(p) if !h.is_static() => p * opts.period_fraction,
        _ => f64::INFINITY,
    };
    let roundoff = 64.0 * f64::EPSILON * (h.dim() as f64).sqrt();
    let mut n_hint = 1usize;
    for (i, w) in times.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let span = b - a;
        let n_min = ((span / cap).ceil() as usize).max(1);
        if h.is_static() {
            state = stepper.run(&state, a, b, 1)?;
        } else {
            match opts.control {
                StepControl::Fixed { max_substep } => {
                    let n = n_min.max((span / max_substep).ceil() as usize);
                    state = stepper.run(&state, a, b, n)?;
                }
                StepControl::Adaptive => {
                    let allowance = (opts.tol * span / total).max(roundoff);
                    let mut n = n_hint.max(n_min);
                    let mut coarse = stepper.run(&state, a, b, n)?;
                    loop {
                        let fine = stepper.run(&state, a, b, 2 * n)?;
                        let err = coarse.distance(&fine);
                        if err <= allowance {
                            state = fine;
                            let shrink = 2f64.powi(opts.order() + 1);
                            n_hint = if err * shrink < allowance { (n / 2).max(1) } else { n };
                            break;
                        }
                        stepper.stats.rejected_intervals += 1;
                        n *= 2;
                        if 2 * n > opts.max_substeps {
                            return Err(Error::StepUnderflow { time: a, tol: opts.tol });
                        }
                        coarse = fine;
                    }
                }
            }
        }
        observe(i + 1, b, &state)?;
    }
    Ok(stepper.stats)
}

/// As [`evolve_state`], starting from a density matrix propagated directly.
pub fn evolve<H: TimeDependentHamiltonian + ?Sized>(
    h: &H,
    rho0: &DensityMatrix,
    times: &[f64],
    opts: &EvolveOptions,
    observe: impl FnMut(usize, f64, &State) -> Result<()>,
) -> Result<EvolveStats> {
    evolve_state(h, State::Density(rho0.matrix().clone()), times, opts, observe)
}

/// ρ(t) at every grid point.
pub fn evolve_collect<H: TimeDependentHamiltonian + ?Sized>(
    h: &H,
    rho0: &DensityMatrix,
    times: &[f64],
    opts: &EvolveOptions,
) -> Result<Vec<DensityMatrix>> {
    let mut out = Vec::with_capacity(times.len());
    evolve(h, rho0, times, opts, |_, _, s| {
        out.push(s.to_density());
        Ok(())
    })?;
    Ok(out)
}
