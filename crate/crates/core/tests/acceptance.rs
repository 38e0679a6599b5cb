//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line. Pass criterion numbers as
//! arguments to run a subset, e.g. `cargo test --test acceptance -- 1 4`.

use fmuf::analytic::{analytic_energies, analytic_eigenvectors, fmuf_eigensystem, FmufGeometry};
use fmuf::asymmetry::Spectrum;
use fmuf::de::DeSettings;
use fmuf::dynamics::{
    evolve, initial_state, polarization_of, EvolveOptions, Method, SplitOrder, State, StepControl,
};
use fmuf::fit::{fit, FitBounds, FitData, FitSettings};
use fmuf::hamiltonian::{
    dipole_hamiltonian, driven_hamiltonian, driven_hamiltonian_from, scale_bonds, zeeman_hamiltonian, Cluster,
    DriveSpec, FnHamiltonian, SpinSite, StaticHamiltonian,
};
use fmuf::io::{ClusterConfig, ClusterSubset};
use fmuf::linalg::{c64, eigvalsh, CMat};
use fmuf::model::{model_asymmetry, time_grid, FitParams, ModelSettings};
use fmuf::units::{gyromagnetic, khz_to_rad_per_us, larmor_rate, muon_field_for_energy, rad_per_us_to_nev};
use nalgebra::{Complex, DMatrix};
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use std::time::{Duration, Instant};

// Criterion 1
const EIGEN_REL_TOL: f64 = 1e-10;
const EIGEN_OVERLAP_TOL: f64 = 1e-10;
const EIGEN_RUNTIME: Duration = Duration::from_secs(1);
// Criterion 2
const ORACLE_TOL: f64 = 1e-6;
const ORACLE_RUNTIME: Duration = Duration::from_secs(10);
// Criterion 3
const TRACE_TOL: f64 = 1e-9;
const MIN_EIG_TOL: f64 = -1e-8;
const PURITY_TOL: f64 = 1e-6;
const ENERGY_DRIFT_TOL: f64 = 1e-8;
const CONSERVATION_RUNTIME: Duration = Duration::from_secs(300);
// Criterion 4
const RABI_RATIO: f64 = 0.02;
const RABI_REL_TOL: f64 = 0.01;
const RABI_PROPAGATION_TOL: f64 = 1e-8;
// Criterion 5
const PERIODIC_FRACTION: f64 = 0.2;
// Criterion 6
const SIG_FIGS: i32 = 4;
// Criterion 7
const NOISE_SIGMA: f64 = 0.3;
const A0_REL_TOL: f64 = 0.05;
const F_REL_REL_TOL: f64 = 0.01;
const SCALE_REL_TOL: f64 = 0.02;
const RAW_BIN: f64 = 0.016;
const PACK: usize = 16;
const FIT_T_MAX: f64 = 12.5;
const FIT_BUDGET: usize = 2000;
const FIT_POPULATION: usize = 15;
const FIT_PREFIT: usize = 450;
const FIT_CHI2_SPREAD: f64 = 0.005;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn clusters() -> Vec<Cluster> {
    ClusterConfig::liyf4().clusters().expect("built-in cluster table")
}

/// Settings used wherever a driven reference curve is needed: fourth-order
/// splitting with substeps of at most T/40 and 0.05 μs.
fn reference_settings() -> ModelSettings {
    let mut s = ModelSettings::default();
    s.evolve = s.evolve.with_control(StepControl::Fixed { max_substep: 0.05 });
    s
}

fn to_nalgebra(m: &CMat) -> DMatrix<Complex<f64>> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// (1/N) Σ |⟨k|σ_z|l⟩|² cos((E_k − E_l)t), with the muon as the leading factor.
fn nalgebra_spectral_polarization(h: &CMat, times: &[f64]) -> Vec<f64> {
    let n = h.nrows();
    let eig = to_nalgebra(h).symmetric_eigen();
    let sz = DMatrix::from_fn(n, n, |i, j| {
        let v = if i == j { if i < n / 2 { 1.0 } else { -1.0 } } else { 0.0 };
        Complex::new(v, 0.0)
    });
    let v = &eig.eigenvectors;
    let o = v.adjoint() * sz * v;
    let mut lines = Vec::with_capacity(n * n);
    for k in 0..n {
        for l in 0..n {
            lines.push((eig.eigenvalues[k] - eig.eigenvalues[l], o[(k, l)].norm_sqr()));
        }
    }
    times
        .iter()
        .map(|&t| lines.iter().map(|(w, a)| a * (w * t).cos()).sum::<f64>() / n as f64)
        .collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let levels = fmuf_eigensystem(&FmufGeometry::linear(1.2)).expect("eigensystem");
    let reference = analytic_energies();
    let vectors = analytic_eigenvectors();
    let elapsed = start.elapsed();
    if levels.len() != 4 || levels.iter().any(|l| l.degeneracy != 2) {
        let found: Vec<_> = levels.iter().map(|l| (l.energy, l.degeneracy)).collect();
        return outcome(false, format!("level structure {found:?}"));
    }
    let energy_err = levels
        .iter()
        .zip(reference)
        .map(|(l, e)| (l.energy - e).abs() / e.abs().max(1.0))
        .fold(0.0, f64::max);
    let min_overlap = vectors
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let state: Vec<c64> = v.iter().map(|&x| c64::new(x, 0.0)).collect();
            levels[k / 2].overlap(&state)
        })
        .fold(1.0, f64::min);
    let pass = energy_err < EIGEN_REL_TOL && min_overlap > 1.0 - EIGEN_OVERLAP_TOL && elapsed < EIGEN_RUNTIME;
    outcome(
        pass,
        format!("max energy error {energy_err:.2e} (units of omega_D), min overlap 1 - {:.2e}, {elapsed:.2?}", 1.0 - min_overlap),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let times = time_grid(15.0, 0.01).unwrap();
    let scales = FitParams::published().scales();
    let mut worst = 0.0f64;
    for cluster in clusters() {
        let small = ClusterSubset::MuF2.apply(&scale_bonds(&cluster, scales).unwrap()).unwrap();
        let h0 = dipole_hamiltonian(&small).unwrap();
        let oracle = nalgebra_spectral_polarization(&h0, &times);
        let layout = small.layout().clone();
        let rho0 = initial_state(&layout, [0.0, 0.0, 1.0]).unwrap();
        let check = |h: &dyn fmuf::hamiltonian::TimeDependentHamiltonian, opts: EvolveOptions| {
            let mut err = 0.0f64;
            evolve(h, &rho0, &times, &opts, |i, _, s| {
                err = err.max((polarization_of(s, &layout, [0.0, 0.0, 1.0])? - oracle[i]).abs());
                Ok(())
            })
            .unwrap();
            err
        };
        worst = worst.max(check(&StaticHamiltonian(h0.clone()), EvolveOptions::default()));
        let stepped = FnHamiltonian { dim: h0.nrows(), f: |_| h0.clone(), period: None };
        worst = worst.max(check(&stepped, EvolveOptions::default().with_tol(1e-9)));
    }
    let elapsed = start.elapsed();
    outcome(
        worst < ORACLE_TOL && elapsed < ORACLE_RUNTIME,
        format!("max |dP| {worst:.2e} over two orientations, exact and Magnus paths, {elapsed:.2?}"),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let params = FitParams::published();
    let cluster = scale_bonds(&clusters()[0], params.scales()).unwrap();
    let layout = cluster.layout().clone();
    let rho0 = initial_state(&layout, [0.0, 0.0, 1.0]).unwrap();
    let purity0 = rho0.purity();
    let times = time_grid(15.0, 0.25).unwrap();

    let driven = driven_hamiltonian(&cluster, params.drive(550.0, true, 0.0)).unwrap();
    let opts = reference_settings().evolve;
    let (mut trace_err, mut min_eig, mut purity_err) = (0.0f64, f64::INFINITY, 0.0f64);
    let run = evolve(&driven, &rho0, &times, &opts, |_, _, s| {
        let rho = s.to_density();
        trace_err = trace_err.max((rho.trace() - 1.0).abs());
        purity_err = purity_err.max((rho.purity() - purity0).abs());
        min_eig = min_eig.min(rho.min_eigenvalue()?);
        Ok(())
    });
    if let Err(e) = run {
        return outcome(false, format!("driven evolution failed: {e}"));
    }

    // Tr ρ(0)H₀ vanishes identically, so the drift is measured against the
    // spectral radius of H₀.
    let h0 = driven.h0().clone();
    let scale = eigvalsh(h0.as_ref()).unwrap().iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let e0 = rho0.expectation(h0.as_ref());
    let mut drift = 0.0f64;
    evolve(&StaticHamiltonian(h0.clone()), &rho0, &times, &EvolveOptions::default(), |_, _, s| {
        let State::Density(m) = s else { unreachable!() };
        let e = fmuf::linalg::trace_product(m.as_ref(), h0.as_ref()).re;
        drift = drift.max((e - e0).abs() / scale);
        Ok(())
    })
    .unwrap();
    let elapsed = start.elapsed();
    let pass = trace_err < TRACE_TOL
        && min_eig > MIN_EIG_TOL
        && purity_err < PURITY_TOL
        && drift < ENERGY_DRIFT_TOL
        && elapsed < CONSERVATION_RUNTIME;
    outcome(
        pass,
        format!(
            "|Tr rho - 1| {trace_err:.1e}, min eigenvalue {min_eig:.1e}, purity change {purity_err:.1e}, \
             RF-off energy drift {drift:.1e}, {elapsed:.1?}"
        ),
    )
}

fn criterion_4() -> Outcome {
    let muon = Cluster::new(vec![SpinSite::new("mu", 0.5, gyromagnetic::MUON, [0.0; 3])], 1).unwrap();
    let b_z = 10.0;
    let omega0 = larmor_rate(gyromagnetic::MUON) * b_z;
    let b_y = RABI_RATIO * b_z;
    let predicted = larmor_rate(gyromagnetic::MUON) * b_y / 2.0;
    let h0 = zeeman_hamiltonian(&muon, [0.0, 0.0, b_z]).unwrap();
    let h = driven_hamiltonian_from(&muon, h0, DriveSpec::new(b_y, omega0)).unwrap();
    let period = 2.0 * std::f64::consts::PI / predicted;
    let times = time_grid(period, period / 2000.0).unwrap();
    let rho0 = initial_state(muon.layout(), [0.0, 0.0, 1.0]).unwrap();
    let mut up = Vec::with_capacity(times.len());
    let opts = EvolveOptions::default().with_tol(RABI_PROPAGATION_TOL);
    let run = evolve(&h, &rho0, &times, &opts, |_, _, s| {
        up.push(0.5 * (1.0 + polarization_of(s, muon.layout(), [0.0, 0.0, 1.0])?));
        Ok(())
    });
    if let Err(e) = run {
        return outcome(false, format!("propagation failed: {e}"));
    }

    // Least-squares frequency of cos²(Ωt/2) over the first period.
    let cost = |w: f64| times.iter().zip(&up).map(|(t, p)| (p - (0.5 * w * t).cos().powi(2)).powi(2)).sum::<f64>();
    let (mut lo, mut hi) = (0.8 * predicted, 1.2 * predicted);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    while hi - lo > 1e-12 * predicted {
        let (a, b) = (hi - g * (hi - lo), lo + g * (hi - lo));
        if cost(a) < cost(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let measured = 0.5 * (lo + hi);
    let min_up = up.iter().cloned().fold(1.0, f64::min);
    let rel = (measured - predicted).abs() / predicted;
    outcome(
        rel < RABI_REL_TOL && min_up < 0.05,
        format!("Omega {measured:.6} vs gamma*B_y/2 = {predicted:.6} rad/us ({:.3}%), min population {min_up:.1e}", 100.0 * rel),
    )
}

fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    t.windows(2).zip(y.windows(2)).map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1])).sum()
}

/// Mean of y over [a, b] with linear interpolation of the samples.
fn window_mean(t: &[f64], y: &[f64], a: f64, b: f64) -> f64 {
    let interp = |x: f64| {
        let k = t.partition_point(|&s| s <= x).clamp(1, t.len() - 1);
        let w = (x - t[k - 1]) / (t[k] - t[k - 1]);
        y[k - 1] + w * (y[k] - y[k - 1])
    };
    let mut xs = vec![a];
    xs.extend(t.iter().copied().filter(|&s| s > a && s < b));
    xs.push(b);
    let ys: Vec<f64> = xs.iter().map(|&x| interp(x)).collect();
    trapezoid(&xs, &ys) / (b - a)
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let params = FitParams::published();
    let cl = clusters();
    let times = time_grid(12.5, 0.05).unwrap();
    let settings = reference_settings();
    let diff = |f0: f64| -> Vec<f64> {
        let on = model_asymmetry(&params, f0, true, &cl, &times, &settings).unwrap();
        let off = model_asymmetry(&params, f0, false, &cl, &times, &settings).unwrap();
        on.asymmetry.iter().zip(&off.asymmetry).map(|(a, b)| a - b).collect()
    };
    let (d_on, d_off) = (diff(550.0), diff(825.0));
    let abs = |d: &[f64]| d.iter().map(|v| v.abs()).collect::<Vec<_>>();
    let (i_on, i_off) = (trapezoid(&times, &abs(&d_on)), trapezoid(&times, &abs(&d_off)));
    let rms_on = (trapezoid(&times, &d_on.iter().map(|v| v * v).collect::<Vec<_>>()) / 12.5).sqrt();

    let period = 2.0 * std::f64::consts::PI / params.omega_c(825.0);
    let windows = (12.5 / period).floor() as usize;
    let worst = (0..windows)
        .map(|k| window_mean(&times, &d_off, k as f64 * period, (k + 1) as f64 * period).abs())
        .fold(0.0, f64::max);
    let ratio = worst / rms_on;
    outcome(
        i_on > i_off && ratio < PERIODIC_FRACTION,
        format!(
            "integral |dA| {i_on:.3} (550 kHz) vs {i_off:.3} (825 kHz) %.us, worst period-mean at 825 kHz {:.1}% of on-resonance RMS, {:.1?}",
            100.0 * ratio,
            start.elapsed()
        ),
    )
}

/// Half-width of the rounding interval of a value quoted to `decimals`.
fn half_ulp(decimals: i32) -> f64 {
    0.5 * 10f64.powi(-decimals)
}

fn round_sig(x: f64, sig: i32) -> f64 {
    let p = sig - 1 - x.abs().log10().floor() as i32;
    (x * 10f64.powi(p)).round() / 10f64.powi(p)
}

struct Conversion {
    name: &'static str,
    computed: f64,
    range: (f64, f64),
    published: f64,
    decimals: i32,
}

impl Conversion {
    /// Agrees when the range reachable from the rounded inputs meets the
    /// rounding interval of the quoted output.
    fn consistent(&self) -> bool {
        let h = half_ulp(self.decimals);
        self.range.0 <= self.published + h && self.range.1 >= self.published - h
    }

    fn same_sig_figs(&self) -> bool {
        round_sig(self.computed, SIG_FIGS) == round_sig(self.published, SIG_FIGS)
    }
}

fn criterion_6() -> Outcome {
    let p = FitParams::published();
    let cl = clusters();
    let d = p.derived(550.0, &cl[0]).unwrap();
    let energy = |f_khz: f64| rad_per_us_to_nev(khz_to_rad_per_us(f_khz));
    let (f_rel, g_rel) = ((p.f_rel - half_ulp(4), p.f_rel + half_ulp(4)), (p.g_rel - half_ulp(4), p.g_rel + half_ulp(4)));
    let (f_c, e_c, g_c) = (520.9730, 2.1546, 0.1671);
    let e_range = (energy(f_c - half_ulp(4)), energy(f_c + half_ulp(4)));
    let g_range = (g_rel.0 * e_range.0, g_rel.1 * e_range.1);
    let gc_range = (g_c - half_ulp(4), g_c + half_ulp(4));
    let checks = [
        Conversion { name: "f_c", computed: d.f_c_khz, range: (550.0 * f_rel.0, 550.0 * f_rel.1), published: f_c, decimals: 4 },
        Conversion { name: "E_c", computed: energy(f_c), range: e_range, published: e_c, decimals: 4 },
        Conversion { name: "g_c", computed: p.g_rel * energy(f_c), range: g_range, published: g_c, decimals: 4 },
        Conversion {
            name: "B_y",
            computed: muon_field_for_energy(g_c),
            range: (muon_field_for_energy(gc_range.0), muon_field_for_energy(gc_range.1)),
            published: 0.2980,
            decimals: 4,
        },
    ];
    let pass = checks.iter().all(Conversion::consistent);
    let detail = checks
        .iter()
        .map(|c| {
            format!(
                "{} {:.5} [{:.5}, {:.5}] vs {} ({}{})",
                c.name,
                c.computed,
                c.range.0,
                c.range.1,
                c.published,
                if c.consistent() { "within rounding" } else { "inconsistent" },
                if c.same_sig_figs() { ", same 4 s.f." } else { ", differs in 4th s.f." }
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    outcome(pass, detail)
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let truth = FitParams::published();
    let cl = clusters();
    // Noise is drawn per spectrometer bin; the fit sees bins packed 16:1.
    let times = time_grid(FIT_T_MAX, RAW_BIN).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let noise = Normal::new(0.0, NOISE_SIGMA).unwrap();
    let mut synth = |rf_on: bool| {
        let clean = model_asymmetry(&truth, 550.0, rf_on, &cl, &times, &reference_settings()).unwrap();
        let noisy = clean.asymmetry.iter().map(|a| a + noise.sample(&mut rng)).collect();
        Spectrum::new(times.clone(), noisy, vec![NOISE_SIGMA; times.len()]).unwrap().pack(PACK).unwrap()
    };
    let data = FitData::new(synth(true), synth(false), 550.0).unwrap();
    let bin = PACK as f64 * RAW_BIN;
    let mut model = ModelSettings::fast(1.01 * bin);
    model.evolve.method = Method::Split(SplitOrder::WeakDrive);
    model.bin_width = bin;
    let settings = FitSettings {
        de: DeSettings {
            population: Some(FIT_POPULATION),
            max_evaluations: Some(FIT_BUDGET),
            seed: 7,
            atol: FIT_CHI2_SPREAD,
            ..Default::default()
        },
        model,
        prefit_evaluations: FIT_PREFIT,
        ..Default::default()
    };
    let report = match fit(&data, &cl, &FitBounds::default(), &settings) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("fit failed: {e}")),
    };
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    let (r, t) = (&report.params, &truth);
    let scale_err = [rel(r.s_f12, t.s_f12), rel(r.s_li12, t.s_li12), rel(r.s_f34, t.s_f34)];
    let monotone = report.history.windows(2).all(|w| w[1] <= w[0]);
    let pass = rel(r.a0, t.a0) < A0_REL_TOL
        && rel(r.f_rel, t.f_rel) < F_REL_REL_TOL
        && scale_err.iter().all(|&e| e < SCALE_REL_TOL)
        && monotone
        && report.evaluations <= FIT_BUDGET;
    outcome(
        pass,
        format!(
            "A0 {:.2}%, f_rel {:.2}%, scales {:.2}/{:.2}/{:.2}%, chi2_red {:.3}, monotone history {monotone}, \
             {} evaluations ({} prefit), {:.0?}",
            100.0 * rel(r.a0, t.a0),
            100.0 * rel(r.f_rel, t.f_rel),
            100.0 * scale_err[0],
            100.0 * scale_err[1],
            100.0 * scale_err[2],
            report.chi2_red,
            report.evaluations,
            report.prefit_evaluations,
            start.elapsed()
        ),
    )
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 7] = [
        (1, "analytic eigensystem", criterion_1),
        (2, "oracle equivalence", criterion_2),
        (3, "conservation", criterion_3),
        (4, "Rabi oscillation", criterion_4),
        (5, "resonance selectivity", criterion_5),
        (6, "unit conversions", criterion_6),
        (7, "fit recovery", criterion_7),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let o = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        println!("criterion {id} {name}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
