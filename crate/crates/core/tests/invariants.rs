use fmuf::analytic::{drive_element, drive_operator, levels_of, levels_vs_field, omega_d};
use fmuf::asymmetry::{chi_squared_reduced, difference_spectrum, Spectrum};
use fmuf::de::{differential_evolution, DeSettings};
use fmuf::dynamics::PolarizationSeries;
use fmuf::hamiltonian::{dipole_hamiltonian, Cluster, PairSelection, SpinSite};
use fmuf::linalg::{c64, commutator, eigvalsh, hermitian_defect, max_abs, mul, trace, CMat};
use fmuf::model::{apply_asymmetry_model, FitParams};
use fmuf::spin::{angular_momentum, embed, HilbertLayout};
use fmuf::units::gyromagnetic;
use nalgebra::{Matrix3, Rotation3, Vector3};
use proptest::prelude::*;
use std::sync::Mutex;

fn position() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-3.0..3.0f64)
}

/// μ, F, Li (spin 3/2) at well separated random positions.
fn small_cluster() -> impl Strategy<Value = Cluster> {
    (position(), position()).prop_filter_map("sites too close", |(f, li)| {
        let (f, li) = (Vector3::from(f), Vector3::from(li));
        if f.norm() < 0.8 || li.norm() < 0.8 || (f - li).norm() < 0.8 {
            return None;
        }
        Cluster::new(
            vec![
                SpinSite::new("mu", 0.5, gyromagnetic::MUON, [0.0; 3]),
                SpinSite::new("F1", 0.5, gyromagnetic::FLUORINE_19, f.into()),
                SpinSite::new("Li1", 1.5, gyromagnetic::LITHIUM_7, li.into()),
            ],
            1,
        )
        .ok()
    })
}

fn spectrum(h: &CMat) -> Vec<f64> {
    eigvalsh(h.as_ref()).unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn random_hermitian(d: usize, v: &[f64]) -> CMat {
    CMat::from_fn(d, d, |r, c| {
        let (i, j) = (r.min(c), r.max(c));
        let re = v[(i * d + j) % v.len()];
        let im = if i == j { 0.0 } else { v[(j * d + i + 7) % v.len()] };
        if r <= c {
            c64::new(re, im)
        } else {
            c64::new(re, -im)
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spin_algebra(twice_j in 1usize..=9) {
        let j = twice_j as f64 / 2.0;
        let s = angular_momentum(j).unwrap();
        let c = commutator(s.jx.as_ref(), s.jy.as_ref());
        let d = s.dim();
        let defect = CMat::from_fn(d, d, |r, k| c[(r, k)] - c64::new(0.0, 1.0) * s.jz[(r, k)]);
        prop_assert!(max_abs(defect.as_ref()) < 1e-12);
        let sq = |m: &CMat| mul(m.as_ref(), m.as_ref());
        let (x2, y2, z2) = (sq(&s.jx), sq(&s.jy), sq(&s.jz));
        for r in 0..d {
            for k in 0..d {
                let expect = if r == k { j * (j + 1.0) } else { 0.0 };
                prop_assert!((x2[(r, k)] + y2[(r, k)] + z2[(r, k)] - c64::new(expect, 0.0)).norm() < 1e-12);
            }
        }
        let ev = spectrum(&s.jz);
        for (m, e) in ev.iter().enumerate() {
            prop_assert!((e - (-j + m as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn embedding_trace_and_spectrum(dims in prop::collection::vec(2usize..=4, 1..=3), site in 0usize..3, v in prop::collection::vec(-1.0..1.0f64, 16)) {
        let site = site % dims.len();
        let layout = HilbertLayout::new(dims.clone()).unwrap();
        let op = random_hermitian(dims[site], &v);
        let big = embed(op.as_ref(), site, &layout).unwrap();
        let rest = layout.total() / dims[site];
        prop_assert!((trace(big.as_ref()) - trace(op.as_ref()) * rest as f64).norm() < 1e-12);
        prop_assert!(hermitian_defect(big.as_ref()) < 1e-14);
        let mut small: Vec<f64> = spectrum(&op).into_iter().flat_map(|e| std::iter::repeat(e).take(rest)).collect();
        small.sort_by(f64::total_cmp);
        prop_assert!(max_diff(&small, &spectrum(&big)) < 1e-12);
    }

    #[test]
    fn disjoint_embeddings_commute(v in prop::collection::vec(-1.0..1.0f64, 16)) {
        let layout = HilbertLayout::new(vec![2, 4, 2]).unwrap();
        let a = embed(random_hermitian(2, &v).as_ref(), 0, &layout).unwrap();
        let b = embed(random_hermitian(4, &v[3..]).as_ref(), 1, &layout).unwrap();
        prop_assert!(max_abs(commutator(a.as_ref(), b.as_ref()).as_ref()) < 1e-13);
    }

    #[test]
    fn dipole_hamiltonian_is_hermitian_and_traceless(c in small_cluster()) {
        let h = dipole_hamiltonian(&c).unwrap();
        let scale = max_abs(h.as_ref());
        prop_assert!(hermitian_defect(h.as_ref()) <= 1e-10 * scale);
        prop_assert!(trace(h.as_ref()).norm() <= 1e-10 * scale * h.nrows() as f64);
    }

    #[test]
    fn translation_leaves_h0_unchanged(c in small_cluster(), shift in position()) {
        let h = dipole_hamiltonian(&c).unwrap();
        let moved = dipole_hamiltonian(&c.translated(shift.into())).unwrap();
        let d = CMat::from_fn(h.nrows(), h.ncols(), |r, k| h[(r, k)] - moved[(r, k)]);
        prop_assert!(max_abs(d.as_ref()) <= 1e-12 * max_abs(h.as_ref()));
    }

    #[test]
    fn rotation_about_z_keeps_spectrum(c in small_cluster(), angle in 0.0..std::f64::consts::TAU) {
        let rot: Matrix3<f64> = Rotation3::from_axis_angle(&Vector3::z_axis(), angle).into_inner();
        let a = spectrum(&dipole_hamiltonian(&c).unwrap());
        let b = spectrum(&dipole_hamiltonian(&c.rotated(&rot)).unwrap());
        prop_assert!(max_diff(&a, &b) <= 1e-10 * a.iter().fold(0.0f64, |m, e| m.max(e.abs())));
    }

    #[test]
    fn doubling_distances_divides_couplings_by_eight(c in small_cluster()) {
        let h = dipole_hamiltonian(&c).unwrap();
        let doubled = dipole_hamiltonian(&c.rotated(&(2.0 * Matrix3::identity()))).unwrap();
        let d = CMat::from_fn(h.nrows(), h.ncols(), |r, k| h[(r, k)] - doubled[(r, k)] * 8.0);
        prop_assert!(max_abs(d.as_ref()) <= 1e-12 * max_abs(h.as_ref()));
    }

    #[test]
    fn field_sweep_is_symmetric(c in small_cluster(), b in 0.01..2.0f64, axis in prop::array::uniform3(-1.0..1.0f64)) {
        prop_assume!(axis.iter().map(|x| x * x).sum::<f64>() > 0.01);
        let sweep = levels_vs_field(&c, PairSelection::All, axis, &[b, -b]).unwrap();
        let scale = sweep.sorted[0].iter().fold(0.0f64, |m, e| m.max(e.abs()));
        prop_assert!(max_diff(&sweep.sorted[0], &sweep.sorted[1]) <= 1e-10 * scale);
    }

    #[test]
    fn drive_elements_are_symmetric(c in small_cluster()) {
        let unit = omega_d(1.0);
        let levels = levels_of(&dipole_hamiltonian(&c).unwrap(), unit, 1e-9).unwrap();
        let v = drive_operator(&c, [0.0, 1.0, 0.0]).unwrap();
        for i in 0..levels.len() {
            for k in i + 1..levels.len() {
                let (a, b) = (drive_element(&levels, &v, i, k), drive_element(&levels, &v, k, i));
                prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a));
            }
        }
    }

    #[test]
    fn asymmetry_model_is_affine_in_amplitudes(
        p in prop::collection::vec(-1.0..1.0f64, 12),
        a in prop::array::uniform3(-10.0..10.0f64),
        lambda in 0.0..3.0f64,
    ) {
        let times: Vec<f64> = (0..p.len()).map(|k| 0.3 * k as f64).collect();
        let series = PolarizationSeries::new(times.clone(), p.clone()).unwrap();
        let params = FitParams { a0: a[0], a1: a[1], lambda1: lambda, a2: a[2], ..FitParams::published() };
        let model = apply_asymmetry_model(&params, &series).unwrap();
        let basis = |a0: f64, a1: f64, a2: f64| {
            apply_asymmetry_model(&FitParams { a0, a1, a2, ..params }, &series).unwrap()
        };
        let (e0, e1, e2) = (basis(1.0, 0.0, 0.0), basis(0.0, 1.0, 0.0), basis(0.0, 0.0, 1.0));
        for k in 0..times.len() {
            let combined = a[0] * e0[k] + a[1] * e1[k] + a[2] * e2[k];
            prop_assert!((model[k] - combined).abs() <= 1e-12 * (1.0 + model[k].abs()));
        }
    }

    #[test]
    fn difference_ignores_background(p_on in prop::collection::vec(-1.0..1.0f64, 10), p_off in prop::collection::vec(-1.0..1.0f64, 10), bg in prop::array::uniform3(0.0..5.0f64)) {
        let times: Vec<f64> = (0..10).map(|k| 0.5 * k as f64).collect();
        let diff = |params: &FitParams| {
            let on = apply_asymmetry_model(params, &PolarizationSeries::new(times.clone(), p_on.clone()).unwrap()).unwrap();
            let off = apply_asymmetry_model(params, &PolarizationSeries::new(times.clone(), p_off.clone()).unwrap()).unwrap();
            difference_spectrum(&Spectrum::noiseless(times.clone(), on).unwrap(), &Spectrum::noiseless(times.clone(), off).unwrap())
                .unwrap()
                .asymmetry
        };
        let base = FitParams::published();
        let other = FitParams { a1: bg[0], lambda1: bg[1], a2: bg[2] - 2.5, ..base };
        for (a, b) in diff(&base).iter().zip(diff(&other)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn chi2_is_scale_invariant(r in prop::collection::vec(-3.0..3.0f64, 20), s in prop::collection::vec(0.1..2.0f64, 20), k in 0.01..100.0f64) {
        let times: Vec<f64> = (0..20).map(|i| 0.5 * i as f64).collect();
        let model = Spectrum::noiseless(times.clone(), vec![0.0; 20]).unwrap();
        let data = Spectrum::new(times.clone(), r.clone(), s.clone()).unwrap();
        let scaled = Spectrum::new(times.clone(), r.iter().map(|v| v * k).collect(), s.iter().map(|v| v * k).collect()).unwrap();
        let a = chi_squared_reduced(&model, &data, 12.5, 9).unwrap();
        let b = chi_squared_reduced(&model, &scaled, 12.5, 9).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
    }

    #[test]
    fn de_stays_in_bounds_with_monotone_history(seed in 0u64..1000, lo in prop::array::uniform3(-2.0..0.0f64), width in prop::array::uniform3(0.0..2.0f64)) {
        let bounds: Vec<(f64, f64)> = lo.iter().zip(width).map(|(l, w)| (*l, l + w)).collect();
        let seen = Mutex::new(Vec::new());
        let obj = |x: &[f64]| {
            seen.lock().unwrap().push(x.to_vec());
            x.iter().map(|v| (v - 0.3).powi(2)).sum::<f64>()
        };
        let s = DeSettings { population: Some(8), max_generations: 20, seed, ..Default::default() };
        let r = differential_evolution(obj, &bounds, &s).unwrap();
        prop_assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
        for x in seen.into_inner().unwrap() {
            for (v, (l, h)) in x.iter().zip(&bounds) {
                prop_assert!(l <= v && v <= h);
            }
        }
    }
}
