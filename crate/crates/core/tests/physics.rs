use fmuf::analytic::{analytic_eigenvectors, basis_index, muon_reduced_purity, FmufGeometry};
use fmuf::asymmetry::experimental_asymmetry;
use fmuf::dynamics::{
    eigen_populations, evolve, evolve_state, initial_kets, initial_state, muon_purity, polarization_of,
    state_populations, static_polarization, EvolveOptions, Method, SplitOrder, State,
};
use fmuf::hamiltonian::{dipole_hamiltonian, driven_hamiltonian, scale_bonds, StaticHamiltonian};
use fmuf::io::{ClusterConfig, ClusterSubset};
use fmuf::linalg::{c64, eigh, CMat};
use fmuf::model::{time_grid, FitParams};
use fmuf::units::MUON_LIFETIME_US;
use nalgebra::{Complex, DMatrix};
use rand::SeedableRng;
use rand_distr::{Distribution, Poisson};

const Z: [f64; 3] = [0.0, 0.0, 1.0];

fn fitted(subset: &str) -> Vec<fmuf::hamiltonian::Cluster> {
    let subset: ClusterSubset = subset.parse().unwrap();
    ClusterConfig::liyf4()
        .clusters()
        .unwrap()
        .iter()
        .map(|c| subset.apply(&scale_bonds(c, FitParams::published().scales()).unwrap()).unwrap())
        .collect()
}

fn nalgebra_eigenvalues(h: &CMat) -> Vec<f64> {
    let m = DMatrix::from_fn(h.nrows(), h.ncols(), |i, j| h[(i, j)]);
    let mut e: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

#[test]
fn eigenvalues_match_nalgebra() {
    for c in fitted("mu,F1,F2,Li1") {
        let h = dipole_hamiltonian(&c).unwrap();
        let ours = eigh(h.as_ref()).unwrap().values;
        let oracle = nalgebra_eigenvalues(&h);
        let scale = oracle.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        for (a, b) in ours.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12 * scale, "{a} vs {b}");
        }
    }
}

/// Sum over eigenstates with nalgebra's solver; the muon is the leading factor.
#[test]
fn spectral_polarization_matches_nalgebra() {
    let times = time_grid(15.0, 0.1).unwrap();
    let c = &fitted("mu,F1,F2,Li1")[0];
    let h = dipole_hamiltonian(c).unwrap();
    let n = h.nrows();
    let m = DMatrix::from_fn(n, n, |i, j| h[(i, j)]);
    let eig = m.symmetric_eigen();
    let sz = DMatrix::from_fn(n, n, |i, j| Complex::new(if i != j { 0.0 } else if i < n / 2 { 1.0 } else { -1.0 }, 0.0));
    let o = eig.eigenvectors.adjoint() * sz * &eig.eigenvectors;
    let ours = static_polarization(h.as_ref(), c.layout(), Z, &times).unwrap();
    for (t, p) in times.iter().zip(ours) {
        let mut acc = 0.0;
        for k in 0..n {
            for l in 0..n {
                acc += o[(k, l)].norm_sqr() * ((eig.eigenvalues[k] - eig.eigenvalues[l]) * t).cos();
            }
        }
        assert!((p - acc / n as f64).abs() < 1e-10, "t = {t}");
    }
}

#[test]
fn mu_f2_levels_are_pairwise_degenerate() {
    for c in fitted("muF2") {
        let e = eigh(dipole_hamiltonian(&c).unwrap().as_ref()).unwrap().values;
        let scale = e.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for pair in e.chunks(2) {
            assert!((pair[0] - pair[1]).abs() < 1e-10 * scale);
        }
        assert!(e.iter().sum::<f64>().abs() < 1e-10 * scale);
    }
}

#[test]
fn closed_form_purities() {
    let layout = FmufGeometry::linear(1.2).cluster().unwrap().layout().clone();
    let v = analytic_eigenvectors();
    let state = |k: usize| v[k].iter().map(|&x| c64::new(x, 0.0)).collect::<Vec<_>>();
    let mut up = vec![c64::new(0.0, 0.0); 8];
    up[basis_index("uuu")] = c64::new(1.0, 0.0);
    assert!((muon_reduced_purity(&up, &layout).unwrap() - 1.0).abs() < 1e-14);
    assert!((muon_reduced_purity(&state(4), &layout).unwrap() - 1.0).abs() < 1e-14);
    assert!(muon_reduced_purity(&state(6), &layout).unwrap() < 1.0 - 1e-3);
}

#[test]
fn polarized_muon_splits_degenerate_pairs() {
    let geom = FmufGeometry::linear(1.2);
    let layout = geom.cluster().unwrap().layout().clone();
    let rho = initial_state(&layout, Z).unwrap();
    let v = analytic_eigenvectors();
    let pop = |k: usize| {
        let psi: Vec<c64> = v[k].iter().map(|&x| c64::new(x, 0.0)).collect();
        let m = rho.matrix();
        let mut acc = c64::new(0.0, 0.0);
        for i in 0..8 {
            for j in 0..8 {
                acc += psi[i].conj() * m[(i, j)] * psi[j];
            }
        }
        acc.re
    };
    for pair in [(0, 1), (2, 3), (6, 7)] {
        assert!((pop(pair.0) - pop(pair.1)).abs() > 1e-3, "{pair:?}");
    }
    let total: f64 = (0..8).map(pop).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn rf_off_subspace_populations_are_constant() {
    let c = &fitted("mu,F1,F2,Li1")[0];
    let h0 = dipole_hamiltonian(c).unwrap();
    let eig = eigh(h0.as_ref()).unwrap();
    let rho0 = initial_state(c.layout(), Z).unwrap();
    let start = eigen_populations(&rho0, h0.as_ref()).unwrap();
    let times = time_grid(10.0, 2.5).unwrap();
    evolve(&StaticHamiltonian(h0.clone()), &rho0, &times, &EvolveOptions::default(), |_, _, s| {
        let now = eigen_populations(&s.to_density(), h0.as_ref())?;
        for (a, b) in start.iter().zip(&now) {
            assert!((a.population - b.population).abs() < 1e-10);
        }
        Ok(())
    })
    .unwrap();
    let flat = state_populations(&rho0, &eig);
    assert!((flat.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn full_cluster_muon_loses_purity_by_ten_microseconds() {
    let c = &fitted("full")[0];
    let h0 = dipole_hamiltonian(c).unwrap();
    let k0 = initial_kets(c.layout(), Z).unwrap();
    let mut purity = 1.0;
    evolve_state(&StaticHamiltonian(h0), State::Kets(k0), &[0.0, 10.0], &EvolveOptions::default(), |i, _, s| {
        if i == 1 {
            purity = muon_purity(s, c.layout())?;
        }
        Ok(())
    })
    .unwrap();
    assert!(purity < 0.6, "{purity}");
}

#[test]
fn driven_methods_agree_and_converge() {
    let params = FitParams::published();
    let c = &fitted("muF2")[0];
    let h = driven_hamiltonian(c, params.drive(550.0, true, 0.0)).unwrap();
    let times = time_grid(6.0, 0.25).unwrap();
    let rho0 = initial_state(c.layout(), Z).unwrap();
    let run = |opts: EvolveOptions| {
        let mut p = Vec::new();
        evolve(&h, &rho0, &times, &opts, |_, _, s| {
            p.push(polarization_of(s, c.layout(), Z)?);
            Ok(())
        })
        .unwrap();
        p
    };
    let tol = 1e-6;
    let reference = run(EvolveOptions::default().with_tol(tol));
    assert!((reference[0] - 1.0).abs() < 1e-12);
    let halved = run(EvolveOptions::default().with_tol(tol / 2.0));
    for method in [Method::Split(SplitOrder::Strang), Method::Split(SplitOrder::Yoshida4)] {
        let other = run(EvolveOptions::default().with_tol(tol / 2.0).with_method(method));
        for (a, b) in reference.iter().zip(&other) {
            assert!((a - b).abs() < 2.0 * tol, "{method:?}");
        }
    }
    for (a, b) in reference.iter().zip(&halved) {
        assert!((a - b).abs() < tol);
    }
}

/// Counts drawn around a known asymmetry decaying with the muon lifetime.
#[test]
fn counts_monte_carlo_recovers_asymmetry() {
    let (alpha, n0) = (0.93, 5.0e5);
    let truth = |t: f64| 0.22 * (-0.3 * t).exp() * (2.0 * t).cos();
    let times = time_grid(12.0, 0.25).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    let mut nf = Vec::new();
    let mut nb = Vec::new();
    for &t in &times {
        let envelope = n0 * (-t / MUON_LIFETIME_US).exp();
        nf.push(Poisson::new(envelope * (1.0 + truth(t))).unwrap().sample(&mut rng));
        nb.push(Poisson::new(envelope * (1.0 - truth(t)) / alpha).unwrap().sample(&mut rng));
    }
    let s = experimental_asymmetry(&times, &nf, &nb, alpha).unwrap();
    for k in 0..times.len() {
        assert!(s.valid[k]);
        let z = (s.asymmetry[k] - 100.0 * truth(times[k])) / s.sigma[k];
        assert!(z.abs() < 3.0, "bin {k}: z = {z}");
    }
}
