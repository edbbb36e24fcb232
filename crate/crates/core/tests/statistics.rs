//! Ensemble statistics against their stated second moments, the
//! semicircle, the form factors, and agreement between the dense and
//! eigenbasis sampling routes.

use std::f64::consts::PI;

use leveldot::ensembles::{
    coupling_weights, poisson_levels, sample_coupling, sample_dot, sample_tridiagonal_dot, Bath,
    EnsembleSpec, SeedPath, SymmetryClass,
};
use leveldot::spectral::eigen::tridiagonal_eigenvalues;
use leveldot::spectral::{
    average_survival_with, empirical_sff, ensemble_moments, plateau_observable, AverageOptions,
    Method, Moments, TimeGrid,
};
use leveldot::theory::sff_analytic;

fn moments_of(xs: impl Iterator<Item = f64>) -> Moments {
    let mut m = Moments::new(1);
    for x in xs {
        m.push(&[x]);
    }
    m
}

#[test]
fn unitary_off_diagonal_has_zero_mean() {
    let spec = EnsembleSpec::new(SymmetryClass::Unitary, 2, 1.0, 0.0).unwrap();
    let draws: Vec<_> = (0..100_000)
        .map(|k| sample_dot(&spec, SeedPath::new(21, k)).unwrap()[(0, 1)])
        .collect();
    for part in [|z: &num_complex::Complex64| z.re, |z: &num_complex::Complex64| z.im] {
        let m = moments_of(draws.iter().map(part));
        assert!(m.mean[0].abs() < 4.0 * m.stderr()[0], "{} ± {}", m.mean[0], m.stderr()[0]);
    }
}

#[test]
fn trace_of_h_squared_matches_the_variances() {
    for (class, n, samples) in [
        (SymmetryClass::Unitary, 500, 1000),
        (SymmetryClass::Orthogonal, 200, 200),
        (SymmetryClass::Symplectic, 200, 200),
    ] {
        let spec = EnsembleSpec::new(class, n, 1.0, 0.0).unwrap();
        let dim = spec.dot_dim() as f64;
        let m = moments_of((0..samples).map(|k| {
            let h = sample_dot(&spec, SeedPath::new(22, k)).unwrap();
            h.iter().map(|z| z.norm_sqr()).sum::<f64>() / dim
        }));
        // Σ_kl ⟨|H_kl|²⟩/dim: λ² for U, λ²(1 + 1/N) for O and S.
        let want = if class == SymmetryClass::Unitary { 1.0 } else { 1.0 + 1.0 / n as f64 };
        assert!((m.mean[0] / want - 1.0).abs() < 0.02, "{class}: {}", m.mean[0]);
    }
}

#[test]
fn coupling_strength_averages_to_g() {
    for class in SymmetryClass::ALL {
        let spec = EnsembleSpec::new(class, 1000, 1.0, 0.046).unwrap();
        let m = moments_of((0..1000).map(|k| {
            let w = sample_coupling(&spec, SeedPath::new(23, k)).unwrap();
            coupling_weights(&spec, &w).iter().sum::<f64>()
        }));
        assert!((m.mean[0] - 0.046).abs() < 3.0 * m.stderr()[0], "{class}: {} ± {}", m.mean[0], m.stderr()[0]);
    }
}

#[test]
fn poisson_spacing() {
    let spec = EnsembleSpec::new(SymmetryClass::Unitary, 1000, 1.0, 0.0)
        .unwrap()
        .with_bath(Bath::Poisson);
    let m = moments_of((0..100).flat_map(|k| {
        let e = poisson_levels(&spec, SeedPath::new(24, k)).unwrap();
        assert!(e.iter().all(|x| x.abs() <= 2.0));
        e.windows(2).map(|w| w[1] - w[0]).collect::<Vec<_>>()
    }));
    assert!((m.mean[0] / 0.004 - 1.0).abs() < 0.05, "{}", m.mean[0]);
}

fn centre_density(levels: impl Iterator<Item = f64>, samples: usize, lambda: f64) -> f64 {
    let half = 0.1 * lambda;
    levels.filter(|e| e.abs() < half).count() as f64 / (samples as f64 * 2.0 * half)
}

#[test]
fn orthogonal_semicircle_from_dense_matrices() {
    let spec = EnsembleSpec::new(SymmetryClass::Orthogonal, 500, 1.0, 0.0).unwrap();
    let levels = (0..100).flat_map(|k| {
        let h = sample_dot(&spec, SeedPath::new(25, k)).unwrap().map(|z| z.re);
        h.symmetric_eigenvalues().as_slice().to_vec()
    });
    let d = centre_density(levels, 100, 1.0);
    let want = spec.band_center_density();
    assert!((d / want - 1.0).abs() < 0.05, "{d} vs {want}");
}

#[test]
fn tridiagonal_models_follow_the_semicircle() {
    for class in SymmetryClass::ALL {
        let spec = EnsembleSpec::new(class, 1000, 1.7, 0.0).unwrap();
        let levels = (0..100).flat_map(|k| {
            tridiagonal_eigenvalues(&sample_tridiagonal_dot(&spec, SeedPath::new(26, k)).unwrap()).unwrap()
        });
        let d = centre_density(levels, 100, 1.7);
        let want = 1000.0 / (PI * 1.7);
        assert!((d / want - 1.0).abs() < 0.05, "{class}: {d} vs {want}");
    }
}

#[test]
fn form_factor_matches_the_analytic_curves() {
    let taus = [0.5, 1.0, 3.0];
    for class in [SymmetryClass::Unitary, SymmetryClass::Orthogonal] {
        let spec = EnsembleSpec::new(class, 400, 1.0, 0.0).unwrap();
        let c = empirical_sff(&spec, 300, &taus, 27).unwrap();
        for (i, &tau) in taus.iter().enumerate() {
            let want = sff_analytic(class, tau).unwrap();
            assert!(
                (c.k[i] - want).abs() < 4.0 * c.stderr[i] + 0.02,
                "{class} τ={tau}: {} ± {} vs {want}",
                c.k[i],
                c.stderr[i]
            );
        }
    }
    assert!((sff_analytic(SymmetryClass::Orthogonal, 1.0).unwrap() - (2.0 - 3f64.ln())).abs() < 1e-15);
}

/// The two sampling routes use the random stream differently, so compare
/// their ensemble averages rather than single realizations.
#[test]
fn dense_and_eigenbasis_routes_have_the_same_law() {
    let grid = TimeGrid::from_taus(vec![0.02, 0.1, 0.4, 1.0, 3.0]).unwrap();
    for class in SymmetryClass::ALL {
        for bath in [Bath::Rmt, Bath::Poisson] {
            let spec = EnsembleSpec::from_gamma(class, 40, 1.0, 8.0).unwrap().with_bath(bath);
            let run = |method, seed| {
                let opts = AverageOptions { method, chunk_size: 64 };
                average_survival_with(&spec, &grid, 600, seed, opts).unwrap()
            };
            let a = run(Method::Dense, 28);
            let b = run(Method::Eigenbasis, 29);
            for i in 0..grid.len() {
                let err = (a.stderr[i].powi(2) + b.stderr[i].powi(2)).sqrt();
                assert!(
                    (a.mean[i] - b.mean[i]).abs() < 4.0 * err,
                    "{class} {bath:?} τ={}: {} vs {} ± {err}",
                    a.taus[i],
                    a.mean[i],
                    b.mean[i]
                );
            }
            let pl = |method, seed| ensemble_moments(600, seed, 64, 1, plateau_observable(spec, method)).unwrap().0;
            let (pa, pb) = (pl(Method::Dense, 30), pl(Method::Eigenbasis, 31));
            let err = (pa.stderr()[0].powi(2) + pb.stderr()[0].powi(2)).sqrt();
            assert!((pa.mean[0] - pb.mean[0]).abs() < 4.0 * err, "{class} {bath:?} plateau");
        }
    }
}
