//! Survival probabilities checked against independent computations: the
//! matrix exponential, full-state evolution, the explicit double sum over
//! eigenstates and the long-time average.

use nalgebra::DMatrix;
use num_complex::Complex64;

use leveldot::ensembles::{
    assemble, coupling_weights, sample_coupling, Bath, EnsembleSpec, Realization, SeedPath,
    SymmetryClass,
};
use leveldot::spectral::eigen::hermitian_eigen;
use leveldot::spectral::{
    average_survival_with, decompose, dot_levels, plateau_estimate, sample_overlaps, survival,
    AverageOptions, Method, Solver, TimeGrid,
};

const TIMES: [f64; 7] = [0.0, 0.05, 0.4, 1.3, 4.0, 17.0, 90.0];

/// `|[exp(−iAt)]₀₀|²` via nalgebra's Padé matrix exponential.
fn exp_oracle(a: &DMatrix<Complex64>, t: f64) -> f64 {
    let u = (a * Complex64::new(0.0, -t)).exp();
    u[(0, 0)].norm_sqr()
}

fn specs() -> Vec<EnsembleSpec> {
    let mut v = Vec::new();
    for class in SymmetryClass::ALL {
        for (n, g) in [(2, 0.7), (5, 0.3), (7, 1.1)] {
            let spec = EnsembleSpec::new(class, n, 1.3, g).unwrap();
            v.push(spec);
            v.push(spec.with_epsilon0(0.25));
            v.push(spec.with_bath(Bath::Poisson));
        }
    }
    v
}

#[test]
fn dense_route_matches_matrix_exponential() {
    for spec in specs() {
        for index in 0..3 {
            let r = Realization::sample(&spec, SeedPath::new(11, index)).unwrap();
            let a = r.hamiltonian(&spec).unwrap();
            let o = decompose(&spec, &r, Solver::Dense).unwrap();
            let o2 = decompose(&spec, &r, Solver::Arrowhead).unwrap();
            let p = survival(&o, &TIMES);
            let p2 = survival(&o2, &TIMES);
            assert_eq!(p[0], 1.0);
            for (i, &t) in TIMES.iter().enumerate() {
                let want = exp_oracle(&a, t);
                assert!((p[i] - want).abs() < 1e-8, "{spec:?} t={t}: {} vs {want}", p[i]);
                assert!((p2[i] - want).abs() < 1e-8, "{spec:?} t={t}: {} vs {want}", p2[i]);
            }
        }
    }
}

/// The eigenbasis route never builds the full matrix. Rebuild it from the
/// same dot levels and coupling: the dot is diagonal in its own eigenbasis.
#[test]
fn eigenbasis_route_matches_matrix_exponential() {
    for spec in specs() {
        for index in 0..3 {
            let seed = SeedPath::new(12, index);
            let levels = dot_levels(&spec, seed).unwrap();
            let w = sample_coupling(&spec, seed).unwrap();
            let h = if spec.class == SymmetryClass::Symplectic {
                let both: Vec<Complex64> = levels.iter().chain(&levels).map(|&e| e.into()).collect();
                DMatrix::from_diagonal(&nalgebra::DVector::from_vec(both))
            } else {
                let d: Vec<Complex64> = levels.iter().map(|&e| e.into()).collect();
                DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d))
            };
            let a = assemble(&spec, &h, &w).unwrap();
            let o = sample_overlaps(&spec, seed, Method::Eigenbasis).unwrap();
            assert!((o.weight_sum() - 1.0).abs() < 1e-10);
            assert!(o.max_residual <= 1e-8 * spec.lambda);
            let p = survival(&o, &TIMES);
            assert_eq!(p[0], 1.0);
            for (i, &t) in TIMES.iter().enumerate() {
                let want = exp_oracle(&a, t);
                assert!((p[i] - want).abs() < 1e-8, "{spec:?} t={t}: {} vs {want}", p[i]);
            }
            assert_eq!(coupling_weights(&spec, &w).len(), levels.len());
        }
    }
}

#[test]
fn evolved_state_stays_normalized() {
    for class in SymmetryClass::ALL {
        let spec = EnsembleSpec::from_gamma(class, 30, 1.0, 6.0).unwrap();
        let r = Realization::sample(&spec, SeedPath::new(13, 0)).unwrap();
        let a = r.hamiltonian(&spec).unwrap();
        let (e, v) = hermitian_eigen(&a).unwrap();
        for &t in &TIMES {
            // ψ(t) = V e^{−iEt} V† |0⟩
            let coeffs: Vec<Complex64> = (0..e.len())
                .map(|k| v[(0, k)].conj() * Complex64::from_polar(1.0, -e[k] * t))
                .collect();
            let psi = &v * nalgebra::DVector::from_vec(coeffs);
            let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-10, "{class} t={t}: {norm}");
        }
    }
}

/// `Σ_αβ |c_α|²|c_β|² cos((E_α − E_β)t)`, term by term.
fn double_sum(energies: &[f64], weights: &[f64], t: f64) -> f64 {
    let mut s = 0.0;
    for a in 0..energies.len() {
        for b in 0..energies.len() {
            s += weights[a] * weights[b] * ((energies[a] - energies[b]) * t).cos();
        }
    }
    s
}

#[test]
fn ensemble_average_matches_brute_force_double_sum() {
    for class in SymmetryClass::ALL {
        for method in [Method::Dense, Method::Eigenbasis] {
            let spec = EnsembleSpec::new(class, 6, 1.0, 0.4).unwrap();
            let grid = TimeGrid::new(1e-2, 10.0, 25, Default::default()).unwrap();
            let opts = AverageOptions { method, chunk_size: 7 };
            let curve = average_survival_with(&spec, &grid, 50, 99, opts).unwrap();
            let times = grid.times(&spec);
            for (i, &t) in times.iter().enumerate() {
                let mean = (0..50)
                    .map(|k| {
                        let o = sample_overlaps(&spec, SeedPath::new(99, k), method).unwrap();
                        double_sum(&o.energies, &o.weights, t)
                    })
                    .sum::<f64>()
                    / 50.0;
                assert!((curve.mean[i] - mean).abs() < 1e-10, "{class} {method:?} t={t}");
            }
        }
    }
}

#[test]
fn plateau_is_the_long_time_average() {
    let spec = EnsembleSpec::from_gamma(SymmetryClass::Unitary, 30, 1.0, 5.0).unwrap();
    for index in 0..3 {
        let o = sample_overlaps(&spec, SeedPath::new(14, index), Method::Eigenbasis).unwrap();
        // Quasi-random sampling of t ∈ [0, 10⁶].
        let golden = 0.5 * (5f64.sqrt() - 1.0);
        let times: Vec<f64> = (0..200_000).map(|k| 1e6 * ((k as f64 * golden) % 1.0)).collect();
        let avg = survival(&o, &times).iter().sum::<f64>() / times.len() as f64;
        let pl = plateau_estimate(&o);
        assert!((avg / pl - 1.0).abs() < 0.01, "{avg} vs {pl}");
    }
}
