use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::eigen::{arrowhead_eigen, hermitian_eigen, max_residual, RootKind};
use super::SpectralError;
use crate::ensembles::{
    coupling_weights, poisson_levels, sample_coupling, sample_tridiagonal_dot, Bath, EnsembleSpec,
    Realization, SeedPath, SymmetryClass,
};

/// Residual bound per eigenpair, in units of `λ`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;
/// Allowed deviation of `Σ|c_α|²` from one.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-10;
/// Kramers partners must agree to this fraction of `λ`.
pub const KRAMERS_TOLERANCE: f64 = 1e-10;

/// Eigenvalues of the full Hamiltonian with their squared overlaps
/// `|c_α|² = |⟨α|0⟩|²` with the level state (`0↑` for class S).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapSet {
    pub energies: Vec<f64>,
    pub weights: Vec<f64>,
    pub max_residual: f64,
}

impl OverlapSet {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    fn check(self, lambda: f64) -> Result<Self, SpectralError> {
        let sum = self.weight_sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(SpectralError::Normalization(sum));
        }
        if !(self.max_residual <= RESIDUAL_TOLERANCE * lambda) {
            return Err(SpectralError::Residual {
                residual: self.max_residual,
                bound: RESIDUAL_TOLERANCE * lambda,
            });
        }
        Ok(self)
    }
}

/// Diagonalization strategy for a sampled [`Realization`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    /// Diagonalize the assembled `(N+1)`-dimensional matrix.
    #[default]
    Dense,
    /// Diagonalize the dot only, rotate the coupling into its eigenbasis and
    /// solve the resulting arrowhead problem.
    Arrowhead,
}

/// Eigen-decomposition of one realization.
pub fn decompose(
    spec: &EnsembleSpec,
    realization: &Realization,
    solver: Solver,
) -> Result<OverlapSet, SpectralError> {
    match solver {
        Solver::Dense => decompose_dense(spec, realization),
        Solver::Arrowhead => decompose_arrowhead(spec, realization),
    }
}

fn decompose_dense(spec: &EnsembleSpec, r: &Realization) -> Result<OverlapSet, SpectralError> {
    let a = r.hamiltonian(spec)?;
    let (energies, weights, residual) = if spec.class == SymmetryClass::Orthogonal {
        let real = a.map(|z| z.re);
        let (e, v) = hermitian_eigen(&real)?;
        let w = (0..e.len()).map(|c| v[(0, c)] * v[(0, c)]).collect();
        let res = max_residual(&real, &e, &v);
        (e, w, res)
    } else {
        let (e, v) = hermitian_eigen(&a)?;
        let w = (0..e.len()).map(|c| v[(0, c)].norm_sqr()).collect();
        let res = max_residual(&a, &e, &v);
        (e, w, res)
    };
    if spec.class == SymmetryClass::Symplectic {
        check_kramers(&energies, spec.lambda)?;
    }
    OverlapSet {
        energies,
        weights,
        max_residual: residual,
    }
    .check(spec.lambda)
}

fn check_kramers(sorted: &[f64], lambda: f64) -> Result<(), SpectralError> {
    for pair in sorted.chunks(2) {
        if pair.len() != 2 || pair[1] - pair[0] > KRAMERS_TOLERANCE * lambda {
            return Err(SpectralError::Kramers {
                gap: if pair.len() == 2 { pair[1] - pair[0] } else { f64::INFINITY },
            });
        }
    }
    Ok(())
}

fn decompose_arrowhead(spec: &EnsembleSpec, r: &Realization) -> Result<OverlapSet, SpectralError> {
    let (poles, vectors) = hermitian_eigen(&r.h)?;
    let dot_residual = max_residual(&r.h, &poles, &vectors);
    let level_row = r.w.rows(0, 1) * &vectors;
    let zeta: Vec<f64> = level_row.iter().map(Complex64::norm_sqr).collect();
    let (poles, zeta) = if spec.class == SymmetryClass::Symplectic {
        check_kramers(&poles, spec.lambda)?;
        pair_poles(&poles, &zeta)
    } else {
        (poles, zeta)
    };
    let mut set = secular_overlaps(spec, &poles, &zeta)?;
    set.max_residual = set.max_residual.max(dot_residual);
    set.check(spec.lambda)
}

fn pair_poles(poles: &[f64], zeta: &[f64]) -> (Vec<f64>, Vec<f64>) {
    poles
        .chunks(2)
        .zip(zeta.chunks(2))
        .map(|(p, z)| (0.5 * (p[0] + p[1]), z.iter().sum::<f64>()))
        .unzip()
}

/// Overlaps from dot levels (`poles`, Kramers-reduced for class S) and the
/// level's coupling weight onto each of them.
fn secular_overlaps(
    spec: &EnsembleSpec,
    poles: &[f64],
    zeta: &[f64],
) -> Result<OverlapSet, SpectralError> {
    let merge_tol = 4.0 * f64::EPSILON * spec.lambda;
    let sol = arrowhead_eigen(spec.epsilon0, poles, zeta, merge_tol)?;
    let mut energies = Vec::with_capacity(spec.full_dim());
    let mut weights = Vec::with_capacity(spec.full_dim());
    for root in &sol.roots {
        if spec.class == SymmetryClass::Symplectic {
            // Each eigenvalue of the Kramers-reduced problem is a doublet of
            // the full matrix; the weight on 0↑ splits across the pair.
            energies.extend([root.energy, root.energy]);
            weights.extend([0.5 * root.weight, 0.5 * root.weight]);
        } else {
            energies.push(root.energy);
            weights.push(root.weight);
        }
        debug_assert!(root.kind != RootKind::MergedPartner || root.weight == 0.0);
    }
    Ok(OverlapSet {
        energies,
        weights,
        max_residual: sol.max_residual,
    })
}

/// Samples the dot spectrum and coupling directly in the dot eigenbasis and
/// solves the arrowhead problem.
///
/// For an RMT bath the dot levels come from the tridiagonal β-Hermite model;
/// because the coupling distribution is invariant under the dot's
/// eigenvector rotation, the rotated coupling is distributed exactly like a
/// fresh draw. The result has the same law as [`decompose`] applied to
/// [`Realization::sample`], at `O(N²)` instead of `O(N³)` cost, but uses the
/// random stream differently, so individual realizations differ.
pub fn decompose_eigenbasis(spec: &EnsembleSpec, seed: SeedPath) -> Result<OverlapSet, SpectralError> {
    let poles = dot_levels(spec, seed)?;
    let w = sample_coupling(spec, seed)?;
    let zeta = coupling_weights(spec, &w);
    secular_overlaps(spec, &poles, &zeta)?.check(spec.lambda)
}

/// Distinct dot levels (one per Kramers pair for class S), ascending.
pub fn dot_levels(spec: &EnsembleSpec, seed: SeedPath) -> Result<Vec<f64>, SpectralError> {
    Ok(match spec.bath {
        Bath::Rmt => super::eigen::tridiagonal_eigenvalues(&sample_tridiagonal_dot(spec, seed)?)?,
        Bath::Poisson => poisson_levels(spec, seed)?,
    })
}

/// `Σ_groups (Σ_{α∈group} |c_α|²)²`, the infinite-time average of `P(t)`.
///
/// Eigenvalues closer than `1e-10` of the spectral scale form one group, so
/// exactly degenerate (Kramers) subspaces contribute their total weight
/// squared; for a non-degenerate spectrum this is `Σ|c_α|⁴`.
pub fn plateau_estimate(overlaps: &OverlapSet) -> f64 {
    let scale = overlaps
        .energies
        .iter()
        .fold(f64::MIN_POSITIVE, |a, e| a.max(e.abs()));
    let tol = KRAMERS_TOLERANCE * scale;
    let mut idx: Vec<usize> = (0..overlaps.len()).collect();
    idx.sort_by(|&a, &b| overlaps.energies[a].total_cmp(&overlaps.energies[b]));
    let mut total = 0.0;
    let mut group = 0.0;
    let mut prev = f64::NEG_INFINITY;
    for &i in &idx {
        let e = overlaps.energies[i];
        if e - prev > tol {
            total += group * group;
            group = 0.0;
        }
        group += overlaps.weights[i];
        prev = e;
    }
    total + group * group
}

/// Convenience for tests and diagnostics: dense overlaps of an explicit
/// Hermitian matrix with basis state 0.
pub fn overlaps_of_matrix(a: &DMatrix<Complex64>) -> Result<OverlapSet, SpectralError> {
    let (e, v) = hermitian_eigen(a)?;
    let w = (0..e.len()).map(|c| v[(0, c)].norm_sqr()).collect();
    let res = max_residual(a, &e, &v);
    Ok(OverlapSet {
        energies: e,
        weights: w,
        max_residual: res,
    })
}
