//! Random dot Hamiltonians, couplings, and the assembled level-dot matrix.
//!
//! Variance conventions (all classes share the semicircle radius `2λ`):
//!
//! | class | off-diagonal `⟨|H_kl|²⟩` | diagonal variance | coupling `⟨|W_k|²⟩` |
//! |-------|--------------------------|-------------------|---------------------|
//! | U     | `λ²/N` (complex)         | `λ²/N`            | `gλ²/N` (complex)   |
//! | O     | `λ²/N` (real)            | `2λ²/N`           | `gλ²/N` (real)      |
//! | S     | `λ²/N` per quaternion    | `λ²/(2N)`         | `gλ²/N` per quaternion |
//!
//! Class S matrices are quaternion self-dual and stored as `2N × 2N` complex
//! matrices in the layout `[[A, B], [-B*, A*]]` (`A` Hermitian, `B`
//! antisymmetric). The level is a Kramers doublet; the assembled matrix puts
//! `0↑, 0↓` in the first two slots, followed by the `N` up and `N` down dot
//! states.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EnsembleError {
    #[error("invalid ensemble spec: {0}")]
    InvalidSpec(String),
    #[error("{what}: expected {expected:?}, found {found:?}")]
    Dimension {
        what: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("operation requires a {expected} bath")]
    WrongBath { expected: Bath },
}

/// Wigner–Dyson symmetry class of the dot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SymmetryClass {
    /// Broken time reversal (GUE).
    #[serde(rename = "U")]
    Unitary,
    /// Time reversal with spin rotation (GOE).
    #[serde(rename = "O")]
    Orthogonal,
    /// Time reversal without spin rotation (GSE).
    #[serde(rename = "S")]
    Symplectic,
}

impl SymmetryClass {
    pub const ALL: [SymmetryClass; 3] = [
        SymmetryClass::Unitary,
        SymmetryClass::Orthogonal,
        SymmetryClass::Symplectic,
    ];

    /// Dyson index.
    pub fn beta(self) -> f64 {
        match self {
            SymmetryClass::Orthogonal => 1.0,
            SymmetryClass::Unitary => 2.0,
            SymmetryClass::Symplectic => 4.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SymmetryClass::Unitary => "U",
            SymmetryClass::Orthogonal => "O",
            SymmetryClass::Symplectic => "S",
        }
    }
}

impl fmt::Display for SymmetryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SymmetryClass {
    type Err = EnsembleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "U" | "GUE" | "UNITARY" => Ok(SymmetryClass::Unitary),
            "O" | "GOE" | "ORTHOGONAL" => Ok(SymmetryClass::Orthogonal),
            "S" | "GSE" | "SYMPLECTIC" => Ok(SymmetryClass::Symplectic),
            other => Err(EnsembleError::InvalidSpec(format!(
                "unknown symmetry class {other:?}"
            ))),
        }
    }
}

/// Statistics of the dot levels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bath {
    /// Gaussian random matrix of the chosen class.
    #[default]
    Rmt,
    /// Independent levels, uniform on `[-2λ, 2λ]`.
    Poisson,
}

impl fmt::Display for Bath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Bath::Rmt => "rmt",
            Bath::Poisson => "poisson",
        })
    }
}

/// Parameters of the level-dot ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub class: SymmetryClass,
    /// Number of dot levels (Kramers pairs for class S).
    pub n: usize,
    /// Spectral scale; the semicircle has radius `2λ`.
    pub lambda: f64,
    /// Dimensionless coupling strength.
    pub g: f64,
    #[serde(default)]
    pub epsilon0: f64,
    #[serde(default)]
    pub bath: Bath,
}

impl EnsembleSpec {
    pub fn new(class: SymmetryClass, n: usize, lambda: f64, g: f64) -> Result<Self, EnsembleError> {
        let spec = EnsembleSpec {
            class,
            n,
            lambda,
            g,
            epsilon0: 0.0,
            bath: Bath::Rmt,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Spec with `g = γ/N`.
    pub fn from_gamma(
        class: SymmetryClass,
        n: usize,
        lambda: f64,
        gamma: f64,
    ) -> Result<Self, EnsembleError> {
        if n == 0 {
            return Err(EnsembleError::InvalidSpec("n must be at least 2".into()));
        }
        Self::new(class, n, lambda, gamma / n as f64)
    }

    pub fn with_bath(mut self, bath: Bath) -> Self {
        self.bath = bath;
        self
    }

    pub fn with_epsilon0(mut self, epsilon0: f64) -> Self {
        self.epsilon0 = epsilon0;
        self
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        if self.n < 2 {
            return Err(EnsembleError::InvalidSpec(format!(
                "n must be at least 2, got {}",
                self.n
            )));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(EnsembleError::InvalidSpec(format!(
                "lambda must be positive and finite, got {}",
                self.lambda
            )));
        }
        if !(self.g >= 0.0) || !self.gamma().is_finite() {
            return Err(EnsembleError::InvalidSpec(format!(
                "g must be non-negative with finite gamma = g*n, got g = {}",
                self.g
            )));
        }
        if !self.epsilon0.is_finite() {
            return Err(EnsembleError::InvalidSpec("epsilon0 must be finite".into()));
        }
        Ok(())
    }

    /// `γ = gN`, the number of dot levels the initial state hybridizes with.
    pub fn gamma(&self) -> f64 {
        self.g * self.n as f64
    }

    /// Basis slots taken by the level: 1, or 2 for a Kramers doublet.
    pub fn level_slots(&self) -> usize {
        match self.class {
            SymmetryClass::Symplectic => 2,
            _ => 1,
        }
    }

    /// Complex dimension of the dot block.
    pub fn dot_dim(&self) -> usize {
        self.level_slots() * self.n
    }

    pub fn full_dim(&self) -> usize {
        self.level_slots() * (self.n + 1)
    }

    /// Band-centre density of (distinct) dot levels, `ν = N/(πλ)`.
    pub fn band_center_density(&self) -> f64 {
        self.n as f64 / (PI * self.lambda)
    }

    /// Absolute time for a Heisenberg-scaled time: `t = 2πν τ = 2Nτ/λ`.
    pub fn time_from_tau(&self, tau: f64) -> f64 {
        2.0 * PI * self.band_center_density() * tau
    }

    pub fn tau_from_time(&self, t: f64) -> f64 {
        t / (2.0 * PI * self.band_center_density())
    }
}

/// Identifies the random substream of one realization.
///
/// Each realization owns the ChaCha stream `index` under key `master`; the
/// dot and the coupling read from disjoint regions of that stream, so a
/// realization is reproducible regardless of which worker generates it or in
/// which order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedPath {
    pub master: u64,
    pub index: u64,
}

/// Region of a realization's stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Substream {
    Dot = 0,
    Coupling = 1,
}

impl SeedPath {
    pub fn new(master: u64, index: u64) -> Self {
        SeedPath { master, index }
    }

    pub fn rng(&self, part: Substream) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.index);
        rng.set_word_pos((part as u128) << 64);
        rng
    }
}

/// Derives an independent master seed for a labelled sub-experiment
/// (e.g. one point of a coupling sweep). SplitMix64 finaliser.
pub fn derive_seed(master: u64, label: u64) -> u64 {
    let mut z = master ^ label.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn normal(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    sigma * z
}

#[inline]
fn complex_normal(rng: &mut ChaCha8Rng, component_sigma: f64) -> Complex64 {
    let re = normal(rng, component_sigma);
    let im = normal(rng, component_sigma);
    Complex64::new(re, im)
}

/// Samples the dot Hamiltonian for an RMT bath.
pub fn sample_dot(spec: &EnsembleSpec, seed: SeedPath) -> Result<DMatrix<Complex64>, EnsembleError> {
    spec.validate()?;
    if spec.bath != Bath::Rmt {
        return Err(EnsembleError::WrongBath { expected: Bath::Rmt });
    }
    let n = spec.n;
    let nf = n as f64;
    let lam2 = spec.lambda * spec.lambda;
    let mut rng = seed.rng(Substream::Dot);
    let zero = Complex64::new(0.0, 0.0);
    Ok(match spec.class {
        SymmetryClass::Unitary => {
            let diag_sigma = (lam2 / nf).sqrt();
            let comp_sigma = (lam2 / (2.0 * nf)).sqrt();
            let mut h = DMatrix::from_element(n, n, zero);
            for k in 0..n {
                h[(k, k)] = Complex64::new(normal(&mut rng, diag_sigma), 0.0);
                for l in (k + 1)..n {
                    let z = complex_normal(&mut rng, comp_sigma);
                    h[(k, l)] = z;
                    h[(l, k)] = z.conj();
                }
            }
            h
        }
        SymmetryClass::Orthogonal => {
            let diag_sigma = (2.0 * lam2 / nf).sqrt();
            let off_sigma = (lam2 / nf).sqrt();
            let mut h = DMatrix::from_element(n, n, zero);
            for k in 0..n {
                h[(k, k)] = Complex64::new(normal(&mut rng, diag_sigma), 0.0);
                for l in (k + 1)..n {
                    let x = Complex64::new(normal(&mut rng, off_sigma), 0.0);
                    h[(k, l)] = x;
                    h[(l, k)] = x;
                }
            }
            h
        }
        SymmetryClass::Symplectic => {
            // Four real quaternion components of variance v = λ²/(4N) each.
            let v = lam2 / (4.0 * nf);
            let comp_sigma = v.sqrt();
            let diag_sigma = (2.0 * v).sqrt();
            let mut a = DMatrix::from_element(n, n, zero);
            let mut b = DMatrix::from_element(n, n, zero);
            for k in 0..n {
                a[(k, k)] = Complex64::new(normal(&mut rng, diag_sigma), 0.0);
                for l in (k + 1)..n {
                    let za = complex_normal(&mut rng, comp_sigma);
                    a[(k, l)] = za;
                    a[(l, k)] = za.conj();
                    let zb = complex_normal(&mut rng, comp_sigma);
                    b[(k, l)] = zb;
                    b[(l, k)] = -zb;
                }
            }
            quaternion_layout(&a, &b)
        }
    })
}

/// `[[A, B], [-B*, A*]]`.
fn quaternion_layout(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = a.nrows();
    let mut h = DMatrix::from_element(2 * n, 2 * n, Complex64::new(0.0, 0.0));
    for k in 0..n {
        for l in 0..n {
            h[(k, l)] = a[(k, l)];
            h[(k, n + l)] = b[(k, l)];
            h[(n + k, l)] = -b[(k, l)].conj();
            h[(n + k, n + l)] = a[(k, l)].conj();
        }
    }
    h
}

/// Sorted i.i.d. uniform levels on `[-2λ, 2λ]`, one per dot level (Kramers
/// pair for class S).
pub fn poisson_levels(spec: &EnsembleSpec, seed: SeedPath) -> Result<Vec<f64>, EnsembleError> {
    spec.validate()?;
    if spec.bath != Bath::Poisson {
        return Err(EnsembleError::WrongBath {
            expected: Bath::Poisson,
        });
    }
    let mut rng = seed.rng(Substream::Dot);
    let half_width = 2.0 * spec.lambda;
    let dist = Uniform::new_inclusive(-half_width, half_width)
        .map_err(|e| EnsembleError::InvalidSpec(e.to_string()))?;
    let mut levels: Vec<f64> = (0..spec.n).map(|_| dist.sample(&mut rng)).collect();
    levels.sort_by(f64::total_cmp);
    Ok(levels)
}

/// Diagonal dot Hamiltonian with Poisson level statistics.
pub fn sample_poisson_dot(
    spec: &EnsembleSpec,
    seed: SeedPath,
) -> Result<DMatrix<Complex64>, EnsembleError> {
    let levels = poisson_levels(spec, seed)?;
    let n = spec.n;
    let mut h = DMatrix::from_element(spec.dot_dim(), spec.dot_dim(), Complex64::new(0.0, 0.0));
    for (k, &e) in levels.iter().enumerate() {
        h[(k, k)] = Complex64::new(e, 0.0);
        if spec.class == SymmetryClass::Symplectic {
            h[(n + k, n + k)] = Complex64::new(e, 0.0);
        }
    }
    Ok(h)
}

/// Level-to-dot coupling as a `level_slots × dot_dim` matrix.
///
/// For class S the rows are `0↑, 0↓` and each dot pair `k` receives the
/// quaternion block `[[a_k, b_k], [-b_k*, a_k*]]` with
/// `⟨|a_k|² + |b_k|²⟩ = gλ²/N`.
pub fn sample_coupling(
    spec: &EnsembleSpec,
    seed: SeedPath,
) -> Result<DMatrix<Complex64>, EnsembleError> {
    spec.validate()?;
    let n = spec.n;
    let var = spec.g * spec.lambda * spec.lambda / n as f64;
    let mut rng = seed.rng(Substream::Coupling);
    let zero = Complex64::new(0.0, 0.0);
    Ok(match spec.class {
        SymmetryClass::Unitary => {
            let sigma = (var / 2.0).sqrt();
            DMatrix::from_fn(1, n, |_, _| complex_normal(&mut rng, sigma))
        }
        SymmetryClass::Orthogonal => {
            let sigma = var.sqrt();
            DMatrix::from_fn(1, n, |_, _| Complex64::new(normal(&mut rng, sigma), 0.0))
        }
        SymmetryClass::Symplectic => {
            let sigma = (var / 4.0).sqrt();
            let mut w = DMatrix::from_element(2, 2 * n, zero);
            for k in 0..n {
                let a = complex_normal(&mut rng, sigma);
                let b = complex_normal(&mut rng, sigma);
                w[(0, k)] = a;
                w[(0, n + k)] = b;
                w[(1, k)] = -b.conj();
                w[(1, n + k)] = a.conj();
            }
            w
        }
    })
}

/// Per-pole coupling weights `|W_k|²` seen by the level state `0` (`0↑` for
/// class S, where the weight of pair `k` is `|a_k|² + |b_k|²`).
pub fn coupling_weights(spec: &EnsembleSpec, w: &DMatrix<Complex64>) -> Vec<f64> {
    let n = spec.n;
    match spec.class {
        SymmetryClass::Symplectic => (0..n)
            .map(|k| w[(0, k)].norm_sqr() + w[(0, n + k)].norm_sqr())
            .collect(),
        _ => (0..n).map(|k| w[(0, k)].norm_sqr()).collect(),
    }
}

/// Block matrix `[[ε₀·1, W], [W†, H]]`.
pub fn assemble(
    spec: &EnsembleSpec,
    h: &DMatrix<Complex64>,
    w: &DMatrix<Complex64>,
) -> Result<DMatrix<Complex64>, EnsembleError> {
    let levels = spec.level_slots();
    let dot = spec.dot_dim();
    if h.shape() != (dot, dot) {
        return Err(EnsembleError::Dimension {
            what: "dot Hamiltonian",
            expected: (dot, dot),
            found: h.shape(),
        });
    }
    if w.shape() != (levels, dot) {
        return Err(EnsembleError::Dimension {
            what: "coupling",
            expected: (levels, dot),
            found: w.shape(),
        });
    }
    let dim = levels + dot;
    let mut full = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for i in 0..levels {
        full[(i, i)] = Complex64::new(spec.epsilon0, 0.0);
        for k in 0..dot {
            full[(i, levels + k)] = w[(i, k)];
            full[(levels + k, i)] = w[(i, k)].conj();
        }
    }
    full.view_mut((levels, levels), (dot, dot)).copy_from(h);
    Ok(full)
}

/// One sampled instance of the level-dot model.
#[derive(Debug, Clone)]
pub struct Realization {
    pub h: DMatrix<Complex64>,
    pub w: DMatrix<Complex64>,
    pub epsilon0: f64,
    pub seed_path: SeedPath,
}

impl Realization {
    pub fn sample(spec: &EnsembleSpec, seed_path: SeedPath) -> Result<Self, EnsembleError> {
        let h = match spec.bath {
            Bath::Rmt => sample_dot(spec, seed_path)?,
            Bath::Poisson => sample_poisson_dot(spec, seed_path)?,
        };
        let w = sample_coupling(spec, seed_path)?;
        Ok(Realization {
            h,
            w,
            epsilon0: spec.epsilon0,
            seed_path,
        })
    }

    pub fn hamiltonian(&self, spec: &EnsembleSpec) -> Result<DMatrix<Complex64>, EnsembleError> {
        let spec = spec.with_epsilon0(self.epsilon0);
        assemble(&spec, &self.h, &self.w)
    }
}

/// Real symmetric tridiagonal matrix: `diag[i]` and `off[i]` coupling
/// `i ↔ i+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

/// Tridiagonal β-Hermite model whose eigenvalues have exactly the joint law
/// of the distinct dot levels produced by [`sample_dot`] (Kramers-reduced for
/// class S).
///
/// Diagonal `s·N(0,1)`, off-diagonal `s·χ_{β(N-k)}/√2`, with the scale `s`
/// chosen so that the semicircle radius is `2λ`.
pub fn sample_tridiagonal_dot(
    spec: &EnsembleSpec,
    seed: SeedPath,
) -> Result<SymTridiagonal, EnsembleError> {
    spec.validate()?;
    if spec.bath != Bath::Rmt {
        return Err(EnsembleError::WrongBath { expected: Bath::Rmt });
    }
    let n = spec.n;
    let beta = spec.class.beta();
    let scale = 2.0 * spec.lambda / (2.0 * beta * n as f64).sqrt();
    let mut rng = seed.rng(Substream::Dot);
    let diag: Vec<f64> = (0..n).map(|_| normal(&mut rng, scale)).collect();
    let mut off = Vec::with_capacity(n - 1);
    for k in 1..n {
        let dof = beta * (n - k) as f64;
        let chi2 = ChiSquared::new(dof).map_err(|e| EnsembleError::InvalidSpec(e.to_string()))?;
        let x: f64 = chi2.sample(&mut rng);
        off.push(scale * (x / 2.0).sqrt());
    }
    Ok(SymTridiagonal { diag, off })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_antihermitian(a: &DMatrix<Complex64>) -> f64 {
        let d = a - a.adjoint();
        d.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn spec_validation() {
        assert!(EnsembleSpec::new(SymmetryClass::Unitary, 1, 1.0, 0.1).is_err());
        assert!(EnsembleSpec::new(SymmetryClass::Unitary, 4, 0.0, 0.1).is_err());
        assert!(EnsembleSpec::new(SymmetryClass::Unitary, 4, 1.0, -0.1).is_err());
        assert!(EnsembleSpec::new(SymmetryClass::Unitary, 4, 1.0, f64::INFINITY).is_err());
        let s = EnsembleSpec::from_gamma(SymmetryClass::Orthogonal, 400, 1.0, 46.0).unwrap();
        assert!((s.gamma() - 46.0).abs() < 1e-12);
        assert_eq!(s.epsilon0, 0.0);
        assert_eq!(s.bath, Bath::Rmt);
    }

    #[test]
    fn time_units() {
        let s = EnsembleSpec::new(SymmetryClass::Unitary, 999, 1.0, 0.01).unwrap();
        // τ = tλ/(2N)
        let t = 123.0;
        assert!((s.tau_from_time(t) - t / (2.0 * 999.0)).abs() < 1e-15);
        assert!((s.time_from_tau(s.tau_from_time(t)) - t).abs() < 1e-12);
    }

    #[test]
    fn class_parsing() {
        assert_eq!("gue".parse::<SymmetryClass>().unwrap(), SymmetryClass::Unitary);
        assert_eq!("O".parse::<SymmetryClass>().unwrap(), SymmetryClass::Orthogonal);
        assert_eq!("symplectic".parse::<SymmetryClass>().unwrap(), SymmetryClass::Symplectic);
        assert!("X".parse::<SymmetryClass>().is_err());
    }

    #[test]
    fn seed_paths_are_independent_of_generation_order() {
        let spec = EnsembleSpec::new(SymmetryClass::Unitary, 6, 1.0, 0.3).unwrap();
        let a = Realization::sample(&spec, SeedPath::new(7, 3)).unwrap();
        let _ = Realization::sample(&spec, SeedPath::new(7, 2)).unwrap();
        let b = Realization::sample(&spec, SeedPath::new(7, 3)).unwrap();
        assert_eq!(a.h, b.h);
        assert_eq!(a.w, b.w);
        let c = Realization::sample(&spec, SeedPath::new(7, 4)).unwrap();
        assert_ne!(a.h, c.h);
        // dot and coupling draw from disjoint regions
        assert_ne!(a.h[(0, 1)], a.w[(0, 0)]);
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
    }

    #[test]
    fn sampled_matrices_are_hermitian() {
        for class in SymmetryClass::ALL {
            let spec = EnsembleSpec::new(class, 7, 1.3, 0.4).unwrap();
            let r = Realization::sample(&spec, SeedPath::new(11, 0)).unwrap();
            assert_eq!(max_antihermitian(&r.h), 0.0);
            let full = r.hamiltonian(&spec).unwrap();
            assert_eq!(full.nrows(), spec.full_dim());
            assert_eq!(max_antihermitian(&full), 0.0);
        }
    }

    #[test]
    fn orthogonal_class_is_real() {
        let spec = EnsembleSpec::new(SymmetryClass::Orthogonal, 10, 1.0, 0.2).unwrap();
        let r = Realization::sample(&spec, SeedPath::new(5, 5)).unwrap();
        assert!(r.h.iter().all(|z| z.im == 0.0));
        assert!(r.w.iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn symplectic_structure() {
        let spec = EnsembleSpec::new(SymmetryClass::Symplectic, 5, 1.0, 0.5).unwrap();
        let r = Realization::sample(&spec, SeedPath::new(3, 1)).unwrap();
        let n = spec.n;
        for k in 0..n {
            for l in 0..n {
                // [[A, B], [-B*, A*]] with B antisymmetric
                assert_eq!(r.h[(n + k, n + l)], r.h[(k, l)].conj());
                assert_eq!(r.h[(n + k, l)], -r.h[(k, n + l)].conj());
                assert_eq!(r.h[(k, n + l)], -r.h[(l, n + k)]);
            }
            assert_eq!(r.w[(1, k)], -r.w[(0, n + k)].conj());
            assert_eq!(r.w[(1, n + k)], r.w[(0, k)].conj());
        }
    }

    #[test]
    fn zero_coupling_gives_zero_vector() {
        for class in SymmetryClass::ALL {
            let spec = EnsembleSpec::new(class, 8, 1.0, 0.0).unwrap();
            let w = sample_coupling(&spec, SeedPath::new(1, 1)).unwrap();
            assert!(w.iter().all(|z| z.norm() == 0.0));
        }
    }

    #[test]
    fn assemble_small_cases() {
        let spec = EnsembleSpec::new(SymmetryClass::Unitary, 2, 1.0, 0.0).unwrap();
        let zero = Complex64::new(0.0, 0.0);
        let h = DMatrix::from_element(2, 2, zero);
        let w = DMatrix::from_element(1, 2, zero);
        let full = assemble(&spec, &h, &w).unwrap();
        assert_eq!(full, DMatrix::from_element(3, 3, zero));

        let bad = DMatrix::from_element(1, 3, zero);
        assert!(matches!(
            assemble(&spec, &h, &bad),
            Err(EnsembleError::Dimension { .. })
        ));
    }

    #[test]
    fn assembled_three_level_spectrum() {
        // W = (1, 0), H = 0: eigenvalues -1, 0, 1 (roots of e(e² - 1)).
        let spec = EnsembleSpec::new(SymmetryClass::Unitary, 2, 1.0, 0.0).unwrap();
        let zero = Complex64::new(0.0, 0.0);
        let h = DMatrix::from_element(2, 2, zero);
        let mut w = DMatrix::from_element(1, 2, zero);
        w[(0, 0)] = Complex64::new(1.0, 0.0);
        let full = assemble(&spec, &h, &w).unwrap();
        let mut ev: Vec<f64> = full.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        for (got, want) in ev.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn wrong_bath_is_rejected() {
        let spec = EnsembleSpec::new(SymmetryClass::Unitary, 4, 1.0, 0.1).unwrap();
        assert!(sample_poisson_dot(&spec, SeedPath::new(0, 0)).is_err());
        let p = spec.with_bath(Bath::Poisson);
        assert!(sample_dot(&p, SeedPath::new(0, 0)).is_err());
        assert!(sample_tridiagonal_dot(&p, SeedPath::new(0, 0)).is_err());
    }

    #[test]
    fn poisson_levels_sorted_and_bounded() {
        let spec = EnsembleSpec::new(SymmetryClass::Unitary, 4, 1.0, 0.1)
            .unwrap()
            .with_bath(Bath::Poisson);
        let h = sample_poisson_dot(&spec, SeedPath::new(9, 0)).unwrap();
        let d: Vec<f64> = (0..4).map(|k| h[(k, k)].re).collect();
        assert!(d.windows(2).all(|p| p[0] <= p[1]));
        assert!(h.iter().enumerate().all(|(i, z)| i % 5 == 0 || z.norm() == 0.0));

        let big = EnsembleSpec { n: 1000, ..spec };
        let levels = poisson_levels(&big, SeedPath::new(9, 1)).unwrap();
        assert!(levels.iter().all(|e| (-2.0..=2.0).contains(e)));
    }

    #[test]
    fn coupling_weights_follow_level_row() {
        let spec = EnsembleSpec::new(SymmetryClass::Symplectic, 3, 1.0, 0.7).unwrap();
        let w = sample_coupling(&spec, SeedPath::new(2, 2)).unwrap();
        let z = coupling_weights(&spec, &w);
        for k in 0..3 {
            let row_up = w[(0, k)].norm_sqr() + w[(0, 3 + k)].norm_sqr();
            let row_down = w[(1, k)].norm_sqr() + w[(1, 3 + k)].norm_sqr();
            assert_eq!(z[k], row_up);
            assert!((row_up - row_down).abs() < 1e-15);
        }
    }
}
