//! Fixed inputs shared by the benchmarks.

use leveldot::ensembles::{EnsembleSpec, SeedPath, SymmetryClass};
use leveldot::spectral::{decompose_eigenbasis, dot_levels, OverlapSet};

pub const BENCH_SEED: u64 = 0x5eed;

/// Desk-scale ensemble: `N + 1 = 400` at `γ = 46`.
pub fn desk_spec(class: SymmetryClass) -> EnsembleSpec {
    EnsembleSpec::from_gamma(class, 399, 1.0, 46.0).expect("valid spec")
}

pub fn overlaps(spec: &EnsembleSpec) -> OverlapSet {
    decompose_eigenbasis(spec, SeedPath::new(BENCH_SEED, 0)).expect("decomposition succeeds")
}

/// Sorted dot levels with uniform coupling weights summing to `g λ²`.
pub fn arrowhead_input(spec: &EnsembleSpec) -> (Vec<f64>, Vec<f64>) {
    let poles = dot_levels(spec, SeedPath::new(BENCH_SEED, 0)).expect("dot levels");
    let zeta = vec![spec.g * spec.lambda * spec.lambda / spec.n as f64; poles.len()];
    (poles, zeta)
}
