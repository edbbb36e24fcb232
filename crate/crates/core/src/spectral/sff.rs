use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::decompose::dot_levels;
use super::survival::{ensemble_moments, DEFAULT_CHUNK};
use super::SpectralError;
use crate::ensembles::{Bath, EnsembleSpec};

/// Unfolding window: levels with `|E| < SFF_WINDOW·λ`.
pub const SFF_WINDOW: f64 = 0.5;

/// Ensemble-averaged connected form factor of the bare dot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SffCurve {
    pub taus: Vec<f64>,
    pub k: Vec<f64>,
    pub stderr: Vec<f64>,
    pub samples: u64,
    /// Mean number of unfolded levels in the window.
    pub mean_levels: f64,
}

/// Integrated density of distinct levels, normalized to `[0, 1]`.
pub fn level_cdf(spec: &EnsembleSpec, e: f64) -> f64 {
    let r = 2.0 * spec.lambda;
    let x = e.clamp(-r, r);
    match spec.bath {
        Bath::Rmt => {
            let lam2 = spec.lambda * spec.lambda;
            0.5 + x * (r * r - x * x).sqrt() / (4.0 * PI * lam2) + (x / r).asin() / PI
        }
        Bath::Poisson => (x + r) / (2.0 * r),
    }
}

/// `K(τ) = (⟨|Z|²⟩ − |⟨Z⟩|²)/⟨M⟩` with `Z(τ) = Σ_μ e^{2πi x_μ τ}` over the
/// `M` unfolded levels `x_μ = N·F(E_μ)` in the band-centre window. The
/// coupling is ignored; class S uses one level per Kramers pair.
pub fn empirical_sff(
    spec: &EnsembleSpec,
    n_samples: u64,
    taus: &[f64],
    master_seed: u64,
) -> Result<SffCurve, SpectralError> {
    spec.validate()?;
    let nt = taus.len();
    let n = spec.n as f64;
    let edge = SFF_WINDOW * spec.lambda;
    let observable = |seed| {
        let levels = dot_levels(spec, seed)?;
        let unfolded: Vec<f64> = levels
            .iter()
            .filter(|e| e.abs() < edge)
            .map(|&e| n * level_cdf(spec, e))
            .collect();
        let mut out = vec![0.0; 3 * nt + 1];
        for (j, &tau) in taus.iter().enumerate() {
            let (mut re, mut im) = (0.0, 0.0);
            for &x in &unfolded {
                let (s, c) = (2.0 * PI * x * tau).sin_cos();
                re += c;
                im += s;
            }
            out[j] = re * re + im * im;
            out[nt + j] = re;
            out[2 * nt + j] = im;
        }
        out[3 * nt] = unfolded.len() as f64;
        Ok(out)
    };
    let (m, _) = ensemble_moments(n_samples, master_seed, DEFAULT_CHUNK, 3 * nt + 1, observable)?;
    let err = m.stderr();
    let levels = m.mean[3 * nt];
    if !(levels > 0.0) {
        return Err(SpectralError::Grid("no levels inside the unfolding window".into()));
    }
    let k = (0..nt)
        .map(|j| (m.mean[j] - m.mean[nt + j].powi(2) - m.mean[2 * nt + j].powi(2)) / levels)
        .collect();
    let stderr = (0..nt).map(|j| err[j] / levels).collect();
    Ok(SffCurve {
        taus: taus.to_vec(),
        k,
        stderr,
        samples: m.count,
        mean_levels: levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::SymmetryClass;

    #[test]
    fn cdf_limits() {
        let spec = EnsembleSpec::new(SymmetryClass::Unitary, 10, 1.5, 0.0).unwrap();
        assert!((level_cdf(&spec, -3.0)).abs() < 1e-15);
        assert!((level_cdf(&spec, 3.0) - 1.0).abs() < 1e-15);
        assert!((level_cdf(&spec, 0.0) - 0.5).abs() < 1e-15);
        // density at the centre is 1/(πλ)
        let h = 1e-6;
        let d = (level_cdf(&spec, h) - level_cdf(&spec, -h)) / (2.0 * h);
        assert!((d - 1.0 / (PI * 1.5)).abs() < 1e-9);
    }

    #[test]
    fn poisson_form_factor_is_flat() {
        let spec = EnsembleSpec::new(SymmetryClass::Unitary, 200, 1.0, 0.0)
            .unwrap()
            .with_bath(Bath::Poisson);
        let c = empirical_sff(&spec, 400, &[0.3, 0.7, 2.0], 3).unwrap();
        for (k, e) in c.k.iter().zip(&c.stderr) {
            assert!((k - 1.0).abs() < 5.0 * e + 0.05, "{k} ± {e}");
        }
    }
}
