//! Closed-form and quadrature predictions for the averaged survival
//! probability.
//!
//! Times are Heisenberg-scaled, `τ = tλ/(2N)`, and `γ = gN`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensembles::SymmetryClass;
use crate::numerics::{
    bessel_i01e, erfcx, integrate_1d, integrate_2d, NumericsError, QuadratureResult, Rect, Tolerance,
};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TheoryError {
    #[error("{what} = {value} is outside the domain")]
    Domain { what: &'static str, value: f64 },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

fn require(what: &'static str, value: f64, ok: bool) -> Result<(), TheoryError> {
    if ok && !value.is_nan() {
        Ok(())
    } else {
        Err(TheoryError::Domain { what, value })
    }
}

/// Golden-rule decay rate `Γ = 2gλ`.
pub fn gamma_gr(g: f64, lambda: f64) -> Result<f64, TheoryError> {
    require("g", g, g >= 0.0 && g.is_finite())?;
    require("lambda", lambda, lambda > 0.0 && lambda.is_finite())?;
    Ok(2.0 * g * lambda)
}

/// The same rate written as `2π⟨|W|²⟩ν` with `⟨|W|²⟩ = gλ²/N`, `ν = N/(πλ)`.
pub fn gamma_gr_from_moments(g: f64, lambda: f64, n: usize) -> Result<f64, TheoryError> {
    gamma_gr(g, lambda)?;
    require("n", n as f64, n > 0)?;
    let nf = n as f64;
    Ok(2.0 * PI * (g * lambda * lambda / nf) * (nf / (PI * lambda)))
}

const LARGE_GAMMA_SWITCH: f64 = 50.0;

/// Infinite-time residence probability
/// `1 − γ − √(πγ)(1/2 − γ)e^γ erfc(√γ)`.
///
/// For `γ > 50` the leading terms cancel catastrophically; there the
/// asymptotic expansion of `√(πγ)e^γ erfc(√γ)` is summed directly.
pub fn p_res_closed(gamma: f64) -> Result<f64, TheoryError> {
    require("gamma", gamma, gamma >= 0.0)?;
    if gamma == 0.0 {
        return Ok(1.0);
    }
    if gamma.is_infinite() {
        return Ok(0.0);
    }
    if gamma <= LARGE_GAMMA_SWITCH {
        let s = gamma.sqrt();
        let p = 1.0 - gamma - (PI * gamma).sqrt() * (0.5 - gamma) * erfcx(s);
        return Ok(p.clamp(0.0, 1.0));
    }
    // √(πγ)e^γ erfc(√γ) ~ 1 − 1/(2γ) + D,  D = Σ_{n≥2} (−1)^n (2n−1)!!/(2γ)^n
    let x = 1.0 / (2.0 * gamma);
    let mut term = -x; // n = 1
    let mut d = 0.0_f64;
    let mut n = 1.0_f64;
    loop {
        n += 1.0;
        let next = -term * (2.0 * n - 1.0) * x;
        if next.abs() >= term.abs() || next.abs() <= 1e-18 * d.abs() {
            if next.abs() < term.abs() {
                d += next;
            }
            break;
        }
        d += next;
        term = next;
    }
    Ok(0.25 / gamma + (gamma - 0.5) * d)
}

/// Residence probability from `∫₀^∞ e^{−γt}(1 + t/4)/(1 + t)^{5/2} dt`.
pub fn p_res_integral(gamma: f64) -> Result<QuadratureResult, TheoryError> {
    require("gamma", gamma, gamma >= 0.0 && gamma.is_finite())?;
    let f = |t: f64| (-gamma * t).exp() * (1.0 + 0.25 * t) / (1.0 + t).powf(2.5);
    Ok(integrate_1d(f, 0.0, f64::INFINITY, Tolerance::new(1e-12, 1e-12))?)
}

/// Closed form against its integral representation at one `γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossoverPoint {
    pub gamma: f64,
    pub p_res: f64,
    pub p_res_integral: f64,
    pub discrepancy: f64,
}

pub fn crossover_point(gamma: f64) -> Result<CrossoverPoint, TheoryError> {
    let p_res = p_res_closed(gamma)?;
    let integral = p_res_integral(gamma)?.value;
    Ok(CrossoverPoint {
        gamma,
        p_res,
        p_res_integral: integral,
        discrepancy: (p_res - integral).abs(),
    })
}

/// Quadrature tolerance used by [`p_full`] unless overridden.
pub const P_FULL_TOLERANCE: Tolerance = Tolerance {
    rel: 1e-6,
    abs: 1e-9,
};

/// Survival probability of the unitary class at any coupling, from the
/// two-coordinate integral over the compact (`λ_f ∈ [−1, 1]`) and
/// non-compact (`λ_b ≥ 1`) variables.
///
/// With `λ_f = 1 − v²`, `λ_b = 1 + L s²`, `L = 2τ − v²`, the step function
/// restricting `x = 2τ − λ_b + λ_f ≥ 0` becomes the rectangle
/// `v ∈ [0, √min(2, 2τ)]`, `s ∈ [0, 1]`, and the `1/(λ_b − λ_f)` corner
/// singularity is cancelled by the Jacobian. Bessel factors enter only as
/// `e^{−z}I_k(z)`, with the remaining exponential `e^{−2γx(λ_b − μ_b)}`
/// bounded by one.
pub fn p_full(tau: f64, gamma: f64, tol: Tolerance) -> Result<QuadratureResult, TheoryError> {
    require("tau", tau, tau >= 0.0 && tau.is_finite())?;
    require("gamma", gamma, gamma > 0.0 && gamma.is_finite())?;
    let decay = (-4.0 * gamma * tau).exp();
    if tau == 0.0 {
        return Ok(QuadratureResult {
            value: 1.0,
            abs_error_estimate: 0.0,
            evaluations: 0,
        });
    }
    let v_max = (2.0 * tau).min(2.0).sqrt();
    let integrand = |v: f64, s: f64| {
        let l = 2.0 * tau - v * v;
        if l <= 0.0 || s <= 0.0 || v <= 0.0 {
            return 0.0;
        }
        let ls2 = l * s * s;
        let x = l * (1.0 - s * s);
        if x <= 0.0 {
            return 0.0;
        }
        let lb = 1.0 + ls2;
        let mb = s * (l * (2.0 + ls2)).sqrt();
        let gap = 1.0 / (lb + mb); // λ_b − μ_b without cancellation
        let z = 2.0 * gamma * x * mb;
        let (i0, i1) = bessel_i01e(z);
        let bracket = lb * i0 - mb * i1;
        x * x * (-2.0 * gamma * x * gap).exp() * bracket * 4.0 * l * s * v / (ls2 + v * v)
    };
    let scale = 2.0 * gamma * gamma;
    let inner = Tolerance::new(tol.rel, tol.abs / scale);
    let q = integrate_2d(integrand, Rect::new(0.0, v_max, 0.0, 1.0), inner).map_err(|e| match e {
        NumericsError::NonConvergent { best, subdivisions } => NumericsError::NonConvergent {
            best: QuadratureResult {
                value: decay + scale * best.value,
                abs_error_estimate: scale * best.abs_error_estimate,
                evaluations: best.evaluations,
            },
            subdivisions,
        },
        other => other,
    })?;
    Ok(QuadratureResult {
        value: decay + scale * q.value,
        abs_error_estimate: scale * q.abs_error_estimate,
        evaluations: q.evaluations,
    })
}

/// Large-coupling profile: exponential decay, half plateau growing linearly
/// until `τ = 1`, then the plateau `1/γ`.
pub fn p_large_gamma(tau: f64, gamma: f64) -> Result<f64, TheoryError> {
    require("tau", tau, tau >= 0.0)?;
    require("gamma", gamma, gamma > 0.0)?;
    let decay = (-4.0 * gamma * tau).exp();
    Ok(if tau <= 1.0 {
        decay + (1.0 + tau) / (2.0 * gamma)
    } else {
        decay + 1.0 / gamma
    })
}

/// Unit-normalized spectral form factor of the Gaussian ensembles.
/// Class S diverges logarithmically at `τ = 1` and returns `+∞` there.
pub fn sff_analytic(class: SymmetryClass, tau: f64) -> Result<f64, TheoryError> {
    require("tau", tau, tau >= 0.0)?;
    Ok(match class {
        SymmetryClass::Unitary => tau.min(1.0),
        SymmetryClass::Orthogonal => {
            if tau < 1.0 {
                tau * (2.0 - (2.0 * tau).ln_1p())
            } else if tau.is_infinite() {
                1.0
            } else {
                2.0 - tau * ((2.0 * tau + 1.0) / (2.0 * tau - 1.0)).ln()
            }
        }
        SymmetryClass::Symplectic => {
            if tau >= 2.0 {
                1.0
            } else if tau == 1.0 {
                f64::INFINITY
            } else {
                0.25 * tau * (2.0 - (1.0 - tau).abs().ln())
            }
        }
    })
}

/// Coefficients `(a, b)` of the class profile `e^{−4γτ} + (a + bK(τ))/(2γ)`.
pub fn class_coefficients(class: SymmetryClass) -> (f64, f64) {
    match class {
        SymmetryClass::Unitary => (1.0, 1.0),
        SymmetryClass::Orthogonal => (2.0, 1.0),
        SymmetryClass::Symplectic => (1.0, 2.0),
    }
}

pub fn p_class_profile(class: SymmetryClass, tau: f64, gamma: f64) -> Result<f64, TheoryError> {
    require("gamma", gamma, gamma > 0.0)?;
    let (a, b) = class_coefficients(class);
    let k = sff_analytic(class, tau)?;
    Ok((-4.0 * gamma * tau).exp() + (a + b * k) / (2.0 * gamma))
}

/// Late-time value of the class profile, `(a + b)/(2γ)`.
pub fn profile_plateau(class: SymmetryClass, gamma: f64) -> Result<f64, TheoryError> {
    require("gamma", gamma, gamma > 0.0)?;
    let (a, b) = class_coefficients(class);
    Ok((a + b) / (2.0 * gamma))
}

/// Minimum of the class profile over `τ ∈ (0, 1)` and its location. Tends to
/// `a/(2γ)` as `γ → ∞`; at finite `γ` the form factor's initial rise lifts it
/// slightly.
pub fn profile_offset(class: SymmetryClass, gamma: f64) -> Result<(f64, f64), TheoryError> {
    require("gamma", gamma, gamma > 0.0)?;
    let f = |t: f64| p_class_profile(class, t, gamma).unwrap_or(f64::INFINITY);
    // Coarse scan then golden-section refinement; the profile is unimodal
    // below τ = 1.
    let n = 2000;
    let (mut best_t, mut best) = (0.0, f(0.0));
    for k in 1..n {
        let t = k as f64 / n as f64;
        let v = f(t);
        if v < best {
            best = v;
            best_t = t;
        }
    }
    let h = 1.0 / n as f64;
    let (mut a, mut b) = ((best_t - h).max(0.0), (best_t + h).min(1.0 - 1e-12));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let t = 0.5 * (a + b);
    Ok((f(t), t))
}

/// Which prediction a [`TheoryCurve`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Formula {
    #[serde(rename = "full_eq5")]
    Full,
    #[serde(rename = "large_gamma")]
    LargeGamma,
    #[serde(rename = "sff_profile")]
    Profile,
}

impl Formula {
    pub const ALL: [Formula; 3] = [Formula::Full, Formula::LargeGamma, Formula::Profile];

    pub fn tag(self) -> &'static str {
        match self {
            Formula::Full => "full_eq5",
            Formula::LargeGamma => "large_gamma",
            Formula::Profile => "sff_profile",
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Formula {
    type Err = TheoryError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Formula::ALL
            .into_iter()
            .find(|f| f.tag() == s)
            .ok_or(TheoryError::Domain {
                what: "formula",
                value: f64::NAN,
            })
    }
}

/// Prediction on a τ grid with per-point error estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryCurve {
    pub taus: Vec<f64>,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub formula: Formula,
    pub gamma: f64,
    pub class: SymmetryClass,
    /// Indices where quadrature did not reach the tolerance; the stored
    /// value is the best estimate.
    pub failed: Vec<usize>,
}

/// Evaluates `formula` on every grid point in parallel. Quadrature failures
/// are recorded in [`TheoryCurve::failed`] rather than aborting the curve.
pub fn theory_curve(
    formula: Formula,
    class: SymmetryClass,
    gamma: f64,
    taus: &[f64],
    tol: Tolerance,
) -> Result<TheoryCurve, TheoryError> {
    require("gamma", gamma, gamma > 0.0 && gamma.is_finite())?;
    if formula == Formula::Full && class != SymmetryClass::Unitary {
        return Err(TheoryError::Domain {
            what: "full formula is unitary-only; class beta",
            value: class.beta(),
        });
    }
    let points: Vec<Result<(f64, f64, bool), TheoryError>> = taus
        .par_iter()
        .map(|&tau| match formula {
            Formula::Full => match p_full(tau, gamma, tol) {
                Ok(q) => Ok((q.value, q.abs_error_estimate, false)),
                Err(TheoryError::Numerics(NumericsError::NonConvergent { best, .. })) => {
                    Ok((best.value, best.abs_error_estimate, true))
                }
                Err(e) => Err(e),
            },
            Formula::LargeGamma => p_large_gamma(tau, gamma).map(|v| (v, 0.0, false)),
            Formula::Profile => p_class_profile(class, tau, gamma).map(|v| (v, 0.0, false)),
        })
        .collect();
    let mut curve = TheoryCurve {
        taus: taus.to_vec(),
        values: Vec::with_capacity(taus.len()),
        errors: Vec::with_capacity(taus.len()),
        formula,
        gamma,
        class,
        failed: Vec::new(),
    };
    for (i, p) in points.into_iter().enumerate() {
        let (v, e, failed) = p?;
        curve.values.push(v);
        curve.errors.push(e);
        if failed {
            curve.failed.push(i);
        }
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values computed with 30-digit arithmetic.
    const P_RES_REF: [(f64, f64); 8] = [
        (0.001, 0.97200177653443149662),
        (0.022, 0.87088298381289164708),
        (0.46, 0.51429421472302205439),
        (1.0, 0.37893607807065605302),
        (10.0, 0.082822822837628906097),
        (46.0, 0.020746284411549708805),
        (100.0, 0.0097821885347398643834),
        (1000.0, 0.00099775746736355892222),
    ];

    #[test]
    fn golden_rule_rate() {
        assert_eq!(gamma_gr(0.0, 1.0).unwrap(), 0.0);
        assert_eq!(gamma_gr(1.0, 1.0).unwrap(), 2.0);
        assert!(gamma_gr(-1.0, 1.0).is_err());
        let a = gamma_gr_from_moments(0.3, 1.7, 55).unwrap();
        assert!((a - gamma_gr(0.3, 1.7).unwrap()).abs() < 1e-14);
        // Γt = 4γτ with τ = tλ/(2N), γ = gN
        let (g, n, lambda, t) = (0.013, 321.0, 0.8, 17.5);
        let lhs = gamma_gr(g, lambda).unwrap() * t;
        let rhs = 4.0 * (g * n) * (t * lambda / (2.0 * n));
        assert!((lhs - rhs).abs() < 1e-13);
    }

    #[test]
    fn residence_reference_values() {
        for (g, want) in P_RES_REF {
            let got = p_res_closed(g).unwrap();
            assert!((got - want).abs() <= 1e-13 * want.max(1e-3), "γ={g}: {got} vs {want}");
        }
        assert_eq!(p_res_closed(0.0).unwrap(), 1.0);
        assert!(p_res_closed(-1.0).is_err());
        assert!(p_res_closed(1e6).unwrap() > 0.0);
    }

    #[test]
    fn residence_branches_join() {
        let below = p_res_closed(LARGE_GAMMA_SWITCH).unwrap();
        let above = p_res_closed(LARGE_GAMMA_SWITCH * (1.0 + 1e-12)).unwrap();
        assert!((below - above).abs() < 1e-12);
    }

    #[test]
    fn residence_large_gamma_asymptote() {
        // 1/γ − 9/(4γ²) + O(γ⁻³)
        for g in [100.0, 1000.0, 1e4] {
            let p = p_res_closed(g).unwrap();
            let approx = 1.0 / g - 9.0 / (4.0 * g * g);
            assert!((p - approx).abs() < 40.0 / g.powi(3), "γ={g}");
        }
    }

    #[test]
    fn residence_is_monotone() {
        let mut prev = 1.0;
        for k in 1..=200 {
            let g = 10f64.powf(-3.0 + 6.0 * k as f64 / 200.0);
            let p = p_res_closed(g).unwrap();
            assert!(p < prev);
            prev = p;
        }
    }

    #[test]
    fn residence_integral_matches() {
        assert!((p_res_integral(0.0).unwrap().value - 1.0).abs() < 1e-10);
        for (g, want) in P_RES_REF {
            assert!((p_res_integral(g).unwrap().value - want).abs() < 1e-10);
        }
        let ten = p_res_integral(10.0).unwrap().value;
        assert!((ten * 10.0 - 1.0).abs() < 0.3);
    }

    #[test]
    fn full_formula_boundary_and_limits() {
        for g in [0.022, 0.46, 46.0] {
            assert_eq!(p_full(0.0, g, P_FULL_TOLERANCE).unwrap().value, 1.0);
        }
        assert!(p_full(-1.0, 1.0, P_FULL_TOLERANCE).is_err());
        assert!(p_full(1.0, 0.0, P_FULL_TOLERANCE).is_err());
    }

    #[test]
    fn full_formula_reference_points() {
        // Independent evaluation with a different quadrature scheme.
        let cases = [
            (46.0, 0.5, 0.015480),
            (46.0, 1.0, 0.020586),
            (46.0, 2.0, 0.0207463),
            (0.46, 0.5, 0.47103),
            (0.46, 1.0, 0.42532),
            (0.46, 2.0, 0.51070),
            (0.022, 0.5, 0.95730),
            (0.022, 1.0, 0.91871),
            (0.022, 2.0, 0.86252),
        ];
        for (g, tau, want) in cases {
            let got = p_full(tau, g, P_FULL_TOLERANCE).unwrap().value;
            assert!((got - want).abs() < 1e-5 * want + 1e-6, "γ={g}, τ={tau}: {got}");
        }
    }

    #[test]
    fn large_gamma_profile() {
        assert!((p_large_gamma(0.0, 10.0).unwrap() - 1.05).abs() < 1e-15);
        assert_eq!(p_large_gamma(2.0, 46.0).unwrap(), (-4.0f64 * 46.0 * 2.0).exp() + 1.0 / 46.0);
        let left = p_large_gamma(1.0 - 1e-12, 46.0).unwrap();
        let right = p_large_gamma(1.0 + 1e-12, 46.0).unwrap();
        assert!((left - right).abs() < 1e-12);
    }

    #[test]
    fn form_factors() {
        assert_eq!(sff_analytic(SymmetryClass::Unitary, 0.5).unwrap(), 0.5);
        assert_eq!(sff_analytic(SymmetryClass::Unitary, 3.0).unwrap(), 1.0);
        let o1 = sff_analytic(SymmetryClass::Orthogonal, 1.0).unwrap();
        assert!((o1 - (2.0 - 3f64.ln())).abs() < 1e-15);
        let below = sff_analytic(SymmetryClass::Orthogonal, 1.0 - 1e-9).unwrap();
        assert!((o1 - below).abs() < 1e-8);
        assert_eq!(sff_analytic(SymmetryClass::Symplectic, 3.0).unwrap(), 1.0);
        assert_eq!(sff_analytic(SymmetryClass::Symplectic, 1.0).unwrap(), f64::INFINITY);
        let s2 = sff_analytic(SymmetryClass::Symplectic, 2.0 - 1e-12).unwrap();
        assert!((s2 - 1.0).abs() < 1e-10);
        for class in SymmetryClass::ALL {
            assert!((sff_analytic(class, 1e3).unwrap() - 1.0).abs() < 1e-6);
            assert_eq!(sff_analytic(class, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn class_profiles() {
        let g = 1e4;
        for (class, ratio) in [
            (SymmetryClass::Unitary, 2.0),
            (SymmetryClass::Orthogonal, 1.5),
            (SymmetryClass::Symplectic, 3.0),
        ] {
            let pl = profile_plateau(class, g).unwrap();
            let (off, at) = profile_offset(class, g).unwrap();
            assert!(at < 0.01);
            assert!((pl / off - ratio).abs() < 0.01 * ratio, "{class}: {}", pl / off);
        }
        let late = p_class_profile(SymmetryClass::Unitary, 7.0, 46.0).unwrap();
        assert!((late - 1.0 / 46.0).abs() < 1e-15);
    }

    #[test]
    fn curves_flag_nothing_on_easy_grid() {
        let taus = [0.0, 0.1, 1.0, 3.0];
        let c = theory_curve(Formula::Full, SymmetryClass::Unitary, 1.0, &taus, P_FULL_TOLERANCE).unwrap();
        assert_eq!(c.values[0], 1.0);
        assert!(c.failed.is_empty());
        assert!(theory_curve(Formula::Full, SymmetryClass::Orthogonal, 1.0, &taus, P_FULL_TOLERANCE).is_err());
        let p = theory_curve(Formula::Profile, SymmetryClass::Orthogonal, 46.0, &taus, P_FULL_TOLERANCE).unwrap();
        assert_eq!(p.formula.tag(), "sff_profile");
        assert_eq!("large_gamma".parse::<Formula>().unwrap(), Formula::LargeGamma);
    }
}
