//! Eigen-solvers: implicit QL for symmetric tridiagonal matrices, the
//! secular equation of an arrowhead matrix, and dense Hermitian
//! diagonalization.

use nalgebra::{ComplexField, DMatrix};

use super::SpectralError;
use crate::ensembles::SymTridiagonal;

const MAX_QL_SWEEPS: usize = 60;
const MAX_SECULAR_ITERATIONS: usize = 200;
const DENSE_MAX_ITERATIONS: usize = 0; // nalgebra: 0 means "until convergence"

/// Eigenvalues (ascending) of a real symmetric tridiagonal matrix.
pub fn tridiagonal_eigenvalues(t: &SymTridiagonal) -> Result<Vec<f64>, SpectralError> {
    let n = t.diag.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    if t.off.len() + 1 != n {
        return Err(SpectralError::Shape(format!(
            "tridiagonal: {} diagonal and {} off-diagonal entries",
            n,
            t.off.len()
        )));
    }
    let mut d = t.diag.clone();
    let mut e = t.off.clone();
    e.push(0.0);

    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_QL_SWEEPS {
                return Err(SpectralError::NonConvergence(format!(
                    "tridiagonal QL: eigenvalue {l} after {MAX_QL_SWEEPS} sweeps"
                )));
            }
            // Wilkinson-type shift from the leading 2x2 block.
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0_f64, 1.0_f64, 0.0_f64);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    if d.iter().any(|x| !x.is_finite()) {
        return Err(SpectralError::NonConvergence(
            "tridiagonal QL produced a non-finite eigenvalue".into(),
        ));
    }
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// How an arrowhead eigenvalue was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootKind {
    /// Root of the secular equation.
    Secular,
    /// Pole whose coupling was negligible; the level weight is zero.
    Deflated,
    /// Second member of a pair of coincident poles; carries no level weight.
    MergedPartner,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrowheadRoot {
    pub energy: f64,
    /// Squared overlap with the level state.
    pub weight: f64,
    pub kind: RootKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrowheadSolution {
    /// Sorted by energy.
    pub roots: Vec<ArrowheadRoot>,
    /// Largest `‖Mv − εv‖` over the normalized eigenvectors.
    pub max_residual: f64,
}

/// Full spectrum of the arrowhead matrix
/// `[[ε₀, w₁ … w_m], [w₁, p₁], …, [w_m, p_m]]`, given the poles `p` (sorted
/// ascending) and the squared couplings `zeta = |w|²`.
///
/// Poles closer than `merge_tol` are combined by a rotation within their
/// subspace; the orthogonal partner decouples with zero level weight.
/// Eigenvalues are roots of `f(x) = x − ε₀ − Σ ζ_k/(x − p_k)`, bracketed
/// between consecutive poles and solved in coordinates centred on the
/// nearer pole. The level weight of the root `x` is
/// `1/(1 + Σ ζ_k/(x − p_k)²)`.
pub fn arrowhead_eigen(
    epsilon0: f64,
    poles: &[f64],
    zeta: &[f64],
    merge_tol: f64,
) -> Result<ArrowheadSolution, SpectralError> {
    if poles.len() != zeta.len() {
        return Err(SpectralError::Shape(format!(
            "arrowhead: {} poles and {} weights",
            poles.len(),
            zeta.len()
        )));
    }
    if poles.windows(2).any(|w| w[1] < w[0]) {
        return Err(SpectralError::Shape("arrowhead poles must be sorted".into()));
    }
    if poles.iter().chain(zeta).any(|x| !x.is_finite()) || zeta.iter().any(|&z| z < 0.0) {
        return Err(SpectralError::Shape(
            "arrowhead input must be finite with non-negative weights".into(),
        ));
    }

    let total: f64 = zeta.iter().sum();
    let scale = poles
        .iter()
        .fold(epsilon0.abs().max(total.sqrt()), |a, p| a.max(p.abs()))
        .max(f64::MIN_POSITIVE);
    let deflate_below = (f64::EPSILON * scale).powi(2);
    let merge_tol = merge_tol.max(0.0);

    let mut roots = Vec::with_capacity(poles.len() + 1);
    let mut active_p: Vec<f64> = Vec::with_capacity(poles.len());
    let mut active_z: Vec<f64> = Vec::with_capacity(poles.len());
    for (&p, &z) in poles.iter().zip(zeta) {
        if let Some(&last) = active_p.last() {
            if p - last <= merge_tol {
                *active_z.last_mut().expect("non-empty") += z;
                roots.push(ArrowheadRoot {
                    energy: p,
                    weight: 0.0,
                    kind: RootKind::MergedPartner,
                });
                continue;
            }
        }
        active_p.push(p);
        active_z.push(z);
    }
    let mut secular_p = Vec::with_capacity(active_p.len());
    let mut secular_z = Vec::with_capacity(active_p.len());
    for (p, z) in active_p.into_iter().zip(active_z) {
        if z <= deflate_below {
            roots.push(ArrowheadRoot {
                energy: p,
                weight: 0.0,
                kind: RootKind::Deflated,
            });
        } else {
            secular_p.push(p);
            secular_z.push(z);
        }
    }

    let mut max_residual: f64 = 0.0;
    let m = secular_p.len();
    if m == 0 {
        roots.push(ArrowheadRoot {
            energy: epsilon0,
            weight: 1.0,
            kind: RootKind::Secular,
        });
    } else {
        let z_sum: f64 = secular_z.iter().sum();
        let spread = z_sum.sqrt();
        let secular = Secular {
            epsilon0,
            poles: &secular_p,
            zeta: &secular_z,
        };
        for j in 0..=m {
            let (energy, weight, residual) = if j == 0 {
                let lo = epsilon0.min(secular_p[0]) - spread;
                secular.outer_root(0, lo - secular_p[0], true)?
            } else if j == m {
                let hi = epsilon0.max(secular_p[m - 1]) + spread;
                secular.outer_root(m - 1, hi - secular_p[m - 1], false)?
            } else {
                secular.inner_root(j - 1)?
            };
            max_residual = max_residual.max(residual);
            roots.push(ArrowheadRoot {
                energy,
                weight,
                kind: RootKind::Secular,
            });
        }
    }
    roots.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    Ok(ArrowheadSolution {
        roots,
        max_residual,
    })
}

struct Secular<'a> {
    epsilon0: f64,
    poles: &'a [f64],
    zeta: &'a [f64],
}

/// Secular function evaluated at `origin + delta`.
struct ShiftedEval {
    f: f64,
    df: f64,
    /// `Σ ζ/(x − p)²`, the unnormalized eigenvector norm minus one.
    norm: f64,
    /// Magnitude of the largest term, for the rounding-level stopping test.
    magnitude: f64,
}

impl Secular<'_> {
    fn eval(&self, origin: usize, delta: f64) -> ShiftedEval {
        let o = self.poles[origin];
        let mut sum = 0.0;
        let mut norm = 0.0;
        let mut magnitude = (delta + o - self.epsilon0).abs();
        for (k, (&p, &z)) in self.poles.iter().zip(self.zeta).enumerate() {
            let diff = if k == origin { delta } else { delta - (p - o) };
            let term = z / diff;
            sum += term;
            norm += term / diff;
            magnitude += term.abs();
        }
        let f = delta + o - self.epsilon0 - sum;
        ShiftedEval {
            f,
            df: 1.0 + norm,
            norm,
            magnitude,
        }
    }

    /// Root between poles `j` and `j+1`.
    fn inner_root(&self, j: usize) -> Result<(f64, f64, f64), SpectralError> {
        let gap = self.poles[j + 1] - self.poles[j];
        let mid = self.eval(j, 0.5 * gap);
        if mid.f >= 0.0 {
            // f is increasing; the root lies in the left half, near pole j.
            self.solve(j, 0.0, 0.5 * gap)
        } else {
            self.solve(j + 1, -0.5 * gap, 0.0)
        }
    }

    fn outer_root(
        &self,
        origin: usize,
        far: f64,
        left: bool,
    ) -> Result<(f64, f64, f64), SpectralError> {
        if left {
            self.solve(origin, far, 0.0)
        } else {
            self.solve(origin, 0.0, far)
        }
    }

    /// Safeguarded Newton iteration for the root in the open bracket
    /// `(lo, hi)` (shifted coordinates; the origin pole sits at one end).
    fn solve(&self, origin: usize, mut lo: f64, mut hi: f64) -> Result<(f64, f64, f64), SpectralError> {
        let o = self.poles[origin];
        let mut delta = 0.5 * (lo + hi);
        for _ in 0..MAX_SECULAR_ITERATIONS {
            let ev = self.eval(origin, delta);
            if ev.f.abs() <= 4.0 * f64::EPSILON * ev.magnitude || ev.f == 0.0 {
                return Ok(self.finish(origin, delta, ev));
            }
            if ev.f < 0.0 {
                lo = delta;
            } else {
                hi = delta;
            }
            // Newton on q(δ) = δ·f(δ) when the origin pole dominates, which
            // linearizes the 1/δ singularity; plain Newton otherwise.
            let zo = self.zeta[origin];
            let q = delta * ev.f;
            let dq = ev.f + delta * ev.df;
            let mut next = if dq != 0.0 && (zo / delta).abs() > 0.5 * ev.magnitude {
                delta - q / dq
            } else {
                delta - ev.f / ev.df
            };
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            let tol = 2.0 * f64::EPSILON * delta.abs().max(next.abs());
            if (next - delta).abs() <= tol || (hi - lo) <= 2.0 * f64::EPSILON * (lo.abs().max(hi.abs())) {
                let ev = self.eval(origin, next);
                return Ok(self.finish(origin, next, ev));
            }
            delta = next;
        }
        Err(SpectralError::NonConvergence(format!(
            "secular equation near pole {} did not converge",
            o
        )))
    }

    fn finish(&self, origin: usize, delta: f64, ev: ShiftedEval) -> (f64, f64, f64) {
        let weight = 1.0 / (1.0 + ev.norm);
        let residual = weight.sqrt() * ev.f.abs();
        (self.poles[origin] + delta, weight, residual)
    }
}

/// Eigen-decomposition of a dense Hermitian (or real symmetric) matrix,
/// eigenvalues ascending with eigenvectors as matching columns.
pub fn hermitian_eigen<T>(a: &DMatrix<T>) -> Result<(Vec<f64>, DMatrix<T>), SpectralError>
where
    T: ComplexField<RealField = f64>,
{
    if !a.is_square() {
        return Err(SpectralError::Shape(format!(
            "matrix is {}x{}, expected square",
            a.nrows(),
            a.ncols()
        )));
    }
    let eig = a
        .clone()
        .try_symmetric_eigen(f64::EPSILON, DENSE_MAX_ITERATIONS)
        .ok_or_else(|| SpectralError::NonConvergence("dense Hermitian eigensolver".into()))?;
    let mut order: Vec<usize> = (0..a.nrows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(SpectralError::NonConvergence(
            "dense eigensolver produced a non-finite eigenvalue".into(),
        ));
    }
    let vectors = DMatrix::from_fn(a.nrows(), a.ncols(), |r, c| eig.eigenvectors[(r, order[c])].clone());
    Ok((values, vectors))
}

/// `max_α ‖A v_α − ε_α v_α‖`.
pub fn max_residual<T>(a: &DMatrix<T>, values: &[f64], vectors: &DMatrix<T>) -> f64
where
    T: ComplexField<RealField = f64>,
{
    let av = a * vectors;
    let mut worst: f64 = 0.0;
    for (c, &e) in values.iter().enumerate() {
        let mut s = 0.0;
        for r in 0..a.nrows() {
            let d = av[(r, c)].clone() - vectors[(r, c)].clone() * T::from_real(e);
            s += d.modulus_squared();
        }
        worst = worst.max(s.sqrt());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn dense_tridiagonal(t: &SymTridiagonal) -> DMatrix<f64> {
        let n = t.diag.len();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                t.diag[i]
            } else if i + 1 == j {
                t.off[i]
            } else if j + 1 == i {
                t.off[j]
            } else {
                0.0
            }
        })
    }

    #[test]
    fn ql_matches_dense_solver() {
        let n = 40;
        let t = SymTridiagonal {
            diag: (0..n).map(|i| ((i * 7919) % 13) as f64 * 0.3 - 1.7).collect(),
            off: (0..n - 1).map(|i| ((i * 104729) % 11) as f64 * 0.2 + 0.05).collect(),
        };
        let ql = tridiagonal_eigenvalues(&t).unwrap();
        let (dense, _) = hermitian_eigen(&dense_tridiagonal(&t)).unwrap();
        for (a, b) in ql.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn ql_known_spectrum() {
        // Discrete Laplacian: 2 - 2cos(kπ/(n+1)).
        let n = 25;
        let t = SymTridiagonal {
            diag: vec![2.0; n],
            off: vec![-1.0; n - 1],
        };
        let ev = tridiagonal_eigenvalues(&t).unwrap();
        for (k, e) in ev.iter().enumerate() {
            let want = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((e - want).abs() < 1e-13);
        }
    }

    #[test]
    fn ql_rejects_bad_shape() {
        let t = SymTridiagonal {
            diag: vec![1.0, 2.0],
            off: vec![],
        };
        assert!(tridiagonal_eigenvalues(&t).is_err());
    }

    fn dense_arrowhead(eps0: f64, p: &[f64], w: &[f64]) -> DMatrix<f64> {
        let n = p.len() + 1;
        let mut a = DMatrix::zeros(n, n);
        a[(0, 0)] = eps0;
        for k in 0..p.len() {
            a[(0, k + 1)] = w[k];
            a[(k + 1, 0)] = w[k];
            a[(k + 1, k + 1)] = p[k];
        }
        a
    }

    #[test]
    fn arrowhead_matches_dense() {
        let p: Vec<f64> = (0..30).map(|k| -1.5 + 0.1 * k as f64 + 0.01 * ((k * 37) % 7) as f64).collect();
        let w: Vec<f64> = (0..30).map(|k| 0.02 + 0.03 * ((k * 17) % 5) as f64).collect();
        let zeta: Vec<f64> = w.iter().map(|x| x * x).collect();
        let sol = arrowhead_eigen(0.05, &p, &zeta, 0.0).unwrap();
        let (dense, vecs) = hermitian_eigen(&dense_arrowhead(0.05, &p, &w)).unwrap();
        assert_eq!(sol.roots.len(), dense.len());
        for (k, r) in sol.roots.iter().enumerate() {
            assert!((r.energy - dense[k]).abs() < 1e-13);
            assert!((r.weight - vecs[(0, k)].powi(2)).abs() < 1e-12);
        }
        let total: f64 = sol.roots.iter().map(|r| r.weight).sum();
        assert!((total - 1.0).abs() < 1e-13);
        assert!(sol.max_residual < 1e-13);
    }

    #[test]
    fn arrowhead_three_level_example() {
        let sol = arrowhead_eigen(0.0, &[0.0, 0.0], &[1.0, 0.0], 1e-12).unwrap();
        let e: Vec<f64> = sol.roots.iter().map(|r| r.energy).collect();
        let w: Vec<f64> = sol.roots.iter().map(|r| r.weight).collect();
        for (got, want) in e.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-15);
        }
        for (got, want) in w.iter().zip([0.5, 0.0, 0.5]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn arrowhead_tiny_and_huge_couplings() {
        let p = [-1.0, -0.2, 0.3, 1.1];
        for scale in [1e-14, 1e-6, 1.0, 1e4] {
            let w = [scale, 0.5 * scale, 2.0 * scale, scale];
            let zeta: Vec<f64> = w.iter().map(|x| x * x).collect();
            let sol = arrowhead_eigen(0.1, &p, &zeta, 0.0).unwrap();
            let (dense, _) = hermitian_eigen(&dense_arrowhead(0.1, &p, &w)).unwrap();
            for (r, d) in sol.roots.iter().zip(&dense) {
                assert!((r.energy - d).abs() <= 1e-12 * (1.0 + d.abs()), "scale {scale}");
            }
            let total: f64 = sol.roots.iter().map(|r| r.weight).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn arrowhead_zero_coupling() {
        let sol = arrowhead_eigen(0.25, &[-1.0, 1.0], &[0.0, 0.0], 0.0).unwrap();
        assert_eq!(sol.roots.len(), 3);
        assert_eq!(sol.roots[1].energy, 0.25);
        assert_eq!(sol.roots[1].weight, 1.0);
    }

    #[test]
    fn arrowhead_merges_coincident_poles() {
        let sol = arrowhead_eigen(0.0, &[-0.5, 0.5, 0.5], &[0.1, 0.2, 0.3], 1e-12).unwrap();
        assert_eq!(sol.roots.len(), 4);
        let partner = sol.roots.iter().filter(|r| r.kind == RootKind::MergedPartner).count();
        assert_eq!(partner, 1);
        let (dense, _) = hermitian_eigen(&dense_arrowhead(
            0.0,
            &[-0.5, 0.5, 0.5],
            &[0.1f64.sqrt(), 0.2f64.sqrt(), 0.3f64.sqrt()],
        ))
        .unwrap();
        for (r, d) in sol.roots.iter().zip(&dense) {
            assert!((r.energy - d).abs() < 1e-13);
        }
    }

    #[test]
    fn dense_residuals_are_small() {
        let a = DMatrix::from_fn(6, 6, |i, j| 1.0 / (1.0 + i as f64 + j as f64));
        let (v, u) = hermitian_eigen(&a).unwrap();
        assert!(v.windows(2).all(|w| w[0] <= w[1]));
        assert!(max_residual(&a, &v, &u) < 1e-13);
        assert!(hermitian_eigen(&DMatrix::<f64>::zeros(2, 3)).is_err());
    }
}
