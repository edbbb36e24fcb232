//! Globally adaptive Gauss–Kronrod quadrature in one and two dimensions.
//!
//! Both integrators keep a max-heap of regions keyed by their local error
//! estimate and bisect the worst region until the summed estimate meets the
//! tolerance. The 7-point Gauss rule is embedded in the 15-point Kronrod rule;
//! the 2D rule is the tensor product of the two on a rectangle.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::NumericsError;

/// Kronrod abscissae on [-1, 1], positive half (index 7 is the centre).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// Gauss weights for the odd Kronrod abscissae XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_SUBDIVISIONS_1D: usize = 2000;
const MAX_SUBDIVISIONS_2D: usize = 4000;
/// Bisections of a single interval before it counts as unresolvable.
const MAX_DEPTH_1D: u32 = 200;

/// Outcome of an integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub evaluations: usize,
}

/// Convergence target: stop once `error ≤ max(abs, rel·|value|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rel: 1e-8,
            abs: 1e-12,
        }
    }
}

impl Tolerance {
    pub fn new(rel: f64, abs: f64) -> Self {
        Tolerance { rel, abs }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

/// Axis-aligned integration box `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    pub fn unit() -> Self {
        Rect::new(0.0, 1.0, 0.0, 1.0)
    }
}

/// QUADPACK error rescaling: the raw |Kronrod - Gauss| difference badly
/// overestimates the Kronrod error once the rule resolves the integrand.
fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        let min_err = 50.0 * f64::EPSILON * res_abs;
        if min_err > scaled {
            scaled = min_err;
        }
    }
    scaled
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    depth: u32,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<Segment, NumericsError> {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut fv = [0.0_f64; 15];
    for (j, &x) in XGK.iter().enumerate() {
        if j == 7 {
            fv[7] = f(centre);
        } else {
            fv[j] = f(centre - half * x);
            fv[14 - j] = f(centre + half * x);
        }
    }
    for (j, v) in fv.iter().enumerate() {
        if !v.is_finite() {
            let x = if j <= 7 {
                centre - half * XGK[j]
            } else {
                centre + half * XGK[14 - j]
            };
            return Err(NumericsError::NonFinite { at: (x, f64::NAN) });
        }
    }
    let kronrod = |j: usize| if j <= 7 { WGK[j] } else { WGK[14 - j] };
    let mut res_k = 0.0;
    let mut res_abs = 0.0;
    for (j, v) in fv.iter().enumerate() {
        res_k += kronrod(j) * v;
        res_abs += kronrod(j) * v.abs();
    }
    let mut res_g = WG[3] * fv[7];
    for (i, &j) in [1usize, 3, 5].iter().enumerate() {
        res_g += WG[i] * (fv[j] + fv[14 - j]);
    }
    let mean = 0.5 * res_k;
    let res_asc: f64 = fv
        .iter()
        .enumerate()
        .map(|(j, v)| kronrod(j) * (v - mean).abs())
        .sum();
    let value = res_k * half;
    let error = rescale_error(
        (res_k - res_g) * half,
        res_abs * half.abs(),
        res_asc * half.abs(),
    );
    Ok(Segment {
        a,
        b,
        value,
        error,
        depth: 0,
    })
}

/// Adaptive integral of `f` over `[a, b]`.
///
/// `b` may be `+∞`; the half line is mapped onto `(0, 1]` by
/// `x = a + (1-t)/t`. Integrable endpoint singularities are handled by
/// repeated bisection (Kronrod nodes never touch the endpoints).
pub fn integrate_1d<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: Tolerance,
) -> Result<QuadratureResult, NumericsError> {
    if a.is_nan() || b.is_nan() || a.is_infinite() || (b.is_infinite() && b < 0.0) {
        return Err(NumericsError::Bounds { a, b });
    }
    if b.is_infinite() {
        let mapped = move |t: f64| {
            let x = a + (1.0 - t) / t;
            if !(t > 0.0) || !x.is_finite() {
                return 0.0;
            }
            let fx = f(x);
            if fx == 0.0 {
                0.0
            } else {
                fx / (t * t)
            }
        };
        return adapt_1d(mapped, 0.0, 1.0, tol);
    }
    if a == b {
        return Ok(QuadratureResult {
            value: 0.0,
            abs_error_estimate: 0.0,
            evaluations: 0,
        });
    }
    if b < a {
        let r = adapt_1d(f, b, a, tol)?;
        return Ok(QuadratureResult {
            value: -r.value,
            ..r
        });
    }
    adapt_1d(f, a, b, tol)
}

fn adapt_1d<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: Tolerance,
) -> Result<QuadratureResult, NumericsError> {
    let first = gk15(&mut f, a, b)?;
    let mut evaluations = 15;
    let mut value = first.value;
    let mut error = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    let mut subdivisions = 0;
    while error > tol.target(value) {
        if subdivisions >= MAX_SUBDIVISIONS_1D {
            return Err(NumericsError::NonConvergent {
                best: QuadratureResult {
                    value,
                    abs_error_estimate: error,
                    evaluations,
                },
                subdivisions,
            });
        }
        let worst = heap.pop().expect("heap never empties");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b || worst.depth >= MAX_DEPTH_1D {
            // Interval too small to split further.
            return Err(NumericsError::NonConvergent {
                best: QuadratureResult {
                    value,
                    abs_error_estimate: error,
                    evaluations,
                },
                subdivisions,
            });
        }
        let mut left = gk15(&mut f, worst.a, mid)?;
        let mut right = gk15(&mut f, mid, worst.b)?;
        left.depth = worst.depth + 1;
        right.depth = worst.depth + 1;
        evaluations += 30;
        subdivisions += 1;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        if subdivisions % 64 == 0 {
            // Resum to shed accumulated rounding in the running totals.
            value = heap.iter().map(|s| s.value).sum();
            error = heap.iter().map(|s| s.error).sum();
        }
    }
    let value: f64 = heap.iter().map(|s| s.value).sum();
    let error: f64 = heap.iter().map(|s| s.error).sum();
    Ok(QuadratureResult {
        value,
        abs_error_estimate: error,
        evaluations,
    })
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    rect: Rect,
    value: f64,
    error: f64,
    /// Axis whose rule contributes more of the error: false = x, true = y.
    split_y: bool,
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Kronrod weight for node index 0..15 in the full 15-point layout.
#[inline]
fn wk(j: usize) -> f64 {
    if j <= 7 {
        WGK[j]
    } else {
        WGK[14 - j]
    }
}

/// Gauss weight for node index 0..15, zero for Kronrod-only nodes.
#[inline]
fn wg(j: usize) -> f64 {
    let k = if j <= 7 { j } else { 14 - j };
    match k {
        1 => WG[0],
        3 => WG[1],
        5 => WG[2],
        7 => WG[3],
        _ => 0.0,
    }
}

#[inline]
fn node(j: usize) -> f64 {
    if j <= 7 {
        -XGK[j]
    } else {
        XGK[14 - j]
    }
}

fn gk15x15<F: FnMut(f64, f64) -> f64>(f: &mut F, rect: Rect) -> Result<Cell, NumericsError> {
    let cx = 0.5 * (rect.x0 + rect.x1);
    let hx = 0.5 * (rect.x1 - rect.x0);
    let cy = 0.5 * (rect.y0 + rect.y1);
    let hy = 0.5 * (rect.y1 - rect.y0);
    let mut fv = [[0.0_f64; 15]; 15];
    for (i, row) in fv.iter_mut().enumerate() {
        let x = cx + hx * node(i);
        for (j, slot) in row.iter_mut().enumerate() {
            let y = cy + hy * node(j);
            let v = f(x, y);
            if !v.is_finite() {
                return Err(NumericsError::NonFinite { at: (x, y) });
            }
            *slot = v;
        }
    }
    let (mut kk, mut gg, mut gk, mut kg, mut abs_kk) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, row) in fv.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            kk += wk(i) * wk(j) * v;
            abs_kk += wk(i) * wk(j) * v.abs();
            gg += wg(i) * wg(j) * v;
            gk += wg(i) * wk(j) * v;
            kg += wk(i) * wg(j) * v;
        }
    }
    let area = hx * hy;
    let mean = kk / 4.0;
    let mut asc = 0.0;
    for (i, row) in fv.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            asc += wk(i) * wk(j) * (v - mean).abs();
        }
    }
    let value = kk * area;
    let error = rescale_error((kk - gg) * area, abs_kk * area.abs(), asc * area.abs());
    let err_x = (kk - gk).abs();
    let err_y = (kk - kg).abs();
    Ok(Cell {
        rect,
        value,
        error,
        split_y: err_y > err_x,
    })
}

/// Adaptive integral of `f(x, y)` over a finite rectangle.
///
/// Each cell is integrated with the 15×15 Kronrod tensor rule, the error is
/// estimated against the embedded 7×7 Gauss rule, and the worst cell is
/// bisected along the axis whose one-dimensional rule disagrees more.
pub fn integrate_2d<F: FnMut(f64, f64) -> f64>(
    mut f: F,
    rect: Rect,
    tol: Tolerance,
) -> Result<QuadratureResult, NumericsError> {
    for (a, b) in [(rect.x0, rect.x1), (rect.y0, rect.y1)] {
        if !a.is_finite() || !b.is_finite() || b < a {
            return Err(NumericsError::Bounds { a, b });
        }
    }
    if rect.x0 == rect.x1 || rect.y0 == rect.y1 {
        return Ok(QuadratureResult {
            value: 0.0,
            abs_error_estimate: 0.0,
            evaluations: 0,
        });
    }
    let first = gk15x15(&mut f, rect)?;
    let mut evaluations = 225;
    let mut value = first.value;
    let mut error = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    let mut subdivisions = 0;
    while error > tol.target(value) {
        let worst = heap.pop().expect("heap never empties");
        let r = worst.rect;
        let (lo, hi) = if worst.split_y {
            let mid = 0.5 * (r.y0 + r.y1);
            (Rect { y1: mid, ..r }, Rect { y0: mid, ..r })
        } else {
            let mid = 0.5 * (r.x0 + r.x1);
            (Rect { x1: mid, ..r }, Rect { x0: mid, ..r })
        };
        if subdivisions >= MAX_SUBDIVISIONS_2D || lo == r || hi == r {
            heap.push(worst);
            return Err(NumericsError::NonConvergent {
                best: QuadratureResult {
                    value: heap.iter().map(|c| c.value).sum(),
                    abs_error_estimate: heap.iter().map(|c| c.error).sum(),
                    evaluations,
                },
                subdivisions,
            });
        }
        let a = gk15x15(&mut f, lo)?;
        let b = gk15x15(&mut f, hi)?;
        evaluations += 450;
        subdivisions += 1;
        value += a.value + b.value - worst.value;
        error += a.error + b.error - worst.error;
        heap.push(a);
        heap.push(b);
        if subdivisions % 64 == 0 {
            value = heap.iter().map(|c| c.value).sum();
            error = heap.iter().map(|c| c.error).sum();
        }
    }
    Ok(QuadratureResult {
        value: heap.iter().map(|c| c.value).sum(),
        abs_error_estimate: heap.iter().map(|c| c.error).sum(),
        evaluations,
    })
}
