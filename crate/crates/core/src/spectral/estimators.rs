//! Offset and plateau read-outs of an averaged survival curve.

use serde::{Deserialize, Serialize};

/// τ window over which the late-time plateau is averaged.
pub const PLATEAU_WINDOW: (f64, f64) = (2.0, 5.0);
/// Half width of the moving average applied before locating the dip.
pub const SMOOTHING_HALF_WIDTH: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn new(value: f64, stderr: f64) -> Self {
        Estimate { value, stderr }
    }

    /// `a/b` with first-order error propagation for independent errors.
    pub fn ratio(self, den: Estimate) -> Estimate {
        let value = self.value / den.value;
        let rel = ((self.stderr / self.value).powi(2) + (den.stderr / den.value).powi(2)).sqrt();
        Estimate {
            value,
            stderr: value.abs() * rel,
        }
    }
}

/// Centred moving average, truncated at the ends.
pub fn moving_average(values: &[f64], half_width: usize) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half_width);
            let hi = (i + half_width + 1).min(n);
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Minimum of the smoothed mean curve and the τ where it occurs. The error
/// is the smoothed standard error at that point (neighbouring grid points
/// are strongly correlated, so it is not reduced by the averaging).
pub fn offset_estimate(taus: &[f64], mean: &[f64], stderr: &[f64]) -> Option<(Estimate, f64)> {
    if mean.is_empty() || mean.len() != taus.len() || stderr.len() != taus.len() {
        return None;
    }
    let smooth = moving_average(mean, SMOOTHING_HALF_WIDTH);
    let smooth_err = moving_average(stderr, SMOOTHING_HALF_WIDTH);
    let (i, _) = smooth
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    Some((Estimate::new(smooth[i], smooth_err[i]), taus[i]))
}

/// Mean of the curve over grid points with `lo ≤ τ ≤ hi`. The error is the
/// mean standard error of those points, the fully-correlated bound.
pub fn window_mean(taus: &[f64], mean: &[f64], stderr: &[f64], lo: f64, hi: f64) -> Option<Estimate> {
    let idx: Vec<usize> = (0..taus.len()).filter(|&i| taus[i] >= lo && taus[i] <= hi).collect();
    if idx.is_empty() {
        return None;
    }
    let n = idx.len() as f64;
    let value = idx.iter().map(|&i| mean[i]).sum::<f64>() / n;
    let err = idx.iter().map(|&i| stderr[i]).sum::<f64>() / n;
    Some(Estimate::new(value, err))
}

pub fn plateau_window_mean(taus: &[f64], mean: &[f64], stderr: &[f64]) -> Option<Estimate> {
    window_mean(taus, mean, stderr, PLATEAU_WINDOW.0, PLATEAU_WINDOW.1)
}
