//! Shape diagnostics for single measurement-mode purity curves: the early
//! linear rise, the noisy middle and the exponential approach to 1.

use serde::{Deserialize, Serialize};

/// Average purity gain per step over the first `window` steps.
pub fn initial_slope(purity: &[f64], window: usize) -> Option<f64> {
    let end = *purity.get(window)?;
    Some((end - purity[0]) / window as f64)
}

/// Step range `[start, end)` of the middle regime: from N/2 until purity first
/// reaches 0.99 (or the end of the record).
pub fn mid_regime(purity: &[f64], n: usize) -> (usize, usize) {
    let start = (n / 2).min(purity.len());
    let end = purity
        .iter()
        .enumerate()
        .skip(start)
        .find(|(_, &p)| p >= 0.99)
        .map(|(i, _)| i)
        .unwrap_or(purity.len());
    (start, end)
}

/// Longest descent inside `purity[range]`: the largest j − i such that
/// p[i] is the maximum and p[j] the strict minimum of p[i..=j].
pub fn longest_descent(purity: &[f64], range: (usize, usize)) -> usize {
    let (lo, hi) = (range.0, range.1.min(purity.len()));
    let mut best = 0;
    for i in lo..hi {
        let top = purity[i];
        let mut low = top;
        for (j, &p) in purity.iter().enumerate().take(hi).skip(i + 1) {
            if p > top {
                break;
            }
            if p < low {
                low = p;
                best = best.max(j - i);
            }
        }
    }
    best
}

/// Least-squares slope of −ln(1 − purity) against step over the late window
/// where `floor ≤ 1 − purity ≤ ceiling`, starting from the first entry below
/// `ceiling`. Returns `None` with fewer than 10 points in the window.
pub fn late_decay_rate(purity: &[f64], ceiling: f64, floor: f64) -> Option<f64> {
    let start = purity.iter().position(|&p| 1.0 - p <= ceiling)?;
    let pts: Vec<(f64, f64)> = purity[start..]
        .iter()
        .enumerate()
        .map(|(k, &p)| ((start + k) as f64, 1.0 - p))
        .take_while(|&(_, f)| f >= floor)
        .map(|(t, f)| (t, f.ln()))
        .collect();
    if pts.len() < 10 {
        return None;
    }
    let m = pts.len() as f64;
    let (st, sy) = pts.iter().fold((0.0, 0.0), |(a, b), &(t, y)| (a + t, b + y));
    let (tbar, ybar) = (st / m, sy / m);
    let (num, den) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), &(t, y)| (a + (t - tbar) * (y - ybar), b + (t - tbar).powi(2)));
    Some(-num / den)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub dimension: usize,
    /// Initial slope times N.
    pub scaled_initial_slope: Option<f64>,
    pub mid_regime: (usize, usize),
    pub longest_descent: usize,
    /// Late exponential rate times N.
    pub scaled_late_rate: Option<f64>,
}

impl RegimeReport {
    pub const LATE_CEILING: f64 = 1e-2;
    pub const LATE_FLOOR: f64 = 1e-11;

    pub fn from_purity(purity: &[f64], n: usize) -> Self {
        let mid = mid_regime(purity, n);
        Self {
            dimension: n,
            scaled_initial_slope: initial_slope(purity, n / 2).map(|s| s * n as f64),
            mid_regime: mid,
            longest_descent: longest_descent(purity, mid),
            scaled_late_rate: late_decay_rate(purity, Self::LATE_CEILING, Self::LATE_FLOOR).map(|r| r * n as f64),
        }
    }
}
