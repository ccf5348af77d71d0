//! Loss-gap curves and log-log convergence-rate fitting.

use serde::{Deserialize, Serialize};

/// Mean loss gap across replications as a function of samples consumed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossCurve {
    pub sample_counts: Vec<u64>,
    pub mean_gap: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl LossCurve {
    /// Indices where the mean gap is negative beyond Monte-Carlo tolerance
    /// (more than two standard errors below zero). Gaps are measured against
    /// a certified optimum, so anything flagged here points at a broken
    /// anchor.
    pub fn negative_gap_flags(&self) -> Vec<usize> {
        self.mean_gap
            .iter()
            .zip(&self.stderr)
            .enumerate()
            .filter(|(_, (g, s))| **g < -2.0 * **s)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Least-squares line through `(log t, log gap)` on a sample window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub fit_window: (u64, u64),
    pub r_squared: f64,
    pub points_used: usize,
    pub points_excluded: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum RateError {
    #[error("window [{0}, {1}] holds fewer than 10 usable points")]
    TooFewPoints(u64, u64),
    #[error("{excluded} of {total} in-window points have non-positive gaps")]
    TooManyExcluded { excluded: usize, total: usize },
}

/// Default fitting window: the last two decades of the sample axis, never
/// reaching below the first 100 samples (transient).
pub fn default_fit_window(horizon: u64) -> (u64, u64) {
    ((horizon / 100).max(100), horizon)
}

/// Ordinary least squares on the log-log curve restricted to `window`.
/// Non-positive gaps inside the window are excluded and counted; more than
/// 20% exclusions is an error.
pub fn fit_rate(curve: &LossCurve, window: (u64, u64)) -> Result<RateFit, RateError> {
    let (t_min, t_max) = window;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut excluded = 0usize;
    let mut total = 0usize;
    for (i, &t) in curve.sample_counts.iter().enumerate() {
        if t < t_min || t > t_max {
            continue;
        }
        total += 1;
        let gap = curve.mean_gap[i];
        if gap > 0.0 {
            xs.push((t as f64).ln());
            ys.push(gap.ln());
        } else {
            excluded += 1;
        }
    }
    if total > 0 && excluded * 5 > total {
        return Err(RateError::TooManyExcluded { excluded, total });
    }
    if xs.len() < 10 {
        return Err(RateError::TooFewPoints(t_min, t_max));
    }

    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x) * (x - mean_x)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - mean_y) * (y - mean_y)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };

    Ok(RateFit {
        slope,
        intercept,
        fit_window: window,
        r_squared,
        points_used: xs.len(),
        points_excluded: excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve_from(f: impl Fn(f64) -> f64, horizon: u64) -> LossCurve {
        let counts = crate::sgd::log_checkpoints(horizon);
        LossCurve {
            mean_gap: counts.iter().map(|&t| f(t as f64)).collect(),
            stderr: vec![0.0; counts.len()],
            sample_counts: counts,
        }
    }

    #[test]
    fn exact_power_laws() {
        let c = curve_from(|t| 7.0 / t, 100_000);
        let fit = fit_rate(&c, (100, 100_000)).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!((fit.intercept - 7.0f64.ln()).abs() < 1e-9);

        let c = curve_from(|t| 3.0 / t.sqrt(), 100_000);
        let fit = fit_rate(&c, (100, 100_000)).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-9);
    }

    #[test]
    fn modulated_power_law_keeps_slope_near_minus_one() {
        let c = curve_from(|t| 5.0 / t * (1.0 + 0.1 * t.ln().sin()), 100_000);
        let fit = fit_rate(&c, (100, 100_000)).unwrap();
        assert!(fit.slope > -1.1 && fit.slope < -0.9, "slope {}", fit.slope);
    }

    #[test]
    fn exclusion_accounting() {
        let mut c = curve_from(|t| 1.0 / t, 10_000);
        // Zero out every second in-window point: > 20% excluded.
        let n = c.mean_gap.len();
        for i in (0..n).step_by(2) {
            if c.sample_counts[i] >= 100 {
                c.mean_gap[i] = 0.0;
            }
        }
        assert!(matches!(
            fit_rate(&c, (100, 10_000)),
            Err(RateError::TooManyExcluded { .. })
        ));
    }

    #[test]
    fn tiny_windows_are_rejected() {
        let c = curve_from(|t| 1.0 / t, 10_000);
        assert!(matches!(
            fit_rate(&c, (9_990, 10_000)),
            Err(RateError::TooFewPoints(_, _))
        ));
    }

    #[test]
    fn default_window_is_last_two_decades() {
        assert_eq!(default_fit_window(10_000), (100, 10_000));
        assert_eq!(default_fit_window(100_000), (1_000, 100_000));
        assert_eq!(default_fit_window(5_000), (100, 5_000));
    }

    #[test]
    fn negative_gap_flagging() {
        let c = LossCurve {
            sample_counts: vec![1, 2, 3],
            mean_gap: vec![1.0, -0.5, -0.001],
            stderr: vec![0.1, 0.1, 0.1],
        };
        assert_eq!(c.negative_gap_flags(), vec![1]);
    }
}
