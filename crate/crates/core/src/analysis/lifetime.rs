//! Decay-time measurement from a dark-population time series.

use crate::basis::FamilyKind;
use crate::error::{Error, Result};
use crate::propagation::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LifetimeEstimate {
    /// Decay time in Γ⁻¹.
    pub tau: f64,
    /// R² of the log-linear fit.
    pub fit_quality: f64,
    /// Level subtracted before taking the logarithm.
    pub asymptote: f64,
}

/// Fits the dark population of `kind` recorded in `trajectory` inside
/// `window` (inclusive, in Γt).
pub fn estimate_lifetime(
    trajectory: &Trajectory,
    kind: FamilyKind,
    window: (f64, f64),
) -> Result<LifetimeEstimate> {
    let times = trajectory.times();
    let pops: Vec<f64> = trajectory.snapshots.iter().map(|s| s.dark(kind)).collect();
    fit_exponential_decay(&times, &pops, window)
}

/// Least-squares line through log(p(t) − p_∞) over the window; τ = −1/slope.
///
/// The asymptote p_∞ is the last sample of the series, floored at zero, so
/// the series should extend past the window.
pub fn fit_exponential_decay(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<LifetimeEstimate> {
    if times.len() != values.len() || times.is_empty() {
        return Err(Error::Lifetime("times and values must be non-empty and of equal length".into()));
    }
    let (t0, t1) = window;
    if !(t1 > t0) {
        return Err(Error::Lifetime(format!("empty window [{t0}, {t1}]")));
    }
    let asymptote = values[values.len() - 1].max(0.0);
    let (ts, ys): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(values)
        .filter(|(t, _)| (t0..=t1).contains(*t))
        .map(|(&t, &v)| (t, v - asymptote))
        .unzip();
    if ts.len() < 3 {
        return Err(Error::Lifetime(format!("only {} samples inside [{t0}, {t1}]", ts.len())));
    }
    if let Some(y) = ys.iter().find(|&&y| !(y > 0.0)) {
        return Err(Error::Lifetime(format!("adjusted population {y:e} is not positive")));
    }
    if ys.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::Lifetime("population is not monotonically decaying in the window".into()));
    }

    let logs: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = ts.len() as f64;
    let t_mean = ts.iter().sum::<f64>() / n;
    let l_mean = logs.iter().sum::<f64>() / n;
    let sxx: f64 = ts.iter().map(|t| (t - t_mean).powi(2)).sum();
    let sxy: f64 = ts.iter().zip(&logs).map(|(t, l)| (t - t_mean) * (l - l_mean)).sum();
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Err(Error::Lifetime(format!("fitted slope {slope} is not negative")));
    }
    let intercept = l_mean - slope * t_mean;
    let ss_res: f64 = ts.iter().zip(&logs).map(|(t, l)| (l - intercept - slope * t).powi(2)).sum();
    let ss_tot: f64 = logs.iter().map(|l| (l - l_mean).powi(2)).sum();
    let fit_quality = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(LifetimeEstimate { tau: -1.0 / slope, fit_quality, asymptote })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn series(f: impl Fn(f64) -> f64, t_end: f64, dt: f64) -> (Vec<f64>, Vec<f64>) {
        let n = (t_end / dt).round() as usize;
        let t: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
        let v = t.iter().map(|&t| f(t)).collect();
        (t, v)
    }

    #[test]
    fn pure_exponential() {
        let (t, v) = series(|t| 0.5 * (-t / 100.0).exp(), 4000.0, 10.0);
        let est = fit_exponential_decay(&t, &v, (0.0, 500.0)).unwrap();
        assert_relative_eq!(est.tau, 100.0, max_relative = 1e-6);
        assert!(est.fit_quality > 0.999_999);
    }

    #[test]
    fn exponential_on_a_floor() {
        let (t, v) = series(|t| 0.3 * (-t / 50.0).exp() + 0.1, 1000.0, 5.0);
        let est = fit_exponential_decay(&t, &v, (0.0, 200.0)).unwrap();
        assert_relative_eq!(est.tau, 50.0, max_relative = 0.02);
        assert_relative_eq!(est.asymptote, 0.1, max_relative = 1e-6);
    }

    #[test]
    fn rejects_rising_or_flat_windows() {
        let (t, v) = series(|t| 1.0 - (-t / 30.0).exp(), 300.0, 5.0);
        assert!(fit_exponential_decay(&t, &v, (0.0, 200.0)).is_err());
        let (t, v) = series(|_| 0.2, 300.0, 5.0);
        assert!(fit_exponential_decay(&t, &v, (0.0, 200.0)).is_err());
        let (t, v) = series(|t| (-t / 30.0).exp(), 300.0, 5.0);
        assert!(fit_exponential_decay(&t, &v, (0.0, 5.0)).is_err());
        assert!(fit_exponential_decay(&t, &v, (10.0, 10.0)).is_err());
    }
}
