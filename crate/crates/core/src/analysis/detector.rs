use super::MomentumDistribution;
use crate::error::{Error, Result};

/// Gaussian blur of standard deviation `sigma_p` (ħk). Each grid point's
/// weight is spread over the grid with a kernel renormalized to the points
/// that exist, so the integral is unchanged.
pub fn convolve_detector(dist: &MomentumDistribution, sigma_p: f64) -> Result<MomentumDistribution> {
    if !(sigma_p >= 0.0) || !sigma_p.is_finite() {
        return Err(Error::InvalidParameter {
            name: "detector_sigma",
            reason: format!("must be non-negative, got {sigma_p}"),
        });
    }
    let h = dist.grid.spacing();
    let reach = (8.0 * sigma_p / h).ceil() as usize;
    if reach == 0 {
        return Ok(dist.clone());
    }
    let kernel: Vec<f64> = (0..=reach)
        .map(|k| (-0.5 * (k as f64 * h / sigma_p).powi(2)).exp())
        .collect();
    let n = dist.density.len();
    let mut out = vec![0.0; n];
    for (i, &y) in dist.density.iter().enumerate() {
        if y == 0.0 {
            continue;
        }
        let lo = i.saturating_sub(reach);
        let hi = (i + reach).min(n - 1);
        let norm: f64 = (lo..=hi).map(|t| kernel[t.abs_diff(i)]).sum();
        for (t, o) in out.iter_mut().enumerate().take(hi + 1).skip(lo) {
            *o += y * kernel[t.abs_diff(i)] / norm;
        }
    }
    Ok(MomentumDistribution { grid: dist.grid, density: out })
}
