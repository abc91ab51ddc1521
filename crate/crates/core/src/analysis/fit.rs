//! Sum-of-Gaussians fit by damped (Levenberg-Marquardt) least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::MomentumDistribution;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPeak {
    pub amplitude: f64,
    pub center: f64,
    pub sigma: f64,
}

impl GaussianPeak {
    pub fn eval(&self, p: f64) -> f64 {
        self.amplitude * (-0.5 * ((p - self.center) / self.sigma).powi(2)).exp()
    }

    /// ∫ A exp(−(p−c)²/2σ²) dp
    pub fn area(&self) -> f64 {
        self.amplitude * self.sigma * (2.0 * std::f64::consts::PI).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakFit {
    pub peaks: Vec<GaussianPeak>,
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl PeakFit {
    pub fn eval(&self, p: f64) -> f64 {
        self.peaks.iter().map(|g| g.eval(p)).sum()
    }

    pub fn total_amplitude(&self) -> f64 {
        self.peaks.iter().map(|g| g.amplitude).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub initial_sigma: f64,
    pub max_iterations: usize,
    /// Stop when the relative change of the squared residual drops below this.
    pub tolerance: f64,
    /// Fitted centers stay within this distance of their initialization.
    pub center_bound: f64,
    pub min_sigma: f64,
    pub max_sigma: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            initial_sigma: 0.15,
            max_iterations: 500,
            tolerance: 1e-10,
            center_bound: 0.3,
            min_sigma: 1e-3,
            max_sigma: 2.0,
        }
    }
}

pub fn fit_gaussian_peaks(dist: &MomentumDistribution, centers_init: &[f64]) -> Result<PeakFit> {
    fit_gaussian_peaks_with(dist, centers_init, &FitOptions::default())
}

struct Problem<'a> {
    x: &'a [f64],
    y: &'a [f64],
    centers: &'a [f64],
    opts: &'a FitOptions,
}

impl Problem<'_> {
    fn residual(&self, theta: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.x.len(),
            self.x.iter().zip(self.y).map(|(&p, &y)| model(theta, p) - y),
        )
    }

    fn jacobian(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let k = theta.len() / 3;
        let mut jac = DMatrix::zeros(self.x.len(), theta.len());
        for (row, &p) in self.x.iter().enumerate() {
            for i in 0..k {
                let (a, c, s) = (theta[3 * i], theta[3 * i + 1], theta[3 * i + 2]);
                let z = (p - c) / s;
                let e = (-0.5 * z * z).exp();
                jac[(row, 3 * i)] = e;
                jac[(row, 3 * i + 1)] = a * e * z / s;
                jac[(row, 3 * i + 2)] = a * e * z * z / s;
            }
        }
        jac
    }

    /// Scale factor keeping every peak's move within one width and its width
    /// change within a factor of two, so a single step cannot collapse a peak
    /// onto one grid point.
    fn step_limit(&self, theta: &DVector<f64>, step: &DVector<f64>) -> f64 {
        let mut factor = 1.0f64;
        for i in 0..self.centers.len() {
            let s = theta[3 * i + 2];
            let (dc, ds) = (step[3 * i + 1].abs(), step[3 * i + 2].abs());
            if dc > s {
                factor = factor.min(s / dc);
            }
            if ds > 0.5 * s {
                factor = factor.min(0.5 * s / ds);
            }
        }
        factor
    }

    fn bounds(&self, k: usize) -> (f64, f64) {
        let c0 = self.centers[k / 3];
        match k % 3 {
            0 => (0.0, f64::INFINITY),
            1 => (c0 - self.opts.center_bound, c0 + self.opts.center_bound),
            _ => (self.opts.min_sigma, self.opts.max_sigma),
        }
    }

    /// Indices sitting on a bound with the negative gradient pointing out.
    fn active_bounds(&self, theta: &DVector<f64>, grad: &DVector<f64>) -> Vec<usize> {
        (0..theta.len())
            .filter(|&k| {
                let (lo, hi) = self.bounds(k);
                (theta[k] <= lo && grad[k] > 0.0) || (theta[k] >= hi && grad[k] < 0.0)
            })
            .collect()
    }

    fn project(&self, theta: &mut DVector<f64>) {
        for k in 0..theta.len() {
            let (lo, hi) = self.bounds(k);
            theta[k] = theta[k].clamp(lo, hi);
        }
    }
}

fn model(theta: &DVector<f64>, p: f64) -> f64 {
    theta
        .as_slice()
        .chunks_exact(3)
        .map(|g| g[0] * (-0.5 * ((p - g[1]) / g[2]).powi(2)).exp())
        .sum()
}

/// Fits one Gaussian per entry of `centers_init`. Each peak starts at its
/// center with the distribution value there as amplitude and
/// `initial_sigma` as width.
///
/// Non-convergence is not an error: the best parameters found are returned
/// with `converged == false`.
pub fn fit_gaussian_peaks_with(
    dist: &MomentumDistribution,
    centers_init: &[f64],
    opts: &FitOptions,
) -> Result<PeakFit> {
    if centers_init.is_empty() {
        return Err(Error::Fit("no initial centers given".into()));
    }
    let x = dist.momenta();
    let (lo, hi) = (x[0], x[x.len() - 1]);
    if let Some(c) = centers_init.iter().find(|c| !(lo..=hi).contains(*c)) {
        return Err(Error::Fit(format!("initial center {c} lies outside the grid [{lo}, {hi}]")));
    }
    if x.len() < 3 * centers_init.len() {
        return Err(Error::Fit("fewer data points than parameters".into()));
    }

    let problem = Problem { x: &x, y: &dist.density, centers: centers_init, opts };
    let mut theta = DVector::zeros(3 * centers_init.len());
    for (i, &c) in centers_init.iter().enumerate() {
        let idx = dist.grid.nearest(c).expect("center checked against grid");
        theta[3 * i] = dist.density[idx].max(0.0);
        theta[3 * i + 1] = c;
        theta[3 * i + 2] = opts.initial_sigma;
    }

    let scale = dist.density.iter().map(|y| y * y).sum::<f64>().max(f64::MIN_POSITIVE);
    let mut r = problem.residual(&theta);
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        if cost <= 1e-28 * scale {
            converged = true;
            break;
        }
        let jac = problem.jacobian(&theta);
        let mut jtj = jac.transpose() * &jac;
        let mut grad = jac.transpose() * &r;
        // freeze parameters held at a bound by the descent direction
        for k in problem.active_bounds(&theta, &grad) {
            jtj.row_mut(k).fill(0.0);
            jtj.column_mut(k).fill(0.0);
            jtj[(k, k)] = 1.0;
            grad[k] = 0.0;
        }

        let mut accepted = false;
        while lambda < 1e16 {
            let mut damped = jtj.clone();
            for d in 0..damped.nrows() {
                damped[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let Some(step) = damped.cholesky().map(|ch| ch.solve(&-&grad)) else {
                lambda *= 10.0;
                continue;
            };
            let limit = problem.step_limit(&theta, &step);
            let mut trial = &theta + step * limit;
            problem.project(&mut trial);
            let r_trial = problem.residual(&trial);
            let cost_trial = r_trial.norm_squared();
            if cost_trial < cost {
                let rel = (cost - cost_trial) / cost;
                theta = trial;
                r = r_trial;
                cost = cost_trial;
                lambda = (lambda * 0.1).max(1e-15);
                accepted = true;
                if rel < opts.tolerance {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no descent direction left at working precision
            converged = true;
        }
        if converged {
            break;
        }
    }

    let peaks = theta
        .as_slice()
        .chunks_exact(3)
        .map(|g| GaussianPeak { amplitude: g[0], center: g[1], sigma: g[2] })
        .collect();
    Ok(PeakFit { peaks, residual_norm: cost.sqrt(), converged, iterations })
}
