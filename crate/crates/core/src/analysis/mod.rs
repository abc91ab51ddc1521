//! Observables: momentum distributions, dark-state populations, Gaussian
//! peak fits, metastable lifetimes and detector-resolution convolution.

mod detector;
mod fit;
mod lifetime;

pub use detector::convolve_detector;
pub use fit::{fit_gaussian_peaks, fit_gaussian_peaks_with, FitOptions, GaussianPeak, PeakFit};
pub use lifetime::{estimate_lifetime, fit_exponential_decay, LifetimeEstimate};

use nalgebra::DVector;

use crate::basis::{FamilyKind, MomentumGrid};
use crate::dynamics::{dark_state, SimParams};
use crate::error::Result;
use crate::liouvillian::FamilyBlockState;

/// Family members sit up to two recoils away from their family label, so the
/// distribution grid is the state grid widened by that much on each side.
pub const DISTRIBUTION_MARGIN: usize = 2;

/// Probability density per ħk on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumDistribution {
    pub grid: MomentumGrid,
    pub density: Vec<f64>,
}

impl MomentumDistribution {
    pub fn total(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.grid.spacing()
    }

    pub fn momenta(&self) -> Vec<f64> {
        self.grid.values()
    }

    /// Largest |n(p) − n(−p)|.
    pub fn asymmetry(&self) -> f64 {
        self.density
            .iter()
            .zip(self.density.iter().rev())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn momentum_distribution(state: &FamilyBlockState) -> MomentumDistribution {
    let grid = state.grid.widened(DISTRIBUTION_MARGIN);
    let n = grid.points_per_recoil() as isize;
    let mut density = vec![0.0; grid.len()];
    let inv = 1.0 / grid.spacing();
    for i in 0..state.grid.len() {
        let k = state.grid.coordinate(i);
        for kind in FamilyKind::ALL {
            for (a, s) in kind.states().iter().enumerate() {
                let t = grid
                    .index(k + s.m() as isize * n)
                    .expect("widened grid holds every member");
                density[t] += state.get(kind, i, a, a).re * inv;
            }
        }
    }
    MomentumDistribution { grid, density }
}

/// Σ_q ⟨ψ_NC|ρ_kind(q)|ψ_NC⟩ with the q-independent dark-state coefficients.
pub fn dark_population(state: &FamilyBlockState, kind: FamilyKind, params: &SimParams) -> Result<f64> {
    let psi = dark_state(kind, params)?;
    Ok((0..state.grid.len()).map(|i| expectation(state, kind, i, &psi)).sum())
}

fn expectation(state: &FamilyBlockState, kind: FamilyKind, i: usize, psi: &DVector<f64>) -> f64 {
    let mut acc = 0.0;
    for a in 0..psi.len() {
        if psi[a] == 0.0 {
            continue;
        }
        for b in 0..psi.len() {
            acc += psi[a] * psi[b] * state.get(kind, i, a, b).re;
        }
    }
    acc
}

/// Populations of g₋₁ and g₊₁ after projecting every Λ block onto the Λ dark
/// state.
pub fn lambda_dark_member_populations(state: &FamilyBlockState, params: &SimParams) -> Result<(f64, f64)> {
    let psi = dark_state(FamilyKind::Lambda, params)?;
    let p = dark_population(state, FamilyKind::Lambda, params)?;
    Ok((psi[1] * psi[1] * p, psi[2] * psi[2] * p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_momentum_grid;
    use crate::liouvillian::{build_initial_state, IwBlock, LambdaBlock};
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn equal() -> SimParams {
        SimParams::new(0.3, 0.3, 0.0, 5e-3).unwrap()
    }

    #[test]
    fn initial_distribution_is_the_gaussian() {
        let grid = build_momentum_grid(8.0, 20).unwrap();
        let st = build_initial_state(grid, 0.15).unwrap();
        let dist = momentum_distribution(&st);
        assert_abs_diff_eq!(dist.total(), 1.0, epsilon = 1e-12);
        let norm: f64 = dist.momenta().iter().map(|p| (-0.5 * (p / 0.15f64).powi(2)).exp()).sum();
        for (p, n) in dist.momenta().iter().zip(&dist.density) {
            let expect = (-0.5 * (p / 0.15f64).powi(2)).exp() / norm / dist.grid.spacing();
            assert_abs_diff_eq!(*n, expect, epsilon = 1e-12);
        }
        assert!(dist.asymmetry() < 1e-15);
    }

    #[test]
    fn lambda_dark_state_has_two_peaks() {
        let grid = build_momentum_grid(4.0, 4).unwrap();
        let psi = dark_state(FamilyKind::Lambda, &equal()).unwrap();
        let mut st = FamilyBlockState::zeros(grid);
        st.lambda[grid.half_points()] = LambdaBlock::from_fn(|a, b| c(psi[a] * psi[b]));
        let dist = momentum_distribution(&st);
        let h = dist.grid.spacing();
        for (p, n) in dist.momenta().iter().zip(&dist.density) {
            let w = n * h;
            if (p.abs() - 1.0).abs() < 1e-12 {
                assert_abs_diff_eq!(w, 0.5, epsilon = 1e-15);
            } else {
                assert_eq!(w, 0.0);
            }
        }
        assert_abs_diff_eq!(dark_population(&st, FamilyKind::Lambda, &equal()).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn inverted_w_dark_state_weights() {
        let grid = build_momentum_grid(4.0, 4).unwrap();
        let psi = dark_state(FamilyKind::InvertedW, &equal()).unwrap();
        let mut st = FamilyBlockState::zeros(grid);
        st.iw[grid.half_points()] = IwBlock::from_fn(|a, b| c(psi[a] * psi[b]));
        let dist = momentum_distribution(&st);
        let h = dist.grid.spacing();
        let at = |p: f64| dist.density[dist.grid.nearest(p).unwrap()] * h;
        assert_abs_diff_eq!(at(-2.0), 1.0 / 8.0, epsilon = 1e-15);
        assert_abs_diff_eq!(at(0.0), 6.0 / 8.0, epsilon = 1e-15);
        assert_abs_diff_eq!(at(2.0), 1.0 / 8.0, epsilon = 1e-15);
        assert_abs_diff_eq!(dist.total(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn dark_population_of_uniform_mixture() {
        // ⟨ψ|ρ|ψ⟩ = (Ω₋²ρ₋₁ + Ω₊²ρ₊₁)/(Ω₊²+Ω₋²) with ρ±₁ = 1/5 summed over q.
        let grid = build_momentum_grid(8.0, 20).unwrap();
        let st = build_initial_state(grid, 0.15).unwrap();
        let lam_ground: f64 = st.lambda.iter().map(|b| b[(1, 1)].re + b[(2, 2)].re).sum();
        assert_abs_diff_eq!(lam_ground, 0.4, epsilon = 1e-12);
        let p = dark_population(&st, FamilyKind::Lambda, &equal()).unwrap();
        assert_abs_diff_eq!(p, 0.2, epsilon = 1e-12);
        let skew = SimParams::new(0.3, 0.1, 0.0, 5e-3).unwrap();
        assert_abs_diff_eq!(dark_population(&st, FamilyKind::Lambda, &skew).unwrap(), 0.2, epsilon = 1e-12);
        // (1 + 6 + 1)/8 of 1/5 each
        assert_abs_diff_eq!(dark_population(&st, FamilyKind::InvertedW, &equal()).unwrap(), 0.2, epsilon = 1e-12);
    }

    #[test]
    fn bright_state_has_no_dark_population() {
        let grid = build_momentum_grid(2.0, 4).unwrap();
        let s = 0.5f64.sqrt();
        let bright = [0.0, s, s];
        let mut st = FamilyBlockState::zeros(grid);
        st.lambda[3] = LambdaBlock::from_fn(|a, b| c(bright[a] * bright[b]));
        assert_abs_diff_eq!(dark_population(&st, FamilyKind::Lambda, &equal()).unwrap(), 0.0, epsilon = 1e-16);
    }

    #[test]
    fn projected_member_ratio() {
        let grid = build_momentum_grid(8.0, 20).unwrap();
        let st = build_initial_state(grid, 0.15).unwrap();
        let params = SimParams::new(0.3, 0.24, 0.0, 5e-3).unwrap();
        let (minus, plus) = lambda_dark_member_populations(&st, &params).unwrap();
        assert_abs_diff_eq!(minus / plus, 0.64, epsilon = 1e-12);
    }
}
