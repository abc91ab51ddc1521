//! Density operator in the momentum-family block structure and the right-hand
//! side of the generalized optical Bloch equation.
//!
//! The state stores one 3×3 block per family label q for F^Λ(q) and one 5×5
//! block for F^IW(q). Coherences between different families are never
//! generated from family-diagonal data, so they are not stored at all.
//!
//! Time is in units of Γ⁻¹, so the spontaneous decay rate is 1.

use nalgebra::SMatrix;
use num_complex::Complex64;

use crate::basis::{decay_amplitude, FamilyKind, InternalState, MomentumGrid};
use crate::dynamics::{static_hamiltonian, SimParams};
use crate::error::{Error, Result};

pub type LambdaBlock = SMatrix<Complex64, 3, 3>;
pub type IwBlock = SMatrix<Complex64, 5, 5>;

const LAMBDA_EXCITED: [bool; 3] = [true, false, false];
const IW_EXCITED: [bool; 5] = [false, true, false, true, false];

/// Density operator in the family basis plus the probability that has
/// been fed to family labels outside the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyBlockState {
    pub grid: MomentumGrid,
    /// F^Λ(q) blocks indexed like the grid, member order (e₀, g₋₁, g₊₁).
    pub lambda: Vec<LambdaBlock>,
    /// F^IW(q) blocks, member order (g₋₂, e₋₁, g₀, e₊₁, g₊₂).
    pub iw: Vec<IwBlock>,
    pub lost_trace: f64,
}

impl FamilyBlockState {
    pub fn zeros(grid: MomentumGrid) -> Self {
        Self {
            grid,
            lambda: vec![LambdaBlock::zeros(); grid.len()],
            iw: vec![IwBlock::zeros(); grid.len()],
            lost_trace: 0.0,
        }
    }

    pub fn set_zero(&mut self) {
        self.lambda.iter_mut().for_each(|b| b.fill(Complex64::new(0.0, 0.0)));
        self.iw.iter_mut().for_each(|b| b.fill(Complex64::new(0.0, 0.0)));
        self.lost_trace = 0.0;
    }

    pub fn get(&self, kind: FamilyKind, q: usize, a: usize, b: usize) -> Complex64 {
        match kind {
            FamilyKind::Lambda => self.lambda[q][(a, b)],
            FamilyKind::InvertedW => self.iw[q][(a, b)],
        }
    }

    pub fn get_mut(&mut self, kind: FamilyKind, q: usize, a: usize, b: usize) -> &mut Complex64 {
        match kind {
            FamilyKind::Lambda => &mut self.lambda[q][(a, b)],
            FamilyKind::InvertedW => &mut self.iw[q][(a, b)],
        }
    }

    /// Population held on the grid.
    pub fn trace(&self) -> f64 {
        let l: f64 = self.lambda.iter().map(|b| b.trace().re).sum();
        let w: f64 = self.iw.iter().map(|b| b.trace().re).sum();
        l + w
    }

    /// Trace plus lost trace; conserved by the dynamics.
    pub fn total(&self) -> f64 {
        self.trace() + self.lost_trace
    }

    pub fn min_diagonal(&self) -> f64 {
        let l = self.lambda.iter().flat_map(|b| (0..3).map(move |i| b[(i, i)].re));
        let w = self.iw.iter().flat_map(|b| (0..5).map(move |i| b[(i, i)].re));
        l.chain(w).fold(f64::INFINITY, f64::min)
    }

    /// max |ρ − ρ†| over all stored elements.
    pub fn hermiticity_error(&self) -> f64 {
        fn block_err<const D: usize>(b: &SMatrix<Complex64, D, D>) -> f64 {
            (b - b.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
        }
        let l = self.lambda.iter().map(block_err).fold(0.0, f64::max);
        let w = self.iw.iter().map(block_err).fold(0.0, f64::max);
        l.max(w)
    }

    /// ρ ← (ρ + ρ†)/2 blockwise.
    pub fn hermitize(&mut self) {
        for b in &mut self.lambda {
            *b = (*b + b.adjoint()) * Complex64::new(0.5, 0.0);
        }
        for b in &mut self.iw {
            *b = (*b + b.adjoint()) * Complex64::new(0.5, 0.0);
        }
    }

    /// self ← self + a·other
    pub fn add_scaled(&mut self, a: f64, other: &FamilyBlockState) {
        let s = Complex64::new(a, 0.0);
        for (x, y) in self.lambda.iter_mut().zip(&other.lambda) {
            *x += y * s;
        }
        for (x, y) in self.iw.iter_mut().zip(&other.iw) {
            *x += y * s;
        }
        self.lost_trace += a * other.lost_trace;
    }

    /// self ← base + a·other
    pub fn assign_combination(&mut self, base: &FamilyBlockState, a: f64, other: &FamilyBlockState) {
        let s = Complex64::new(a, 0.0);
        for ((x, b), y) in self.lambda.iter_mut().zip(&base.lambda).zip(&other.lambda) {
            *x = b + y * s;
        }
        for ((x, b), y) in self.iw.iter_mut().zip(&base.iw).zip(&other.iw) {
            *x = b + y * s;
        }
        self.lost_trace = base.lost_trace + a * other.lost_trace;
    }

    /// Largest elementwise difference to another state on the same grid,
    /// including the lost-trace accumulator.
    pub fn max_abs_diff(&self, other: &FamilyBlockState) -> f64 {
        let l = self
            .lambda
            .iter()
            .zip(&other.lambda)
            .flat_map(|(x, y)| (x - y).iter().map(|z| z.norm()).collect::<Vec<_>>());
        let w = self
            .iw
            .iter()
            .zip(&other.iw)
            .flat_map(|(x, y)| (x - y).iter().map(|z| z.norm()).collect::<Vec<_>>());
        l.chain(w).fold((self.lost_trace - other.lost_trace).abs(), f64::max)
    }

    /// Image under the reflection m → −m, p → −p.
    pub fn mirrored(&self) -> FamilyBlockState {
        const LAMBDA_PERM: [usize; 3] = [0, 2, 1];
        const IW_PERM: [usize; 5] = [4, 3, 2, 1, 0];
        let n = self.grid.len();
        let mut out = FamilyBlockState::zeros(self.grid);
        for i in 0..n {
            let j = n - 1 - i;
            out.lambda[j] = LambdaBlock::from_fn(|a, b| self.lambda[i][(LAMBDA_PERM[a], LAMBDA_PERM[b])]);
            out.iw[j] = IwBlock::from_fn(|a, b| self.iw[i][(IW_PERM[a], IW_PERM[b])]);
        }
        out.lost_trace = self.lost_trace;
        out
    }
}

/// Polarization class of a spontaneously emitted photon, which sets the
/// angular distribution of its recoil along the beam axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolarizationClass {
    Pi,
    Sigma,
}

impl PolarizationClass {
    /// Class of the photon emitted in e_m → g_{m+d}.
    pub fn of_decay(d: i32) -> Self {
        if d == 0 {
            PolarizationClass::Pi
        } else {
            PolarizationClass::Sigma
        }
    }

    /// Probability density of the photon momentum projection u (in ħk) on
    /// the quantization axis, u ∈ [−1, 1].
    pub fn density(self, u: f64) -> f64 {
        if !(-1.0..=1.0).contains(&u) {
            return 0.0;
        }
        match self {
            PolarizationClass::Pi => 0.75 * (1.0 - u * u),
            PolarizationClass::Sigma => 0.375 * (1.0 + u * u),
        }
    }
}

/// Discretized recoil distribution on offsets u_j = j / points_per_recoil,
/// j = −points_per_recoil..=points_per_recoil.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionKernel {
    pub class: PolarizationClass,
    pub points_per_recoil: usize,
    pub weights: Vec<f64>,
}

impl EmissionKernel {
    pub fn offsets(&self) -> Vec<f64> {
        let n = self.points_per_recoil as f64;
        (0..self.weights.len()).map(|k| (k as f64 - n) / n).collect()
    }

    /// Weight at lattice offset j.
    pub fn weight(&self, j: isize) -> f64 {
        let k = j + self.points_per_recoil as isize;
        if k < 0 {
            return 0.0;
        }
        self.weights.get(k as usize).copied().unwrap_or(0.0)
    }
}

pub fn emission_kernel(class: PolarizationClass, points_per_recoil: usize) -> Result<EmissionKernel> {
    if points_per_recoil == 0 {
        return Err(Error::InvalidGrid("points_per_recoil must be at least 1".into()));
    }
    let n = points_per_recoil as f64;
    let du = 1.0 / n;
    let mut weights: Vec<f64> = (-(points_per_recoil as isize)..=points_per_recoil as isize)
        .map(|j| class.density(j as f64 / n) * du)
        .collect();
    let sum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= sum);
    // absorb the last rounding ulp in the central weight
    let residual = 1.0 - weights.iter().sum::<f64>();
    weights[points_per_recoil] += residual;
    Ok(EmissionKernel { class, points_per_recoil, weights })
}

/// Normalized Gaussian of standard deviation `delta_q` centred at p = 0,
/// spread evenly over the five ground sublevels; no excited population and no
/// coherences.
pub fn build_initial_state(grid: MomentumGrid, delta_q: f64) -> Result<FamilyBlockState> {
    if !(delta_q > 0.0) || !delta_q.is_finite() {
        return Err(Error::InvalidParameter {
            name: "initial_delta_q",
            reason: format!("must be positive, got {delta_q}"),
        });
    }
    if delta_q > grid.p_max() / 4.0 {
        return Err(Error::InvalidParameter {
            name: "initial_delta_q",
            reason: format!("{delta_q} is too wide for a grid of half-width {}", grid.p_max()),
        });
    }
    let mut state = FamilyBlockState::zeros(grid);
    for m in -2..=2 {
        let g = InternalState::ground(m)?;
        let kind = g.family();
        let slot = kind.index_of(g).expect("sublevel belongs to its family");
        let weights: Vec<f64> = (0..grid.len())
            .map(|i| {
                let p = grid.value(i) + f64::from(m);
                (-0.5 * (p / delta_q).powi(2)).exp()
            })
            .collect();
        let sum: f64 = weights.iter().sum();
        for (i, w) in weights.iter().enumerate() {
            *state.get_mut(kind, i, slot, slot) = Complex64::new(0.2 * w / sum, 0.0);
        }
    }
    Ok(state)
}

/// Spontaneous-emission transfer of one excited-pair element of a source
/// family into one ground-pair element of a target family.
#[derive(Debug, Clone, Copy)]
struct FeedChannel {
    source: FamilyKind,
    a: usize,
    b: usize,
    target: FamilyKind,
    ta: usize,
    tb: usize,
    /// m_g − m_e; the target family label is q − d − u.
    d: i32,
    amplitude: f64,
}

fn feed_channels() -> Vec<FeedChannel> {
    let mut out = Vec::new();
    for source in FamilyKind::ALL {
        let excited: Vec<(usize, InternalState)> = source
            .states()
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, s)| s.is_excited())
            .collect();
        for &(a, ea) in &excited {
            for &(b, eb) in &excited {
                for d in -1..=1 {
                    let (Ok(ga), Ok(gb)) =
                        (InternalState::ground(ea.m() + d), InternalState::ground(eb.m() + d))
                    else {
                        continue;
                    };
                    let target = ga.family();
                    debug_assert_eq!(target, gb.family());
                    let amplitude = decay_amplitude(ea.m(), ga.m()) * decay_amplitude(eb.m(), gb.m());
                    if amplitude == 0.0 {
                        continue;
                    }
                    out.push(FeedChannel {
                        source,
                        a,
                        b,
                        target,
                        ta: target.index_of(ga).unwrap(),
                        tb: target.index_of(gb).unwrap(),
                        d,
                        amplitude,
                    });
                }
            }
        }
    }
    out
}

/// Generator of the Bloch equation for fixed parameters, with the family
/// Hamiltonians and emission kernels precomputed.
#[derive(Debug, Clone)]
pub struct BlochGenerator {
    grid: MomentumGrid,
    params: SimParams,
    h_lambda: Vec<LambdaBlock>,
    h_iw: Vec<IwBlock>,
    pi: EmissionKernel,
    sigma: EmissionKernel,
    channels: Vec<FeedChannel>,
}

fn local_terms<const D: usize>(
    h: &SMatrix<Complex64, D, D>,
    rho: &SMatrix<Complex64, D, D>,
    excited: &[bool; D],
) -> SMatrix<Complex64, D, D> {
    let minus_i = Complex64::new(0.0, -1.0);
    let mut d = (h * rho - rho * h) * minus_i;
    for a in 0..D {
        for b in 0..D {
            let rate = 0.5 * (f64::from(u8::from(excited[a])) + f64::from(u8::from(excited[b])));
            if rate != 0.0 {
                d[(a, b)] -= rho[(a, b)] * rate;
            }
        }
    }
    d
}

impl BlochGenerator {
    pub fn new(grid: MomentumGrid, params: SimParams) -> Self {
        let n = grid.points_per_recoil();
        let h_lambda = (0..grid.len())
            .map(|i| static_hamiltonian::<3>(FamilyKind::Lambda, grid.value(i), &params))
            .collect();
        let h_iw = (0..grid.len())
            .map(|i| static_hamiltonian::<5>(FamilyKind::InvertedW, grid.value(i), &params))
            .collect();
        Self {
            grid,
            params,
            h_lambda,
            h_iw,
            pi: emission_kernel(PolarizationClass::Pi, n).expect("grid has n ≥ 1"),
            sigma: emission_kernel(PolarizationClass::Sigma, n).expect("grid has n ≥ 1"),
            channels: feed_channels(),
        }
    }

    pub fn grid(&self) -> MomentumGrid {
        self.grid
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    /// Writes dρ/dt into `out`; `out.lost_trace` receives the rate at which
    /// population is fed off the grid.
    pub fn apply(&self, state: &FamilyBlockState, out: &mut FamilyBlockState) {
        debug_assert_eq!(state.grid, self.grid);
        for ((o, h), r) in out.lambda.iter_mut().zip(&self.h_lambda).zip(&state.lambda) {
            *o = local_terms(h, r, &LAMBDA_EXCITED);
        }
        for ((o, h), r) in out.iw.iter_mut().zip(&self.h_iw).zip(&state.iw) {
            *o = local_terms(h, r, &IW_EXCITED);
        }
        out.lost_trace = 0.0;

        let n = self.grid.points_per_recoil() as isize;
        for ch in &self.channels {
            let kernel = match PolarizationClass::of_decay(ch.d) {
                PolarizationClass::Pi => &self.pi.weights,
                PolarizationClass::Sigma => &self.sigma.weights,
            };
            let diagonal = ch.ta == ch.tb;
            for i in 0..self.grid.len() {
                let v = state.get(ch.source, i, ch.a, ch.b) * ch.amplitude;
                if v == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let base = self.grid.coordinate(i) - ch.d as isize * n;
                for (k, &w) in kernel.iter().enumerate() {
                    let j = k as isize - n;
                    match self.grid.index(base - j) {
                        Some(t) => *out.get_mut(ch.target, t, ch.ta, ch.tb) += v * w,
                        None if diagonal => out.lost_trace += w * v.re,
                        None => {}
                    }
                }
            }
        }
    }
}

/// dρ/dt for the given state and parameters.
pub fn apply_rhs(state: &FamilyBlockState, params: &SimParams) -> FamilyBlockState {
    let generator = BlochGenerator::new(state.grid, *params);
    let mut out = FamilyBlockState::zeros(state.grid);
    generator.apply(state, &mut out);
    out
}
