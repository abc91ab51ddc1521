//! Fixed-step time integration of the Bloch equation and trajectory
//! recording. An independent dense-superoperator propagator lives in
//! [`oracle`].

pub mod expm;
pub mod oracle;

use crate::analysis::{dark_population, momentum_distribution, DISTRIBUTION_MARGIN};
use crate::basis::{FamilyKind, MomentumGrid};
use crate::dynamics::SimParams;
use crate::error::{Error, Result};
use crate::liouvillian::{BlochGenerator, FamilyBlockState};

/// Largest admissible Γ·dt.
pub const MAX_STABLE_DT: f64 = 0.1;

/// Diagonal entries below this flag an integration failure.
pub const NEGATIVE_POPULATION_TOLERANCE: f64 = -1e-9;

/// Default step, 1/50 Γ⁻¹.
pub const DEFAULT_DT: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_final: f64,
    pub observation_stride: usize,
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter { name: "dt", reason: format!("must be positive, got {}", self.dt) });
        }
        if self.dt > MAX_STABLE_DT {
            return Err(Error::StepTooLarge { dt: self.dt, limit: MAX_STABLE_DT });
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(Error::InvalidParameter {
                name: "t_final",
                reason: format!("must be non-negative, got {}", self.t_final),
            });
        }
        if self.observation_stride == 0 {
            return Err(Error::InvalidParameter { name: "observation_stride", reason: "must be at least 1".into() });
        }
        Ok(())
    }

    /// Number of full steps and the length of a trailing partial step (zero
    /// when `t_final` is a whole number of steps).
    fn schedule(&self) -> (usize, f64) {
        let ratio = self.t_final / self.dt;
        let full = (ratio + 1e-9).floor();
        let rest = self.t_final - full * self.dt;
        let rest = if rest.abs() <= 1e-9 * self.dt { 0.0 } else { rest };
        (full as usize, rest)
    }
}

/// Observables recorded at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub gamma_t: f64,
    pub trace: f64,
    pub lost_trace: f64,
    /// NaN when no light is on.
    pub dark_lambda: f64,
    pub dark_iw: f64,
    pub min_diagonal: f64,
    /// Largest |ρ − ρ†| seen before re-Hermitization since the previous
    /// snapshot.
    pub hermiticity_drift: f64,
    /// Momentum density on the trajectory's distribution grid.
    pub distribution: Vec<f64>,
}

impl Snapshot {
    pub fn dark(&self, kind: FamilyKind) -> f64 {
        match kind {
            FamilyKind::Lambda => self.dark_lambda,
            FamilyKind::InvertedW => self.dark_iw,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Grid of the recorded momentum distributions.
    pub grid: MomentumGrid,
    pub snapshots: Vec<Snapshot>,
}

impl Trajectory {
    pub fn new(state_grid: MomentumGrid) -> Self {
        Self { grid: state_grid.widened(DISTRIBUTION_MARGIN), snapshots: Vec::new() }
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.gamma_t).collect()
    }

    /// Appends another trajectory, dropping its first snapshot when it
    /// repeats our last time stamp.
    pub fn extend(&mut self, other: Trajectory) {
        let last = self.snapshots.last().map(|s| s.gamma_t);
        for s in other.snapshots {
            if last.is_some_and(|t| s.gamma_t <= t) {
                continue;
            }
            self.snapshots.push(s);
        }
    }
}

pub fn observe(state: &FamilyBlockState, params: &SimParams, gamma_t: f64, drift: f64) -> Snapshot {
    let dark = |kind| dark_population(state, kind, params).unwrap_or(f64::NAN);
    Snapshot {
        gamma_t,
        trace: state.trace(),
        lost_trace: state.lost_trace,
        dark_lambda: dark(FamilyKind::Lambda),
        dark_iw: dark(FamilyKind::InvertedW),
        min_diagonal: state.min_diagonal(),
        hermiticity_drift: drift,
        distribution: momentum_distribution(state).density,
    }
}

/// Classical RK4 with preallocated stage buffers.
#[derive(Debug, Clone)]
pub struct Stepper {
    generator: BlochGenerator,
    k: [FamilyBlockState; 4],
    tmp: FamilyBlockState,
}

impl Stepper {
    pub fn new(grid: MomentumGrid, params: SimParams) -> Self {
        let z = FamilyBlockState::zeros(grid);
        Self {
            generator: BlochGenerator::new(grid, params),
            k: [z.clone(), z.clone(), z.clone(), z.clone()],
            tmp: z,
        }
    }

    pub fn params(&self) -> &SimParams {
        self.generator.params()
    }

    /// Advances `state` by `dt` in place and re-Hermitizes it. Returns the
    /// Hermiticity error of the raw RK4 update.
    pub fn step(&mut self, state: &mut FamilyBlockState, dt: f64) -> Result<f64> {
        if dt > MAX_STABLE_DT {
            return Err(Error::StepTooLarge { dt, limit: MAX_STABLE_DT });
        }
        let [k1, k2, k3, k4] = &mut self.k;
        self.generator.apply(state, k1);
        self.tmp.assign_combination(state, 0.5 * dt, k1);
        self.generator.apply(&self.tmp, k2);
        self.tmp.assign_combination(state, 0.5 * dt, k2);
        self.generator.apply(&self.tmp, k3);
        self.tmp.assign_combination(state, dt, k3);
        self.generator.apply(&self.tmp, k4);

        state.add_scaled(dt / 6.0, k1);
        state.add_scaled(dt / 3.0, k2);
        state.add_scaled(dt / 3.0, k3);
        state.add_scaled(dt / 6.0, k4);
        let drift = state.hermiticity_error();
        state.hermitize();
        Ok(drift)
    }
}

fn check_positive(state: &FamilyBlockState, gamma_t: f64) -> Result<()> {
    let min = state.min_diagonal();
    if min < NEGATIVE_POPULATION_TOLERANCE {
        return Err(Error::NegativePopulation { gamma_t, value: min });
    }
    Ok(())
}

/// One RK4 step of length `dt`.
pub fn rk4_step(state: &FamilyBlockState, params: &SimParams, dt: f64) -> Result<FamilyBlockState> {
    if !(dt >= 0.0) {
        return Err(Error::InvalidParameter { name: "dt", reason: format!("must be non-negative, got {dt}") });
    }
    let mut out = state.clone();
    Stepper::new(state.grid, *params).step(&mut out, dt)?;
    check_positive(&out, dt)?;
    Ok(out)
}

/// Integrates from Γt = 0 to `config.t_final`.
pub fn evolve(
    state0: &FamilyBlockState,
    params: &SimParams,
    config: &IntegratorConfig,
) -> Result<(FamilyBlockState, Trajectory)> {
    evolve_from(state0, params, config, 0.0)
}

/// Like [`evolve`] with time stamps offset by `t_start`. Snapshots are taken
/// at the start, every `observation_stride` steps, and at the end.
pub fn evolve_from(
    state0: &FamilyBlockState,
    params: &SimParams,
    config: &IntegratorConfig,
    t_start: f64,
) -> Result<(FamilyBlockState, Trajectory)> {
    config.validate()?;
    params.validate()?;
    let mut state = state0.clone();
    let mut stepper = Stepper::new(state.grid, *params);
    let mut trajectory = Trajectory::new(state.grid);
    trajectory.snapshots.push(observe(&state, params, t_start, state.hermiticity_error()));

    let (full, rest) = config.schedule();
    let mut drift = 0.0f64;
    for n in 1..=full {
        drift = drift.max(stepper.step(&mut state, config.dt)?);
        let t = t_start + n as f64 * config.dt;
        check_positive(&state, t)?;
        if n % config.observation_stride == 0 || (n == full && rest == 0.0) {
            trajectory.snapshots.push(observe(&state, params, t, drift));
            drift = 0.0;
        }
    }
    if rest > 0.0 {
        drift = drift.max(stepper.step(&mut state, rest)?);
        let t = t_start + config.t_final;
        check_positive(&state, t)?;
        trajectory.snapshots.push(observe(&state, params, t, drift));
    }
    Ok((state, trajectory))
}
