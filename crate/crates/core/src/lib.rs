//! Velocity-selective coherent population trapping of atoms on a
//! J_g = 2 ↔ J_e = 1 transition driven by counter-propagating σ⁺/σ⁻ beams.
//!
//! The density matrix is stored in closed momentum families (Λ and inverted
//! W) and evolved with the generalized optical Bloch equations including
//! recoil during spontaneous emission. Units: ħ = Γ = 1, momenta in ħk.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN
pub mod analysis;
pub mod basis;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod liouvillian;
pub mod propagation;
pub mod scenario;

pub use basis::{build_momentum_grid, FamilyKind, InternalState, MomentumGrid, Polarization};
pub use dynamics::SimParams;
pub use error::{Error, Result};
pub use liouvillian::{build_initial_state, FamilyBlockState};
pub use propagation::{evolve, IntegratorConfig, Snapshot, Trajectory};
pub use scenario::{parse_config, preset, run_scenario, simulate, PresetName, ScenarioConfig};
