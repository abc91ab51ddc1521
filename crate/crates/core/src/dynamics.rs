//! Per-family Hamiltonian blocks in the frame rotating at the laser
//! frequency, and the analytic dark states of the two families.

use nalgebra::{DMatrix, DVector, SMatrix};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{coupling_amplitude, family_members, FamilyBasis, FamilyKind, Polarization};
use crate::error::{Error, Result};

/// Physical parameters, all frequencies in units of Γ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Rabi frequency Ω₊ of the σ⁺ beam on the reference transition.
    pub omega_plus: f64,
    /// Rabi frequency Ω₋ of the σ⁻ beam.
    pub omega_minus: f64,
    /// Detuning δ = ω_L − ω₀.
    pub delta: f64,
    /// Recoil frequency ħk²/2M.
    pub omega_r: f64,
}

impl SimParams {
    pub fn new(omega_plus: f64, omega_minus: f64, delta: f64, omega_r: f64) -> Result<Self> {
        let params = Self { omega_plus, omega_minus, delta, omega_r };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| Err(Error::InvalidParameter { name, reason: reason.into() });
        if !(self.omega_r > 0.0) || !self.omega_r.is_finite() {
            return bad("omega_r", "must be positive");
        }
        if !(self.omega_plus >= 0.0) || !self.omega_plus.is_finite() {
            return bad("omega_plus", "must be non-negative");
        }
        if !(self.omega_minus >= 0.0) || !self.omega_minus.is_finite() {
            return bad("omega_minus", "must be non-negative");
        }
        if !self.delta.is_finite() {
            return bad("delta", "must be finite");
        }
        Ok(())
    }

    fn rabi(&self, polarization: Polarization) -> f64 {
        match polarization {
            Polarization::SigmaPlus => self.omega_plus,
            Polarization::SigmaMinus => self.omega_minus,
        }
    }
}

/// Hamiltonian restricted to one momentum family.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyBlock {
    pub basis: FamilyBasis,
    pub matrix: DMatrix<Complex64>,
}

/// Laser coupling ⟨i|V|j⟩ between two members of the same family.
fn coupling_entry(basis: &FamilyBasis, i: usize, j: usize, params: &SimParams) -> f64 {
    let (a, b) = (basis.members[i].state, basis.members[j].state);
    let (g, e) = match (a.is_excited(), b.is_excited()) {
        (true, false) => (b, a),
        (false, true) => (a, b),
        _ => return 0.0,
    };
    let pol = match e.m() - g.m() {
        1 => Polarization::SigmaPlus,
        -1 => Polarization::SigmaMinus,
        _ => return 0.0,
    };
    let c = coupling_amplitude(g.m(), pol).expect("family members are valid sublevels");
    0.5 * c * params.rabi(pol)
}

fn real_hamiltonian(basis: &FamilyBasis, params: &SimParams) -> DMatrix<f64> {
    let n = basis.len();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            let p = basis.momentum(i);
            let detuning = if basis.members[i].state.is_excited() { -params.delta } else { 0.0 };
            params.omega_r * p * p + detuning
        } else {
            coupling_entry(basis, i, j, params)
        }
    })
}

/// Kinetic energy, excited-state detuning and laser coupling for one family.
pub fn family_hamiltonian(basis: &FamilyBasis, params: &SimParams) -> FamilyBlock {
    let matrix = real_hamiltonian(basis, params).map(|x| Complex64::new(x, 0.0));
    FamilyBlock { basis: basis.clone(), matrix }
}

/// Same as [`family_hamiltonian`], in a fixed-size matrix for the hot loop.
pub(crate) fn static_hamiltonian<const D: usize>(
    kind: FamilyKind,
    q: f64,
    params: &SimParams,
) -> SMatrix<Complex64, D, D> {
    debug_assert_eq!(kind.dim(), D);
    let h = real_hamiltonian(&family_members(kind, q), params);
    SMatrix::from_fn(|i, j| Complex64::new(h[(i, j)], 0.0))
}

/// The off-diagonal (laser) part of the family Hamiltonian.
pub fn coupling_matrix(basis: &FamilyBasis, params: &SimParams) -> DMatrix<f64> {
    let n = basis.len();
    DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { coupling_entry(basis, i, j, params) })
}

/// Normalized non-coupled state of a family, in family member order.
///
/// Λ: (0, Ω₋, −Ω₊) / √(Ω₊²+Ω₋²).
/// Inverted-W: (Ω₋², 0, −√6 Ω₊Ω₋, 0, Ω₊²) / √(Ω₊⁴+6Ω₊²Ω₋²+Ω₋⁴).
pub fn dark_state(kind: FamilyKind, params: &SimParams) -> Result<DVector<f64>> {
    let (wp, wm) = (params.omega_plus, params.omega_minus);
    if wp * wp + wm * wm == 0.0 {
        return Err(Error::NoLight);
    }
    let v = match kind {
        FamilyKind::Lambda => DVector::from_vec(vec![0.0, wm, -wp]),
        FamilyKind::InvertedW => {
            DVector::from_vec(vec![wm * wm, 0.0, -(6.0f64).sqrt() * wp * wm, 0.0, wp * wp])
        }
    };
    let norm = v.norm();
    Ok(v / norm)
}

/// ‖V·ψ‖ with V the laser-coupling part of the family Hamiltonian. Zero
/// identifies a dark state.
pub fn coupling_norm(state: &DVector<Complex64>, basis: &FamilyBasis, params: &SimParams) -> f64 {
    let v = coupling_matrix(basis, params).map(|x| Complex64::new(x, 0.0));
    (v * state).norm()
}
