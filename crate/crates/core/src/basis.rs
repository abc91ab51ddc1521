//! Internal level structure of the J_g=2 ↔ J_e=1 transition, its
//! Clebsch-Gordan amplitudes, the momentum-family decomposition and the
//! discretized momentum grid.
//!
//! Units: momenta in ħk, so the member of a family with label `q` whose
//! internal state has magnetic quantum number `m` sits at momentum `q + m`.
//! This holds for both families and both manifolds and is what makes every
//! recoil shift an exact index shift on the grid.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Manifold {
    Ground,
    Excited,
}

/// A Zeeman sublevel `g_m` (J=2) or `e_m` (J=1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct InternalState {
    manifold: Manifold,
    m: i32,
}

impl InternalState {
    pub fn ground(m: i32) -> Result<Self> {
        if !(-2..=2).contains(&m) {
            return Err(Error::InvalidSublevel { manifold: "ground", m });
        }
        Ok(Self { manifold: Manifold::Ground, m })
    }

    pub fn excited(m: i32) -> Result<Self> {
        if !(-1..=1).contains(&m) {
            return Err(Error::InvalidSublevel { manifold: "excited", m });
        }
        Ok(Self { manifold: Manifold::Excited, m })
    }

    const fn g(m: i32) -> Self {
        Self { manifold: Manifold::Ground, m }
    }

    const fn e(m: i32) -> Self {
        Self { manifold: Manifold::Excited, m }
    }

    pub fn manifold(&self) -> Manifold {
        self.manifold
    }

    pub fn m(&self) -> i32 {
        self.m
    }

    pub fn is_excited(&self) -> bool {
        self.manifold == Manifold::Excited
    }

    /// All eight sublevels: ground m=-2..2 followed by excited m=-1..1.
    pub fn all() -> [InternalState; 8] {
        [
            Self::g(-2),
            Self::g(-1),
            Self::g(0),
            Self::g(1),
            Self::g(2),
            Self::e(-1),
            Self::e(0),
            Self::e(1),
        ]
    }

    /// The family kind this sublevel belongs to.
    pub fn family(&self) -> FamilyKind {
        let odd = self.m.rem_euclid(2) == 1;
        match (self.manifold, odd) {
            (Manifold::Ground, true) | (Manifold::Excited, false) => FamilyKind::Lambda,
            _ => FamilyKind::InvertedW,
        }
    }
}

impl fmt::Display for InternalState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.manifold {
            Manifold::Ground => 'g',
            Manifold::Excited => 'e',
        };
        write!(f, "{tag}{:+}", self.m)
    }
}

/// Circular polarization of a laser beam. σ⁺ travels along +z and raises m,
/// σ⁻ travels along −z and lowers m.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarization {
    SigmaPlus,
    SigmaMinus,
}

impl Polarization {
    /// Change of m on absorption, which equals the photon momentum in ħk.
    pub fn delta_m(self) -> i32 {
        match self {
            Polarization::SigmaPlus => 1,
            Polarization::SigmaMinus => -1,
        }
    }
}

/// Prefactor multiplying (ħ/2)Ω for the transition g_{m_g} → e_{m_g±1}.
///
/// Signs are all positive. Zero when the target excited sublevel does not
/// exist.
pub fn coupling_amplitude(m_g: i32, polarization: Polarization) -> Result<f64> {
    InternalState::ground(m_g)?;
    // the σ⁻ table is the σ⁺ table mirrored under m → −m
    let m = match polarization {
        Polarization::SigmaPlus => m_g,
        Polarization::SigmaMinus => -m_g,
    };
    Ok(match m {
        -2 => (6.0f64 / 10.0).sqrt(),
        -1 => (3.0f64 / 10.0).sqrt(),
        0 => (1.0f64 / 10.0).sqrt(),
        _ => 0.0,
    })
}

/// Signed dipole amplitude for spontaneous decay e_{m_e} → g_{m_g}, in the
/// phase convention of the standard Clebsch-Gordan table ⟨2 m_g; 1 q | 1 m_e⟩.
///
/// σ entries coincide with [`coupling_amplitude`]; π entries carry a minus
/// sign. For every excited sublevel the squares sum to 1.
pub fn decay_amplitude(m_e: i32, m_g: i32) -> f64 {
    if !(-1..=1).contains(&m_e) || !(-2..=2).contains(&m_g) {
        return 0.0;
    }
    match m_g - m_e {
        // absorption of σ⁺ from g_{m_e-1}
        -1 => coupling_amplitude(m_g, Polarization::SigmaPlus).unwrap_or(0.0),
        1 => coupling_amplitude(m_g, Polarization::SigmaMinus).unwrap_or(0.0),
        0 => match m_e {
            0 => -(4.0f64 / 10.0).sqrt(),
            _ => -(3.0f64 / 10.0).sqrt(),
        },
        _ => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    Lambda,
    InvertedW,
}

const LAMBDA_MEMBERS: [InternalState; 3] =
    [InternalState::e(0), InternalState::g(-1), InternalState::g(1)];

const IW_MEMBERS: [InternalState; 5] = [
    InternalState::g(-2),
    InternalState::e(-1),
    InternalState::g(0),
    InternalState::e(1),
    InternalState::g(2),
];

impl FamilyKind {
    pub const ALL: [FamilyKind; 2] = [FamilyKind::Lambda, FamilyKind::InvertedW];

    pub fn dim(self) -> usize {
        self.states().len()
    }

    /// Member sublevels in canonical family order.
    pub fn states(self) -> &'static [InternalState] {
        match self {
            FamilyKind::Lambda => &LAMBDA_MEMBERS,
            FamilyKind::InvertedW => &IW_MEMBERS,
        }
    }

    pub fn index_of(self, state: InternalState) -> Option<usize> {
        self.states().iter().position(|s| *s == state)
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilyKind::Lambda => f.write_str("lambda"),
            FamilyKind::InvertedW => f.write_str("inverted-w"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyMember {
    pub state: InternalState,
    /// Momentum offset from the family label, in ħk.
    pub offset: i32,
}

/// The ordered members of F^Λ(q) or F^IW(q).
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyBasis {
    pub kind: FamilyKind,
    pub q: f64,
    pub members: Vec<FamilyMember>,
}

impl FamilyBasis {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Physical momentum of member `i`, in ħk.
    pub fn momentum(&self, i: usize) -> f64 {
        self.q + f64::from(self.members[i].offset)
    }
}

pub fn family_members(kind: FamilyKind, q: f64) -> FamilyBasis {
    let members = kind
        .states()
        .iter()
        .map(|&state| FamilyMember { state, offset: state.m() })
        .collect();
    FamilyBasis { kind, q, members }
}

/// Uniform momentum grid symmetric about zero, stored as integer indices so
/// that recoil shifts are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MomentumGrid {
    half_points: usize,
    points_per_recoil: usize,
}

impl MomentumGrid {
    /// Grid spanning `[-half_points, half_points] / points_per_recoil`.
    pub fn from_counts(half_points: usize, points_per_recoil: usize) -> Result<Self> {
        if points_per_recoil == 0 {
            return Err(Error::InvalidGrid("points_per_recoil must be at least 1".into()));
        }
        if half_points == 0 {
            return Err(Error::InvalidGrid("grid must extend beyond p = 0".into()));
        }
        Ok(Self { half_points, points_per_recoil })
    }

    pub fn len(&self) -> usize {
        2 * self.half_points + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn half_points(&self) -> usize {
        self.half_points
    }

    pub fn points_per_recoil(&self) -> usize {
        self.points_per_recoil
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.points_per_recoil as f64
    }

    pub fn p_max(&self) -> f64 {
        self.half_points as f64 / self.points_per_recoil as f64
    }

    /// Momentum at storage index `i`.
    pub fn value(&self, i: usize) -> f64 {
        (i as f64 - self.half_points as f64) / self.points_per_recoil as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.value(i)).collect()
    }

    /// Storage index of the signed lattice coordinate `k` (momentum k·spacing),
    /// or `None` when it falls off the grid.
    pub fn index(&self, k: isize) -> Option<usize> {
        let i = k + self.half_points as isize;
        (i >= 0 && (i as usize) < self.len()).then_some(i as usize)
    }

    /// Signed lattice coordinate of storage index `i`.
    pub fn coordinate(&self, i: usize) -> isize {
        i as isize - self.half_points as isize
    }

    /// Storage index nearest to momentum `p`, if on the grid.
    pub fn nearest(&self, p: f64) -> Option<usize> {
        self.index((p * self.points_per_recoil as f64).round() as isize)
    }

    /// Same spacing, widened by `recoils` ħk on each side.
    pub fn widened(&self, recoils: usize) -> Self {
        Self {
            half_points: self.half_points + recoils * self.points_per_recoil,
            points_per_recoil: self.points_per_recoil,
        }
    }
}

/// Builds the grid `[-p_max, p_max]` with spacing ħk / `points_per_recoil`.
/// `p_max` must be a whole multiple of the spacing.
pub fn build_momentum_grid(p_max: f64, points_per_recoil: usize) -> Result<MomentumGrid> {
    if !(p_max > 0.0) || !p_max.is_finite() {
        return Err(Error::InvalidGrid(format!("p_max must be positive, got {p_max}")));
    }
    if points_per_recoil == 0 {
        return Err(Error::InvalidGrid("points_per_recoil must be at least 1".into()));
    }
    let half = p_max * points_per_recoil as f64;
    let rounded = half.round();
    if (half - rounded).abs() > 1e-9 * half.max(1.0) {
        return Err(Error::InvalidGrid(format!(
            "p_max={p_max} is not a multiple of the spacing 1/{points_per_recoil}"
        )));
    }
    MomentumGrid::from_counts(rounded as usize, points_per_recoil)
}
