//! Dense reference propagator.
//!
//! Works in the flat product basis of internal state ⊗ momentum with no
//! family bookkeeping: the generator is assembled from the Hamiltonian, the
//! excited-state projector and explicit recoil jump operators in Lindblad
//! form, so any coherence between any two basis states is representable.
//! The generator is restricted to the elements reachable from the initial
//! data through its own sparsity graph, turned into a dense matrix, and
//! exponentiated by scaling and squaring.

use std::collections::{BTreeSet, HashMap, VecDeque};

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::expm::expm;
use crate::basis::{coupling_amplitude, decay_amplitude, FamilyKind, InternalState, MomentumGrid, Polarization};
use crate::dynamics::SimParams;
use crate::error::{Error, Result};
use crate::liouvillian::{emission_kernel, FamilyBlockState, PolarizationClass};

/// Default cap on the number of density-matrix elements the oracle will
/// propagate densely.
pub const DEFAULT_ELEMENT_BUDGET: usize = 1600;

/// Basis states (s, p) with p in lattice units of the grid spacing. The
/// momentum window of each sublevel is the grid shifted by m recoils, which
/// is the truncation the block representation uses.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseBasis {
    pub grid: MomentumGrid,
    pub states: Vec<(InternalState, isize)>,
    index: HashMap<(InternalState, isize), usize>,
}

impl DenseBasis {
    pub fn new(grid: MomentumGrid) -> Self {
        let n = grid.points_per_recoil() as isize;
        let states: Vec<_> = InternalState::all()
            .into_iter()
            .flat_map(|s| (0..grid.len()).map(move |i| (s, grid.coordinate(i) + s.m() as isize * n)))
            .collect();
        let index = states.iter().enumerate().map(|(i, &k)| (k, i)).collect();
        Self { grid, states, index }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn find(&self, state: InternalState, p: isize) -> Option<usize> {
        self.index.get(&(state, p)).copied()
    }

    /// Family kind and label (lattice units) of basis state `i`.
    pub fn family_of(&self, i: usize) -> (FamilyKind, isize) {
        let (s, p) = self.states[i];
        (s.family(), p - s.m() as isize * self.grid.points_per_recoil() as isize)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseDensity {
    pub basis: DenseBasis,
    pub matrix: DMatrix<Complex64>,
}

impl DenseDensity {
    pub fn zeros(basis: DenseBasis) -> Self {
        let n = basis.len();
        Self { basis, matrix: DMatrix::zeros(n, n) }
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn max_abs_diff(&self, other: &DenseDensity) -> f64 {
        (&self.matrix - &other.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Embeds a block state into the dense basis on the same grid.
pub fn dense_from_blocks(state: &FamilyBlockState) -> DenseDensity {
    let basis = DenseBasis::new(state.grid);
    let mut rho = DenseDensity::zeros(basis);
    let n = state.grid.points_per_recoil() as isize;
    for i in 0..state.grid.len() {
        let q = state.grid.coordinate(i);
        for kind in FamilyKind::ALL {
            let members = kind.states();
            let idx: Vec<usize> = members
                .iter()
                .map(|s| rho.basis.find(*s, q + s.m() as isize * n).expect("member inside basis"))
                .collect();
            for a in 0..members.len() {
                for b in 0..members.len() {
                    rho.matrix[(idx[a], idx[b])] = state.get(kind, i, a, b);
                }
            }
        }
    }
    rho
}

/// Largest |ρ_ij| between basis states of different families.
pub fn cross_family_max(rho: &DenseDensity) -> f64 {
    let fam: Vec<_> = (0..rho.basis.len()).map(|i| rho.basis.family_of(i)).collect();
    let mut worst = 0.0f64;
    for i in 0..fam.len() {
        for j in 0..fam.len() {
            if fam[i] != fam[j] {
                worst = worst.max(rho.matrix[(i, j)].norm());
            }
        }
    }
    worst
}

/// One recoil jump channel: photon class weight times the map of excited
/// basis states to (ground target, amplitude).
struct Jump {
    weight: f64,
    map: Vec<Option<(usize, f64)>>,
}

/// Lindblad-form generator on the flat basis, evaluated column by column.
struct FlatGenerator {
    dim: usize,
    /// Sparse rows of the (real symmetric) Hamiltonian, diagonal included.
    hamiltonian: Vec<Vec<(usize, f64)>>,
    excited: Vec<bool>,
    jumps: Vec<Jump>,
}

impl FlatGenerator {
    fn new(basis: &DenseBasis, params: &SimParams) -> Result<Self> {
        let dim = basis.len();
        let n = basis.grid.points_per_recoil() as isize;
        let recoil = 1.0 / n as f64;
        let mut hamiltonian = vec![Vec::new(); dim];
        let mut excited = vec![false; dim];
        for (i, &(s, p)) in basis.states.iter().enumerate() {
            let momentum = p as f64 * recoil;
            let detuning = if s.is_excited() { -params.delta } else { 0.0 };
            hamiltonian[i].push((i, params.omega_r * momentum * momentum + detuning));
            excited[i] = s.is_excited();
            if s.is_excited() {
                continue;
            }
            for (pol, rabi) in [(Polarization::SigmaPlus, params.omega_plus), (Polarization::SigmaMinus, params.omega_minus)] {
                let dm = pol.delta_m();
                let Ok(e) = InternalState::excited(s.m() + dm) else { continue };
                // absorbing a photon moving along ±z adds ±1 recoil
                let Some(j) = basis.find(e, p + dm as isize * n) else { continue };
                let v = 0.5 * coupling_amplitude(s.m(), pol)? * rabi;
                if v != 0.0 {
                    hamiltonian[i].push((j, v));
                    hamiltonian[j].push((i, v));
                }
            }
        }

        let mut jumps = Vec::new();
        for d in -1..=1 {
            let kernel = emission_kernel(PolarizationClass::of_decay(d), n as usize)?;
            for (k, &weight) in kernel.weights.iter().enumerate() {
                if weight == 0.0 {
                    continue;
                }
                let u = k as isize - n;
                let map = basis
                    .states
                    .iter()
                    .map(|&(s, p)| {
                        if !s.is_excited() {
                            return None;
                        }
                        let g = InternalState::ground(s.m() + d).ok()?;
                        let amp = decay_amplitude(s.m(), g.m());
                        // the emitted photon carries u, the atom recoils by −u
                        basis.find(g, p - u).map(|t| (t, amp))
                    })
                    .collect();
                jumps.push(Jump { weight, map });
            }
        }
        Ok(Self { dim, hamiltonian, excited, jumps })
    }

    /// L(|r⟩⟨c|) as a sparse list of ((row, col), value).
    fn column(&self, r: usize, c: usize) -> Vec<((usize, usize), Complex64)> {
        let mut out = Vec::new();
        for &(k, h) in &self.hamiltonian[r] {
            out.push(((k, c), Complex64::new(0.0, -h)));
        }
        for &(k, h) in &self.hamiltonian[c] {
            out.push(((r, k), Complex64::new(0.0, h)));
        }
        let decay = 0.5 * (f64::from(u8::from(self.excited[r])) + f64::from(u8::from(self.excited[c])));
        if decay != 0.0 {
            out.push(((r, c), Complex64::new(-decay, 0.0)));
        }
        for jump in &self.jumps {
            if let (Some((tr, ar)), Some((tc, ac))) = (jump.map[r], jump.map[c]) {
                out.push(((tr, tc), Complex64::new(jump.weight * ar * ac, 0.0)));
            }
        }
        out
    }

    fn key(&self, (r, c): (usize, usize)) -> usize {
        r * self.dim + c
    }
}

/// Propagates `state0` by Γt = `t` with exp(L t).
pub fn dense_oracle_evolve(
    state0: &DenseDensity,
    params: &SimParams,
    t: f64,
    coarse_grid: MomentumGrid,
) -> Result<DenseDensity> {
    dense_oracle_evolve_with_budget(state0, params, t, coarse_grid, DEFAULT_ELEMENT_BUDGET)
}

pub fn dense_oracle_evolve_with_budget(
    state0: &DenseDensity,
    params: &SimParams,
    t: f64,
    coarse_grid: MomentumGrid,
    budget: usize,
) -> Result<DenseDensity> {
    params.validate()?;
    if state0.basis.grid != coarse_grid {
        return Err(Error::InvalidGrid("oracle state and grid disagree".into()));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter { name: "t", reason: format!("must be non-negative, got {t}") });
    }
    let basis = &state0.basis;
    let generator = FlatGenerator::new(basis, params)?;
    let dim = generator.dim;

    // elements reachable from the initial support
    let mut reached = BTreeSet::new();
    let mut queue = VecDeque::new();
    for r in 0..dim {
        for c in 0..dim {
            if state0.matrix[(r, c)] != Complex64::new(0.0, 0.0) && reached.insert(r * dim + c) {
                queue.push_back((r, c));
            }
        }
    }
    while let Some((r, c)) = queue.pop_front() {
        for (target, _) in generator.column(r, c) {
            if reached.insert(generator.key(target)) {
                if reached.len() > budget {
                    return Err(Error::OracleTooLarge { dim: reached.len(), budget });
                }
                queue.push_back(target);
            }
        }
    }
    let elements: Vec<usize> = reached.into_iter().collect();
    let slot: HashMap<usize, usize> = elements.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    let m = elements.len();

    // real form of the complex generator: [[Re, −Im], [Im, Re]]
    let mut big = DMatrix::<f64>::zeros(2 * m, 2 * m);
    for (col, &e) in elements.iter().enumerate() {
        for (target, v) in generator.column(e / dim, e % dim) {
            let row = slot[&generator.key(target)];
            big[(row, col)] += v.re * t;
            big[(row + m, col + m)] += v.re * t;
            big[(row + m, col)] += v.im * t;
            big[(row, col + m)] -= v.im * t;
        }
    }
    let propagator = expm(&big);

    let mut x = nalgebra::DVector::<f64>::zeros(2 * m);
    for (i, &e) in elements.iter().enumerate() {
        let z = state0.matrix[(e / dim, e % dim)];
        x[i] = z.re;
        x[i + m] = z.im;
    }
    let y = propagator * x;
    let mut out = DenseDensity::zeros(basis.clone());
    for (i, &e) in elements.iter().enumerate() {
        out.matrix[(e / dim, e % dim)] = Complex64::new(y[i], y[i + m]);
    }
    Ok(out)
}
