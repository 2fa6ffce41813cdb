//! Truncated dressed-state basis of the resonant Jaynes-Cummings ladder.
//!
//! Basis order is `[|0), |1)+, |1)-, |2)+, |2)-, ...]`. Operators are built in the
//! bare product basis `{|photons, g/e>}` and conjugated into the dressed basis.
//! Products that briefly leave the kept couplets (`a sigma_+` on the top couplet)
//! are formed in a bare space one state larger than the kept one, then projected.
//!
//! With the coupling written as `i g (a^dag sigma_- - a sigma_+)`, the dressed
//! states are `|n)± = (-i|n-1, e> ± |n, g>)/sqrt 2`. The `-i` on the excited
//! component is an atomic phase choice that keeps every matrix element of `a`
//! real and non-negative on the `+` branch.

use std::fmt;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, I, ONE, ZERO};
use crate::params::SystemParams;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Branch::Plus => '+',
            Branch::Minus => '-',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DressedLabel {
    Ground,
    Excited { couplet: usize, branch: Branch },
}

impl DressedLabel {
    pub fn plus(couplet: usize) -> Self {
        DressedLabel::Excited { couplet, branch: Branch::Plus }
    }

    pub fn minus(couplet: usize) -> Self {
        DressedLabel::Excited { couplet, branch: Branch::Minus }
    }

    pub fn couplet(self) -> usize {
        match self {
            DressedLabel::Ground => 0,
            DressedLabel::Excited { couplet, .. } => couplet,
        }
    }
}

impl fmt::Display for DressedLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DressedLabel::Ground => write!(f, "|0)"),
            DressedLabel::Excited { couplet, branch } => write!(f, "|{couplet}){}", branch.symbol()),
        }
    }
}

/// Bare product state `|photons, atom>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BareState {
    pub photons: usize,
    pub excited: bool,
}

impl BareState {
    pub fn excitation(self) -> usize {
        self.photons + usize::from(self.excited)
    }
}

#[derive(Debug, Clone)]
pub struct DressedBasis {
    n_max: usize,
    states: Vec<DressedLabel>,
    bare: Vec<BareState>,
    /// Columns are dressed states expressed in the kept bare states.
    transform: CMat,
}

impl DressedBasis {
    pub fn new(n_couplets: usize) -> Result<Self> {
        if n_couplets == 0 {
            return Err(Error::EmptyBasis);
        }
        let dim = 1 + 2 * n_couplets;
        let mut states = Vec::with_capacity(dim);
        let mut bare = Vec::with_capacity(dim);
        states.push(DressedLabel::Ground);
        bare.push(BareState { photons: 0, excited: false });
        for n in 1..=n_couplets {
            states.push(DressedLabel::plus(n));
            states.push(DressedLabel::minus(n));
            bare.push(BareState { photons: n - 1, excited: true });
            bare.push(BareState { photons: n, excited: false });
        }

        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut transform = linalg::zeros(dim, dim);
        transform[(0, 0)] = ONE;
        for n in 1..=n_couplets {
            let (e, g) = (2 * n - 1, 2 * n);
            let (plus, minus) = (2 * n - 1, 2 * n);
            transform[(e, plus)] = -I * r;
            transform[(g, plus)] = C64::new(r, 0.0);
            transform[(e, minus)] = -I * r;
            transform[(g, minus)] = C64::new(-r, 0.0);
        }
        Ok(Self { n_max: n_couplets, states, bare, transform })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[DressedLabel] {
        &self.states
    }

    /// Kept bare states, in the row order of [`DressedBasis::transform`].
    pub fn bare_states(&self) -> &[BareState] {
        &self.bare
    }

    pub fn transform(&self) -> &CMat {
        &self.transform
    }

    pub fn index_of(&self, label: DressedLabel) -> Option<usize> {
        match label {
            DressedLabel::Ground => Some(0),
            DressedLabel::Excited { couplet, branch } => {
                if couplet == 0 || couplet > self.n_max {
                    None
                } else {
                    Some(2 * couplet - 1 + usize::from(branch == Branch::Minus))
                }
            }
        }
    }

    pub fn couplet_of(&self, index: usize) -> usize {
        self.states[index].couplet()
    }

    /// `U^dag X U` for an operator given on the kept bare states.
    pub fn to_dressed(&self, bare_op: &CMat) -> CMat {
        let u = &self.transform;
        let mut out = linalg::adjoint(u) * bare_op * u;
        linalg::chop(&mut out, 1e-14);
        out
    }

    pub fn to_bare(&self, dressed_op: &CMat) -> CMat {
        let u = &self.transform;
        u * dressed_op * linalg::adjoint(u)
    }

    /// `max |U^dag U - 1|`.
    pub fn unitarity_error(&self) -> f64 {
        let u = &self.transform;
        linalg::max_abs_diff(&(linalg::adjoint(u) * u), &linalg::identity(self.dim()))
    }

    /// Bare space with one extra state `|n_max, e>` appended after the kept ones.
    fn ambient_states(&self) -> Vec<BareState> {
        let mut s = self.bare.clone();
        s.push(BareState { photons: self.n_max, excited: true });
        s
    }
}

pub fn build_basis(n_couplets: usize) -> Result<DressedBasis> {
    DressedBasis::new(n_couplets)
}

/// Dressed energy with the `n omega` ladder offset dropped: `± sqrt(n) g`, 0 for `|0)`.
pub fn dressed_energy(n: usize, branch: Branch, g: f64) -> f64 {
    if n == 0 {
        0.0
    } else {
        branch.sign() * (n as f64).sqrt() * g
    }
}

/// Lab-frame eigenvalue `n omega ± sqrt(n) g`.
pub fn lab_energy(n: usize, branch: Branch, omega: f64, g: f64) -> f64 {
    n as f64 * omega + dressed_energy(n, branch, g)
}

/// Eigenvalue in the frame rotating at `omega + g_f`: `-n g_f ± sqrt(n) g`.
pub fn frame_energy(n: usize, branch: Branch, g: f64, g_f: f64) -> f64 {
    lab_energy(n, branch, -g_f, g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatorKind {
    Annihilation,
    Creation,
    SigmaPlus,
    SigmaMinus,
    SigmaZ,
    /// `sigma_3 + a^dag a + 1/2`
    ExcitationNumber,
    /// `a^dag sigma_- - a sigma_+`
    Coupling,
    /// `-g_f N + i g A`, the undriven Hamiltonian in the frame of the first tone.
    FrameHamiltonian { g: f64, g_f: f64 },
}

#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub kind: OperatorKind,
    pub matrix: CMat,
}

impl OperatorMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn adjoint(&self) -> CMat {
        linalg::adjoint(&self.matrix)
    }
}

struct BareOps {
    a: CMat,
    sigma_plus: CMat,
    sigma_z: CMat,
}

fn ambient_ops(states: &[BareState]) -> BareOps {
    let d = states.len();
    let find = |photons: usize, excited: bool| {
        states.iter().position(|s| s.photons == photons && s.excited == excited)
    };
    let mut a = linalg::zeros(d, d);
    let mut sigma_plus = linalg::zeros(d, d);
    let mut sigma_z = linalg::zeros(d, d);
    for (col, s) in states.iter().enumerate() {
        if s.photons > 0 {
            if let Some(row) = find(s.photons - 1, s.excited) {
                a[(row, col)] = C64::new((s.photons as f64).sqrt(), 0.0);
            }
        }
        if !s.excited {
            if let Some(row) = find(s.photons, true) {
                sigma_plus[(row, col)] = ONE;
            }
        }
        sigma_z[(col, col)] = C64::new(if s.excited { 0.5 } else { -0.5 }, 0.0);
    }
    BareOps { a, sigma_plus, sigma_z }
}

fn project(m: &CMat, dim: usize) -> CMat {
    Mat::from_fn(dim, dim, |i, j| m[(i, j)])
}

/// Matrix of `kind` on the truncated dressed basis.
pub fn op_matrix(kind: OperatorKind, basis: &DressedBasis) -> OperatorMatrix {
    let ambient = basis.ambient_states();
    let ops = ambient_ops(&ambient);
    let ad = linalg::adjoint(&ops.a);
    let sm = linalg::adjoint(&ops.sigma_plus);
    let number = || {
        let mut n = &ops.sigma_z + &ad * &ops.a;
        for i in 0..n.nrows() {
            n[(i, i)] += C64::new(0.5, 0.0);
        }
        n
    };
    let coupling = || &ad * &sm - &ops.a * &ops.sigma_plus;
    let bare = match kind {
        OperatorKind::Annihilation => ops.a.clone(),
        OperatorKind::Creation => ad.clone(),
        OperatorKind::SigmaPlus => ops.sigma_plus.clone(),
        OperatorKind::SigmaMinus => sm.clone(),
        OperatorKind::SigmaZ => ops.sigma_z.clone(),
        OperatorKind::ExcitationNumber => number(),
        OperatorKind::Coupling => coupling(),
        OperatorKind::FrameHamiltonian { g, g_f } => {
            linalg::scale(&number(), C64::new(-g_f, 0.0)) + linalg::scale(&coupling(), I * g)
        }
    };
    let matrix = basis.to_dressed(&project(&bare, basis.dim()));
    OperatorMatrix { kind, matrix }
}

/// Undriven Hamiltonian `(omega - omega_1) N + i g A` in the first tone's frame.
pub fn hamiltonian_frame(g: f64, params: &SystemParams, basis: &DressedBasis) -> OperatorMatrix {
    op_matrix(OperatorKind::FrameHamiltonian { g, g_f: params.g_f }, basis)
}

/// Normally ordered moment `a^dag^n a^n`.
pub fn photon_moment(basis: &DressedBasis, n: usize) -> CMat {
    let a = op_matrix(OperatorKind::Annihilation, basis).matrix;
    let mut an = linalg::identity(basis.dim());
    for _ in 0..n {
        an = &a * &an;
    }
    linalg::adjoint(&an) * &an
}

/// In-frame energies of every basis state, in basis order.
pub fn frame_energies(basis: &DressedBasis, g: f64, g_f: f64) -> Vec<f64> {
    basis
        .states()
        .iter()
        .map(|s| match *s {
            DressedLabel::Ground => 0.0,
            DressedLabel::Excited { couplet, branch } => frame_energy(couplet, branch, g, g_f),
        })
        .collect()
}

pub fn basis_vector(basis: &DressedBasis, label: DressedLabel) -> Vec<C64> {
    let mut v = vec![ZERO; basis.dim()];
    if let Some(i) = basis.index_of(label) {
        v[i] = ONE;
    }
    v
}
