//! Liouville-space superoperators on column-stacked density matrices.
//!
//! `vec(rho)[j * d + i] = rho[(i, j)]`, so `vec(A rho B) = (B^T (x) A) vec(rho)`.

use crate::basis::{self, DressedBasis, OperatorKind};
use crate::linalg::{self, CMat, I, ONE};
use crate::params::SystemParams;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SuperKind {
    /// Time-independent generator at coupling `g`, including the first drive tone.
    Liouvillian { g: f64 },
    /// `[sigma_+, .]`
    SigmaPlus,
    /// `[sigma_-, .]`
    SigmaMinus,
}

#[derive(Debug, Clone)]
pub struct Superoperator {
    pub kind: SuperKind,
    pub matrix: CMat,
}

impl Superoperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Applies the superoperator to a `d x d` density matrix.
    pub fn apply(&self, rho: &CMat) -> CMat {
        let v = linalg::vec_col(rho);
        let m = &self.matrix;
        let out: Vec<C64> = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum())
            .collect();
        linalg::unvec_col(&out, rho.nrows())
    }
}

/// `rho -> A rho`
pub fn spre(a: &CMat) -> CMat {
    linalg::kron(&linalg::identity(a.nrows()), a)
}

/// `rho -> rho B`
pub fn spost(b: &CMat) -> CMat {
    linalg::kron(&linalg::transpose(b), &linalg::identity(b.nrows()))
}

/// `rho -> [A, rho]`
pub fn commutator(a: &CMat) -> CMat {
    spre(a) - spost(a)
}

/// `rho -> 2 c rho c^dag - c^dag c rho - rho c^dag c`
pub fn dissipator(c: &CMat) -> CMat {
    let cdc = linalg::adjoint(c) * c;
    linalg::scale(&linalg::kron(&linalg::conj(c), c), C64::new(2.0, 0.0)) - spre(&cdc) - spost(&cdc)
}

/// The g-independent and g-linear parts of the Liouvillian, split so that
/// coupling sweeps only rescale one matrix.
#[derive(Debug, Clone)]
pub struct LiouvillePieces {
    /// Frame detuning, first drive tone and both dissipators.
    pub fixed: CMat,
    /// `[A, .]`; the coupling enters as `g * coupling`.
    pub coupling: CMat,
    pub sigma_plus: CMat,
    pub sigma_minus: CMat,
}

impl LiouvillePieces {
    pub fn new(p: &SystemParams, basis: &DressedBasis) -> Self {
        let a = basis::op_matrix(OperatorKind::Annihilation, basis).matrix;
        let sp = basis::op_matrix(OperatorKind::SigmaPlus, basis).matrix;
        let sm = basis::op_matrix(OperatorKind::SigmaMinus, basis).matrix;
        let number = basis::op_matrix(OperatorKind::ExcitationNumber, basis).matrix;
        let coupling_op = basis::op_matrix(OperatorKind::Coupling, basis).matrix;

        let sigma_plus = commutator(&sp);
        let sigma_minus = commutator(&sm);
        let e1 = p.amps.first().copied().unwrap_or(0.0);
        // -i[-g_f N, .] = i g_f [N, .]
        let mut fixed = linalg::scale(&commutator(&number), I * p.g_f);
        fixed = fixed + linalg::scale(&(&sigma_plus - &sigma_minus), C64::new(e1, 0.0));
        fixed = fixed + linalg::scale(&dissipator(&sm), C64::new(p.gamma_i / 2.0, 0.0));
        fixed = fixed + linalg::scale(&dissipator(&a), C64::new(p.kappa, 0.0));
        // -i[i g A, .] = g [A, .]
        let coupling = commutator(&coupling_op);
        Self { fixed, coupling, sigma_plus, sigma_minus }
    }

    pub fn liouvillian(&self, g: f64) -> CMat {
        &self.fixed + linalg::scale(&self.coupling, C64::new(g, 0.0))
    }
}

/// `Q(g) = -i[H_frame, .] + E_1(Sigma_+ - Sigma_-) + gamma_I/2 D[sigma_-] + kappa D[a]`.
pub fn assemble_q(g: f64, p: &SystemParams, basis: &DressedBasis) -> Superoperator {
    Superoperator {
        kind: SuperKind::Liouvillian { g },
        matrix: LiouvillePieces::new(p, basis).liouvillian(g),
    }
}

pub fn sigma_superops(basis: &DressedBasis) -> (Superoperator, Superoperator) {
    let sp = basis::op_matrix(OperatorKind::SigmaPlus, basis).matrix;
    let sm = basis::op_matrix(OperatorKind::SigmaMinus, basis).matrix;
    (
        Superoperator { kind: SuperKind::SigmaPlus, matrix: commutator(&sp) },
        Superoperator { kind: SuperKind::SigmaMinus, matrix: commutator(&sm) },
    )
}

/// Row vector `t` with `t . vec(rho) = Tr rho`.
pub fn trace_row(d: usize) -> Vec<C64> {
    let mut t = vec![linalg::ZERO; d * d];
    for i in 0..d {
        t[i * d + i] = ONE;
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_basis;
    use crate::linalg::ZERO;
    use faer::Mat;
    use rand::{Rng, SeedableRng};

    fn random_matrix(rng: &mut rand::rngs::StdRng, d: usize) -> CMat {
        Mat::from_fn(d, d, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn vectorisation_convention() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(1);
        let a = random_matrix(&mut rng, 3);
        let b = random_matrix(&mut rng, 3);
        let rho = random_matrix(&mut rng, 3);
        let direct = &a * &rho * &b;
        let via = Superoperator { kind: SuperKind::SigmaPlus, matrix: spre(&a) * spost(&b) }.apply(&rho);
        assert!(linalg::max_abs_diff(&direct, &via) < 1e-13);
    }

    #[test]
    fn sigma_superops_are_commutators() {
        let b = build_basis(4).unwrap();
        let sp = basis::op_matrix(OperatorKind::SigmaPlus, &b).matrix;
        let sm = basis::op_matrix(OperatorKind::SigmaMinus, &b).matrix;
        let (splus, sminus) = sigma_superops(&b);
        let mut rng = rand::rngs::StdRng::seed_from_u64(2);
        for _ in 0..5 {
            let rho = random_matrix(&mut rng, b.dim());
            let want = &sp * &rho - &rho * &sp;
            assert!(linalg::max_abs_diff(&splus.apply(&rho), &want) < 1e-13);
            let want = &sm * &rho - &rho * &sm;
            assert!(linalg::max_abs_diff(&sminus.apply(&rho), &want) < 1e-13);
        }
    }

    #[test]
    fn q_preserves_trace() {
        let p = SystemParams::default();
        let b = build_basis(p.n_couplets).unwrap();
        let q = assemble_q(p.g_f, &p, &b);
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        for _ in 0..20 {
            let x = random_matrix(&mut rng, b.dim());
            let rho = linalg::hermitian_part(&x);
            assert!(linalg::trace(&q.apply(&rho)).norm() <= 1e-12);
        }
        // Trace row annihilates every column of Q.
        let t = trace_row(b.dim());
        for j in 0..q.dim() {
            let s: C64 = (0..q.dim()).map(|i| t[i] * q.matrix[(i, j)]).sum();
            assert!(s.norm() <= 1e-12);
        }
    }

    #[test]
    fn vacuum_is_stationary_without_drive() {
        let p = SystemParams::default().scaled_amps(0.0);
        let b = build_basis(p.n_couplets).unwrap();
        let q = assemble_q(p.g_f, &p, &b);
        let mut vac = linalg::zeros(b.dim(), b.dim());
        vac[(0, 0)] = ONE;
        assert_eq!(linalg::max_abs(&q.apply(&vac)), 0.0);
    }

    #[test]
    fn undriven_spectrum_is_stable() {
        let p = SystemParams::default().scaled_amps(0.0);
        let b = build_basis(p.n_couplets).unwrap();
        let q = assemble_q(p.g_f, &p, &b);
        let ev = q.matrix.eigenvalues().unwrap();
        let max_re = ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        assert!(max_re <= 1e-12, "spectral abscissa {max_re}");
        assert!(max_re.abs() <= 1e-10);
    }

    #[test]
    fn dissipator_decays_single_photon() {
        // kappa D[a] on |1,g><1,g| in a two-level photon space.
        let mut a = linalg::zeros(2, 2);
        a[(0, 1)] = ONE;
        let mut rho = linalg::zeros(2, 2);
        rho[(1, 1)] = ONE;
        let out = Superoperator { kind: SuperKind::SigmaMinus, matrix: dissipator(&a) }.apply(&rho);
        assert_eq!(out[(0, 0)], C64::new(2.0, 0.0));
        assert_eq!(out[(1, 1)], C64::new(-2.0, 0.0));
        assert_eq!(out[(0, 1)], ZERO);
    }
}
