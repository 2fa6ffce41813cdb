//! No-jump amplitude evolution under the non-Hermitian Hamiltonian.
//!
//! The state is kept on `|0)` and couplets `1..=N`. The generator is written in
//! the interaction picture of the (diagonal) frame Hamiltonian, where each matrix
//! element oscillates at a tone offset minus a dressed-level difference. Distinct
//! frequencies `|Omega|` are sorted into levels `0 = Omega_0 < Omega_1 < ...`; keeping
//! levels up to a cutoff `L` drops the fast, off-resonant pathways.
//!
//! Peak heights are read off with a renewal estimate: starting from `|0)`, the
//! amplitude leaks away through decays, and each decay restarts the cycle in the
//! vacuum (in this truncated model every decay path ends there). The stationary
//! expectation is the ratio of the cycle integrals `int <psi|O|psi> dt` and
//! `int <psi|psi> dt`.

use std::sync::Arc;

use crate::basis::{self, DressedBasis, OperatorKind};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, I, ONE, ZERO};
use crate::params::SystemParams;
use crate::C64;

/// Largest allowed `dt * rate` for the fixed-step integrator.
pub const STEP_LIMIT: f64 = 0.05;
/// Remaining norm above which a cycle counts as unfinished.
pub const CYCLE_TOLERANCE: f64 = 1e-6;

/// Matrix elements sharing one oscillation frequency magnitude.
#[derive(Debug, Clone)]
pub struct HarmonicLevel {
    pub omega: f64,
    /// Coefficient of `exp(-i omega t)`.
    pub forward: CMat,
    /// Coefficient of `exp(+i omega t)`; zero for `omega = 0`.
    pub backward: CMat,
}

#[derive(Debug, Clone)]
pub struct HarmonicTerms {
    pub g: f64,
    pub order: usize,
    /// Diagonal of the frame Hamiltonian.
    pub frame_energies: Vec<f64>,
    pub levels: Vec<HarmonicLevel>,
    basis: Arc<DressedBasis>,
}

impl HarmonicTerms {
    pub fn dim(&self) -> usize {
        self.frame_energies.len()
    }

    pub fn basis(&self) -> &Arc<DressedBasis> {
        &self.basis
    }

    /// Number of levels kept for cutoff `l` (level 0 is always kept).
    pub fn kept(&self, l: usize) -> usize {
        l.saturating_add(1).min(self.levels.len())
    }

    pub fn max_frequency(&self, l: usize) -> f64 {
        self.levels[self.kept(l) - 1].omega
    }

    /// Upper bound on `||M(t)||_inf` over all `t` with cutoff `l`.
    pub fn norm_bound(&self, l: usize) -> f64 {
        let d = self.dim();
        let mut rows = vec![0.0; d];
        for lv in &self.levels[..self.kept(l)] {
            for i in 0..d {
                for j in 0..d {
                    rows[i] += lv.forward[(i, j)].norm() + lv.backward[(i, j)].norm();
                }
            }
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    /// Interaction-picture generator at time `t` with cutoff `l`.
    pub fn matrix_at(&self, t: f64, l: usize) -> CMat {
        let d = self.dim();
        let mut m = linalg::zeros(d, d);
        for lv in &self.levels[..self.kept(l)] {
            let f = (-I * lv.omega * t).exp();
            let b = f.conj();
            for j in 0..d {
                for i in 0..d {
                    m[(i, j)] += lv.forward[(i, j)] * f + lv.backward[(i, j)] * b;
                }
            }
        }
        m
    }

    /// Generator in the rotating frame (all levels), `-iH_frame - decay + drive(t)`.
    pub fn frame_matrix(&self, t: f64) -> CMat {
        let e = &self.frame_energies;
        let mut m = self.matrix_at(t, usize::MAX);
        for j in 0..self.dim() {
            for i in 0..self.dim() {
                m[(i, j)] *= (-I * (e[i] - e[j]) * t).exp();
            }
            m[(j, j)] -= I * e[j];
        }
        m
    }
}

/// Frame generator assembled straight from the operators, for cross-checks.
pub fn direct_frame_matrix(g: f64, p: &SystemParams, t: f64) -> Result<CMat> {
    p.validate()?;
    let basis = DressedBasis::new(p.order)?;
    Ok(frame_generator(g, p, &basis, t))
}

fn frame_generator(g: f64, p: &SystemParams, basis: &DressedBasis, t: f64) -> CMat {
    let h = basis::hamiltonian_frame(g, p, basis).matrix;
    let (decay, sp, sm) = decay_and_ladder(p, basis);
    let mut m = linalg::scale(&h, -I) - decay;
    for (e, delta) in p.amps.iter().zip(tone_shifts(p)) {
        let ph = (-I * delta * t).exp();
        m = m + linalg::scale(&sp, ph * *e) - linalg::scale(&sm, ph.conj() * *e);
    }
    m
}

fn tone_shifts(p: &SystemParams) -> Vec<f64> {
    std::iter::once(0.0).chain(p.tone_offsets()).collect()
}

fn decay_and_ladder(p: &SystemParams, basis: &DressedBasis) -> (CMat, CMat, CMat) {
    let a = basis::op_matrix(OperatorKind::Annihilation, basis).matrix;
    let sp = basis::op_matrix(OperatorKind::SigmaPlus, basis).matrix;
    let sm = basis::op_matrix(OperatorKind::SigmaMinus, basis).matrix;
    let decay = linalg::scale(&(linalg::adjoint(&a) * &a), C64::new(p.kappa, 0.0))
        + linalg::scale(&(&sp * &sm), C64::new(p.gamma_i / 2.0, 0.0));
    (decay, sp, sm)
}

/// Splits the no-jump generator into oscillating pieces, truncated at couplet `N`.
pub fn build_heff_terms(g: f64, p: &SystemParams) -> Result<HarmonicTerms> {
    p.validate()?;
    let basis = Arc::new(DressedBasis::new(p.order)?);
    let d = basis.dim();
    let energies = basis::frame_energies(&basis, g, p.g_f);
    let (decay, sp, sm) = decay_and_ladder(p, &basis);

    // (signed Omega, i, j, value) with the element oscillating as exp(-i Omega t).
    let mut raw: Vec<(f64, usize, usize, C64)> = Vec::new();
    for i in 0..d {
        for j in 0..d {
            let gap = energies[i] - energies[j];
            if decay[(i, j)] != ZERO {
                raw.push((-gap, i, j, -decay[(i, j)]));
            }
            for (e, delta) in p.amps.iter().zip(tone_shifts(p)) {
                if *e == 0.0 {
                    continue;
                }
                if sp[(i, j)] != ZERO {
                    raw.push((delta - gap, i, j, sp[(i, j)] * *e));
                }
                if sm[(i, j)] != ZERO {
                    raw.push((-delta - gap, i, j, -sm[(i, j)] * *e));
                }
            }
        }
    }

    let tol = 1e-9 * p.g_f.max(1.0);
    let mut freqs: Vec<f64> = raw.iter().map(|r| r.0.abs()).collect();
    freqs.push(0.0);
    freqs.sort_by(f64::total_cmp);
    let mut distinct: Vec<f64> = Vec::new();
    for w in freqs {
        if distinct.last().is_none_or(|last| w - last > tol) {
            distinct.push(w);
        }
    }
    let mut levels: Vec<HarmonicLevel> = distinct
        .iter()
        .map(|&omega| HarmonicLevel { omega, forward: linalg::zeros(d, d), backward: linalg::zeros(d, d) })
        .collect();
    for (omega, i, j, v) in raw {
        let idx = distinct.iter().position(|w| (omega.abs() - w).abs() <= tol).unwrap();
        if omega >= 0.0 || idx == 0 {
            levels[idx].forward[(i, j)] += v;
        } else {
            levels[idx].backward[(i, j)] += v;
        }
    }
    Ok(HarmonicTerms { g, order: p.order, frame_energies: energies, levels, basis })
}

#[derive(Debug, Clone)]
pub struct AmplitudeTrajectory {
    pub times: Vec<f64>,
    /// Amplitudes in the rotating frame (dressed basis order).
    pub coeffs: Vec<Vec<C64>>,
    pub norms: Vec<f64>,
    pub dt: f64,
    basis: Arc<DressedBasis>,
}

impl AmplitudeTrajectory {
    pub fn basis(&self) -> &DressedBasis {
        &self.basis
    }

    pub fn final_norm(&self) -> f64 {
        *self.norms.last().unwrap()
    }

    /// `<psi(t)| op |psi(t)>` at every sample.
    pub fn expectation(&self, op: &CMat) -> Vec<f64> {
        self.coeffs
            .iter()
            .map(|c| {
                let mut s = ZERO;
                for i in 0..c.len() {
                    for j in 0..c.len() {
                        s += c[i].conj() * op[(i, j)] * c[j];
                    }
                }
                s.re
            })
            .collect()
    }
}

/// Step size satisfying the resolution check for cutoff `l`.
pub fn default_step(terms: &HarmonicTerms, l: usize) -> f64 {
    let rate = terms.max_frequency(l).max(terms.norm_bound(l));
    (STEP_LIMIT / rate).min(0.01)
}

pub fn integrate_amplitudes(terms: &HarmonicTerms, l: usize, duration: f64, dt: f64) -> Result<AmplitudeTrajectory> {
    let mut c0 = vec![ZERO; terms.dim()];
    c0[0] = ONE;
    integrate_amplitudes_from(terms, l, duration, dt, &c0)
}

/// Fixed-step RK4 from a given rotating-frame state.
pub fn integrate_amplitudes_from(
    terms: &HarmonicTerms,
    l: usize,
    duration: f64,
    dt: f64,
    initial: &[C64],
) -> Result<AmplitudeTrajectory> {
    let d = terms.dim();
    if initial.len() != d {
        return Err(Error::InvalidState(format!("expected {d} amplitudes, got {}", initial.len())));
    }
    let n0: f64 = initial.iter().map(|z| z.norm_sqr()).sum();
    if !(n0 <= 1.0 + 1e-12) {
        return Err(Error::InvalidState(format!("initial norm {n0} exceeds 1")));
    }
    if !(duration > 0.0 && dt > 0.0) {
        return Err(Error::InvalidState("duration and step must be positive".into()));
    }
    let rate = terms.max_frequency(l).max(terms.norm_bound(l));
    if dt * rate > STEP_LIMIT * (1.0 + 1e-12) {
        return Err(Error::StepTooLarge { dt, rate, limit: STEP_LIMIT });
    }

    let steps = (duration / dt).round() as usize;
    let e = &terms.frame_energies;
    let to_frame = |c: &[C64], t: f64| -> Vec<C64> { c.iter().zip(e).map(|(z, ei)| z * (-I * ei * t).exp()).collect() };
    // Interaction-picture amplitudes.
    let mut c: Vec<C64> = initial.to_vec();
    let mut times = Vec::with_capacity(steps + 1);
    let mut coeffs = Vec::with_capacity(steps + 1);
    let mut norms = Vec::with_capacity(steps + 1);
    times.push(0.0);
    coeffs.push(c.clone());
    norms.push(n0);

    let mul = |m: &CMat, x: &[C64]| -> Vec<C64> { (0..d).map(|i| (0..d).map(|j| m[(i, j)] * x[j]).sum()).collect() };
    let axpy = |x: &[C64], s: f64, y: &[C64]| -> Vec<C64> { x.iter().zip(y).map(|(a, b)| a + b * s).collect() };
    for step in 0..steps {
        let t = step as f64 * dt;
        let m0 = terms.matrix_at(t, l);
        let mh = terms.matrix_at(t + dt / 2.0, l);
        let m1 = terms.matrix_at(t + dt, l);
        let k1 = mul(&m0, &c);
        let k2 = mul(&mh, &axpy(&c, dt / 2.0, &k1));
        let k3 = mul(&mh, &axpy(&c, dt / 2.0, &k2));
        let k4 = mul(&m1, &axpy(&c, dt, &k3));
        for i in 0..d {
            c[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0);
        }
        let t1 = (step + 1) as f64 * dt;
        times.push(t1);
        norms.push(c.iter().map(|z| z.norm_sqr()).sum());
        coeffs.push(to_frame(&c, t1));
    }
    Ok(AmplitudeTrajectory { times, coeffs, norms, dt, basis: Arc::clone(&terms.basis) })
}

fn trapezoid(dt: f64, y: &[f64]) -> f64 {
    if y.len() < 2 {
        return 0.0;
    }
    dt * (y.iter().sum::<f64>() - 0.5 * (y[0] + y[y.len() - 1]))
}

/// Renewal-cycle average of `op` over a trajectory started in the vacuum.
pub fn cycle_average(traj: &AmplitudeTrajectory, op: &CMat) -> Result<f64> {
    let norm = traj.final_norm();
    if norm > CYCLE_TOLERANCE {
        return Err(Error::IncompleteCycle { norm, tolerance: CYCLE_TOLERANCE });
    }
    let num = trapezoid(traj.dt, &traj.expectation(op));
    let den = trapezoid(traj.dt, &traj.norms);
    Ok(num / den)
}

/// Estimated `<a^dag^N a^N>`.
pub fn estimate_npcr(traj: &AmplitudeTrajectory, n: usize) -> Result<f64> {
    cycle_average(traj, &basis::photon_moment(&traj.basis, n))
}

pub fn estimate_rho00(traj: &AmplitudeTrajectory) -> Result<f64> {
    let mut op = linalg::zeros(traj.basis.dim(), traj.basis.dim());
    op[(0, 0)] = ONE;
    cycle_average(traj, &op)
}

/// `rho_00 ~ 1 - E^2 / (1/2 (kappa + gamma_I/2)^2 + 2 E^2)` for a single resonant step.
pub fn two_state_rho00(e: f64, kappa: f64, gamma_i: f64) -> f64 {
    let w = kappa + gamma_i / 2.0;
    1.0 - e * e / (0.5 * w * w + 2.0 * e * e)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorSettings {
    pub cutoff: usize,
    pub duration: f64,
    /// `None` picks [`default_step`].
    pub dt: Option<f64>,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        Self { cutoff: 1, duration: 80.0, dt: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathwayEstimate {
    pub npcr: f64,
    pub rho00: f64,
    pub final_norm: f64,
    pub dt: f64,
}

/// Builds terms, integrates from the vacuum and reads off the estimate at coupling `g`.
pub fn estimate_point(g: f64, p: &SystemParams, settings: &EstimatorSettings) -> Result<PathwayEstimate> {
    let terms = build_heff_terms(g, p)?;
    let dt = settings.dt.unwrap_or_else(|| default_step(&terms, settings.cutoff));
    let traj = integrate_amplitudes(&terms, settings.cutoff, settings.duration, dt)?;
    Ok(PathwayEstimate {
        npcr: estimate_npcr(&traj, p.order)?,
        rho00: estimate_rho00(&traj)?,
        final_norm: traj.final_norm(),
        dt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::DressedLabel;
    use proptest::prelude::*;

    const S2: f64 = std::f64::consts::SQRT_2;

    #[test]
    fn two_state_closed_form() {
        assert_eq!(two_state_rho00(0.0, 1.0, 1.0), 1.0);
        assert!((two_state_rho00(1.0 / S2, 1.0, 1.0) - 13.0 / 17.0).abs() < 1e-12);
        assert!((two_state_rho00(S2, 1.0, 1.0) - 25.0 / 41.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn two_state_in_range(e in 0.0f64..50.0, k in 0.01f64..10.0, gam in 0.0f64..10.0) {
            let r = two_state_rho00(e, k, gam);
            prop_assert!(r > 0.0 && r <= 1.0);
        }
    }

    #[test]
    fn reconstruction_matches_direct_assembly() {
        let p = SystemParams::default();
        for gt in [1.0, S2 - 1.0, 0.7] {
            let terms = build_heff_terms(gt * p.g_f, &p).unwrap();
            let direct = direct_frame_matrix(gt * p.g_f, &p, 0.0).unwrap();
            assert!(linalg::max_abs_diff(&terms.frame_matrix(0.0), &direct) <= 1e-12);
            // Phases of order 100 rad at later times cost a few digits.
            for t in [0.013, 0.4] {
                let direct = direct_frame_matrix(gt * p.g_f, &p, t).unwrap();
                assert!(linalg::max_abs_diff(&terms.frame_matrix(t), &direct) <= 1e-10);
            }
        }
    }

    #[test]
    fn levels_are_sorted_and_resonant_steps_are_static() {
        let p = SystemParams::default();
        let terms = build_heff_terms(p.g_f, &p).unwrap();
        assert_eq!(terms.levels[0].omega, 0.0);
        assert!(terms.levels.windows(2).all(|w| w[1].omega > w[0].omega));
        assert!(terms.levels.len() >= 3);
        // Tone 1 on |0) -> |1)+, tone 2 on |1)+ -> |2)+, tone 3 on |2)+ -> |3)+.
        let b = terms.basis();
        let idx = |l| b.index_of(l).unwrap();
        let m0 = &terms.levels[0].forward;
        assert!(m0[(idx(DressedLabel::plus(1)), 0)].norm() > 0.1);
        assert!(m0[(idx(DressedLabel::plus(2)), idx(DressedLabel::plus(1)))].norm() > 0.1);
        assert!(m0[(idx(DressedLabel::plus(3)), idx(DressedLabel::plus(2)))].norm() > 0.1);
    }

    #[test]
    fn undriven_terms_are_static_decay() {
        let p = SystemParams::default().scaled_amps(0.0);
        let terms = build_heff_terms(p.g_f, &p).unwrap();
        // Only decay remains; within-couplet cross terms oscillate at the splitting.
        for lv in &terms.levels {
            for i in 0..terms.dim() {
                for j in 0..terms.dim() {
                    if lv.forward[(i, j)] != ZERO || lv.backward[(i, j)] != ZERO {
                        assert_eq!(terms.basis().couplet_of(i), terms.basis().couplet_of(j));
                    }
                }
            }
        }
        let m0 = &terms.levels[0].forward;
        for i in 0..terms.dim() {
            assert!(m0[(i, i)].re <= 0.0);
        }
        assert_eq!(m0[(0, 0)], ZERO);
    }

    #[test]
    fn vacuum_is_constant_without_drive() {
        let p = SystemParams::default().scaled_amps(0.0);
        let terms = build_heff_terms(p.g_f, &p).unwrap();
        let traj = integrate_amplitudes(&terms, 1, 2.0, default_step(&terms, 1)).unwrap();
        assert!(traj.norms.iter().all(|n| (n - 1.0).abs() < 1e-15));
    }

    #[test]
    fn excited_decay_rate() {
        let p = SystemParams::default().scaled_amps(0.0);
        let terms = build_heff_terms(p.g_f, &p).unwrap();
        let mut c = vec![ZERO; terms.dim()];
        c[terms.basis().index_of(DressedLabel::plus(1)).unwrap()] = ONE;
        let dt = default_step(&terms, usize::MAX);
        let traj = integrate_amplitudes_from(&terms, usize::MAX, 2.0, dt, &c).unwrap();
        let rate = p.kappa + p.gamma_i / 2.0;
        for (t, n) in traj.times.iter().zip(&traj.norms).step_by(50) {
            let want = (-rate * t).exp();
            assert!((n / want - 1.0).abs() < 0.01, "t={t}: {n} vs {want}");
        }
        assert!(traj.norms.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }

    #[test]
    fn step_size_is_checked() {
        let p = SystemParams::default();
        let terms = build_heff_terms(p.g_f, &p).unwrap();
        assert!(matches!(integrate_amplitudes(&terms, 2, 1.0, 0.01), Err(Error::StepTooLarge { .. })));
    }

    #[test]
    fn short_trajectory_is_an_incomplete_cycle() {
        let p = SystemParams::default();
        let est = estimate_point(p.g_f, &p, &EstimatorSettings { duration: 1.0, ..Default::default() });
        assert!(matches!(est, Err(Error::IncompleteCycle { .. })));
    }

    #[test]
    fn renewal_estimate_recovers_two_state_depletion() {
        let p = SystemParams::default().with_amps(&[1.0 / S2, 0.0, 0.0]);
        let est = estimate_point(p.g_f, &p, &EstimatorSettings { cutoff: 0, ..Default::default() }).unwrap();
        assert!((est.rho00 - 13.0 / 17.0).abs() < 2e-3, "{}", est.rho00);
    }

    #[test]
    fn norm_never_grows() {
        let p = SystemParams::default();
        let terms = build_heff_terms(p.g_f, &p).unwrap();
        let traj = integrate_amplitudes(&terms, 1, 20.0, default_step(&terms, 1)).unwrap();
        assert!(traj.norms.iter().all(|n| *n <= 1.0 + 1e-9));
    }
}
