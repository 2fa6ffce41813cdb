//! Direct time integration of the driven master equation.
//!
//! Works with ordinary matrix products on `d x d` density matrices in the same
//! rotating frame and truncated basis as the steady-state solver, but never
//! touches the vectorised superoperators, so agreement between the two is a
//! real cross-check of the harmonic expansion.

use crate::basis::{self, DressedBasis, OperatorKind};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, SparseMat, I, ONE, ZERO};
use crate::params::SystemParams;
use crate::C64;

pub const STEP_LIMIT: f64 = 0.05;
pub const TRACE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct DensityTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<CMat>,
    /// Running integral `int_0^t rho dt'` at each sample time.
    integrals: Vec<CMat>,
    pub dt: f64,
}

impl DensityTrajectory {
    /// Wraps externally produced samples; integrals use the trapezoid rule on them.
    pub fn from_samples(times: Vec<f64>, states: Vec<CMat>) -> Result<Self> {
        if times.len() != states.len() || times.len() < 2 {
            return Err(Error::InvalidState("need at least two matching samples".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidState("sample times must increase".into()));
        }
        let d = states[0].nrows();
        let mut integrals = vec![linalg::zeros(d, d)];
        for w in 0..times.len() - 1 {
            let h = times[w + 1] - times[w];
            let step = linalg::scale(&(&states[w] + &states[w + 1]), C64::new(h / 2.0, 0.0));
            integrals.push(&integrals[w] + step);
        }
        let dt = times[1] - times[0];
        Ok(Self { times, states, integrals, dt })
    }

    pub fn span(&self) -> f64 {
        self.times[self.times.len() - 1] - self.times[0]
    }

    pub fn last(&self) -> &CMat {
        self.states.last().unwrap()
    }
}

/// Time average of `rho` over the trailing `window` of the trajectory.
pub fn dc_component(traj: &DensityTrajectory, window: f64) -> Result<CMat> {
    let span = traj.span();
    if !(window > 0.0) || window > span * (1.0 + 1e-12) {
        return Err(Error::WindowTooLong { window, span });
    }
    let end = traj.times.len() - 1;
    let t_start = traj.times[end] - window;
    // Closest sample to the requested window start.
    let start = traj
        .times
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - t_start).abs().total_cmp(&(b.1 - t_start).abs()))
        .map(|(i, _)| i)
        .unwrap();
    let w = traj.times[end] - traj.times[start];
    Ok(linalg::scale(&(&traj.integrals[end] - &traj.integrals[start]), C64::new(1.0 / w, 0.0)))
}

/// Smallest whole number of periods of the slowest tone beat covering `min_span`.
pub fn beat_window(p: &SystemParams, min_span: f64) -> f64 {
    let slowest = p
        .tone_offsets()
        .into_iter()
        .map(f64::abs)
        .filter(|w| *w > 1e-9)
        .fold(f64::INFINITY, f64::min);
    if !slowest.is_finite() {
        return min_span;
    }
    let period = 2.0 * std::f64::consts::PI / slowest;
    (min_span / period).ceil().max(1.0) * period
}

/// Column-major `d x d` scratch matrix; avoids bounds-checked indexing in the hot loop.
#[derive(Clone)]
struct Dense {
    d: usize,
    v: Vec<C64>,
}

impl Dense {
    fn zeros(d: usize) -> Self {
        Self { d, v: vec![ZERO; d * d] }
    }

    fn from_mat(m: &CMat) -> Self {
        Self { d: m.nrows(), v: linalg::vec_col(m) }
    }

    fn to_mat(&self) -> CMat {
        linalg::unvec_col(&self.v, self.d)
    }

    fn axpy(&self, s: f64, other: &Dense) -> Dense {
        Dense { d: self.d, v: self.v.iter().zip(&other.v).map(|(a, b)| a + b * s).collect() }
    }

    fn trace(&self) -> C64 {
        (0..self.d).map(|i| self.v[i * self.d + i]).sum()
    }
}

/// `out += A x` with `A` sparse.
fn left(a: &[(usize, usize, C64)], x: &Dense, out: &mut Dense) {
    let d = x.d;
    for &(i, k, v) in a {
        for j in 0..d {
            out.v[j * d + i] += v * x.v[j * d + k];
        }
    }
}

/// `out += x A` with `A` sparse.
fn right(a: &[(usize, usize, C64)], x: &Dense, out: &mut Dense) {
    let d = x.d;
    for &(k, j, v) in a {
        for i in 0..d {
            out.v[j * d + i] += v * x.v[k * d + i];
        }
    }
}

fn entries(m: &CMat) -> Vec<(usize, usize, C64)> {
    SparseMat::from_dense(m).entries
}

struct MasterEquation {
    /// `-i H - gamma/2 sigma_+ sigma_- - kappa a^dag a + E_1 (sigma_+ - sigma_-)`
    k_static: CMat,
    sigma_plus: CMat,
    sigma_minus: CMat,
    /// `(amplitude, offset)` for tones 2..N.
    tones: Vec<(f64, f64)>,
    jump_atom: Vec<(usize, usize, C64)>,
    jump_atom_dag: Vec<(usize, usize, C64)>,
    jump_cavity: Vec<(usize, usize, C64)>,
    jump_cavity_dag: Vec<(usize, usize, C64)>,
}

impl MasterEquation {
    fn new(g: f64, p: &SystemParams, basis: &DressedBasis) -> Self {
        let h = basis::hamiltonian_frame(g, p, basis).matrix;
        let a = basis::op_matrix(OperatorKind::Annihilation, basis).matrix;
        let sp = basis::op_matrix(OperatorKind::SigmaPlus, basis).matrix;
        let sm = basis::op_matrix(OperatorKind::SigmaMinus, basis).matrix;
        let ad = linalg::adjoint(&a);
        let e1 = p.amps[0];
        let k_static = linalg::scale(&h, -I)
            - linalg::scale(&(&sp * &sm), C64::new(p.gamma_i / 2.0, 0.0))
            - linalg::scale(&(&ad * &a), C64::new(p.kappa, 0.0))
            + linalg::scale(&(&sp - &sm), C64::new(e1, 0.0));
        let tones = p.amps[1..].iter().copied().zip(p.tone_offsets()).collect();
        let ga = (p.gamma_i).sqrt();
        let ka = (2.0 * p.kappa).sqrt();
        Self {
            k_static,
            jump_atom: entries(&linalg::scale(&sm, C64::new(ga, 0.0))),
            jump_atom_dag: entries(&linalg::scale(&sp, C64::new(ga, 0.0))),
            jump_cavity: entries(&linalg::scale(&a, C64::new(ka, 0.0))),
            jump_cavity_dag: entries(&linalg::scale(&ad, C64::new(ka, 0.0))),
            sigma_plus: sp,
            sigma_minus: sm,
            tones,
        }
    }

    /// Non-Hermitian part `K(t)`, so that `d rho/dt = K rho + rho K^dag + jumps`.
    fn k_at(&self, t: f64) -> (Vec<(usize, usize, C64)>, Vec<(usize, usize, C64)>) {
        let mut k = self.k_static.clone();
        for &(e, delta) in &self.tones {
            if e == 0.0 {
                continue;
            }
            let ph = (-I * delta * t).exp() * e;
            k = k + linalg::scale(&self.sigma_plus, ph) - linalg::scale(&self.sigma_minus, ph.conj());
        }
        let kd = linalg::adjoint(&k);
        (entries(&k), entries(&kd))
    }

    fn rhs(&self, t: f64, rho: &Dense) -> Dense {
        let (k, kd) = self.k_at(t);
        let mut out = Dense::zeros(rho.d);
        left(&k, rho, &mut out);
        right(&kd, rho, &mut out);
        let mut tmp = Dense::zeros(rho.d);
        left(&self.jump_atom, rho, &mut tmp);
        right(&self.jump_atom_dag, &tmp, &mut out);
        let mut tmp = Dense::zeros(rho.d);
        left(&self.jump_cavity, rho, &mut tmp);
        right(&self.jump_cavity_dag, &tmp, &mut out);
        out
    }

    /// Bound on the fastest rate the step has to resolve.
    fn rate(&self) -> f64 {
        let d = self.k_static.nrows();
        let mut row = vec![0.0; d];
        for i in 0..d {
            for j in 0..d {
                row[i] += self.k_static[(i, j)].norm();
                for &(e, _) in &self.tones {
                    row[i] += e * (self.sigma_plus[(i, j)].norm() + self.sigma_minus[(i, j)].norm());
                }
            }
        }
        let k_norm = row.into_iter().fold(0.0, f64::max);
        let tone = self.tones.iter().map(|t| t.1.abs()).fold(0.0, f64::max);
        k_norm.max(tone)
    }
}

/// Largest step allowed for `(g, p)`.
pub fn max_step(g: f64, p: &SystemParams) -> Result<f64> {
    p.validate()?;
    let basis = DressedBasis::new(p.n_couplets)?;
    Ok(STEP_LIMIT / MasterEquation::new(g, p, &basis).rate())
}

/// Fixed-step RK4 integration from `rho0` over `[0, duration]`, keeping every
/// `stride`-th state. The running integral is accumulated at every step.
pub fn integrate_master(
    g: f64,
    p: &SystemParams,
    rho0: &CMat,
    duration: f64,
    dt: f64,
    stride: usize,
) -> Result<DensityTrajectory> {
    p.validate()?;
    let basis = DressedBasis::new(p.n_couplets)?;
    let d = basis.dim();
    if rho0.nrows() != d || rho0.ncols() != d {
        return Err(Error::InvalidState(format!("expected a {d}x{d} density matrix")));
    }
    if (linalg::trace(rho0) - ONE).norm() > 1e-10 || linalg::max_abs_diff(rho0, &linalg::adjoint(rho0)) > 1e-10 {
        return Err(Error::InvalidState("initial state must be Hermitian with unit trace".into()));
    }
    if linalg::min_hermitian_eigenvalue(rho0) < -1e-10 {
        return Err(Error::InvalidState("initial state has a negative eigenvalue".into()));
    }
    let eq = MasterEquation::new(g, p, &basis);
    let rate = eq.rate();
    if !(dt > 0.0) || dt * rate > STEP_LIMIT * (1.0 + 1e-12) {
        return Err(Error::StepTooLarge { dt, rate, limit: STEP_LIMIT });
    }
    let stride = stride.max(1);
    let steps = (duration / dt).round() as usize;

    let mut rho = Dense::from_mat(rho0);
    let mut integral = Dense::zeros(d);
    let mut times = vec![0.0];
    let mut states = vec![rho0.clone()];
    let mut integrals = vec![linalg::zeros(d, d)];
    for step in 0..steps {
        let t = step as f64 * dt;
        let k1 = eq.rhs(t, &rho);
        let k2 = eq.rhs(t + dt / 2.0, &rho.axpy(dt / 2.0, &k1));
        let k3 = eq.rhs(t + dt / 2.0, &rho.axpy(dt / 2.0, &k2));
        let k4 = eq.rhs(t + dt, &rho.axpy(dt, &k3));
        let prev = rho.clone();
        for i in 0..rho.v.len() {
            rho.v[i] += (k1.v[i] + (k2.v[i] + k3.v[i]) * 2.0 + k4.v[i]) * (dt / 6.0);
        }
        for i in 0..rho.v.len() {
            integral.v[i] += (prev.v[i] + rho.v[i]) * (dt / 2.0);
        }
        let t1 = (step + 1) as f64 * dt;
        let drift = (rho.trace() - ONE).norm();
        if drift > TRACE_TOLERANCE || !drift.is_finite() {
            return Err(Error::TraceDrift { drift, time: t1 });
        }
        if (step + 1) % stride == 0 || step + 1 == steps {
            times.push(t1);
            states.push(rho.to_mat());
            integrals.push(integral.to_mat());
        }
    }
    Ok(DensityTrajectory { times, states, integrals, dt })
}

/// Vacuum-initialised run followed by a trailing average over `window`.
///
/// The step divides `window` exactly and the settling time is rounded up to
/// whole windows, so the average covers exactly the requested span.
pub fn steady_average(g: f64, p: &SystemParams, settle: f64, window: f64) -> Result<CMat> {
    let d = 1 + 2 * p.n_couplets;
    let mut rho0 = linalg::zeros(d, d);
    rho0[(0, 0)] = ONE;
    let per_window = (window / max_step(g, p)?).ceil() as usize;
    let dt = window / per_window as f64;
    let windows = (settle / window).ceil() as usize + 1;
    let traj = integrate_master(g, p, &rho0, windows as f64 * window, dt, per_window)?;
    dc_component(&traj, window)
}
