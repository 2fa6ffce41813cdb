//! Periodic steady state of the multichromatically driven master equation.
//!
//! The first tone is static in the rotating frame. Tones `m >= 2` oscillate at
//! offsets `Delta_m = g_f (delta_m_tilde - 1)`, so the steady state is expanded as
//! `rho(t) = sum_k rho_k exp(-i k.Delta t)` with `k` ranging over integer vectors of
//! length `N - 1` and `|k|_1 <= q`. Each harmonic obeys
//!
//! ```text
//! (i k.Delta + Q) rho_k + sum_m E_m (Sigma_+ rho_{k - I_m} - Sigma_- rho_{k + I_m}) = 0
//! ```
//!
//! and the homogeneous system is closed by replacing the `(0,0)` element equation
//! of the `k = 0` block with `Tr rho_0 = 1`.

use std::collections::HashMap;
use std::sync::Arc;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::sparse::linalg::lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Mat, Par};

use crate::basis::{self, DressedBasis, DressedLabel};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, I, ONE, ZERO};
use crate::params::SystemParams;
use crate::superop::LiouvillePieces;
use crate::C64;

/// Relative residual above which a solve is reported as failed.
pub const RESIDUAL_THRESHOLD: f64 = 1e-10;
/// Photon moments in `(-NPCR_CLAMP, 0)` are truncation noise and read as zero.
pub const NPCR_CLAMP: f64 = 1e-12;
/// Default floor for the smallest eigenvalue of `rho_0` before it is flagged.
pub const POSITIVITY_TOLERANCE: f64 = 1e-4;
/// Highest truncation order tried when a point comes out non-positive.
pub const DEFAULT_Q_MAX: usize = 4;
/// Tone offsets closer than this (in units of `g_f`) count as the same frequency.
pub const TONE_TOLERANCE: f64 = 1e-9;

/// Harmonic indices `k` with `|k|_1 <= q`, in graded lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlochIndexSet {
    q: usize,
    indices: Vec<Vec<i32>>,
    lookup: HashMap<Vec<i32>, usize>,
}

impl BlochIndexSet {
    pub fn q(&self) -> usize {
        self.q
    }

    /// Length of each index vector (`N - 1`).
    pub fn width(&self) -> usize {
        self.indices[0].len()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[Vec<i32>] {
        &self.indices
    }

    pub fn position(&self, k: &[i32]) -> Option<usize> {
        self.lookup.get(k).copied()
    }

    /// Position of `k` shifted by `delta` along axis `axis`.
    pub fn neighbour(&self, pos: usize, axis: usize, delta: i32) -> Option<usize> {
        let mut k = self.indices[pos].clone();
        k[axis] += delta;
        self.position(&k)
    }
}

pub fn bloch_indices(order: usize, q: usize) -> BlochIndexSet {
    let width = order.saturating_sub(1);
    let q_i = q as i32;
    let mut indices = vec![Vec::new()];
    for _ in 0..width {
        let mut next = Vec::new();
        for k in &indices {
            let used: i32 = k.iter().map(|x: &i32| x.abs()).sum();
            for v in -(q_i - used)..=(q_i - used) {
                let mut kk = k.clone();
                kk.push(v);
                next.push(kk);
            }
        }
        indices = next;
    }
    indices.sort_by(|a, b| {
        let na: i32 = a.iter().map(|x| x.abs()).sum();
        let nb: i32 = b.iter().map(|x| x.abs()).sum();
        na.cmp(&nb).then_with(|| a.cmp(b))
    });
    let lookup = indices.iter().enumerate().map(|(i, k)| (k.clone(), i)).collect();
    BlochIndexSet { q, indices, lookup }
}

/// Sparse block system for all harmonics reachable from `k = 0`.
///
/// Blocks that no nonzero drive amplitude connects to `k = 0` have zero
/// solution and are left out of the unknowns.
#[derive(Debug, Clone)]
pub struct BlochSystem {
    pub g: f64,
    pub block_dim: usize,
    /// Offset of each index block in the unknown vector, `None` when pruned.
    pub offsets: Vec<Option<usize>>,
    pub size: usize,
    pub triplets: Vec<(usize, usize, C64)>,
    pub rhs: Vec<C64>,
    /// Scalar equations in the full, unpruned system: `n(q) d^2`.
    pub full_size: usize,
}

impl BlochSystem {
    pub fn active_blocks(&self) -> usize {
        self.offsets.iter().filter(|o| o.is_some()).count()
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.size];
        for &(r, c, v) in &self.triplets {
            y[r] += v * x[c];
        }
        y
    }

    pub fn relative_residual(&self, x: &[C64]) -> f64 {
        let ax = self.apply(x);
        let num: f64 = ax.iter().zip(&self.rhs).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let den: f64 = self.rhs.iter().map(|b| b.norm_sqr()).sum::<f64>().sqrt();
        num / den
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = linalg::zeros(self.size, self.size);
        for &(r, c, v) in &self.triplets {
            m[(r, c)] += v;
        }
        m
    }
}

/// Coupling-independent setup shared by every solve at fixed drive settings.
#[derive(Debug, Clone)]
pub struct SteadySolver {
    params: SystemParams,
    q: usize,
    basis: Arc<DressedBasis>,
    pieces: LiouvillePieces,
    indices: Arc<BlochIndexSet>,
    moment: CMat,
}

impl SteadySolver {
    pub fn new(params: &SystemParams, q: usize) -> Result<Self> {
        params.validate()?;
        let basis = Arc::new(DressedBasis::new(params.n_couplets)?);
        let pieces = LiouvillePieces::new(params, &basis);
        let indices = Arc::new(bloch_indices(params.order, q));
        let moment = basis::photon_moment(&basis, params.order);
        Ok(Self { params: params.clone(), q, basis, pieces, indices, moment })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn basis(&self) -> &Arc<DressedBasis> {
        &self.basis
    }

    pub fn indices(&self) -> &BlochIndexSet {
        &self.indices
    }

    pub fn assemble(&self, g: f64) -> BlochSystem {
        self.assemble_with(g, &self.params.tone_offsets())
    }

    /// Assembles with explicit in-frame offsets for tones 2..N.
    pub fn assemble_with(&self, g: f64, shifts: &[f64]) -> BlochSystem {
        let d = self.basis.dim();
        let dd = d * d;
        let routes = route_tones(shifts, TONE_TOLERANCE * self.params.g_f);

        // Tones sitting on the frame frequency join the static drive; tones
        // sharing a frequency are carried by one index axis.
        let mut static_amp = 0.0;
        let mut axis_amps = vec![0.0; shifts.len()];
        for (m, route) in routes.iter().enumerate() {
            let e = self.params.amps[m + 1];
            match route {
                None => static_amp += e,
                Some(r) => axis_amps[*r] += e,
            }
        }
        let reachable = reachable_blocks(&self.indices, &axis_amps);

        let mut offsets = vec![None; self.indices.len()];
        let mut size = 0;
        for (pos, off) in offsets.iter_mut().enumerate() {
            if reachable[pos] {
                *off = Some(size);
                size += dd;
            }
        }

        let mut q_mat = self.pieces.liouvillian(g);
        if static_amp != 0.0 {
            q_mat = q_mat + linalg::scale(&(&self.pieces.sigma_plus - &self.pieces.sigma_minus), C64::new(static_amp, 0.0));
        }
        let sp = sparse_entries(&self.pieces.sigma_plus);
        let sm = sparse_entries(&self.pieces.sigma_minus);
        let q_entries = sparse_entries(&q_mat);
        let zero_pos = self.indices.position(&vec![0; self.indices.width()]).expect("k = 0 is always present");

        let mut triplets = Vec::new();
        for (pos, k) in self.indices.indices().iter().enumerate() {
            let Some(row0) = offsets[pos] else { continue };
            let trace_block = pos == zero_pos;
            let skip = |r: usize| trace_block && r == 0;
            let phase: f64 = k.iter().zip(shifts).map(|(&ki, &s)| ki as f64 * s).sum();

            for &(r, c, v) in &q_entries {
                if !skip(r) && r != c {
                    triplets.push((row0 + r, row0 + c, v));
                }
            }
            let diag: Vec<C64> = (0..dd).map(|i| q_mat[(i, i)] + I * phase).collect();
            for (i, v) in diag.into_iter().enumerate() {
                if !skip(i) && v != ZERO {
                    triplets.push((row0 + i, row0 + i, v));
                }
            }

            for (axis, &e) in axis_amps.iter().enumerate() {
                if e == 0.0 {
                    continue;
                }
                let lower = self.indices.neighbour(pos, axis, -1).and_then(|p| offsets[p]);
                let upper = self.indices.neighbour(pos, axis, 1).and_then(|p| offsets[p]);
                if let Some(col0) = lower {
                    for &(r, c, v) in &sp {
                        if !skip(r) {
                            triplets.push((row0 + r, col0 + c, v * e));
                        }
                    }
                }
                if let Some(col0) = upper {
                    for &(r, c, v) in &sm {
                        if !skip(r) {
                            triplets.push((row0 + r, col0 + c, -v * e));
                        }
                    }
                }
            }

            if trace_block {
                for i in 0..d {
                    triplets.push((row0, row0 + i * d + i, ONE));
                }
            }
        }

        let mut rhs = vec![ZERO; size];
        rhs[offsets[zero_pos].unwrap()] = ONE;
        BlochSystem {
            g,
            block_dim: dd,
            offsets,
            size,
            triplets,
            rhs,
            full_size: self.indices.len() * dd,
        }
    }

    pub fn solve(&self, g: f64) -> Result<BlochSolution> {
        self.solve_system(self.assemble(g))
    }

    /// Solves with the scanned (last) tone moved to `delta_tilde`.
    pub fn solve_scan(&self, g: f64, delta_tilde: f64) -> Result<BlochSolution> {
        let shifts = self.params.with_scan_delta(delta_tilde).tone_offsets();
        self.solve_system(self.assemble_with(g, &shifts))
    }

    fn solve_system(&self, system: BlochSystem) -> Result<BlochSolution> {
        let g = system.g;
        let x = solve_sparse(&system)?;
        let residual = system.relative_residual(&x);
        if !(residual <= RESIDUAL_THRESHOLD) {
            return Err(Error::SolverFailure { g, residual, threshold: RESIDUAL_THRESHOLD });
        }

        let d = self.basis.dim();
        let blocks: Vec<CMat> = system
            .offsets
            .iter()
            .map(|off| match off {
                Some(o) => linalg::unvec_col(&x[*o..*o + system.block_dim], d),
                None => linalg::zeros(d, d),
            })
            .collect();
        let zero_pos = self.indices.position(&vec![0; self.indices.width()]).unwrap();
        let min_eigenvalue = linalg::min_hermitian_eigenvalue(&blocks[zero_pos]);
        if min_eigenvalue < -POSITIVITY_TOLERANCE {
            log::warn!("rho_0 at g = {g} has eigenvalue {min_eigenvalue:.3e} below -{POSITIVITY_TOLERANCE:.0e}");
        }
        Ok(BlochSolution {
            g,
            q: self.q,
            order: self.params.order,
            residual,
            min_eigenvalue,
            equations: system.full_size,
            active_equations: system.size,
            blocks,
            zero_pos,
            indices: Arc::clone(&self.indices),
            basis: Arc::clone(&self.basis),
            moment: self.moment.clone(),
        })
    }
}

/// Solvers of increasing truncation order.
///
/// A point whose photon moment is negative beyond the clamp has not converged
/// in `q`; it is solved again one order up, until `q_max`.
#[derive(Debug, Clone)]
pub struct EscalatingSolver {
    solvers: Vec<SteadySolver>,
}

impl EscalatingSolver {
    pub fn new(params: &SystemParams, q: usize, q_max: usize) -> Result<Self> {
        if q_max < q {
            return Err(Error::InvalidParams(format!("q_max ({q_max}) must be >= q ({q})")));
        }
        let solvers = (q..=q_max).map(|k| SteadySolver::new(params, k)).collect::<Result<_>>()?;
        Ok(Self { solvers })
    }

    pub fn q(&self) -> usize {
        self.solvers[0].q()
    }

    pub fn q_max(&self) -> usize {
        self.solvers.last().unwrap().q()
    }

    pub fn base(&self) -> &SteadySolver {
        &self.solvers[0]
    }

    /// First solution, in increasing order, with an admissible count rate.
    pub fn solve_scan(&self, g: f64, delta_tilde: f64) -> Result<BlochSolution> {
        let mut last = None;
        for s in &self.solvers {
            let sol = s.solve_scan(g, delta_tilde)?;
            match sol.npcr() {
                Ok(_) => return Ok(sol),
                Err(e @ Error::PositivityViolation { .. }) => {
                    log::debug!("g = {g}, delta = {delta_tilde}: {e} at q = {}", s.q());
                    last = Some(e);
                }
                Err(e) => return Err(e),
            }
        }
        Err(last.expect("at least one order is tried"))
    }
}

fn sparse_entries(m: &CMat) -> Vec<(usize, usize, C64)> {
    let mut out = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if v != ZERO {
                out.push((i, j, v));
            }
        }
    }
    out
}

/// Index axis carrying each oscillating tone, `None` for tones that coincide
/// with the frame frequency.
fn route_tones(shifts: &[f64], tol: f64) -> Vec<Option<usize>> {
    (0..shifts.len())
        .map(|m| {
            if shifts[m].abs() <= tol {
                None
            } else {
                (0..=m).find(|&r| (shifts[r] - shifts[m]).abs() <= tol)
            }
        })
        .collect()
}

fn reachable_blocks(indices: &BlochIndexSet, axis_amps: &[f64]) -> Vec<bool> {
    let mut seen = vec![false; indices.len()];
    let start = indices.position(&vec![0; indices.width()]).unwrap();
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(pos) = stack.pop() {
        for (axis, &e) in axis_amps.iter().enumerate() {
            if e == 0.0 {
                continue;
            }
            for delta in [-1, 1] {
                if let Some(n) = indices.neighbour(pos, axis, delta) {
                    if !seen[n] {
                        seen[n] = true;
                        stack.push(n);
                    }
                }
            }
        }
    }
    seen
}

fn solve_sparse(system: &BlochSystem) -> Result<Vec<C64>> {
    let n = system.size;
    let singular = |_| Error::Singular { g: system.g };
    let entries: Vec<Triplet<usize, usize, C64>> =
        system.triplets.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
    let a = SparseColMat::<usize, C64>::try_new_from_triplets(n, n, &entries).map_err(|_| Error::Singular { g: system.g })?;

    // Sequential on purpose: points already run in parallel, and a fixed
    // operation order keeps results independent of the worker count.
    let par = Par::Seq;
    let symbolic = lu::factorize_symbolic_lu(a.symbolic(), Default::default()).map_err(|_| Error::Singular { g: system.g })?;
    let mut numeric = lu::NumericLu::new();
    let scratch = symbolic
        .factorize_numeric_lu_scratch::<C64>(par, Default::default())
        .or(symbolic.solve_in_place_scratch::<C64>(1, par));
    let mut buf = MemBuffer::new(scratch);
    let factors = symbolic
        .factorize_numeric_lu(&mut numeric, a.as_ref(), par, MemStack::new(&mut buf), Default::default())
        .map_err(singular)?;
    let mut solve = |rhs: &[C64]| -> Vec<C64> {
        let mut b = Mat::from_fn(n, 1, |i, _| rhs[i]);
        factors.solve_in_place_with_conj(Conj::No, b.as_mut(), par, MemStack::new(&mut buf));
        (0..n).map(|i| b[(i, 0)]).collect()
    };

    let mut x = solve(&system.rhs);
    // One step of refinement keeps the residual well under threshold at large g.
    let ax = system.apply(&x);
    let r: Vec<C64> = system.rhs.iter().zip(&ax).map(|(b, y)| b - y).collect();
    for (xi, di) in x.iter_mut().zip(solve(&r)) {
        *xi += di;
    }
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Singular { g: system.g });
    }
    Ok(x)
}

/// Element designations of `rho_0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementLabel {
    /// `(0| rho |0)`
    Ground,
    /// `(row| rho |col)`
    Pair(DressedLabel, DressedLabel),
    /// `(0| rho |n)_eps`
    GroundTo(DressedLabel),
}

/// Harmonic density-matrix components at one coupling.
#[derive(Debug, Clone)]
pub struct BlochSolution {
    pub g: f64,
    pub q: usize,
    pub order: usize,
    pub residual: f64,
    /// Smallest eigenvalue of `rho_0`.
    pub min_eigenvalue: f64,
    /// Size of the full block system, `n(q) d^2`.
    pub equations: usize,
    /// Unknowns actually solved for after pruning unreachable blocks.
    pub active_equations: usize,
    blocks: Vec<CMat>,
    zero_pos: usize,
    indices: Arc<BlochIndexSet>,
    basis: Arc<DressedBasis>,
    moment: CMat,
}

impl BlochSolution {
    pub fn rho0(&self) -> &CMat {
        &self.blocks[self.zero_pos]
    }

    pub fn block(&self, k: &[i32]) -> Option<&CMat> {
        self.indices.position(k).map(|p| &self.blocks[p])
    }

    pub fn indices(&self) -> &BlochIndexSet {
        &self.indices
    }

    pub fn basis(&self) -> &DressedBasis {
        &self.basis
    }

    pub fn is_positive(&self, tolerance: f64) -> bool {
        self.min_eigenvalue >= -tolerance
    }

    /// `<a^dag^N a^N>` in `rho_0`.
    pub fn npcr(&self) -> Result<f64> {
        let v = (self.rho0() * &self.moment).diagonal().column_vector().iter().copied().sum::<C64>().re;
        clamp_rate(v)
    }

    pub fn element(&self, label: ElementLabel) -> Result<C64> {
        let idx = |l: DressedLabel| self.basis.index_of(l).ok_or_else(|| Error::LabelOutOfRange(l.to_string()));
        let (r, c) = match label {
            ElementLabel::Ground => (0, 0),
            ElementLabel::Pair(a, b) => (idx(a)?, idx(b)?),
            ElementLabel::GroundTo(b) => (0, idx(b)?),
        };
        Ok(self.rho0()[(r, c)])
    }

    pub fn rho00(&self) -> f64 {
        self.rho0()[(0, 0)].re
    }

    /// Population `(3|rho|3)_{++}` of the upper third-couplet state, or 0 if not kept.
    pub fn rho33pp(&self) -> f64 {
        self.basis.index_of(DressedLabel::plus(3)).map(|i| self.rho0()[(i, i)].re).unwrap_or(0.0)
    }
}

pub fn clamp_rate(v: f64) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v > -NPCR_CLAMP {
        Ok(0.0)
    } else {
        Err(Error::PositivityViolation { value: v })
    }
}

pub fn assemble_system(g: f64, p: &SystemParams, q: usize) -> Result<BlochSystem> {
    Ok(SteadySolver::new(p, q)?.assemble(g))
}

pub fn solve_steady(g: f64, p: &SystemParams, q: usize) -> Result<BlochSolution> {
    SteadySolver::new(p, q)?.solve(g)
}

/// `Tr(rho_0 a^dag^N a^N)` for order `n`, clamped at zero.
pub fn npcr(sol: &BlochSolution, n: usize) -> Result<f64> {
    if n == sol.order {
        return sol.npcr();
    }
    let m = basis::photon_moment(sol.basis(), n);
    clamp_rate(linalg::trace(&(sol.rho0() * m)).re)
}

pub fn density_element(sol: &BlochSolution, label: ElementLabel) -> Result<C64> {
    sol.element(label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const S2: f64 = std::f64::consts::SQRT_2;

    #[test]
    fn index_counts() {
        assert_eq!(bloch_indices(3, 0).indices(), &[vec![0, 0]]);
        let one = bloch_indices(3, 1);
        assert_eq!(one.indices(), &[vec![0, 0], vec![-1, 0], vec![0, -1], vec![0, 1], vec![1, 0]]);
        assert_eq!(bloch_indices(3, 2).len(), 13);
        assert_eq!(bloch_indices(3, 3).len(), 25);
        assert_eq!(bloch_indices(1, 3).len(), 1);
        assert_eq!(bloch_indices(2, 2).len(), 5);
    }

    proptest! {
        #[test]
        fn index_set_shape(q in 0usize..6) {
            let set = bloch_indices(3, q);
            let q = q as i32;
            prop_assert_eq!(set.len() as i32, 2 * q * q + 2 * q + 1);
            prop_assert_eq!(set.position(&[0, 0]), Some(0));
            for k in set.indices() {
                let neg: Vec<i32> = k.iter().map(|x| -x).collect();
                prop_assert!(set.position(&neg).is_some());
            }
        }
    }

    #[test]
    fn system_sizes_and_pattern() {
        let p = SystemParams::default();
        let solver = SteadySolver::new(&p, 1).unwrap();
        let sys = solver.assemble(p.g_f);
        assert_eq!(sys.size, 405);
        assert_eq!(sys.full_size, 405);

        // Block (1,0) talks to (0,0) through Sigma_+ and to nothing above it.
        let idx = solver.indices();
        let b10 = idx.position(&[1, 0]).unwrap();
        let b00 = idx.position(&[0, 0]).unwrap();
        let (r0, c0) = (sys.offsets[b10].unwrap(), sys.offsets[b00].unwrap());
        let dense = sys.to_dense();
        let e2 = p.amps[1];
        for i in 0..81 {
            for j in 0..81 {
                let want = solver.pieces.sigma_plus[(i, j)] * e2;
                assert!((dense[(r0 + i, c0 + j)] - want).norm() < 1e-14);
            }
        }
        for other in [idx.position(&[0, 1]).unwrap(), idx.position(&[0, -1]).unwrap(), idx.position(&[-1, 0]).unwrap()] {
            let c = sys.offsets[other].unwrap();
            for i in 0..81 {
                for j in 0..81 {
                    assert_eq!(dense[(r0 + i, c + j)], ZERO);
                }
            }
        }

        // Block (0,1) carries i (delta_3 - g_f) on its diagonal.
        let b01 = idx.position(&[0, 1]).unwrap();
        let o = sys.offsets[b01].unwrap();
        let q = solver.pieces.liouvillian(p.g_f);
        let shift = p.tone_offsets()[1];
        for i in 0..81 {
            for j in 0..81 {
                let want = q[(i, j)] + if i == j { I * shift } else { ZERO };
                assert!((dense[(o + i, o + j)] - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn pruning_skips_undriven_harmonics() {
        let p = SystemParams::default().with_amps(&[1.0 / S2, 0.0, 0.0]);
        let sys = assemble_system(p.g_f, &p, 2).unwrap();
        assert_eq!(sys.active_blocks(), 1);
        assert_eq!(sys.full_size, 13 * 81);
        let p = SystemParams::default().with_amps(&[1.0 / S2, S2, 0.0]);
        assert_eq!(assemble_system(p.g_f, &p, 2).unwrap().active_blocks(), 5);
    }

    #[test]
    fn vacuum_without_drive() {
        let p = SystemParams::default().scaled_amps(0.0);
        let sol = solve_steady(p.g_f, &p, 1).unwrap();
        assert!((sol.rho00() - 1.0).abs() < 1e-12);
        let mut rest = sol.rho0().clone();
        rest[(0, 0)] = ZERO;
        assert!(linalg::max_abs(&rest) <= 1e-12);
        assert_eq!(sol.npcr().unwrap(), 0.0);
    }

    #[test]
    fn solution_invariants() {
        let p = SystemParams::default();
        for (gt, d3) in [(1.0, 1.0), (1.0, -1.0), (S2 - 1.0, (S2 - 1.0).powi(2))] {
            let sol = solve_steady(gt * p.g_f, &p.with_scan_delta(d3), 2).unwrap();
            assert!(sol.residual <= RESIDUAL_THRESHOLD);
            assert!((linalg::trace(sol.rho0()) - ONE).norm() < 1e-12);
            let rho0 = sol.rho0();
            let herm = linalg::max_abs_diff(rho0, &linalg::adjoint(rho0));
            assert!(herm <= 1e-10, "hermiticity {herm:e} residual {:e}", sol.residual);
            for k in sol.indices().indices() {
                let rk = sol.block(k).unwrap();
                if k.iter().any(|&x| x != 0) {
                    assert!(linalg::trace(rk).norm() <= 1e-10);
                }
                let neg: Vec<i32> = k.iter().map(|x| -x).collect();
                let rneg = sol.block(&neg).unwrap();
                assert!(linalg::max_abs_diff(rneg, &linalg::adjoint(rk)) <= 1e-10);
            }
            assert!(sol.is_positive(POSITIVITY_TOLERANCE));
            for l in [DressedLabel::plus(1), DressedLabel::minus(2), DressedLabel::plus(4)] {
                let a = sol.element(ElementLabel::GroundTo(l)).unwrap();
                let b = sol.element(ElementLabel::Pair(l, DressedLabel::Ground)).unwrap();
                assert!((a - b.conj()).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn out_of_range_label() {
        let p = SystemParams::default();
        let sol = solve_steady(p.g_f, &p, 0).unwrap();
        assert!(matches!(
            sol.element(ElementLabel::GroundTo(DressedLabel::plus(7))),
            Err(Error::LabelOutOfRange(_))
        ));
        assert!(sol.element(ElementLabel::GroundTo(DressedLabel::plus(4))).is_ok());
    }

    #[test]
    fn two_state_depletion() {
        let p = SystemParams::default().with_amps(&[1.0 / S2, 0.0, 0.0]).with_scan_delta(4.0);
        let r = solve_steady(p.g_f, &p, 1).unwrap().rho00();
        assert!((r / (13.0 / 17.0) - 1.0).abs() < 0.05, "{r}");
        let p = SystemParams::default().with_amps(&[0.0, S2, 0.0]).with_scan_delta(4.0);
        let r = solve_steady((S2 - 1.0) * p.g_f, &p, 1).unwrap().rho00();
        assert!((r / (25.0 / 41.0) - 1.0).abs() < 0.05, "{r}");
    }

    #[test]
    fn far_detuned_third_tone_leaves_first_step_depletion() {
        let p = SystemParams::default().with_scan_delta(4.0);
        let r = solve_steady(p.g_f, &p, 1).unwrap().rho00();
        assert!((r - 13.0 / 17.0).abs() < 0.05, "{r}");
    }

    #[test]
    fn coincident_tones_merge() {
        // A third tone on the frame frequency is the same field as the first.
        let p = SystemParams::default().with_amps(&[0.3, 0.0, 0.4]).with_scan_delta(1.0);
        let merged = SystemParams::default().with_amps(&[0.7, 0.0, 0.0]);
        for q in [1, 2] {
            let a = solve_steady(p.g_f, &p, q).unwrap();
            let b = solve_steady(p.g_f, &merged, q).unwrap();
            assert!(linalg::max_abs_diff(a.rho0(), b.rho0()) < 1e-12);
        }
        // Two oscillating tones at one frequency share an index axis.
        let p = SystemParams::default().with_amps(&[0.5, 0.2, 0.3]).with_scan_delta(S2 - 1.0);
        let merged = SystemParams::default().with_amps(&[0.5, 0.5, 0.0]);
        let a = solve_steady(p.g_f, &p, 2).unwrap();
        let b = solve_steady(p.g_f, &merged, 2).unwrap();
        assert!(linalg::max_abs_diff(a.rho0(), b.rho0()) < 1e-12);
    }

    #[test]
    fn escalation_reaches_a_positive_order() {
        // q = 1 leaves a negative count rate at weak coupling.
        let p = SystemParams::default().with_scan_delta(-0.9);
        let g = 0.05 * p.g_f;
        assert!(matches!(solve_steady(g, &p, 1).unwrap().npcr(), Err(Error::PositivityViolation { .. })));
        let esc = EscalatingSolver::new(&p, 1, DEFAULT_Q_MAX).unwrap();
        let sol = esc.solve_scan(g, -0.9).unwrap();
        assert!(sol.q > 1 && sol.npcr().is_ok());
        let fixed = EscalatingSolver::new(&p, 1, 1).unwrap();
        assert!(matches!(fixed.solve_scan(g, -0.9), Err(Error::PositivityViolation { .. })));
        assert!(EscalatingSolver::new(&p, 3, 2).is_err());
    }

    #[test]
    fn clamp() {
        assert_eq!(clamp_rate(-1e-13).unwrap(), 0.0);
        assert_eq!(clamp_rate(2.0).unwrap(), 2.0);
        assert!(matches!(clamp_rate(-1e-6), Err(Error::PositivityViolation { .. })));
    }

    #[test]
    fn moment_of_pure_third_couplet() {
        let b = DressedBasis::new(4).unwrap();
        let m = basis::photon_moment(&b, 3);
        let i = b.index_of(DressedLabel::plus(3)).unwrap();
        let mut rho = linalg::zeros(9, 9);
        rho[(i, i)] = ONE;
        assert!((linalg::trace(&(&rho * &m)).re - 3.0).abs() < 1e-12);
    }
}
