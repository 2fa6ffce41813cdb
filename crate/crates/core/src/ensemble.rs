//! Spectra averaged over the atom-cavity coupling distribution.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::params::SystemParams;
use crate::steady::{EscalatingSolver, SteadySolver};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistributionKind {
    Delta,
    Tabulated,
    Tem00,
}

/// Atom positions accepted by the TEM00 model. Lengths share one arbitrary unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tem00Mask {
    /// Half-width along the cavity axis, measured from an antinode.
    pub half_x: f64,
    /// Transverse half-width.
    pub half_y: f64,
    pub waist: f64,
    pub wavelength: f64,
    /// Quadrature samples per axis.
    pub samples: usize,
}

impl Default for Tem00Mask {
    /// Quarter wavelength along the axis (antinode to node), one waist across.
    fn default() -> Self {
        Self { half_x: 0.25, half_y: 1.0, waist: 1.0, wavelength: 1.0, samples: 400 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingDistribution {
    pub kind: DistributionKind,
    /// `(g, weight)`, ascending in `g`, weights summing to one.
    pub nodes: Vec<(f64, f64)>,
    pub g_max: Option<f64>,
    pub mask: Option<Tem00Mask>,
}

impl CouplingDistribution {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.nodes.iter().map(|n| n.1).sum()
    }

    /// Weight carried by nodes with `lo <= g < hi`.
    pub fn weight_between(&self, lo: f64, hi: f64) -> f64 {
        self.nodes.iter().filter(|n| n.0 >= lo && n.0 < hi).map(|n| n.1).sum()
    }

    /// Table of `(g, weight)` pairs. Weights are renormalised, with a warning when
    /// they were off by more than 1e-6.
    pub fn tabulated(mut nodes: Vec<(f64, f64)>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidDistribution("table is empty".into()));
        }
        if let Some(n) = nodes.iter().find(|n| !(n.0 >= 0.0 && n.0.is_finite())) {
            return Err(Error::InvalidDistribution(format!("coupling {} must be finite and >= 0", n.0)));
        }
        if let Some(n) = nodes.iter().find(|n| !(n.1 >= 0.0 && n.1.is_finite())) {
            return Err(Error::InvalidDistribution(format!("weight {} must be finite and >= 0", n.1)));
        }
        nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
        if nodes.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidDistribution("repeated coupling value".into()));
        }
        let total: f64 = nodes.iter().map(|n| n.1).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidDistribution("weights sum to zero".into()));
        }
        if (total - 1.0).abs() > 1e-6 {
            log::warn!("distribution weights sum to {total}; renormalising");
        }
        for n in &mut nodes {
            n.1 /= total;
        }
        Ok(Self { kind: DistributionKind::Tabulated, nodes, g_max: None, mask: None })
    }

    /// Two-column CSV `g,weight`; a non-numeric first row is taken as a header.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut nodes = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec?;
            if rec.len() != 2 {
                return Err(Error::InvalidDistribution(format!("row {}: expected 2 columns", line + 1)));
            }
            match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
                (Ok(g), Ok(w)) => nodes.push((g, w)),
                _ if line == 0 => continue,
                _ => return Err(Error::InvalidDistribution(format!("row {}: non-numeric entry", line + 1))),
            }
        }
        Self::tabulated(nodes)
    }

    /// `alpha * a + (1 - alpha) * b`.
    pub fn mix(alpha: f64, a: &Self, b: &Self) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidDistribution(format!("mixing weight {alpha} outside [0, 1]")));
        }
        let mut nodes: Vec<(f64, f64)> = a.nodes.iter().map(|&(g, w)| (g, alpha * w)).collect();
        for &(g, w) in &b.nodes {
            match nodes.iter_mut().find(|n| n.0 == g) {
                Some(n) => n.1 += (1.0 - alpha) * w,
                None => nodes.push((g, (1.0 - alpha) * w)),
            }
        }
        nodes.sort_by(|x, y| x.0.total_cmp(&y.0));
        Ok(Self { kind: DistributionKind::Tabulated, nodes, g_max: None, mask: None })
    }
}

pub fn pg_delta(g_f: f64) -> CouplingDistribution {
    CouplingDistribution { kind: DistributionKind::Delta, nodes: vec![(g_f, 1.0)], g_max: None, mask: None }
}

/// Coupling seen by an atom placed uniformly inside `mask`, with
/// `g(x, y) = g_max cos(2 pi x / lambda) exp(-y^2 / w^2)`, binned into
/// `node_count` equal-width bins on `[0, g_max]`. Each node sits at the mean
/// coupling of its bin; empty bins are dropped.
pub fn pg_tem00(g_max: f64, mask: &Tem00Mask, node_count: usize) -> Result<CouplingDistribution> {
    if !(g_max > 0.0 && g_max.is_finite()) {
        return Err(Error::InvalidDistribution(format!("g_max must be > 0 (got {g_max})")));
    }
    if node_count == 0 {
        return Err(Error::InvalidDistribution("node_count must be >= 1".into()));
    }
    if !(mask.waist > 0.0 && mask.wavelength > 0.0) {
        return Err(Error::InvalidDistribution("waist and wavelength must be > 0".into()));
    }
    if !(mask.half_x >= 0.0 && mask.half_y >= 0.0) {
        return Err(Error::InvalidDistribution("mask half-widths must be >= 0".into()));
    }
    if mask.half_x > mask.wavelength / 4.0 + 1e-12 {
        return Err(Error::InvalidDistribution("mask extends past the node next to the antinode".into()));
    }

    // Midpoint rule in each axis; a zero-width axis contributes its single point.
    let axis = |half: f64| -> Vec<f64> {
        let n = if half > 0.0 { mask.samples.max(1) } else { 1 };
        (0..n).map(|i| if half > 0.0 { -half + (i as f64 + 0.5) * 2.0 * half / n as f64 } else { 0.0 }).collect()
    };
    let xs = axis(mask.half_x);
    let ys = axis(mask.half_y);
    let tau = 2.0 * std::f64::consts::PI;
    let mut mass = vec![0.0; node_count];
    let mut moment = vec![0.0; node_count];
    for &x in &xs {
        let cx = (tau * x / mask.wavelength).cos().max(0.0);
        for &y in &ys {
            let g = g_max * cx * (-(y * y) / (mask.waist * mask.waist)).exp();
            let bin = ((g / g_max * node_count as f64) as usize).min(node_count - 1);
            mass[bin] += 1.0;
            moment[bin] += g;
        }
    }
    let total: f64 = mass.iter().sum();
    let nodes: Vec<(f64, f64)> = mass
        .iter()
        .zip(&moment)
        .filter(|(m, _)| **m > 0.0)
        .map(|(m, s)| (s / m, m / total))
        .collect();
    if nodes.is_empty() {
        return Err(Error::InvalidDistribution("mask is empty".into()));
    }
    Ok(CouplingDistribution { kind: DistributionKind::Tem00, nodes, g_max: Some(g_max), mask: Some(*mask) })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PointValues {
    pub npcr: f64,
    pub rho00: f64,
    pub rho33pp: f64,
    /// Solves that needed a higher truncation order than requested.
    pub escalated: usize,
}

/// Anything that yields observables at a coupling `g` and scan detuning.
pub trait PointModel: Sync {
    fn evaluate(&self, g: f64, delta_tilde: f64) -> Result<PointValues>;
}

impl PointModel for SteadySolver {
    fn evaluate(&self, g: f64, delta_tilde: f64) -> Result<PointValues> {
        let sol = self.solve_scan(g, delta_tilde)?;
        Ok(PointValues { npcr: sol.npcr()?, rho00: sol.rho00(), rho33pp: sol.rho33pp(), escalated: 0 })
    }
}

impl PointModel for EscalatingSolver {
    fn evaluate(&self, g: f64, delta_tilde: f64) -> Result<PointValues> {
        let sol = self.solve_scan(g, delta_tilde)?;
        Ok(PointValues {
            npcr: sol.npcr()?,
            rho00: sol.rho00(),
            rho33pp: sol.rho33pp(),
            escalated: usize::from(sol.q > self.q()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub delta_tilde: Vec<f64>,
    pub npcr: Vec<f64>,
    pub rho00: Vec<f64>,
    pub rho33pp: Vec<f64>,
    /// Drive amplitudes active in this run.
    pub amps: Vec<f64>,
    pub escalated: usize,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.delta_tilde.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta_tilde.is_empty()
    }
}

fn evaluate_at<M: PointModel>(model: &M, g: f64, delta_tilde: f64) -> Result<PointValues> {
    model.evaluate(g, delta_tilde).map_err(|e| match e {
        e @ Error::AtPoint { .. } => e,
        e => Error::AtPoint { g, delta_tilde, source: Box::new(e) },
    })
}

/// Weighted sum over distribution nodes at every grid point.
pub fn average_with<M: PointModel>(model: &M, amps: &[f64], dist: &CouplingDistribution, grid: &[f64]) -> Result<Spectrum> {
    let values: Vec<PointValues> = grid
        .par_iter()
        .map(|&d| {
            let mut acc = PointValues::default();
            for &(g, w) in &dist.nodes {
                let v = evaluate_at(model, g, d)?;
                acc.npcr += w * v.npcr;
                acc.rho00 += w * v.rho00;
                acc.rho33pp += w * v.rho33pp;
                acc.escalated += v.escalated;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    Ok(Spectrum {
        delta_tilde: grid.to_vec(),
        npcr: values.iter().map(|v| v.npcr).collect(),
        rho00: values.iter().map(|v| v.rho00).collect(),
        rho33pp: values.iter().map(|v| v.rho33pp).collect(),
        amps: amps.to_vec(),
        escalated: values.iter().map(|v| v.escalated).sum(),
    })
}

pub fn average_spectrum(p: &SystemParams, dist: &CouplingDistribution, grid: &Grid, q: usize, q_max: usize) -> Result<Spectrum> {
    let solver = EscalatingSolver::new(p, q, q_max)?;
    average_with(&solver, &p.amps, dist, grid.points())
}

/// The four runs of the background-subtraction protocol and their combination.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BackgroundSpectrum {
    pub all_on: Spectrum,
    pub first_off: Spectrum,
    pub second_off: Spectrum,
    pub both_off: Spectrum,
    /// `S(all) - S(E_1 = 0) - S(E_2 = 0) + S(E_1 = E_2 = 0)` for the count rate.
    pub delta: Vec<f64>,
}

pub fn combine_background(all: &[f64], first_off: &[f64], second_off: &[f64], both_off: &[f64]) -> Vec<f64> {
    (0..all.len()).map(|i| all[i] - first_off[i] - second_off[i] + both_off[i]).collect()
}

/// Runs the four protocol variants with models built by `make_model`.
pub fn background_with<M, F>(p: &SystemParams, dist: &CouplingDistribution, grid: &[f64], make_model: F) -> Result<BackgroundSpectrum>
where
    M: PointModel,
    F: Fn(&SystemParams) -> Result<M>,
{
    let variants = [p.clone(), p.without_tone(0), p.without_tone(1), p.without_tone(0).without_tone(1)];
    let mut runs = Vec::with_capacity(4);
    for v in &variants {
        let model = make_model(v)?;
        runs.push(average_with(&model, &v.amps, dist, grid)?);
    }
    let delta = combine_background(&runs[0].npcr, &runs[1].npcr, &runs[2].npcr, &runs[3].npcr);
    let mut it = runs.into_iter();
    Ok(BackgroundSpectrum {
        all_on: it.next().unwrap(),
        first_off: it.next().unwrap(),
        second_off: it.next().unwrap(),
        both_off: it.next().unwrap(),
        delta,
    })
}

pub fn background_subtracted(
    p: &SystemParams,
    dist: &CouplingDistribution,
    grid: &Grid,
    q: usize,
    q_max: usize,
) -> Result<BackgroundSpectrum> {
    background_with(p, dist, grid.points(), |v| EscalatingSolver::new(v, q, q_max))
}

/// Observables on a rectangular `(g_tilde, delta_tilde)` grid; rows follow `g_tilde`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSurface {
    pub g_tilde: Vec<f64>,
    pub delta_tilde: Vec<f64>,
    pub npcr: Vec<Vec<f64>>,
    pub rho00: Vec<Vec<f64>>,
    pub rho33pp: Vec<Vec<f64>>,
    pub escalated: usize,
}

impl SpectrumSurface {
    /// Row closest to `g_tilde`.
    pub fn row_near(&self, g_tilde: f64) -> usize {
        self.g_tilde
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - g_tilde).abs().total_cmp(&(b.1 - g_tilde).abs()))
            .map(|(i, _)| i)
            .unwrap()
    }

    pub fn column(&self, field: &[Vec<f64>], j: usize) -> Vec<f64> {
        field.iter().map(|row| row[j]).collect()
    }
}

pub fn surface_with<M: PointModel>(model: &M, g_f: f64, g_tilde: &[f64], delta_tilde: &[f64]) -> Result<SpectrumSurface> {
    let n = delta_tilde.len();
    let flat: Vec<PointValues> = (0..g_tilde.len() * n)
        .into_par_iter()
        .map(|idx| evaluate_at(model, g_tilde[idx / n] * g_f, delta_tilde[idx % n]))
        .collect::<Result<_>>()?;
    let field = |f: fn(&PointValues) -> f64| -> Vec<Vec<f64>> { flat.chunks(n).map(|row| row.iter().map(f).collect()).collect() };
    Ok(SpectrumSurface {
        g_tilde: g_tilde.to_vec(),
        delta_tilde: delta_tilde.to_vec(),
        npcr: field(|v| v.npcr),
        rho00: field(|v| v.rho00),
        rho33pp: field(|v| v.rho33pp),
        escalated: flat.iter().map(|v| v.escalated).sum(),
    })
}

pub fn surface(p: &SystemParams, g_tilde: &Grid, delta_tilde: &Grid, q: usize, q_max: usize) -> Result<SpectrumSurface> {
    let solver = EscalatingSolver::new(p, q, q_max)?;
    surface_with(&solver, p.g_f, g_tilde.points(), delta_tilde.points())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremumKind {
    Peak,
    Dip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extremum {
    pub index: usize,
    pub position: f64,
    pub value: f64,
    pub kind: ExtremumKind,
    pub prominence: f64,
}

/// Interior local extrema whose topographic prominence is at least `min_prominence`.
pub fn find_extrema(x: &[f64], y: &[f64], min_prominence: f64) -> Result<Vec<Extremum>> {
    if x.len() != y.len() {
        return Err(Error::InvalidGrid("abscissa and values differ in length".into()));
    }
    if x.len() >= 3 {
        let h = x[1] - x[0];
        if !(h > 0.0) || x.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-6 * h.abs().max(1e-300)) {
            return Err(Error::InvalidGrid("extrema search needs uniform spacing".into()));
        }
    }
    let mut out = Vec::new();
    for (kind, sign) in [(ExtremumKind::Peak, 1.0), (ExtremumKind::Dip, -1.0)] {
        let v: Vec<f64> = y.iter().map(|a| sign * a).collect();
        for i in peaks(&v) {
            let prom = prominence(&v, i);
            if prom >= min_prominence {
                out.push(Extremum { index: i, position: x[i], value: y[i], kind, prominence: prom });
            }
        }
    }
    out.sort_by_key(|e| e.index);
    Ok(out)
}

/// Interior maxima; a flat top counts once, at its middle.
fn peaks(v: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < v.len() {
        if v[i] > v[i - 1] {
            let mut j = i;
            while j + 1 < v.len() && v[j + 1] == v[i] {
                j += 1;
            }
            if j + 1 < v.len() && v[j + 1] < v[i] {
                out.push((i + j) / 2);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

fn prominence(v: &[f64], i: usize) -> f64 {
    let top = v[i];
    let mut left = top;
    for k in (0..i).rev() {
        if v[k] > top {
            break;
        }
        left = left.min(v[k]);
    }
    let mut right = top;
    for &val in &v[i + 1..] {
        if val > top {
            break;
        }
        right = right.min(val);
    }
    top - left.max(right)
}
