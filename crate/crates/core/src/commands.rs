//! Command implementations behind the `mpcs` binary.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::basis::{self, DressedBasis, OperatorKind};
use crate::config::RunConfig;
use crate::ensemble::{self, PointModel, PointValues};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, ONE};
use crate::output;
use crate::params::SystemParams;
use crate::pathway::{self, EstimatorSettings};
use crate::steady::{self, SteadySolver};
use crate::superop;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    Surface,
    Background,
    Table1,
    Validate,
}

/// Exit status for an error: 1 for configuration, 2 for solver failures, 3 for validation.
pub fn exit_code(err: &Error) -> i32 {
    match err.root() {
        Error::Validation(_) => 3,
        Error::SolverFailure { .. }
        | Error::Singular { .. }
        | Error::PositivityViolation { .. }
        | Error::StepTooLarge { .. }
        | Error::IncompleteCycle { .. }
        | Error::TraceDrift { .. } => 2,
        _ => 1,
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

pub fn run(command: Command, cfg: &RunConfig, out_dir: &Path) -> Result<Outcome> {
    std::fs::create_dir_all(out_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| match command {
        Command::Spectrum => spectrum(cfg, out_dir),
        Command::Surface => surface(cfg, out_dir),
        Command::Background => background(cfg, out_dir),
        Command::Table1 => table1(cfg, out_dir),
        Command::Validate => validate(cfg, out_dir),
    })
}

pub const SPECTRUM_COLUMNS: [&str; 4] = ["delta3_tilde", "npcr", "rho00", "rho33pp"];

fn with_escalations(cfg: &RunConfig, count: usize) -> Vec<(String, String)> {
    let mut meta = cfg.metadata();
    meta.push(("escalated_solves".into(), count.to_string()));
    meta
}

fn spectrum_rows(s: &ensemble::Spectrum) -> Vec<Vec<f64>> {
    (0..s.len()).map(|i| vec![s.delta_tilde[i], s.npcr[i], s.rho00[i], s.rho33pp[i]]).collect()
}

pub fn render_spectrum(cfg: &RunConfig) -> Result<String> {
    let dist = cfg.coupling_distribution()?;
    let s = ensemble::average_spectrum(&cfg.params, &dist, &cfg.delta_grid, cfg.q, cfg.q_max())?;
    Ok(output::render_csv(&with_escalations(cfg, s.escalated), &SPECTRUM_COLUMNS, &spectrum_rows(&s)))
}

fn spectrum(cfg: &RunConfig, out_dir: &Path) -> Result<Outcome> {
    let dist = cfg.coupling_distribution()?;
    let s = ensemble::average_spectrum(&cfg.params, &dist, &cfg.delta_grid, cfg.q, cfg.q_max())?;
    let path = out_dir.join("spectrum.csv");
    output::write_csv(&path, &with_escalations(cfg, s.escalated), &SPECTRUM_COLUMNS, &spectrum_rows(&s))?;
    let peak = s.npcr.iter().cloned().fold(0.0, f64::max);
    Ok(Outcome { summary: format!("{} points, max npcr {peak:.3e}", s.len()), files: vec![path] })
}

fn surface(cfg: &RunConfig, out_dir: &Path) -> Result<Outcome> {
    let s = ensemble::surface(&cfg.params, &cfg.g_tilde_grid, &cfg.delta_grid, cfg.q, cfg.q_max())?;
    let mut rows = Vec::new();
    for (i, gt) in s.g_tilde.iter().enumerate() {
        for (j, d) in s.delta_tilde.iter().enumerate() {
            rows.push(vec![*gt, *d, s.npcr[i][j], s.rho00[i][j], s.rho33pp[i][j]]);
        }
    }
    let path = out_dir.join("surface.csv");
    output::write_csv(&path, &with_escalations(cfg, s.escalated), &["g_tilde", "delta3_tilde", "npcr", "rho00", "rho33pp"], &rows)?;
    Ok(Outcome { summary: format!("{} x {} surface", s.g_tilde.len(), s.delta_tilde.len()), files: vec![path] })
}

pub const BACKGROUND_COLUMNS: [&str; 8] =
    ["delta3_tilde", "npcr", "rho00", "rho33pp", "npcr_e1_off", "npcr_e2_off", "npcr_e12_off", "delta3_npcr"];

fn background(cfg: &RunConfig, out_dir: &Path) -> Result<Outcome> {
    let dist = cfg.coupling_distribution()?;
    let b = ensemble::background_subtracted(&cfg.params, &dist, &cfg.delta_grid, cfg.q, cfg.q_max())?;
    let rows: Vec<Vec<f64>> = (0..b.delta.len())
        .map(|i| {
            vec![
                b.all_on.delta_tilde[i],
                b.all_on.npcr[i],
                b.all_on.rho00[i],
                b.all_on.rho33pp[i],
                b.first_off.npcr[i],
                b.second_off.npcr[i],
                b.both_off.npcr[i],
                b.delta[i],
            ]
        })
        .collect();
    let path = out_dir.join("background.csv");
    let escalated = b.all_on.escalated + b.first_off.escalated + b.second_off.escalated + b.both_off.escalated;
    output::write_csv(&path, &with_escalations(cfg, escalated), &BACKGROUND_COLUMNS, &rows)?;
    Ok(Outcome { summary: format!("{} points, {} coupling nodes", rows.len(), dist.len()), files: vec![path] })
}

/// One reference point: `(g_tilde, delta3_tilde, cutoff, solver value, estimate)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TableRow {
    pub g_tilde: f64,
    pub delta3_tilde: f64,
    pub cutoff: usize,
    pub reference_solver: f64,
    pub reference_estimate: f64,
}

/// Reference peak heights for the three-tone setup.
pub fn table1_rows() -> [TableRow; 6] {
    let s2 = std::f64::consts::SQRT_2;
    let s3 = 3f64.sqrt();
    let row = |g_tilde, delta3_tilde, cutoff, reference_solver, reference_estimate| TableRow {
        g_tilde,
        delta3_tilde,
        cutoff,
        reference_solver,
        reference_estimate,
    };
    [
        row(s2 - 1.0, (s2 - 1.0) * (s2 - 1.0), 1, 1.2e-3, 3.1e-3),
        row(1.0, 1.0, 1, 1.7e-3, 1.7e-3),
        row(1.0, s3 - s2, 1, 1.5e-3, 2.6e-3),
        row(1.0, -1.0, 1, 2.4e-4, 2.1e-4),
        row(1.0, -(s2 + 1.0), 1, 3.3e-4, 3.3e-4),
        row(1.0, -(s3 + s2), 2, 1.3e-3, 2.1e-3),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TableResult {
    pub row: TableRow,
    pub solver: f64,
    pub estimate: f64,
}

impl TableResult {
    pub fn ratio(&self) -> f64 {
        self.estimate / self.solver
    }
}

pub fn compute_table1(p: &SystemParams, q: usize, estimator: &EstimatorSettings) -> Result<Vec<TableResult>> {
    use rayon::prelude::*;
    let solver = SteadySolver::new(p, q)?;
    table1_rows()
        .par_iter()
        .map(|row| {
            let g = row.g_tilde * p.g_f;
            let sol = solver.evaluate(g, row.delta3_tilde)?;
            let settings = EstimatorSettings { cutoff: row.cutoff, ..*estimator };
            let est = pathway::estimate_point(g, &p.with_scan_delta(row.delta3_tilde), &settings)?;
            Ok(TableResult { row: *row, solver: sol.npcr, estimate: est.npcr })
        })
        .collect()
}

fn table1(cfg: &RunConfig, out_dir: &Path) -> Result<Outcome> {
    let results = compute_table1(&cfg.params, cfg.q, &cfg.estimator)?;
    let rows: Vec<Vec<f64>> = results
        .iter()
        .map(|r| {
            vec![
                r.row.g_tilde,
                r.row.delta3_tilde,
                r.row.cutoff as f64,
                r.solver,
                r.estimate,
                r.ratio(),
                r.row.reference_solver,
                r.row.reference_estimate,
            ]
        })
        .collect();
    let path = out_dir.join("table1.csv");
    let columns = ["g_tilde", "delta3_tilde", "cutoff", "solver", "estimate", "ratio", "reference_solver", "reference_estimate"];
    output::write_csv(&path, &cfg.metadata(), &columns, &rows)?;
    let mut summary = String::from("g_tilde   delta3_tilde  L  solver     estimate   ratio\n");
    for r in &results {
        summary.push_str(&format!(
            "{:8.4}  {:12.4}  {}  {:.3e}  {:.3e}  {:.2}\n",
            r.row.g_tilde,
            r.row.delta3_tilde,
            r.row.cutoff,
            r.solver,
            r.estimate,
            r.ratio()
        ));
    }
    Ok(Outcome { summary, files: vec![path] })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check { name: name.to_string(), passed, detail }
}

/// Deterministic pseudo-random Hermitian matrix with unit trace.
fn test_state(d: usize, seed: usize) -> CMat {
    let x = CMat::from_fn(d, d, |i, j| {
        let t = (seed * 131 + i * 17 + j * 29) as f64;
        C64::new((t * 0.37).sin(), (t * 0.73).cos())
    });
    let h = linalg::hermitian_part(&x);
    let tr = linalg::trace(&h);
    if tr.norm() > 1e-3 {
        linalg::scale(&h, ONE / tr)
    } else {
        h
    }
}

/// Fast invariant suite shared by `validate` and the test harness.
pub fn validation_checks(cfg: &RunConfig) -> Result<Vec<Check>> {
    let p = &cfg.params;
    let mut checks = Vec::new();

    let b = DressedBasis::new(p.n_couplets)?;
    let coupling = basis::op_matrix(OperatorKind::Coupling, &b).matrix;
    let anti = linalg::max_abs_diff(&coupling, &linalg::scale(&linalg::adjoint(&coupling), -ONE));
    let a = basis::op_matrix(OperatorKind::Annihilation, &b).matrix;
    let ad = linalg::adjoint(&a);
    let comm = &a * &ad - &ad * &a;
    let inner = b.dim() - 2;
    let mut ccr = 0.0f64;
    for i in 0..inner {
        for j in 0..inner {
            let want = if i == j { 1.0 } else { 0.0 };
            ccr = ccr.max((comm[(i, j)] - C64::new(want, 0.0)).norm());
        }
    }
    let unit = b.unitarity_error();
    checks.push(check(
        "operator algebra",
        anti == 0.0 && ccr <= 1e-12 && unit <= 1e-12,
        format!("|A + A^dag| = {anti:.1e}, [a, a^dag] error {ccr:.1e}, unitarity {unit:.1e}"),
    ));

    let q_op = superop::assemble_q(p.g_f, p, &b);
    let worst = (0..20).map(|s| linalg::trace(&q_op.apply(&test_state(b.dim(), s))).norm()).fold(0.0, f64::max);
    checks.push(check("Q preserves trace", worst <= 1e-12, format!("max |Tr(Q rho)| = {worst:.1e}")));

    let solver = SteadySolver::new(p, cfg.q)?;
    let mut worst = [0.0f64; 4];
    for (gt, d3) in [(1.0, 1.0), (1.0, -1.0), (0.5, 0.3)] {
        let sol = solver.solve_scan(gt * p.g_f, d3)?;
        worst[0] = worst[0].max((linalg::trace(sol.rho0()) - ONE).norm());
        for k in sol.indices().indices() {
            let rk = sol.block(k).unwrap();
            let neg: Vec<i32> = k.iter().map(|x| -x).collect();
            if k.iter().any(|&x| x != 0) {
                worst[1] = worst[1].max(linalg::trace(rk).norm());
            }
            worst[2] = worst[2].max(linalg::max_abs_diff(sol.block(&neg).unwrap(), &linalg::adjoint(rk)));
        }
        worst[3] = worst[3].max(sol.residual);
    }
    checks.push(check("trace constraint", worst[0] <= 1e-12, format!("|Tr rho_0 - 1| = {:.1e}", worst[0])));
    checks.push(check("harmonics traceless", worst[1] <= 1e-10, format!("max |Tr rho_k| = {:.1e}", worst[1])));
    checks.push(check("conjugate harmonics", worst[2] <= 1e-10, format!("max |rho_-k - rho_k^dag| = {:.1e}", worst[2])));
    checks.push(check(
        "system residual",
        worst[3] <= steady::RESIDUAL_THRESHOLD,
        format!("max relative residual {:.1e}", worst[3]),
    ));

    struct ThirdOnly(f64);
    impl PointModel for ThirdOnly {
        fn evaluate(&self, g: f64, d: f64) -> Result<PointValues> {
            Ok(PointValues { npcr: self.0 * (1.0 + (g * d).cos()), ..Default::default() })
        }
    }
    let dist = ensemble::CouplingDistribution::tabulated(vec![(0.5 * p.g_f, 0.5), (p.g_f, 0.5)])?;
    let grid: Vec<f64> = (0..9).map(|i| -4.0 + 0.75 * i as f64).collect();
    let bg = ensemble::background_with(p, &dist, &grid, |v| Ok(ThirdOnly(*v.amps.last().unwrap())))?;
    let worst = bg.delta.iter().map(|x| x.abs()).fold(0.0, f64::max);
    checks.push(check("background telescoping", worst == 0.0, format!("max |delta| = {worst:.1e}")));

    let small = RunConfig {
        delta_grid: crate::grid::Grid::new(-1.0, 1.0, 0.25)?,
        distribution: crate::config::DistributionSpec::Delta,
        workers: None,
        ..cfg.clone()
    };
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| Error::Config(e.to_string()))?;
    let first = one.install(|| render_spectrum(&small))?;
    let second = render_spectrum(&small)?;
    checks.push(check("deterministic output", first == second, format!("{} bytes compared", first.len())));
    Ok(checks)
}

fn validate(cfg: &RunConfig, out_dir: &Path) -> Result<Outcome> {
    let checks = validation_checks(cfg)?;
    let path = out_dir.join("validation.json");
    output::write_json(&path, &checks)?;
    let mut summary = String::new();
    for c in &checks {
        summary.push_str(&format!("{} {}: {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail));
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if !failed.is_empty() {
        print!("{summary}");
        return Err(Error::Validation(failed.join(", ")));
    }
    Ok(Outcome { summary, files: vec![path] })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 1);
        assert_eq!(exit_code(&Error::InvalidParams("x".into())), 1);
        let wrapped = Error::AtPoint { g: 1.0, delta_tilde: 0.0, source: Box::new(Error::Singular { g: 1.0 }) };
        assert_eq!(exit_code(&wrapped), 2);
        assert_eq!(exit_code(&Error::Validation("x".into())), 3);
    }

    #[test]
    fn test_states_are_normalised() {
        for s in 0..5 {
            let rho = test_state(9, s);
            assert!((linalg::trace(&rho) - ONE).norm() < 1e-12);
        }
    }
}
