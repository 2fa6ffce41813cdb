//! TOML run configuration.
//!
//! Rates are in units of the cavity decay and detunings in units of `g_f`.
//! Every key is optional; an empty document gives the three-tone defaults.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::ensemble::{self, CouplingDistribution, Tem00Mask};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::params::SystemParams;
use crate::pathway::EstimatorSettings;
use crate::steady::DEFAULT_Q_MAX;

pub const DEFAULT_DELTA_GRID: &str = "-4:2:0.02";
pub const DEFAULT_G_TILDE_GRID: &str = "0.05:1.25:0.02";

#[derive(Debug, Clone, PartialEq)]
pub enum DistributionSpec {
    Delta,
    Tem00,
    Table(PathBuf),
}

impl FromStr for DistributionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delta" => Ok(Self::Delta),
            "tem00" => Ok(Self::Tem00),
            _ => match s.strip_prefix("table:") {
                Some(path) if !path.is_empty() => Ok(Self::Table(PathBuf::from(path))),
                _ => Err(Error::Config(format!("distribution must be delta, tem00 or table:PATH (got {s:?})"))),
            },
        }
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Delta => write!(f, "delta"),
            Self::Tem00 => write!(f, "tem00"),
            Self::Table(p) => write!(f, "table:{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: SystemParams,
    pub q: usize,
    /// Ceiling for per-point truncation escalation; `None` means `max(q, 4)`.
    pub q_max: Option<usize>,
    pub delta_grid: Grid,
    pub g_tilde_grid: Grid,
    pub distribution: DistributionSpec,
    pub g_max_ratio: f64,
    pub mask: Tem00Mask,
    pub node_count: usize,
    pub estimator: EstimatorSettings,
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: SystemParams::default(),
            q: 1,
            q_max: None,
            delta_grid: DEFAULT_DELTA_GRID.parse().unwrap(),
            g_tilde_grid: DEFAULT_G_TILDE_GRID.parse().unwrap(),
            distribution: DistributionSpec::Delta,
            g_max_ratio: 1.25,
            mask: Tem00Mask::default(),
            node_count: 24,
            estimator: EstimatorSettings::default(),
            workers: None,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    g_f: Option<f64>,
    #[serde(rename = "gamma_I")]
    gamma_i: Option<f64>,
    kappa: Option<f64>,
    order: Option<usize>,
    amps: Option<Vec<f64>>,
    deltas_tilde: Option<Vec<f64>>,
    n_couplets: Option<usize>,
    q: Option<usize>,
    q_max: Option<usize>,
    delta_grid: Option<String>,
    g_tilde_grid: Option<String>,
    distribution: Option<String>,
    g_max_ratio: Option<f64>,
    mask_half_x: Option<f64>,
    mask_half_y: Option<f64>,
    mask_waist: Option<f64>,
    mask_wavelength: Option<f64>,
    mask_samples: Option<usize>,
    node_count: Option<usize>,
    estimator_cutoff: Option<usize>,
    estimator_duration: Option<f64>,
    estimator_dt: Option<f64>,
    workers: Option<usize>,
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let mut cfg = RunConfig::default();
    let p = &mut cfg.params;

    if let Some(n) = raw.order {
        if n != p.order && (raw.amps.is_none() || raw.deltas_tilde.is_none()) {
            return Err(Error::Config(format!("order = {n} needs explicit amps and deltas_tilde")));
        }
        p.order = n;
        p.n_couplets = n + 1;
    }
    if let Some(v) = raw.g_f {
        p.g_f = v;
    }
    if let Some(v) = raw.gamma_i {
        p.gamma_i = v;
    }
    if let Some(v) = raw.kappa {
        p.kappa = v;
    }
    if let Some(v) = raw.amps {
        p.amps = v;
    }
    if let Some(v) = raw.deltas_tilde {
        p.deltas_tilde = v;
    }
    if let Some(v) = raw.n_couplets {
        p.n_couplets = v;
    }
    p.validate().map_err(|e| Error::Config(e.to_string()))?;

    if let Some(v) = raw.q {
        cfg.q = v;
    }
    if let Some(v) = raw.q_max {
        if v < cfg.q {
            return Err(Error::Config(format!("q_max ({v}) must be >= q ({})", cfg.q)));
        }
        cfg.q_max = Some(v);
    }
    let grid = |key: &str, s: String| s.parse::<Grid>().map_err(|e| Error::Config(format!("{key}: {e}")));
    if let Some(s) = raw.delta_grid {
        cfg.delta_grid = grid("delta_grid", s)?;
    }
    if let Some(s) = raw.g_tilde_grid {
        cfg.g_tilde_grid = grid("g_tilde_grid", s)?;
    }
    if let Some(s) = raw.distribution {
        cfg.distribution = s.parse()?;
    }
    if let Some(v) = raw.g_max_ratio {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Config(format!("g_max_ratio must be > 0 (got {v})")));
        }
        cfg.g_max_ratio = v;
    }
    let m = &mut cfg.mask;
    m.half_x = raw.mask_half_x.unwrap_or(m.half_x);
    m.half_y = raw.mask_half_y.unwrap_or(m.half_y);
    m.waist = raw.mask_waist.unwrap_or(m.waist);
    m.wavelength = raw.mask_wavelength.unwrap_or(m.wavelength);
    m.samples = raw.mask_samples.unwrap_or(m.samples);
    if let Some(v) = raw.node_count {
        if v == 0 {
            return Err(Error::Config("node_count must be >= 1".into()));
        }
        cfg.node_count = v;
    }
    let e = &mut cfg.estimator;
    e.cutoff = raw.estimator_cutoff.unwrap_or(e.cutoff);
    if let Some(v) = raw.estimator_duration {
        if !(v > 0.0) {
            return Err(Error::Config(format!("estimator_duration must be > 0 (got {v})")));
        }
        e.duration = v;
    }
    if let Some(v) = raw.estimator_dt {
        if !(v > 0.0) {
            return Err(Error::Config(format!("estimator_dt must be > 0 (got {v})")));
        }
        e.dt = Some(v);
    }
    if let Some(v) = raw.workers {
        if v == 0 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        cfg.workers = Some(v);
    }
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

impl RunConfig {
    pub fn coupling_distribution(&self) -> Result<CouplingDistribution> {
        match &self.distribution {
            DistributionSpec::Delta => Ok(ensemble::pg_delta(self.params.g_f)),
            DistributionSpec::Tem00 => ensemble::pg_tem00(self.g_max_ratio * self.params.g_f, &self.mask, self.node_count),
            DistributionSpec::Table(path) => CouplingDistribution::from_csv(path),
        }
    }

    pub fn q_max(&self) -> usize {
        self.q_max.unwrap_or(self.q.max(DEFAULT_Q_MAX))
    }

    /// Key/value pairs echoed into every output header.
    pub fn metadata(&self) -> Vec<(String, String)> {
        let p = &self.params;
        let list = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(" ");
        let mut out = vec![
            ("version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
            ("units".into(), "rates in units of kappa; detunings in units of g_f".into()),
            ("g_f".into(), format!("{}", p.g_f)),
            ("kappa".into(), format!("{}", p.kappa)),
            ("gamma_I".into(), format!("{}", p.gamma_i)),
            ("order".into(), format!("{}", p.order)),
            ("amps".into(), list(&p.amps)),
            ("deltas_tilde".into(), list(&p.deltas_tilde)),
            ("n_couplets".into(), format!("{}", p.n_couplets)),
            ("q".into(), format!("{}", self.q)),
            ("q_max".into(), format!("{}", self.q_max())),
            ("estimator_cutoff".into(), format!("{}", self.estimator.cutoff)),
            ("delta_grid".into(), self.delta_grid.to_string()),
            ("g_tilde_grid".into(), self.g_tilde_grid.to_string()),
            ("distribution".into(), self.distribution.to_string()),
        ];
        if self.distribution == DistributionSpec::Tem00 {
            let m = &self.mask;
            out.push(("g_max_ratio".into(), format!("{}", self.g_max_ratio)));
            out.push(("node_count".into(), format!("{}", self.node_count)));
            out.push((
                "mask".into(),
                format!("half_x={} half_y={} waist={} wavelength={} samples={}", m.half_x, m.half_y, m.waist, m.wavelength, m.samples),
            ));
        }
        out
    }
}
