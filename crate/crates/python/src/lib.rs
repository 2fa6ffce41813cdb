//! Python bindings: parameters, steady-state solves, pathway estimates and spectra.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use mpcs_core::basis::{self, OperatorKind};
use mpcs_core::ensemble::{self, CouplingDistribution};
use mpcs_core::grid::Grid;
use mpcs_core::pathway::{self, EstimatorSettings};
use mpcs_core::steady;
use mpcs_core::{commands, linalg, Error};

fn to_py_err(e: Error) -> PyErr {
    if e.is_solver_failure() || matches!(e.root(), Error::IncompleteCycle { .. } | Error::StepTooLarge { .. }) {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn nested(m: &linalg::CMat) -> Vec<Vec<Complex64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

/// Physical rates and drive tones, in units of the cavity decay.
#[pyclass(name = "SystemParams", module = "mpcs", from_py_object)]
#[derive(Clone)]
struct PySystemParams {
    inner: mpcs_core::SystemParams,
}

#[pymethods]
impl PySystemParams {
    #[new]
    #[pyo3(signature = (g_f=63.0, kappa=1.0, gamma_i=1.0, amps=None, deltas_tilde=None, n_couplets=None))]
    fn new(
        g_f: f64,
        kappa: f64,
        gamma_i: f64,
        amps: Option<Vec<f64>>,
        deltas_tilde: Option<Vec<f64>>,
        n_couplets: Option<usize>,
    ) -> PyResult<Self> {
        let mut p = mpcs_core::SystemParams { g_f, kappa, gamma_i, ..Default::default() };
        if let Some(a) = amps {
            p.order = a.len();
            p.n_couplets = a.len() + 1;
            p.amps = a;
        }
        if let Some(d) = deltas_tilde {
            p.deltas_tilde = d;
        }
        if let Some(n) = n_couplets {
            p.n_couplets = n;
        }
        p.validate().map_err(to_py_err)?;
        Ok(Self { inner: p })
    }

    #[getter]
    fn g_f(&self) -> f64 {
        self.inner.g_f
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa
    }

    #[getter]
    fn gamma_i(&self) -> f64 {
        self.inner.gamma_i
    }

    #[getter]
    fn order(&self) -> usize {
        self.inner.order
    }

    #[getter]
    fn amps(&self) -> Vec<f64> {
        self.inner.amps.clone()
    }

    #[getter]
    fn deltas_tilde(&self) -> Vec<f64> {
        self.inner.deltas_tilde.clone()
    }

    #[getter]
    fn n_couplets(&self) -> usize {
        self.inner.n_couplets
    }

    fn with_scan_delta(&self, delta_tilde: f64) -> Self {
        Self { inner: self.inner.with_scan_delta(delta_tilde) }
    }

    fn with_amps(&self, amps: Vec<f64>) -> PyResult<Self> {
        let p = self.inner.with_amps(&amps);
        p.validate().map_err(to_py_err)?;
        Ok(Self { inner: p })
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "SystemParams(g_f={}, kappa={}, gamma_i={}, amps={:?}, deltas_tilde={:?}, n_couplets={})",
            p.g_f, p.kappa, p.gamma_i, p.amps, p.deltas_tilde, p.n_couplets
        )
    }
}

/// Truncated dressed basis `[|0), |1)+, |1)-, ...]`.
#[pyclass(name = "DressedBasis", module = "mpcs")]
struct PyDressedBasis {
    inner: basis::DressedBasis,
}

#[pymethods]
impl PyDressedBasis {
    #[new]
    fn new(n_couplets: usize) -> PyResult<Self> {
        Ok(Self { inner: basis::build_basis(n_couplets).map_err(to_py_err)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn labels(&self) -> Vec<String> {
        self.inner.states().iter().map(|s| s.to_string()).collect()
    }

    /// Operator matrix; `kind` is one of a, adag, sigma_plus, sigma_minus, sigma_z, number, coupling.
    fn operator(&self, kind: &str) -> PyResult<Vec<Vec<Complex64>>> {
        let kind = match kind {
            "a" => OperatorKind::Annihilation,
            "adag" => OperatorKind::Creation,
            "sigma_plus" => OperatorKind::SigmaPlus,
            "sigma_minus" => OperatorKind::SigmaMinus,
            "sigma_z" => OperatorKind::SigmaZ,
            "number" => OperatorKind::ExcitationNumber,
            "coupling" => OperatorKind::Coupling,
            other => return Err(PyValueError::new_err(format!("unknown operator {other:?}"))),
        };
        Ok(nested(&basis::op_matrix(kind, &self.inner).matrix))
    }
}

/// Steady-state harmonic solution at one coupling.
#[pyclass(name = "BlochSolution", module = "mpcs")]
struct PyBlochSolution {
    inner: steady::BlochSolution,
}

#[pymethods]
impl PyBlochSolution {
    #[getter]
    fn g(&self) -> f64 {
        self.inner.g
    }

    #[getter]
    fn q(&self) -> usize {
        self.inner.q
    }

    #[getter]
    fn residual(&self) -> f64 {
        self.inner.residual
    }

    #[getter]
    fn equations(&self) -> usize {
        self.inner.equations
    }

    #[getter]
    fn min_eigenvalue(&self) -> f64 {
        self.inner.min_eigenvalue
    }

    fn npcr(&self) -> PyResult<f64> {
        self.inner.npcr().map_err(to_py_err)
    }

    fn rho00(&self) -> f64 {
        self.inner.rho00()
    }

    fn rho33pp(&self) -> f64 {
        self.inner.rho33pp()
    }

    fn rho0(&self) -> Vec<Vec<Complex64>> {
        nested(self.inner.rho0())
    }

    /// Harmonic component for index vector `k`, or None outside the truncation.
    fn block(&self, k: Vec<i32>) -> Option<Vec<Vec<Complex64>>> {
        self.inner.block(&k).map(nested)
    }
}

#[pyfunction]
#[pyo3(signature = (params, g, q=1))]
fn solve_steady(params: &PySystemParams, g: f64, q: usize) -> PyResult<PyBlochSolution> {
    Ok(PyBlochSolution { inner: steady::solve_steady(g, &params.inner, q).map_err(to_py_err)? })
}

#[pyfunction]
fn bloch_index_count(order: usize, q: usize) -> usize {
    steady::bloch_indices(order, q).len()
}

/// Pathway estimate of the N-photon count rate at coupling `g`.
#[pyfunction]
#[pyo3(signature = (params, g, cutoff=1, duration=80.0))]
fn estimate_npcr(params: &PySystemParams, g: f64, cutoff: usize, duration: f64) -> PyResult<f64> {
    let settings = EstimatorSettings { cutoff, duration, dt: None };
    Ok(pathway::estimate_point(g, &params.inner, &settings).map_err(to_py_err)?.npcr)
}

#[pyfunction]
fn two_state_rho00(e: f64, kappa: f64, gamma_i: f64) -> f64 {
    pathway::two_state_rho00(e, kappa, gamma_i)
}

fn distribution(params: &mpcs_core::SystemParams, nodes: Option<Vec<(f64, f64)>>) -> PyResult<CouplingDistribution> {
    match nodes {
        None => Ok(ensemble::pg_delta(params.g_f)),
        Some(n) => CouplingDistribution::tabulated(n).map_err(to_py_err),
    }
}

/// Count-rate spectrum over `grid` ("lo:hi:step"), averaged over `(g, weight)` nodes.
#[pyfunction]
#[pyo3(signature = (params, grid, nodes=None, q=1, q_max=None))]
fn spectrum<'py>(
    py: Python<'py>,
    params: &PySystemParams,
    grid: &str,
    nodes: Option<Vec<(f64, f64)>>,
    q: usize,
    q_max: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let q_max = q_max.unwrap_or(q.max(steady::DEFAULT_Q_MAX));
    let grid: Grid = grid.parse().map_err(to_py_err)?;
    let dist = distribution(&params.inner, nodes)?;
    let p = params.inner.clone();
    let s = py.detach(move || ensemble::average_spectrum(&p, &dist, &grid, q, q_max)).map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("delta3_tilde", s.delta_tilde)?;
    out.set_item("npcr", s.npcr)?;
    out.set_item("rho00", s.rho00)?;
    out.set_item("rho33pp", s.rho33pp)?;
    out.set_item("escalated", s.escalated)?;
    Ok(out)
}

/// Four-run background subtraction; returns the per-run count rates and their combination.
#[pyfunction]
#[pyo3(signature = (params, grid, nodes=None, q=1, q_max=None))]
fn background<'py>(
    py: Python<'py>,
    params: &PySystemParams,
    grid: &str,
    nodes: Option<Vec<(f64, f64)>>,
    q: usize,
    q_max: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let q_max = q_max.unwrap_or(q.max(steady::DEFAULT_Q_MAX));
    let grid: Grid = grid.parse().map_err(to_py_err)?;
    let dist = distribution(&params.inner, nodes)?;
    let p = params.inner.clone();
    let b = py.detach(move || ensemble::background_subtracted(&p, &dist, &grid, q, q_max)).map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("delta3_tilde", b.all_on.delta_tilde)?;
    out.set_item("npcr", b.all_on.npcr)?;
    out.set_item("npcr_e1_off", b.first_off.npcr)?;
    out.set_item("npcr_e2_off", b.second_off.npcr)?;
    out.set_item("npcr_e12_off", b.both_off.npcr)?;
    out.set_item("delta3_npcr", b.delta)?;
    Ok(out)
}

/// Reference rows: list of dicts with solver value, estimate and their ratio.
#[pyfunction]
#[pyo3(signature = (params=None, q=1))]
fn table1<'py>(py: Python<'py>, params: Option<&PySystemParams>, q: usize) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let p = params.map(|p| p.inner.clone()).unwrap_or_default();
    let rows = py
        .detach(move || commands::compute_table1(&p, q, &EstimatorSettings::default()))
        .map_err(to_py_err)?;
    rows.into_iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("g_tilde", r.row.g_tilde)?;
            d.set_item("delta3_tilde", r.row.delta3_tilde)?;
            d.set_item("cutoff", r.row.cutoff)?;
            d.set_item("solver", r.solver)?;
            d.set_item("estimate", r.estimate)?;
            d.set_item("ratio", r.ratio())?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn mpcs(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystemParams>()?;
    m.add_class::<PyDressedBasis>()?;
    m.add_class::<PyBlochSolution>()?;
    m.add_function(wrap_pyfunction!(solve_steady, m)?)?;
    m.add_function(wrap_pyfunction!(bloch_index_count, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_npcr, m)?)?;
    m.add_function(wrap_pyfunction!(two_state_rho00, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(background, m)?)?;
    m.add_function(wrap_pyfunction!(table1, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_preserves_layout() {
        let b = basis::build_basis(1).unwrap();
        let a = nested(&basis::op_matrix(OperatorKind::Annihilation, &b).matrix);
        assert_eq!(a.len(), 3);
        assert!((a[0][1].re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((a[0][2].re + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }
}
