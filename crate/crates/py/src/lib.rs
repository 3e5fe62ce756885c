//! Python bindings for eesmr-lab.
//!
//! ```python
//! import eesmr_lab
//!
//! sc = eesmr_lab.Scenario.ring(7, seed=3)
//! rep = eesmr_lab.run(sc)
//! assert rep.passed
//! ```

use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;

use ::eesmr_lab as core;
use core::energy::{self, CostTable, CryptoScheme, Fabric, KcastPricing, Medium, Protocol, Psi, Scope};
use core::hypergraph::{self as hg, TopologyKind};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn loads<'py>(py: Python<'py>, s: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (s,))
}

/// A simulation scenario.
#[pyclass(name = "Scenario", module = "eesmr_lab", skip_from_py_object)]
#[derive(Clone)]
pub struct PyScenario {
    inner: core::scenario::Scenario,
}

#[pymethods]
impl PyScenario {
    #[new]
    fn new(json: &str) -> PyResult<Self> {
        let inner = core::scenario::Scenario::from_json(json).map_err(value_err)?;
        Ok(PyScenario { inner })
    }

    /// Fault-free ring of `n` nodes with default parameters.
    #[staticmethod]
    #[pyo3(signature = (n, seed=0))]
    fn ring(n: usize, seed: u64) -> Self {
        PyScenario {
            inner: core::scenario::Scenario::ring(n, seed),
        }
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let inner = core::scenario::Scenario::load(std::path::Path::new(path)).map_err(value_err)?;
        Ok(PyScenario { inner })
    }

    /// Returns a copy with `key.path=value` overrides applied.
    fn with_overrides(&self, overrides: Vec<String>) -> PyResult<Self> {
        let inner = self.inner.with_overrides(&overrides).map_err(value_err)?;
        Ok(PyScenario { inner })
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map(|_| ()).map_err(value_err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn f(&self) -> usize {
        self.inner.fault_bound()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(n={}, f={}, adversary={:?}, seed={})",
            self.inner.n,
            self.inner.fault_bound(),
            self.inner.adversary.profile,
            self.inner.seed
        )
    }
}

/// Result of one run.
#[pyclass(name = "RunReport", module = "eesmr_lab")]
pub struct PyRunReport {
    inner: core::report::RunReport,
    trace: Vec<String>,
}

#[pymethods]
impl PyRunReport {
    #[getter]
    fn passed(&self) -> bool {
        self.inner.passed()
    }

    #[getter]
    fn committed(&self) -> Vec<usize> {
        self.inner.committed.clone()
    }

    #[getter]
    fn view_changes(&self) -> usize {
        self.inner.timing.view_changes
    }

    #[getter]
    fn max_view_change_deltas(&self) -> Option<f64> {
        self.inner.timing.max_view_change_deltas
    }

    #[getter]
    fn verdicts<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        loads(py, &serde_json::to_string(&self.inner.verdicts).map_err(value_err)?)
    }

    /// Per-node energy in mJ on `medium` ("ble", "wifi" or "4g").
    fn energy_mj(&self, medium: &str) -> PyResult<Vec<f64>> {
        let m: Medium = medium.parse().map_err(value_err)?;
        self.inner
            .energy
            .get(&m)
            .map(|e| e.per_node_mj.clone())
            .ok_or_else(|| PyKeyError::new_err(medium.to_string()))
    }

    /// Trace records as JSON lines; empty unless the scenario enabled tracing.
    #[getter]
    fn trace(&self) -> Vec<String> {
        self.trace.clone()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        loads(py, &self.inner.to_json())
    }

    fn __repr__(&self) -> String {
        format!(
            "RunReport(passed={}, stop={:?}, view_changes={})",
            self.inner.passed(),
            self.inner.stop,
            self.inner.timing.view_changes
        )
    }
}

/// Runs a scenario to completion. Releases the GIL while simulating.
#[pyfunction]
fn run(py: Python<'_>, scenario: &PyScenario) -> PyResult<PyRunReport> {
    let sc = scenario.inner.clone();
    let (rep, out) = py
        .detach(move || core::report::run_scenario(&sc))
        .map_err(value_err)?;
    Ok(PyRunReport {
        inner: rep,
        trace: out.trace.iter().map(|r| r.to_json_line()).collect(),
    })
}

/// A k-cast hypergraph.
#[pyclass(name = "Hypergraph", module = "eesmr_lab")]
pub struct PyHypergraph {
    inner: hg::Hypergraph,
}

#[pymethods]
impl PyHypergraph {
    #[staticmethod]
    fn ring(n: usize, k: usize) -> PyResult<Self> {
        let inner = hg::generate_topology(TopologyKind::RingKcast, n, k).map_err(value_err)?;
        Ok(PyHypergraph { inner })
    }

    #[staticmethod]
    fn complete(n: usize) -> PyResult<Self> {
        let inner = hg::generate_topology(TopologyKind::CompleteUnicast, n, 1).map_err(value_err)?;
        Ok(PyHypergraph { inner })
    }

    /// `edges` is a list of `(sender, [receivers])`.
    #[new]
    fn new(nodes: usize, edges: Vec<(u32, Vec<u32>)>) -> PyResult<Self> {
        let edges = edges.into_iter().map(|(s, r)| hg::Edge { s, r }).collect();
        let inner = hg::Hypergraph::new(nodes, edges).map_err(value_err)?;
        Ok(PyHypergraph { inner })
    }

    #[getter]
    fn nodes(&self) -> usize {
        self.inner.nodes
    }

    /// Returns `(certified, witness)`.
    fn certify(&self, f: usize) -> PyResult<(bool, Option<Vec<u32>>)> {
        let c = hg::certify_f_connectivity(&self.inner, f).map_err(value_err)?;
        Ok((c.certified, c.witness))
    }

    /// Necessary fault bound `min(d_out, d_in) - 1`.
    fn f_nec(&self) -> i64 {
        hg::necessary_condition(&hg::degree_profile(&self.inner)).f_nec
    }

    fn is_independent(&self) -> PyResult<bool> {
        Ok(hg::validate_independence(&self.inner).map_err(value_err)?.is_none())
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }
}

fn scope(s: &str) -> PyResult<Scope> {
    match s {
        "leader" => Ok(Scope::Leader),
        "node" => Ok(Scope::Node),
        "total" => Ok(Scope::Total),
        _ => Err(value_err(format!("unknown scope {s}"))),
    }
}

fn fabric(s: &str) -> PyResult<Fabric> {
    match s {
        "ring" => Ok(Fabric::Ring),
        "complete" => Ok(Fabric::Complete),
        _ => Err(value_err(format!("unknown fabric {s}"))),
    }
}

/// Evaluates an analytic model. Returns `(psi_b, psi_w, psi_v)` in joules.
#[pyfunction]
#[pyo3(signature = (protocol, n, f=None, k=None, m=16, medium="ble", crypto="rsa1024", fabric="ring", scope="leader"))]
#[allow(clippy::too_many_arguments)]
fn psi(
    protocol: &str,
    n: usize,
    f: Option<usize>,
    k: Option<usize>,
    m: usize,
    medium: &str,
    crypto: &str,
    fabric: &str,
    scope: &str,
) -> PyResult<(f64, f64, f64)> {
    let p: Protocol = protocol.parse().map_err(value_err)?;
    let f = f.unwrap_or(n.saturating_sub(1) / 2);
    let k = k.unwrap_or(f + 1);
    let table = CostTable::builtin();
    let medium: Medium = medium.parse().map_err(value_err)?;
    let crypto: CryptoScheme = crypto.parse().map_err(value_err)?;
    let x = energy::bind(energy::structure(n, f, k, m), &table, medium, crypto, KcastPricing::Reliable)
        .map_err(value_err)?;
    let r = energy::model(p, self::fabric(fabric)?, self::scope(scope)?)
        .eval(&x)
        .map_err(value_err)?;
    Ok((r.b, r.w, r.v))
}

/// Symbolic model expressions `(psi_b, psi_w, psi_v)` as strings.
#[pyfunction]
#[pyo3(signature = (protocol, fabric="ring", scope="leader"))]
fn psi_expr(protocol: &str, fabric: &str, scope: &str) -> PyResult<(String, String, String)> {
    let p: Protocol = protocol.parse().map_err(value_err)?;
    let mdl = energy::model(p, self::fabric(fabric)?, self::scope(scope)?);
    Ok((mdl.psi_b.to_string(), mdl.psi_w.to_string(), mdl.psi_v.to_string()))
}

fn triple(b: f64, v: f64) -> Psi {
    Psi { b, w: b + v, v }
}

/// View-change ratio at which protocol `a` stops beating `b`.
#[pyfunction]
fn nu_f_bound(a_b: f64, a_v: f64, b_b: f64, b_v: f64) -> PyResult<f64> {
    energy::nu_f_bound(&triple(a_b, a_v), &triple(b_b, b_v)).map_err(value_err)
}

/// Energy fault bound; `-1` means never favorable.
#[pyfunction]
fn f_e_bound(psi_b: f64, psi_v: f64, baseline: f64) -> PyResult<i64> {
    energy::f_e_bound(&triple(psi_b, psi_v), baseline).map_err(value_err)
}

#[pymodule]
fn eesmr_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PyRunReport>()?;
    m.add_class::<PyHypergraph>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(psi, m)?)?;
    m.add_function(wrap_pyfunction!(psi_expr, m)?)?;
    m.add_function(wrap_pyfunction!(nu_f_bound, m)?)?;
    m.add_function(wrap_pyfunction!(f_e_bound, m)?)?;
    Ok(())
}
