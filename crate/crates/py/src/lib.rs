//! Python bindings: build bases, evaluate norms, run estimators and suites.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use glab::constructions::{build_dem_nonucc, build_main_a, build_thm_a, dyadic_pairs, parse_host, DEFAULT_DIM_CAP};
use glab::estimators::{km_exact_hilbert, km_lower, ktilde_lower, phi_lower, quasi_greedy_lower, SearchOptions, WitnessFamily};
use glab::io::{load_basis, save_basis};
use glab::suite::{run_suite as run, ExperimentConfig};

fn err(e: glab::Error) -> PyErr {
    match e {
        glab::Error::Io(_) | glab::Error::Json(_) | glab::Error::Csv(_) | glab::Error::ResourceLimit(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

type Row = (String, f64, f64, String, String, u64);

fn row(r: glab::EstimateReport) -> Row {
    (r.quantity, r.scale, r.value, r.bound_kind.to_string(), r.witness, r.seed)
}

/// A finite basis together with the witness vectors attached at build time.
#[pyclass(module = "glab", frozen)]
struct Basis {
    inner: glab::Basis,
    witnesses: WitnessFamily,
}

#[pymethods]
impl Basis {
    #[staticmethod]
    #[pyo3(signature = (levels, host = "l2"))]
    fn thm_a(levels: usize, host: &str) -> PyResult<Self> {
        let h = parse_host(host, dyadic_pairs(levels).map_err(err)?.dim()).map_err(err)?;
        let t = build_thm_a(&h, None, levels, DEFAULT_DIM_CAP).map_err(err)?;
        Ok(Self { inner: t.basis().clone(), witnesses: t.witnesses })
    }

    #[staticmethod]
    #[pyo3(signature = (levels, host = "l2"))]
    fn main_a(levels: usize, host: &str) -> PyResult<Self> {
        let h = parse_host(host, dyadic_pairs(levels).map_err(err)?.dim()).map_err(err)?;
        let a = build_main_a(&h, levels, DEFAULT_DIM_CAP).map_err(err)?;
        let witnesses = a.qg_witnesses();
        Ok(Self { inner: a.basis, witnesses })
    }

    #[staticmethod]
    #[pyo3(signature = (max_pair, host = "l2"))]
    fn dem_nonucc(max_pair: usize, host: &str) -> PyResult<Self> {
        let dim = (2..=max_pair).map(|n| 2 * n).sum::<usize>();
        let d = build_dem_nonucc(&parse_host(host, dim).map_err(err)?, max_pair, DEFAULT_DIM_CAP).map_err(err)?;
        Ok(Self { inner: d.basis().clone(), witnesses: WitnessFamily::empty() })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: load_basis(&path).map_err(err)?, witnesses: WitnessFamily::empty() })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_basis(&self.inner, &path).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn num_witnesses(&self) -> usize {
        self.witnesses.len()
    }

    /// `‖Σ c_n x_n‖`.
    fn coeff_norm(&self, coeffs: Vec<f64>) -> PyResult<f64> {
        self.inner.coeff_norm(&coeffs).map_err(err)
    }

    /// Coefficients of `G_m f` for the vector with coefficients `coeffs`.
    fn tga(&self, coeffs: Vec<f64>, m: usize) -> PyResult<Vec<f64>> {
        let f = self.inner.synthesize(&coeffs).map_err(err)?;
        let g = self.inner.tga(&f, m).map_err(err)?;
        self.inner.analyze(&g).map_err(err)
    }

    /// Exact `k_m` for a Euclidean ambient space, otherwise a search lower bound.
    #[pyo3(signature = (m, trials = 200, seed = 42))]
    fn km(&self, m: usize, trials: usize, seed: u64) -> PyResult<Row> {
        let r = if self.inner.space().is_euclidean() {
            km_exact_hilbert(&self.inner, m, None)
        } else {
            km_lower(&self.inner, m, &self.witnesses, &SearchOptions::new(trials, seed))
        };
        r.map(row).map_err(err)
    }

    #[pyo3(signature = (m, trials = 200, seed = 42))]
    fn ktilde(&self, m: usize, trials: usize, seed: u64) -> PyResult<Row> {
        ktilde_lower(&self.inner, m, &self.witnesses, &SearchOptions::new(trials, seed))
            .map(row)
            .map_err(err)
    }

    fn quasi_greedy(&self) -> PyResult<Row> {
        quasi_greedy_lower(&self.inner, &self.witnesses).map(|q| row(q.report)).map_err(err)
    }

    #[pyo3(signature = (a, trials = 200, seed = 42))]
    fn phi(&self, a: f64, trials: usize, seed: u64) -> PyResult<Row> {
        phi_lower(&self.inner, a, &self.witnesses, trials, seed).map(row).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Basis(dim={}, witnesses={})", self.inner.dim(), self.witnesses.len())
    }
}

/// Norm of `f` under a host descriptor such as `l2`, `lp:3` or `lorentz-harmonic:1`.
#[pyfunction]
fn seq_norm(host: &str, f: Vec<f64>) -> PyResult<f64> {
    parse_host(host, f.len()).map_err(err)?.norm_eval(&f).map_err(err)
}

/// Runs a named suite; returns `(passed, [(criterion, check, passed, detail)], rows)`.
#[pyfunction]
#[pyo3(signature = (suite, levels = None, seed = 42, trials = None))]
#[allow(clippy::type_complexity)]
fn run_suite(
    py: Python<'_>,
    suite: &str,
    levels: Option<usize>,
    seed: u64,
    trials: Option<usize>,
) -> PyResult<(bool, Vec<(u8, String, bool, String)>, Vec<Row>)> {
    let mut cfg = ExperimentConfig::new(suite.parse().map_err(err)?);
    cfg.levels = levels;
    cfg.seed = seed;
    cfg.trials = trials;
    let r = py.detach(|| run(&cfg)).map_err(err)?;
    let passed = r.passed();
    let verdicts = r
        .verdicts
        .into_iter()
        .map(|v| (v.criterion, v.check, v.passed, v.detail))
        .collect();
    Ok((passed, verdicts, r.rows.into_iter().map(row).collect()))
}

#[pymodule]
#[pyo3(name = "glab")]
fn glab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Basis>()?;
    m.add_function(wrap_pyfunction!(seq_norm, m)?)?;
    m.add_function(wrap_pyfunction!(run_suite, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
