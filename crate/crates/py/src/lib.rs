//! Python bindings: build models, check CSL queries, run sweeps and the
//! bundled RAM experiments.

use std::collections::BTreeMap;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use ramcheck::csl::Checker;
use ramcheck::lang::ast::ModelAst;
use ramcheck::lang::{parse_model, parse_properties, parse_property, Bindings, Value};
use ramcheck::numerics::{steady_state, transient_distribution, NumericOptions};
use ramcheck::ram::{bundled_model, parse_sweep, run_experiment_sweep, Manifest, MANIFEST_NAMES};
use ramcheck::sim::{estimate_property, SimConfig};
use ramcheck::{build_state_space_with, BuildOptions, BuiltModel, Error};

create_exception!(ramcheck, RamcheckError, PyException, "Base class for ramcheck errors.");
create_exception!(ramcheck, ModelError, RamcheckError, "Model or property could not be parsed or built.");
create_exception!(ramcheck, NumericalError, RamcheckError, "A numerical method failed.");

fn to_py(e: Error) -> PyErr {
    match e.exit_code() {
        3 => NumericalError::new_err(e.to_string()),
        _ => ModelError::new_err(e.to_string()),
    }
}

fn bindings(consts: Option<BTreeMap<String, f64>>) -> Bindings {
    consts
        .unwrap_or_default()
        .into_iter()
        .map(|(k, v)| {
            let value = if v.fract() == 0.0 && v.abs() < 1e15 {
                Value::Int(v as i64)
            } else {
                Value::Real(v)
            };
            (k, value)
        })
        .collect()
}

fn options(eps: Option<f64>) -> NumericOptions {
    eps.map_or_else(NumericOptions::default, NumericOptions::with_eps)
}

/// A CTMC built from a guarded-command model with all constants bound.
#[pyclass(module = "ramcheck", frozen)]
struct Model {
    ast: ModelAst,
    consts: Bindings,
    built: BuiltModel,
}

impl Model {
    fn build(ast: ModelAst, consts: Bindings) -> PyResult<Model> {
        let built = build_state_space_with(&ast, &consts, BuildOptions::default()).map_err(to_py)?;
        Ok(Model { ast, consts, built })
    }
}

#[pymethods]
impl Model {
    /// Parses model source text; `consts` overrides or supplies constants.
    #[new]
    #[pyo3(signature = (source, consts=None))]
    fn new(source: &str, consts: Option<BTreeMap<String, f64>>) -> PyResult<Model> {
        Model::build(parse_model(source).map_err(to_py)?, bindings(consts))
    }

    #[staticmethod]
    #[pyo3(signature = (path, consts=None))]
    fn from_file(path: &str, consts: Option<BTreeMap<String, f64>>) -> PyResult<Model> {
        let src = std::fs::read_to_string(path).map_err(|e| ModelError::new_err(format!("{path}: {e}")))?;
        Model::new(&src, consts)
    }

    /// One of the bundled models, `satellite` or `constellation`.
    #[staticmethod]
    #[pyo3(signature = (name, consts=None))]
    fn bundled(name: &str, consts: Option<BTreeMap<String, f64>>) -> PyResult<Model> {
        let src = bundled_model(name).ok_or_else(|| ModelError::new_err(format!("no bundled model `{name}`")))?;
        Model::new(src, consts)
    }

    #[getter]
    fn num_states(&self) -> usize {
        self.built.ctmc.num_states()
    }

    #[getter]
    fn num_transitions(&self) -> usize {
        self.built.ctmc.num_transitions()
    }

    #[getter]
    fn initial_state(&self) -> usize {
        self.built.ctmc.initial_state()
    }

    fn valuation(&self, state: usize) -> PyResult<Vec<i64>> {
        if state >= self.num_states() {
            return Err(pyo3::exceptions::PyIndexError::new_err(state));
        }
        Ok(self.built.ctmc.valuation(state).to_vec())
    }

    fn rate(&self, source: usize, target: usize) -> f64 {
        self.built.ctmc.rate(source, target)
    }

    /// Value of a numeric query, or truth of a state formula, in the initial state.
    #[pyo3(signature = (query, eps=None))]
    fn check<'py>(&self, py: Python<'py>, query: &str, eps: Option<f64>) -> PyResult<Bound<'py, PyAny>> {
        let prop = parse_property(query).map_err(to_py)?;
        let r = Checker::new(&self.built, options(eps)).check(&prop).map_err(to_py)?;
        Ok(match r.holds() {
            Some(b) => b.into_pyobject(py)?.to_owned().into_any(),
            None => r.value().into_pyobject(py)?.into_any(),
        })
    }

    /// Per-state values of a numeric query.
    #[pyo3(signature = (query, eps=None))]
    fn check_all_states(&self, query: &str, eps: Option<f64>) -> PyResult<Vec<f64>> {
        let prop = parse_property(query).map_err(to_py)?;
        let r = Checker::new(&self.built, options(eps)).check(&prop).map_err(to_py)?;
        Ok(match r.outcome {
            ramcheck::csl::Outcome::Numeric(v) => v,
            ramcheck::csl::Outcome::Satisfaction(v) => v.into_iter().map(|b| f64::from(u8::from(b))).collect(),
        })
    }

    /// Evaluates every query of a properties file; `consts` binds its open constants.
    #[pyo3(signature = (source, consts=None, eps=None))]
    fn check_properties(
        &self,
        source: &str,
        consts: Option<BTreeMap<String, f64>>,
        eps: Option<f64>,
    ) -> PyResult<Vec<(String, f64)>> {
        let file = parse_properties(source).map_err(to_py)?;
        let checker = Checker::new(&self.built, options(eps))
            .with_constants(&file.constants, &bindings(consts))
            .map_err(to_py)?;
        file.properties
            .iter()
            .map(|p| Ok((p.text.clone(), checker.check(p).map_err(to_py)?.value())))
            .collect()
    }

    #[pyo3(signature = (t, eps=None))]
    fn transient(&self, t: f64, eps: Option<f64>) -> PyResult<Vec<f64>> {
        transient_distribution(&self.built.ctmc, t, &options(eps)).map_err(to_py)
    }

    fn steady_state(&self) -> PyResult<Vec<f64>> {
        steady_state(&self.built.ctmc, &NumericOptions::default()).map_err(to_py)
    }

    /// Monte Carlo estimate as `(mean, ci_low, ci_high)`.
    #[pyo3(signature = (query, replications=100_000, seed=1, confidence=0.95))]
    fn simulate(&self, query: &str, replications: u64, seed: u64, confidence: f64) -> PyResult<(f64, f64, f64)> {
        let prop = parse_property(query).map_err(to_py)?;
        let checker = Checker::new(&self.built, NumericOptions::default());
        let cfg = SimConfig {
            replications,
            seed,
            confidence,
        };
        let e = estimate_property(&checker, &self.built, &prop, &cfg).map_err(to_py)?;
        Ok((e.mean, e.ci_low(), e.ci_high()))
    }

    /// Sweeps one or two constants (`"name=lo:hi:step"`) and returns rows
    /// `(params, query, value)` sorted by parameter.
    #[pyo3(signature = (queries, sweeps, jobs=1, eps=None))]
    fn sweep(
        &self,
        py: Python<'_>,
        queries: Vec<String>,
        sweeps: Vec<String>,
        jobs: usize,
        eps: Option<f64>,
    ) -> PyResult<Vec<(Vec<f64>, String, f64)>> {
        let props = queries
            .iter()
            .map(|q| parse_property(q))
            .collect::<Result<Vec<_>, _>>()
            .map_err(to_py)?;
        let specs = sweeps
            .iter()
            .map(|s| parse_sweep(s))
            .collect::<Result<Vec<_>, _>>()
            .map_err(to_py)?;
        let opts = options(eps);
        let table = py
            .detach(|| run_experiment_sweep(&self.ast, &[], &props, &specs, &self.consts, &opts, jobs.max(1)))
            .map_err(to_py)?;
        Ok(table.rows.into_iter().map(|r| (r.params, r.query, r.value)).collect())
    }

    fn to_dot(&self) -> String {
        self.built.ctmc.to_dot()
    }

    fn to_csv(&self) -> String {
        self.built.ctmc.to_csv()
    }

    fn __repr__(&self) -> String {
        format!("Model(states={}, transitions={})", self.num_states(), self.num_transitions())
    }
}

/// Failure rate `-ln(r)/MTBF` and repair rate `1/MTTR`.
#[pyfunction]
fn derive_rates(r: f64, mtbf: f64, mttr: f64) -> PyResult<(f64, f64)> {
    ramcheck::ram::derive_rates(r, mtbf, mttr).map_err(to_py)
}

#[pyfunction]
fn reliability_curve(lam: f64, t: f64) -> f64 {
    ramcheck::ram::reliability_curve(lam, t)
}

/// Runs a bundled experiment and returns `{file name: CSV text}`.
#[pyfunction]
#[pyo3(signature = (name, full_precision=false, jobs=1))]
fn run_experiment(py: Python<'_>, name: &str, full_precision: bool, jobs: usize) -> PyResult<BTreeMap<String, String>> {
    let manifest = Manifest::bundled(name).map_err(to_py)?;
    let outputs = py
        .detach(|| manifest.run(None, &NumericOptions::default(), jobs.max(1), full_precision))
        .map_err(to_py)?;
    Ok(outputs.into_iter().map(|o| (o.file, o.csv)).collect())
}

#[pyfunction]
fn experiments() -> Vec<&'static str> {
    MANIFEST_NAMES.to_vec()
}

#[pyfunction]
fn bundled_source(name: &str) -> PyResult<&'static str> {
    bundled_model(name).ok_or_else(|| ModelError::new_err(format!("no bundled model `{name}`")))
}

#[pymodule]
#[pyo3(name = "ramcheck")]
fn ramcheck_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(derive_rates, m)?)?;
    m.add_function(wrap_pyfunction!(reliability_curve, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(experiments, m)?)?;
    m.add_function(wrap_pyfunction!(bundled_source, m)?)?;
    m.add("RamcheckError", m.py().get_type::<RamcheckError>())?;
    m.add("ModelError", m.py().get_type::<ModelError>())?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add("LIFETIME", ramcheck::ram::LIFETIME)?;
    Ok(())
}
