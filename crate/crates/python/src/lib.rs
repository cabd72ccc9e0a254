//! Python bindings: graphs, separation, identification, learning, SEMs and
//! gated models, mirroring the core crate's public operations.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use admg_core::estimand::render;
use admg_core::graph::{parse_graph, serialize_graph_ordered};
use admg_core::identify::{EffectQuery, IdentificationResult, Verdict};
use admg_core::learn::{self, Family, LearnConfig};
use admg_core::sem::{self, GaussianSem};
use admg_core::sep;
use admg_core::surgery;
use admg_core::{gated, Admg, Error, NodeSet};

fn err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn node_set(g: &Admg, labels: &[String]) -> PyResult<NodeSet> {
    let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    g.node_set(&refs).map_err(err)
}

fn criterion(name: &str) -> PyResult<sep::Criterion> {
    match name {
        "path" => Ok(sep::Criterion::Path),
        "route" => Ok(sep::Criterion::Route),
        _ => Err(PyValueError::new_err("criterion must be \"path\" or \"route\"")),
    }
}

/// An acyclic directed mixed graph, constructed from the text DSL.
#[pyclass(name = "Graph")]
#[derive(Clone)]
struct PyGraph {
    inner: Admg,
}

#[pymethods]
impl PyGraph {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        Ok(PyGraph {
            inner: parse_graph(text).map_err(err)?,
        })
    }

    fn nodes(&self) -> Vec<String> {
        self.inner.labels().to_vec()
    }

    /// Edge list as (a, op, b) with op in {"->", "--", "<->"}.
    fn edges(&self) -> Vec<(String, String, String)> {
        let g = &self.inner;
        let lab = |i| -> String { g.label(i).to_string() };
        let mut out = Vec::new();
        for (a, b) in g.directed_edges() {
            out.push((lab(a), "->".to_string(), lab(b)));
        }
        for (a, b) in g.undirected_edges() {
            out.push((lab(a), "--".to_string(), lab(b)));
        }
        for (a, b) in g.bidirected_edges() {
            out.push((lab(a), "<->".to_string(), lab(b)));
        }
        out
    }

    fn is_ancestral(&self, labels: Vec<String>) -> PyResult<bool> {
        Ok(self.inner.is_ancestral(node_set(&self.inner, &labels)?))
    }

    fn intervene(&self, labels: Vec<String>) -> PyResult<PyGraph> {
        let x = node_set(&self.inner, &labels)?;
        Ok(PyGraph {
            inner: surgery::intervene(&self.inner, x),
        })
    }

    fn magnify(&self) -> PyResult<PyGraph> {
        Ok(PyGraph {
            inner: sep::magnify(&self.inner).map_err(err)?.graph,
        })
    }

    fn __str__(&self) -> String {
        serialize_graph_ordered(&self.inner)
    }
}

#[pyfunction]
#[pyo3(signature = (g, x, y, z=vec![], criterion_name="path".to_string(), intervened=vec![]))]
fn separated(
    g: &PyGraph,
    x: Vec<String>,
    y: Vec<String>,
    z: Vec<String>,
    criterion_name: String,
    intervened: Vec<String>,
) -> PyResult<bool> {
    let gr = &g.inner;
    let crit = criterion(&criterion_name)?;
    let (xs, ys, zs, ws) = (
        node_set(gr, &x)?,
        node_set(gr, &y)?,
        node_set(gr, &z)?,
        node_set(gr, &intervened)?,
    );
    if ws.is_empty() {
        sep::separated(gr, sep::SeparationQuery::new(xs, ys, zs).map_err(err)?, crit).map_err(err)
    } else {
        sep::separated_after_intervention(gr, xs, ys, zs, ws, crit).map_err(err)
    }
}

#[pyfunction]
#[pyo3(signature = (g, x, y, z=vec![]))]
fn separation_witness(
    g: &PyGraph,
    x: Vec<String>,
    y: Vec<String>,
    z: Vec<String>,
) -> PyResult<Option<String>> {
    let gr = &g.inner;
    let q = sep::SeparationQuery::new(node_set(gr, &x)?, node_set(gr, &y)?, node_set(gr, &z)?)
        .map_err(err)?;
    Ok(sep::separation_witness(gr, q).map_err(err)?.map(|w| w.render(gr)))
}

fn result_dict<'py>(
    py: Python<'py>,
    g: &Admg,
    res: &IdentificationResult,
) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new_bound(py);
    d.set_item("criterion", &res.criterion)?;
    d.set_item("derivation", &res.derivation)?;
    match &res.verdict {
        Verdict::Identified { estimand, intermediates } => {
            d.set_item("verdict", "identified")?;
            d.set_item("estimand", render(estimand))?;
            let ims: Vec<Bound<'py, PyDict>> = intermediates
                .iter()
                .map(|m| {
                    let im = PyDict::new_bound(py);
                    im.set_item("name", &m.name)?;
                    im.set_item("vars", &m.vars)?;
                    im.set_item("fixed", &m.fixed)?;
                    im.set_item("estimand", render(&m.estimand))?;
                    Ok(im)
                })
                .collect::<PyResult<_>>()?;
            d.set_item("intermediates", ims)?;
        }
        Verdict::NotIdentified { witness } => {
            d.set_item("verdict", "not-identified")?;
            d.set_item("witness", witness.render(g))?;
        }
        Verdict::Undecided => {
            d.set_item("verdict", "undecided")?;
        }
    }
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (g, intervened, on, given=vec![]))]
fn identify<'py>(
    py: Python<'py>,
    g: &PyGraph,
    intervened: Vec<String>,
    on: Vec<String>,
    given: Vec<String>,
) -> PyResult<Bound<'py, PyDict>> {
    let gr = &g.inner;
    let q = EffectQuery::new(
        node_set(gr, &intervened)?,
        node_set(gr, &on)?,
        node_set(gr, &given)?,
    )
    .map_err(err)?;
    let res = admg_core::identify::identify(gr, &q).map_err(err)?;
    result_dict(py, gr, &res)
}

#[pyfunction]
#[pyo3(signature = (facts, family="admg".to_string(), line_penalty=1, arrow_penalty=1, biarrow_penalty=1))]
fn learn_graphs(
    facts: &str,
    family: String,
    line_penalty: u64,
    arrow_penalty: u64,
    biarrow_penalty: u64,
) -> PyResult<(u64, Vec<String>)> {
    let fs = learn::parse_facts(facts).map_err(err)?;
    let cfg = LearnConfig {
        subfamily: Family::parse(&family).map_err(err)?,
        line_penalty,
        arrow_penalty,
        biarrow_penalty,
    };
    let res = learn::learn(&fs, &cfg).map_err(err)?;
    Ok((
        res.penalty,
        res.graphs.iter().map(serialize_graph_ordered).collect(),
    ))
}

#[pyfunction]
#[pyo3(signature = (facts, family="admg".to_string()))]
fn emit_asp(facts: &str, family: String) -> PyResult<String> {
    let fs = learn::parse_facts(facts).map_err(err)?;
    let cfg = LearnConfig {
        subfamily: Family::parse(&family).map_err(err)?,
        ..LearnConfig::default()
    };
    Ok(learn::emit_asp(&fs, &cfg))
}

#[pyfunction]
fn sep_oracle(g: &PyGraph) -> PyResult<String> {
    Ok(learn::serialize_facts(&sem::sep_oracle(&g.inner).map_err(err)?))
}

fn dist_triple(d: &admg_core::estimand::GaussianDist) -> (Vec<String>, Vec<f64>, Vec<Vec<f64>>) {
    let n = d.vars.len();
    (
        d.vars.clone(),
        (0..n).map(|i| d.mean[i]).collect(),
        (0..n)
            .map(|i| (0..n).map(|j| d.cov[(i, j)]).collect())
            .collect(),
    )
}

/// A linear-Gaussian structural equation model conforming to a graph.
#[pyclass(name = "Sem")]
struct PySem {
    inner: GaussianSem,
}

#[pymethods]
impl PySem {
    #[staticmethod]
    fn random(g: &PyGraph, seed: u64) -> PySem {
        PySem {
            inner: sem::random_sem(&g.inner, seed),
        }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<PySem> {
        Ok(PySem {
            inner: sem::sem_from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> String {
        sem::sem_to_json(&self.inner)
    }

    fn graph(&self) -> PyGraph {
        PyGraph {
            inner: self.inner.graph().clone(),
        }
    }

    /// (vars, mean, covariance) of the observational distribution.
    fn implied_covariance(&self) -> (Vec<String>, Vec<f64>, Vec<Vec<f64>>) {
        dist_triple(&self.inner.implied_covariance())
    }

    /// (vars, mean, covariance) after do(var=value) for each assignment.
    fn interventional(
        &self,
        assignments: Vec<(String, f64)>,
    ) -> PyResult<(Vec<String>, Vec<f64>, Vec<Vec<f64>>)> {
        let refs: Vec<(&str, f64)> = assignments.iter().map(|(v, x)| (v.as_str(), *x)).collect();
        Ok(dist_triple(
            &self.inner.interventional_distribution(&refs).map_err(err)?,
        ))
    }

    fn sample(&self, n: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        let data = self.inner.sample(n, seed).map_err(err)?;
        Ok((0..data.nrows())
            .map(|i| (0..data.ncols()).map(|j| data[(i, j)]).collect())
            .collect())
    }

    #[pyo3(signature = (data, refit=false))]
    fn loglik(&self, data: Vec<Vec<f64>>, refit: bool) -> PyResult<f64> {
        let rows = data.len();
        let cols = data.first().map_or(0, Vec::len);
        if data.iter().any(|r| r.len() != cols) {
            return Err(PyValueError::new_err("ragged data matrix"));
        }
        let m = nalgebra::DMatrix::from_fn(rows, cols, |i, j| data[i][j]);
        self.inner.loglik(&m, refit).map_err(err)
    }
}

/// A gated model: contexts joined by value and likelihood gates.
#[pyclass(name = "GatedModel")]
struct PyGatedModel {
    inner: gated::GatedModel,
}

#[pymethods]
impl PyGatedModel {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        Ok(PyGatedModel {
            inner: gated::load_gated(text).map_err(err)?,
        })
    }

    fn contexts(&self) -> Vec<String> {
        self.inner.contexts.keys().cloned().collect()
    }

    fn initial(&self) -> String {
        self.inner.initial.clone()
    }

    /// Runs JSON events (one per string) from the initial context; returns
    /// (final context, transition log).
    fn run(&self, events: Vec<String>) -> PyResult<(String, Vec<String>)> {
        let mut state = gated::initial_state(&self.inner);
        for line in &events {
            let e = gated::parse_event(line).map_err(err)?;
            state = gated::step(&self.inner, &state, &e).map_err(err)?;
        }
        Ok((state.context, state.log))
    }

    #[pyo3(signature = (ctx, intervened, on, given=vec![]))]
    fn identify_in_context<'py>(
        &self,
        py: Python<'py>,
        ctx: &str,
        intervened: Vec<String>,
        on: Vec<String>,
        given: Vec<String>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let g = &self
            .inner
            .contexts
            .get(ctx)
            .ok_or_else(|| PyValueError::new_err(format!("unknown context {ctx:?}")))?
            .graph;
        let q = EffectQuery::new(
            node_set(g, &intervened)?,
            node_set(g, &on)?,
            node_set(g, &given)?,
        )
        .map_err(err)?;
        let res = gated::identify_in_context(&self.inner, ctx, &q).map_err(err)?;
        result_dict(py, g, &res)
    }
}

#[pymodule]
fn _rustlib(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PySem>()?;
    m.add_class::<PyGatedModel>()?;
    m.add_function(wrap_pyfunction!(separated, m)?)?;
    m.add_function(wrap_pyfunction!(separation_witness, m)?)?;
    m.add_function(wrap_pyfunction!(identify, m)?)?;
    m.add_function(wrap_pyfunction!(learn_graphs, m)?)?;
    m.add_function(wrap_pyfunction!(emit_asp, m)?)?;
    m.add_function(wrap_pyfunction!(sep_oracle, m)?)?;
    Ok(())
}
