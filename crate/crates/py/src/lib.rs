//! Python bindings, importable as `pyctxtree`.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use context_tree::analysis::tree_stats;
use context_tree::cluster::{read_tree_json, to_dot, write_tree_json, ContextTree};
use context_tree::geo;
use context_tree::ingest::{
    format_timestamp, parse_land_usage, parse_land_usage_str, parse_taxonomy, parse_taxonomy_str, parse_timestamp,
    parse_trajectory, parse_trajectory_str, ElementStore, Taxonomy, DEFAULT_ACCURACY_M,
};
use context_tree::model::{LatLng, Trajectory};
use context_tree::pipeline::{run_pipeline as run_pipeline_files, run_stages, PipelineConfig};
use context_tree::prune::{prune_tree, PruneParams, PruneReport};
use context_tree::synth::{synth as synth_data, SynthSpec};
use context_tree::time::{merge_time_ranges as merge_ranges, TimeRange};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Great-circle distance in meters between two (lat, lng) positions.
#[pyfunction]
fn haversine_m(lat1: f64, lng1: f64, lat2: f64, lng2: f64) -> f64 {
    geo::haversine_m(LatLng::new(lat1, lng1), LatLng::new(lat2, lng2))
}

fn to_ranges(items: Vec<(String, String)>) -> PyResult<Vec<TimeRange>> {
    items
        .into_iter()
        .map(|(b, e)| {
            let parse = |s: &str| parse_timestamp(s).ok_or_else(|| value_err(format!("bad timestamp {s:?}")));
            TimeRange::new(parse(&b)?, parse(&e)?).map_err(value_err)
        })
        .collect()
}

/// Union of two lists of `(begin, end)` ISO 8601 pairs.
#[pyfunction]
fn merge_time_ranges(a: Vec<(String, String)>, b: Vec<(String, String)>) -> PyResult<Vec<(String, String)>> {
    let merged = merge_ranges(&to_ranges(a)?, &to_ranges(b)?);
    Ok(merged.iter().map(|r| (format_timestamp(&r.begin()), format_timestamp(&r.end()))).collect())
}

#[pyclass(name = "Taxonomy", module = "pyctxtree", frozen)]
struct PyTaxonomy {
    inner: Taxonomy,
}

#[pymethods]
impl PyTaxonomy {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: parse_taxonomy(path).map_err(value_err)? })
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Self { inner: parse_taxonomy_str(text).map_err(value_err)? })
    }

    /// Wu-Palmer similarity of two words, 0 when either is unknown.
    fn wup(&self, a: &str, b: &str) -> f64 {
        context_tree::cluster::wup_similarity(&self.inner, a, b)
    }

    fn depth(&self, word: &str) -> Option<u32> {
        self.inner.depth(word)
    }

    fn lowest_common_subsumer(&self, a: &str, b: &str) -> Option<String> {
        self.inner.lowest_common_subsumer(a, b).map(str::to_string)
    }

    fn __contains__(&self, word: &str) -> bool {
        self.inner.contains(word)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(name = "ElementStore", module = "pyctxtree", frozen)]
struct PyElementStore {
    inner: ElementStore,
}

#[pymethods]
impl PyElementStore {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: parse_land_usage(path).map_err(value_err)? })
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Self { inner: parse_land_usage_str(text).map_err(value_err)? })
    }

    fn ids(&self) -> Vec<String> {
        self.inner.iter().map(|e| e.id.clone()).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(name = "Trajectory", module = "pyctxtree", frozen)]
struct PyTrajectory {
    inner: Trajectory,
}

#[pymethods]
impl PyTrajectory {
    #[staticmethod]
    #[pyo3(signature = (path, default_accuracy_m = DEFAULT_ACCURACY_M))]
    fn load(path: PathBuf, default_accuracy_m: f64) -> PyResult<Self> {
        Ok(Self { inner: parse_trajectory(path, default_accuracy_m).map_err(value_err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (text, default_accuracy_m = DEFAULT_ACCURACY_M))]
    fn parse(text: &str, default_accuracy_m: f64) -> PyResult<Self> {
        Ok(Self { inner: parse_trajectory_str(text, default_accuracy_m).map_err(value_err)? })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(name = "ContextTree", module = "pyctxtree", frozen)]
struct PyContextTree {
    inner: ContextTree,
}

fn report_dict<'py>(py: Python<'py>, r: &PruneReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("theta", r.theta)?;
    d.set_item("xi", r.xi)?;
    d.set_item("unpruned_count", r.unpruned_count)?;
    d.set_item("pruned_count", r.pruned_count)?;
    d.set_item("total_information", r.total_information)?;
    d.set_item("avg_leaf_hcd", r.avg_leaf_hcd)?;
    Ok(d)
}

#[pymethods]
impl PyContextTree {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: read_tree_json(text).map_err(value_err)? })
    }

    fn to_json(&self) -> String {
        write_tree_json(&self.inner)
    }

    fn to_dot(&self) -> String {
        to_dot(&self.inner)
    }

    /// `{"total_nodes", "leaf_nodes", "time_periods"}`.
    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = tree_stats(&self.inner.root);
        let d = PyDict::new(py);
        d.set_item("total_nodes", s.total_nodes)?;
        d.set_item("leaf_nodes", s.leaf_nodes)?;
        d.set_item("time_periods", s.time_periods)?;
        Ok(d)
    }

    /// Element ids of the leaves, left to right.
    fn leaf_ids(&self) -> Vec<String> {
        self.inner.root.leaves().filter_map(|n| n.leaf_element_id.clone()).collect()
    }

    /// Returns the pruned tree and a report dict.
    #[pyo3(signature = (taxonomy, theta = 0.2, xi = 1.0))]
    fn prune<'py>(
        &self,
        py: Python<'py>,
        taxonomy: &PyTaxonomy,
        theta: f64,
        xi: f64,
    ) -> PyResult<(PyContextTree, Bound<'py, PyDict>)> {
        let params = PruneParams::new(theta, xi).map_err(value_err)?;
        let (tree, report) = prune_tree(&self.inner, &params, &taxonomy.inner).map_err(value_err)?;
        Ok((PyContextTree { inner: tree }, report_dict(py, &report)?))
    }

    fn __len__(&self) -> usize {
        self.inner.root.node_count()
    }
}

/// Keyword arguments become a pipeline config; unknown names are an error.
fn config_from(py: Python<'_>, params: Option<&Bound<'_, PyDict>>) -> PyResult<PipelineConfig> {
    match params {
        None => Ok(PipelineConfig::default()),
        Some(d) => {
            let json: String = py.import("json")?.call_method1("dumps", (d,))?.extract()?;
            serde_json::from_str(&json).map_err(value_err)
        }
    }
}

/// Runs every stage on loaded inputs and returns the tree, pruned when
/// `prune=True` is passed.
#[pyfunction]
#[pyo3(signature = (trajectory, store, taxonomy, **params))]
fn build_tree(
    py: Python<'_>,
    trajectory: &PyTrajectory,
    store: &PyElementStore,
    taxonomy: &PyTaxonomy,
    params: Option<&Bound<'_, PyDict>>,
) -> PyResult<PyContextTree> {
    let config = config_from(py, params)?;
    let out = run_stages(&config, &trajectory.inner, &store.inner, &taxonomy.inner).map_err(value_err)?;
    Ok(PyContextTree { inner: out.pruned.map_or(out.tree, |(t, _)| t) })
}

/// Runs the file-based pipeline; paths and parameters come from the keyword
/// arguments, using the same names as the JSON config.
#[pyfunction]
#[pyo3(signature = (**params))]
fn run_pipeline(py: Python<'_>, params: Option<&Bound<'_, PyDict>>) -> PyResult<PyContextTree> {
    let out = run_pipeline_files(&config_from(py, params)?).map_err(value_err)?;
    Ok(PyContextTree { inner: out.pruned.map_or(out.tree, |(t, _)| t) })
}

/// Synthetic city and routine. Also writes the files when `out_dir` is given.
#[pyfunction]
#[pyo3(signature = (seed, days = 1, interval_s = 60, out_dir = None))]
fn synth(
    seed: u64,
    days: usize,
    interval_s: i64,
    out_dir: Option<PathBuf>,
) -> PyResult<(PyTrajectory, PyElementStore, PyTaxonomy)> {
    if days == 0 || interval_s <= 0 {
        return Err(value_err("days and interval_s must be positive"));
    }
    let data = synth_data(seed, &SynthSpec { days, interval_s, ..Default::default() });
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(&dir).map_err(value_err)?;
        data.write_to(&dir).map_err(value_err)?;
    }
    Ok((
        PyTrajectory { inner: data.trajectory },
        PyElementStore { inner: data.store },
        PyTaxonomy { inner: data.taxonomy },
    ))
}

#[pymodule]
fn pyctxtree(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(haversine_m, m)?)?;
    m.add_function(wrap_pyfunction!(merge_time_ranges, m)?)?;
    m.add_function(wrap_pyfunction!(build_tree, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_class::<PyTaxonomy>()?;
    m.add_class::<PyElementStore>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PyContextTree>()?;
    Ok(())
}
