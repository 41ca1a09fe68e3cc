//! Python module `smigraph`.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use smigraph::chem::{parse_smiles, write_smiles};
use smigraph::features::{detect_functional_groups, morgan_fingerprint, scaffold_key};
use smigraph::fragment::fragment_molecule;
use smigraph::pipeline::{self, metrics, PipelineError};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn pipeline_err(e: PipelineError) -> PyErr {
    match e {
        PipelineError::Io { .. } | PipelineError::NonFiniteLoss { .. } | PipelineError::Nn(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => value_err(e),
    }
}

/// Token texts of a SMILES string.
#[pyfunction]
fn tokenize(smiles: &str) -> PyResult<Vec<String>> {
    let seq = smigraph::chem::tokenize(smiles).map_err(value_err)?;
    Ok(seq.tokens.into_iter().map(|t| t.text).collect())
}

/// Canonical SMILES of the parsed molecule.
#[pyfunction]
fn canonical_smiles(smiles: &str) -> PyResult<String> {
    Ok(write_smiles(&parse_smiles(smiles).map_err(value_err)?.0))
}

/// `(count, atom_labels, token_labels)` of the BRICS decomposition.
#[pyfunction]
fn fragment(smiles: &str) -> PyResult<(usize, Vec<usize>, Vec<usize>)> {
    let (g, t) = parse_smiles(smiles).map_err(value_err)?;
    let map = fragment_molecule(&g, &t).map_err(value_err)?;
    Ok((map.count, map.atom_labels, map.token_labels))
}

/// Indices of set bits in the Morgan fingerprint.
#[pyfunction]
#[pyo3(signature = (smiles, radius = 2, width = 2048))]
fn fingerprint(smiles: &str, radius: usize, width: usize) -> PyResult<Vec<usize>> {
    if width < 64 || !width.is_power_of_two() {
        return Err(value_err("width must be a power of two of at least 64"));
    }
    let g = parse_smiles(smiles).map_err(value_err)?.0;
    Ok(morgan_fingerprint(&g, radius, width).on_bits())
}

#[pyfunction]
fn functional_groups(smiles: &str) -> PyResult<Vec<&'static str>> {
    let g = parse_smiles(smiles).map_err(value_err)?.0;
    Ok(detect_functional_groups(&g).present().into_iter().map(|f| f.name()).collect())
}

/// Murcko scaffold SMILES; empty for acyclic molecules.
#[pyfunction]
fn scaffold(smiles: &str) -> PyResult<String> {
    Ok(scaffold_key(&parse_smiles(smiles).map_err(value_err)?.0))
}

#[pyfunction]
fn roc_auc(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    metrics::roc_auc(&scores, &labels).map_err(value_err)
}

#[pyfunction]
fn concordance_index(predictions: Vec<f64>, truths: Vec<f64>) -> PyResult<f64> {
    metrics::concordance_index(&predictions, &truths).map_err(value_err)
}

/// A pre-trained encoder with its vocabularies.
#[pyclass(name = "Checkpoint", frozen)]
struct PyCheckpoint {
    inner: pipeline::Checkpoint,
}

#[pymethods]
impl PyCheckpoint {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyCheckpoint {
            inner: pipeline::Checkpoint::load(&path).map_err(pipeline_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(pipeline_err)
    }

    #[getter]
    fn epoch(&self) -> usize {
        self.inner.epoch
    }

    #[getter]
    fn d_model(&self) -> usize {
        self.inner.model.config.d_model
    }

    /// Molecule embedding (mean over all joint-sequence rows).
    fn embed(&self, smiles: &str) -> PyResult<Vec<f64>> {
        let prepared = pipeline::prepare_smiles(&self.inner, smiles).map_err(pipeline_err)?;
        pipeline::embed_molecule(&self.inner, &prepared).map_err(pipeline_err)
    }

    fn similarity(&self, a: &str, b: &str) -> PyResult<f64> {
        pipeline::similarity(&self.inner, a, b).map_err(pipeline_err)
    }

    /// `(position labels, per-head attention matrices)` for one layer.
    #[pyo3(signature = (smiles, layer = 0))]
    fn attention(&self, smiles: &str, layer: usize) -> PyResult<(Vec<String>, Vec<Vec<Vec<f64>>>)> {
        let dump = pipeline::attention_dump(&self.inner, smiles, layer).map_err(pipeline_err)?;
        let heads = dump
            .heads
            .iter()
            .map(|m| (0..m.rows()).map(|r| m.row(r).to_vec()).collect())
            .collect();
        Ok((dump.positions, heads))
    }
}

fn config_from(text: Option<&str>) -> PyResult<pipeline::ConfigFile> {
    text.map(pipeline::ConfigFile::parse)
        .transpose()
        .map_err(pipeline_err)
        .map(Option::unwrap_or_default)
}

/// Pre-trains on a SMILES file. `config` holds `key = value` lines.
#[pyfunction]
#[pyo3(signature = (corpus, output_dir = None, epochs = None, seed = None, config = None))]
fn pretrain(
    py: Python<'_>,
    corpus: PathBuf,
    output_dir: Option<PathBuf>,
    epochs: Option<usize>,
    seed: Option<u64>,
    config: Option<&str>,
) -> PyResult<PyCheckpoint> {
    let file = config_from(config)?;
    let mut cfg = pipeline::PretrainConfig::default();
    file.apply_pretrain(&mut cfg).map_err(pipeline_err)?;
    if let Some(e) = epochs {
        cfg.epochs = e;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if output_dir.is_some() {
        cfg.output_dir = output_dir;
    }
    let corpus = pipeline::ingest(&corpus).map_err(pipeline_err)?;
    let outcome = py
        .detach(|| pipeline::pretrain(&corpus, &cfg))
        .map_err(pipeline_err)?;
    Ok(PyCheckpoint {
        inner: outcome.checkpoint,
    })
}

/// Fine-tunes on a TSV task file and returns test-split metrics.
#[pyfunction]
#[pyo3(signature = (checkpoint, data, config = None))]
fn finetune(py: Python<'_>, checkpoint: &PyCheckpoint, data: PathBuf, config: Option<&str>) -> PyResult<Vec<(String, f64)>> {
    let file = config_from(config)?;
    let mut cfg = pipeline::FinetuneConfig::default();
    file.apply_finetune(&mut cfg).map_err(pipeline_err)?;
    let (examples, _) = pipeline::read_task_file(&data, cfg.kind).map_err(pipeline_err)?;
    let report = py
        .detach(|| pipeline::finetune(&checkpoint.inner, &examples, &cfg))
        .map_err(pipeline_err)?;
    let t = report.test;
    Ok(vec![
        ("roc_auc".into(), t.roc_auc),
        ("accuracy".into(), t.accuracy),
        ("rmse".into(), t.rmse),
        ("mse".into(), t.mse),
        ("concordance_index".into(), t.concordance_index),
    ])
}

#[pymodule]
#[pyo3(name = "smigraph")]
fn smigraph_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(canonical_smiles, m)?)?;
    m.add_function(wrap_pyfunction!(fragment, m)?)?;
    m.add_function(wrap_pyfunction!(fingerprint, m)?)?;
    m.add_function(wrap_pyfunction!(functional_groups, m)?)?;
    m.add_function(wrap_pyfunction!(scaffold, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    m.add_function(wrap_pyfunction!(concordance_index, m)?)?;
    m.add_function(wrap_pyfunction!(pretrain, m)?)?;
    m.add_function(wrap_pyfunction!(finetune, m)?)?;
    m.add_class::<PyCheckpoint>()?;
    Ok(())
}
