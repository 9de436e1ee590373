//! Python bindings: `import kano_reviews`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use kano_core::classifiers::{self, ClassifierKind, TrainingContext};
use kano_core::corpus::{self, Agreement, FoldStrategy, InputFormat, Mapping, Review};
use kano_core::experiments::{self, ExperimentConfig};
use kano_core::{metrics, textproc, ClassifierSpec, KanoLabel};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Accepts a label name ("basic") or code (0).
fn to_label(obj: &Bound<'_, PyAny>) -> PyResult<KanoLabel> {
    if let Ok(code) = obj.extract::<u8>() {
        return KanoLabel::from_code(code)
            .ok_or_else(|| value_error(format!("no label with code {code}")));
    }
    let name: String = obj.extract()?;
    name.parse()
        .map_err(|_| value_error(format!("unknown label `{name}`")))
}

fn to_labels(objs: &[Bound<'_, PyAny>]) -> PyResult<Vec<KanoLabel>> {
    objs.iter().map(to_label).collect()
}

fn json_to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(value_error)?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Label names in code order.
#[pyfunction]
fn labels() -> Vec<&'static str> {
    KanoLabel::ALL.iter().map(|l| l.name()).collect()
}

#[pyfunction]
fn label_code(label: &Bound<'_, PyAny>) -> PyResult<u8> {
    Ok(to_label(label)?.code())
}

#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    textproc::tokenize(text)
}

#[pyfunction]
fn remove_stopwords(tokens: Vec<String>) -> Vec<String> {
    textproc::remove_stopwords(tokens)
}

/// Tokenize and drop stop words.
#[pyfunction]
fn analyze(text: &str) -> Vec<String> {
    textproc::analyze(text)
}

/// Labeled reviews.
#[pyclass(name = "Dataset", module = "kano_reviews", from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: corpus::Dataset,
}

#[pymethods]
impl PyDataset {
    /// Build from parallel lists; agreements are "unanimous", "tiebroken" or "unknown".
    #[new]
    #[pyo3(signature = (texts, labels, agreements = None, name = "dataset"))]
    fn new(
        texts: Vec<String>,
        labels: Vec<Bound<'_, PyAny>>,
        agreements: Option<Vec<String>>,
        name: &str,
    ) -> PyResult<Self> {
        if texts.len() != labels.len() {
            return Err(value_error("texts and labels differ in length"));
        }
        let labels = to_labels(&labels)?;
        let agreements: Vec<Agreement> = match agreements {
            Some(a) if a.len() != texts.len() => {
                return Err(value_error("agreements differ in length"))
            }
            Some(a) => a
                .iter()
                .map(|s| s.parse().map_err(value_error))
                .collect::<PyResult<_>>()?,
            None => vec![Agreement::Unknown; texts.len()],
        };
        let reviews = texts
            .into_iter()
            .zip(labels)
            .zip(agreements)
            .enumerate()
            .map(|(i, ((text, label), agreement))| Review {
                id: i.to_string(),
                text,
                label,
                agreement,
                source: name.to_string(),
            })
            .collect();
        Ok(PyDataset {
            inner: corpus::Dataset::new(name, reviews).map_err(value_error)?,
        })
    }

    /// Read a CSV or JSON-lines export through an optional TOML column mapping.
    #[staticmethod]
    #[pyo3(signature = (path, format = "csv", mapping = None))]
    fn ingest(path: PathBuf, format: &str, mapping: Option<PathBuf>) -> PyResult<Self> {
        let format: InputFormat = format.parse().map_err(value_error)?;
        let mapping = match mapping {
            Some(p) => Mapping::load(p).map_err(value_error)?,
            None => Mapping::canonical(),
        };
        Ok(PyDataset {
            inner: corpus::ingest(path, format, &mapping).map_err(value_error)?,
        })
    }

    #[staticmethod]
    fn read_jsonl(path: PathBuf) -> PyResult<Self> {
        Ok(PyDataset {
            inner: corpus::read_jsonl(path).map_err(value_error)?,
        })
    }

    fn write_jsonl(&self, path: PathBuf) -> PyResult<()> {
        corpus::write_jsonl(&self.inner, path).map_err(value_error)
    }

    /// Returns the cleaned dataset and per-rule removal counts.
    fn preprocess<'py>(&self, py: Python<'py>) -> PyResult<(Self, Bound<'py, PyAny>)> {
        let (clean, stats) = corpus::preprocess(&self.inner);
        Ok((PyDataset { inner: clean }, json_to_py(py, &stats)?))
    }

    fn undersample(&self, seed: u64) -> PyResult<Self> {
        Ok(PyDataset {
            inner: corpus::undersample(&self.inner, seed).map_err(value_error)?,
        })
    }

    /// Fold index of every review.
    #[pyo3(signature = (k, seed, stratified = true))]
    fn folds(&self, k: usize, seed: u64, stratified: bool) -> PyResult<Vec<usize>> {
        let strategy = if stratified {
            FoldStrategy::Stratified
        } else {
            FoldStrategy::Random
        };
        let plan = corpus::make_folds(&self.inner, k, seed, strategy).map_err(value_error)?;
        Ok(plan.assignments().iter().map(|(_, f)| *f).collect())
    }

    fn texts(&self) -> Vec<String> {
        self.inner
            .reviews()
            .iter()
            .map(|r| r.text.clone())
            .collect()
    }

    fn labels(&self) -> Vec<&'static str> {
        self.inner
            .reviews()
            .iter()
            .map(|r| r.label.name())
            .collect()
    }

    fn label_counts(&self) -> BTreeMap<&'static str, usize> {
        let counts = self.inner.label_counts();
        KanoLabel::ALL
            .iter()
            .map(|l| (l.name(), counts[l.index()]))
            .collect()
    }

    #[getter]
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(name={:?}, reviews={})",
            self.inner.name(),
            self.inner.len()
        )
    }
}

/// A trained keyword, logistic-regression or adapter-backed classifier.
#[pyclass(name = "Classifier", module = "kano_reviews")]
struct PyClassifier {
    inner: classifiers::TrainedClassifier,
}

#[pymethods]
impl PyClassifier {
    /// `kind` is "keyword", "logreg" or "adapter"; keyword arguments become
    /// hyperparameters (C, max_iter, tol, init_seed, endpoint, ...).
    #[staticmethod]
    #[pyo3(signature = (kind, data, **hyperparameters))]
    fn train(
        kind: &str,
        data: &PyDataset,
        hyperparameters: Option<&Bound<'_, PyDict>>,
    ) -> PyResult<Self> {
        let kind: ClassifierKind = kind.parse().map_err(value_error)?;
        let mut spec = ClassifierSpec::new(kind);
        if let Some(params) = hyperparameters {
            let json: String = params
                .py()
                .import("json")?
                .call_method1("dumps", (params,))?
                .extract()?;
            spec.hyperparameters = serde_json::from_str(&json).map_err(value_error)?;
        }
        let inner =
            classifiers::train(&spec, &data.inner, &TrainingContext::new()).map_err(value_error)?;
        Ok(PyClassifier { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyClassifier {
            inner: classifiers::TrainedClassifier::load(path).map_err(value_error)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(path).map_err(value_error)
    }

    fn predict(&self, text: &str) -> PyResult<&'static str> {
        Ok(self.inner.predict(text).map_err(value_error)?.name())
    }

    fn predict_batch(&self, texts: Vec<String>) -> PyResult<Vec<&'static str>> {
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let labels = self.inner.predict_batch(&refs).map_err(value_error)?;
        Ok(labels.into_iter().map(KanoLabel::name).collect())
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name()
    }

    fn __repr__(&self) -> String {
        format!("Classifier({})", self.inner.name())
    }
}

/// 4x4 counts indexed [true][predicted].
#[pyfunction]
fn confusion(
    truth: Vec<Bound<'_, PyAny>>,
    predicted: Vec<Bound<'_, PyAny>>,
) -> PyResult<[[u64; 4]; 4]> {
    let m =
        metrics::confusion(&to_labels(&truth)?, &to_labels(&predicted)?).map_err(value_error)?;
    Ok(m.counts)
}

/// Accuracy and per-label precision/recall/F1.
#[pyfunction]
fn scores<'py>(
    py: Python<'py>,
    truth: Vec<Bound<'py, PyAny>>,
    predicted: Vec<Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let m =
        metrics::confusion(&to_labels(&truth)?, &to_labels(&predicted)?).map_err(value_error)?;
    let s = metrics::scores(&m);
    let per_label: BTreeMap<&str, _> = KanoLabel::ALL
        .iter()
        .map(|l| (l.name(), *s.label(*l)))
        .collect();
    json_to_py(
        py,
        &serde_json::json!({ "accuracy": s.accuracy, "per_label": per_label }),
    )
}

#[pyfunction]
fn cohens_kappa(a: Vec<Bound<'_, PyAny>>, b: Vec<Bound<'_, PyAny>>) -> PyResult<f64> {
    metrics::cohens_kappa(&to_labels(&a)?, &to_labels(&b)?).map_err(value_error)
}

/// Phi coefficient of two binary sequences.
#[pyfunction]
fn phi(mis: Vec<bool>, diff: Vec<bool>) -> PyResult<f64> {
    if mis.len() != diff.len() {
        return Err(value_error("sequences differ in length"));
    }
    let pairs: Vec<metrics::BinaryPair> = mis
        .into_iter()
        .zip(diff)
        .map(|(mis, diff)| metrics::BinaryPair { mis, diff })
        .collect();
    metrics::phi(&pairs).map_err(value_error)
}

/// Run an experiment config and return the report as a dict. Writes
/// report.md, report.csv and runs.json when `out_dir` is given.
#[pyfunction]
#[pyo3(signature = (config, out_dir = None, seed = None, runs = None))]
fn run_experiment<'py>(
    py: Python<'py>,
    config: PathBuf,
    out_dir: Option<PathBuf>,
    seed: Option<u64>,
    runs: Option<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let mut cfg = ExperimentConfig::load(&config).map_err(value_error)?;
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    if let Some(n) = runs {
        cfg.n_undersample_runs = n;
    }
    let report =
        experiments::run_config(&cfg).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    if let Some(dir) = out_dir {
        report
            .write_to_dir(dir)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    }
    json_to_py(py, &report)
}

#[pymodule]
fn kano_reviews(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(labels, m)?)?;
    m.add_function(wrap_pyfunction!(label_code, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(remove_stopwords, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(confusion, m)?)?;
    m.add_function(wrap_pyfunction!(scores, m)?)?;
    m.add_function(wrap_pyfunction!(cohens_kappa, m)?)?;
    m.add_function(wrap_pyfunction!(phi, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyClassifier>()?;
    Ok(())
}
