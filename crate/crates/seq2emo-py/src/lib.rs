//! Python bindings for the seq2emo library.
//!
//! Exposes the tokenizer, the multi-label metric suite, hashtag
//! extraction/stripping, and checkpoint loading with prediction.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use seq2emo::corpus::{self, HashtagMap as CoreHashtagMap};
use seq2emo::labels::BinaryLabelVector;
use seq2emo::metrics::{self, EvalBatch};
use seq2emo::model::{load_checkpoint, Model as CoreModel, PreparedInstance};
use seq2emo::Error;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::Parse { .. } | Error::Data(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_label_vectors(rows: Vec<Vec<bool>>, name: &str) -> PyResult<Vec<BinaryLabelVector>> {
    if rows.is_empty() {
        return Err(PyValueError::new_err(format!("{name} must be non-empty")));
    }
    Ok(rows.into_iter().map(BinaryLabelVector::from_bits).collect())
}

/// Lowercase whitespace tokenization with punctuation peeling.
#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    corpus::tokenize(text)
}

fn with_batch<F: FnOnce(&EvalBatch) -> f64>(
    gold: Vec<Vec<bool>>,
    pred: Vec<Vec<bool>>,
    f: F,
) -> PyResult<f64> {
    let gold = to_label_vectors(gold, "gold")?;
    let pred = to_label_vectors(pred, "pred")?;
    let batch = EvalBatch::new(&gold, &pred).map_err(to_py_err)?;
    Ok(f(&batch))
}

/// Mean per-instance intersection-over-union of the label sets.
#[pyfunction]
fn jaccard(gold: Vec<Vec<bool>>, pred: Vec<Vec<bool>>) -> PyResult<f64> {
    with_batch(gold, pred, metrics::jaccard)
}

/// Fraction of label bits that disagree.
#[pyfunction]
fn hamming_loss(gold: Vec<Vec<bool>>, pred: Vec<Vec<bool>>) -> PyResult<f64> {
    with_batch(gold, pred, metrics::hamming_loss)
}

/// F1 over the pooled per-bit confusion counts.
#[pyfunction]
fn micro_f1(gold: Vec<Vec<bool>>, pred: Vec<Vec<bool>>) -> PyResult<f64> {
    with_batch(gold, pred, metrics::micro_f1)
}

/// Macro-averaged (precision, recall, f1, accuracy) over `k` classes for
/// single-label class-index lists.
#[pyfunction]
fn macro_prf(gold: Vec<usize>, pred: Vec<usize>, k: usize) -> PyResult<(f64, f64, f64, f64)> {
    metrics::macro_prf(&gold, &pred, k).map_err(to_py_err)
}

/// A hashtag-to-emotion map for distant supervision.
#[pyclass]
struct HashtagMap {
    inner: CoreHashtagMap,
}

#[pymethods]
impl HashtagMap {
    /// Load from a TSV file: `emotion<TAB>#tag1,#tag2,...` per line.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<HashtagMap> {
        Ok(HashtagMap { inner: CoreHashtagMap::load(&path).map_err(to_py_err)? })
    }

    /// Build from `{emotion: [tags...]}`.
    #[staticmethod]
    fn from_dict(entries: Vec<(String, Vec<String>)>) -> PyResult<HashtagMap> {
        Ok(HashtagMap { inner: CoreHashtagMap::new(entries).map_err(to_py_err)? })
    }

    /// The emotion inventory, in file order.
    fn emotions(&self) -> Vec<String> {
        self.inner.emotions().to_vec()
    }

    /// Emotion labels distantly implied by the hashtags in `text`, sorted.
    fn extract(&self, text: &str) -> Vec<String> {
        let mut out: Vec<String> =
            corpus::extract_distant_labels(text, &self.inner).into_iter().collect();
        out.sort();
        out
    }

    /// `text` with all mapped hashtags removed and whitespace re-joined.
    fn strip(&self, text: &str) -> String {
        corpus::strip_label_hashtags(text, &self.inner)
    }
}

/// A trained classifier loaded from a checkpoint file.
///
/// Unsendable: the underlying parameter store is reference-counted and
/// single-threaded, so the object is pinned to the thread that created it.
#[pyclass(unsendable)]
struct Model {
    inner: CoreModel,
}

#[pymethods]
impl Model {
    /// Load a checkpoint written by `seq2emo train`.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Model> {
        let (model, _, _) = load_checkpoint(&path).map_err(to_py_err)?;
        Ok(Model { inner: model })
    }

    /// The model kind (`seq2emo`, `binary_br2`, `binary_br_tau`, `sgm`).
    #[getter]
    fn kind(&self) -> String {
        self.inner.config.model.as_str().to_string()
    }

    /// The ordered label names.
    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.labels.labels().to_vec()
    }

    /// Predict label names for one text.
    fn predict(&self, text: &str) -> PyResult<Vec<String>> {
        let tokens = corpus::tokenize(text);
        if tokens.is_empty() {
            return Err(PyValueError::new_err("text has no tokens"));
        }
        let inst = PreparedInstance {
            id: "py".into(),
            token_ids: self.inner.vocab.encode(&tokens),
            aux_rows: Vec::new(),
            moji: vec![0.0; self.inner.config.d_m],
            gold: BinaryLabelVector::zeros(self.inner.labels.k()),
        };
        let bits = self.inner.predict(&inst).map_err(to_py_err)?;
        Ok(self.inner.labels.decode(&bits).into_iter().map(str::to_string).collect())
    }

    /// Predict the raw bit vector for one text.
    fn predict_bits(&self, text: &str) -> PyResult<Vec<bool>> {
        let tokens = corpus::tokenize(text);
        if tokens.is_empty() {
            return Err(PyValueError::new_err("text has no tokens"));
        }
        let inst = PreparedInstance {
            id: "py".into(),
            token_ids: self.inner.vocab.encode(&tokens),
            aux_rows: Vec::new(),
            moji: vec![0.0; self.inner.config.d_m],
            gold: BinaryLabelVector::zeros(self.inner.labels.k()),
        };
        let bits = self.inner.predict(&inst).map_err(to_py_err)?;
        Ok(bits.bits().to_vec())
    }
}

#[pymodule]
fn seq2emo_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(jaccard, m)?)?;
    m.add_function(wrap_pyfunction!(hamming_loss, m)?)?;
    m.add_function(wrap_pyfunction!(micro_f1, m)?)?;
    m.add_function(wrap_pyfunction!(macro_prf, m)?)?;
    m.add_class::<HashtagMap>()?;
    m.add_class::<Model>()?;
    Ok(())
}
