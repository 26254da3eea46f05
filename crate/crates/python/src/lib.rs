//! Python bindings for the `esgrisk` crate.

use std::path::PathBuf;

use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use esgrisk::detect::DetectionConfig;
use esgrisk::lexicon::TaxonomyNode;
use esgrisk::pipeline::{self, RunConfig, SynthSpec};
use esgrisk::sentiment::{self, Sign};
use esgrisk::study;
use esgrisk::synth::{PlantSchedule, SynthConfig};
use esgrisk::{Error, ErrorClass};

fn to_py(e: Error) -> PyErr {
    let msg = e.to_string();
    match e.class() {
        ErrorClass::Usage | ErrorClass::Data => PyValueError::new_err(msg),
        ErrorClass::Numeric => PyArithmeticError::new_err(msg),
        ErrorClass::Io => PyOSError::new_err(msg),
    }
}

fn node_names(nodes: impl Iterator<Item = TaxonomyNode>) -> Vec<String> {
    nodes.map(|n| n.ident().to_string()).collect()
}

/// Lowercased word tokens with URLs, mentions and punctuation removed.
#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    esgrisk::lexicon::tokenize(text)
}

/// Keyword lexicon mapping terms to taxonomy subcategories.
#[pyclass(name = "Lexicon")]
struct PyLexicon(esgrisk::lexicon::Lexicon);

#[pymethods]
impl PyLexicon {
    /// The bundled demonstration lexicon (not authoritative).
    #[staticmethod]
    fn demo() -> Self {
        PyLexicon(esgrisk::synth::demo_lexicon())
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        esgrisk::lexicon::Lexicon::load(&path).map(PyLexicon).map_err(to_py)
    }

    /// Build from `(term, node)` pairs.
    #[staticmethod]
    fn from_pairs(pairs: Vec<(String, String)>) -> PyResult<Self> {
        let entries = pairs
            .iter()
            .map(|(t, n)| {
                let node: TaxonomyNode = n.parse().map_err(|e: esgrisk::lexicon::UnknownNode| PyValueError::new_err(e.to_string()))?;
                esgrisk::lexicon::LexiconEntry::new(t, node).map_err(PyValueError::new_err)
            })
            .collect::<PyResult<Vec<_>>>()?;
        esgrisk::lexicon::Lexicon::from_entries(entries).map(PyLexicon).map_err(to_py)
    }

    /// Matched subcategories, or with `ancestors=True` their closure too.
    #[pyo3(signature = (text, ancestors = false))]
    fn classify(&self, text: &str, ancestors: bool) -> Vec<String> {
        let (nodes, _) = self.0.classify_tokens(&esgrisk::lexicon::tokenize(text));
        let nodes = if ancestors { nodes.with_ancestors() } else { nodes };
        node_names(nodes.iter())
    }

    /// `(position, term, node)` for every match.
    fn matches(&self, text: &str) -> Vec<(usize, String, String)> {
        let (_, m) = self.0.classify_tokens(&esgrisk::lexicon::tokenize(text));
        m.into_iter().map(|t| (t.position, t.term.join(" "), t.node.ident().to_string())).collect()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(name = "SentimentLexicon")]
struct PySentimentLexicon(sentiment::SentimentLexicon);

#[pymethods]
impl PySentimentLexicon {
    /// The bundled demonstration sentiment lexicon (not authoritative).
    #[staticmethod]
    fn demo() -> Self {
        PySentimentLexicon(esgrisk::synth::demo_sentiment_lexicon())
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        sentiment::SentimentLexicon::load(&path).map(PySentimentLexicon).map_err(to_py)
    }

    /// Mean weight of matched terms, 0.0 when none match.
    fn score(&self, text: &str) -> f64 {
        self.0.score_tokens(&esgrisk::lexicon::tokenize(text))
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyfunction]
#[pyo3(signature = (score, threshold = sentiment::DEFAULT_SIGN_THRESHOLD))]
fn classify_sign(score: f64, threshold: f64) -> &'static str {
    sentiment::classify_sign(score, threshold).as_str()
}

/// Days flagged by the trailing-window z rule.
#[pyfunction]
#[pyo3(signature = (counts, z = 2.0, window_len = 250, two_sided = false))]
fn esd_outliers(counts: Vec<u32>, z: f64, window_len: usize, two_sided: bool) -> PyResult<Vec<usize>> {
    let cfg = DetectionConfig { z, window_len, two_sided, ..Default::default() };
    cfg.validate().map_err(to_py)?;
    Ok(esgrisk::detect::esd_outliers(&counts, &cfg))
}

#[pyclass(name = "MarketModelFit")]
struct PyFit(study::MarketModelFit);

#[pymethods]
impl PyFit {
    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha
    }
    #[getter]
    fn beta(&self) -> f64 {
        self.0.beta
    }
    #[getter]
    fn resid_std(&self) -> f64 {
        self.0.resid_std
    }
    #[getter]
    fn n_obs(&self) -> usize {
        self.0.n_obs
    }

    fn abnormal_return(&self, firm_ret: f64, market_ret: f64) -> f64 {
        study::abnormal_return(&self.0, firm_ret, market_ret)
    }

    fn standardize(&self, ar: f64, market_ret: f64) -> f64 {
        study::standardize(&self.0, ar, market_ret)
    }

    fn __repr__(&self) -> String {
        format!(
            "MarketModelFit(alpha={}, beta={}, resid_std={}, n_obs={})",
            self.0.alpha, self.0.beta, self.0.resid_std, self.0.n_obs
        )
    }
}

/// OLS of firm on market returns over equal-length windows.
#[pyfunction]
fn fit_market_model(market: Vec<f64>, firm: Vec<f64>) -> PyResult<PyFit> {
    if market.len() != firm.len() {
        return Err(PyValueError::new_err("market and firm returns differ in length"));
    }
    study::MarketModelFit::estimate(&market, &firm)
        .map(PyFit)
        .map_err(|r| PyArithmeticError::new_err(r.to_string()))
}

/// Cross-sectional t statistic, or None when undefined.
#[pyfunction]
fn bmp_tstat(values: Vec<f64>) -> Option<f64> {
    study::bmp_tstat(&values).ok()
}

/// Running sum of a SAAR path.
#[pyfunction]
fn cumulative_path(saar: Vec<f64>) -> Vec<f64> {
    study::cumulative_path(&saar)
}

/// Significance stars for a t value (normal approximation).
#[pyfunction]
fn stars(t: f64) -> &'static str {
    esgrisk::report::stars(t)
}

fn run_config(config: Option<PathBuf>, out_dir: Option<PathBuf>) -> PyResult<RunConfig> {
    let mut cfg = match config {
        Some(p) => RunConfig::load(&p).map_err(to_py)?,
        None => RunConfig::default(),
    };
    if let Some(o) = out_dir {
        cfg.out_dir = o;
    }
    Ok(cfg)
}

/// Run classify, detect and study from a TOML config. Returns a summary
/// dict with event counts and the per-node SAAR(t0) values.
#[pyfunction]
#[pyo3(signature = (config, out_dir = None))]
fn run_pipeline<'py>(py: Python<'py>, config: PathBuf, out_dir: Option<PathBuf>) -> PyResult<Bound<'py, PyDict>> {
    let cfg = run_config(Some(config), out_dir)?;
    let s = py.detach(|| pipeline::cmd_pipeline(&cfg)).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("messages", s.classify.messages)?;
    d.set_item("kept", s.detect.kept)?;
    d.set_item("positive", s.detect.positive)?;
    d.set_item("removed", s.detect.removed)?;
    d.set_item("studied", s.study.main.abnormals.len())?;
    d.set_item("dropped", s.study.main.dropped.len())?;
    let rows = PyDict::new(py);
    for r in &s.study.main.results {
        let st = r.saar_at(0);
        rows.set_item(
            r.node.ident(),
            (r.n, st.and_then(|x| x.value), st.and_then(|x| x.t.ok())),
        )?;
    }
    d.set_item("saar_t0", rows)?;
    d.set_item("out_dir", cfg.out_dir.to_string_lossy().to_string())?;
    Ok(d)
}

/// Write a synthetic dataset (plus `config.toml`) into `out_dir`.
#[pyfunction]
#[pyo3(signature = (out_dir, seed = 42, n_firms = 5, n_days = 500, effect = 0.0, events_per_firm = 3, spike = 10.0, noise_rate = 350.0, negative = true))]
#[allow(clippy::too_many_arguments)]
fn synth<'py>(
    py: Python<'py>,
    out_dir: PathBuf,
    seed: u64,
    n_firms: usize,
    n_days: usize,
    effect: f64,
    events_per_firm: usize,
    spike: f64,
    noise_rate: f64,
    negative: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = SynthSpec {
        synth: SynthConfig { seed, n_firms, n_days, injected_ar: effect, noise_rate, ..Default::default() },
        schedule: Some(PlantSchedule {
            per_firm: events_per_firm,
            spike_size: spike,
            sign: if negative { Sign::Negative } else { Sign::Positive },
            ..Default::default()
        }),
    };
    let ds = py.detach(|| pipeline::cmd_synth(&spec, &out_dir)).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("messages", ds.messages.len())?;
    d.set_item("planted", ds.truth.planted.len())?;
    d.set_item("config", out_dir.join("config.toml").to_string_lossy().to_string())?;
    d.set_item("ground_truth", out_dir.join("ground_truth.csv").to_string_lossy().to_string())?;
    Ok(d)
}

/// Taxonomy node identifiers in report order.
#[pyfunction]
fn taxonomy() -> Vec<(String, String, Option<String>)> {
    esgrisk::report::report_order()
        .into_iter()
        .map(|n| (n.ident().to_string(), n.label().to_string(), n.parent().map(|p| p.ident().to_string())))
        .collect()
}

/// ESG reputational-risk event detection and event study.
#[pymodule]
mod esgrisk_py {
    #[pymodule_export]
    use super::{
        bmp_tstat, classify_sign, cumulative_path, esd_outliers, fit_market_model, run_pipeline, stars, synth, taxonomy,
        tokenize, PyFit, PyLexicon, PySentimentLexicon,
    };
}
