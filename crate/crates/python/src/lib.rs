//! Python bindings for `evsteer_core`.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use evsteer_core::eval::{self, ExperimentConfig};
use evsteer_core::events::{self, Event, Format, Polarity, Window};
use evsteer_core::frames::{self, InputKind};
use evsteer_core::labels::{self, PipelineConfig, Sample};
use evsteer_core::nn::{self, ModelConfig, Tensor};
use evsteer_core::sim::{self, SimConfig};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn io_err(e: std::io::Error) -> PyErr {
    PyIOError::new_err(e.to_string())
}

/// Serializes through JSON so Python receives plain dicts and lists.
fn to_py<T: serde::Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(v).map_err(value_err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

type EventTuple = (u64, u16, u16, i8);
type Histograms = (Vec<Vec<u32>>, Vec<Vec<u32>>);
type Segments = Vec<(u64, u64)>;
type SampleTuple = (u64, usize, f64, f64);
type Recording = (PyEventStream, usize, Vec<(u64, f64, f64)>);

fn parse_kind(kind: &str) -> PyResult<InputKind> {
    kind.parse().map_err(PyValueError::new_err)
}

fn parse_format(format: &str) -> PyResult<Format> {
    format.parse().map_err(PyValueError::new_err)
}

/// A validated, time-ordered event stream.
#[pyclass(name = "EventStream", module = "evsteer", skip_from_py_object)]
#[derive(Clone)]
struct PyEventStream {
    inner: events::EventStream,
}

#[pymethods]
impl PyEventStream {
    /// `events` is a list of `(t_us, x, y, polarity)` with polarity -1 or 1.
    #[new]
    fn new(width: u16, height: u16, events: Vec<EventTuple>) -> PyResult<Self> {
        let evs = events
            .into_iter()
            .enumerate()
            .map(|(i, (t, x, y, p))| {
                Polarity::from_i8(p)
                    .map(|p| Event::new(t, x, y, p))
                    .ok_or_else(|| PyValueError::new_err(format!("invalid polarity at record {i}")))
            })
            .collect::<PyResult<Vec<_>>>()?;
        let inner = events::EventStream::new(width, height, evs).map_err(value_err)?;
        Ok(PyEventStream { inner })
    }

    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        Ok(PyEventStream { inner: events::read_events_file(&path).map_err(value_err)? })
    }

    /// Writes as `"binary"` (EVT1) or `"csv"`.
    #[pyo3(signature = (path, format = "binary"))]
    fn write(&self, path: PathBuf, format: &str) -> PyResult<()> {
        std::fs::write(path, events::write_events(&self.inner, parse_format(format)?)).map_err(io_err)
    }

    #[getter]
    fn width(&self) -> u16 {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> u16 {
        self.inner.height()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("EventStream({}x{}, {} events)", self.inner.width(), self.inner.height(), self.inner.len())
    }

    fn to_list(&self) -> Vec<EventTuple> {
        self.inner.events().iter().map(|e| (e.t, e.x, e.y, e.p.as_i8())).collect()
    }

    /// Events in `[t_start, t_start + duration)`.
    fn slice(&self, t_start: u64, duration: u64) -> PyResult<Vec<EventTuple>> {
        if duration == 0 {
            return Err(PyValueError::new_err("duration must be positive"));
        }
        let evs = self.inner.slice(Window::new(t_start, duration));
        Ok(evs.iter().map(|e| (e.t, e.x, e.y, e.p.as_i8())).collect())
    }

    /// `(t_start, n_events)` for each window of the stream.
    #[pyo3(signature = (duration, stride = None))]
    fn windows(&self, duration: u64, stride: Option<u64>) -> PyResult<Vec<(u64, usize)>> {
        let stride = stride.unwrap_or(duration);
        if duration == 0 || stride == 0 {
            return Err(PyValueError::new_err("duration and stride must be positive"));
        }
        Ok(self.inner.windows(duration, stride).map(|(w, evs)| (w.t_start, evs.len())).collect())
    }

    /// Positive and negative count histograms over one window, as row lists.
    fn accumulate(&self, t_start: u64, duration: u64) -> PyResult<Histograms> {
        if duration == 0 {
            return Err(PyValueError::new_err("duration must be positive"));
        }
        let window = Window::new(t_start, duration);
        let (w, h) = (self.inner.width() as usize, self.inner.height() as usize);
        let f = frames::accumulate_events(self.inner.slice(window), window, w, h).map_err(value_err)?;
        let rows = |img: &evsteer_core::image::Image<u32>| img.data().chunks(w.max(1)).map(<[u32]>::to_vec).collect();
        Ok((rows(&f.h_plus), rows(&f.h_minus)))
    }
}

/// Simulates a recording from a JSON config; writes it to `out_dir` when
/// given. Returns `(events, n_gray_frames, labels)`.
#[pyfunction]
#[pyo3(signature = (config_json, out_dir = None))]
fn simulate(config_json: &str, out_dir: Option<PathBuf>) -> PyResult<Recording> {
    let cfg = SimConfig::from_json(config_json).map_err(value_err)?;
    let rec = sim::generate_recording(&cfg).map_err(value_err)?;
    if let Some(dir) = out_dir {
        sim::write_recording(&dir, &rec, Some(&cfg)).map_err(value_err)?;
    }
    let labels = rec.labels.iter().map(|l| (l.t_us, l.angle_deg, l.speed_kmh)).collect();
    Ok((PyEventStream { inner: rec.events }, rec.gray_frames.len(), labels))
}

#[pyfunction]
fn rmse(pred: Vec<f64>, obs: Vec<f64>) -> PyResult<f64> {
    eval::rmse(&pred, &obs).map_err(value_err)
}

#[pyfunction]
fn eva(pred: Vec<f64>, obs: Vec<f64>) -> PyResult<f64> {
    eval::eva(&pred, &obs).map_err(value_err)
}

/// `[{lo_deg, hi_deg, count, median}]` per `|obs|` bin.
#[pyfunction]
#[pyo3(signature = (pred, obs, edges = None))]
fn relative_error_by_angle(
    py: Python<'_>,
    pred: Vec<f64>,
    obs: Vec<f64>,
    edges: Option<Vec<f64>>,
) -> PyResult<Py<PyAny>> {
    let edges = edges.unwrap_or_else(|| eval::DEFAULT_ANGLE_EDGES.to_vec());
    to_py(py, &eval::relative_error_by_angle(&pred, &obs, &edges).map_err(value_err)?)
}

/// Returns `(train_segments, test_segments)` as `[start, end)` pairs.
#[pyfunction]
#[pyo3(signature = (span_us, train_len_us = eval::DEFAULT_TRAIN_LEN_US, test_len_us = eval::DEFAULT_TEST_LEN_US))]
fn make_split(span_us: u64, train_len_us: u64, test_len_us: u64) -> PyResult<(Segments, Segments)> {
    if train_len_us == 0 || test_len_us == 0 {
        return Err(PyValueError::new_err("segment lengths must be positive"));
    }
    let plan = eval::make_split(span_us, train_len_us, test_len_us);
    Ok((plan.train, plan.test))
}

/// Runs the training-label pipeline on `(t_us, window_index, angle_deg,
/// speed_kmh)` tuples. Returns `(kept samples, normalized targets, stats)`.
#[pyfunction]
#[pyo3(signature = (samples, seed = 0))]
fn prepare_train(
    py: Python<'_>,
    samples: Vec<SampleTuple>,
    seed: u64,
) -> PyResult<(Vec<SampleTuple>, Vec<f64>, Py<PyAny>)> {
    let samples: Vec<Sample> = samples
        .into_iter()
        .map(|(t_us, window_index, angle_deg, speed_kmh)| Sample { t_us, window_index, angle_deg, speed_kmh })
        .collect();
    let cfg = PipelineConfig { seed, ..PipelineConfig::default() };
    let p = labels::prepare_train(&samples, &cfg).map_err(value_err)?;
    let kept = p.samples.iter().map(|s| (s.t_us, s.window_index, s.angle_deg, s.speed_kmh)).collect();
    Ok((kept, p.targets, to_py(py, &p.stats)?))
}

/// The residual CNN regressor.
#[pyclass(name = "Model", module = "evsteer")]
struct PyModel {
    inner: nn::Model<f32>,
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (input_channels = 2, stem_channels = 8, num_residual_blocks = 2, head_hidden = 64, seed = 0))]
    fn new(
        input_channels: usize,
        stem_channels: usize,
        num_residual_blocks: usize,
        head_hidden: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let cfg = ModelConfig { input_channels, stem_channels, num_residual_blocks, head_hidden, seed };
        Ok(PyModel { inner: nn::init_model(&cfg).map_err(value_err)? })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let bytes = std::fs::read(path).map_err(io_err)?;
        Ok(PyModel { inner: nn::load_model(&bytes).map_err(value_err)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        std::fs::write(path, nn::save_model(&self.inner)).map_err(io_err)
    }

    #[getter]
    fn parameter_count(&self) -> usize {
        self.inner.parameter_count()
    }

    #[getter]
    fn config(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.config)
    }

    /// Forward pass on a batch given as flat row-major `(C, H, W)` samples.
    fn predict(&self, inputs: Vec<Vec<f32>>, height: usize, width: usize) -> PyResult<Vec<f32>> {
        let c = self.inner.config.input_channels;
        let n = inputs.len();
        let flat: Vec<f32> = inputs.into_iter().flatten().collect();
        let batch = Tensor::from_vec(&[n, c, height, width], flat).map_err(value_err)?;
        self.inner.forward(&batch).map_err(value_err)
    }
}

/// Trains and evaluates one model on a recording directory.
#[pyfunction]
#[pyo3(signature = (data_dir, input_kind = "events", t_ms = 50, epochs = 10, seed = 0, experiment_json = None))]
fn run_experiment(
    py: Python<'_>,
    data_dir: PathBuf,
    input_kind: &str,
    t_ms: u64,
    epochs: usize,
    seed: u64,
    experiment_json: Option<&str>,
) -> PyResult<Py<PyAny>> {
    let mut cfg: ExperimentConfig = match experiment_json {
        Some(text) => serde_json::from_str(text).map_err(value_err)?,
        None => ExperimentConfig::default(),
    };
    cfg.input_kind = parse_kind(input_kind)?;
    cfg.integration_time_us = t_ms * 1000;
    cfg.train.epochs = epochs;
    cfg.train.seed = seed;
    cfg.model.seed = seed;
    cfg.pipeline.seed = seed;
    let rec = sim::read_recording(&data_dir).map_err(value_err)?;
    let out = py.detach(|| eval::run_experiment(&rec, &cfg)).map_err(value_err)?;
    to_py(py, &out.report)
}

#[pymodule]
fn evsteer(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEventStream>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(rmse, m)?)?;
    m.add_function(wrap_pyfunction!(eva, m)?)?;
    m.add_function(wrap_pyfunction!(relative_error_by_angle, m)?)?;
    m.add_function(wrap_pyfunction!(make_split, m)?)?;
    m.add_function(wrap_pyfunction!(prepare_train, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
