use serde::{Deserialize, Serialize};

use super::metrics::{eva, relative_error_by_angle, rmse, RelErrorBin, DEFAULT_ANGLE_EDGES};
use super::split::{make_split, Subset, DEFAULT_TEST_LEN_US, DEFAULT_TRAIN_LEN_US};
use super::EvalError;
use crate::events::Window;
use crate::frames::{accumulate_events, to_input, EventScaling, InputKind, InputSource};
use crate::labels::{associate_future_label, denormalize_angle, prepare_train, LabelStats, PipelineConfig, Sample};
use crate::nn::{init_model, predict, train, Dataset, Model, ModelConfig, TrainConfig};
use crate::sim::LabeledRecording;

/// Everything needed to turn a recording into one trained and evaluated model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub input_kind: InputKind,
    pub integration_time_us: u64,
    /// Spacing of consecutive window ends.
    pub stride_us: u64,
    /// End of the first window; `None` means one integration time.
    pub first_end_us: Option<u64>,
    pub train_len_us: u64,
    pub test_len_us: u64,
    pub scaling: EventScaling,
    pub pipeline: PipelineConfig,
    /// `input_channels` is overridden by the input kind.
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub angle_edges: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            input_kind: InputKind::Events,
            integration_time_us: 50_000,
            stride_us: 50_000,
            first_end_us: None,
            train_len_us: DEFAULT_TRAIN_LEN_US,
            test_len_us: DEFAULT_TEST_LEN_US,
            scaling: EventScaling::PerFrameMax,
            pipeline: PipelineConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            angle_edges: DEFAULT_ANGLE_EDGES.to_vec(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.integration_time_us == 0 || self.stride_us == 0 {
            return Err(EvalError::Config("integration time and stride must be positive".into()));
        }
        if self.train_len_us == 0 || self.test_len_us == 0 {
            return Err(EvalError::Config("split segment lengths must be positive".into()));
        }
        if self.first_end_us.is_some_and(|e| e < self.integration_time_us) {
            return Err(EvalError::Config("first window end precedes the integration time".into()));
        }
        self.model_config().validate()?;
        self.train.validate()?;
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig { input_channels: self.input_kind.channels(), ..self.model.clone() }
    }

    pub fn integration_time_ms(&self) -> f64 {
        self.integration_time_us as f64 / 1000.0
    }
}

/// Network inputs built from a recording, one per window end.
#[derive(Clone, Debug, PartialEq)]
pub struct InputSet {
    pub kind: InputKind,
    pub shape: [usize; 3],
    /// Window end (sample timestamp) of each input.
    pub times: Vec<u64>,
    pub values: Vec<Vec<f32>>,
}

impl InputSet {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Builds inputs for windows `[t - T, t)` with `t = first_end, first_end + stride, ...`
/// up to the recording span. Grayscale inputs use the latest frame at or
/// before `t` (and its predecessor for `graydiff`); ends lacking the frames
/// they need are skipped.
pub fn build_inputs(rec: &LabeledRecording, cfg: &ExperimentConfig) -> Result<InputSet, EvalError> {
    let kind = cfg.input_kind;
    let (w, h) = (rec.width(), rec.height());
    if kind != InputKind::Events && rec.gray_frames.is_empty() {
        return Err(EvalError::MissingModality("grayscale frames"));
    }
    let t_len = cfg.integration_time_us;
    let span = rec.span_us();
    let mut set = InputSet { kind, shape: [kind.channels(), h, w], times: Vec::new(), values: Vec::new() };
    let mut t_end = cfg.first_end_us.unwrap_or(t_len);
    while t_end <= span {
        let frame_idx = rec.gray_frames.partition_point(|f| f.t_us <= t_end).checked_sub(1);
        let source = match kind {
            InputKind::Events => None,
            InputKind::Gray => frame_idx.map(|i| InputSource::Gray(&rec.gray_frames[i].image)),
            InputKind::Graydiff => frame_idx.filter(|&i| i > 0).map(|i| InputSource::Graydiff {
                current: &rec.gray_frames[i].image,
                previous: &rec.gray_frames[i - 1].image,
            }),
        };
        let tensor = match (kind, source) {
            (InputKind::Events, _) => {
                let window = Window::new(t_end - t_len, t_len);
                let frame = accumulate_events(rec.events.slice(window), window, w, h)?;
                Some(to_input(InputSource::Events(&frame), cfg.scaling)?)
            }
            (_, Some(src)) => Some(to_input(src, cfg.scaling)?),
            (_, None) => None,
        };
        if let Some(t) = tensor {
            set.times.push(t_end);
            set.values.push(t.values);
        }
        t_end += cfg.stride_us;
    }
    Ok(set)
}

/// Labelled samples of one input set, split into train and test.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitSamples {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    /// Inputs without a label at `t + horizon`.
    pub dropped: usize,
}

pub fn split_samples(inputs: &InputSet, rec: &LabeledRecording, cfg: &ExperimentConfig) -> SplitSamples {
    let pairs: Vec<(usize, u64)> = inputs.times.iter().copied().enumerate().collect();
    let assoc = associate_future_label(&pairs, &rec.labels, cfg.pipeline.horizon_us());
    let plan = make_split(rec.span_us(), cfg.train_len_us, cfg.test_len_us);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for s in assoc.samples {
        match plan.subset_of(s.t_us) {
            Some(Subset::Train) => train.push(s),
            Some(Subset::Test) => test.push(s),
            None => {}
        }
    }
    SplitSamples { train, test, dropped: assoc.dropped }
}

/// Test-set metrics of one trained model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rmse_deg: f64,
    /// `None` when the observed angles have zero variance.
    pub eva: Option<f64>,
    pub n_samples: usize,
    pub input_kind: InputKind,
    #[serde(rename = "T_ms")]
    pub integration_time_ms: f64,
    pub relative_error_bins: Vec<RelErrorBin>,
}

/// Trained model together with what is needed to reuse it.
#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub model: Model<f32>,
    pub stats: LabelStats,
    pub loss_history: Vec<f64>,
    pub n_train: usize,
    pub report: EvalReport,
}

/// Builds inputs, prepares the training labels, trains from scratch and
/// evaluates on the test split (metrics on denormalized degrees).
pub fn run_experiment(rec: &LabeledRecording, cfg: &ExperimentConfig) -> Result<ExperimentOutcome, EvalError> {
    cfg.validate()?;
    let inputs = build_inputs(rec, cfg)?;
    let split = split_samples(&inputs, rec, cfg);
    let prepared = prepare_train(&split.train, &cfg.pipeline)?;
    let mut model = init_model::<f32>(&cfg.model_config())?;
    let xs: Vec<&[f32]> = prepared.samples.iter().map(|s| inputs.values[s.window_index].as_slice()).collect();
    let ys: Vec<f32> = prepared.targets.iter().map(|&v| v as f32).collect();
    let data = Dataset::new(inputs.shape, xs, ys)?;
    let report = train(&mut model, &data, &cfg.train)?;
    let eval = evaluate_samples(&model, &inputs, &split.test, cfg)?;
    Ok(ExperimentOutcome {
        model,
        stats: prepared.stats,
        loss_history: report.loss_history,
        n_train: prepared.samples.len(),
        report: eval,
    })
}

/// Evaluates a trained model on the test split of `rec` under `cfg`.
pub fn evaluate_model(
    model: &Model<f32>,
    rec: &LabeledRecording,
    cfg: &ExperimentConfig,
) -> Result<EvalReport, EvalError> {
    cfg.validate()?;
    if model.config.input_channels != cfg.input_kind.channels() {
        return Err(EvalError::Config(format!(
            "model expects {} input channels but '{}' inputs have {}",
            model.config.input_channels,
            cfg.input_kind,
            cfg.input_kind.channels()
        )));
    }
    let inputs = build_inputs(rec, cfg)?;
    let split = split_samples(&inputs, rec, cfg);
    evaluate_samples(model, &inputs, &split.test, cfg)
}

fn evaluate_samples(
    model: &Model<f32>,
    inputs: &InputSet,
    test: &[Sample],
    cfg: &ExperimentConfig,
) -> Result<EvalReport, EvalError> {
    if test.is_empty() {
        return Err(EvalError::TooFewSamples { got: 0, need: 1 });
    }
    let xs: Vec<&[f32]> = test.iter().map(|s| inputs.values[s.window_index].as_slice()).collect();
    let raw = predict(model, inputs.shape, &xs, cfg.train.batch_size.max(64))?;
    let pred: Vec<f64> = raw.iter().map(|&v| denormalize_angle(v as f64, cfg.pipeline.angle_full_scale_deg)).collect();
    let obs: Vec<f64> = test.iter().map(|s| s.angle_deg).collect();
    Ok(EvalReport {
        rmse_deg: rmse(&pred, &obs)?,
        eva: match eva(&pred, &obs) {
            Ok(v) => Some(v),
            Err(EvalError::ZeroVariance | EvalError::TooFewSamples { .. }) => None,
            Err(e) => return Err(e),
        },
        n_samples: obs.len(),
        input_kind: cfg.input_kind,
        integration_time_ms: cfg.integration_time_ms(),
        relative_error_bins: relative_error_by_angle(&pred, &obs, &cfg.angle_edges)?,
    })
}
