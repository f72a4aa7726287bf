use std::io::Write;

use super::experiment::{run_experiment, EvalReport, ExperimentConfig, ExperimentOutcome};
use super::EvalError;
use crate::frames::InputKind;
use crate::sim::LabeledRecording;

pub const DEFAULT_SWEEP_TIMES_MS: [u64; 5] = [10, 25, 50, 100, 200];

/// One row of a sweep or comparison: the configuration and its outcome.
#[derive(Debug)]
pub struct ProtocolRow {
    pub input_kind: InputKind,
    pub integration_time_ms: f64,
    pub result: Result<EvalReport, EvalError>,
}

/// Trains and evaluates one model per integration time, otherwise with the
/// same config. Failures are recorded per row; rows are sorted by `T`.
pub fn sweep_integration_time(rec: &LabeledRecording, times_ms: &[u64], base: &ExperimentConfig) -> Vec<ProtocolRow> {
    let mut times = times_ms.to_vec();
    times.sort_unstable();
    times.dedup();
    times
        .into_iter()
        .map(|t| {
            let cfg = ExperimentConfig { integration_time_us: t * 1000, ..base.clone() };
            ProtocolRow {
                input_kind: cfg.input_kind,
                integration_time_ms: t as f64,
                result: run_experiment(rec, &cfg).map(|o: ExperimentOutcome| o.report),
            }
        })
        .collect()
}

/// Trains and evaluates one model per input kind with identical seeds.
/// A recording lacking a required modality is rejected up front.
pub fn compare_inputs(
    rec: &LabeledRecording,
    kinds: &[InputKind],
    base: &ExperimentConfig,
) -> Result<Vec<ProtocolRow>, EvalError> {
    if kinds.iter().any(|&k| k != InputKind::Events) && rec.gray_frames.is_empty() {
        return Err(EvalError::MissingModality("grayscale frames"));
    }
    Ok(kinds
        .iter()
        .map(|&kind| {
            let cfg = ExperimentConfig { input_kind: kind, ..base.clone() };
            ProtocolRow {
                input_kind: kind,
                integration_time_ms: cfg.integration_time_ms(),
                result: run_experiment(rec, &cfg).map(|o| o.report),
            }
        })
        .collect())
}

/// Header plus one row per configuration. Failed rows keep empty metric
/// cells and carry the error message.
pub fn write_rows_csv<W: Write>(out: W, rows: &[ProtocolRow]) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    let fmt_err = |e: csv::Error| EvalError::Format(e.to_string());
    w.write_record(["T_ms", "input_kind", "rmse_deg", "eva", "n_samples", "status"]).map_err(fmt_err)?;
    for r in rows {
        let (rmse, eva, n, status) = match &r.result {
            Ok(rep) => (
                rep.rmse_deg.to_string(),
                rep.eva.map(|v| v.to_string()).unwrap_or_default(),
                rep.n_samples.to_string(),
                "ok".to_string(),
            ),
            Err(e) => (String::new(), String::new(), String::new(), format!("error: {e}")),
        };
        w.write_record([r.integration_time_ms.to_string(), r.input_kind.to_string(), rmse, eva, n, status])
            .map_err(fmt_err)?;
    }
    w.flush()?;
    Ok(())
}
