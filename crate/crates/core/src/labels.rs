//! Steering-label preprocessing: future-label association, speed filtering,
//! straight-road subsampling, outlier trimming and angle normalization.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::Label;

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("need at least 2 samples to fit label statistics, got {0}")]
    TooFewSamples(usize),
    #[error("sample file error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One input window paired with its steering label.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// Timestamp of the input (window end).
    pub t_us: u64,
    pub window_index: usize,
    pub angle_deg: f64,
    pub speed_kmh: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Test,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrimMode {
    /// Saturate angles at the clip value.
    Clip,
    /// Drop training samples beyond the clip value.
    Discard,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub horizon_s: f64,
    pub speed_min_kmh: f64,
    pub straight_thresh_deg: f64,
    pub straight_keep_frac: f64,
    pub angle_full_scale_deg: f64,
    pub trim: TrimMode,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            horizon_s: 1.0 / 3.0,
            speed_min_kmh: 20.0,
            straight_thresh_deg: 5.0,
            straight_keep_frac: 0.30,
            angle_full_scale_deg: 180.0,
            trim: TrimMode::Clip,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn horizon_us(&self) -> f64 {
        self.horizon_s * 1e6
    }
}

/// Result of [`associate_future_label`].
#[derive(Clone, Debug, PartialEq)]
pub struct Association {
    pub samples: Vec<Sample>,
    pub dropped: usize,
}

/// Pairs each `(window_index, t_us)` input with the label nearest to
/// `t + horizon`, accepted only when it lies within half the label cadence
/// (median spacing). Unmatched inputs are dropped and counted.
pub fn associate_future_label(inputs: &[(usize, u64)], labels: &[Label], horizon_us: f64) -> Association {
    let tolerance = label_cadence(labels) / 2.0;
    let mut samples = Vec::with_capacity(inputs.len());
    let mut dropped = 0;
    for &(window_index, t) in inputs {
        let target = t as f64 + horizon_us;
        let i = labels.partition_point(|l| (l.t_us as f64) < target);
        let nearest =
            [i.checked_sub(1), Some(i)].into_iter().flatten().filter(|&j| j < labels.len()).min_by(|&a, &b| {
                let da = (labels[a].t_us as f64 - target).abs();
                let db = (labels[b].t_us as f64 - target).abs();
                da.total_cmp(&db)
            });
        match nearest {
            Some(j) if (labels[j].t_us as f64 - target).abs() <= tolerance => samples.push(Sample {
                t_us: t,
                window_index,
                angle_deg: labels[j].angle_deg,
                speed_kmh: labels[j].speed_kmh,
            }),
            _ => dropped += 1,
        }
    }
    Association { samples, dropped }
}

fn label_cadence(labels: &[Label]) -> f64 {
    let mut gaps: Vec<u64> = labels.windows(2).map(|w| w[1].t_us - w[0].t_us).collect();
    if gaps.is_empty() {
        return 0.0;
    }
    gaps.sort_unstable();
    gaps[gaps.len() / 2] as f64
}

/// Train mode keeps `speed >= speed_min`; test mode keeps everything.
pub fn filter_by_speed(samples: &[Sample], speed_min_kmh: f64, mode: Mode) -> Vec<Sample> {
    match mode {
        Mode::Train => samples.iter().filter(|s| s.speed_kmh >= speed_min_kmh).copied().collect(),
        Mode::Test => samples.to_vec(),
    }
}

/// `ceil(frac * n)`, robust to `0.3 * 10 = 3.0000000000000004`.
pub fn keep_quota(n: usize, keep_frac: f64) -> usize {
    let raw = keep_frac * n as f64;
    let rounded = raw.round();
    let q = if (raw - rounded).abs() < 1e-9 { rounded } else { raw.ceil() };
    (q as usize).min(n)
}

/// In train mode, keeps exactly `ceil(keep_frac * n)` of the `n` samples with
/// `|angle| < straight_thresh`, chosen by a seeded permutation. Order is kept.
pub fn subsample_straight(
    samples: &[Sample],
    straight_thresh_deg: f64,
    keep_frac: f64,
    seed: u64,
    mode: Mode,
) -> Vec<Sample> {
    if mode == Mode::Test {
        return samples.to_vec();
    }
    let straight: Vec<usize> =
        (0..samples.len()).filter(|&i| samples[i].angle_deg.abs() < straight_thresh_deg).collect();
    if straight.is_empty() {
        return samples.to_vec();
    }
    let quota = keep_quota(straight.len(), keep_frac);
    let mut order = straight.clone();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut keep = vec![true; samples.len()];
    for &i in &order[quota..] {
        keep[i] = false;
    }
    samples.iter().zip(keep).filter(|(_, k)| *k).map(|(s, _)| *s).collect()
}

/// Spread of the training angles; `clip = 3 * sigma`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelStats {
    #[serde(rename = "sigma_deg")]
    pub sigma: f64,
    #[serde(rename = "clip_deg")]
    pub clip: f64,
}

impl LabelStats {
    pub fn from_sigma(sigma: f64) -> Self {
        LabelStats { sigma, clip: 3.0 * sigma }
    }
}

/// Population standard deviation of the sample angles.
pub fn fit_stats(samples: &[Sample]) -> Result<LabelStats, LabelError> {
    if samples.len() < 2 {
        return Err(LabelError::TooFewSamples(samples.len()));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s.angle_deg).sum::<f64>() / n;
    let var = samples.iter().map(|s| (s.angle_deg - mean).powi(2)).sum::<f64>() / n;
    Ok(LabelStats::from_sigma(var.sqrt()))
}

/// Clips to `[-clip, clip]` and divides by `full_scale`.
pub fn normalize_angle(angle_deg: f64, stats: &LabelStats, full_scale_deg: f64) -> f64 {
    angle_deg.clamp(-stats.clip, stats.clip) / full_scale_deg
}

/// `value * full_scale`, clamped to `[-180, 180]`.
pub fn denormalize_angle(value: f64, full_scale_deg: f64) -> f64 {
    (value * full_scale_deg).clamp(-180.0, 180.0)
}

/// Training subset after speed filter, straight subsampling and trimming,
/// together with the statistics fitted on it.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedTrain {
    pub samples: Vec<Sample>,
    pub targets: Vec<f64>,
    pub stats: LabelStats,
}

pub fn prepare_train(samples: &[Sample], cfg: &PipelineConfig) -> Result<PreparedTrain, LabelError> {
    let fast = filter_by_speed(samples, cfg.speed_min_kmh, Mode::Train);
    let mut kept = subsample_straight(&fast, cfg.straight_thresh_deg, cfg.straight_keep_frac, cfg.seed, Mode::Train);
    let stats = fit_stats(&kept)?;
    if cfg.trim == TrimMode::Discard {
        kept.retain(|s| s.angle_deg.abs() <= stats.clip);
    }
    let targets = kept.iter().map(|s| normalize_angle(s.angle_deg, &stats, cfg.angle_full_scale_deg)).collect();
    Ok(PreparedTrain { samples: kept, targets, stats })
}

pub fn write_samples_csv(path: &Path, samples: &[Sample]) -> Result<(), LabelError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| LabelError::Format(e.to_string()))?;
    w.write_record(["t_us", "window_index", "angle_deg", "speed_kmh"])
        .map_err(|e| LabelError::Format(e.to_string()))?;
    for s in samples {
        w.write_record([
            s.t_us.to_string(),
            s.window_index.to_string(),
            s.angle_deg.to_string(),
            s.speed_kmh.to_string(),
        ])
        .map_err(|e| LabelError::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples_csv(path: &Path) -> Result<Vec<Sample>, LabelError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| LabelError::Format(e.to_string()))?;
    r.deserialize().map(|row| row.map_err(|e| LabelError::Format(e.to_string()))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(t: u64, angle: f64, speed: f64) -> Sample {
        Sample { t_us: t, window_index: t as usize, angle_deg: angle, speed_kmh: speed }
    }

    fn labels_every(period: u64, until: u64, angle: impl Fn(u64) -> f64) -> Vec<Label> {
        (0..until).step_by(period as usize).map(|t| Label { t_us: t, angle_deg: angle(t), speed_kmh: 30.0 }).collect()
    }

    #[test]
    fn future_label_is_nearest_to_horizon() {
        let labels = labels_every(10_000, 2_000_000, |t| t as f64);
        let a = associate_future_label(&[(0, 0)], &labels, 1e6 / 3.0);
        assert_eq!(a.dropped, 0);
        let chosen = a.samples[0].angle_deg;
        assert!((chosen - 333_333.0).abs() <= 5_000.0, "{chosen}");
        assert_eq!(chosen, 330_000.0);
    }

    #[test]
    fn late_windows_are_dropped() {
        let labels = labels_every(10_000, 1_000_000, |_| 4.0);
        let a = associate_future_label(&[(0, 100_000), (1, 900_000)], &labels, 1e6 / 3.0);
        assert_eq!(a.samples.len(), 1);
        assert_eq!(a.dropped, 1);
        assert!(a.samples.iter().all(|s| s.angle_deg == 4.0));
    }

    #[test]
    fn speed_filter() {
        let xs: Vec<Sample> = [10.0, 25.0, 19.9, 20.0].iter().enumerate().map(|(i, &v)| s(i as u64, 0.0, v)).collect();
        let kept: Vec<f64> = filter_by_speed(&xs, 20.0, Mode::Train).iter().map(|s| s.speed_kmh).collect();
        assert_eq!(kept, vec![25.0, 20.0]);
        assert_eq!(filter_by_speed(&xs, 20.0, Mode::Test).len(), 4);
        assert!(filter_by_speed(&[], 20.0, Mode::Train).is_empty());
    }

    #[test]
    fn straight_quota_is_exact() {
        let mut xs: Vec<Sample> = (0..10).map(|i| s(i, 1.0, 30.0)).collect();
        xs.extend((10..15).map(|i| s(i, 12.0, 30.0)));
        let out = subsample_straight(&xs, 5.0, 0.30, 9, Mode::Train);
        assert_eq!(out.iter().filter(|s| s.angle_deg.abs() < 5.0).count(), 3);
        assert_eq!(out.iter().filter(|s| s.angle_deg >= 5.0).count(), 5);
        assert!(out.windows(2).all(|w| w[0].t_us < w[1].t_us));
        assert_eq!(out, subsample_straight(&xs, 5.0, 0.30, 9, Mode::Train));
        assert_eq!(subsample_straight(&xs, 5.0, 0.30, 9, Mode::Test), xs);
        let curvy: Vec<Sample> = (0..4).map(|i| s(i, -30.0, 30.0)).collect();
        assert_eq!(subsample_straight(&curvy, 5.0, 0.3, 1, Mode::Train), curvy);
        // Magnitude, not signed angle.
        let neg: Vec<Sample> = (0..10).map(|i| s(i, -2.0, 30.0)).collect();
        assert_eq!(subsample_straight(&neg, 5.0, 0.3, 1, Mode::Train).len(), 3);
    }

    #[test]
    fn quota_rounding() {
        assert_eq!(keep_quota(10, 0.3), 3);
        assert_eq!(keep_quota(11, 0.3), 4);
        assert_eq!(keep_quota(1, 0.3), 1);
        assert_eq!(keep_quota(0, 0.3), 0);
        assert_eq!(keep_quota(7, 1.0), 7);
        for n in 0..2000usize {
            let expected = (3 * n).div_ceil(10);
            assert_eq!(keep_quota(n, 0.3), expected, "n={n}");
        }
    }

    #[test]
    fn stats_examples() {
        let xs: Vec<Sample> = [0.0, 0.0, 0.0, 0.0, 100.0].iter().map(|&a| s(0, a, 30.0)).collect();
        let st = fit_stats(&xs).unwrap();
        assert!((st.sigma - 40.0).abs() < 1e-12);
        assert!((st.clip - 120.0).abs() < 1e-12);
        let same: Vec<Sample> = (0..5).map(|_| s(0, 7.0, 30.0)).collect();
        let st = fit_stats(&same).unwrap();
        assert_eq!((st.sigma, st.clip), (0.0, 0.0));
        assert_eq!(normalize_angle(7.0, &st, 180.0), 0.0);
        assert!(matches!(fit_stats(&xs[..1]), Err(LabelError::TooFewSamples(1))));
    }

    #[test]
    fn normalization_examples() {
        let st = LabelStats::from_sigma(40.0);
        assert_eq!(normalize_angle(90.0, &st, 180.0), 0.5);
        assert!((normalize_angle(130.0, &st, 180.0) - 120.0 / 180.0).abs() < 1e-15);
        assert_eq!(denormalize_angle(1.0, 180.0), 180.0);
        assert_eq!(denormalize_angle(-0.5, 180.0), -90.0);
        assert_eq!(denormalize_angle(1.2, 180.0), 180.0);
        for a in [-120.0, -33.3, 0.0, 17.25, 120.0] {
            assert!((denormalize_angle(normalize_angle(a, &st, 180.0), 180.0) - a).abs() < 1e-12);
        }
    }

    #[test]
    fn stats_json_keys() {
        let json = serde_json::to_string(&LabelStats::from_sigma(2.0)).unwrap();
        assert_eq!(json, r#"{"sigma_deg":2.0,"clip_deg":6.0}"#);
    }

    #[test]
    fn samples_csv_round_trip() {
        let xs = vec![s(5, 1.5, 22.0), s(9, -0.25, 0.0)];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("samples.csv");
        write_samples_csv(&p, &xs).unwrap();
        assert!(std::fs::read_to_string(&p).unwrap().starts_with("t_us,window_index,angle_deg,speed_kmh\n"));
        assert_eq!(read_samples_csv(&p).unwrap(), xs);
    }
}
