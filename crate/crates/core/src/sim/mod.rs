//! Deterministic event-camera simulator producing labelled recordings.

mod generate;
mod profile;
mod scene;

use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generate::{generate_events, log_intensity, noise_events, sampling_grid, threshold_events};
pub use profile::{Profile, SineComponent};
pub use scene::{render_brightness, SceneKind, SceneSpec, TextureParams};

use crate::events::{read_events_file, write_events_to, EventError, EventStream, Format};
use crate::image::{read_pgm, write_pgm, Image, PgmError};

pub const DEFAULT_CONTRAST: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub width: u16,
    pub height: u16,
    pub duration_us: u64,
    /// Log-intensity step per event.
    pub contrast_threshold: f64,
    /// Grayscale frame cadence.
    pub frame_period_us: u64,
    /// Background events per pixel per second.
    pub noise_rate: f64,
    pub seed: u64,
    pub scene: SceneSpec,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if self.width == 0 || self.height == 0 {
            return bad("width and height must be positive".into());
        }
        if !(self.contrast_threshold > 0.0 && self.contrast_threshold.is_finite()) {
            return bad(format!("contrast_threshold must be > 0, got {}", self.contrast_threshold));
        }
        if self.frame_period_us == 0 {
            return bad("frame_period_us must be > 0".into());
        }
        if self.duration_us < self.frame_period_us {
            return bad("duration_us must be at least frame_period_us".into());
        }
        if !(self.noise_rate >= 0.0 && self.noise_rate.is_finite()) {
            return bad(format!("noise_rate must be >= 0, got {}", self.noise_rate));
        }
        let scene = &self.scene;
        if scene.label_period_us == 0 || scene.label_period_us > self.frame_period_us {
            return bad("label_period_us must be in 1..=frame_period_us".into());
        }
        if !scene.angle.is_well_formed() || !scene.speed.is_well_formed() {
            return bad("malformed angle or speed profile".into());
        }
        let (lo, hi) = scene.angle.bounds();
        if lo < -180.0 || hi > 180.0 {
            return bad(format!("steering profile leaves [-180, 180]: [{lo}, {hi}]"));
        }
        if scene.speed.bounds().0 < 0.0 {
            return bad("speed profile can become negative".into());
        }
        let tp = &scene.texture;
        if !(tp.low >= 0.0 && tp.high <= 255.0 && tp.low <= tp.high) {
            return bad("texture intensities must satisfy 0 <= low <= high <= 255".into());
        }
        if !(tp.period_px > 0.0 && tp.edge_px > 0.0 && tp.bar_width_px > 0.0 && tp.dash_period_m > 0.0) {
            return bad("texture sizes must be positive".into());
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let cfg: SimConfig = serde_json::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulator config: {0}")]
    Config(String),
    #[error("recording format error: {0}")]
    Format(String),
    #[error(transparent)]
    Events(#[from] EventError),
    #[error(transparent)]
    Pgm(#[from] PgmError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrayFrame {
    pub t_us: u64,
    /// Intensities in `[0, 255]`.
    pub image: Image,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Label {
    pub t_us: u64,
    pub angle_deg: f64,
    pub speed_kmh: f64,
}

/// Events, grayscale frames and labels from one simulated drive.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledRecording {
    pub events: EventStream,
    pub gray_frames: Vec<GrayFrame>,
    pub labels: Vec<Label>,
}

impl LabeledRecording {
    pub fn width(&self) -> usize {
        self.events.width() as usize
    }

    pub fn height(&self) -> usize {
        self.events.height() as usize
    }

    /// End of the covered time span: the later of the last label, frame or event.
    pub fn span_us(&self) -> u64 {
        let last_label = self.labels.last().map_or(0, |l| l.t_us + 1);
        let last_frame = self.gray_frames.last().map_or(0, |f| f.t_us + 1);
        let last_event = self.events.events().last().map_or(0, |e| e.t + 1);
        last_label.max(last_frame).max(last_event)
    }
}

pub fn generate_recording(config: &SimConfig) -> Result<LabeledRecording, SimError> {
    config.validate()?;
    let (w, h) = (config.width as usize, config.height as usize);
    let scene = &config.scene;
    let events = generate_events(|t| render_brightness(scene, w, h, t), config);
    let gray_frames = (0..config.duration_us)
        .step_by(config.frame_period_us as usize)
        .map(|t| GrayFrame { t_us: t, image: render_brightness(scene, w, h, t) })
        .collect();
    let labels = (0..config.duration_us)
        .step_by(scene.label_period_us as usize)
        .map(|t| Label { t_us: t, angle_deg: scene.angle_at(t), speed_kmh: scene.speed_at(t) })
        .collect();
    Ok(LabeledRecording { events, gray_frames, labels })
}

pub const EVENTS_FILE: &str = "events.evt1";
pub const LABELS_FILE: &str = "labels.csv";
pub const FRAMES_DIR: &str = "frames";
pub const CONFIG_FILE: &str = "config.json";

/// Writes `events.evt1`, `frames/NNNNNN.pgm` (8-bit, with a `t_us=` comment)
/// and `labels.csv`; also `config.json` when a config is given.
pub fn write_recording(dir: &Path, rec: &LabeledRecording, config: Option<&SimConfig>) -> Result<(), SimError> {
    fs::create_dir_all(dir.join(FRAMES_DIR))?;
    let mut w = BufWriter::new(fs::File::create(dir.join(EVENTS_FILE))?);
    write_events_to(&rec.events, Format::Binary, &mut w)?;
    drop(w);
    for (i, f) in rec.gray_frames.iter().enumerate() {
        let quantized = f.image.map(|v| v.round().clamp(0.0, 255.0) as u16);
        let mut w = BufWriter::new(fs::File::create(dir.join(FRAMES_DIR).join(format!("{i:06}.pgm")))?);
        write_pgm(&mut w, &quantized, 255, &[format!("t_us={}", f.t_us)])?;
    }
    let mut w = csv::Writer::from_path(dir.join(LABELS_FILE)).map_err(csv_err)?;
    w.write_record(["t_us", "angle_deg", "speed_kmh"]).map_err(csv_err)?;
    for l in &rec.labels {
        w.write_record([l.t_us.to_string(), l.angle_deg.to_string(), l.speed_kmh.to_string()]).map_err(csv_err)?;
    }
    w.flush()?;
    if let Some(cfg) = config {
        fs::write(dir.join(CONFIG_FILE), cfg.to_json())?;
    }
    Ok(())
}

fn csv_err(e: csv::Error) -> SimError {
    SimError::Format(e.to_string())
}

pub fn read_recording(dir: &Path) -> Result<LabeledRecording, SimError> {
    let events = read_events_file(&dir.join(EVENTS_FILE))?;
    let gray_frames = read_gray_frames(&dir.join(FRAMES_DIR))?;
    let labels = read_labels(&dir.join(LABELS_FILE))?;
    Ok(LabeledRecording { events, gray_frames, labels })
}

/// Reads `NNNNNN.pgm` frames in index order. Timestamps come from the
/// `t_us=` comment; frames without one are rejected.
pub fn read_gray_frames(dir: &Path) -> Result<Vec<GrayFrame>, SimError> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "pgm"))
        .collect();
    paths.sort();
    let mut frames = Vec::with_capacity(paths.len());
    for p in paths {
        let pgm = read_pgm(BufReader::new(fs::File::open(&p)?))?;
        let t_us = pgm
            .comments
            .iter()
            .find_map(|c| c.strip_prefix("t_us=").and_then(|v| v.trim().parse().ok()))
            .ok_or_else(|| SimError::Format(format!("{} has no t_us comment", p.display())))?;
        let scale = 255.0 / pgm.maxval as f64;
        frames.push(GrayFrame { t_us, image: pgm.image.map(|v| v as f64 * scale) });
    }
    if frames.windows(2).any(|w| w[1].t_us <= w[0].t_us) {
        return Err(SimError::Format("frame timestamps are not increasing".into()));
    }
    Ok(frames)
}

pub fn read_labels(path: &Path) -> Result<Vec<Label>, SimError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = r.headers().map_err(csv_err)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t_us", "angle_deg", "speed_kmh"] {
        return Err(SimError::Format(format!("unexpected labels header {headers:?}")));
    }
    let mut labels: Vec<Label> = Vec::new();
    for (i, row) in r.deserialize().enumerate() {
        let l: Label = row.map_err(|e| SimError::Format(format!("label row {i}: {e}")))?;
        if labels.last().is_some_and(|p| l.t_us < p.t_us) {
            return Err(SimError::Format(format!("label row {i}: timestamps not sorted")));
        }
        labels.push(l);
    }
    Ok(labels)
}
