//! Event-window histograms and normalized network inputs.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{Event, Window};
use crate::image::{write_pgm, Image};
use crate::sim::log_intensity;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("event {index} at ({x}, {y}) is outside the {width}x{height} array")]
    OutOfBounds { index: usize, x: u16, y: u16, width: usize, height: usize },
    #[error("event {index} at t={t} is outside window [{start}, {end})")]
    OutsideWindow { index: usize, t: u64, start: u64, end: u64 },
    #[error("image shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch((usize, usize), (usize, usize)),
}

/// Positive and negative event counts per pixel over one window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventFrame {
    pub h_plus: Image<u32>,
    pub h_minus: Image<u32>,
    pub window: Window,
}

impl EventFrame {
    pub fn width(&self) -> usize {
        self.h_plus.width()
    }

    pub fn height(&self) -> usize {
        self.h_plus.height()
    }

    pub fn total(&self) -> u64 {
        self.h_plus.data().iter().chain(self.h_minus.data()).map(|&c| c as u64).sum()
    }

    pub fn max_count(&self) -> u32 {
        self.h_plus.data().iter().chain(self.h_minus.data()).copied().max().unwrap_or(0)
    }

    /// Writes the two channels as a 16-bit PGM pair.
    pub fn write_pgm_pair<W: Write>(&self, plus: &mut W, minus: &mut W) -> std::io::Result<()> {
        let comment = [format!("t_start_us={} duration_us={}", self.window.t_start, self.window.duration)];
        let clamp = |img: &Image<u32>| img.map(|c| c.min(u16::MAX as u32) as u16);
        write_pgm(plus, &clamp(&self.h_plus), u16::MAX, &comment)?;
        write_pgm(minus, &clamp(&self.h_minus), u16::MAX, &comment)
    }
}

/// Builds the two polarity histograms of `events` over `window`.
pub fn accumulate_events(
    events: &[Event],
    window: Window,
    width: usize,
    height: usize,
) -> Result<EventFrame, FrameError> {
    let mut h_plus = Image::<u32>::new(width, height);
    let mut h_minus = Image::<u32>::new(width, height);
    for (index, e) in events.iter().enumerate() {
        let (x, y) = (e.x as usize, e.y as usize);
        if x >= width || y >= height {
            return Err(FrameError::OutOfBounds { index, x: e.x, y: e.y, width, height });
        }
        if !window.contains(e.t) {
            return Err(FrameError::OutsideWindow { index, t: e.t, start: window.t_start, end: window.t_end() });
        }
        let h = if e.p.is_pos() { &mut h_plus } else { &mut h_minus };
        let v = h.get(x, y);
        h.set(x, y, v + 1);
    }
    Ok(EventFrame { h_plus, h_minus, window })
}

/// Pixel-wise `h+ - h-`. Multiply by the contrast threshold to compare with
/// a log-intensity difference.
pub fn polarity_balance(frame: &EventFrame) -> Image<i64> {
    let data = frame.h_plus.data().iter().zip(frame.h_minus.data()).map(|(&p, &m)| p as i64 - m as i64).collect();
    Image::from_vec(frame.width(), frame.height(), data)
}

/// `ln(I_t + 1) - ln(I_prev + 1)` per pixel.
pub fn grayscale_log_diff(current: &Image, previous: &Image) -> Result<Image, FrameError> {
    if current.dims() != previous.dims() {
        return Err(FrameError::ShapeMismatch(current.dims(), previous.dims()));
    }
    let data = current.data().iter().zip(previous.data()).map(|(&a, &b)| log_intensity(a) - log_intensity(b)).collect();
    Ok(Image::from_vec(current.width(), current.height(), data))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    /// Two-channel event histogram.
    Events,
    /// Single grayscale frame.
    #[serde(alias = "grayscale")]
    Gray,
    /// Log difference of two consecutive grayscale frames.
    Graydiff,
}

impl InputKind {
    pub const ALL: [InputKind; 3] = [InputKind::Gray, InputKind::Graydiff, InputKind::Events];

    pub fn channels(self) -> usize {
        match self {
            InputKind::Events => 2,
            InputKind::Gray | InputKind::Graydiff => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            InputKind::Events => "events",
            InputKind::Gray => "gray",
            InputKind::Graydiff => "graydiff",
        }
    }
}

impl fmt::Display for InputKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for InputKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "events" => Ok(InputKind::Events),
            "gray" | "grayscale" => Ok(InputKind::Gray),
            "graydiff" => Ok(InputKind::Graydiff),
            other => Err(format!("unknown input kind '{other}' (expected events, gray or graydiff)")),
        }
    }
}

/// How event counts are mapped into `[0, 1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventScaling {
    /// Divide by the frame's largest single-bin count.
    #[default]
    PerFrameMax,
    /// Saturate at a fixed count, then divide by it.
    FixedClip(u32),
}

/// Network input of shape `(channels, height, width)`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct InputTensor {
    pub kind: InputKind,
    pub height: usize,
    pub width: usize,
    pub values: Vec<f32>,
}

impl InputTensor {
    pub fn channels(&self) -> usize {
        self.kind.channels()
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.channels(), self.height, self.width]
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.values[c * n..(c + 1) * n]
    }

    /// Checks the declared value range for this kind.
    pub fn in_range(&self) -> bool {
        let lo = if self.kind == InputKind::Graydiff { -1.0 } else { 0.0 };
        self.values.iter().all(|v| v.is_finite() && *v >= lo && *v <= 1.0)
    }
}

/// Inputs accepted by [`to_input`].
pub enum InputSource<'a> {
    Events(&'a EventFrame),
    Gray(&'a Image),
    Graydiff { current: &'a Image, previous: &'a Image },
}

pub fn to_input(source: InputSource<'_>, scaling: EventScaling) -> Result<InputTensor, FrameError> {
    match source {
        InputSource::Events(frame) => {
            let scale = match scaling {
                EventScaling::PerFrameMax => frame.max_count(),
                EventScaling::FixedClip(c) => c.max(1),
            };
            let norm = |c: u32| if scale == 0 { 0.0 } else { c.min(scale) as f32 / scale as f32 };
            let values = frame.h_plus.data().iter().chain(frame.h_minus.data()).map(|&c| norm(c)).collect();
            Ok(InputTensor { kind: InputKind::Events, height: frame.height(), width: frame.width(), values })
        }
        InputSource::Gray(img) => Ok(InputTensor {
            kind: InputKind::Gray,
            height: img.height(),
            width: img.width(),
            values: img.data().iter().map(|&v| (v.clamp(0.0, 255.0) / 255.0) as f32).collect(),
        }),
        InputSource::Graydiff { current, previous } => {
            let diff = grayscale_log_diff(current, previous)?;
            let peak = diff.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let values = diff.data().iter().map(|&v| if peak > 0.0 { (v / peak) as f32 } else { 0.0 }).collect();
            Ok(InputTensor { kind: InputKind::Graydiff, height: current.height(), width: current.width(), values })
        }
    }
}
