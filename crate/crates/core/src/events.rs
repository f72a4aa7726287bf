//! Event data model, stream I/O and time-windowed iteration.
//!
//! An [`EventStream`] is an immutable, validated sequence of [`Event`]s on a
//! fixed sensor array. Two on-disk encodings are supported:
//!
//! * `EVT1` binary: a 16-byte header (`b"EVT1"`, width `u16`, height `u16`,
//!   record count `u64`, all little-endian) followed by 13-byte records
//!   `t: u64, x: u16, y: u16, p: i8`.
//! * CSV: a `width,height` line followed by one `t,x,y,p` line per event.

use std::fmt;
use std::io::{Read, Write};

use thiserror::Error;

/// DAVIS346 array size, used when no resolution is given.
pub const DEFAULT_WIDTH: u16 = 346;
pub const DEFAULT_HEIGHT: u16 = 260;

pub const EVT1_MAGIC: &[u8; 4] = b"EVT1";
pub const EVT1_HEADER_LEN: usize = 16;
pub const EVT1_RECORD_LEN: usize = 13;

/// Sign of a brightness change.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Neg,
    Pos,
}

impl Polarity {
    pub fn from_i8(p: i8) -> Option<Self> {
        match p {
            1 => Some(Polarity::Pos),
            -1 => Some(Polarity::Neg),
            _ => None,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Polarity::Pos => 1,
            Polarity::Neg => -1,
        }
    }

    pub fn is_pos(self) -> bool {
        self == Polarity::Pos
    }
}

/// One asynchronous brightness-change record. `t` is in microseconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Event {
    pub t: u64,
    pub x: u16,
    pub y: u16,
    pub p: Polarity,
}

impl Event {
    pub fn new(t: u64, x: u16, y: u16, p: Polarity) -> Self {
        Event { t, x, y, p }
    }
}

/// Half-open time interval `[t_start, t_start + duration)` in microseconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Window {
    pub t_start: u64,
    pub duration: u64,
}

impl Window {
    /// Panics if `duration` is zero.
    pub fn new(t_start: u64, duration: u64) -> Self {
        assert!(duration > 0, "window duration must be positive");
        Window { t_start, duration }
    }

    pub fn t_end(&self) -> u64 {
        self.t_start + self.duration
    }

    pub fn contains(&self, t: u64) -> bool {
        t >= self.t_start && t < self.t_end()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Binary,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "binary" | "evt1" => Ok(Format::Binary),
            "csv" => Ok(Format::Csv),
            other => Err(format!("unknown event format '{other}'")),
        }
    }
}

/// An invariant violation found by [`validate_stream`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    NonMonotone { index: usize },
    OutOfBounds { index: usize, x: u16, y: u16 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonMonotone { index } => write!(f, "non-monotone at index {index}"),
            Violation::OutOfBounds { index, x, y } => {
                write!(f, "coordinate out of bounds at index {index} ({x}, {y})")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum EventError {
    #[error("bad magic header: expected EVT1")]
    BadMagic,
    #[error("truncated input: {0}")]
    Truncated(String),
    #[error("malformed record at record {record}: {reason}")]
    Malformed { record: usize, reason: String },
    #[error("invalid polarity at record {record}")]
    InvalidPolarity { record: usize },
    #[error("coordinate out of bounds at record {record} ({x}, {y})")]
    OutOfBounds { record: usize, x: u16, y: u16 },
    #[error("decreasing timestamp at record {record}")]
    NonMonotone { record: usize },
    #[error("malformed header: {0}")]
    Header(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl EventError {
    fn from_violation(v: &Violation) -> Self {
        match *v {
            Violation::NonMonotone { index } => EventError::NonMonotone { record: index },
            Violation::OutOfBounds { index, x, y } => EventError::OutOfBounds { record: index, x, y },
        }
    }
}

/// Checks every stream invariant and returns all violations, in index order.
pub fn validate_stream(width: u16, height: u16, events: &[Event]) -> Vec<Violation> {
    let mut out = Vec::new();
    for (i, e) in events.iter().enumerate() {
        if e.x >= width || e.y >= height {
            out.push(Violation::OutOfBounds { index: i, x: e.x, y: e.y });
        }
        if i > 0 && e.t < events[i - 1].t {
            out.push(Violation::NonMonotone { index: i });
        }
    }
    out
}

/// A validated, time-ordered event sequence on a `width x height` array.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventStream {
    width: u16,
    height: u16,
    events: Vec<Event>,
}

impl EventStream {
    pub fn new(width: u16, height: u16, events: Vec<Event>) -> Result<Self, EventError> {
        if let Some(v) = validate_stream(width, height, &events).first() {
            return Err(EventError::from_violation(v));
        }
        Ok(EventStream { width, height, events })
    }

    pub fn empty(width: u16, height: u16) -> Self {
        EventStream { width, height, events: Vec::new() }
    }

    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate_stream(self.width, self.height, &self.events)
    }

    /// Events with `window.t_start <= t < window.t_end()`.
    pub fn slice(&self, window: Window) -> &[Event] {
        let lo = self.events.partition_point(|e| e.t < window.t_start);
        let hi = self.events.partition_point(|e| e.t < window.t_end());
        &self.events[lo..hi]
    }

    /// Windows of length `duration` starting at the first timestamp and
    /// advancing by `stride`. The trailing partial window is included.
    ///
    /// Panics if `duration` or `stride` is zero.
    pub fn windows(&self, duration: u64, stride: u64) -> Windows<'_> {
        window_iter(self, duration, stride)
    }
}

/// See [`EventStream::windows`].
pub fn window_iter(stream: &EventStream, duration: u64, stride: u64) -> Windows<'_> {
    assert!(duration > 0 && stride > 0, "duration and stride must be positive");
    let (next, last) = match (stream.events.first(), stream.events.last()) {
        (Some(f), Some(l)) => (Some(f.t), l.t),
        _ => (None, 0),
    };
    Windows { stream, duration, stride, next, last }
}

pub struct Windows<'a> {
    stream: &'a EventStream,
    duration: u64,
    stride: u64,
    next: Option<u64>,
    last: u64,
}

impl<'a> Iterator for Windows<'a> {
    type Item = (Window, &'a [Event]);

    fn next(&mut self) -> Option<Self::Item> {
        let start = self.next?;
        if start > self.last {
            self.next = None;
            return None;
        }
        self.next = start.checked_add(self.stride);
        let w = Window::new(start, self.duration);
        Some((w, self.stream.slice(w)))
    }
}

// ---------------------------------------------------------------------------
// Encoding

pub fn write_events(stream: &EventStream, format: Format) -> Vec<u8> {
    let mut out = Vec::new();
    write_events_to(stream, format, &mut out).expect("writing to a Vec cannot fail");
    out
}

pub fn write_events_to<W: Write>(stream: &EventStream, format: Format, w: &mut W) -> std::io::Result<()> {
    match format {
        Format::Binary => {
            let mut header = [0u8; EVT1_HEADER_LEN];
            header[..4].copy_from_slice(EVT1_MAGIC);
            header[4..6].copy_from_slice(&stream.width.to_le_bytes());
            header[6..8].copy_from_slice(&stream.height.to_le_bytes());
            header[8..16].copy_from_slice(&(stream.events.len() as u64).to_le_bytes());
            w.write_all(&header)?;
            let mut rec = [0u8; EVT1_RECORD_LEN];
            for e in &stream.events {
                rec[..8].copy_from_slice(&e.t.to_le_bytes());
                rec[8..10].copy_from_slice(&e.x.to_le_bytes());
                rec[10..12].copy_from_slice(&e.y.to_le_bytes());
                rec[12] = e.p.as_i8() as u8;
                w.write_all(&rec)?;
            }
        }
        Format::Csv => {
            writeln!(w, "{},{}", stream.width, stream.height)?;
            for e in &stream.events {
                writeln!(w, "{},{},{},{}", e.t, e.x, e.y, e.p.as_i8())?;
            }
        }
    }
    Ok(())
}

pub fn read_events<R: Read>(mut r: R, format: Format) -> Result<EventStream, EventError> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    match format {
        Format::Binary => decode_binary(&buf),
        Format::Csv => {
            let text = std::str::from_utf8(&buf).map_err(|e| EventError::Header(format!("not UTF-8: {e}")))?;
            decode_csv(text)
        }
    }
}

/// Reads a file, choosing the format from its extension (`.csv` or binary).
pub fn read_events_file(path: &std::path::Path) -> Result<EventStream, EventError> {
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => Format::Csv,
        _ => Format::Binary,
    };
    read_events(std::fs::File::open(path)?, format)
}

fn decode_binary(buf: &[u8]) -> Result<EventStream, EventError> {
    if buf.len() < EVT1_HEADER_LEN {
        return Err(if buf.len() >= 4 && &buf[..4] != EVT1_MAGIC {
            EventError::BadMagic
        } else {
            EventError::Truncated(format!("{} header bytes, need {EVT1_HEADER_LEN}", buf.len()))
        });
    }
    if &buf[..4] != EVT1_MAGIC {
        return Err(EventError::BadMagic);
    }
    let width = u16::from_le_bytes([buf[4], buf[5]]);
    let height = u16::from_le_bytes([buf[6], buf[7]]);
    let count = u64::from_le_bytes(buf[8..16].try_into().unwrap());
    let body = &buf[EVT1_HEADER_LEN..];
    let expected = count
        .checked_mul(EVT1_RECORD_LEN as u64)
        .ok_or_else(|| EventError::Header(format!("record count {count} overflows")))?;
    if body.len() as u64 != expected {
        let full = body.len() / EVT1_RECORD_LEN;
        return Err(if (body.len() as u64) < expected {
            EventError::Truncated(format!("header declares {count} records, found {full}"))
        } else {
            EventError::Malformed {
                record: count as usize,
                reason: format!("{} trailing bytes after {count} records", body.len() as u64 - expected),
            }
        });
    }
    let mut events = Vec::with_capacity(count as usize);
    let mut prev_t = 0u64;
    for (i, rec) in body.chunks_exact(EVT1_RECORD_LEN).enumerate() {
        let t = u64::from_le_bytes(rec[..8].try_into().unwrap());
        let x = u16::from_le_bytes([rec[8], rec[9]]);
        let y = u16::from_le_bytes([rec[10], rec[11]]);
        let p = Polarity::from_i8(rec[12] as i8).ok_or(EventError::InvalidPolarity { record: i })?;
        check_record(i, t, x, y, prev_t, width, height)?;
        prev_t = t;
        events.push(Event { t, x, y, p });
    }
    Ok(EventStream { width, height, events })
}

fn decode_csv(text: &str) -> Result<EventStream, EventError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| EventError::Header("missing width,height line".into()))?;
    let (width, height) = header
        .trim()
        .split_once(',')
        .and_then(|(w, h)| Some((w.trim().parse::<u16>().ok()?, h.trim().parse::<u16>().ok()?)))
        .ok_or_else(|| EventError::Header(format!("expected 'width,height', got '{header}'")))?;
    let mut events = Vec::new();
    let mut prev_t = 0u64;
    for (i, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
        let fields: Vec<&str> = line.trim().split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(EventError::Malformed {
                record: i,
                reason: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let bad = |what: &str| EventError::Malformed { record: i, reason: format!("bad {what}") };
        let t: u64 = fields[0].parse().map_err(|_| bad("timestamp"))?;
        let x: u16 = fields[1].parse().map_err(|_| bad("x"))?;
        let y: u16 = fields[2].parse().map_err(|_| bad("y"))?;
        let p: i8 = fields[3].parse().map_err(|_| bad("polarity"))?;
        let p = Polarity::from_i8(p).ok_or(EventError::InvalidPolarity { record: i })?;
        check_record(i, t, x, y, prev_t, width, height)?;
        prev_t = t;
        events.push(Event { t, x, y, p });
    }
    Ok(EventStream { width, height, events })
}

fn check_record(i: usize, t: u64, x: u16, y: u16, prev_t: u64, width: u16, height: u16) -> Result<(), EventError> {
    if x >= width || y >= height {
        return Err(EventError::OutOfBounds { record: i, x, y });
    }
    if i > 0 && t < prev_t {
        return Err(EventError::NonMonotone { record: i });
    }
    Ok(())
}
