//! Dense single-channel images and binary PGM (P5) I/O.

use std::io::{BufRead, Write};

use thiserror::Error;

/// Row-major single-channel image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image<T = f64> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Copy + Default> Image<T> {
    pub fn new(width: usize, height: usize) -> Self {
        Image { width, height, data: vec![T::default(); width * height] }
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Image { width, height, data: vec![value; width * height] }
    }

    /// Panics if `data.len() != width * height`.
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), width * height, "image buffer size mismatch");
        Image { width, height, data }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Image { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: T) {
        self.data[y * self.width + x] = v;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U: Copy + Default>(&self, f: impl Fn(T) -> U) -> Image<U> {
        Image { width: self.width, height: self.height, data: self.data.iter().map(|&v| f(v)).collect() }
    }
}

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("not a binary PGM (P5) file")]
    BadMagic,
    #[error("malformed PGM header: {0}")]
    Header(String),
    #[error("PGM payload truncated")]
    Truncated,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A decoded PGM: raw samples, maxval, and any `#` comment lines.
#[derive(Clone, Debug, PartialEq)]
pub struct Pgm {
    pub image: Image<u16>,
    pub maxval: u16,
    pub comments: Vec<String>,
}

/// Writes a P5 PGM. Samples are 1 byte when `maxval < 256`, otherwise
/// 2 bytes big-endian.
pub fn write_pgm<W: Write>(w: &mut W, img: &Image<u16>, maxval: u16, comments: &[String]) -> std::io::Result<()> {
    writeln!(w, "P5")?;
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    write!(w, "{} {}\n{}\n", img.width(), img.height(), maxval)?;
    if maxval < 256 {
        let bytes: Vec<u8> = img.data().iter().map(|&v| v.min(maxval) as u8).collect();
        w.write_all(&bytes)?;
    } else {
        let mut bytes = Vec::with_capacity(img.data().len() * 2);
        for &v in img.data() {
            bytes.extend_from_slice(&v.min(maxval).to_be_bytes());
        }
        w.write_all(&bytes)?;
    }
    Ok(())
}

pub fn read_pgm<R: BufRead>(mut r: R) -> Result<Pgm, PgmError> {
    let mut comments = Vec::new();
    let mut tokens: Vec<String> = Vec::new();
    let mut line = String::new();
    // Header tokens: magic, width, height, maxval.
    while tokens.len() < 4 {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(PgmError::Header("unexpected end of header".into()));
        }
        let content = match line.find('#') {
            Some(i) => {
                comments.push(line[i + 1..].trim().to_string());
                &line[..i]
            }
            None => &line[..],
        };
        tokens.extend(content.split_whitespace().map(str::to_string));
    }
    if tokens[0] != "P5" {
        return Err(PgmError::BadMagic);
    }
    if tokens.len() > 4 {
        return Err(PgmError::Header("payload must start on its own line".into()));
    }
    let parse = |s: &str, what: &str| s.parse::<usize>().map_err(|_| PgmError::Header(format!("bad {what} '{s}'")));
    let width = parse(&tokens[1], "width")?;
    let height = parse(&tokens[2], "height")?;
    let maxval = parse(&tokens[3], "maxval")?;
    if maxval == 0 || maxval > u16::MAX as usize {
        return Err(PgmError::Header(format!("maxval {maxval} out of range")));
    }
    let bps = if maxval < 256 { 1 } else { 2 };
    let mut payload = vec![0u8; width * height * bps];
    r.read_exact(&mut payload).map_err(|_| PgmError::Truncated)?;
    let data: Vec<u16> = if bps == 1 {
        payload.iter().map(|&b| b as u16).collect()
    } else {
        payload.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    };
    Ok(Pgm { image: Image::from_vec(width, height, data), maxval: maxval as u16, comments })
}
