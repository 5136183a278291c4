//! AER event streams: the in-memory types, two on-disk formats and a
//! deterministic synthetic generator.
//!
//! Binary layout (all little-endian):
//!
//! ```text
//! "AERS"  u16 version=1  u16 width  u16 height  u64 count
//! count × { u32 t_us, u16 x, u16 y, u8 polarity }
//! ```
//!
//! Text layout: a geometry comment line `# width=W,height=H,version=1`,
//! the column header `t_us,x,y,p`, then one record per line.
//!
//! Stream labels are not stored in either format; datasets carry labels in
//! their manifest.

mod binary;
mod synth;
mod text;

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub use synth::{synthesize, Shape, SynthSpec};

pub const FORMAT_VERSION: u16 = 1;
pub const MAGIC: &[u8; 4] = b"AERS";
pub const HEADER_LEN: usize = 18;
pub const RECORD_LEN: usize = 9;

/// One sensor event. `polarity` is 0 for light-to-dark, 1 for dark-to-light.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    pub t_us: u32,
    pub x: u16,
    pub y: u16,
    pub polarity: u8,
}

impl Event {
    pub fn new(t_us: u32, x: u16, y: u16, polarity: u8) -> Self {
        Self {
            t_us,
            x,
            y,
            polarity,
        }
    }

    /// Timestamp in milliseconds.
    #[inline]
    pub fn t_ms(&self) -> f64 {
        self.t_us as f64 / 1000.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SensorGeometry {
    pub width: u16,
    pub height: u16,
}

impl SensorGeometry {
    pub fn new(width: u16, height: u16) -> Self {
        Self { width, height }
    }

    #[inline]
    pub fn contains(&self, x: u16, y: u16) -> bool {
        x < self.width && y < self.height
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    pub geometry: SensorGeometry,
    pub version: u16,
    pub events: Vec<Event>,
    pub label: Option<u32>,
}

impl EventStream {
    pub fn new(geometry: SensorGeometry, events: Vec<Event>) -> Self {
        Self {
            geometry,
            version: FORMAT_VERSION,
            events,
            label: None,
        }
    }

    pub fn with_label(mut self, label: u32) -> Self {
        self.label = Some(label);
        self
    }

    /// Checks bounds and timestamp ordering.
    pub fn validate(&self) -> Result<()> {
        if self.geometry.width == 0 || self.geometry.height == 0 {
            return Err(Error::InvalidInput(format!(
                "sensor geometry {}x{} has a zero dimension",
                self.geometry.width, self.geometry.height
            )));
        }
        let mut previous = 0u32;
        for (index, e) in self.events.iter().enumerate() {
            if !self.geometry.contains(e.x, e.y) {
                return Err(Error::OutOfBounds {
                    index,
                    x: e.x,
                    y: e.y,
                    width: self.geometry.width,
                    height: self.geometry.height,
                });
            }
            if e.t_us < previous {
                return Err(Error::TimeRegression {
                    previous: previous as f64,
                    t: e.t_us as f64,
                });
            }
            if e.polarity > 1 {
                return Err(Error::InvalidInput(format!(
                    "event {index} has polarity {}",
                    e.polarity
                )));
            }
            previous = e.t_us;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Binary,
    Csv,
}

impl Format {
    /// Guesses the format from a file extension (`.csv` is text, anything
    /// else binary).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Binary,
        }
    }
}

pub fn encode(stream: &EventStream, format: Format) -> Result<Vec<u8>> {
    stream.validate()?;
    Ok(match format {
        Format::Binary => binary::encode(stream),
        Format::Csv => text::encode(stream).into_bytes(),
    })
}

pub fn decode(bytes: &[u8], format: Format) -> Result<EventStream> {
    match format {
        Format::Binary => binary::decode(bytes),
        Format::Csv => {
            let text = std::str::from_utf8(bytes).map_err(|e| {
                Error::parse_byte(e.valid_up_to() as u64, "invalid UTF-8 in text event file")
            })?;
            text::decode(text)
        }
    }
}

pub fn read_events(path: impl AsRef<Path>, format: Format) -> Result<EventStream> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, format)
}

/// Validates before touching the filesystem, so an invalid stream never
/// leaves a partial file behind.
pub fn write_events(stream: &EventStream, path: impl AsRef<Path>, format: Format) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(stream, format)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
