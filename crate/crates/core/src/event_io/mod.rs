//! Events, streams, on-disk formats and the synthetic gesture generator.

mod format;
mod synth;

pub use format::{
    decode_csv, decode_evt1, encode_csv, encode_evt1, read_stream, write_stream, Format,
    EVT1_HEADER_LEN, EVT1_MAGIC, EVT1_RECORD_LEN, EVT1_VERSION,
};
pub use synth::{generate_synthetic, Motion, SynthSpec};

use crate::error::{Error, Result};

/// A single polarity change at one sensor pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    /// Microseconds since stream start.
    pub t: u64,
    pub x: u16,
    pub y: u16,
    /// 1 = brightening, 0 = darkening.
    pub p: u8,
}

impl Event {
    pub fn new(t: u64, x: u16, y: u16, p: u8) -> Self {
        Self { t, x, y, p }
    }
}

/// A time-ordered, bounds-checked sequence of events for one sensor.
///
/// Constructed only through [`EventStream::new`], which validates ordering
/// and coordinates, so every live value satisfies the stream invariants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    width: u16,
    height: u16,
    events: Vec<Event>,
    label: Option<u32>,
}

impl EventStream {
    pub fn new(width: u16, height: u16, events: Vec<Event>, label: Option<u32>) -> Result<Self> {
        if let Some(l) = label {
            if l > i32::MAX as u32 {
                return Err(Error::Config(format!(
                    "label {l} does not fit the i32 header field"
                )));
            }
        }
        validate_events(width, height, &events)?;
        Ok(Self {
            width,
            height,
            events,
            label,
        })
    }

    pub fn empty(width: u16, height: u16) -> Self {
        Self {
            width,
            height,
            events: Vec::new(),
            label: None,
        }
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

    pub fn label(&self) -> Option<u32> {
        self.label
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Timestamp of the last event, if any.
    pub fn last_t(&self) -> Option<u64> {
        self.events.last().map(|e| e.t)
    }

    pub fn with_label(mut self, label: Option<u32>) -> Self {
        self.label = label;
        self
    }

    /// Events with `start <= t < end`.
    pub fn slice_time(&self, start: u64, end: u64) -> &[Event] {
        let lo = self.events.partition_point(|e| e.t < start);
        let hi = self.events.partition_point(|e| e.t < end);
        &self.events[lo..hi.max(lo)]
    }
}

fn validate_events(width: u16, height: u16, events: &[Event]) -> Result<()> {
    let mut prev = 0u64;
    for (index, e) in events.iter().enumerate() {
        if e.x >= width || e.y >= height {
            return Err(Error::OutOfRange {
                index,
                x: e.x.into(),
                y: e.y.into(),
                width,
                height,
            });
        }
        if e.p > 1 {
            return Err(Error::BadPolarity {
                index,
                polarity: e.p.into(),
            });
        }
        if index > 0 && e.t < prev {
            return Err(Error::TimestampRegression {
                index,
                t: e.t,
                prev,
            });
        }
        prev = e.t;
    }
    Ok(())
}
