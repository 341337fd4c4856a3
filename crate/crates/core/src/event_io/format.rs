//! `EVT1` binary and CSV stream formats.
//!
//! `EVT1` layout, all little-endian:
//!
//! ```text
//! offset  size  field
//!      0     4  magic "EVT1"
//!      4     2  version (u16) = 1
//!      6     2  width (u16)
//!      8     2  height (u16)
//!     10     4  label (i32), -1 = unlabeled
//!     14     8  event_count (u64)
//!     22  14*n  records: t u64, x u16, y u16, p u8, reserved u8 = 0
//! ```
//!
//! CSV files carry the header line `t,x,y,p` followed by one event per line.
//! The writer prepends a `# width=W height=H label=L` metadata comment so
//! geometry and label survive a round trip; the reader accepts files with or
//! without it.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::{Event, EventStream};
use crate::error::{Error, Result};

pub const EVT1_MAGIC: [u8; 4] = *b"EVT1";
pub const EVT1_VERSION: u16 = 1;
pub const EVT1_HEADER_LEN: usize = 22;
pub const EVT1_RECORD_LEN: usize = 14;

const CSV_HEADER: &str = "t,x,y,p";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Binary,
    Csv,
}

impl Format {
    /// Guesses the format from a file extension: `.csv` is CSV, anything
    /// else is `EVT1`.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Binary,
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "binary" | "evt1" | "evt" | "bin" => Ok(Format::Binary),
            "csv" => Ok(Format::Csv),
            other => Err(Error::Config(format!("unknown stream format {other:?}"))),
        }
    }
}

pub fn read_stream(path: &Path, format: Format) -> Result<EventStream> {
    let bytes = fs::read(path)?;
    match format {
        Format::Binary => decode_evt1(&bytes),
        Format::Csv => {
            let text = std::str::from_utf8(&bytes)
                .map_err(|e| Error::BadHeader(format!("csv is not utf-8: {e}")))?;
            decode_csv(text, None)
        }
    }
}

pub fn write_stream(stream: &EventStream, path: &Path, format: Format) -> Result<()> {
    let bytes = match format {
        Format::Binary => encode_evt1(stream),
        Format::Csv => encode_csv(stream).into_bytes(),
    };
    fs::write(path, bytes)?;
    Ok(())
}

pub fn encode_evt1(stream: &EventStream) -> Vec<u8> {
    let mut out = Vec::with_capacity(EVT1_HEADER_LEN + EVT1_RECORD_LEN * stream.len());
    out.extend_from_slice(&EVT1_MAGIC);
    out.extend_from_slice(&EVT1_VERSION.to_le_bytes());
    out.extend_from_slice(&stream.width().to_le_bytes());
    out.extend_from_slice(&stream.height().to_le_bytes());
    let label = stream.label().map_or(-1i32, |l| l as i32);
    out.extend_from_slice(&label.to_le_bytes());
    out.extend_from_slice(&(stream.len() as u64).to_le_bytes());
    for e in stream.events() {
        out.extend_from_slice(&e.t.to_le_bytes());
        out.extend_from_slice(&e.x.to_le_bytes());
        out.extend_from_slice(&e.y.to_le_bytes());
        out.push(e.p);
        out.push(0);
    }
    out
}

fn le_u16(b: &[u8]) -> u16 {
    u16::from_le_bytes([b[0], b[1]])
}

fn le_u64(b: &[u8]) -> u64 {
    let mut a = [0u8; 8];
    a.copy_from_slice(&b[..8]);
    u64::from_le_bytes(a)
}

/// Decodes an `EVT1` byte buffer. Never panics on malformed input.
pub fn decode_evt1(bytes: &[u8]) -> Result<EventStream> {
    if bytes.len() < EVT1_HEADER_LEN {
        return Err(Error::Truncated(format!(
            "header needs {EVT1_HEADER_LEN} bytes, got {}",
            bytes.len()
        )));
    }
    if bytes[..4] != EVT1_MAGIC {
        return Err(Error::BadHeader(format!(
            "magic mismatch: {:02x?}",
            &bytes[..4]
        )));
    }
    let version = le_u16(&bytes[4..]);
    if version != EVT1_VERSION {
        return Err(Error::BadHeader(format!("unsupported version {version}")));
    }
    let width = le_u16(&bytes[6..]);
    let height = le_u16(&bytes[8..]);
    let label = i32::from_le_bytes([bytes[10], bytes[11], bytes[12], bytes[13]]);
    let label = match label {
        -1 => None,
        l if l >= 0 => Some(l as u32),
        l => return Err(Error::BadHeader(format!("invalid label {l}"))),
    };
    let count = le_u64(&bytes[14..]);
    let body = &bytes[EVT1_HEADER_LEN..];
    let expected = usize::try_from(count)
        .ok()
        .and_then(|c| c.checked_mul(EVT1_RECORD_LEN))
        .ok_or_else(|| Error::BadHeader(format!("event count {count} is too large")))?;
    if body.len() < expected {
        return Err(Error::Truncated(format!(
            "{count} records need {expected} bytes, got {}",
            body.len()
        )));
    }
    if body.len() > expected {
        return Err(Error::BadHeader(format!(
            "{} trailing bytes after {count} records",
            body.len() - expected
        )));
    }

    let mut events = Vec::with_capacity(count as usize);
    for (index, rec) in body.chunks_exact(EVT1_RECORD_LEN).enumerate() {
        if rec[13] != 0 {
            return Err(Error::MalformedRecord {
                index,
                reason: format!("reserved byte is {}", rec[13]),
            });
        }
        events.push(Event {
            t: le_u64(rec),
            x: le_u16(&rec[8..]),
            y: le_u16(&rec[10..]),
            p: rec[12],
        });
    }
    EventStream::new(width, height, events, label)
}

pub fn encode_csv(stream: &EventStream) -> String {
    use std::fmt::Write;
    let mut out = String::with_capacity(32 + 24 * stream.len());
    let label = stream.label().map_or(-1i64, i64::from);
    let _ = writeln!(
        out,
        "# width={} height={} label={}",
        stream.width(),
        stream.height(),
        label
    );
    out.push_str(CSV_HEADER);
    out.push('\n');
    for e in stream.events() {
        let _ = writeln!(out, "{},{},{},{}", e.t, e.x, e.y, e.p);
    }
    out
}

#[derive(Default)]
struct CsvMeta {
    width: Option<u16>,
    height: Option<u16>,
    label: Option<u32>,
}

fn parse_meta(line: &str) -> Result<CsvMeta> {
    let mut meta = CsvMeta::default();
    for kv in line.split_whitespace() {
        let Some((k, v)) = kv.split_once('=') else {
            continue;
        };
        let bad = || Error::BadHeader(format!("bad metadata value {kv:?}"));
        match k {
            "width" => meta.width = Some(v.parse().map_err(|_| bad())?),
            "height" => meta.height = Some(v.parse().map_err(|_| bad())?),
            "label" => {
                let l: i64 = v.parse().map_err(|_| bad())?;
                meta.label = match l {
                    -1 => None,
                    l if (0..=i32::MAX as i64).contains(&l) => Some(l as u32),
                    _ => return Err(bad()),
                };
            }
            _ => {}
        }
    }
    Ok(meta)
}

/// Decodes CSV text. Geometry comes from the metadata comment, then from
/// `geometry`, and otherwise is inferred as one past the largest coordinate.
pub fn decode_csv(text: &str, geometry: Option<(u16, u16)>) -> Result<EventStream> {
    let mut meta = CsvMeta::default();
    let mut lines = text.lines().peekable();
    while let Some(line) = lines.peek() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix('#') {
            let m = parse_meta(rest)?;
            meta.width = m.width.or(meta.width);
            meta.height = m.height.or(meta.height);
            meta.label = m.label.or(meta.label);
            lines.next();
        } else if line.is_empty() {
            lines.next();
        } else {
            break;
        }
    }
    match lines.next().map(str::trim) {
        Some(CSV_HEADER) => {}
        Some(other) => {
            return Err(Error::BadHeader(format!(
                "expected {CSV_HEADER:?}, found {other:?}"
            )))
        }
        None => return Err(Error::Truncated("missing csv header line".into())),
    }

    let mut events = Vec::new();
    for line in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let index = events.len();
        events.push(parse_row(line, index)?);
    }

    let (width, height) = match (meta.width, meta.height, geometry) {
        (Some(w), Some(h), _) => (w, h),
        (_, _, Some(g)) => g,
        _ => {
            let w = events.iter().map(|e| u32::from(e.x) + 1).max().unwrap_or(0);
            let h = events.iter().map(|e| u32::from(e.y) + 1).max().unwrap_or(0);
            let fit = |v: u32| {
                u16::try_from(v)
                    .map_err(|_| Error::BadHeader("inferred geometry exceeds u16".into()))
            };
            (fit(w)?, fit(h)?)
        }
    };
    EventStream::new(width, height, events, meta.label)
}

fn parse_row(line: &str, index: usize) -> Result<Event> {
    let mut fields = line.split(',').map(str::trim);
    let mut next = |name: &str| {
        fields.next().ok_or_else(|| Error::MalformedRecord {
            index,
            reason: format!("missing field {name}"),
        })
    };
    let bad = |name: &str, v: &str| Error::MalformedRecord {
        index,
        reason: format!("field {name} = {v:?} is not a valid integer"),
    };
    let (t, x, y, p) = (next("t")?, next("x")?, next("y")?, next("p")?);
    if fields.next().is_some() {
        return Err(Error::MalformedRecord {
            index,
            reason: "too many fields".into(),
        });
    }
    let t: u64 = t.parse().map_err(|_| bad("t", t))?;
    let x_wide: u32 = x.parse().map_err(|_| bad("x", x))?;
    let y_wide: u32 = y.parse().map_err(|_| bad("y", y))?;
    let p: u32 = p.parse().map_err(|_| bad("p", p))?;
    if p > 1 {
        return Err(Error::BadPolarity { index, polarity: p });
    }
    let x = u16::try_from(x_wide).map_err(|_| bad("x", x))?;
    let y = u16::try_from(y_wide).map_err(|_| bad("y", y))?;
    Ok(Event::new(t, x, y, p as u8))
}
