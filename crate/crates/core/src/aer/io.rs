//! `EVS1` binary stream files and the line-oriented text form.
//!
//! Binary layout, little-endian:
//!
//! ```text
//! header  "EVS1" | u16 version | u16 width | u16 height | u8 side | u8 reserved   (12 bytes)
//! record  u64 t_us | u16 x | u16 y | i8 polarity | u8 side | 2 reserved bytes   (16 bytes)
//! ```

use std::io::{self, BufRead, Read, Write};

use thiserror::Error;

use super::{validate_stream, EventStream, PolarityEvent, Side, StreamHeader, StreamSide, Violation, ViolationKind};

pub const MAGIC: &[u8; 4] = b"EVS1";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 12;
pub const RECORD_LEN: usize = 16;

#[derive(Debug, Error)]
pub enum StreamIoError {
    #[error("bad magic {0:?}, expected \"EVS1\"")]
    BadMagic([u8; 4]),
    #[error("unsupported stream version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated stream: {0}")]
    TruncatedRecord(String),
    #[error("events out of canonical order at index {0}")]
    UnorderedInput(usize),
    #[error("invalid event: {0}")]
    InvalidEvent(Violation),
    #[error("bad side code {0}")]
    BadSide(u8),
    #[error("text parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl From<Violation> for StreamIoError {
    fn from(v: Violation) -> Self {
        match v.kind {
            ViolationKind::OutOfOrder => StreamIoError::UnorderedInput(v.index),
            _ => StreamIoError::InvalidEvent(v),
        }
    }
}

fn stream_side_code(side: StreamSide) -> u8 {
    match side {
        StreamSide::Left => 0,
        StreamSide::Right => 1,
        StreamSide::Mixed => 2,
    }
}

fn stream_side_from_code(code: u8) -> Result<StreamSide, StreamIoError> {
    match code {
        0 => Ok(StreamSide::Left),
        1 => Ok(StreamSide::Right),
        2 => Ok(StreamSide::Mixed),
        c => Err(StreamIoError::BadSide(c)),
    }
}

pub fn write_stream<W: Write>(s: &EventStream, mut w: W) -> Result<(), StreamIoError> {
    validate_stream(s)?;
    let h = &s.header;
    let mut buf = Vec::with_capacity(HEADER_LEN + RECORD_LEN * s.events.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&h.width.to_le_bytes());
    buf.extend_from_slice(&h.height.to_le_bytes());
    buf.push(stream_side_code(h.side));
    buf.push(0);
    for e in &s.events {
        buf.extend_from_slice(&e.t_us.to_le_bytes());
        buf.extend_from_slice(&e.x.to_le_bytes());
        buf.extend_from_slice(&e.y.to_le_bytes());
        buf.push(e.polarity as u8);
        buf.push(e.side.index() as u8);
        buf.extend_from_slice(&[0, 0]);
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

pub fn read_stream<R: Read>(mut r: R) -> Result<EventStream, StreamIoError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < HEADER_LEN {
        if bytes.len() >= 4 && &bytes[..4] != MAGIC {
            return Err(StreamIoError::BadMagic(bytes[..4].try_into().unwrap()));
        }
        return Err(StreamIoError::TruncatedRecord(format!("{}-byte header", bytes.len())));
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if &magic != MAGIC {
        return Err(StreamIoError::BadMagic(magic));
    }
    let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
    let version = u16_at(4);
    if version != VERSION {
        return Err(StreamIoError::UnsupportedVersion(version));
    }
    let header = StreamHeader {
        width: u16_at(6),
        height: u16_at(8),
        side: stream_side_from_code(bytes[10])?,
    };

    let body = &bytes[HEADER_LEN..];
    if body.len() % RECORD_LEN != 0 {
        return Err(StreamIoError::TruncatedRecord(format!(
            "{} trailing bytes after {} records",
            body.len() % RECORD_LEN,
            body.len() / RECORD_LEN
        )));
    }
    let mut events = Vec::with_capacity(body.len() / RECORD_LEN);
    for rec in body.chunks_exact(RECORD_LEN) {
        let side = match rec[13] {
            0 => Side::Left,
            1 => Side::Right,
            c => return Err(StreamIoError::BadSide(c)),
        };
        events.push(PolarityEvent {
            t_us: u64::from_le_bytes(rec[0..8].try_into().unwrap()),
            x: u16::from_le_bytes([rec[8], rec[9]]),
            y: u16::from_le_bytes([rec[10], rec[11]]),
            polarity: rec[12] as i8,
            side,
        });
    }
    let s = EventStream { header, events };
    validate_stream(&s)?;
    Ok(s)
}

/// Writes `# evs <width> <height> <side>` followed by `t_us x y polarity side` lines.
pub fn write_text<W: Write>(s: &EventStream, mut w: W) -> Result<(), StreamIoError> {
    let h = &s.header;
    writeln!(w, "# evs {} {} {}", h.width, h.height, h.side)?;
    for e in &s.events {
        writeln!(w, "{} {} {} {} {}", e.t_us, e.x, e.y, e.polarity, e.side)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses the text form. The `# evs` header line is required; other `#` lines are ignored.
pub fn read_text<R: BufRead>(r: R) -> Result<EventStream, StreamIoError> {
    let mut header: Option<StreamHeader> = None;
    let mut events = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let perr = |msg: String| StreamIoError::Parse { line: lineno, msg };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            let fields: Vec<&str> = rest.split_whitespace().collect();
            if fields.first() == Some(&"evs") {
                if fields.len() != 4 {
                    return Err(perr("expected '# evs <width> <height> <side>'".into()));
                }
                header = Some(StreamHeader {
                    width: fields[1].parse().map_err(|e| perr(format!("width: {e}")))?,
                    height: fields[2].parse().map_err(|e| perr(format!("height: {e}")))?,
                    side: fields[3].parse().map_err(perr)?,
                });
            }
            continue;
        }
        if header.is_none() {
            return Err(perr("event line before '# evs' header".into()));
        }
        let f: Vec<&str> = trimmed.split_whitespace().collect();
        if f.len() != 5 {
            return Err(perr(format!("expected 5 fields, found {}", f.len())));
        }
        events.push(PolarityEvent {
            t_us: f[0].parse().map_err(|e| perr(format!("t_us: {e}")))?,
            x: f[1].parse().map_err(|e| perr(format!("x: {e}")))?,
            y: f[2].parse().map_err(|e| perr(format!("y: {e}")))?,
            polarity: f[3].parse().map_err(|e| perr(format!("polarity: {e}")))?,
            side: f[4].parse().map_err(perr)?,
        });
    }
    let header = header.ok_or_else(|| StreamIoError::Parse { line: 0, msg: "missing '# evs' header".into() })?;
    let s = EventStream { header, events };
    validate_stream(&s)?;
    Ok(s)
}
