//! `DSP1` disparity files: the magic followed by 18-byte little-endian records
//! `u64 t_us | u16 x | u16 y | u16 disparity | u32 sad_score`, plus a text
//! form with one `t_us x y d score` line per event.

use std::io::{self, BufRead, Read, Write};

use thiserror::Error;

use super::DisparityEvent;

pub const DSP_MAGIC: &[u8; 4] = b"DSP1";
pub const DSP_RECORD_LEN: usize = 18;

#[derive(Debug, Error)]
pub enum DspIoError {
    #[error("bad disparity-file magic")]
    BadMagic,
    #[error("truncated disparity record")]
    TruncatedRecord,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Serialized bytes of a disparity list; the byte-exact form the variants are compared on.
pub fn disparity_bytes(events: &[DisparityEvent]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(4 + events.len() * DSP_RECORD_LEN);
    buf.extend_from_slice(DSP_MAGIC);
    for e in events {
        buf.extend_from_slice(&e.t_us.to_le_bytes());
        buf.extend_from_slice(&e.x.to_le_bytes());
        buf.extend_from_slice(&e.y.to_le_bytes());
        buf.extend_from_slice(&e.disparity.to_le_bytes());
        buf.extend_from_slice(&e.sad_score.to_le_bytes());
    }
    buf
}

pub fn write_disparities<W: Write>(events: &[DisparityEvent], mut w: W) -> Result<(), DspIoError> {
    w.write_all(&disparity_bytes(events))?;
    w.flush()?;
    Ok(())
}

pub fn read_disparities<R: Read>(mut r: R) -> Result<Vec<DisparityEvent>, DspIoError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < 4 || &bytes[..4] != DSP_MAGIC {
        return Err(DspIoError::BadMagic);
    }
    let body = &bytes[4..];
    if body.len() % DSP_RECORD_LEN != 0 {
        return Err(DspIoError::TruncatedRecord);
    }
    Ok(body
        .chunks_exact(DSP_RECORD_LEN)
        .map(|c| DisparityEvent {
            t_us: u64::from_le_bytes(c[0..8].try_into().unwrap()),
            x: u16::from_le_bytes([c[8], c[9]]),
            y: u16::from_le_bytes([c[10], c[11]]),
            disparity: u16::from_le_bytes([c[12], c[13]]),
            sad_score: u32::from_le_bytes(c[14..18].try_into().unwrap()),
        })
        .collect())
}

pub fn write_disparities_text<W: Write>(events: &[DisparityEvent], mut w: W) -> Result<(), DspIoError> {
    for e in events {
        writeln!(w, "{} {} {} {} {}", e.t_us, e.x, e.y, e.disparity, e.sad_score)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_disparities_text<R: BufRead>(r: R) -> Result<Vec<DisparityEvent>, DspIoError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let perr = |msg: String| DspIoError::Parse { line: i + 1, msg };
        let f: Vec<&str> = t.split_whitespace().collect();
        if f.len() != 5 {
            return Err(perr(format!("expected 5 fields, found {}", f.len())));
        }
        let num = |idx: usize| f[idx].parse::<u64>().map_err(|e| perr(format!("field {}: {e}", idx + 1)));
        let narrow = |v: u64, max: u64| if v <= max { Ok(v) } else { Err(perr(format!("{v} out of range"))) };
        out.push(DisparityEvent {
            t_us: num(0)?,
            x: narrow(num(1)?, u16::MAX.into())? as u16,
            y: narrow(num(2)?, u16::MAX.into())? as u16,
            disparity: narrow(num(3)?, u16::MAX.into())? as u16,
            sad_score: narrow(num(4)?, u32::MAX.into())? as u32,
        });
    }
    Ok(out)
}
