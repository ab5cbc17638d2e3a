//! `GTD1` ground-truth files: the magic followed by 18-byte little-endian
//! records `u64 t_us | u16 x | u16 y | u16 disparity_px | f32 depth_m`.

use std::io::{self, Read, Write};

use thiserror::Error;

use super::GroundTruthRecord;

pub const GT_MAGIC: &[u8; 4] = b"GTD1";
pub const GT_RECORD_LEN: usize = 18;

#[derive(Debug, Error)]
pub enum GtIoError {
    #[error("bad ground-truth magic")]
    BadMagic,
    #[error("truncated ground-truth record")]
    TruncatedRecord,
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn write_ground_truth<W: Write>(records: &[GroundTruthRecord], mut w: W) -> Result<(), GtIoError> {
    let mut buf = Vec::with_capacity(4 + records.len() * GT_RECORD_LEN);
    buf.extend_from_slice(GT_MAGIC);
    for r in records {
        buf.extend_from_slice(&r.t_us.to_le_bytes());
        buf.extend_from_slice(&r.x.to_le_bytes());
        buf.extend_from_slice(&r.y.to_le_bytes());
        buf.extend_from_slice(&r.disparity_px.to_le_bytes());
        buf.extend_from_slice(&r.depth_m.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

pub fn read_ground_truth<R: Read>(mut r: R) -> Result<Vec<GroundTruthRecord>, GtIoError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < 4 || &bytes[..4] != GT_MAGIC {
        return Err(GtIoError::BadMagic);
    }
    let body = &bytes[4..];
    if body.len() % GT_RECORD_LEN != 0 {
        return Err(GtIoError::TruncatedRecord);
    }
    Ok(body
        .chunks_exact(GT_RECORD_LEN)
        .map(|c| GroundTruthRecord {
            t_us: u64::from_le_bytes(c[0..8].try_into().unwrap()),
            x: u16::from_le_bytes([c[8], c[9]]),
            y: u16::from_le_bytes([c[10], c[11]]),
            disparity_px: u16::from_le_bytes([c[12], c[13]]),
            depth_m: f32::from_le_bytes(c[14..18].try_into().unwrap()),
        })
        .collect())
}
