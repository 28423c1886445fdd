//! Little-endian map container.
//!
//! ```text
//! "CPM1" | u32 n_class | u32 height | u32 width | u32 stride | payload
//! ```
//!
//! Probability maps carry `n_class * height * width` f32 values, class-major
//! then row-major. Target maps reuse the header and carry one byte per cell.

use crate::assign::{Label, TargetMap};
use crate::cpm::ClassProbabilityMap;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CPM1";
pub const HEADER_LEN: usize = 20;
const RANGE_TOLERANCE: f32 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MapHeader {
    pub n_class: u32,
    pub height: u32,
    pub width: u32,
    pub stride: u32,
}

impl MapHeader {
    fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(MAGIC);
        for v in [self.n_class, self.height, self.width, self.stride] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }

    fn read(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!(
                "truncated header: {} of {HEADER_LEN} bytes",
                bytes.len()
            )));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::Format(format!(
                "bad magic {:?}",
                String::from_utf8_lossy(&bytes[..4])
            )));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
        let header = MapHeader {
            n_class: word(0),
            height: word(1),
            width: word(2),
            stride: word(3),
        };
        if header.stride == 0 {
            return Err(Error::Format("stride must be at least 1".into()));
        }
        Ok(header)
    }

    fn cells(&self) -> Result<usize> {
        (self.height as usize)
            .checked_mul(self.width as usize)
            .ok_or_else(|| Error::Format("map dimensions overflow".into()))
    }
}

fn expect_len(bytes: &[u8], payload: usize) -> Result<()> {
    let want = HEADER_LEN + payload;
    if bytes.len() != want {
        return Err(Error::Format(format!(
            "expected {want} bytes, found {}",
            bytes.len()
        )));
    }
    Ok(())
}

pub fn write_cpm(cpm: &ClassProbabilityMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * cpm.values().len());
    MapHeader {
        n_class: cpm.n_class() as u32,
        height: cpm.height() as u32,
        width: cpm.width() as u32,
        stride: cpm.stride(),
    }
    .write(&mut out);
    for v in cpm.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Values within 1e-6 outside `[0, 1]` are clamped; anything further is an error.
pub fn read_cpm(bytes: &[u8]) -> Result<ClassProbabilityMap> {
    let h = MapHeader::read(bytes)?;
    let n = (h.n_class as usize)
        .checked_mul(h.cells()?)
        .ok_or_else(|| Error::Format("map dimensions overflow".into()))?;
    expect_len(bytes, 4 * n)?;
    let mut values = Vec::with_capacity(n);
    for (i, chunk) in bytes[HEADER_LEN..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !(-RANGE_TOLERANCE..=1.0 + RANGE_TOLERANCE).contains(&v) {
            return Err(Error::Format(format!("value {v} at index {i} outside [0, 1]")));
        }
        values.push(v.clamp(0.0, 1.0));
    }
    ClassProbabilityMap::new(
        h.n_class as usize,
        h.width as usize,
        h.height as usize,
        h.stride,
        values,
    )
    .map_err(|e| Error::Format(e.to_string()))
}

pub fn write_target_map(map: &TargetMap, n_class: u32, stride: u32) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + map.labels.len());
    MapHeader {
        n_class,
        height: map.height as u32,
        width: map.width as u32,
        stride,
    }
    .write(&mut out);
    out.extend(map.to_bytes());
    out
}

pub fn read_target_map(bytes: &[u8]) -> Result<(MapHeader, TargetMap)> {
    let h = MapHeader::read(bytes)?;
    expect_len(bytes, h.cells()?)?;
    let labels = bytes[HEADER_LEN..].iter().map(|&b| Label::from_byte(b)).collect();
    Ok((
        h,
        TargetMap {
            width: h.width as usize,
            height: h.height as usize,
            labels,
        },
    ))
}
