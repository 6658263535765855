//! Binary snapshot of a walk state, for resuming long runs.
//!
//! Layout, all integers and floats little-endian:
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 4    | magic `QWCK`                            |
//! | 4      | 4    | format version (`u32`, currently 1)     |
//! | 8      | 8    | columns already applied (`u64`)         |
//! | 16     | 8    | height `h` (`u64`)                      |
//! | 24     | 8    | leak through the top (`f64`)            |
//! | 32     | 8    | leak through the bottom (`f64`)         |
//! | 40     | 32·h | per row: up re, up im, down re, down im |
//!
//! Leak history is not stored.

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::walk::{ModePair, WalkState};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"QWCK";
pub const CHECKPOINT_VERSION: u32 = 1;

fn io_err(e: std::io::Error) -> Error {
    Error::Checkpoint(e.to_string())
}

pub fn write_checkpoint<W: Write>(mut out: W, state: &WalkState, column: usize) -> Result<()> {
    let mut buf = Vec::with_capacity(40 + 32 * state.height());
    buf.extend_from_slice(&CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(column as u64).to_le_bytes());
    buf.extend_from_slice(&(state.height() as u64).to_le_bytes());
    buf.extend_from_slice(&state.leak_top().to_le_bytes());
    buf.extend_from_slice(&state.leak_bottom().to_le_bytes());
    for p in state.amplitudes() {
        for v in [p.up.re, p.up.im, p.down.re, p.down.im] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.write_all(&buf).map_err(io_err)?;
    out.flush().map_err(io_err)
}

/// Returns the state and the number of columns it has passed.
pub fn read_checkpoint<R: Read>(mut input: R) -> Result<(WalkState, usize)> {
    let mut header = [0u8; 40];
    input.read_exact(&mut header).map_err(io_err)?;
    if header[..4] != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let word = |at: usize| -> [u8; 8] { header[at..at + 8].try_into().unwrap() };
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let column = u64::from_le_bytes(word(8));
    let height = u64::from_le_bytes(word(16));
    let leak_top = f64::from_le_bytes(word(24));
    let leak_bottom = f64::from_le_bytes(word(32));
    if height == 0 {
        return Err(Error::Checkpoint("zero height".into()));
    }
    if !(leak_top.is_finite() && leak_top >= 0.0 && leak_bottom.is_finite() && leak_bottom >= 0.0) {
        return Err(Error::Checkpoint(
            "leak tallies must be finite and non-negative".into(),
        ));
    }
    let column =
        usize::try_from(column).map_err(|_| Error::Checkpoint("column overflows".into()))?;
    let bytes = usize::try_from(height)
        .ok()
        .and_then(|h| h.checked_mul(32))
        .ok_or_else(|| Error::Checkpoint("height overflows".into()))?;

    let mut body = Vec::new();
    input
        .take(bytes as u64)
        .read_to_end(&mut body)
        .map_err(io_err)?;
    if body.len() != bytes {
        return Err(Error::Checkpoint(format!(
            "truncated: expected {bytes} amplitude bytes, found {}",
            body.len()
        )));
    }
    let f = |chunk: &[u8]| f64::from_le_bytes(chunk.try_into().unwrap());
    let amplitudes = body
        .chunks_exact(32)
        .map(|c| ModePair {
            up: Complex64::new(f(&c[0..8]), f(&c[8..16])),
            down: Complex64::new(f(&c[16..24]), f(&c[24..32])),
        })
        .collect::<Vec<_>>();
    if !amplitudes
        .iter()
        .all(|p| p.up.is_finite() && p.down.is_finite())
    {
        return Err(Error::Checkpoint("non-finite amplitude".into()));
    }
    Ok((
        WalkState::from_parts(amplitudes, leak_top, leak_bottom),
        column,
    ))
}
