//! Message schema and framing.
//!
//! A frame is a 4-byte big-endian payload length followed by that many bytes
//! of UTF-8 JSON. Every message is an object with a `"type"` field.

use std::io::{self, Read, Write};

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::ControlMode;
use crate::cspace::{CSpaceRaster, Cell};
use crate::session::RunMetrics;

pub const PROTOCOL_VERSION: u32 = 1;

/// Largest accepted payload, in bytes.
pub const MAX_FRAME_LEN: usize = 1 << 20;

/// Pointer button mask: primary button held.
pub const BUTTON_PRIMARY: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum Command {
    Hello {
        version: u32,
    },
    /// Exactly one of `name` (bundled or stored scenario) or `inline`
    /// (a scenario document) must be given.
    LoadScenario {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        inline: Option<String>,
    },
    SetMode {
        mode: ControlMode,
    },
    /// Pointer in the workspace pane, plane coordinates.
    PointerW {
        x: f64,
        y: f64,
        buttons: u32,
    },
    /// Pointer in the configuration-space pane, radians.
    PointerC {
        theta1: f64,
        theta2: f64,
        buttons: u32,
    },
    RequestRaster {
        n: usize,
    },
    Reset,
    EndRun,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseMsg {
    pub elbow: [f64; 2],
    pub endpoint: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum Event {
    Welcome {
        version: u32,
        scenarios: Vec<String>,
    },
    StateUpdate {
        t: f64,
        q: [f64; 2],
        pose: PoseMsg,
        accepted: bool,
        mode: ControlMode,
        metrics: RunMetrics,
    },
    /// Rows `row_start..row_end` (θ2 index) of an `n`×`n` raster. `bits` is
    /// base64 of the packed occupancy, row by row, θ1 index ascending within
    /// a row, most significant bit first, 1 = occupied, last byte
    /// zero-padded.
    RasterChunk {
        n: usize,
        row_start: usize,
        row_end: usize,
        bits: String,
    },
    RunFinished {
        metrics: RunMetrics,
    },
    PathExistence {
        reachable: bool,
    },
    Error {
        code: ErrorCode,
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Malformed,
    FrameTooLarge,
    UnsupportedVersion,
    NotGreeted,
    NoScenario,
    UnknownScenario,
    InvalidScenario,
    BadRequest,
    RunFinished,
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("frame of {0} bytes exceeds the limit")]
    FrameTooLarge(usize),
    #[error("payload is not UTF-8")]
    NotUtf8,
    #[error("bad message: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad raster chunk: {0}")]
    BadChunk(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn decode_command(payload: &[u8]) -> Result<Command, ProtocolError> {
    let text = std::str::from_utf8(payload).map_err(|_| ProtocolError::NotUtf8)?;
    Ok(serde_json::from_str(text)?)
}

pub fn decode_event(payload: &[u8]) -> Result<Event, ProtocolError> {
    let text = std::str::from_utf8(payload).map_err(|_| ProtocolError::NotUtf8)?;
    Ok(serde_json::from_str(text)?)
}

pub fn encode<T: Serialize>(msg: &T) -> Vec<u8> {
    serde_json::to_vec(msg).expect("messages always serialize")
}

pub fn write_frame<W: Write>(w: &mut W, payload: &[u8]) -> io::Result<()> {
    if payload.len() > MAX_FRAME_LEN {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "frame too large"));
    }
    w.write_all(&(payload.len() as u32).to_be_bytes())?;
    w.write_all(payload)?;
    w.flush()
}

/// Reads one frame. `Ok(None)` on a clean end of stream before a header.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<Vec<u8>>, ProtocolError> {
    let mut header = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut header[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(io::Error::from(io::ErrorKind::UnexpectedEof).into()),
            Ok(k) => got += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let len = u32::from_be_bytes(header) as usize;
    if len > MAX_FRAME_LEN {
        return Err(ProtocolError::FrameTooLarge(len));
    }
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload)?;
    Ok(Some(payload))
}

/// Splits a raster into chunks of whole rows, about `target_bytes` each.
pub fn raster_chunks(raster: &CSpaceRaster, target_bytes: usize) -> Vec<Event> {
    let n = raster.n();
    let rows = (target_bytes * 8 / n).clamp(1, n);
    (0..n)
        .step_by(rows)
        .map(|start| {
            let end = (start + rows).min(n);
            Event::RasterChunk {
                n,
                row_start: start,
                row_end: end,
                bits: STANDARD.encode(pack_rows(raster, start, end)),
            }
        })
        .collect()
}

pub fn pack_rows(raster: &CSpaceRaster, row_start: usize, row_end: usize) -> Vec<u8> {
    let n = raster.n();
    let total = (row_end - row_start) * n;
    let mut out = vec![0u8; total.div_ceil(8)];
    let mut k = 0;
    for j in row_start..row_end {
        for i in 0..n {
            if raster.is_occupied(Cell::new(i, j)) {
                out[k / 8] |= 0x80 >> (k % 8);
            }
            k += 1;
        }
    }
    out
}

/// Decodes one chunk into `raster` (which must have the chunk's `n`).
pub fn apply_chunk(
    raster: &mut CSpaceRaster,
    row_start: usize,
    row_end: usize,
    bits: &str,
) -> Result<(), ProtocolError> {
    let n = raster.n();
    if row_start >= row_end || row_end > n {
        return Err(ProtocolError::BadChunk(format!(
            "row range {row_start}..{row_end} outside 0..{n}"
        )));
    }
    let bytes = STANDARD
        .decode(bits)
        .map_err(|e| ProtocolError::BadChunk(e.to_string()))?;
    let total = (row_end - row_start) * n;
    if bytes.len() != total.div_ceil(8) {
        return Err(ProtocolError::BadChunk(format!(
            "expected {} bytes, got {}",
            total.div_ceil(8),
            bytes.len()
        )));
    }
    let mut k = 0;
    for j in row_start..row_end {
        for i in 0..n {
            raster.set(Cell::new(i, j), bytes[k / 8] & (0x80 >> (k % 8)) != 0);
            k += 1;
        }
    }
    Ok(())
}

/// Rebuilds a raster from a complete, contiguous run of chunk events.
/// The chunks are checked for shape before anything is allocated, so the
/// raster size is bounded by the payload actually received.
pub fn assemble_raster(chunks: &[Event]) -> Result<CSpaceRaster, ProtocolError> {
    let bad = |m: &str| Err(ProtocolError::BadChunk(m.to_string()));
    let parts: Vec<(usize, usize, usize, &str)> = chunks
        .iter()
        .filter_map(|ev| match ev {
            Event::RasterChunk {
                n,
                row_start,
                row_end,
                bits,
            } => Some((*n, *row_start, *row_end, bits.as_str())),
            _ => None,
        })
        .collect();
    let Some(&(n, ..)) = parts.first() else {
        return bad("raster incomplete");
    };
    let mut next_row = 0;
    for &(cn, start, end, bits) in &parts {
        if cn != n || start != next_row || end <= start || end > n {
            return bad("chunks are not contiguous");
        }
        // base64 length of the packed rows, checked without decoding
        let bytes = ((end - start) as u128 * n as u128).div_ceil(8);
        if bits.len() as u128 != bytes.div_ceil(3) * 4 {
            return bad("chunk payload has the wrong length");
        }
        next_row = end;
    }
    if next_row != n {
        return bad("raster incomplete");
    }
    let mut raster = CSpaceRaster::free(n).map_err(|e| ProtocolError::BadChunk(e.to_string()))?;
    for &(_, start, end, bits) in &parts {
        apply_chunk(&mut raster, start, end, bits)?;
    }
    Ok(raster)
}
