//! Binary field files.
//!
//! A file is one JSON header line followed by the nodal values as raw
//! little-endian `f64` in row-major node order:
//!
//! ```text
//! {"magic":"choquard-field/1","N":1,"M":256,"L":8.0,"count":256,"byte_order":"little","element_type":"float64"}\n
//! <count × 8 bytes>
//! ```

use std::fs;
use std::path::Path;

use choquard_core::{Grid, ScalarField};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::output::write_atomic;

pub const MAGIC: &str = "choquard-field/1";

/// Upper bound on the header line, so a binary file without a newline is
/// rejected quickly.
const MAX_HEADER_BYTES: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub magic: String,
    #[serde(rename = "N")]
    pub dim: usize,
    #[serde(rename = "M")]
    pub points: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
    pub count: usize,
    pub byte_order: String,
    pub element_type: String,
}

impl FieldHeader {
    pub fn for_grid(grid: &Grid) -> Self {
        Self {
            magic: MAGIC.to_string(),
            dim: grid.dim(),
            points: grid.points(),
            half_width: grid.half_width(),
            count: grid.len(),
            byte_order: "little".to_string(),
            element_type: "float64".to_string(),
        }
    }
}

pub fn encode_field(field: &ScalarField) -> Result<Vec<u8>> {
    let header = serde_json::to_string(&FieldHeader::for_grid(field.grid()))?;
    let mut bytes = Vec::with_capacity(header.len() + 1 + 8 * field.values().len());
    bytes.extend_from_slice(header.as_bytes());
    bytes.push(b'\n');
    for v in field.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    Ok(bytes)
}

pub fn save_field(path: &Path, field: &ScalarField) -> Result<()> {
    let bytes = encode_field(field)?;
    write_atomic(path, |w| w.write_all(&bytes))
}

/// Splits and checks the header, returning it with the payload slice.
pub fn parse_header<'a>(path: &Path, bytes: &'a [u8]) -> Result<(FieldHeader, &'a [u8])> {
    let window = &bytes[..bytes.len().min(MAX_HEADER_BYTES)];
    let newline = window
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| CliError::field(path, "no header line (magic mismatch)"))?;
    let header: FieldHeader = serde_json::from_slice(&bytes[..newline])
        .map_err(|e| CliError::field(path, format!("unreadable header (magic mismatch): {e}")))?;
    if header.magic != MAGIC {
        return Err(CliError::field(
            path,
            format!("magic mismatch: expected {MAGIC:?}, found {:?}", header.magic),
        ));
    }
    if header.byte_order != "little" || header.element_type != "float64" {
        return Err(CliError::field(
            path,
            format!("unsupported encoding {}/{}", header.byte_order, header.element_type),
        ));
    }
    let expected = header.points.checked_pow(header.dim as u32);
    if expected != Some(header.count) {
        return Err(CliError::field(
            path,
            format!(
                "value count {} does not match M^N = {}^{}",
                header.count, header.points, header.dim
            ),
        ));
    }
    Ok((header, &bytes[newline + 1..]))
}

fn decode(path: &Path, bytes: &[u8], target: Option<&Grid>) -> Result<ScalarField> {
    let (header, payload) = parse_header(path, bytes)?;
    let grid =
        Grid::new(header.dim, header.half_width, header.points).map_err(|e| CliError::field(path, e.to_string()))?;
    if let Some(t) = target {
        if t != &grid {
            return Err(CliError::field(
                path,
                format!(
                    "grid mismatch: file has N={}, M={}, L={} but the run uses N={}, M={}, L={}",
                    grid.dim(),
                    grid.points(),
                    grid.half_width(),
                    t.dim(),
                    t.points(),
                    t.half_width()
                ),
            ));
        }
    }
    let needed = 8 * header.count;
    if payload.len() < needed {
        return Err(CliError::field(
            path,
            format!("truncated payload: {} of {needed} bytes", payload.len()),
        ));
    }
    if payload.len() > needed {
        return Err(CliError::field(
            path,
            format!("{} trailing bytes after payload", payload.len() - needed),
        ));
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    ScalarField::from_values(grid, values).map_err(|e| CliError::field(path, e.to_string()))
}

/// Reads a field on the grid recorded in its header.
pub fn load_field(path: &Path) -> Result<ScalarField> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode(path, &bytes, None)
}

/// Reads a field and requires it to live on `grid`.
pub fn load_field_on(path: &Path, grid: &Grid) -> Result<ScalarField> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode(path, &bytes, Some(grid))
}
