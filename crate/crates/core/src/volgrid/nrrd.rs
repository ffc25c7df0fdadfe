//! Reader and writer for the raw, little-endian, 3D subset of NRRD.
//!
//! Supported header fields: `type` (uint8, uint32 or float), `dimension: 3`,
//! `sizes`, `encoding: raw`, `endian: little`. The header ends at the first
//! blank line and the payload follows immediately. Other fields are ignored
//! with a warning.

use std::fs;
use std::path::Path;

use log::warn;

use super::{Dims, ElemKind, LabelGrid, MaskGrid, ProbGrid, Volume};
use crate::error::{Error, Result};

const MAGIC_PREFIX: &str = "NRRD000";

pub fn read_nrrd(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_nrrd(&bytes)
}

pub fn write_nrrd(volume: &Volume, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_nrrd(volume)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn header_error(line: usize, text: &str, reason: impl Into<String>) -> Error {
    Error::NrrdHeader {
        line,
        text: text.to_string(),
        reason: reason.into(),
    }
}

/// Parses an in-memory NRRD file.
pub fn decode_nrrd(bytes: &[u8]) -> Result<Volume> {
    let mut pos = 0;
    let mut line_no = 0;
    let mut kind: Option<ElemKind> = None;
    let mut dimension: Option<usize> = None;
    let mut sizes: Option<Dims> = None;
    let mut encoding_seen = false;
    let mut endian_little: Option<bool> = None;

    loop {
        let Some(nl) = bytes[pos..].iter().position(|&b| b == b'\n') else {
            return Err(header_error(
                line_no + 1,
                "",
                "header is not terminated by a blank line",
            ));
        };
        let raw = &bytes[pos..pos + nl];
        pos += nl + 1;
        line_no += 1;
        let text = std::str::from_utf8(raw)
            .map_err(|_| header_error(line_no, "<binary>", "header line is not UTF-8"))?
            .trim_end_matches('\r');

        if line_no == 1 {
            if !text.starts_with(MAGIC_PREFIX) || text.len() != MAGIC_PREFIX.len() + 1 {
                return Err(header_error(line_no, text, "missing NRRD magic"));
            }
            if text != "NRRD0004" {
                warn!("NRRD magic {text} is not NRRD0004; reading as the same subset");
            }
            continue;
        }
        if text.is_empty() {
            break;
        }
        if text.starts_with('#') {
            continue;
        }
        if text.contains(":=") {
            // key/value pairs carry no layout information
            continue;
        }
        let Some((key, value)) = text.split_once(": ") else {
            return Err(header_error(line_no, text, "expected `field: value`"));
        };
        let value = value.trim();
        match key.trim() {
            "type" => {
                kind = Some(match value {
                    "uint8" | "uchar" | "unsigned char" | "uint8_t" => ElemKind::Mask,
                    "uint32" | "uint" | "unsigned int" | "uint32_t" => ElemKind::Label,
                    "float" => ElemKind::Prob,
                    other => return Err(header_error(line_no, text, format!("unsupported type {other:?}"))),
                })
            }
            "dimension" => {
                let d: usize = value
                    .parse()
                    .map_err(|_| header_error(line_no, text, "dimension is not an integer"))?;
                if d != 3 {
                    return Err(header_error(line_no, text, "only 3D volumes are supported"));
                }
                dimension = Some(d);
            }
            "sizes" => {
                let parts: Vec<usize> = value
                    .split_whitespace()
                    .map(str::parse)
                    .collect::<Result<_, _>>()
                    .map_err(|_| header_error(line_no, text, "sizes must be integers"))?;
                let [nx, ny, nz] = parts[..] else {
                    return Err(header_error(line_no, text, "expected three sizes"));
                };
                if nx == 0 || ny == 0 || nz == 0 {
                    return Err(header_error(line_no, text, "sizes must be positive"));
                }
                sizes = Some(Dims::new(nx, ny, nz));
            }
            "encoding" => {
                if value != "raw" {
                    return Err(header_error(line_no, text, format!("unsupported encoding {value:?}")));
                }
                encoding_seen = true;
            }
            "endian" => match value {
                "little" => endian_little = Some(true),
                "big" => return Err(header_error(line_no, text, "big-endian data is unsupported")),
                _ => return Err(header_error(line_no, text, "unknown endianness")),
            },
            other => warn!("ignoring NRRD field {other:?} on line {line_no}"),
        }
    }

    let missing = |field: &str| header_error(line_no, "", format!("missing required field `{field}`"));
    let kind = kind.ok_or_else(|| missing("type"))?;
    dimension.ok_or_else(|| missing("dimension"))?;
    let dims = sizes.ok_or_else(|| missing("sizes"))?;
    if !encoding_seen {
        return Err(missing("encoding"));
    }
    if endian_little.is_none() && kind != ElemKind::Mask {
        return Err(missing("endian"));
    }

    let payload = &bytes[pos..];
    let expected = dims.len() * kind.byte_width();
    if payload.len() != expected {
        return Err(Error::NrrdPayload {
            expected,
            found: payload.len(),
        });
    }

    Ok(match kind {
        ElemKind::Mask => {
            let grid = MaskGrid::new(dims, payload.to_vec())?;
            grid.validate_mask()?;
            Volume::Mask(grid)
        }
        ElemKind::Label => Volume::Label(LabelGrid::new(
            dims,
            payload
                .chunks_exact(4)
                .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        )?),
        ElemKind::Prob => {
            let grid = ProbGrid::new(
                dims,
                payload
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect(),
            )?;
            grid.validate_probabilities()?;
            Volume::Prob(grid)
        }
    })
}

/// Serializes a validated volume to NRRD bytes.
pub fn encode_nrrd(volume: &Volume) -> Result<Vec<u8>> {
    volume.validate()?;
    let dims = volume.dims();
    let kind = volume.kind();
    let mut out = format!(
        "NRRD0004\ntype: {}\ndimension: 3\nsizes: {} {} {}\nendian: little\nencoding: raw\n\n",
        kind.nrrd_type(),
        dims.nx,
        dims.ny,
        dims.nz
    )
    .into_bytes();
    out.reserve(dims.len() * kind.byte_width());
    match volume {
        Volume::Mask(g) => out.extend_from_slice(g.data()),
        Volume::Label(g) => g.data().iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        Volume::Prob(g) => g.data().iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
    }
    Ok(out)
}
