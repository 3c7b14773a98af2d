//! BRAW and PGM file formats.
//!
//! BRAW is an ASCII header `BRAW <width> <height> <bands>\n` followed by
//! `width * height * bands` unsigned bytes, band-major then row-major.
//! Gap masks are stored as single-band BRAW (255 = missing, 0 = present)
//! and class maps as single-band BRAW holding the labels.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::raster::{ClassMap, GapMask, Raster};

const MAGIC: &str = "BRAW";
const MAX_HEADER: usize = 96;
/// Refuse payloads above 16 GiB.
const MAX_PAYLOAD: u64 = 1 << 34;

pub fn encode_braw(r: &Raster<u8>) -> Vec<u8> {
    let header = format!("{MAGIC} {} {} {}\n", r.width(), r.height(), r.bands());
    let mut out = Vec::with_capacity(header.len() + r.data().len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(r.data());
    out
}

pub fn decode_braw(bytes: &[u8]) -> Result<Raster<u8>> {
    let nl = bytes
        .iter()
        .take(MAX_HEADER)
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::MalformedHeader("no header line terminator".into()))?;
    let header = std::str::from_utf8(&bytes[..nl])
        .map_err(|_| Error::MalformedHeader("header is not ASCII".into()))?;
    let fields: Vec<&str> = header.split(' ').collect();
    if fields.len() != 4 || fields[0] != MAGIC {
        return Err(Error::MalformedHeader(format!(
            "expected `BRAW w h b`, got `{header}`"
        )));
    }
    let mut dims = [0u64; 3];
    for (d, f) in dims.iter_mut().zip(&fields[1..]) {
        if f.is_empty() || !f.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::MalformedHeader(format!("bad dimension `{f}`")));
        }
        *d = f.parse().map_err(|_| Error::DimensionOverflow {
            width: u64::MAX,
            height: u64::MAX,
            bands: u64::MAX,
        })?;
    }
    let [width, height, bands] = dims;
    if width == 0 || height == 0 || bands == 0 {
        return Err(Error::MalformedHeader(format!(
            "dimensions must be >= 1, got {width}x{height}x{bands}"
        )));
    }
    let overflow = Error::DimensionOverflow {
        width,
        height,
        bands,
    };
    let len = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(bands))
        .filter(|&n| n <= MAX_PAYLOAD)
        .ok_or(overflow)?;
    let len = usize::try_from(len).map_err(|_| Error::DimensionOverflow {
        width,
        height,
        bands,
    })?;
    let payload = &bytes[nl + 1..];
    if payload.len() < len {
        return Err(Error::Truncated {
            expected: len,
            found: payload.len(),
        });
    }
    if payload.len() > len {
        return Err(Error::TrailingData(payload.len() - len));
    }
    Raster::from_vec(
        width as usize,
        height as usize,
        bands as usize,
        payload.to_vec(),
    )
}

pub fn read_braw_from(mut reader: impl Read) -> Result<Raster<u8>> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    decode_braw(&bytes)
}

pub fn write_braw_to(r: &Raster<u8>, mut writer: impl Write) -> Result<()> {
    writer.write_all(&encode_braw(r))?;
    Ok(())
}

pub fn read_raster(path: impl AsRef<Path>) -> Result<Raster<u8>> {
    decode_braw(&fs::read(path)?)
}

pub fn write_raster(r: &Raster<u8>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_braw(r))?;
    Ok(())
}

pub fn mask_to_raster(mask: &GapMask) -> Raster<u8> {
    let data = mask
        .as_slice()
        .iter()
        .map(|&m| if m { 255 } else { 0 })
        .collect();
    Raster::from_vec(mask.width(), mask.height(), 1, data).expect("mask dimensions are valid")
}

/// Any nonzero sample counts as missing.
pub fn raster_to_mask(r: &Raster<u8>) -> Result<GapMask> {
    if r.bands() != 1 {
        return Err(invalid(format!(
            "mask raster must have 1 band, found {}",
            r.bands()
        )));
    }
    GapMask::from_vec(
        r.width(),
        r.height(),
        r.band(0).iter().map(|&v| v != 0).collect(),
    )
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<GapMask> {
    raster_to_mask(&read_raster(path)?)
}

pub fn write_mask(mask: &GapMask, path: impl AsRef<Path>) -> Result<()> {
    write_raster(&mask_to_raster(mask), path)
}

pub fn classmap_to_raster(map: &ClassMap) -> Result<Raster<u8>> {
    let data = map
        .labels()
        .iter()
        .map(|&l| u8::try_from(l).map_err(|_| invalid(format!("label {l} does not fit in 8 bits"))))
        .collect::<Result<Vec<u8>>>()?;
    Raster::from_vec(map.width(), map.height(), 1, data)
}

pub fn write_classmap(map: &ClassMap, path: impl AsRef<Path>) -> Result<()> {
    write_raster(&classmap_to_raster(map)?, path)
}

/// Class count is taken as the largest label present.
pub fn read_classmap(path: impl AsRef<Path>) -> Result<ClassMap> {
    let r = read_raster(path)?;
    if r.bands() != 1 {
        return Err(invalid("class map raster must have 1 band"));
    }
    let labels: Vec<u16> = r.band(0).iter().map(|&v| v as u16).collect();
    let k = labels.iter().copied().max().unwrap_or(0) as usize;
    ClassMap::new(r.width(), r.height(), k, labels)
}

/// Binary PGM (`P5`, maxval 255) of one band.
pub fn encode_pgm(r: &Raster<u8>, band: usize) -> Result<Vec<u8>> {
    if band >= r.bands() {
        return Err(invalid(format!(
            "band {band} out of range ({} bands)",
            r.bands()
        )));
    }
    let header = format!("P5\n{} {}\n255\n", r.width(), r.height());
    let mut out = header.into_bytes();
    out.extend_from_slice(r.band(band));
    Ok(out)
}

pub fn write_pgm(r: &Raster<u8>, band: usize, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_pgm(r, band)?)?;
    Ok(())
}

/// Parse a `P5` PGM with maxval 255 into a single-band raster.
pub fn decode_pgm(bytes: &[u8]) -> Result<Raster<u8>> {
    let mut pos = 0;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::MalformedHeader("incomplete PGM header".into()));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // exactly one whitespace byte separates the header from the payload
    pos += 1;
    if tokens[0] != "P5" || tokens[3] != "255" {
        return Err(Error::MalformedHeader(format!(
            "expected P5 with maxval 255, got {} / {}",
            tokens[0], tokens[3]
        )));
    }
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::MalformedHeader(format!("bad PGM dimension `{s}`")))
    };
    let (w, h) = (parse(&tokens[1])?, parse(&tokens[2])?);
    let len = w.checked_mul(h).ok_or(Error::DimensionOverflow {
        width: w as u64,
        height: h as u64,
        bands: 1,
    })?;
    let payload = bytes.get(pos..).unwrap_or(&[]);
    if payload.len() < len {
        return Err(Error::Truncated {
            expected: len,
            found: payload.len(),
        });
    }
    Raster::from_vec(w, h, 1, payload[..len].to_vec())
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Raster<u8>> {
    decode_pgm(&fs::read(path)?)
}
