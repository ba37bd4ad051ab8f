//! Binary Netpbm frames: 8-bit PGM (`P5`), 8-bit PPM (`P6`) and grayscale PFM (`Pf`).
//!
//! PFM rows are stored bottom-to-top; arrays here are always top row first.
//! Only little-endian PFM (negative scale) is written; both byte orders are read.

use ndarray::{Array2, Array3};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetpbmError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

impl NetpbmError {
    fn format(path: &Path, msg: impl Into<String>) -> Self {
        NetpbmError::Format { path: path.to_path_buf(), msg: msg.into() }
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, NetpbmError> {
    fs::read(path).map_err(|source| NetpbmError::Io { path: path.to_path_buf(), source })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), NetpbmError> {
    let io_err = |source| NetpbmError::Io { path: path.to_path_buf(), source };
    let mut f = io::BufWriter::new(fs::File::create(path).map_err(io_err)?);
    f.write_all(bytes).map_err(io_err)?;
    f.flush().map_err(io_err)
}

/// Splits `count` whitespace-separated header tokens (skipping `#` comments)
/// and returns them with the offset of the first data byte.
fn header_tokens(bytes: &[u8], count: usize) -> Option<(Vec<String>, usize)> {
    let mut tokens = Vec::with_capacity(count);
    let mut i = 0;
    while tokens.len() < count {
        while i < bytes.len() && (bytes[i].is_ascii_whitespace() || bytes[i] == b'#') {
            if bytes[i] == b'#' {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            } else {
                i += 1;
            }
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return None;
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    // exactly one whitespace byte separates the header from the raster
    if i >= bytes.len() || !bytes[i].is_ascii_whitespace() {
        return None;
    }
    Some((tokens, i + 1))
}

struct Header {
    width: usize,
    height: usize,
    data: usize,
}

fn parse_8bit(path: &Path, bytes: &[u8], magic: &str) -> Result<Header, NetpbmError> {
    let (t, data) = header_tokens(bytes, 4).ok_or_else(|| NetpbmError::format(path, "truncated header"))?;
    if t[0] != magic {
        return Err(NetpbmError::format(path, format!("expected magic {magic}, found {}", t[0])));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| NetpbmError::format(path, format!("bad header field {s:?}")));
    let (width, height, maxval) = (num(&t[1])?, num(&t[2])?, num(&t[3])?);
    if maxval != 255 {
        return Err(NetpbmError::format(path, format!("only maxval 255 is supported, found {maxval}")));
    }
    if width == 0 || height == 0 {
        return Err(NetpbmError::format(path, "empty image"));
    }
    Ok(Header { width, height, data })
}

pub fn read_pgm(path: &Path) -> Result<Array2<u8>, NetpbmError> {
    let bytes = read_bytes(path)?;
    let h = parse_8bit(path, &bytes, "P5")?;
    let n = h.width * h.height;
    let raster = bytes.get(h.data..h.data + n).ok_or_else(|| NetpbmError::format(path, "truncated raster"))?;
    Ok(Array2::from_shape_vec((h.height, h.width), raster.to_vec()).expect("shape matches length"))
}

pub fn write_pgm(path: &Path, img: &Array2<u8>) -> Result<(), NetpbmError> {
    let (height, width) = img.dim();
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(img.iter());
    write_bytes(path, &out)
}

/// Quantizes a [0, 255] float image for PGM output, rounding half to even.
pub fn quantize(img: &Array2<f64>) -> Array2<u8> {
    img.mapv(|v| v.clamp(0.0, 255.0).round_ties_even() as u8)
}

/// Reads an RGB image as `height x width x 3`.
pub fn read_ppm(path: &Path) -> Result<Array3<u8>, NetpbmError> {
    let bytes = read_bytes(path)?;
    let h = parse_8bit(path, &bytes, "P6")?;
    let n = h.width * h.height * 3;
    let raster = bytes.get(h.data..h.data + n).ok_or_else(|| NetpbmError::format(path, "truncated raster"))?;
    Ok(Array3::from_shape_vec((h.height, h.width, 3), raster.to_vec()).expect("shape matches length"))
}

pub fn write_ppm(path: &Path, img: &Array3<u8>) -> Result<(), NetpbmError> {
    let (height, width, ch) = img.dim();
    if ch != 3 {
        return Err(NetpbmError::format(path, format!("PPM needs 3 channels, got {ch}")));
    }
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend(img.iter());
    write_bytes(path, &out)
}

pub fn read_pfm(path: &Path) -> Result<Array2<f64>, NetpbmError> {
    let bytes = read_bytes(path)?;
    let (t, data) = header_tokens(&bytes, 4).ok_or_else(|| NetpbmError::format(path, "truncated header"))?;
    if t[0] != "Pf" {
        return Err(NetpbmError::format(path, format!("expected grayscale PFM (Pf), found {}", t[0])));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| NetpbmError::format(path, format!("bad header field {s:?}")));
    let (width, height) = (num(&t[1])?, num(&t[2])?);
    let scale: f64 = t[3].parse().map_err(|_| NetpbmError::format(path, format!("bad scale {:?}", t[3])))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(NetpbmError::format(path, "scale must be nonzero"));
    }
    let little = scale < 0.0;
    let n = width * height;
    let raster = bytes.get(data..data + 4 * n).ok_or_else(|| NetpbmError::format(path, "truncated raster"))?;
    let mut out = Array2::zeros((height, width));
    for (k, chunk) in raster.chunks_exact(4).enumerate() {
        let b: [u8; 4] = chunk.try_into().expect("chunk of 4");
        let v = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        let (file_row, col) = (k / width, k % width);
        out[[height - 1 - file_row, col]] = v as f64;
    }
    Ok(out)
}

/// Writes a little-endian grayscale PFM (values stored as `f32`).
pub fn write_pfm(path: &Path, img: &Array2<f64>) -> Result<(), NetpbmError> {
    let (height, width) = img.dim();
    let mut out = format!("Pf\n{width} {height}\n-1.0\n").into_bytes();
    out.reserve(4 * width * height);
    for row in img.rows().into_iter().rev() {
        for &v in row {
            out.extend((v as f32).to_le_bytes());
        }
    }
    write_bytes(path, &out)
}
