//! 8-bit gray-scale image files.
//!
//! Binary PGM (`P5`) is always available; 8-bit gray-scale PNG is accepted on
//! read (detected by signature) and written when the output path ends in
//! `.png`. Samples map linearly between `[0, maxval]` and `[0, 1]`; writing
//! quantizes with round-half-up on `value * 255`.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use super::CliError;
use crate::image::GrayImage;

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0D, 0x0A, 0x1A, 0x0A];

/// Round-half-up quantization of a `[0, 1]` value to a byte.
pub fn quantize(v: f64) -> u8 {
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

pub fn to_bytes(img: &GrayImage) -> Vec<u8> {
    img.data().iter().map(|&v| quantize(v)).collect()
}

pub fn from_bytes(height: usize, width: usize, bytes: &[u8], maxval: u16) -> GrayImage {
    let scale = f64::from(maxval);
    GrayImage::new(height, width, bytes.iter().map(|&b| f64::from(b) / scale).collect())
        .expect("byte samples are finite and sized")
}

/// Reads a PGM or PNG file into `[0, 1]` samples.
pub fn read_gray(path: &Path) -> Result<GrayImage, CliError> {
    if !path.exists() {
        return Err(CliError::MissingFile(path.to_path_buf()));
    }
    let bytes = fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let decoded = if bytes.starts_with(&PNG_SIGNATURE) {
        decode_png(&bytes)
    } else {
        decode_pgm(&bytes)
    };
    decoded.map_err(|reason| CliError::Format {
        path: path.to_path_buf(),
        reason,
    })
}

/// Writes PNG when the extension is `.png`, PGM otherwise.
pub fn write_gray(path: &Path, img: &GrayImage) -> Result<(), CliError> {
    let is_png = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    let bytes = if is_png { encode_png(img) } else { encode_pgm(img) };
    fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(to_bytes(img));
    out
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, String> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(format!("missing {what} in PGM header"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("bad {what} in PGM header"))
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage, String> {
    if !bytes.starts_with(b"P5") {
        return Err("not a binary PGM (P5) or PNG file".into());
    }
    let mut rd = HeaderReader { bytes, pos: 2 };
    let width = rd.number("width")?;
    let height = rd.number("height")?;
    let maxval = rd.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(format!("empty image {width}x{height}"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(format!("unsupported maxval {maxval} (only 8-bit PGM is supported)"));
    }
    // exactly one whitespace byte separates the header from the raster
    if rd.pos >= bytes.len() || !bytes[rd.pos].is_ascii_whitespace() {
        return Err("truncated PGM header".into());
    }
    let raster = &bytes[rd.pos + 1..];
    let n = width * height;
    if raster.len() < n {
        return Err(format!("PGM raster has {} bytes, expected {n}", raster.len()));
    }
    Ok(from_bytes(height, width, &raster[..n], maxval as u16))
}

fn encode_png(img: &GrayImage) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width() as u32, img.height() as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().expect("in-memory PNG header");
        writer.write_image_data(&to_bytes(img)).expect("in-memory PNG data");
    }
    out
}

fn decode_png(bytes: &[u8]) -> Result<GrayImage, String> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(|e| e.to_string())?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| "PNG image too large".to_string())?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(|e| e.to_string())?;
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
        return Err(format!(
            "PNG must be 8-bit gray-scale, found {:?} at {:?}",
            info.color_type, info.bit_depth
        ));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let rows: Vec<u8> = buf[..info.buffer_size()]
        .chunks(info.line_size)
        .flat_map(|line| line[..w].iter().copied())
        .collect();
    Ok(from_bytes(h, w, &rows, 255))
}
