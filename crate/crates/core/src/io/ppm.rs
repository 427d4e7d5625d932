//! Binary PPM (P6, RGB) and PGM (P5, gray) with maxval 255.

use std::path::Path;

use super::{format_error, read_bytes, write_bytes};
use crate::error::{Position, Result};
use crate::geometry::Image;

struct Header {
    magic: [u8; 2],
    fields: [usize; 3],
    data_start: usize,
}

fn parse_header(bytes: &[u8], path: &Path) -> Result<Header> {
    if bytes.len() < 2 || (bytes[..2] != *b"P6" && bytes[..2] != *b"P5") {
        return Err(format_error(path, Position::Offset(0), "expected P6 or P5 magic number"));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // Whitespace and comments before each header field.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|b| *b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(format_error(path, Position::Offset(pos), "expected a header number"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| format_error(path, Position::Offset(start), "header number out of range"))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(format_error(path, Position::Offset(pos), "expected whitespace after maxval"));
    }
    Ok(Header {
        magic: [bytes[0], bytes[1]],
        fields,
        data_start: pos + 1,
    })
}

/// Decodes P6/P5 bytes into an image with values `byte / 255`.
pub fn decode_ppm(bytes: &[u8], path: &Path) -> Result<Image> {
    let h = parse_header(bytes, path)?;
    let [width, height, maxval] = h.fields;
    if maxval != 255 {
        return Err(format_error(path, Position::Offset(h.data_start - 1), format!("unsupported maxval {maxval}, expected 255")));
    }
    if width == 0 || height == 0 {
        return Err(format_error(path, Position::Offset(0), "image dimensions must be positive"));
    }
    let channels = if h.magic == *b"P6" { 3 } else { 1 };
    let n = width * height * channels;
    let data = &bytes[h.data_start..];
    if data.len() < n {
        return Err(format_error(
            path,
            Position::Offset(bytes.len()),
            format!("truncated pixel data: expected {n} bytes, found {}", data.len()),
        ));
    }
    if data.len() > n {
        return Err(format_error(path, Position::Offset(h.data_start + n), "trailing bytes after pixel data"));
    }
    Image::new(width, height, channels, data.iter().map(|b| *b as f64 / 255.0).collect())
}

/// Encodes with the canonical header `P6\n{w} {h}\n255\n` (P5 for gray),
/// mapping values by `floor(255 v + 0.5)` clamped to `[0, 255]`.
pub fn encode_ppm(image: &Image) -> Vec<u8> {
    let magic = if image.channels == 3 { "P6" } else { "P5" };
    let mut out = format!("{magic}\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend(image.data.iter().map(|v| (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8));
    out
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    decode_ppm(&read_bytes(path)?, path)
}

pub fn write_ppm(path: impl AsRef<Path>, image: &Image) -> Result<()> {
    write_bytes(path.as_ref(), &encode_ppm(image))
}
