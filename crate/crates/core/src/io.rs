//! Binary PGM (P5) and 8-bit PNG input, P5 output.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{GrayImage, Grid};
use crate::model::LabelField;

const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";

/// Decoded P5 payload: dimensions plus the raw 8-bit samples.
#[derive(Clone, Debug, PartialEq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::MalformedHeader(format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::MalformedHeader(format!("{what} out of range")))
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Pgm> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::MalformedHeader("expected P5 magic".into()));
    }
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::ZeroDimension { width, height });
    }
    if maxval != 255 {
        return Err(Error::Unsupported(format!(
            "PGM maxval {maxval}; only 8-bit (255) is supported"
        )));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(Error::MalformedHeader("missing raster separator".into())),
    }
    let expected = width
        .checked_mul(height)
        .ok_or_else(|| Error::MalformedHeader("dimensions overflow".into()))?;
    let body = &bytes[cur.pos..];
    if body.len() < expected {
        return Err(Error::MalformedBody {
            expected,
            found: body.len(),
        });
    }
    Ok(Pgm {
        width,
        height,
        pixels: body[..expected].to_vec(),
    })
}

pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Pgm> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes)
}

pub fn write_pgm(path: impl AsRef<Path>, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(width, height, pixels)).map_err(|e| Error::io(path, e))
}

fn decode_png(bytes: &[u8]) -> Result<GrayImage> {
    use image::{DynamicImage, ImageFormat};

    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| Error::MalformedHeader(format!("png: {e}")))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::ZeroDimension {
            width: w,
            height: h,
        });
    }
    let data: Vec<f64> = match img {
        DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(scale).collect(),
        DynamicImage::ImageLumaA8(buf) => buf.pixels().map(|p| scale(p.0[0])).collect(),
        DynamicImage::ImageRgb8(buf) => buf.pixels().map(|p| average(&p.0)).collect(),
        DynamicImage::ImageRgba8(buf) => buf.pixels().map(|p| average(&p.0[..3])).collect(),
        other => {
            return Err(Error::Unsupported(format!(
                "png color type {:?}; only 8-bit gray or RGB",
                other.color()
            )))
        }
    };
    GrayImage::new(w, h, data)
}

#[inline]
fn scale(v: u8) -> f64 {
    v as f64 / 255.0
}

fn average(rgb: &[u8]) -> f64 {
    rgb.iter().map(|&c| c as f64).sum::<f64>() / (3.0 * 255.0)
}

/// Reads a P5 PGM or 8-bit PNG; RGB is averaged across channels.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes)
}

pub fn decode_image(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.starts_with(PNG_SIGNATURE) {
        decode_png(bytes)
    } else if bytes.starts_with(b"P5") {
        let pgm = decode_pgm(bytes)?;
        GrayImage::new(
            pgm.width,
            pgm.height,
            pgm.pixels.into_iter().map(scale).collect(),
        )
    } else {
        Err(Error::MalformedHeader(
            "unrecognized format (expected P5 PGM or PNG)".into(),
        ))
    }
}

/// Gray level for label `l` of `k`: `round(255 * l / (k - 1))`, or 0 when `k == 1`.
pub fn label_gray_levels(labels: &LabelField) -> Vec<u8> {
    let k = labels.k();
    labels
        .data()
        .iter()
        .map(|&l| {
            if k <= 1 {
                0
            } else {
                (255.0 * l as f64 / (k - 1) as f64).round() as u8
            }
        })
        .collect()
}

pub fn save_label_image(labels: &LabelField, path: impl AsRef<Path>) -> Result<()> {
    let (w, h) = labels.dims();
    write_pgm(path, w, h, &label_gray_levels(labels))
}

pub fn save_gray_image(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let bytes: Vec<u8> = img
        .data()
        .iter()
        .map(|&v| (v * 255.0).round() as u8)
        .collect();
    write_pgm(path, img.width(), img.height(), &bytes)
}

pub fn save_bool_mask(mask: &Grid<bool>, path: impl AsRef<Path>) -> Result<()> {
    let bytes: Vec<u8> = mask.data().iter().map(|&b| if b { 255 } else { 0 }).collect();
    write_pgm(path, mask.width(), mask.height(), &bytes)
}
