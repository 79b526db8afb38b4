//! Image files: binary PGM for U8, binary PPM for RGB, and a raw little-endian
//! container (`GVXIMG01`) for every other format.

use std::path::Path;

use crate::exec::{Image, Pixels};
use crate::graph::ImageFormat;
use crate::io::IoError;

pub const RAW_MAGIC: &[u8; 8] = b"GVXIMG01";

pub fn encode_image(img: &Image) -> Vec<u8> {
    let mut out = Vec::new();
    match img.format {
        ImageFormat::U8 | ImageFormat::Rgb => {
            let magic = if img.format == ImageFormat::U8 { "P5" } else { "P6" };
            out.extend(format!("{magic}\n{} {}\n255\n", img.width, img.height).bytes());
        }
        f => {
            out.extend(RAW_MAGIC);
            out.extend(img.width.to_le_bytes());
            out.extend(img.height.to_le_bytes());
            out.extend(f.code().to_le_bytes());
        }
    }
    out.extend(img.pixels.to_le_bytes());
    out
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self) -> Result<u32, IoError> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| IoError::Format("malformed netpbm header".into()))
    }
}

pub fn decode_image(bytes: &[u8]) -> Result<Image, IoError> {
    let bad = |m: &str| IoError::Format(m.to_string());
    let (width, height, format, body) = if bytes.starts_with(RAW_MAGIC) {
        if bytes.len() < 20 {
            return Err(bad("truncated raw header"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let format = ImageFormat::from_code(word(16)).ok_or_else(|| bad("unknown format code"))?;
        (word(8), word(12), format, &bytes[20..])
    } else if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        let format = if bytes[1] == b'5' { ImageFormat::U8 } else { ImageFormat::Rgb };
        let mut h = Header { bytes, pos: 2 };
        let (w, ht, max) = (h.number()?, h.number()?, h.number()?);
        if max != 255 {
            return Err(bad("only 8-bit netpbm images are supported"));
        }
        // Exactly one whitespace byte separates the header from the raster.
        (w, ht, format, bytes.get(h.pos + 1..).ok_or_else(|| bad("truncated netpbm file"))?)
    } else {
        return Err(bad("unrecognized image file"));
    };
    if width == 0 || height == 0 || !format.is_resolved() {
        return Err(bad("image must have positive size and a concrete format"));
    }
    let t = format.channel_type().expect("concrete");
    let expected = Image::storage_len(width, height, format) * t.bytes();
    if body.len() != expected {
        return Err(IoError::Format(format!("expected {expected} pixel bytes, found {}", body.len())));
    }
    let pixels = Pixels::from_le_bytes(t, body).ok_or_else(|| bad("pixel data"))?;
    Image::from_pixels(width, height, format, pixels).ok_or_else(|| bad("inconsistent image"))
}

pub fn read_image(path: &Path) -> Result<Image, IoError> {
    decode_image(&std::fs::read(path)?)
}

pub fn write_image(path: &Path, img: &Image) -> Result<(), IoError> {
    Ok(std::fs::write(path, encode_image(img))?)
}

/// Conventional extension for the container [`encode_image`] picks.
pub fn extension(format: ImageFormat) -> &'static str {
    match format {
        ImageFormat::U8 => "pgm",
        ImageFormat::Rgb => "ppm",
        _ => "gvx",
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn every_format_round_trips_byte_identically() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for f in ImageFormat::CONCRETE {
            let img = Image::random(6, 3, f, &mut rng);
            let bytes = encode_image(&img);
            let back = decode_image(&bytes).unwrap();
            assert_eq!(encode_image(&back), bytes, "{f}");
            assert_eq!(back.pixels.to_le_bytes(), img.pixels.to_le_bytes());
        }
    }

    #[test]
    fn pgm_header_with_comment() {
        let mut bytes = b"P5\n# made by hand\n2 1\n255\n".to_vec();
        bytes.extend([7, 9]);
        let img = decode_image(&bytes).unwrap();
        assert_eq!((img.width, img.height, img.pixels.clone()), (2, 1, Pixels::U8(vec![7, 9])));
    }

    #[test]
    fn truncated_raster_is_rejected() {
        let bytes = b"P5 2 2 255\n\x01\x02\x03".to_vec();
        assert!(decode_image(&bytes).is_err());
    }
}
