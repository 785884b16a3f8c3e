//! Binary 8-bit PGM (P5) reading and writing.

use std::io::{Read, Write};

use crate::denoise::GrayImage;
use crate::error::{Result, SparseError};

fn format_err(msg: impl Into<String>) -> SparseError {
    SparseError::Format(msg.into())
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
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
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format_err(format!("PGM {what} is missing or malformed")))
    }
}

/// Parses a P5 image. Samples are taken as-is (no rescaling when the
/// header's maxval is below 255).
pub fn read_pgm<R: Read>(mut input: R) -> Result<GrayImage> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if !bytes.starts_with(b"P5") {
        return Err(format_err("not a binary PGM (expected P5)"));
    }
    let mut h = Header { bytes: &bytes, pos: 2 };
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(format_err(format!("unsupported PGM maxval {maxval}; only 8-bit images are read")));
    }
    if !bytes.get(h.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(format_err("PGM header must end in a single whitespace byte"));
    }
    let data = &bytes[h.pos + 1..];
    let len = width
        .checked_mul(height)
        .ok_or_else(|| format_err("PGM dimensions overflow"))?;
    if data.len() != len {
        return Err(format_err(format!("PGM has {} pixel bytes, header says {len}", data.len())));
    }
    GrayImage::new(height, width, data.iter().map(|&b| f64::from(b)).collect())
}

/// Writes `img` as P5 with maxval 255, rounding and clipping each pixel.
pub fn write_pgm<W: Write>(img: &GrayImage, mut out: W) -> Result<()> {
    write!(out, "P5\n{} {}\n255\n", img.width(), img.height())?;
    out.write_all(&img.to_u8())?;
    out.flush()?;
    Ok(())
}

pub fn read_pgm_file(path: &std::path::Path) -> Result<GrayImage> {
    read_pgm(std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn write_pgm_file(img: &GrayImage, path: &std::path::Path) -> Result<()> {
    write_pgm(img, std::io::BufWriter::new(std::fs::File::create(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_comments_and_small_maxval() {
        let mut f = b"P5\n# made by hand\n3 2 # w h\n15\n".to_vec();
        f.extend_from_slice(&[0, 1, 2, 3, 4, 15]);
        let img = read_pgm(&f[..]).unwrap();
        assert_eq!((img.height(), img.width()), (2, 3));
        assert_eq!(img.get(1, 2), 15.0);
        assert_eq!(img.get(0, 1), 1.0);
    }

    #[test]
    fn rejects_malformed() {
        assert!(read_pgm(&b"P2\n1 1\n255\n0"[..]).is_err());
        assert!(read_pgm(&b"P5\n2 2\n255\n\x00\x01\x02"[..]).is_err());
        assert!(read_pgm(&b"P5\n1 1\n65535\n\x00\x00"[..]).is_err());
        assert!(read_pgm(&b"P5\nx 1\n255\n\x00"[..]).is_err());
        assert!(read_pgm(&b"P5\n1 1\n255"[..]).is_err());
    }

    #[test]
    fn writer_rounds_and_clips() {
        let img = GrayImage::new(1, 3, vec![-4.0, 127.6, 300.0]).unwrap();
        let mut buf = Vec::new();
        write_pgm(&img, &mut buf).unwrap();
        assert_eq!(buf, b"P5\n3 1\n255\n\x00\x80\xff");
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(h in 1usize..12, w in 1usize..12, seed in any::<u64>()) {
            let pixels: Vec<u8> = (0..h * w).map(|i| (seed.wrapping_mul(i as u64 + 1) >> 17) as u8).collect();
            let mut file = format!("P5\n{w} {h}\n255\n").into_bytes();
            file.extend_from_slice(&pixels);
            let img = read_pgm(&file[..]).unwrap();
            let mut again = Vec::new();
            write_pgm(&img, &mut again).unwrap();
            prop_assert_eq!(again, file);
        }
    }
}
