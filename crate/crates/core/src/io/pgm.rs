//! Binary (P5) PGM images, 8-bit and 16-bit big-endian.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PgmData {
    Gray8(Vec<u8>),
    Gray16(Vec<u16>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub data: PgmData,
}

impl Pgm {
    pub fn gray8(width: usize, height: usize, data: Vec<u8>) -> Self {
        assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            data: PgmData::Gray8(data),
        }
    }

    pub fn gray16(width: usize, height: usize, data: Vec<u16>) -> Self {
        assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            data: PgmData::Gray16(data),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let maxval = match self.data {
            PgmData::Gray8(_) => 255,
            PgmData::Gray16(_) => 65535,
        };
        let mut out = format!("P5\n{} {}\n{}\n", self.width, self.height, maxval).into_bytes();
        match &self.data {
            PgmData::Gray8(d) => out.extend_from_slice(d),
            PgmData::Gray16(d) => {
                out.reserve(d.len() * 2);
                for v in d {
                    out.extend_from_slice(&v.to_be_bytes());
                }
            }
        }
        out
    }

    pub fn decode(path: &Path, bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::parse(path, 0, format!("malformed PGM: {msg}"));
        let mut pos = 0usize;
        let mut fields = [0usize; 3];
        let magic = next_token(bytes, &mut pos).ok_or_else(|| bad("missing magic"))?;
        if magic != b"P5" {
            return Err(bad("expected binary P5 magic"));
        }
        for f in fields.iter_mut() {
            let tok = next_token(bytes, &mut pos).ok_or_else(|| bad("truncated header"))?;
            *f = std::str::from_utf8(tok)
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("non-numeric header field"))?;
        }
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        let [width, height, maxval] = fields;
        let n = width * height;
        let raster = bytes.get(pos..).unwrap_or(&[]);
        let data = match maxval {
            1..=255 => {
                if raster.len() != n {
                    return Err(bad("raster size does not match header"));
                }
                PgmData::Gray8(raster.to_vec())
            }
            256..=65535 => {
                if raster.len() != 2 * n {
                    return Err(bad("raster size does not match header"));
                }
                PgmData::Gray16(
                    raster
                        .chunks_exact(2)
                        .map(|c| u16::from_be_bytes([c[0], c[1]]))
                        .collect(),
                )
            }
            _ => return Err(bad("unsupported maxval")),
        };
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(path, &bytes)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn into_gray8(self, path: &Path) -> Result<Vec<u8>> {
        match self.data {
            PgmData::Gray8(d) => Ok(d),
            PgmData::Gray16(_) => Err(Error::parse(path, 0, "expected an 8-bit PGM")),
        }
    }

    pub fn into_gray16(self, path: &Path) -> Result<Vec<u16>> {
        match self.data {
            PgmData::Gray16(d) => Ok(d),
            PgmData::Gray8(_) => Err(Error::parse(path, 0, "expected a 16-bit PGM")),
        }
    }
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (*pos > start).then(|| &bytes[start..*pos])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_is_exact() {
        let img = Pgm::gray8(2, 1, vec![0, 128]);
        assert_eq!(img.encode(), b"P5\n2 1\n255\n\x00\x80".to_vec());
    }

    #[test]
    fn empty_image_encodes() {
        let img = Pgm::gray8(0, 0, vec![]);
        let back = Pgm::decode(Path::new("x"), &img.encode()).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn comments_in_header() {
        let bytes = b"P5\n# made by hand\n1 1\n255\n\x07";
        let img = Pgm::decode(Path::new("x"), bytes).unwrap();
        assert_eq!(img.data, PgmData::Gray8(vec![7]));
    }

    #[test]
    fn truncated_raster_rejected() {
        assert!(Pgm::decode(Path::new("x"), b"P5\n2 2\n255\n\x00").is_err());
        assert!(Pgm::decode(Path::new("x"), b"P2\n1 1\n255\n0").is_err());
    }

    proptest! {
        #[test]
        fn gray16_round_trip(w in 0usize..8, h in 0usize..8, seed in any::<u64>()) {
            let data: Vec<u16> = (0..w * h).map(|i| (seed.wrapping_mul(i as u64 + 7) >> 17) as u16).collect();
            let img = Pgm::gray16(w, h, data);
            prop_assert_eq!(Pgm::decode(Path::new("x"), &img.encode()).unwrap(), img);
        }
    }
}
