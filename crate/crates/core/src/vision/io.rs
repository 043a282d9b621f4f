//! Image ingestion: PGM (P2/P5), PPM (P3/P6) and CSV pixel grids.
//!
//! Color is reduced to luminance `0.299 R + 0.587 G + 0.114 B`. Values are
//! scaled by the file's maxval into `[0, 1]`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::vision::Image;

pub fn load_image(path: &Path) -> Result<Image> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let is_csv = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        let text = std::str::from_utf8(&bytes).map_err(|e| Error::Format {
            offset: e.valid_up_to(),
            message: "CSV image is not UTF-8".into(),
        })?;
        parse_csv_grid(text)
    } else {
        decode_pnm(&bytes)
    }
}

/// Rows of comma-separated values already in `[0, 1]`.
pub fn parse_csv_grid(text: &str) -> Result<Image> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if !trimmed.is_empty() {
            let row = trimmed
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Format {
                    offset,
                    message: format!("bad pixel value: {e}"),
                })?;
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    return Err(Error::Format {
                        offset,
                        message: format!("row has {} values, expected {}", row.len(), first.len()),
                    });
                }
            }
            rows.push(row);
        }
        offset += line.len();
    }
    let height = rows.len();
    let width = rows.first().map(Vec::len).unwrap_or(0);
    if height == 0 || width == 0 {
        return Err(Error::Format {
            offset: 0,
            message: "empty pixel grid".into(),
        });
    }
    Image::new(width, height, rows.concat()).map_err(|e| Error::Format {
        offset: 0,
        message: e.to_string(),
    })
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Format {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn uint(&mut self, what: &str) -> Result<usize> {
        self.skip_ws_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            self.pos = start;
            return Err(self.err(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| self.err(format!("{what} out of range")))
    }
}

/// Decodes a netpbm graymap or pixmap.
pub fn decode_pnm(bytes: &[u8]) -> Result<Image> {
    let mut c = Cursor { bytes, pos: 0 };
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(c.err("missing netpbm magic"));
    }
    let kind = bytes[1];
    let (channels, binary) = match kind {
        b'2' => (1, false),
        b'5' => (1, true),
        b'3' => (3, false),
        b'6' => (3, true),
        _ => return Err(c.err(format!("unsupported netpbm type P{}", kind as char))),
    };
    c.pos = 2;
    let width = c.uint("width")?;
    let height = c.uint("height")?;
    let maxval = c.uint("maxval")?;
    if width == 0 || height == 0 {
        return Err(c.err("zero image dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(c.err(format!("maxval {maxval} out of range")));
    }
    let n = width * height * channels;
    let mut raw = Vec::with_capacity(n);
    if binary {
        if c.pos >= bytes.len() || !bytes[c.pos].is_ascii_whitespace() {
            return Err(c.err("expected single whitespace before raster"));
        }
        c.pos += 1;
        let bps = if maxval < 256 { 1 } else { 2 };
        let need = n * bps;
        if bytes.len() - c.pos < need {
            c.pos = bytes.len();
            return Err(c.err(format!("raster truncated: need {need} bytes")));
        }
        for i in 0..n {
            let at = c.pos + i * bps;
            let v = if bps == 1 {
                bytes[at] as usize
            } else {
                ((bytes[at] as usize) << 8) | bytes[at + 1] as usize
            };
            raw.push(v);
        }
    } else {
        for _ in 0..n {
            raw.push(c.uint("sample")?);
        }
    }
    if let Some(v) = raw.iter().find(|&&v| v > maxval) {
        return Err(c.err(format!("sample {v} exceeds maxval {maxval}")));
    }
    let scale = maxval as f64;
    let pixels = if channels == 1 {
        raw.iter().map(|&v| v as f64 / scale).collect()
    } else {
        raw.chunks(3)
            .map(|p| (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) / scale)
            .collect()
    };
    Ok(Image::from_clamped(width, height, pixels))
}

/// Binary 8-bit PGM.
pub fn encode_pgm(img: &Image) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.pixels().iter().map(|p| (p * 255.0).round() as u8));
    out
}

pub fn save_pgm(path: &Path, img: &Image) -> Result<()> {
    fs::write(path, encode_pgm(img)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascii_pgm_scaling() {
        let img = decode_pnm(b"P2\n# comment\n2 2\n255\n0 255\n128 64\n").unwrap();
        assert_eq!(img.pixels()[0], 0.0);
        assert_eq!(img.pixels()[1], 1.0);
        assert!((img.pixels()[2] - 0.50196).abs() < 1e-5);
        assert!((img.pixels()[3] - 0.25098).abs() < 1e-5);
    }

    #[test]
    fn binary_equals_ascii() {
        let ascii = decode_pnm(b"P2\n2 2\n255\n0 255\n128 64\n").unwrap();
        let mut bin = b"P5\n2 2\n255\n".to_vec();
        bin.extend([0u8, 255, 128, 64]);
        assert_eq!(decode_pnm(&bin).unwrap(), ascii);
    }

    #[test]
    fn truncated_raster() {
        let mut bin = b"P5\n2 2\n255\n".to_vec();
        bin.extend([0u8, 255, 128]);
        match decode_pnm(&bin) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, bin.len()),
            other => panic!("{other:?}"),
        }
        assert!(decode_pnm(b"P2\n2 2\n255\n0 1 2").is_err());
        assert!(decode_pnm(b"P7\n").is_err());
    }

    #[test]
    fn ppm_luminance() {
        let img = decode_pnm(b"P3\n1 1\n255\n255 0 0\n").unwrap();
        assert!((img.pixels()[0] - 0.299).abs() < 1e-12);
    }

    #[test]
    fn csv_grid() {
        let img = parse_csv_grid("0,0.5\n1,0.25\n").unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        assert!(parse_csv_grid("0,0.5\n1\n").is_err());
    }

    #[test]
    fn pgm_round_trip() {
        let img = Image::new(3, 1, vec![0.0, 1.0, 0.2]).unwrap();
        let back = decode_pnm(&encode_pgm(&img)).unwrap();
        assert_eq!(back.pixels()[1], 1.0);
        assert!((back.pixels()[2] - 51.0 / 255.0).abs() < 1e-12);
    }
}
