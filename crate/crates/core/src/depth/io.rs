//! On-disk formats for depth rasters and masks.
//!
//! Depth raster (`.dpth`): magic `DPTH`, little-endian `u32` width, `u32`
//! height, then `width * height` little-endian `f32` samples row-major, in
//! meters, `NaN` for invalid pixels.
//!
//! Mask: binary PGM (`P5`, maxval 255); 255 means masked, 0 background.

use std::io::{Read, Write};
use std::path::Path;

use super::{DepthError, DepthMap, Mask};
use crate::scalar::Real;

const DPTH_MAGIC: &[u8; 4] = b"DPTH";

pub fn write_dpth<T: Real>(map: &DepthMap<T>, path: &Path) -> Result<(), DepthError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(DPTH_MAGIC)?;
    out.write_all(&map.width().to_le_bytes())?;
    out.write_all(&map.height().to_le_bytes())?;
    for &v in map.data() {
        // A single canonical NaN keeps the byte stream deterministic.
        let f = if v.is_nan() {
            f32::NAN
        } else {
            v.as_f64() as f32
        };
        out.write_all(&f.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_dpth<T: Real>(path: &Path) -> Result<DepthMap<T>, DepthError> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    file.read_exact(&mut magic)?;
    if &magic != DPTH_MAGIC {
        return Err(DepthError::BadMagic);
    }
    let mut dims = [0u8; 8];
    file.read_exact(&mut dims)?;
    let width = u32::from_le_bytes(dims[0..4].try_into().expect("4 bytes"));
    let height = u32::from_le_bytes(dims[4..8].try_into().expect("4 bytes"));
    let count = (width as usize)
        .checked_mul(height as usize)
        .ok_or(DepthError::BadSize {
            width,
            height,
            len: usize::MAX,
        })?;
    let mut raw = Vec::new();
    file.read_to_end(&mut raw)?;
    if raw.len() != count * 4 {
        return Err(DepthError::Truncated {
            expected: count * 4,
            got: raw.len(),
        });
    }
    let data = raw
        .chunks_exact(4)
        .map(|c| {
            let f = f32::from_le_bytes(c.try_into().expect("4 bytes"));
            T::of(f as f64)
        })
        .collect();
    DepthMap::new(width, height, data)
}

pub fn write_pgm(mask: &Mask, path: &Path) -> Result<(), DepthError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(out, "P5\n{} {}\n255\n", mask.width(), mask.height())?;
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            out.write_all(&[if mask.get(x, y) { 255 } else { 0 }])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_pgm(path: &Path) -> Result<Mask, DepthError> {
    let bytes = std::fs::read(path)?;
    if !bytes.starts_with(b"P5") {
        return Err(DepthError::BadPgm {
            reason: "not a binary pgm (missing P5)",
        });
    }
    // Header: three whitespace-separated integers after the magic, with
    // '#' comments running to end of line. One whitespace byte then samples.
    let mut pos = 2usize;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // Skip whitespace and comments.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => {
                    return Err(DepthError::BadPgm {
                        reason: "truncated header",
                    })
                }
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(DepthError::BadPgm {
                reason: "expected integer in header",
            });
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *field = text.parse().map_err(|_| DepthError::BadPgm {
            reason: "header integer out of range",
        })?;
    }
    let [width, height, maxval] = fields;
    if maxval == 0 || maxval > 255 {
        return Err(DepthError::BadPgm {
            reason: "maxval must be in 1..=255",
        });
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => {
            return Err(DepthError::BadPgm {
                reason: "missing sample separator",
            })
        }
    }
    let count = width * height;
    if bytes.len() - pos != count {
        return Err(DepthError::BadPgm {
            reason: "sample count does not match dimensions",
        });
    }
    let bits = bytes[pos..].iter().map(|&b| b != 0).collect();
    Mask::new(width as u32, height as u32, bits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dpth_round_trip_preserves_values_and_nan() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.dpth");
        let map = DepthMap::new(3, 2, vec![0.25, 1.5, f64::NAN, 0.75, 2.0, 0.5]).unwrap();
        write_dpth(&map, &path).unwrap();
        let back: DepthMap<f64> = read_dpth(&path).unwrap();
        assert_eq!(back.width(), 3);
        assert_eq!(back.height(), 2);
        for (a, b) in map.data().iter().zip(back.data()) {
            assert!((a.is_nan() && b.is_nan()) || a == b);
        }
    }

    #[test]
    fn dpth_layout_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.dpth");
        let map = DepthMap::new(2, 1, vec![1.0f64, 0.5]).unwrap();
        write_dpth(&map, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let mut want = b"DPTH".to_vec();
        want.extend(2u32.to_le_bytes());
        want.extend(1u32.to_le_bytes());
        want.extend(1.0f32.to_le_bytes());
        want.extend(0.5f32.to_le_bytes());
        assert_eq!(bytes, want);
    }

    #[test]
    fn dpth_rejects_bad_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.dpth");
        std::fs::write(&bad, b"DPTXxxxxxxxx").unwrap();
        assert!(matches!(
            read_dpth::<f64>(&bad),
            Err(DepthError::BadMagic)
        ));
        let short = dir.path().join("short.dpth");
        let mut bytes = b"DPTH".to_vec();
        bytes.extend(2u32.to_le_bytes());
        bytes.extend(2u32.to_le_bytes());
        bytes.extend(1.0f32.to_le_bytes());
        std::fs::write(&short, bytes).unwrap();
        assert!(matches!(
            read_dpth::<f64>(&short),
            Err(DepthError::Truncated { expected: 16, got: 4 })
        ));
    }

    #[test]
    fn pgm_round_trip_and_header_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pgm");
        let mut mask = Mask::filled(3, 2, false);
        mask.set(1, 0, true);
        mask.set(2, 1, true);
        write_pgm(&mask, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes, b"P5\n3 2\n255\n\x00\xff\x00\x00\x00\xff");
        assert_eq!(read_pgm(&path).unwrap(), mask);
    }

    #[test]
    fn pgm_accepts_comments_and_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.pgm");
        std::fs::write(&path, b"P5\n# a comment\n2 1\n255\n\xff\x00").unwrap();
        let mask = read_pgm(&path).unwrap();
        assert!(mask.get(0, 0) && !mask.get(1, 0));
        std::fs::write(&path, b"P6\n2 1\n255\n\xff\x00").unwrap();
        assert!(read_pgm(&path).is_err());
        std::fs::write(&path, b"P5\n2 1\n255\n\xff").unwrap();
        assert!(matches!(
            read_pgm(&path),
            Err(DepthError::BadPgm { .. })
        ));
    }
}
