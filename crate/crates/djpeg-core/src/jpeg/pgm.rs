//! Binary PGM (P5, maxval 255) reading and writing.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{CodecError, GrayImage};

fn parse_header_token(bytes: &[u8], pos: &mut usize) -> Result<u64, CodecError> {
    // skip whitespace and '#' comment lines
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        *pos += 1;
    }
    if start == *pos {
        return Err(CodecError::Malformed("pgm: expected integer in header".into()));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .unwrap()
        .parse::<u64>()
        .map_err(|e| CodecError::Malformed(format!("pgm: bad integer: {e}")))
}

pub fn read_pgm(path: &Path) -> Result<GrayImage, CodecError> {
    let bytes = fs::read(path)?;
    if bytes.len() < 2 || &bytes[0..2] != b"P5" {
        return Err(CodecError::Unsupported(
            "pgm: only binary P5 is supported".into(),
        ));
    }
    let mut pos = 2;
    let width = parse_header_token(&bytes, &mut pos)? as usize;
    let height = parse_header_token(&bytes, &mut pos)? as usize;
    let maxval = parse_header_token(&bytes, &mut pos)?;
    if maxval != 255 {
        return Err(CodecError::Unsupported(format!(
            "pgm: maxval {maxval}, only 255 is supported"
        )));
    }
    // exactly one whitespace byte separates header and raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(CodecError::Malformed("pgm: missing raster separator".into()));
    }
    pos += 1;
    let need = width * height;
    if bytes.len() < pos + need {
        return Err(CodecError::Malformed(format!(
            "pgm: truncated raster, need {need} bytes, have {}",
            bytes.len() - pos
        )));
    }
    Ok(GrayImage::new(
        width,
        height,
        bytes[pos..pos + need].to_vec(),
    ))
}

pub fn write_pgm(img: &GrayImage, path: &Path) -> Result<(), CodecError> {
    let mut f = fs::File::create(path)?;
    write!(f, "P5\n{} {}\n255\n", img.width, img.height)?;
    f.write_all(&img.samples)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn write_read_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.pgm");
        let img = GrayImage::new(3, 2, vec![0, 128, 255, 10, 20, 30]);
        write_pgm(&img, &p).unwrap();
        assert_eq!(read_pgm(&p).unwrap(), img);
    }

    #[test]
    fn header_variants_parse() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        let mut data = b"P5 2 2 255\n".to_vec();
        data.extend_from_slice(&[1, 2, 3, 4]);
        std::fs::write(&p, &data).unwrap();
        let img = read_pgm(&p).unwrap();
        assert_eq!((img.width, img.height), (2, 2));

        // interleaved comments parse to the same image
        let q = dir.path().join("b.pgm");
        let mut data = b"P5\n# made by hand\n2\n# width above\n2\n255\n".to_vec();
        data.extend_from_slice(&[1, 2, 3, 4]);
        std::fs::write(&q, &data).unwrap();
        assert_eq!(read_pgm(&q).unwrap(), img);
    }

    #[test]
    fn rejects_p2_wrong_maxval_truncated() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.pgm");

        std::fs::write(&p, b"P2\n2 2\n255\n1 2 3 4").unwrap();
        assert!(read_pgm(&p).is_err());

        let mut data = b"P5\n2 2\n65535\n".to_vec();
        data.extend_from_slice(&[0; 8]);
        std::fs::write(&p, &data).unwrap();
        assert!(read_pgm(&p).is_err());

        std::fs::write(&p, b"P5\n4 4\n255\nab").unwrap();
        assert!(read_pgm(&p).is_err());
    }
}
