//! Reader for the IDX files MNIST is distributed in, flattened to row vectors.

use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

fn header(path: &Path, bytes: &[u8], expected_dims: u8) -> Result<(Vec<usize>, usize)> {
    if bytes.len() < 4 || bytes[0] != 0 || bytes[1] != 0 || bytes[2] != 0x08 {
        return Err(Error::data(path, "not an unsigned-byte IDX file"));
    }
    let dims = bytes[3];
    if dims != expected_dims {
        return Err(Error::data(
            path,
            format!("expected {expected_dims} dimensions, found {dims}"),
        ));
    }
    let start = 4 + 4 * dims as usize;
    if bytes.len() < start {
        return Err(Error::data(path, "truncated IDX header"));
    }
    let shape: Vec<usize> = bytes[4..start]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let total: usize = shape.iter().product();
    if bytes.len() != start + total {
        return Err(Error::data(
            path,
            format!("expected {} payload bytes, found {}", total, bytes.len() - start),
        ));
    }
    Ok((shape, start))
}

/// Images as rows of pixel intensities scaled to `[0, 1]`.
pub fn read_images(path: &Path) -> Result<Matrix<f64>> {
    let bytes = std::fs::read(path).map_err(|e| Error::data(path, e.to_string()))?;
    let (shape, start) = header(path, &bytes, 3)?;
    let width = shape[1] * shape[2];
    let data = bytes[start..].iter().map(|&b| b as f64 / 255.0).collect();
    Matrix::from_vec(shape[0], width, data)
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let bytes = std::fs::read(path).map_err(|e| Error::data(path, e.to_string()))?;
    let (_, start) = header(path, &bytes, 1)?;
    Ok(bytes[start..].iter().map(|&b| b as usize).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx(dims: &[u32], payload: &[u8]) -> Vec<u8> {
        let mut out = vec![0, 0, 8, dims.len() as u8];
        for d in dims {
            out.extend_from_slice(&d.to_be_bytes());
        }
        out.extend_from_slice(payload);
        out
    }

    #[test]
    fn reads_flat_images_and_labels() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("img");
        let lab = dir.path().join("lab");
        std::fs::write(&img, idx(&[2, 2, 2], &[0, 255, 51, 0, 255, 255, 0, 0])).unwrap();
        std::fs::write(&lab, idx(&[2], &[7, 3])).unwrap();
        let x = read_images(&img).unwrap();
        assert_eq!((x.rows(), x.cols()), (2, 4));
        assert_eq!(x.row(0), &[0.0, 1.0, 0.2, 0.0]);
        assert_eq!(read_labels(&lab).unwrap(), vec![7, 3]);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("img");
        std::fs::write(&img, idx(&[2, 2, 2], &[0, 1, 2])).unwrap();
        assert!(read_images(&img).is_err());
    }
}
