//! Snapshot persistence: a small binary format for coefficient blocks plus a
//! CSV export for external plotting.
//!
//! Binary layout: magic `SPF1`, then the mode cutoff N and the associated
//! quadrature grid size M as little-endian u32, then the N x N coefficients as
//! little-endian f64 in row-major order. Bit-exact roundtrip is part of the
//! contract; trajectory reproducibility tests rely on it.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::spectral::SpectralField;

const MAGIC: &[u8; 4] = b"SPF1";

/// Write a field and its preferred quadrature grid size to `path`.
pub fn save_spf(field: &SpectralField, grid_m: usize, path: &Path) -> Result<()> {
    let n = field.cutoff();
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(n as u32).to_le_bytes())?;
    w.write_all(&(grid_m as u32).to_le_bytes())?;
    for row in field.coeffs().rows() {
        for &c in row {
            w.write_all(&c.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a field written by [`save_spf`]; returns the field and its grid size hint.
pub fn load_spf(path: &Path) -> Result<(SpectralField, usize)> {
    let fail = |reason: &str| Error::SnapshotFormat {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| fail("file too short for header"))?;
    if &magic != MAGIC {
        return Err(fail("bad magic; not a field snapshot"));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word).map_err(|_| fail("truncated header"))?;
    let n = u32::from_le_bytes(word) as usize;
    r.read_exact(&mut word).map_err(|_| fail("truncated header"))?;
    let m = u32::from_le_bytes(word) as usize;
    if n == 0 {
        return Err(fail("cutoff must be positive"));
    }
    if m < n {
        return Err(fail("grid size hint smaller than cutoff"));
    }
    let mut coeffs = Array2::zeros((n, n));
    let mut buf = [0u8; 8];
    for k1 in 0..n {
        for k2 in 0..n {
            r.read_exact(&mut buf).map_err(|_| fail("truncated coefficient block"))?;
            coeffs[[k1, k2]] = f64::from_le_bytes(buf);
        }
    }
    if r.read(&mut buf[..1]).map_err(Error::Io)? != 0 {
        return Err(fail("trailing bytes after coefficient block"));
    }
    Ok((SpectralField::from_coeffs(coeffs)?, m))
}

/// Dump coefficients as `k1,k2,coeff` rows for plotting tools.
pub fn export_csv(field: &SpectralField, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "k1,k2,coeff")?;
    let n = field.cutoff();
    for k1 in 0..n {
        for k2 in 0..n {
            writeln!(w, "{},{},{:.17e}", k1, k2, field.coeffs()[[k1, k2]])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::ModeIndex;

    #[test]
    fn roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.spf");
        let mut f = SpectralField::zeros(5);
        for k1 in 0..5 {
            for k2 in 0..5 {
                f.coeffs_mut()[[k1, k2]] = (k1 as f64 * 1.7 - k2 as f64 * 0.3).tan();
            }
        }
        save_spf(&f, 10, &path).unwrap();
        let (g, m) = load_spf(&path).unwrap();
        assert_eq!(m, 10);
        assert_eq!(g.cutoff(), 5);
        for (a, b) in f.coeffs().iter().zip(g.coeffs().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn rejects_corrupt_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.spf");
        std::fs::write(&path, b"nope").unwrap();
        assert!(matches!(load_spf(&path), Err(Error::SnapshotFormat { .. })));

        let truncated = dir.path().join("short.spf");
        let f = SpectralField::constant(3, 1.0);
        save_spf(&f, 6, &truncated).unwrap();
        let bytes = std::fs::read(&truncated).unwrap();
        std::fs::write(&truncated, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(load_spf(&truncated), Err(Error::SnapshotFormat { .. })));
    }

    #[test]
    fn csv_layout_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.csv");
        let mut f = SpectralField::zeros(2);
        f.set_coeff(ModeIndex::new(1, 0), -0.5);
        export_csv(&f, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("k1,k2,coeff"));
        assert_eq!(lines.count(), 4);
        assert!(text.contains("1,0,-5"));
    }
}
