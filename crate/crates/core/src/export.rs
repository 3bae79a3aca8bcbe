//! Plain-text and binary artifacts.
//!
//! Floats are written in the shortest form that round-trips, so every
//! CSV value parses back to the identical `f64`.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::semigroup::Trajectory;
use crate::stability::SpectralReport;

/// Write `bytes` to a sibling temporary file, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = dir.join(format!(
        ".{}.{}.tmp",
        name.to_string_lossy(),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

fn push_row<I: IntoIterator<Item = f64>>(out: &mut String, row: I) {
    for (j, v) in row.into_iter().enumerate() {
        if j > 0 {
            out.push(',');
        }
        let _ = write!(out, "{v:?}");
    }
    out.push('\n');
}

/// One matrix row per line, no header.
pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        push_row(&mut out, m.row(i).iter().copied());
    }
    out
}

pub fn matrix_from_csv(text: &str) -> io::Result<DMatrix<f64>> {
    let bad = |msg: String| io::Error::new(io::ErrorKind::InvalidData, msg);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let row = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(format!("line {}: {e}", i + 1)))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(bad(format!("line {}: ragged row", i + 1)));
            }
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// `rows: u64 LE`, `cols: u64 LE`, then `rows·cols` little-endian `f64`
/// in column-major order.
pub fn matrix_to_bytes(m: &DMatrix<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * m.len());
    out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn matrix_from_bytes(bytes: &[u8]) -> io::Result<DMatrix<f64>> {
    let bad = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, msg.to_string());
    if bytes.len() < 16 {
        return Err(bad("truncated header"));
    }
    let word = |i: usize| u64::from_le_bytes(bytes[8 * i..8 * i + 8].try_into().unwrap()) as usize;
    let (rows, cols) = (word(0), word(1));
    let len = rows.checked_mul(cols).ok_or_else(|| bad("size overflow"))?;
    if bytes.len() != 16 + 8 * len {
        return Err(bad("payload length does not match header"));
    }
    let data = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    Ok(DMatrix::from_iterator(rows, cols, data))
}

/// Header `t,energy,state_0,…,state_{d-1}`, one row per sample.
pub fn trajectory_to_csv(tr: &Trajectory) -> String {
    let d = tr.states.first().map_or(0, |s| s.len());
    let mut out = String::from("t,energy");
    for i in 0..d {
        let _ = write!(out, ",state_{i}");
    }
    out.push('\n');
    for ((t, e), s) in tr.times.iter().zip(&tr.energies).zip(&tr.states) {
        push_row(&mut out, [*t, *e].into_iter().chain(s.iter().copied()));
    }
    out
}

/// Header `t,energy`.
pub fn energy_to_csv(tr: &Trajectory) -> String {
    let mut out = String::from("t,energy\n");
    for (t, e) in tr.times.iter().zip(&tr.energies) {
        push_row(&mut out, [*t, *e]);
    }
    out
}

/// Header `re,im`.
pub fn eigenvalues_to_csv(report: &SpectralReport) -> String {
    let mut out = String::from("re,im\n");
    for z in &report.eigenvalues {
        push_row(&mut out, [z.re, z.im]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let m = DMatrix::from_row_slice(2, 3, &[0.1, -1e-300, 1.0 / 3.0, 6.02e23, 0.0, -2.5]);
        let text = matrix_to_csv(&m);
        assert_eq!(text.lines().next(), Some("0.1,-1e-300,0.3333333333333333"));
        assert_eq!(matrix_from_csv(&text).unwrap(), m);
    }

    #[test]
    fn binary_is_column_major() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = matrix_to_bytes(&m);
        assert_eq!(b.len(), 16 + 32);
        assert_eq!(f64::from_le_bytes(b[24..32].try_into().unwrap()), 3.0);
        assert_eq!(matrix_from_bytes(&b).unwrap(), m);
        assert!(matrix_from_bytes(&b[..40]).is_err());
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = std::env::temp_dir().join(format!("cs-export-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let p = dir.join("m.csv");
        write_atomic(&p, b"old").unwrap();
        write_atomic(&p, b"new").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"new");
        assert_eq!(fs::read_dir(&dir).unwrap().count(), 1);
        fs::remove_dir_all(&dir).unwrap();
    }
}
