//! Output formats: fixed-format CSV, 16-bit binary PGM, checksums and
//! atomic writes.

use std::io::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::lattice::{FluxPattern, LatticeGraph};
use crate::Result;

/// C-style `%.12e`: twelve mantissa digits, signed exponent of at least
/// two digits.
pub fn fmt_e(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:.12e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

/// A CSV document with a fixed header.
#[derive(Debug, Clone)]
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Csv { text, columns: header.len() }
    }

    /// Appends a row of already formatted fields.
    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) {
        debug_assert_eq!(fields.len(), self.columns);
        for (k, f) in fields.iter().enumerate() {
            if k > 0 {
                self.text.push(',');
            }
            self.text.push_str(f.as_ref());
        }
        self.text.push('\n');
    }

    pub fn as_bytes(&self) -> &[u8] {
        self.text.as_bytes()
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

/// Binary 16-bit PGM (P5, big-endian), `values` row-major, linearly mapped
/// from `[min, max]` onto `[0, 65535]`. A constant image maps to zero.
pub fn pgm16(width: usize, height: usize, values: &[f64]) -> Vec<u8> {
    assert_eq!(values.len(), width * height, "PGM size mismatch");
    let (lo, hi) = min_max(values);
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    out.reserve(2 * values.len());
    for &v in values {
        let level = if hi > lo { ((v - lo) / (hi - lo) * 65535.0).round() as u16 } else { 0 };
        out.extend_from_slice(&level.to_be_bytes());
    }
    out
}

pub fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn sites_csv(graph: &LatticeGraph) -> Csv {
    let mut csv = Csv::new(&["id", "kind", "row", "col", "omega"]);
    for s in &graph.sites {
        csv.row(&[s.id.to_string(), s.kind.name().to_string(), s.row.to_string(), s.col.to_string(), fmt_e(s.omega)]);
    }
    csv
}

pub fn links_csv(graph: &LatticeGraph) -> Csv {
    let mut csv = Csv::new(&["i", "j", "kind", "amplitude", "phase"]);
    for l in &graph.links {
        csv.row(&[l.i.to_string(), l.j.to_string(), l.kind.name().to_string(), fmt_e(l.amplitude), fmt_e(l.phase)]);
    }
    csv
}

pub fn fluxes_csv(pattern: &FluxPattern) -> Csv {
    let mut csv = Csv::new(&["plaquette_row", "plaquette_col", "flux"]);
    for r in 0..pattern.rows {
        for c in 0..pattern.cols {
            csv.row(&[r.to_string(), c.to_string(), fmt_e(pattern.get(r, c))]);
        }
    }
    csv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_style_exponent() {
        assert_eq!(fmt_e(1.0), "1.000000000000e+00");
        assert_eq!(fmt_e(-0.00123), "-1.230000000000e-03");
        assert_eq!(fmt_e(0.0), "0.000000000000e+00");
        assert_eq!(fmt_e(6.02214076e123), "6.022140760000e+123");
        assert_eq!(fmt_e(f64::NAN), "nan");
    }

    #[test]
    fn pgm_layout() {
        let img = pgm16(2, 1, &[0.0, 2.0]);
        let header = b"P5\n2 1\n65535\n";
        assert_eq!(&img[..header.len()], header);
        assert_eq!(&img[header.len()..], &[0, 0, 0xff, 0xff]);
        let flat = pgm16(1, 2, &[3.0, 3.0]);
        assert!(flat[flat.len() - 4..].iter().all(|&b| b == 0));
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn checksum_is_stable() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
