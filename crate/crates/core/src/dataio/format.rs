//! The `SPDS` binary dataset format.
//!
//! All integers are little-endian `u32`, all reals little-endian IEEE-754
//! binary64.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "SPDS"
//! 4       4     version (1)
//! 8       4     d
//! 12      4     N (record count)
//! 16      4     L (label count)
//! 20      4     flags (bit 0: repair non-PD matrices on read)
//! 24      ...   N records: label u32, then d(d+1)/2 reals of the lower
//!               triangle in row-major order (row i holds columns 0..=i)
//! ```

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::LabeledSpdDataset;
use crate::error::{Error, Result};
use crate::spd::{sym, sym_eig, SpdMatrix, PD_TOL};

pub const MAGIC: &[u8; 4] = b"SPDS";
pub const VERSION: u32 = 1;
/// Header flag: lift non-positive eigenvalues instead of rejecting the record.
pub const FLAG_REPAIR: u32 = 1;

const HEADER_LEN: usize = 24;

pub fn write_dataset(path: impl AsRef<Path>, data: &LabeledSpdDataset) -> Result<()> {
    let bytes = encode(data, 0);
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    f.sync_all()?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<LabeledSpdDataset> {
    decode(&fs::read(path)?)
}

pub(crate) fn encode(data: &LabeledSpdDataset, flags: u32) -> Vec<u8> {
    let d = data.dim();
    let tri = d * (d + 1) / 2;
    let mut out = Vec::with_capacity(HEADER_LEN + data.len() * (4 + 8 * tri));
    out.extend_from_slice(MAGIC);
    for v in [VERSION, d as u32, data.len() as u32, data.label_count(), flags] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for (x, &y) in data.samples().iter().zip(data.labels()) {
        out.extend_from_slice(&y.to_le_bytes());
        let m = x.as_matrix();
        for i in 0..d {
            for j in 0..=i {
                out.extend_from_slice(&m[(i, j)].to_le_bytes());
            }
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::CorruptFile(format!(
                "truncated while reading {what} at byte {}",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub(crate) fn decode(bytes: &[u8]) -> Result<LabeledSpdDataset> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4, "magic")? != MAGIC {
        return Err(Error::CorruptFile("bad magic, not an SPDS file".into()));
    }
    let version = cur.u32("version")?;
    if version != VERSION {
        return Err(Error::CorruptFile(format!("unsupported version {version}")));
    }
    let d = cur.u32("dimension")? as usize;
    let n = cur.u32("record count")? as usize;
    let l = cur.u32("label count")?;
    let flags = cur.u32("flags")?;
    if d == 0 || n == 0 || l == 0 {
        return Err(Error::CorruptFile(format!("empty header fields d={d} N={n} L={l}")));
    }
    let record_len = 4 + 8 * d * (d + 1) / 2;
    let expected = HEADER_LEN as u64 + n as u64 * record_len as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::CorruptFile(format!(
            "expected {expected} bytes for {n} records of dimension {d}, found {}",
            bytes.len()
        )));
    }

    let mut samples = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for r in 0..n {
        let y = cur.u32("label")?;
        if y == 0 || y > l {
            return Err(Error::CorruptFile(format!("record {r}: label {y} outside 1..={l}")));
        }
        let mut m = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..=i {
                let v = cur.f64("matrix entry")?;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        let x = if flags & FLAG_REPAIR != 0 {
            repair(m)
        } else {
            SpdMatrix::new(m)
        };
        samples.push(x.map_err(|e| e.at("record", r))?);
        labels.push(y);
    }
    LabeledSpdDataset::new(samples, labels, l)
}

/// Raises eigenvalues to a floor relative to the spectral radius.
fn repair(m: DMatrix<f64>) -> Result<SpdMatrix> {
    let eig = sym_eig(&m)?;
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let floor = (1e-8 * top).max(10.0 * PD_TOL);
    if eig.min_eigenvalue() > floor {
        return SpdMatrix::new(m);
    }
    SpdMatrix::new(sym(&eig.map(|v| v.max(floor))))
}

/// Plain-text import: one sample per line, the label followed by the `d²`
/// matrix entries in row-major order, separated by whitespace or commas.
/// Blank lines and lines starting with `#` are skipped.
pub fn read_text_dataset(path: impl AsRef<Path>) -> Result<LabeledSpdDataset> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    let mut d = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let bad = |msg: String| Error::InvalidDataset(format!("line {}: {msg}", lineno + 1));
        let fields: Vec<&str> = t.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).collect();
        let label: u32 = fields[0].parse().map_err(|_| bad(format!("bad label {:?}", fields[0])))?;
        let values = fields[1..]
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| bad(format!("bad number {s:?}"))))
            .collect::<Result<Vec<f64>>>()?;
        let side = (values.len() as f64).sqrt().round() as usize;
        if side == 0 || side * side != values.len() {
            return Err(bad(format!("{} entries is not a square matrix", values.len())));
        }
        if *d.get_or_insert(side) != side {
            return Err(bad(format!("dimension {side} differs from earlier lines")));
        }
        let m = DMatrix::from_row_slice(side, side, &values);
        samples.push(SpdMatrix::new(m).map_err(|e| e.at("line", lineno + 1))?);
        labels.push(label);
    }
    LabeledSpdDataset::from_labeled(samples, labels)
}
