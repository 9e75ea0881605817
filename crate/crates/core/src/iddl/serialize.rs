//! The `IDDL` model container.
//!
//! Little-endian throughout; reals are IEEE-754 binary64, matrices row-major.
//!
//! ```text
//! offset  size        field
//! 0       4           magic "IDDL"
//! 4       4  u32      version (1)
//! 8       4  u32      d
//! 12      4  u32      n (atoms)
//! 16      4  u32      L (classes)
//! 20      1           variant tag, ASCII S, V, N, A or B
//! 21      3           zero padding
//! 24      8  f64      gamma
//! 32      8  u64      H (history records)
//! 40      n·d·d f64   atoms
//!         n f64       alpha
//!         n f64       beta
//!         L·n f64     W
//!         H × 40      history: start, after_dictionary, after_params,
//!                     after_w (f64 each), flags u64 (bit 0 dictionary
//!                     skipped, bit 1 parameters skipped)
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use super::model::{Dictionary, IddlModel, OuterRecord};
use crate::divergence::{AbldParams, Variant};
use crate::error::{Error, Result};
use crate::spd::SpdMatrix;

pub const MODEL_MAGIC: &[u8; 4] = b"IDDL";
pub const MODEL_VERSION: u32 = 1;

const HEADER_LEN: usize = 40;
const RECORD_LEN: usize = 40;

pub fn save_model(model: &IddlModel) -> Vec<u8> {
    let d = model.dim();
    let n = model.n_atoms();
    let l = model.label_count as usize;
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * (n * d * d + 2 * n + l * n) + RECORD_LEN * model.history.len());
    out.extend_from_slice(MODEL_MAGIC);
    for v in [MODEL_VERSION, d as u32, n as u32, model.label_count] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.push(model.params.variant().tag() as u8);
    out.extend_from_slice(&[0; 3]);
    out.extend_from_slice(&model.gamma.to_le_bytes());
    out.extend_from_slice(&(model.history.len() as u64).to_le_bytes());
    let put = |out: &mut Vec<u8>, x: f64| out.extend_from_slice(&x.to_le_bytes());
    for b in model.dictionary.atoms() {
        let m = b.as_matrix();
        for i in 0..d {
            for j in 0..d {
                put(&mut out, m[(i, j)]);
            }
        }
    }
    model.params.alpha().iter().for_each(|&a| put(&mut out, a));
    model.params.beta().iter().for_each(|&b| put(&mut out, b));
    for i in 0..l {
        for j in 0..n {
            put(&mut out, model.w[(i, j)]);
        }
    }
    for r in &model.history {
        for x in [r.start, r.after_dictionary, r.after_params, r.after_w] {
            put(&mut out, x);
        }
        let flags = r.dictionary_skipped as u64 | (r.params_skipped as u64) << 1;
        out.extend_from_slice(&flags.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::CorruptFile(format!("model file truncated at byte {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
}

pub fn load_model(bytes: &[u8]) -> Result<IddlModel> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MODEL_MAGIC {
        return Err(Error::CorruptFile("bad magic, not an IDDL model".into()));
    }
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(Error::CorruptFile(format!("unsupported model version {version}")));
    }
    let d = r.u32()? as usize;
    let n = r.u32()? as usize;
    let l = r.u32()?;
    let tag = r.take(4)?[0] as char;
    let variant = Variant::from_tag(tag).ok_or_else(|| Error::CorruptFile(format!("unknown variant tag {tag:?}")))?;
    let gamma = r.f64()?;
    let h = r.u64()?;
    if d == 0 || n == 0 || l == 0 {
        return Err(Error::CorruptFile(format!("empty header fields d={d} n={n} L={l}")));
    }
    let body = (n * d * d + 2 * n + l as usize * n) as u128 * 8 + h as u128 * RECORD_LEN as u128;
    if (bytes.len() - HEADER_LEN) as u128 != body {
        return Err(Error::CorruptFile(format!(
            "model body is {} bytes, header implies {body}",
            bytes.len() - HEADER_LEN
        )));
    }

    let mut atoms = Vec::with_capacity(n);
    for k in 0..n {
        let m = DMatrix::from_row_slice(d, d, &r.f64s(d * d)?);
        atoms.push(SpdMatrix::new(m).map_err(|e| Error::CorruptFile(format!("atom {k}: {e}")))?);
    }
    let alpha = r.f64s(n)?;
    let beta = r.f64s(n)?;
    let w = DMatrix::from_row_slice(l as usize, n, &r.f64s(l as usize * n)?);
    let mut history = Vec::with_capacity(h as usize);
    for _ in 0..h {
        let v = r.f64s(4)?;
        let flags = r.u64()?;
        history.push(OuterRecord {
            start: v[0],
            after_dictionary: v[1],
            after_params: v[2],
            after_w: v[3],
            dictionary_skipped: flags & 1 != 0,
            params_skipped: flags & 2 != 0,
        });
    }
    let corrupt = |e: Error| Error::CorruptFile(e.to_string());
    let params = AbldParams::new(variant, alpha, beta).map_err(corrupt)?;
    let mut model = IddlModel::new(Dictionary::new(atoms).map_err(corrupt)?, params, w, gamma, l).map_err(corrupt)?;
    model.history = history;
    Ok(model)
}

pub fn write_model(path: impl AsRef<Path>, model: &IddlModel) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&save_model(model))?;
    f.sync_all()?;
    Ok(())
}

pub fn read_model(path: impl AsRef<Path>) -> Result<IddlModel> {
    load_model(&fs::read(path)?)
}
