//! Binary checkpoint format, all integers little-endian:
//!
//! ```text
//! magic "NAFSSRCK" | version u32
//! width u64 | blocks u64 | scale u64 | scams u64 | drop_prob f64
//! tlsc flag u8 [kh u64 kw u64] | train patch flag u8 [ph u64 pw u64]
//! iteration u64 | seed u64 | tensor count u64
//! per tensor: name len u32, name, dtype bytes u8 (4|8), dims 4 x u32,
//!             values, slot flag u8 [m values, v values]
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::params::{ParamEntry, ParamStore};
use crate::tensor::{Array4, Real, Shape};

const MAGIC: &[u8; 8] = b"NAFSSRCK";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T> {
    pub model: ModelConfig,
    /// LR patch size the weights were trained on.
    pub train_patch: Option<(usize, usize)>,
    pub iteration: u64,
    pub seed: u64,
    pub params: ParamStore<T>,
}

impl<T: Real> Checkpoint<T> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let m = &self.model;
        for v in [m.width, m.n_blocks, m.scale, m.scam_count] {
            out.extend_from_slice(&(v as u64).to_le_bytes());
        }
        out.extend_from_slice(&m.drop_prob.to_le_bytes());
        for pair in [m.tlsc, self.train_patch] {
            match pair {
                Some((a, b)) => {
                    out.push(1);
                    out.extend_from_slice(&(a as u64).to_le_bytes());
                    out.extend_from_slice(&(b as u64).to_le_bytes());
                }
                None => out.push(0),
            }
        }
        out.extend_from_slice(&self.iteration.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for (name, entry) in self.params.iter() {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(T::BYTES);
            for d in entry.value.shape().dims() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            write_values(&mut out, &entry.value);
            match (&entry.m, &entry.v) {
                (Some(m), Some(v)) => {
                    out.push(1);
                    write_values(&mut out, m);
                    write_values(&mut out, v);
                }
                _ => out.push(0),
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, path };
        if r.take(8)? != MAGIC {
            return Err(r.fail("not a checkpoint (bad magic)"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(r.fail(&format!("unsupported version {version}")));
        }
        let mut model = ModelConfig::new(r.usize()?, r.usize()?, r.usize()?);
        model.scam_count = r.usize()?;
        model.drop_prob = f64::from_le_bytes(r.array()?);
        model.tlsc = r.pair()?;
        let train_patch = r.pair()?;
        let iteration = r.u64()?;
        let seed = r.u64()?;
        let count = r.u64()?;
        let mut params = ParamStore::new();
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec()).map_err(|_| r.fail("parameter name is not UTF-8"))?;
            let dtype = r.take(1)?[0];
            let mut dims = [0usize; 4];
            for d in &mut dims {
                *d = r.u32()? as usize;
            }
            let shape = Shape::from_dims(dims);
            let value = r.values::<T>(shape, dtype)?;
            let (m, v) = match r.take(1)?[0] {
                0 => (None, None),
                1 => (Some(r.values::<T>(shape, dtype)?), Some(r.values::<T>(shape, dtype)?)),
                f => return Err(r.fail(&format!("bad slot flag {f}"))),
            };
            params
                .insert_entry(name, ParamEntry { value, m, v })
                .map_err(|e| r.fail(&e.to_string()))?;
        }
        if r.pos != bytes.len() {
            return Err(r.fail("trailing bytes"));
        }
        model.validate().map_err(|e| r.fail(&e.to_string()))?;
        Ok(Checkpoint {
            model,
            train_patch,
            iteration,
            seed,
            params,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

fn write_values<T: Real>(out: &mut Vec<u8>, a: &Array4<T>) {
    for &v in a.data() {
        v.write_le(out);
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn fail(&self, reason: &str) -> Error {
        Error::Checkpoint {
            path: self.path.to_path_buf(),
            reason: format!("{reason} (at byte {})", self.pos),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.fail("truncated"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| self.fail("value out of range"))
    }

    fn pair(&mut self) -> Result<Option<(usize, usize)>> {
        match self.take(1)?[0] {
            0 => Ok(None),
            1 => Ok(Some((self.usize()?, self.usize()?))),
            f => Err(self.fail(&format!("bad flag {f}"))),
        }
    }

    /// Values stored at `dtype` width, converted to `T`.
    fn values<T: Real>(&mut self, shape: Shape, dtype: u8) -> Result<Array4<T>> {
        let n = shape.numel();
        let data: Vec<T> = match dtype {
            4 => self
                .take(4 * n)?
                .chunks_exact(4)
                .map(|c| T::from_f64(f32::read_le(c) as f64))
                .collect(),
            8 => self.take(8 * n)?.chunks_exact(8).map(|c| T::from_f64(f64::read_le(c))).collect(),
            other => return Err(self.fail(&format!("unknown dtype width {other}"))),
        };
        Array4::from_vec(shape, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_model;

    fn sample() -> Checkpoint<f32> {
        let mut cfg = ModelConfig::new(8, 2, 2);
        cfg.scam_count = 1;
        cfg.drop_prob = 0.1;
        cfg.tlsc = Some((45, 135));
        let mut params = build_model::<f32>(&cfg, 3).unwrap();
        for (_, e) in params.iter_mut().take(3) {
            e.m = Some(e.value.map(|v| v * 0.5));
            e.v = Some(e.value.map(|v| v * v));
        }
        Checkpoint {
            model: cfg,
            train_patch: Some((30, 90)),
            iteration: 1234,
            seed: 99,
            params,
        }
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let ck = sample();
        let bytes = ck.to_bytes();
        let back = Checkpoint::<f32>::from_bytes(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes(), bytes);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ckpt");
        ck.save(&path).unwrap();
        assert_eq!(Checkpoint::<f32>::load(&path).unwrap(), ck);
    }

    #[test]
    fn widens_to_f64() {
        let ck = sample();
        let wide = Checkpoint::<f64>::from_bytes(&ck.to_bytes(), Path::new("mem")).unwrap();
        assert_eq!(wide.params, ck.params.cast::<f64>());
    }

    #[test]
    fn rejects_corruption() {
        let bytes = sample().to_bytes();
        let p = Path::new("x.ckpt");
        assert!(Checkpoint::<f32>::from_bytes(&bytes[..bytes.len() - 1], p).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        let err = Checkpoint::<f32>::from_bytes(&bad, p).unwrap_err().to_string();
        assert!(err.contains("x.ckpt"), "{err}");
        let mut extra = bytes;
        extra.push(0);
        assert!(Checkpoint::<f32>::from_bytes(&extra, p).is_err());
    }
}
