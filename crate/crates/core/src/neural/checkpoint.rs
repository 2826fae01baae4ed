//! Binary checkpoint file.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic "DYLECKPT" | u32 version
//! str config                      (u32 byte length + UTF-8)
//! u32 n_tokens | str token * n    (non-reserved vocabulary, id order)
//! u32 n_params | { str name | u8 group | u32 rank | u64 dim * rank | f64 value * len } * n
//! u8 has_adam  | [f64 lr, beta1, beta2, eps | u64 step | f64 m * len, f64 v * len per param]
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::adam::{AdamConfig, AdamState};
use super::params::{Group, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"DYLECKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// `key=value` lines echoing the configuration that produced the weights.
    pub config: String,
    pub vocab: Vec<String>,
    pub params: ParamStore,
    pub adam: Option<AdamState>,
}

fn put_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_str(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    put_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn put_values(w: &mut impl Write, t: &Tensor) -> std::io::Result<()> {
    for v in t.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| Error::Checkpoint(format!("truncated file: {e}")))?;
        Ok(buf)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let mut buf = vec![0u8; len];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| Error::Checkpoint(format!("truncated string: {e}")))?;
        String::from_utf8(buf).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    fn values(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
}

impl Checkpoint {
    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        put_u32(w, VERSION)?;
        put_str(w, &self.config)?;
        put_u32(w, self.vocab.len() as u32)?;
        for t in &self.vocab {
            put_str(w, t)?;
        }
        put_u32(w, self.params.len() as u32)?;
        for e in self.params.entries() {
            put_str(w, &e.name)?;
            w.write_all(&[e.group.tag()])?;
            put_u32(w, e.value.rank() as u32)?;
            for &d in e.value.shape() {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            put_values(w, &e.value)?;
        }
        match &self.adam {
            None => w.write_all(&[0]),
            Some(a) => {
                w.write_all(&[1])?;
                for v in [a.config.lr, a.config.beta1, a.config.beta2, a.config.eps] {
                    w.write_all(&v.to_le_bytes())?;
                }
                w.write_all(&a.step.to_le_bytes())?;
                for (m, v) in a.m.iter().zip(&a.v) {
                    put_values(w, m)?;
                    put_values(w, v)?;
                }
                Ok(())
            }
        }
    }

    pub fn read_from(r: impl Read) -> Result<Self> {
        let mut r = Reader { inner: r };
        if &r.bytes::<8>()? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let config = r.string()?;
        let n_tokens = r.u32()? as usize;
        let vocab = (0..n_tokens).map(|_| r.string()).collect::<Result<Vec<_>>>()?;

        let mut params = ParamStore::new();
        let n_params = r.u32()? as usize;
        for _ in 0..n_params {
            let name = r.string()?;
            let group = Group::from_tag(r.u8()?).ok_or_else(|| Error::Checkpoint(format!("bad group for {name}")))?;
            let rank = r.u32()? as usize;
            if rank > 2 {
                return Err(Error::Checkpoint(format!("rank {rank} for {name}")));
            }
            let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let len = shape.iter().product();
            let values = r.values(len)?;
            params.add(name, group, Tensor::new(shape, values)?)?;
        }

        let adam = match r.u8()? {
            0 => None,
            1 => {
                let config = AdamConfig {
                    lr: r.f64()?,
                    beta1: r.f64()?,
                    beta2: r.f64()?,
                    eps: r.f64()?,
                };
                let step = r.u64()?;
                let mut state = AdamState::new(&params, config);
                state.step = step;
                for i in 0..params.len() {
                    let len = state.m[i].len();
                    state.m[i].data_mut().copy_from_slice(&r.values(len)?);
                    state.v[i].data_mut().copy_from_slice(&r.values(len)?);
                }
                Some(state)
            }
            t => return Err(Error::Checkpoint(format!("bad optimizer flag {t}"))),
        };
        Ok(Checkpoint {
            config,
            vocab,
            params,
            adam,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::read_from(BufReader::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::params::{GroupFilter, Grads};
    use crate::neural::adam::adam_step;

    #[test]
    fn round_trip_with_optimizer() {
        let mut params = ParamStore::new();
        params.add("w", Group::Extractor, Tensor::matrix(2, 2, vec![1.0, -0.5, 0.25, 3.0]).unwrap()).unwrap();
        params.add("b", Group::Generator, Tensor::vector(vec![0.1])).unwrap();
        let mut adam = AdamState::new(&params, AdamConfig::default());
        let mut grads = Grads::zeros_like(&params);
        grads.get_mut(params.id("b").unwrap()).data_mut()[0] = 0.3;
        adam_step(&mut params, &grads, &mut adam, GroupFilter::Both).unwrap();

        let ckpt = Checkpoint {
            config: "k=4\n".into(),
            vocab: vec!["a".into(), "b".into()],
            params,
            adam: Some(adam),
        };
        let mut buf = Vec::new();
        ckpt.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..8], MAGIC);
        let back = Checkpoint::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, ckpt);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        assert!(Checkpoint::read_from(&b"NOTACKPT\x01\0\0\0"[..]).is_err());
        let ckpt = Checkpoint {
            config: String::new(),
            vocab: vec![],
            params: ParamStore::new(),
            adam: None,
        };
        let mut buf = Vec::new();
        ckpt.write_to(&mut buf).unwrap();
        assert!(Checkpoint::read_from(&buf[..buf.len() - 1]).is_err());
    }
}
