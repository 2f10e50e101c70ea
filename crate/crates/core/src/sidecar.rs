//! Versioned little-endian binary sidecars for fitted reducers and SVM models.
//!
//! Every file starts with a 4-byte kind tag (`LFRD` reducer, `LFSV` SVM) and a u16 version.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::reducers::FittedReducer;
use crate::svm::MulticlassSvmModel;

pub const SIDECAR_VERSION: u16 = 1;
const REDUCER_TAG: &[u8; 4] = b"LFRD";
const SVM_TAG: &[u8; 4] = b"LFSV";

#[derive(Default)]
pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn with_header(tag: &[u8; 4]) -> Self {
        let mut w = Self::default();
        w.buf.extend_from_slice(tag);
        w.buf.extend_from_slice(&SIDECAR_VERSION.to_le_bytes());
        w
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        v.iter().for_each(|&x| self.f64(x));
    }

    pub fn indices(&mut self, v: &[usize]) {
        self.u64(v.len() as u64);
        v.iter().for_each(|&x| self.u64(x as u64));
    }
}

pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn with_header(bytes: &'a [u8], tag: &[u8; 4]) -> Result<Self> {
        if bytes.len() < 6 || &bytes[..4] != tag {
            return Err(Error::Sidecar(format!(
                "expected a {} sidecar",
                String::from_utf8_lossy(tag)
            )));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != SIDECAR_VERSION {
            return Err(Error::Sidecar(format!("unsupported sidecar version {version}")));
        }
        Ok(Self { bytes, pos: 6 })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Sidecar("unexpected end of sidecar".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Sidecar("length overflow".into()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn len_prefix(&mut self, elem: usize) -> Result<usize> {
        let n = self.usize()?;
        if n.saturating_mul(elem) > self.bytes.len() - self.pos {
            return Err(Error::Sidecar("length prefix exceeds file".into()));
        }
        Ok(n)
    }

    pub fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len_prefix(8)?;
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn indices(&mut self) -> Result<Vec<usize>> {
        let n = self.len_prefix(8)?;
        (0..n).map(|_| self.usize()).collect()
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Sidecar("trailing bytes in sidecar".into()));
        }
        Ok(())
    }
}

pub fn reducer_to_bytes(reducer: &FittedReducer) -> Vec<u8> {
    let mut w = Writer::with_header(REDUCER_TAG);
    reducer.encode(&mut w);
    w.buf
}

pub fn reducer_from_bytes(bytes: &[u8]) -> Result<FittedReducer> {
    let mut r = Reader::with_header(bytes, REDUCER_TAG)?;
    let out = FittedReducer::decode(&mut r)?;
    r.finish()?;
    Ok(out)
}

pub fn svm_to_bytes(model: &MulticlassSvmModel) -> Vec<u8> {
    let mut w = Writer::with_header(SVM_TAG);
    model.encode(&mut w);
    w.buf
}

pub fn svm_from_bytes(bytes: &[u8]) -> Result<MulticlassSvmModel> {
    let mut r = Reader::with_header(bytes, SVM_TAG)?;
    let out = MulticlassSvmModel::decode(&mut r)?;
    r.finish()?;
    Ok(out)
}

pub fn load_reducer(path: impl AsRef<Path>) -> Result<FittedReducer> {
    let path = path.as_ref();
    reducer_from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

pub fn load_svm(path: impl AsRef<Path>) -> Result<MulticlassSvmModel> {
    let path = path.as_ref();
    svm_from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
}
