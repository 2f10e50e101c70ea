//! Activation tensors and the `.actv` file format.
//!
//! Layout (little-endian):
//! - magic: `b"ACTV"`
//! - version: u16 (= 1)
//! - dtype: u8 (1 = f32)
//! - channels, height, width: u32 each
//! - payload: channels * height * width f32, channel-major, each channel row-major

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"ACTV";
pub const FORMAT_VERSION: u16 = 1;
pub const DTYPE_F32: u8 = 1;
pub const HEADER_LEN: usize = 4 + 2 + 1 + 4 * 3;

/// One sample's activation at one layer: `channels` maps of `height x width`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTensor {
    channels: usize,
    height: usize,
    width: usize,
    values: Vec<f32>,
}

impl ActivationTensor {
    pub fn new(channels: usize, height: usize, width: usize, values: Vec<f32>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::argument(format!(
                "tensor dims must be positive, got {channels}x{height}x{width}"
            )));
        }
        let expected = channels * height * width;
        if values.len() != expected {
            return Err(Error::argument(format!(
                "tensor {channels}x{height}x{width} needs {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(offset) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::argument(format!(
                "non-finite tensor value at offset {offset}"
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            values,
        })
    }

    /// Inverse of [`ActivationTensor::flatten`].
    pub fn reshape(features: &[f32], channels: usize, height: usize, width: usize) -> Result<Self> {
        Self::new(channels, height, width, features.to_vec())
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn map_len(&self) -> usize {
        self.height * self.width
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Row-major `height x width` map of channel `c`.
    pub fn channel(&self, c: usize) -> &[f32] {
        let len = self.map_len();
        &self.values[c * len..(c + 1) * len]
    }

    pub fn channel_maps(&self) -> impl Iterator<Item = &[f32]> {
        self.values.chunks_exact(self.map_len())
    }

    /// Channel-major feature vector; channel `c` occupies `[c*M*N, (c+1)*M*N)`.
    pub fn flatten(&self) -> Vec<f32> {
        self.values.clone()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.values.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(DTYPE_F32);
        for dim in [self.channels, self.height, self.width] {
            out.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses an in-memory `.actv` image; `path` is only used in error messages.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let format_err = |reason: String| Error::Format {
            path: path.to_path_buf(),
            reason,
        };
        if bytes.len() < HEADER_LEN {
            return Err(Error::Length {
                path: path.to_path_buf(),
                expected: HEADER_LEN as u64,
                found: bytes.len() as u64,
            });
        }
        if &bytes[0..4] != MAGIC {
            return Err(format_err(format!("bad magic {:?}", &bytes[0..4])));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FORMAT_VERSION {
            return Err(format_err(format!("unsupported version {version}")));
        }
        if bytes[6] != DTYPE_F32 {
            return Err(format_err(format!("unsupported dtype code {}", bytes[6])));
        }
        let dim = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
        let (channels, height, width) = (dim(7), dim(11), dim(15));
        if channels == 0 || height == 0 || width == 0 {
            return Err(format_err(format!(
                "zero dimension {channels}x{height}x{width}"
            )));
        }
        let count = channels
            .checked_mul(height)
            .and_then(|v| v.checked_mul(width))
            .ok_or_else(|| format_err("dimension overflow".into()))?;
        let expected = HEADER_LEN as u64 + 4 * count as u64;
        if bytes.len() as u64 != expected {
            return Err(Error::Length {
                path: path.to_path_buf(),
                expected,
                found: bytes.len() as u64,
            });
        }
        let mut values = Vec::with_capacity(count);
        for (offset, chunk) in bytes[HEADER_LEN..].chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    path: path.to_path_buf(),
                    offset,
                });
            }
            values.push(v);
        }
        Ok(Self {
            channels,
            height,
            width,
            values,
        })
    }
}

pub fn write_tensor(tensor: &ActivationTensor, destination: impl AsRef<Path>) -> Result<()> {
    let path = destination.as_ref();
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&tensor.to_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn read_tensor(source: impl AsRef<Path>) -> Result<ActivationTensor> {
    let path = source.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    ActivationTensor::from_bytes(&bytes, path)
}
