//! Raw volume files with a key=value sidecar header.
//!
//! ```text
//! # ridgetrace volume
//! dims = 64 64 32
//! spacing = 0.08 0.08 1.0
//! dtype = u16
//! order = x-fastest
//! endian = little
//! ```
//!
//! The payload is the dense sample array, x fastest, in the declared byte
//! order. `order` and `endian` are optional and default to the values above.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ridgetrace_core::volume::{ScalarVolume, VolumeError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    U8,
    U16,
    F32,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::U8 => 1,
            Dtype::U16 => 2,
            Dtype::F32 => 4,
        }
    }
}

impl FromStr for Dtype {
    type Err = VolumeFileError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "u8" | "uint8" => Ok(Dtype::U8),
            "u16" | "uint16" => Ok(Dtype::U16),
            "f32" | "float32" => Ok(Dtype::F32),
            _ => Err(VolumeFileError::Header(format!("unknown dtype {s:?}"))),
        }
    }
}

impl fmt::Display for Dtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dtype::U8 => "u8",
            Dtype::U16 => "u16",
            Dtype::F32 => "f32",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeHeader {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub dtype: Dtype,
    pub big_endian: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum VolumeFileError {
    #[error("bad header: {0}")]
    Header(String),
    #[error("header declares {expected} bytes of samples but the payload has {actual}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error(transparent)]
    Volume(#[from] VolumeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn triple<T: FromStr>(key: &str, v: &str) -> Result<[T; 3], VolumeFileError> {
    let parts: Vec<&str> = v.split(|c: char| c.is_whitespace() || c == ',' || c == 'x').filter(|s| !s.is_empty()).collect();
    let bad = || VolumeFileError::Header(format!("{key} needs three numbers, got {v:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let mut out = Vec::with_capacity(3);
    for p in parts {
        out.push(p.parse::<T>().map_err(|_| bad())?);
    }
    out.try_into().map_err(|_| bad())
}

impl VolumeHeader {
    pub fn parse(text: &str) -> Result<Self, VolumeFileError> {
        let (mut dims, mut spacing, mut dtype) = (None, None, None);
        let mut big_endian = false;
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .or_else(|| line.split_once(':'))
                .ok_or_else(|| VolumeFileError::Header(format!("expected key = value, got {line:?}")))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "dims" => dims = Some(triple::<usize>(k, v)?),
                "spacing" => spacing = Some(triple::<f64>(k, v)?),
                "dtype" => dtype = Some(v.parse::<Dtype>()?),
                "order" if v == "x-fastest" => {}
                "order" => return Err(VolumeFileError::Header(format!("unsupported order {v:?}"))),
                "endian" => {
                    big_endian = match v {
                        "little" => false,
                        "big" => true,
                        _ => return Err(VolumeFileError::Header(format!("unknown endian {v:?}"))),
                    }
                }
                _ => return Err(VolumeFileError::Header(format!("unknown key {k:?}"))),
            }
        }
        let missing = |k: &str| VolumeFileError::Header(format!("missing {k}"));
        Ok(Self {
            dims: dims.ok_or_else(|| missing("dims"))?,
            spacing: spacing.unwrap_or([1.0; 3]),
            dtype: dtype.ok_or_else(|| missing("dtype"))?,
            big_endian,
        })
    }

    pub fn render(&self) -> String {
        let [x, y, z] = self.dims;
        let [a, b, c] = self.spacing;
        let endian = if self.big_endian { "big" } else { "little" };
        format!(
            "# ridgetrace volume\ndims = {x} {y} {z}\nspacing = {a} {b} {c}\ndtype = {}\norder = x-fastest\nendian = {endian}\n",
            self.dtype
        )
    }
}

/// Decodes a payload described by `h`.
pub fn decode_volume(h: &VolumeHeader, payload: &[u8]) -> Result<ScalarVolume, VolumeFileError> {
    let n = h.dims.iter().product::<usize>();
    let expected = n * h.dtype.size();
    if payload.len() != expected {
        return Err(VolumeFileError::SizeMismatch { expected, actual: payload.len() });
    }
    let be = h.big_endian;
    let values: Vec<f64> = match h.dtype {
        Dtype::U8 => payload.iter().map(|&b| b as f64).collect(),
        Dtype::U16 => payload
            .chunks_exact(2)
            .map(|c| {
                let b = [c[0], c[1]];
                (if be { u16::from_be_bytes(b) } else { u16::from_le_bytes(b) }) as f64
            })
            .collect(),
        Dtype::F32 => payload
            .chunks_exact(4)
            .map(|c| {
                let b = [c[0], c[1], c[2], c[3]];
                (if be { f32::from_be_bytes(b) } else { f32::from_le_bytes(b) }) as f64
            })
            .collect(),
    };
    Ok(ScalarVolume::new(h.dims, h.spacing, values)?)
}

/// Encodes `v` as `dtype`, rounding and saturating for integer types.
pub fn encode_volume(v: &ScalarVolume, dtype: Dtype) -> Vec<u8> {
    let mut out = Vec::with_capacity(v.len() * dtype.size());
    for &x in v.values() {
        match dtype {
            Dtype::U8 => out.push(x.round().clamp(0.0, 255.0) as u8),
            Dtype::U16 => out.extend((x.round().clamp(0.0, 65535.0) as u16).to_le_bytes()),
            Dtype::F32 => out.extend((x as f32).to_le_bytes()),
        }
    }
    out
}

pub fn load_volume(path: &Path, meta: &Path) -> Result<ScalarVolume, VolumeFileError> {
    let h = VolumeHeader::parse(&std::fs::read_to_string(meta)?)?;
    decode_volume(&h, &std::fs::read(path)?)
}

pub fn save_volume(v: &ScalarVolume, dtype: Dtype, path: &Path, meta: &Path) -> Result<(), VolumeFileError> {
    let h = VolumeHeader { dims: v.dims(), spacing: v.spacing(), dtype, big_endian: false };
    std::fs::write(path, encode_volume(v, dtype))?;
    std::fs::write(meta, h.render())?;
    Ok(())
}

/// Sidecar path used when none is given: `<volume>.meta`.
pub fn default_meta_path(volume: &Path) -> std::path::PathBuf {
    let mut s = volume.as_os_str().to_owned();
    s.push(".meta");
    s.into()
}
