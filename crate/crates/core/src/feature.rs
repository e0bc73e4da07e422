use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{DivSwapError, Result};
use crate::scalar::Scalar;

pub const DSFM_MAGIC: &[u8; 4] = b"DSFM";
pub const DSFM_VERSION: u8 = 0x01;
/// Magic + version + three `u32` dimensions.
pub const DSFM_HEADER_LEN: usize = 17;

/// Dense `C×H×W` activation tensor, channel-major then row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap<T> {
    channels: usize,
    height: usize,
    width: usize,
    values: Vec<T>,
}

impl<T: Scalar> FeatureMap<T> {
    pub fn new(channels: usize, height: usize, width: usize, values: Vec<T>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(DivSwapError::Dimension(format!(
                "feature map dims must be positive, got {channels}x{height}x{width}"
            )));
        }
        let expected = channels
            .checked_mul(height)
            .and_then(|n| n.checked_mul(width))
            .ok_or_else(|| DivSwapError::Dimension("feature map too large".into()))?;
        if values.len() != expected {
            return Err(DivSwapError::Dimension(format!(
                "expected {expected} values for {channels}x{height}x{width}, got {}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(DivSwapError::Validation(format!(
                "non-finite value at flat index {pos}"
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            values,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Result<Self> {
        Self::new(channels, height, width, vec![T::zero(); channels * height * width])
    }

    /// Builds a map from `f(c, h, w)`.
    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for h in 0..height {
                for w in 0..width {
                    values.push(f(c, h, w));
                }
            }
        }
        Self::new(channels, height, width, values)
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

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn get(&self, c: usize, h: usize, w: usize) -> T {
        self.values[(c * self.height + h) * self.width + w]
    }

    /// Contiguous `H×W` plane of channel `c`.
    pub fn channel(&self, c: usize) -> &[T] {
        let plane = self.height * self.width;
        &self.values[c * plane..(c + 1) * plane]
    }

    /// Fails unless every value is `>= 0`, as expected of post-ReLU activations.
    pub fn check_post_relu(&self) -> Result<()> {
        match self.values.iter().position(|v| *v < T::zero()) {
            Some(pos) => Err(DivSwapError::Validation(format!(
                "negative activation at flat index {pos} in a post-ReLU map"
            ))),
            None => Ok(()),
        }
    }

    pub fn scaled(&self, factor: T) -> Result<Self> {
        Self::new(
            self.channels,
            self.height,
            self.width,
            self.values.iter().map(|&v| v * factor).collect(),
        )
    }

    /// Applies `f` elementwise; fails if the result is not finite.
    pub fn map_values(&self, f: impl FnMut(T) -> T) -> Result<Self> {
        Self::new(
            self.channels,
            self.height,
            self.width,
            self.values.iter().copied().map(f).collect(),
        )
    }

    pub fn cast<U: Scalar>(&self) -> Result<FeatureMap<U>> {
        FeatureMap::new(
            self.channels,
            self.height,
            self.width,
            self.values
                .iter()
                .map(|v| U::from_f64_lossy(v.to_f64_lossy()))
                .collect(),
        )
    }
}

/// Single-channel `H×W` map of non-negative magnitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMap<T> {
    pub height: usize,
    pub width: usize,
    pub values: Vec<T>,
}

impl<T: Copy> SpatialMap<T> {
    #[inline]
    pub fn get(&self, h: usize, w: usize) -> T {
        self.values[h * self.width + w]
    }
}

/// Per-location L2 norm across channels.
pub fn channel_l2_map<T: Scalar>(map: &FeatureMap<T>) -> SpatialMap<T> {
    let plane = map.height * map.width;
    let mut sq = vec![T::zero(); plane];
    for c in 0..map.channels {
        for (acc, &v) in sq.iter_mut().zip(map.channel(c)) {
            *acc = *acc + v * v;
        }
    }
    SpatialMap {
        height: map.height,
        width: map.width,
        values: sq.into_iter().map(T::sqrt).collect(),
    }
}

pub fn read_feature_map(mut reader: impl Read) -> Result<FeatureMap<f32>> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    decode(&bytes)
}

fn decode(bytes: &[u8]) -> Result<FeatureMap<f32>> {
    if bytes.len() < DSFM_HEADER_LEN {
        return Err(DivSwapError::Format(format!(
            "file is {} bytes, shorter than the {DSFM_HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if &bytes[0..4] != DSFM_MAGIC {
        return Err(DivSwapError::Format(format!(
            "bad magic {:?}",
            String::from_utf8_lossy(&bytes[0..4])
        )));
    }
    if bytes[4] != DSFM_VERSION {
        return Err(DivSwapError::Format(format!(
            "unsupported version {:#04x}",
            bytes[4]
        )));
    }
    let dim = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let (c, h, w) = (dim(5), dim(9), dim(13));
    if c == 0 || h == 0 || w == 0 {
        return Err(DivSwapError::Format(format!(
            "zero dimension in header {c}x{h}x{w}"
        )));
    }
    let count = u64::from(c) * u64::from(h) * u64::from(w);
    let expected = count
        .checked_mul(4)
        .and_then(|n| n.checked_add(DSFM_HEADER_LEN as u64));
    if expected != Some(bytes.len() as u64) {
        return Err(DivSwapError::Format(format!(
            "payload size mismatch: header {c}x{h}x{w} needs {} bytes, file has {}",
            DSFM_HEADER_LEN as u64 + 4 * count,
            bytes.len()
        )));
    }
    let values = bytes[DSFM_HEADER_LEN..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    FeatureMap::new(c as usize, h as usize, w as usize, values)
}

pub fn load_feature_map(path: impl AsRef<Path>) -> Result<FeatureMap<f32>> {
    let bytes = std::fs::read(path)?;
    decode(&bytes)
}

pub fn write_feature_map(map: &FeatureMap<f32>, mut writer: impl Write) -> Result<()> {
    let dim = |n: usize| {
        u32::try_from(n)
            .map_err(|_| DivSwapError::Dimension(format!("dimension {n} exceeds u32")))
    };
    let mut header = [0u8; DSFM_HEADER_LEN];
    header[0..4].copy_from_slice(DSFM_MAGIC);
    header[4] = DSFM_VERSION;
    header[5..9].copy_from_slice(&dim(map.channels)?.to_le_bytes());
    header[9..13].copy_from_slice(&dim(map.height)?.to_le_bytes());
    header[13..17].copy_from_slice(&dim(map.width)?.to_le_bytes());
    writer.write_all(&header)?;
    for v in &map.values {
        writer.write_all(&v.to_le_bytes())?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes to a temporary sibling and renames into place, so a failed write
/// never leaves a partial file behind.
pub fn save_feature_map(map: &FeatureMap<f32>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut out = BufWriter::new(tmp.as_file());
        write_feature_map(map, &mut out)?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
