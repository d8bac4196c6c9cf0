//! Hyperspectral cube container and the HSC1 on-disk format.
//!
//! A cube holds `n1 x n2` pixels and `b` bands. Internally it is the
//! pixel-by-band matrix `X` (n = n1*n2 rows) stored column-major, so each
//! band is one contiguous, row-major flattened image.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, param_err, Error, Result};

const HSC_MAGIC: &[u8; 4] = b"HSC1";
const HSC_HEADER_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct HyperCube {
    n1: usize,
    n2: usize,
    bands: usize,
    data: Vec<f64>,
}

impl HyperCube {
    /// Builds a cube from band-major data (band 0 row-major, then band 1, ...).
    pub fn new(n1: usize, n2: usize, bands: usize, data: Vec<f64>) -> Result<Self> {
        if n1 == 0 || n2 == 0 || bands == 0 {
            return param_err(format!("cube dimensions must be positive, got {n1}x{n2}x{bands}"));
        }
        let len = checked_len(n1, n2, bands)?;
        if data.len() != len {
            return dim_err(format!(
                "{n1}x{n2}x{bands} cube needs {len} values, got {}",
                data.len()
            ));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { n1, n2, bands, data })
    }

    pub fn zeros(n1: usize, n2: usize, bands: usize) -> Result<Self> {
        let len = checked_len(n1, n2, bands)?;
        Self::new(n1, n2, bands, vec![0.0; len])
    }

    /// Builds a cube from a function of `(row, col, band)`.
    pub fn from_fn(
        n1: usize,
        n2: usize,
        bands: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(checked_len(n1, n2, bands)?);
        for band in 0..bands {
            for r in 0..n1 {
                for c in 0..n2 {
                    data.push(f(r, c, band));
                }
            }
        }
        Self::new(n1, n2, bands, data)
    }

    /// Assembles a cube from flattened bands, each of length `n1 * n2`.
    pub fn from_bands(n1: usize, n2: usize, bands: Vec<Vec<f64>>) -> Result<Self> {
        let n = n1 * n2;
        if let Some((j, bad)) = bands.iter().enumerate().find(|(_, v)| v.len() != n) {
            return dim_err(format!("band {j} has length {}, expected {n}", bad.len()));
        }
        let count = bands.len();
        Self::new(n1, n2, count, bands.concat())
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    /// Pixel count `n = n1 * n2`.
    pub fn pixels(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n1, self.n2, self.bands)
    }

    /// Band-major raw values.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize, band: usize) -> f64 {
        self.data[band * self.pixels() + row * self.n2 + col]
    }

    /// Borrowed view of one band as a row-major image vector.
    pub fn band(&self, band: usize) -> &[f64] {
        let n = self.pixels();
        &self.data[band * n..(band + 1) * n]
    }

    /// The band as an owned length-n vector in row-major pixel order.
    pub fn flatten_band(&self, band: usize) -> Result<Vec<f64>> {
        if band >= self.bands {
            return param_err(format!("band {band} out of range (cube has {})", self.bands));
        }
        Ok(self.band(band).to_vec())
    }

    /// Writes a flattened band back; inverse of [`HyperCube::flatten_band`].
    pub fn unflatten_band(&mut self, band: usize, values: &[f64]) -> Result<()> {
        if band >= self.bands {
            return param_err(format!("band {band} out of range (cube has {})", self.bands));
        }
        let n = self.pixels();
        if values.len() != n {
            return dim_err(format!("band vector has length {}, expected {n}", values.len()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        self.data[band * n..(band + 1) * n].copy_from_slice(values);
        Ok(())
    }

    /// Spectrum of pixel `p` (row-major pixel index).
    pub fn spectrum(&self, p: usize) -> Vec<f64> {
        let n = self.pixels();
        (0..self.bands).map(|j| self.data[j * n + p]).collect()
    }

    /// Spatial sub-window `[row, row+h) x [col, col+w)` across all bands.
    pub fn crop_fov(&self, origin: (usize, usize), size: (usize, usize)) -> Result<HyperCube> {
        let (r0, c0) = origin;
        let (h, w) = size;
        if h == 0 || w == 0 {
            return param_err("crop window must be non-empty");
        }
        if r0.checked_add(h).is_none_or(|e| e > self.n1) || c0.checked_add(w).is_none_or(|e| e > self.n2) {
            return dim_err(format!(
                "window {h}x{w} at ({r0},{c0}) exceeds {}x{} cube",
                self.n1, self.n2
            ));
        }
        let mut data = Vec::with_capacity(h * w * self.bands);
        for band in 0..self.bands {
            let img = self.band(band);
            for r in r0..r0 + h {
                data.extend_from_slice(&img[r * self.n2 + c0..r * self.n2 + c0 + w]);
            }
        }
        HyperCube::new(h, w, self.bands, data)
    }

    /// Serializes to HSC1 bytes.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(HSC_HEADER_LEN + 8 * self.data.len());
        out.extend_from_slice(HSC_MAGIC);
        for d in [self.n1, self.n2, self.bands] {
            let d = u32::try_from(d).map_err(|_| Error::Format(format!("dimension {d} exceeds u32")))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HSC_HEADER_LEN {
            return Err(Error::Format(format!("HSC1 header truncated ({} bytes)", bytes.len())));
        }
        if &bytes[..4] != HSC_MAGIC {
            return Err(Error::Format(format!("bad magic {:?}, expected HSC1", &bytes[..4])));
        }
        let n1 = read_u32(bytes, 4) as usize;
        let n2 = read_u32(bytes, 8) as usize;
        let b = read_u32(bytes, 12) as usize;
        let len = checked_len(n1, n2, b)?;
        let payload = len
            .checked_mul(8)
            .ok_or_else(|| Error::Format("payload size overflows".into()))?;
        let body = &bytes[HSC_HEADER_LEN..];
        if body.len() != payload {
            return Err(Error::Format(format!(
                "HSC1 payload is {} bytes, header implies {payload}",
                body.len()
            )));
        }
        let data = decode_f64s(body);
        HyperCube::new(n1, n2, b, data).map_err(|e| match e {
            Error::NonFinite(i) => Error::Format(format!("non-finite value at index {i}")),
            other => other,
        })
    }
}

fn checked_len(n1: usize, n2: usize, bands: usize) -> Result<usize> {
    n1.checked_mul(n2)
        .and_then(|n| n.checked_mul(bands))
        .ok_or_else(|| Error::Format(format!("dimensions {n1}x{n2}x{bands} overflow")))
}

pub(crate) fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

pub(crate) fn decode_f64s(body: &[u8]) -> Vec<f64> {
    body.chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect()
}

pub fn write_cube(cube: &HyperCube, path: impl AsRef<Path>) -> Result<()> {
    let mut f = fs::File::create(path.as_ref())?;
    f.write_all(&cube.to_bytes()?)?;
    Ok(())
}

pub fn read_cube(path: impl AsRef<Path>) -> Result<HyperCube> {
    let mut bytes = Vec::new();
    fs::File::open(path.as_ref())?.read_to_end(&mut bytes)?;
    HyperCube::from_bytes(&bytes).map_err(|e| e.context(path.as_ref().display().to_string()))
}

/// Ordered time frames sharing one spatial/spectral shape.
#[derive(Debug, Clone, PartialEq)]
pub struct CubeSequence {
    frames: Vec<HyperCube>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SequenceManifest {
    frames: usize,
    n1: usize,
    n2: usize,
    b: usize,
}

impl CubeSequence {
    pub fn new(frames: Vec<HyperCube>) -> Result<Self> {
        if let Some(first) = frames.first() {
            let shape = first.shape();
            if let Some((t, f)) = frames.iter().enumerate().find(|(_, f)| f.shape() != shape) {
                return dim_err(format!("frame {t} has shape {:?}, frame 0 has {shape:?}", f.shape()));
            }
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[HyperCube] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<HyperCube> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn shape(&self) -> Option<(usize, usize, usize)> {
        self.frames.first().map(HyperCube::shape)
    }

    /// Writes `frame_%04d.hsc` files plus `manifest.json` into `dir`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let (n1, n2, b) = self.shape().unwrap_or((0, 0, 0));
        for (t, frame) in self.frames.iter().enumerate() {
            write_cube(frame, dir.join(frame_file_name(t)))?;
        }
        let manifest = SequenceManifest {
            frames: self.frames.len(),
            n1,
            n2,
            b,
        };
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn read_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let text = fs::read_to_string(dir.join("manifest.json"))
            .map_err(|e| Error::from(e).context(format!("{}/manifest.json", dir.display())))?;
        let manifest: SequenceManifest = serde_json::from_str(&text)?;
        let mut frames = Vec::with_capacity(manifest.frames);
        for t in 0..manifest.frames {
            let frame = read_cube(dir.join(frame_file_name(t)))?;
            if frame.shape() != (manifest.n1, manifest.n2, manifest.b) {
                return Err(Error::Format(format!(
                    "frame {t} shape {:?} disagrees with manifest",
                    frame.shape()
                )));
            }
            frames.push(frame);
        }
        Self::new(frames)
    }
}

pub fn frame_file_name(t: usize) -> String {
    format!("frame_{t:04}.hsc")
}
