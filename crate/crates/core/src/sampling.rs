//! Shifted Walsh-Hadamard sampling plans and measurement files.
//!
//! Walsh rows are indexed in natural (Sylvester) order: row `i`, column `j`
//! holds `(-1)^popcount(i & j)`. A shifted plan measures with the `{0,1}`
//! rows `(1 + w_i) / 2`; row 0 (all ones) is always part of a shifted plan so
//! the `+-1` coefficients can be recovered as `2 y_i - y_0`.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cube::{decode_f64s, read_u32, CubeSequence, HyperCube};
use crate::error::{dim_err, param_err, Error, Result};

/// Unnormalized in-place fast Walsh-Hadamard transform (natural order).
pub fn fwht_in_place(v: &mut [f64]) {
    let n = v.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for block in v.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

/// `H_n v` for the natural-ordered Hadamard matrix; `fast_wht(fast_wht(v)) = n v`.
pub fn fast_wht(v: &[f64]) -> Result<Vec<f64>> {
    if !v.len().is_power_of_two() {
        return param_err(format!("Walsh-Hadamard length must be a power of two, got {}", v.len()));
    }
    let mut out = v.to_vec();
    fwht_in_place(&mut out);
    Ok(out)
}

/// Natural row indices listed by increasing sequency (number of sign changes).
pub fn sequency_order(n: usize) -> Vec<usize> {
    let bits = n.trailing_zeros();
    (0..n)
        .map(|s| {
            let gray = s ^ (s >> 1);
            if bits == 0 {
                0
            } else {
                gray.reverse_bits() >> (usize::BITS - bits)
            }
        })
        .collect()
}

/// How the Walsh rows of a plan were ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderingKind {
    MaxVariance,
    Sequency,
    Random,
}

/// Row-ranking rule together with its inputs.
#[derive(Debug, Clone, Copy)]
pub enum Ordering<'a> {
    /// Rank rows by measurement variance over every band and frame of the
    /// training sequence.
    MaxVariance(&'a CubeSequence),
    Sequency,
    /// Seeded uniform shuffle of rows `1..n` after row 0.
    Random,
}

impl Ordering<'_> {
    pub fn kind(&self) -> OrderingKind {
        match self {
            Ordering::MaxVariance(_) => OrderingKind::MaxVariance,
            Ordering::Sequency => OrderingKind::Sequency,
            Ordering::Random => OrderingKind::Random,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub n: usize,
    pub k: usize,
    pub compression: f64,
    pub shifted: bool,
    pub ordering: OrderingKind,
    pub row_order: Vec<u32>,
    pub seed: u64,
}

/// `k = round((1 - compression) n)`, rounding half up.
pub fn measurement_count(n: usize, compression: f64) -> usize {
    ((1.0 - compression) * n as f64 + 0.5).floor() as usize
}

pub fn build_plan(n: usize, compression: f64, ordering: Ordering<'_>, seed: u64) -> Result<SamplingPlan> {
    if !n.is_power_of_two() || n < 2 {
        return param_err(format!("scene pixel count must be a power of two >= 2, got {n}"));
    }
    if !(compression > 0.0 && compression < 1.0) {
        return param_err(format!("compression must lie in (0, 1), got {compression}"));
    }
    let k = measurement_count(n, compression);
    if k == 0 || k >= n {
        return param_err(format!("compression {compression} gives k = {k} for n = {n}; need 0 < k < n"));
    }
    let ranked = match ordering {
        Ordering::Sequency => sequency_order(n),
        Ordering::Random => {
            let mut rest: Vec<usize> = (1..n).collect();
            rest.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            std::iter::once(0).chain(rest).collect()
        }
        Ordering::MaxVariance(training) => max_variance_order(n, training)?,
    };
    let row_order = ranked[..k].iter().map(|&i| i as u32).collect();
    let plan = SamplingPlan {
        n,
        k,
        compression: 1.0 - k as f64 / n as f64,
        shifted: true,
        ordering: ordering.kind(),
        row_order,
        seed,
    };
    plan.validate()?;
    Ok(plan)
}

/// Rows sorted by descending empirical variance of their `+-1` measurement
/// values, row 0 first, ties broken by ascending index.
pub fn max_variance_order(n: usize, training: &CubeSequence) -> Result<Vec<usize>> {
    let shape = match training.shape() {
        Some(s) if !training.is_empty() => s,
        _ => return param_err("max-variance ordering needs a non-empty training sequence"),
    };
    if shape.0 * shape.1 != n {
        return dim_err(format!(
            "training frames have {} pixels, plan needs {n}",
            shape.0 * shape.1
        ));
    }
    let mut count = 0.0;
    let mut mean = vec![0.0; n];
    let mut m2 = vec![0.0; n];
    let mut buf = vec![0.0; n];
    for frame in training.frames() {
        for band in 0..frame.bands() {
            buf.copy_from_slice(frame.band(band));
            fwht_in_place(&mut buf);
            count += 1.0;
            for i in 0..n {
                let delta = buf[i] - mean[i];
                mean[i] += delta / count;
                m2[i] += delta * (buf[i] - mean[i]);
            }
        }
    }
    let mut rest: Vec<usize> = (1..n).collect();
    rest.sort_by(|&a, &b| m2[b].total_cmp(&m2[a]).then(a.cmp(&b)));
    Ok(std::iter::once(0).chain(rest).collect())
}

impl SamplingPlan {
    pub fn validate(&self) -> Result<()> {
        if !self.n.is_power_of_two() {
            return Err(Error::Format(format!("plan n = {} is not a power of two", self.n)));
        }
        if self.k == 0 || self.k >= self.n || self.row_order.len() != self.k {
            return Err(Error::Format(format!(
                "plan has k = {}, {} rows, n = {}",
                self.k,
                self.row_order.len(),
                self.n
            )));
        }
        let mut seen = vec![false; self.n];
        for &r in &self.row_order {
            let r = r as usize;
            if r >= self.n || std::mem::replace(&mut seen[r], true) {
                return Err(Error::Format(format!("row {r} out of range or repeated")));
            }
        }
        if self.shifted && !seen[0] {
            return Err(Error::Format("shifted plan must include Walsh row 0".into()));
        }
        let expected = 1.0 - self.k as f64 / self.n as f64;
        if (self.compression - expected).abs() > 1e-12 {
            return Err(Error::Format(format!(
                "compression {} disagrees with 1 - k/n = {expected}",
                self.compression
            )));
        }
        Ok(())
    }

    pub fn rows(&self) -> impl Iterator<Item = usize> + '_ {
        self.row_order.iter().map(|&r| r as usize)
    }

    /// Position of Walsh row 0 within the plan.
    pub fn dc_position(&self) -> Option<usize> {
        self.row_order.iter().position(|&r| r == 0)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let plan: SamplingPlan = serde_json::from_str(text)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path.as_ref())?;
        Self::from_json(&text).map_err(|e| e.context(path.as_ref().display().to_string()))
    }

    /// Dense `k x n` sampling matrix. Only meant for small `n`.
    pub fn dense_matrix(&self) -> Vec<Vec<f64>> {
        self.rows()
            .map(|i| {
                (0..self.n)
                    .map(|j| {
                        let w = if (i & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                        if self.shifted {
                            (1.0 + w) / 2.0
                        } else {
                            w
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Selected rows of the natural Hadamard matrix, scaled by `1/sqrt(n)` so
/// that `A A^T = I_k`.
#[derive(Debug, Clone)]
pub struct WalshRows {
    n: usize,
    rows: Vec<usize>,
    scale: f64,
}

impl WalshRows {
    pub fn new(plan: &SamplingPlan) -> Self {
        Self {
            n: plan.n,
            rows: plan.rows().collect(),
            scale: 1.0 / (plan.n as f64).sqrt(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.rows.len()
    }

    /// `out = A x`; `work` is an n-length buffer.
    pub fn apply(&self, x: &[f64], out: &mut [f64], work: &mut [f64]) {
        work.copy_from_slice(x);
        fwht_in_place(work);
        for (o, &r) in out.iter_mut().zip(&self.rows) {
            *o = work[r] * self.scale;
        }
    }

    /// `out = A^T y`.
    pub fn adjoint(&self, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (&v, &r) in y.iter().zip(&self.rows) {
            out[r] = v * self.scale;
        }
        fwht_in_place(out);
    }
}

/// Per-frame measurement matrix `Y` (k x b), stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurements {
    k: usize,
    bands: usize,
    data: Vec<f64>,
}

const HSM_MAGIC: &[u8; 4] = b"HSM1";

impl Measurements {
    pub fn new(k: usize, bands: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != k * bands {
            return dim_err(format!("{k}x{bands} measurements need {} values, got {}", k * bands, data.len()));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { k, bands, data })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn get(&self, row: usize, band: usize) -> f64 {
        self.data[row * self.bands + band]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, band: usize) -> Vec<f64> {
        (0..self.k).map(|i| self.get(i, band)).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 8 * self.data.len());
        out.extend_from_slice(HSM_MAGIC);
        out.extend_from_slice(&(self.k as u32).to_le_bytes());
        out.extend_from_slice(&(self.bands as u32).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..4] != HSM_MAGIC {
            return Err(Error::Format("not an HSM1 measurements file".into()));
        }
        let k = read_u32(bytes, 4) as usize;
        let b = read_u32(bytes, 8) as usize;
        let expected = k
            .checked_mul(b)
            .and_then(|v| v.checked_mul(8))
            .ok_or_else(|| Error::Format("measurement size overflows".into()))?;
        if bytes.len() - 12 != expected {
            return Err(Error::Format(format!(
                "HSM1 payload is {} bytes, header implies {expected}",
                bytes.len() - 12
            )));
        }
        Self::new(k, b, decode_f64s(&bytes[12..]))
            .map_err(|e| Error::Format(format!("bad measurement payload: {e}")))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = fs::read(path.as_ref())?;
        Self::from_bytes(&bytes).map_err(|e| e.context(path.as_ref().display().to_string()))
    }
}

/// `Y = S X` for every band of the cube.
pub fn sample_cube(plan: &SamplingPlan, cube: &HyperCube) -> Result<Measurements> {
    if cube.pixels() != plan.n {
        return dim_err(format!("cube has {} pixels, plan expects {}", cube.pixels(), plan.n));
    }
    let (k, b) = (plan.k, cube.bands());
    let mut data = vec![0.0; k * b];
    let mut buf = vec![0.0; plan.n];
    for band in 0..b {
        buf.copy_from_slice(cube.band(band));
        fwht_in_place(&mut buf);
        let total = buf[0];
        for (i, r) in plan.rows().enumerate() {
            // (1 + w) / 2 rows give (sum + w.x) / 2; row 0 gives the sum itself
            data[i * b + band] = if plan.shifted { 0.5 * (total + buf[r]) } else { buf[r] };
        }
    }
    Measurements::new(k, b, data)
}

/// Converts one band's measurements to the `+-1` Walsh coefficients of the
/// plan rows, undoing the shift via the all-ones row.
pub fn walsh_coefficients(plan: &SamplingPlan, y: &Measurements, band: usize) -> Result<Vec<f64>> {
    if y.k() != plan.k {
        return dim_err(format!("measurements have k = {}, plan has {}", y.k(), plan.k));
    }
    let col = y.column(band);
    if !plan.shifted {
        return Ok(col);
    }
    let dc = plan
        .dc_position()
        .ok_or_else(|| Error::Format("shifted plan without Walsh row 0".into()))?;
    let total = col[dc];
    Ok(col.iter().map(|&v| 2.0 * v - total).collect())
}

/// Inverse of [`walsh_coefficients`]: maps `+-1` coefficients back to the
/// plan's measurement convention.
pub fn shift_coefficients(plan: &SamplingPlan, coeffs: &[f64]) -> Vec<f64> {
    if !plan.shifted {
        return coeffs.to_vec();
    }
    let total = plan.dc_position().map_or(0.0, |p| coeffs[p]);
    coeffs.iter().map(|&c| 0.5 * (total + c)).collect()
}
