//! Adaptive coherence estimator (ACE), 3x3 bulk coherence and the
//! five-frame persistence filter.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cube::HyperCube;
use crate::error::{dim_err, param_err, Error, Result};
use crate::par;

/// Frames a pixel must stay above threshold to survive persistence.
pub const PERSISTENCE_FRAMES: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct Signature {
    pub name: String,
    pub values: Vec<f64>,
}

impl Signature {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return param_err("signature has no bands");
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        if values.iter().all(|&v| v == 0.0) {
            return param_err("signature has zero norm");
        }
        Ok(Self { name: name.into(), values })
    }

    pub fn bands(&self) -> usize {
        self.values.len()
    }

    /// One value per line; lines starting with `#` are ignored.
    pub fn from_csv_str(name: impl Into<String>, text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(text.as_bytes());
        let mut values = Vec::new();
        for record in reader.records() {
            for field in record?.iter().filter(|f| !f.is_empty()) {
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::Format(format!("signature value {field:?} is not a number")))?;
                values.push(v);
            }
        }
        Self::new(name, values)
    }

    /// Reads a signature CSV; the name is the file stem.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Self::from_csv_str(name, &fs::read_to_string(path)?)
    }

    pub fn to_csv_string(&self) -> String {
        self.values.iter().map(|v| format!("{v}\n")).collect()
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

/// Which vectors are shifted by the background mean before whitening.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    #[default]
    Both,
    PixelOnly,
    None,
}

#[derive(Debug, Clone)]
pub struct BackgroundModel {
    pub mean: Vec<f64>,
    /// Maximum-likelihood covariance (1/N normalization).
    pub covariance: DMatrix<f64>,
    /// Lower-triangular factor of `covariance + ridge * I`.
    pub chol: DMatrix<f64>,
    pub ridge: f64,
    pub sample_count: usize,
    pub centering: Centering,
}

impl BackgroundModel {
    pub fn estimate<'a>(pixels: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let mut iter = pixels.into_iter().peekable();
        let b = match iter.peek() {
            Some(p) => p.len(),
            None => return param_err("background needs at least 2 pixels, got 0"),
        };
        if b == 0 {
            return param_err("background pixels have no bands");
        }
        // Welford accumulation keeps the covariance accurate when the mean
        // dominates the spread.
        let mut n = 0usize;
        let mut mean = DVector::<f64>::zeros(b);
        let mut m2 = DMatrix::<f64>::zeros(b, b);
        let mut delta = DVector::<f64>::zeros(b);
        for p in iter {
            if p.len() != b {
                return dim_err(format!("background pixel has {} bands, expected {b}", p.len()));
            }
            n += 1;
            for j in 0..b {
                delta[j] = p[j] - mean[j];
                mean[j] += delta[j] / n as f64;
            }
            for r in 0..b {
                let after = p[r] - mean[r];
                for c in 0..b {
                    m2[(r, c)] += after * delta[c];
                }
            }
        }
        if n < 2 {
            return param_err(format!("background needs at least 2 pixels, got {n}"));
        }
        let mut covariance = m2 / n as f64;
        for r in 0..b {
            for c in 0..r {
                let avg = 0.5 * (covariance[(r, c)] + covariance[(c, r)]);
                covariance[(r, c)] = avg;
                covariance[(c, r)] = avg;
            }
        }
        let (chol, ridge) = ridge_cholesky(&covariance)?;
        Ok(Self {
            mean: mean.iter().copied().collect(),
            covariance,
            chol,
            ridge,
            sample_count: n,
            centering: Centering::default(),
        })
    }

    /// Every pixel of every given cube.
    pub fn from_cubes<'a>(cubes: impl IntoIterator<Item = &'a HyperCube>) -> Result<Self> {
        let spectra: Vec<Vec<f64>> = cubes
            .into_iter()
            .flat_map(|c| (0..c.pixels()).map(move |p| c.spectrum(p)))
            .collect();
        Self::estimate(spectra.iter().map(Vec::as_slice))
    }

    pub fn with_centering(mut self, centering: Centering) -> Self {
        self.centering = centering;
        self
    }

    pub fn bands(&self) -> usize {
        self.mean.len()
    }

    /// Solves `chol * w = v` in place.
    pub fn whiten_in_place(&self, v: &mut [f64]) {
        let b = v.len();
        for i in 0..b {
            let mut acc = v[i];
            for j in 0..i {
                acc -= self.chol[(i, j)] * v[j];
            }
            v[i] = acc / self.chol[(i, i)];
        }
    }

    fn whitened(&self, v: &[f64], center: bool) -> Vec<f64> {
        let mut w: Vec<f64> = if center { v.iter().zip(&self.mean).map(|(a, m)| a - m).collect() } else { v.to_vec() };
        self.whiten_in_place(&mut w);
        w
    }

    fn whitened_signature(&self, sig: &Signature) -> Result<Vec<f64>> {
        if sig.bands() != self.bands() {
            return dim_err(format!("signature has {} bands, background {}", sig.bands(), self.bands()));
        }
        Ok(self.whitened(&sig.values, self.centering == Centering::Both))
    }
}

/// Cholesky of `cov + ridge I` with the ridge escalated tenfold from
/// `1e-8 trace / b` up to `1e-2 trace / b`.
fn ridge_cholesky(cov: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let b = cov.nrows();
    let unit = cov.trace() / b as f64;
    let unit = if unit > 0.0 { unit } else { 1.0 };
    let mut ridge = 1e-8 * unit;
    while ridge <= 1e-2 * unit * (1.0 + 1e-12) {
        let mut m = cov.clone();
        for i in 0..b {
            m[(i, i)] += ridge;
        }
        if let Some(c) = m.cholesky() {
            let l = c.l();
            if l.diagonal().iter().all(|d| d.is_finite() && *d > 0.0) {
                return Ok((l, ridge));
            }
        }
        ridge *= 10.0;
    }
    Err(Error::Numerical("background covariance could not be factorized at the maximum ridge".into()))
}

fn cos2(t: &[f64], w: &[f64]) -> f64 {
    let ww: f64 = w.iter().map(|v| v * v).sum();
    let tt: f64 = t.iter().map(|v| v * v).sum();
    if ww == 0.0 || tt == 0.0 {
        return 0.0;
    }
    let tw: f64 = t.iter().zip(w).map(|(a, b)| a * b).sum();
    (tw * tw / (tt * ww)).clamp(0.0, 1.0)
}

/// Squared cosine between the whitened pixel and whitened signature.
pub fn ace(x: &[f64], sig: &Signature, bg: &BackgroundModel) -> Result<f64> {
    if x.len() != bg.bands() {
        return dim_err(format!("pixel has {} bands, background {}", x.len(), bg.bands()));
    }
    let t = bg.whitened_signature(sig)?;
    Ok(cos2(&t, &bg.whitened(x, bg.centering != Centering::None)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Ace,
    Bulk,
    BulkPersist,
}

impl Statistic {
    pub const ALL: [Statistic; 3] = [Statistic::Ace, Statistic::Bulk, Statistic::BulkPersist];

    pub fn as_str(&self) -> &'static str {
        match self {
            Statistic::Ace => "ace",
            Statistic::Bulk => "bulk",
            Statistic::BulkPersist => "bulk_persist",
        }
    }
}

impl std::str::FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Statistic::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .map_or_else(|| param_err(format!("unknown statistic {s:?}")), Ok)
    }
}

impl std::fmt::Display for Statistic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionMap {
    pub n1: usize,
    pub n2: usize,
    pub statistic: Statistic,
    pub frame: usize,
    pub signature_name: String,
    /// Row-major values in `[0, 1]`.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSidecar {
    pub statistic: Statistic,
    pub frame: usize,
    pub signature_name: String,
}

impl DetectionMap {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n2 + col]
    }

    pub fn sidecar(&self) -> MapSidecar {
        MapSidecar { statistic: self.statistic, frame: self.frame, signature_name: self.signature_name.clone() }
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        for row in self.values.chunks(self.n2) {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is ascii"))
    }

    pub fn from_csv_str(text: &str, sidecar: MapSidecar) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
        let (mut values, mut n1, mut n2) = (Vec::new(), 0, None);
        for record in reader.records() {
            let record = record?;
            if *n2.get_or_insert(record.len()) != record.len() {
                return Err(Error::Format("ragged detection map rows".into()));
            }
            for field in record.iter() {
                values.push(field.parse::<f64>().map_err(|_| Error::Format(format!("bad map value {field:?}")))?);
            }
            n1 += 1;
        }
        let n2 = n2.unwrap_or(0);
        if n1 == 0 || n2 == 0 {
            return Err(Error::Format("empty detection map".into()));
        }
        Ok(Self {
            n1,
            n2,
            statistic: sidecar.statistic,
            frame: sidecar.frame,
            signature_name: sidecar.signature_name,
            values,
        })
    }

    /// Writes `<stem>.csv` and `<stem>.json`.
    pub fn write(&self, stem: impl AsRef<Path>) -> Result<()> {
        let stem = stem.as_ref();
        fs::write(stem.with_extension("csv"), self.to_csv_string()?)?;
        fs::write(stem.with_extension("json"), serde_json::to_string_pretty(&self.sidecar())?)?;
        Ok(())
    }

    pub fn read(stem: impl AsRef<Path>) -> Result<Self> {
        let stem = stem.as_ref();
        let sidecar: MapSidecar = serde_json::from_str(&fs::read_to_string(stem.with_extension("json"))?)?;
        Self::from_csv_str(&fs::read_to_string(stem.with_extension("csv"))?, sidecar)
    }
}

pub fn ace_map(cube: &HyperCube, sig: &Signature, bg: &BackgroundModel, frame: usize) -> Result<DetectionMap> {
    if cube.bands() != bg.bands() {
        return dim_err(format!("cube has {} bands, background {}", cube.bands(), bg.bands()));
    }
    let t = bg.whitened_signature(sig)?;
    let center = bg.centering != Centering::None;
    let values = par::map_indexed(cube.pixels(), |p| cos2(&t, &bg.whitened(&cube.spectrum(p), center)));
    Ok(DetectionMap {
        n1: cube.n1(),
        n2: cube.n2(),
        statistic: Statistic::Ace,
        frame,
        signature_name: sig.name.clone(),
        values,
    })
}

/// `1 - prod(1 - c)` over the 3x3 neighborhood, truncated at the borders.
pub fn bulk_coherence(map: &DetectionMap) -> DetectionMap {
    let (n1, n2) = (map.n1, map.n2);
    let mut values = vec![0.0; n1 * n2];
    for r in 0..n1 {
        for c in 0..n2 {
            let mut keep = 1.0;
            for rr in r.saturating_sub(1)..=(r + 1).min(n1 - 1) {
                for cc in c.saturating_sub(1)..=(c + 1).min(n2 - 1) {
                    keep *= 1.0 - map.values[rr * n2 + cc];
                }
            }
            values[r * n2 + c] = (1.0 - keep).clamp(0.0, 1.0);
        }
    }
    DetectionMap { statistic: Statistic::Bulk, values, signature_name: map.signature_name.clone(), ..*map }
}

/// Zeroes every pixel that did not exceed `threshold` in each of the last
/// five frames, its own included.
pub fn persistence_filter(maps: &[DetectionMap], threshold: f64) -> Result<Vec<DetectionMap>> {
    if !(threshold.is_finite() && threshold >= 0.0) {
        return param_err(format!("persistence threshold must be finite and nonnegative, got {threshold}"));
    }
    let Some(first) = maps.first() else { return Ok(Vec::new()) };
    if maps.iter().any(|m| (m.n1, m.n2) != (first.n1, first.n2)) {
        return dim_err("persistence maps differ in shape");
    }
    let mut run = vec![0usize; first.values.len()];
    Ok(maps
        .iter()
        .map(|m| {
            let values = m
                .values
                .iter()
                .zip(run.iter_mut())
                .map(|(&v, streak)| {
                    *streak = if v > threshold { *streak + 1 } else { 0 };
                    if *streak >= PERSISTENCE_FRAMES {
                        v
                    } else {
                        0.0
                    }
                })
                .collect();
            DetectionMap { statistic: Statistic::BulkPersist, values, signature_name: m.signature_name.clone(), ..*m }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_model(b: usize, rng: &mut ChaCha8Rng) -> BackgroundModel {
        let mix: Vec<f64> = (0..b * b).map(|_| rng.sample(StandardNormal)).collect();
        let pixels: Vec<Vec<f64>> = (0..(4 * b + 10))
            .map(|_| {
                let z: Vec<f64> = (0..b).map(|_| rng.sample(StandardNormal)).collect();
                (0..b).map(|i| 3.0 + (0..b).map(|j| mix[i * b + j] * z[j]).sum::<f64>()).collect()
            })
            .collect();
        BackgroundModel::estimate(pixels.iter().map(Vec::as_slice)).unwrap()
    }

    fn map_of(n1: usize, n2: usize, values: Vec<f64>) -> DetectionMap {
        DetectionMap { n1, n2, statistic: Statistic::Ace, frame: 0, signature_name: "s".into(), values }
    }

    #[test]
    fn two_point_mle() {
        let bg = BackgroundModel::estimate([&[0.0, 0.0][..], &[2.0, 2.0][..]]).unwrap();
        assert_eq!(bg.mean, vec![1.0, 1.0]);
        assert_eq!(bg.covariance, DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]));
        assert!(bg.ridge > 0.0);
    }

    #[test]
    fn monte_carlo_diagonal_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pixels: Vec<Vec<f64>> = (0..5000)
            .map(|_| vec![rng.sample::<f64, _>(StandardNormal), 2.0 * rng.sample::<f64, _>(StandardNormal)])
            .collect();
        let bg = BackgroundModel::estimate(pixels.iter().map(Vec::as_slice)).unwrap();
        assert!((bg.covariance[(0, 0)] - 1.0).abs() < 0.1);
        assert!((bg.covariance[(1, 1)] - 4.0).abs() < 0.4);
        assert!(bg.covariance[(0, 1)].abs() < 0.2);
    }

    #[test]
    fn identical_pixels_use_ridge() {
        let p = [1.0, 2.0, 3.0];
        let bg = BackgroundModel::estimate([&p[..], &p[..], &p[..]]).unwrap();
        assert!(bg.covariance.iter().all(|&v| v == 0.0));
        assert!(bg.ridge > 0.0);
        let llt = &bg.chol * bg.chol.transpose();
        for i in 0..3 {
            assert!((llt[(i, i)] - bg.ridge).abs() <= 1e-8 * bg.ridge);
        }
    }

    #[test]
    fn too_few_pixels_or_ragged() {
        assert!(BackgroundModel::estimate([&[1.0][..]]).is_err());
        assert!(BackgroundModel::estimate(std::iter::empty()).is_err());
        assert!(BackgroundModel::estimate([&[1.0, 2.0][..], &[1.0][..]]).is_err());
    }

    #[test]
    fn factor_reproduces_regularized_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let bg = random_model(6, &mut rng);
        let mut target = bg.covariance.clone();
        for i in 0..6 {
            target[(i, i)] += bg.ridge;
        }
        let llt = &bg.chol * bg.chol.transpose();
        assert!((llt - &target).norm() <= 1e-8 * target.norm());
        assert!((bg.covariance.clone() - bg.covariance.transpose()).abs().max() < 1e-10);
    }

    #[test]
    fn parallel_and_orthogonal_pixels() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bg = random_model(5, &mut rng);
        let sig = Signature::new("s", (0..5).map(|i| 1.0 + i as f64).collect()).unwrap();
        // x - mean = s - mean
        assert!((ace(&sig.values, &sig, &bg).unwrap() - 1.0).abs() < 1e-10);

        // Gram-Schmidt in whitened space, then map back with chol.
        let t = bg.whitened(&sig.values, true);
        let mut w: Vec<f64> = (0..5).map(|_| rng.sample(StandardNormal)).collect();
        let proj = w.iter().zip(&t).map(|(a, b)| a * b).sum::<f64>() / t.iter().map(|v| v * v).sum::<f64>();
        for (wi, ti) in w.iter_mut().zip(&t) {
            *wi -= proj * ti;
        }
        let x: Vec<f64> = (0..5).map(|i| bg.mean[i] + (0..=i).map(|j| bg.chol[(i, j)] * w[j]).sum::<f64>()).collect();
        assert!(ace(&x, &sig, &bg).unwrap() < 1e-12);
    }

    #[test]
    fn matches_dense_inverse_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for b in [4, 7, 12, 16] {
            let bg = random_model(b, &mut rng);
            let mut reg = bg.covariance.clone();
            for i in 0..b {
                reg[(i, i)] += bg.ridge;
            }
            let inv = reg.try_inverse().unwrap();
            let sig = Signature::new("s", (0..b).map(|_| rng.random_range(0.0..5.0)).collect()).unwrap();
            let x: Vec<f64> = (0..b).map(|_| rng.random_range(0.0..5.0)).collect();
            let s = DVector::from_iterator(b, sig.values.iter().zip(&bg.mean).map(|(a, m)| a - m));
            let xv = DVector::from_iterator(b, x.iter().zip(&bg.mean).map(|(a, m)| a - m));
            let num = (s.transpose() * &inv * &xv)[(0, 0)];
            let expected = num * num / ((s.transpose() * &inv * &s)[(0, 0)] * (xv.transpose() * &inv * &xv)[(0, 0)]);
            assert!((ace(&x, &sig, &bg).unwrap() - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn centering_modes_differ_only_in_offsets() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let bg = random_model(4, &mut rng);
        let sig = Signature::new("s", vec![1.0, 0.0, 2.0, 1.0]).unwrap();
        let x = vec![0.3, 4.0, 1.0, 2.0];
        let both = ace(&x, &sig, &bg).unwrap();
        let none = ace(&x, &sig, &bg.clone().with_centering(Centering::None)).unwrap();
        let pix = ace(&x, &sig, &bg.clone().with_centering(Centering::PixelOnly)).unwrap();
        let shifted: Vec<f64> = x.iter().zip(&bg.mean).map(|(a, m)| a - m).collect();
        assert!((pix - ace(&shifted, &sig, &bg.clone().with_centering(Centering::None)).unwrap()).abs() < 1e-12);
        assert!(both != none);
    }

    #[test]
    fn zero_whitened_pixel_scores_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let bg = random_model(4, &mut rng);
        let sig = Signature::new("s", vec![1.0; 4]).unwrap();
        assert_eq!(ace(&bg.mean.clone(), &sig, &bg).unwrap(), 0.0);
        assert!(ace(&[1.0; 3], &sig, &bg).is_err());
    }

    #[test]
    fn ace_map_contracts() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let bg = random_model(4, &mut rng);
        let sig = Signature::new("s", vec![5.0, 1.0, -2.0, 0.5]).unwrap();
        let flat = HyperCube::from_fn(3, 3, 4, |_, _, j| bg.mean[j]).unwrap();
        assert!(ace_map(&flat, &sig, &bg, 0).unwrap().values.iter().all(|&v| v == 0.0));

        let noisy = HyperCube::from_fn(4, 4, 4, |r, c, j| {
            let base = bg.mean[j] + 0.3 * ((r * 7 + c * 3 + j) as f64).sin();
            if (r, c) == (2, 1) {
                base + 3.0 * (sig.values[j] - bg.mean[j])
            } else {
                base
            }
        })
        .unwrap();
        let map = ace_map(&noisy, &sig, &bg, 0).unwrap();
        let best = map.values.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(map.get(2, 1), best);
        assert_eq!(map.values.iter().filter(|&&v| v == best).count(), 1);
        assert!(map.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn ace_invariances() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let bg = random_model(6, &mut rng);
        for _ in 0..50 {
            let s: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
            let x: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
            let sig = Signature::new("s", s.clone()).unwrap();
            let a = ace(&x, &sig, &bg).unwrap();
            let c = rng.random_range(0.01..100.0);
            let scaled: Vec<f64> = x.iter().zip(&bg.mean).map(|(v, m)| m + c * (v - m)).collect();
            assert!((ace(&scaled, &sig, &bg).unwrap() - a).abs() < 1e-10);
            let swapped = ace(&s, &Signature::new("x", x.clone()).unwrap(), &bg).unwrap();
            assert!((swapped - a).abs() < 1e-10);
        }
    }

    #[test]
    fn bulk_examples() {
        let zero = map_of(4, 4, vec![0.0; 16]);
        assert!(bulk_coherence(&zero).values.iter().all(|&v| v == 0.0));

        let mut one = vec![0.2; 16];
        one[5] = 1.0;
        let b = bulk_coherence(&map_of(4, 4, one));
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(b.get(r, c), 1.0);
            }
        }
        assert!(b.get(3, 3) < 1.0);

        let half = bulk_coherence(&map_of(3, 3, vec![0.5; 9]));
        assert_eq!(half.get(1, 1), 0.998046875);
        assert_eq!(half.get(0, 0), 1.0 - 0.5f64.powi(4));
        assert_eq!(half.get(0, 1), 1.0 - 0.5f64.powi(6));
        assert_eq!(half.statistic, Statistic::Bulk);
    }

    #[test]
    fn bulk_monotone_and_dominates_max() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let (n1, n2) = (rng.random_range(1..6), rng.random_range(1..6));
            let values: Vec<f64> = (0..n1 * n2).map(|_| rng.random_range(0.0..1.0)).collect();
            let base = bulk_coherence(&map_of(n1, n2, values.clone()));
            for r in 0..n1 {
                for c in 0..n2 {
                    let mut m = 0.0f64;
                    for rr in r.saturating_sub(1)..=(r + 1).min(n1 - 1) {
                        for cc in c.saturating_sub(1)..=(c + 1).min(n2 - 1) {
                            m = m.max(values[rr * n2 + cc]);
                        }
                    }
                    assert!(base.get(r, c) >= m - 1e-12);
                }
            }
            let mut raised = values.clone();
            let i = rng.random_range(0..n1 * n2);
            raised[i] = rng.random_range(raised[i]..=1.0);
            let up = bulk_coherence(&map_of(n1, n2, raised));
            assert!(up.values.iter().zip(&base.values).all(|(a, b)| a >= b));
        }
    }

    fn persistence_oracle(series: &[Vec<f64>], t: f64) -> Vec<Vec<f64>> {
        series
            .iter()
            .enumerate()
            .map(|(f, frame)| {
                frame
                    .iter()
                    .enumerate()
                    .map(|(p, &v)| {
                        let ok = f + 1 >= PERSISTENCE_FRAMES && (f + 1 - PERSISTENCE_FRAMES..=f).all(|g| series[g][p] > t);
                        if ok {
                            v
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn persistence_examples() {
        let t = 0.5;
        let series: Vec<Vec<f64>> = (0..8).map(|f| vec![if f <= 4 { 0.9 } else { 0.1 }, 0.8]).collect();
        let maps: Vec<DetectionMap> = series.iter().map(|v| map_of(1, 2, v.clone())).collect();
        let out = persistence_filter(&maps, t).unwrap();
        let first: Vec<f64> = out.iter().map(|m| m.values[0]).collect();
        assert_eq!(first, vec![0.0, 0.0, 0.0, 0.0, 0.9, 0.0, 0.0, 0.0]);
        let second: Vec<f64> = out.iter().map(|m| m.values[1]).collect();
        assert_eq!(second, vec![0.0, 0.0, 0.0, 0.0, 0.8, 0.8, 0.8, 0.8]);
        assert!(out.iter().all(|m| m.statistic == Statistic::BulkPersist));
    }

    #[test]
    fn persistence_matches_sliding_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..50 {
            let frames = rng.random_range(1..20);
            let series: Vec<Vec<f64>> =
                (0..frames).map(|_| (0..6).map(|_| if rng.random_bool(0.7) { 0.9 } else { 0.2 }).collect()).collect();
            let maps: Vec<DetectionMap> = series.iter().map(|v| map_of(2, 3, v.clone())).collect();
            let out = persistence_filter(&maps, 0.5).unwrap();
            let expected = persistence_oracle(&series, 0.5);
            for (m, e) in out.iter().zip(&expected) {
                assert_eq!(&m.values, e);
            }
            for (m, input) in out.iter().zip(&maps) {
                assert!(m.values.iter().zip(&input.values).all(|(o, i)| *o == 0.0 || o == i));
            }
        }
    }

    #[test]
    fn persistence_rejects_mismatch() {
        assert!(persistence_filter(&[map_of(1, 2, vec![0.0; 2]), map_of(2, 1, vec![0.0; 2])], 0.1).is_err());
        assert!(persistence_filter(&[map_of(1, 1, vec![0.0])], f64::NAN).is_err());
    }

    #[test]
    fn map_and_signature_files_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let map = DetectionMap { frame: 7, ..map_of(2, 3, vec![0.1, 1.0 / 3.0, 0.0, 1.0, 2e-17, 0.5]) };
        map.write(dir.path().join("m")).unwrap();
        assert_eq!(DetectionMap::read(dir.path().join("m")).unwrap(), map);

        let sig = Signature::new("plume", vec![0.25, 1.0 / 7.0, 3.0]).unwrap();
        let path = dir.path().join("plume.csv");
        sig.write(&path).unwrap();
        assert_eq!(Signature::read(&path).unwrap(), sig);
        assert!(Signature::from_csv_str("x", "# comment\n1\n2\n").unwrap().values == vec![1.0, 2.0]);
        assert!(Signature::from_csv_str("x", "0\n0\n").is_err());
        assert!(Signature::from_csv_str("x", "a\n").is_err());
    }

    #[test]
    fn statistic_names() {
        for s in Statistic::ALL {
            assert_eq!(s.as_str().parse::<Statistic>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{s}\""));
        }
    }
}
