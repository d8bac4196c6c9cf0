//! Orthonormal 1-D Haar transform used as the sparsifying basis for the
//! l1 reconstruction.
//!
//! Coefficient layout after `L` levels on a length-`n` signal:
//! `[approx (n/2^L) | detail level L | ... | detail level 1 (n/2)]`, so at
//! full depth index 0 holds the scaled mean and the last half holds the
//! finest-scale differences.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{param_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HaarSpec {
    n: usize,
    levels: usize,
}

impl HaarSpec {
    /// Full-depth transform of length `n`.
    pub fn new(n: usize) -> Result<Self> {
        if !n.is_power_of_two() {
            return param_err(format!("Haar length must be a power of two, got {n}"));
        }
        Ok(Self { n, levels: n.trailing_zeros() as usize })
    }

    pub fn with_levels(n: usize, levels: usize) -> Result<Self> {
        let spec = Self::new(n)?;
        if levels == 0 && n > 1 || levels > spec.levels {
            return param_err(format!("levels must lie in 1..={} for n={n}, got {levels}", spec.levels));
        }
        Ok(Self { n, levels })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// In-place forward transform; `scratch` must hold at least `n` values.
    pub fn forward_in_place(&self, v: &mut [f64], scratch: &mut [f64]) {
        debug_assert_eq!(v.len(), self.n);
        let mut len = self.n;
        for _ in 0..self.levels {
            let half = len / 2;
            for i in 0..half {
                let (a, b) = (v[2 * i], v[2 * i + 1]);
                scratch[i] = (a + b) * FRAC_1_SQRT_2;
                scratch[half + i] = (a - b) * FRAC_1_SQRT_2;
            }
            v[..len].copy_from_slice(&scratch[..len]);
            len = half;
        }
    }

    /// In-place inverse transform; `scratch` must hold at least `n` values.
    pub fn inverse_in_place(&self, u: &mut [f64], scratch: &mut [f64]) {
        debug_assert_eq!(u.len(), self.n);
        let mut len = self.n >> self.levels;
        for _ in 0..self.levels {
            let half = len;
            len *= 2;
            for i in 0..half {
                let (s, d) = (u[i], u[half + i]);
                scratch[2 * i] = (s + d) * FRAC_1_SQRT_2;
                scratch[2 * i + 1] = (s - d) * FRAC_1_SQRT_2;
            }
            u[..len].copy_from_slice(&scratch[..len]);
        }
    }
}

pub fn haar_forward(v: &[f64], spec: &HaarSpec) -> Result<Vec<f64>> {
    check_len(v.len(), spec)?;
    let mut out = v.to_vec();
    let mut scratch = vec![0.0; v.len()];
    spec.forward_in_place(&mut out, &mut scratch);
    Ok(out)
}

pub fn haar_inverse(u: &[f64], spec: &HaarSpec) -> Result<Vec<f64>> {
    check_len(u.len(), spec)?;
    let mut out = u.to_vec();
    let mut scratch = vec![0.0; u.len()];
    spec.inverse_in_place(&mut out, &mut scratch);
    Ok(out)
}

fn check_len(len: usize, spec: &HaarSpec) -> Result<()> {
    if len != spec.n {
        return param_err(format!("vector length {len} does not match Haar length {}", spec.n));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn dense_forward(n: usize) -> Vec<Vec<f64>> {
        let spec = HaarSpec::new(n).unwrap();
        let cols: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                haar_forward(&e, &spec).unwrap()
            })
            .collect();
        (0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect()
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(HaarSpec::new(12).is_err());
        assert!(haar_forward(&[1.0; 4], &HaarSpec::new(8).unwrap()).is_err());
    }

    #[test]
    fn constant_signal_has_one_coefficient() {
        let c = 2.5;
        let u = haar_forward(&[c; 8], &HaarSpec::new(8).unwrap()).unwrap();
        assert!((u[0] - c * 8f64.sqrt()).abs() < 1e-12);
        assert!(u[1..].iter().all(|&x| x.abs() < 1e-15));
    }

    #[test]
    fn matches_hand_built_four_point_matrix() {
        let s = FRAC_1_SQRT_2;
        let h = [
            [0.5, 0.5, 0.5, 0.5],
            [0.5, 0.5, -0.5, -0.5],
            [s, -s, 0.0, 0.0],
            [0.0, 0.0, s, -s],
        ];
        let v = [1.0, -1.0, 0.0, 0.0];
        let expected: Vec<f64> = h.iter().map(|row| row.iter().zip(&v).map(|(a, b)| a * b).sum()).collect();
        let u = haar_forward(&v, &HaarSpec::new(4).unwrap()).unwrap();
        for (a, b) in u.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn inverse_of_dc() {
        let v = haar_inverse(&[1.0, 0.0, 0.0, 0.0], &HaarSpec::new(4).unwrap()).unwrap();
        assert!(v.iter().all(|&x| (x - 0.5).abs() < 1e-15));
    }

    #[test]
    fn inverse_is_transpose_of_dense_matrix() {
        let n = 8;
        let h = dense_forward(n);
        let u: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).cos()).collect();
        let v = haar_inverse(&u, &HaarSpec::new(n).unwrap()).unwrap();
        for j in 0..n {
            let expected: f64 = (0..n).map(|i| h[i][j] * u[i]).sum();
            assert!((v[j] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn dense_matrix_is_orthonormal() {
        for m in 0..=6 {
            let n = 1 << m;
            let h = dense_forward(n);
            for a in 0..n {
                for b in 0..n {
                    let dot: f64 = (0..n).map(|i| h[i][a] * h[i][b]).sum();
                    let expected = if a == b { 1.0 } else { 0.0 };
                    assert!((dot - expected).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn partial_depth_roundtrip() {
        let spec = HaarSpec::with_levels(16, 2).unwrap();
        let v: Vec<f64> = (0..16).map(|i| (i * i) as f64).collect();
        let back = haar_inverse(&haar_forward(&v, &spec).unwrap(), &spec).unwrap();
        for (a, b) in back.iter().zip(&v) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(HaarSpec::with_levels(16, 5).is_err());
    }

    #[test]
    fn piecewise_constant_is_sparse() {
        // 3 segments with dyadic boundaries at 16 and 48 in n = 64
        let n = 64usize;
        let v: Vec<f64> = (0..n).map(|i| if i < 16 { 1.0 } else if i < 48 { -2.0 } else { 0.5 }).collect();
        let u = haar_forward(&v, &HaarSpec::new(n).unwrap()).unwrap();
        let nnz = u.iter().filter(|x| x.abs() > 1e-12).count();
        assert!(nnz <= 3 * 6, "nnz = {nnz}");
    }

    proptest! {
        #[test]
        fn energy_and_roundtrip(m in 0u32..=12, seed in any::<u64>()) {
            let n = 1usize << m;
            let v: Vec<f64> = (0..n).map(|i| ((i as u64).wrapping_mul(seed | 1) % 1000) as f64 / 100.0 - 5.0).collect();
            let spec = HaarSpec::new(n).unwrap();
            let u = haar_forward(&v, &spec).unwrap();
            let nv = norm(&v);
            prop_assert!((norm(&u) - nv).abs() <= 1e-12 * nv.max(1e-300));
            let back = haar_inverse(&u, &spec).unwrap();
            let err: f64 = norm(&back.iter().zip(&v).map(|(a, b)| a - b).collect::<Vec<_>>());
            prop_assert!(err <= 1e-12 * nv.max(1e-300));
        }

        #[test]
        fn linearity(a in -3.0f64..3.0, b in -3.0f64..3.0, seed in any::<u32>()) {
            let n = 32;
            let spec = HaarSpec::new(n).unwrap();
            let v: Vec<f64> = (0..n).map(|i| ((i as f64) + seed as f64).sin()).collect();
            let w: Vec<f64> = (0..n).map(|i| ((i as f64) * 1.3 - seed as f64).cos()).collect();
            let mix: Vec<f64> = v.iter().zip(&w).map(|(x, y)| a * x + b * y).collect();
            let lhs = haar_forward(&mix, &spec).unwrap();
            let hv = haar_forward(&v, &spec).unwrap();
            let hw = haar_forward(&w, &spec).unwrap();
            for i in 0..n {
                prop_assert!((lhs[i] - (a * hv[i] + b * hw[i])).abs() < 1e-12);
            }
        }
    }
}
