//! Pointwise shrinkage and periodic forward-difference operators on
//! row-major `n1 x n2` images.

use crate::error::{dim_err, Result};

/// Soft threshold `sign(v) max(|v| - gamma, 0)`.
#[inline]
pub fn shrink_scalar(v: f64, gamma: f64) -> f64 {
    let mag = v.abs() - gamma;
    if mag > 0.0 {
        mag.copysign(v)
    } else {
        0.0
    }
}

pub fn shrink(v: &[f64], gamma: f64) -> Vec<f64> {
    v.iter().map(|&x| shrink_scalar(x, gamma)).collect()
}

/// `(grad_x x)[i][j] = x[(i+1) mod n1][j] - x[i][j]`.
pub fn grad_x_into(x: &[f64], n1: usize, n2: usize, out: &mut [f64]) {
    for i in 0..n1 {
        let next = if i + 1 == n1 { 0 } else { i + 1 };
        let (row, below) = (i * n2, next * n2);
        for j in 0..n2 {
            out[row + j] = x[below + j] - x[row + j];
        }
    }
}

/// `(grad_y x)[i][j] = x[i][(j+1) mod n2] - x[i][j]`.
pub fn grad_y_into(x: &[f64], n1: usize, n2: usize, out: &mut [f64]) {
    for i in 0..n1 {
        let row = i * n2;
        for j in 0..n2 {
            let next = if j + 1 == n2 { 0 } else { j + 1 };
            out[row + j] = x[row + next] - x[row + j];
        }
    }
}

/// Adjoint of [`grad_x_into`], accumulated into `out`.
pub fn grad_x_adjoint_add(v: &[f64], n1: usize, n2: usize, out: &mut [f64]) {
    for i in 0..n1 {
        let prev = if i == 0 { n1 - 1 } else { i - 1 };
        let (row, above) = (i * n2, prev * n2);
        for j in 0..n2 {
            out[row + j] += v[above + j] - v[row + j];
        }
    }
}

/// Adjoint of [`grad_y_into`], accumulated into `out`.
pub fn grad_y_adjoint_add(v: &[f64], n1: usize, n2: usize, out: &mut [f64]) {
    for i in 0..n1 {
        let row = i * n2;
        for j in 0..n2 {
            let prev = if j == 0 { n2 - 1 } else { j - 1 };
            out[row + j] += v[row + prev] - v[row + j];
        }
    }
}

/// `grad_x^T grad_x + grad_y^T grad_y`, the periodic five-point Laplacian
/// (positive semidefinite sign).
pub fn laplacian_into(x: &[f64], n1: usize, n2: usize, out: &mut [f64]) {
    for i in 0..n1 {
        let up = if i == 0 { n1 - 1 } else { i - 1 };
        let down = if i + 1 == n1 { 0 } else { i + 1 };
        for j in 0..n2 {
            let left = if j == 0 { n2 - 1 } else { j - 1 };
            let right = if j + 1 == n2 { 0 } else { j + 1 };
            let c = x[i * n2 + j];
            out[i * n2 + j] = 4.0 * c
                - x[up * n2 + j]
                - x[down * n2 + j]
                - x[i * n2 + left]
                - x[i * n2 + right];
        }
    }
}

pub fn grad_x(x: &[f64], n1: usize, n2: usize) -> Result<Vec<f64>> {
    check_image(x, n1, n2)?;
    let mut out = vec![0.0; x.len()];
    grad_x_into(x, n1, n2, &mut out);
    Ok(out)
}

pub fn grad_y(x: &[f64], n1: usize, n2: usize) -> Result<Vec<f64>> {
    check_image(x, n1, n2)?;
    let mut out = vec![0.0; x.len()];
    grad_y_into(x, n1, n2, &mut out);
    Ok(out)
}

/// Anisotropic TV of one image.
pub fn tv_image(x: &[f64], n1: usize, n2: usize) -> f64 {
    let mut total = 0.0;
    for i in 0..n1 {
        let down = if i + 1 == n1 { 0 } else { i + 1 };
        for j in 0..n2 {
            let right = if j + 1 == n2 { 0 } else { j + 1 };
            let c = x[i * n2 + j];
            total += (x[down * n2 + j] - c).abs() + (x[i * n2 + right] - c).abs();
        }
    }
    total
}

/// Anisotropic TV summed over all bands of a band-major `n x b` matrix.
pub fn tv_norm(data: &[f64], n1: usize, n2: usize) -> Result<f64> {
    let n = n1 * n2;
    if n == 0 || !data.len().is_multiple_of(n) {
        return dim_err(format!("{} values do not form {n1}x{n2} bands", data.len()));
    }
    Ok(data.chunks_exact(n).map(|band| tv_image(band, n1, n2)).sum())
}

fn check_image(x: &[f64], n1: usize, n2: usize) -> Result<()> {
    if x.len() != n1 * n2 || x.is_empty() {
        return dim_err(format!("image of length {} is not {n1}x{n2}", x.len()));
    }
    Ok(())
}
