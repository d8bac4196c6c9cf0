//! Conjugate gradient on a matrix-free symmetric positive definite operator.

/// Scratch buffers reused across CG solves of one size.
#[derive(Debug, Clone)]
pub struct CgWorkspace {
    r: Vec<f64>,
    p: Vec<f64>,
    ap: Vec<f64>,
}

impl CgWorkspace {
    pub fn new(n: usize) -> Self {
        Self { r: vec![0.0; n], p: vec![0.0; n], ap: vec![0.0; n] }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` starting from the contents of `x`. Stops when
/// `||b - A x|| <= tol ||b||` or after `max_iter` steps; returns the number
/// of iterations taken.
pub fn conjugate_gradient(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
    ws: &mut CgWorkspace,
) -> usize {
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.fill(0.0);
        return 0;
    }
    let CgWorkspace { r, p, ap } = ws;
    apply(x, ap);
    for i in 0..b.len() {
        r[i] = b[i] - ap[i];
    }
    p.copy_from_slice(r);
    let mut rs = dot(r, r);
    let target = (tol * b_norm).powi(2);
    let mut iter = 0;
    while iter < max_iter && rs > target {
        apply(p, ap);
        let pap = dot(p, ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rs / pap;
        for i in 0..b.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new = dot(r, r);
        let beta = rs_new / rs;
        for i in 0..b.len() {
            p[i] = r[i] + beta * p[i];
        }
        rs = rs_new;
        iter += 1;
    }
    iter
}
