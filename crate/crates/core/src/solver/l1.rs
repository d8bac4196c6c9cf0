//! Split Bregman for `min ||u||_1 s.t. A H^T u = g`.
//!
//! `B = A H^T` has orthonormal rows, so the quadratic step
//! `(mu B^T B + lambda I) u = rhs` is solved in closed form:
//! `(mu P + lambda I)^-1 = I / lambda + (1/(mu+lambda) - 1/lambda) P` with
//! `P = B^T B` a projection.

use super::ops::shrink_scalar;
use super::{within_tolerance, BandOutcome, BandProblem, SolverParams};
use crate::wavelet::HaarSpec;

struct Operator<'a> {
    problem: &'a BandProblem<'a>,
    haar: HaarSpec,
    work: Vec<f64>,
    scratch: Vec<f64>,
}

impl Operator<'_> {
    /// `out = B u`
    fn forward(&mut self, u: &[f64], out: &mut [f64]) {
        let mut x = std::mem::take(&mut self.work);
        x.copy_from_slice(u);
        self.haar.inverse_in_place(&mut x, &mut self.scratch);
        self.problem.op.apply(&x, out, &mut self.scratch);
        self.work = x;
    }

    /// `out = B^T v`
    fn adjoint(&mut self, v: &[f64], out: &mut [f64]) {
        self.problem.op.adjoint(v, out);
        self.haar.forward_in_place(out, &mut self.scratch);
    }
}

pub(crate) fn solve_band(problem: &BandProblem<'_>, params: &SolverParams) -> BandOutcome {
    let n = problem.op.n();
    let k = problem.op.k();
    let haar = HaarSpec::new(n).expect("plan n is a power of two");
    let mut op = Operator { problem, haar, work: vec![0.0; n], scratch: vec![0.0; n] };
    let (mu, lambda) = (params.mu, params.lambda);
    let c = 1.0 / (mu + lambda) - 1.0 / lambda;
    let gamma = 1.0 / lambda;

    let g = &problem.g;
    let mut g_k = g.clone();
    let mut u = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut bz = vec![0.0; k];
    let mut q = vec![0.0; k];
    let mut bu = vec![0.0; k];
    let mut diff = vec![0.0; k];
    let mut residuals = Vec::with_capacity(params.max_outer);
    let mut converged = false;

    for _ in 0..params.max_outer {
        for _ in 0..params.inner_sweeps {
            for i in 0..n {
                z[i] = d[i] - b[i];
            }
            op.forward(&z, &mut bz);
            for i in 0..k {
                q[i] = (mu / lambda) * g_k[i] + c * (mu * g_k[i] + lambda * bz[i]);
                bu[i] = bz[i] + q[i];
            }
            op.adjoint(&q, &mut u);
            for i in 0..n {
                u[i] += z[i];
                let next = shrink_scalar(u[i] + b[i], gamma);
                b[i] += u[i] - next;
                d[i] = next;
            }
        }
        for i in 0..k {
            diff[i] = bu[i] - g[i];
            g_k[i] -= diff[i];
        }
        let residual = problem.measurement_residual(&diff);
        residuals.push(residual);
        if within_tolerance(residual, problem.y_norm, params.outer_tol) {
            converged = true;
            break;
        }
    }

    let mut scratch = vec![0.0; n];
    haar.inverse_in_place(&mut u, &mut scratch);
    BandOutcome { x: u, residuals, converged }
}
