//! Split Bregman for `min ||grad_x x||_1 + ||grad_y x||_1 s.t. A x = g`.
//!
//! The quadratic step `(mu A^T A + lambda L) x = rhs` (L the periodic
//! Laplacian) is solved by warm-started conjugate gradient. Row 0 of every
//! plan is the all-ones Walsh row, which covers the Laplacian's constant
//! null space, so the system is positive definite.

use super::cg::{conjugate_gradient, CgWorkspace};
use super::ops::{grad_x_adjoint_add, grad_x_into, grad_y_adjoint_add, grad_y_into, laplacian_into, shrink_scalar};
use super::{within_tolerance, BandOutcome, BandProblem, SolverParams};

pub(crate) fn solve_band(problem: &BandProblem<'_>, params: &SolverParams) -> BandOutcome {
    let (n1, n2) = (problem.n1, problem.n2);
    let n = problem.op.n();
    let k = problem.op.k();
    let (mu, lambda) = (params.mu, params.lambda);
    let gamma = 1.0 / lambda;
    let op = problem.op;

    let g = &problem.g;
    let mut g_k = g.clone();
    let mut x = vec![0.0; n];
    let (mut dx, mut dy) = (vec![0.0; n], vec![0.0; n]);
    let (mut bx, mut by) = (vec![0.0; n], vec![0.0; n]);
    let (mut gx, mut gy) = (vec![0.0; n], vec![0.0; n]);
    let mut rhs = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut work = vec![0.0; n];
    let mut lap = vec![0.0; n];
    let mut ax = vec![0.0; k];
    let mut diff = vec![0.0; k];
    let mut ws = CgWorkspace::new(n);
    let mut residuals = Vec::with_capacity(params.max_outer);
    let mut converged = false;

    for _ in 0..params.max_outer {
        for _ in 0..params.inner_sweeps {
            op.adjoint(&g_k, &mut rhs);
            for v in &mut rhs {
                *v *= mu;
            }
            for i in 0..n {
                gx[i] = lambda * (dx[i] - bx[i]);
                gy[i] = lambda * (dy[i] - by[i]);
            }
            grad_x_adjoint_add(&gx, n1, n2, &mut rhs);
            grad_y_adjoint_add(&gy, n1, n2, &mut rhs);

            conjugate_gradient(
                |v, out| {
                    op.apply(v, &mut ax, &mut work);
                    op.adjoint(&ax, &mut tmp);
                    laplacian_into(v, n1, n2, &mut lap);
                    for i in 0..n {
                        out[i] = mu * tmp[i] + lambda * lap[i];
                    }
                },
                &rhs,
                &mut x,
                params.inner_cg_tol,
                params.inner_cg_max,
                &mut ws,
            );

            grad_x_into(&x, n1, n2, &mut gx);
            grad_y_into(&x, n1, n2, &mut gy);
            for i in 0..n {
                let nx = shrink_scalar(gx[i] + bx[i], gamma);
                bx[i] += gx[i] - nx;
                dx[i] = nx;
                let ny = shrink_scalar(gy[i] + by[i], gamma);
                by[i] += gy[i] - ny;
                dy[i] = ny;
            }
        }

        op.apply(&x, &mut ax, &mut work);
        for i in 0..k {
            diff[i] = ax[i] - g[i];
            g_k[i] -= diff[i];
        }
        let residual = problem.measurement_residual(&diff);
        residuals.push(residual);
        if within_tolerance(residual, problem.y_norm, params.outer_tol) {
            converged = true;
            break;
        }
    }

    BandOutcome { x, residuals, converged }
}
