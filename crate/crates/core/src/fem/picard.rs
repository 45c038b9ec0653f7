use std::sync::Arc;

use super::{Dirichlet, FemGrid, FemSolution, Operator};
use crate::error::{Error, Result};
use crate::source::SourceModel;

#[derive(Clone, Copy, Debug)]
pub struct PicardOptions {
    /// Stopping tolerance on the max-norm residual over the unknowns.
    pub eps: f64,
    pub max_iter: usize,
    /// Iterations without a new residual minimum before declaring stagnation.
    pub stagnation_window: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions {
            eps: 1.7e-14,
            max_iter: 100,
            stagnation_window: 5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PicardOutcome {
    pub solution: FemSolution,
    pub iterations: usize,
    pub residuals: Vec<f64>,
}

fn source_at(grid: &FemGrid, source: &dyn SourceModel, u: &[f64]) -> Vec<f64> {
    grid.quad
        .iter()
        .zip(u)
        .map(|(q, &v)| source.eval(q.jet.x, q.jet.y, v).f)
        .collect()
}

/// Max-norm of the weak residual `∫ (F(u^{n-1}) − F(u^n)) φ` over the unknowns.
fn weak_residual(grid: &FemGrid, diff: &[f64]) -> f64 {
    let n = grid.n;
    let nu = grid.num_unknowns();
    let mut r = vec![0.0; nu];
    for i in 0..n {
        for k in 0..n {
            let cell = i * n + k;
            for (q, qp) in grid.cell_quad(i, k).iter().enumerate() {
                let wd = qp.weight * diff[cell * super::QUAD_PER_CELL + q];
                for l in 0..16 {
                    let (ni, nk) = super::local_node(n, i, k, l);
                    let (e, len) = grid.dof_expansion(ni, nk, l % 4);
                    for &(idx, c) in &e[..*len] {
                        if idx < nu {
                            r[idx] += c * wd * grid.table[q][l][0];
                        }
                    }
                }
            }
        }
    }
    r.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Fixed-point iteration `Δu^n = F(x, u^{n-1})`.
///
/// A source affine in `u` is solved exactly with one linear solve.
pub fn picard_solve(
    grid: &Arc<FemGrid>,
    source: &dyn SourceModel,
    u0: Option<&FemSolution>,
    dirichlet: &Dirichlet,
    opts: PicardOptions,
) -> Result<PicardOutcome> {
    if source.affine_in_u() {
        let (c, g): (Vec<f64>, Vec<f64>) = grid
            .quad
            .iter()
            .map(|q| {
                let s = source.eval(q.jet.x, q.jet.y, 0.0);
                (s.f_u, s.f)
            })
            .unzip();
        let solution = Operator::new(grid.clone(), &c)?.solve(&g, dirichlet)?;
        return Ok(PicardOutcome {
            solution,
            iterations: 1,
            residuals: vec![0.0],
        });
    }

    let op = Operator::laplacian(grid.clone())?;
    let mut u_q = match u0 {
        Some(s) => s.values_at_quadrature(),
        None => vec![0.0; grid.quad.len()],
    };
    let mut f_prev = source_at(grid, source, &u_q);
    let mut residuals = Vec::new();
    let mut best = f64::INFINITY;
    let mut since_best = 0;
    for it in 1..=opts.max_iter {
        let solution = op.solve(&f_prev, dirichlet)?;
        u_q = solution.values_at_quadrature();
        let f_new = source_at(grid, source, &u_q);
        let diff: Vec<f64> = f_prev.iter().zip(&f_new).map(|(a, b)| a - b).collect();
        let res = weak_residual(grid, &diff);
        residuals.push(res);
        if res <= opts.eps {
            return Ok(PicardOutcome {
                solution,
                iterations: it,
                residuals,
            });
        }
        if !res.is_finite() {
            return Err(Error::PicardStagnation {
                iterations: it,
                residual: res,
            });
        }
        if res < best {
            best = res;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= opts.stagnation_window {
                return Err(Error::PicardStagnation {
                    iterations: it,
                    residual: res,
                });
            }
        }
        f_prev = f_new;
    }
    Err(Error::PicardCap {
        iterations: opts.max_iter,
        residual: *residuals.last().unwrap_or(&f64::NAN),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundaryCurve;
    use crate::source::{ConstantSource, SourceJet};

    fn disk(n: usize) -> Arc<FemGrid> {
        Arc::new(FemGrid::new(
            Arc::new(BoundaryCurve::circle([0.0, 0.0], 1.0).unwrap()),
            n,
        ))
    }

    /// `Δu = e^u − 1 + s(x)`, a contraction on the unit disk.
    struct ExpSource;
    impl SourceModel for ExpSource {
        fn eval(&self, x: f64, _y: f64, u: f64) -> SourceJet {
            let e = (0.3 * u).exp();
            SourceJet {
                f: e + x,
                f_u: 0.3 * e,
                f_x: 1.0,
                f_xu: 0.0,
                f_uu: 0.09 * e,
                ..Default::default()
            }
        }
    }

    #[test]
    fn linear_source_converges_in_one_iteration() {
        let g = disk(8);
        let out = picard_solve(
            &g,
            &ConstantSource(4.0),
            None,
            &Dirichlet::zero(8),
            PicardOptions::default(),
        )
        .unwrap();
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn vacuous_tolerance_returns_first_iterate() {
        let g = disk(8);
        let opts = PicardOptions {
            eps: 1e300,
            ..Default::default()
        };
        let out = picard_solve(&g, &ExpSource, None, &Dirichlet::zero(8), opts).unwrap();
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn nonlinear_iteration_converges_monotonically() {
        let g = disk(8);
        let out = picard_solve(
            &g,
            &ExpSource,
            None,
            &Dirichlet::zero(8),
            PicardOptions::default(),
        )
        .unwrap();
        assert!(out.iterations > 3);
        for w in out.residuals[2..].windows(2) {
            assert!(w[1] <= w[0] || w[1] < 1e-13, "{:?}", out.residuals);
        }
    }

    #[test]
    fn cap_is_reported() {
        let g = disk(8);
        let opts = PicardOptions {
            max_iter: 2,
            ..Default::default()
        };
        let err = picard_solve(&g, &ExpSource, None, &Dirichlet::zero(8), opts).unwrap_err();
        assert!(matches!(err, Error::PicardCap { iterations: 2, .. }));
    }
}
