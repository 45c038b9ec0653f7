use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{hermite, local_node, FemGrid, QUAD_PER_CELL};
use crate::geometry::{BoundaryCurve, MapJet};

/// Below this ρ the map is treated as singular and the axis data are used.
const AXIS_RHO: f64 = 1e-10;

/// Value, physical gradient and physical Hessian `(xx, xy, yy)` at a point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldJet {
    pub value: f64,
    pub grad: [f64; 2],
    pub hess: [f64; 3],
}

/// Coordinate frame for derivative evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Frame {
    /// Derivatives with respect to `(ρ, θ)`.
    Logical,
    /// Derivatives with respect to `(x, y)`.
    Physical,
}

/// Bicubic Hermite field on a [`FemGrid`].
#[derive(Clone, Debug)]
pub struct FemSolution {
    pub grid: Arc<FemGrid>,
    /// Scaled nodal data, `4·(i·N + k) + d` for node `(i, k)`.
    pub dofs: Vec<f64>,
    /// Value and physical gradient at the center point.
    pub axis: [f64; 3],
}

impl FemSolution {
    pub(crate) fn from_unknowns(grid: Arc<FemGrid>, x: &[f64], slots: &[f64]) -> Self {
        let n = grid.n;
        let nu = grid.num_unknowns();
        let mut dofs = vec![0.0; (n + 1) * n * 4];
        for i in 0..=n {
            for k in 0..n {
                for d in 0..4 {
                    let (e, len) = grid.dof_expansion(i, k, d);
                    dofs[(i * n + k) * 4 + d] = e[..*len]
                        .iter()
                        .map(|&(idx, c)| c * if idx < nu { x[idx] } else { slots[idx - nu] })
                        .sum();
                }
            }
        }
        let axis = [x[0], x[1] / grid.h_rho, x[2] / grid.h_rho];
        FemSolution { grid, dofs, axis }
    }

    /// Hermite interpolant of a physical function with its derivatives.
    ///
    /// `f(x, y)` returns the value, gradient and Hessian `(xx, xy, yy)`.
    pub fn interpolate(grid: Arc<FemGrid>, f: impl Fn(f64, f64) -> FieldJet) -> Self {
        let n = grid.n;
        let mut dofs = vec![0.0; (n + 1) * n * 4];
        for i in 0..=n {
            for k in 0..n {
                let jet = grid.curve.map_jet(grid.rho_nodes[i], grid.theta_nodes[k]);
                let v = f(jet.x, jet.y);
                let (g, h) = (v.grad, v.hess);
                let u_r = g[0] * jet.x_r + g[1] * jet.y_r;
                let u_t = g[0] * jet.x_t + g[1] * jet.y_t;
                let u_rt = h[0] * jet.x_r * jet.x_t
                    + h[1] * (jet.x_r * jet.y_t + jet.x_t * jet.y_r)
                    + h[2] * jet.y_r * jet.y_t
                    + g[0] * jet.x_rt
                    + g[1] * jet.y_rt;
                let base = (i * n + k) * 4;
                dofs[base] = v.value;
                dofs[base + 1] = grid.h_rho * u_r;
                dofs[base + 2] = grid.h_theta * u_t;
                dofs[base + 3] = grid.h_rho * grid.h_theta * u_rt;
            }
        }
        let c = grid.curve.center;
        let at = f(c[0], c[1]);
        FemSolution {
            grid,
            dofs,
            axis: [at.value, at.grad[0], at.grad[1]],
        }
    }

    fn cell_dofs(&self, i: usize, k: usize) -> [f64; 16] {
        let n = self.grid.n;
        let mut out = [0.0; 16];
        for (l, o) in out.iter_mut().enumerate() {
            let (ni, nk) = local_node(n, i, k, l);
            *o = self.dofs[(ni * n + nk) * 4 + l % 4];
        }
        out
    }

    /// `[u, u_ρ, u_θ, u_ρρ, u_ρθ, u_θθ]` at a mapped point.
    pub fn eval_logical(&self, rho: f64, theta: f64) -> [f64; 6] {
        let g = &self.grid;
        let (i, k, xi, eta) = g.locate(rho, theta);
        let dofs = self.cell_dofs(i, k);
        let mut p = [[0.0; 3]; 4];
        let mut q = [[0.0; 3]; 4];
        for side in 0..2 {
            p[side] = hermite(side, false, xi);
            p[2 + side] = hermite(side, true, xi);
            q[side] = hermite(side, false, eta);
            q[2 + side] = hermite(side, true, eta);
        }
        let mut out = [0.0; 6];
        for (l, &c) in dofs.iter().enumerate() {
            let corner = l / 4;
            let d = l % 4;
            let (a, b) = (corner % 2, corner / 2);
            let pa = p[if d == 1 || d == 3 { 2 + a } else { a }];
            let qb = q[if d == 2 || d == 3 { 2 + b } else { b }];
            out[0] += c * pa[0] * qb[0];
            out[1] += c * pa[1] * qb[0];
            out[2] += c * pa[0] * qb[1];
            out[3] += c * pa[2] * qb[0];
            out[4] += c * pa[1] * qb[1];
            out[5] += c * pa[0] * qb[2];
        }
        let (ih, it) = (1.0 / g.h_rho, 1.0 / g.h_theta);
        [
            out[0],
            out[1] * ih,
            out[2] * it,
            out[3] * ih * ih,
            out[4] * ih * it,
            out[5] * it * it,
        ]
    }

    /// Value and physical derivatives at a mapped point.
    pub fn eval(&self, rho: f64, theta: f64) -> FieldJet {
        if rho < AXIS_RHO {
            let h = self.eval(1e-6, theta).hess;
            return FieldJet {
                value: self.axis[0],
                grad: [self.axis[1], self.axis[2]],
                hess: h,
            };
        }
        let l = self.eval_logical(rho, theta);
        let jet = self.grid.curve.map_jet(rho, theta);
        physical(&jet, &l)
    }

    /// Value and physical derivatives at a physical point inside the domain.
    pub fn eval_at(&self, x: f64, y: f64) -> FieldJet {
        let (rho, theta) = self.grid.curve.to_mapped([x, y]);
        self.eval(rho.min(1.0), theta)
    }

    /// Derivative with multi-index `(a, b)`, `a + b ≤ 2`, in the given frame.
    pub fn eval_index(&self, rho: f64, theta: f64, order: (usize, usize), frame: Frame) -> f64 {
        assert!(
            order.0 + order.1 <= 2,
            "derivatives above second order are not available"
        );
        let pick6 = |v: [f64; 6]| match order {
            (0, 0) => v[0],
            (1, 0) => v[1],
            (0, 1) => v[2],
            (2, 0) => v[3],
            (1, 1) => v[4],
            _ => v[5],
        };
        match frame {
            Frame::Logical => pick6(self.eval_logical(rho, theta)),
            Frame::Physical => {
                let j = self.eval(rho, theta);
                pick6([
                    j.value, j.grad[0], j.grad[1], j.hess[0], j.hess[1], j.hess[2],
                ])
            }
        }
    }

    /// Value and physical derivatives at every grid quadrature point.
    pub fn at_quadrature(&self) -> Vec<FieldJet> {
        let g = &self.grid;
        let n = g.n;
        let (ih, it) = (1.0 / g.h_rho, 1.0 / g.h_theta);
        let mut out = Vec::with_capacity(g.quad.len());
        for i in 0..n {
            for k in 0..n {
                let dofs = self.cell_dofs(i, k);
                for (q, qp) in g.cell_quad(i, k).iter().enumerate() {
                    let row = &g.table[q];
                    let mut v = [0.0; 6];
                    for (l, &c) in dofs.iter().enumerate() {
                        for (vm, rm) in v.iter_mut().zip(&row[l]) {
                            *vm += c * rm;
                        }
                    }
                    let l = [
                        v[0],
                        v[1] * ih,
                        v[2] * it,
                        v[3] * ih * ih,
                        v[4] * ih * it,
                        v[5] * it * it,
                    ];
                    out.push(physical(&qp.jet, &l));
                }
            }
        }
        out
    }

    /// Values only at every grid quadrature point.
    pub fn values_at_quadrature(&self) -> Vec<f64> {
        let g = &self.grid;
        let n = g.n;
        let mut out = Vec::with_capacity(g.quad.len());
        for i in 0..n {
            for k in 0..n {
                let dofs = self.cell_dofs(i, k);
                for q in 0..QUAD_PER_CELL {
                    let row = &g.table[q];
                    out.push(dofs.iter().zip(row.iter()).map(|(c, r)| c * r[0]).sum());
                }
            }
        }
        out
    }

    /// L² error against an exact function of `(x, y)`.
    pub fn l2_error(&self, exact: impl Fn(f64, f64) -> f64) -> f64 {
        self.grid.l2_error(&self.values_at_quadrature(), exact)
    }

    /// Nodal value at node `(i, k)`.
    pub fn nodal_value(&self, i: usize, k: usize) -> f64 {
        self.dofs[(i * self.grid.n + k) * 4]
    }
}

fn physical(jet: &MapJet, l: &[f64; 6]) -> FieldJet {
    let grad = jet.gradient(l[1], l[2]);
    let hess = jet.hessian(grad, l[3], l[4], l[5]);
    FieldJet {
        value: l[0],
        grad,
        hess,
    }
}

#[derive(Serialize, Deserialize)]
struct SolutionArtifact {
    n: usize,
    curve: BoundaryCurve,
    dofs: Vec<f64>,
    axis: [f64; 3],
}

impl Serialize for FemSolution {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        SolutionArtifact {
            n: self.grid.n,
            curve: (*self.grid.curve).clone(),
            dofs: self.dofs.clone(),
            axis: self.axis,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FemSolution {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let a = SolutionArtifact::deserialize(d)?;
        if a.dofs.len() != (a.n + 1) * a.n * 4 {
            return Err(serde::de::Error::custom(
                "dof array does not match the grid size",
            ));
        }
        let grid = Arc::new(FemGrid::new(Arc::new(a.curve), a.n));
        Ok(FemSolution {
            grid,
            dofs: a.dofs,
            axis: a.axis,
        })
    }
}
