//! Isoparametric bicubic Hermite finite elements on the mapped `(ρ, θ)` grid.
//!
//! The grid has `N` cells in each direction. Nodes sit at `ρ_i = i/N` for
//! `i = 0..=N` and `θ_k = 2πk/N` for `k = 0..N` (periodic). Each node carries
//! four Hermite data scaled by the cell sizes: `u`, `h_ρ u_ρ`, `h_θ u_θ` and
//! `h_ρ h_θ u_ρθ`.
//!
//! The ring `ρ = 0` collapses to the center. It is represented by three
//! unknowns `(u_0, h_ρ ∂_x u, h_ρ ∂_y u)` from which the Hermite data of every
//! axis node follow, so the discrete field is single valued and smooth there.
//! At `ρ = 1` the value and `θ`-derivative are Dirichlet data; the `ρ`-derivatives
//! stay free.

mod operator;
mod picard;
mod solution;

use std::f64::consts::PI;
use std::sync::Arc;

use crate::geometry::{BoundaryCurve, MapJet};
use crate::quadrature::GaussRule;

pub use operator::{assemble, solve_linear, LinearSystem, Operator};
pub use picard::{picard_solve, PicardOptions, PicardOutcome};
pub use solution::{FemSolution, FieldJet};

/// Gauss points per direction in each cell.
pub const QUAD_1D: usize = 4;
pub const QUAD_PER_CELL: usize = QUAD_1D * QUAD_1D;

/// One-dimensional cubic Hermite shape functions on `[0, 1]`.
///
/// `side` selects the end (0 or 1), `deriv` selects value or slope data.
#[inline]
pub(crate) fn hermite(side: usize, deriv: bool, t: f64) -> [f64; 3] {
    match (side, deriv) {
        (0, false) => [
            1.0 - 3.0 * t * t + 2.0 * t * t * t,
            -6.0 * t + 6.0 * t * t,
            -6.0 + 12.0 * t,
        ],
        (1, false) => [
            3.0 * t * t - 2.0 * t * t * t,
            6.0 * t - 6.0 * t * t,
            6.0 - 12.0 * t,
        ],
        (0, true) => [
            t - 2.0 * t * t + t * t * t,
            1.0 - 4.0 * t + 3.0 * t * t,
            -4.0 + 6.0 * t,
        ],
        (_, true) => [-t * t + t * t * t, -2.0 * t + 3.0 * t * t, -2.0 + 6.0 * t],
        _ => unreachable!(),
    }
}

/// Local dof `l = 4·corner + d`, corner `= a + 2b` with `a` the ρ side and `b`
/// the θ side, `d ∈ {u, ρ, θ, ρθ}`. Returns `[φ, φ_ξ, φ_η, φ_ξξ, φ_ξη, φ_ηη]`.
#[inline]
pub(crate) fn shape(l: usize, xi: f64, eta: f64) -> [f64; 6] {
    let corner = l / 4;
    let d = l % 4;
    let (a, b) = (corner % 2, corner / 2);
    let p = hermite(a, d == 1 || d == 3, xi);
    let q = hermite(b, d == 2 || d == 3, eta);
    [
        p[0] * q[0],
        p[1] * q[0],
        p[0] * q[1],
        p[2] * q[0],
        p[1] * q[1],
        p[0] * q[2],
    ]
}

/// Node `(i, k)` touched by local dof `l` of cell `(i, k)`.
#[inline]
pub(crate) fn local_node(n: usize, i: usize, k: usize, l: usize) -> (usize, usize) {
    let corner = l / 4;
    (i + corner % 2, (k + corner / 2) % n)
}

/// One quadrature point with the coordinate map evaluated there.
#[derive(Clone, Copy, Debug)]
pub struct QuadPoint {
    pub jet: MapJet,
    /// Gauss weight times cell area times `det ∂(x,y)/∂(ρ,θ)`.
    pub weight: f64,
}

/// The `N × N` mapped grid with its precomputed cell quadrature.
#[derive(Debug)]
pub struct FemGrid {
    pub n: usize,
    pub curve: Arc<BoundaryCurve>,
    pub rho_nodes: Vec<f64>,
    pub theta_nodes: Vec<f64>,
    pub h_rho: f64,
    pub h_theta: f64,
    /// Cell-major: cell `(i, k)` owns `QUAD_PER_CELL` consecutive points,
    /// ordered `q = qi·QUAD_1D + qj` with `qi` along ρ.
    pub quad: Vec<QuadPoint>,
    /// Gauss abscissae on `[0, 1]`.
    pub gauss_unit: Vec<f64>,
    /// Shape-function table `[q][l]` on the reference cell.
    pub(crate) table: Vec<[[f64; 6]; 16]>,
    expansions: Vec<Expansion>,
}

/// Linear combination of at most two unknowns or Dirichlet slots.
pub(crate) type Expansion = ([(usize, f64); 2], usize);

impl FemGrid {
    pub fn new(curve: Arc<BoundaryCurve>, n: usize) -> Self {
        assert!(n >= 2, "grid needs at least two cells per direction");
        let h_rho = 1.0 / n as f64;
        let h_theta = 2.0 * PI / n as f64;
        let rho_nodes = (0..=n).map(|i| i as f64 * h_rho).collect();
        let theta_nodes = (0..n).map(|k| k as f64 * h_theta).collect();
        let (gx, gw) = GaussRule::new(QUAD_1D).unit();

        let mut table = Vec::with_capacity(QUAD_PER_CELL);
        for qi in 0..QUAD_1D {
            for qj in 0..QUAD_1D {
                let mut row = [[0.0; 6]; 16];
                for (l, r) in row.iter_mut().enumerate() {
                    *r = shape(l, gx[qi], gx[qj]);
                }
                table.push(row);
            }
        }

        // radial data per θ quadrature abscissa, reused across rings
        let radials: Vec<_> = (0..n)
            .flat_map(|k| gx.iter().map(move |&t| (k as f64 + t) * h_theta))
            .map(|theta| (theta, curve.radial(theta)))
            .collect();

        let mut quad = Vec::with_capacity(n * n * QUAD_PER_CELL);
        for i in 0..n {
            for k in 0..n {
                for qi in 0..QUAD_1D {
                    let rho = (i as f64 + gx[qi]) * h_rho;
                    for qj in 0..QUAD_1D {
                        let (theta, r) = radials[k * QUAD_1D + qj];
                        let jet = MapJet::new(curve.center, rho, theta, r);
                        let weight = gw[qi] * gw[qj] * h_rho * h_theta * jet.det();
                        quad.push(QuadPoint { jet, weight });
                    }
                }
            }
        }
        let mut grid = FemGrid {
            n,
            curve,
            rho_nodes,
            theta_nodes,
            h_rho,
            h_theta,
            quad,
            gauss_unit: gx,
            table,
            expansions: Vec::new(),
        };
        let mut expansions = Vec::with_capacity((n + 1) * n * 4);
        for i in 0..=n {
            for k in 0..n {
                for d in 0..4 {
                    expansions.push(grid.compute_expansion(i, k, d));
                }
            }
        }
        grid.expansions = expansions;
        grid
    }

    pub fn num_cells(&self) -> usize {
        self.n * self.n
    }

    /// Quadrature points of cell `(i, k)`.
    pub fn cell_quad(&self, i: usize, k: usize) -> &[QuadPoint] {
        let c = i * self.n + k;
        &self.quad[c * QUAD_PER_CELL..(c + 1) * QUAD_PER_CELL]
    }

    /// Number of free unknowns: 3 axis data, 4 per interior node, 2 per boundary node.
    pub fn num_unknowns(&self) -> usize {
        3 + 4 * self.n * (self.n - 1) + 2 * self.n
    }

    /// Dirichlet slots: value and θ-derivative per boundary node.
    pub fn num_dirichlet(&self) -> usize {
        2 * self.n
    }

    /// Expansion of nodal datum `d` at node `(i, k)` into free unknowns
    /// (indices `< num_unknowns`) and Dirichlet slots (indices offset by
    /// `num_unknowns`).
    pub(crate) fn dof_expansion(&self, i: usize, k: usize, d: usize) -> &Expansion {
        &self.expansions[(i * self.n + k) * 4 + d]
    }

    fn compute_expansion(&self, i: usize, k: usize, d: usize) -> Expansion {
        let n = self.n;
        let nu = self.num_unknowns();
        let none = (0, 0.0);
        if i == 0 {
            let theta = self.theta_nodes[k];
            let r = self.curve.radial(theta);
            let (s, c) = theta.sin_cos();
            return match d {
                0 => ([(0, 1.0), none], 1),
                1 => ([(1, r.f * c), (2, r.f * s)], 2),
                2 => ([none, none], 0),
                _ => (
                    [
                        (1, self.h_theta * (r.df * c - r.f * s)),
                        (2, self.h_theta * (r.df * s + r.f * c)),
                    ],
                    2,
                ),
            };
        }
        if i < n {
            return ([(3 + ((i - 1) * n + k) * 4 + d, 1.0), none], 1);
        }
        let base = 3 + 4 * n * (n - 1);
        match d {
            0 => ([(nu + 2 * k, 1.0), none], 1),
            1 => ([(base + 2 * k, 1.0), none], 1),
            2 => ([(nu + 2 * k + 1, 1.0), none], 1),
            _ => ([(base + 2 * k + 1, 1.0), none], 1),
        }
    }

    /// Cell containing mapped point `(ρ, θ)` and local coordinates in `[0, 1]²`.
    pub fn locate(&self, rho: f64, theta: f64) -> (usize, usize, f64, f64) {
        let n = self.n;
        let r = rho.clamp(0.0, 1.0) / self.h_rho;
        let i = (r.floor() as usize).min(n - 1);
        let t = theta.rem_euclid(2.0 * PI) / self.h_theta;
        let k = (t.floor() as usize).min(n - 1);
        (i, k, r - i as f64, (t - k as f64).clamp(0.0, 1.0))
    }

    /// L² norm over the domain of a function given at the quadrature points.
    pub fn l2_norm_of(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.quad.len());
        self.quad
            .iter()
            .zip(values)
            .map(|(q, v)| q.weight * v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// `(∫_D (Q_approx − Q_exact)²)^{1/2}` with the cell quadrature.
    pub fn l2_error(&self, approx: &[f64], exact: impl Fn(f64, f64) -> f64) -> f64 {
        assert_eq!(approx.len(), self.quad.len());
        self.quad
            .iter()
            .zip(approx)
            .map(|(q, a)| {
                let e = a - exact(q.jet.x, q.jet.y);
                q.weight * e * e
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Area of the domain by the cell quadrature.
    pub fn area(&self) -> f64 {
        self.quad.iter().map(|q| q.weight).sum()
    }
}

/// Dirichlet data at the boundary θ nodes: values and θ-derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct Dirichlet {
    pub values: Vec<f64>,
    pub dtheta: Vec<f64>,
}

impl Dirichlet {
    pub fn zero(n: usize) -> Self {
        Dirichlet {
            values: vec![0.0; n],
            dtheta: vec![0.0; n],
        }
    }

    /// Samples `g(θ_k)` and `g'(θ_k)` from a callable returning both.
    pub fn from_fn(grid: &FemGrid, g: impl Fn(f64) -> (f64, f64)) -> Self {
        let (values, dtheta) = grid.theta_nodes.iter().map(|&t| g(t)).unzip();
        Dirichlet { values, dtheta }
    }

    /// Dirichlet data for a physical function with known gradient.
    pub fn from_physical(grid: &FemGrid, g: impl Fn(f64, f64) -> (f64, [f64; 2])) -> Self {
        Self::from_fn(grid, |theta| {
            let jet = grid.curve.map_jet(1.0, theta);
            let (v, grad) = g(jet.x, jet.y);
            (v, grad[0] * jet.x_t + grad[1] * jet.y_t)
        })
    }

    /// Slot values in the layout of [`FemGrid::dof_expansion`], scaled by `h_θ`.
    pub(crate) fn slots(&self, grid: &FemGrid) -> Vec<f64> {
        let mut out = vec![0.0; grid.num_dirichlet()];
        for k in 0..grid.n {
            out[2 * k] = self.values[k];
            out[2 * k + 1] = grid.h_theta * self.dtheta[k];
        }
        out
    }
}
