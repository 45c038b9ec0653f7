//! First and second derivatives of the solution of `Δu = F(x, u)`.
//!
//! Each derivative field `w` solves a linear problem `Δw − F_u w = load` whose
//! Dirichlet data are not known in advance. They are recovered from the
//! boundary values of its antiderivative through the volume potential of
//! `Δ(antiderivative)` and the Dirichlet-to-Neumann map of the harmonic rest.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dtn::{
    build_dtn_system, rotate_to_cartesian, solve_harmonic_conjugate, spectral_tangent_derivative,
    BoundaryField, DtnSystem,
};
use crate::error::{Error, Result};
use crate::fem::{picard_solve, Dirichlet, FemGrid, FemSolution, Operator, PicardOptions};
use crate::geometry::ArcLengthGrid;
use crate::problems::Problem;
pub use crate::source::{SourceJet, SourceModel};
use crate::squad::{qbx_volume_gradient, QbxConfig, SingleLayer, VolumePoint, VolumeQuadrature};

/// Boundary points per FEM ring node.
pub const BOUNDARY_FACTOR: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub qbx: QbxConfig,
    pub picard_eps: f64,
    pub picard_max_iter: usize,
    /// Two-thirds high-mode truncation before differentiating in the second stage.
    pub smooth_spectral: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let p = PicardOptions::default();
        PipelineConfig {
            qbx: QbxConfig::default(),
            picard_eps: p.eps,
            picard_max_iter: p.max_iter,
            smooth_spectral: false,
        }
    }
}

impl PipelineConfig {
    pub fn picard(&self) -> PicardOptions {
        PicardOptions {
            eps: self.picard_eps,
            max_iter: self.picard_max_iter,
            ..Default::default()
        }
    }
}

/// Wall-clock seconds per stage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub fem: f64,
    pub qbx: f64,
    pub dtn: f64,
    pub total: f64,
}

fn timed<T>(acc: &mut f64, f: impl FnOnce() -> T) -> T {
    let t = Instant::now();
    let out = f();
    *acc += t.elapsed().as_secs_f64();
    out
}

/// Boundary gradient of a field together with its normal and tangential parts.
#[derive(Clone, Debug)]
pub struct BoundaryGradient {
    pub x: BoundaryField,
    pub y: BoundaryField,
    pub normal: BoundaryField,
    pub tangential: BoundaryField,
}

/// Reusable boundary operators for one arc-length grid.
pub struct BoundaryContext {
    pub grid: Arc<ArcLengthGrid>,
    pub vq: VolumeQuadrature,
    pub single_layer: SingleLayer,
    pub dtn: DtnSystem,
    pub cfg: QbxConfig,
}

impl BoundaryContext {
    pub fn new(fem: Arc<FemGrid>, cfg: &QbxConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = Arc::new(fem.curve.arc_length_grid(BOUNDARY_FACTOR * fem.n)?);
        Ok(BoundaryContext {
            vq: VolumeQuadrature::new(fem),
            single_layer: SingleLayer::new(grid.clone(), cfg)?,
            dtn: build_dtn_system(grid.clone()),
            grid,
            cfg: *cfg,
        })
    }

    /// Boundary gradient of `w` from its boundary values and `Δw = density`.
    ///
    /// `w = w^p + w^h` with `w^p` the volume potential. The conjugate of `w^h`
    /// solves `(½I + β + Δs²) U = −S[w_t − w^p_t]`, and `w_n = U_t + w^p_n`.
    pub fn gradient(
        &self,
        density: &(dyn Fn(&VolumePoint) -> f64 + Sync),
        values: &BoundaryField,
        smooth: bool,
        t: &mut Timings,
    ) -> Result<BoundaryGradient> {
        if !values.grid.same_as(&self.grid) {
            return Err(Error::GridMismatch);
        }
        let g = &self.grid;
        let grad_p = timed(&mut t.qbx, || {
            qbx_volume_gradient(&self.vq, density, g, &self.cfg)
        })?;
        let (up_n, up_t): (Vec<f64>, Vec<f64>) = (0..g.len())
            .map(|j| {
                let (n, tt, d) = (g.normals[j], g.tangents[j], grad_p[j]);
                (d[0] * n[0] + d[1] * n[1], d[0] * tt[0] + d[1] * tt[1])
            })
            .unzip();
        let w_t = timed(&mut t.dtn, || {
            let v = if smooth {
                values.smoothed()
            } else {
                values.clone()
            };
            spectral_tangent_derivative(&v)
        });
        let jump: Vec<f64> = w_t.values.iter().zip(&up_t).map(|(a, b)| a - b).collect();
        let s = timed(&mut t.qbx, || self.single_layer.apply(&jump))?;
        let gamma = BoundaryField::new(g.clone(), s.into_iter().map(|v| -v).collect())?;
        let (normal, (x, y)) = timed(&mut t.dtn, || -> Result<_> {
            let uh = solve_harmonic_conjugate(&self.dtn, &gamma)?;
            let mut un = spectral_tangent_derivative(&uh);
            for (a, b) in un.values.iter_mut().zip(&up_n) {
                *a += b;
            }
            let xy = rotate_to_cartesian(&un, &w_t)?;
            Ok((un, xy))
        })?;
        Ok(BoundaryGradient {
            x,
            y,
            normal,
            tangential: w_t,
        })
    }
}

/// Dirichlet data at the FEM ring nodes from a field sampled in arc length.
pub fn dirichlet_from_boundary(grid: &FemGrid, field: &BoundaryField) -> Dirichlet {
    let interp = field.interpolant();
    let s = grid.curve.arc_positions(&grid.theta_nodes);
    let (values, dtheta) = grid
        .theta_nodes
        .iter()
        .zip(&s)
        .map(|(&theta, &sk)| {
            let (v, d) = interp.eval_with_derivative(sk);
            (v, d * grid.curve.speed(theta))
        })
        .unzip();
    Dirichlet { values, dtheta }
}

/// Derivative fields of `u` with the boundary data used to compute them.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DerivativeSet {
    pub u: FemSolution,
    pub u_x: FemSolution,
    pub u_y: FemSolution,
    pub u_xx: FemSolution,
    pub u_xy: FemSolution,
    /// `F(x, u) − u_xx` at the FEM quadrature points.
    pub u_yy: Vec<f64>,
    pub boundary: BoundarySamples,
    pub picard_iterations: usize,
    pub timings: Timings,
}

/// Boundary derivative samples on the `8N`-point arc-length grid.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundarySamples {
    pub m: usize,
    pub u_x: Vec<f64>,
    pub u_y: Vec<f64>,
    pub u_xx: Vec<f64>,
    pub u_xy: Vec<f64>,
}

impl DerivativeSet {
    /// `u_yy = F(x, u) − u_xx` at a logical point.
    pub fn u_yy_at(&self, source: &dyn SourceModel, rho: f64, theta: f64) -> f64 {
        let u = self.u.eval(rho, theta).value;
        let p = self.u.grid.curve.map_point(rho, theta);
        source.eval(p[0], p[1], u).f - self.u_xx.eval(rho, theta).value
    }
}

/// Values of `sol` at the volume quadrature point.
fn value_at(sol: &FemSolution, p: &VolumePoint) -> f64 {
    sol.eval_logical(p.rho, p.theta)[0]
}

/// Boundary `u_x, u_y` for a solved `u` with Dirichlet data `u|∂D = g`.
pub fn first_derivative_boundary_data(
    ctx: &BoundaryContext,
    u: &FemSolution,
    g: &BoundaryField,
    src: &dyn SourceModel,
    t: &mut Timings,
) -> Result<BoundaryGradient> {
    let density = |p: &VolumePoint| src.eval(p.x, p.y, value_at(u, p)).f;
    ctx.gradient(&density, g, false, t)
}

/// Boundary `u_xx, u_xy` from the boundary `u_x` and the solved `u`, `u_x`.
pub fn second_derivative_boundary_data(
    ctx: &BoundaryContext,
    u: &FemSolution,
    u_x: &FemSolution,
    u_x_boundary: &BoundaryField,
    src: &dyn SourceModel,
    smooth: bool,
    t: &mut Timings,
) -> Result<BoundaryGradient> {
    let density = |p: &VolumePoint| {
        let s = src.eval(p.x, p.y, value_at(u, p));
        s.f_x + s.f_u * value_at(u_x, p)
    };
    ctx.gradient(&density, u_x_boundary, smooth, t)
}

/// Source jets at the FEM quadrature points for the solved `u`.
fn jets_at_quadrature(u: &FemSolution, src: &dyn SourceModel) -> Vec<SourceJet> {
    u.grid
        .quad
        .iter()
        .zip(u.values_at_quadrature())
        .map(|(q, v)| src.eval(q.jet.x, q.jet.y, v))
        .collect()
}

/// Operator `Δ − F_u(x, u)` shared by all derivative solves.
pub fn derivative_operator(u: &FemSolution, jets: &[SourceJet]) -> Result<Operator> {
    let c: Vec<f64> = jets.iter().map(|s| s.f_u).collect();
    Operator::new(u.grid.clone(), &c)
}

/// `Δu_x − F_u u_x = F_x` and `Δu_y − F_u u_y = F_y`.
pub fn solve_first_derivatives(
    op: &Operator,
    jets: &[SourceJet],
    bdata: &BoundaryGradient,
) -> Result<(FemSolution, FemSolution)> {
    let grid = &op.grid;
    let fx: Vec<f64> = jets.iter().map(|s| s.first_x()).collect();
    let fy: Vec<f64> = jets.iter().map(|s| s.first_y()).collect();
    let ux = op.solve(&fx, &dirichlet_from_boundary(grid, &bdata.x))?;
    let uy = op.solve(&fy, &dirichlet_from_boundary(grid, &bdata.y))?;
    Ok((ux, uy))
}

/// `u_xx`, `u_xy` by FEM and `u_yy = F − u_xx` at the quadrature points.
pub fn solve_second_derivatives(
    op: &Operator,
    jets: &[SourceJet],
    u_x: &FemSolution,
    u_y: &FemSolution,
    bdata: &BoundaryGradient,
) -> Result<(FemSolution, FemSolution, Vec<f64>)> {
    let grid = &op.grid;
    let (ux, uy) = (u_x.values_at_quadrature(), u_y.values_at_quadrature());
    let gxx: Vec<f64> = jets.iter().zip(&ux).map(|(s, &a)| s.second_xx(a)).collect();
    let gxy: Vec<f64> = jets
        .iter()
        .zip(ux.iter().zip(&uy))
        .map(|(s, (&a, &b))| s.second_xy(a, b))
        .collect();
    let uxx = op.solve(&gxx, &dirichlet_from_boundary(grid, &bdata.x))?;
    let uxy = op.solve(&gxy, &dirichlet_from_boundary(grid, &bdata.y))?;
    let uyy = jets
        .iter()
        .zip(uxx.values_at_quadrature())
        .map(|(s, v)| s.f - v)
        .collect();
    Ok((uxx, uxy, uyy))
}

/// Picard solve for `u`, then both derivative stages.
pub fn run_full(problem: &Problem, n: usize, cfg: &PipelineConfig) -> Result<DerivativeSet> {
    let start = Instant::now();
    let mut t = Timings::default();
    let grid = Arc::new(FemGrid::new(problem.curve.clone(), n));
    let src = problem.source.as_ref();

    let dirichlet = Dirichlet {
        values: vec![problem.boundary_value; n],
        dtheta: vec![0.0; n],
    };
    let outcome = timed(&mut t.fem, || {
        picard_solve(&grid, src, None, &dirichlet, cfg.picard())
    })?;
    let u = outcome.solution;

    let ctx = timed(&mut t.dtn, || BoundaryContext::new(grid.clone(), &cfg.qbx))?;
    let g = BoundaryField::new(
        ctx.grid.clone(),
        vec![problem.boundary_value; ctx.grid.len()],
    )?;
    let first = first_derivative_boundary_data(&ctx, &u, &g, src, &mut t)?;

    let (jets, op) = timed(&mut t.fem, || -> Result<_> {
        let jets = jets_at_quadrature(&u, src);
        let op = derivative_operator(&u, &jets)?;
        Ok((jets, op))
    })?;
    let (u_x, u_y) = timed(&mut t.fem, || solve_first_derivatives(&op, &jets, &first))?;

    let second = second_derivative_boundary_data(
        &ctx,
        &u,
        &u_x,
        &first.x,
        src,
        cfg.smooth_spectral,
        &mut t,
    )?;
    let (u_xx, u_xy, u_yy) = timed(&mut t.fem, || {
        solve_second_derivatives(&op, &jets, &u_x, &u_y, &second)
    })?;

    t.total = start.elapsed().as_secs_f64();
    Ok(DerivativeSet {
        boundary: BoundarySamples {
            m: ctx.grid.len(),
            u_x: first.x.values,
            u_y: first.y.values,
            u_xx: second.x.values,
            u_xy: second.y.values,
        },
        u,
        u_x,
        u_y,
        u_xx,
        u_xy,
        u_yy,
        picard_iterations: outcome.iterations,
        timings: t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::FieldJet;
    use crate::geometry::BoundaryCurve;
    use crate::problems::{CustomSpec, ProblemKind};
    use crate::source::{ConstantSource, PolynomialSource};

    fn disk_problem(source: Arc<dyn SourceModel>, value: f64) -> Problem {
        Problem {
            name: "disk".into(),
            kind: ProblemKind::Custom,
            curve: Arc::new(BoundaryCurve::circle([0.0, 0.0], 1.0).unwrap()),
            source,
            exact: None,
            boundary_value: value,
        }
    }

    #[test]
    fn zero_problem_gives_zero_fields() {
        let p = disk_problem(Arc::new(ConstantSource(0.0)), 0.0);
        let d = run_full(&p, 8, &PipelineConfig::default()).unwrap();
        for f in [&d.u_x, &d.u_y, &d.u_xx, &d.u_xy] {
            assert!(f.dofs.iter().all(|v| v.abs() < 1e-14));
        }
        assert!(d
            .boundary
            .u_x
            .iter()
            .chain(&d.boundary.u_xy)
            .all(|v| v.abs() < 1e-14));
        assert!(d.u_yy.iter().all(|v| v.abs() < 1e-14));
    }

    /// `u = (x² + y² − 1)/4 + const` solves `Δu = 1` with constant boundary value.
    #[test]
    fn paraboloid_on_disk() {
        let p = disk_problem(Arc::new(ConstantSource(1.0)), 0.3);
        let d = run_full(&p, 16, &PipelineConfig::default()).unwrap();
        for (j, t) in
            (0..d.boundary.m).map(|j| (j, std::f64::consts::TAU * j as f64 / d.boundary.m as f64))
        {
            assert!((d.boundary.u_x[j] - t.cos() / 2.0).abs() < 1e-9);
            assert!((d.boundary.u_y[j] - t.sin() / 2.0).abs() < 1e-9);
        }
        // x = ρ cos θ is not in the bicubic space, so u_x carries the h⁴ FEM error
        assert!(d.u_x.l2_error(|x, _| x / 2.0) < 5e-5);
        assert!(d.u_y.l2_error(|_, y| y / 2.0) < 5e-5);
        assert!(d.u_xx.l2_error(|_, _| 0.5) < 1e-9);
        assert!(d.u_xy.l2_error(|_, _| 0.0) < 1e-9);
        assert!(d.u_yy.iter().all(|v| (v - 0.5).abs() < 1e-8));
    }

    /// Linear `u = 2x − y + 1`, harmonic, with Dirichlet data supplied explicitly.
    #[test]
    fn linear_solution_has_zero_second_derivatives() {
        let grid = Arc::new(FemGrid::new(
            Arc::new(BoundaryCurve::circle([0.0, 0.0], 1.0).unwrap()),
            16,
        ));
        let mut t = Timings::default();
        let ctx = BoundaryContext::new(grid.clone(), &QbxConfig::default()).unwrap();
        let f = |x: f64, y: f64| FieldJet {
            value: 2.0 * x - y + 1.0,
            grad: [2.0, -1.0],
            hess: [0.0; 3],
        };
        let u = FemSolution::interpolate(grid.clone(), f);
        let src = ConstantSource(0.0);
        let g = BoundaryField::from_fn(ctx.grid.clone(), |x, y| f(x, y).value);
        let first = first_derivative_boundary_data(&ctx, &u, &g, &src, &mut t).unwrap();
        assert!(first.x.values.iter().all(|v| (v - 2.0).abs() < 1e-9));
        assert!(first.y.values.iter().all(|v| (v + 1.0).abs() < 1e-9));
        let jets = jets_at_quadrature(&u, &src);
        let op = derivative_operator(&u, &jets).unwrap();
        let (ux, uy) = solve_first_derivatives(&op, &jets, &first).unwrap();
        let second =
            second_derivative_boundary_data(&ctx, &u, &ux, &first.x, &src, false, &mut t).unwrap();
        assert!(second.x.max_abs() < 1e-9 && second.y.max_abs() < 1e-9);
        let (uxx, uxy, uyy) = solve_second_derivatives(&op, &jets, &ux, &uy, &second).unwrap();
        assert!(uxx.dofs.iter().chain(&uxy.dofs).all(|v| v.abs() < 1e-9));
        assert!(uyy.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn frame_identities_hold_on_boundary() {
        let p = disk_problem(
            Arc::new(PolynomialSource {
                terms: serde_json::from_str(r#"[{"coef": 1.0, "px": 1}, {"coef": 2.0}]"#).unwrap(),
            }),
            0.0,
        );
        let grid = Arc::new(FemGrid::new(p.curve.clone(), 8));
        let mut t = Timings::default();
        let ctx = BoundaryContext::new(grid.clone(), &QbxConfig::default()).unwrap();
        let u = picard_solve(
            &grid,
            p.source.as_ref(),
            None,
            &Dirichlet::zero(8),
            PicardOptions::default(),
        )
        .unwrap()
        .solution;
        let b = first_derivative_boundary_data(
            &ctx,
            &u,
            &BoundaryField::zeros(ctx.grid.clone()),
            p.source.as_ref(),
            &mut t,
        )
        .unwrap();
        for j in 0..ctx.grid.len() {
            let (n, tt) = (ctx.grid.normals[j], ctx.grid.tangents[j]);
            let un = b.x.values[j] * n[0] + b.y.values[j] * n[1];
            let ut = b.x.values[j] * tt[0] + b.y.values[j] * tt[1];
            assert!((un - b.normal.values[j]).abs() < 1e-13);
            assert!((ut - b.tangential.values[j]).abs() < 1e-13);
        }
    }

    #[test]
    fn homogeneous_shortcut_matches_general_path() {
        let p = disk_problem(Arc::new(ConstantSource(1.0)), 0.0);
        let grid = Arc::new(FemGrid::new(p.curve.clone(), 8));
        let ctx = BoundaryContext::new(grid.clone(), &QbxConfig::default()).unwrap();
        let u = picard_solve(
            &grid,
            p.source.as_ref(),
            None,
            &Dirichlet::zero(8),
            PicardOptions::default(),
        )
        .unwrap()
        .solution;
        let mut t = Timings::default();
        let zero = BoundaryField::zeros(ctx.grid.clone());
        let shifted = BoundaryField::new(ctx.grid.clone(), vec![0.7; ctx.grid.len()]).unwrap();
        let a = first_derivative_boundary_data(&ctx, &u, &zero, p.source.as_ref(), &mut t).unwrap();
        let b =
            first_derivative_boundary_data(&ctx, &u, &shifted, p.source.as_ref(), &mut t).unwrap();
        for (x, y) in a.x.values.iter().zip(&b.x.values) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn dirichlet_transfer_reproduces_smooth_data() {
        let curve = Arc::new(
            BoundaryCurve::from_level_set(
                |x, y| (x / 2.0).powi(2) + y * y - 1.0,
                [0.0, 0.0],
                32,
                4.0,
            )
            .unwrap(),
        );
        let grid = FemGrid::new(curve.clone(), 16);
        let arc = Arc::new(curve.arc_length_grid(256).unwrap());
        let f = BoundaryField::from_fn(arc, |x, y| (0.5 * x).sin() * y.exp());
        let d = dirichlet_from_boundary(&grid, &f);
        let want = Dirichlet::from_physical(&grid, |x, y| {
            (
                (0.5 * x).sin() * y.exp(),
                [0.5 * (0.5 * x).cos() * y.exp(), (0.5 * x).sin() * y.exp()],
            )
        });
        for k in 0..16 {
            assert!((d.values[k] - want.values[k]).abs() < 1e-10);
            assert!((d.dtheta[k] - want.dtheta[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn custom_problem_runs_and_serializes() {
        let spec: CustomSpec = serde_json::from_str(
            r#"{"center": [0.1, 0.0], "boundary": {"kind": "fourier", "cos": [1.0, 0.0, 0.15], "sin": [0.0, 0.0, 0.0]},
                "source": {"kind": "polynomial", "terms": [{"coef": 1.0}, {"coef": 0.5, "px": 1, "pu": 1}]}}"#,
        )
        .unwrap();
        let d = run_full(&spec.build().unwrap(), 8, &PipelineConfig::default()).unwrap();
        let json = serde_json::to_string(&d).unwrap();
        let back: DerivativeSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back.u_xx.dofs, d.u_xx.dofs);
        assert_eq!(back.u_yy, d.u_yy);
        assert_eq!(back.boundary, d.boundary);
    }
}
