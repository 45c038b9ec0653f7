//! Quadrature by expansion for the volume potential of `F` and for the
//! boundary single-layer potential, evaluated on the boundary.
//!
//! Both potentials use the kernel `G(x, x') = log|x − x'| / 2π`. For a target
//! `z` on the boundary with center `c` placed outside the domain, with
//! `M_k = ∫ σ (z' − c)^{−k}`,
//!
//! ```text
//! u(z)          ≈ (1/2π) [ ∫ σ log|z' − c| − Re Σ_{k=1}^{p+1} (z − c)^k M_k / k ]
//! u_x − i u_y   ≈ −(1/2π) Σ_{j=0}^{p} (z − c)^j M_{j+1}
//! ```
//!
//! Volume moments are summed directly over a smooth quadrature. Cells close
//! to a center are refined adaptively so the nearly singular moments stay
//! accurate.

use std::f64::consts::PI;
use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::FemGrid;
use crate::geometry::ArcLengthGrid;
use crate::quadrature::GaussRule;
use crate::spectral;

/// Cells at least this many bounding radii from a center use the base rule.
const FAR_RATIO: f64 = 12.0;
/// Cells between this and `FAR_RATIO` radii use an 8×8 rule.
const MID_RATIO: f64 = 3.5;
/// Refined sub-cells are accepted once this many radii away.
const LEAF_RATIO: f64 = 3.5;
const MAX_DEPTH: usize = 14;
/// Oversampling of boundary densities for single-layer moments.
const UPSAMPLE: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QbxConfig {
    /// Expansion order.
    pub p: usize,
    /// Center distance in units of the boundary spacing `Δs`.
    pub r_factor: f64,
}

impl Default for QbxConfig {
    fn default() -> Self {
        QbxConfig {
            p: 8,
            r_factor: 2.0,
        }
    }
}

impl QbxConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p < 2 || !(self.r_factor > 0.0) {
            return Err(Error::Config(format!(
                "QBX needs p >= 2 and r_factor > 0, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// A point of a volume rule, in both coordinate systems.
#[derive(Clone, Copy, Debug)]
pub struct VolumePoint {
    pub rho: f64,
    pub theta: f64,
    pub x: f64,
    pub y: f64,
}

/// Densities are evaluated lazily so refined rules can sample them anywhere.
pub type Density<'a> = dyn Fn(&VolumePoint) -> f64 + Sync + 'a;

#[derive(Clone, Copy, Debug)]
struct CellBox {
    rho0: f64,
    rho1: f64,
    th0: f64,
    th1: f64,
    center: Complex64,
    radius: f64,
}

/// Smooth volume rule over the mapped grid: 4×4 Gauss points on interior
/// cells and 8×8 on the outermost ring.
pub struct VolumeQuadrature {
    pub grid: Arc<FemGrid>,
    pub points: Vec<VolumePoint>,
    pub weights: Vec<f64>,
    /// Node range of each cell in `points`.
    ranges: Vec<(usize, usize)>,
    cells: Vec<CellBox>,
    g8: (Vec<f64>, Vec<f64>),
}

fn cell_box(grid: &FemGrid, rho0: f64, rho1: f64, th0: f64, th1: f64) -> CellBox {
    let mid = grid.curve.map_point(0.5 * (rho0 + rho1), 0.5 * (th0 + th1));
    let center = Complex64::new(mid[0], mid[1]);
    let mut radius: f64 = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            let rho = rho0 + 0.5 * a as f64 * (rho1 - rho0);
            let th = th0 + 0.5 * b as f64 * (th1 - th0);
            let p = grid.curve.map_point(rho, th);
            radius = radius.max((Complex64::new(p[0], p[1]) - center).norm());
        }
    }
    // margin for the bulge of curved edges
    CellBox {
        rho0,
        rho1,
        th0,
        th1,
        center,
        radius: 1.1 * radius,
    }
}

/// Tensor Gauss rule on a `(ρ, θ)` box, weights include the map Jacobian.
fn box_rule(
    grid: &FemGrid,
    b: &CellBox,
    rule: &(Vec<f64>, Vec<f64>),
    out_p: &mut Vec<VolumePoint>,
    out_w: &mut Vec<f64>,
) {
    let (x, w) = rule;
    let (dr, dt) = (b.rho1 - b.rho0, b.th1 - b.th0);
    for (xi, wi) in x.iter().zip(w) {
        let rho = b.rho0 + xi * dr;
        for (xj, wj) in x.iter().zip(w) {
            let theta = b.th0 + xj * dt;
            let jet = grid.curve.map_jet(rho, theta);
            out_p.push(VolumePoint {
                rho,
                theta,
                x: jet.x,
                y: jet.y,
            });
            out_w.push(wi * wj * dr * dt * jet.det());
        }
    }
}

impl VolumeQuadrature {
    pub fn new(grid: Arc<FemGrid>) -> Self {
        let n = grid.n;
        let g4 = GaussRule::new(4).unit();
        let g8 = GaussRule::new(8).unit();
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut ranges = Vec::with_capacity(n * n);
        let mut cells = Vec::with_capacity(n * n);
        for i in 0..n {
            for k in 0..n {
                let b = cell_box(
                    &grid,
                    grid.rho_nodes[i],
                    grid.rho_nodes[i + 1],
                    k as f64 * grid.h_theta,
                    (k + 1) as f64 * grid.h_theta,
                );
                let start = points.len();
                let rule = if i + 1 == n { &g8 } else { &g4 };
                box_rule(&grid, &b, rule, &mut points, &mut weights);
                ranges.push((start, points.len()));
                cells.push(b);
            }
        }
        VolumeQuadrature {
            grid,
            points,
            weights,
            ranges,
            cells,
            g8,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Integral of a function over the domain with the base rule.
    pub fn integrate(&self, f: impl Fn(&VolumePoint) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p))
            .sum()
    }

    pub fn area(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Expansion centers and targets on the boundary.
#[derive(Clone, Debug)]
pub struct Targets {
    pub points: Vec<Complex64>,
    pub centers: Vec<Complex64>,
}

impl Targets {
    /// Centers `x_j − r n_j` with `r = r_factor·Δs`, outside the domain.
    pub fn exterior(grid: &ArcLengthGrid, cfg: &QbxConfig) -> Result<Self> {
        cfg.validate()?;
        let r = cfg.r_factor * grid.ds;
        let mut points = Vec::with_capacity(grid.len());
        let mut centers = Vec::with_capacity(grid.len());
        for j in 0..grid.len() {
            let (p, n) = (grid.points[j], grid.normals[j]);
            let c = [p[0] - r * n[0], p[1] - r * n[1]];
            if grid.curve.to_mapped(c).0 <= 1.0 {
                return Err(Error::CenterInside { target: j });
            }
            points.push(Complex64::new(p[0], p[1]));
            centers.push(Complex64::new(c[0], c[1]));
        }
        Ok(Targets { points, centers })
    }
}

/// Moments about one center: `m[0] = ∫ σ log|z' − c|` (when requested) and
/// `m[k] = ∫ σ (z' − c)^{−k}` for `k = 1..=p+1`.
#[derive(Clone, Debug)]
pub struct Moments {
    pub log: f64,
    pub m: Vec<Complex64>,
}

#[inline]
fn accumulate(mom: &mut Moments, c: Complex64, x: f64, y: f64, wd: f64, with_log: bool) {
    let dz = Complex64::new(x, y) - c;
    let inv = dz.inv();
    let mut pw = Complex64::new(wd, 0.0);
    for m in mom.m.iter_mut().skip(1) {
        pw *= inv;
        *m += pw;
    }
    if with_log {
        mom.log += wd * 0.5 * dz.norm_sqr().ln();
    }
}

/// Mid-range 8×8 rule per cell with density values, built on demand.
struct MidRule {
    xs: Vec<f64>,
    ys: Vec<f64>,
    wd: Vec<f64>,
}

/// Volume moments about every center for the density `σ`.
pub fn volume_moments(
    vq: &VolumeQuadrature,
    density: &Density<'_>,
    centers: &[Complex64],
    p: usize,
    with_log: bool,
) -> Vec<Moments> {
    let grid = &vq.grid;
    let base_wd: Vec<f64> = vq
        .points
        .iter()
        .zip(&vq.weights)
        .map(|(pt, w)| w * density(pt))
        .collect();

    // cells needing the finer rule for some center
    let mut needs_mid = vec![false; vq.cells.len()];
    for c in centers {
        for (ci, cell) in vq.cells.iter().enumerate() {
            let ratio = (cell.center - c).norm() / cell.radius;
            if ratio < FAR_RATIO {
                needs_mid[ci] = true;
            }
        }
    }
    let mids: Vec<Option<MidRule>> = vq
        .cells
        .par_iter()
        .zip(needs_mid.par_iter())
        .map(|(cell, &need)| {
            if !need {
                return None;
            }
            let (mut pts, mut ws) = (Vec::new(), Vec::new());
            box_rule(grid, cell, &vq.g8, &mut pts, &mut ws);
            Some(MidRule {
                xs: pts.iter().map(|p| p.x).collect(),
                ys: pts.iter().map(|p| p.y).collect(),
                wd: pts.iter().zip(&ws).map(|(p, w)| w * density(p)).collect(),
            })
        })
        .collect();

    centers
        .par_iter()
        .map(|&c| {
            let mut mom = Moments {
                log: 0.0,
                m: vec![Complex64::new(0.0, 0.0); p + 2],
            };
            for (ci, cell) in vq.cells.iter().enumerate() {
                let ratio = (cell.center - c).norm() / cell.radius;
                if ratio >= FAR_RATIO {
                    let (s, e) = vq.ranges[ci];
                    for j in s..e {
                        let pt = &vq.points[j];
                        accumulate(&mut mom, c, pt.x, pt.y, base_wd[j], with_log);
                    }
                } else if ratio >= MID_RATIO {
                    let mr = mids[ci].as_ref().expect("mid rule prepared");
                    for j in 0..mr.wd.len() {
                        accumulate(&mut mom, c, mr.xs[j], mr.ys[j], mr.wd[j], with_log);
                    }
                } else {
                    refine(grid, cell, c, &vq.g8, density, &mut mom, with_log, 0);
                }
            }
            mom
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn refine(
    grid: &FemGrid,
    b: &CellBox,
    c: Complex64,
    g8: &(Vec<f64>, Vec<f64>),
    density: &Density<'_>,
    mom: &mut Moments,
    with_log: bool,
    depth: usize,
) {
    let ratio = (b.center - c).norm() / b.radius;
    if ratio >= LEAF_RATIO || depth >= MAX_DEPTH {
        let (mut pts, mut ws) = (Vec::with_capacity(64), Vec::with_capacity(64));
        box_rule(grid, b, g8, &mut pts, &mut ws);
        for (pt, w) in pts.iter().zip(&ws) {
            accumulate(mom, c, pt.x, pt.y, w * density(pt), with_log);
        }
        return;
    }
    let rm = 0.5 * (b.rho0 + b.rho1);
    let tm = 0.5 * (b.th0 + b.th1);
    for (r0, r1) in [(b.rho0, rm), (rm, b.rho1)] {
        for (t0, t1) in [(b.th0, tm), (tm, b.th1)] {
            let child = cell_box(grid, r0, r1, t0, t1);
            refine(grid, &child, c, g8, density, mom, with_log, depth + 1);
        }
    }
}

fn gradient_from(mom: &Moments, z: Complex64, c: Complex64, p: usize) -> [f64; 2] {
    let d = z - c;
    let mut pw = Complex64::new(1.0, 0.0);
    let mut w = Complex64::new(0.0, 0.0);
    for j in 0..=p {
        w += pw * mom.m[j + 1];
        pw *= d;
    }
    w *= -1.0 / (2.0 * PI);
    [w.re, -w.im]
}

fn value_from(mom: &Moments, z: Complex64, c: Complex64, p: usize) -> f64 {
    let d = z - c;
    let mut pw = Complex64::new(1.0, 0.0);
    let mut s = 0.0;
    for k in 1..=p + 1 {
        pw *= d;
        s += (pw * mom.m[k]).re / k as f64;
    }
    (mom.log - s) / (2.0 * PI)
}

/// `∇u^p` at the boundary grid points for `u^p = ∫ G σ`.
pub fn qbx_volume_gradient(
    vq: &VolumeQuadrature,
    density: &Density<'_>,
    targets: &ArcLengthGrid,
    cfg: &QbxConfig,
) -> Result<Vec<[f64; 2]>> {
    let t = Targets::exterior(targets, cfg)?;
    let moms = volume_moments(vq, density, &t.centers, cfg.p, false);
    Ok(moms
        .iter()
        .enumerate()
        .map(|(j, m)| gradient_from(m, t.points[j], t.centers[j], cfg.p))
        .collect())
}

/// `u^p` at the boundary grid points.
pub fn qbx_volume_value(
    vq: &VolumeQuadrature,
    density: &Density<'_>,
    targets: &ArcLengthGrid,
    cfg: &QbxConfig,
) -> Result<Vec<f64>> {
    let t = Targets::exterior(targets, cfg)?;
    let moms = volume_moments(vq, density, &t.centers, cfg.p, true);
    Ok(moms
        .iter()
        .enumerate()
        .map(|(j, m)| value_from(m, t.points[j], t.centers[j], cfg.p))
        .collect())
}

/// Value and gradient of `u^p` from one set of moments.
pub fn qbx_volume_value_and_gradient(
    vq: &VolumeQuadrature,
    density: &Density<'_>,
    targets: &ArcLengthGrid,
    cfg: &QbxConfig,
) -> Result<(Vec<f64>, Vec<[f64; 2]>)> {
    let t = Targets::exterior(targets, cfg)?;
    let moms = volume_moments(vq, density, &t.centers, cfg.p, true);
    let vals = moms
        .iter()
        .enumerate()
        .map(|(j, m)| value_from(m, t.points[j], t.centers[j], cfg.p))
        .collect();
    let grads = moms
        .iter()
        .enumerate()
        .map(|(j, m)| gradient_from(m, t.points[j], t.centers[j], cfg.p))
        .collect();
    Ok((vals, grads))
}

/// Single-layer operator `σ ↦ ∫ G σ dl'` on an arc-length grid, evaluated at
/// the grid points by QBX with trapezoidal moments on an oversampled grid.
pub struct SingleLayer {
    pub grid: Arc<ArcLengthGrid>,
    fine: ArcLengthGrid,
    targets: Targets,
    cfg: QbxConfig,
}

impl SingleLayer {
    pub fn new(grid: Arc<ArcLengthGrid>, cfg: &QbxConfig) -> Result<Self> {
        let targets = Targets::exterior(&grid, cfg)?;
        let fine = grid.refined(UPSAMPLE)?;
        Ok(SingleLayer {
            grid,
            fine,
            targets,
            cfg: *cfg,
        })
    }

    /// Expansion weights `Q[j][f]` mapping fine-grid density to the value at target `j`.
    fn row(&self, j: usize, out: &mut [f64]) {
        let (z, c) = (self.targets.points[j], self.targets.centers[j]);
        let d = z - c;
        let p = self.cfg.p;
        let h = self.fine.ds;
        for (f, o) in out.iter_mut().enumerate() {
            let q = self.fine.points[f];
            let dz = Complex64::new(q[0], q[1]) - c;
            let ratio = d / dz;
            let mut pw = Complex64::new(1.0, 0.0);
            let mut s = 0.0;
            for k in 1..=p + 1 {
                pw *= ratio;
                s += pw.re / k as f64;
            }
            *o = h * (0.5 * dz.norm_sqr().ln() - s) / (2.0 * PI);
        }
    }

    pub fn apply(&self, density: &[f64]) -> Result<Vec<f64>> {
        if density.len() != self.grid.len() {
            return Err(Error::GridMismatch);
        }
        let fine = spectral::upsample(density, UPSAMPLE);
        let nf = fine.len();
        Ok((0..self.grid.len())
            .into_par_iter()
            .map(|j| {
                let mut row = vec![0.0; nf];
                self.row(j, &mut row);
                row.iter().zip(&fine).map(|(a, b)| a * b).sum()
            })
            .collect())
    }

    /// Dense `M × M` matrix of the discretized operator on the coarse grid.
    pub fn matrix(&self) -> Mat<f64> {
        let m = self.grid.len();
        let nf = self.fine.len();
        let mut q = Mat::<f64>::zeros(m, nf);
        let mut row = vec![0.0; nf];
        for j in 0..m {
            self.row(j, &mut row);
            for f in 0..nf {
                q[(j, f)] = row[f];
            }
        }
        let mut up = Mat::<f64>::zeros(nf, m);
        let mut e = vec![0.0; m];
        for col in 0..m {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[col] = 1.0;
            for (f, v) in spectral::upsample(&e, UPSAMPLE).into_iter().enumerate() {
                up[(f, col)] = v;
            }
        }
        &q * &up
    }
}

/// `∫ G σ dl'` at the grid points.
pub fn qbx_single_layer(
    grid: &Arc<ArcLengthGrid>,
    density: &[f64],
    cfg: &QbxConfig,
) -> Result<Vec<f64>> {
    SingleLayer::new(grid.clone(), cfg)?.apply(density)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundaryCurve;

    fn disk(radius: f64, n: usize) -> (VolumeQuadrature, Arc<ArcLengthGrid>) {
        let curve = Arc::new(BoundaryCurve::circle([0.0, 0.0], radius).unwrap());
        let grid = Arc::new(FemGrid::new(curve.clone(), n));
        let bg = Arc::new(curve.arc_length_grid(8 * n).unwrap());
        (VolumeQuadrature::new(grid), bg)
    }

    #[test]
    fn volume_rule_moments() {
        let (vq, _) = disk(1.0, 32);
        assert!((vq.area() - PI).abs() < 1e-8);
        assert!(vq.integrate(|p| p.x).abs() < 1e-10);
        assert!((vq.integrate(|p| p.x * p.x) - PI / 4.0).abs() < 1e-8);
    }

    #[test]
    fn unit_density_gradient_on_disk() {
        let (vq, bg) = disk(1.0, 32);
        let g = qbx_volume_gradient(&vq, &|_| 1.0, &bg, &QbxConfig::default()).unwrap();
        // target 0 is (1, 0)
        assert!(
            (g[0][0] - 0.5).abs() < 1e-6 && g[0][1].abs() < 1e-6,
            "{:?}",
            g[0]
        );
        let worst = g
            .iter()
            .zip(&bg.points)
            .map(|(g, p)| (g[0] - 0.5 * p[0]).abs().max((g[1] - 0.5 * p[1]).abs()))
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn scaled_density_gradient_at_n64() {
        let (vq, bg) = disk(1.0, 64);
        let cfg = QbxConfig {
            p: 6,
            r_factor: 4.0,
        };
        let g = qbx_volume_gradient(&vq, &|_| 4.0, &bg, &cfg).unwrap();
        for (g, p) in g.iter().zip(&bg.points) {
            assert!((g[0] - 2.0 * p[0]).abs() < 1e-6 && (g[1] - 2.0 * p[1]).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_density_gives_zero() {
        let (vq, bg) = disk(1.0, 8);
        let g = qbx_volume_gradient(&vq, &|_| 0.0, &bg, &QbxConfig::default()).unwrap();
        assert!(g.iter().all(|v| v[0] == 0.0 && v[1] == 0.0));
        let v = qbx_volume_value(&vq, &|_| 0.0, &bg, &QbxConfig::default()).unwrap();
        assert!(v.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn disk_potential_values() {
        let (vq, bg) = disk(1.0, 16);
        let v = qbx_volume_value(&vq, &|_| 1.0, &bg, &QbxConfig::default()).unwrap();
        assert!(v.iter().all(|v| v.abs() < 1e-6), "{:?}", &v[..3]);
        let (vq, bg) = disk(2.0, 16);
        let v = qbx_volume_value(&vq, &|_| 1.0, &bg, &QbxConfig::default()).unwrap();
        let want = 2.0 * 2f64.ln();
        assert!(
            v.iter().all(|v| (v - want).abs() < 1e-6),
            "{} vs {want}",
            v[0]
        );
    }

    #[test]
    fn single_layer_fourier_symbols() {
        let curve = Arc::new(BoundaryCurve::circle([0.0, 0.0], 1.0).unwrap());
        let g = Arc::new(curve.arc_length_grid(256).unwrap());
        let cfg = QbxConfig::default();
        let ones = qbx_single_layer(&g, &vec![1.0; 256], &cfg).unwrap();
        assert!(ones.iter().all(|v| v.abs() < 1e-8));
        let zeros = qbx_single_layer(&g, &vec![0.0; 256], &cfg).unwrap();
        assert!(zeros.iter().all(|v| *v == 0.0));
        let dens: Vec<f64> = g.thetas.iter().map(|t| (3.0 * t).cos()).collect();
        let s = qbx_single_layer(&g, &dens, &cfg).unwrap();
        for (v, t) in s.iter().zip(&g.thetas) {
            assert!((v + (3.0 * t).cos() / 6.0).abs() < 1e-8);
        }
    }

    #[test]
    fn single_layer_matrix_matches_apply_and_is_symmetric() {
        let curve = Arc::new(BoundaryCurve::circle([0.0, 0.0], 1.0).unwrap());
        let g = Arc::new(curve.arc_length_grid(64).unwrap());
        let sl = SingleLayer::new(g.clone(), &QbxConfig::default()).unwrap();
        let a = sl.matrix();
        let dens: Vec<f64> = g.thetas.iter().map(|t| (2.0 * t).sin() + 0.3).collect();
        let applied = sl.apply(&dens).unwrap();
        for i in 0..64 {
            let row: f64 = (0..64).map(|j| a[(i, j)] * dens[j]).sum();
            assert!((row - applied[i]).abs() < 1e-12);
        }
        for i in 0..64 {
            for j in 0..i {
                assert!((a[(i, j)] - a[(j, i)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn green_identity_flux() {
        // inward flux of u^p for F ≡ 1 equals −area
        let (vq, bg) = disk(1.0, 32);
        let g = qbx_volume_gradient(&vq, &|_| 1.0, &bg, &QbxConfig::default()).unwrap();
        let flux: f64 = g
            .iter()
            .zip(&bg.normals)
            .map(|(g, n)| (g[0] * n[0] + g[1] * n[1]) * bg.ds)
            .sum();
        assert!((flux + PI).abs() < 1e-6, "{flux}");
    }

    #[test]
    fn interior_center_is_rejected() {
        let curve = Arc::new(BoundaryCurve::circle([0.0, 0.0], 1.0).unwrap());
        let mut g = curve.arc_length_grid(32).unwrap();
        for n in g.normals.iter_mut() {
            *n = [-n[0], -n[1]];
        }
        assert!(matches!(
            Targets::exterior(&g, &QbxConfig::default()),
            Err(Error::CenterInside { .. })
        ));
    }
}
