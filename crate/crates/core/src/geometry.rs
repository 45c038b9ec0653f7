//! Star-shaped boundary curves in mapped polar coordinates and equal-arc-length
//! boundary grids.
//!
//! A domain is described by a center `(x_c, y_c)` and a positive, 2π-periodic
//! radial function `f(θ)` stored as a truncated Fourier series. Interior points
//! are addressed by `(ρ, θ) ∈ [0, 1] × [0, 2π)` through
//!
//! ```text
//! x = x_c + ρ f(θ) cos θ,    y = y_c + ρ f(θ) sin θ.
//! ```
//!
//! Frames follow one fixed convention throughout the crate: the tangent is the
//! unit counterclockwise tangent, the normal is the unit *inward* normal
//! (the tangent rotated by +90°), and the curvature is positive on convex arcs.

use std::f64::consts::PI;
use std::sync::Arc;

use faer::linalg::solvers::SolveLstsq;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussRule;

pub type Point = [f64; 2];

const TWO_PI: f64 = 2.0 * PI;
const POSITIVITY_SAMPLES: usize = 4096;
const NEWTON_TOL: f64 = 1e-13;
const NEWTON_CAP: usize = 50;

/// `f`, `f'`, `f''` at one angle.
#[derive(Clone, Copy, Debug)]
pub struct Radial {
    pub f: f64,
    pub df: f64,
    pub d2f: f64,
}

/// The coordinate map and its derivatives up to second order at one `(ρ, θ)`.
#[derive(Clone, Copy, Debug)]
pub struct MapJet {
    pub rho: f64,
    pub theta: f64,
    pub x: f64,
    pub y: f64,
    pub x_r: f64,
    pub x_t: f64,
    pub y_r: f64,
    pub y_t: f64,
    pub x_rt: f64,
    pub y_rt: f64,
    pub x_tt: f64,
    pub y_tt: f64,
}

impl MapJet {
    pub fn new(center: Point, rho: f64, theta: f64, r: Radial) -> Self {
        let (s, c) = theta.sin_cos();
        // d/dθ of (f cos θ, f sin θ)
        let gx = r.df * c - r.f * s;
        let gy = r.df * s + r.f * c;
        let gxx = r.d2f * c - 2.0 * r.df * s - r.f * c;
        let gyy = r.d2f * s + 2.0 * r.df * c - r.f * s;
        MapJet {
            rho,
            theta,
            x: center[0] + rho * r.f * c,
            y: center[1] + rho * r.f * s,
            x_r: r.f * c,
            y_r: r.f * s,
            x_t: rho * gx,
            y_t: rho * gy,
            x_rt: gx,
            y_rt: gy,
            x_tt: rho * gxx,
            y_tt: rho * gyy,
        }
    }

    pub fn point(&self) -> Point {
        [self.x, self.y]
    }

    /// Jacobian determinant `∂(x,y)/∂(ρ,θ) = ρ f²`.
    pub fn det(&self) -> f64 {
        self.x_r * self.y_t - self.x_t * self.y_r
    }

    /// Physical gradient from logical derivatives `(u_ρ, u_θ)`.
    pub fn gradient(&self, u_r: f64, u_t: f64) -> [f64; 2] {
        let det = self.det();
        [
            (self.y_t * u_r - self.y_r * u_t) / det,
            (-self.x_t * u_r + self.x_r * u_t) / det,
        ]
    }

    /// Physical Hessian `(u_xx, u_xy, u_yy)` from logical second derivatives,
    /// given the physical gradient.
    pub fn hessian(&self, grad: [f64; 2], u_rr: f64, u_rt: f64, u_tt: f64) -> [f64; 3] {
        let (xr, xt, yr, yt) = (self.x_r, self.x_t, self.y_r, self.y_t);
        let b = [
            u_rr,
            u_rt - self.x_rt * grad[0] - self.y_rt * grad[1],
            u_tt - self.x_tt * grad[0] - self.y_tt * grad[1],
        ];
        let a = [
            [xr * xr, 2.0 * xr * yr, yr * yr],
            [xr * xt, xr * yt + xt * yr, yr * yt],
            [xt * xt, 2.0 * xt * yt, yt * yt],
        ];
        solve3(a, b)
    }
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> [f64; 3] {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&a);
    let mut out = [0.0; 3];
    for (col, o) in out.iter_mut().enumerate() {
        let mut m = a;
        for row in 0..3 {
            m[row][col] = b[row];
        }
        *o = det(&m) / d;
    }
    out
}

/// Unit tangent, unit inward normal and signed curvature at a boundary point.
#[derive(Clone, Copy, Debug)]
pub struct Frame {
    pub point: Point,
    pub tangent: [f64; 2],
    pub normal: [f64; 2],
    pub curvature: f64,
    /// `|d(x, y)/dθ|`.
    pub speed: f64,
}

/// Boundary of a star-shaped domain as a Fourier radial map about a center.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurve {
    pub center: Point,
    /// `a_0, a_1, ..., a_M`.
    pub cos_coeffs: Vec<f64>,
    /// `b_0, b_1, ..., b_M`; `b_0` is always zero.
    pub sin_coeffs: Vec<f64>,
}

impl BoundaryCurve {
    pub fn new(center: Point, cos_coeffs: Vec<f64>, mut sin_coeffs: Vec<f64>) -> Result<Self> {
        let m = cos_coeffs.len().max(sin_coeffs.len()).max(1);
        let mut cos_coeffs = cos_coeffs;
        cos_coeffs.resize(m, 0.0);
        sin_coeffs.resize(m, 0.0);
        sin_coeffs[0] = 0.0;
        let curve = BoundaryCurve {
            center,
            cos_coeffs,
            sin_coeffs,
        };
        curve.check_positive()?;
        Ok(curve)
    }

    pub fn circle(center: Point, radius: f64) -> Result<Self> {
        Self::new(center, vec![radius], vec![0.0])
    }

    /// Truncation order `M_f`.
    pub fn modes(&self) -> usize {
        self.cos_coeffs.len() - 1
    }

    fn check_positive(&self) -> Result<()> {
        for j in 0..POSITIVITY_SAMPLES {
            let theta = TWO_PI * j as f64 / POSITIVITY_SAMPLES as f64;
            let f = self.radial(theta).f;
            if !(f > 0.0) {
                return Err(Error::NonPositiveRadius { theta, value: f });
            }
        }
        Ok(())
    }

    /// `f(θ)` and its first two derivatives.
    pub fn radial(&self, theta: f64) -> Radial {
        let (s1, c1) = theta.sin_cos();
        let (mut sk, mut ck) = (0.0, 1.0);
        let mut f = self.cos_coeffs[0];
        let (mut df, mut d2f) = (0.0, 0.0);
        for k in 1..self.cos_coeffs.len() {
            let (s2, c2) = (sk * c1 + ck * s1, ck * c1 - sk * s1);
            sk = s2;
            ck = c2;
            let (a, b) = (self.cos_coeffs[k], self.sin_coeffs[k]);
            let kf = k as f64;
            f += a * ck + b * sk;
            df += kf * (b * ck - a * sk);
            d2f -= kf * kf * (a * ck + b * sk);
        }
        Radial { f, df, d2f }
    }

    pub fn map_jet(&self, rho: f64, theta: f64) -> MapJet {
        MapJet::new(self.center, rho, theta, self.radial(theta))
    }

    /// Physical point for mapped coordinates `(ρ, θ)`.
    pub fn map_point(&self, rho: f64, theta: f64) -> Point {
        let f = self.radial(theta).f;
        let (s, c) = theta.sin_cos();
        [self.center[0] + rho * f * c, self.center[1] + rho * f * s]
    }

    /// Mapped coordinates of a physical point; `θ ∈ [0, 2π)`.
    pub fn to_mapped(&self, p: Point) -> (f64, f64) {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        let r = dx.hypot(dy);
        if r == 0.0 {
            return (0.0, 0.0);
        }
        let theta = dy.atan2(dx).rem_euclid(TWO_PI);
        (r / self.radial(theta).f, theta)
    }

    /// `|d(x, y)/dθ|` on the boundary.
    pub fn speed(&self, theta: f64) -> f64 {
        let r = self.radial(theta);
        r.f.hypot(r.df)
    }

    pub fn frame_at(&self, theta: f64) -> Result<Frame> {
        let r = self.radial(theta);
        let jet = MapJet::new(self.center, 1.0, theta, r);
        let (xd, yd) = (jet.x_t, jet.y_t);
        let speed = xd.hypot(yd);
        if speed < 1e-12 * r.f.abs().max(1e-300) || !speed.is_finite() {
            return Err(Error::DegenerateTangent { theta });
        }
        let tangent = [xd / speed, yd / speed];
        let normal = [-tangent[1], tangent[0]];
        let curvature = (xd * jet.y_tt - yd * jet.x_tt) / speed.powi(3);
        Ok(Frame {
            point: [jet.x, jet.y],
            tangent,
            normal,
            curvature,
            speed,
        })
    }

    /// Arc length of the boundary between two angles (`a ≤ b`), composite 16-point Gauss.
    pub fn arc_length_between(&self, a: f64, b: f64, rule: &GaussRule) -> f64 {
        rule.integrate(a, b, |t| self.speed(t))
    }

    /// Perimeter via a 1000-node Gauss-Legendre rule.
    pub fn total_length(&self) -> f64 {
        GaussRule::new(1000).integrate(0.0, TWO_PI, |t| self.speed(t))
    }

    /// Arc-length positions `s(θ_k)` (measured from `θ = 0`) of increasing angles.
    pub fn arc_positions(&self, thetas: &[f64]) -> Vec<f64> {
        let rule = GaussRule::new(16);
        let mut out = Vec::with_capacity(thetas.len());
        let mut acc = 0.0;
        let mut prev = 0.0;
        for &t in thetas {
            acc += self.arc_length_between(prev, t, &rule);
            prev = t;
            out.push(acc);
        }
        out
    }

    /// `M` boundary points equally spaced in arc length, starting at `θ = 0`.
    pub fn arc_length_grid(self: &Arc<Self>, m: usize) -> Result<ArcLengthGrid> {
        ArcLengthGrid::new(self.clone(), m)
    }

    /// Fit from radii sampled at `K` equispaced angles `θ_k = 2πk/K`.
    ///
    /// With `K = 2 M_f + 1` the result interpolates the samples.
    pub fn from_equispaced_radii(center: Point, radii: &[f64], modes: usize) -> Result<Self> {
        let k = radii.len();
        if k < 2 * modes + 1 {
            return Err(Error::TooFewSamples {
                needed: 2 * modes + 1,
                modes,
                got: k,
            });
        }
        let mut a = vec![0.0; modes + 1];
        let mut b = vec![0.0; modes + 1];
        for (j, &r) in radii.iter().enumerate() {
            let theta = TWO_PI * j as f64 / k as f64;
            a[0] += r;
            for m in 1..=modes {
                let (s, c) = (m as f64 * theta).sin_cos();
                a[m] += 2.0 * r * c;
                b[m] += 2.0 * r * s;
            }
        }
        a.iter_mut().for_each(|v| *v /= k as f64);
        b.iter_mut().for_each(|v| *v /= k as f64);
        Self::new(center, a, b)
    }

    /// Least-squares fit of the radial map through arbitrary boundary samples.
    pub fn from_points(points: &[Point], center: Point, modes: usize) -> Result<Self> {
        let n = points.len();
        let cols = 2 * modes + 1;
        if n < cols {
            return Err(Error::TooFewSamples {
                needed: cols,
                modes,
                got: n,
            });
        }
        let mut a = Mat::<f64>::zeros(n, cols);
        let mut rhs = Mat::<f64>::zeros(n, 1);
        for (i, p) in points.iter().enumerate() {
            let dx = p[0] - center[0];
            let dy = p[1] - center[1];
            let theta = dy.atan2(dx);
            rhs[(i, 0)] = dx.hypot(dy);
            a[(i, 0)] = 1.0;
            for m in 1..=modes {
                let (s, c) = (m as f64 * theta).sin_cos();
                a[(i, 2 * m - 1)] = c;
                a[(i, 2 * m)] = s;
            }
        }
        let sol = a.qr().solve_lstsq(&rhs);
        let mut ca = vec![0.0; modes + 1];
        let mut cb = vec![0.0; modes + 1];
        ca[0] = sol[(0, 0)];
        for m in 1..=modes {
            ca[m] = sol[(2 * m - 1, 0)];
            cb[m] = sol[(2 * m, 0)];
        }
        Self::new(center, ca, cb)
    }

    /// Fit the zero level set of `level` by root-finding along `2 M_f + 1` rays.
    ///
    /// Each ray from the center is scanned out to `r_max`; exactly one sign change
    /// is required, which is then refined by bisection and a final secant step.
    pub fn from_level_set(
        level: impl Fn(f64, f64) -> f64,
        center: Point,
        modes: usize,
        r_max: f64,
    ) -> Result<Self> {
        const SCAN: usize = 800;
        let k = 2 * modes + 1;
        let mut radii = Vec::with_capacity(k);
        for j in 0..k {
            let theta = TWO_PI * j as f64 / k as f64;
            let (s, c) = theta.sin_cos();
            let g = |r: f64| level(center[0] + r * c, center[1] + r * s);
            let mut prev_r = 0.0;
            let mut prev_v = g(0.0);
            let mut bracket = None;
            let mut crossings = 0;
            for i in 1..=SCAN {
                let r = r_max * i as f64 / SCAN as f64;
                let v = g(r);
                if (v > 0.0) != (prev_v > 0.0) {
                    crossings += 1;
                    if bracket.is_none() {
                        bracket = Some((prev_r, r, prev_v));
                    }
                }
                prev_r = r;
                prev_v = v;
            }
            let Some((mut lo, mut hi, v_lo)) = bracket else {
                return Err(Error::NoCrossing { theta });
            };
            if crossings > 1 {
                return Err(Error::NotStarShaped { theta, crossings });
            }
            let lo_positive = v_lo > 0.0;
            while hi - lo > 1e-13 {
                let mid = 0.5 * (lo + hi);
                if (g(mid) > 0.0) == lo_positive {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let (glo, ghi) = (g(lo), g(hi));
            let root = if ghi != glo {
                (lo - glo * (hi - lo) / (ghi - glo)).clamp(lo, hi)
            } else {
                0.5 * (lo + hi)
            };
            radii.push(root);
        }
        Self::from_equispaced_radii(center, &radii, modes)
    }
}

/// Boundary points equally spaced in arc length with their frames.
#[derive(Clone, Debug)]
pub struct ArcLengthGrid {
    pub curve: Arc<BoundaryCurve>,
    pub thetas: Vec<f64>,
    pub points: Vec<Point>,
    pub tangents: Vec<[f64; 2]>,
    pub normals: Vec<[f64; 2]>,
    pub curvatures: Vec<f64>,
    pub ds: f64,
    pub total_length: f64,
}

impl ArcLengthGrid {
    pub fn new(curve: Arc<BoundaryCurve>, m: usize) -> Result<Self> {
        assert!(m >= 2, "arc-length grid needs at least two points");
        let length = curve.total_length();
        let ds = length / m as f64;
        let rule = GaussRule::new(16);
        let mut thetas = Vec::with_capacity(m);
        thetas.push(0.0);
        let mut travelled = 0.0;
        for j in 1..m {
            let start = thetas[j - 1];
            let want = j as f64 * ds - travelled;
            let mut theta = start + want / curve.speed(start);
            let mut converged = false;
            for _ in 0..NEWTON_CAP {
                let seg = curve.arc_length_between(start, theta, &rule);
                let resid = seg - want;
                theta -= resid / curve.speed(theta);
                if resid.abs() < NEWTON_TOL {
                    converged = true;
                    break;
                }
            }
            if !converged || !theta.is_finite() || theta <= start {
                return Err(Error::ArcLengthNewton { segment: j });
            }
            travelled += curve.arc_length_between(start, theta, &rule);
            thetas.push(theta);
        }
        let mut points = Vec::with_capacity(m);
        let mut tangents = Vec::with_capacity(m);
        let mut normals = Vec::with_capacity(m);
        let mut curvatures = Vec::with_capacity(m);
        for &t in &thetas {
            let fr = curve.frame_at(t)?;
            points.push(fr.point);
            tangents.push(fr.tangent);
            normals.push(fr.normal);
            curvatures.push(fr.curvature);
        }
        Ok(ArcLengthGrid {
            curve,
            thetas,
            points,
            tangents,
            normals,
            curvatures,
            ds,
            total_length: length,
        })
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    /// Arc-length coordinate of grid point `j`.
    pub fn arc_position(&self, j: usize) -> f64 {
        j as f64 * self.ds
    }

    /// Same curve, `factor` times as many points; every `factor`-th point coincides.
    pub fn refined(&self, factor: usize) -> Result<ArcLengthGrid> {
        ArcLengthGrid::new(self.curve.clone(), self.len() * factor)
    }

    /// Whether two grids sample the same curve at the same points.
    pub fn same_as(&self, other: &ArcLengthGrid) -> bool {
        std::ptr::eq(self, other)
            || (self.len() == other.len()
                && (self.total_length - other.total_length).abs() <= 1e-12 * self.total_length
                && self.curve == other.curve)
    }
}
