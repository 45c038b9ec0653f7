//! Solov'ev equilibria: `Δ*ψ = C x²` with a closed-form quartic `ψ`.

use faer::linalg::solvers::Solve;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::FieldJet;
use crate::geometry::BoundaryCurve;
use crate::source::{SourceJet, SourceModel};

/// Shaping parameters and the derived coefficients of `ψ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolovevProblem {
    pub eps: f64,
    pub delta: f64,
    pub kappa: f64,
    pub c: f64,
    pub d: [f64; 3],
    pub center: [f64; 2],
}

/// Row `[1, x², x⁴ − 4x²y²]` and right-hand side `−C x⁴/8` of `ψ(x, y) = 0`.
fn constraint_row(c: f64, x: f64, y: f64) -> ([f64; 3], f64) {
    let x2 = x * x;
    ([1.0, x2, x2 * x2 - 4.0 * x2 * y * y], -c * x2 * x2 / 8.0)
}

fn constraint_points(eps: f64, delta: f64, kappa: f64) -> [[f64; 2]; 3] {
    [
        [1.0 + eps, 0.0],
        [1.0 - eps, 0.0],
        [1.0 - delta * eps, kappa * eps],
    ]
}

/// Solve the three vanishing conditions for `(d₁, d₂, d₃)`.
pub fn solovev_coefficients(eps: f64, delta: f64, kappa: f64, c: f64) -> Result<[f64; 3]> {
    if !(eps > 0.0 && eps < 1.0 && kappa > 0.0 && c.is_finite() && delta.is_finite()) {
        return Err(Error::InvalidParameters(format!(
            "eps = {eps}, delta = {delta}, kappa = {kappa}, C = {c}"
        )));
    }
    let rows: Vec<_> = constraint_points(eps, delta, kappa)
        .iter()
        .map(|p| constraint_row(c, p[0], p[1]))
        .collect();
    let a = Mat::from_fn(3, 3, |i, j| rows[i].0[j]);
    let b = Mat::from_fn(3, 1, |i, _| rows[i].1);
    let s = a
        .singular_values()
        .map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
    if s[2] <= 1e-12 * s[0] {
        return Err(Error::SingularShaping { eps, delta, kappa });
    }
    let x = a.partial_piv_lu().solve(&b);
    Ok([x[(0, 0)], x[(1, 0)], x[(2, 0)]])
}

impl SolovevProblem {
    pub const DEFAULT_C: f64 = 10.0;

    pub fn new(eps: f64, delta: f64, kappa: f64, c: f64) -> Result<Self> {
        let d = solovev_coefficients(eps, delta, kappa, c)?;
        Ok(SolovevProblem {
            eps,
            delta,
            kappa,
            c,
            d,
            center: [1.0, 0.0],
        })
    }

    pub fn iter() -> Self {
        Self::new(0.32, 0.33, 1.7, Self::DEFAULT_C).expect("ITER shaping is regular")
    }

    pub fn nstx() -> Self {
        Self::new(0.78, 0.35, 2.0, Self::DEFAULT_C).expect("NSTX shaping is regular")
    }

    /// Residuals of `ψ` at the three constraint points.
    pub fn constraint_residuals(&self) -> [f64; 3] {
        constraint_points(self.eps, self.delta, self.kappa).map(|p| self.psi(p[0], p[1]).value)
    }

    /// `ψ` with its gradient and Hessian.
    pub fn psi(&self, x: f64, y: f64) -> FieldJet {
        let (c, [d1, d2, d3]) = (self.c, self.d);
        let (x2, y2) = (x * x, y * y);
        FieldJet {
            value: c / 8.0 * x2 * x2 + d1 + d2 * x2 + d3 * (x2 * x2 - 4.0 * x2 * y2),
            grad: [
                c / 2.0 * x2 * x + 2.0 * d2 * x + d3 * (4.0 * x2 * x - 8.0 * x * y2),
                -8.0 * d3 * x2 * y,
            ],
            hess: [
                1.5 * c * x2 + 2.0 * d2 + d3 * (12.0 * x2 - 8.0 * y2),
                -16.0 * d3 * x * y,
                -8.0 * d3 * x2,
            ],
        }
    }

    /// `u = ψ/√x` with its gradient and Hessian.
    pub fn u(&self, x: f64, y: f64) -> Result<FieldJet> {
        if x <= 0.0 {
            return Err(Error::NonPositiveMajorRadius(x));
        }
        Ok(u_from_psi(x, &self.psi(x, y)))
    }

    /// Exact magnetic axis `x* = 2 √(−d₂/(C + 8d₃))` on `y = 0`.
    pub fn exact_axis(&self) -> f64 {
        2.0 * (-self.d[1] / (self.c + 8.0 * self.d[2])).sqrt()
    }

    /// Boundary `ψ = 0` fitted with `modes` Fourier modes about `center`.
    pub fn boundary(&self, modes: usize) -> Result<BoundaryCurve> {
        let r_max = 1.5 * self.eps.max(self.kappa * self.eps);
        // ψ is even in x; the mirror branch at x < 0 is masked as exterior
        let level = |x: f64, y: f64| if x > 0.0 { self.psi(x, y).value } else { 1.0 };
        BoundaryCurve::from_level_set(level, self.center, modes, r_max)
    }

    pub fn source(&self) -> SolovevSource {
        SolovevSource { c: self.c }
    }
}

/// `(ψ, ∇ψ, ∇²ψ) → (u, ∇u, ∇²u)` for `u = ψ x^{−1/2}`.
pub fn u_from_psi(x: f64, p: &FieldJet) -> FieldJet {
    let s0 = x.powf(-0.5);
    let s1 = -0.5 * s0 / x;
    let s2 = 0.75 * s0 / (x * x);
    FieldJet {
        value: p.value * s0,
        grad: [p.grad[0] * s0 + p.value * s1, p.grad[1] * s0],
        hess: [
            p.hess[0] * s0 + 2.0 * p.grad[0] * s1 + p.value * s2,
            p.hess[1] * s0 + p.grad[1] * s1,
            p.hess[2] * s0,
        ],
    }
}

/// `(u, ∇u, ∇²u) → (ψ, ∇ψ, ∇²ψ)` for `ψ = u √x`.
pub fn psi_from_u(x: f64, u: &FieldJet) -> FieldJet {
    let s0 = x.sqrt();
    let s1 = 0.5 / s0;
    let s2 = -0.25 / (s0 * x);
    FieldJet {
        value: u.value * s0,
        grad: [u.grad[0] * s0 + u.value * s1, u.grad[1] * s0],
        hess: [
            u.hess[0] * s0 + 2.0 * u.grad[0] * s1 + u.value * s2,
            u.hess[1] * s0 + u.grad[1] * s1,
            u.hess[2] * s0,
        ],
    }
}

/// `F(x, u) = C x^{3/2} + (3/4) u/x²`, the u-form of `Δ*ψ = C x²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolovevSource {
    pub c: f64,
}

impl SourceModel for SolovevSource {
    fn eval(&self, x: f64, _y: f64, u: f64) -> SourceJet {
        let c = self.c;
        let sx = x.sqrt();
        let x2 = x * x;
        SourceJet {
            f: c * x * sx + 0.75 * u / x2,
            f_x: 1.5 * c * sx - 1.5 * u / (x2 * x),
            f_u: 0.75 / x2,
            f_xx: 0.75 * c / sx + 4.5 * u / (x2 * x2),
            f_xu: -1.5 / (x2 * x),
            ..Default::default()
        }
    }

    fn affine_in_u(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::tests::check_partials;

    #[test]
    fn coefficient_residuals() {
        for p in [SolovevProblem::iter(), SolovevProblem::nstx()] {
            for r in p.constraint_residuals() {
                assert!(r.abs() <= 1e-12, "{r:e}");
            }
        }
    }

    #[test]
    fn iter_coefficients_match_hand_solve() {
        // 3×3 system solved independently with rational elimination
        let p = SolovevProblem::iter();
        let want = [0.75385, -2.06295, -0.31434];
        for (a, b) in p.d.iter().zip(want) {
            assert!((a - b).abs() < 1e-5, "{:?}", p.d);
        }
        assert!((p.exact_axis() - 1.049952).abs() < 1e-6);
        let q = SolovevProblem::nstx();
        assert!((q.exact_axis() - 1.268227).abs() < 1e-6);
    }

    #[test]
    fn psi_is_even_in_y() {
        let p = SolovevProblem::iter();
        for (x, y) in [(1.1, 0.2), (0.8, 0.45), (1.2, 0.01)] {
            assert_eq!(p.psi(x, y).value, p.psi(x, -y).value);
        }
    }

    #[test]
    fn degenerate_shaping_is_rejected() {
        // third point coincides with the outer midplane point
        assert!(matches!(
            solovev_coefficients(0.3, -1.0, 1e-300, 10.0),
            Err(Error::SingularShaping { .. })
        ));
        assert!(matches!(
            solovev_coefficients(1.2, 0.3, 1.7, 10.0),
            Err(Error::InvalidParameters(_))
        ));
    }

    #[test]
    fn axis_is_a_critical_point() {
        for p in [SolovevProblem::iter(), SolovevProblem::nstx()] {
            let x = p.exact_axis();
            let g = p.psi(x, 0.0).grad;
            assert!(g[0].abs() < 1e-12 && g[1] == 0.0);
        }
    }

    #[test]
    fn u_and_psi_round_trip() {
        let p = SolovevProblem::nstx();
        for (x, y) in [(0.5, 0.3), (1.3, -0.7), (1.7, 0.1)] {
            let u = p.u(x, y).unwrap();
            assert!((u.value * x.sqrt() - p.psi(x, y).value).abs() < 1e-14);
            let back = psi_from_u(x, &u);
            let psi = p.psi(x, y);
            assert!((back.value - psi.value).abs() < 1e-13);
            for i in 0..2 {
                assert!((back.grad[i] - psi.grad[i]).abs() < 1e-12);
            }
            for i in 0..3 {
                assert!((back.hess[i] - psi.hess[i]).abs() < 1e-12);
            }
        }
        assert!(matches!(
            p.u(0.0, 0.0),
            Err(Error::NonPositiveMajorRadius(_))
        ));
    }

    #[test]
    fn exact_u_satisfies_the_semilinear_equation() {
        let p = SolovevProblem::iter();
        let src = p.source();
        for (x, y) in [(0.9, 0.1), (1.05, -0.3), (1.2, 0.2), (0.75, 0.0)] {
            let u = p.u(x, y).unwrap();
            let lap = u.hess[0] + u.hess[2];
            assert!((lap - src.eval(x, y, u.value).f).abs() < 1e-10);
            // finite-difference Laplacian oracle on u only
            let h = 1e-3;
            let v = |a: f64, b: f64| p.u(a, b).unwrap().value;
            let fd =
                (v(x + h, y) + v(x - h, y) + v(x, y + h) + v(x, y - h) - 4.0 * v(x, y)) / (h * h);
            assert!((fd - lap).abs() < 1e-5, "{fd} {lap}");
        }
    }

    #[test]
    fn source_partials() {
        let s = SolovevSource { c: 10.0 };
        check_partials(&s, 1.1, 0.2, -0.3);
        let j = s.eval(0.8, 0.0, 0.4);
        assert!((j.f_u - 0.75 / 0.64).abs() < 1e-15);
        assert_eq!(j.f_uu, 0.0);
    }

    #[test]
    fn boundary_passes_through_constraint_points() {
        for (p, modes) in [(SolovevProblem::iter(), 64), (SolovevProblem::nstx(), 192)] {
            let b = p.boundary(modes).unwrap();
            let mut worst: f64 = 0.0;
            for j in 0..400 {
                let q = b.map_point(1.0, std::f64::consts::TAU * j as f64 / 400.0);
                let g = p.psi(q[0], q[1]);
                worst = worst.max(g.value.abs() / (g.grad[0].hypot(g.grad[1])));
            }
            assert!(worst < 1e-10, "max radial mismatch {worst:e}");
        }
    }
}
