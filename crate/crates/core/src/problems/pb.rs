//! Poisson–Boltzmann problem `Δu = α e^{−u}` with exact solution
//! `u = 2 log(c₁ cosh ky − c₂ cos kx)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::FieldJet;
use crate::geometry::BoundaryCurve;
use crate::source::{SourceJet, SourceModel};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonBoltzmann {
    pub k: f64,
    pub c1: f64,
    pub c2: f64,
}

impl PoissonBoltzmann {
    /// `c₁ − c₂ ∈ (0, 1)` makes the origin interior, and `c₁ + c₂ > 1`
    /// closes the level set along `y = 0`.
    pub fn new(k: f64, c1: f64, c2: f64) -> Result<Self> {
        let ok = k > 0.0 && c1 > 0.0 && c2 > 0.0 && c1 - c2 > 0.0 && c1 - c2 < 1.0 && c1 + c2 > 1.0;
        if !ok {
            return Err(Error::InvalidParameters(format!(
                "k = {k}, c1 = {c1}, c2 = {c2}: c1 cosh ky − c2 cos kx = 1 is not a closed curve around a positive region"
            )));
        }
        Ok(PoissonBoltzmann { k, c1, c2 })
    }

    pub fn default_params() -> Self {
        Self::new(std::f64::consts::PI / 5.0, 1.0287, 0.3301).expect("default parameters are valid")
    }

    pub fn alpha(&self) -> f64 {
        2.0 * self.k * self.k * (self.c1 * self.c1 - self.c2 * self.c2)
    }

    /// `g = c₁ cosh ky − c₂ cos kx` with its partials.
    fn g(&self, x: f64, y: f64) -> FieldJet {
        let (k, c1, c2) = (self.k, self.c1, self.c2);
        let (ch, sh) = ((k * y).cosh(), (k * y).sinh());
        let (c, s) = ((k * x).cos(), (k * x).sin());
        FieldJet {
            value: c1 * ch - c2 * c,
            grad: [k * c2 * s, k * c1 * sh],
            hess: [k * k * c2 * c, 0.0, k * k * c1 * ch],
        }
    }

    pub fn exact(&self, x: f64, y: f64) -> FieldJet {
        let g = self.g(x, y);
        let inv = 1.0 / g.value;
        let (gx, gy) = (g.grad[0] * inv, g.grad[1] * inv);
        FieldJet {
            value: 2.0 * g.value.ln(),
            grad: [2.0 * gx, 2.0 * gy],
            hess: [
                2.0 * (g.hess[0] * inv - gx * gx),
                -2.0 * gx * gy,
                2.0 * (g.hess[2] * inv - gy * gy),
            ],
        }
    }

    pub fn boundary(&self, modes: usize) -> Result<BoundaryCurve> {
        let x_int = ((self.c1 - 1.0) / self.c2).acos() / self.k;
        let r_max = 1.5 * x_int;
        if self.k * r_max >= std::f64::consts::PI {
            return Err(Error::InvalidParameters(format!(
                "x-intercept {x_int} too close to kx = π"
            )));
        }
        BoundaryCurve::from_level_set(|x, y| self.g(x, y).value - 1.0, [0.0, 0.0], modes, r_max)
    }

    pub fn source(&self) -> ExpSource {
        ExpSource {
            alpha: self.alpha(),
        }
    }
}

/// `F = α e^{−u}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpSource {
    pub alpha: f64,
}

impl SourceModel for ExpSource {
    fn eval(&self, _x: f64, _y: f64, u: f64) -> SourceJet {
        let f = self.alpha * (-u).exp();
        SourceJet {
            f,
            f_u: -f,
            f_uu: f,
            ..Default::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::tests::check_partials;

    #[test]
    fn small_c1_has_no_closed_curve() {
        assert!(matches!(
            PoissonBoltzmann::new(std::f64::consts::PI / 5.0, 0.0287, 0.3301),
            Err(Error::InvalidParameters(_))
        ));
    }

    #[test]
    fn exact_vanishes_on_boundary() {
        let p = PoissonBoltzmann::default_params();
        let b = p.boundary(96).unwrap();
        for j in 0..200 {
            let q = b.map_point(1.0, std::f64::consts::TAU * j as f64 / 200.0);
            assert!(p.exact(q[0], q[1]).value.abs() < 1e-12);
        }
    }

    #[test]
    fn aspect_ratio_is_two_to_one() {
        let p = PoissonBoltzmann::default_params();
        let b = p.boundary(96).unwrap();
        let a = b.map_point(1.0, 0.0)[0];
        let c = b.map_point(1.0, std::f64::consts::FRAC_PI_2)[1];
        assert!((a / c - 2.0).abs() < 0.05, "{}", a / c);
    }

    #[test]
    fn exact_solves_the_equation() {
        let p = PoissonBoltzmann::default_params();
        let a = p.alpha();
        let h = 1e-3;
        for (x, y) in [(0.0, 0.0), (1.0, 0.5), (-1.5, -0.2), (0.3, 0.9)] {
            let u = p.exact(x, y);
            assert!((u.hess[0] + u.hess[2] - a * (-u.value).exp()).abs() < 1e-10);
            let v = |s: f64, t: f64| p.exact(s, t).value;
            let fd =
                (v(x + h, y) + v(x - h, y) + v(x, y + h) + v(x, y - h) - 4.0 * v(x, y)) / (h * h);
            assert!((fd - a * (-u.value).exp()).abs() < 1e-6);
            let gx = (v(x + h, y) - v(x - h, y)) / (2.0 * h);
            assert!((gx - u.grad[0]).abs() < 1e-6);
            let uxy = (v(x + h, y + h) - v(x + h, y - h) - v(x - h, y + h) + v(x - h, y - h))
                / (4.0 * h * h);
            assert!((uxy - u.hess[1]).abs() < 1e-5);
        }
    }

    #[test]
    fn source_partials() {
        check_partials(&ExpSource { alpha: 0.7 }, 0.3, -0.2, -0.4);
    }
}
