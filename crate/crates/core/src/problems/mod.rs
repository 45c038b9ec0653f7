//! Built-in test problems and the custom problem format.

mod pb;
mod solovev;

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use pb::{ExpSource, PoissonBoltzmann};
pub use solovev::{psi_from_u, solovev_coefficients, u_from_psi, SolovevProblem, SolovevSource};

use crate::error::{Error, Result};
use crate::fem::FieldJet;
use crate::geometry::BoundaryCurve;
use crate::source::{ConstantSource, Monomial, PolynomialSource, SourceModel};

pub type ExactFn = Arc<dyn Fn(f64, f64) -> FieldJet + Send + Sync>;

#[derive(Clone, Debug, PartialEq)]
pub enum ProblemKind {
    Solovev(SolovevProblem),
    PoissonBoltzmann(PoissonBoltzmann),
    Custom,
}

/// A boundary, a source and, when known, the exact solution.
#[derive(Clone)]
pub struct Problem {
    pub name: String,
    pub kind: ProblemKind,
    pub curve: Arc<BoundaryCurve>,
    pub source: Arc<dyn SourceModel>,
    pub exact: Option<ExactFn>,
    /// Constant Dirichlet value of `u`.
    pub boundary_value: f64,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("modes", &self.curve.modes())
            .field("has_exact", &self.exact.is_some())
            .finish()
    }
}

/// Boundary Fourier modes used for the built-in problems.
pub const ITER_MODES: usize = 64;
pub const NSTX_MODES: usize = 192;
pub const PB_MODES: usize = 96;

impl Problem {
    pub fn solovev(name: &str, p: SolovevProblem, modes: usize) -> Result<Self> {
        let curve = Arc::new(p.boundary(modes)?);
        let exact: ExactFn = Arc::new(move |x, y| {
            p.u(x, y).unwrap_or(FieldJet {
                value: f64::NAN,
                ..Default::default()
            })
        });
        Ok(Problem {
            name: name.into(),
            kind: ProblemKind::Solovev(p),
            curve,
            source: Arc::new(p.source()),
            exact: Some(exact),
            boundary_value: 0.0,
        })
    }

    pub fn iter() -> Result<Self> {
        Self::solovev("iter", SolovevProblem::iter(), ITER_MODES)
    }

    pub fn nstx() -> Result<Self> {
        Self::solovev("nstx", SolovevProblem::nstx(), NSTX_MODES)
    }

    pub fn poisson_boltzmann(p: PoissonBoltzmann, modes: usize) -> Result<Self> {
        let curve = Arc::new(p.boundary(modes)?);
        Ok(Problem {
            name: "pb".into(),
            kind: ProblemKind::PoissonBoltzmann(p),
            curve,
            source: Arc::new(p.source()),
            exact: Some(Arc::new(move |x, y| p.exact(x, y))),
            boundary_value: 0.0,
        })
    }

    pub fn pb() -> Result<Self> {
        Self::poisson_boltzmann(PoissonBoltzmann::default_params(), PB_MODES)
    }

    /// `iter`, `nstx`, `pb` or `custom:<path to JSON>`.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "iter" => Self::iter(),
            "nstx" => Self::nstx(),
            "pb" => Self::pb(),
            _ => match name.strip_prefix("custom:") {
                Some(path) => CustomSpec::load(path)?.build(),
                None => Err(Error::Config(format!("unknown problem '{name}'"))),
            },
        }
    }

    /// Exact magnetic axis, for Solov'ev problems.
    pub fn exact_axis(&self) -> Option<f64> {
        match &self.kind {
            ProblemKind::Solovev(p) => Some(p.exact_axis()),
            _ => None,
        }
    }

    /// The `y = 0` chord `[x_in, x_out]` through the boundary-map center.
    pub fn midplane_chord(&self) -> (f64, f64) {
        let a = self.curve.map_point(1.0, std::f64::consts::PI)[0];
        let b = self.curve.map_point(1.0, 0.0)[0];
        (a.min(b), a.max(b))
    }
}

/// Locate the zero of `ψ_x = u/(2√x) + √x u_x` on `y = 0` inside `(a, b)`.
///
/// `field(x)` returns `(u, u_x)` at `(x, 0)`.
pub fn magnetic_axis(field: impl Fn(f64) -> (f64, f64), a: f64, b: f64) -> Result<f64> {
    const SCAN: usize = 400;
    let psi_x = |x: f64| {
        let (u, ux) = field(x);
        u / (2.0 * x.sqrt()) + x.sqrt() * ux
    };
    let margin = 1e-3 * (b - a);
    let (a, b) = (a + margin, b - margin);
    if a <= 0.0 {
        return Err(Error::NonPositiveMajorRadius(a));
    }
    let mut lo = a;
    let mut f_lo = psi_x(lo);
    for s in 1..=SCAN {
        let hi = a + (b - a) * s as f64 / SCAN as f64;
        let f_hi = psi_x(hi);
        if f_lo == 0.0 {
            return Ok(lo);
        }
        if f_lo * f_hi < 0.0 {
            let (mut l, mut h, mut fl) = (lo, hi, f_lo);
            while h - l > 1e-15 * h {
                let m = 0.5 * (l + h);
                let fm = psi_x(m);
                if fm == 0.0 {
                    return Ok(m);
                }
                if fm * fl < 0.0 {
                    h = m;
                } else {
                    l = m;
                    fl = fm;
                }
            }
            return Ok(0.5 * (l + h));
        }
        lo = hi;
        f_lo = f_hi;
    }
    Err(Error::AxisNotBracketed)
}

/// `(B_r, B_φ, B_z)` from the `u` jet at `(x, y)` and a constant `I`.
pub fn b_field(x: f64, u: &FieldJet, current: f64) -> Result<[f64; 3]> {
    if x <= 0.0 {
        return Err(Error::NonPositiveMajorRadius(x));
    }
    let psi = psi_from_u(x, u);
    Ok([-psi.grad[1] / x, current / x, psi.grad[0] / x])
}

/// JSON description of a user-supplied problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomSpec {
    #[serde(default = "custom_name")]
    pub name: String,
    pub center: [f64; 2],
    pub boundary: BoundarySpec,
    pub source: SourceSpec,
    #[serde(default)]
    pub boundary_value: f64,
}

fn custom_name() -> String {
    "custom".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundarySpec {
    /// `f(θ) = a₀ + Σ a_k cos kθ + b_k sin kθ`; `sin[0]` is ignored.
    Fourier {
        cos: Vec<f64>,
        sin: Vec<f64>,
    },
    /// Radii at equispaced angles from the center.
    Radii {
        radii: Vec<f64>,
        modes: usize,
    },
    /// Boundary points fitted by least squares.
    Points {
        points: Vec<[f64; 2]>,
        modes: usize,
    },
    Circle {
        radius: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    Constant {
        value: f64,
    },
    /// Sum of `coef · x^px · y^py · u^pu`.
    Polynomial {
        terms: Vec<Monomial>,
    },
    Solovev {
        c: f64,
    },
    Exp {
        alpha: f64,
    },
}

impl CustomSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn build(&self) -> Result<Problem> {
        let curve = match &self.boundary {
            BoundarySpec::Fourier { cos, sin } => {
                BoundaryCurve::new(self.center, cos.clone(), sin.clone())?
            }
            BoundarySpec::Radii { radii, modes } => {
                BoundaryCurve::from_equispaced_radii(self.center, radii, *modes)?
            }
            BoundarySpec::Points { points, modes } => {
                BoundaryCurve::from_points(points, self.center, *modes)?
            }
            BoundarySpec::Circle { radius } => BoundaryCurve::circle(self.center, *radius)?,
        };
        let source: Arc<dyn SourceModel> = match &self.source {
            SourceSpec::Constant { value } => Arc::new(ConstantSource(*value)),
            SourceSpec::Polynomial { terms } => Arc::new(PolynomialSource {
                terms: terms.clone(),
            }),
            SourceSpec::Solovev { c } => Arc::new(SolovevSource { c: *c }),
            SourceSpec::Exp { alpha } => Arc::new(ExpSource { alpha: *alpha }),
        };
        Ok(Problem {
            name: self.name.clone(),
            kind: ProblemKind::Custom,
            curve: Arc::new(curve),
            source,
            exact: None,
            boundary_value: self.boundary_value,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_from_exact_field() {
        for p in [Problem::iter().unwrap(), Problem::nstx().unwrap()] {
            let exact = p.exact.clone().unwrap();
            let (a, b) = p.midplane_chord();
            let x = magnetic_axis(
                |x| {
                    let j = exact(x, 0.0);
                    (j.value, j.grad[0])
                },
                a,
                b,
            )
            .unwrap();
            assert!((x - p.exact_axis().unwrap()).abs() < 1e-12, "{}", p.name);
            // evaluating at −y gives the same field on the midplane
            let y = magnetic_axis(
                |x| {
                    let j = exact(x, -0.0);
                    (j.value, j.grad[0])
                },
                a,
                b,
            )
            .unwrap();
            assert_eq!(x, y);
        }
    }

    #[test]
    fn axis_needs_a_sign_change() {
        assert!(matches!(
            magnetic_axis(|_| (1.0, 1.0), 0.5, 1.5),
            Err(Error::AxisNotBracketed)
        ));
    }

    #[test]
    fn b_field_examples() {
        let s = SolovevProblem::iter();
        let xa = s.exact_axis();
        let b = b_field(xa, &s.u(xa, 0.0).unwrap(), 0.0).unwrap();
        assert!(b[0].abs() < 1e-14 && b[2].abs() < 1e-12 && b[1] == 0.0);
        let x = 1.0 + s.eps;
        let b = b_field(x, &s.u(x, 0.0).unwrap(), 2.0).unwrap();
        assert!((b[2] - s.psi(x, 0.0).grad[0] / x).abs() < 1e-13);
        assert_eq!(b[1], 2.0 / x);
        assert!(b_field(0.0, &FieldJet::default(), 1.0).is_err());
    }

    #[test]
    fn nstx_boundary_resolved_at_128_modes() {
        let s = SolovevProblem::nstx();
        let b = s.boundary(128).unwrap();
        let mut worst: f64 = 0.0;
        for j in 0..1000 {
            let q = b.map_point(1.0, std::f64::consts::TAU * (j as f64 + 0.5) / 1000.0);
            let g = s.psi(q[0], q[1]);
            worst = worst.max(g.value.abs() / g.grad[0].hypot(g.grad[1]));
        }
        assert!(worst < 1e-10, "{worst:e}");
    }

    #[test]
    fn by_name_dispatch() {
        assert_eq!(Problem::by_name("pb").unwrap().name, "pb");
        assert!(matches!(Problem::by_name("tokamak"), Err(Error::Config(_))));
    }

    #[test]
    fn custom_json_round_trip() {
        let json = r#"{
            "name": "disk",
            "center": [0.0, 0.0],
            "boundary": {"kind": "circle", "radius": 1.0},
            "source": {"kind": "polynomial", "terms": [{"coef": 4.0}]}
        }"#;
        let spec: CustomSpec = serde_json::from_str(json).unwrap();
        let back: CustomSpec =
            serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(spec, back);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("disk.json");
        std::fs::write(&path, json).unwrap();
        let p = Problem::by_name(&format!("custom:{}", path.display())).unwrap();
        assert_eq!(p.name, "disk");
        assert_eq!(p.source.eval(0.3, 0.1, 0.0).f, 4.0);
        assert!(p.exact.is_none());
        assert!(serde_json::from_str::<CustomSpec>(
            r#"{"center":[0,0],"boundary":{"kind":"blob"},"source":{"kind":"constant","value":1}}"#
        )
        .is_err());
    }
}
