//! Right-hand sides `F(x, y, u)` of the semilinear problem `Δu = F`.

/// `F` and every partial derivative used by the derivative stages.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SourceJet {
    pub f: f64,
    pub f_x: f64,
    pub f_y: f64,
    pub f_u: f64,
    pub f_xx: f64,
    pub f_xy: f64,
    pub f_xu: f64,
    pub f_yu: f64,
    pub f_uu: f64,
}

impl SourceJet {
    /// Load of the `u_x` equation `Δu_x − F_u u_x = F_x`.
    pub fn first_x(&self) -> f64 {
        self.f_x
    }

    pub fn first_y(&self) -> f64 {
        self.f_y
    }

    /// Load of the `u_xx` equation.
    pub fn second_xx(&self, u_x: f64) -> f64 {
        self.f_xx + 2.0 * self.f_xu * u_x + self.f_uu * u_x * u_x
    }

    /// Load of the `u_xy` equation.
    pub fn second_xy(&self, u_x: f64, u_y: f64) -> f64 {
        self.f_xy + self.f_xu * u_y + self.f_yu * u_x + self.f_uu * u_x * u_y
    }
}

pub trait SourceModel: Send + Sync {
    fn eval(&self, x: f64, y: f64, u: f64) -> SourceJet;

    /// Whether `F` is affine in `u`, so one linear solve with `c = F_u` is exact.
    fn affine_in_u(&self) -> bool {
        false
    }
}

/// `F ≡ value`.
#[derive(Clone, Copy, Debug)]
pub struct ConstantSource(pub f64);

impl SourceModel for ConstantSource {
    fn eval(&self, _x: f64, _y: f64, _u: f64) -> SourceJet {
        SourceJet {
            f: self.0,
            ..Default::default()
        }
    }

    fn affine_in_u(&self) -> bool {
        true
    }
}

/// Polynomial term `coef · x^px · y^py · u^pu`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Monomial {
    pub coef: f64,
    #[serde(default)]
    pub px: u32,
    #[serde(default)]
    pub py: u32,
    #[serde(default)]
    pub pu: u32,
}

/// Sum of monomials in `(x, y, u)`.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PolynomialSource {
    pub terms: Vec<Monomial>,
}

/// `(t^p, p t^{p-1}, p(p-1) t^{p-2})`.
fn pow_jet(t: f64, p: u32) -> [f64; 3] {
    let pf = p as f64;
    let pw = |e: i64| if e < 0 { 0.0 } else { t.powi(e as i32) };
    [
        pw(p as i64),
        pf * pw(p as i64 - 1),
        pf * (pf - 1.0) * pw(p as i64 - 2),
    ]
}

impl SourceModel for PolynomialSource {
    fn eval(&self, x: f64, y: f64, u: f64) -> SourceJet {
        let mut s = SourceJet::default();
        for m in &self.terms {
            let (a, b, c) = (pow_jet(x, m.px), pow_jet(y, m.py), pow_jet(u, m.pu));
            let k = m.coef;
            s.f += k * a[0] * b[0] * c[0];
            s.f_x += k * a[1] * b[0] * c[0];
            s.f_y += k * a[0] * b[1] * c[0];
            s.f_u += k * a[0] * b[0] * c[1];
            s.f_xx += k * a[2] * b[0] * c[0];
            s.f_xy += k * a[1] * b[1] * c[0];
            s.f_xu += k * a[1] * b[0] * c[1];
            s.f_yu += k * a[0] * b[1] * c[1];
            s.f_uu += k * a[0] * b[0] * c[2];
        }
        s
    }

    fn affine_in_u(&self) -> bool {
        self.terms.iter().all(|m| m.pu <= 1)
    }
}
