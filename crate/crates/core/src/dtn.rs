//! Dirichlet-to-Neumann map through the harmonic conjugate.
//!
//! For the harmonic part `u^h` with conjugate `U` (`∇^⊥U = ∇u^h`), the
//! tangential derivative of `U` equals the inward normal derivative of `u^h`.
//! On the boundary `U` solves the second-kind equation
//!
//! ```text
//! ½ U(x) + ∫ G_n(x, x') U(x') dl' = −∫ G(x, x') (u_t − u^p_t)(x') dl'
//! ```
//!
//! with `G_n` the derivative at the source point along its inward normal. The
//! trapezoidal discretization gets a rank-one `Δs²` term that removes the
//! constant null space and selects the zero-mean solution.

use std::f64::consts::PI;
use std::sync::Arc;

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;

use crate::error::{Error, Result};
use crate::geometry::ArcLengthGrid;
use crate::spectral;

/// A scalar sampled on an arc-length grid.
#[derive(Clone, Debug)]
pub struct BoundaryField {
    pub grid: Arc<ArcLengthGrid>,
    pub values: Vec<f64>,
}

impl BoundaryField {
    pub fn new(grid: Arc<ArcLengthGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(BoundaryField { grid, values })
    }

    pub fn zeros(grid: Arc<ArcLengthGrid>) -> Self {
        let m = grid.len();
        BoundaryField {
            grid,
            values: vec![0.0; m],
        }
    }

    /// Samples `f(x, y)` at the grid points.
    pub fn from_fn(grid: Arc<ArcLengthGrid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = grid.points.iter().map(|p| f(p[0], p[1])).collect();
        BoundaryField { grid, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Trapezoidal mean `(1/L) Σ v_j Δs`.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn check_same(&self, other: &BoundaryField) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Pointwise `self − other`.
    pub fn sub(&self, other: &BoundaryField) -> Result<BoundaryField> {
        self.check_same(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(BoundaryField {
            grid: self.grid.clone(),
            values,
        })
    }

    /// Band-limited interpolant in arc length, for transfer to other boundary samplings.
    pub fn interpolant(&self) -> spectral::TrigInterpolant {
        spectral::TrigInterpolant::new(&self.values, self.grid.total_length)
    }

    /// Zero the upper third of the spectrum.
    pub fn smoothed(&self) -> BoundaryField {
        BoundaryField {
            grid: self.grid.clone(),
            values: spectral::truncate_high_modes(&self.values, 2.0 / 3.0),
        }
    }
}

/// Spectral derivative with respect to arc length.
pub fn spectral_tangent_derivative(fld: &BoundaryField) -> BoundaryField {
    BoundaryField {
        grid: fld.grid.clone(),
        values: spectral::derivative(&fld.values, fld.grid.total_length),
    }
}

/// Dense second-kind system `½δ_ij + β_ij + Δs²`, factorized.
pub struct DtnSystem {
    pub grid: Arc<ArcLengthGrid>,
    pub matrix: Mat<f64>,
    lu: PartialPivLu<f64>,
}

/// `β_ij = Δs G_n(x_i, x_j)` with the curvature limit on the diagonal.
pub fn double_layer_matrix(grid: &ArcLengthGrid) -> Mat<f64> {
    let m = grid.len();
    let ds = grid.ds;
    Mat::from_fn(m, m, |i, j| {
        if i == j {
            return -ds * grid.curvatures[i] / (4.0 * PI);
        }
        let (x, y) = (grid.points[i], grid.points[j]);
        let n = grid.normals[j];
        let d = [y[0] - x[0], y[1] - x[1]];
        ds * (n[0] * d[0] + n[1] * d[1]) / (2.0 * PI * (d[0] * d[0] + d[1] * d[1]))
    })
}

pub fn build_dtn_system(grid: Arc<ArcLengthGrid>) -> DtnSystem {
    let m = grid.len();
    let ds2 = grid.ds * grid.ds;
    let mut matrix = double_layer_matrix(&grid);
    for i in 0..m {
        for j in 0..m {
            matrix[(i, j)] += ds2;
        }
        matrix[(i, i)] += 0.5;
    }
    let lu = matrix.partial_piv_lu();
    DtnSystem { grid, matrix, lu }
}

impl DtnSystem {
    /// 2-norm condition number.
    pub fn condition_number(&self) -> Result<f64> {
        let s = self
            .matrix
            .singular_values()
            .map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
        let max = s.iter().cloned().fold(0.0, f64::max);
        let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(max / min)
    }
}

/// Solve for the conjugate `U^h` with right-hand side `γ`, returned with zero mean.
pub fn solve_harmonic_conjugate(sys: &DtnSystem, gamma: &BoundaryField) -> Result<BoundaryField> {
    if !sys.grid.same_as(&gamma.grid) {
        return Err(Error::GridMismatch);
    }
    let m = gamma.len();
    let b = Mat::from_fn(m, 1, |i, _| gamma.values[i]);
    let x = sys.lu.solve(&b);
    let values: Vec<f64> = (0..m).map(|i| x[(i, 0)]).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::LinearSolve(
            "second-kind system produced non-finite values".into(),
        ));
    }
    // γ outside the discrete range of ½I + β leaks into the constant mode
    let mean = values.iter().sum::<f64>() / m as f64;
    BoundaryField::new(
        sys.grid.clone(),
        values.into_iter().map(|v| v - mean).collect(),
    )
}

/// `u_n = d U^h/ds + u^p_n`.
pub fn assemble_neumann(uh: &BoundaryField, up_n: &BoundaryField) -> Result<BoundaryField> {
    uh.check_same(up_n)?;
    let d = spectral_tangent_derivative(uh);
    let values = d
        .values
        .iter()
        .zip(&up_n.values)
        .map(|(a, b)| a + b)
        .collect();
    Ok(BoundaryField {
        grid: uh.grid.clone(),
        values,
    })
}

/// `(u_x, u_y)` from inward normal and counterclockwise tangential derivatives.
pub fn rotate_to_cartesian(
    u_n: &BoundaryField,
    u_t: &BoundaryField,
) -> Result<(BoundaryField, BoundaryField)> {
    u_n.check_same(u_t)?;
    let g = &u_n.grid;
    let m = g.len();
    let mut ux = Vec::with_capacity(m);
    let mut uy = Vec::with_capacity(m);
    for j in 0..m {
        let (n, t) = (g.normals[j], g.tangents[j]);
        if (t[0] - n[1]).abs() > 1e-12 || (t[1] + n[0]).abs() > 1e-12 {
            return Err(Error::FrameConvention { index: j });
        }
        let (a, b) = (u_n.values[j], u_t.values[j]);
        ux.push(n[0] * a + n[1] * b);
        uy.push(n[1] * a - n[0] * b);
    }
    Ok((
        BoundaryField {
            grid: g.clone(),
            values: ux,
        },
        BoundaryField {
            grid: g.clone(),
            values: uy,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundaryCurve;
    use crate::squad::{qbx_single_layer, QbxConfig};

    fn circle(m: usize) -> Arc<ArcLengthGrid> {
        Arc::new(
            Arc::new(BoundaryCurve::circle([0.0, 0.0], 1.0).unwrap())
                .arc_length_grid(m)
                .unwrap(),
        )
    }

    fn ellipse(m: usize) -> Arc<ArcLengthGrid> {
        let c = BoundaryCurve::from_level_set(
            |x, y| (x / 2.0).powi(2) + y * y - 1.0,
            [0.0, 0.0],
            64,
            4.0,
        )
        .unwrap();
        Arc::new(Arc::new(c).arc_length_grid(m).unwrap())
    }

    #[test]
    fn circle_kernel_is_constant() {
        let g = circle(32);
        let b = double_layer_matrix(&g);
        let want = -g.ds / (4.0 * PI);
        for i in 0..32 {
            for j in 0..32 {
                assert!((b[(i, j)] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn row_sums_on_ellipse() {
        let g = ellipse(256);
        let b = double_layer_matrix(&g);
        for i in 0..256 {
            let s: f64 = (0..256).map(|j| b[(i, j)]).sum();
            assert!((s + 0.5).abs() < 1e-10, "row {i}: {s}");
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let g = circle(64);
        let sys = build_dtn_system(g.clone());
        let u = solve_harmonic_conjugate(&sys, &BoundaryField::zeros(g)).unwrap();
        assert!(u.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn constant_rhs_gives_zero_mean_solution() {
        let g = ellipse(64);
        let sys = build_dtn_system(g.clone());
        let u =
            solve_harmonic_conjugate(&sys, &BoundaryField::new(g, vec![1.0; 64]).unwrap()).unwrap();
        assert!(u.mean().abs() < 1e-12);
        assert!(u.max_abs() < 1e-9);
    }

    #[test]
    fn rank_one_term_selects_zero_mean_representative() {
        let g = ellipse(128);
        let sys = build_dtn_system(g.clone());
        let b = double_layer_matrix(&g);
        let v: Vec<f64> = g
            .thetas
            .iter()
            .map(|t| 1.0 + t.sin() + 0.3 * (2.0 * t).cos())
            .collect();
        let gamma: Vec<f64> = (0..128)
            .map(|i| 0.5 * v[i] + (0..128).map(|j| b[(i, j)] * v[j]).sum::<f64>())
            .collect();
        let u =
            solve_harmonic_conjugate(&sys, &BoundaryField::new(g.clone(), gamma).unwrap()).unwrap();
        let mean = v.iter().sum::<f64>() / 128.0;
        for (a, b) in u.values.iter().zip(&v) {
            assert!((a - (b - mean)).abs() < 1e-12);
        }
    }

    #[test]
    fn harmonic_conjugate_of_x_on_disk() {
        let g = circle(128);
        let sys = build_dtn_system(g.clone());
        let ut: Vec<f64> = g.thetas.iter().map(|t| -t.sin()).collect();
        let s = qbx_single_layer(&g, &ut, &QbxConfig::default()).unwrap();
        let gamma = BoundaryField::new(g.clone(), s.iter().map(|v| -v).collect()).unwrap();
        let u = solve_harmonic_conjugate(&sys, &gamma).unwrap();
        assert!(u.mean().abs() <= 1e-12 * u.max_abs());
        for (v, t) in u.values.iter().zip(&g.thetas) {
            assert!((v + t.sin()).abs() < 1e-10);
        }
        let ut = spectral_tangent_derivative(&u);
        for (v, t) in ut.values.iter().zip(&g.thetas) {
            assert!((v + t.cos()).abs() < 1e-9);
        }
    }

    #[test]
    fn spectral_derivative_examples() {
        let g = ellipse(128);
        let l = g.total_length;
        let w = 2.0 * PI / l;
        let s = |j: usize| g.arc_position(j);
        let f =
            BoundaryField::new(g.clone(), (0..128).map(|j| (w * s(j)).cos()).collect()).unwrap();
        let d = spectral_tangent_derivative(&f);
        for j in 0..128 {
            assert!((d.values[j] + w * (w * s(j)).sin()).abs() < 1e-12);
        }
        let f = BoundaryField::new(
            g.clone(),
            (0..128).map(|j| (w * s(j)).sin().exp()).collect(),
        )
        .unwrap();
        let d = spectral_tangent_derivative(&f);
        for j in 0..128 {
            let want = w * (w * s(j)).cos() * (w * s(j)).sin().exp();
            assert!((d.values[j] - want).abs() < 1e-10);
        }
        let c = BoundaryField::new(g.clone(), vec![3.0; 128]).unwrap();
        assert!(spectral_tangent_derivative(&c).max_abs() < 1e-13);
    }

    #[test]
    fn neumann_and_rotation_examples() {
        let g = circle(64);
        let up_n =
            BoundaryField::new(g.clone(), g.thetas.iter().map(|t| t.cos()).collect()).unwrap();
        let un = assemble_neumann(&BoundaryField::zeros(g.clone()), &up_n).unwrap();
        assert_eq!(un.values, up_n.values);

        // u = x on the unit disk
        let u_n =
            BoundaryField::new(g.clone(), g.thetas.iter().map(|t| -t.cos()).collect()).unwrap();
        let u_t =
            BoundaryField::new(g.clone(), g.thetas.iter().map(|t| -t.sin()).collect()).unwrap();
        let (ux, uy) = rotate_to_cartesian(&u_n, &u_t).unwrap();
        assert!(ux.values.iter().all(|v| (v - 1.0).abs() < 1e-14));
        assert!(uy.values.iter().all(|v| v.abs() < 1e-14));

        // single points: n = (−1, 0) at θ = 0
        let one = |v: f64| BoundaryField::new(g.clone(), vec![v; 64]).unwrap();
        let (ux, uy) = rotate_to_cartesian(&one(1.0), &one(0.0)).unwrap();
        assert!((ux.values[0] + 1.0).abs() < 1e-15 && uy.values[0].abs() < 1e-15);
        let (ux, uy) = rotate_to_cartesian(&one(0.0), &one(1.0)).unwrap();
        // t = (n_y, −n_x) = (0, 1) at θ = 0
        assert!(ux.values[0].abs() < 1e-15 && (uy.values[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rotation_rejects_flipped_frames() {
        let g = circle(16);
        let mut bad = (*g).clone();
        bad.tangents[3] = [-bad.tangents[3][0], -bad.tangents[3][1]];
        let bad = Arc::new(bad);
        let f = BoundaryField::zeros(bad.clone());
        assert!(matches!(
            rotate_to_cartesian(&f, &f),
            Err(Error::FrameConvention { index: 3 })
        ));
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let a = BoundaryField::zeros(circle(16));
        let b = BoundaryField::zeros(circle(32));
        assert!(matches!(assemble_neumann(&a, &b), Err(Error::GridMismatch)));
    }
}
