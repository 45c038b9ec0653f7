//! Baseline derivative evaluations read directly off the solved `u`.

use faer::linalg::solvers::SolveLstsq;
use faer::Mat;

use crate::fem::{FemSolution, FieldJet};

/// Derivatives of the Hermite patches at the quadrature points.
pub fn naive_hermite(u: &FemSolution) -> Vec<FieldJet> {
    u.at_quadrature()
}

/// Second-order finite differences of the nodal values in `(ρ, θ)`, mapped to
/// physical derivatives at the nodes and interpolated bilinearly to the
/// quadrature points. The axis node uses a quadratic least-squares fit through
/// the first two rings.
pub fn naive_fd(u: &FemSolution) -> Vec<FieldJet> {
    let g = &u.grid;
    let n = g.n;
    let (h, ht) = (g.h_rho, g.h_theta);
    let v = |i: usize, k: usize| u.nodal_value(i, k % n);
    let km = |k: usize| (k + n - 1) % n;

    let mut nodes = vec![FieldJet::default(); (n + 1) * n];
    let axis = axis_fit(u);
    for k in 0..n {
        nodes[k] = axis;
    }
    for i in 1..=n {
        let rho = g.rho_nodes[i];
        for k in 0..n {
            let theta = g.theta_nodes[k];
            let d_rho = |kk: usize| -> (f64, f64) {
                if i < n {
                    let (a, b, c) = (v(i - 1, kk), v(i, kk), v(i + 1, kk));
                    ((c - a) / (2.0 * h), (a - 2.0 * b + c) / (h * h))
                } else {
                    let (a, b, c, d) = (v(n, kk), v(n - 1, kk), v(n - 2, kk), v(n - 3, kk));
                    (
                        (3.0 * a - 4.0 * b + c) / (2.0 * h),
                        (2.0 * a - 5.0 * b + 4.0 * c - d) / (h * h),
                    )
                }
            };
            let (ur, urr) = d_rho(k);
            let ut = (v(i, k + 1) - v(i, km(k))) / (2.0 * ht);
            let utt = (v(i, k + 1) - 2.0 * v(i, k) + v(i, km(k))) / (ht * ht);
            let urt = (d_rho(k + 1).0 - d_rho(km(k)).0) / (2.0 * ht);
            let jet = g.curve.map_jet(rho, theta);
            let grad = jet.gradient(ur, ut);
            let hess = jet.hessian(grad, urr, urt, utt);
            nodes[i * n + k] = FieldJet {
                value: v(i, k),
                grad,
                hess,
            };
        }
    }

    let gx = &g.gauss_unit;
    let mut out = Vec::with_capacity(g.quad.len());
    for i in 0..n {
        for k in 0..n {
            let corners = [
                nodes[i * n + k],
                nodes[(i + 1) * n + k],
                nodes[i * n + (k + 1) % n],
                nodes[(i + 1) * n + (k + 1) % n],
            ];
            for &xi in gx {
                for &eta in gx {
                    let w = [
                        (1.0 - xi) * (1.0 - eta),
                        xi * (1.0 - eta),
                        (1.0 - xi) * eta,
                        xi * eta,
                    ];
                    let mut j = FieldJet::default();
                    for (c, wc) in corners.iter().zip(w) {
                        j.value += wc * c.value;
                        for d in 0..2 {
                            j.grad[d] += wc * c.grad[d];
                        }
                        for d in 0..3 {
                            j.hess[d] += wc * c.hess[d];
                        }
                    }
                    out.push(j);
                }
            }
        }
    }
    out
}

/// Quadratic fit `a + b·dx + c·dy + d·dx² + e·dx·dy + f·dy²` about the center.
fn axis_fit(u: &FemSolution) -> FieldJet {
    let g = &u.grid;
    let n = g.n;
    let center = g.curve.center;
    let rows = 1 + 2 * n;
    let mut a = Mat::<f64>::zeros(rows, 6);
    let mut b = Mat::<f64>::zeros(rows, 1);
    let mut put = |r: usize, p: [f64; 2], val: f64| {
        let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
        for (c, t) in [1.0, dx, dy, dx * dx, dx * dy, dy * dy]
            .into_iter()
            .enumerate()
        {
            a[(r, c)] = t;
        }
        b[(r, 0)] = val;
    };
    put(0, center, u.nodal_value(0, 0));
    for ring in 1..=2 {
        for k in 0..n {
            let p = g.curve.map_point(g.rho_nodes[ring], g.theta_nodes[k]);
            put(1 + (ring - 1) * n + k, p, u.nodal_value(ring, k));
        }
    }
    let c = a.qr().solve_lstsq(&b);
    FieldJet {
        value: c[(0, 0)],
        grad: [c[(1, 0)], c[(2, 0)]],
        hess: [2.0 * c[(3, 0)], c[(4, 0)], 2.0 * c[(5, 0)]],
    }
}
