use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use super::{local_node, Dirichlet, FemGrid, FemSolution, QUAD_PER_CELL};
use crate::error::{Error, Result};

const RESIDUAL_TOL: f64 = 1e-10;

/// Assembled system for `Δu − c u = g` with the Dirichlet lift applied.
pub struct LinearSystem {
    pub grid: Arc<FemGrid>,
    pub matrix: SparseColMat<usize, f64>,
    pub rhs: Vec<f64>,
    dirichlet_slots: Vec<f64>,
}

/// A factorized stiffness-plus-mass operator for one coefficient `c`,
/// reusable for any load and Dirichlet data.
pub struct Operator {
    pub grid: Arc<FemGrid>,
    matrix: SparseColMat<usize, f64>,
    lu: Lu<usize, f64>,
    /// `(row, slot, value)` couplings of unknowns to Dirichlet slots.
    coupling: Vec<(usize, usize, f64)>,
}

struct Assembled {
    matrix: SparseColMat<usize, f64>,
    coupling: Vec<(usize, usize, f64)>,
}

fn assemble_matrix(grid: &FemGrid, c: &[f64]) -> Result<Assembled> {
    assert_eq!(
        c.len(),
        grid.quad.len(),
        "coefficient must be sampled at every quadrature point"
    );
    let n = grid.n;
    let nu = grid.num_unknowns();
    let mut triplets = Vec::with_capacity(n * n * 256);
    let mut coupling_dense = std::collections::HashMap::<(usize, usize), f64>::new();
    let (ih, it) = (1.0 / grid.h_rho, 1.0 / grid.h_theta);

    for i in 0..n {
        for k in 0..n {
            let cell = i * n + k;
            let mut ke = [[0.0f64; 16]; 16];
            for (q, qp) in grid.cell_quad(i, k).iter().enumerate() {
                let jet = &qp.jet;
                if !(jet.det() > 0.0) {
                    return Err(Error::SingularJacobian {
                        rho: jet.rho,
                        theta: jet.theta,
                    });
                }
                let row = &grid.table[q];
                let cq = c[cell * QUAD_PER_CELL + q];
                let mut grads = [[0.0; 2]; 16];
                for l in 0..16 {
                    grads[l] = jet.gradient(row[l][1] * ih, row[l][2] * it);
                }
                let w = qp.weight;
                for a in 0..16 {
                    let (ga, pa) = (grads[a], row[a][0]);
                    for b in a..16 {
                        let v = ga[0] * grads[b][0] + ga[1] * grads[b][1] + cq * pa * row[b][0];
                        ke[a][b] += w * v;
                    }
                }
            }
            for a in 0..16 {
                for b in 0..a {
                    ke[a][b] = ke[b][a];
                }
            }
            for a in 0..16 {
                let (ni, nk) = local_node(n, i, k, a);
                let (ea, la) = grid.dof_expansion(ni, nk, a % 4);
                for &(ra, ca) in &ea[..*la] {
                    if ra >= nu {
                        continue;
                    }
                    for b in 0..16 {
                        let (mi, mk) = local_node(n, i, k, b);
                        let (eb, lb) = grid.dof_expansion(mi, mk, b % 4);
                        for &(rb, cb) in &eb[..*lb] {
                            let v = ca * cb * ke[a][b];
                            if rb < nu {
                                triplets.push(Triplet::new(ra, rb, v));
                            } else {
                                *coupling_dense.entry((ra, rb - nu)).or_insert(0.0) += v;
                            }
                        }
                    }
                }
            }
        }
    }
    let matrix = SparseColMat::try_new_from_triplets(nu, nu, &triplets)
        .map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
    let mut coupling: Vec<_> = coupling_dense
        .into_iter()
        .map(|((r, s), v)| (r, s, v))
        .collect();
    coupling.sort_by_key(|&(r, s, _)| (r, s));
    Ok(Assembled { matrix, coupling })
}

/// Load vector `−∫ g φ` for `g` sampled at the quadrature points.
fn load_vector(grid: &FemGrid, g: &[f64]) -> Vec<f64> {
    assert_eq!(
        g.len(),
        grid.quad.len(),
        "load must be sampled at every quadrature point"
    );
    let n = grid.n;
    let nu = grid.num_unknowns();
    let mut rhs = vec![0.0; nu];
    for i in 0..n {
        for k in 0..n {
            let cell = i * n + k;
            let mut fe = [0.0f64; 16];
            for (q, qp) in grid.cell_quad(i, k).iter().enumerate() {
                let wg = qp.weight * g[cell * QUAD_PER_CELL + q];
                if wg == 0.0 {
                    continue;
                }
                let row = &grid.table[q];
                for l in 0..16 {
                    fe[l] -= wg * row[l][0];
                }
            }
            for (a, &f) in fe.iter().enumerate() {
                let (ni, nk) = local_node(n, i, k, a);
                let (ea, la) = grid.dof_expansion(ni, nk, a % 4);
                for &(ra, ca) in &ea[..*la] {
                    if ra < nu {
                        rhs[ra] += ca * f;
                    }
                }
            }
        }
    }
    rhs
}

fn lift(rhs: &mut [f64], coupling: &[(usize, usize, f64)], slots: &[f64]) {
    for &(r, s, v) in coupling {
        rhs[r] -= v * slots[s];
    }
}

fn matvec(a: &SparseColMat<usize, f64>, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; a.nrows()];
    let (cp, ri, val) = (a.col_ptr(), a.row_idx(), a.val());
    for j in 0..a.ncols() {
        let xj = x[j];
        for p in cp[j]..cp[j + 1] {
            y[ri[p]] += val[p] * xj;
        }
    }
    y
}

fn factor(matrix: &SparseColMat<usize, f64>) -> Result<Lu<usize, f64>> {
    matrix
        .sp_lu()
        .map_err(|e| Error::LinearSolve(format!("{e:?}")))
}

fn solve_with(
    grid: &Arc<FemGrid>,
    matrix: &SparseColMat<usize, f64>,
    lu: &Lu<usize, f64>,
    rhs: &[f64],
    slots: &[f64],
) -> Result<FemSolution> {
    let b = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
    let x = lu.solve(&b);
    let sol: Vec<f64> = (0..rhs.len()).map(|i| x[(i, 0)]).collect();
    let ax = matvec(matrix, &sol);
    let bnorm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    let rnorm = ax
        .iter()
        .zip(rhs)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    if !rnorm.is_finite() || rnorm > RESIDUAL_TOL * bnorm {
        return Err(Error::LinearSolve(format!(
            "relative residual {:e}",
            rnorm / bnorm
        )));
    }
    Ok(FemSolution::from_unknowns(grid.clone(), &sol, slots))
}

/// Assemble `Δu − c u = g` with Dirichlet data; `c` and `g` are sampled at the
/// grid quadrature points.
pub fn assemble(
    grid: &Arc<FemGrid>,
    c: &[f64],
    g: &[f64],
    dirichlet: &Dirichlet,
) -> Result<LinearSystem> {
    let a = assemble_matrix(grid, c)?;
    let slots = dirichlet.slots(grid);
    let mut rhs = load_vector(grid, g);
    lift(&mut rhs, &a.coupling, &slots);
    Ok(LinearSystem {
        grid: grid.clone(),
        matrix: a.matrix,
        rhs,
        dirichlet_slots: slots,
    })
}

/// Direct sparse solve of an assembled system.
pub fn solve_linear(system: &LinearSystem) -> Result<FemSolution> {
    let lu = factor(&system.matrix)?;
    solve_with(
        &system.grid,
        &system.matrix,
        &lu,
        &system.rhs,
        &system.dirichlet_slots,
    )
}

impl Operator {
    pub fn new(grid: Arc<FemGrid>, c: &[f64]) -> Result<Self> {
        let a = assemble_matrix(&grid, c)?;
        let lu = factor(&a.matrix)?;
        Ok(Operator {
            grid,
            matrix: a.matrix,
            lu,
            coupling: a.coupling,
        })
    }

    /// Operator with `c ≡ 0`.
    pub fn laplacian(grid: Arc<FemGrid>) -> Result<Self> {
        let c = vec![0.0; grid.quad.len()];
        Self::new(grid, &c)
    }

    /// Solve `Δu − c u = g` for a new load and Dirichlet data.
    pub fn solve(&self, g: &[f64], dirichlet: &Dirichlet) -> Result<FemSolution> {
        let slots = dirichlet.slots(&self.grid);
        let mut rhs = load_vector(&self.grid, g);
        lift(&mut rhs, &self.coupling, &slots);
        solve_with(&self.grid, &self.matrix, &self.lu, &rhs, &slots)
    }

    pub fn num_unknowns(&self) -> usize {
        self.matrix.nrows()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundaryCurve;

    fn disk(n: usize) -> Arc<FemGrid> {
        Arc::new(FemGrid::new(
            Arc::new(BoundaryCurve::circle([0.0, 0.0], 1.0).unwrap()),
            n,
        ))
    }

    #[test]
    fn zero_problem_gives_zero() {
        let g = disk(6);
        let z = vec![0.0; g.quad.len()];
        let sys = assemble(&g, &z, &z, &Dirichlet::zero(6)).unwrap();
        let sol = solve_linear(&sys).unwrap();
        assert!(sol.dofs.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sparse_solve_matches_dense_lu() {
        let g = disk(8);
        let c: Vec<f64> = g.quad.iter().map(|q| 1.0 + q.jet.x * q.jet.x).collect();
        let load: Vec<f64> = g.quad.iter().map(|q| 4.0 + q.jet.y).collect();
        let bc = Dirichlet::from_physical(&g, |x, y| (x * y, [y, x]));
        let sys = assemble(&g, &c, &load, &bc).unwrap();
        let sparse = solve_linear(&sys).unwrap();

        let n = sys.matrix.nrows();
        let mut dense = Mat::<f64>::zeros(n, n);
        let (cp, ri, val) = (sys.matrix.col_ptr(), sys.matrix.row_idx(), sys.matrix.val());
        for j in 0..n {
            for p in cp[j]..cp[j + 1] {
                dense[(ri[p], j)] += val[p];
            }
        }
        let b = Mat::from_fn(n, 1, |i, _| sys.rhs[i]);
        let x = dense.partial_piv_lu().solve(&b);
        let xs: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
        let dense_sol = FemSolution::from_unknowns(g.clone(), &xs, &sys.dirichlet_slots);
        for (a, b) in sparse.dofs.iter().zip(&dense_sol.dofs) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn matrix_is_symmetric() {
        let g = disk(5);
        let c: Vec<f64> = g.quad.iter().map(|q| q.jet.x.exp()).collect();
        let a = assemble_matrix(&g, &c).unwrap().matrix;
        let n = a.nrows();
        let mut dense = vec![0.0; n * n];
        let (cp, ri, val) = (a.col_ptr(), a.row_idx(), a.val());
        for j in 0..n {
            for p in cp[j]..cp[j + 1] {
                dense[ri[p] * n + j] += val[p];
            }
        }
        for i in 0..n {
            for j in 0..i {
                assert!((dense[i * n + j] - dense[j * n + i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn operator_reuse_matches_fresh_assembly() {
        let g = disk(8);
        let c = vec![0.5; g.quad.len()];
        let op = Operator::new(g.clone(), &c).unwrap();
        for shift in [0.0, 1.0] {
            let load: Vec<f64> = g.quad.iter().map(|q| q.jet.x + shift).collect();
            let bc = Dirichlet::from_physical(&g, |x, _| (x + shift, [1.0, 0.0]));
            let a = op.solve(&load, &bc).unwrap();
            let b = solve_linear(&assemble(&g, &c, &load, &bc).unwrap()).unwrap();
            for (p, q) in a.dofs.iter().zip(&b.dofs) {
                assert!((p - q).abs() < 1e-12);
            }
        }
    }
}
