//! Convergence sweeps, error metrics and CSV output.

mod naive;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use naive::{naive_fd, naive_hermite};

use crate::error::{Error, Result};
use crate::fem::{picard_solve, Dirichlet, FemGrid, FemSolution, FieldJet};
use crate::pipeline::{run_full, DerivativeSet, PipelineConfig};
use crate::problems::{magnetic_axis, ExactFn, Problem};
use crate::squad::QbxConfig;

pub const CSV_HEADER: &str =
    "problem,method,N,err_u,err_ux,err_uy,err_uxx,err_uxy,err_uyy,err_axis,picard_iters,t_fem_s,t_qbx_s,t_dtn_s,t_total_s";

/// Errors below this are treated as round-off plateau when fitting slopes.
pub const TAIL_DROP: f64 = 1e-11;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    New,
    NaiveHermite,
    NaiveFd,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::New => "new",
            Method::NaiveHermite => "naive_hermite",
            Method::NaiveFd => "naive_fd",
        }
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "new" => Ok(Method::New),
            "naive_hermite" => Ok(Method::NaiveHermite),
            "naive_fd" => Ok(Method::NaiveFd),
            _ => Err(Error::Config(format!("unknown method '{s}'"))),
        }
    }
}

/// Sweep configuration; the JSON config file has the same fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: String,
    pub n_list: Vec<usize>,
    pub methods: Vec<Method>,
    pub qbx: QbxConfig,
    pub eps: f64,
    pub smooth_spectral: bool,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: "iter".into(),
            n_list: vec![16, 32, 64, 128, 256],
            methods: vec![Method::New, Method::NaiveHermite],
            qbx: QbxConfig::default(),
            eps: PipelineConfig::default().picard_eps,
            smooth_spectral: false,
            out: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(n) = self.n_list.iter().find(|&&n| n < 8 || !n.is_power_of_two()) {
            return Err(Error::Config(format!("N = {n} is not a power of two >= 8")));
        }
        if self.n_list.is_empty() || self.methods.is_empty() {
            return Err(Error::Config("empty N list or method set".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::Config(format!(
                "Picard tolerance must be positive, got {}",
                self.eps
            )));
        }
        self.qbx.validate()
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            qbx: self.qbx,
            picard_eps: self.eps,
            smooth_spectral: self.smooth_spectral,
            ..Default::default()
        }
    }
}

/// Metrics of one `(N, method)` cell. `None` marks a metric that does not apply.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub problem: String,
    pub method: Method,
    pub n: usize,
    pub err_u: Option<f64>,
    pub err_ux: Option<f64>,
    pub err_uy: Option<f64>,
    pub err_uxx: Option<f64>,
    pub err_uxy: Option<f64>,
    pub err_uyy: Option<f64>,
    pub err_axis: Option<f64>,
    pub picard_iters: Option<usize>,
    pub t_fem: Option<f64>,
    pub t_qbx: Option<f64>,
    pub t_dtn: Option<f64>,
    pub t_total: Option<f64>,
    pub failed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    U,
    Ux,
    Uy,
    Uxx,
    Uxy,
    Uyy,
    Axis,
}

impl Field {
    pub const ALL: [Field; 7] = [
        Field::U,
        Field::Ux,
        Field::Uy,
        Field::Uxx,
        Field::Uxy,
        Field::Uyy,
        Field::Axis,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Field::U => "u",
            Field::Ux => "u_x",
            Field::Uy => "u_y",
            Field::Uxx => "u_xx",
            Field::Uxy => "u_xy",
            Field::Uyy => "u_yy",
            Field::Axis => "axis",
        }
    }
}

impl ConvergenceRecord {
    /// A record with every metric absent.
    pub fn empty(problem: &str, method: Method, n: usize) -> Self {
        ConvergenceRecord {
            problem: problem.into(),
            method,
            n,
            err_u: None,
            err_ux: None,
            err_uy: None,
            err_uxx: None,
            err_uxy: None,
            err_uyy: None,
            err_axis: None,
            picard_iters: None,
            t_fem: None,
            t_qbx: None,
            t_dtn: None,
            t_total: None,
            failed: false,
        }
    }

    fn failure(problem: &str, method: Method, n: usize) -> Self {
        ConvergenceRecord {
            failed: true,
            ..Self::empty(problem, method, n)
        }
    }

    pub fn error(&self, field: Field) -> Option<f64> {
        match field {
            Field::U => self.err_u,
            Field::Ux => self.err_ux,
            Field::Uy => self.err_uy,
            Field::Uxx => self.err_uxx,
            Field::Uxy => self.err_uxy,
            Field::Uyy => self.err_uyy,
            Field::Axis => self.err_axis,
        }
    }

    pub fn csv_row(&self) -> String {
        let f = |v: Option<f64>| match (self.failed, v) {
            (true, _) => "NaN".to_string(),
            (false, Some(x)) => format!("{x:e}"),
            (false, None) => String::new(),
        };
        let iters = match (self.failed, self.picard_iters) {
            (true, _) => "NaN".to_string(),
            (false, Some(i)) => i.to_string(),
            (false, None) => String::new(),
        };
        [
            self.problem.clone(),
            self.method.as_str().to_string(),
            self.n.to_string(),
            f(self.err_u),
            f(self.err_ux),
            f(self.err_uy),
            f(self.err_uxx),
            f(self.err_uxy),
            f(self.err_uyy),
            f(self.err_axis),
            iters,
            f(self.t_fem),
            f(self.t_qbx),
            f(self.t_dtn),
            f(self.t_total),
        ]
        .join(",")
    }
}

pub fn to_csv(records: &[ConvergenceRecord]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(s, "{}", r.csv_row());
    }
    s
}

pub fn write_csv(records: &[ConvergenceRecord], path: impl AsRef<Path>) -> Result<()> {
    Ok(std::fs::write(path, to_csv(records))?)
}

/// L² errors of the value and derivative jets at the quadrature points.
fn jet_errors(grid: &FemGrid, jets: &[FieldJet], exact: &ExactFn) -> [f64; 6] {
    let ex: Vec<FieldJet> = grid.quad.iter().map(|q| exact(q.jet.x, q.jet.y)).collect();
    let err = |pick: fn(&FieldJet) -> f64| {
        grid.quad
            .iter()
            .zip(jets.iter().zip(&ex))
            .map(|(q, (a, b))| q.weight * (pick(a) - pick(b)).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    [
        err(|j| j.value),
        err(|j| j.grad[0]),
        err(|j| j.grad[1]),
        err(|j| j.hess[0]),
        err(|j| j.hess[1]),
        err(|j| j.hess[2]),
    ]
}

/// Derivative jets of the new method at the quadrature points.
pub fn new_method_jets(d: &DerivativeSet) -> Vec<FieldJet> {
    let u = d.u.values_at_quadrature();
    let ux = d.u_x.values_at_quadrature();
    let uy = d.u_y.values_at_quadrature();
    let uxx = d.u_xx.values_at_quadrature();
    let uxy = d.u_xy.values_at_quadrature();
    (0..u.len())
        .map(|i| FieldJet {
            value: u[i],
            grad: [ux[i], uy[i]],
            hess: [uxx[i], uxy[i], d.u_yy[i]],
        })
        .collect()
}

/// Axis error for a field giving `(u, u_x)` on the midplane.
fn axis_error(problem: &Problem, field: impl Fn(f64) -> (f64, f64)) -> Option<f64> {
    let exact = problem.exact_axis()?;
    let (a, b) = problem.midplane_chord();
    Some(
        magnetic_axis(field, a, b)
            .map(|x| (x - exact).abs())
            .unwrap_or(f64::NAN),
    )
}

fn logical_on_midplane(problem: &Problem, x: f64) -> (f64, f64) {
    problem.curve.to_mapped([x, problem.curve.center[1]])
}

/// `(u, u_x)` from the Hermite patches of `u`.
fn hermite_midplane(problem: &Problem, u: &FemSolution, x: f64) -> (f64, f64) {
    let (r, t) = logical_on_midplane(problem, x);
    let j = u.eval(r, t);
    (j.value, j.grad[0])
}

/// Magnetic-axis error using the solved `u_x` field.
pub fn axis_error_new(problem: &Problem, d: &DerivativeSet) -> Option<f64> {
    axis_error(problem, |x| {
        let (r, t) = logical_on_midplane(problem, x);
        (d.u.eval(r, t).value, d.u_x.eval(r, t).value)
    })
}

/// Record of the new method from a computed derivative set.
pub fn new_method_record(problem: &Problem, d: &DerivativeSet) -> ConvergenceRecord {
    let exact = problem.exact.as_ref();
    let n = d.u.grid.n;
    let mut r = ConvergenceRecord::empty(&problem.name, Method::New, n);
    if let Some(ex) = exact {
        let e = jet_errors(&d.u.grid, &new_method_jets(d), ex);
        r.err_u = Some(e[0]);
        r.err_ux = Some(e[1]);
        r.err_uy = Some(e[2]);
        r.err_uxx = Some(e[3]);
        r.err_uxy = Some(e[4]);
        r.err_uyy = Some(e[5]);
        r.err_axis = axis_error_new(problem, d);
    }
    r.picard_iters = Some(d.picard_iterations);
    r.t_fem = Some(d.timings.fem);
    r.t_qbx = Some(d.timings.qbx);
    r.t_dtn = Some(d.timings.dtn);
    r.t_total = Some(d.timings.total);
    r
}

/// Record of a baseline evaluated on the solved `u`.
pub fn naive_record(
    problem: &Problem,
    method: Method,
    u: &FemSolution,
    iters: usize,
    t_fem: f64,
) -> ConvergenceRecord {
    let exact = problem.exact.as_ref();
    let start = Instant::now();
    let mut r = ConvergenceRecord::empty(&problem.name, method, u.grid.n);
    let jets = match method {
        Method::NaiveFd => naive_fd(u),
        _ => naive_hermite(u),
    };
    if let Some(ex) = exact {
        let e = jet_errors(&u.grid, &jets, ex);
        r.err_u = Some(e[0]);
        r.err_ux = Some(e[1]);
        r.err_uy = Some(e[2]);
        r.err_uxx = Some(e[3]);
        r.err_uxy = Some(e[4]);
        r.err_uyy = Some(e[5]);
        r.err_axis = axis_error(problem, |x| hermite_midplane(problem, u, x));
    }
    r.picard_iters = Some(iters);
    r.t_fem = Some(t_fem);
    r.t_total = Some(t_fem + start.elapsed().as_secs_f64());
    r
}

/// Records for every method at one `N`, sharing the solve of `u`.
pub fn run_cell(
    problem: &Problem,
    n: usize,
    methods: &[Method],
    cfg: &PipelineConfig,
) -> Vec<ConvergenceRecord> {
    let mut out = Vec::new();
    let mut base: Option<(FemSolution, usize, f64)> = None;
    if methods.contains(&Method::New) {
        match run_full(problem, n, cfg) {
            Ok(d) => {
                out.push(new_method_record(problem, &d));
                base = Some((d.u.clone(), d.picard_iterations, d.timings.fem));
            }
            Err(_) => out.push(ConvergenceRecord::failure(&problem.name, Method::New, n)),
        }
    }
    let naive: Vec<Method> = methods
        .iter()
        .copied()
        .filter(|m| *m != Method::New)
        .collect();
    if naive.is_empty() {
        return out;
    }
    if base.is_none() {
        let start = Instant::now();
        let grid = Arc::new(FemGrid::new(problem.curve.clone(), n));
        let dirichlet = Dirichlet {
            values: vec![problem.boundary_value; n],
            dtheta: vec![0.0; n],
        };
        if let Ok(o) = picard_solve(
            &grid,
            problem.source.as_ref(),
            None,
            &dirichlet,
            cfg.picard(),
        ) {
            base = Some((o.solution, o.iterations, start.elapsed().as_secs_f64()));
        }
    }
    for m in naive {
        out.push(match &base {
            Some((u, it, t)) => naive_record(problem, m, u, *it, *t),
            None => ConvergenceRecord::failure(&problem.name, m, n),
        });
    }
    out
}

/// One record per `(N, method)` in `N`-major, method-list order.
pub fn run_sweep(cfg: &RunConfig) -> Result<Vec<ConvergenceRecord>> {
    cfg.validate()?;
    let problem = Problem::by_name(&cfg.problem)?;
    let pipe = cfg.pipeline();
    let mut records = Vec::new();
    for &n in &cfg.n_list {
        let cell = run_cell(&problem, n, &cfg.methods, &pipe);
        for m in &cfg.methods {
            records.extend(cell.iter().filter(|r| r.method == *m).cloned());
        }
    }
    if let Some(dir) = &cfg.out {
        std::fs::create_dir_all(dir)?;
        write_csv(&records, dir.join(format!("{}.csv", problem.name)))?;
        std::fs::write(
            dir.join(format!("{}.config.json", problem.name)),
            serde_json::to_string_pretty(cfg)?,
        )?;
    }
    Ok(records)
}

/// Least-squares slope of `log err` against `log N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    /// Slope after dropping errors below [`TAIL_DROP`].
    pub slope: f64,
    /// Slope through every finite point.
    pub raw_slope: f64,
    pub points: usize,
}

fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mx, my) = (sx / m, sy / m);
    let (num, den) = pts.iter().fold((0.0, 0.0), |(a, b), p| {
        (a + (p.0 - mx) * (p.1 - my), b + (p.0 - mx).powi(2))
    });
    num / den
}

/// Convergence slope of `field` for one method's records.
///
/// `min_points` is usually 3; two-point fits are allowed for short sweeps.
pub fn fit_order(
    records: &[ConvergenceRecord],
    method: Method,
    field: Field,
    min_points: usize,
) -> Result<OrderFit> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.method == method && !r.failed)
        .filter_map(|r| {
            r.error(field)
                .filter(|e| e.is_finite() && *e > 0.0)
                .map(|e| ((r.n as f64).ln(), e.ln()))
        })
        .collect();
    let kept: Vec<(f64, f64)> = pts
        .iter()
        .copied()
        .filter(|p| p.1 >= TAIL_DROP.ln())
        .collect();
    if kept.len() < min_points.max(2) {
        return Err(Error::TooFewPoints(kept.len()));
    }
    Ok(OrderFit {
        slope: ls_slope(&kept),
        raw_slope: ls_slope(&pts),
        points: kept.len(),
    })
}

/// Ratio `naive / new` of one field at one `N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub n: usize,
    pub method: Method,
    pub field: Field,
    pub ratio: f64,
}

/// Per-field error ratios of every baseline against the new method.
pub fn compare_methods(records: &[ConvergenceRecord]) -> Vec<Comparison> {
    let mut out = Vec::new();
    for new in records
        .iter()
        .filter(|r| r.method == Method::New && !r.failed)
    {
        for naive in records
            .iter()
            .filter(|r| r.method != Method::New && r.n == new.n && !r.failed)
        {
            for field in Field::ALL {
                if let (Some(a), Some(b)) = (naive.error(field), new.error(field)) {
                    out.push(Comparison {
                        n: new.n,
                        method: naive.method,
                        field,
                        ratio: a / b,
                    });
                }
            }
        }
    }
    out
}

/// True when the error never decreases from one `N` to the next.
pub fn non_convergent(records: &[ConvergenceRecord], method: Method, field: Field) -> bool {
    let mut errs: Vec<(usize, f64)> = records
        .iter()
        .filter(|r| r.method == method)
        .filter_map(|r| r.error(field).map(|e| (r.n, e)))
        .collect();
    errs.sort_by_key(|p| p.0);
    errs.len() >= 2 && errs.windows(2).all(|w| w[1].1 >= w[0].1)
}
