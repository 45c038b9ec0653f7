use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use shafranov_core::harness::{new_method_record, run_sweep, to_csv, Method, RunConfig};
use shafranov_core::pipeline::run_full;
use shafranov_core::problems::Problem;

#[derive(Parser)]
#[command(
    name = "shafranov",
    version,
    about = "Grad-Shafranov solver with high-order derivative recovery"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve once at one N and write the solution and derivative fields as JSON.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: usize,
    },
    /// Convergence sweep over N and methods, written as CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated powers of two >= 8.
        #[arg(long, value_delimiter = ',')]
        n_list: Option<Vec<usize>>,
        /// Comma-separated subset of new, naive_hermite, naive_fd.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<Method>>,
    },
}

/// Flags shared by both commands; each overrides the config file value.
#[derive(Args)]
struct Common {
    /// JSON file with the RunConfig fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// iter, nstx, pb or custom:<file>.
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    qbx_p: Option<usize>,
    #[arg(long)]
    qbx_r_factor: Option<f64>,
    /// Picard tolerance.
    #[arg(long)]
    eps: Option<f64>,
    /// Truncate the top third of boundary modes before the second stage.
    #[arg(long)]
    smooth_spectral: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                RunConfig::load(p).with_context(|| format!("reading config {}", p.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(p) = &self.problem {
            cfg.problem = p.clone();
        }
        if let Some(p) = self.qbx_p {
            cfg.qbx.p = p;
        }
        if let Some(r) = self.qbx_r_factor {
            cfg.qbx.r_factor = r;
        }
        if let Some(e) = self.eps {
            cfg.eps = e;
        }
        cfg.smooth_spectral |= self.smooth_spectral;
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        Ok(cfg)
    }
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<()> {
    let path = dir.join(format!("{name}.json"));
    std::fs::write(&path, serde_json::to_string(value)?)
        .with_context(|| format!("writing {}", path.display()))
}

fn solve(cfg: RunConfig, n: usize) -> Result<()> {
    RunConfig {
        n_list: vec![n],
        ..cfg.clone()
    }
    .validate()?;
    let problem = Problem::by_name(&cfg.problem)?;
    let d = run_full(&problem, n, &cfg.pipeline())?;
    let dir = cfg
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}_n{n}", problem.name)));
    std::fs::create_dir_all(&dir)?;
    write_json(&dir, "u", &d.u)?;
    write_json(&dir, "u_x", &d.u_x)?;
    write_json(&dir, "u_y", &d.u_y)?;
    write_json(&dir, "u_xx", &d.u_xx)?;
    write_json(&dir, "u_xy", &d.u_xy)?;
    write_json(&dir, "u_yy", &d.u_yy)?;
    write_json(&dir, "boundary", &d.boundary)?;
    let record = new_method_record(&problem, &d);
    write_json(&dir, "record", &record)?;
    print!("{}", to_csv(&[record]));
    eprintln!("wrote {}", dir.display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Solve { common, n } => solve(common.resolve()?, n),
        Command::Sweep {
            common,
            n_list,
            methods,
        } => {
            let mut cfg = common.resolve()?;
            if let Some(n) = n_list {
                cfg.n_list = n;
            }
            if let Some(m) = methods {
                cfg.methods = m;
            }
            let records = run_sweep(&cfg)?;
            print!("{}", to_csv(&records));
            Ok(())
        }
    }
}
