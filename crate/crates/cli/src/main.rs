use std::path::PathBuf;
use std::process::ExitCode;

use chebpu::dynamics::{TrajectoryMode, MIN_SUBSTEPS};
use chebpu_cli::{load_config, preset, run, EmitKind, ExperimentConfig, RunError};
use clap::{ArgGroup, Parser, ValueEnum};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Analytic,
    Rk4,
}

/// Advect a partition-of-unity interpolant through a linear velocity field.
#[derive(Debug, Parser)]
#[command(version, allow_negative_numbers = true, group(ArgGroup::new("source").required(true).args(["experiment", "config"])))]
struct Args {
    /// Built-in experiment (exp1 to exp6).
    #[arg(long)]
    experiment: Option<String>,
    /// JSON experiment description.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Time step.
    #[arg(long)]
    dt: Option<f64>,
    /// Final time.
    #[arg(long)]
    tfin: Option<f64>,
    /// Coefficient tolerance of the adaptive cover.
    #[arg(long)]
    tol: Option<f64>,
    /// Maximum bisection depth per dimension.
    #[arg(long)]
    lmax: Option<u32>,
    /// Highest polynomial degree per axis.
    #[arg(long)]
    max_degree: Option<usize>,
    /// Trajectory integration: closed form or RK4 substeps.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Comma-separated outputs: volume, patches, interface, field.
    #[arg(long, value_delimiter = ',')]
    emit: Option<Vec<EmitKind>>,
    /// Directory for output files; created if missing.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl Args {
    fn config(&self) -> Result<ExperimentConfig, RunError> {
        let mut c = match (&self.experiment, &self.config) {
            (Some(name), _) => preset(name)?,
            (None, Some(path)) => load_config(path)?,
            (None, None) => unreachable!("clap enforces a source"),
        };
        if let Some(dt) = self.dt {
            c.sim.dt = dt;
        }
        if let Some(t) = self.tfin {
            c.sim.t_fin = t;
        }
        if let Some(tol) = self.tol {
            c.cover.tol = tol;
        }
        if let Some(l) = self.lmax {
            c.cover.max_level = l;
        }
        if let Some(n) = self.max_degree {
            c.cover.max_degree = n;
        }
        match self.mode {
            Some(Mode::Analytic) => c.sim.mode = TrajectoryMode::Analytic,
            Some(Mode::Rk4) => {
                c.sim.mode = TrajectoryMode::Numeric {
                    substeps: 4 * MIN_SUBSTEPS,
                }
            }
            None => {}
        }
        if let Some(kinds) = &self.emit {
            c.emit.kinds = kinds.clone();
        }
        if let Some(dir) = &self.out_dir {
            c.out_dir = dir.clone();
        }
        // overrides can move the end time, so drop outputs past it
        let t_end = c.sim.t_fin + 1e-9;
        c.emit.times.retain(|&t| t <= t_end);
        if let Some(r) = &mut c.reconstruction {
            r.at.retain(|&t| t <= t_end);
        }
        Ok(c)
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match args.config().and_then(|c| run(&c)) {
        Ok(report) => {
            println!("{}", report.summary());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
