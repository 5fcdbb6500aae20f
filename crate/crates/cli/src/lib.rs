//! Experiment runner for moving partition-of-unity covers.
//!
//! An [`ExperimentConfig`] names an initial condition, a velocity field and a
//! schedule; [`run`] builds the interpolant, advances it and writes the
//! requested artifacts under the output directory.

pub mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chebpu::dynamics::{run_simulation, MovingCover, VolumeLog};
use chebpu::interface::{extract_interface, reconstruct_curve, Seeding};
use chebpu::{Error, PUInterpolant};
use serde::Serialize;

pub use config::{preset, Coordinates, EmitKind, ExperimentConfig, PRESETS};

/// Failures of a run, grouped by exit category.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Config(String),
}

impl RunError {
    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 3,
            RunError::Io { .. } => 6,
            RunError::Core(e) => match e {
                Error::InvalidInterval { .. }
                | Error::ZeroDegree
                | Error::TooFewSamples { .. }
                | Error::DimensionMismatch { .. }
                | Error::InvalidParameter(_)
                | Error::FieldRejected(_) => 3,
                Error::CoverIntegrity(_)
                | Error::OutsideDomain { .. }
                | Error::Geometry(_)
                | Error::DegenerateCurve(_) => 4,
                Error::NonFinite { .. }
                | Error::TrajectoryMismatch { .. }
                | Error::DegenerateGradient { .. }
                | Error::NoInterfaceInReach { .. }
                | Error::RootNotConverged { .. } => 5,
            },
        }
    }
}

pub type RunResult<T> = std::result::Result<T, RunError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Read a JSON experiment description.
pub fn load_config(path: &Path) -> RunResult<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))
}

#[derive(Clone, Debug, Serialize)]
pub struct Emission {
    pub t: f64,
    pub snapshot: Option<PathBuf>,
    pub field: Option<PathBuf>,
    /// First moments over the mass.
    pub center_of_mass: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReconstructionStats {
    pub t: f64,
    pub patches: usize,
    pub points: usize,
    pub skipped: usize,
    pub max_residual: f64,
    pub max_curvature_error: Option<f64>,
    pub perimeter: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub name: String,
    pub patches: usize,
    pub steps: usize,
    pub v0: f64,
    pub max_volume_error: f64,
    pub wall_time_s: f64,
    pub emissions: Vec<Emission>,
    pub reconstructions: Vec<ReconstructionStats>,
    #[serde(skip)]
    pub volume_log: VolumeLog,
}

impl RunReport {
    pub fn summary(&self) -> String {
        let mut s = format!(
            "{}: {} patches, {} steps, v0 = {:.16e}, max |v - v0| = {:.3e}, {:.2} s",
            self.name, self.patches, self.steps, self.v0, self.max_volume_error, self.wall_time_s
        );
        for r in &self.reconstructions {
            s.push_str(&format!(
                "\n  interface at t = {}: {} points from {} patches, max residual {:.1e}",
                r.t, r.points, r.patches, r.max_residual
            ));
            if let Some(e) = r.max_curvature_error {
                s.push_str(&format!(", max curvature error {e:.1e}"));
            }
        }
        s
    }
}

/// Build the initial interpolant for a config.
pub fn initial_interpolant(config: &ExperimentConfig) -> RunResult<PUInterpolant> {
    let domain = config.domain_rect()?;
    let ic = &config.initial;
    let coords = config.coordinates;
    Ok(PUInterpolant::build(
        &|p: &[f64]| ic.eval(coords, p),
        domain,
        config.cover.clone(),
    )?)
}

fn near(ts: &[f64], t: f64) -> bool {
    ts.iter().any(|s| (s - t).abs() <= 1e-9)
}

fn time_tag(t: f64) -> String {
    format!("{t:.4}")
}

struct Writer<'a> {
    config: &'a ExperimentConfig,
    interface_rows: Vec<(f64, chebpu::interface::InterfacePoint)>,
    emissions: Vec<Emission>,
    reconstructions: Vec<ReconstructionStats>,
}

impl Writer<'_> {
    fn wants(&self, kind: EmitKind) -> bool {
        self.config.emit.kinds.contains(&kind)
    }

    fn observe(&mut self, mover: &MovingCover) -> RunResult<()> {
        let t = mover.time();
        let f = mover.interpolant();
        if near(&self.config.emit.times, t) {
            let dir = &self.config.out_dir;
            let mut e = Emission {
                t,
                snapshot: None,
                field: None,
                center_of_mass: Some(f.center_of_mass()?.by_mass),
            };
            if self.wants(EmitKind::Patches) {
                let path = dir.join(format!("snapshot_t{}.json", time_tag(t)));
                fs::write(&path, f.cover().to_json()?).map_err(io_err(&path))?;
                e.snapshot = Some(path);
            }
            if self.wants(EmitKind::Field) {
                let path = dir.join(format!("field_t{}.csv", time_tag(t)));
                write_field(&path, f, self.config.emit.field_resolution)?;
                e.field = Some(path);
            }
            self.emissions.push(e);
        }
        if let Some(recon) = &self.config.reconstruction {
            if near(&recon.at, t) {
                let seeding = Seeding {
                    tangent: recon.tangent_seeds,
                    ..Seeding::default()
                };
                let ex = extract_interface(f, recon.band[0], recon.band[1], seeding)?;
                let center = f.center_of_mass()?.by_mass;
                let (n_patches, skipped) = (ex.patches.len(), ex.skipped.len());
                let curve = reconstruct_curve(ex.points, &center)?;
                let max_residual = curve.points.iter().fold(0.0_f64, |m, p| m.max(p.residual));
                let max_curvature_error = recon.exact_curvature.map(|k| {
                    curve
                        .points
                        .iter()
                        .map(|p| p.curvature.map_or(f64::INFINITY, |c| (c - k).abs()))
                        .fold(0.0, f64::max)
                });
                self.reconstructions.push(ReconstructionStats {
                    t,
                    patches: n_patches,
                    points: curve.points.len(),
                    skipped,
                    max_residual,
                    max_curvature_error,
                    perimeter: curve.perimeter(),
                });
                self.interface_rows
                    .extend(curve.points.into_iter().map(|p| (t, p)));
            }
        }
        Ok(())
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> RunError + '_ {
    move |e| RunError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    }
}

fn write_field(path: &Path, f: &PUInterpolant, n: usize) -> RunResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let domain = f.cover().domain();
    let axis = |d: usize| {
        let s = domain.side(d);
        (0..n)
            .map(move |i| s.lo() + (s.hi() - s.lo()) * i as f64 / (n - 1) as f64)
            .collect::<Vec<_>>()
    };
    if f.dim() == 1 {
        w.write_record(["x", "f"]).map_err(csv_err(path))?;
        for x in axis(0) {
            let v = f.eval(&[x])?;
            w.serialize((x, v)).map_err(csv_err(path))?;
        }
    } else {
        w.write_record(["x", "y", "f"]).map_err(csv_err(path))?;
        let ys = axis(1);
        for x in axis(0) {
            for &y in &ys {
                let v = f.eval(&[x, y])?;
                w.serialize((x, y, v)).map_err(csv_err(path))?;
            }
        }
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

fn write_volume_log(path: &Path, log: &VolumeLog) -> RunResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["t", "v", "err"]).map_err(csv_err(path))?;
    for e in &log.entries {
        w.serialize((e.t, e.volume, e.error))
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

fn write_interface(
    path: &Path,
    rows: &[(f64, chebpu::interface::InterfacePoint)],
    exact: Option<f64>,
) -> RunResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["t", "x", "y", "tau", "kappa", "kappa_err"])
        .map_err(csv_err(path))?;
    for (t, p) in rows {
        let err = match (exact, p.curvature) {
            (Some(k), Some(c)) => Some((c - k).abs()),
            _ => None,
        };
        w.serialize((t, p.position[0], p.position[1], p.tau, p.curvature, err))
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Run an experiment end to end and write its artifacts.
pub fn run(config: &ExperimentConfig) -> RunResult<RunReport> {
    config.validate()?;
    let start = Instant::now();
    let field = config.field.build()?;
    let mut f = initial_interpolant(config)?;
    let patches = f.cover().len();
    fs::create_dir_all(&config.out_dir).map_err(io_err(&config.out_dir))?;

    let mut writer = Writer {
        config,
        interface_rows: Vec::new(),
        emissions: Vec::new(),
        reconstructions: Vec::new(),
    };
    // the observer can only return core errors, so stash anything else
    let mut side_err = None;
    let sim = run_simulation(&mut f, &field, &config.sim, |mover| {
        writer.observe(mover).map_err(|e| match e {
            RunError::Core(e) => e,
            other => {
                let msg = other.to_string();
                side_err = Some(other);
                Error::InvalidParameter(msg)
            }
        })
    });
    if let Some(e) = side_err {
        return Err(e);
    }
    let log = sim?;

    let dir = &config.out_dir;
    if config.emit.kinds.contains(&EmitKind::Volume) {
        write_volume_log(&dir.join("volume_log.csv"), &log)?;
    }
    if config.reconstruction.is_some() && config.emit.kinds.contains(&EmitKind::Interface) {
        let exact = config
            .reconstruction
            .as_ref()
            .and_then(|r| r.exact_curvature);
        write_interface(&dir.join("interface.csv"), &writer.interface_rows, exact)?;
    }
    let report = RunReport {
        name: config.name.clone(),
        patches,
        steps: log.entries.len().saturating_sub(1),
        v0: log.initial_volume().unwrap_or(0.0),
        max_volume_error: log.max_error(),
        wall_time_s: start.elapsed().as_secs_f64(),
        emissions: writer.emissions,
        reconstructions: writer.reconstructions,
        volume_log: log,
    };
    let path = dir.join("report.json");
    let text =
        serde_json::to_string_pretty(&report).map_err(|e| RunError::Config(e.to_string()))?;
    let mut file = fs::File::create(&path).map_err(io_err(&path))?;
    writeln!(file, "{text}").map_err(io_err(&path))?;
    Ok(report)
}
