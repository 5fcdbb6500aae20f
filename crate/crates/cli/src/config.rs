//! Declarative experiment description and the built-in presets.

use std::f64::consts::{FRAC_PI_4, PI};
use std::path::PathBuf;

use chebpu::dynamics::{
    field_from_type, FieldConstants, FieldKind, LinearField, MotionPolicy, SimConfig,
    TimeModulation, TrajectoryMode,
};
use chebpu::{CoverParams, Error, Rect, Result};
use serde::{Deserialize, Serialize};

/// Coordinates of the computational domain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coordinates {
    #[default]
    Cartesian,
    /// Domain axes are `(r, θ)`; shapes are still described in the plane.
    Polar,
}

/// One material body. Each contributes `½ tanh(slope · g) + ½` with `g > 0`
/// inside the body.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    /// Interval `|x - center| < radius` on a line.
    Blob { center: f64, radius: f64 },
    /// Disk of `radius` about `center` in a frame turned by `rotation`.
    Disk {
        center: [f64; 2],
        radius: f64,
        #[serde(default)]
        rotation: f64,
    },
    /// Unit squircle `x⁴ + y⁴ < 1` about `center` in a frame turned by `rotation`.
    Squircle {
        center: [f64; 2],
        #[serde(default)]
        rotation: f64,
    },
    /// Piriform `(1 + (y-1)³)(1 - (y-1)) > 4x²`.
    Pear,
}

impl Shape {
    fn dim(&self) -> usize {
        match self {
            Shape::Blob { .. } => 1,
            _ => 2,
        }
    }

    /// Signed level function, positive inside.
    fn level(&self, p: &[f64]) -> f64 {
        let local = |center: [f64; 2], rotation: f64| {
            let (s, c) = rotation.sin_cos();
            // coordinates in the frame turned by `rotation`, relative to `center`
            [
                c * p[0] + s * p[1] - center[0],
                -s * p[0] + c * p[1] - center[1],
            ]
        };
        match *self {
            Shape::Blob { center, radius } => radius * radius - (p[0] - center).powi(2),
            Shape::Disk {
                center,
                radius,
                rotation,
            } => {
                let [u, v] = local(center, rotation);
                radius * radius - u * u - v * v
            }
            Shape::Squircle { center, rotation } => {
                let [u, v] = local(center, rotation);
                1.0 - u.powi(4) - v.powi(4)
            }
            Shape::Pear => {
                let (x, y) = (p[0], p[1] - 1.0);
                (1.0 + y * y * y) * (1.0 - y) - 4.0 * x * x
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub slope: f64,
    pub shapes: Vec<Shape>,
}

impl InitialCondition {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.slope > 0.0 && self.slope.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "slope must be positive, got {}",
                self.slope
            )));
        }
        if self.shapes.is_empty() {
            return Err(Error::InvalidParameter(
                "initial condition has no shapes".into(),
            ));
        }
        if let Some(s) = self.shapes.iter().find(|s| s.dim() != dim) {
            return Err(Error::InvalidParameter(format!(
                "shape {s:?} does not fit a {dim}D domain"
            )));
        }
        Ok(())
    }

    /// Value at a point of the domain, given in `coords`.
    pub fn eval(&self, coords: Coordinates, p: &[f64]) -> f64 {
        let q = match coords {
            Coordinates::Polar => {
                let (s, c) = p[1].sin_cos();
                [p[0] * c, p[0] * s]
            }
            Coordinates::Cartesian => [p[0], p.get(1).copied().unwrap_or(0.0)],
        };
        self.shapes
            .iter()
            .map(|s| 0.5 * (self.slope * s.level(&q[..p.len()])).tanh() + 0.5)
            .sum()
    }
}

/// Velocity field description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub kind: FieldSpecKind,
    #[serde(default)]
    pub constants: FieldConstants,
    #[serde(default)]
    pub modulation: TimeModulation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldSpecKind {
    Translation,
    PureStrain,
    AngularDeformation,
    PureRotation,
    /// One-dimensional `u = c x + c1`.
    Line,
}

impl FieldSpec {
    pub fn build(&self) -> Result<LinearField> {
        let k = self.constants;
        let base = match self.kind {
            FieldSpecKind::Line => LinearField::line(k.c, k.c1),
            FieldSpecKind::Translation => field_from_type(FieldKind::Translation, k)?,
            FieldSpecKind::PureStrain => field_from_type(FieldKind::PureStrain, k)?,
            FieldSpecKind::AngularDeformation => field_from_type(FieldKind::AngularDeformation, k)?,
            FieldSpecKind::PureRotation => field_from_type(FieldKind::PureRotation, k)?,
        };
        base.with_modulation(self.modulation)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionSpec {
    /// Times at which the interface is extracted.
    pub at: Vec<f64>,
    /// Volume-fraction band of the patches searched.
    pub band: [f64; 2],
    /// Extra seeds along the tangent per patch (0 to 2).
    #[serde(default)]
    pub tangent_seeds: usize,
    /// Known curvature of the interface, for error reporting.
    #[serde(default)]
    pub exact_curvature: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmitKind {
    Volume,
    Patches,
    Interface,
    Field,
}

impl std::str::FromStr for EmitKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "volume" => Ok(EmitKind::Volume),
            "patches" => Ok(EmitKind::Patches),
            "interface" => Ok(EmitKind::Interface),
            "field" => Ok(EmitKind::Field),
            other => Err(format!("unknown output kind '{other}'")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmitSpec {
    /// Snapshot times; must fall on step times.
    pub times: Vec<f64>,
    pub kinds: Vec<EmitKind>,
    /// Samples per axis in field files.
    #[serde(default = "default_resolution")]
    pub field_resolution: usize,
}

fn default_resolution() -> usize {
    101
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub initial: InitialCondition,
    pub domain: Vec<[f64; 2]>,
    #[serde(default)]
    pub coordinates: Coordinates,
    pub field: FieldSpec,
    pub sim: SimConfig,
    #[serde(default)]
    pub cover: CoverParams,
    #[serde(default)]
    pub reconstruction: Option<ReconstructionSpec>,
    pub emit: EmitSpec,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn dim(&self) -> usize {
        self.domain.len()
    }

    pub fn domain_rect(&self) -> Result<Rect> {
        let bounds: Vec<(f64, f64)> = self.domain.iter().map(|&[a, b]| (a, b)).collect();
        Rect::from_bounds(&bounds)
    }

    pub fn validate(&self) -> Result<()> {
        let domain = self.domain_rect()?;
        let dim = domain.dim();
        self.initial.validate(dim)?;
        if self.coordinates == Coordinates::Polar && (dim != 2 || domain.side(0).lo() < 0.0) {
            return Err(Error::InvalidParameter(
                "polar domains need two axes and r >= 0".into(),
            ));
        }
        let field = self.field.build()?;
        if field.dim != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: field.dim,
            });
        }
        self.sim.validate()?;
        self.sim.policy.admits(&field)?;
        self.cover.validate()?;
        if let Some(r) = &self.reconstruction {
            let [lo, hi] = r.band;
            if !(0.0 <= lo && lo < hi && hi <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "invalid band [{lo}, {hi}]"
                )));
            }
            if dim != 2 {
                return Err(Error::InvalidParameter(
                    "reconstruction needs a 2D domain".into(),
                ));
            }
            if r.tangent_seeds > 2 {
                return Err(Error::InvalidParameter("at most 2 tangent seeds".into()));
            }
        }
        if self.emit.field_resolution < 2 {
            return Err(Error::InvalidParameter(
                "field resolution must be at least 2".into(),
            ));
        }
        let times = self.sim.times();
        let on_grid = |t: f64| {
            (t - self.sim.t_init).abs() <= 1e-9 || times.iter().any(|s| (s - t).abs() <= 1e-9)
        };
        let requested = self
            .emit
            .times
            .iter()
            .chain(self.reconstruction.iter().flat_map(|r| r.at.iter()));
        for &t in requested {
            if !on_grid(t) {
                return Err(Error::InvalidParameter(format!(
                    "output time {t} is not a step time"
                )));
            }
        }
        Ok(())
    }
}

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 6] = ["exp1", "exp2", "exp3", "exp4", "exp5", "exp6"];

fn steps(t0: f64, t1: f64, every: f64) -> Vec<f64> {
    let n = ((t1 - t0) / every).round() as usize;
    (1..=n).map(|k| t0 + k as f64 * every).collect()
}

/// Built-in experiment setups.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let out_dir = PathBuf::from("out").join(name);
    let all_kinds = vec![EmitKind::Volume, EmitKind::Patches, EmitKind::Field];
    let blob = InitialCondition {
        slope: 100.0,
        shapes: vec![Shape::Blob {
            center: 0.0,
            radius: 1.0,
        }],
    };
    let cfg = match name {
        "exp1" | "exp2" => ExperimentConfig {
            name: name.into(),
            initial: blob,
            domain: vec![[-4.0, 4.0]],
            coordinates: Coordinates::Cartesian,
            field: FieldSpec {
                kind: FieldSpecKind::Line,
                constants: FieldConstants {
                    c: 0.01,
                    ..Default::default()
                },
                modulation: if name == "exp2" {
                    TimeModulation::Cosine { period: 1.6 }
                } else {
                    TimeModulation::None
                },
            },
            sim: SimConfig {
                t_init: 0.0,
                t_fin: 1.6,
                dt: 0.01,
                policy: MotionPolicy::pinned(1),
                mode: TrajectoryMode::Analytic,
            },
            cover: CoverParams::default(),
            reconstruction: None,
            emit: EmitSpec {
                times: vec![0.0, 0.8, 1.6],
                kinds: all_kinds,
                field_resolution: 801,
            },
            out_dir,
        },
        "exp3" => ExperimentConfig {
            name: name.into(),
            initial: InitialCondition {
                slope: 100.0,
                shapes: vec![Shape::Pear],
            },
            domain: vec![[-4.0, 4.0], [-0.5, 2.5]],
            coordinates: Coordinates::Cartesian,
            field: FieldSpec {
                kind: FieldSpecKind::PureStrain,
                constants: FieldConstants {
                    c: 1.0,
                    ..Default::default()
                },
                modulation: TimeModulation::None,
            },
            sim: SimConfig {
                t_init: 0.0,
                t_fin: 1.6,
                dt: 0.05,
                policy: MotionPolicy::free(2),
                mode: TrajectoryMode::Analytic,
            },
            cover: CoverParams::default(),
            reconstruction: None,
            emit: EmitSpec {
                times: vec![0.0, 0.8, 1.6],
                kinds: all_kinds,
                field_resolution: 201,
            },
            out_dir,
        },
        "exp4" => {
            let omega = PI;
            ExperimentConfig {
                name: name.into(),
                initial: InitialCondition {
                    slope: 50.0,
                    shapes: vec![Shape::Disk {
                        center: [0.0, 2.0],
                        radius: 1.0,
                        rotation: 0.0,
                    }],
                },
                domain: vec![[-4.0, 4.0], [-4.0, 4.0]],
                coordinates: Coordinates::Cartesian,
                field: FieldSpec {
                    kind: FieldSpecKind::Translation,
                    constants: FieldConstants {
                        c1: -2.0 * omega,
                        ..Default::default()
                    },
                    modulation: TimeModulation::Circular { omega },
                },
                sim: SimConfig {
                    t_init: 0.0,
                    t_fin: 2.0,
                    dt: 0.025,
                    policy: MotionPolicy {
                        pinned: vec![[true; 2]; 2],
                        core: vec![Some([-1.75, 1.75]), Some([0.25, 3.75])],
                    },
                    mode: TrajectoryMode::Analytic,
                },
                cover: CoverParams::default(),
                reconstruction: Some(ReconstructionSpec {
                    at: vec![0.75],
                    band: [0.05, 0.95],
                    tangent_seeds: 0,
                    exact_curvature: Some(1.0),
                }),
                emit: EmitSpec {
                    times: [0.0].into_iter().chain(steps(0.0, 2.0, 0.25)).collect(),
                    kinds: vec![
                        EmitKind::Volume,
                        EmitKind::Patches,
                        EmitKind::Field,
                        EmitKind::Interface,
                    ],
                    field_resolution: 201,
                },
                out_dir,
            }
        }
        "exp5" => ExperimentConfig {
            name: name.into(),
            initial: InitialCondition {
                slope: 100.0,
                shapes: vec![
                    Shape::Disk {
                        center: [0.0, 2.0],
                        radius: 1.0,
                        rotation: -FRAC_PI_4,
                    },
                    Shape::Squircle {
                        center: [0.0, 2.0],
                        rotation: FRAC_PI_4,
                    },
                ],
            },
            domain: vec![[0.5, 3.5], [0.0, 2.0 * PI]],
            coordinates: Coordinates::Polar,
            field: FieldSpec {
                kind: FieldSpecKind::Translation,
                constants: FieldConstants {
                    c2: 1.0,
                    ..Default::default()
                },
                modulation: TimeModulation::None,
            },
            sim: SimConfig {
                t_init: 0.0,
                t_fin: 2.0,
                dt: 0.05,
                policy: MotionPolicy {
                    pinned: vec![[true; 2]; 2],
                    core: vec![None, Some([0.1, 3.3])],
                },
                mode: TrajectoryMode::Analytic,
            },
            cover: CoverParams::default(),
            reconstruction: None,
            emit: EmitSpec {
                times: vec![0.0, 1.0, 2.0],
                kinds: all_kinds,
                field_resolution: 201,
            },
            out_dir,
        },
        "exp6" => {
            // strain about (r, θ) = (2, π/4): θ stretches while r compresses
            let k = 0.5;
            ExperimentConfig {
                name: name.into(),
                initial: InitialCondition {
                    slope: 100.0,
                    shapes: vec![Shape::Disk {
                        center: [0.0, 2.0],
                        radius: 1.0,
                        rotation: -FRAC_PI_4,
                    }],
                },
                domain: vec![[0.75, 3.25], [-FRAC_PI_4, 3.0 * FRAC_PI_4]],
                coordinates: Coordinates::Polar,
                field: FieldSpec {
                    kind: FieldSpecKind::PureStrain,
                    constants: FieldConstants {
                        c: -k,
                        c1: 2.0 * k,
                        c2: -k * FRAC_PI_4,
                        ..Default::default()
                    },
                    modulation: TimeModulation::Cosine { period: 2.0 },
                },
                sim: SimConfig {
                    t_init: 0.0,
                    t_fin: 2.0,
                    dt: 0.05,
                    policy: MotionPolicy::free(2),
                    mode: TrajectoryMode::Analytic,
                },
                cover: CoverParams::default(),
                reconstruction: Some(ReconstructionSpec {
                    at: vec![1.25],
                    band: [0.075, 0.95],
                    tangent_seeds: 2,
                    exact_curvature: None,
                }),
                emit: EmitSpec {
                    times: vec![0.0, 0.25, 0.5, 1.25, 2.0],
                    kinds: vec![
                        EmitKind::Volume,
                        EmitKind::Patches,
                        EmitKind::Field,
                        EmitKind::Interface,
                    ],
                    field_resolution: 201,
                },
                out_dir,
            }
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown experiment '{other}', expected one of {PRESETS:?}"
            )))
        }
    };
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for name in PRESETS {
            preset(name).unwrap().validate().unwrap();
        }
        assert!(preset("exp7").is_err());
    }

    #[test]
    fn polar_disk_matches_rotated_formula() {
        // reference form: (r cos(θ+π/4))² + (r sin(θ+π/4) - 2)²
        let ic = preset("exp6").unwrap().initial;
        for &(r, th) in &[(2.0, 0.7), (1.3, 0.2), (2.9, 1.1)] {
            let g: f64 = 1.0
                - ((r * (th + FRAC_PI_4).cos()).powi(2)
                    + (r * (th + FRAC_PI_4).sin() - 2.0).powi(2));
            let want = 0.5 * (100.0 * g).tanh() + 0.5;
            assert!((ic.eval(Coordinates::Polar, &[r, th]) - want).abs() < 1e-14);
        }
    }

    #[test]
    fn json_round_trip() {
        let c = preset("exp4").unwrap();
        let text = serde_json::to_string(&c).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn off_grid_output_time_is_rejected() {
        let mut c = preset("exp1").unwrap();
        c.emit.times.push(0.8049);
        assert!(c.validate().is_err());
    }
}
