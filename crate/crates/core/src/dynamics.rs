//! Linear divergence-free velocity fields and patch motion.
//!
//! Patches move by advecting the distinct box coordinates of each axis and
//! rebuilding every box from the moved coordinates. Each local series is then
//! rescaled by the ratio of old to new patch volume so that its integral over
//! the patch is unchanged.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::cheb::Interval;
use crate::cover::Rect;
use crate::error::{Error, Result};
use crate::interpolant::PUInterpolant;

/// Largest tolerated `|trace(A)|` for a two-dimensional field.
pub const TRACE_TOL: f64 = 1e-14;

/// Largest tolerated disagreement between closed-form and RK4 trajectories.
pub const CROSS_CHECK_TOL: f64 = 1e-9;

pub const MIN_SUBSTEPS: usize = 16;

/// Scalar multiplier applied to a field over time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeModulation {
    #[default]
    None,
    /// `u ↦ u · (2π/T) cos(2πt/T)`; every trajectory closes after one period.
    Cosine { period: f64 },
    /// Uniform translation whose direction `b` turns at angular rate `omega`.
    Circular { omega: f64 },
}

impl TimeModulation {
    fn validate(&self) -> Result<()> {
        match *self {
            TimeModulation::Cosine { period } if !(period > 0.0 && period.is_finite()) => Err(
                Error::InvalidParameter(format!("cosine period must be positive, got {period}")),
            ),
            TimeModulation::Circular { omega } if !(omega != 0.0 && omega.is_finite()) => Err(
                Error::InvalidParameter(format!("circular rate must be nonzero, got {omega}")),
            ),
            _ => Ok(()),
        }
    }

    /// Scalar factor at time `t` (1 for circular motion, which turns `b` instead).
    fn factor(&self, t: f64) -> f64 {
        match *self {
            TimeModulation::Cosine { period } => 2.0 * PI / period * (2.0 * PI * t / period).cos(),
            _ => 1.0,
        }
    }

    /// `∫_{t0}^{t1}` of the scalar factor.
    fn integrated(&self, t0: f64, t1: f64) -> f64 {
        match *self {
            TimeModulation::Cosine { period } => {
                (2.0 * PI * t1 / period).sin() - (2.0 * PI * t0 / period).sin()
            }
            _ => t1 - t0,
        }
    }
}

/// Rows of the standard field table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Translation,
    PureStrain,
    AngularDeformation,
    PureRotation,
}

/// Constants shared by the field table rows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldConstants {
    pub c: f64,
    pub c1: f64,
    pub c2: f64,
    pub omega: f64,
}

/// `u(x, t) = m(t) (A x + b)`, or a turning uniform translation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearField {
    pub dim: usize,
    pub a: [[f64; 2]; 2],
    pub b: [f64; 2],
    #[serde(default)]
    pub modulation: TimeModulation,
}

impl LinearField {
    /// `u = a x + b` on a line; no trace condition applies in 1D.
    pub fn line(a: f64, b: f64) -> Self {
        Self {
            dim: 1,
            a: [[a, 0.0], [0.0, 0.0]],
            b: [b, 0.0],
            modulation: TimeModulation::None,
        }
    }

    pub fn plane(a: [[f64; 2]; 2], b: [f64; 2]) -> Result<Self> {
        let f = Self {
            dim: 2,
            a,
            b,
            modulation: TimeModulation::None,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn with_modulation(mut self, modulation: TimeModulation) -> Result<Self> {
        self.modulation = modulation;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::InvalidParameter(format!(
                "unsupported dimension {}",
                self.dim
            )));
        }
        if self
            .a
            .iter()
            .flatten()
            .chain(&self.b)
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite {
                context: "field constants".into(),
            });
        }
        self.modulation.validate()?;
        if self.dim == 2 && self.trace().abs() > TRACE_TOL {
            return Err(Error::FieldRejected(format!(
                "trace {:e} is not zero; the field would not preserve volume",
                self.trace()
            )));
        }
        if matches!(self.modulation, TimeModulation::Circular { .. })
            && (self.dim != 2 || self.a.iter().flatten().any(|&v| v != 0.0))
        {
            return Err(Error::FieldRejected(
                "circular modulation needs a 2D uniform translation".into(),
            ));
        }
        Ok(())
    }

    pub fn trace(&self) -> f64 {
        if self.dim == 1 {
            self.a[0][0]
        } else {
            self.a[0][0] + self.a[1][1]
        }
    }

    /// True when each velocity component depends only on its own coordinate.
    pub fn is_separable(&self) -> bool {
        self.dim == 1 || (self.a[0][1] == 0.0 && self.a[1][0] == 0.0)
    }

    pub fn velocity(&self, x: &[f64], t: f64) -> Vec<f64> {
        (0..self.dim)
            .map(|d| self.velocity_component(d, x, t))
            .collect()
    }

    fn velocity_component(&self, d: usize, x: &[f64], t: f64) -> f64 {
        if let TimeModulation::Circular { omega } = self.modulation {
            let (s, c) = (omega * t).sin_cos();
            return if d == 0 {
                self.b[0] * c - self.b[1] * s
            } else {
                self.b[0] * s + self.b[1] * c
            };
        }
        let ax: f64 = (0..self.dim).map(|k| self.a[d][k] * x[k]).sum();
        self.modulation.factor(t) * (ax + self.b[d])
    }

    /// Closed-form displacement of a turning translation over `[t0, t1]`.
    fn circular_shift(&self, omega: f64, t0: f64, t1: f64) -> [f64; 2] {
        let ic = ((omega * t1).sin() - (omega * t0).sin()) / omega;
        let is = ((omega * t0).cos() - (omega * t1).cos()) / omega;
        [
            self.b[0] * ic - self.b[1] * is,
            self.b[0] * is + self.b[1] * ic,
        ]
    }

    /// Closed-form position at `t1` of one coordinate of a separable field.
    fn coord_exact(&self, d: usize, x0: f64, t0: f64, t1: f64) -> f64 {
        if let TimeModulation::Circular { omega } = self.modulation {
            return x0 + self.circular_shift(omega, t0, t1)[d];
        }
        let tau = self.modulation.integrated(t0, t1);
        let a = self.a[d][d];
        x0 + (a * x0 + self.b[d]) * tau * phi(a * tau)
    }

    /// RK4 position at `t1` of one coordinate of a separable field.
    fn coord_rk4(&self, d: usize, x0: f64, t0: f64, t1: f64, substeps: usize) -> f64 {
        let h = (t1 - t0) / substeps as f64;
        let mut x = [0.0; 2];
        x[d] = x0;
        let mut t = t0;
        let u = |x: &[f64; 2], t: f64| self.velocity_component(d, x, t);
        for _ in 0..substeps {
            let k1 = u(&x, t);
            let mut y = x;
            y[d] = x[d] + 0.5 * h * k1;
            let k2 = u(&y, t + 0.5 * h);
            y[d] = x[d] + 0.5 * h * k2;
            let k3 = u(&y, t + 0.5 * h);
            y[d] = x[d] + h * k3;
            let k4 = u(&y, t + h);
            x[d] += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t += h;
        }
        x[d]
    }

    /// Closed-form position of a point at `t1`.
    fn point_exact(&self, x0: &[f64], t0: f64, t1: f64) -> Vec<f64> {
        if self.is_separable() || matches!(self.modulation, TimeModulation::Circular { .. }) {
            return (0..self.dim)
                .map(|d| self.coord_exact(d, x0[d], t0, t1))
                .collect();
        }
        // Trace-free 2x2 block: A² = -det(A) I, so exp(Aτ) = C I + S A and
        // ∫_0^τ exp(As) ds = P I + Q A.
        let tau = self.modulation.integrated(t0, t1);
        let a = &self.a;
        let delta = -(a[0][0] * a[1][1] - a[0][1] * a[1][0]);
        let (c, s, p, q) = trace_free_coefficients(delta, tau);
        let e = |r: usize, k: usize| if r == k { c } else { 0.0 } + s * a[r][k];
        let j = |r: usize, k: usize| if r == k { p } else { 0.0 } + q * a[r][k];
        (0..2)
            .map(|r| (0..2).map(|k| e(r, k) * x0[k] + j(r, k) * self.b[k]).sum())
            .collect()
    }

    fn point_rk4(&self, x0: &[f64], t0: f64, t1: f64, substeps: usize) -> Vec<f64> {
        let h = (t1 - t0) / substeps as f64;
        let mut x = x0.to_vec();
        let mut t = t0;
        let axpy = |x: &[f64], k: &[f64], s: f64| -> Vec<f64> {
            x.iter().zip(k).map(|(a, b)| a + s * b).collect()
        };
        for _ in 0..substeps {
            let k1 = self.velocity(&x, t);
            let k2 = self.velocity(&axpy(&x, &k1, 0.5 * h), t + 0.5 * h);
            let k3 = self.velocity(&axpy(&x, &k2, 0.5 * h), t + 0.5 * h);
            let k4 = self.velocity(&axpy(&x, &k3, h), t + h);
            for i in 0..x.len() {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            t += h;
        }
        x
    }
}

/// `expm1(z) / z`, continuous at 0.
fn phi(z: f64) -> f64 {
    if z == 0.0 {
        1.0
    } else {
        z.exp_m1() / z
    }
}

/// `(C, S, P, Q)` with `exp(Aτ) = C I + S A` and `∫_0^τ exp(As) ds = P I + Q A`
/// for a trace-free `A` with `A² = δ I`.
fn trace_free_coefficients(delta: f64, tau: f64) -> (f64, f64, f64, f64) {
    let z = delta * tau * tau;
    if z.abs() <= 1.0 {
        // even/odd parts of the exponential series in powers of z
        let (mut c, mut s, mut q) = (0.0, 0.0, 0.0);
        let mut term = 1.0; // z^n / (2n)!
        for n in 0..30 {
            let n2 = 2.0 * n as f64;
            c += term;
            s += term / (n2 + 1.0);
            q += term / ((n2 + 1.0) * (n2 + 2.0));
            term *= z / ((n2 + 1.0) * (n2 + 2.0));
        }
        return (c, s * tau, s * tau, q * tau * tau);
    }
    if delta > 0.0 {
        let k = delta.sqrt();
        let (sh, ch) = ((k * tau).sinh(), (k * tau).cosh());
        (ch, sh / k, sh / k, (ch - 1.0) / delta)
    } else {
        let k = (-delta).sqrt();
        let (sn, cs) = (k * tau).sin_cos();
        (cs, sn / k, sn / k, (1.0 - cs) / -delta)
    }
}

/// Assemble a field from the standard table.
pub fn field_from_type(kind: FieldKind, k: FieldConstants) -> Result<LinearField> {
    let (a, b) = match kind {
        FieldKind::Translation => ([[0.0, 0.0], [0.0, 0.0]], [k.c1, k.c2]),
        FieldKind::PureStrain => ([[k.c, 0.0], [0.0, -k.c]], [k.c1, k.c2]),
        FieldKind::AngularDeformation => ([[k.c1, k.c], [k.c, -k.c1]], [0.0, 0.0]),
        FieldKind::PureRotation => ([[k.c, -k.omega], [k.omega, -k.c]], [0.0, 0.0]),
    };
    LinearField::plane(a, b)
}

/// How trajectories are computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrajectoryMode {
    #[default]
    Analytic,
    Numeric {
        substeps: usize,
    },
    /// Closed form, verified against RK4.
    Checked {
        substeps: usize,
    },
}

impl TrajectoryMode {
    fn validate(&self) -> Result<()> {
        match *self {
            TrajectoryMode::Numeric { substeps } | TrajectoryMode::Checked { substeps }
                if substeps < MIN_SUBSTEPS =>
            {
                Err(Error::InvalidParameter(format!(
                    "need at least {MIN_SUBSTEPS} RK4 substeps, got {substeps}"
                )))
            }
            _ => Ok(()),
        }
    }
}

fn cross_check(exact: f64, numeric: f64) -> Result<f64> {
    let diff = (exact - numeric).abs();
    if diff > CROSS_CHECK_TOL {
        return Err(Error::TrajectoryMismatch { diff });
    }
    Ok(exact)
}

/// Position at `t1` of a point that sits at `x0` at time `t0`.
pub fn advect_point(
    field: &LinearField,
    x0: &[f64],
    t0: f64,
    t1: f64,
    mode: TrajectoryMode,
) -> Result<Vec<f64>> {
    field.validate()?;
    mode.validate()?;
    if x0.len() != field.dim {
        return Err(Error::DimensionMismatch {
            expected: field.dim,
            got: x0.len(),
        });
    }
    Ok(match mode {
        TrajectoryMode::Analytic => field.point_exact(x0, t0, t1),
        TrajectoryMode::Numeric { substeps } => field.point_rk4(x0, t0, t1, substeps),
        TrajectoryMode::Checked { substeps } => {
            let exact = field.point_exact(x0, t0, t1);
            let numeric = field.point_rk4(x0, t0, t1, substeps);
            for (e, n) in exact.iter().zip(&numeric) {
                cross_check(*e, *n)?;
            }
            exact
        }
    })
}

/// Which parts of the cover may move.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionPolicy {
    /// Per dimension: whether the lower and upper domain faces stay fixed.
    pub pinned: Vec<[bool; 2]>,
    /// Optional window per dimension. Coordinates inside it follow the flow;
    /// coordinates between it and a pinned face are stretched affinely.
    pub core: Vec<Option<[f64; 2]>>,
}

impl MotionPolicy {
    pub fn free(dim: usize) -> Self {
        Self {
            pinned: vec![[false; 2]; dim],
            core: vec![None; dim],
        }
    }

    pub fn pinned(dim: usize) -> Self {
        Self {
            pinned: vec![[true; 2]; dim],
            core: vec![None; dim],
        }
    }

    /// Reject fields that would not keep rectangles rectangular.
    pub fn admits(&self, field: &LinearField) -> Result<()> {
        field.validate()?;
        if !field.is_separable() {
            return Err(Error::FieldRejected(
                "each velocity component must depend on its own coordinate only; \
                 pose rotations in polar coordinates"
                    .into(),
            ));
        }
        Ok(())
    }

    fn check_dim(&self, domain: &Rect) -> Result<()> {
        let dim = domain.dim();
        if self.pinned.len() != dim || self.core.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: self.pinned.len().min(self.core.len()),
            });
        }
        for (d, core) in self.core.iter().enumerate() {
            if let Some([lo, hi]) = *core {
                let side = domain.side(d);
                if !(side.lo() < lo && lo < hi && hi < side.hi()) {
                    return Err(Error::InvalidParameter(format!(
                        "core window [{lo}, {hi}] must lie strictly inside {:?}",
                        [side.lo(), side.hi()]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Distinct box coordinates of one axis.
#[derive(Clone, Debug)]
struct Axis {
    origin: Vec<f64>,
    current: Vec<f64>,
    core_origin: Option<[f64; 2]>,
    core_now: Option<[f64; 2]>,
    pinned: [bool; 2],
}

/// Indices into the axis tables for one patch: `[lo, hi]` per dimension.
#[derive(Clone, Debug)]
struct Edges {
    zone: Vec<[usize; 2]>,
    patch: Vec<[usize; 2]>,
}

/// Per-step record of the rescaling.
#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    pub t: f64,
    /// Old over new patch volume, per patch.
    pub scale_factors: Vec<f64>,
}

/// An interpolant whose patches follow a flow.
#[derive(Clone, Debug)]
pub struct MovingCover {
    interp: PUInterpolant,
    axes: Vec<Axis>,
    edges: Vec<Edges>,
    t_origin: f64,
    t: f64,
}

fn index_of(table: &[f64], x: f64) -> usize {
    table
        .binary_search_by(|v| v.total_cmp(&x))
        .expect("box coordinate is in its axis table")
}

impl MovingCover {
    pub fn new(interp: PUInterpolant, policy: &MotionPolicy, t: f64) -> Result<Self> {
        let cover = interp.cover();
        policy.check_dim(cover.domain())?;
        let dim = cover.dim();
        let mut axes = Vec::with_capacity(dim);
        for d in 0..dim {
            let mut coords: Vec<f64> = cover
                .patches()
                .iter()
                .flat_map(|p| {
                    let (z, b) = (p.zone.rect.side(d), p.domain_box.side(d));
                    [z.lo(), z.hi(), b.lo(), b.hi()]
                })
                .collect();
            coords.sort_by(f64::total_cmp);
            coords.dedup();
            axes.push(Axis {
                origin: coords.clone(),
                current: coords,
                core_origin: policy.core[d],
                core_now: policy.core[d],
                pinned: policy.pinned[d],
            });
        }
        let edges = cover
            .patches()
            .iter()
            .map(|p| {
                let lookup = |r: &Rect| -> Vec<[usize; 2]> {
                    (0..dim)
                        .map(|d| {
                            let s = r.side(d);
                            [
                                index_of(&axes[d].current, s.lo()),
                                index_of(&axes[d].current, s.hi()),
                            ]
                        })
                        .collect()
                };
                Edges {
                    zone: lookup(&p.zone.rect),
                    patch: lookup(&p.domain_box),
                }
            })
            .collect();
        Ok(Self {
            interp,
            axes,
            edges,
            t_origin: t,
            t,
        })
    }

    pub fn interpolant(&self) -> &PUInterpolant {
        &self.interp
    }

    pub fn into_interpolant(self) -> PUInterpolant {
        self.interp
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Current core window of each dimension.
    pub fn core(&self) -> Vec<Option<[f64; 2]>> {
        self.axes.iter().map(|a| a.core_now).collect()
    }

    /// New coordinates of one axis at `t1`, plus the new core window.
    fn move_axis(
        &self,
        d: usize,
        field: &LinearField,
        t1: f64,
        mode: TrajectoryMode,
    ) -> Result<(Vec<f64>, Option<[f64; 2]>)> {
        let axis = &self.axes[d];
        // Closed forms restart from the initial coordinates; RK4 steps from
        // the current ones.
        let flow = |x_origin: f64, x_now: f64| -> Result<f64> {
            match mode {
                TrajectoryMode::Analytic => Ok(field.coord_exact(d, x_origin, self.t_origin, t1)),
                TrajectoryMode::Numeric { substeps } => {
                    Ok(field.coord_rk4(d, x_now, self.t, t1, substeps))
                }
                TrajectoryMode::Checked { substeps } => cross_check(
                    field.coord_exact(d, x_origin, self.t_origin, t1),
                    field.coord_rk4(d, x_now, self.t, t1, substeps),
                ),
            }
        };
        let reference = match mode {
            TrajectoryMode::Numeric { .. } => (&axis.current, axis.core_now),
            _ => (&axis.origin, axis.core_origin),
        };
        let (coords_ref, core_ref) = reference;
        let new_core = match (axis.core_origin, axis.core_now) {
            (Some(o), Some(n)) => Some([flow(o[0], n[0])?, flow(o[1], n[1])?]),
            _ => None,
        };
        let last = coords_ref.len() - 1;
        let (lo_face, hi_face) = (axis.current[0], axis.current[last]);
        let mut out = Vec::with_capacity(coords_ref.len());
        for (i, (&x_ref, (&x_origin, &x_now))) in coords_ref
            .iter()
            .zip(axis.origin.iter().zip(&axis.current))
            .enumerate()
        {
            let x = if (i == 0 && axis.pinned[0]) || (i == last && axis.pinned[1]) {
                x_now
            } else {
                match (core_ref, new_core) {
                    (Some([clo, _]), Some([nlo, _])) if axis.pinned[0] && x_ref < clo => {
                        lo_face + (x_ref - lo_face) * ((nlo - lo_face) / (clo - lo_face))
                    }
                    (Some([_, chi]), Some([_, nhi])) if axis.pinned[1] && x_ref > chi => {
                        hi_face + (x_ref - hi_face) * ((nhi - hi_face) / (chi - hi_face))
                    }
                    _ => flow(x_origin, x_now)?,
                }
            };
            if !x.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("advected coordinate {i} of axis {d}"),
                });
            }
            out.push(x);
        }
        for (i, w) in out.windows(2).enumerate() {
            if w[1] - w[0] <= 1e-12 {
                let at_face = (i == 0 && axis.pinned[0]) || (i + 2 == out.len() && axis.pinned[1]);
                return Err(Error::Geometry(if at_face {
                    format!("axis {d}: a moving coordinate reached a pinned face at t = {t1}")
                } else {
                    format!(
                        "axis {d}: coordinates {i} and {} collapsed or crossed at t = {t1}",
                        i + 1
                    )
                }));
            }
        }
        Ok((out, new_core))
    }

    /// Move all patches from the current time to `t + dt`.
    pub fn advance(
        &mut self,
        field: &LinearField,
        dt: f64,
        mode: TrajectoryMode,
    ) -> Result<StepReport> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "time step must be positive, got {dt}"
            )));
        }
        if field.dim != self.interp.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.interp.dim(),
                got: field.dim,
            });
        }
        MotionPolicy::default().admits(field)?;
        mode.validate()?;
        let t1 = self.t + dt;
        let moved = (0..self.axes.len())
            .map(|d| self.move_axis(d, field, t1, mode))
            .collect::<Result<Vec<_>>>()?;
        let rect = |idx: &[[usize; 2]]| -> Result<Rect> {
            Rect::new(
                idx.iter()
                    .zip(&moved)
                    .map(|(&[lo, hi], (coords, _))| Interval::new(coords[lo], coords[hi]))
                    .collect::<Result<Vec<_>>>()?,
            )
        };
        let mut updates = Vec::with_capacity(self.edges.len());
        for (patch, edges) in self.interp.cover().patches().iter().zip(&self.edges) {
            let zone = rect(&edges.zone)?;
            let domain_box = rect(&edges.patch)?;
            let s = patch.domain_box.volume() / domain_box.volume();
            updates.push((zone, domain_box, s));
        }
        let domain = Rect::new(
            moved
                .iter()
                .map(|(c, _)| Interval::new(c[0], c[c.len() - 1]))
                .collect::<Result<Vec<_>>>()?,
        )?;
        let tiled: f64 = updates.iter().map(|(z, _, _)| z.volume()).sum();
        let total = domain.volume();
        if ((tiled - total) / total).abs() > 1e-11 {
            return Err(Error::Geometry(format!(
                "after the step zones cover {tiled} of a domain of volume {total}"
            )));
        }

        let cover = self.interp.cover_mut();
        cover.set_domain(domain);
        let mut scale_factors = Vec::with_capacity(updates.len());
        for (patch, (zone, domain_box, s)) in cover.patches_mut().iter_mut().zip(updates) {
            patch.local.set_rect(&domain_box);
            patch.local.scale(s);
            patch.zone.rect = zone;
            patch.domain_box = domain_box;
            scale_factors.push(s);
        }
        for (axis, (coords, core)) in self.axes.iter_mut().zip(moved) {
            axis.current = coords;
            axis.core_now = core;
        }
        self.t = t1;
        Ok(StepReport {
            t: t1,
            scale_factors,
        })
    }
}

/// Move an interpolant's patches over one step; core windows are read at `t`.
pub fn advance_cover(
    f: &mut PUInterpolant,
    field: &LinearField,
    t: f64,
    dt: f64,
    policy: &MotionPolicy,
    mode: TrajectoryMode,
) -> Result<StepReport> {
    policy.admits(field)?;
    let mut mover = MovingCover::new(f.clone(), policy, t)?;
    let report = mover.advance(field, dt, mode)?;
    *f = mover.into_interpolant();
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub t_init: f64,
    pub t_fin: f64,
    pub dt: f64,
    #[serde(default)]
    pub policy: MotionPolicy,
    #[serde(default)]
    pub mode: TrajectoryMode,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_init <= self.t_fin) {
            return Err(Error::InvalidParameter(format!(
                "need t_init <= t_fin, got {} and {}",
                self.t_init, self.t_fin
            )));
        }
        self.mode.validate()
    }

    /// Step end times; the last step is shortened to land on `t_fin`.
    pub fn times(&self) -> Vec<f64> {
        let n = ((self.t_fin - self.t_init) / self.dt - 1e-9)
            .ceil()
            .max(0.0) as usize;
        (1..=n)
            .map(|k| (self.t_init + k as f64 * self.dt).min(self.t_fin))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeEntry {
    pub t: f64,
    pub volume: f64,
    pub error: f64,
}

/// Total volume after every step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VolumeLog {
    pub entries: Vec<VolumeEntry>,
}

impl VolumeLog {
    pub fn initial_volume(&self) -> Option<f64> {
        self.entries.first().map(|e| e.volume)
    }

    pub fn max_error(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.error))
    }

    fn push(&mut self, t: f64, volume: f64) {
        let error = self.initial_volume().map_or(0.0, |v0| (volume - v0).abs());
        self.entries.push(VolumeEntry { t, volume, error });
    }
}

/// Advance `f` from `t_init` to `t_fin`, logging the total volume after each
/// step. `observe` sees the state at `t_init` and after every step.
pub fn run_simulation<O>(
    f: &mut PUInterpolant,
    field: &LinearField,
    config: &SimConfig,
    mut observe: O,
) -> Result<VolumeLog>
where
    O: FnMut(&MovingCover) -> Result<()>,
{
    config.validate()?;
    config.policy.admits(field)?;
    let mut mover = MovingCover::new(f.clone(), &config.policy, config.t_init)?;
    let mut log = VolumeLog::default();
    log.push(config.t_init, mover.interpolant().global_sum()?);
    observe(&mover)?;
    for t1 in config.times() {
        let dt = t1 - mover.time();
        mover.advance(field, dt, config.mode)?;
        log.push(t1, mover.interpolant().global_sum()?);
        observe(&mover)?;
    }
    *f = mover.into_interpolant();
    Ok(log)
}
