//! Adaptive zones, overlapping patches and partition-of-unity weights.
//!
//! A cover is built by recursive bisection: each candidate zone is expanded
//! by the overlap fraction into a patch box, the target function is sampled
//! on the patch's Chebyshev grid at increasing degrees, and the zone is
//! accepted once the coefficient tails are negligible in every dimension.
//! Otherwise the zone is bisected along the worst-resolved dimension.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::cheb::{self, Box2, ChebSeries, Interval, TensorSeries};
use crate::error::{Error, Result};

/// Slack used when deciding whether a point lies in the domain.
pub const DOMAIN_TOL: f64 = 1e-12;

/// Axis-aligned box in one or two dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Interval>", into = "Vec<Interval>")]
pub struct Rect {
    sides: Vec<Interval>,
}

impl TryFrom<Vec<Interval>> for Rect {
    type Error = Error;

    fn try_from(sides: Vec<Interval>) -> Result<Self> {
        Rect::new(sides)
    }
}

impl From<Rect> for Vec<Interval> {
    fn from(r: Rect) -> Self {
        r.sides
    }
}

impl Rect {
    pub fn new(sides: Vec<Interval>) -> Result<Self> {
        if sides.is_empty() || sides.len() > 2 {
            return Err(Error::InvalidParameter(format!(
                "only 1D and 2D boxes are supported, got {} sides",
                sides.len()
            )));
        }
        Ok(Self { sides })
    }

    pub fn line(x: Interval) -> Self {
        Self { sides: vec![x] }
    }

    pub fn plane(x: Interval, y: Interval) -> Self {
        Self { sides: vec![x, y] }
    }

    /// Convenience constructor from `(lo, hi)` pairs.
    pub fn from_bounds(bounds: &[(f64, f64)]) -> Result<Self> {
        let sides = bounds
            .iter()
            .map(|&(lo, hi)| Interval::new(lo, hi))
            .collect::<Result<Vec<_>>>()?;
        Self::new(sides)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.sides.len()
    }

    #[inline]
    pub fn side(&self, d: usize) -> Interval {
        self.sides[d]
    }

    pub fn sides(&self) -> &[Interval] {
        &self.sides
    }

    /// Length in 1D, area in 2D.
    pub fn volume(&self) -> f64 {
        self.sides.iter().map(Interval::width).product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.sides.iter().map(Interval::mid).collect()
    }

    /// Length of the box diagonal.
    pub fn diameter(&self) -> f64 {
        self.sides
            .iter()
            .map(|s| s.width() * s.width())
            .sum::<f64>()
            .sqrt()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.sides.iter().zip(p).all(|(s, &x)| s.contains(x))
    }

    pub fn contains_within(&self, p: &[f64], tol: f64) -> bool {
        self.sides
            .iter()
            .zip(p)
            .all(|(s, &x)| s.contains_within(x, tol))
    }

    /// True when the interiors intersect.
    pub fn overlaps(&self, other: &Rect) -> bool {
        self.sides
            .iter()
            .zip(&other.sides)
            .all(|(a, b)| a.lo() < b.hi() && b.lo() < a.hi())
    }

    pub fn with_side(&self, d: usize, side: Interval) -> Rect {
        let mut sides = self.sides.clone();
        sides[d] = side;
        Rect { sides }
    }

    fn check_dim(&self, p: &[f64]) -> Result<()> {
        if p.len() == self.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: p.len(),
            })
        }
    }
}

/// A non-overlapping box of the adaptive tiling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub rect: Rect,
    /// Bisection depth per dimension.
    pub levels: Vec<u32>,
}

/// Local approximant owned by a patch.
#[derive(Clone, Debug, PartialEq)]
pub enum LocalSeries {
    Line(ChebSeries),
    Plane(TensorSeries),
}

/// Value, gradient and Hessian `(xx, xy, yy)` of a function at a point.
/// Components beyond the dimension are zero.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: [f64; 2],
    pub hess: [f64; 3],
}

impl LocalSeries {
    pub fn dim(&self) -> usize {
        match self {
            LocalSeries::Line(_) => 1,
            LocalSeries::Plane(_) => 2,
        }
    }

    pub fn degrees(&self) -> Vec<usize> {
        match self {
            LocalSeries::Line(s) => vec![s.degree()],
            LocalSeries::Plane(s) => {
                let (nx, ny) = s.degrees();
                vec![nx, ny]
            }
        }
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        match self {
            LocalSeries::Line(s) => s.eval(p[0]),
            LocalSeries::Plane(s) => s.eval(p[0], p[1]),
        }
    }

    pub fn jet(&self, p: &[f64]) -> Jet {
        match self {
            LocalSeries::Line(s) => {
                let d1 = s.differentiate();
                let d2 = d1.differentiate();
                Jet {
                    value: s.eval(p[0]),
                    grad: [d1.eval(p[0]), 0.0],
                    hess: [d2.eval(p[0]), 0.0, 0.0],
                }
            }
            LocalSeries::Plane(s) => {
                let (x, y) = (p[0], p[1]);
                let fx = s.partial_x();
                let fy = s.partial_y();
                Jet {
                    value: s.eval(x, y),
                    grad: [fx.eval(x, y), fy.eval(x, y)],
                    hess: [
                        fx.partial_x().eval(x, y),
                        fx.partial_y().eval(x, y),
                        fy.partial_y().eval(x, y),
                    ],
                }
            }
        }
    }

    pub fn integrate(&self) -> f64 {
        match self {
            LocalSeries::Line(s) => s.integrate(),
            LocalSeries::Plane(s) => s.integrate(),
        }
    }

    /// Mass and first moments over a sub-rectangle of the series' box.
    pub fn moments_over(&self, sub: &Rect) -> (f64, Vec<f64>) {
        match self {
            LocalSeries::Line(s) => {
                let x = sub.side(0);
                let (m, mx) = s.moments_over(x.lo(), x.hi());
                (m, vec![mx])
            }
            LocalSeries::Plane(s) => {
                let (m, mx, my) = s.moments_over(Box2::new(sub.side(0), sub.side(1)));
                (m, vec![mx, my])
            }
        }
    }

    /// First moments `∫ x_d f` over the series' box.
    pub fn first_moments(&self) -> Vec<f64> {
        match self {
            LocalSeries::Line(s) => vec![s.first_moment()],
            LocalSeries::Plane(s) => {
                let (mx, my) = s.first_moments();
                vec![mx, my]
            }
        }
    }

    pub fn max_abs_on_grid(&self) -> f64 {
        match self {
            LocalSeries::Line(s) => s.max_abs_on_grid(),
            LocalSeries::Plane(s) => s.max_abs_on_grid(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        match self {
            LocalSeries::Line(s) => s.scale(factor),
            LocalSeries::Plane(s) => s.scale(factor),
        }
    }

    /// Move the series onto a new box; coefficients are unchanged.
    pub fn set_rect(&mut self, rect: &Rect) {
        match self {
            LocalSeries::Line(s) => s.set_interval(rect.side(0)),
            LocalSeries::Plane(s) => s.set_bounds(cheb::Box2::new(rect.side(0), rect.side(1))),
        }
    }

    /// Coefficients as rows (a single row in 1D, row `j` = x-degree `j` in 2D).
    pub fn coeff_rows(&self) -> Vec<Vec<f64>> {
        match self {
            LocalSeries::Line(s) => vec![s.coeffs().to_vec()],
            LocalSeries::Plane(s) => s.coeffs().rows().into_iter().map(|r| r.to_vec()).collect(),
        }
    }

    fn from_rows(rect: &Rect, rows: Vec<Vec<f64>>) -> Result<Self> {
        match rect.dim() {
            1 => {
                let row = rows.into_iter().next().unwrap_or_default();
                Ok(LocalSeries::Line(ChebSeries::new(rect.side(0), row)?))
            }
            _ => {
                let nrows = rows.len();
                let ncols = rows.first().map_or(0, Vec::len);
                if rows.iter().any(|r| r.len() != ncols) {
                    return Err(Error::InvalidParameter("ragged coefficient matrix".into()));
                }
                let flat: Vec<f64> = rows.into_iter().flatten().collect();
                let coeffs = Array2::from_shape_vec((nrows, ncols), flat)
                    .map_err(|e| Error::InvalidParameter(e.to_string()))?;
                let bounds = cheb::Box2::new(rect.side(0), rect.side(1));
                Ok(LocalSeries::Plane(TensorSeries::new(bounds, coeffs)?))
            }
        }
    }
}

/// An overlapping box carrying a local Chebyshev interpolant.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    pub id: usize,
    pub zone: Zone,
    /// Zone expanded by the overlap fraction, clipped to the domain.
    pub domain_box: Rect,
    pub local: LocalSeries,
    /// Set when the zone hit the depth limit without resolving.
    pub unresolved: bool,
}

impl Patch {
    pub fn degrees(&self) -> Vec<usize> {
        self.local.degrees()
    }

    /// Unnormalized weight at `p`: 1 on the zone, smoothly decaying to 0 at
    /// the patch boundary, 0 outside the patch box.
    pub fn raw_weight(&self, p: &[f64]) -> f64 {
        let mut w = 1.0;
        for d in 0..self.zone.rect.dim() {
            w *= bump(p[d], self.zone.rect.side(d), self.domain_box.side(d)).0;
            if w == 0.0 {
                return 0.0;
            }
        }
        w
    }

    /// Raw weight with its gradient and Hessian `(xx, xy, yy)`.
    pub fn raw_weight_jet(&self, p: &[f64]) -> Jet {
        let dim = self.zone.rect.dim();
        let bx = bump(p[0], self.zone.rect.side(0), self.domain_box.side(0));
        if dim == 1 {
            return Jet {
                value: bx.0,
                grad: [bx.1, 0.0],
                hess: [bx.2, 0.0, 0.0],
            };
        }
        let by = bump(p[1], self.zone.rect.side(1), self.domain_box.side(1));
        Jet {
            value: bx.0 * by.0,
            grad: [bx.1 * by.0, bx.0 * by.1],
            hess: [bx.2 * by.0, bx.1 * by.1, bx.0 * by.2],
        }
    }
}

/// Quintic smoothstep `6u^5 - 15u^4 + 10u^3` and its first two derivatives.
#[inline]
fn smoothstep(u: f64) -> (f64, f64, f64) {
    let u2 = u * u;
    let v = u2 * u * (10.0 + u * (-15.0 + 6.0 * u));
    let d1 = 30.0 * u2 * (1.0 - u) * (1.0 - u);
    let d2 = 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u);
    (v, d1, d2)
}

/// One-dimensional C² bump: 1 on `zone`, 0 outside `patch`, smoothstep across
/// each overlap band. Returns value, first and second derivative.
pub fn bump(x: f64, zone: Interval, patch: Interval) -> (f64, f64, f64) {
    if x < patch.lo() || x > patch.hi() {
        return (0.0, 0.0, 0.0);
    }
    if x < zone.lo() {
        let band = zone.lo() - patch.lo();
        let (v, d1, d2) = smoothstep((x - patch.lo()) / band);
        return (v, d1 / band, d2 / (band * band));
    }
    if x > zone.hi() {
        let band = patch.hi() - zone.hi();
        let (v, d1, d2) = smoothstep((patch.hi() - x) / band);
        return (v, -d1 / band, d2 / (band * band));
    }
    (1.0, 0.0, 0.0)
}

/// Tunables of the adaptive constructor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoverParams {
    /// Relative coefficient tolerance for the resolution test.
    pub tol: f64,
    pub min_degree: usize,
    pub max_degree: usize,
    /// Overlap fraction of the zone width added on each side.
    pub overlap: f64,
    /// Maximum bisection depth per dimension.
    pub max_level: u32,
    /// First degree of the doubling ladder.
    pub start_degree: usize,
}

impl Default for CoverParams {
    fn default() -> Self {
        Self {
            tol: 1e-13,
            min_degree: 3,
            max_degree: cheb::DEFAULT_MAX_DEGREE,
            overlap: 0.10,
            max_level: 30,
            start_degree: 4,
        }
    }
}

impl CoverParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return bad(format!("tol must lie in (0, 1), got {}", self.tol));
        }
        if !(self.overlap > 0.0 && self.overlap < 0.5) {
            return bad(format!(
                "overlap must lie in (0, 0.5), got {}",
                self.overlap
            ));
        }
        if self.min_degree < 3 || self.min_degree > self.max_degree {
            return bad(format!(
                "need 3 <= min_degree <= max_degree, got {} and {}",
                self.min_degree, self.max_degree
            ));
        }
        if self.max_degree > 1024 {
            return bad(format!("max_degree {} exceeds 1024", self.max_degree));
        }
        if self.start_degree == 0 {
            return bad("start_degree must be positive".into());
        }
        Ok(())
    }
}

/// The collection of patches covering a domain.
#[derive(Clone, Debug, PartialEq)]
pub struct Cover {
    domain: Rect,
    patches: Vec<Patch>,
    params: CoverParams,
}

impl Cover {
    /// Assemble a cover from existing patches, checking the tiling and cover
    /// conditions.
    pub fn from_patches(domain: Rect, patches: Vec<Patch>, params: CoverParams) -> Result<Self> {
        let cover = Self {
            domain,
            patches,
            params,
        };
        cover.validate()?;
        Ok(cover)
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &Rect {
        &self.domain
    }

    pub fn params(&self) -> &CoverParams {
        &self.params
    }

    pub fn patches(&self) -> &[Patch] {
        &self.patches
    }

    pub fn patch(&self, id: usize) -> Option<&Patch> {
        self.patches.get(id)
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub(crate) fn patches_mut(&mut self) -> &mut [Patch] {
        &mut self.patches
    }

    pub(crate) fn set_domain(&mut self, domain: Rect) {
        self.domain = domain;
    }

    /// Patches with a positive raw weight at `p`.
    pub fn patches_at<'a>(&'a self, p: &'a [f64]) -> impl Iterator<Item = &'a Patch> + 'a {
        self.patches
            .iter()
            .filter(move |patch| patch.domain_box.contains(p) && patch.raw_weight(p) > 0.0)
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.domain.contains_within(p, DOMAIN_TOL)
    }

    /// Clamp a point lying within [`DOMAIN_TOL`] of the domain onto it.
    pub(crate) fn locate(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.domain.check_dim(p)?;
        if !self.contains(p) {
            return Err(Error::OutsideDomain { point: p.to_vec() });
        }
        Ok(p.iter()
            .zip(self.domain.sides())
            .map(|(&x, s)| x.clamp(s.lo(), s.hi()))
            .collect())
    }

    /// Shepard-normalized weights `(patch id, w)` of all patches active at `p`.
    pub fn weights_at(&self, p: &[f64]) -> Result<Vec<(usize, f64)>> {
        let q = self.locate(p)?;
        let raw: Vec<(usize, f64)> = self
            .patches_at(&q)
            .map(|patch| (patch.id, patch.raw_weight(&q)))
            .collect();
        let total: f64 = raw.iter().map(|(_, w)| w).sum();
        if total <= 0.0 {
            return Err(Error::CoverIntegrity(format!(
                "no patch carries weight at {q:?}"
            )));
        }
        Ok(raw.into_iter().map(|(id, w)| (id, w / total)).collect())
    }

    /// Sum of zone volumes.
    pub fn zone_volume(&self) -> f64 {
        self.patches.iter().map(|p| p.zone.rect.volume()).sum()
    }

    /// Check ids, zone containment, tiling volume and pairwise zone disjointness.
    pub fn validate(&self) -> Result<()> {
        if self.patches.is_empty() {
            return Err(Error::CoverIntegrity("cover has no patches".into()));
        }
        let dim = self.dim();
        for (i, p) in self.patches.iter().enumerate() {
            if p.id != i {
                return Err(Error::CoverIntegrity(format!(
                    "patch {i} carries id {}",
                    p.id
                )));
            }
            if p.zone.rect.dim() != dim || p.domain_box.dim() != dim || p.local.dim() != dim {
                return Err(Error::CoverIntegrity(format!(
                    "patch {i} has the wrong dimension"
                )));
            }
            for d in 0..dim {
                let (z, b) = (p.zone.rect.side(d), p.domain_box.side(d));
                if z.lo() < b.lo() || z.hi() > b.hi() {
                    return Err(Error::CoverIntegrity(format!(
                        "zone of patch {i} is not inside its patch box"
                    )));
                }
                if z.width() <= 1e-12 {
                    return Err(Error::Geometry(format!(
                        "zone of patch {i} collapsed to width {:e}",
                        z.width()
                    )));
                }
            }
        }
        let total = self.domain.volume();
        let tiled = self.zone_volume();
        if ((tiled - total) / total).abs() > 1e-11 {
            return Err(Error::Geometry(format!(
                "zones cover volume {tiled} but the domain has {total}"
            )));
        }
        for (i, a) in self.patches.iter().enumerate() {
            for b in &self.patches[i + 1..] {
                if a.zone.rect.overlaps(&b.zone.rect) {
                    return Err(Error::Geometry(format!(
                        "zones of patches {} and {} overlap",
                        a.id, b.id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&CoverDoc::from(self))
            .map_err(|e| Error::InvalidParameter(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CoverDoc =
            serde_json::from_str(text).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        doc.try_into()
    }
}

/// Serialized form of a cover.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoverDoc {
    pub domain: Rect,
    pub params: CoverParams,
    pub patches: Vec<PatchDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PatchDoc {
    pub id: usize,
    pub zone: Rect,
    pub levels: Vec<u32>,
    pub domain_box: Rect,
    pub degrees: Vec<usize>,
    pub unresolved: bool,
    pub coeffs: Vec<Vec<f64>>,
}

impl From<&Cover> for CoverDoc {
    fn from(c: &Cover) -> Self {
        CoverDoc {
            domain: c.domain.clone(),
            params: c.params.clone(),
            patches: c
                .patches
                .iter()
                .map(|p| PatchDoc {
                    id: p.id,
                    zone: p.zone.rect.clone(),
                    levels: p.zone.levels.clone(),
                    domain_box: p.domain_box.clone(),
                    degrees: p.degrees(),
                    unresolved: p.unresolved,
                    coeffs: p.local.coeff_rows(),
                })
                .collect(),
        }
    }
}

impl TryFrom<CoverDoc> for Cover {
    type Error = Error;

    fn try_from(doc: CoverDoc) -> Result<Self> {
        let patches = doc
            .patches
            .into_iter()
            .map(|p| {
                let local = LocalSeries::from_rows(&p.domain_box, p.coeffs)?;
                Ok(Patch {
                    id: p.id,
                    zone: Zone {
                        rect: p.zone,
                        levels: p.levels,
                    },
                    domain_box: p.domain_box,
                    local,
                    unresolved: p.unresolved,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Cover::from_patches(doc.domain, patches, doc.params)
    }
}

/// Zone expanded by `overlap · width` per side, clipped to the domain.
pub fn patch_box(zone: &Rect, overlap: f64, domain: &Rect) -> Rect {
    let sides = zone
        .sides()
        .iter()
        .zip(domain.sides())
        .map(|(z, d)| {
            let pad = overlap * z.width();
            let lo = (z.lo() - pad).max(d.lo());
            let hi = (z.hi() + pad).min(d.hi());
            Interval::new(lo, hi).expect("expanded zone is non-degenerate")
        })
        .collect();
    Rect { sides }
}

/// Result of fitting one candidate patch box.
struct Fit {
    local: LocalSeries,
    /// Trailing-coefficient ratio per dimension at the final degree.
    ratios: Vec<f64>,
    resolved: bool,
}

fn sample_grid<F>(f: &F, rect: &Rect, n: usize) -> Result<LocalSeries>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let bad = |p: &[f64]| Error::NonFinite {
        context: format!("sampling f at {p:?} in box {:?}", rect.sides()),
    };
    match rect.dim() {
        1 => {
            let xs = cheb::cheb_points(n, rect.side(0))?;
            let mut values = Vec::with_capacity(xs.len());
            for x in xs {
                let v = f(&[x]);
                if !v.is_finite() {
                    return Err(bad(&[x]));
                }
                values.push(v);
            }
            Ok(LocalSeries::Line(ChebSeries::from_values(
                rect.side(0),
                &values,
            )?))
        }
        _ => {
            let xs = cheb::cheb_points(n, rect.side(0))?;
            let ys = cheb::cheb_points(n, rect.side(1))?;
            let mut values = Array2::zeros((n + 1, n + 1));
            for (i, &x) in xs.iter().enumerate() {
                for (k, &y) in ys.iter().enumerate() {
                    let v = f(&[x, y]);
                    if !v.is_finite() {
                        return Err(bad(&[x, y]));
                    }
                    values[[i, k]] = v;
                }
            }
            let bounds = cheb::Box2::new(rect.side(0), rect.side(1));
            Ok(LocalSeries::Plane(TensorSeries::from_values(
                bounds, &values,
            )?))
        }
    }
}

/// Largest magnitude of `f` on a coarse grid over the whole domain.
fn value_scale<F>(f: &F, domain: &Rect, n: usize) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let probe = sample_grid(f, domain, n)?;
    Ok(match probe {
        LocalSeries::Line(s) => s.max_abs_on_grid(),
        LocalSeries::Plane(s) => s.max_abs_on_grid(),
    })
}

/// Trailing-coefficient ratio measured against `max(peak, scale)`, so that
/// regions where `f` is negligible next to its global size count as resolved.
pub(crate) fn floored_ratio(coeffs: &[f64], scale: f64) -> f64 {
    let peak = coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    if peak < f64::MIN_POSITIVE {
        return 0.0;
    }
    cheb::trailing_ratio(coeffs) * peak / peak.max(scale)
}

/// Chop tolerance relative to the local peak that matches `tol · max(peak, scale)`.
fn floored_tol(coeffs: &[f64], tol: f64, scale: f64) -> f64 {
    let peak = coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    if peak < f64::MIN_POSITIVE {
        return tol;
    }
    tol * peak.max(scale) / peak
}

pub(crate) fn decay_ratios(local: &LocalSeries, scale: f64) -> Vec<f64> {
    match local {
        LocalSeries::Line(s) => vec![floored_ratio(s.coeffs(), scale)],
        LocalSeries::Plane(s) => {
            let (px, py) = s.decay_profiles();
            vec![floored_ratio(&px, scale), floored_ratio(&py, scale)]
        }
    }
}

/// Drop trailing coefficients below `tol · max(peak, scale)`, keeping at least
/// `min_degree`.
fn chop(local: &mut LocalSeries, tol: f64, scale: f64, min_degree: usize) {
    match local {
        LocalSeries::Line(s) => {
            let t = floored_tol(s.coeffs(), tol, scale);
            let keep = cheb::chop_length(s.coeffs(), t);
            let mut c = s.coeffs().to_vec();
            c.truncate(keep + 1);
            c.resize(keep.max(min_degree) + 1, 0.0);
            *s = ChebSeries::new(s.interval(), c).expect("chopped series stays finite");
        }
        LocalSeries::Plane(s) => {
            let (px, py) = s.decay_profiles();
            let (nx, ny) = s.degrees();
            let t = floored_tol(&px, tol, scale);
            let kx = cheb::chop_length(&px, t).min(nx);
            let ky = cheb::chop_length(&py, t).min(ny);
            s.truncate(kx, ky);
            s.pad_to(min_degree, min_degree);
        }
    }
}

fn fit_patch<F>(f: &F, rect: &Rect, params: &CoverParams, scale: f64) -> Result<Fit>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mut n = params
        .start_degree
        .max(params.min_degree)
        .min(params.max_degree);
    loop {
        let mut local = sample_grid(f, rect, n)?;
        let mut ratios = decay_ratios(&local, scale);
        if ratios.iter().all(|&r| r <= params.tol) {
            match sample_test(f, rect, &local, n, params.tol, scale)? {
                None => {
                    chop(&mut local, params.tol, scale, params.min_degree);
                    return Ok(Fit {
                        local,
                        ratios,
                        resolved: true,
                    });
                }
                Some(finer) => ratios = finer,
            }
        }
        // Doubling ladder; a final rung only one above the last is skipped.
        let next = (2 * n).min(params.max_degree);
        if next <= n + 1 {
            return Ok(Fit {
                local,
                ratios,
                resolved: false,
            });
        }
        n = next;
    }
}

/// Smallest degree of the grid used to cross-check an accepted fit.
const SAMPLE_TEST_DEGREE: usize = 64;

/// Allowed disagreement with the finer grid, in units of `tol · scale`.
const SAMPLE_TEST_FACTOR: f64 = 100.0;

/// Resample on a finer grid and compare coefficients; a coarse grid can step
/// over a narrow feature and still look resolved. Returns the finer grid's
/// decay ratios when the two disagree.
fn sample_test<F>(
    f: &F,
    rect: &Rect,
    local: &LocalSeries,
    n: usize,
    tol: f64,
    scale: f64,
) -> Result<Option<Vec<f64>>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let fine = sample_grid(f, rect, (2 * n).max(SAMPLE_TEST_DEGREE))?;
    let (a, b) = (local.coeff_rows(), fine.coeff_rows());
    let at = |rows: &[Vec<f64>], i: usize, j: usize| {
        rows.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0.0)
    };
    let mut gap = 0.0;
    for i in 0..b.len() {
        for j in 0..b[i].len() {
            gap += (at(&b, i, j) - at(&a, i, j)).abs();
        }
    }
    if gap <= SAMPLE_TEST_FACTOR * tol * scale {
        return Ok(None);
    }
    let ratios = decay_ratios(&fine, scale);
    if ratios.iter().any(|&r| r > tol) {
        Ok(Some(ratios))
    } else {
        Ok(Some(vec![f64::INFINITY; ratios.len()]))
    }
}

/// Accepted zone before patch ids are assigned.
struct Leaf {
    zone: Zone,
    domain_box: Rect,
    local: LocalSeries,
    unresolved: bool,
}

fn refine<F>(
    f: &F,
    domain: &Rect,
    zone: Zone,
    params: &CoverParams,
    scale: f64,
) -> Result<Vec<Leaf>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let domain_box = patch_box(&zone.rect, params.overlap, domain);
    let fit = fit_patch(f, &domain_box, params, scale)?;
    if fit.resolved {
        return Ok(vec![Leaf {
            zone,
            domain_box,
            local: fit.local,
            unresolved: false,
        }]);
    }
    // Split the slowest-decaying splittable dimension; ties go to the
    // shallower level, then to x.
    let split = (0..zone.rect.dim())
        .filter(|&d| fit.ratios[d] > params.tol && zone.levels[d] < params.max_level)
        .max_by(|&a, &b| {
            fit.ratios[a]
                .total_cmp(&fit.ratios[b])
                .then(zone.levels[b].cmp(&zone.levels[a]))
                .then(b.cmp(&a))
        });
    let Some(d) = split else {
        return Ok(vec![Leaf {
            zone,
            domain_box,
            local: fit.local,
            unresolved: true,
        }]);
    };
    let side = zone.rect.side(d);
    let mid = side.mid();
    let mut levels = zone.levels.clone();
    levels[d] += 1;
    let left = Zone {
        rect: zone.rect.with_side(d, Interval::new(side.lo(), mid)?),
        levels: levels.clone(),
    };
    let right = Zone {
        rect: zone.rect.with_side(d, Interval::new(mid, side.hi())?),
        levels,
    };
    let (a, b) = rayon::join(
        || refine(f, domain, left, params, scale),
        || refine(f, domain, right, params, scale),
    );
    let mut leaves = a?;
    leaves.extend(b?);
    Ok(leaves)
}

/// Adaptively build a cover of `domain` with local interpolants of `f`.
pub fn build_adaptive<F>(f: &F, domain: Rect, params: CoverParams) -> Result<Cover>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    params.validate()?;
    let root = Zone {
        rect: domain.clone(),
        levels: vec![0; domain.dim()],
    };
    let scale = value_scale(f, &domain, params.max_degree)?;
    let leaves = refine(f, &domain, root, &params, scale)?;
    let patches = leaves
        .into_iter()
        .enumerate()
        .map(|(id, leaf)| Patch {
            id,
            zone: leaf.zone,
            domain_box: leaf.domain_box,
            local: leaf.local,
            unresolved: leaf.unresolved,
        })
        .collect();
    Ok(Cover {
        domain,
        patches,
        params,
    })
}
