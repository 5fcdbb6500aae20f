//! The global partition-of-unity approximant built from a cover.

use ndarray::Array2;
use rayon::prelude::*;

use crate::cheb::{self, Box2, ChebSeries, Interval, TensorSeries};
use crate::cover::{
    build_adaptive, bump, decay_ratios, Cover, CoverParams, Jet, LocalSeries, Patch, Rect,
};
use crate::error::{Error, Result};

/// Extra degree used when re-expanding the blend on a zone.
const ZONE_DEGREE_MARGIN: usize = 4;

/// The re-expansion doubles while unresolved, up to this multiple of its start.
const ZONE_DEGREE_GROWTH: usize = 4;

/// Smallest re-expansion degree of a zone cell before the margin.
const MIN_CELL_DEGREE: usize = 8;

/// Gradients smaller than this are treated as undefined directions.
pub const GRADIENT_FLOOR: f64 = 1e-10;

/// Mass and first moments `∫ f`, `∫ x_d f`.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub mass: f64,
    pub first: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CenterOfMass {
    /// First moments divided by the domain volume.
    pub by_volume: Vec<f64>,
    /// First moments divided by the mass.
    pub by_mass: Vec<f64>,
}

/// Per-patch statistics used to locate the interface.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchMoments {
    pub patch: usize,
    pub volume: f64,
    pub mass: f64,
    pub max_abs: f64,
    /// `mass / (max_abs · volume)`, clamped to `[0, 1]`.
    pub volume_fraction: f64,
    /// First moments divided by the patch volume.
    pub centroid_by_volume: Vec<f64>,
    /// First moments divided by the mass, clamped into the patch box.
    pub centroid: Option<Vec<f64>>,
    /// Normalized gradient of the blend at the centroid.
    pub unit_gradient: Option<Vec<f64>>,
}

/// Compensated summation.
pub(crate) fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0_f64, 0.0_f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[derive(Clone, Debug, PartialEq)]
pub struct PUInterpolant {
    cover: Cover,
}

impl PUInterpolant {
    pub fn new(cover: Cover) -> Self {
        Self { cover }
    }

    pub fn build<F>(f: &F, domain: Rect, params: CoverParams) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        Ok(Self::new(build_adaptive(f, domain, params)?))
    }

    pub fn cover(&self) -> &Cover {
        &self.cover
    }

    pub(crate) fn cover_mut(&mut self) -> &mut Cover {
        &mut self.cover
    }

    pub fn into_cover(self) -> Cover {
        self.cover
    }

    pub fn dim(&self) -> usize {
        self.cover.dim()
    }

    pub fn eval(&self, p: &[f64]) -> Result<f64> {
        let q = self.cover.locate(p)?;
        let (mut num, mut den) = (0.0, 0.0);
        for patch in self.cover.patches_at(&q) {
            let w = patch.raw_weight(&q);
            num += w * patch.local.eval(&q);
            den += w;
        }
        if den <= 0.0 {
            return Err(Error::CoverIntegrity(format!(
                "no patch carries weight at {q:?}"
            )));
        }
        Ok(num / den)
    }

    /// Value, gradient and Hessian of the blend `Σ w_j f_j / Σ w_j`.
    pub fn jet(&self, p: &[f64]) -> Result<Jet> {
        let q = self.cover.locate(p)?;
        let mut n = Jet::default();
        let mut r = Jet::default();
        for patch in self.cover.patches_at(&q) {
            let w = patch.raw_weight_jet(&q);
            let f = patch.local.jet(&q);
            n.value += w.value * f.value;
            r.value += w.value;
            for a in 0..2 {
                n.grad[a] += w.grad[a] * f.value + w.value * f.grad[a];
                r.grad[a] += w.grad[a];
            }
            // hess index: 0 = xx, 1 = xy, 2 = yy
            for (h, (a, b)) in [(0, 0), (0, 1), (1, 1)].into_iter().enumerate() {
                n.hess[h] += w.hess[h] * f.value
                    + w.grad[a] * f.grad[b]
                    + w.grad[b] * f.grad[a]
                    + w.value * f.hess[h];
                r.hess[h] += w.hess[h];
            }
        }
        if r.value <= 0.0 {
            return Err(Error::CoverIntegrity(format!(
                "no patch carries weight at {q:?}"
            )));
        }
        let v = n.value / r.value;
        let g = [
            (n.grad[0] - v * r.grad[0]) / r.value,
            (n.grad[1] - v * r.grad[1]) / r.value,
        ];
        let mut hess = [0.0; 3];
        for (h, (a, b)) in [(0, 0), (0, 1), (1, 1)].into_iter().enumerate() {
            hess[h] = (n.hess[h] - g[a] * r.grad[b] - g[b] * r.grad[a] - v * r.hess[h]) / r.value;
        }
        Ok(Jet {
            value: v,
            grad: g,
            hess,
        })
    }

    pub fn grad(&self, p: &[f64]) -> Result<Vec<f64>> {
        let j = self.jet(p)?;
        Ok(j.grad[..self.dim()].to_vec())
    }

    /// `(f_xx, f_xy, f_yy)`; the mixed and y entries are zero in 1D.
    pub fn second_partials(&self, p: &[f64]) -> Result<[f64; 3]> {
        Ok(self.jet(p)?.hess)
    }

    /// Multiply every local series by `factor`.
    pub fn scale(&mut self, factor: f64) {
        for p in self.cover.patches_mut() {
            p.local.scale(factor);
        }
    }

    /// Integral of the blend over the domain, accumulated zone by zone.
    pub fn global_sum(&self) -> Result<f64> {
        Ok(neumaier_sum(
            self.zone_moments()?.into_iter().map(|m| m.mass),
        ))
    }

    pub fn global_moments(&self) -> Result<Moments> {
        let per_zone = self.zone_moments()?;
        let dim = self.dim();
        Ok(Moments {
            mass: neumaier_sum(per_zone.iter().map(|m| m.mass)),
            first: (0..dim)
                .map(|d| neumaier_sum(per_zone.iter().map(|m| m.first[d])))
                .collect(),
        })
    }

    pub fn center_of_mass(&self) -> Result<CenterOfMass> {
        let m = self.global_moments()?;
        if m.mass.abs() <= 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "center of mass needs a nonzero mass, got {:e}",
                m.mass
            )));
        }
        let vol = self.cover.domain().volume();
        Ok(CenterOfMass {
            by_volume: m.first.iter().map(|x| x / vol).collect(),
            by_mass: m.first.iter().map(|x| x / m.mass).collect(),
        })
    }

    /// Moments of the blend restricted to each zone, in patch order.
    ///
    /// Each zone is cut where neighbouring weights switch pieces, so the blend
    /// is smooth on every cell that gets re-expanded.
    pub fn zone_moments(&self) -> Result<Vec<Moments>> {
        let patches = self.cover.patches();
        let first: Vec<Vec<Cell>> = patches
            .par_iter()
            .map(|p| {
                self.zone_cells(p)
                    .into_iter()
                    .map(|rect| self.start_cell(p, rect))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let scale = first.iter().flatten().fold(0.0_f64, |m, c| match c {
            Cell::Sampled { peak, .. } => m.max(*peak),
            Cell::Owned(_) => m,
        });
        patches
            .par_iter()
            .zip(first)
            .map(|(p, cells)| {
                let parts = cells
                    .into_iter()
                    .map(|c| match c {
                        Cell::Owned(m) => Ok(m),
                        Cell::Sampled { rect, series, .. } => self
                            .refine_cell(p, &rect, series, scale)
                            .map(|s| series_moments(&s)),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Moments {
                    mass: neumaier_sum(parts.iter().map(|m| m.mass)),
                    first: (0..p.zone.rect.dim())
                        .map(|d| neumaier_sum(parts.iter().map(|m| m.first[d])))
                        .collect(),
                })
            })
            .collect()
    }

    /// Cells that only the owner weights are integrated from its own series.
    fn start_cell(&self, owner: &Patch, rect: Rect) -> Result<Cell> {
        let shared = self
            .cover
            .patches()
            .iter()
            .any(|q| q.id != owner.id && q.domain_box.overlaps(&rect));
        if !shared {
            let (mass, first) = owner.local.moments_over(&rect);
            return Ok(Cell::Owned(Moments { mass, first }));
        }
        let (series, peak) = self.blend_on(owner, &rect, &cell_degrees(owner, &rect))?;
        Ok(Cell::Sampled { rect, series, peak })
    }

    /// The zone split at every edge of a neighbouring overlap band.
    fn zone_cells(&self, owner: &Patch) -> Vec<Rect> {
        let zone = &owner.zone.rect;
        let cuts: Vec<Vec<f64>> = (0..zone.dim())
            .map(|d| {
                let side = zone.side(d);
                let eps = 1e-12 * side.width();
                let mut xs = vec![side.lo(), side.hi()];
                for q in self.cover.patches() {
                    if q.id == owner.id || !q.domain_box.overlaps(zone) {
                        continue;
                    }
                    let (b, z) = (q.domain_box.side(d), q.zone.rect.side(d));
                    for x in [b.lo(), z.lo(), z.hi(), b.hi()] {
                        if x > side.lo() + eps && x < side.hi() - eps {
                            xs.push(x);
                        }
                    }
                }
                xs.sort_by(f64::total_cmp);
                xs.dedup_by(|a, b| *a - *b <= eps);
                xs
            })
            .collect();
        let spans = |d: usize| -> Vec<Interval> {
            cuts[d]
                .windows(2)
                .map(|w| Interval::new(w[0], w[1]).expect("sorted cuts"))
                .collect()
        };
        match zone.dim() {
            1 => spans(0).into_iter().map(Rect::line).collect(),
            _ => {
                let ys = spans(1);
                spans(0)
                    .into_iter()
                    .flat_map(|x| ys.iter().map(move |&y| Rect::plane(x, y)))
                    .collect()
            }
        }
    }

    /// Double a cell's re-expansion along each axis whose tail is not
    /// negligible next to `scale`, up to a fixed multiple of the start.
    fn refine_cell(
        &self,
        owner: &Patch,
        cell: &Rect,
        mut series: LocalSeries,
        scale: f64,
    ) -> Result<LocalSeries> {
        let tol = self.cover.params().tol;
        let caps: Vec<usize> = cell_degrees(owner, cell)
            .iter()
            .map(|n| ZONE_DEGREE_GROWTH * n)
            .collect();
        loop {
            let degrees = series.degrees();
            let ratios = decay_ratios(&series, scale);
            let next: Vec<usize> = degrees
                .iter()
                .zip(&ratios)
                .zip(&caps)
                .map(|((&n, &r), &cap)| if r > tol && n < cap { 2 * n } else { n })
                .collect();
            if next == degrees {
                return Ok(series);
            }
            series = self.blend_on(owner, cell, &next)?.0;
        }
    }

    /// Blend sampled on a tensor grid over `zone` (part of the owner's zone)
    /// and re-expanded, with the largest sampled magnitude.
    fn blend_on(
        &self,
        owner: &Patch,
        zone: &Rect,
        degrees: &[usize],
    ) -> Result<(LocalSeries, f64)> {
        let grids = (0..zone.dim())
            .map(|d| cheb::cheb_points(degrees[d], zone.side(d)))
            .collect::<Result<Vec<_>>>()?;
        let shape = (grids[0].len(), grids.get(1).map_or(1, Vec::len));
        let mut num = Array2::<f64>::zeros(shape);
        let mut den = Array2::<f64>::zeros(shape);
        for q in self.cover.patches() {
            if !q.domain_box.overlaps(zone) {
                continue;
            }
            // Per-dimension weights on the grid; the support is one index run.
            let mut factors = Vec::with_capacity(zone.dim());
            let mut ranges = Vec::with_capacity(zone.dim());
            for (d, grid) in grids.iter().enumerate() {
                let w: Vec<f64> = grid
                    .iter()
                    .map(|&x| bump(x, q.zone.rect.side(d), q.domain_box.side(d)).0)
                    .collect();
                let Some(lo) = w.iter().position(|&v| v > 0.0) else {
                    break;
                };
                let hi = w.iter().rposition(|&v| v > 0.0).unwrap_or(lo);
                ranges.push(lo..hi + 1);
                factors.push(w);
            }
            if ranges.len() < zone.dim() {
                continue;
            }
            match &q.local {
                LocalSeries::Line(s) => {
                    let r = ranges[0].clone();
                    let vals = s.eval_many(&grids[0][r.clone()]);
                    for (v, i) in vals.into_iter().zip(r) {
                        let w = factors[0][i];
                        num[[i, 0]] += w * v;
                        den[[i, 0]] += w;
                    }
                }
                LocalSeries::Plane(s) => {
                    let (rx, ry) = (ranges[0].clone(), ranges[1].clone());
                    let vals = s.eval_grid(&grids[0][rx.clone()], &grids[1][ry.clone()]);
                    for (a, i) in rx.enumerate() {
                        for (b, k) in ry.clone().enumerate() {
                            let w = factors[0][i] * factors[1][k];
                            num[[i, k]] += w * vals[[a, b]];
                            den[[i, k]] += w;
                        }
                    }
                }
            }
        }
        if den.iter().any(|&w| w <= 0.0) {
            return Err(Error::CoverIntegrity(format!(
                "zone of patch {} is not fully weighted",
                owner.id
            )));
        }
        let values = num / den;
        let peak = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let series = match zone.dim() {
            1 => LocalSeries::Line(ChebSeries::from_values(
                zone.side(0),
                values.column(0).as_slice().expect("contiguous column"),
            )?),
            _ => LocalSeries::Plane(TensorSeries::from_values(
                Box2::new(zone.side(0), zone.side(1)),
                &values,
            )?),
        };
        Ok((series, peak))
    }

    /// Statistics of one patch's local series over its patch box.
    pub fn patch_moments(&self, id: usize) -> Result<PatchMoments> {
        let patch = self
            .cover
            .patch(id)
            .ok_or_else(|| Error::InvalidParameter(format!("no patch with id {id}")))?;
        let volume = patch.domain_box.volume();
        let mass = patch.local.integrate();
        let first = patch.local.first_moments();
        let max_abs = patch.local.max_abs_on_grid();
        let volume_fraction = if max_abs < 1e-12 {
            0.0
        } else {
            (mass / (max_abs * volume)).clamp(0.0, 1.0)
        };
        let centroid_by_volume = first.iter().map(|m| m / volume).collect();
        let centroid = (mass.abs() > 1e-12).then(|| {
            first
                .iter()
                .zip(patch.domain_box.sides())
                .map(|(m, s)| (m / mass).clamp(s.lo(), s.hi()))
                .collect::<Vec<f64>>()
        });
        let unit_gradient = match &centroid {
            Some(c) => {
                let g = self.grad(c)?;
                let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                (norm >= GRADIENT_FLOOR).then(|| g.iter().map(|v| v / norm).collect())
            }
            None => None,
        };
        Ok(PatchMoments {
            patch: id,
            volume,
            mass,
            max_abs,
            volume_fraction,
            centroid_by_volume,
            centroid,
            unit_gradient,
        })
    }
}

fn start_degrees(p: &Patch) -> Vec<usize> {
    p.degrees().iter().map(|n| n + ZONE_DEGREE_MARGIN).collect()
}

enum Cell {
    Owned(Moments),
    Sampled {
        rect: Rect,
        series: LocalSeries,
        peak: f64,
    },
}

/// Start degrees for a cell, in proportion to its share of the zone.
fn cell_degrees(owner: &Patch, cell: &Rect) -> Vec<usize> {
    start_degrees(owner)
        .iter()
        .enumerate()
        .map(|(d, &n)| {
            let share = cell.side(d).width() / owner.zone.rect.side(d).width();
            ((n as f64 * share).ceil() as usize).max(MIN_CELL_DEGREE) + ZONE_DEGREE_MARGIN
        })
        .collect()
}

fn series_moments(s: &LocalSeries) -> Moments {
    Moments {
        mass: s.integrate(),
        first: s.first_moments(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_rectangle() {
        let f = PUInterpolant::build(
            &|_: &[f64]| 1.0,
            Rect::from_bounds(&[(0.0, 2.0), (0.0, 3.0)]).unwrap(),
            CoverParams::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(f.global_sum().unwrap(), 6.0, epsilon = 1e-13);
        assert_abs_diff_eq!(f.eval(&[1.3, 2.2]).unwrap(), 1.0, epsilon = 1e-15);
        let j = f.jet(&[0.4, 0.7]).unwrap();
        assert_eq!(j.grad, [0.0, 0.0]);
        assert!(j.hess.iter().all(|h| h.abs() < 1e-14));
        let m = f.patch_moments(0).unwrap();
        assert_abs_diff_eq!(m.volume_fraction, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn zero_patch_has_zero_fraction() {
        let f = PUInterpolant::build(
            &|_: &[f64]| 0.0,
            Rect::from_bounds(&[(0.0, 1.0)]).unwrap(),
            CoverParams::default(),
        )
        .unwrap();
        let m = f.patch_moments(0).unwrap();
        assert_eq!(m.volume_fraction, 0.0);
        assert!(m.centroid.is_none());
    }

    #[test]
    fn linear_reproduction_across_patches() {
        let f = PUInterpolant::build(
            &|p: &[f64]| p[0] + (20.0 * p[0]).sin() * 1e-3,
            Rect::from_bounds(&[(-4.0, 4.0)]).unwrap(),
            CoverParams {
                max_degree: 16,
                ..CoverParams::default()
            },
        )
        .unwrap();
        assert!(f.cover().len() > 2);
        for i in 0..50 {
            let x = -3.9 + 7.8 * i as f64 / 49.0;
            let fd = 1.0 + 20e-3 * (20.0 * x).cos();
            assert_abs_diff_eq!(f.grad(&[x]).unwrap()[0], fd, epsilon = 1e-9);
        }
    }

    #[test]
    fn outside_is_rejected() {
        let f = PUInterpolant::build(
            &|_: &[f64]| 1.0,
            Rect::from_bounds(&[(0.0, 1.0)]).unwrap(),
            CoverParams::default(),
        )
        .unwrap();
        assert!(matches!(f.eval(&[1.1]), Err(Error::OutsideDomain { .. })));
        assert!(f.eval(&[1.0 + 1e-13]).is_ok());
    }

    #[test]
    fn compensated_sum() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(neumaier_sum(v), 2.0);
    }
}
