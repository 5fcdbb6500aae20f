//! Interface extraction: band filtering on volume fractions, line searches to
//! the half level, polar ordering and curvature.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::interpolant::{PUInterpolant, PatchMoments, GRADIENT_FLOOR};
use crate::roots::brent;

/// Level separating the two media.
pub const LEVEL: f64 = 0.5;

/// Residual bound for located interface points.
pub const ROOT_TOL: f64 = 1e-12;

/// Points closer than this are merged when assembling a curve.
pub const MERGE_DIST: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct InterfacePoint {
    pub position: Vec<f64>,
    pub patch: usize,
    /// Line parameter in units of the patch diameter.
    pub tau: f64,
    /// `None` where the gradient is too small to define it.
    pub curvature: Option<f64>,
    pub residual: f64,
}

/// Interface points ordered counter-clockwise about a center.
#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructedCurve {
    pub center: Vec<f64>,
    pub points: Vec<InterfacePoint>,
    /// Polar angle in `[0, 2π)` of each point about the center.
    pub angles: Vec<f64>,
}

impl ReconstructedCurve {
    /// Length of the closed polygon through the points.
    pub fn perimeter(&self) -> f64 {
        let n = self.points.len();
        (0..n)
            .map(|i| dist(&self.points[i].position, &self.points[(i + 1) % n].position))
            .sum()
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Moments of the patches whose volume fraction lies in `[lo, hi]`.
pub fn select_interface_patches(f: &PUInterpolant, lo: f64, hi: f64) -> Result<Vec<PatchMoments>> {
    if !(0.0 <= lo && lo < hi && hi <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "invalid band [{lo}, {hi}]"
        )));
    }
    let mut picked = Vec::new();
    for id in 0..f.cover().len() {
        let m = f.patch_moments(id)?;
        if lo <= m.volume_fraction && m.volume_fraction <= hi {
            picked.push(m);
        }
    }
    Ok(picked)
}

fn unit_gradient(f: &PUInterpolant, p: &[f64]) -> Result<Vec<f64>> {
    let g = f.grad(p)?;
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < GRADIENT_FLOOR {
        return Err(Error::DegenerateGradient {
            point: p.to_vec(),
            magnitude: norm,
        });
    }
    Ok(g.iter().map(|v| v / norm).collect())
}

/// Largest `τ ≥ 0` with `seed + τ·step` inside the domain, capped at 1.
fn reach(f: &PUInterpolant, seed: &[f64], step: &[f64]) -> f64 {
    let mut t = 1.0_f64;
    for (d, s) in f.cover().domain().sides().iter().enumerate() {
        if step[d] > 0.0 {
            t = t.min((s.hi() - seed[d]) / step[d]);
        } else if step[d] < 0.0 {
            t = t.min((s.lo() - seed[d]) / step[d]);
        }
    }
    t.max(0.0)
}

/// Locate `f = 1/2` on the line `seed + τ·diam·ĝ`, `τ ∈ [-1, 1]`, where
/// `diam` is the patch-box diagonal and `ĝ` the given unit direction, or the
/// unit gradient at the seed when none is given.
pub fn find_interface_point(
    f: &PUInterpolant,
    patch: usize,
    seed: &[f64],
    direction: Option<&[f64]>,
) -> Result<InterfacePoint> {
    let diam = f
        .cover()
        .patch(patch)
        .ok_or_else(|| Error::InvalidParameter(format!("no patch with id {patch}")))?
        .domain_box
        .diameter();
    let dir = match direction {
        Some(d) => {
            let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(norm > 0.0) || d.len() != seed.len() {
                return Err(Error::InvalidParameter(format!(
                    "bad search direction {d:?}"
                )));
            }
            d.iter().map(|v| v / norm).collect()
        }
        None => unit_gradient(f, seed)?,
    };
    let step: Vec<f64> = dir.iter().map(|v| v * diam).collect();
    let at = |tau: f64| -> Vec<f64> { seed.iter().zip(&step).map(|(x, s)| x + tau * s).collect() };
    let g = |tau: f64| -> Result<f64> { Ok(f.eval(&at(tau))? - LEVEL) };

    let g0 = g(0.0)?;
    let bracket = if g0 == 0.0 {
        Some((0.0, 0.0))
    } else {
        let neg: Vec<f64> = step.iter().map(|s| -s).collect();
        let limits = [reach(f, seed, &step), reach(f, seed, &neg)];
        // March outward along +ĝ first, then along -ĝ, doubling the stride.
        let mut found = None;
        'sides: for (sign, limit) in [(1.0, limits[0]), (-1.0, limits[1])] {
            let (mut prev, mut g_prev) = (0.0_f64, g0);
            let mut h = 1.0 / 64.0;
            loop {
                let next = (prev + h).min(limit);
                if next <= prev {
                    break;
                }
                let g_next = g(sign * next)?;
                if g_next.signum() != g_prev.signum() || g_next == 0.0 {
                    found = Some((sign * prev, sign * next));
                    break 'sides;
                }
                prev = next;
                g_prev = g_next;
                h *= 2.0;
            }
        }
        found
    };
    let Some((a, b)) = bracket else {
        return Err(Error::NoInterfaceInReach { patch });
    };
    let (tau, residual) = if a == b {
        (a, g0)
    } else {
        brent(g, a.min(b), a.max(b), ROOT_TOL)?
    };
    let position = at(tau);
    let curvature = match curvature(f, &position) {
        Ok(k) => Some(k),
        Err(Error::DegenerateGradient { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(InterfacePoint {
        position,
        patch,
        tau,
        curvature,
        residual: residual.abs(),
    })
}

/// Curvature of the level line through `p`.
pub fn curvature(f: &PUInterpolant, p: &[f64]) -> Result<f64> {
    if f.dim() != 2 {
        return Err(Error::InvalidParameter(
            "curvature needs a 2D interpolant".into(),
        ));
    }
    let j = f.jet(p)?;
    let [fx, fy] = j.grad;
    let [fxx, fxy, fyy] = j.hess;
    let g2 = fx * fx + fy * fy;
    if g2.sqrt() < GRADIENT_FLOOR {
        return Err(Error::DegenerateGradient {
            point: p.to_vec(),
            magnitude: g2.sqrt(),
        });
    }
    Ok((fy * fy * fxx - 2.0 * fx * fy * fxy + fx * fx * fyy).abs() / g2.powf(1.5))
}

/// Sort points by polar angle about `center`, merging near duplicates.
pub fn reconstruct_curve(
    points: Vec<InterfacePoint>,
    center: &[f64],
) -> Result<ReconstructedCurve> {
    let angle = |p: &InterfacePoint| {
        let a = (p.position[1] - center[1]).atan2(p.position[0] - center[0]);
        if a < 0.0 {
            (a + TAU) % TAU
        } else {
            a
        }
    };
    let mut tagged: Vec<(f64, InterfacePoint)> =
        points.into_iter().map(|p| (angle(&p), p)).collect();
    tagged.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut kept: Vec<(f64, InterfacePoint)> = Vec::with_capacity(tagged.len());
    for (a, p) in tagged {
        if let Some((la, lp)) = kept.last() {
            if a <= *la || dist(&lp.position, &p.position) < MERGE_DIST {
                continue;
            }
        }
        kept.push((a, p));
    }
    if kept.len() > 1 && dist(&kept[0].1.position, &kept[kept.len() - 1].1.position) < MERGE_DIST {
        kept.pop();
    }
    if kept.len() < 3 {
        return Err(Error::DegenerateCurve(kept.len()));
    }
    let (angles, points) = kept.into_iter().unzip();
    Ok(ReconstructedCurve {
        center: center.to_vec(),
        points,
        angles,
    })
}

/// Seeds offset from the centroid along the tangent (ĝ turned by +90°).
/// One extra seed goes to the `+` side; two go to both sides.
pub fn tangent_seeds(m: &PatchMoments, diam: f64, count: usize, offset: f64) -> Vec<Vec<f64>> {
    let (Some(c), Some(g)) = (&m.centroid, &m.unit_gradient) else {
        return Vec::new();
    };
    if c.len() != 2 {
        return Vec::new();
    }
    let t = [-g[1], g[0]];
    [1.0, -1.0]
        .iter()
        .take(count.min(2))
        .map(|s| {
            vec![
                c[0] + s * offset * diam * t[0],
                c[1] + s * offset * diam * t[1],
            ]
        })
        .collect()
}

/// How seeds are placed in each selected patch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Seeding {
    /// Extra seeds along the tangent, 0 to 2.
    pub tangent: usize,
    /// Tangent offset in units of the patch diameter.
    pub offset: f64,
}

impl Default for Seeding {
    fn default() -> Self {
        Self {
            tangent: 0,
            offset: 0.25,
        }
    }
}

/// Outcome of an interface extraction over a band of patches.
#[derive(Clone, Debug)]
pub struct Extraction {
    pub patches: Vec<PatchMoments>,
    pub points: Vec<InterfacePoint>,
    /// Seeds that produced no point, with the reason.
    pub skipped: Vec<(usize, Error)>,
}

/// Run the line search from the centroid (and optional tangent seeds) of
/// every patch in the band.
pub fn extract_interface(
    f: &PUInterpolant,
    lo: f64,
    hi: f64,
    seeding: Seeding,
) -> Result<Extraction> {
    let patches = select_interface_patches(f, lo, hi)?;
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for m in &patches {
        let Some(c) = &m.centroid else {
            skipped.push((m.patch, Error::NoInterfaceInReach { patch: m.patch }));
            continue;
        };
        let diam = f.cover().patches()[m.patch].domain_box.diameter();
        let mut seeds = vec![c.clone()];
        seeds.extend(
            tangent_seeds(m, diam, seeding.tangent, seeding.offset)
                .into_iter()
                .filter(|s| f.cover().contains(s)),
        );
        for seed in seeds {
            match find_interface_point(f, m.patch, &seed, None) {
                Ok(p) => points.push(p),
                Err(e) => skipped.push((m.patch, e)),
            }
        }
    }
    Ok(Extraction {
        patches,
        points,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::{CoverParams, Rect};
    use approx::assert_abs_diff_eq;

    fn point(x: f64, y: f64) -> InterfacePoint {
        InterfacePoint {
            position: vec![x, y],
            patch: 0,
            tau: 0.0,
            curvature: None,
            residual: 0.0,
        }
    }

    #[test]
    fn polar_order() {
        let pts = vec![
            point(0.0, -1.0),
            point(-1.0, 0.0),
            point(1.0, 0.0),
            point(0.0, 1.0),
        ];
        let c = reconstruct_curve(pts, &[0.0, 0.0]).unwrap();
        let order: Vec<Vec<f64>> = c.points.iter().map(|p| p.position.clone()).collect();
        assert_eq!(
            order,
            vec![
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![-1.0, 0.0],
                vec![0.0, -1.0]
            ]
        );
        assert_eq!(c.angles[0], 0.0);
        assert_abs_diff_eq!(c.perimeter(), 4.0 * 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn duplicates_merge_and_too_few_fail() {
        let pts = vec![point(1.0, 0.0), point(1.0, 1e-12), point(0.0, 1.0)];
        assert!(matches!(
            reconstruct_curve(pts, &[0.0, 0.0]),
            Err(Error::DegenerateCurve(2))
        ));
    }

    #[test]
    fn flat_interface() {
        let f = PUInterpolant::build(
            &|p: &[f64]| 0.5 * (100.0 * p[0]).tanh() + 0.5,
            Rect::from_bounds(&[(-1.0, 1.0), (-1.0, 1.0)]).unwrap(),
            CoverParams::default(),
        )
        .unwrap();
        let host = f
            .cover()
            .patches()
            .iter()
            .find(|p| p.domain_box.contains(&[0.3, 0.0]))
            .unwrap()
            .id;
        // the profile is flat to machine precision at the seed
        assert!(find_interface_point(&f, host, &[0.3, 0.0], None).is_err());
        let p = find_interface_point(&f, host, &[0.3, 0.0], Some(&[-1.0, 0.0])).unwrap();
        assert_abs_diff_eq!(p.position[0], 0.0, epsilon = 1e-12);
        assert!(p.residual < ROOT_TOL);
        assert_abs_diff_eq!(curvature(&f, &[0.0, 0.3]).unwrap(), 0.0, epsilon = 1e-7);
    }

    #[test]
    fn uniform_field_has_no_interface() {
        let f = PUInterpolant::build(
            &|_: &[f64]| 1.0,
            Rect::from_bounds(&[(-1.0, 1.0), (-1.0, 1.0)]).unwrap(),
            CoverParams::default(),
        )
        .unwrap();
        assert!(select_interface_patches(&f, 0.05, 0.95).unwrap().is_empty());
        assert!(matches!(
            curvature(&f, &[0.0, 0.0]),
            Err(Error::DegenerateGradient { .. })
        ));
    }
}
