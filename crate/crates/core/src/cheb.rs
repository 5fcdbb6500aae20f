//! Chebyshev approximation primitives in one and two dimensions.
//!
//! Series are stored in the first-kind basis `T_k` on the reference interval
//! `[-1, 1]`, with an affine map to the physical interval. Sampling grids are
//! the Chebyshev extreme points, listed in ascending order.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest polynomial degree used per dimension unless overridden.
pub const DEFAULT_MAX_DEGREE: usize = 129;

/// Inputs this far outside an interval are clamped to the endpoint.
pub const CLAMP_TOL: f64 = 1e-12;

/// A closed interval `[lo, hi]` with `lo < hi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_finite() && hi.is_finite() && lo < hi {
            Ok(Self { lo, hi })
        } else {
            Err(Error::InvalidInterval { lo, hi })
        }
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.hi
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    #[inline]
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    #[inline]
    pub fn half_width(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    /// Affine map to `[-1, 1]`, clamped.
    #[inline]
    pub fn to_unit(&self, x: f64) -> f64 {
        ((x - self.mid()) / self.half_width()).clamp(-1.0, 1.0)
    }

    #[inline]
    pub fn from_unit(&self, t: f64) -> f64 {
        self.mid() + self.half_width() * t
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    /// Containment with an absolute slack of `tol` beyond either endpoint.
    #[inline]
    pub fn contains_within(&self, x: f64, tol: f64) -> bool {
        x >= self.lo - tol && x <= self.hi + tol
    }
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = Error;

    fn try_from(v: [f64; 2]) -> Result<Self> {
        Interval::new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

/// Axis-aligned rectangle used as the domain of a tensor series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Box2 {
    pub x: Interval,
    pub y: Interval,
}

impl Box2 {
    pub fn new(x: Interval, y: Interval) -> Self {
        Self { x, y }
    }

    pub fn area(&self) -> f64 {
        self.x.width() * self.y.width()
    }
}

/// Chebyshev extreme points of `[-1, 1]` in ascending order.
///
/// Uses the sine form so that the grid is exactly symmetric and the
/// endpoints and midpoint are exact.
pub fn unit_cheb_points(n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::ZeroDegree);
    }
    let nf = n as f64;
    Ok((0..=n)
        .map(|i| {
            let m = 2.0 * i as f64 - nf;
            (PI * m / (2.0 * nf)).sin()
        })
        .collect())
}

/// The `n + 1` Chebyshev extreme points of `interval`, ascending, with
/// endpoints equal to the interval bounds.
pub fn cheb_points(n: usize, interval: Interval) -> Result<Vec<f64>> {
    let mut pts: Vec<f64> = unit_cheb_points(n)?
        .into_iter()
        .map(|t| interval.from_unit(t))
        .collect();
    pts[0] = interval.lo();
    pts[n] = interval.hi();
    Ok(pts)
}

/// Cached value<->coefficient matrices for one grid size.
struct Transforms {
    /// coefficients = forward · values
    forward: Array2<f64>,
    /// values = backward · coefficients
    backward: Array2<f64>,
}

fn transforms(n: usize) -> Arc<Transforms> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Transforms>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().unwrap().get(&n) {
        return Arc::clone(t);
    }
    let built = Arc::new(build_transforms(n));
    cache
        .lock()
        .unwrap()
        .entry(n)
        .or_insert_with(|| Arc::clone(&built))
        .clone()
}

fn build_transforms(n: usize) -> Transforms {
    // T_k at the ascending point -cos(i pi / n) equals (-1)^k cos(k i pi / n).
    let two_n = 2 * n;
    let table: Vec<f64> = (0..two_n)
        .map(|m| (PI * m as f64 / n as f64).cos())
        .collect();
    let basis = |k: usize, i: usize| -> f64 {
        let c = table[(k * i) % two_n];
        if k % 2 == 1 {
            -c
        } else {
            c
        }
    };
    let backward = Array2::from_shape_fn((n + 1, n + 1), |(i, k)| basis(k, i));
    let scale = 2.0 / n as f64;
    let forward = Array2::from_shape_fn((n + 1, n + 1), |(k, i)| {
        let mut w = scale * basis(k, i);
        if i == 0 || i == n {
            w *= 0.5;
        }
        if k == 0 || k == n {
            w *= 0.5;
        }
        w
    });
    Transforms { forward, backward }
}

fn check_finite(values: &[f64], context: &str) -> Result<()> {
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: format!("at sample {pos} {context}"),
        });
    }
    Ok(())
}

/// Chebyshev coefficients of the interpolant through `values` sampled at the
/// ascending extreme points.
pub fn values_to_coeffs(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::TooFewSamples {
            min: 2,
            got: values.len(),
        });
    }
    check_finite(values, "in values_to_coeffs")?;
    let tr = transforms(values.len() - 1);
    Ok(tr.forward.dot(&ArrayView1::from(values)).to_vec())
}

/// Values of a coefficient sequence on its own extreme-point grid.
pub fn coeffs_to_values(coeffs: &[f64]) -> Vec<f64> {
    match coeffs.len() {
        0 => Vec::new(),
        1 => vec![coeffs[0]],
        len => {
            let tr = transforms(len - 1);
            tr.backward.dot(&ArrayView1::from(coeffs)).to_vec()
        }
    }
}

/// `∫_{-1}^{1} T_k(t) dt`.
#[inline]
pub fn t_integral(k: usize) -> f64 {
    if k % 2 == 1 {
        0.0
    } else {
        let kf = k as f64;
        2.0 / (1.0 - kf * kf)
    }
}

/// `∫_{-1}^{1} t T_k(t) dt`, from `t T_k = (T_{k+1} + T_{|k-1|}) / 2`.
#[inline]
pub fn t_first_moment(k: usize) -> f64 {
    let below = if k == 0 { 1 } else { k - 1 };
    0.5 * (t_integral(k + 1) + t_integral(below))
}

/// Weights `(∫_a^b T_k dx, ∫_a^b x T_k dx)` for `k = 0..=n`, with `T_k`
/// mapped onto `interval` and `[a, b]` inside it.
pub fn partial_weights(interval: Interval, a: f64, b: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (ta, tb) = (
        interval.to_unit(a).clamp(-1.0, 1.0),
        interval.to_unit(b).clamp(-1.0, 1.0),
    );
    let t_vals = |t: f64| {
        let mut v = Vec::with_capacity(n + 3);
        v.push(1.0);
        v.push(t);
        for j in 2..n + 3 {
            v.push(2.0 * t * v[j - 1] - v[j - 2]);
        }
        v
    };
    let (va, vb) = (t_vals(ta), t_vals(tb));
    // antiderivative of T_j
    let anti = |v: &[f64], t: f64, j: usize| match j {
        0 => t,
        1 => 0.5 * t * t,
        _ => v[j + 1] / (2.0 * (j + 1) as f64) - v[j - 1] / (2.0 * (j - 1) as f64),
    };
    let g: Vec<f64> = (0..n + 2)
        .map(|j| anti(&vb, tb, j) - anti(&va, ta, j))
        .collect();
    let (h, m) = (interval.half_width(), interval.mid());
    let w0: Vec<f64> = g[..=n].iter().map(|x| h * x).collect();
    let w1 = (0..=n)
        .map(|k| {
            let below = if k == 0 { 1 } else { k - 1 };
            m * w0[k] + h * h * 0.5 * (g[k + 1] + g[below])
        })
        .collect();
    (w0, w1)
}

/// Clenshaw recurrence on the reference interval.
#[inline]
pub fn clenshaw(coeffs: &[f64], t: f64) -> f64 {
    let Some((&c0, rest)) = coeffs.split_first() else {
        return 0.0;
    };
    let two_t = 2.0 * t;
    let (mut b1, mut b2) = (0.0, 0.0);
    for &c in rest.iter().rev() {
        let b0 = c + two_t * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    c0 + t * b1 - b2
}

/// Chebyshev polynomials `T_0..T_n` at `t`.
fn basis_row(n: usize, t: f64, out: &mut [f64]) {
    out[0] = 1.0;
    if n >= 1 {
        out[1] = t;
    }
    for k in 2..=n {
        out[k] = 2.0 * t * out[k - 1] - out[k - 2];
    }
}

/// Matrix with rows `T_0..T_n` evaluated at each point mapped into `interval`.
fn basis_matrix(n: usize, interval: &Interval, points: &[f64]) -> Array2<f64> {
    let mut m = Array2::zeros((points.len(), n + 1));
    for (mut row, &x) in m.rows_mut().into_iter().zip(points) {
        let t = interval.to_unit(x);
        basis_row(n, t, row.as_slice_mut().expect("row-major"));
    }
    m
}

/// Coefficients of the derivative with respect to the reference variable.
fn derivative_coeffs(c: &[f64]) -> Vec<f64> {
    let n = c.len() - 1;
    if n == 0 {
        return vec![0.0];
    }
    let mut d = vec![0.0; n + 2];
    for k in (1..=n).rev() {
        d[k - 1] = d[k + 1] + 2.0 * k as f64 * c[k];
    }
    d[0] *= 0.5;
    d.truncate(n);
    d
}

/// True when the trailing two coefficients are negligible relative to the
/// largest one. An all-zero sequence counts as resolved.
pub fn is_resolved(coeffs: &[f64], tol: f64) -> bool {
    trailing_ratio(coeffs) <= tol
}

/// `max(|c_{n-1}|, |c_n|) / max_k |c_k|`, or 0 for an all-zero sequence.
pub fn trailing_ratio(coeffs: &[f64]) -> f64 {
    let peak = coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    if peak < f64::MIN_POSITIVE {
        return 0.0;
    }
    let tail = coeffs
        .iter()
        .rev()
        .take(2)
        .fold(0.0_f64, |m, c| m.max(c.abs()));
    tail / peak
}

/// Index of the last coefficient above `tol * max`, or 0 if none.
pub fn chop_length(coeffs: &[f64], tol: f64) -> usize {
    let peak = coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    let cutoff = tol * peak;
    coeffs.iter().rposition(|c| c.abs() > cutoff).unwrap_or(0)
}

/// One-dimensional Chebyshev series on an interval.
#[derive(Clone, Debug, PartialEq)]
pub struct ChebSeries {
    interval: Interval,
    coeffs: Vec<f64>,
}

impl ChebSeries {
    pub fn new(interval: Interval, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::TooFewSamples { min: 1, got: 0 });
        }
        check_finite(&coeffs, "in series coefficients")?;
        Ok(Self { interval, coeffs })
    }

    /// Interpolate samples taken at `cheb_points(values.len() - 1, interval)`.
    pub fn from_values(interval: Interval, values: &[f64]) -> Result<Self> {
        Self::new(interval, values_to_coeffs(values)?)
    }

    /// Sample `f` on the degree-`n` grid and interpolate.
    pub fn from_fn(interval: Interval, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values: Vec<f64> = cheb_points(n, interval)?.into_iter().map(f).collect();
        Self::from_values(interval, &values)
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        clenshaw(&self.coeffs, self.interval.to_unit(x))
    }

    /// Values on the series' own extreme-point grid.
    pub fn to_values(&self) -> Vec<f64> {
        coeffs_to_values(&self.coeffs)
    }

    pub fn eval_many(&self, xs: &[f64]) -> Vec<f64> {
        basis_matrix(self.degree(), &self.interval, xs)
            .dot(&ArrayView1::from(&self.coeffs[..]))
            .to_vec()
    }

    pub fn differentiate(&self) -> ChebSeries {
        let scale = 1.0 / self.interval.half_width();
        let coeffs = derivative_coeffs(&self.coeffs)
            .into_iter()
            .map(|c| c * scale)
            .collect();
        ChebSeries {
            interval: self.interval,
            coeffs,
        }
    }

    /// Definite integral over the whole interval.
    pub fn integrate(&self) -> f64 {
        let sum: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * t_integral(k))
            .sum();
        sum * self.interval.half_width()
    }

    /// `(∫ f, ∫ x f)` over `[a, b]` inside the interval.
    pub fn moments_over(&self, a: f64, b: f64) -> (f64, f64) {
        let (w0, w1) = partial_weights(self.interval, a, b, self.degree());
        let dot = |w: &[f64]| self.coeffs.iter().zip(w).map(|(c, w)| c * w).sum::<f64>();
        (dot(&w0), dot(&w1))
    }

    /// `∫ x f(x) dx` over the interval.
    pub fn first_moment(&self) -> f64 {
        let hw = self.interval.half_width();
        let tm: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * t_first_moment(k))
            .sum();
        self.interval.mid() * self.integrate() + hw * hw * tm
    }

    pub fn scale(&mut self, s: f64) {
        self.coeffs.iter_mut().for_each(|c| *c *= s);
    }

    pub fn set_interval(&mut self, interval: Interval) {
        self.interval = interval;
    }

    /// Largest absolute value on the series' own grid.
    pub fn max_abs_on_grid(&self) -> f64 {
        self.to_values().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_resolved(&self, tol: f64) -> bool {
        is_resolved(&self.coeffs, tol)
    }
}

/// Apply the 1D forward transform along both axes of a sample matrix.
pub fn values_to_coeffs_2d(values: &Array2<f64>) -> Result<Array2<f64>> {
    let (rows, cols) = values.dim();
    if rows < 2 || cols < 2 {
        return Err(Error::TooFewSamples {
            min: 2,
            got: rows.min(cols),
        });
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: format!("({v}) in values_to_coeffs_2d"),
        });
    }
    let tx = transforms(rows - 1);
    let ty = transforms(cols - 1);
    Ok(tx.forward.dot(values).dot(&ty.forward.t()))
}

/// Tensor-product Chebyshev series on a rectangle. `coeffs[[j, k]]`
/// multiplies `T_j(x) T_k(y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorSeries {
    bounds: Box2,
    coeffs: Array2<f64>,
}

impl TensorSeries {
    pub fn new(bounds: Box2, coeffs: Array2<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::TooFewSamples { min: 1, got: 0 });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite {
                context: "in tensor coefficients".into(),
            });
        }
        Ok(Self { bounds, coeffs })
    }

    /// Interpolate `values[[i, k]] = f(x_i, y_k)` on the tensor extreme-point grid.
    pub fn from_values(bounds: Box2, values: &Array2<f64>) -> Result<Self> {
        Self::new(bounds, values_to_coeffs_2d(values)?)
    }

    pub fn from_fn(
        bounds: Box2,
        nx: usize,
        ny: usize,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let xs = cheb_points(nx, bounds.x)?;
        let ys = cheb_points(ny, bounds.y)?;
        let values = Array2::from_shape_fn((nx + 1, ny + 1), |(i, k)| f(xs[i], ys[k]));
        Self::from_values(bounds, &values)
    }

    pub fn bounds(&self) -> Box2 {
        self.bounds
    }

    pub fn coeffs(&self) -> &Array2<f64> {
        &self.coeffs
    }

    /// Degrees `(x, y)`.
    pub fn degrees(&self) -> (usize, usize) {
        let (r, c) = self.coeffs.dim();
        (r - 1, c - 1)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let ty = self.bounds.y.to_unit(y);
        let tx = self.bounds.x.to_unit(x);
        let inner: Vec<f64> = self
            .coeffs
            .rows()
            .into_iter()
            .map(|row| clenshaw(row.as_slice().expect("row-major"), ty))
            .collect();
        clenshaw(&inner, tx)
    }

    /// Values on the tensor grid `xs × ys`; entry `[[i, k]]` is `f(xs[i], ys[k])`.
    pub fn eval_grid(&self, xs: &[f64], ys: &[f64]) -> Array2<f64> {
        let (nx, ny) = self.degrees();
        let bx = basis_matrix(nx, &self.bounds.x, xs);
        let by = basis_matrix(ny, &self.bounds.y, ys);
        bx.dot(&self.coeffs).dot(&by.t())
    }

    /// Values on the series' own tensor grid.
    pub fn to_values(&self) -> Array2<f64> {
        let (nx, ny) = self.degrees();
        let ex = (nx > 0).then(|| transforms(nx));
        let ey = (ny > 0).then(|| transforms(ny));
        let left = match &ex {
            Some(t) => t.backward.dot(&self.coeffs),
            None => self.coeffs.clone(),
        };
        match &ey {
            Some(t) => left.dot(&t.backward.t()),
            None => left,
        }
    }

    pub fn partial_x(&self) -> TensorSeries {
        let scale = 1.0 / self.bounds.x.half_width();
        let (nx, ny) = self.degrees();
        let rows = nx.max(1);
        let mut out = Array2::zeros((rows, ny + 1));
        for (k, col) in self.coeffs.axis_iter(Axis(1)).enumerate() {
            let d = derivative_coeffs(&col.to_vec());
            for (j, v) in d.into_iter().enumerate() {
                out[[j, k]] = v * scale;
            }
        }
        TensorSeries {
            bounds: self.bounds,
            coeffs: out,
        }
    }

    pub fn partial_y(&self) -> TensorSeries {
        let scale = 1.0 / self.bounds.y.half_width();
        let (nx, ny) = self.degrees();
        let cols = ny.max(1);
        let mut out = Array2::zeros((nx + 1, cols));
        for (j, row) in self.coeffs.axis_iter(Axis(0)).enumerate() {
            let d = derivative_coeffs(&row.to_vec());
            for (k, v) in d.into_iter().enumerate() {
                out[[j, k]] = v * scale;
            }
        }
        TensorSeries {
            bounds: self.bounds,
            coeffs: out,
        }
    }

    fn weighted_sum(&self, wx: impl Fn(usize) -> f64, wy: impl Fn(usize) -> f64) -> f64 {
        let (nx, ny) = self.degrees();
        let wy: Array1<f64> = (0..=ny).map(wy).collect();
        let inner = self.coeffs.dot(&wy);
        (0..=nx).map(|j| wx(j) * inner[j]).sum()
    }

    /// Integral over the rectangle.
    pub fn integrate(&self) -> f64 {
        let jac = self.bounds.x.half_width() * self.bounds.y.half_width();
        jac * self.weighted_sum(t_integral, t_integral)
    }

    /// `(∫ x f, ∫ y f)` over the rectangle.
    pub fn first_moments(&self) -> (f64, f64) {
        let (bx, by) = (self.bounds.x, self.bounds.y);
        let jac = bx.half_width() * by.half_width();
        let mass = jac * self.weighted_sum(t_integral, t_integral);
        let mx =
            bx.mid() * mass + jac * bx.half_width() * self.weighted_sum(t_first_moment, t_integral);
        let my =
            by.mid() * mass + jac * by.half_width() * self.weighted_sum(t_integral, t_first_moment);
        (mx, my)
    }

    /// `(∫ f, ∫ x f, ∫ y f)` over a sub-rectangle.
    pub fn moments_over(&self, sub: Box2) -> (f64, f64, f64) {
        let (nx, ny) = self.degrees();
        let (x0, x1) = partial_weights(self.bounds.x, sub.x.lo(), sub.x.hi(), nx);
        let (y0, y1) = partial_weights(self.bounds.y, sub.y.lo(), sub.y.hi(), ny);
        let c_y0 = self.coeffs.dot(&Array1::from(y0));
        let c_y1 = self.coeffs.dot(&Array1::from(y1));
        let dot = |w: &[f64], v: &Array1<f64>| w.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        (dot(&x0, &c_y0), dot(&x1, &c_y0), dot(&x0, &c_y1))
    }

    pub fn scale(&mut self, s: f64) {
        self.coeffs.mapv_inplace(|c| c * s);
    }

    pub fn set_bounds(&mut self, bounds: Box2) {
        self.bounds = bounds;
    }

    pub fn max_abs_on_grid(&self) -> f64 {
        self.to_values().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Column profile `max_k |C[j,k]|` (x decay) and row profile (y decay).
    pub fn decay_profiles(&self) -> (Vec<f64>, Vec<f64>) {
        let px = self
            .coeffs
            .rows()
            .into_iter()
            .map(|r| r.iter().fold(0.0_f64, |m, c| m.max(c.abs())))
            .collect();
        let py = self
            .coeffs
            .columns()
            .into_iter()
            .map(|c| c.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
            .collect();
        (px, py)
    }

    /// Keep only the leading `(nx + 1) × (ny + 1)` block.
    pub fn truncate(&mut self, nx: usize, ny: usize) {
        let block = self.coeffs.slice(ndarray::s![..=nx, ..=ny]).to_owned();
        self.coeffs = block;
    }

    /// Grow with zero coefficients up to at least `(nx, ny)`.
    pub fn pad_to(&mut self, nx: usize, ny: usize) {
        let (cx, cy) = self.degrees();
        if cx >= nx && cy >= ny {
            return;
        }
        let mut grown = Array2::zeros((cx.max(nx) + 1, cy.max(ny) + 1));
        grown
            .slice_mut(ndarray::s![..=cx, ..=cy])
            .assign(&self.coeffs);
        self.coeffs = grown;
    }
}

/// Integral weights for samples on a degree-`n` extreme-point grid of
/// `interval`: the integral of the interpolant equals `Σ w_i v_i`.
pub fn grid_integral_weights(n: usize, interval: Interval) -> Vec<f64> {
    let tr = transforms(n);
    let tw: Array1<f64> = (0..=n).map(t_integral).collect();
    let hw = interval.half_width();
    tw.dot(&tr.forward).mapv(|w| w * hw).to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit() -> Interval {
        Interval::new(-1.0, 1.0).unwrap()
    }

    #[test]
    fn interval_rejects_degenerate() {
        assert!(Interval::new(1.0, 1.0).is_err());
        assert!(Interval::new(2.0, 1.0).is_err());
        assert!(Interval::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn cheb_points_small_grids() {
        assert_eq!(cheb_points(1, unit()).unwrap(), vec![-1.0, 1.0]);
        assert_eq!(cheb_points(2, unit()).unwrap(), vec![-1.0, 0.0, 1.0]);
        assert!(matches!(cheb_points(0, unit()), Err(Error::ZeroDegree)));
    }

    #[test]
    fn cheb_points_scaled() {
        let pts = cheb_points(4, Interval::new(0.0, 2.0).unwrap()).unwrap();
        // direct cosine evaluation: 1 - cos(j pi / 4), ascending
        let expect: Vec<f64> = (0..=4).map(|j| 1.0 - (j as f64 * PI / 4.0).cos()).collect();
        assert_eq!(pts[0], 0.0);
        assert_eq!(pts[4], 2.0);
        for (p, e) in pts.iter().zip(&expect) {
            assert_abs_diff_eq!(p, e, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(pts[1], 1.0 - 0.5 * 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn transform_of_basis_polynomials() {
        let xs = cheb_points(4, unit()).unwrap();
        let c = values_to_coeffs(&xs).unwrap();
        for (k, v) in c.iter().enumerate() {
            let e = if k == 1 { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(*v, e, epsilon = 1e-15);
        }
        let t2: Vec<f64> = xs.iter().map(|x| 2.0 * x * x - 1.0).collect();
        let c = values_to_coeffs(&t2).unwrap();
        for (k, v) in c.iter().enumerate() {
            let e = if k == 2 { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(*v, e, epsilon = 1e-15);
        }
    }

    #[test]
    fn exponential_series() {
        let s = ChebSeries::from_fn(unit(), 20, f64::exp).unwrap();
        assert!(s.coeffs()[20].abs() < 1e-14);
        assert_abs_diff_eq!(s.eval(0.3), 0.3f64.exp(), epsilon = 1e-14);
        assert_abs_diff_eq!(s.eval(0.77), 0.77f64.exp(), epsilon = 1e-13);
        assert!(s.is_resolved(1e-13));
    }

    #[test]
    fn rejects_bad_samples() {
        assert!(values_to_coeffs(&[1.0]).is_err());
        assert!(values_to_coeffs(&[1.0, f64::NAN, 2.0]).is_err());
    }

    #[test]
    fn clenshaw_known_values() {
        let s = ChebSeries::new(unit(), vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(s.eval(0.5), -1.0, epsilon = 1e-15);
        let c = ChebSeries::new(Interval::new(3.0, 7.0).unwrap(), vec![1.0]).unwrap();
        assert_eq!(c.eval(4.2), 1.0);
    }

    #[test]
    fn derivative_recurrence() {
        let t2 = ChebSeries::new(unit(), vec![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(t2.differentiate().coeffs(), &[0.0, 4.0]);
        let c = ChebSeries::new(unit(), vec![3.0]).unwrap();
        assert_eq!(c.differentiate().coeffs(), &[0.0]);

        let e = ChebSeries::from_fn(unit(), 20, f64::exp).unwrap();
        let h = 1e-6;
        let fd = (e.eval(0.3 + h) - e.eval(0.3 - h)) / (2.0 * h);
        assert_abs_diff_eq!(e.differentiate().eval(0.3), fd, epsilon = 1e-9);
    }

    #[test]
    fn integral_of_basis() {
        let mk = |c: Vec<f64>| ChebSeries::new(unit(), c).unwrap().integrate();
        assert_abs_diff_eq!(mk(vec![1.0]), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(mk(vec![0.0, 0.0, 1.0]), -2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(mk(vec![0.0, 1.0]), 0.0);
    }

    #[test]
    fn first_moment_matches_quadratic() {
        // ∫_0^2 x (x^2) dx = 4
        let s = ChebSeries::from_fn(Interval::new(0.0, 2.0).unwrap(), 6, |x| x * x).unwrap();
        assert_abs_diff_eq!(s.first_moment(), 4.0, epsilon = 1e-13);
    }

    #[test]
    fn resolution_rule() {
        let e = ChebSeries::from_fn(unit(), 20, f64::exp).unwrap();
        assert!(is_resolved(e.coeffs(), 1e-13));
        let steep = ChebSeries::from_fn(Interval::new(-4.0, 4.0).unwrap(), 129, |x| {
            (100.0 * (1.0 - x * x)).tanh()
        })
        .unwrap();
        assert!(!is_resolved(steep.coeffs(), 1e-13));
        assert!(is_resolved(&[1.0, 0.0, 0.0, 0.0], 1e-13));
        assert!(is_resolved(&[0.0; 5], 1e-13));
    }

    #[test]
    fn tensor_constant_and_bilinear() {
        let b = Box2::new(
            Interval::new(0.0, 2.0).unwrap(),
            Interval::new(0.0, 3.0).unwrap(),
        );
        let one = TensorSeries::from_fn(b, 4, 4, |_, _| 1.0).unwrap();
        assert_abs_diff_eq!(one.integrate(), 6.0, epsilon = 1e-14);

        let sq = Box2::new(unit(), unit());
        let xy = TensorSeries::from_fn(sq, 4, 4, |x, y| x * y).unwrap();
        for ((j, k), c) in xy.coeffs().indexed_iter() {
            let e = if (j, k) == (1, 1) { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(*c, e, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(xy.integrate(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn tensor_exponential_and_partials() {
        let sq = Box2::new(unit(), unit());
        let e = TensorSeries::from_fn(sq, 24, 24, |x, y| (x + y).exp()).unwrap();
        assert_abs_diff_eq!(e.eval(0.2, -0.3), (-0.1f64).exp(), epsilon = 1e-12);
        let fx = e.partial_x();
        let fxy = fx.partial_y();
        let fyy = e.partial_y().partial_y();
        assert_abs_diff_eq!(fx.eval(0.2, -0.3), (-0.1f64).exp(), epsilon = 1e-11);
        assert_abs_diff_eq!(fxy.eval(0.2, -0.3), (-0.1f64).exp(), epsilon = 1e-10);
        assert_abs_diff_eq!(fyy.eval(0.2, -0.3), (-0.1f64).exp(), epsilon = 1e-10);
        let (mx, my) = e.first_moments();
        // ∫∫ x e^{x+y} = (2/e) (e - 1/e)
        let ex = 1f64.exp();
        let expect = (2.0 / ex) * (ex - 1.0 / ex);
        assert_abs_diff_eq!(mx, expect, epsilon = 1e-13);
        assert_abs_diff_eq!(my, expect, epsilon = 1e-13);
    }

    #[test]
    fn tensor_grid_eval_matches_pointwise() {
        let b = Box2::new(
            Interval::new(-1.0, 3.0).unwrap(),
            Interval::new(0.5, 1.5).unwrap(),
        );
        let s = TensorSeries::from_fn(b, 9, 7, |x, y| (x * y).sin() + y).unwrap();
        let xs = [-1.0, 0.1, 2.9];
        let ys = [0.5, 0.9, 1.2, 1.5];
        let g = s.eval_grid(&xs, &ys);
        for (i, &x) in xs.iter().enumerate() {
            for (k, &y) in ys.iter().enumerate() {
                assert_abs_diff_eq!(g[[i, k]], s.eval(x, y), epsilon = 1e-14);
            }
        }
        let v = s.to_values();
        let gx = cheb_points(9, b.x).unwrap();
        let gy = cheb_points(7, b.y).unwrap();
        assert_abs_diff_eq!(v[[3, 2]], (gx[3] * gy[2]).sin() + gy[2], epsilon = 1e-14);
    }

    #[test]
    fn grid_weights_are_clenshaw_curtis() {
        let w = grid_integral_weights(2, unit());
        assert_abs_diff_eq!(w[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], 4.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[2], 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn partial_weights_match_antiderivatives() {
        let iv = Interval::new(-1.0, 3.0).unwrap();
        let s = ChebSeries::from_fn(iv, 20, |x| (0.7 * x).sin() + x * x).unwrap();
        let (a, b) = (0.25, 2.1);
        let anti = |x: f64| -(0.7 * x).cos() / 0.7 + x * x * x / 3.0;
        let anti_x = |x: f64| (0.7 * x).sin() / 0.49 - x * (0.7 * x).cos() / 0.7 + x.powi(4) / 4.0;
        let (m0, m1) = s.moments_over(a, b);
        assert!((m0 - (anti(b) - anti(a))).abs() < 1e-13);
        assert!((m1 - (anti_x(b) - anti_x(a))).abs() < 1e-13);
        let whole = s.moments_over(-1.0, 3.0);
        assert!((whole.0 - s.integrate()).abs() < 1e-13);
        assert!((whole.1 - s.first_moment()).abs() < 1e-13);
    }
}
