//! Bracketing scalar root finder.

use crate::error::{Error, Result};

/// Brent's method on a sign-changing bracket `[a, b]`.
///
/// Stops once `|g| < ftol` or the bracket has shrunk to machine precision;
/// the latter is an error unless the residual also meets `ftol`.
pub fn brent<G>(mut g: G, a: f64, b: f64, ftol: f64) -> Result<(f64, f64)>
where
    G: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (g(a)?, g(b)?);
    if fa.abs() < ftol {
        return Ok((a, fa));
    }
    if fb.abs() < ftol {
        return Ok((b, fb));
    }
    if fa.signum() == fb.signum() {
        return Err(Error::InvalidParameter(format!(
            "no sign change on [{a}, {b}]: g = {fa:e}, {fb:e}"
        )));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs();
        let m = 0.5 * (c - b);
        if fb.abs() < ftol {
            return Ok((b, fb));
        }
        if m.abs() <= tol || fb == 0.0 {
            break;
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            // inverse quadratic interpolation, or secant when a == c
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = d;
            }
        } else {
            d = m;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = g(b)?;
    }
    if fb.abs() < ftol {
        Ok((b, fb))
    } else {
        Err(Error::RootNotConverged { residual: fb.abs() })
    }
}
