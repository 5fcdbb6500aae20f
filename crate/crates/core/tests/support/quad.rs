//! Adaptive Gauss–Kronrod (7, 15) quadrature used as a reference integrator.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Kronrod estimate, error estimate and the integral of `|f|`.
fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64, f64) {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    let mut abs = WGK[7] * fc.abs();
    for i in 0..7 {
        let (l, r) = (f(c - h * XGK[i]), f(c + h * XGK[i]));
        k += WGK[i] * (l + r);
        abs += WGK[i] * (l.abs() + r.abs());
        if i % 2 == 1 {
            g += WG[i / 2] * (l + r);
        }
    }
    (k * h, ((k - g) * h).abs(), abs * h.abs())
}

fn adapt(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (k, err, abs) = gk15(f, a, b);
    // below rounding level of this piece there is nothing left to gain
    if err <= tol.max(50.0 * f64::EPSILON * abs) || depth == 0 {
        return k;
    }
    let m = 0.5 * (a + b);
    adapt(f, a, m, 0.5 * tol, depth - 1) + adapt(f, m, b, 0.5 * tol, depth - 1)
}

/// `∫_a^b f` to roughly `tol` absolute error.
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    // start from a few pieces so narrow features are seen
    let n = 16;
    let w = (b - a) / n as f64;
    (0..n)
        .map(|i| {
            let lo = a + i as f64 * w;
            let hi = if i + 1 == n { b } else { lo + w };
            adapt(&mut f, lo, hi, tol / n as f64, 40)
        })
        .sum()
}

/// Iterated integral over `[x0, x1] × [y0, y1]`.
pub fn integrate_2d(f: impl Fn(f64, f64) -> f64, x: [f64; 2], y: [f64; 2], tol: f64) -> f64 {
    let inner_tol = 0.1 * tol / (x[1] - x[0]);
    integrate(
        |xv| integrate(|yv| f(xv, yv), y[0], y[1], inner_tol),
        x[0],
        x[1],
        tol,
    )
}
