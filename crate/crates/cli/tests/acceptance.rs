//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Pass criterion numbers as arguments to run a subset.

#[path = "../../core/tests/support/quad.rs"]
mod quad;

use std::collections::HashMap;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use chebpu::dynamics::{
    advance_cover, field_from_type, run_simulation, FieldConstants, FieldKind, LinearField,
    MotionPolicy, TimeModulation, TrajectoryMode,
};
use chebpu::interface::{extract_interface, reconstruct_curve, Seeding};
use chebpu::{CoverParams, PUInterpolant, Rect};
use chebpu_cli::{initial_interpolant, preset, run, ExperimentConfig, PRESETS};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn initial(name: &str) -> PUInterpolant {
    static CACHE: OnceLock<Mutex<HashMap<String, PUInterpolant>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(f) = cache.lock().unwrap().get(name) {
        return f.clone();
    }
    let f = initial_interpolant(&preset(name).unwrap()).unwrap();
    cache.lock().unwrap().insert(name.into(), f.clone());
    f
}

fn in_temp(mut config: ExperimentConfig) -> (ExperimentConfig, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    config.out_dir = dir.path().to_path_buf();
    (config, dir)
}

fn disk(slope: f64) -> impl Fn(&[f64]) -> f64 + Sync {
    move |p: &[f64]| 0.5 * (slope * (1.0 - p[0] * p[0] - p[1] * p[1])).tanh() + 0.5
}

fn square(h: f64) -> Rect {
    Rect::from_bounds(&[(-h, h), (-h, h)]).unwrap()
}

fn random_point(rng: &mut StdRng, domain: &Rect, margin: f64) -> Vec<f64> {
    domain
        .sides()
        .iter()
        .map(|s| rng.gen_range(s.lo() + margin..s.hi() - margin))
        .collect()
}

fn construction() -> Outcome {
    let t = Instant::now();
    let f = PUInterpolant::build(&disk(50.0), square(4.0), CoverParams::default())
        .map_err(|e| e.to_string())?;
    let err = (f.global_sum().map_err(|e| e.to_string())? - PI).abs();
    let secs = t.elapsed().as_secs_f64();
    check(
        err < 1e-12 && secs < 60.0,
        format!("|sum - pi| = {err:.2e} (< 1e-12), {secs:.2} s (< 60 s)"),
    )
}

fn convergence() -> Outcome {
    let mut errs = Vec::new();
    for n in [8, 16, 32, 64, 128] {
        let params = CoverParams {
            max_level: 5,
            max_degree: n,
            ..CoverParams::default()
        };
        let f =
            PUInterpolant::build(&disk(100.0), square(4.0), params).map_err(|e| e.to_string())?;
        errs.push((f.global_sum().map_err(|e| e.to_string())? - PI).abs());
    }
    let mut best = f64::INFINITY;
    let mut trend = true;
    for &e in &errs {
        trend &= e <= 10.0 * best;
        best = best.min(e);
    }
    let last = *errs.last().unwrap();
    let shown: Vec<String> = errs.iter().map(|e| format!("{e:.1e}")).collect();
    check(
        trend && last < 1e-9,
        format!(
            "errors [{}], last < 1e-9, trend within 10x",
            shown.join(", ")
        ),
    )
}

fn partition_of_unity() -> Outcome {
    let mut rng = StdRng::seed_from_u64(3);
    let mut worst = 0.0_f64;
    for name in PRESETS {
        let f = initial(name);
        let domain = f.cover().domain().clone();
        for _ in 0..10_000 {
            let p = random_point(&mut rng, &domain, 0.0);
            let s: f64 = f
                .cover()
                .weights_at(&p)
                .map_err(|e| e.to_string())?
                .iter()
                .map(|(_, w)| w)
                .sum();
            worst = worst.max((s - 1.0).abs());
        }
    }
    check(
        worst < 1e-13,
        format!("max |sum w - 1| = {worst:.1e} over 6 covers (< 1e-13)"),
    )
}

fn experiment_1() -> Outcome {
    let (config, _dir) = in_temp(preset("exp1").unwrap());
    let t = Instant::now();
    let r = run(&config).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    check(
        r.steps == 160 && r.max_volume_error < 1e-13 && secs < 120.0,
        format!(
            "{} steps, max volume error {:.1e} (< 1e-13), {secs:.1} s (< 120 s)",
            r.steps, r.max_volume_error
        ),
    )
}

/// Run a preset in memory; returns the initial and final interpolants and
/// the worst volume error.
fn simulate(name: &str) -> Result<(PUInterpolant, PUInterpolant, f64), String> {
    let config = preset(name).unwrap();
    let field = config.field.build().map_err(|e| e.to_string())?;
    let start = initial(name);
    let mut f = start.clone();
    let log = run_simulation(&mut f, &field, &config.sim, |_| Ok(())).map_err(|e| e.to_string())?;
    Ok((start, f, log.max_error()))
}

fn shape_returns(start: &PUInterpolant, end: &PUInterpolant, seed: u64) -> Result<f64, String> {
    let mut rng = StdRng::seed_from_u64(seed);
    let domain = start.cover().domain().clone();
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let p = random_point(&mut rng, &domain, 1e-9);
        let a = start.eval(&p).map_err(|e| e.to_string())?;
        let b = end.eval(&p).map_err(|e| e.to_string())?;
        worst = worst.max((a - b).abs());
    }
    Ok(worst)
}

fn experiment_2() -> Outcome {
    let (start, end, vol) = simulate("exp2")?;
    let shape = shape_returns(&start, &end, 5)?;
    check(
        vol < 1e-13 && shape < 1e-10,
        format!("max volume error {vol:.1e} (< 1e-13), max |f_end - f_0| {shape:.1e} (< 1e-10)"),
    )
}

fn experiment_3() -> Outcome {
    let (config, _dir) = in_temp(preset("exp3").unwrap());
    let r = run(&config).map_err(|e| e.to_string())?;
    check(
        r.max_volume_error < 1e-12,
        format!(
            "{} steps, max volume error {:.1e} (< 1e-12)",
            r.steps, r.max_volume_error
        ),
    )
}

fn experiment_4() -> Outcome {
    let (config, _dir) = in_temp(preset("exp4").unwrap());
    let r = run(&config).map_err(|e| e.to_string())?;
    let com = r
        .emissions
        .iter()
        .filter_map(|e| e.center_of_mass.as_ref())
        .map(|c| ((c[0] * c[0] + c[1] * c[1]).sqrt() - 2.0).abs())
        .fold(0.0, f64::max);
    let rec = r.reconstructions.first().ok_or("no reconstruction")?;
    let kappa = rec.max_curvature_error.unwrap_or(f64::INFINITY);
    check(
        com < 1e-10 && kappa < 1e-6 && rec.points >= 8 && rec.max_residual < 1e-12,
        format!(
            "{} emissions, max ||com| - 2| {com:.1e} (< 1e-10), {} points (>= 8), \
             max |kappa - 1| {kappa:.1e} (< 1e-6), max residual {:.1e} (< 1e-12)",
            r.emissions.len(),
            rec.points,
            rec.max_residual
        ),
    )
}

fn experiment_5() -> Outcome {
    let config = preset("exp5").unwrap();
    let shift = config.sim.t_fin - config.sim.t_init;
    let (start, end, vol) = simulate("exp5")?;
    let mut rng = StdRng::seed_from_u64(8);
    let mut worst = 0.0_f64;
    for _ in 0..500 {
        // material region of both bodies, well inside the moving window
        let p = [rng.gen_range(0.6..3.4), rng.gen_range(0.4..2.8)];
        let a = start.eval(&p).map_err(|e| e.to_string())?;
        let b = end.eval(&[p[0], p[1] + shift]).map_err(|e| e.to_string())?;
        worst = worst.max((a - b).abs());
    }
    check(
        vol < 1e-12 && worst < 1e-9,
        format!(
            "max volume error {vol:.1e} (< 1e-12), tracked points max |df| {worst:.1e} (< 1e-9)"
        ),
    )
}

fn experiment_6() -> Outcome {
    let config = preset("exp6").unwrap();
    let recon = config.reconstruction.clone().unwrap();
    let field = config.field.build().map_err(|e| e.to_string())?;
    let start = initial("exp6");
    let mut f = start.clone();
    let mut counts = None;
    let log = run_simulation(&mut f, &field, &config.sim, |m| {
        if (m.time() - recon.at[0]).abs() < 1e-9 {
            let f = m.interpolant();
            let center = f.center_of_mass()?.by_mass;
            let count = |tangent: usize| -> chebpu::Result<usize> {
                let seeding = Seeding {
                    tangent,
                    ..Seeding::default()
                };
                let ex = extract_interface(f, recon.band[0], recon.band[1], seeding)?;
                Ok(reconstruct_curve(ex.points, &center)?.points.len())
            };
            counts = Some((count(0)?, count(recon.tangent_seeds)?));
        }
        Ok(())
    })
    .map_err(|e| e.to_string())?;
    let vol = log.max_error();
    let shape = shape_returns(&start, &f, 6)?;
    let (plain, seeded) = counts.ok_or("no reconstruction time reached")?;
    check(
        vol < 1e-12 && shape < 1e-10 && seeded as f64 >= 1.5 * plain as f64,
        format!(
            "max volume error {vol:.1e} (< 1e-12), max |f_end - f_0| {shape:.1e} (< 1e-10), \
             points {seeded} tangent-seeded vs {plain} centroid-only (>= 1.5x)"
        ),
    )
}

fn oracles() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;

    let mut worst_sum = 0.0_f64;
    for name in ["exp1", "exp3", "exp4", "exp5", "exp6"] {
        let config = preset(name).unwrap();
        let f = initial(name);
        let ic = &config.initial;
        let coords = config.coordinates;
        let d = &config.domain;
        let reference = if d.len() == 1 {
            quad::integrate(|x| ic.eval(coords, &[x]), d[0][0], d[0][1], 1e-14)
        } else {
            // the Kronrod-Gauss gap overstates the actual error by orders of magnitude
            quad::integrate_2d(|x, y| ic.eval(coords, &[x, y]), d[0], d[1], 1e-11)
        };
        let err = (f.global_sum().map_err(|e| e.to_string())? - reference).abs();
        worst_sum = worst_sum.max(err);
    }
    ok &= worst_sum < 1e-11;
    notes.push(format!(
        "sum vs quadrature {worst_sum:.1e} (< 1e-11; exp2 shares exp1's data)"
    ));

    let slope5 = PUInterpolant::build(&disk(5.0), square(4.0), CoverParams::default())
        .map_err(|e| e.to_string())?;
    let mut rng = StdRng::seed_from_u64(10);
    let h = 1e-5;
    let mut worst_grad = 0.0_f64;
    for _ in 0..100 {
        let p = random_point(&mut rng, &square(4.0), 2.0 * h);
        let g = slope5.grad(&p).map_err(|e| e.to_string())?;
        for d in 0..2 {
            let (mut a, mut b) = (p.clone(), p.clone());
            a[d] += h;
            b[d] -= h;
            let fd = (slope5.eval(&a).map_err(|e| e.to_string())?
                - slope5.eval(&b).map_err(|e| e.to_string())?)
                / (2.0 * h);
            worst_grad = worst_grad.max((g[d] - fd).abs());
        }
    }
    ok &= worst_grad < 1e-6;
    notes.push(format!("grad vs differences {worst_grad:.1e} (< 1e-6)"));

    // x³y² - x/2 + y⁴/3 on the unit square integrates to -1/10
    let poly = |p: &[f64]| p[0].powi(3) * p[1] * p[1] - 0.5 * p[0] + p[1].powi(4) / 3.0;
    let f = PUInterpolant::build(
        &poly,
        Rect::from_bounds(&[(0.0, 1.0), (0.0, 1.0)]).unwrap(),
        CoverParams::default(),
    )
    .map_err(|e| e.to_string())?;
    let e2 = (f.global_sum().map_err(|e| e.to_string())? + 0.1).abs();
    // x⁵ - 2x² + 1 on [-1, 2] integrates to 15/2
    let line = |p: &[f64]| p[0].powi(5) - 2.0 * p[0] * p[0] + 1.0;
    let f = PUInterpolant::build(
        &line,
        Rect::from_bounds(&[(-1.0, 2.0)]).unwrap(),
        CoverParams::default(),
    )
    .map_err(|e| e.to_string())?;
    let e1 = (f.global_sum().map_err(|e| e.to_string())? - 7.5).abs();
    let poly_err = e1.max(e2);
    ok &= poly_err < 1e-13;
    notes.push(format!("polynomial integrals {poly_err:.1e} (< 1e-13)"));

    check(ok, notes.join(", "))
}

fn random_field(rng: &mut StdRng) -> LinearField {
    let k = FieldConstants {
        c: rng.gen_range(-0.5..0.5),
        c1: rng.gen_range(-0.5..0.5),
        c2: rng.gen_range(-0.5..0.5),
        omega: 0.0,
    };
    let kind = if rng.gen_bool(0.5) {
        FieldKind::Translation
    } else {
        FieldKind::PureStrain
    };
    let modulation = match rng.gen_range(0..3) {
        0 => TimeModulation::None,
        1 => TimeModulation::Cosine {
            period: rng.gen_range(0.5..3.0),
        },
        _ => TimeModulation::Circular {
            omega: rng.gen_range(0.5..3.0),
        },
    };
    let field = field_from_type(kind, k).unwrap();
    match (kind, modulation) {
        // turning translations only make sense without a linear part
        (FieldKind::PureStrain, TimeModulation::Circular { .. }) => field,
        _ => field.with_modulation(modulation).unwrap(),
    }
}

fn conservation() -> Outcome {
    let mut rng = StdRng::seed_from_u64(11);
    let blob =
        |p: &[f64]| 0.5 * (20.0 * (1.0 - (p[0] - 0.3).powi(2) - (p[1] + 0.2).powi(2))).tanh() + 0.5;
    let mut f = PUInterpolant::build(&blob, square(2.5), CoverParams::default())
        .map_err(|e| e.to_string())?;
    let mut t = 0.0;
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let field = random_field(&mut rng);
        let dt = rng.gen_range(0.01..0.1);
        let policy = if rng.gen_bool(0.5) {
            MotionPolicy::free(2)
        } else {
            MotionPolicy {
                pinned: vec![[true; 2]; 2],
                core: vec![Some([-1.5, 1.5]); 2],
            }
        };
        let before: Vec<f64> = f
            .cover()
            .patches()
            .iter()
            .map(|p| p.local.integrate())
            .collect();
        advance_cover(&mut f, &field, t, dt, &policy, TrajectoryMode::Analytic)
            .map_err(|e| e.to_string())?;
        t += dt;
        for (p, b) in f.cover().patches().iter().zip(&before) {
            let a = p.local.integrate();
            if *b != 0.0 {
                worst = worst.max(((a - b) / b).abs());
            }
        }
    }
    check(
        worst < 1e-13,
        format!("20 steps, max relative patch-integral change {worst:.1e} (< 1e-13)"),
    )
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 11] = [
        (1, "construction accuracy", construction),
        (2, "convergence trend", convergence),
        (3, "partition of unity", partition_of_unity),
        (4, "expanding blob", experiment_1),
        (5, "reversible blob", experiment_2),
        (6, "pear under strain", experiment_3),
        (7, "circular orbit", experiment_4),
        (8, "polar translation", experiment_5),
        (9, "angular deformation", experiment_6),
        (10, "oracle suite", oracles),
        (11, "per-patch conservation", conservation),
    ];
    let only: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (n, name, f) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS criterion {n:>2} {name}: {d} [{secs:.1} s]"),
            Err(d) => {
                failed += 1;
                println!("FAIL criterion {n:>2} {name}: {d} [{secs:.1} s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
