//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::error::Error;
use std::f64::consts::PI;
use std::panic;
use std::time::Instant;

use headwave::expr::{parse, DiffError, Expr};
use headwave::gauge::{
    box_lattice, curve_forward_sweep, depth_null_generator, fixed_theta_sweep, flat_forward_sweep, gauge_fixed_theta, gauge_forward_constant,
    gauge_forward_curve, gauge_forward_general, potential_from_null_general, GaugeError, GaugeSetting, PotentialOptions,
};
use headwave::geometry::{Box2, Box3};
use headwave::inversion::{invert_2d_constant, invert_2d_variable, invert_curve, invert_fixed_theta, DataSource, LineIntegrals, Method, Recon1D};
use headwave::quad::QuadOptions;
use headwave::scene::{Curve, CurveScene, Field, FlatContent, FlatScene2D, HyperContent, HyperplaneScene, Profile, VectorField2};
use headwave::transform::{hwt_curve_reduced, hwt_fixed_theta, hwt_flat2d, hwt_flat2d_reduced, Axis, TransformError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), Box<dyn Error>>;

const TANH_U1: &str = "-(0.6 + 0.2*tanh(x))";
const TANH_V1: &str = "0.6 - 0.2*tanh(x)";

fn tight() -> QuadOptions {
    QuadOptions::default().with_abs_tol(1e-13).with_rel_tol(1e-13)
}

fn gaussian(x: f64) -> f64 {
    (-x * x).exp()
}

fn sqrt_pi() -> f64 {
    PI.sqrt()
}

fn tanh_scene() -> FlatScene2D {
    FlatScene2D::with_profile(TANH_U1, TANH_V1, "exp(-x^2)", (-8.0, 8.0), (-3.0, 3.0)).unwrap()
}

fn constant_scene() -> FlatScene2D {
    FlatScene2D::with_profile("-0.3", "0.6", "exp(-x^2)", (-8.0, 8.0), (-3.0, 3.0)).unwrap()
}

fn nodes(spacing: f64) -> Result<Axis, TransformError> {
    Axis::with_step(-3.0, 3.0, spacing)
}

fn max_err(r: &Recon1D, truth: impl Fn(f64) -> f64) -> f64 {
    r.errors(truth).0
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(f)
}

fn thm21_error(spacing: f64, step: f64) -> Result<f64, Box<dyn Error>> {
    let s = tanh_scene();
    let o = tight();
    let fwd = |x: f64, d: f64| hwt_flat2d_reduced(&s, x, d, &o);
    let data = DataSource::Callback {
        forward: &fwd,
        nodes: nodes(spacing)?,
        step,
    };
    Ok(max_err(&invert_2d_variable(&s, data, sqrt_pi())?, gaussian))
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let coarse = single_threaded(|| thm21_error(1e-2, 1e-4).map_err(|e| e.to_string()))?;
    let secs = t.elapsed().as_secs_f64();
    let fine = single_threaded(|| thm21_error(5e-3, 5e-5).map_err(|e| e.to_string()))?;
    let ratio = coarse / fine;
    Ok((
        coarse <= 1e-4 && ratio >= 3.0 && secs <= 60.0,
        format!("max_err={coarse:.3e} halved={fine:.3e} ratio={ratio:.2} single_thread={secs:.2}s"),
    ))
}

fn criterion_2() -> Outcome {
    let s = constant_scene();
    let o = tight();
    let fwd = |x: f64, d: f64| hwt_flat2d_reduced(&s, x, d, &o);
    let n = nodes(1e-2)?;
    let mut rs = Vec::new();
    for m in [Method::Rmk22First, Method::Rmk22Second, Method::Rmk22Third] {
        rs.push(invert_2d_constant(DataSource::callback(&fwd, n), -0.3, 0.6, m)?);
    }
    let each = rs.iter().map(|r| max_err(r, gaussian)).fold(0.0, f64::max);
    let pair = (0..3).flat_map(|i| (i + 1..3).map(move |j| (i, j))).map(|(i, j)| rs[i].max_diff(&rs[j])).fold(0.0, f64::max);
    Ok((each <= 1e-4 && pair <= 1e-5, format!("max_err={each:.3e} max_pairwise={pair:.3e}")))
}

fn criterion_3() -> Outcome {
    let o = tight();
    let support = Box2::new([-6.0, -6.0], [6.0, 6.0]);
    let domain = Box2::new([-3.0, -3.0], [3.0, 3.0]);
    let n = nodes(1e-2)?;

    let lu = TANH_U1.replace('x', "x1");
    let lv = TANH_V1.replace('x', "x1");
    let hyper = HyperplaneScene::with_profile(&lu, &lv, [1.0, 0.0], "exp(-x1^2 - x2^2)", support, domain)?;
    let mut slice = 0.0_f64;
    for c in [-1.0, -0.3, 0.0, 0.4, 1.2] {
        let line = hyper.line_point(c, 0.0)[1];
        let flat = FlatScene2D::with_profile(TANH_U1, TANH_V1, &format!("exp(-x^2 - ({line:?})^2)"), (-6.0, 6.0), (-3.0, 3.0))?;
        let total = sqrt_pi() * (-line * line).exp();
        let fh = |s: f64, d: f64| hwt_fixed_theta(&hyper, hyper.line_point(c, s), d, &o);
        let ff = |x: f64, d: f64| hwt_flat2d_reduced(&flat, x, d, &o);
        let totals: LineIntegrals = [(c, total)].into_iter().collect();
        let a = invert_fixed_theta(&hyper, &[(c, DataSource::callback(&fh, n))], &totals)?;
        let b = invert_2d_variable(&flat, DataSource::callback(&ff, n), total)?;
        slice = slice.max(a[0].max_diff(&b));
    }

    let lu = "-(0.6 + 0.1*tanh(x1) + 0.05*tanh(x2))";
    let lv = "0.6 - 0.1*tanh(x1) + 0.05*tanh(x2)";
    let hyper = HyperplaneScene::with_profile(lu, lv, [1.0, 0.0], "exp(-x1^2 - x2^2)", support, domain)?;
    let offsets = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let fwds: Vec<_> = offsets
        .iter()
        .map(|&c| {
            let h = &hyper;
            let o = o;
            move |s: f64, d: f64| hwt_fixed_theta(h, h.line_point(c, s), d, &o)
        })
        .collect();
    let lines: Vec<(f64, DataSource<'_>)> = offsets.iter().zip(&fwds).map(|(&c, f)| (c, DataSource::callback(f, n))).collect();
    let totals: LineIntegrals = offsets
        .iter()
        .map(|&c| {
            let q = hyper.line_point(c, 0.0);
            (c, sqrt_pi() * (-q[1] * q[1]).exp())
        })
        .collect();
    let recs = invert_fixed_theta(&hyper, &lines, &totals)?;
    let mut full = 0.0_f64;
    for (r, &c) in recs.iter().zip(&offsets) {
        full = full.max(max_err(r, |s| {
            let p = hyper.line_point(c, s);
            (-p[0] * p[0] - p[1] * p[1]).exp()
        }));
    }
    Ok((slice <= 1e-10 && full <= 1e-3, format!("slice_vs_2d={slice:.3e} two_variable_max_err={full:.3e}")))
}

fn criterion_4() -> Outcome {
    let o = tight();
    let n = nodes(1e-2)?;
    let arc = Curve::parse("20*sin(t/20)", "20*(1-cos(t/20))", (-8.0, 8.0), 4.0)?;
    let mut curvature = 0.0_f64;
    for k in 0..=160 {
        let a = arc.accel(-8.0 + 0.1 * k as f64)?;
        curvature = curvature.max(a[0].hypot(a[1]));
    }
    let s = CurveScene::parse(arc, "2.2 + 0.2*tanh(t)", "0.9 + 0.2*tanh(t)", Profile::parse("exp(-x^2)", (-6.0, 6.0))?, (-3.0, 3.0))?;
    let f = |t: f64, d: f64| hwt_curve_reduced(&s, t, d, &o);
    let arc_err = max_err(&invert_curve(&s, DataSource::callback(&f, n), sqrt_pi())?, gaussian);

    let line = Curve::parse("t", "0", (-10.0, 10.0), 4.0)?;
    let sl = CurveScene::parse(line, "2.2 + 0.2*tanh(t)", "0.9 + 0.2*tanh(t)", Profile::parse("exp(-x^2)", (-6.0, 6.0))?, (-3.0, 3.0))?;
    let flat = FlatScene2D::with_profile("cos(2.2 + 0.2*tanh(x))", "cos(0.9 + 0.2*tanh(x))", "exp(-x^2)", (-6.0, 6.0), (-3.0, 3.0))?;
    let fc = |t: f64, d: f64| hwt_curve_reduced(&sl, t, d, &o);
    let ff = |x: f64, d: f64| hwt_flat2d_reduced(&flat, x, d, &o);
    let a = invert_curve(&sl, DataSource::callback(&fc, n), sqrt_pi())?;
    let b = invert_2d_variable(&flat, DataSource::callback(&ff, n), sqrt_pi())?;
    let diff = a.max_diff(&b);
    Ok((
        curvature <= 0.05 + 1e-12 && arc_err <= 5e-4 && diff <= 1e-10,
        format!("curvature={curvature:.4} arc_max_err={arc_err:.3e} flat_line_vs_flat={diff:.3e}"),
    ))
}

fn bump2(rng: &mut ChaCha8Rng) -> String {
    let (a, b) = (rng.gen_range(1.5..3.0), rng.gen_range(1.5..3.0));
    let (x0, y0) = (rng.gen_range(-1.0..1.0), rng.gen_range(4.5..6.0));
    format!("exp(-{a}*(x - ({x0}))^2 - {b}*(y - {y0})^2)")
}

fn unit(angle: f64) -> [f64; 2] {
    [angle.cos(), angle.sin()]
}

fn random_dirs(rng: &mut ChaCha8Rng) -> ([f64; 2], [f64; 2]) {
    (unit(rng.gen_range(1.75..2.6)), unit(rng.gen_range(0.5..1.4)))
}

fn zero_flat(u: [f64; 2], v: [f64; 2]) -> Result<FlatScene2D, Box<dyn Error>> {
    Ok(FlatScene2D::parse(&format!("{:?}", u[0]), &format!("{:?}", v[0]), FlatContent::Profile(Profile::parse("0", (-1.0, 1.0))?), (-1.0, 1.0))?)
}

const CASES: usize = 20;

fn criterion_5() -> Outcome {
    let o = QuadOptions::default().with_abs_tol(1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let xs = Axis::new(-25.0, 25.0, 21)?;
    let ds = Axis::new(0.0, 10.0, 6)?;
    let mut worst = [0.0_f64; 4];

    for _ in 0..CASES {
        let (u, v) = random_dirs(&mut rng);
        let phi = parse(&bump2(&mut rng), &["x", "y"])?;
        let bbox = Box2::new([-10.0, 0.0], [10.0, 12.0]);
        let f = gauge_forward_constant(&phi, u, v, &bbox)?;
        let sw = flat_forward_sweep(&zero_flat(u, v)?, &|p: &[f64; 2]| f.eval(p), &bbox, xs, ds, &o)?;
        worst[0] = worst[0].max(sw.max_abs());
    }

    for _ in 0..CASES {
        let (u, v) = random_dirs(&mut rng);
        let phi = parse(&bump2(&mut rng), &["x", "y"])?;
        let bbox = Box2::new([-10.0, 0.5], [10.0, 12.0]);
        let g = gauge_forward_general(&phi, &VectorField2::constant(u), &VectorField2::constant(v), &bbox)?;
        let sw = flat_forward_sweep(&zero_flat(u, v)?, &|p: &[f64; 2]| g.f.eval(p), &bbox, xs, ds, &o)?;
        worst[1] = worst[1].max(sw.max_abs());
    }

    let bbox3 = Box3::new([-10.0, -10.0, 0.0], [10.0, 10.0, 12.0]);
    let zero = Field::new(Expr::constant(0.0, &["x1", "x2"])?, Box2::new([-1.0, -1.0], [1.0, 1.0]))?;
    for _ in 0..CASES {
        let (lu, lv) = (rng.gen_range(-0.8..-0.2), rng.gen_range(0.2..0.8));
        let theta = rng.gen_range(0.0..2.0 * PI);
        let scene = HyperplaneScene::parse(&format!("{lu:?}"), &format!("{lv:?}"), unit(theta), HyperContent::Profile(zero.clone()), Box2::new([-1.0, -1.0], [1.0, 1.0]))?;
        let (a, b, c) = (rng.gen_range(1.5..3.0), rng.gen_range(1.5..3.0), rng.gen_range(1.5..3.0));
        let (p, q, r) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(4.5..6.0));
        let phi = parse(&format!("exp(-{a}*(x1 - ({p}))^2 - {b}*(x2 - ({q}))^2 - {c}*(x3 - {r})^2)"), &["x1", "x2", "x3"])?;
        let f = Field::new(gauge_fixed_theta(&phi, &scene, &bbox3)?, bbox3)?;
        let grids = fixed_theta_sweep(&scene, &f, &[-0.5, 0.0, 0.5], Axis::new(-12.0, 12.0, 13)?, Axis::new(0.0, 8.0, 5)?, &o)?;
        worst[2] = grids.iter().map(|g| g.max_abs()).fold(worst[2], f64::max);
    }

    for _ in 0..CASES {
        let (au, av) = (rng.gen_range(2.1..2.5), rng.gen_range(0.6..1.0));
        let arc = Curve::parse("20*sin(t/20)", "20*(1-cos(t/20))", (-8.0, 8.0), 4.0)?;
        let scene = CurveScene::parse(arc, &format!("{au} - t/20"), &format!("{av} - t/20"), Profile::parse("0", (-1.0, 1.0))?, (-1.0, 1.0))?;
        let (a, b) = (rng.gen_range(1.5..3.0), rng.gen_range(1.5..3.0));
        let (x0, y0) = (rng.gen_range(-1.0..1.0), rng.gen_range(4.5..5.5));
        let phi = parse(&format!("((x^2 + (y-20)^2 - 400)/400)^3 * exp(-{a}*(x - ({x0}))^2 - {b}*(y - {y0})^2)"), &["x", "y"])?;
        let bbox = Box2::new([-10.0, 0.0], [10.0, 12.0]);
        let g = gauge_forward_curve(&phi, &VectorField2::constant(unit(au)), &VectorField2::constant(unit(av)), scene.curve(), &bbox)?;
        let sw = curve_forward_sweep(&scene, &|p: &[f64; 2]| g.f.eval(p), &bbox, Axis::new(-8.0, 8.0, 9)?, Axis::new(0.0, 8.0, 5)?, &o)?;
        worst[3] = worst[3].max(sw.max_abs());
    }

    Ok((
        worst.iter().all(|&w| w <= 1e-7),
        format!("{CASES} cases each, max|Rf| constant={:.2e} general={:.2e} fixed_theta={:.2e} curve={:.2e}", worst[0], worst[1], worst[2], worst[3]),
    ))
}

fn criterion_6() -> Outcome {
    let o = QuadOptions::default().with_abs_tol(1e-12);
    let g = depth_null_generator(&parse("s^2*exp(-s^2)", &["s"])?)?;
    let inf = f64::INFINITY;
    let f = Field::new(g, Box3::new([-inf, -inf, 0.0], [inf, inf, 12.0]))?;
    let zero = Field::new(Expr::constant(0.0, &["x1", "x2"])?, Box2::new([-1.0, -1.0], [1.0, 1.0]))?;
    let mut worst = 0.0_f64;
    for theta in [0.0, 0.7, 1.9, 3.6, 5.1] {
        let scene = HyperplaneScene::parse("-0.55", "0.7", unit(theta), HyperContent::Profile(zero.clone()), Box2::new([-1.0, -1.0], [1.0, 1.0]))?;
        let grids = fixed_theta_sweep(&scene, &f, &[-1.0, 0.0, 1.5], Axis::new(-3.0, 3.0, 7)?, Axis::new(0.0, 2.0, 5)?, &o)?;
        worst = grids.iter().map(|g| g.max_abs()).fold(worst, f64::max);
    }
    let rejected = matches!(depth_null_generator(&parse("s*exp(-s^2)", &["s"])?), Err(GaugeError::HConditionViolated { .. }));
    Ok((worst <= 1e-7 && rejected, format!("residual={worst:.3e} violating_h_rejected={rejected}")))
}

/// ∂_x R and ∂_d R for the tanh scene with a Gaussian profile, written out
/// by hand with the tail integral through erfc.
fn identity_oracle(x: f64, d: f64) -> (f64, f64) {
    let y = x + d;
    let f = gaussian;
    let tail = |t: f64| 0.5 * sqrt_pi() * libm::erfc(t);
    let head = |t: f64| 0.5 * sqrt_pi() * libm::erfc(-t);
    let sech2 = |t: f64| 1.0 / t.cosh().powi(2);
    let u1 = -(0.6 + 0.2 * x.tanh());
    let du1 = -0.2 * sech2(x);
    let v1 = 0.6 - 0.2 * y.tanh();
    let dv1 = -0.2 * sech2(y);
    let ascent = -dv1 / (v1 * v1) * tail(y) - f(y) / v1;
    let dd = f(y) + ascent;
    let dx = du1 / (u1 * u1) * head(x) - f(x) / u1 + f(y) - f(x) + ascent;
    (dx, dd)
}

fn criterion_7() -> Outcome {
    let s = tanh_scene();
    let o = tight();
    let fwd = |x: f64, d: f64| hwt_flat2d_reduced(&s, x, d, &o);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let h = 1e-4;
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let (x, d) = (rng.gen_range(-3.0..3.0), rng.gen_range(0.01..2.0));
        let fd_x = (fwd(x + h, d)? - fwd(x - h, d)?) / (2.0 * h);
        let fd_d = (fwd(x, d + h)? - fwd(x, d - h)?) / (2.0 * h);
        let (ax, ad) = identity_oracle(x, d);
        worst = worst.max((fd_x - ax).abs()).max((fd_d - ad).abs());
    }
    Ok((worst <= 1e-6, format!("100 nodes, max|FD - identity|={worst:.3e}")))
}

fn criterion_8() -> Outcome {
    let quad_tol = 1e-10;
    let o = QuadOptions::default().with_abs_tol(quad_tol).with_rel_tol(1e-14);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, s) in [("tanh", tanh_scene()), ("constant", constant_scene())] {
        let mut worst = 0.0_f64;
        for _ in 0..100 {
            let (x, d) = (rng.gen_range(-4.0..4.0), rng.gen_range(0.0..3.0));
            worst = worst.max((hwt_flat2d(&s, x, d, &o)? - hwt_flat2d_reduced(&s, x, d, &o)?).abs());
        }
        pass &= worst <= 10.0 * quad_tol;
        parts.push(format!("{name}={worst:.3e}"));
    }
    Ok((pass, format!("bound={:.0e} {}", 10.0 * quad_tol, parts.join(" "))))
}

fn criterion_9() -> Outcome {
    let (u, v) = (unit(2.2), unit(0.9));
    let (uf, vf) = (VectorField2::constant(u), VectorField2::constant(v));
    let bbox = Box2::new([-10.0, 0.5], [10.0, 12.0]);
    let phi = parse("exp(-2*(x-0.2)^2 - 2*(y-5)^2)", &["x", "y"])?;
    let g = gauge_forward_general(&phi, &uf, &vf, &bbox)?;
    let f = Field::new(g.f, bbox)?;
    let scene = zero_flat(u, v)?;
    let (pot, _) = potential_from_null_general(&f, &uf, &vf, GaugeSetting::Flat(&scene), &PotentialOptions::default())?;

    let pts = box_lattice(&Box2::new([-1.5, 3.5], [1.5, 6.5]), 4);
    let steps = [0.4, 0.2, 0.1];
    let mut res = Vec::new();
    for h in steps {
        res.push(pot.closedness_residual(&pts, h)?);
    }
    let ratios: Vec<f64> = res.windows(2).map(|w| w[0] / w[1]).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let probes: Vec<[f64; 2]> = (0..12).map(|_| [rng.gen_range(-2.0..2.0), rng.gen_range(3.0..7.0)]).collect();
    let path = pot.path_discrepancy(&probes)?;
    Ok((
        ratios.iter().all(|&r| r >= 3.0) && path <= 1e-7,
        format!(
            "closedness h={steps:?} -> [{:.2e}, {:.2e}, {:.2e}] ratios=[{:.2}, {:.2}] path_discrepancy={path:.3e}",
            res[0], res[1], res[2], ratios[0], ratios[1]
        ),
    ))
}

fn random_expr(rng: &mut ChaCha8Rng, depth: u32) -> String {
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..4) {
            0 => "x".into(),
            1 => "y".into(),
            2 => format!("{:.3}", rng.gen_range(-2.0..2.0)),
            _ => ["pi", "e", "x", "y"][rng.gen_range(0..4)].into(),
        };
    }
    let a = random_expr(rng, depth - 1);
    match rng.gen_range(0..14) {
        0 => format!("({a}) + ({})", random_expr(rng, depth - 1)),
        1 => format!("({a}) - ({})", random_expr(rng, depth - 1)),
        2 | 3 => format!("({a}) * ({})", random_expr(rng, depth - 1)),
        4 => format!("({a}) / ({})", random_expr(rng, depth - 1)),
        5 => format!("({a})^{}", rng.gen_range(2..4)),
        6 => format!("-({a})"),
        7 => format!("tan(sin({a}))"),
        8 => format!("{}({a})", ["sin", "cos", "tanh", "sech"][rng.gen_range(0..4)]),
        9 => format!("exp(sin({a}))"),
        10 => format!("log({a})"),
        11 => format!("sqrt({a})"),
        12 => format!("abs({a})"),
        _ => format!("pow({a}, {})", rng.gen_range(2..4)),
    }
}

/// Points within 1e-3 of a domain error are excluded.
fn near_domain_error(e: &Expr, p: [f64; 2], var: usize) -> bool {
    (-4..=4).any(|k| {
        let mut q = p;
        q[var] += k as f64 * 2.5e-4;
        !e.eval(&q).map(f64::is_finite).unwrap_or(false)
    })
}

/// Returns (cases checked, worst relative error, abs derivatives rejected).
fn derivative_fuzz(rng: &mut ChaCha8Rng) -> Result<(usize, f64, usize), Box<dyn Error>> {
    let h = 1e-6;
    let mut cases = 0;
    let mut rejected = 0;
    let mut worst = 0.0_f64;
    let mut attempts = 0;
    while cases < 1000 {
        attempts += 1;
        if attempts > 100_000 {
            return Err("too few evaluable expressions".into());
        }
        let src = random_expr(rng, 4);
        let e = parse(&src, &["x", "y"])?;
        let var = rng.gen_range(0..2);
        let de = match e.derivative_index(var) {
            Err(DiffError::NonDifferentiable { op: "abs" }) if src.contains("abs") => {
                rejected += 1;
                continue;
            }
            r => r?,
        };
        let mut tested = false;
        for _ in 0..5 {
            let p = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            if near_domain_error(&e, p, var) {
                continue;
            }
            let Ok(sym) = de.eval(&p) else { continue };
            let (mut lo, mut hi) = (p, p);
            lo[var] -= h;
            hi[var] += h;
            let fd = (e.eval(&hi)? - e.eval(&lo)?) / (2.0 * h);
            worst = worst.max((sym - fd).abs() / (1.0 + sym.abs()));
            tested = true;
        }
        cases += tested as usize;
    }
    Ok((cases, worst, rejected))
}

fn parser_fuzz(rng: &mut ChaCha8Rng) -> (usize, usize) {
    const ALPHABET: &[u8] = b"0123456789.eE+-*/^(),xyzt pisncoahqrlgbw\t";
    let mut panics = 0;
    let mut errors = 0;
    let hook = panic::take_hook();
    panic::set_hook(Box::new(|_| {}));
    for i in 0..100_000 {
        let len = rng.gen_range(0..64);
        let bytes: Vec<u8> = (0..len)
            .map(|_| if i % 2 == 0 { rng.gen() } else { ALPHABET[rng.gen_range(0..ALPHABET.len())] })
            .collect();
        let text = String::from_utf8_lossy(&bytes).into_owned();
        match panic::catch_unwind(|| parse(&text, &["x", "y"]).map(|e| e.eval(&[0.5, -0.25]))) {
            Ok(Err(_)) => errors += 1,
            Ok(Ok(_)) => {}
            Err(_) => panics += 1,
        }
    }
    panic::set_hook(hook);
    (panics, errors)
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (cases, worst, rejected) = derivative_fuzz(&mut rng)?;
    let (panics, errors) = parser_fuzz(&mut rng);
    Ok((
        worst <= 1e-5 && panics == 0,
        format!("{cases} derivative cases max_rel_err={worst:.3e} ({rejected} abs rejected); 100000 byte strings, {panics} panics, {errors} parse errors"),
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("variable-field round trip", criterion_1),
        ("constant-field formulas", criterion_2),
        ("hyperplane round trip", criterion_3),
        ("curve round trip", criterion_4),
        ("kernel annihilation", criterion_5),
        ("depth null field", criterion_6),
        ("derivative identities", criterion_7),
        ("reduced vs geometric forward", criterion_8),
        ("closedness and path independence", criterion_9),
        ("expression fuzz", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (pass, detail) = match panic::catch_unwind(run) {
            Ok(Ok(r)) => r,
            Ok(Err(e)) => (false, format!("error: {e}")),
            Err(_) => (false, "panicked".to_string()),
        };
        failed += !pass as usize;
        println!(
            "criterion {:>2} {} {name}: {detail} [{:.1}s]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
