use crate::expr::EvalError;
use crate::geometry::{axpy, dot, Box2};
use crate::quad::QuadOptions;
use crate::scene::{CurveScene, SceneError};

use super::{check_glide, ray_integral, segment, Leg, Legs, TransformError};

/// Relative size of the profile at a tube exit above which the leg is
/// considered truncated.
const EXIT_TOL: f64 = 1e-12;

fn check_range(scene: &CurveScene, t0: f64, d: f64) -> Result<(), TransformError> {
    check_glide(d)?;
    let (lo, hi) = scene.curve().range();
    if t0 < lo || t0 + d > hi {
        return Err(TransformError::GlideOutOfRange { t0, t1: t0 + d, lo, hi });
    }
    Ok(())
}

/// Profile argument p·e(p) at a point, or `None` outside the tube.
fn frame_arg(scene: &CurveScene, p: [f64; 2]) -> Result<Option<f64>, TransformError> {
    match scene.curve().nearest_point_frame(p) {
        Ok(fr) => Ok(Some(dot(&p, &fr.e))),
        Err(SceneError::OutsideTube { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Leg inside the tube, integrating f(p) = f̃(p·e(p)) up to the tube exit.
fn tube_leg(scene: &CurveScene, origin: [f64; 2], dir: [f64; 2], t0: f64, leg: Leg, fmax: f64, opts: &QuadOptions) -> Result<f64, TransformError> {
    let profile = scene.profile();
    let step = scene.curve().tube_radius() / 16.0;
    let mut s_in = 0.0;
    let mut s_out = None;
    for k in 1..=1_000_000u32 {
        let s = k as f64 * step;
        if frame_arg(scene, axpy(&origin, s, &dir))?.is_none() {
            s_out = Some(s);
            break;
        }
        s_in = s;
    }
    let Some(mut s_out) = s_out else {
        return Err(TransformError::Quadrature {
            leg,
            message: "leg never leaves the tube".into(),
        });
    };
    while s_out - s_in > 1e-12 * (1.0 + s_in) {
        let mid = 0.5 * (s_in + s_out);
        if frame_arg(scene, axpy(&origin, mid, &dir))?.is_some() {
            s_in = mid;
        } else {
            s_out = mid;
        }
    }
    if let Some(arg) = frame_arg(scene, axpy(&origin, s_in, &dir))? {
        let value = profile.eval(arg)?;
        if value.abs() > EXIT_TOL * fmax {
            return Err(TransformError::LegExitsTube { leg, t0, s: s_in, value });
        }
    }
    let f = |s: f64| -> Result<f64, EvalError> {
        match frame_arg(scene, axpy(&origin, s, &dir)) {
            Ok(Some(arg)) => profile.eval(arg),
            _ => Ok(0.0),
        }
    };
    segment(f, 0.0, s_in, opts, leg)
}

/// Geometric evaluation with f(p) = f̃(p·e(p)) defined through the
/// nearest-point frame; legs are followed until they leave the tube.
pub fn hwt_curve_legs(scene: &CurveScene, t0: f64, d: f64, opts: &QuadOptions) -> Result<Legs, TransformError> {
    check_range(scene, t0, d)?;
    let profile = scene.profile();
    if profile.is_zero() {
        return Ok(Legs::default());
    }
    let fmax = profile.edge_ratio(512)?.0;
    let curve = scene.curve();
    let descent = tube_leg(scene, curve.point(t0)?, scene.u(t0)?, t0, Leg::Descent, fmax, opts)?;
    let glide = segment(|s| profile.eval(curve.gamma1(s)?), t0, t0 + d, opts, Leg::Glide)?;
    let ascent = tube_leg(scene, curve.point(t0 + d)?, scene.v(t0 + d)?, t0, Leg::Ascent, fmax, opts)?;
    Ok(Legs { descent, glide, ascent })
}

pub fn hwt_curve(scene: &CurveScene, t0: f64, d: f64, opts: &QuadOptions) -> Result<f64, TransformError> {
    Ok(hwt_curve_legs(scene, t0, d, opts)?.total())
}

/// Reduced form: −(1/u1(t0))∫_{−∞}^{γ1(t0)} f̃ + ∫_{t0}^{t0+d} f̃(γ1(s)) ds
/// + (1/v1(t0+d))∫_{γ1(t0+d)}^∞ f̃.
pub fn hwt_curve_reduced_legs(scene: &CurveScene, t0: f64, d: f64, opts: &QuadOptions) -> Result<Legs, TransformError> {
    check_range(scene, t0, d)?;
    let profile = scene.profile();
    if profile.is_zero() {
        return Ok(Legs::default());
    }
    let curve = scene.curve();
    let (a, b) = profile.support();
    let q = |lo: f64, hi: f64, leg: Leg| -> Result<f64, TransformError> {
        let (lo, hi) = (lo.max(a), hi.min(b));
        if lo >= hi {
            return Ok(0.0);
        }
        segment(|s| profile.expr().eval(&[s]), lo, hi, opts, leg)
    };
    Ok(Legs {
        descent: -q(a, curve.gamma1(t0)?, Leg::Descent)? / scene.u1(t0)?,
        glide: segment(|s| profile.eval(curve.gamma1(s)?), t0, t0 + d, opts, Leg::Glide)?,
        ascent: q(curve.gamma1(t0 + d)?, b, Leg::Ascent)? / scene.v1(t0 + d)?,
    })
}

pub fn hwt_curve_reduced(scene: &CurveScene, t0: f64, d: f64, opts: &QuadOptions) -> Result<f64, TransformError> {
    Ok(hwt_curve_reduced_legs(scene, t0, d, opts)?.total())
}

/// Three-leg transform of an arbitrary field `f` (zero outside `bbox`) with
/// straight legs along u(t0) and v(t0+d) and the glide along γ.
pub fn hwt_curve_field<F>(scene: &CurveScene, f: F, bbox: &Box2, t0: f64, d: f64, opts: &QuadOptions) -> Result<Legs, TransformError>
where
    F: Fn(&[f64; 2]) -> Result<f64, EvalError>,
{
    check_range(scene, t0, d)?;
    let curve = scene.curve();
    let descent = ray_integral(&f, bbox, &curve.point(t0)?, &scene.u(t0)?, opts, Leg::Descent)?;
    let glide = segment(|s| f(&curve.point(s)?), t0, t0 + d, opts, Leg::Glide)?;
    let ascent = ray_integral(&f, bbox, &curve.point(t0 + d)?, &scene.v(t0 + d)?, opts, Leg::Ascent)?;
    Ok(Legs { descent, glide, ascent })
}
