use crate::expr::EvalError;
use crate::quad::{QuadError, QuadOptions};
use crate::scene::Scene;

use super::TransformError;

fn quad(e: QuadError<EvalError>) -> TransformError {
    match e {
        QuadError::Integrand(e) => TransformError::Eval(e),
        other => TransformError::Quadrature {
            leg: super::Leg::Ascent,
            message: other.to_string(),
        },
    }
}

/// Values entering the derivative identities at the leg endpoints x and y = x + d.
struct Pieces {
    u1: f64,
    du1: f64,
    v1: f64,
    dv1: f64,
    /// Profile-argument speeds at x and y.
    sx: f64,
    sy: f64,
    fx: f64,
    fy: f64,
    /// ∫ of the profile beyond the argument at x and at y.
    gx: f64,
    gy: f64,
    total: f64,
}

fn pieces(scene: &Scene, offset: f64, x: f64, d: f64, opts: &QuadOptions) -> Result<Pieces, TransformError> {
    let y = x + d;
    match scene {
        Scene::Flat(s) => {
            let p = s.profile().ok_or(TransformError::Unsupported("a profile-mode scene"))?;
            let g = |a: f64| p.integral(a, f64::INFINITY, opts).map_err(quad);
            Ok(Pieces {
                u1: s.u1(x)?,
                du1: s.du1(x)?,
                v1: s.v1(y)?,
                dv1: s.dv1(y)?,
                sx: 1.0,
                sy: 1.0,
                fx: p.eval(x)?,
                fy: p.eval(y)?,
                gx: g(x)?,
                gy: g(y)?,
                total: p.total(opts).map_err(quad)?,
            })
        }
        Scene::Hyperplane(s) => {
            let p = s.profile().ok_or(TransformError::Unsupported("a profile-mode scene"))?;
            let th = s.theta0();
            let back = [-th[0], -th[1]];
            let (px, py) = (s.line_point(offset, x), s.line_point(offset, y));
            let (cx, cy) = (s.coefficients(px)?, s.coefficients(py)?);
            let (lu, lv) = (s.lambda_u(px)?, s.lambda_v(py)?);
            let gx = p.ray_integral(&px, &th, opts).map_err(quad)?;
            Ok(Pieces {
                u1: lu,
                du1: cx.zeta_factor * lu * lu,
                v1: lv,
                dv1: cy.dbeta * lv * lv,
                sx: 1.0,
                sy: 1.0,
                fx: p.eval(&px)?,
                fy: p.eval(&py)?,
                gx,
                gy: p.ray_integral(&py, &th, opts).map_err(quad)?,
                total: gx + p.ray_integral(&px, &back, opts).map_err(quad)?,
            })
        }
        Scene::Curve(s) => {
            let p = s.profile();
            let c = s.curve();
            let (ax, ay) = (c.gamma1(x)?, c.gamma1(y)?);
            let g = |a: f64| p.integral(a, f64::INFINITY, opts).map_err(quad);
            Ok(Pieces {
                u1: s.u1(x)?,
                du1: s.du1(x)?,
                v1: s.v1(y)?,
                dv1: s.dv1(y)?,
                sx: c.gamma1_prime(x)?,
                sy: c.gamma1_prime(y)?,
                fx: p.eval(ax)?,
                fy: p.eval(ay)?,
                gx: g(ax)?,
                gy: g(ay)?,
                total: p.total(opts).map_err(quad)?,
            })
        }
    }
}

/// Closed-form (∂_x R, ∂_d R) of the reduced transform at (x, d), from the
/// profile, its tail integrals and the boundary fields. For hyperplane
/// scenes x is the position along the line with the given offset.
pub fn analytic_derivatives(scene: &Scene, offset: f64, x: f64, d: f64, opts: &QuadOptions) -> Result<(f64, f64), TransformError> {
    let p = pieces(scene, offset, x, d, opts)?;
    let tail_v = p.dv1 / (p.v1 * p.v1) * p.gy;
    let dd = p.fy - tail_v - p.sy * p.fy / p.v1;
    let dx = p.du1 / (p.u1 * p.u1) * (p.total - p.gx) - p.sx * p.fx / p.u1 + p.fy - p.fx - tail_v - p.sy * p.fy / p.v1;
    Ok((dx, dd))
}
