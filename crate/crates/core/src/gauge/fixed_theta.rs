use crate::expr::Expr;
use crate::geometry::Box3;
use crate::quad::QuadOptions;
use crate::scene::{lattice, Field, HyperplaneScene};
use crate::transform::{hwt_fixed_theta_field, sweep, Axis, DataGrid, TransformError};

use super::{GaugeError, BOUNDARY_TOL, H_TOL};

const VARS3: [&str; 3] = ["x1", "x2", "x3"];

/// f = ∇_{u(θ0)}∇_{v(θ0)}φ in ℝ³ for a scene whose λ's do not depend on x′.
/// φ(x′, 0) is checked on a 64 × 64 lattice over the x′-extent of `bbox`.
pub fn gauge_fixed_theta(phi: &Expr, scene: &HyperplaneScene, bbox: &Box3) -> Result<Expr, GaugeError> {
    if !scene.is_constant() {
        return Err(GaugeError::InvalidInput("lambda_u and lambda_v must not depend on x'".into()));
    }
    if !(0..2).all(|i| bbox.lo[i].is_finite() && bbox.hi[i].is_finite() && bbox.lo[i] < bbox.hi[i]) {
        return Err(GaugeError::InvalidInput("box must be finite in x'".into()));
    }
    let phi = phi.rebind(&VARS3)?;
    for x1 in lattice(bbox.lo[0], bbox.hi[0], 64) {
        for x2 in lattice(bbox.lo[1], bbox.hi[1], 64) {
            let value = phi.eval(&[x1, x2, 0.0])?;
            if !(value.abs() <= BOUNDARY_TOL) {
                return Err(GaugeError::BoundaryNonvanishing { at: x1, value });
            }
        }
    }
    let dir = |w: [f64; 3]| -> Result<Vec<Expr>, GaugeError> { w.iter().map(|&c| Ok(Expr::constant(c, &VARS3)?)).collect() };
    let inner = phi.directional(&dir(scene.v([0.0, 0.0])?)?)?;
    Ok(inner.directional(&dir(scene.u([0.0, 0.0])?)?)?)
}

/// g(x′, x3) = h′(x3) for a one-variable h with h(0) = h′(0) = 0.
pub fn depth_null_generator(h: &Expr) -> Result<Expr, GaugeError> {
    if h.variables().len() != 1 {
        return Err(GaugeError::InvalidInput(format!("h must have one variable, has {}", h.variables().len())));
    }
    let dh = h.derivative_index(0)?;
    let (h0, dh0) = (h.eval(&[0.0])?, dh.eval(&[0.0])?);
    if !(h0.abs() <= H_TOL && dh0.abs() <= H_TOL) {
        return Err(GaugeError::HConditionViolated { h0, dh0 });
    }
    Ok(dh.rename(&["x3"])?.rebind(&VARS3)?)
}

/// R f on (s, d) grids along the lines x′ = sθ0 + cθ0⊥, one grid per offset c.
pub fn fixed_theta_sweep(scene: &HyperplaneScene, f: &Field<3>, offsets: &[f64], s: Axis, d: Axis, opts: &QuadOptions) -> Result<Vec<DataGrid>, GaugeError> {
    offsets
        .iter()
        .map(|&c| {
            let fwd = |x: f64, dd: f64| -> Result<f64, TransformError> {
                Ok(hwt_fixed_theta_field(scene, |p| f.eval(p), f.bbox(), scene.line_point(c, x), dd, opts)?.total())
            };
            Ok(sweep(&fwd, s, d)?)
        })
        .collect()
}
