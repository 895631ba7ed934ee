//! Forward evaluation of the head wave transform.
//!
//! Every scene kind has a geometric evaluator (quadrature along the descent
//! leg, the glide and the ascent leg) and, where the unknown is a profile, a
//! reduced evaluator built from one-dimensional integrals of the profile.

mod curve;
mod flat;
mod grid;
mod hyperplane;
mod identities;

use std::fmt;

use thiserror::Error;

use crate::expr::EvalError;
use crate::geometry::{clip_ray, BoxN};
use crate::quad::{integrate, QuadError, QuadOptions};
use crate::scene::SceneError;

pub use curve::{hwt_curve, hwt_curve_field, hwt_curve_legs, hwt_curve_reduced, hwt_curve_reduced_legs};
pub use flat::{hwt_flat2d, hwt_flat2d_field, hwt_flat2d_legs, hwt_flat2d_reduced, hwt_flat2d_reduced_legs};
pub use grid::{sweep, Axis, DataGrid};
pub(crate) use grid::write_atomic;
pub use identities::analytic_derivatives;
pub use hyperplane::{hwt_fixed_theta, hwt_fixed_theta_field, hwt_fixed_theta_geometric, hwt_fixed_theta_legs};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Leg {
    Descent,
    Glide,
    Ascent,
}

impl fmt::Display for Leg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Leg::Descent => "descent",
            Leg::Glide => "glide",
            Leg::Ascent => "ascent",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error("quadrature failed on the {leg} leg: {message}")]
    Quadrature { leg: Leg, message: String },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("{leg} leg at t0 = {t0} leaves the tube at s = {s} where the profile is still {value:e}")]
    LegExitsTube { leg: Leg, t0: f64, s: f64, value: f64 },
    #[error("operation needs {0}")]
    Unsupported(&'static str),
    #[error("gliding length must be non-negative, got {0}")]
    NegativeGlide(f64),
    #[error("glide [{t0}, {t1}] leaves the curve parameter range [{lo}, {hi}]")]
    GlideOutOfRange { t0: f64, t1: f64, lo: f64, hi: f64 },
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("at node (x = {x}, d = {d}): {source}")]
    Node { x: f64, d: f64, source: Box<TransformError> },
    #[error("non-finite value {value} at node (x = {x}, d = {d})")]
    NonFinite { x: f64, d: f64, value: f64 },
    #[error("{0}")]
    Io(String),
}

/// The three contributions to one transform value.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Legs {
    pub descent: f64,
    pub glide: f64,
    pub ascent: f64,
}

impl Legs {
    pub fn total(&self) -> f64 {
        self.descent + self.glide + self.ascent
    }
}

/// Anything that maps a node `(x, d)` to a transform value.
pub trait Forward: Sync {
    fn eval(&self, x: f64, d: f64) -> Result<f64, TransformError>;
}

impl<F> Forward for F
where
    F: Fn(f64, f64) -> Result<f64, TransformError> + Sync,
{
    fn eval(&self, x: f64, d: f64) -> Result<f64, TransformError> {
        self(x, d)
    }
}

pub(crate) fn check_glide(d: f64) -> Result<(), TransformError> {
    if d >= 0.0 {
        Ok(())
    } else {
        Err(TransformError::NegativeGlide(d))
    }
}

fn quad_err(leg: Leg) -> impl Fn(QuadError<EvalError>) -> TransformError {
    move |e| match e {
        QuadError::Integrand(e) => TransformError::Eval(e),
        other => TransformError::Quadrature {
            leg,
            message: other.to_string(),
        },
    }
}

/// ∫_a^b f with errors attributed to `leg`.
pub(crate) fn segment<F>(f: F, a: f64, b: f64, opts: &QuadOptions, leg: Leg) -> Result<f64, TransformError>
where
    F: FnMut(f64) -> Result<f64, EvalError>,
{
    if a == b {
        return Ok(0.0);
    }
    Ok(integrate(f, a, b, opts).map_err(quad_err(leg))?.value)
}

/// ∫_0^∞ f(origin + t·dir) dt over the part of the ray inside `bbox`.
pub fn ray_integral<const N: usize, F>(
    f: F,
    bbox: &BoxN<N>,
    origin: &[f64; N],
    dir: &[f64; N],
    opts: &QuadOptions,
    leg: Leg,
) -> Result<f64, TransformError>
where
    F: Fn(&[f64; N]) -> Result<f64, EvalError>,
{
    let Some((t0, t1)) = clip_ray(origin, dir, bbox) else {
        return Ok(0.0);
    };
    if t1 <= t0 {
        return Ok(0.0);
    }
    if !t1.is_finite() {
        return Err(TransformError::Quadrature {
            leg,
            message: "ray never leaves the support box".into(),
        });
    }
    segment(
        |t| {
            let p: [f64; N] = std::array::from_fn(|i| origin[i] + t * dir[i]);
            f(&p)
        },
        t0,
        t1,
        opts,
        leg,
    )
}
