//! Kernel elements of the head wave transform.
//!
//! Generators turn a potential φ into a null function by applying a pair of
//! directional derivatives; the converse constructions rebuild a potential
//! from a null function with quadrature. Every construction comes with a
//! numerical residual so callers can see how well the identity holds.

mod constant;
mod fixed_theta;
mod general;

use std::fmt;

use thiserror::Error;

use crate::expr::{DiffError, EvalError, ParseError};
use crate::quad::QuadError;
use crate::scene::SceneError;
use crate::transform::TransformError;

pub use constant::{boundary_residual, gauge_forward_constant, potentials_from_null_constant, ConstantPotentials};
pub use fixed_theta::{depth_null_generator, fixed_theta_sweep, gauge_fixed_theta};
pub use general::{
    box_lattice, check_div_condition, curve_forward_sweep, flat_forward_sweep, gauge_forward_curve, gauge_forward_general, potential_from_null_general,
    GaugeSetting, GeneralGauge, GeneralPotential, PotentialOptions,
};

/// |φ| on the gliding set above this is not treated as zero.
pub const BOUNDARY_TOL: f64 = 1e-10;
/// Largest |R f| accepted when a function is claimed to be null.
pub const NULL_TOL: f64 = 1e-7;
/// Largest divergence-compatibility residual accepted.
pub const DIV_TOL: f64 = 1e-7;
/// Largest curl of ω accepted.
pub const CLOSED_TOL: f64 = 1e-5;
/// Smallest |det(u, v)| accepted.
pub const DET_MIN: f64 = 1e-9;
/// Largest |(w·∇)w| accepted for an extended field.
pub const STRAIGHT_TOL: f64 = 1e-6;
/// Tolerance on h(0) and h′(0) for depth null generators.
pub const H_TOL: f64 = 1e-12;
/// Largest PDE residual accepted for a recovered potential.
pub const PDE_TOL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GaugeError {
    #[error("potential does not vanish on the gliding set: {value:e} at {at}")]
    BoundaryNonvanishing { at: f64, value: f64 },
    #[error("function is not null: R f({x}, {d}) = {value:e}")]
    NotNull { x: f64, d: f64, value: f64 },
    #[error("direction frame is singular at ({x}, {y}): det = {det:e}")]
    SingularFrame { x: f64, y: f64, det: f64 },
    #[error("extended field is not straight at ({x}, {y}): residual {residual:e}")]
    ExtensionNotStraight { x: f64, y: f64, residual: f64 },
    #[error("divergence compatibility fails: residual {residual:e}")]
    DivConditionViolated { residual: f64 },
    #[error("one-form is not closed: residual {residual:e}")]
    NotClosed { residual: f64 },
    #[error("h(0) = {h0:e}, h'(0) = {dh0:e}; both must vanish")]
    HConditionViolated { h0: f64, dh0: f64 },
    #[error("support box reaches y = {y_min}; it must lie strictly above the boundary")]
    SupportTouchesBoundary { y_min: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("quadrature failed: {0}")]
    Quadrature(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

impl From<QuadError<EvalError>> for GaugeError {
    fn from(e: QuadError<EvalError>) -> Self {
        match e {
            QuadError::Integrand(e) => GaugeError::Eval(e),
            other => GaugeError::Quadrature(other.to_string()),
        }
    }
}

impl From<QuadError<GaugeError>> for GaugeError {
    fn from(e: QuadError<GaugeError>) -> Self {
        match e {
            QuadError::Integrand(e) => e,
            other => GaugeError::Quadrature(other.to_string()),
        }
    }
}

/// Residuals certifying a kernel construction. Unmeasured entries are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GaugeReport {
    /// max |R f| over a verification sweep.
    pub max_forward_residual: Option<f64>,
    /// max |∂₁ω₂ − ∂₂ω₁| over a lattice.
    pub closedness_residual: Option<f64>,
    /// The two second-order identities P_u[det⁻¹P_vφ] and P_v[det⁻¹P_uφ].
    pub pde_residuals: Option<(f64, f64)>,
    /// max |φ| on the gliding set.
    pub boundary_residual: Option<f64>,
    /// max |φ_A − φ_B| between two integration paths.
    pub path_discrepancy: Option<f64>,
    /// max |div condition residual|.
    pub div_residual: Option<f64>,
    /// max difference between the two operator orderings.
    pub ordering_discrepancy: Option<f64>,
}

impl GaugeReport {
    fn entries(&self) -> Vec<(&'static str, f64, f64)> {
        let mut out = Vec::new();
        let mut push = |k, v: Option<f64>, tol| {
            if let Some(v) = v {
                out.push((k, v, tol));
            }
        };
        push("max_forward_residual", self.max_forward_residual, NULL_TOL);
        push("closedness_residual", self.closedness_residual, CLOSED_TOL);
        push("pde_residual_uv", self.pde_residuals.map(|p| p.0), PDE_TOL);
        push("pde_residual_vu", self.pde_residuals.map(|p| p.1), PDE_TOL);
        push("boundary_residual", self.boundary_residual, NULL_TOL);
        push("path_discrepancy", self.path_discrepancy, NULL_TOL);
        push("div_residual", self.div_residual, DIV_TOL);
        push("ordering_discrepancy", self.ordering_discrepancy, f64::INFINITY);
        out
    }

    /// First measured residual above its threshold, as (key, value, threshold).
    pub fn exceeded(&self) -> Option<(&'static str, f64, f64)> {
        self.entries().into_iter().find(|(_, v, tol)| !(v <= tol))
    }

    /// Flat `key=value` lines.
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for GaugeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v, _) in self.entries() {
            writeln!(f, "{k}={v:.6e}")?;
        }
        Ok(())
    }
}

/// Fourth-order central difference of `g` along `w` at `p`.
pub(crate) fn directional_fd<F>(g: &F, p: &[f64; 2], w: &[f64; 2], h: f64) -> Result<f64, GaugeError>
where
    F: Fn(&[f64; 2]) -> Result<f64, GaugeError>,
{
    let at = |s: f64| g(&[p[0] + s * w[0], p[1] + s * w[1]]);
    Ok((at(-2.0 * h)? - 8.0 * at(-h)? + 8.0 * at(h)? - at(2.0 * h)?) / (12.0 * h))
}
