//! Scene kinds and their assumption checks.
//!
//! A scene bundles the direction fields, the unknown (as a one-dimensional
//! profile or a full field), and the domains over which things are checked
//! and reconstructed. Scenes are immutable after construction.

mod curve;
mod flat;
mod hyperplane;
mod validate;

use thiserror::Error;

use crate::expr::{DiffError, EvalError, Expr, ParseError};
use crate::geometry::{clip_ray, BoxN};
use crate::quad::{integrate, QuadError, QuadOptions};

pub use curve::{Curve, CurveCoefficients, CurveScene, Frame};
pub use flat::{Coefficients, FlatContent, FlatScene2D};
pub use hyperplane::{HyperContent, HyperplaneScene};
pub use validate::{Assumption, AssumptionReport, Check, Verdict};

/// Default validation lattice resolution per dimension.
pub const DEFAULT_LATTICE: usize = 512;
/// Smallest lattice resolution accepted by `validate`.
pub const MIN_LATTICE: usize = 256;
/// Threshold for every nondegeneracy denominator.
pub const EPS_COND: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("scene is ill-formed: {reason}")]
    IllFormed { reason: String },
    #[error("validation lattice has {got} points per dimension, need at least {MIN_LATTICE}")]
    LatticeTooCoarse { got: usize },
    #[error("point ({x}, {y}) is outside the tubular neighbourhood")]
    OutsideTube { x: f64, y: f64 },
    #[error("nearest-point search did not converge for ({x}, {y})")]
    NewtonDivergence { x: f64, y: f64 },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("quadrature failed: {0}")]
    Quadrature(String),
}

pub(crate) fn ill_formed(reason: impl Into<String>) -> SceneError {
    SceneError::IllFormed {
        reason: reason.into(),
    }
}

/// `n` equally spaced points covering `[a, b]` inclusive.
pub fn lattice(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> + Clone {
    let step = if n > 1 { (b - a) / (n - 1) as f64 } else { 0.0 };
    (0..n).map(move |i| if i + 1 == n && n > 1 { b } else { a + step * i as f64 })
}

fn check_interval(name: &str, (a, b): (f64, f64)) -> Result<(), SceneError> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(ill_formed(format!("{name} must be a finite interval with a < b, got [{a}, {b}]")));
    }
    Ok(())
}

fn require_vars(name: &str, e: &Expr, vars: &[&str]) -> Result<(), SceneError> {
    let got: Vec<&str> = e.variables().iter().map(String::as_str).collect();
    if got != vars {
        return Err(ill_formed(format!("{name} must be declared over {vars:?}, got {got:?}")));
    }
    Ok(())
}

/// A one-variable profile f̃ with declared compact support. Outside the
/// support the profile is taken to be exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    expr: Expr,
    support: (f64, f64),
    total_integral: Option<f64>,
}

impl Profile {
    pub fn new(expr: Expr, support: (f64, f64)) -> Result<Self, SceneError> {
        if expr.variables().len() != 1 {
            return Err(ill_formed("profile must be an expression in exactly one variable"));
        }
        check_interval("profile support", support)?;
        Ok(Profile {
            expr,
            support,
            total_integral: None,
        })
    }

    /// Parse a profile in the variable `x`.
    pub fn parse(src: &str, support: (f64, f64)) -> Result<Self, SceneError> {
        Profile::new(crate::expr::parse(src, &["x"])?, support)
    }

    pub fn with_total_integral(mut self, total: f64) -> Self {
        self.total_integral = Some(total);
        self
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn supplied_total(&self) -> Option<f64> {
        self.total_integral
    }

    pub fn is_zero(&self) -> bool {
        self.expr.is_zero()
    }

    pub fn eval(&self, s: f64) -> Result<f64, EvalError> {
        if s < self.support.0 || s > self.support.1 {
            return Ok(0.0);
        }
        self.expr.eval(&[s])
    }

    /// ∫_lo^hi f̃, with the bounds clipped to the support. Infinite bounds are allowed.
    pub fn integral(&self, lo: f64, hi: f64, opts: &QuadOptions) -> Result<f64, QuadError<EvalError>> {
        let (sign, lo, hi) = if lo <= hi { (1.0, lo, hi) } else { (-1.0, hi, lo) };
        let a = lo.max(self.support.0);
        let b = hi.min(self.support.1);
        if a >= b || self.is_zero() {
            return Ok(0.0);
        }
        Ok(sign * integrate(|s| self.expr.eval(&[s]), a, b, opts)?.value)
    }

    /// The supplied total integral, or the computed one.
    pub fn total(&self, opts: &QuadOptions) -> Result<f64, QuadError<EvalError>> {
        match self.total_integral {
            Some(t) => Ok(t),
            None => self.integral(self.support.0, self.support.1, opts),
        }
    }

    /// Largest |f̃| on a lattice over the support and the larger edge value.
    pub fn edge_ratio(&self, n: usize) -> Result<(f64, f64), EvalError> {
        let (a, b) = self.support;
        let mut max = 0.0_f64;
        for s in lattice(a, b, n) {
            max = max.max(self.expr.eval(&[s])?.abs());
        }
        let edge = self.expr.eval(&[a])?.abs().max(self.expr.eval(&[b])?.abs());
        Ok((max, edge))
    }
}

/// A scalar field on ℝ^N, zero outside its declared box.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<const N: usize> {
    expr: Expr,
    bbox: BoxN<N>,
}

impl<const N: usize> Field<N> {
    pub fn new(expr: Expr, bbox: BoxN<N>) -> Result<Self, SceneError> {
        if expr.variables().len() != N {
            return Err(ill_formed(format!("field must be an expression in exactly {N} variables")));
        }
        if !bbox.is_valid() {
            return Err(ill_formed("field box must have lo < hi on every axis"));
        }
        Ok(Field { expr, bbox })
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn bbox(&self) -> &BoxN<N> {
        &self.bbox
    }

    pub fn is_zero(&self) -> bool {
        self.expr.is_zero()
    }

    pub fn eval(&self, p: &[f64; N]) -> Result<f64, EvalError> {
        if !self.bbox.contains(p) {
            return Ok(0.0);
        }
        self.expr.eval(p)
    }

    /// ∫_0^∞ f(origin + t·dir) dt, truncated by the box.
    pub fn ray_integral(&self, origin: &[f64; N], dir: &[f64; N], opts: &QuadOptions) -> Result<f64, QuadError<EvalError>> {
        if self.is_zero() {
            return Ok(0.0);
        }
        let Some((t0, t1)) = clip_ray(origin, dir, &self.bbox) else {
            return Ok(0.0);
        };
        if t1 <= t0 {
            return Ok(0.0);
        }
        let r = integrate(
            |t| {
                let p: [f64; N] = std::array::from_fn(|i| origin[i] + t * dir[i]);
                self.expr.eval(&p)
            },
            t0,
            t1,
            opts,
        )?;
        Ok(r.value)
    }
}

/// A vector field on ℝ² given by two component expressions in (x, y), with
/// its symbolic Jacobian.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField2 {
    comps: [Expr; 2],
    jac: [[Expr; 2]; 2],
}

impl VectorField2 {
    pub fn new(c1: Expr, c2: Expr) -> Result<Self, SceneError> {
        let c1 = c1.rebind(&["x", "y"])?;
        let c2 = c2.rebind(&["x", "y"])?;
        let jac = [
            [c1.derivative("x")?, c1.derivative("y")?],
            [c2.derivative("x")?, c2.derivative("y")?],
        ];
        Ok(VectorField2 { comps: [c1, c2], jac })
    }

    pub fn parse(c1: &str, c2: &str) -> Result<Self, SceneError> {
        let v = ["x", "y"];
        VectorField2::new(crate::expr::parse(c1, &v)?, crate::expr::parse(c2, &v)?)
    }

    pub fn constant(w: [f64; 2]) -> Self {
        let c = |v: f64| Expr::constant(v, &["x", "y"]).expect("valid variables");
        let z = || c(0.0);
        VectorField2 {
            comps: [c(w[0]), c(w[1])],
            jac: [[z(), z()], [z(), z()]],
        }
    }

    pub fn components(&self) -> &[Expr; 2] {
        &self.comps
    }

    /// True when neither component depends on position.
    pub fn is_constant(&self) -> bool {
        self.comps.iter().all(|c| !c.depends_on(0) && !c.depends_on(1))
    }

    pub fn eval(&self, p: &[f64; 2]) -> Result<[f64; 2], EvalError> {
        Ok([self.comps[0].eval(p)?, self.comps[1].eval(p)?])
    }

    pub fn div(&self, p: &[f64; 2]) -> Result<f64, EvalError> {
        Ok(self.jac[0][0].eval(p)? + self.jac[1][1].eval(p)?)
    }

    /// |(w·∇)w| at `p`; zero exactly when integral curves are straight lines
    /// traversed at constant speed.
    pub fn straightness_residual(&self, p: &[f64; 2]) -> Result<f64, EvalError> {
        let w = self.eval(p)?;
        let mut r = 0.0_f64;
        for i in 0..2 {
            let c = w[0] * self.jac[i][0].eval(p)? + w[1] * self.jac[i][1].eval(p)?;
            r = r.max(c.abs());
        }
        Ok(r)
    }

    /// Symbolic directional derivative `w·∇φ` of an expression in (x, y).
    pub fn apply(&self, phi: &Expr) -> Result<Expr, SceneError> {
        Ok(phi.directional(&self.comps)?)
    }
}

/// Any of the three scene kinds.
#[derive(Debug, Clone, PartialEq)]
pub enum Scene {
    Flat(FlatScene2D),
    Hyperplane(HyperplaneScene),
    Curve(CurveScene),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    Flat2d,
    Hyperplane,
    Curve,
}

impl std::fmt::Display for SceneKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SceneKind::Flat2d => "flat2d",
            SceneKind::Hyperplane => "hyperplane",
            SceneKind::Curve => "curve",
        })
    }
}

impl Scene {
    pub fn kind(&self) -> SceneKind {
        match self {
            Scene::Flat(_) => SceneKind::Flat2d,
            Scene::Hyperplane(_) => SceneKind::Hyperplane,
            Scene::Curve(_) => SceneKind::Curve,
        }
    }

    pub fn validate(&self, lattice: usize) -> Result<AssumptionReport, SceneError> {
        match self {
            Scene::Flat(s) => s.validate(lattice),
            Scene::Hyperplane(s) => s.validate(lattice),
            Scene::Curve(s) => s.validate(lattice),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn profile_is_zero_outside_support() {
        let p = Profile::parse("1 + x^2", (-1.0, 1.0)).unwrap();
        assert_eq!(p.eval(2.0).unwrap(), 0.0);
        assert_eq!(p.eval(0.0).unwrap(), 1.0);
        let opts = QuadOptions::default();
        assert!((p.integral(f64::NEG_INFINITY, f64::INFINITY, &opts).unwrap() - 8.0 / 3.0).abs() < 1e-14);
        assert!((p.integral(0.0, -5.0, &opts).unwrap() + 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn field_ray_integral_clips_to_box() {
        let f = Field::new(parse("1", &["x", "y"]).unwrap(), BoxN::new([-1.0, 0.0], [1.0, 1.0])).unwrap();
        let v = f.ray_integral(&[0.0, 0.0], &[0.6, 0.8], &QuadOptions::default()).unwrap();
        assert!((v - 1.25).abs() < 1e-14);
    }

    #[test]
    fn vector_field_straightness() {
        let radial = VectorField2::parse("(x-1)/sqrt((x-1)^2+(y+5)^2)", "(y+5)/sqrt((x-1)^2+(y+5)^2)").unwrap();
        assert!(radial.straightness_residual(&[0.3, 0.7]).unwrap() < 1e-15);
        assert!(radial.div(&[0.3, 0.7]).unwrap() > 0.0);
        let swirl = VectorField2::parse("-y", "x").unwrap();
        assert!(swirl.straightness_residual(&[1.0, 0.0]).unwrap() > 0.5);
        assert!(VectorField2::constant([0.6, 0.8]).is_constant());
    }

    #[test]
    fn lattice_hits_both_ends() {
        let v: Vec<f64> = lattice(-3.0, 3.0, 7).collect();
        assert_eq!(v, vec![-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]);
    }
}
