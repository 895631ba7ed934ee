//! Explicit reconstruction of profiles from head wave data.
//!
//! All formulas consume R f(x, 0), its x-derivative at d = 0 and its
//! d-derivative at d = 0. Derivatives come from finite differences, either on
//! a sampled [`DataGrid`] or on a forward callback.

mod curve;
mod flat;
mod hyperplane;

use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::expr::EvalError;
use crate::scene::{Coefficients, SceneError};
use crate::transform::{Axis, DataGrid, Forward, TransformError};

pub use curve::invert_curve;
pub use flat::{invert_2d_constant, invert_2d_variable, partial_data_nullity_check, recursion_check, recursion_ratio, NullityVerdict};
pub use hyperplane::{invert_fixed_theta, xray_limit, LineIntegrals, XrayEstimate};

/// Default finite-difference step for callback data.
pub const DEFAULT_FD_STEP: f64 = 1e-4;

/// Successive X-ray estimates closer than this count as converged.
pub const XRAY_CAUCHY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Thm21,
    Rmk22First,
    Rmk22Second,
    Rmk22Third,
    Thm31,
    Thm41,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Thm21 => "thm21",
            Method::Rmk22First => "rmk22-1",
            Method::Rmk22Second => "rmk22-2",
            Method::Rmk22Third => "rmk22-3",
            Method::Thm31 => "thm31",
            Method::Thm41 => "thm41",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Method> {
        [
            Method::Thm21,
            Method::Rmk22First,
            Method::Rmk22Second,
            Method::Rmk22Third,
            Method::Thm31,
            Method::Thm41,
        ]
        .into_iter()
        .find(|m| m.tag() == tag)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InversionError {
    #[error("degenerate denominator {value:e} at x = {x}")]
    DegenerateDenominator { x: f64, value: f64 },
    #[error("insufficient grid: {0}")]
    InsufficientGrid(String),
    #[error("singular coefficient: {0}")]
    SingularCoefficient(String),
    #[error("no line integral supplied for line offset {offset}")]
    MissingLineIntegral { offset: f64 },
    #[error("probe sequence is not Cauchy (last difference {last_diff:e})")]
    NoLimit { last_diff: f64 },
    #[error("limit coefficient vanishes (|C| = {c:e} at s = {s})")]
    ZeroC { c: f64, s: f64 },
    #[error("gamma1 is not monotone near t0 = {t0}")]
    NonMonotoneGamma1 { t0: f64, raw: Vec<(f64, f64)> },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Where the transform values come from.
#[derive(Clone, Copy)]
pub enum DataSource<'a> {
    /// Samples on a grid; derivatives use one grid cell as step.
    Grid(&'a DataGrid),
    /// A forward evaluator, reconstructed at `nodes` with FD step `step`.
    Callback { forward: &'a dyn Forward, nodes: Axis, step: f64 },
}

impl<'a> DataSource<'a> {
    pub fn callback(forward: &'a dyn Forward, nodes: Axis) -> Self {
        DataSource::Callback {
            forward,
            nodes,
            step: DEFAULT_FD_STEP,
        }
    }

    pub fn nodes(&self) -> Axis {
        match self {
            DataSource::Grid(g) => g.x,
            DataSource::Callback { nodes, .. } => *nodes,
        }
    }

    /// (∂_x R(x, 0), ∂_d R(x, 0)) at every node.
    pub fn derivatives(&self) -> Result<Vec<(f64, f64)>, InversionError> {
        match *self {
            DataSource::Grid(g) => grid_derivatives(g),
            DataSource::Callback { forward, nodes, step } => {
                if !(step > 0.0 && step.is_finite()) {
                    return Err(InversionError::InvalidInput(format!("finite-difference step {step}")));
                }
                let h = step;
                let r: Vec<Result<(f64, f64), TransformError>> = nodes
                    .values()
                    .into_par_iter()
                    .map(|x| {
                        let dx = (forward.eval(x + h, 0.0)? - forward.eval(x - h, 0.0)?) / (2.0 * h);
                        let dd = (-3.0 * forward.eval(x, 0.0)? + 4.0 * forward.eval(x, h)? - forward.eval(x, 2.0 * h)?) / (2.0 * h);
                        Ok((dx, dd))
                    })
                    .collect();
                r.into_iter().map(|v| v.map_err(InversionError::from)).collect()
            }
        }
    }
}

/// Derivative of uniformly spaced samples: central inside, second-order
/// one-sided at the ends.
pub fn fd_derivative(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|i| {
            if i == 0 {
                (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
            } else if i == n - 1 {
                (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h)
            } else {
                (v[i + 1] - v[i - 1]) / (2.0 * h)
            }
        })
        .collect()
}

fn grid_derivatives(g: &DataGrid) -> Result<Vec<(f64, f64)>, InversionError> {
    if g.d.lo != 0.0 {
        return Err(InversionError::InsufficientGrid("no d = 0 row".into()));
    }
    if g.d.n < 2 {
        return Err(InversionError::InsufficientGrid("need at least two d rows".into()));
    }
    if g.x.n < 3 {
        return Err(InversionError::InsufficientGrid("need at least three x nodes".into()));
    }
    let dx = fd_derivative(&g.row(0), g.x.step());
    let hd = g.d.step();
    Ok((0..g.x.n)
        .map(|i| {
            let dd = if g.d.n >= 3 {
                (-3.0 * g.get(i, 0) + 4.0 * g.get(i, 1) - g.get(i, 2)) / (2.0 * hd)
            } else {
                (g.get(i, 1) - g.get(i, 0)) / hd
            };
            (dx[i], dd)
        })
        .collect())
}

/// [α′∂_dR + β′(∂_xR − ζ)] / (α′β − β′α) together with the denominator.
pub(crate) fn assemble(c: &Coefficients, total: f64, dx: f64, dd: f64) -> (f64, f64) {
    let zeta = c.zeta_factor * total;
    let den = c.denominator();
    ((c.dalpha * dd + c.dbeta * (dx - zeta)) / den, den)
}

/// A reconstructed profile on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Recon1D {
    pub grid: Axis,
    pub values: Vec<f64>,
    /// Smallest |denominator| met while assembling.
    pub denom_min: f64,
    pub method: Method,
    /// (argument, value) pairs before resampling (curve inversion only).
    pub raw: Option<Vec<(f64, f64)>>,
    pub scene_hash: u64,
    pub quad_tol: f64,
}

impl Recon1D {
    pub(crate) fn new(grid: Axis, values: Vec<f64>, denom_min: f64, method: Method) -> Self {
        Recon1D {
            grid,
            values,
            denom_min,
            method,
            raw: None,
            scene_hash: 0,
            quad_tol: 0.0,
        }
    }

    pub fn with_meta(mut self, scene_hash: u64, quad_tol: f64) -> Self {
        self.scene_hash = scene_hash;
        self.quad_tol = quad_tol;
        self
    }

    /// (max, mean) absolute error against a reference profile.
    pub fn errors(&self, truth: impl Fn(f64) -> f64) -> (f64, f64) {
        let errs: Vec<f64> = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| (v - truth(self.grid.at(i))).abs())
            .collect();
        let max = errs.iter().fold(0.0_f64, |m, e| m.max(*e));
        (max, errs.iter().sum::<f64>() / errs.len().max(1) as f64)
    }

    /// Largest node-wise difference to another reconstruction on the same grid.
    pub fn max_diff(&self, other: &Recon1D) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn to_csv(&self, truth: Option<&dyn Fn(f64) -> f64>) -> String {
        let mut out = Vec::new();
        self.write_to(&mut out, truth).expect("writing to memory");
        String::from_utf8(out).expect("ascii output")
    }

    fn write_to<W: std::io::Write>(&self, mut w: W, truth: Option<&dyn Fn(f64) -> f64>) -> std::io::Result<()> {
        writeln!(w, "# scene_hash={:016x}", self.scene_hash)?;
        writeln!(w, "# quad_tol={:.16e}", self.quad_tol)?;
        writeln!(w, "# method={}", self.method)?;
        let mut csv = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        match truth {
            Some(_) => csv.write_record(["x", "f_recon", "f_true", "abs_err"])?,
            None => csv.write_record(["x", "f_recon"])?,
        }
        for (i, v) in self.values.iter().enumerate() {
            let x = self.grid.at(i);
            let mut rec = vec![format!("{x:.16e}"), format!("{v:.16e}")];
            if let Some(t) = truth {
                let ft = t(x);
                rec.push(format!("{ft:.16e}"));
                rec.push(format!("{:.16e}", (v - ft).abs()));
            }
            csv.write_record(&rec)?;
        }
        csv.flush()
    }

    pub fn write_csv(&self, path: &Path, truth: Option<&dyn Fn(f64) -> f64>) -> Result<(), InversionError> {
        crate::transform::write_atomic(path, |f| self.write_to(f, truth)).map_err(InversionError::from)
    }
}
