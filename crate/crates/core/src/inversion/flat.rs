use crate::scene::{FlatScene2D, EPS_COND};
use crate::transform::Axis;

use super::{assemble, fd_derivative, DataSource, InversionError, Method, Recon1D};

/// Reconstruct f̃ for variable boundary fields from R f and ∫f̃.
pub fn invert_2d_variable(scene: &FlatScene2D, data: DataSource<'_>, total_integral: f64) -> Result<Recon1D, InversionError> {
    let nodes = data.nodes();
    let derivs = data.derivatives()?;
    let mut values = Vec::with_capacity(nodes.n);
    let mut denom_min = f64::INFINITY;
    for (i, (dx, dd)) in derivs.into_iter().enumerate() {
        let x = nodes.at(i);
        let (f, den) = assemble(&scene.coefficients(x)?, total_integral, dx, dd);
        if !(den.abs() >= EPS_COND) {
            return Err(InversionError::DegenerateDenominator { x, value: den });
        }
        denom_min = denom_min.min(den.abs());
        values.push(f);
    }
    Ok(Recon1D::new(nodes, values, denom_min, Method::Thm21))
}

/// Constant-field reconstructions:
/// first  f̃ = −(u1 v1/(u1+v1)) ∂_x R(x, 0),
/// second f̃ = (v1/(v1−1)) ∂_d R(x, 0),
/// third  f̃ = (u1/(1+u1)) (∂_d − ∂_x) R(x, 0).
pub fn invert_2d_constant(data: DataSource<'_>, u1: f64, v1: f64, formula: Method) -> Result<Recon1D, InversionError> {
    let singular = |what: &str, v: f64| {
        if v.abs() < EPS_COND {
            Err(InversionError::SingularCoefficient(format!("{what} = {v:e}")))
        } else {
            Ok(v.abs())
        }
    };
    let (weight, margin): (Box<dyn Fn(f64, f64) -> f64>, f64) = match formula {
        Method::Rmk22First => {
            let m = singular("u1 + v1", u1 + v1)?;
            let k = -u1 * v1 / (u1 + v1);
            (Box::new(move |dx, _| k * dx), m)
        }
        Method::Rmk22Second => {
            let m = singular("v1 - 1", v1 - 1.0)?;
            let k = v1 / (v1 - 1.0);
            (Box::new(move |_, dd| k * dd), m)
        }
        Method::Rmk22Third => {
            let m = singular("1 + u1", 1.0 + u1)?;
            let k = u1 / (1.0 + u1);
            (Box::new(move |dx, dd| k * (dd - dx)), m)
        }
        other => return Err(InversionError::InvalidInput(format!("{other} is not a constant-field formula"))),
    };
    let values = data.derivatives()?.into_iter().map(|(dx, dd)| weight(dx, dd)).collect();
    Ok(Recon1D::new(data.nodes(), values, margin, formula))
}

/// C = (v1/u1)(u1+1)/(v1−1): vanishing data at a fixed glide length d0 forces
/// f̃(x + d0) = C·f̃(x).
pub fn recursion_ratio(u1: f64, v1: f64) -> f64 {
    (v1 / u1) * (u1 + 1.0) / (v1 - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NullityVerdict {
    ConsistentWithZero,
    Violation { x: f64, residual: f64 },
}

/// Checks whether a data row R f(·, d0) is consistent with f̃ ≡ 0.
///
/// The row's x-derivative equals (1 − 1/v1)·[f̃(x+d0) − C f̃(x)]; the scaled
/// derivative is the recursion residual implied by the data. When it vanishes
/// on a window reaching d0 to the left of the support, propagating the
/// recursion from the zero region forces f̃ ≡ 0.
pub fn partial_data_nullity_check(row: &[f64], x: Axis, u1: f64, v1: f64, d0: f64, support: (f64, f64), tol: f64) -> Result<NullityVerdict, InversionError> {
    if !(d0 > 0.0) {
        return Err(InversionError::InvalidInput(format!("d0 must be positive, got {d0}")));
    }
    if row.len() != x.n || x.n < 3 {
        return Err(InversionError::InsufficientGrid(format!("row of {} samples on a {}-node axis", row.len(), x.n)));
    }
    if (v1 - 1.0).abs() < EPS_COND || u1.abs() < EPS_COND {
        return Err(InversionError::SingularCoefficient(format!("u1 = {u1}, v1 = {v1}")));
    }
    if x.lo > support.0 - d0 || x.hi < support.1 {
        return Err(InversionError::InvalidInput(format!(
            "row covers [{}, {}] but must cover [{}, {}]",
            x.lo,
            x.hi,
            support.0 - d0,
            support.1
        )));
    }
    let scale = (1.0 - 1.0 / v1).abs();
    for (i, d) in fd_derivative(row, x.step()).into_iter().enumerate() {
        let residual = d.abs() / scale;
        if !(residual <= tol) {
            return Ok(NullityVerdict::Violation { x: x.at(i), residual });
        }
    }
    Ok(NullityVerdict::ConsistentWithZero)
}

/// Residual |f̃(x+d0) − C f̃(x)| of a candidate profile; reports the first node
/// where it exceeds `tol`.
pub fn recursion_check(candidate: impl Fn(f64) -> f64, u1: f64, v1: f64, d0: f64, xs: Axis, tol: f64) -> NullityVerdict {
    let c = recursion_ratio(u1, v1);
    for x in xs.values() {
        let residual = (candidate(x + d0) - c * candidate(x)).abs();
        if !(residual <= tol) {
            return NullityVerdict::Violation { x, residual };
        }
    }
    NullityVerdict::ConsistentWithZero
}
