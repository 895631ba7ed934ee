use rayon::prelude::*;

use crate::expr::Expr;
use crate::geometry::{clip_ray, Box2};
use crate::quad::{integrate, QuadOptions};
use crate::scene::{lattice, Field, FlatContent, FlatScene2D, VectorField2, DEFAULT_LATTICE};
use crate::transform::{Axis, DataGrid};

use super::general::{first_violation, flat_forward_sweep};
use super::{directional_fd, GaugeError, GaugeReport, BOUNDARY_TOL};

pub(crate) fn check_direction(name: &str, w: [f64; 2]) -> Result<(), GaugeError> {
    let n = (w[0] * w[0] + w[1] * w[1]).sqrt();
    if !((n - 1.0).abs() <= 1e-12 && w[1] > 0.0) {
        return Err(GaugeError::InvalidInput(format!("{name} = ({}, {}) must be a unit vector pointing into y > 0", w[0], w[1])));
    }
    Ok(())
}

/// Errors if φ(x, 0) exceeds the boundary tolerance anywhere on the box's x-range.
pub(crate) fn check_vanishes_on_axis(phi: &Expr, bbox: &Box2) -> Result<(), GaugeError> {
    for x in lattice(bbox.lo[0], bbox.hi[0], DEFAULT_LATTICE) {
        let value = phi.eval(&[x, 0.0])?;
        if !(value.abs() <= BOUNDARY_TOL) {
            return Err(GaugeError::BoundaryNonvanishing { at: x, value });
        }
    }
    Ok(())
}

/// f = ∇_{u0}∇_{v0}φ for constant unit directions. `bbox` is the declared
/// support of φ; φ(x, 0) is checked along its x-range.
pub fn gauge_forward_constant(phi: &Expr, u0: [f64; 2], v0: [f64; 2], bbox: &Box2) -> Result<Expr, GaugeError> {
    check_direction("u0", u0)?;
    check_direction("v0", v0)?;
    let phi = phi.rebind(&["x", "y"])?;
    check_vanishes_on_axis(&phi, bbox)?;
    let inner = VectorField2::constant(v0).apply(&phi)?;
    Ok(VectorField2::constant(u0).apply(&inner)?)
}

/// max of |φ|, |∂_yφ| and |f| along y = 0 over the box's x-range.
pub fn boundary_residual(phi: &Expr, f: &Expr, bbox: &Box2) -> Result<f64, GaugeError> {
    let phi = phi.rebind(&["x", "y"])?;
    let f = f.rebind(&["x", "y"])?;
    let dy = phi.derivative("y")?;
    let mut r = 0.0_f64;
    for x in lattice(bbox.lo[0], bbox.hi[0], DEFAULT_LATTICE) {
        let p = [x, 0.0];
        r = r.max(phi.eval(&p)?.abs()).max(dy.eval(&p)?.abs()).max(f.eval(&p)?.abs());
    }
    Ok(r)
}

/// ∫_0^len g(base + t·dir) dt (negative `len` integrates backwards), restricted
/// to `bbox` when given.
pub(crate) fn line_integral<F>(g: F, base: [f64; 2], dir: [f64; 2], len: f64, bbox: Option<&Box2>, opts: &QuadOptions) -> Result<f64, GaugeError>
where
    F: Fn(&[f64; 2]) -> Result<f64, GaugeError>,
{
    let (sign, dir, len) = if len >= 0.0 { (1.0, dir, len) } else { (-1.0, [-dir[0], -dir[1]], -len) };
    let (a, b) = match bbox {
        Some(bb) => match clip_ray(&base, &dir, bb) {
            Some((t0, t1)) => (t0.max(0.0), t1.min(len)),
            None => return Ok(0.0),
        },
        None => (0.0, len),
    };
    if !(a < b) {
        return Ok(0.0);
    }
    let r = integrate(|t| g(&[base[0] + t * dir[0], base[1] + t * dir[1]]), a, b, opts)?;
    Ok(sign * r.value)
}

/// Potentials of a null function for constant directions:
/// ψ(x, y) = ∫_0^{y/u2} f((x − (u1/u2)y, 0) + t·u) dt and φ likewise from ψ with v,
/// so that ∇_uψ = f, ∇_vφ = ψ and both vanish on y = 0.
#[derive(Debug, Clone)]
pub struct ConstantPotentials {
    f: Field<2>,
    u: [f64; 2],
    v: [f64; 2],
    opts: QuadOptions,
    spot: DataGrid,
}

impl ConstantPotentials {
    pub fn psi(&self, p: &[f64; 2]) -> Result<f64, GaugeError> {
        if self.f.is_zero() {
            return Ok(0.0);
        }
        let [u1, u2] = self.u;
        let base = [p[0] - u1 / u2 * p[1], 0.0];
        line_integral(|q| Ok(self.f.eval(q)?), base, self.u, p[1] / u2, Some(self.f.bbox()), &self.opts)
    }

    pub fn phi(&self, p: &[f64; 2]) -> Result<f64, GaugeError> {
        if self.f.is_zero() {
            return Ok(0.0);
        }
        let [v1, v2] = self.v;
        let base = [p[0] - v1 / v2 * p[1], 0.0];
        line_integral(|q| self.psi(q), base, self.v, p[1] / v2, None, &self.opts)
    }

    /// R f on the spot grid checked before construction.
    pub fn spot_grid(&self) -> &DataGrid {
        &self.spot
    }

    /// Finite-difference check at `points` with step `h`: the pde pair holds
    /// max |∇_uψ − f| and max |∇_u∇_vφ − f|; the boundary entry is max |φ(x, 0)|.
    pub fn report(&self, points: &[[f64; 2]], h: f64) -> Result<GaugeReport, GaugeError> {
        let rows: Vec<Result<(f64, f64, f64), GaugeError>> = points
            .par_iter()
            .map(|p| {
                let f = self.f.eval(p)?;
                let chain = (directional_fd(&|q: &[f64; 2]| self.psi(q), p, &self.u, h)? - f).abs();
                let dv = |q: &[f64; 2]| directional_fd(&|r: &[f64; 2]| self.phi(r), q, &self.v, h);
                let pde = (directional_fd(&dv, p, &self.u, h)? - f).abs();
                Ok((chain, pde, self.phi(&[p[0], 0.0])?.abs()))
            })
            .collect();
        let mut out = (0.0_f64, 0.0_f64, 0.0_f64);
        for r in rows {
            let (a, b, c) = r?;
            out = (out.0.max(a), out.1.max(b), out.2.max(c));
        }
        Ok(GaugeReport {
            max_forward_residual: Some(self.spot.max_abs()),
            pde_residuals: Some((out.0, out.1)),
            boundary_residual: Some(out.2),
            ..Default::default()
        })
    }
}

/// Build ψ and φ for a null function `f`. Nullity is verified first on a
/// 13 × 7 spot grid covering every node whose legs can meet the support.
pub fn potentials_from_null_constant(f: &Field<2>, u0: [f64; 2], v0: [f64; 2], opts: &QuadOptions) -> Result<ConstantPotentials, GaugeError> {
    check_direction("u0", u0)?;
    check_direction("v0", v0)?;
    let b = f.bbox();
    let (lo, hi) = (b.lo[0], b.hi[0]);
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(GaugeError::InvalidInput("field box must be finite in x".into()));
    }
    let scene = FlatScene2D::new(
        Expr::constant(u0[0], &["x"])?,
        Expr::constant(v0[0], &["x"])?,
        FlatContent::Field(f.clone()),
        (lo, hi),
    )?;
    let reach = (b.hi[1].min(1e6) * (u0[0] / u0[1]).abs()).max(b.hi[1].min(1e6) * (v0[0] / v0[1]).abs()) + (hi - lo);
    let xs = Axis::new(lo - reach, hi + reach, 13)?;
    let ds = Axis::new(0.0, hi - lo, 7)?;
    let spot = flat_forward_sweep(&scene, &|q: &[f64; 2]| f.eval(q), b, xs, ds, opts)?;
    first_violation(&spot)?;
    Ok(ConstantPotentials {
        f: f.clone(),
        u: u0,
        v: v0,
        opts: *opts,
        spot,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn dirs() -> ([f64; 2], [f64; 2]) {
        let (a, b) = (2.2_f64, 0.9_f64);
        ([a.cos(), a.sin()], [b.cos(), b.sin()])
    }

    fn bump() -> Expr {
        parse("exp(-2*(x-0.3)^2 - 2*(y-5)^2)", &["x", "y"]).unwrap()
    }

    fn tight() -> QuadOptions {
        QuadOptions::default().with_abs_tol(1e-13).with_rel_tol(1e-13)
    }

    #[test]
    fn zero_potential_gives_zero_field() {
        let (u, v) = dirs();
        let z = Expr::constant(0.0, &["x", "y"]).unwrap();
        let f = gauge_forward_constant(&z, u, v, &Box2::new([-5.0, 0.0], [5.0, 5.0])).unwrap();
        assert!(f.is_zero());
    }

    #[test]
    fn generator_matches_nested_differences() {
        let (u, v) = dirs();
        let phi = parse("y^2*exp(-x^2-y^2)", &["x", "y"]).unwrap();
        let f = gauge_forward_constant(&phi, u, v, &Box2::new([-5.0, -5.0], [5.0, 5.0])).unwrap();
        let g = |p: &[f64; 2]| -> Result<f64, GaugeError> { Ok(phi.eval(p)?) };
        let h = 1e-3;
        let dv = |q: &[f64; 2]| directional_fd(&g, q, &v, h);
        let fd = directional_fd(&dv, &[0.0, 1.0], &u, h).unwrap();
        assert!((f.eval(&[0.0, 1.0]).unwrap() - fd).abs() < 1e-8);
    }

    #[test]
    fn nonvanishing_potential_is_rejected() {
        let (u, v) = dirs();
        let phi = parse("exp(-x^2-y^2)", &["x", "y"]).unwrap();
        let r = gauge_forward_constant(&phi, u, v, &Box2::new([-5.0, -5.0], [5.0, 5.0]));
        assert!(matches!(r, Err(GaugeError::BoundaryNonvanishing { .. })));
    }

    #[test]
    fn generated_field_is_annihilated() {
        let (u, v) = dirs();
        let bbox = Box2::new([-10.0, 0.0], [10.0, 12.0]);
        let f = gauge_forward_constant(&bump(), u, v, &bbox).unwrap();
        let scene = FlatScene2D::new(Expr::constant(u[0], &["x"]).unwrap(), Expr::constant(v[0], &["x"]).unwrap(), FlatContent::Field(Field::new(f.clone(), bbox).unwrap()), (-1.0, 1.0)).unwrap();
        let g = flat_forward_sweep(&scene, &|q: &[f64; 2]| f.eval(q), &bbox, Axis::new(-20.0, 20.0, 41).unwrap(), Axis::new(0.0, 10.0, 21).unwrap(), &QuadOptions::default().with_abs_tol(1e-12)).unwrap();
        assert!(g.max_abs() <= 1e-8, "{}", g.max_abs());
    }

    #[test]
    fn potentials_satisfy_the_chain() {
        let (u, v) = dirs();
        let bbox = Box2::new([-10.0, 0.0], [10.0, 12.0]);
        let f = Field::new(gauge_forward_constant(&bump(), u, v, &bbox).unwrap(), bbox).unwrap();
        let pot = potentials_from_null_constant(&f, u, v, &tight()).unwrap();
        assert_eq!(pot.psi(&[1.0, 0.0]).unwrap(), 0.0);
        let pts = [[0.3, 5.0], [-0.5, 4.5], [1.0, 5.5]];
        let rep = pot.report(&pts, 1e-4 * 20.0).unwrap();
        let (chain, pde) = rep.pde_residuals.unwrap();
        assert!(chain <= 1e-6 && pde <= 1e-6, "{chain} {pde}");
        assert_eq!(rep.boundary_residual, Some(0.0));
    }

    #[test]
    fn field_on_the_boundary_is_not_null() {
        let (u, v) = dirs();
        let f = Field::new(parse("exp(-x^2-(y-1)^2)", &["x", "y"]).unwrap(), Box2::new([-6.0, -6.0], [6.0, 8.0])).unwrap();
        let r = potentials_from_null_constant(&f, u, v, &QuadOptions::default());
        assert!(matches!(r, Err(GaugeError::NotNull { .. })));
    }

    #[test]
    fn zero_field_has_zero_potentials() {
        let (u, v) = dirs();
        let f = Field::new(Expr::constant(0.0, &["x", "y"]).unwrap(), Box2::new([-1.0, 0.0], [1.0, 1.0])).unwrap();
        let pot = potentials_from_null_constant(&f, u, v, &QuadOptions::default()).unwrap();
        assert_eq!(pot.phi(&[0.2, 0.5]).unwrap(), 0.0);
    }
}
