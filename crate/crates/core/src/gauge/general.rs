use rayon::prelude::*;

use crate::expr::{EvalError, Expr};
use crate::geometry::Box2;
use crate::quad::{integrate, QuadOptions};
use crate::scene::{lattice, Curve, CurveScene, Field, FlatScene2D, VectorField2, DEFAULT_LATTICE};
use crate::transform::{hwt_curve_field, hwt_flat2d_field, sweep, Axis, DataGrid, TransformError};

use super::constant::check_vanishes_on_axis;
use super::{directional_fd, GaugeError, GaugeReport, BOUNDARY_TOL, CLOSED_TOL, DET_MIN, DIV_TOL, NULL_TOL, STRAIGHT_TOL};

type FieldFn<'a> = &'a (dyn Fn(&[f64; 2]) -> Result<f64, EvalError> + Sync);

/// `n × n` points covering `bbox`.
pub fn box_lattice(bbox: &Box2, n: usize) -> Vec<[f64; 2]> {
    let ys: Vec<f64> = lattice(bbox.lo[1], bbox.hi[1], n).collect();
    lattice(bbox.lo[0], bbox.hi[0], n)
        .flat_map(|x| ys.iter().map(move |&y| [x, y]))
        .collect()
}

/// R f over an (x, d) grid with the flat scene's boundary directions.
pub fn flat_forward_sweep(scene: &FlatScene2D, f: FieldFn<'_>, bbox: &Box2, xs: Axis, ds: Axis, opts: &QuadOptions) -> Result<DataGrid, GaugeError> {
    let fwd = |x: f64, d: f64| -> Result<f64, TransformError> { Ok(hwt_flat2d_field(scene, f, bbox, x, d, opts)?.total()) };
    Ok(sweep(&fwd, xs, ds)?)
}

/// R f over a (t0, d) grid for gliding along the scene's curve. Nodes whose
/// glide would leave the parameter range are recorded as 0.
pub fn curve_forward_sweep(scene: &CurveScene, f: FieldFn<'_>, bbox: &Box2, ts: Axis, ds: Axis, opts: &QuadOptions) -> Result<DataGrid, GaugeError> {
    let hi = scene.curve().range().1;
    let fwd = |t: f64, d: f64| -> Result<f64, TransformError> {
        if t + d > hi {
            return Ok(0.0);
        }
        Ok(hwt_curve_field(scene, f, bbox, t, d, opts)?.total())
    };
    Ok(sweep(&fwd, ts, ds)?)
}

pub(crate) fn first_violation(grid: &DataGrid) -> Result<(), GaugeError> {
    for i in 0..grid.x.n {
        for j in 0..grid.d.n {
            let value = grid.get(i, j);
            if !(value.abs() <= NULL_TOL) {
                return Err(GaugeError::NotNull {
                    x: grid.x.at(i),
                    d: grid.d.at(j),
                    value,
                });
            }
        }
    }
    Ok(())
}

fn det_expr(u: &VectorField2, v: &VectorField2) -> Result<Expr, GaugeError> {
    let [u1, u2] = u.components();
    let [v1, v2] = v.components();
    Ok(u1.mul(v2)?.sub(&u2.mul(v1)?)?)
}

fn det_at(u: &VectorField2, v: &VectorField2, p: &[f64; 2]) -> Result<f64, EvalError> {
    let (a, b) = (u.eval(p)?, v.eval(p)?);
    Ok(a[0] * b[1] - a[1] * b[0])
}

fn check_frame(u: &VectorField2, v: &VectorField2, bbox: &Box2) -> Result<(), GaugeError> {
    for p in box_lattice(bbox, 64) {
        let det = det_at(u, v, &p)?;
        if !(det.abs() >= DET_MIN) {
            return Err(GaugeError::SingularFrame { x: p[0], y: p[1], det });
        }
        let residual = u.straightness_residual(&p)?.max(v.straightness_residual(&p)?);
        if !(residual <= STRAIGHT_TOL) {
            return Err(GaugeError::ExtensionNotStraight { x: p[0], y: p[1], residual });
        }
    }
    Ok(())
}

fn require_finite(bbox: &Box2) -> Result<(), GaugeError> {
    if !(bbox.is_valid() && (0..2).all(|i| bbox.lo[i].is_finite() && bbox.hi[i].is_finite())) {
        return Err(GaugeError::InvalidInput("box must be finite with lo < hi".into()));
    }
    Ok(())
}

/// f = P_u[det⁻¹ P_v φ] together with the reversed ordering P_v[det⁻¹ P_u φ].
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralGauge {
    pub f: Expr,
    pub f_alt: Expr,
    pub det: Expr,
}

impl GeneralGauge {
    fn build(phi: &Expr, u: &VectorField2, v: &VectorField2) -> Result<Self, GaugeError> {
        let det = det_expr(u, v)?;
        let f = u.apply(&v.apply(phi)?.div(&det)?)?;
        let f_alt = v.apply(&u.apply(phi)?.div(&det)?)?;
        Ok(GeneralGauge { f, f_alt, det })
    }

    /// max |f − f_alt| on an `n × n` lattice.
    pub fn ordering_discrepancy(&self, bbox: &Box2, n: usize) -> Result<f64, GaugeError> {
        let mut r = 0.0_f64;
        for p in box_lattice(bbox, n) {
            r = r.max((self.f.eval(&p)? - self.f_alt.eval(&p)?).abs());
        }
        Ok(r)
    }
}

/// Kernel generator for extended fields with gliding on y = 0. `bbox` holds
/// the support of φ; the frame is checked on it.
pub fn gauge_forward_general(phi: &Expr, u_ext: &VectorField2, v_ext: &VectorField2, bbox: &Box2) -> Result<GeneralGauge, GaugeError> {
    require_finite(bbox)?;
    check_frame(u_ext, v_ext, bbox)?;
    let phi = phi.rebind(&["x", "y"])?;
    check_vanishes_on_axis(&phi, bbox)?;
    GeneralGauge::build(&phi, u_ext, v_ext)
}

/// Kernel generator for gliding along `curve`; φ must vanish along it.
pub fn gauge_forward_curve(phi: &Expr, u_ext: &VectorField2, v_ext: &VectorField2, curve: &Curve, bbox: &Box2) -> Result<GeneralGauge, GaugeError> {
    require_finite(bbox)?;
    check_frame(u_ext, v_ext, bbox)?;
    let phi = phi.rebind(&["x", "y"])?;
    let (lo, hi) = curve.range();
    for t in lattice(lo, hi, DEFAULT_LATTICE) {
        let value = phi.eval(&curve.point(t)?)?;
        if !(value.abs() <= BOUNDARY_TOL) {
            return Err(GaugeError::BoundaryNonvanishing { at: t, value });
        }
    }
    GeneralGauge::build(&phi, u_ext, v_ext)
}

/// max over `points` of |div u(p)·∫₀^∞ f(p + t u(p)) dt − div v(p)·∫₀^∞ f(p + t v(p)) dt|.
pub fn check_div_condition(f: &Field<2>, u_ext: &VectorField2, v_ext: &VectorField2, points: &[[f64; 2]], opts: &QuadOptions) -> Result<f64, GaugeError> {
    if f.is_zero() {
        return Ok(0.0);
    }
    let rows: Vec<Result<f64, GaugeError>> = points
        .par_iter()
        .map(|p| {
            let (du, dv) = (u_ext.div(p)?, v_ext.div(p)?);
            let a = if du == 0.0 { 0.0 } else { du * f.ray_integral(p, &u_ext.eval(p)?, opts)? };
            let b = if dv == 0.0 { 0.0 } else { dv * f.ray_integral(p, &v_ext.eval(p)?, opts)? };
            Ok((a - b).abs())
        })
        .collect();
    rows.into_iter().try_fold(0.0_f64, |m, r| Ok(m.max(r?)))
}

/// Where the gliding happens.
#[derive(Debug, Clone, Copy)]
pub enum GaugeSetting<'a> {
    Flat(&'a FlatScene2D),
    Curve(&'a CurveScene),
}

/// Knobs for [`potential_from_null_general`].
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialOptions {
    /// Used for every nested integral.
    pub quad: QuadOptions,
    /// Points per side of the divergence and closedness lattices.
    pub lattice: usize,
    /// Step of the finite-difference curl; `None` means 1e-4 times the box width.
    pub curl_step: Option<f64>,
    /// Step of the PDE check; `None` means 1e-4 times the box width.
    pub fd_step: Option<f64>,
    /// Where the PDE identities and path independence are checked.
    pub check_points: Vec<[f64; 2]>,
}

impl Default for PotentialOptions {
    fn default() -> Self {
        PotentialOptions {
            quad: QuadOptions::default().with_abs_tol(1e-13).with_rel_tol(1e-13),
            lattice: 12,
            curl_step: None,
            fd_step: None,
            check_points: Vec::new(),
        }
    }
}

/// A potential rebuilt from a null function: ψ_u, ψ_v by ray quadrature,
/// ω = (v₂ψ_v − u₂ψ_u)dx + (u₁ψ_u − v₁ψ_v)dy and φ = ∫ω from a base point.
#[derive(Debug, Clone)]
pub struct GeneralPotential {
    f: Field<2>,
    u: VectorField2,
    v: VectorField2,
    /// −1 for gliding on a line, +1 for gliding on a curve.
    sign: f64,
    base: [f64; 2],
    opts: QuadOptions,
}

impl GeneralPotential {
    pub fn base(&self) -> [f64; 2] {
        self.base
    }

    pub fn psi_u(&self, p: &[f64; 2]) -> Result<f64, GaugeError> {
        Ok(self.sign * self.f.ray_integral(p, &self.u.eval(p)?, &self.opts)?)
    }

    pub fn psi_v(&self, p: &[f64; 2]) -> Result<f64, GaugeError> {
        Ok(self.sign * self.f.ray_integral(p, &self.v.eval(p)?, &self.opts)?)
    }

    pub fn omega(&self, p: &[f64; 2]) -> Result<[f64; 2], GaugeError> {
        if self.f.is_zero() {
            return Ok([0.0, 0.0]);
        }
        let (u, v) = (self.u.eval(p)?, self.v.eval(p)?);
        let (pu, pv) = (self.psi_u(p)?, self.psi_v(p)?);
        Ok([v[1] * pv - u[1] * pu, u[0] * pu - v[0] * pv])
    }

    fn leg(&self, a: [f64; 2], b: [f64; 2]) -> Result<f64, GaugeError> {
        let axis = if a[0] != b[0] { 0 } else { 1 };
        if a[axis] == b[axis] {
            return Ok(0.0);
        }
        let (lo, hi, sign) = if a[axis] < b[axis] { (a[axis], b[axis], 1.0) } else { (b[axis], a[axis], -1.0) };
        let r = integrate(
            |s| {
                let mut q = a;
                q[axis] = s;
                Ok::<f64, GaugeError>(self.omega(&q)?[axis])
            },
            lo,
            hi,
            &self.opts.with_pieces(4),
        )?;
        Ok(sign * r.value)
    }

    /// φ along the path base → (x, base_y) → (x, y).
    pub fn phi(&self, p: &[f64; 2]) -> Result<f64, GaugeError> {
        let corner = [p[0], self.base[1]];
        Ok(self.leg(self.base, corner)? + self.leg(corner, *p)?)
    }

    /// φ along the path base → (base_x, y) → (x, y).
    pub fn phi_alt(&self, p: &[f64; 2]) -> Result<f64, GaugeError> {
        let corner = [self.base[0], p[1]];
        Ok(self.leg(self.base, corner)? + self.leg(corner, *p)?)
    }

    pub fn det(&self, p: &[f64; 2]) -> Result<f64, GaugeError> {
        Ok(det_at(&self.u, &self.v, p)?)
    }

    /// max |∂₁ω₂ − ∂₂ω₁| by central differences with step `h`.
    pub fn closedness_residual(&self, points: &[[f64; 2]], h: f64) -> Result<f64, GaugeError> {
        let rows: Vec<Result<f64, GaugeError>> = points
            .par_iter()
            .map(|p| {
                let dx = (self.omega(&[p[0] + h, p[1]])?[1] - self.omega(&[p[0] - h, p[1]])?[1]) / (2.0 * h);
                let dy = (self.omega(&[p[0], p[1] + h])?[0] - self.omega(&[p[0], p[1] - h])?[0]) / (2.0 * h);
                Ok((dx - dy).abs())
            })
            .collect();
        rows.into_iter().try_fold(0.0_f64, |m, r| Ok(m.max(r?)))
    }

    /// max |P_u[det⁻¹P_vφ] − s f| and max |P_v[det⁻¹P_uφ] − s f| by finite
    /// differences, where s = +1 on a line and −1 on a curve.
    pub fn pde_residuals(&self, points: &[[f64; 2]], h: f64) -> Result<(f64, f64), GaugeError> {
        let phi = |q: &[f64; 2]| self.phi(q);
        let rows: Vec<Result<(f64, f64), GaugeError>> = points
            .par_iter()
            .map(|p| {
                let target = -self.sign * self.f.eval(p)?;
                let inner_v = |q: &[f64; 2]| Ok(directional_fd(&phi, q, &self.v.eval(q)?, h)? / self.det(q)?);
                let inner_u = |q: &[f64; 2]| Ok(directional_fd(&phi, q, &self.u.eval(q)?, h)? / self.det(q)?);
                let a = directional_fd(&inner_v, p, &self.u.eval(p)?, h)?;
                let b = directional_fd(&inner_u, p, &self.v.eval(p)?, h)?;
                Ok(((a - target).abs(), (b - target).abs()))
            })
            .collect();
        rows.into_iter().try_fold((0.0_f64, 0.0_f64), |m, r| {
            let (a, b) = r?;
            Ok((m.0.max(a), m.1.max(b)))
        })
    }

    /// max |φ_A − φ_B| between the two staircase paths.
    pub fn path_discrepancy(&self, points: &[[f64; 2]]) -> Result<f64, GaugeError> {
        let rows: Vec<Result<f64, GaugeError>> = points.par_iter().map(|p| Ok((self.phi(p)? - self.phi_alt(p)?).abs())).collect();
        rows.into_iter().try_fold(0.0_f64, |m, r| Ok(m.max(r?)))
    }
}

fn check_boundary_fields(a: [f64; 2], b: [f64; 2], what: &str, at: f64) -> Result<(), GaugeError> {
    if (a[0] - b[0]).abs() > 1e-9 || (a[1] - b[1]).abs() > 1e-9 {
        return Err(GaugeError::InvalidInput(format!("{what} extension disagrees with the scene at {at}")));
    }
    Ok(())
}

/// Rebuild a potential from a null function `f` with extended fields
/// `u_ext`, `v_ext` that agree with the scene's directions on the gliding set.
///
/// Checks, in order: support placement, divergence compatibility on the
/// lattice, nullity on a spot sweep, closedness of ω. The PDE identities and
/// path independence are measured at `opts.check_points`.
pub fn potential_from_null_general(
    f: &Field<2>,
    u_ext: &VectorField2,
    v_ext: &VectorField2,
    setting: GaugeSetting<'_>,
    opts: &PotentialOptions,
) -> Result<(GeneralPotential, GaugeReport), GaugeError> {
    let bbox = *f.bbox();
    require_finite(&bbox)?;
    let q = &opts.quad;
    let width = bbox.width(0);
    let grid = box_lattice(&bbox, opts.lattice.max(2));
    let eval = |p: &[f64; 2]| f.eval(p);

    let (sign, base, spot) = match setting {
        GaugeSetting::Flat(scene) => {
            if !(bbox.lo[1] >= 1e-6) {
                return Err(GaugeError::SupportTouchesBoundary { y_min: bbox.lo[1] });
            }
            let reach = bbox.hi[1] + width;
            let xs = Axis::new(bbox.lo[0] - reach, bbox.hi[0] + reach, 13)?;
            for x in xs.values() {
                check_boundary_fields(scene.u(x)?, u_ext.eval(&[x, 0.0])?, "u", x)?;
                check_boundary_fields(scene.v(x)?, v_ext.eval(&[x, 0.0])?, "v", x)?;
            }
            let spot = flat_forward_sweep(scene, &eval, &bbox, xs, Axis::new(0.0, width, 7)?, q)?;
            (-1.0, [bbox.lo[0] - 1.0, 0.0], spot)
        }
        GaugeSetting::Curve(scene) => {
            let curve = scene.curve();
            let (lo, hi) = curve.range();
            for t in lattice(lo, hi, DEFAULT_LATTICE) {
                let value = f.eval(&curve.point(t)?)?;
                if !(value.abs() <= BOUNDARY_TOL) {
                    return Err(GaugeError::BoundaryNonvanishing { at: t, value });
                }
            }
            let ts = Axis::new(lo, hi, 13)?;
            for t in ts.values() {
                let g = curve.point(t)?;
                check_boundary_fields(scene.u(t)?, u_ext.eval(&g)?, "u", t)?;
                check_boundary_fields(scene.v(t)?, v_ext.eval(&g)?, "v", t)?;
            }
            let spot = curve_forward_sweep(scene, &eval, &bbox, ts, Axis::new(0.0, 0.5 * (hi - lo), 7)?, q)?;
            (1.0, curve.point(lo)?, spot)
        }
    };

    let div = check_div_condition(f, u_ext, v_ext, &grid, q)?;
    if !(div <= DIV_TOL) {
        return Err(GaugeError::DivConditionViolated { residual: div });
    }
    first_violation(&spot)?;

    let pot = GeneralPotential {
        f: f.clone(),
        u: u_ext.clone(),
        v: v_ext.clone(),
        sign,
        base,
        opts: *q,
    };
    let closed = pot.closedness_residual(&grid, opts.curl_step.unwrap_or(1e-4 * width))?;
    if !(closed <= CLOSED_TOL) {
        return Err(GaugeError::NotClosed { residual: closed });
    }

    let on_boundary: Vec<[f64; 2]> = match setting {
        GaugeSetting::Flat(_) => lattice(bbox.lo[0], bbox.hi[0], 5).map(|x| [x, 0.0]).collect(),
        GaugeSetting::Curve(scene) => {
            let (lo, hi) = scene.curve().range();
            lattice(lo, hi, 5).map(|t| scene.curve().point(t)).collect::<Result<_, _>>()?
        }
    };
    let rows: Vec<Result<f64, GaugeError>> = on_boundary.par_iter().map(|p| Ok(pot.phi(p)?.abs())).collect();
    let boundary = rows.into_iter().try_fold(0.0_f64, |m, r: Result<f64, GaugeError>| Ok::<f64, GaugeError>(m.max(r?)))?;

    let mut report = GaugeReport {
        max_forward_residual: Some(spot.max_abs()),
        closedness_residual: Some(closed),
        boundary_residual: Some(boundary),
        div_residual: Some(div),
        ..Default::default()
    };
    if !opts.check_points.is_empty() {
        let h = opts.fd_step.unwrap_or(1e-4 * width);
        report.pde_residuals = Some(pot.pde_residuals(&opts.check_points, h)?);
        report.path_discrepancy = Some(pot.path_discrepancy(&opts.check_points)?);
    }
    Ok((pot, report))
}
