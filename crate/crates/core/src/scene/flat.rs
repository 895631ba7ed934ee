use crate::expr::{parse, EvalError, Expr};
use crate::geometry::Box2;

use super::validate::{not_applicable, Tally};
use super::{
    check_interval, lattice, require_vars, Assumption, AssumptionReport, Field, Profile, SceneError,
    SceneKind, VectorField2, EPS_COND, MIN_LATTICE,
};

/// What a flat scene carries as its unknown.
#[derive(Debug, Clone, PartialEq)]
pub enum FlatContent {
    /// f(x, y) = f̃(x).
    Profile(Profile),
    /// A general compactly supported f(x, y).
    Field(Field<2>),
}

/// Gliding along the x-axis in the plane with direction fields
/// u = (u1, √(1−u1²)), v = (v1, √(1−v1²)) attached to boundary points.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatScene2D {
    u1: Expr,
    v1: Expr,
    du1: Expr,
    dv1: Expr,
    content: FlatContent,
    domain: (f64, f64),
    u_ext: Option<VectorField2>,
    v_ext: Option<VectorField2>,
}

impl FlatScene2D {
    /// `u1`, `v1` are expressions in `x`; `domain` is the reconstruction interval.
    pub fn new(u1: Expr, v1: Expr, content: FlatContent, domain: (f64, f64)) -> Result<Self, SceneError> {
        let u1 = u1.rebind(&["x"])?;
        let v1 = v1.rebind(&["x"])?;
        require_vars("u1", &u1, &["x"])?;
        require_vars("v1", &v1, &["x"])?;
        check_interval("reconstruction domain", domain)?;
        if let FlatContent::Field(f) = &content {
            require_vars("field", f.expr(), &["x", "y"])?;
        }
        Ok(FlatScene2D {
            du1: u1.derivative("x")?,
            dv1: v1.derivative("x")?,
            u1,
            v1,
            content,
            domain,
            u_ext: None,
            v_ext: None,
        })
    }

    pub fn parse(u1: &str, v1: &str, content: FlatContent, domain: (f64, f64)) -> Result<Self, SceneError> {
        FlatScene2D::new(parse(u1, &["x"])?, parse(v1, &["x"])?, content, domain)
    }

    /// Profile-mode scene in one call.
    pub fn with_profile(u1: &str, v1: &str, profile: &str, support: (f64, f64), domain: (f64, f64)) -> Result<Self, SceneError> {
        FlatScene2D::parse(u1, v1, FlatContent::Profile(Profile::parse(profile, support)?), domain)
    }

    pub fn with_extensions(mut self, u_ext: VectorField2, v_ext: VectorField2) -> Self {
        self.u_ext = Some(u_ext);
        self.v_ext = Some(v_ext);
        self
    }

    /// The same geometry carrying a different unknown.
    pub fn with_content(&self, content: FlatContent) -> Self {
        FlatScene2D {
            content,
            ..self.clone()
        }
    }

    pub fn u1_expr(&self) -> &Expr {
        &self.u1
    }

    pub fn v1_expr(&self) -> &Expr {
        &self.v1
    }

    pub fn content(&self) -> &FlatContent {
        &self.content
    }

    pub fn profile(&self) -> Option<&Profile> {
        match &self.content {
            FlatContent::Profile(p) => Some(p),
            FlatContent::Field(_) => None,
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn extensions(&self) -> Option<(&VectorField2, &VectorField2)> {
        Some((self.u_ext.as_ref()?, self.v_ext.as_ref()?))
    }

    /// The x-extent of the unknown's support.
    pub fn support_x(&self) -> (f64, f64) {
        match &self.content {
            FlatContent::Profile(p) => p.support(),
            FlatContent::Field(f) => (f.bbox().lo[0], f.bbox().hi[0]),
        }
    }

    /// Box containing the unknown's support (profile mode: unbounded above).
    pub fn support_box(&self) -> Box2 {
        match &self.content {
            FlatContent::Profile(p) => Box2::new([p.support().0, 0.0], [p.support().1, f64::INFINITY]),
            FlatContent::Field(f) => *f.bbox(),
        }
    }

    /// True when neither u1 nor v1 depends on x.
    pub fn is_constant(&self) -> bool {
        !self.u1.depends_on(0) && !self.v1.depends_on(0)
    }

    pub fn u1(&self, x: f64) -> Result<f64, EvalError> {
        self.u1.eval(&[x])
    }

    pub fn v1(&self, x: f64) -> Result<f64, EvalError> {
        self.v1.eval(&[x])
    }

    pub fn du1(&self, x: f64) -> Result<f64, EvalError> {
        self.du1.eval(&[x])
    }

    pub fn dv1(&self, x: f64) -> Result<f64, EvalError> {
        self.dv1.eval(&[x])
    }

    pub fn u(&self, x: f64) -> Result<[f64; 2], EvalError> {
        let u1 = self.u1(x)?;
        Ok([u1, (1.0 - u1 * u1).sqrt()])
    }

    pub fn v(&self, x: f64) -> Result<[f64; 2], EvalError> {
        let v1 = self.v1(x)?;
        Ok([v1, (1.0 - v1 * v1).sqrt()])
    }

    /// (α, β, α′, β′) at x with α = 1/u1 + 1/v1 and β = 1 − 1/v1.
    pub fn coefficients(&self, x: f64) -> Result<Coefficients, EvalError> {
        let (u1, v1, du1, dv1) = (self.u1(x)?, self.v1(x)?, self.du1(x)?, self.dv1(x)?);
        Ok(Coefficients {
            alpha: 1.0 / u1 + 1.0 / v1,
            beta: 1.0 - 1.0 / v1,
            dalpha: -du1 / (u1 * u1) - dv1 / (v1 * v1),
            dbeta: dv1 / (v1 * v1),
            zeta_factor: du1 / (u1 * u1),
        })
    }

    pub fn validate(&self, n: usize) -> Result<AssumptionReport, SceneError> {
        if n < MIN_LATTICE {
            return Err(SceneError::LatticeTooCoarse { got: n });
        }
        let (sa, sb) = self.support_x();
        let (lo, hi) = (sa.min(self.domain.0), sb.max(self.domain.1));
        let mut sign_u = Tally::new(Assumption::A1SignU);
        let mut sign_v = Tally::new(Assumption::A1SignV);
        for x in lattice(lo, hi, n) {
            let u1 = self.u1(x)?;
            let v1 = self.v1(x)?;
            sign_u.record(&[x], (-u1).min(1.0 + u1));
            sign_v.record(&[x], v1.min(1.0 - v1));
        }
        let mut checks = vec![sign_u.finish(), sign_v.finish()];

        match &self.content {
            FlatContent::Profile(p) => {
                let mut nondeg = Tally::new(Assumption::A1Nondegenerate);
                for x in lattice(self.domain.0, self.domain.1, n) {
                    let c = self.coefficients(x)?;
                    nondeg.record(&[x], c.denominator().abs() - EPS_COND);
                }
                checks.push(nondeg.finish());
                checks.push(profile_edge_check(p, n)?);
            }
            FlatContent::Field(_) => checks.push(not_applicable(Assumption::A1Nondegenerate)),
        }

        let bbox = self.extension_box();
        checks.extend(extension_checks(
            self.extensions(),
            &bbox,
            n,
            |x| Ok((self.u(x)?, self.v(x)?)),
        )?);

        let mut b3 = Tally::new(Assumption::B3Constant);
        b3.record(&[], if self.is_constant() { 1.0 } else { -1.0 });
        checks.push(b3.finish());

        Ok(AssumptionReport {
            kind: SceneKind::Flat2d,
            checks,
        })
    }

    fn extension_box(&self) -> Box2 {
        let b = self.support_box();
        let (lo, hi) = (b.lo[0].min(self.domain.0), b.hi[0].max(self.domain.1));
        let top = if b.hi[1].is_finite() { b.hi[1] } else { hi - lo };
        Box2::new([lo, b.lo[1].max(0.0)], [hi, top])
    }
}

/// Inversion coefficients at a point of the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub alpha: f64,
    pub beta: f64,
    pub dalpha: f64,
    pub dbeta: f64,
    /// ζ / ∫f̃, i.e. u1′/u1².
    pub zeta_factor: f64,
}

impl Coefficients {
    /// α′β − β′α.
    pub fn denominator(&self) -> f64 {
        self.dalpha * self.beta - self.dbeta * self.alpha
    }
}

pub(super) fn profile_edge_check(p: &Profile, n: usize) -> Result<super::Check, SceneError> {
    let (max, edge) = p.edge_ratio(n)?;
    let mut t = Tally::new(Assumption::CompactSupport);
    let margin = if max == 0.0 { 1.0 } else { 1e-12 - edge / max };
    let (a, b) = p.support();
    t.record(&[a, b], if margin == 0.0 { f64::MIN_POSITIVE } else { margin });
    Ok(t.finish())
}

/// (B1) straightness and consistency with the boundary fields, and (B2) independence.
pub(super) fn extension_checks(
    ext: Option<(&VectorField2, &VectorField2)>,
    bbox: &Box2,
    n: usize,
    boundary: impl Fn(f64) -> Result<([f64; 2], [f64; 2]), EvalError>,
) -> Result<Vec<super::Check>, SceneError> {
    let mut b2 = Tally::new(Assumption::B2Independent);
    let Some((ue, ve)) = ext else {
        for x in lattice(bbox.lo[0], bbox.hi[0], n) {
            let (u, v) = boundary(x)?;
            b2.record(&[x, 0.0], (u[0] * v[1] - u[1] * v[0]).abs() - 1e-9);
        }
        return Ok(vec![
            not_applicable(Assumption::B1StraightU),
            not_applicable(Assumption::B1StraightV),
            b2.finish(),
        ]);
    };
    let mut b1u = Tally::new(Assumption::B1StraightU);
    let mut b1v = Tally::new(Assumption::B1StraightV);
    for x in lattice(bbox.lo[0], bbox.hi[0], n) {
        let (u, v) = boundary(x)?;
        let (eu, ev) = (ue.eval(&[x, 0.0])?, ve.eval(&[x, 0.0])?);
        let du = (eu[0] - u[0]).abs().max((eu[1] - u[1]).abs());
        let dv = (ev[0] - v[0]).abs().max((ev[1] - v[1]).abs());
        b1u.record(&[x, 0.0], 1e-9 - du);
        b1v.record(&[x, 0.0], 1e-9 - dv);
    }
    let ny = n.min(MIN_LATTICE);
    for x in lattice(bbox.lo[0], bbox.hi[0], ny) {
        for y in lattice(bbox.lo[1], bbox.hi[1], ny) {
            let p = [x, y];
            b1u.record(&p, 1e-6 - ue.straightness_residual(&p)?);
            b1v.record(&p, 1e-6 - ve.straightness_residual(&p)?);
            let (u, v) = (ue.eval(&p)?, ve.eval(&p)?);
            b2.record(&p, (u[0] * v[1] - u[1] * v[0]).abs() - 1e-9);
        }
    }
    Ok(vec![b1u.finish(), b1v.finish(), b2.finish()])
}
