use crate::expr::{parse, EvalError, Expr};
use crate::geometry::{perp, Box2, Box3};

use super::flat::Coefficients;
use super::validate::{not_applicable, Tally};
use super::{ill_formed, lattice, require_vars, Assumption, AssumptionReport, Field, SceneError, SceneKind, EPS_COND, MIN_LATTICE};

const VARS: [&str; 2] = ["x1", "x2"];

/// What a hyperplane scene carries as its unknown.
#[derive(Debug, Clone, PartialEq)]
pub enum HyperContent {
    /// f(x′, x3) = f̃(x′).
    Profile(Field<2>),
    /// A general f(x1, x2, x3).
    Field(Field<3>),
}

/// Gliding on the plane x3 = 0 in ℝ³ for one fixed direction θ0, with
/// u = (λ_u θ0, √(1−λ_u²)) and v = (λ_v θ0, √(1−λ_v²)).
#[derive(Debug, Clone, PartialEq)]
pub struct HyperplaneScene {
    lambda_u: Expr,
    lambda_v: Expr,
    dlu: Expr,
    dlv: Expr,
    theta0: [f64; 2],
    content: HyperContent,
    domain: Box2,
}

impl HyperplaneScene {
    /// `lambda_u`, `lambda_v` are expressions in (x1, x2). `domain` is the
    /// reconstruction box in x′.
    pub fn new(lambda_u: Expr, lambda_v: Expr, theta0: [f64; 2], content: HyperContent, domain: Box2) -> Result<Self, SceneError> {
        let lambda_u = lambda_u.rebind(&VARS)?;
        let lambda_v = lambda_v.rebind(&VARS)?;
        if !domain.is_valid() || !(0..2).all(|i| domain.lo[i].is_finite() && domain.hi[i].is_finite()) {
            return Err(ill_formed("reconstruction box must be finite with lo < hi"));
        }
        if !theta0.iter().all(|c| c.is_finite()) {
            return Err(ill_formed("theta0 must be finite"));
        }
        match &content {
            HyperContent::Profile(f) => require_vars("profile", f.expr(), &VARS)?,
            HyperContent::Field(f) => require_vars("field", f.expr(), &["x1", "x2", "x3"])?,
        }
        let dir = [
            Expr::constant(theta0[0], &VARS)?,
            Expr::constant(theta0[1], &VARS)?,
        ];
        Ok(HyperplaneScene {
            dlu: lambda_u.directional(&dir)?,
            dlv: lambda_v.directional(&dir)?,
            lambda_u,
            lambda_v,
            theta0,
            content,
            domain,
        })
    }

    pub fn parse(lambda_u: &str, lambda_v: &str, theta0: [f64; 2], content: HyperContent, domain: Box2) -> Result<Self, SceneError> {
        HyperplaneScene::new(parse(lambda_u, &VARS)?, parse(lambda_v, &VARS)?, theta0, content, domain)
    }

    /// Profile-mode scene from source strings.
    pub fn with_profile(lambda_u: &str, lambda_v: &str, theta0: [f64; 2], profile: &str, support: Box2, domain: Box2) -> Result<Self, SceneError> {
        let f = Field::new(parse(profile, &VARS)?, support)?;
        HyperplaneScene::parse(lambda_u, lambda_v, theta0, HyperContent::Profile(f), domain)
    }

    pub fn theta0(&self) -> [f64; 2] {
        self.theta0
    }

    /// Unit normal to θ0 within the plane (θ0 rotated by +90°).
    pub fn theta_perp(&self) -> [f64; 2] {
        perp(self.theta0)
    }

    pub fn content(&self) -> &HyperContent {
        &self.content
    }

    pub fn profile(&self) -> Option<&Field<2>> {
        match &self.content {
            HyperContent::Profile(f) => Some(f),
            HyperContent::Field(_) => None,
        }
    }

    pub fn domain(&self) -> &Box2 {
        &self.domain
    }

    pub fn lambda_u_expr(&self) -> &Expr {
        &self.lambda_u
    }

    pub fn lambda_v_expr(&self) -> &Expr {
        &self.lambda_v
    }

    /// Point x′ = s·θ0 + c·θ0⊥ on the line with offset `c`.
    pub fn line_point(&self, c: f64, s: f64) -> [f64; 2] {
        let n = self.theta_perp();
        [s * self.theta0[0] + c * n[0], s * self.theta0[1] + c * n[1]]
    }

    /// Coordinates (offset, position) of x′ relative to θ0.
    pub fn line_coords(&self, p: [f64; 2]) -> (f64, f64) {
        let n = self.theta_perp();
        (p[0] * n[0] + p[1] * n[1], p[0] * self.theta0[0] + p[1] * self.theta0[1])
    }

    pub fn lambda_u(&self, p: [f64; 2]) -> Result<f64, EvalError> {
        self.lambda_u.eval(&p)
    }

    pub fn lambda_v(&self, p: [f64; 2]) -> Result<f64, EvalError> {
        self.lambda_v.eval(&p)
    }

    /// u(x′, θ0) in ℝ³.
    pub fn u(&self, p: [f64; 2]) -> Result<[f64; 3], EvalError> {
        let l = self.lambda_u(p)?;
        Ok([l * self.theta0[0], l * self.theta0[1], (1.0 - l * l).sqrt()])
    }

    pub fn v(&self, p: [f64; 2]) -> Result<[f64; 3], EvalError> {
        let l = self.lambda_v(p)?;
        Ok([l * self.theta0[0], l * self.theta0[1], (1.0 - l * l).sqrt()])
    }

    /// α = 1/λ_u + 1/λ_v, β = 1 − 1/λ_v and their θ0-derivatives.
    pub fn coefficients(&self, p: [f64; 2]) -> Result<Coefficients, EvalError> {
        let (lu, lv) = (self.lambda_u(p)?, self.lambda_v(p)?);
        let (dlu, dlv) = (self.dlu.eval(&p)?, self.dlv.eval(&p)?);
        Ok(Coefficients {
            alpha: 1.0 / lu + 1.0 / lv,
            beta: 1.0 - 1.0 / lv,
            dalpha: -dlu / (lu * lu) - dlv / (lv * lv),
            dbeta: dlv / (lv * lv),
            zeta_factor: dlu / (lu * lu),
        })
    }

    /// True when neither λ depends on x′.
    pub fn is_constant(&self) -> bool {
        (0..2).all(|i| !self.lambda_u.depends_on(i) && !self.lambda_v.depends_on(i))
    }

    fn support_box(&self) -> Box2 {
        match &self.content {
            HyperContent::Profile(f) => *f.bbox(),
            HyperContent::Field(f) => {
                let b: &Box3 = f.bbox();
                Box2::new([b.lo[0], b.lo[1]], [b.hi[0], b.hi[1]])
            }
        }
    }

    pub fn validate(&self, n: usize) -> Result<AssumptionReport, SceneError> {
        if n < MIN_LATTICE {
            return Err(SceneError::LatticeTooCoarse { got: n });
        }
        let mut theta = Tally::new(Assumption::ThetaUnit);
        let norm = (self.theta0[0].powi(2) + self.theta0[1].powi(2)).sqrt();
        theta.record(&self.theta0, 1e-12 - (norm - 1.0).abs());

        let s = self.support_box();
        let lo = [s.lo[0].min(self.domain.lo[0]), s.lo[1].min(self.domain.lo[1])];
        let hi = [s.hi[0].max(self.domain.hi[0]), s.hi[1].max(self.domain.hi[1])];
        let finite = (0..2).all(|i| lo[i].is_finite() && hi[i].is_finite());
        let (lo, hi) = if finite { (lo, hi) } else { (self.domain.lo, self.domain.hi) };
        let mut sign_u = Tally::new(Assumption::A2SignU);
        let mut sign_v = Tally::new(Assumption::A2SignV);
        for x1 in lattice(lo[0], hi[0], n) {
            for x2 in lattice(lo[1], hi[1], n) {
                let p = [x1, x2];
                let (lu, lv) = (self.lambda_u(p)?, self.lambda_v(p)?);
                sign_u.record(&p, (-lu).min(1.0 + lu));
                sign_v.record(&p, lv.min(1.0 - lv));
            }
        }
        let mut checks = vec![theta.finish(), sign_u.finish(), sign_v.finish()];

        match &self.content {
            HyperContent::Profile(f) => {
                let mut nondeg = Tally::new(Assumption::A2Nondegenerate);
                for x1 in lattice(self.domain.lo[0], self.domain.hi[0], n) {
                    for x2 in lattice(self.domain.lo[1], self.domain.hi[1], n) {
                        let p = [x1, x2];
                        nondeg.record(&p, self.coefficients(p)?.denominator().abs() - EPS_COND);
                    }
                }
                checks.push(nondeg.finish());
                checks.push(box_edge_check(f, n)?);
            }
            HyperContent::Field(_) => checks.push(not_applicable(Assumption::A2Nondegenerate)),
        }

        let mut b3 = Tally::new(Assumption::B3Constant);
        b3.record(&[], if self.is_constant() { 1.0 } else { -1.0 });
        checks.push(b3.finish());
        Ok(AssumptionReport {
            kind: SceneKind::Hyperplane,
            checks,
        })
    }
}

/// The profile must be numerically zero on the boundary of its box.
fn box_edge_check(f: &Field<2>, n: usize) -> Result<super::Check, SceneError> {
    let b = f.bbox();
    let m = n.min(MIN_LATTICE);
    let mut max = 0.0_f64;
    for x1 in lattice(b.lo[0], b.hi[0], m) {
        for x2 in lattice(b.lo[1], b.hi[1], m) {
            max = max.max(f.expr().eval(&[x1, x2])?.abs());
        }
    }
    let mut edge = 0.0_f64;
    for t in lattice(0.0, 1.0, n) {
        let x1 = b.lo[0] + t * b.width(0);
        let x2 = b.lo[1] + t * b.width(1);
        for p in [[x1, b.lo[1]], [x1, b.hi[1]], [b.lo[0], x2], [b.hi[0], x2]] {
            edge = edge.max(f.expr().eval(&p)?.abs());
        }
    }
    let mut t = Tally::new(Assumption::CompactSupport);
    let margin = if max == 0.0 { 1.0 } else { 1e-12 - edge / max };
    t.record(&[], if margin == 0.0 { f64::MIN_POSITIVE } else { margin });
    Ok(t.finish())
}
