use crate::expr::{parse, EvalError, Expr};
use crate::geometry::{dot, norm, perp};
use crate::interp::Hermite;
use crate::quad::{integrate, QuadOptions};

use super::flat::profile_edge_check;
use super::validate::Tally;
use super::{check_interval, ill_formed, lattice, Assumption, AssumptionReport, Profile, SceneError, SceneKind, EPS_COND, MIN_LATTICE};

/// Panels used for the cumulative arc-length table.
const ARC_PANELS: usize = 4096;
/// Lattice used to seed nearest-point searches.
const SEED_POINTS: usize = 2049;
const NEWTON_TOL: f64 = 1e-12;

/// A smooth planar curve, reparameterized by arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    raw: [Expr; 2],
    d1: [Expr; 2],
    d2: [Expr; 2],
    raw_range: (f64, f64),
    /// Arc length parameter → raw parameter; `None` when the raw
    /// parameterization already has unit speed.
    reparam: Option<Hermite>,
    range: (f64, f64),
    seeds: Vec<(f64, [f64; 2])>,
    tube_radius: f64,
}

/// Nearest-point frame of a point in the tube around a curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub t: f64,
    pub e: [f64; 2],
    pub e_perp: [f64; 2],
    pub dist: f64,
}

impl Curve {
    /// `gx`, `gy` are expressions in `t` over `raw_range`.
    pub fn new(gx: Expr, gy: Expr, raw_range: (f64, f64), tube_radius: f64) -> Result<Self, SceneError> {
        let gx = gx.rebind(&["t"])?;
        let gy = gy.rebind(&["t"])?;
        check_interval("curve parameter range", raw_range)?;
        if !(tube_radius.is_finite() && tube_radius > 0.0) {
            return Err(ill_formed("tube_radius must be positive"));
        }
        let d1 = [gx.derivative("t")?, gy.derivative("t")?];
        let d2 = [d1[0].derivative("t")?, d1[1].derivative("t")?];
        let mut curve = Curve {
            raw: [gx, gy],
            d1,
            d2,
            raw_range,
            reparam: None,
            range: raw_range,
            seeds: Vec::new(),
            tube_radius,
        };
        curve.build_reparam()?;
        curve.seeds = lattice(curve.range.0, curve.range.1, SEED_POINTS)
            .map(|t| Ok((t, curve.point(t)?)))
            .collect::<Result<_, EvalError>>()?;
        Ok(curve)
    }

    pub fn parse(gx: &str, gy: &str, raw_range: (f64, f64), tube_radius: f64) -> Result<Self, SceneError> {
        Curve::new(parse(gx, &["t"])?, parse(gy, &["t"])?, raw_range, tube_radius)
    }

    fn raw_speed(&self, tau: f64) -> Result<f64, EvalError> {
        Ok(norm(&[self.d1[0].eval(&[tau])?, self.d1[1].eval(&[tau])?]))
    }

    fn build_reparam(&mut self) -> Result<(), SceneError> {
        let (a, b) = self.raw_range;
        let h = (b - a) / ARC_PANELS as f64;
        let mut taus = Vec::with_capacity(ARC_PANELS + 1);
        let mut speeds = Vec::with_capacity(ARC_PANELS + 1);
        for i in 0..=ARC_PANELS {
            let tau = if i == ARC_PANELS { b } else { a + h * i as f64 };
            let s = self.raw_speed(tau)?;
            if !(s > 0.0) {
                return Err(ill_formed(format!("curve has zero speed at t = {tau}")));
            }
            taus.push(tau);
            speeds.push(s);
        }
        if speeds.iter().all(|s| (s - 1.0).abs() <= 1e-12) {
            self.reparam = None;
            self.range = self.raw_range;
            return Ok(());
        }
        let mut arc = Vec::with_capacity(ARC_PANELS + 1);
        arc.push(a);
        for i in 0..ARC_PANELS {
            let mid = self.raw_speed(0.5 * (taus[i] + taus[i + 1]))?;
            let panel = (taus[i + 1] - taus[i]) / 6.0 * (speeds[i] + 4.0 * mid + speeds[i + 1]);
            arc.push(arc[i] + panel);
        }
        let slopes = speeds.iter().map(|s| 1.0 / s).collect();
        self.range = (a, arc[ARC_PANELS]);
        self.reparam = Some(Hermite::new(arc, taus, slopes).map_err(|e| ill_formed(e.to_string()))?);
        Ok(())
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    pub fn tube_radius(&self) -> f64 {
        self.tube_radius
    }

    pub fn is_reparameterized(&self) -> bool {
        self.reparam.is_some()
    }

    /// Raw parameter at arc-length parameter `t`.
    pub fn tau(&self, t: f64) -> f64 {
        match &self.reparam {
            Some(h) => h.eval(t),
            None => t,
        }
    }

    pub fn point(&self, t: f64) -> Result<[f64; 2], EvalError> {
        let tau = self.tau(t);
        Ok([self.raw[0].eval(&[tau])?, self.raw[1].eval(&[tau])?])
    }

    /// Unit tangent γ̇(t).
    pub fn tangent(&self, t: f64) -> Result<[f64; 2], EvalError> {
        let tau = self.tau(t);
        let d = [self.d1[0].eval(&[tau])?, self.d1[1].eval(&[tau])?];
        let n = norm(&d);
        Ok([d[0] / n, d[1] / n])
    }

    /// γ̈(t) in the arc-length parameter.
    pub fn accel(&self, t: f64) -> Result<[f64; 2], EvalError> {
        let tau = self.tau(t);
        let d = [self.d1[0].eval(&[tau])?, self.d1[1].eval(&[tau])?];
        let dd = [self.d2[0].eval(&[tau])?, self.d2[1].eval(&[tau])?];
        let s2 = dot(&d, &d);
        let c = dot(&d, &dd);
        Ok([(dd[0] * s2 - d[0] * c) / (s2 * s2), (dd[1] * s2 - d[1] * c) / (s2 * s2)])
    }

    /// γ1(t) = γ(t)·γ̇(t).
    pub fn gamma1(&self, t: f64) -> Result<f64, EvalError> {
        Ok(dot(&self.point(t)?, &self.tangent(t)?))
    }

    /// γ1′(t) = 1 + γ(t)·γ̈(t).
    pub fn gamma1_prime(&self, t: f64) -> Result<f64, EvalError> {
        Ok(1.0 + dot(&self.point(t)?, &self.accel(t)?))
    }

    /// |dγ/dt| − 1 using the derivative of the reparameterization table.
    pub fn speed_residual(&self, t: f64) -> Result<f64, EvalError> {
        let tau = self.tau(t);
        let dtau = match &self.reparam {
            Some(h) => h.derivative(t),
            None => 1.0,
        };
        Ok(self.raw_speed(tau)? * dtau - 1.0)
    }

    /// Length of γ between the start of the range and parameter `t`.
    pub fn cumulative_length(&self, t: f64) -> Result<f64, SceneError> {
        let opts = QuadOptions::default().with_abs_tol(1e-12).with_rel_tol(1e-13);
        let r = integrate(|tau| self.raw_speed(tau), self.raw_range.0, self.tau(t), &opts)
            .map_err(|e| SceneError::Quadrature(e.to_string()))?;
        Ok(r.value)
    }

    fn stationarity(&self, t: f64, p: &[f64; 2]) -> Result<(f64, f64), EvalError> {
        let g = self.point(t)?;
        let r = [g[0] - p[0], g[1] - p[1]];
        Ok((dot(&r, &self.tangent(t)?), 1.0 + dot(&r, &self.accel(t)?)))
    }

    fn dist2(&self, t: f64, p: &[f64; 2]) -> Result<f64, EvalError> {
        let g = self.point(t)?;
        Ok((g[0] - p[0]).powi(2) + (g[1] - p[1]).powi(2))
    }

    /// Closest curve parameter to `p` with the tangent/normal frame there.
    pub fn nearest_point_frame(&self, p: [f64; 2]) -> Result<Frame, SceneError> {
        let outside = SceneError::OutsideTube { x: p[0], y: p[1] };
        let (best, _) = self
            .seeds
            .iter()
            .enumerate()
            .map(|(i, (_, g))| (i, (g[0] - p[0]).powi(2) + (g[1] - p[1]).powi(2)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("seed lattice is non-empty");
        let lo = self.seeds[best.saturating_sub(1)].0;
        let hi = self.seeds[(best + 1).min(self.seeds.len() - 1)].0;

        let mut t = self.seeds[best].0;
        let mut converged = false;
        for _ in 0..50 {
            let (f, df) = self.stationarity(t, &p)?;
            if f.abs() <= NEWTON_TOL {
                converged = true;
                break;
            }
            if !(df > 0.0) {
                break;
            }
            let next = t - f / df;
            if !(next >= lo && next <= hi) {
                break;
            }
            t = next;
        }
        if !converged {
            t = self.golden(lo, hi, &p)?;
            let (f, _) = self.stationarity(t, &p)?;
            let at_end = t <= self.range.0 + 1e-9 * (self.range.1 - self.range.0)
                || t >= self.range.1 - 1e-9 * (self.range.1 - self.range.0);
            if f.abs() > 1e-10 {
                return Err(if at_end { outside } else { SceneError::NewtonDivergence { x: p[0], y: p[1] } });
            }
        }
        let dist = self.dist2(t, &p)?.sqrt();
        if dist >= self.tube_radius {
            return Err(outside);
        }
        let e = self.tangent(t)?;
        Ok(Frame {
            t,
            e,
            e_perp: perp(e),
            dist,
        })
    }

    fn golden(&self, mut a: f64, mut b: f64, p: &[f64; 2]) -> Result<f64, EvalError> {
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - r * (b - a);
        let mut d = a + r * (b - a);
        let (mut fc, mut fd) = (self.dist2(c, p)?, self.dist2(d, p)?);
        for _ in 0..200 {
            if (b - a).abs() <= 1e-15 * (1.0 + a.abs()) {
                break;
            }
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - r * (b - a);
                fc = self.dist2(c, p)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + r * (b - a);
                fd = self.dist2(d, p)?;
            }
        }
        let mut t = 0.5 * (a + b);
        // A couple of Newton steps polish the bracketed minimizer.
        for _ in 0..3 {
            let (f, df) = self.stationarity(t, p)?;
            if f.abs() <= NEWTON_TOL || !(df > 0.0) {
                break;
            }
            let next = t - f / df;
            if next < self.range.0 || next > self.range.1 {
                break;
            }
            t = next;
        }
        Ok(t)
    }

    /// Worst violation of the pairwise separation condition on an `n`-point lattice.
    fn separation(&self, n: usize) -> Result<Tally, EvalError> {
        let pts: Vec<(f64, [f64; 2])> = lattice(self.range.0, self.range.1, n)
            .map(|t| Ok((t, self.point(t)?)))
            .collect::<Result<_, EvalError>>()?;
        let mut tally = Tally::new(Assumption::NoSelfIntersection);
        let mut worst = f64::INFINITY;
        let mut worst_at = [0.0, 0.0];
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                if (pts[j].0 - pts[i].0).abs() < self.tube_radius {
                    continue;
                }
                let d = ((pts[i].1[0] - pts[j].1[0]).powi(2) + (pts[i].1[1] - pts[j].1[1]).powi(2)).sqrt();
                let margin = d - 0.5 * self.tube_radius;
                if margin < worst {
                    worst = margin;
                    worst_at = [pts[i].0, pts[j].0];
                }
                if margin <= 0.0 {
                    tally.record(&[pts[i].0, pts[j].0], margin);
                }
            }
        }
        if worst > 0.0 {
            tally.record(&worst_at, if worst.is_finite() { worst } else { 1.0 });
        }
        Ok(tally)
    }
}

/// A curve scene with angle fields measured from the tangent and a profile.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveScene {
    curve: Curve,
    theta_u: Expr,
    theta_v: Expr,
    dtheta_u: Expr,
    dtheta_v: Expr,
    profile: Profile,
    domain: (f64, f64),
}

/// Inversion coefficients along the curve, with β = 1/v1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveCoefficients {
    pub alpha: f64,
    pub beta: f64,
    pub dalpha: f64,
    pub dbeta: f64,
    pub zeta_factor: f64,
    pub gamma1_prime: f64,
}

impl CurveCoefficients {
    /// α′(1 − γ1′β) + γ1′β′α.
    pub fn denominator(&self) -> f64 {
        self.dalpha * (1.0 - self.gamma1_prime * self.beta) + self.gamma1_prime * self.dbeta * self.alpha
    }
}

impl CurveScene {
    /// `theta_u`, `theta_v` are angle expressions in the arc-length parameter
    /// `t`, measured counter-clockwise from γ̇. `domain` is the reconstruction
    /// range of t and must lie inside the curve's range.
    pub fn new(curve: Curve, theta_u: Expr, theta_v: Expr, profile: Profile, domain: (f64, f64)) -> Result<Self, SceneError> {
        let theta_u = theta_u.rebind(&["t"])?;
        let theta_v = theta_v.rebind(&["t"])?;
        check_interval("reconstruction domain", domain)?;
        let (a, b) = curve.range();
        if domain.0 < a || domain.1 > b {
            return Err(ill_formed(format!(
                "reconstruction domain [{}, {}] exceeds the curve range [{a}, {b}]",
                domain.0, domain.1
            )));
        }
        Ok(CurveScene {
            dtheta_u: theta_u.derivative("t")?,
            dtheta_v: theta_v.derivative("t")?,
            curve,
            theta_u,
            theta_v,
            profile,
            domain,
        })
    }

    pub fn parse(curve: Curve, theta_u: &str, theta_v: &str, profile: Profile, domain: (f64, f64)) -> Result<Self, SceneError> {
        CurveScene::new(curve, parse(theta_u, &["t"])?, parse(theta_v, &["t"])?, profile, domain)
    }

    pub fn curve(&self) -> &Curve {
        &self.curve
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn with_profile(&self, profile: Profile) -> Self {
        CurveScene {
            profile,
            ..self.clone()
        }
    }

    pub fn theta_u_expr(&self) -> &Expr {
        &self.theta_u
    }

    pub fn theta_v_expr(&self) -> &Expr {
        &self.theta_v
    }

    /// u1(t) = u·γ̇ = cos θ_u.
    pub fn u1(&self, t: f64) -> Result<f64, EvalError> {
        Ok(self.theta_u.eval(&[t])?.cos())
    }

    pub fn v1(&self, t: f64) -> Result<f64, EvalError> {
        Ok(self.theta_v.eval(&[t])?.cos())
    }

    pub fn du1(&self, t: f64) -> Result<f64, EvalError> {
        Ok(-self.theta_u.eval(&[t])?.sin() * self.dtheta_u.eval(&[t])?)
    }

    pub fn dv1(&self, t: f64) -> Result<f64, EvalError> {
        Ok(-self.theta_v.eval(&[t])?.sin() * self.dtheta_v.eval(&[t])?)
    }

    fn ambient(&self, t: f64, angle: f64) -> Result<[f64; 2], EvalError> {
        let e = self.curve.tangent(t)?;
        let n = perp(e);
        let (c, s) = (angle.cos(), angle.sin());
        Ok([c * e[0] + s * n[0], c * e[1] + s * n[1]])
    }

    /// u(t) in ambient coordinates.
    pub fn u(&self, t: f64) -> Result<[f64; 2], EvalError> {
        self.ambient(t, self.theta_u.eval(&[t])?)
    }

    pub fn v(&self, t: f64) -> Result<[f64; 2], EvalError> {
        self.ambient(t, self.theta_v.eval(&[t])?)
    }

    pub fn coefficients(&self, t: f64) -> Result<CurveCoefficients, EvalError> {
        let (u1, v1, du1, dv1) = (self.u1(t)?, self.v1(t)?, self.du1(t)?, self.dv1(t)?);
        Ok(CurveCoefficients {
            alpha: 1.0 / u1 + 1.0 / v1,
            beta: 1.0 / v1,
            dalpha: -du1 / (u1 * u1) - dv1 / (v1 * v1),
            dbeta: -dv1 / (v1 * v1),
            zeta_factor: du1 / (u1 * u1),
            gamma1_prime: self.curve.gamma1_prime(t)?,
        })
    }

    pub fn validate(&self, n: usize) -> Result<AssumptionReport, SceneError> {
        if n < MIN_LATTICE {
            return Err(SceneError::LatticeTooCoarse { got: n });
        }
        let (a, b) = self.curve.range();
        let mut sign_u = Tally::new(Assumption::A3SignU);
        let mut sign_v = Tally::new(Assumption::A3SignV);
        let mut speed = Tally::new(Assumption::UnitSpeed);
        for t in lattice(a, b, n) {
            let (tu, tv) = (self.theta_u.eval(&[t])?, self.theta_v.eval(&[t])?);
            sign_u.record(&[t], (-tu.cos()).min(tu.sin()));
            sign_v.record(&[t], tv.cos().min(tv.sin()));
            speed.record(&[t], 1e-9 - self.curve.speed_residual(t)?.abs());
        }
        let mut nondeg = Tally::new(Assumption::A3Nondegenerate);
        for t in lattice(self.domain.0, self.domain.1, n) {
            nondeg.record(&[t], self.coefficients(t)?.denominator().abs() - EPS_COND);
        }
        Ok(AssumptionReport {
            kind: SceneKind::Curve,
            checks: vec![
                sign_u.finish(),
                sign_v.finish(),
                speed.finish(),
                nondeg.finish(),
                self.curve.separation(n)?.finish(),
                profile_edge_check(&self.profile, n)?,
            ],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> Curve {
        Curve::parse("t", "0", (-10.0, 10.0), 4.0).unwrap()
    }

    fn arc(r: f64) -> Curve {
        Curve::parse(&format!("{r}*sin(t/{r})"), &format!("{r}*(1-cos(t/{r}))"), (-8.0, 8.0), 4.0).unwrap()
    }

    #[test]
    fn line_frame_is_axis_aligned() {
        let f = line().nearest_point_frame([2.0, 0.1]).unwrap();
        assert!((f.t - 2.0).abs() < 1e-14);
        assert_eq!(f.e, [1.0, 0.0]);
        assert_eq!(f.e_perp, [-0.0, 1.0]);
        assert!((f.dist - 0.1).abs() < 1e-15);
    }

    #[test]
    fn unit_speed_curve_is_not_reparameterized() {
        assert!(!line().is_reparameterized());
        assert!(!arc(20.0).is_reparameterized());
        assert!((arc(20.0).gamma1(3.0).unwrap() - 20.0 * (3.0f64 / 20.0).sin()).abs() < 1e-13);
    }

    #[test]
    fn reparameterization_gives_unit_speed() {
        // parabola-like arc in a non-unit parameter
        let c = Curve::parse("2*t", "0.05*(2*t)^2", (-3.0, 3.0), 2.0).unwrap();
        assert!(c.is_reparameterized());
        let (a, b) = c.range();
        for t in lattice(a, b, 97) {
            assert!(c.speed_residual(t).unwrap().abs() < 1e-9, "{t}");
            assert!((c.cumulative_length(t).unwrap() - (t - a)).abs() < 1e-8);
        }
    }

    #[test]
    fn on_curve_points_are_fixpoints() {
        let c = Curve::parse("2*t", "0.05*(2*t)^2", (-3.0, 3.0), 2.0).unwrap();
        let (a, b) = c.range();
        for t in [a + 0.3, -1.3, 0.0, 2.2, b - 0.4] {
            let p = c.point(t).unwrap();
            let f = c.nearest_point_frame(p).unwrap();
            assert!((f.t - t).abs() < 1e-9, "{t} vs {}", f.t);
            assert!(f.dist < 1e-12);
        }
    }

    #[test]
    fn outside_tube_is_rejected() {
        assert!(matches!(line().nearest_point_frame([0.0, 5.0]), Err(SceneError::OutsideTube { .. })));
        assert!(matches!(line().nearest_point_frame([12.0, 0.5]), Err(SceneError::OutsideTube { .. })));
    }

    #[test]
    fn flat_line_scene_validates() {
        let s = CurveScene::parse(
            line(),
            "2.2 + 0.2*tanh(t)",
            "0.9 + 0.2*tanh(t)",
            Profile::parse("exp(-x^2)", (-6.0, 6.0)).unwrap(),
            (-3.0, 3.0),
        )
        .unwrap();
        let r = s.validate(512).unwrap();
        assert!(r.all_ok(), "{r}");
    }

    #[test]
    fn self_intersecting_curve_is_flagged() {
        let c = Curve::parse("cos(t)", "sin(t)", (0.0, 7.0), 0.5).unwrap();
        let s = CurveScene::parse(c, "2.5", "0.5", Profile::parse("0", (-1.0, 1.0)).unwrap(), (1.0, 2.0)).unwrap();
        assert!(s.validate(256).unwrap().fails(Assumption::NoSelfIntersection));
    }
}
