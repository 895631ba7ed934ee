use crate::scene::{HyperplaneScene, EPS_COND};
use crate::transform::Forward;

use super::{assemble, DataSource, InversionError, Method, Recon1D, XRAY_CAUCHY_TOL};

/// Line integrals ∫f̃(x′ + tθ0) dt keyed by the line's offset along θ0⊥.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LineIntegrals {
    entries: Vec<(f64, f64)>,
}

impl LineIntegrals {
    pub fn new() -> Self {
        LineIntegrals::default()
    }

    pub fn insert(&mut self, offset: f64, value: f64) {
        match self.position(offset) {
            Some(i) => self.entries[i].1 = value,
            None => self.entries.push((offset, value)),
        }
    }

    fn position(&self, offset: f64) -> Option<usize> {
        self.entries.iter().position(|(c, _)| (c - offset).abs() <= 1e-9 * (1.0 + offset.abs()))
    }

    pub fn get(&self, offset: f64) -> Option<f64> {
        self.position(offset).map(|i| self.entries[i].1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl FromIterator<(f64, f64)> for LineIntegrals {
    fn from_iter<I: IntoIterator<Item = (f64, f64)>>(iter: I) -> Self {
        let mut l = LineIntegrals::new();
        for (c, v) in iter {
            l.insert(c, v);
        }
        l
    }
}

/// Reconstruct f̃ line by line. Each entry of `lines` pairs a line offset
/// with data whose x-axis is the position s along θ0 (x′ = sθ0 + cθ0⊥).
pub fn invert_fixed_theta(scene: &HyperplaneScene, lines: &[(f64, DataSource<'_>)], totals: &LineIntegrals) -> Result<Vec<Recon1D>, InversionError> {
    lines
        .iter()
        .map(|(c, data)| {
            let total = totals.get(*c).ok_or(InversionError::MissingLineIntegral { offset: *c })?;
            let nodes = data.nodes();
            let mut values = Vec::with_capacity(nodes.n);
            let mut denom_min = f64::INFINITY;
            for (i, (dx, dd)) in data.derivatives()?.into_iter().enumerate() {
                let s = nodes.at(i);
                let (f, den) = assemble(&scene.coefficients(scene.line_point(*c, s))?, total, dx, dd);
                if !(den.abs() >= EPS_COND) {
                    return Err(InversionError::DegenerateDenominator { x: s, value: den });
                }
                denom_min = denom_min.min(den.abs());
                values.push(f);
            }
            Ok(Recon1D::new(nodes, values, denom_min, Method::Thm31))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XrayEstimate {
    /// Estimated ∫f̃(x′ + tθ0) dt.
    pub xray: f64,
    /// ∂_d R f at d = 0 at the probe where the sequence settled.
    pub raw_limit: f64,
    /// D_{θ0}β at that probe.
    pub c: f64,
    pub probe: f64,
}

/// Recover the line integral of f̃ from ∂_d R f at d = 0 far to the left of
/// the support along the line with offset `offset`.
///
/// At a probe s left of the support ∂_d R f = −D_{θ0}β(s)·X f̃, so each probe
/// gives the estimate −∂_d R f / D_{θ0}β; probes are visited from right to
/// left until successive estimates agree.
pub fn xray_limit(scene: &HyperplaneScene, forward: &dyn Forward, offset: f64, probes: &[f64], step: f64) -> Result<XrayEstimate, InversionError> {
    if probes.len() < 2 {
        return Err(InversionError::InvalidInput("need at least two probes".into()));
    }
    let mut probes = probes.to_vec();
    probes.sort_by(|a, b| b.total_cmp(a));
    let far = *probes.last().expect("non-empty");
    let c_far = scene.coefficients(scene.line_point(offset, far))?.dbeta;
    if !(c_far.abs() >= EPS_COND) {
        return Err(InversionError::ZeroC { c: c_far, s: far });
    }
    let h = step;
    let mut prev: Option<f64> = None;
    let mut last_diff = f64::INFINITY;
    for s in probes {
        let dd = (-3.0 * forward.eval(s, 0.0)? + 4.0 * forward.eval(s, h)? - forward.eval(s, 2.0 * h)?) / (2.0 * h);
        let c = scene.coefficients(scene.line_point(offset, s))?.dbeta;
        if !(c.abs() >= EPS_COND) {
            return Err(InversionError::ZeroC { c, s });
        }
        let est = -dd / c;
        if let Some(p) = prev {
            last_diff = (est - p).abs();
            if last_diff < XRAY_CAUCHY_TOL {
                return Ok(XrayEstimate {
                    xray: est,
                    raw_limit: dd,
                    c,
                    probe: s,
                });
            }
        }
        prev = Some(est);
    }
    Err(InversionError::NoLimit { last_diff })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Box2;
    use crate::quad::QuadOptions;
    use crate::transform::{hwt_fixed_theta, Axis, TransformError};

    fn scene(lv: &str) -> HyperplaneScene {
        let b = Box2::new([-8.0, -8.0], [8.0, 8.0]);
        HyperplaneScene::with_profile("-(0.6 + 0.2*tanh(x1))", lv, [1.0, 0.0], "exp(-x1^2-x2^2)", b, Box2::new([-2.0, -2.0], [2.0, 2.0])).unwrap()
    }

    #[test]
    fn missing_line_integral_is_an_error() {
        let s = scene("0.6 - 0.2*tanh(x1)");
        let f = |_: f64, _: f64| -> Result<f64, TransformError> { Ok(0.0) };
        let r = invert_fixed_theta(&s, &[(0.5, DataSource::callback(&f, Axis::point(0.0)))], &LineIntegrals::new());
        assert_eq!(r, Err(InversionError::MissingLineIntegral { offset: 0.5 }));
    }

    #[test]
    fn line_round_trip() {
        let s = scene("0.6 - 0.2*tanh(x1)");
        let c = 0.4;
        let f = |x: f64, d: f64| hwt_fixed_theta(&s, s.line_point(c, x), d, &QuadOptions::default());
        let totals: LineIntegrals = [(c, std::f64::consts::PI.sqrt() * (-c * c).exp())].into_iter().collect();
        let r = invert_fixed_theta(&s, &[(c, DataSource::callback(&f, Axis::new(-2.0, 2.0, 41).unwrap()))], &totals).unwrap();
        let (max, _) = r[0].errors(|x| (-x * x - c * c).exp());
        assert!(max < 1e-6, "{max}");
    }

    #[test]
    fn tanh_family_has_no_limit_coefficient() {
        let s = scene("0.6 - 0.2*tanh(x1)");
        let f = |x: f64, d: f64| hwt_fixed_theta(&s, s.line_point(0.0, x), d, &QuadOptions::default());
        let r = xray_limit(&s, &f, 0.0, &[-20.0, -25.0, -30.0], 1e-4);
        assert!(matches!(r, Err(InversionError::ZeroC { .. })));
    }

    #[test]
    fn slow_surrogate_recovers_line_integral() {
        let s = scene("0.5 + 0.1*tanh(0.05*x1)");
        let c = 0.3;
        let f = |x: f64, d: f64| hwt_fixed_theta(&s, s.line_point(c, x), d, &QuadOptions::default());
        let e = xray_limit(&s, &f, c, &[-10.0, -12.0, -14.0, -16.0], 1e-3).unwrap();
        let want = std::f64::consts::PI.sqrt() * (-c * c).exp();
        assert!((e.xray - want).abs() < 0.05 * want, "{} vs {want}", e.xray);
    }
}
