use crate::expr::EvalError;
use crate::geometry::{Box2, Box3, BoxN};
use crate::quad::QuadOptions;
use crate::scene::{HyperContent, HyperplaneScene};

use super::{check_glide, ray_integral, segment, Leg, Legs, TransformError};

/// Parameter range of the full line `p + t·dir` (t ∈ ℝ) inside `bbox`.
fn line_range<const N: usize>(p: &[f64; N], dir: &[f64; N], bbox: &BoxN<N>) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..N {
        if dir[i] == 0.0 {
            if p[i] < bbox.lo[i] || p[i] > bbox.hi[i] {
                return None;
            }
            continue;
        }
        let a = (bbox.lo[i] - p[i]) / dir[i];
        let b = (bbox.hi[i] - p[i]) / dir[i];
        lo = lo.max(a.min(b));
        hi = hi.min(a.max(b));
    }
    (lo < hi).then_some((lo, hi))
}

/// ∫ over t ∈ [a, b] ∩ range of `f(p + tθ0)`.
fn line_piece<F>(f: F, range: Option<(f64, f64)>, a: f64, b: f64, opts: &QuadOptions, leg: Leg) -> Result<f64, TransformError>
where
    F: FnMut(f64) -> Result<f64, EvalError>,
{
    let Some((lo, hi)) = range else { return Ok(0.0) };
    let (a, b) = (a.max(lo), b.min(hi));
    if a >= b {
        return Ok(0.0);
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(TransformError::Quadrature {
            leg,
            message: "line never leaves the support box".into(),
        });
    }
    segment(f, a, b, opts, leg)
}

/// Reduced form along the line x′ + tθ0 for a profile-mode scene:
/// −(1/λ_u(x′))∫_{−∞}^0 f̃ + ∫_0^d f̃ + (1/λ_v(x′+dθ0))∫_d^∞ f̃.
pub fn hwt_fixed_theta_legs(scene: &HyperplaneScene, p: [f64; 2], d: f64, opts: &QuadOptions) -> Result<Legs, TransformError> {
    check_glide(d)?;
    let f = scene.profile().ok_or(TransformError::Unsupported("a profile-mode hyperplane scene"))?;
    let th = scene.theta0();
    let range = line_range(&p, &th, f.bbox());
    let g = |t: f64| f.expr().eval(&[p[0] + t * th[0], p[1] + t * th[1]]);
    let end = [p[0] + d * th[0], p[1] + d * th[1]];
    if f.is_zero() {
        return Ok(Legs::default());
    }
    Ok(Legs {
        descent: -line_piece(g, range, f64::NEG_INFINITY, 0.0, opts, Leg::Descent)? / scene.lambda_u(p)?,
        glide: line_piece(g, range, 0.0, d, opts, Leg::Glide)?,
        ascent: line_piece(g, range, d, f64::INFINITY, opts, Leg::Ascent)? / scene.lambda_v(end)?,
    })
}

pub fn hwt_fixed_theta(scene: &HyperplaneScene, p: [f64; 2], d: f64, opts: &QuadOptions) -> Result<f64, TransformError> {
    Ok(hwt_fixed_theta_legs(scene, p, d, opts)?.total())
}

/// Three-leg transform in ℝ³ of an arbitrary field `f` (zero outside `bbox`)
/// with the scene's u(x′, θ0), v(x′, θ0).
pub fn hwt_fixed_theta_field<F>(scene: &HyperplaneScene, f: F, bbox: &Box3, p: [f64; 2], d: f64, opts: &QuadOptions) -> Result<Legs, TransformError>
where
    F: Fn(&[f64; 3]) -> Result<f64, EvalError>,
{
    check_glide(d)?;
    let th = scene.theta0();
    let end = [p[0] + d * th[0], p[1] + d * th[1]];
    let descent = ray_integral(&f, bbox, &[p[0], p[1], 0.0], &scene.u(p)?, opts, Leg::Descent)?;
    let glide = if bbox.lo[2] <= 0.0 && bbox.hi[2] >= 0.0 {
        let plane = Box2::new([bbox.lo[0], bbox.lo[1]], [bbox.hi[0], bbox.hi[1]]);
        line_piece(|t| f(&[p[0] + t * th[0], p[1] + t * th[1], 0.0]), line_range(&p, &th, &plane), 0.0, d, opts, Leg::Glide)?
    } else {
        0.0
    };
    let ascent = ray_integral(&f, bbox, &[end[0], end[1], 0.0], &scene.v(end)?, opts, Leg::Ascent)?;
    Ok(Legs { descent, glide, ascent })
}

/// Geometric evaluation in ℝ³; a profile is lifted to f(x′, x3) = f̃(x′) on x3 ≥ 0.
pub fn hwt_fixed_theta_geometric(scene: &HyperplaneScene, p: [f64; 2], d: f64, opts: &QuadOptions) -> Result<Legs, TransformError> {
    match scene.content() {
        HyperContent::Profile(f) => {
            let b = f.bbox();
            let bbox = Box3::new([b.lo[0], b.lo[1], 0.0], [b.hi[0], b.hi[1], f64::INFINITY]);
            hwt_fixed_theta_field(scene, |q| f.eval(&[q[0], q[1]]), &bbox, p, d, opts)
        }
        HyperContent::Field(f) => hwt_fixed_theta_field(scene, |q| f.eval(q), f.bbox(), p, d, opts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::FlatScene2D;
    use crate::transform::hwt_flat2d_reduced;

    fn big() -> Box2 {
        Box2::new([-8.0, -8.0], [8.0, 8.0])
    }

    #[test]
    fn slice_matches_flat_reduced() {
        let h = HyperplaneScene::with_profile("-0.5", "0.7", [1.0, 0.0], "exp(-x1^2-x2^2)", big(), Box2::new([-2.0, -2.0], [2.0, 2.0])).unwrap();
        let c: f64 = 0.6;
        let w = (-c * c).exp();
        let flat = FlatScene2D::with_profile("-0.5", "0.7", &format!("{w}*exp(-x^2)"), (-8.0, 8.0), (-2.0, 2.0)).unwrap();
        let o = QuadOptions::default();
        for &(x, d) in &[(-1.0, 0.0), (0.2, 0.7), (3.0, 2.0)] {
            let a = hwt_fixed_theta(&h, [x, c], d, &o).unwrap();
            let b = hwt_flat2d_reduced(&flat, x, d, &o).unwrap();
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn geometric_matches_reduced() {
        let h = HyperplaneScene::with_profile(
            "-(0.6 + 0.2*tanh(x1 + 0.3*x2))",
            "0.6 - 0.2*tanh(x1)",
            [0.6, 0.8],
            "exp(-x1^2-2*x2^2)",
            big(),
            Box2::new([-2.0, -2.0], [2.0, 2.0]),
        )
        .unwrap();
        let o = QuadOptions::default();
        for &(p, d) in &[([0.1, -0.3], 0.0), ([-1.0, 0.5], 1.5)] {
            let a = hwt_fixed_theta(&h, p, d, &o).unwrap();
            let b = hwt_fixed_theta_geometric(&h, p, d, &o).unwrap().total();
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn mirrored_nodes_agree_for_symmetric_profile() {
        let h = HyperplaneScene::with_profile("-0.4", "0.8", [1.0, 0.0], "exp(-x1^2-x2^2)", big(), Box2::new([-2.0, -2.0], [2.0, 2.0])).unwrap();
        let o = QuadOptions::default();
        let a = hwt_fixed_theta(&h, [0.3, 0.9], 1.0, &o).unwrap();
        let b = hwt_fixed_theta(&h, [0.3, -0.9], 1.0, &o).unwrap();
        assert!((a - b).abs() < 1e-13);
    }
}
