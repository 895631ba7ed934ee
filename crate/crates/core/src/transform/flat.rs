use crate::expr::EvalError;
use crate::geometry::Box2;
use crate::quad::QuadOptions;
use crate::scene::{FlatContent, FlatScene2D};

use super::{check_glide, ray_integral, segment, Leg, Legs, TransformError};

/// Three-leg transform of an arbitrary field `f` (zero outside `bbox`) using
/// the scene's boundary directions.
pub fn hwt_flat2d_field<F>(scene: &FlatScene2D, f: F, bbox: &Box2, x: f64, d: f64, opts: &QuadOptions) -> Result<Legs, TransformError>
where
    F: Fn(&[f64; 2]) -> Result<f64, EvalError>,
{
    check_glide(d)?;
    let descent = ray_integral(&f, bbox, &[x, 0.0], &scene.u(x)?, opts, Leg::Descent)?;
    let glide = if bbox.lo[1] <= 0.0 && bbox.hi[1] >= 0.0 {
        let a = x.max(bbox.lo[0]);
        let b = (x + d).min(bbox.hi[0]);
        if a < b {
            segment(|s| f(&[s, 0.0]), a, b, opts, Leg::Glide)?
        } else {
            0.0
        }
    } else {
        0.0
    };
    let ascent = ray_integral(&f, bbox, &[x + d, 0.0], &scene.v(x + d)?, opts, Leg::Ascent)?;
    Ok(Legs { descent, glide, ascent })
}

/// Geometric evaluation by quadrature along the three legs.
pub fn hwt_flat2d_legs(scene: &FlatScene2D, x: f64, d: f64, opts: &QuadOptions) -> Result<Legs, TransformError> {
    let bbox = scene.support_box();
    match scene.content() {
        FlatContent::Profile(p) => hwt_flat2d_field(scene, |q| p.eval(q[0]), &bbox, x, d, opts),
        FlatContent::Field(f) => hwt_flat2d_field(scene, |q| f.eval(q), &bbox, x, d, opts),
    }
}

pub fn hwt_flat2d(scene: &FlatScene2D, x: f64, d: f64, opts: &QuadOptions) -> Result<f64, TransformError> {
    Ok(hwt_flat2d_legs(scene, x, d, opts)?.total())
}

/// Reduced form: −(1/u1(x))∫_{−∞}^x f̃ + ∫_x^{x+d} f̃ + (1/v1(x+d))∫_{x+d}^∞ f̃.
pub fn hwt_flat2d_reduced_legs(scene: &FlatScene2D, x: f64, d: f64, opts: &QuadOptions) -> Result<Legs, TransformError> {
    check_glide(d)?;
    let p = scene.profile().ok_or(TransformError::Unsupported("a profile-mode flat scene"))?;
    let (a, b) = p.support();
    let q = |lo: f64, hi: f64, leg: Leg| -> Result<f64, TransformError> {
        let (lo, hi) = (lo.max(a), hi.min(b));
        if lo >= hi || p.is_zero() {
            return Ok(0.0);
        }
        segment(|s| p.expr().eval(&[s]), lo, hi, opts, leg)
    };
    Ok(Legs {
        descent: -q(a, x, Leg::Descent)? / scene.u1(x)?,
        glide: q(x, x + d, Leg::Glide)?,
        ascent: q(x + d, b, Leg::Ascent)? / scene.v1(x + d)?,
    })
}

pub fn hwt_flat2d_reduced(scene: &FlatScene2D, x: f64, d: f64, opts: &QuadOptions) -> Result<f64, TransformError> {
    Ok(hwt_flat2d_reduced_legs(scene, x, d, opts)?.total())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Box2;
    use crate::scene::Field;

    fn opts() -> QuadOptions {
        QuadOptions::default()
    }

    fn gaussian(u1: &str, v1: &str) -> FlatScene2D {
        FlatScene2D::with_profile(u1, v1, "exp(-x^2)", (-8.0, 8.0), (-3.0, 3.0)).unwrap()
    }

    #[test]
    fn zero_profile_gives_zero() {
        let s = FlatScene2D::with_profile("-0.5", "0.5", "0", (-1.0, 1.0), (-1.0, 1.0)).unwrap();
        assert_eq!(hwt_flat2d(&s, 0.3, 1.0, &opts()).unwrap(), 0.0);
        assert_eq!(hwt_flat2d_reduced(&s, 0.3, 1.0, &opts()).unwrap(), 0.0);
    }

    #[test]
    fn left_of_support_glide_across() {
        // x left of the support and x + d right of it: descent and ascent vanish.
        let s = gaussian("-0.5", "0.5");
        let v = hwt_flat2d(&s, -10.0, 20.0, &opts()).unwrap();
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-9, "{v}");
    }

    #[test]
    fn degenerate_limit_left_of_support() {
        let s = gaussian("-0.3", "0.6");
        let t = std::f64::consts::PI.sqrt();
        let v = hwt_flat2d_reduced(&s, -9.0, 0.0, &opts()).unwrap();
        assert!((v - t / 0.6).abs() < 1e-9);
    }

    #[test]
    fn geometric_matches_reduced() {
        let s = gaussian("-(0.6 + 0.2*tanh(x))", "0.6 - 0.2*tanh(x)");
        for &(x, d) in &[(-2.0, 0.0), (0.3, 1.1), (1.7, 4.0), (-7.5, 2.5)] {
            let g = hwt_flat2d(&s, x, d, &opts()).unwrap();
            let r = hwt_flat2d_reduced(&s, x, d, &opts()).unwrap();
            assert!((g - r).abs() <= 1e-9, "{x} {d}: {g} vs {r}");
        }
    }

    #[test]
    fn field_mode_matches_simpson() {
        let f = Field::new(
            crate::expr::parse("exp(-x^2-(y-1)^2)", &["x", "y"]).unwrap(),
            Box2::new([-9.0, 0.0], [9.0, 10.0]),
        )
        .unwrap();
        let s = FlatScene2D::parse("-0.4", "0.7", FlatContent::Field(f.clone()), (-1.0, 1.0)).unwrap();
        let (x, d) = (0.4, 0.8);
        let simpson = |o: [f64; 2], w: [f64; 2], len: f64| {
            let n = 100_000;
            let h = len / n as f64;
            let g = |t: f64| f.eval(&[o[0] + t * w[0], o[1] + t * w[1]]).unwrap();
            let mut acc = g(0.0) + g(len);
            for i in 1..n {
                acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h);
            }
            acc * h / 3.0
        };
        let u = s.u(x).unwrap();
        let v = s.v(x + d).unwrap();
        // leg lengths to the top of the box
        let want = simpson([x, 0.0], u, 10.0 / u[1]) + simpson([x, 0.0], [1.0, 0.0], d) + simpson([x + d, 0.0], v, 10.0 / v[1]);
        let got = hwt_flat2d(&s, x, d, &opts()).unwrap();
        assert!((got - want).abs() < 1e-8, "{got} vs {want}");
    }

    #[test]
    fn negative_glide_is_rejected() {
        let s = gaussian("-0.5", "0.5");
        assert_eq!(hwt_flat2d(&s, 0.0, -1.0, &opts()), Err(TransformError::NegativeGlide(-1.0)));
    }
}
