//! Small fixed-dimension vector helpers and ray–box clipping.

/// Axis-aligned box in `N` dimensions. Bounds may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxN<const N: usize> {
    pub lo: [f64; N],
    pub hi: [f64; N],
}

pub type Box2 = BoxN<2>;
pub type Box3 = BoxN<3>;

impl<const N: usize> BoxN<N> {
    pub fn new(lo: [f64; N], hi: [f64; N]) -> Self {
        BoxN { lo, hi }
    }

    pub fn contains(&self, p: &[f64; N]) -> bool {
        (0..N).all(|i| p[i] >= self.lo[i] && p[i] <= self.hi[i])
    }

    pub fn is_valid(&self) -> bool {
        (0..N).all(|i| !self.lo[i].is_nan() && !self.hi[i].is_nan() && self.lo[i] < self.hi[i])
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    /// Largest finite side length, or 1 when every side is unbounded.
    pub fn scale(&self) -> f64 {
        let w = (0..N)
            .map(|i| self.width(i))
            .filter(|w| w.is_finite())
            .fold(0.0, f64::max);
        if w > 0.0 {
            w
        } else {
            1.0
        }
    }
}

/// Parameter interval `[t0, t1] ⊆ [0, ∞)` on which `origin + t·dir` lies in
/// the box (slab method). `None` when the ray misses the box. The upper end
/// is infinite when the ray never leaves an unbounded box.
pub fn clip_ray<const N: usize>(origin: &[f64; N], dir: &[f64; N], bbox: &BoxN<N>) -> Option<(f64, f64)> {
    let mut t0 = 0.0_f64;
    let mut t1 = f64::INFINITY;
    for i in 0..N {
        let (lo, hi) = (bbox.lo[i], bbox.hi[i]);
        if dir[i] == 0.0 {
            if origin[i] < lo || origin[i] > hi {
                return None;
            }
            continue;
        }
        let a = (lo - origin[i]) / dir[i];
        let b = (hi - origin[i]) / dir[i];
        let (near, far) = if a <= b { (a, b) } else { (b, a) };
        if !near.is_nan() {
            t0 = t0.max(near);
        }
        if !far.is_nan() {
            t1 = t1.min(far);
        }
        if t0 > t1 {
            return None;
        }
    }
    Some((t0, t1))
}

#[inline]
pub fn dot<const N: usize>(a: &[f64; N], b: &[f64; N]) -> f64 {
    (0..N).map(|i| a[i] * b[i]).sum()
}

#[inline]
pub fn axpy<const N: usize>(p: &[f64; N], t: f64, d: &[f64; N]) -> [f64; N] {
    std::array::from_fn(|i| p[i] + t * d[i])
}

#[inline]
pub fn norm<const N: usize>(a: &[f64; N]) -> f64 {
    dot(a, a).sqrt()
}

/// Counter-clockwise rotation by 90°.
#[inline]
pub fn perp(a: [f64; 2]) -> [f64; 2] {
    [-a[1], a[0]]
}
