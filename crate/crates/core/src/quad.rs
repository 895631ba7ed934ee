//! Adaptive Gauss–Kronrod (7/15) quadrature with global interval bisection.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

/// Tolerances and limits for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subintervals: usize,
    /// Number of equal pieces the interval is split into before adaptation.
    pub initial_pieces: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_subintervals: 1 << 15,
            initial_pieces: 1,
        }
    }
}

impl QuadOptions {
    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_pieces(mut self, pieces: usize) -> Self {
        self.initial_pieces = pieces.max(1);
        self
    }

    fn threshold(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub subintervals: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError<E> {
    #[error("quadrature did not converge: estimate {value} with error {error} after {subintervals} subintervals")]
    NonConvergence {
        value: f64,
        error: f64,
        subintervals: usize,
    },
    #[error("non-finite integration bounds [{a}, {b}]")]
    NonFiniteBounds { a: f64, b: f64 },
    #[error("integrand returned a non-finite value at {at}")]
    NonFiniteValue { at: f64 },
    #[error(transparent)]
    Integrand(E),
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F, E>(f: &mut F, a: f64, b: f64) -> Result<Piece, QuadError<E>>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut eval = |x: f64| -> Result<f64, QuadError<E>> {
        let y = f(x).map_err(QuadError::Integrand)?;
        if y.is_finite() {
            Ok(y)
        } else {
            Err(QuadError::NonFiniteValue { at: x })
        }
    };
    let fc = eval(c)?;
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    let mut abs_sum = fc.abs() * WGK[7];
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = eval(c - dx)?;
        let f2 = eval(c + dx)?;
        k += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            g += WG[j / 2] * (f1 + f2);
        }
    }
    let value = k * h;
    let roundoff = 50.0 * f64::EPSILON * abs_sum * h.abs();
    let error = ((k - g) * h).abs().max(roundoff);
    Ok(Piece { a, b, value, error })
}

/// Integrate `f` over `[a, b]` (either orientation).
///
/// The global error estimate is the sum of per-piece |K15 − G7| differences;
/// the piece with the largest estimate is bisected until the sum falls
/// below `max(abs_tol, rel_tol·|value|)`.
pub fn integrate<F, E>(mut f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<Integral, QuadError<E>>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    if !a.is_finite() || !b.is_finite() {
        return Err(QuadError::NonFiniteBounds { a, b });
    }
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            subintervals: 0,
            evaluations: 0,
        });
    }
    if a > b {
        let r = integrate(f, b, a, opts)?;
        return Ok(Integral {
            value: -r.value,
            ..r
        });
    }

    let pieces = opts.initial_pieces.max(1);
    let mut heap = BinaryHeap::with_capacity(pieces * 2);
    let step = (b - a) / pieces as f64;
    for i in 0..pieces {
        let lo = a + step * i as f64;
        let hi = if i + 1 == pieces { b } else { a + step * (i + 1) as f64 };
        heap.push(kronrod(&mut f, lo, hi)?);
    }
    let mut evaluations = 15 * pieces;
    let mut value: f64 = heap.iter().map(|p| p.value).sum();
    let mut error: f64 = heap.iter().map(|p| p.error).sum();
    // Pieces too narrow to split further are retired but keep contributing.
    let (mut frozen, mut frozen_value, mut frozen_error) = (0usize, 0.0, 0.0);

    loop {
        let subintervals = heap.len() + frozen;
        if error <= opts.threshold(value) {
            // Resum to shed drift from the running updates.
            let (v, e) = heap
                .iter()
                .fold((frozen_value, frozen_error), |(v, e), p| (v + p.value, e + p.error));
            return Ok(Integral {
                value: v,
                error: e,
                subintervals,
                evaluations,
            });
        }
        if heap.is_empty() || subintervals >= opts.max_subintervals {
            return Err(QuadError::NonConvergence {
                value,
                error,
                subintervals,
            });
        }
        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b || (worst.b - worst.a) < 1e-14 * (b - a) {
            frozen += 1;
            frozen_value += worst.value;
            frozen_error += worst.error;
            continue;
        }
        let left = kronrod(&mut f, worst.a, mid)?;
        let right = kronrod(&mut f, mid, worst.b)?;
        evaluations += 30;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
}

/// Convenience wrapper for infallible integrands.
pub fn integrate_infallible<F>(mut f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<Integral, QuadError<std::convert::Infallible>>
where
    F: FnMut(f64) -> f64,
{
    integrate(|x| Ok(f(x)), a, b, opts)
}
