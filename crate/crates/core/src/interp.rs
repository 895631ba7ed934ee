//! Piecewise cubic Hermite interpolation.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InterpError {
    #[error("need at least two nodes, got {0}")]
    TooFewNodes(usize),
    #[error("nodes must be strictly increasing (violated at index {0})")]
    NotIncreasing(usize),
    #[error("length mismatch: {xs} abscissae, {ys} values, {slopes} slopes")]
    LengthMismatch { xs: usize, ys: usize, slopes: usize },
}

/// Cubic Hermite interpolant through `(x_i, y_i)` with slopes `m_i`.
///
/// Outside the node range the end cubic is evaluated (mild extrapolation).
#[derive(Debug, Clone, PartialEq)]
pub struct Hermite {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ms: Vec<f64>,
}

impl Hermite {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, ms: Vec<f64>) -> Result<Self, InterpError> {
        if xs.len() != ys.len() || xs.len() != ms.len() {
            return Err(InterpError::LengthMismatch {
                xs: xs.len(),
                ys: ys.len(),
                slopes: ms.len(),
            });
        }
        if xs.len() < 2 {
            return Err(InterpError::TooFewNodes(xs.len()));
        }
        if let Some(i) = xs.windows(2).position(|w| w[1] <= w[0]) {
            return Err(InterpError::NotIncreasing(i + 1));
        }
        Ok(Hermite { xs, ys, ms })
    }

    /// Fritsch–Carlson monotone cubic through the data. Preserves monotonicity
    /// of the samples.
    pub fn monotone(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self, InterpError> {
        if xs.len() != ys.len() {
            return Err(InterpError::LengthMismatch {
                xs: xs.len(),
                ys: ys.len(),
                slopes: ys.len(),
            });
        }
        if xs.len() < 2 {
            return Err(InterpError::TooFewNodes(xs.len()));
        }
        let n = xs.len();
        let delta: Vec<f64> = (0..n - 1)
            .map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]))
            .collect();
        let mut ms = vec![0.0; n];
        ms[0] = delta[0];
        ms[n - 1] = delta[n - 2];
        for i in 1..n - 1 {
            ms[i] = if delta[i - 1] * delta[i] <= 0.0 {
                0.0
            } else {
                // weighted harmonic mean (Fritsch–Butland)
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                let w1 = 2.0 * h1 + h0;
                let w2 = h1 + 2.0 * h0;
                (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i])
            };
        }
        for i in 0..n - 1 {
            if delta[i] == 0.0 {
                ms[i] = 0.0;
                ms[i + 1] = 0.0;
                continue;
            }
            let a = ms[i] / delta[i];
            let b = ms[i + 1] / delta[i];
            let r = a * a + b * b;
            if r > 9.0 {
                let t = 3.0 / r.sqrt();
                ms[i] = t * a * delta[i];
                ms[i + 1] = t * b * delta[i];
            }
        }
        Hermite::new(xs, ys, ms)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    pub fn nodes(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.ys
    }

    fn segment(&self, x: f64) -> usize {
        let n = self.xs.len();
        match self.xs.partition_point(|&v| v <= x) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i] + h10 * h * self.ms[i] + h01 * self.ys[i + 1] + h11 * h * self.ms[i + 1]
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let d00 = 6.0 * t2 - 6.0 * t;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = -6.0 * t2 + 6.0 * t;
        let d11 = 3.0 * t2 - 2.0 * t;
        (d00 * self.ys[i] + d01 * self.ys[i + 1]) / h + d10 * self.ms[i] + d11 * self.ms[i + 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reproduces_cubic_with_exact_slopes() {
        let f = |x: f64| x * x * x - 2.0 * x;
        let df = |x: f64| 3.0 * x * x - 2.0;
        let xs: Vec<f64> = (0..5).map(|i| i as f64 * 0.5).collect();
        let h = Hermite::new(
            xs.clone(),
            xs.iter().map(|&x| f(x)).collect(),
            xs.iter().map(|&x| df(x)).collect(),
        )
        .unwrap();
        for k in 0..=40 {
            let x = k as f64 * 0.05;
            assert!((h.eval(x) - f(x)).abs() < 1e-13);
            assert!((h.derivative(x) - df(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_nodes() {
        assert_eq!(
            Hermite::monotone(vec![0.0], vec![1.0]),
            Err(InterpError::TooFewNodes(1))
        );
        assert_eq!(
            Hermite::monotone(vec![0.0, 1.0, 1.0], vec![0.0; 3]),
            Err(InterpError::NotIncreasing(2))
        );
    }

    proptest! {
        #[test]
        fn monotone_data_gives_monotone_interpolant(
            steps in prop::collection::vec((0.01f64..2.0, 0.0f64..5.0), 2..30),
            probes in prop::collection::vec(0.0f64..1.0, 50),
        ) {
            let mut xs = vec![0.0];
            let mut ys = vec![0.0];
            for (dx, dy) in &steps {
                xs.push(xs.last().unwrap() + dx);
                ys.push(ys.last().unwrap() + dy);
            }
            let (lo, hi) = (xs[0], *xs.last().unwrap());
            let h = Hermite::monotone(xs.clone(), ys.clone()).unwrap();
            let mut ps: Vec<f64> = probes.iter().map(|p| lo + p * (hi - lo)).collect();
            ps.sort_by(f64::total_cmp);
            for w in ps.windows(2) {
                prop_assert!(h.eval(w[1]) >= h.eval(w[0]) - 1e-12);
            }
            for (x, y) in xs.iter().zip(&ys) {
                prop_assert!((h.eval(*x) - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
        }
    }
}
