use crate::interp::Hermite;
use crate::scene::{CurveScene, EPS_COND};
use crate::transform::Axis;

use super::{fd_derivative, DataSource, InversionError, Method, Recon1D};

/// Reconstruct f̃ for gliding along a curve.
///
/// At each t0 the formula yields f̃(γ1(t0)); the samples are then moved onto a
/// uniform grid in the profile argument by inverting t0 ↦ γ1(t0).
pub fn invert_curve(scene: &CurveScene, data: DataSource<'_>, total_integral: f64) -> Result<Recon1D, InversionError> {
    let nodes = data.nodes();
    let curve = scene.curve();
    let mut raw = Vec::with_capacity(nodes.n);
    let mut denom_min = f64::INFINITY;
    for (i, (dt, dd)) in data.derivatives()?.into_iter().enumerate() {
        let t0 = nodes.at(i);
        let c = scene.coefficients(t0)?;
        let den = c.denominator();
        if !(den.abs() >= EPS_COND) {
            return Err(InversionError::DegenerateDenominator { x: t0, value: den });
        }
        denom_min = denom_min.min(den.abs());
        let zeta = c.zeta_factor * total_integral;
        raw.push((curve.gamma1(t0)?, (c.dalpha * dd - c.dbeta * (dt - zeta)) / den));
    }
    if nodes.n < 3 {
        let mut r = Recon1D::new(nodes, raw.iter().map(|p| p.1).collect(), denom_min, Method::Thm41);
        r.raw = Some(raw);
        return Ok(r);
    }
    let increasing = raw.windows(2).all(|w| w[1].0 > w[0].0);
    let decreasing = raw.windows(2).all(|w| w[1].0 < w[0].0);
    if !(increasing || decreasing) {
        let k = raw
            .windows(3)
            .position(|w| (w[1].0 - w[0].0) * (w[2].0 - w[1].0) <= 0.0)
            .unwrap_or(0);
        return Err(InversionError::NonMonotoneGamma1 { t0: nodes.at(k + 1), raw });
    }

    // t0 as a function of the profile argument, and f̃ as a function of t0.
    let ts = nodes.values();
    let (mut gs, mut tg): (Vec<f64>, Vec<f64>) = raw.iter().map(|p| p.0).zip(ts.iter().copied()).unzip();
    if decreasing {
        gs.reverse();
        tg.reverse();
    }
    let inverse = Hermite::monotone(gs.clone(), tg).map_err(|e| InversionError::InvalidInput(e.to_string()))?;
    let fs: Vec<f64> = raw.iter().map(|p| p.1).collect();
    let slopes = fd_derivative(&fs, nodes.step());
    let profile = Hermite::new(ts, fs, slopes).map_err(|e| InversionError::InvalidInput(e.to_string()))?;

    let grid = Axis::new(gs[0], gs[gs.len() - 1], nodes.n).map_err(InversionError::from)?;
    let values = grid.values().into_iter().map(|g| profile.eval(inverse.eval(g))).collect();
    let mut r = Recon1D::new(grid, values, denom_min, Method::Thm41);
    r.raw = Some(raw);
    Ok(r)
}
