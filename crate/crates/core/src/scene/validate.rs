use std::fmt;

use super::SceneKind;

/// The individual conditions a scene can be checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Assumption {
    /// −1 < u1 < 0 on the flat boundary.
    A1SignU,
    /// 0 < v1 < 1 on the flat boundary.
    A1SignV,
    A1Nondegenerate,
    A2SignU,
    A2SignV,
    A2Nondegenerate,
    ThetaUnit,
    A3SignU,
    A3SignV,
    A3Nondegenerate,
    UnitSpeed,
    NoSelfIntersection,
    CompactSupport,
    B1StraightU,
    B1StraightV,
    B2Independent,
    B3Constant,
}

impl Assumption {
    pub fn label(self) -> &'static str {
        match self {
            Assumption::A1SignU => "(A1) -1 < u1 < 0",
            Assumption::A1SignV => "(A1) 0 < v1 < 1",
            Assumption::A1Nondegenerate => "(A1) nondegeneracy",
            Assumption::A2SignU => "(A2) -1 < lambda_u < 0",
            Assumption::A2SignV => "(A2) 0 < lambda_v < 1",
            Assumption::A2Nondegenerate => "(A2) nondegeneracy",
            Assumption::ThetaUnit => "|theta0| = 1",
            Assumption::A3SignU => "(A3) u.t < 0 < u.n",
            Assumption::A3SignV => "(A3) 0 < v.t, 0 < v.n",
            Assumption::A3Nondegenerate => "(A3) nondegeneracy",
            Assumption::UnitSpeed => "unit speed after reparameterization",
            Assumption::NoSelfIntersection => "no self-intersection",
            Assumption::CompactSupport => "profile vanishes at support edges",
            Assumption::B1StraightU => "(B1) u extension straight",
            Assumption::B1StraightV => "(B1) v extension straight",
            Assumption::B2Independent => "(B2) |det A_uv| >= 1e-9",
            Assumption::B3Constant => "(B3) fields independent of position",
        }
    }

    /// Conditions that every forward evaluation relies on. Nondegeneracy and
    /// the (B) family only gate specific inversion or kernel operations.
    pub fn is_geometric(self) -> bool {
        !matches!(
            self,
            Assumption::A1Nondegenerate
                | Assumption::A2Nondegenerate
                | Assumption::A3Nondegenerate
                | Assumption::B1StraightU
                | Assumption::B1StraightV
                | Assumption::B2Independent
                | Assumption::B3Constant
        )
    }
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Holds,
    /// Failing lattice points (at most the first ten are kept).
    Fails { points: Vec<Vec<f64>>, count: usize },
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub assumption: Assumption,
    pub verdict: Verdict,
    /// Smallest margin seen (negative when violated); NaN when not applicable.
    pub worst_margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub kind: SceneKind,
    pub checks: Vec<Check>,
}

const KEEP_POINTS: usize = 10;

/// Accumulates margins over a lattice; a point fails when its margin is
/// not strictly positive.
pub(crate) struct Tally {
    assumption: Assumption,
    points: Vec<Vec<f64>>,
    count: usize,
    worst: f64,
}

impl Tally {
    pub(crate) fn new(assumption: Assumption) -> Self {
        Tally {
            assumption,
            points: Vec::new(),
            count: 0,
            worst: f64::INFINITY,
        }
    }

    pub(crate) fn record(&mut self, at: &[f64], margin: f64) {
        let margin = if margin.is_nan() { f64::NEG_INFINITY } else { margin };
        self.worst = self.worst.min(margin);
        if margin <= 0.0 {
            self.count += 1;
            if self.points.len() < KEEP_POINTS {
                self.points.push(at.to_vec());
            }
        }
    }

    pub(crate) fn finish(self) -> Check {
        let verdict = if self.count == 0 {
            Verdict::Holds
        } else {
            Verdict::Fails {
                points: self.points,
                count: self.count,
            }
        };
        Check {
            assumption: self.assumption,
            verdict,
            worst_margin: self.worst,
        }
    }
}

pub(crate) fn not_applicable(assumption: Assumption) -> Check {
    Check {
        assumption,
        verdict: Verdict::NotApplicable,
        worst_margin: f64::NAN,
    }
}

impl AssumptionReport {
    pub fn check(&self, a: Assumption) -> Option<&Check> {
        self.checks.iter().find(|c| c.assumption == a)
    }

    pub fn holds(&self, a: Assumption) -> bool {
        matches!(self.check(a).map(|c| &c.verdict), Some(Verdict::Holds))
    }

    pub fn fails(&self, a: Assumption) -> bool {
        matches!(self.check(a).map(|c| &c.verdict), Some(Verdict::Fails { .. }))
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks
            .iter()
            .filter(|c| matches!(c.verdict, Verdict::Fails { .. }))
    }

    /// True when no geometric (forward-relevant) condition fails.
    pub fn geometry_ok(&self) -> bool {
        self.failures().all(|c| !c.assumption.is_geometric())
    }

    pub fn all_ok(&self) -> bool {
        self.failures().next().is_none()
    }
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scene kind: {}", self.kind)?;
        for c in &self.checks {
            match &c.verdict {
                Verdict::Holds => writeln!(f, "  {:<40} holds   (worst margin {:.3e})", c.assumption.label(), c.worst_margin)?,
                Verdict::NotApplicable => writeln!(f, "  {:<40} n/a", c.assumption.label())?,
                Verdict::Fails { points, count } => {
                    write!(
                        f,
                        "  {:<40} FAILS   at {count} lattice point(s) (worst margin {:.3e}); first:",
                        c.assumption.label(),
                        c.worst_margin
                    )?;
                    for p in points.iter().take(3) {
                        let coords: Vec<String> = p.iter().map(|v| format!("{v:.6}")).collect();
                        write!(f, " ({})", coords.join(", "))?;
                    }
                    writeln!(f)?;
                }
            }
        }
        Ok(())
    }
}
