//! Exact analysis of the two-node network with equal intercepts and costs.
//!
//! Node 1 is the steeper-demand node (`1 < b1 / b2 <= 3`). Re-balancing is
//! reported for node 1, `r = r_1 = -r_2`. Under the consumer-surplus
//! objective an equilibrium exists only for some line capacities; the four
//! conditions below are checked in order.

use alloc::vec;
use alloc::vec::Vec;

use crate::model::{MarketParams, NetworkModel, Objective};
use crate::{Error, Result};

/// Relative distance to a threshold under which a capacity is flagged as
/// lying on the boundary.
pub const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TwoNodeParams {
    a: f64,
    b1: f64,
    b2: f64,
    c: f64,
    f: Option<f64>,
}

impl TwoNodeParams {
    /// `f = None` (or infinite) means the line is unconstrained.
    pub fn new(a: f64, b1: f64, b2: f64, c: f64, f: Option<f64>) -> Result<Self> {
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        if !finite_pos(a) || !finite_pos(c) || !finite_pos(b2) || !b1.is_finite() {
            return Err(Error::InvalidParameter("a, b2 and c must be positive and finite".into()));
        }
        let ratio = b1 / b2;
        if !(ratio > 1.0 && ratio <= 3.0) {
            return Err(Error::InvalidParameter(alloc::format!(
                "slope ratio b1/b2 = {ratio} outside (1, 3]"
            )));
        }
        let f = match f {
            Some(v) if v.is_infinite() && v > 0.0 => None,
            Some(v) if v.is_nan() || v < 0.0 => {
                return Err(Error::InvalidParameter(alloc::format!("line capacity {v} must be nonnegative")))
            }
            other => other,
        };
        Ok(TwoNodeParams { a, b1, b2, c, f })
    }

    /// Reads a two-node market with equal intercepts and costs.
    pub fn from_market(params: &MarketParams, capacity: Option<f64>) -> Result<Self> {
        if params.nodes() != 2 {
            return Err(Error::Unsupported("analytic path needs exactly two nodes"));
        }
        let (a, b, c) = (params.intercepts(), params.slopes(), params.costs());
        if a[0] != a[1] || c[0] != c[1] {
            return Err(Error::Unsupported("analytic path needs equal intercepts and costs"));
        }
        TwoNodeParams::new(a[0], b[0], b[1], c[0], capacity)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b1(&self) -> f64 {
        self.b1
    }

    pub fn b2(&self) -> f64 {
        self.b2
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn capacity(&self) -> Option<f64> {
        self.f
    }

    pub fn with_capacity(&self, f: Option<f64>) -> Result<Self> {
        TwoNodeParams::new(self.a, self.b1, self.b2, self.c, f)
    }

    pub fn network(&self) -> NetworkModel {
        NetworkModel::two_node(self.f).expect("capacity validated on construction")
    }

    pub fn market(&self) -> MarketParams {
        MarketParams::new(vec![self.a; 2], vec![self.b1, self.b2], vec![self.c; 2])
            .expect("parameters validated on construction")
    }
}

pub fn threshold_f0(p: &TwoNodeParams) -> f64 {
    let TwoNodeParams { a, b1, b2, c, .. } = *p;
    a * b2 * (b1 + b2 + c * (3.0 - b1 / b2))
        / (b1 * b2 * (b1 + b2) + b1 * (b1 + 5.0 * b2) * c + 2.0 * (b1 + b2) * c * c)
}

pub fn threshold_f1(p: &TwoNodeParams) -> f64 {
    let TwoNodeParams { a, b1, b2, c, .. } = *p;
    a * c * (b1 - b2) / (b1 * b2 * (b1 + b2) + c * (b1 * b1 + b2 * b2))
}

/// Capacities at which the existence verdict can change.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Thresholds {
    /// `a / (b2 + 2c)`: at or above this the line never binds at equilibrium.
    pub uncongested: f64,
    /// `a / b1`: above this generator 1 shuts down when node 1 imports `f`.
    pub shutdown: f64,
    /// `a / (3 b1 + 2c)`.
    pub export_limit: f64,
    pub f0: f64,
    pub f1: f64,
}

impl Thresholds {
    pub fn of(p: &TwoNodeParams) -> Self {
        Thresholds {
            uncongested: p.a / (p.b2 + 2.0 * p.c),
            shutdown: p.a / p.b1,
            export_limit: p.a / (3.0 * p.b1 + 2.0 * p.c),
            f0: threshold_f0(p),
            f1: threshold_f1(p),
        }
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.uncongested, self.shutdown, self.export_limit, self.f0, self.f1]
    }
}

/// Production at both nodes and re-balancing into node 1.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TwoNodePoint {
    pub q1: f64,
    pub q2: f64,
    pub r: f64,
}

impl TwoNodePoint {
    pub fn production(&self) -> Vec<f64> {
        vec![self.q1, self.q2]
    }

    pub fn rebalance(&self) -> Vec<f64> {
        vec![self.r, -self.r]
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExistenceVerdict {
    pub exists: bool,
    /// First of the four existence conditions that holds.
    pub condition: Option<u8>,
    pub thresholds: Thresholds,
    /// Closed-form equilibrium where one is known (conditions 1 to 3).
    pub equilibrium: Option<TwoNodePoint>,
    /// The capacity sits within [`BOUNDARY_TOL`] of a threshold.
    pub boundary: bool,
}

/// Decides whether an equilibrium exists under the consumer-surplus
/// objective. An absent line counts as condition 1.
pub fn classify_existence(p: &TwoNodeParams) -> ExistenceVerdict {
    let t = Thresholds::of(p);
    let Some(f) = p.f else {
        return ExistenceVerdict {
            exists: true,
            condition: Some(1),
            thresholds: t,
            equilibrium: Some(uncongested_consumer_point(p)),
            boundary: false,
        };
    };
    let condition = condition_at(&t, f);
    let equilibrium = match condition {
        Some(1) => Some(uncongested_consumer_point(p)),
        Some(2) | Some(3) => Some(import_limited_point(p, f)),
        _ => None,
    };
    ExistenceVerdict {
        exists: condition.is_some(),
        condition,
        thresholds: t,
        equilibrium,
        boundary: t
            .as_array()
            .iter()
            .any(|th| (f - th).abs() <= BOUNDARY_TOL * th.abs().max(1.0)),
    }
}

fn condition_at(t: &Thresholds, f: f64) -> Option<u8> {
    if f >= t.uncongested {
        Some(1)
    } else if f <= t.shutdown && f >= t.export_limit && f >= t.f0 {
        Some(2)
    } else if f > t.shutdown {
        Some(3)
    } else if f <= t.shutdown && f <= t.export_limit && f <= t.f1 {
        Some(4)
    } else {
        None
    }
}

/// Consumer-surplus equilibrium when the line does not bind: node 1 imports
/// all of node 2's production.
fn uncongested_consumer_point(p: &TwoNodeParams) -> TwoNodePoint {
    let TwoNodeParams { a, b1, b2, c, .. } = *p;
    let r = a / (b2 + 2.0 * c);
    let q1 = if b1 < b2 + 2.0 * c {
        a * (2.0 * c + b2 - b1) / (2.0 * (b1 + c) * (b2 + 2.0 * c))
    } else {
        0.0
    };
    TwoNodePoint { q1, q2: r, r }
}

/// Equilibrium with node 1 importing exactly the line capacity.
fn import_limited_point(p: &TwoNodeParams, f: f64) -> TwoNodePoint {
    let TwoNodeParams { a, b1, b2, c, .. } = *p;
    TwoNodePoint {
        q1: ((a - b1 * f) / (2.0 * (b1 + c))).max(0.0),
        q2: (a + b2 * f) / (2.0 * (b2 + c)),
        r: f,
    }
}

/// Closed-form equilibrium with an unconstrained line.
pub fn uncongested_equilibrium(p: &TwoNodeParams, objective: Objective) -> Result<TwoNodePoint> {
    if p.f.is_some() {
        return Err(Error::Unsupported("closed form needs an unconstrained line"));
    }
    let TwoNodeParams { a, b1, b2, c, .. } = *p;
    Ok(match objective {
        Objective::SocialWelfare => {
            let r = a * c * (b2 - b1)
                / ((b1 + b2) * (b1 * b2 + 2.0 * c * c) + c * (b1 * b1 + b2 * b2 + 4.0 * b1 * b2));
            TwoNodePoint {
                q1: (a - b1 * r) / (2.0 * (b1 + c)),
                q2: (a + b2 * r) / (2.0 * (b2 + c)),
                r,
            }
        }
        Objective::ResidualSocialWelfare => TwoNodePoint {
            q1: a / (2.0 * (b1 + c)),
            q2: a / (2.0 * (b2 + c)),
            r: 0.0,
        },
        Objective::ConsumerSurplus => uncongested_consumer_point(p),
    })
}

/// A maximal capacity interval with one existence label, as judged at its
/// interior points.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExistenceInterval {
    pub from: f64,
    pub to: f64,
    pub exists: bool,
    pub condition: Option<u8>,
}

/// Splits `[from, to]` at the thresholds and labels each piece.
pub fn existence_partition(p: &TwoNodeParams, from: f64, to: f64) -> Result<Vec<ExistenceInterval>> {
    if !(from.is_finite() && to.is_finite() && from < to && from >= 0.0) {
        return Err(Error::InvalidParameter(alloc::format!("bad capacity range [{from}, {to}]")));
    }
    let t = Thresholds::of(p);
    let mut cuts: Vec<f64> = t.as_array().into_iter().filter(|x| *x > from && *x < to).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.insert(0, from);
    cuts.push(to);

    let mut out: Vec<ExistenceInterval> = Vec::new();
    for w in cuts.windows(2) {
        let condition = condition_at(&t, 0.5 * (w[0] + w[1]));
        match out.last_mut() {
            Some(last) if last.condition == condition => last.to = w[1],
            _ => out.push(ExistenceInterval {
                from: w[0],
                to: w[1],
                exists: condition.is_some(),
                condition,
            }),
        }
    }
    Ok(out)
}
