//! Network, market parameters and the closed-form market quantities.
//!
//! Sign conventions: `r_k > 0` means the market maker delivers power *into*
//! node `k`. The injection vector seen by the network is `-r`, so line flows
//! are `H * (-r)`. Prices are never clamped at zero.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::linalg::{dot, Lu, Matrix};
use crate::{Error, Result};

/// Default absolute tolerance for feasibility predicates.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Shift-factor network: `n` nodes, `ell` lines, flows `H * injection`.
///
/// Line capacities may be `f64::INFINITY`, in which case the line imposes no
/// constraint at all.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    nodes: usize,
    shift_factors: Matrix,
    capacities: Vec<f64>,
}

/// A transmission line between two nodes with a positive susceptance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub susceptance: f64,
}

impl NetworkModel {
    pub fn new(nodes: usize, shift_factors: Matrix, capacities: Vec<f64>) -> Result<Self> {
        if nodes == 0 {
            return Err(Error::InvalidParameter("network needs at least one node".to_string()));
        }
        if shift_factors.cols() != nodes {
            return Err(Error::ShapeMismatch {
                what: "shift-factor columns",
                expected: nodes,
                found: shift_factors.cols(),
            });
        }
        if shift_factors.rows() != capacities.len() {
            return Err(Error::ShapeMismatch {
                what: "line capacities",
                expected: shift_factors.rows(),
                found: capacities.len(),
            });
        }
        if let Some(l) = capacities.iter().position(|f| f.is_nan() || *f < 0.0) {
            return Err(Error::InvalidParameter(alloc::format!(
                "capacity of line {l} must be nonnegative"
            )));
        }
        if shift_factors.iter_rows().flatten().any(|h| !h.is_finite()) {
            return Err(Error::InvalidParameter("shift factors must be finite".to_string()));
        }
        Ok(NetworkModel {
            nodes,
            shift_factors,
            capacities,
        })
    }

    /// Builds the network from a line list, computing the shift factors with
    /// `slack` as the reference node.
    pub fn from_branches(nodes: usize, branches: &[Branch], capacities: Vec<f64>, slack: usize) -> Result<Self> {
        let h = shift_factors_from_susceptances(nodes, branches, slack)?;
        NetworkModel::new(nodes, h, capacities)
    }

    /// A single isolated node.
    pub fn single_node() -> Self {
        NetworkModel {
            nodes: 1,
            shift_factors: Matrix::zeros(0, 1),
            capacities: Vec::new(),
        }
    }

    /// Two nodes joined by one line with flow `1 -> 2` equal to the node-1
    /// injection. `None` means the line is unconstrained.
    pub fn two_node(capacity: Option<f64>) -> Result<Self> {
        let h = Matrix::from_rows(&[[1.0, 0.0]], 2).expect("static shape");
        NetworkModel::new(2, h, vec![capacity.unwrap_or(f64::INFINITY)])
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn lines(&self) -> usize {
        self.capacities.len()
    }

    pub fn shift_factors(&self) -> &Matrix {
        &self.shift_factors
    }

    pub fn capacities(&self) -> &[f64] {
        &self.capacities
    }

    /// Same topology with every capacity replaced.
    pub fn with_capacities(&self, capacities: Vec<f64>) -> Result<Self> {
        NetworkModel::new(self.nodes, self.shift_factors.clone(), capacities)
    }

    /// Line flows `H * (-r)` for a re-balancing vector.
    pub fn flows(&self, r: &[f64]) -> Result<Vec<f64>> {
        check_len("rebalance", self.nodes, r.len())?;
        Ok(self.shift_factors.iter_rows().map(|row| 0.0 - dot(row, r)).collect())
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::ShapeMismatch { what, expected, found })
    }
}

/// DC power-flow shift factors (PTDF) for a connected network.
///
/// Row `l` gives the flow on line `l` (positive from `from` to `to`) per
/// unit injection at each node, withdrawn at `slack`. The slack column is
/// zero; for balanced injections the result does not depend on the slack.
pub fn shift_factors_from_susceptances(nodes: usize, branches: &[Branch], slack: usize) -> Result<Matrix> {
    if nodes == 0 {
        return Err(Error::InvalidParameter("network needs at least one node".to_string()));
    }
    if slack >= nodes {
        return Err(Error::IndexOutOfRange { index: slack, len: nodes });
    }
    for (l, br) in branches.iter().enumerate() {
        if br.from >= nodes || br.to >= nodes {
            return Err(Error::IndexOutOfRange {
                index: br.from.max(br.to),
                len: nodes,
            });
        }
        if br.from == br.to {
            return Err(Error::InvalidParameter(alloc::format!("line {l} is a self-loop")));
        }
        if !(br.susceptance > 0.0 && br.susceptance.is_finite()) {
            return Err(Error::NonpositiveSusceptance {
                line: l,
                value: br.susceptance,
            });
        }
    }

    // union-find connectivity check
    let mut parent: Vec<usize> = (0..nodes).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for br in branches {
        let (a, b) = (find(&mut parent, br.from), find(&mut parent, br.to));
        parent[a] = b;
    }
    let root = find(&mut parent, 0);
    if (1..nodes).any(|k| find(&mut parent, k) != root) {
        return Err(Error::Disconnected);
    }

    let mut h = Matrix::zeros(branches.len(), nodes);
    if nodes == 1 {
        return Ok(h);
    }

    // reduced susceptance matrix without the slack row/column
    let reduced: Vec<usize> = (0..nodes).filter(|&k| k != slack).collect();
    let pos = |k: usize| reduced.iter().position(|&j| j == k);
    let m = nodes - 1;
    let mut b = vec![0.0; m * m];
    for br in branches {
        let (i, j, s) = (pos(br.from), pos(br.to), br.susceptance);
        if let Some(i) = i {
            b[i * m + i] += s;
        }
        if let Some(j) = j {
            b[j * m + j] += s;
        }
        if let (Some(i), Some(j)) = (i, j) {
            b[i * m + j] -= s;
            b[j * m + i] -= s;
        }
    }
    let lu = Lu::new(&b, m, 1e-13).ok_or(Error::Disconnected)?;
    let x = lu.inverse();
    let angle = |node: usize, inj: usize| -> f64 {
        match (pos(node), pos(inj)) {
            (Some(i), Some(j)) => x[i * m + j],
            _ => 0.0,
        }
    };
    for (l, br) in branches.iter().enumerate() {
        for k in 0..nodes {
            h.set(l, k, br.susceptance * (angle(br.from, k) - angle(br.to, k)));
        }
    }
    Ok(h)
}

/// Linear inverse demand `p_k(d) = a_k - b_k d` and quadratic generation
/// cost `c_k q^2` at every node.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MarketParams {
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl MarketParams {
    pub fn new(a: Vec<f64>, b: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        check_len("demand slopes", a.len(), b.len())?;
        check_len("cost coefficients", a.len(), c.len())?;
        if a.is_empty() {
            return Err(Error::InvalidParameter("market needs at least one node".to_string()));
        }
        for k in 0..a.len() {
            if !(a[k] > 0.0 && a[k].is_finite()) {
                return Err(Error::InvalidParameter(alloc::format!("a[{k}] must be positive")));
            }
            if !(b[k] >= 0.0 && b[k].is_finite()) {
                return Err(Error::InvalidParameter(alloc::format!("b[{k}] must be nonnegative")));
            }
            if !(c[k] > 0.0 && c[k].is_finite()) {
                return Err(Error::InvalidParameter(alloc::format!("c[{k}] must be positive")));
            }
        }
        Ok(MarketParams { a, b, c })
    }

    /// Same parameters at every node.
    pub fn uniform(nodes: usize, a: f64, b: f64, c: f64) -> Result<Self> {
        MarketParams::new(vec![a; nodes], vec![b; nodes], vec![c; nodes])
    }

    pub fn nodes(&self) -> usize {
        self.a.len()
    }

    pub fn intercepts(&self) -> &[f64] {
        &self.a
    }

    pub fn slopes(&self) -> &[f64] {
        &self.b
    }

    pub fn costs(&self) -> &[f64] {
        &self.c
    }

    fn check_index(&self, k: usize) -> Result<()> {
        if k < self.nodes() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { index: k, len: self.nodes() })
        }
    }

    fn check_profile(&self, q: &[f64], r: &[f64]) -> Result<()> {
        check_len("production", self.nodes(), q.len())?;
        check_len("rebalance", self.nodes(), r.len())
    }

    /// Nodal price at demand `d`. May be negative.
    pub fn price(&self, k: usize, d: f64) -> Result<f64> {
        self.check_index(k)?;
        Ok(self.a[k] - self.b[k] * d)
    }

    /// Consumer utility `int_0^d p_k(w) dw = a_k d - b_k d^2 / 2`.
    pub fn utility(&self, k: usize, d: f64) -> Result<f64> {
        self.check_index(k)?;
        Ok(self.a[k] * d - 0.5 * self.b[k] * d * d)
    }

    /// Generator profit `q_k p_k(q_k + r_k) - c_k q_k^2`.
    pub fn generator_profit(&self, k: usize, q: &[f64], r: &[f64]) -> Result<f64> {
        self.check_index(k)?;
        self.check_profile(q, r)?;
        Ok(self.profit_at(k, q[k], r[k]))
    }

    /// Profit of generator `k` producing `qk` against re-balance `rk`.
    pub(crate) fn profit_at(&self, k: usize, qk: f64, rk: f64) -> f64 {
        qk * (self.a[k] - self.b[k] * (qk + rk)) - self.c[k] * qk * qk
    }

    pub fn welfare(&self, q: &[f64], r: &[f64], objective: Objective) -> Result<f64> {
        self.check_profile(q, r)?;
        Ok((0..self.nodes())
            .map(|k| {
                let d = q[k] + r[k];
                let utility = self.a[k] * d - 0.5 * self.b[k] * d * d;
                let price = self.a[k] - self.b[k] * d;
                utility
                    - match objective {
                        Objective::SocialWelfare => self.c[k] * q[k] * q[k],
                        Objective::ResidualSocialWelfare => q[k] * price,
                        Objective::ConsumerSurplus => d * price,
                    }
            })
            .sum())
    }

    /// Demand payments minus generator revenue, `sum_k r_k p_k(q_k + r_k)`.
    pub fn merchandising_surplus(&self, q: &[f64], r: &[f64]) -> Result<f64> {
        self.check_profile(q, r)?;
        Ok((0..self.nodes())
            .map(|k| r[k] * (self.a[k] - self.b[k] * (q[k] + r[k])))
            .sum())
    }
}

/// The market maker's payoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Objective {
    /// Utility less generation cost.
    SocialWelfare,
    /// Utility less generator revenue.
    ResidualSocialWelfare,
    /// Utility less consumer payments.
    ConsumerSurplus,
}

impl Objective {
    pub const ALL: [Objective; 3] = [
        Objective::SocialWelfare,
        Objective::ResidualSocialWelfare,
        Objective::ConsumerSurplus,
    ];

    /// Short tag used on the command line and in data files.
    pub fn tag(self) -> &'static str {
        match self {
            Objective::SocialWelfare => "soc",
            Objective::ResidualSocialWelfare => "res",
            Objective::ConsumerSurplus => "con",
        }
    }

    /// Whether the payoff is concave in the re-balancing vector.
    pub fn is_concave(self) -> bool {
        !matches!(self, Objective::ConsumerSurplus)
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "soc" | "social_welfare" => Ok(Objective::SocialWelfare),
            "res" | "residual_social_welfare" => Ok(Objective::ResidualSocialWelfare),
            "con" | "consumer_surplus" => Ok(Objective::ConsumerSurplus),
            _ => Err(Error::InvalidParameter(alloc::format!("unknown objective {s:?}"))),
        }
    }
}

/// `q + r >= -tol`, `|H r| <= f + tol` and `|sum r| <= tol`.
pub fn is_feasible_rebalance(net: &NetworkModel, q: &[f64], r: &[f64], tol: f64) -> Result<bool> {
    check_len("production", net.nodes(), q.len())?;
    check_len("rebalance", net.nodes(), r.len())?;
    if q.iter().zip(r).any(|(qk, rk)| qk + rk < -tol) {
        return Ok(false);
    }
    if r.iter().sum::<f64>().abs() > tol {
        return Ok(false);
    }
    Ok(net
        .shift_factors()
        .iter_rows()
        .zip(net.capacities())
        .all(|(row, f)| dot(row, r).abs() <= f + tol))
}

/// A production / re-balancing profile together with everything derived from
/// it.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MarketOutcome {
    pub q: Vec<f64>,
    pub r: Vec<f64>,
    pub d: Vec<f64>,
    pub prices: Vec<f64>,
    pub flows: Vec<f64>,
    pub profits: Vec<f64>,
    pub w_soc: f64,
    pub w_res: f64,
    pub w_con: f64,
    pub merch_surplus: f64,
}

impl MarketOutcome {
    pub fn evaluate(net: &NetworkModel, params: &MarketParams, q: &[f64], r: &[f64]) -> Result<Self> {
        check_len("market nodes", net.nodes(), params.nodes())?;
        params.check_profile(q, r)?;
        let n = params.nodes();
        let d: Vec<f64> = q.iter().zip(r).map(|(a, b)| a + b).collect();
        let prices = (0..n).map(|k| params.a[k] - params.b[k] * d[k]).collect();
        let profits = (0..n).map(|k| params.profit_at(k, q[k], r[k])).collect();
        Ok(MarketOutcome {
            q: q.to_vec(),
            r: r.to_vec(),
            d,
            prices,
            flows: net.flows(r)?,
            profits,
            w_soc: params.welfare(q, r, Objective::SocialWelfare)?,
            w_res: params.welfare(q, r, Objective::ResidualSocialWelfare)?,
            w_con: params.welfare(q, r, Objective::ConsumerSurplus)?,
            merch_surplus: params.merchandising_surplus(q, r)?,
        })
    }

    pub fn welfare(&self, objective: Objective) -> f64 {
        match objective {
            Objective::SocialWelfare => self.w_soc,
            Objective::ResidualSocialWelfare => self.w_res,
            Objective::ConsumerSurplus => self.w_con,
        }
    }
}
