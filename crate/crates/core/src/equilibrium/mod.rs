//! Generalized Nash equilibrium search, verification and a brute-force grid
//! oracle.
//!
//! A profile `(q, r)` is an equilibrium when every generator's `q_k` is a
//! best response to `r` and `r` maximizes the market maker's objective over
//! `S(q)`. When the market maker has several maximizers any of them is
//! accepted.

mod scan;
mod search;
mod verify;

pub use scan::{brute_force_gne_scan, GneCell, ScanReport};
pub use search::gne_search;
pub use verify::{verify_gne, GeneratorCertificate, GneCertificate, MarketMakerCertificate};

use alloc::vec::Vec;

use crate::model::{MarketOutcome, MarketParams, NetworkModel, DEFAULT_TOL};
use crate::polytope::{build_polytope, enumerate_vertices, DEFAULT_MAX_DIM, DEFAULT_TIE_TOL};
use crate::responses::ResponseOptions;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum GneStatus {
    Converged,
    /// Best responses revisit an earlier profile. Evidence that no
    /// equilibrium exists, not a proof.
    CycleDetected,
    IterationLimit,
    /// The initial production is negative or not finite.
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Profile {
    pub q: Vec<f64>,
    pub r: Vec<f64>,
}

impl Profile {
    pub fn new(q: Vec<f64>, r: Vec<f64>) -> Self {
        Profile { q, r }
    }

    /// Zero production and zero re-balancing.
    pub fn zero(nodes: usize) -> Self {
        Profile {
            q: alloc::vec![0.0; nodes],
            r: alloc::vec![0.0; nodes],
        }
    }

    /// Max-norm distance over both blocks.
    pub fn distance(&self, other: &Profile) -> f64 {
        crate::linalg::max_abs_diff(&self.q, &other.q).max(crate::linalg::max_abs_diff(&self.r, &other.r))
    }
}

/// Profiles visited periodically by best-response rounds, oldest first.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Cycle {
    pub period: usize,
    pub profiles: Vec<Profile>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SearchConfig {
    pub max_iter: usize,
    /// Convergence threshold on the max-norm change of one round.
    pub point_tol: f64,
    /// Number of past profiles kept for cycle matching.
    pub cycle_window: usize,
    /// Distance under which two profiles count as the same.
    pub cycle_tol: f64,
    /// Smallest spread of a cycle. Tighter loops are treated as slow
    /// convergence.
    pub min_cycle_spread: f64,
    /// Grid intervals per axis of the brute-force scan.
    pub grid_steps: usize,
    /// Tolerance handed to the verifier.
    pub verify_tol: f64,
    pub tie_tol: f64,
    pub feas_tol: f64,
    pub max_dim: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            max_iter: 10_000,
            point_tol: 1e-8,
            cycle_window: 64,
            cycle_tol: 1e-9,
            min_cycle_spread: 1e-6,
            grid_steps: 200,
            verify_tol: 1e-7,
            tie_tol: DEFAULT_TIE_TOL,
            feas_tol: DEFAULT_TOL,
            max_dim: DEFAULT_MAX_DIM,
        }
    }
}

impl SearchConfig {
    pub(crate) fn response_options(&self) -> ResponseOptions {
        ResponseOptions {
            tol: self.feas_tol,
            tie_tol: self.tie_tol,
            max_dim: self.max_dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GneResult {
    pub status: GneStatus,
    /// Set when converged.
    pub point: Option<MarketOutcome>,
    /// Set when a cycle was found.
    pub cycle: Option<Cycle>,
    /// Max-norm change of each round.
    pub trace: Vec<f64>,
    pub iterations: usize,
    /// Verification of the converged point.
    pub certificate: Option<GneCertificate>,
    /// The market maker had several maximizers at the last profile.
    pub ties: bool,
}

/// Upper end of the production search box for every node:
/// `a_k / b_k + (n - 1) rbar / b_k`, where `rbar` is the largest `|r_k|` over
/// `S(qbar)` and `qbar_k = a_k / (b_k + 2 c_k)` bounds equilibrium production.
/// Nodes with `b_k = 0` use `a_k / (2 c_k)`, the only best response there.
pub fn search_box(net: &NetworkModel, params: &MarketParams) -> Result<Vec<f64>> {
    let (a, b, c) = (params.intercepts(), params.slopes(), params.costs());
    let n = params.nodes();
    let qbar: Vec<f64> = (0..n).map(|k| a[k] / (b[k] + 2.0 * c[k])).collect();
    let rbar = max_rebalance(net, &qbar)?;
    Ok((0..n)
        .map(|k| {
            if b[k] > 0.0 {
                (a[k] + (n as f64 - 1.0) * rbar) / b[k]
            } else {
                a[k] / (2.0 * c[k])
            }
        })
        .collect())
}

/// Largest `|r_k|` over `S(q)`. Falls back to the bound `sum q` when the
/// vertices cannot be enumerated.
pub(crate) fn max_rebalance(net: &NetworkModel, q: &[f64]) -> Result<f64> {
    let poly = build_polytope(net, q)?;
    Ok(match enumerate_vertices(&poly, DEFAULT_TOL) {
        Ok(vertices) => vertices
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0_f64, |m, x| m.max(x.abs())),
        Err(_) => q.iter().sum(),
    })
}
