//! Best responses of the generators and the market maker.

use alloc::vec::Vec;

use crate::model::{check_len, MarketParams, NetworkModel, Objective, DEFAULT_TOL};
use crate::polytope::{
    build_polytope, maximize_concave_quadratic, maximize_convex_quadratic_on_vertices_with, SeparableQuadratic,
    VertexLimits, DEFAULT_MAX_DIM, DEFAULT_TIE_TOL,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Player {
    Generator(usize),
    MarketMaker,
}

/// A best response and the payoff it earns.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ResponseReport {
    pub player: Player,
    pub argmax: Vec<f64>,
    pub payoff: f64,
    /// Other maximizers within the tie tolerance, including `argmax`.
    /// Only filled for the consumer-surplus objective.
    pub alternatives: Vec<Vec<f64>>,
}

/// `max(0, (a_k - b_k r_k) / (2 (b_k + c_k)))`, the unique profit maximizer
/// over `q_k >= 0`.
pub fn generator_best_response(params: &MarketParams, k: usize, r_k: f64) -> f64 {
    let (a, b, c) = (params.intercepts()[k], params.slopes()[k], params.costs()[k]);
    ((a - b * r_k) / (2.0 * (b + c))).max(0.0)
}

/// Generator `k`'s best response wrapped in a report.
pub fn generator_response(params: &MarketParams, k: usize, r: &[f64]) -> Result<ResponseReport> {
    check_len("rebalance", params.nodes(), r.len())?;
    if k >= params.nodes() {
        return Err(Error::IndexOutOfRange { index: k, len: params.nodes() });
    }
    let q = generator_best_response(params, k, r[k]);
    Ok(ResponseReport {
        player: Player::Generator(k),
        argmax: alloc::vec![q],
        payoff: params.profit_at(k, q, r[k]),
        alternatives: Vec::new(),
    })
}

/// The market maker's objective in `r` for fixed `q`, up to a constant.
pub fn market_maker_quadratic(params: &MarketParams, q: &[f64], objective: Objective) -> SeparableQuadratic {
    let (a, b) = (params.intercepts(), params.slopes());
    let n = params.nodes();
    match objective {
        Objective::SocialWelfare => SeparableQuadratic {
            linear: (0..n).map(|k| a[k] - b[k] * q[k]).collect(),
            curvature: b.iter().map(|v| -v).collect(),
        },
        Objective::ResidualSocialWelfare => SeparableQuadratic {
            linear: a.to_vec(),
            curvature: b.iter().map(|v| -v).collect(),
        },
        Objective::ConsumerSurplus => SeparableQuadratic {
            linear: (0..n).map(|k| b[k] * q[k]).collect(),
            curvature: b.to_vec(),
        },
    }
}

/// Tolerances for [`market_maker_response_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseOptions {
    /// Feasibility tolerance.
    pub tol: f64,
    /// Absolute payoff tolerance for ties among vertices.
    pub tie_tol: f64,
    pub max_dim: usize,
}

impl Default for ResponseOptions {
    fn default() -> Self {
        ResponseOptions {
            tol: DEFAULT_TOL,
            tie_tol: DEFAULT_TIE_TOL,
            max_dim: DEFAULT_MAX_DIM,
        }
    }
}

/// Exact maximizer of the market maker's objective over `S(q)`.
pub fn market_maker_response(
    net: &NetworkModel,
    params: &MarketParams,
    q: &[f64],
    objective: Objective,
) -> Result<ResponseReport> {
    market_maker_response_with(net, params, q, objective, ResponseOptions::default())
}

pub fn market_maker_response_with(
    net: &NetworkModel,
    params: &MarketParams,
    q: &[f64],
    objective: Objective,
    opts: ResponseOptions,
) -> Result<ResponseReport> {
    check_len("market nodes", net.nodes(), params.nodes())?;
    let poly = build_polytope(net, q)?;
    let quad = market_maker_quadratic(params, q, objective);
    let (argmax, alternatives) = if objective.is_concave() {
        (maximize_concave_quadratic(&poly, &quad, opts.tol)?.point, Vec::new())
    } else {
        let limits = VertexLimits {
            max_dim: opts.max_dim,
            ..VertexLimits::default()
        };
        let best = maximize_convex_quadratic_on_vertices_with(&poly, &quad, opts.tie_tol, opts.tol, limits)?;
        (best.argmax, best.near_optimal)
    };
    Ok(ResponseReport {
        player: Player::MarketMaker,
        payoff: params.welfare(q, &argmax, objective)?,
        argmax,
        alternatives,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn market(b1: f64) -> MarketParams {
        MarketParams::new(alloc::vec![10.0, 10.0], alloc::vec![b1, 1.0], alloc::vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn generator_examples() {
        let p = market(1.2);
        assert_relative_eq!(generator_best_response(&p, 0, 0.0), 10.0 / 4.4, epsilon = 1e-12);
        assert_relative_eq!(generator_best_response(&p, 1, -10.0 / 3.0), 10.0 / 3.0, epsilon = 1e-12);
        let unit = MarketParams::uniform(1, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(generator_best_response(&unit, 0, 2.0), 0.0);
    }

    #[test]
    fn generator_report_payoff() {
        let p = market(1.2);
        let rep = generator_response(&p, 0, &[0.0, 0.0]).unwrap();
        // profit at the stationary point is a^2 / (4 (b + c))
        assert_relative_eq!(rep.payoff, 100.0 / 8.8, epsilon = 1e-12);
        assert!(generator_response(&p, 2, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn quadratic_matches_welfare_differences() {
        let p = market(1.2);
        let q = [2.0, 3.0];
        for obj in Objective::ALL {
            let quad = market_maker_quadratic(&p, &q, obj);
            let base = p.welfare(&q, &[0.0, 0.0], obj).unwrap();
            for r in [[1.0, -1.0], [-0.5, 0.5], [2.5, -2.5]] {
                let diff = p.welfare(&q, &r, obj).unwrap() - base;
                assert_relative_eq!(quad.value(&r), diff, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn residual_welfare_keeps_zero() {
        let net = NetworkModel::two_node(Some(2.0)).unwrap();
        let rep = market_maker_response(&net, &market(1.2), &[4.0, 0.5], Objective::ResidualSocialWelfare).unwrap();
        assert!(rep.argmax.iter().all(|v| v.abs() < 1e-12));
        assert!(rep.alternatives.is_empty());
    }

    #[test]
    fn social_welfare_interior() {
        let net = NetworkModel::two_node(Some(1e6)).unwrap();
        let q = [2.0, 3.0];
        let rep = market_maker_response(&net, &market(1.2), &q, Objective::SocialWelfare).unwrap();
        assert_relative_eq!(rep.argmax[0], (3.0 - 1.2 * 2.0) / 2.2, epsilon = 1e-12);
    }

    #[test]
    fn consumer_surplus_picks_better_endpoint() {
        let net = NetworkModel::two_node(Some(2.0)).unwrap();
        let p = market(1.2);
        let q = [2.0, 3.0];
        let rep = market_maker_response(&net, &p, &q, Objective::ConsumerSurplus).unwrap();
        let lo = p.welfare(&q, &[-2.0, 2.0], Objective::ConsumerSurplus).unwrap();
        let hi = p.welfare(&q, &[2.0, -2.0], Objective::ConsumerSurplus).unwrap();
        let expected = if hi >= lo { 2.0 } else { -2.0 };
        assert_relative_eq!(rep.argmax[0], expected, epsilon = 1e-12);
        assert_relative_eq!(rep.payoff, hi.max(lo), epsilon = 1e-12);
        assert_eq!(rep.alternatives.len(), 1);
    }
}
