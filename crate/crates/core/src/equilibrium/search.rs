use alloc::vec::Vec;

use super::verify::verify_gne_with;
use super::{Cycle, GneResult, GneStatus, Profile, SearchConfig};
use crate::model::{check_len, MarketOutcome, MarketParams, NetworkModel, Objective};
use crate::polytope::{build_polytope, maximize_concave_quadratic, SeparableQuadratic};
use crate::responses::{generator_best_response, market_maker_response_with};
use crate::Result;

/// Best-response iteration from `init`.
///
/// Each round moves every generator to its best response against the current
/// `r`, then lets the market maker respond to the new `q`. The initial `r` is
/// first projected onto `S(q0)`. Deterministic.
pub fn gne_search(
    net: &NetworkModel,
    params: &MarketParams,
    objective: Objective,
    init: &Profile,
    config: &SearchConfig,
) -> Result<GneResult> {
    let n = net.nodes();
    check_len("market nodes", n, params.nodes())?;
    check_len("initial production", n, init.q.len())?;
    check_len("initial rebalance", n, init.r.len())?;
    if init.q.iter().chain(&init.r).any(|v| !v.is_finite()) || init.q.iter().any(|v| *v < 0.0) {
        return Ok(empty_result(GneStatus::Infeasible));
    }
    let opts = config.response_options();

    let r0 = project(net, &init.q, &init.r, config.feas_tol)?;
    let mut current = Profile::new(init.q.clone(), r0);
    let mut history: Vec<Profile> = Vec::with_capacity(config.cycle_window + 1);
    history.push(current.clone());
    let mut trace = Vec::new();
    let mut ties = false;

    for iter in 1..=config.max_iter {
        let q: Vec<f64> = (0..n).map(|k| generator_best_response(params, k, current.r[k])).collect();
        let response = market_maker_response_with(net, params, &q, objective, opts)?;
        ties = response.alternatives.len() > 1;
        let next = Profile::new(q, response.argmax);
        let change = next.distance(&current);
        trace.push(change);
        current = next;

        if change < config.point_tol {
            let cert = verify_gne_with(net, params, objective, &current.q, &current.r, config.verify_tol, opts)?;
            if cert.is_gne {
                return Ok(GneResult {
                    status: GneStatus::Converged,
                    point: Some(MarketOutcome::evaluate(net, params, &current.q, &current.r)?),
                    cycle: None,
                    trace,
                    iterations: iter,
                    certificate: Some(cert),
                    ties,
                });
            }
        } else if let Some(cycle) = find_cycle(&history, &current, config) {
            return Ok(GneResult {
                status: GneStatus::CycleDetected,
                point: None,
                cycle: Some(cycle),
                trace,
                iterations: iter,
                certificate: None,
                ties,
            });
        }

        history.push(current.clone());
        if history.len() > config.cycle_window {
            history.remove(0);
        }
    }
    Ok(GneResult {
        iterations: config.max_iter,
        trace,
        ties,
        ..empty_result(GneStatus::IterationLimit)
    })
}

fn empty_result(status: GneStatus) -> GneResult {
    GneResult {
        status,
        point: None,
        cycle: None,
        trace: Vec::new(),
        iterations: 0,
        certificate: None,
        ties: false,
    }
}

/// Euclidean projection of `r` onto `S(q)`.
fn project(net: &NetworkModel, q: &[f64], r: &[f64], tol: f64) -> Result<Vec<f64>> {
    let poly = build_polytope(net, q)?;
    if poly.contains(r, tol) {
        return Ok(r.to_vec());
    }
    let quad = SeparableQuadratic {
        linear: r.to_vec(),
        curvature: alloc::vec![-1.0; r.len()],
    };
    Ok(maximize_concave_quadratic(&poly, &quad, tol)?.point)
}

/// Smallest lag `>= 2` at which `next` repeats a stored profile, provided the
/// profiles in between are spread out enough to be a genuine cycle.
fn find_cycle(history: &[Profile], next: &Profile, config: &SearchConfig) -> Option<Cycle> {
    let len = history.len();
    for lag in 2..=len {
        let earlier = &history[len - lag];
        if earlier.distance(next) > config.cycle_tol {
            continue;
        }
        let profiles: Vec<Profile> = history[len - lag..].to_vec();
        let spread = profiles
            .iter()
            .map(|p| p.distance(&profiles[0]))
            .fold(0.0_f64, f64::max);
        if spread >= config.min_cycle_spread {
            return Some(Cycle { period: lag, profiles });
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;

    fn params() -> MarketParams {
        MarketParams::new(vec![10.0, 10.0], vec![1.2, 1.0], vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn residual_welfare_converges_to_zero_rebalance() {
        let net = NetworkModel::two_node(Some(2.0)).unwrap();
        let res = gne_search(&net, &params(), Objective::ResidualSocialWelfare, &Profile::zero(2), &SearchConfig::default()).unwrap();
        assert_eq!(res.status, GneStatus::Converged);
        let point = res.point.unwrap();
        assert_relative_eq!(point.q[0], 10.0 / 4.4, epsilon = 1e-9);
        assert_relative_eq!(point.q[1], 2.5, epsilon = 1e-9);
        assert!(point.r.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn consumer_surplus_cycles_at_capacity_two() {
        let net = NetworkModel::two_node(Some(2.0)).unwrap();
        let res = gne_search(&net, &params(), Objective::ConsumerSurplus, &Profile::zero(2), &SearchConfig::default()).unwrap();
        assert_eq!(res.status, GneStatus::CycleDetected);
        let cycle = res.cycle.unwrap();
        assert_eq!(cycle.period, 2);
        let mut rs: Vec<f64> = cycle.profiles.iter().map(|p| p.r[0]).collect();
        rs.sort_by(f64::total_cmp);
        assert_relative_eq!(rs[1], 2.0, epsilon = 1e-12);
        assert!(rs[0] < 0.0);
    }

    #[test]
    fn consumer_surplus_converges_above_threshold() {
        let net = NetworkModel::two_node(Some(4.0)).unwrap();
        let res = gne_search(&net, &params(), Objective::ConsumerSurplus, &Profile::zero(2), &SearchConfig::default()).unwrap();
        assert_eq!(res.status, GneStatus::Converged);
        let point = res.point.unwrap();
        assert_relative_eq!(point.r[0], 10.0 / 3.0, epsilon = 1e-9);
        assert_relative_eq!(point.q[1], 10.0 / 3.0, epsilon = 1e-9);
        assert_relative_eq!(point.q[0], 18.0 / 13.2, epsilon = 1e-9);
    }

    #[test]
    fn infeasible_start() {
        let net = NetworkModel::two_node(Some(2.0)).unwrap();
        let init = Profile::new(vec![-1.0, 0.0], vec![0.0, 0.0]);
        let res = gne_search(&net, &params(), Objective::SocialWelfare, &init, &SearchConfig::default()).unwrap();
        assert_eq!(res.status, GneStatus::Infeasible);
    }

    #[test]
    fn initial_rebalance_is_projected() {
        let net = NetworkModel::two_node(Some(1.0)).unwrap();
        assert_eq!(project(&net, &[5.0, 5.0], &[3.0, -3.0], 1e-9).unwrap(), vec![1.0, -1.0]);
    }

    #[test]
    fn deterministic() {
        let net = NetworkModel::two_node(Some(2.5)).unwrap();
        let init = Profile::new(vec![1.0, 3.0], vec![0.5, -0.5]);
        let a = gne_search(&net, &params(), Objective::SocialWelfare, &init, &SearchConfig::default()).unwrap();
        let b = gne_search(&net, &params(), Objective::SocialWelfare, &init, &SearchConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}
