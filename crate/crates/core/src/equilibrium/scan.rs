//! Brute-force equilibrium oracle on a production grid.
//!
//! For every grid point `qh` the market maker's response set at `qh` is
//! computed exactly and the generators' best responses to it are compared
//! with `qh`. An equilibrium `(q*, r*)` has a grid neighbour within half a
//! step; the slacks below bound how far the tests at that neighbour can
//! drift from the exact conditions at `q*`, so an empty result means no
//! equilibrium at this resolution.
//!
//! Production moves re-balancing by at most `L` times as much (max-norm),
//! where `L` is the largest sensitivity `dr/dq` over all active sets
//! (concave objectives) or all vertex bases (consumer surplus). The
//! consumer-surplus regret slack bounds the drift of the payoff gap
//! between two vertices along every basis either vertex can switch to.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::{search_box, Profile, SearchConfig};
use crate::linalg::{for_each_combination, Lu};
use crate::model::{MarketParams, NetworkModel, Objective};
use crate::polytope::{
    build_polytope, maximize_convex_quadratic_on_vertices_with, ConstraintKind, RebalancePolytope, VertexLimits,
};
use crate::responses::{generator_best_response, market_maker_quadratic, market_maker_response_with};
use crate::{Error, Result};

/// Largest network the scan accepts.
pub const SCAN_MAX_NODES: usize = 3;

/// A connected group of grid points that pass the equilibrium tests.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GneCell {
    /// Bounding box of the member grid points.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub points: usize,
    /// Member with the smallest generator gap, and the response used there.
    pub representative: Profile,
}

impl GneCell {
    /// Whether `q` lies in the bounding box widened by `margin` per axis.
    pub fn covers(&self, q: &[f64], margin: &[f64]) -> bool {
        (0..q.len()).all(|k| q[k] >= self.lower[k] - margin[k] && q[k] <= self.upper[k] + margin[k])
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScanReport {
    pub cells: Vec<GneCell>,
    pub grid_steps: usize,
    /// Upper corner of the production box; the lower corner is zero.
    pub box_upper: Vec<f64>,
    /// Grid spacing per axis.
    pub step: Vec<f64>,
    /// Sensitivity bound of re-balancing on production.
    pub lipschitz: f64,
    /// Allowed gap between grid production and best response, per node.
    pub generator_slack: Vec<f64>,
    pub points_examined: usize,
    /// Smallest value over the grid of `max_k (|qh_k - BR_k| - slack_k)`.
    /// Positive when no cell was found: the margin of the nonexistence
    /// evidence.
    pub closest_miss: f64,
}

impl ScanReport {
    pub fn exists(&self) -> bool {
        !self.cells.is_empty()
    }

    /// Largest grid spacing over the axes.
    pub fn resolution(&self) -> f64 {
        self.step.iter().copied().fold(0.0, f64::max)
    }
}

pub fn brute_force_gne_scan(
    net: &NetworkModel,
    params: &MarketParams,
    objective: Objective,
    config: &SearchConfig,
) -> Result<ScanReport> {
    let n = net.nodes();
    crate::model::check_len("market nodes", n, params.nodes())?;
    if n > SCAN_MAX_NODES {
        return Err(Error::DimensionLimit {
            dim: n,
            limit: SCAN_MAX_NODES,
        });
    }
    if params.slopes().iter().any(|b| *b <= 0.0) {
        return Err(Error::Unsupported("grid scan needs positive demand slopes"));
    }
    let (b, c) = (params.slopes(), params.costs());
    let steps = config.grid_steps.max(1);
    let box_upper = search_box(net, params)?;
    let step: Vec<f64> = box_upper.iter().map(|s| s / steps as f64).collect();
    let rho = step.iter().copied().fold(0.0, f64::max) / 2.0;

    let shape = build_polytope(net, &vec![0.0; n])?;
    let lipschitz = if objective.is_concave() {
        concave_sensitivity(&shape, b, objective)
    } else {
        vertex_sensitivity(&shape)
    };
    let generator_slack: Vec<f64> = (0..n)
        .map(|k| step[k] / 2.0 + b[k] / (2.0 * (b[k] + c[k])) * lipschitz * rho)
        .collect();
    let opts = config.response_options();
    let limits = VertexLimits {
        max_dim: config.max_dim,
        ..VertexLimits::default()
    };

    let side = steps + 1;
    let total = side.pow(n as u32);
    let mut passing: Vec<(usize, Profile, f64)> = Vec::new();
    let mut closest_miss = f64::INFINITY;
    let mut q = vec![0.0; n];
    let mut idx = vec![0usize; n];

    for flat in 0..total {
        decode(flat, side, &mut idx);
        for k in 0..n {
            q[k] = idx[k] as f64 * step[k];
        }
        let gap_of = |r: &[f64]| -> f64 {
            (0..n)
                .map(|k| (q[k] - generator_best_response(params, k, r[k])).abs() - generator_slack[k])
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let mut best: Option<(f64, Vec<f64>)> = None;
        if objective.is_concave() {
            let r = market_maker_response_with(net, params, &q, objective, opts)?.argmax;
            best = Some((gap_of(&r), r));
        } else {
            let poly = build_polytope(net, &q)?;
            let quad = market_maker_quadratic(params, &q, objective);
            let scan = maximize_convex_quadratic_on_vertices_with(&poly, &quad, 0.0, opts.tol, limits)?;
            let top = scan
                .vertices
                .iter()
                .position(|v| *v == scan.argmax)
                .expect("argmax is a vertex");
            let moves: Vec<Vec<Vec<f64>>> = scan
                .vertices
                .iter()
                .map(|v| nearby_bases(&poly, v, lipschitz, rho))
                .collect();
            for (i, (v, val)) in scan.vertices.iter().zip(&scan.values).enumerate() {
                let regret = scan.value - val;
                if i == top || regret <= regret_drift(b, &q, &scan.vertices[top], &moves[top], v, &moves[i], rho) {
                    let gap = gap_of(v);
                    if best.as_ref().is_none_or(|(g, _)| gap < *g) {
                        best = Some((gap, v.clone()));
                    }
                }
            }
        }
        let (gap, r) = best.ok_or(Error::EmptyPolytope)?;
        closest_miss = closest_miss.min(gap);
        if gap <= 0.0 {
            passing.push((flat, Profile::new(q.clone(), r), gap));
        }
    }

    Ok(ScanReport {
        cells: merge_cells(&passing, side, n),
        grid_steps: steps,
        box_upper,
        step,
        lipschitz,
        generator_slack,
        points_examined: total,
        closest_miss,
    })
}

fn decode(mut flat: usize, side: usize, idx: &mut [usize]) {
    for slot in idx.iter_mut() {
        *slot = flat % side;
        flat /= side;
    }
}

/// Groups passing grid points into cells of grid neighbours (including
/// diagonal ones), in order of their first member.
fn merge_cells(passing: &[(usize, Profile, f64)], side: usize, n: usize) -> Vec<GneCell> {
    let position: BTreeMap<usize, usize> = passing.iter().enumerate().map(|(i, p)| (p.0, i)).collect();
    let mut parent: Vec<usize> = (0..passing.len()).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut idx = vec![0usize; n];
    let mut other = vec![0usize; n];
    let offsets = 3usize.pow(n as u32);
    for (i, (flat, _, _)) in passing.iter().enumerate() {
        decode(*flat, side, &mut idx);
        'offset: for code in 0..offsets {
            let mut code = code;
            for k in 0..n {
                let shifted = idx[k] as isize + (code % 3) as isize - 1;
                code /= 3;
                if shifted < 0 || shifted >= side as isize {
                    continue 'offset;
                }
                other[k] = shifted as usize;
            }
            let neighbour = other.iter().rev().fold(0, |acc, &v| acc * side + v);
            if let Some(&j) = position.get(&neighbour) {
                let (ri, rj) = (root(&mut parent, i), root(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }

    let mut cells: Vec<(usize, GneCell, f64)> = Vec::new();
    for (i, (_, profile, gap)) in passing.iter().enumerate() {
        let r = root(&mut parent, i);
        match cells.iter_mut().find(|(owner, _, _)| *owner == r) {
            Some((_, cell, best_gap)) => {
                for k in 0..n {
                    cell.lower[k] = cell.lower[k].min(profile.q[k]);
                    cell.upper[k] = cell.upper[k].max(profile.q[k]);
                }
                cell.points += 1;
                if *gap < *best_gap {
                    *best_gap = *gap;
                    cell.representative = profile.clone();
                }
            }
            None => cells.push((
                r,
                GneCell {
                    lower: profile.q.clone(),
                    upper: profile.q.clone(),
                    points: 1,
                    representative: profile.clone(),
                },
                *gap,
            )),
        }
    }
    cells.into_iter().map(|(_, cell, _)| cell).collect()
}

/// Largest max-norm row sum of `dr/dq` over all candidate active sets of
/// the concave problem `max linear(q)'r - r'diag(b)r/2`.
fn concave_sensitivity(poly: &RebalancePolytope, b: &[f64], objective: Objective) -> f64 {
    let n = poly.dim();
    // d linear / dq premultiplied by diag(1/b)
    let x: Vec<f64> = match objective {
        Objective::SocialWelfare => (0..n * n).map(|i| if i % (n + 1) == 0 { -1.0 } else { 0.0 }).collect(),
        _ => vec![0.0; n * n],
    };
    let mut worst = 0.0_f64;
    for size in 0..n {
        for_each_combination(poly.constraint_count(), size, |rows| {
            let p = rows.len() + 1;
            let column = |i: usize, k: usize| if i == 0 { 1.0 } else { poly.normal(rows[i - 1])[k] };
            let mut m = vec![0.0; p * p];
            for i in 0..p {
                for j in 0..p {
                    m[i * p + j] = (0..n).map(|k| column(i, k) * column(j, k) / b[k]).sum();
                }
            }
            let Some(lu) = Lu::new(&m, p, 1e-10) else {
                return true;
            };
            let mut dr = x.clone();
            for j in 0..n {
                // rhs = N' x_j - e_j
                let rhs: Vec<f64> = (0..p)
                    .map(|i| {
                        let nx: f64 = (0..n).map(|k| column(i, k) * x[k * n + j]).sum();
                        nx - demand_derivative(poly, rows, i, j)
                    })
                    .collect();
                let y = lu.solve(&rhs);
                for k in 0..n {
                    dr[k * n + j] -= (0..p).map(|i| column(i, k) * y[i]).sum::<f64>() / b[k];
                }
            }
            worst = worst.max(row_sum_norm(&dr, n));
            true
        });
    }
    worst
}

/// Largest max-norm row sum of `dr/dq` over all vertex bases.
fn vertex_sensitivity(poly: &RebalancePolytope) -> f64 {
    let mut worst = 0.0_f64;
    for_each_combination(poly.constraint_count(), poly.dim() - 1, |rows| {
        if let Some(dr) = basis_sensitivity(poly, rows) {
            worst = worst.max(row_sum_norm(&dr, poly.dim()));
        }
        true
    });
    worst
}

/// `dr/dq` (row-major) of the basic solution with `rows` held at equality,
/// or `None` for a singular basis.
fn basis_sensitivity(poly: &RebalancePolytope, rows: &[usize]) -> Option<Vec<f64>> {
    let n = poly.dim();
    let mut m = Vec::with_capacity(n * n);
    for &i in rows {
        m.extend_from_slice(poly.normal(i));
    }
    m.extend(core::iter::repeat_n(1.0, n));
    let lu = Lu::new(&m, n, 1e-10)?;
    let mut dr = vec![0.0; n * n];
    for j in 0..n {
        let rhs: Vec<f64> = (0..n)
            .map(|i| if i < rows.len() && poly.kind(rows[i]) == ConstraintKind::Demand(j) { 1.0 } else { 0.0 })
            .collect();
        let col = lu.solve(&rhs);
        for k in 0..n {
            dr[k * n + j] = col[k];
        }
    }
    Some(dr)
}

/// Sensitivities of every basis a vertex can switch to when production
/// moves by `rho`: bases made of rows whose slack at `v` could close.
fn nearby_bases(poly: &RebalancePolytope, v: &[f64], lipschitz: f64, rho: f64) -> Vec<Vec<f64>> {
    let near: Vec<usize> = (0..poly.constraint_count())
        .filter(|&i| {
            let a = poly.normal(i);
            let reach = (a.iter().map(|x| x.abs()).sum::<f64>() * lipschitz + 1.0) * rho;
            poly.bound(i) - crate::linalg::dot(a, v) <= reach + 1e-12
        })
        .collect();
    let mut out = Vec::new();
    for_each_combination(near.len(), poly.dim() - 1, |pick| {
        let rows: Vec<usize> = pick.iter().map(|&j| near[j]).collect();
        if let Some(dr) = basis_sensitivity(poly, &rows) {
            out.push(dr);
        }
        true
    });
    out
}

/// Bound on how much the payoff gap `phi(q, w) - phi(q, v)` between two
/// vertices can change when `q` moves by `rho` in max-norm and the vertices
/// follow any of their nearby bases. `phi(q, x) = sum b_k (q_k x_k + x_k^2 / 2)`.
fn regret_drift(b: &[f64], q: &[f64], w: &[f64], w_moves: &[Vec<f64>], v: &[f64], v_moves: &[Vec<f64>], rho: f64) -> f64 {
    let n = q.len();
    let mut worst = 0.0_f64;
    for wm in w_moves {
        for vm in v_moves {
            let mut first = 0.0;
            for j in 0..n {
                let g: f64 = (0..n)
                    .map(|k| {
                        let own = if k == j { w[k] - v[k] } else { 0.0 };
                        b[k] * (own + (q[k] + w[k]) * wm[k * n + j] - (q[k] + v[k]) * vm[k * n + j])
                    })
                    .sum();
                first += g.abs();
            }
            let second: f64 = (0..n)
                .map(|k| {
                    let sw: f64 = wm[k * n..(k + 1) * n].iter().map(|x| x.abs()).sum();
                    let sv: f64 = vm[k * n..(k + 1) * n].iter().map(|x| x.abs()).sum();
                    b[k] * ((sw + sv) + 0.5 * sw.max(sv) * sw.max(sv)) * rho * rho
                })
                .sum();
            worst = worst.max(first * rho + second);
        }
    }
    worst
}

/// `d bound / d q_j` of column `i` of `[1, normals of rows]`.
fn demand_derivative(poly: &RebalancePolytope, rows: &[usize], i: usize, j: usize) -> f64 {
    if i > 0 && poly.kind(rows[i - 1]) == ConstraintKind::Demand(j) {
        1.0
    } else {
        0.0
    }
}

fn row_sum_norm(m: &[f64], n: usize) -> f64 {
    (0..n)
        .map(|k| m[k * n..(k + 1) * n].iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(b1: f64) -> MarketParams {
        MarketParams::new(vec![10.0, 10.0], vec![b1, 1.0], vec![1.0, 1.0]).unwrap()
    }

    fn coarse() -> SearchConfig {
        SearchConfig {
            grid_steps: 60,
            ..SearchConfig::default()
        }
    }

    #[test]
    fn sensitivities_on_two_nodes() {
        let poly = build_polytope(&NetworkModel::two_node(Some(2.0)).unwrap(), &[0.0, 0.0]).unwrap();
        assert_relative_eq!(vertex_sensitivity(&poly), 1.0, epsilon = 1e-12);
        // interior social-welfare response (b2 q2 - b1 q1)/(b1 + b2): row sum 1
        assert_relative_eq!(concave_sensitivity(&poly, &[1.2, 1.0], Objective::SocialWelfare), 1.0, epsilon = 1e-12);
        assert_relative_eq!(
            concave_sensitivity(&poly, &[1.2, 1.0], Objective::ResidualSocialWelfare),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn residual_welfare_single_cell() {
        let net = NetworkModel::two_node(Some(2.0)).unwrap();
        let report = brute_force_gne_scan(&net, &params(1.2), Objective::ResidualSocialWelfare, &coarse()).unwrap();
        assert_eq!(report.cells.len(), 1, "{:?}", report.cells);
        let margin: Vec<f64> = report.step.clone();
        assert!(report.cells[0].covers(&[10.0 / 4.4, 2.5], &margin));
        assert!(report.closest_miss <= 0.0);
    }

    #[test]
    fn consumer_surplus_empty_at_capacity_two() {
        let net = NetworkModel::two_node(Some(2.0)).unwrap();
        let report = brute_force_gne_scan(&net, &params(1.2), Objective::ConsumerSurplus, &coarse()).unwrap();
        assert!(report.cells.is_empty());
        assert!(report.closest_miss > 0.0);
    }

    #[test]
    fn symmetric_social_welfare_has_zero_rebalance() {
        let net = NetworkModel::two_node(None).unwrap();
        let report = brute_force_gne_scan(&net, &params(1.0), Objective::SocialWelfare, &coarse()).unwrap();
        assert_eq!(report.cells.len(), 1);
        assert!(report.cells[0].representative.r[0].abs() < 0.2);
    }

    #[test]
    fn rejects_large_networks() {
        let net = NetworkModel::new(4, crate::Matrix::zeros(0, 4), vec![]).unwrap();
        let p = MarketParams::uniform(4, 1.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            brute_force_gne_scan(&net, &p, Objective::SocialWelfare, &coarse()),
            Err(Error::DimensionLimit { .. })
        ));
    }
}
