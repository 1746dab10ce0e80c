mod common;

use common::{feasible_point, instance, vertices_of};
use netcournot_core::model::is_feasible_rebalance;
use netcournot_core::polytope::{build_polytope, kkt_residual, maximize_concave_quadratic, maximize_convex_quadratic_on_vertices};
use netcournot_core::responses::{generator_best_response, market_maker_quadratic, market_maker_response};
use netcournot_core::{MarketParams, NetworkModel, Objective};
use proptest::prelude::*;

fn close(x: f64, y: f64, rel: f64) -> bool {
    (x - y).abs() <= rel * x.abs().max(y.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn welfare_identities_hold((net, params, q) in instance(4), w in prop::collection::vec(0.0..1.0_f64, 64)) {
        let r = feasible_point(&vertices_of(&net, &q), &w);
        prop_assert!(is_feasible_rebalance(&net, &q, &r, 1e-9).unwrap());
        let soc = params.welfare(&q, &r, Objective::SocialWelfare).unwrap();
        let res = params.welfare(&q, &r, Objective::ResidualSocialWelfare).unwrap();
        let con = params.welfare(&q, &r, Objective::ConsumerSurplus).unwrap();
        let profits: f64 = (0..net.nodes()).map(|k| params.generator_profit(k, &q, &r).unwrap()).sum();
        let ms = params.merchandising_surplus(&q, &r).unwrap();
        prop_assert!(close(res, soc - profits, 1e-9));
        prop_assert!(close(res, con + ms, 1e-9));
    }

    #[test]
    fn price_is_affine_in_demand(a in 1.0..10.0_f64, b in 0.0..3.0_f64, d1 in -5.0..5.0_f64, d2 in -5.0..5.0_f64, t in 0.0..1.0_f64) {
        let p = MarketParams::uniform(1, a, b, 1.0).unwrap();
        let mid = p.price(0, t * d1 + (1.0 - t) * d2).unwrap();
        let blend = t * p.price(0, d1).unwrap() + (1.0 - t) * p.price(0, d2).unwrap();
        prop_assert!((mid - blend).abs() < 1e-12);
    }

    #[test]
    fn zero_rebalance_is_feasible((net, _params, q) in instance(4)) {
        prop_assert!(is_feasible_rebalance(&net, &q, &vec![0.0; q.len()], 0.0).unwrap());
        prop_assert!(build_polytope(&net, &q).unwrap().contains(&vec![0.0; q.len()], 0.0));
    }

    #[test]
    fn concave_maximum_dominates_samples((net, params, q) in instance(4), obj in prop::sample::select(vec![Objective::SocialWelfare, Objective::ResidualSocialWelfare])) {
        let poly = build_polytope(&net, &q).unwrap();
        let quad = market_maker_quadratic(&params, &q, obj);
        let sol = maximize_concave_quadratic(&poly, &quad, 1e-9).unwrap();
        prop_assert!(poly.contains(&sol.point, 1e-9));
        prop_assert!(kkt_residual(&poly, &quad, &sol) < 1e-7);
        let vertices = vertices_of(&net, &q);
        for v in &vertices {
            prop_assert!(quad.value(v) <= sol.value + 1e-7);
        }
        let mut seed = 0x9e3779b97f4a7c15_u64;
        for _ in 0..1000 {
            let weights: Vec<f64> = (0..vertices.len()).map(|_| {
                seed ^= seed << 13; seed ^= seed >> 7; seed ^= seed << 17;
                (seed >> 11) as f64 / (1u64 << 53) as f64
            }).collect();
            let r = feasible_point(&vertices, &weights);
            prop_assert!(quad.value(&r) <= sol.value + 1e-7);
        }
    }

    #[test]
    fn convex_vertex_maximum_dominates_samples((net, params, q) in instance(4), w in prop::collection::vec(prop::collection::vec(0.0..1.0_f64, 64), 20)) {
        let poly = build_polytope(&net, &q).unwrap();
        let quad = market_maker_quadratic(&params, &q, Objective::ConsumerSurplus);
        let best = maximize_convex_quadratic_on_vertices(&poly, &quad, 1e-8).unwrap();
        prop_assert!(best.vertices.contains(&best.argmax));
        let vertices = vertices_of(&net, &q);
        for weights in &w {
            prop_assert!(quad.value(&feasible_point(&vertices, weights)) <= best.value + 1e-7);
        }
    }

    #[test]
    fn two_node_vertices_are_interval_endpoints(q1 in 0.0..5.0_f64, q2 in 0.0..5.0_f64, f in 0.01..5.0_f64) {
        let net = NetworkModel::two_node(Some(f)).unwrap();
        let v = vertices_of(&net, &[q1, q2]);
        let (lo, hi) = ((-q1).max(-f), q2.min(f));
        if hi - lo > 1e-6 {
            prop_assert_eq!(v.len(), 2);
            prop_assert!((v[0][0] - lo).abs() < 1e-12 && (v[0][1] + lo).abs() < 1e-12);
            prop_assert!((v[1][0] - hi).abs() < 1e-12 && (v[1][1] + hi).abs() < 1e-12);
        }
    }

    #[test]
    fn generator_response_is_nonincreasing(a in 1.0..10.0_f64, b in 0.5..3.0_f64, c in 0.5..2.0_f64, r1 in -5.0..5.0_f64, dr in 0.0..3.0_f64) {
        let p = MarketParams::uniform(1, a, b, c).unwrap();
        let lo = generator_best_response(&p, 0, r1);
        let hi = generator_best_response(&p, 0, r1 + dr);
        prop_assert!(hi <= lo);
        if hi > 0.0 {
            prop_assert!(((lo - hi) - b / (2.0 * (b + c)) * dr).abs() < 1e-9);
        }
    }

    #[test]
    fn responses_are_deterministic((net, params, q) in instance(4), obj in prop::sample::select(Objective::ALL.to_vec())) {
        let x = market_maker_response(&net, &params, &q, obj).unwrap();
        let y = market_maker_response(&net, &params, &q, obj).unwrap();
        prop_assert_eq!(x.argmax.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), y.argmax.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }
}

#[test]
fn generator_response_matches_dense_grid() {
    let mut seed = 12345_u64;
    let mut uniform = |lo: f64, hi: f64| {
        seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        lo + (hi - lo) * ((seed >> 11) as f64 / (1u64 << 53) as f64)
    };
    for _ in 0..200 {
        let (a, b, c, r) = (uniform(1.0, 10.0), uniform(0.5, 3.0), uniform(0.5, 2.0), uniform(-5.0, 5.0));
        let p = MarketParams::uniform(1, a, b, c).unwrap();
        let upper = 2.0 * a / c;
        let steps = (upper / 1e-4) as usize;
        let profit = |q: f64| q * (a - b * (q + r)) - c * q * q;
        let grid_best = (0..=steps)
            .map(|i| i as f64 * 1e-4)
            .max_by(|x, y| profit(*x).total_cmp(&profit(*y)))
            .unwrap();
        assert!((generator_best_response(&p, 0, r) - grid_best).abs() < 1e-3);
    }
}
