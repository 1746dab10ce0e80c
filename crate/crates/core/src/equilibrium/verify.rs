use alloc::vec::Vec;

use crate::model::{is_feasible_rebalance, MarketParams, NetworkModel, Objective};
use crate::responses::{generator_best_response, market_maker_response_with, ResponseOptions};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GeneratorCertificate {
    pub node: usize,
    pub production: f64,
    pub best_response: f64,
    /// `|production - best_response|`.
    pub deviation: f64,
    /// Profit the generator would gain by switching to its best response.
    pub profit_gain: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MarketMakerCertificate {
    pub payoff: f64,
    pub best_payoff: f64,
    /// `best_payoff - payoff`.
    pub regret: f64,
    pub best_response: Vec<f64>,
    /// All maximizers found (consumer surplus only).
    pub maximizers: Vec<Vec<f64>>,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GneCertificate {
    pub is_gne: bool,
    pub generators: Vec<GeneratorCertificate>,
    pub market_maker: MarketMakerCertificate,
}

impl GneCertificate {
    /// Generators whose check failed.
    pub fn failing_generators(&self) -> impl Iterator<Item = &GeneratorCertificate> + '_ {
        self.generators.iter().filter(|g| !g.ok)
    }
}

/// Checks both equilibrium conditions at `(q, r)`.
///
/// A generator passes when `q_k` is within `tol` of its best response. The
/// market maker passes when its payoff is within `tol * max(1, |best|)` of the
/// optimum over `S(q)`, so any maximizer is accepted.
pub fn verify_gne(
    net: &NetworkModel,
    params: &MarketParams,
    objective: Objective,
    q: &[f64],
    r: &[f64],
    tol: f64,
) -> Result<GneCertificate> {
    verify_gne_with(net, params, objective, q, r, tol, ResponseOptions::default())
}

pub(crate) fn verify_gne_with(
    net: &NetworkModel,
    params: &MarketParams,
    objective: Objective,
    q: &[f64],
    r: &[f64],
    tol: f64,
    opts: ResponseOptions,
) -> Result<GneCertificate> {
    if !is_feasible_rebalance(net, q, r, tol)? || q.iter().any(|v| *v < -tol || !v.is_finite()) {
        return Err(Error::InfeasibleProfile("re-balancing lies outside the feasible set"));
    }
    let generators: Vec<GeneratorCertificate> = (0..params.nodes())
        .map(|k| {
            let br = generator_best_response(params, k, r[k]);
            let deviation = (q[k] - br).abs();
            GeneratorCertificate {
                node: k,
                production: q[k],
                best_response: br,
                deviation,
                profit_gain: params.profit_at(k, br, r[k]) - params.profit_at(k, q[k], r[k]),
                ok: deviation <= tol,
            }
        })
        .collect();

    let q_clamped: Vec<f64> = q.iter().map(|v| v.max(0.0)).collect();
    let best = market_maker_response_with(net, params, &q_clamped, objective, opts)?;
    let payoff = params.welfare(q, r, objective)?;
    let regret = best.payoff - payoff;
    let market_maker = MarketMakerCertificate {
        payoff,
        best_payoff: best.payoff,
        regret,
        ok: regret <= tol * best.payoff.abs().max(1.0),
        best_response: best.argmax,
        maximizers: best.alternatives,
    };
    Ok(GneCertificate {
        is_gne: market_maker.ok && generators.iter().all(|g| g.ok),
        generators,
        market_maker,
    })
}
