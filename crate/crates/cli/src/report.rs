//! JSON result documents.

use netcournot_core::equilibrium::{GneCertificate, GneResult};
use netcournot_core::twonode::ExistenceVerdict;
use netcournot_core::Objective;
use serde::Serialize;

/// Output of `solve`.
#[derive(Debug, Clone, Serialize)]
pub struct SolveDocument {
    pub objective: Objective,
    /// Exact two-node verdict, when the instance is in the analytic regime
    /// and the objective is consumer surplus.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analytic: Option<ExistenceVerdict>,
    pub result: GneResult,
}

/// Output of `verify`.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyDocument {
    pub objective: Objective,
    pub q: Vec<f64>,
    pub r: Vec<f64>,
    pub tol: f64,
    pub certificate: GneCertificate,
}

/// Pretty-printed JSON. Non-finite numbers become `null`.
pub fn to_json<T: Serialize>(doc: &T) -> serde_json::Result<String> {
    serde_json::to_string_pretty(doc)
}
