//! JSON instance files.
//!
//! ```json
//! {
//!   "nodes": [{"a": 10, "b": 1.2, "c": 1}, {"a": 10, "b": 1, "c": 1}],
//!   "lines": [{"from": 1, "to": 2, "capacity": 2.0}]
//! }
//! ```
//!
//! Nodes are numbered from 1. A missing or `null` capacity means the line is
//! unconstrained and a missing susceptance defaults to 1. Shift factors are
//! computed from the susceptances with the last node as reference unless
//! `slack` names another node, or given directly as `"H"` with one row per
//! line.

use std::fs;
use std::path::Path;

use netcournot_core::model::Branch;
use netcournot_core::twonode::TwoNodeParams;
use netcournot_core::{MarketParams, Matrix, NetworkModel};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum InstanceError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed instance: {0}")]
    Json(#[from] serde_json::Error),
    #[error("line {line} refers to node {node}, but nodes are numbered 1..={nodes}")]
    UnknownNode { line: usize, node: usize, nodes: usize },
    #[error("\"H\" must have one row of {nodes} entries per line")]
    BadShiftFactors { nodes: usize },
    #[error(transparent)]
    Model(#[from] netcournot_core::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSpec {
    pub from: usize,
    pub to: usize,
    #[serde(default)]
    pub capacity: Option<f64>,
    #[serde(default = "unit")]
    pub susceptance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub lines: Vec<LineSpec>,
    #[serde(default, rename = "H", skip_serializing_if = "Option::is_none")]
    pub shift_factors: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slack: Option<usize>,
}

/// A validated network with its market.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub network: NetworkModel,
    pub market: MarketParams,
}

impl InstanceFile {
    pub fn parse(text: &str) -> Result<Self, InstanceError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn build(&self) -> Result<Instance, InstanceError> {
        let n = self.nodes.len();
        let market = MarketParams::new(
            self.nodes.iter().map(|s| s.a).collect(),
            self.nodes.iter().map(|s| s.b).collect(),
            self.nodes.iter().map(|s| s.c).collect(),
        )?;
        let zero_based = |line: usize, node: usize| {
            if (1..=n).contains(&node) {
                Ok(node - 1)
            } else {
                Err(InstanceError::UnknownNode { line: line + 1, node, nodes: n })
            }
        };
        let capacities: Vec<f64> = self.lines.iter().map(|l| l.capacity.unwrap_or(f64::INFINITY)).collect();
        let network = match &self.shift_factors {
            Some(rows) => {
                if rows.len() != self.lines.len() || rows.iter().any(|r| r.len() != n) {
                    return Err(InstanceError::BadShiftFactors { nodes: n });
                }
                let h = Matrix::from_rows(rows, n).ok_or(InstanceError::BadShiftFactors { nodes: n })?;
                NetworkModel::new(n, h, capacities)?
            }
            None => {
                let branches = self
                    .lines
                    .iter()
                    .enumerate()
                    .map(|(i, l)| {
                        Ok(Branch {
                            from: zero_based(i, l.from)?,
                            to: zero_based(i, l.to)?,
                            susceptance: l.susceptance,
                        })
                    })
                    .collect::<Result<Vec<_>, InstanceError>>()?;
                let slack = match self.slack {
                    Some(s) => zero_based(0, s)?,
                    None => n.saturating_sub(1),
                };
                NetworkModel::from_branches(n, &branches, capacities, slack)?
            }
        };
        Ok(Instance { network, market })
    }
}

impl Instance {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, InstanceError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| InstanceError::Io {
            path: path.display().to_string(),
            source,
        })?;
        InstanceFile::parse(&text)?.build()
    }

    /// Parameters of the analytic two-node model, when the instance is a
    /// single line from node 1 to node 2 with equal intercepts and costs and
    /// node 1 the steeper market.
    pub fn two_node_params(&self) -> Option<TwoNodeParams> {
        if self.network.nodes() != 2 || self.network.lines() != 1 || self.network.shift_factors().row(0) != [1.0, 0.0] {
            return None;
        }
        let f = self.network.capacities()[0];
        TwoNodeParams::from_market(&self.market, f.is_finite().then_some(f)).ok()
    }

    /// The same instance with every line capacity replaced.
    pub fn with_capacity(&self, f: Option<f64>) -> Result<Self, InstanceError> {
        let caps = vec![f.unwrap_or(f64::INFINITY); self.network.lines()];
        Ok(Instance {
            network: self.network.with_capacities(caps)?,
            market: self.market.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_NODE: &str = r#"{
        "nodes": [{"a": 10, "b": 1.2, "c": 1}, {"a": 10, "b": 1, "c": 1}],
        "lines": [{"from": 1, "to": 2, "capacity": 2.0}]
    }"#;

    #[test]
    fn two_node_file() {
        let inst = InstanceFile::parse(TWO_NODE).unwrap().build().unwrap();
        assert_eq!(inst.network.shift_factors().row(0), &[1.0, 0.0]);
        assert_eq!(inst.network.capacities(), &[2.0]);
        let p = inst.two_node_params().unwrap();
        assert_eq!(p.capacity(), Some(2.0));
        assert_eq!(p.b1(), 1.2);
    }

    #[test]
    fn missing_capacity_is_unconstrained() {
        let text = r#"{"nodes": [{"a": 1, "b": 1, "c": 1}, {"a": 1, "b": 0.5, "c": 1}], "lines": [{"from": 1, "to": 2}]}"#;
        let inst = InstanceFile::parse(text).unwrap().build().unwrap();
        assert!(inst.network.capacities()[0].is_infinite());
        assert_eq!(inst.two_node_params().unwrap().capacity(), None);
    }

    #[test]
    fn explicit_shift_factors() {
        let text = r#"{"nodes": [{"a": 1, "b": 1, "c": 1}, {"a": 1, "b": 1, "c": 1}],
                       "lines": [{"from": 1, "to": 2, "capacity": 0.5}], "H": [[1, 0]]}"#;
        let inst = InstanceFile::parse(text).unwrap().build().unwrap();
        assert_eq!(inst.network.capacities(), &[0.5]);
        let bad = r#"{"nodes": [{"a": 1, "b": 1, "c": 1}], "lines": [{"from": 1, "to": 1}], "H": [[1, 0]]}"#;
        assert!(matches!(
            InstanceFile::parse(bad).unwrap().build(),
            Err(InstanceError::BadShiftFactors { .. })
        ));
    }

    #[test]
    fn errors() {
        assert!(matches!(InstanceFile::parse("{"), Err(InstanceError::Json(_))));
        assert!(matches!(InstanceFile::parse(r#"{"nodes": [], "extra": 1}"#), Err(InstanceError::Json(_))));
        let text = r#"{"nodes": [{"a": 1, "b": 1, "c": 1}], "lines": [{"from": 1, "to": 3}]}"#;
        assert!(matches!(
            InstanceFile::parse(text).unwrap().build(),
            Err(InstanceError::UnknownNode { node: 3, .. })
        ));
        let text = r#"{"nodes": [{"a": -1, "b": 1, "c": 1}]}"#;
        assert!(matches!(InstanceFile::parse(text).unwrap().build(), Err(InstanceError::Model(_))));
    }

    #[test]
    fn steeper_second_node_is_not_analytic() {
        let text = r#"{"nodes": [{"a": 1, "b": 0.5, "c": 1}, {"a": 1, "b": 1, "c": 1}], "lines": [{"from": 1, "to": 2}]}"#;
        assert!(InstanceFile::parse(text).unwrap().build().unwrap().two_node_params().is_none());
    }
}
