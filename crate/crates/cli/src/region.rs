//! Existence regions of the two-node consumer-surplus game.

use std::fmt;

use netcournot_core::twonode::{existence_partition, ExistenceInterval, Thresholds, TwoNodeParams};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionReport {
    pub params: TwoNodeParams,
    pub thresholds: Thresholds,
    pub intervals: Vec<ExistenceInterval>,
}

impl RegionReport {
    pub fn new(params: &TwoNodeParams, from: f64, to: f64) -> netcournot_core::Result<Self> {
        Ok(RegionReport {
            params: *params,
            thresholds: Thresholds::of(params),
            intervals: existence_partition(params, from, to)?,
        })
    }

    /// Default range `[0, 1.5 a / (b2 + 2c)]`.
    pub fn default_range(params: &TwoNodeParams) -> (f64, f64) {
        (0.0, 1.5 * Thresholds::of(params).uncongested)
    }

    /// Capacity intervals without an equilibrium.
    pub fn gaps(&self) -> impl Iterator<Item = &ExistenceInterval> + '_ {
        self.intervals.iter().filter(|i| !i.exists)
    }
}

impl fmt::Display for RegionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.params;
        let t = &self.thresholds;
        writeln!(f, "a = {}, b1 = {}, b2 = {}, c = {}", p.a(), p.b1(), p.b2(), p.c())?;
        writeln!(f, "thresholds")?;
        writeln!(f, "  a/(b2+2c)   {:.6}", t.uncongested)?;
        writeln!(f, "  a/b1        {:.6}", t.shutdown)?;
        writeln!(f, "  a/(3b1+2c)  {:.6}", t.export_limit)?;
        writeln!(f, "  f0          {:.6}", t.f0)?;
        writeln!(f, "  f1          {:.6}", t.f1)?;
        writeln!(f, "partition")?;
        for i in &self.intervals {
            let label = match i.condition {
                Some(k) => format!("exists (condition {k})"),
                None => "no-gne".to_string(),
            };
            writeln!(f, "  [{:.6}, {:.6}]  {label}", i.from, i.to)?;
        }
        if self.gaps().next().is_none() {
            writeln!(f, "no capacity in range lacks an equilibrium")?;
        }
        Ok(())
    }
}
