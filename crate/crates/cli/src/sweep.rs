//! Line-capacity sweeps on the two-node network.
//!
//! Each grid capacity is solved under every requested objective. Under the
//! consumer-surplus objective inside the analytic regime the existence
//! verdict comes from the exact classifier and the point from its closed
//! form, with best-response search only where no closed form is known.
//! Everything else uses best-response search from zero.

use std::io::{self, Write};

use netcournot_core::equilibrium::{gne_search, GneStatus, Profile, SearchConfig};
use netcournot_core::twonode::{classify_existence, ExistenceVerdict};
use netcournot_core::{MarketOutcome, Objective};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::instance::{Instance, InstanceError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepStatus {
    Exists,
    NoGne,
    /// Best-response search hit its iteration limit.
    Limit,
}

impl SweepStatus {
    pub fn tag(self) -> &'static str {
        match self {
            SweepStatus::Exists => "exists",
            SweepStatus::NoGne => "no-gne",
            SweepStatus::Limit => "limit",
        }
    }
}

/// One CSV row. Value fields are empty unless an equilibrium was found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    #[serde(with = "sci")]
    pub f12: f64,
    #[serde(with = "objective_tag")]
    pub objective: Objective,
    pub status: SweepStatus,
    #[serde(with = "sci_opt")]
    pub q1: Option<f64>,
    #[serde(with = "sci_opt")]
    pub q2: Option<f64>,
    #[serde(with = "sci_opt")]
    pub r: Option<f64>,
    #[serde(with = "sci_opt")]
    pub w_soc: Option<f64>,
    #[serde(with = "sci_opt")]
    pub w_con: Option<f64>,
    #[serde(with = "sci_opt")]
    pub profit1: Option<f64>,
    #[serde(with = "sci_opt")]
    pub profit2: Option<f64>,
    #[serde(with = "sci_opt")]
    pub merch_surplus: Option<f64>,
    /// `boundary` plus both neighbours' statuses when the capacity sits on an
    /// existence threshold.
    pub note: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub from: f64,
    pub to: f64,
    /// Number of grid points, both ends included.
    pub steps: usize,
    pub objectives: Vec<Objective>,
    pub config: SearchConfig,
}

impl SweepSpec {
    /// `[0, 1.5 a_2 / (b_2 + 2 c_2)]`, half again the capacity above which
    /// the line stops binding under consumer surplus.
    pub fn default_range(inst: &Instance) -> (f64, f64) {
        let (a, b, c) = (inst.market.intercepts(), inst.market.slopes(), inst.market.costs());
        (0.0, 1.5 * a[1] / (b[1] + 2.0 * c[1]))
    }

    pub fn grid(&self) -> Vec<f64> {
        let span = self.to - self.from;
        (0..self.steps)
            .map(|i| {
                if i + 1 == self.steps {
                    self.to
                } else {
                    self.from + span * i as f64 / (self.steps - 1) as f64
                }
            })
            .collect()
    }

    fn validate(&self) -> Result<(), SweepError> {
        if !(self.from.is_finite() && self.to.is_finite() && self.from < self.to && self.from >= 0.0) {
            return Err(SweepError::Range(self.from, self.to));
        }
        if self.steps < 2 {
            return Err(SweepError::Steps(self.steps));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("sweeps need a two-node instance with one line")]
    NotTwoNode,
    #[error("sweep range [{0}, {1}] must satisfy 0 <= from < to")]
    Range(f64, f64),
    #[error("sweep needs at least 2 grid points, got {0}")]
    Steps(usize),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Model(#[from] netcournot_core::Error),
}

/// Solves every (capacity, objective) pair, in parallel. Rows come back in
/// grid order, objectives in the order given.
pub fn run_sweep(inst: &Instance, spec: &SweepSpec) -> Result<Vec<SweepRecord>, SweepError> {
    spec.validate()?;
    if inst.network.nodes() != 2 || inst.network.lines() != 1 {
        return Err(SweepError::NotTwoNode);
    }
    let jobs: Vec<(f64, Objective)> = spec
        .grid()
        .into_iter()
        .flat_map(|f| spec.objectives.iter().map(move |&o| (f, o)))
        .collect();
    let mut records = jobs
        .par_iter()
        .map(|&(f, obj)| solve_point(inst, f, obj, &spec.config))
        .collect::<Result<Vec<_>, _>>()?;
    annotate_boundaries(&mut records, spec.objectives.len());
    Ok(records)
}

fn solve_point(inst: &Instance, f: f64, objective: Objective, config: &SearchConfig) -> Result<SweepRecord, SweepError> {
    let at = inst.with_capacity(Some(f))?;
    let analytic = at.two_node_params().filter(|_| objective == Objective::ConsumerSurplus);
    let closed = analytic.map(|p| classify_existence(&p));
    let boundary = closed.as_ref().is_some_and(|v| v.boundary);
    let (status, point) = match closed {
        Some(v) if !v.exists => (SweepStatus::NoGne, None),
        Some(ExistenceVerdict { equilibrium: Some(e), .. }) => (SweepStatus::Exists, Some((e.production(), e.rebalance()))),
        _ => {
            let res = gne_search(&at.network, &at.market, objective, &Profile::zero(2), config)?;
            match res.status {
                GneStatus::Converged => {
                    let p = res.point.expect("converged result carries its point");
                    (SweepStatus::Exists, Some((p.q, p.r)))
                }
                GneStatus::CycleDetected => (SweepStatus::NoGne, None),
                GneStatus::IterationLimit | GneStatus::Infeasible => (SweepStatus::Limit, None),
            }
        }
    };
    let outcome = point
        .map(|(q, r)| MarketOutcome::evaluate(&at.network, &at.market, &q, &r))
        .transpose()?;
    let pick = |get: fn(&MarketOutcome) -> f64| outcome.as_ref().map(get);
    Ok(SweepRecord {
        f12: f,
        objective,
        status,
        q1: pick(|o| o.q[0]),
        q2: pick(|o| o.q[1]),
        r: pick(|o| o.r[0]),
        w_soc: pick(|o| o.w_soc),
        w_con: pick(|o| o.w_con),
        profit1: pick(|o| o.profits[0]),
        profit2: pick(|o| o.profits[1]),
        merch_surplus: pick(|o| o.merch_surplus),
        note: if boundary {
            "boundary".into()
        } else {
            String::new()
        },
    })
}

fn annotate_boundaries(records: &mut [SweepRecord], stride: usize) {
    for i in 0..records.len() {
        if records[i].note != "boundary" {
            continue;
        }
        let neighbour = |j: Option<usize>| j.and_then(|j| records.get(j)).map_or("none", |r| r.status.tag());
        let prev = neighbour(i.checked_sub(stride));
        let next = neighbour(Some(i + stride));
        records[i].note = format!("boundary prev={prev} next={next}");
    }
}

/// Writes the records as CSV, preceded by `#` comment lines.
pub fn write_csv<W: Write>(out: W, comments: &[String], records: &[SweepRecord]) -> Result<(), csv::Error> {
    let mut out = out;
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let mut writer = csv::Writer::from_writer(out);
    for r in records {
        writer.serialize(r)?;
    }
    if records.is_empty() {
        writer.write_record(CSV_COLUMNS)?;
    }
    writer.flush()?;
    Ok(())
}

pub const CSV_COLUMNS: [&str; 12] = [
    "f12",
    "objective",
    "status",
    "q1",
    "q2",
    "r",
    "w_soc",
    "w_con",
    "profit1",
    "profit2",
    "merch_surplus",
    "note",
];

pub fn read_csv<R: io::Read>(input: R) -> Result<Vec<SweepRecord>, csv::Error> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input)
        .deserialize()
        .collect()
}

/// One whitespace-separated block per objective, separated by two blank
/// lines so each is a gnuplot `index`. A single blank line marks a capacity
/// without equilibrium, which gnuplot draws as a gap.
pub fn write_gnuplot<W: Write>(mut out: W, records: &[SweepRecord], objectives: &[Objective]) -> io::Result<()> {
    writeln!(out, "# f12 q1 q2 r w_soc w_con profit1 profit2 merch_surplus")?;
    for (i, obj) in objectives.iter().enumerate() {
        if i > 0 {
            writeln!(out)?;
            writeln!(out)?;
        }
        writeln!(out, "# objective {}", obj.tag())?;
        for r in records.iter().filter(|r| r.objective == *obj) {
            let values = [r.q1, r.q2, r.r, r.w_soc, r.w_con, r.profit1, r.profit2, r.merch_surplus];
            if r.status != SweepStatus::Exists {
                writeln!(out)?;
                continue;
            }
            write!(out, "{:.16e}", r.f12)?;
            for v in values.iter().flatten() {
                write!(out, " {v:.16e}")?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

mod sci {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{v:.16e}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let text = String::deserialize(d)?;
        text.trim().parse().map_err(serde::de::Error::custom)
    }
}

mod sci_opt {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => s.serialize_str(&format!("{x:.16e}")),
            None => s.serialize_str(""),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        let text = String::deserialize(d)?;
        let text = text.trim();
        if text.is_empty() {
            Ok(None)
        } else {
            text.parse().map(Some).map_err(serde::de::Error::custom)
        }
    }
}

mod objective_tag {
    use netcournot_core::Objective;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Objective, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(v.tag())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Objective, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}
