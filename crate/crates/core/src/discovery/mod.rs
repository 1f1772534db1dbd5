//! Process discovery from directly-follows graphs.
//!
//! Both miners start from a [`Dfg`]: the inductive miner recurses on cuts of
//! the filtered graph, the heuristic miner scores dependencies between
//! directly-follows counts. Either result is turned into a [`PetriNet`] that
//! the conformance module replays.

mod heuristic;
mod inductive;
mod petri;
mod pnml;
mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::log::{df_counts, Dfg, EventLog, Node};

pub use heuristic::{dependency, heuristic_mine, heuristic_mine_dfg, DependencyGraph};
pub use inductive::inductive_mine;
pub use petri::{
    dependency_to_model, tree_to_petri, SILENT_SEARCH_LIMIT, Marking, PetriNet, ReplayCounts, Replayer, Transition};
pub use pnml::{parse_pnml, write_pnml};
pub use tree::{Operator, ProcessTree};

/// Default noise threshold for both miners.
pub const DEFAULT_THRESHOLD: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MinerKind {
    Inductive,
    Heuristic,
}

impl MinerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MinerKind::Inductive => "inductive",
            MinerKind::Heuristic => "heuristic",
        }
    }
}

impl fmt::Display for MinerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MinerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "inductive" | "im" | "imd" => Ok(MinerKind::Inductive),
            "heuristic" | "hm" | "heuristics" => Ok(MinerKind::Heuristic),
            other => Err(Error::InvalidParameter(format!("unknown miner '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinerConfig {
    pub kind: MinerKind,
    /// Noise threshold for the inductive miner, dependency threshold for the
    /// heuristic miner.
    pub threshold: f64,
}

impl MinerConfig {
    pub fn new(kind: MinerKind, threshold: f64) -> Result<Self> {
        let cfg = MinerConfig { kind, threshold };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn inductive() -> Self {
        MinerConfig {
            kind: MinerKind::Inductive,
            threshold: DEFAULT_THRESHOLD,
        }
    }

    pub fn heuristic() -> Self {
        MinerConfig {
            kind: MinerKind::Heuristic,
            threshold: DEFAULT_THRESHOLD,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::InvalidParameter(format!(
                "threshold must lie in [0, 1], got {}",
                self.threshold
            )));
        }
        Ok(())
    }

    /// Mines a model from a DFG. A graph without any edge is rejected as
    /// degenerate.
    pub fn discover_dfg(&self, dfg: &Dfg) -> Result<PetriNet> {
        self.validate()?;
        if dfg.edge_count() == 0 {
            return Err(Error::DegenerateDfg);
        }
        Ok(match self.kind {
            MinerKind::Inductive => tree_to_petri(&inductive_mine(&filter_dfg(dfg, self.threshold))),
            MinerKind::Heuristic => dependency_to_model(&heuristic_mine_dfg(dfg, self.threshold)),
        })
    }

    pub fn discover(&self, log: &EventLog) -> Result<PetriNet> {
        self.discover_dfg(&df_counts(log)?)
    }
}

/// Removes edges weaker than `threshold` times the strongest outgoing edge of
/// their source. Each node keeps its strongest incoming edge so nothing gets
/// cut off from ▶ or ■.
pub fn filter_dfg(dfg: &Dfg, threshold: f64) -> Dfg {
    let mut out = Dfg::new();
    for n in dfg.nodes() {
        if let Node::Act(a) = n {
            out.add_activity(a.clone());
        }
    }
    let mut max_out: BTreeMap<&Node, u64> = BTreeMap::new();
    let mut strongest_in: BTreeMap<&Node, (&Node, u64)> = BTreeMap::new();
    for (from, to, w) in dfg.edges() {
        let m = max_out.entry(from).or_insert(0);
        *m = (*m).max(w);
        // edges come in source order, so the first maximum wins ties
        let best = strongest_in.entry(to).or_insert((from, w));
        if w > best.1 {
            *best = (from, w);
        }
    }
    for (from, to, w) in dfg.edges() {
        let keep = (w as f64) >= threshold * max_out[from] as f64 || strongest_in[to].0 == from;
        if keep {
            out.set_edge(from.clone(), to.clone(), w);
        }
    }
    out
}
