//! Utility metrics of discovered models against event logs.
//!
//! Fitness uses token replay, precision counts escaping edges on the log's
//! prefix automaton (ETC), generalization is the mean held-out fitness over
//! k folds. Token and edge counts are accumulated as integers, so results do
//! not depend on the order in which variants are visited.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::discovery::{Marking, MinerConfig, PetriNet, ReplayCounts};
use crate::error::{Error, Result};
use crate::log::{Activity, EventLog, Trace};
use crate::seed;

/// Default number of folds for generalization.
pub const DEFAULT_FOLDS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricSet {
    pub fitness: f64,
    pub precision: f64,
    pub f1: f64,
    pub generalization: f64,
}

impl MetricSet {
    pub fn new(fitness: f64, precision: f64, generalization: f64) -> Self {
        MetricSet {
            fitness,
            precision,
            f1: f1(fitness, precision),
            generalization,
        }
    }
}

/// Metrics of one run: the headline values plus, for partitioned runs, one
/// entry per level (abstracted log and each sub-log).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UtilityReport {
    pub metrics: MetricSet,
    pub per_sublog: BTreeMap<String, MetricSet>,
}

/// Replay counters summed over the log, weighted by multiplicity.
pub fn replay_counts(net: &PetriNet, log: &EventLog) -> ReplayCounts {
    let rp = net.replayer();
    let mut total = ReplayCounts::default();
    for (trace, mult) in log.iter() {
        total.add_scaled(&rp.replay(trace), mult);
    }
    total
}

pub fn token_fitness(net: &PetriNet, log: &EventLog) -> Result<f64> {
    if log.is_empty() {
        return Err(Error::EmptyLog);
    }
    Ok(replay_counts(net, log).fitness())
}

/// Prefix tree of a log. `weight` counts the traces that continue past the
/// node's prefix.
#[derive(Default)]
struct PrefixNode {
    weight: u64,
    children: BTreeMap<Activity, PrefixNode>,
}

impl PrefixNode {
    fn insert(&mut self, trace: &Trace, mult: u64) {
        let mut node = self;
        for a in trace {
            node.weight += mult;
            node = node.children.entry(a.clone()).or_default();
        }
    }
}

pub fn etc_precision(net: &PetriNet, log: &EventLog) -> Result<f64> {
    if log.is_empty() {
        return Err(Error::EmptyLog);
    }
    let mut root = PrefixNode::default();
    for (trace, mult) in log.iter() {
        root.insert(trace, mult);
    }
    let rp = net.replayer();
    let (m0, _) = rp.start();
    let mut escaping: u128 = 0;
    let mut allowed: u128 = 0;
    let mut stack: Vec<(&PrefixNode, Marking)> = vec![(&root, m0)];
    while let Some((node, m)) = stack.pop() {
        if node.weight == 0 {
            continue;
        }
        let enabled = rp.enabled_labels(&m);
        let esc = enabled.iter().filter(|a| !node.children.contains_key(**a)).count();
        escaping += node.weight as u128 * esc as u128;
        allowed += node.weight as u128 * enabled.len() as u128;
        for (a, child) in &node.children {
            if let Some(next) = rp.step_fitting(&m, a) {
                stack.push((child, next));
            }
        }
    }
    Ok(if allowed == 0 {
        1.0
    } else {
        1.0 - escaping as f64 / allowed as f64
    })
}

pub fn f1(fitness: f64, precision: f64) -> f64 {
    if fitness + precision == 0.0 {
        0.0
    } else {
        2.0 * fitness * precision / (fitness + precision)
    }
}

/// Splits the traces of `log` into `k` folds. Variants are shuffled by
/// `seed`, stably sorted by decreasing count, and their traces dealt out
/// round-robin.
pub fn kfold_split(log: &EventLog, k: usize, seed: u64) -> Result<Vec<EventLog>> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    if log.total_traces() < k as u64 {
        return Err(Error::InvalidParameter(format!(
            "{} traces cannot be split into {k} folds",
            log.total_traces()
        )));
    }
    let mut variants: Vec<(&Trace, u64)> = log.iter().collect();
    variants.shuffle(&mut seed::stream(seed, &["kfold"]));
    variants.sort_by(|a, b| b.1.cmp(&a.1));
    let mut folds = vec![EventLog::new(); k];
    let mut next = 0usize;
    for (trace, mult) in variants {
        for _ in 0..mult {
            folds[next % k].add(trace.clone(), 1);
            next += 1;
        }
    }
    Ok(folds)
}

/// Mean held-out fitness: for each fold, `discover` sees the other folds and
/// its model is replayed on the held-out one.
pub fn generalization_kfold<F>(log: &EventLog, k: usize, seed: u64, mut discover: F) -> Result<f64>
where
    F: FnMut(&EventLog) -> Result<PetriNet>,
{
    let folds = kfold_split(log, k, seed)?;
    let mut sum = 0.0;
    for i in 0..k {
        let train = training_log(&folds, i);
        let net = discover(&train)?;
        sum += token_fitness(&net, &folds[i])?;
    }
    Ok(sum / k as f64)
}

/// Union of all folds except `held_out`.
pub fn training_log(folds: &[EventLog], held_out: usize) -> EventLog {
    let mut train = EventLog::new();
    for (j, f) in folds.iter().enumerate() {
        if j != held_out {
            for (t, m) in f.iter() {
                train.add(t.clone(), m);
            }
        }
    }
    train
}

/// Generalization of a plain miner configuration.
pub fn generalization(log: &EventLog, k: usize, seed: u64, miner: &MinerConfig) -> Result<f64> {
    generalization_kfold(log, k, seed, |train| miner.discover(train))
}

/// Fitness, precision and F1 of `net` on `log`, with a generalization value
/// computed elsewhere.
pub fn evaluate(net: &PetriNet, log: &EventLog, generalization: f64) -> Result<MetricSet> {
    Ok(MetricSet::new(
        token_fitness(net, log)?,
        etc_precision(net, log)?,
        generalization,
    ))
}

/// Unweighted mean over all levels. The per-level values are kept.
pub fn multilevel_average(levels: &BTreeMap<String, MetricSet>) -> Result<UtilityReport> {
    if levels.is_empty() {
        return Err(Error::InvalidParameter("no reports to average".into()));
    }
    let n = levels.len() as f64;
    let mean = |f: fn(&MetricSet) -> f64| levels.values().map(f).sum::<f64>() / n;
    Ok(UtilityReport {
        metrics: MetricSet {
            fitness: mean(|m| m.fitness),
            precision: mean(|m| m.precision),
            f1: mean(|m| m.f1),
            generalization: mean(|m| m.generalization),
        },
        per_sublog: levels.clone(),
    })
}
