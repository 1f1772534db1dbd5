//! ε-differentially private release of directly-follows counts and of trace
//! variants.
//!
//! Two mechanisms are provided:
//!
//! * **DF-Laplace** perturbs every candidate directly-follows count, including
//!   pairs that never occur, with Laplace noise of scale `1/ε`, rounds, and
//!   clamps at zero. [`playout_dfg`] turns the noisy graph back into a log
//!   when a log-shaped artifact is needed.
//! * **Variant tree** grows a prefix tree breadth-first. Every continuation
//!   (each activity and the trace end) of a surviving prefix receives a noisy
//!   count; continuations below the pruning threshold `p` are cut, and
//!   surviving trace ends are released as variants. Depth is bounded by `l`.
//!
//! Disjoint parts of a partitioned log are anonymized with the full ε each
//! (parallel composition), on independent random streams.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};
use crate::log::{Activity, Dfg, EventLog, Node, Trace};
use crate::partition::PartitionResult;
use crate::seed;

/// Sensitivity assumed for a single directly-follows count.
pub const DF_SENSITIVITY: f64 = 1.0;

/// Attempts per walk before a playout trace is emitted truncated.
pub const PLAYOUT_RETRIES: usize = 10;

/// Upper bound on expanded prefix-tree nodes per variant-tree run.
pub const MAX_TREE_NODES: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyParams {
    pub epsilon: f64,
    /// Longest variant the variant tree may release (`l`).
    pub max_len: usize,
    /// Pruning threshold of the variant tree (`p`).
    pub prune: f64,
    pub seed: u64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, prune: f64, max_len: usize, seed: u64) -> Result<Self> {
        let p = PrivacyParams {
            epsilon,
            max_len,
            prune,
            seed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_len == 0 {
            return Err(Error::InvalidParameter("max_len must be at least 1".into()));
        }
        if !(self.prune >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "prune must be non-negative, got {}",
                self.prune
            )));
        }
        Ok(())
    }

    /// Laplace scale used by DF-Laplace.
    pub fn df_scale(&self) -> f64 {
        DF_SENSITIVITY / self.epsilon
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mechanism {
    DfLaplace,
    VariantTree,
}

impl Mechanism {
    pub fn as_str(self) -> &'static str {
        match self {
            Mechanism::DfLaplace => "df_laplace",
            Mechanism::VariantTree => "variant_tree",
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "df" | "df_laplace" | "df-laplace" => Ok(Mechanism::DfLaplace),
            "variants" | "variant_tree" | "variant-tree" => Ok(Mechanism::VariantTree),
            _ => Err(Error::InvalidParameter(format!("unknown mechanism `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Composition {
    /// Disjoint data: the effective budget is the largest entry.
    Parallel,
    /// Same data queried repeatedly: budgets add up.
    Sequential,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetLedger {
    pub rule: Composition,
    pub entries: Vec<(String, f64)>,
}

impl BudgetLedger {
    pub fn new(rule: Composition) -> Self {
        BudgetLedger {
            rule,
            entries: Vec::new(),
        }
    }

    pub fn record(&mut self, dataset: impl Into<String>, epsilon: f64) {
        self.entries.push((dataset.into(), epsilon));
    }

    pub fn effective_epsilon(&self) -> f64 {
        let eps = self.entries.iter().map(|(_, e)| *e);
        match self.rule {
            Composition::Parallel => eps.fold(0.0, f64::max),
            Composition::Sequential => eps.sum(),
        }
    }
}

/// Inverse CDF of Laplace(0, scale) at `u ∈ (0, 1)`.
pub fn laplace_from_uniform(scale: f64, u: f64) -> f64 {
    if u < 0.5 {
        scale * (2.0 * u).ln()
    } else {
        scale * (0.5 / (1.0 - u)).ln()
    }
}

/// One draw from Laplace(0, scale).
pub fn laplace_sample<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    assert!(scale > 0.0, "Laplace scale must be positive");
    let u = loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            break u;
        }
    };
    laplace_from_uniform(scale, u)
}

/// `round(count + Laplace(scale))`, clamped at zero.
pub fn noisy_count<R: Rng + ?Sized>(count: u64, scale: f64, rng: &mut R) -> u64 {
    let v = (count as f64 + laplace_sample(scale, rng)).round();
    if v <= 0.0 {
        0
    } else {
        v as u64
    }
}

/// DF-Laplace over the full candidate edge domain of `dfg`'s activities:
/// sources are ▶ and the activities, targets the activities and ■. The direct
/// ▶→■ pair (an empty trace) is not part of the domain.
pub fn anonymize_dfg<R: Rng + ?Sized>(dfg: &Dfg, params: &PrivacyParams, rng: &mut R) -> Result<Dfg> {
    params.validate()?;
    let scale = params.df_scale();
    let acts: Vec<Node> = dfg.activities().into_iter().map(Node::Act).collect();
    let sources = std::iter::once(Node::Start).chain(acts.iter().cloned());
    let mut out = Dfg::new();
    for a in &acts {
        if let Node::Act(act) = a {
            out.add_activity(act.clone());
        }
    }
    for src in sources {
        for dst in acts.iter().cloned().chain(std::iter::once(Node::End)) {
            if src == Node::Start && dst == Node::End {
                continue;
            }
            let w = noisy_count(dfg.weight(&src, &dst), scale, rng);
            out.set_edge(src.clone(), dst, w);
        }
    }
    Ok(out)
}

/// Plays out `n_traces` weighted random walks from ▶ to ■.
///
/// Walks longer than `max_len` are retried up to [`PLAYOUT_RETRIES`] times and
/// then emitted truncated. A walk reaching a node without outgoing edges ends
/// there. Walks that go straight from ▶ to ■ produce no trace.
pub fn playout_dfg<R: Rng + ?Sized>(
    dfg: &Dfg,
    n_traces: u64,
    max_len: usize,
    rng: &mut R,
) -> Result<EventLog> {
    if dfg.outgoing(&Node::Start).next().is_none() {
        return Err(Error::DegenerateDfg);
    }
    let mut choices: BTreeMap<&Node, (Vec<&Node>, WeightedIndex<u64>)> = BTreeMap::new();
    for n in dfg.nodes() {
        let (targets, weights): (Vec<&Node>, Vec<u64>) = dfg.outgoing(n).unzip();
        if let Ok(w) = WeightedIndex::new(&weights) {
            choices.insert(n, (targets, w));
        }
    }
    let walk = |rng: &mut R| -> (Vec<Activity>, bool) {
        let mut cur = &Node::Start;
        let mut events = Vec::new();
        loop {
            let Some((targets, w)) = choices.get(cur) else {
                return (events, true);
            };
            let next = targets[w.sample(rng)];
            match next {
                Node::End => return (events, true),
                Node::Act(a) => {
                    if events.len() == max_len {
                        return (events, false);
                    }
                    events.push(a.clone());
                }
                Node::Start => unreachable!(),
            }
            cur = next;
        }
    };
    let mut log = EventLog::new();
    for _ in 0..n_traces {
        let mut attempt = 0;
        let events = loop {
            attempt += 1;
            let (events, finished) = walk(rng);
            if (finished && !events.is_empty()) || attempt >= PLAYOUT_RETRIES {
                break events;
            }
        };
        if !events.is_empty() {
            log.add(Trace::new(events), 1);
        }
    }
    Ok(log)
}

#[derive(Default)]
struct TrieNode {
    children: BTreeMap<Activity, usize>,
    /// Traces having this node's prefix.
    through: u64,
    /// Traces equal to this node's prefix.
    ends: u64,
}

fn build_trie(log: &EventLog) -> Vec<TrieNode> {
    let mut nodes = vec![TrieNode::default()];
    for (trace, m) in log.iter() {
        let mut cur = 0;
        nodes[0].through += m;
        for a in trace {
            let next = match nodes[cur].children.get(a) {
                Some(&i) => i,
                None => {
                    nodes.push(TrieNode::default());
                    let i = nodes.len() - 1;
                    nodes[cur].children.insert(a.clone(), i);
                    i
                }
            };
            nodes[next].through += m;
            cur = next;
        }
        nodes[cur].ends += m;
    }
    nodes
}

/// Prefix-tree trace-variant mechanism.
pub fn anonymize_variants<R: Rng + ?Sized>(
    log: &EventLog,
    params: &PrivacyParams,
    rng: &mut R,
) -> Result<EventLog> {
    params.validate()?;
    if log.is_empty() {
        return Err(Error::EmptyLog);
    }
    let scale = 1.0 / params.epsilon;
    let alphabet: Vec<Activity> = log.activities().into_iter().collect();
    let trie = build_trie(log);
    let mut out = EventLog::new();
    // expanded prefixes as (parent, activity index, depth, trie node if the
    // prefix occurs in the log); prefixes are rebuilt only when emitted
    let mut arena: Vec<(usize, usize, usize, Option<usize>)> = vec![(usize::MAX, 0, 0, Some(0))];
    let mut next = 0usize;
    let mut root_survivors = 0usize;
    let prefix_of = |arena: &[(usize, usize, usize, Option<usize>)], mut i: usize| {
        let mut acts = Vec::with_capacity(arena[i].2);
        while i != 0 {
            acts.push(alphabet[arena[i].1].clone());
            i = arena[i].0;
        }
        acts.reverse();
        acts
    };
    while next < arena.len() {
        if next >= MAX_TREE_NODES {
            return Err(Error::InvalidParameter(format!(
                "variant tree exceeded {MAX_TREE_NODES} nodes; raise the pruning threshold"
            )));
        }
        let (_, _, depth, node) = arena[next];
        let is_root = next == 0;
        if depth < params.max_len {
            for (ai, a) in alphabet.iter().enumerate() {
                let child = node.and_then(|i| trie[i].children.get(a).copied());
                let count = child.map_or(0, |c| trie[c].through);
                let noisy = count as f64 + laplace_sample(scale, rng);
                if noisy < params.prune {
                    continue;
                }
                if is_root {
                    root_survivors += 1;
                }
                arena.push((next, ai, depth + 1, child));
            }
        }
        if !is_root {
            let count = node.map_or(0, |i| trie[i].ends);
            let noisy = count as f64 + laplace_sample(scale, rng);
            if noisy >= params.prune {
                let m = noisy.round();
                if m >= 1.0 {
                    out.add(Trace::new(prefix_of(&arena, next)), m as u64);
                }
            }
        }
        next += 1;
    }
    if root_survivors == 0 || out.is_empty() {
        return Err(Error::AllVariantsPruned);
    }
    Ok(out)
}

/// Output of one mechanism on one part.
#[derive(Debug, Clone, PartialEq)]
pub enum Anonymized {
    Dfg(Dfg),
    Log(EventLog),
}

/// Stream label of a part: `abstracted` or `sub:<name>`.
pub fn part_label(part: Option<&str>) -> String {
    match part {
        None => "abstracted".to_string(),
        Some(a) => format!("sub:{a}"),
    }
}

/// Applies `mechanism` to one log on its own stream.
pub fn anonymize_log<R: Rng + ?Sized>(
    log: &EventLog,
    params: &PrivacyParams,
    mechanism: Mechanism,
    rng: &mut R,
) -> Result<Anonymized> {
    match mechanism {
        Mechanism::DfLaplace => {
            let dfg = crate::log::df_counts(log)?;
            anonymize_dfg(&dfg, params, rng).map(Anonymized::Dfg)
        }
        Mechanism::VariantTree => anonymize_variants(log, params, rng).map(Anonymized::Log),
    }
}

/// Anonymized parts of a partition, keyed like [`PartitionResult::part_alphabets`].
#[derive(Debug)]
pub struct AnonymizedParts {
    pub parts: BTreeMap<Option<String>, Result<Anonymized>>,
    pub ledger: BudgetLedger,
}

/// Anonymizes the abstracted log and every sub-log with the same ε, each on a
/// stream derived from `(params.seed, stream_prefix…, part label)`.
pub fn anonymize_parts(
    result: &PartitionResult,
    params: &PrivacyParams,
    mechanism: Mechanism,
    stream_prefix: &[&str],
) -> AnonymizedParts {
    let mut ledger = BudgetLedger::new(Composition::Parallel);
    let mut parts = BTreeMap::new();
    let logs = std::iter::once((None, &result.abstracted_log))
        .chain(result.sub_logs.iter().map(|(k, l)| (Some(k.clone()), l)));
    for (key, log) in logs {
        let label = part_label(key.as_deref());
        let mut labels: Vec<&str> = stream_prefix.to_vec();
        labels.push(&label);
        let mut rng = seed::stream(params.seed, &labels);
        ledger.record(label.clone(), params.epsilon);
        parts.insert(key, anonymize_log(log, params, mechanism, &mut rng));
    }
    AnonymizedParts { parts, ledger }
}

/// Anonymizes every part of `result` and returns log-shaped parts. DF-Laplace
/// parts are played out with as many traces as the original part.
pub fn anonymize_partition(
    result: &PartitionResult,
    params: &PrivacyParams,
    mechanism: Mechanism,
) -> Result<(PartitionResult, BudgetLedger)> {
    let AnonymizedParts { parts, ledger } = anonymize_parts(result, params, mechanism, &["anonymize"]);
    let mut out = PartitionResult::default();
    for (key, anon) in parts {
        let original = match &key {
            None => &result.abstracted_log,
            Some(k) => &result.sub_logs[k],
        };
        let log = match anon? {
            Anonymized::Log(l) => l,
            Anonymized::Dfg(d) => {
                let label = part_label(key.as_deref());
                let mut rng = seed::stream(params.seed, &["playout", &label]);
                playout_dfg(&d, original.total_traces(), params.max_len, &mut rng)?
            }
        };
        match key {
            None => out.abstracted_log = log,
            Some(k) => {
                out.sub_logs.insert(k, log);
            }
        }
    }
    Ok((out, ledger))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::AbstractionHierarchy;
    use crate::log::df_counts;
    use crate::partition::partition;
    use crate::seed::rng_from;

    fn params(eps: f64, prune: f64, l: usize) -> PrivacyParams {
        PrivacyParams::new(eps, prune, l, 1).unwrap()
    }

    fn ten_activity_log() -> EventLog {
        let names: Vec<String> = (0..10).map(|i| format!("t{i}")).collect();
        let mut log = EventLog::new();
        for k in 0..5 {
            let t: Vec<&str> = names.iter().skip(k).take(3 + k).map(String::as_str).collect();
            log.add(Trace::from_names(&t), 3 + k as u64);
        }
        log
    }

    #[test]
    fn median_is_zero() {
        assert_eq!(laplace_from_uniform(2.5, 0.5), 0.0);
        assert!(laplace_from_uniform(1.0, 0.25) < 0.0);
        assert!((laplace_from_uniform(1.0, 0.75) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn params_validation() {
        assert!(PrivacyParams::new(0.0, 1.0, 50, 0).is_err());
        assert!(PrivacyParams::new(1.0, -1.0, 50, 0).is_err());
        assert!(PrivacyParams::new(1.0, 1.0, 0, 0).is_err());
        assert!(PrivacyParams::new(0.1, 0.0, 1, 0).is_ok());
    }

    #[test]
    fn ledger_composition() {
        let mut l = BudgetLedger::new(Composition::Parallel);
        l.record("A", 0.1);
        l.record("B", 0.1);
        assert_eq!(l.effective_epsilon(), 0.1);
        let mut s = BudgetLedger::new(Composition::Sequential);
        s.record("L", 0.1);
        s.record("L", 0.2);
        assert!((s.effective_epsilon() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn negative_noise_clamps_and_drops() {
        // u chosen so that the noise is about -5.2
        let scale = 1.0;
        let u = 0.5 * (-5.2f64).exp();
        let noise = laplace_from_uniform(scale, u);
        assert!((noise + 5.2).abs() < 1e-12);
        let v = (3.0 + noise).round().max(0.0);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn vanishing_noise_dfg() {
        let log = ten_activity_log();
        let dfg = df_counts(&log).unwrap();
        let mut rng = rng_from(5);
        let out = anonymize_dfg(&dfg, &params(1000.0, 0.5, 50), &mut rng).unwrap();
        assert_eq!(out, dfg);
    }

    #[test]
    fn dfg_noise_fills_absent_pairs() {
        let log: EventLog = [(Trace::from_names(&["a", "b"]), 1)].into_iter().collect();
        let dfg = df_counts(&log).unwrap();
        let mut rng = rng_from(9);
        let out = anonymize_dfg(&dfg, &params(0.05, 0.0, 50), &mut rng).unwrap();
        // with scale 20, some of the 5 zero-count pairs become edges
        let new_edges = out
            .edges()
            .filter(|(a, b, _)| dfg.weight(a, b) == 0)
            .count();
        assert!(new_edges > 0);
        assert_eq!(out.weight(&Node::Start, &Node::End), 0);
    }

    #[test]
    fn playout_single_path() {
        let log: EventLog = [(Trace::from_names(&["a"]), 1)].into_iter().collect();
        let dfg = df_counts(&log).unwrap();
        let out = playout_dfg(&dfg, 20, 10, &mut rng_from(1)).unwrap();
        assert_eq!(out.variant_count(), 1);
        assert_eq!(out.multiplicity(&Trace::from_names(&["a"])), 20);
    }

    #[test]
    fn playout_self_loop_is_capped() {
        let mut dfg = Dfg::new();
        let a = Node::Act(Activity::new("a"));
        dfg.add_edge(Node::Start, a.clone(), 1);
        dfg.add_edge(a.clone(), a, 1);
        let out = playout_dfg(&dfg, 5, 7, &mut rng_from(1)).unwrap();
        assert_eq!(out.total_traces(), 5);
        assert!(out.iter().all(|(t, _)| t.len() == 7));
    }

    #[test]
    fn playout_degenerate() {
        assert!(matches!(
            playout_dfg(&Dfg::new(), 1, 5, &mut rng_from(0)),
            Err(Error::DegenerateDfg)
        ));
    }

    #[test]
    fn vanishing_noise_variants() {
        let log = ten_activity_log();
        let out = anonymize_variants(&log, &params(1000.0, 0.5, 50), &mut rng_from(3)).unwrap();
        assert_eq!(out, log);
    }

    #[test]
    fn variants_respect_length_bound() {
        let log = ten_activity_log();
        let out = anonymize_variants(&log, &params(1000.0, 0.5, 4), &mut rng_from(3)).unwrap();
        assert!(out.iter().all(|(t, _)| t.len() <= 4));
        assert!(out.iter().all(|(t, _)| log.multiplicity(t) > 0));
    }

    #[test]
    fn supercritical_tree_is_capped() {
        // seven candidates each surviving with probability ½e^{-½} keep the
        // noise-only subtree growing until the node cap stops it
        let log: EventLog = [(Trace::from_names(&["a", "b", "c", "d", "e", "f"]), 10)]
            .into_iter()
            .collect();
        let params = PrivacyParams::new(0.1, 5.0, 50, 1).unwrap();
        let err = anonymize_variants(&log, &params, &mut seed::rng_from(1)).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)), "{err}");
    }

    #[test]
    fn heavy_pruning_eliminates_everything() {
        let log: EventLog = [(Trace::from_names(&["a"]), 100)].into_iter().collect();
        let mut failures = 0;
        for s in 0..50 {
            let r = anonymize_variants(&log, &params(0.01, 200.0, 50), &mut rng_from(s));
            match r {
                Err(Error::AllVariantsPruned) => failures += 1,
                Ok(l) => assert!(l.total_traces() > 0),
                Err(e) => panic!("unexpected {e}"),
            }
        }
        // P(100 + Laplace(100) >= 200) = e^-1 / 2 for the root child alone
        assert!(failures >= 25, "{failures}");
    }

    #[test]
    fn partition_ledger_is_parallel() {
        let log: EventLog = [(Trace::from_names(&["a", "b", "c", "d"]), 20)].into_iter().collect();
        let h = AbstractionHierarchy::from_pairs([
            ("a", "A"),
            ("b", "A"),
            ("c", "B"),
            ("d", "B"),
            ("A", "⊤"),
            ("B", "⊤"),
        ]);
        let r = partition(&log, &h).unwrap();
        let p = params(0.1, 0.0, 50);
        let (anon, ledger) = anonymize_partition(&r, &p, Mechanism::DfLaplace).unwrap();
        assert_eq!(ledger.entries.len(), 3);
        assert_eq!(ledger.effective_epsilon(), 0.1);
        let (again, _) = anonymize_partition(&r, &p, Mechanism::DfLaplace).unwrap();
        assert_eq!(anon, again);
        // sub-process parts never mention the other sub-process's activities
        let a_acts = anon.sub_logs["A"].activities();
        assert!(a_acts.iter().all(|x| x.name() == "a" || x.name() == "b"));
    }

    #[test]
    fn empty_hierarchy_only_abstracted() {
        let log: EventLog = [(Trace::from_names(&["a", "b"]), 20)].into_iter().collect();
        let r = partition(&log, &AbstractionHierarchy::new()).unwrap();
        let p = params(1000.0, 0.5, 50);
        let (anon, ledger) = anonymize_partition(&r, &p, Mechanism::VariantTree).unwrap();
        assert!(anon.sub_logs.is_empty());
        assert_eq!(anon.abstracted_log, log);
        assert_eq!(ledger.entries.len(), 1);
    }
}
