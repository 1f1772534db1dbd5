//! Activities, traces, event logs and the two count queries over them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use indexmap::IndexMap;

use crate::error::{Error, Result};

/// Label of the hierarchy root.
pub const ROOT_LABEL: &str = "⊤";
/// Label of the artificial start node of a DFG.
pub const START_LABEL: &str = "▶";
/// Label of the artificial end node of a DFG.
pub const END_LABEL: &str = "■";

pub fn is_reserved_label(name: &str) -> bool {
    matches!(name, ROOT_LABEL | START_LABEL | END_LABEL)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum Lifecycle {
    #[default]
    Atomic,
    Start,
    Complete,
}

impl Lifecycle {
    /// Value of the XES `lifecycle:transition` attribute, `None` for atomic.
    pub fn xes_value(self) -> Option<&'static str> {
        match self {
            Lifecycle::Atomic => None,
            Lifecycle::Start => Some("start"),
            Lifecycle::Complete => Some("complete"),
        }
    }

    pub fn from_xes_value(value: &str) -> Lifecycle {
        match value.to_ascii_lowercase().as_str() {
            "start" => Lifecycle::Start,
            "complete" => Lifecycle::Complete,
            _ => Lifecycle::Atomic,
        }
    }
}

/// An activity label together with its lifecycle transition.
///
/// Only high-level activities produced by partitioning carry a non-atomic
/// lifecycle.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Activity {
    name: String,
    lifecycle: Lifecycle,
}

impl Activity {
    pub fn new(name: impl Into<String>) -> Self {
        Self::with_lifecycle(name, Lifecycle::Atomic)
    }

    pub fn with_lifecycle(name: impl Into<String>, lifecycle: Lifecycle) -> Self {
        Activity {
            name: name.into(),
            lifecycle,
        }
    }

    /// The hierarchy root ⊤.
    pub fn root() -> Self {
        Activity::new(ROOT_LABEL)
    }

    pub fn is_root(&self) -> bool {
        self.name == ROOT_LABEL
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn lifecycle(&self) -> Lifecycle {
        self.lifecycle
    }

    /// Checks the invariants of an activity stored inside a trace.
    pub fn validate_event(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::InvalidActivity("empty activity name".into()));
        }
        if is_reserved_label(&self.name) {
            return Err(Error::InvalidActivity(format!(
                "reserved label `{}` used as event activity",
                self.name
            )));
        }
        Ok(())
    }
}

impl fmt::Display for Activity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.lifecycle {
            Lifecycle::Atomic => f.write_str(&self.name),
            Lifecycle::Start => write!(f, "{}_start", self.name),
            Lifecycle::Complete => write!(f, "{}_complete", self.name),
        }
    }
}

impl From<&str> for Activity {
    fn from(name: &str) -> Self {
        Activity::new(name)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Trace(Vec<Activity>);

impl Trace {
    pub fn new(events: Vec<Activity>) -> Self {
        Trace(events)
    }

    /// Builds a trace of atomic activities.
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Self {
        Trace(names.iter().map(|n| Activity::new(n.as_ref())).collect())
    }

    pub fn events(&self) -> &[Activity] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, activity: Activity) {
        self.0.push(activity);
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Activity> {
        self.0.iter()
    }

    pub fn into_events(self) -> Vec<Activity> {
        self.0
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("⟨")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str("⟩")
    }
}

impl FromIterator<Activity> for Trace {
    fn from_iter<I: IntoIterator<Item = Activity>>(iter: I) -> Self {
        Trace(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a Trace {
    type Item = &'a Activity;
    type IntoIter = std::slice::Iter<'a, Activity>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// A multiset of traces. Iteration follows the order in which each distinct
/// trace was first added; equality is multiset equality.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventLog {
    traces: IndexMap<Trace, u64>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `multiplicity` copies of `trace`. Zero multiplicities are ignored.
    pub fn add(&mut self, trace: Trace, multiplicity: u64) {
        if multiplicity == 0 {
            return;
        }
        *self.traces.entry(trace).or_insert(0) += multiplicity;
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Trace, u64)> {
        self.traces.iter().map(|(t, &m)| (t, m))
    }

    pub fn multiplicity(&self, trace: &Trace) -> u64 {
        self.traces.get(trace).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn variant_count(&self) -> usize {
        self.traces.len()
    }

    pub fn total_traces(&self) -> u64 {
        self.traces.values().sum()
    }

    pub fn total_events(&self) -> u64 {
        self.traces.iter().map(|(t, &m)| m * t.len() as u64).sum()
    }

    pub fn activities(&self) -> BTreeSet<Activity> {
        self.traces.keys().flat_map(|t| t.iter().cloned()).collect()
    }

    /// Expands the multiset into one entry per case, in iteration order.
    pub fn expanded(&self) -> Vec<&Trace> {
        self.traces
            .iter()
            .flat_map(|(t, &m)| std::iter::repeat_n(t, m as usize))
            .collect()
    }

    /// Multiset sum of two logs.
    pub fn merged(&self, other: &EventLog) -> EventLog {
        let mut out = self.clone();
        for (t, m) in other.iter() {
            out.add(t.clone(), m);
        }
        out
    }
}

impl FromIterator<Trace> for EventLog {
    fn from_iter<I: IntoIterator<Item = Trace>>(iter: I) -> Self {
        let mut log = EventLog::new();
        for t in iter {
            log.add(t, 1);
        }
        log
    }
}

impl FromIterator<(Trace, u64)> for EventLog {
    fn from_iter<I: IntoIterator<Item = (Trace, u64)>>(iter: I) -> Self {
        let mut log = EventLog::new();
        for (t, m) in iter {
            log.add(t, m);
        }
        log
    }
}

/// A DFG node: an activity or one of the two artificial nodes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Start,
    Act(Activity),
    End,
}

impl Node {
    pub fn activity(&self) -> Option<&Activity> {
        match self {
            Node::Act(a) => Some(a),
            _ => None,
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Start => f.write_str(START_LABEL),
            Node::End => f.write_str(END_LABEL),
            Node::Act(a) => write!(f, "{a}"),
        }
    }
}

/// Weighted directly-follows graph with artificial start and end nodes.
///
/// The start node has no incoming edges, the end node no outgoing ones, and
/// zero-weight edges are never stored.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dfg {
    nodes: BTreeSet<Node>,
    edges: BTreeMap<(Node, Node), u64>,
}

impl Dfg {
    pub fn new() -> Self {
        let mut nodes = BTreeSet::new();
        nodes.insert(Node::Start);
        nodes.insert(Node::End);
        Dfg {
            nodes,
            edges: BTreeMap::new(),
        }
    }

    pub fn add_activity(&mut self, a: Activity) {
        self.nodes.insert(Node::Act(a));
    }

    /// Adds `weight` to the edge `from → to`, creating endpoints as needed.
    ///
    /// Panics if the edge would enter the start node or leave the end node.
    pub fn add_edge(&mut self, from: Node, to: Node, weight: u64) {
        assert!(from != Node::End, "the end node has no outgoing edges");
        assert!(to != Node::Start, "the start node has no incoming edges");
        self.nodes.insert(from.clone());
        self.nodes.insert(to.clone());
        if weight == 0 {
            return;
        }
        *self.edges.entry((from, to)).or_insert(0) += weight;
    }

    pub fn set_edge(&mut self, from: Node, to: Node, weight: u64) {
        let key = (from, to);
        if weight == 0 {
            self.edges.remove(&key);
        } else {
            self.add_edge(key.0.clone(), key.1.clone(), 0);
            self.edges.insert(key, weight);
        }
    }

    pub fn weight(&self, from: &Node, to: &Node) -> u64 {
        self.edges
            .get(&(from.clone(), to.clone()))
            .copied()
            .unwrap_or(0)
    }

    pub fn nodes(&self) -> &BTreeSet<Node> {
        &self.nodes
    }

    pub fn edges(&self) -> impl Iterator<Item = (&Node, &Node, u64)> {
        self.edges.iter().map(|((a, b), &w)| (a, b, w))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn activities(&self) -> BTreeSet<Activity> {
        self.nodes
            .iter()
            .filter_map(|n| n.activity().cloned())
            .collect()
    }

    pub fn outgoing<'a>(&'a self, from: &'a Node) -> impl Iterator<Item = (&'a Node, u64)> + 'a {
        self.edges
            .range((from.clone(), Node::Start)..)
            .take_while(move |((a, _), _)| a == from)
            .map(|((_, b), &w)| (b, w))
    }

    pub fn incoming<'a>(&'a self, to: &'a Node) -> impl Iterator<Item = (&'a Node, u64)> + 'a {
        self.edges
            .iter()
            .filter(move |((_, b), _)| b == to)
            .map(|((a, _), &w)| (a, w))
    }

    pub fn start_activities(&self) -> BTreeSet<Activity> {
        self.outgoing(&Node::Start)
            .filter_map(|(n, _)| n.activity().cloned())
            .collect()
    }

    pub fn end_activities(&self) -> BTreeSet<Activity> {
        self.incoming(&Node::End)
            .filter_map(|(n, _)| n.activity().cloned())
            .collect()
    }

    /// Total weight leaving `node`.
    pub fn out_weight(&self, node: &Node) -> u64 {
        self.outgoing(node).map(|(_, w)| w).sum()
    }

    pub fn in_weight(&self, node: &Node) -> u64 {
        self.incoming(node).map(|(_, w)| w).sum()
    }
}

/// Trace variant → count.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VariantDistribution {
    counts: IndexMap<Trace, u64>,
}

impl VariantDistribution {
    pub fn get(&self, trace: &Trace) -> u64 {
        self.counts.get(trace).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Trace, u64)> {
        self.counts.iter().map(|(t, &c)| (t, c))
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

/// Directly-follows query: counts adjacent pairs, including the artificial
/// start and end edges of every trace.
pub fn df_counts(log: &EventLog) -> Result<Dfg> {
    if log.is_empty() {
        return Err(Error::EmptyLog);
    }
    let mut dfg = Dfg::new();
    for (trace, m) in log.iter() {
        let events = trace.events();
        let (Some(first), Some(last)) = (events.first(), events.last()) else {
            continue;
        };
        dfg.add_edge(Node::Start, Node::Act(first.clone()), m);
        for pair in events.windows(2) {
            dfg.add_edge(Node::Act(pair[0].clone()), Node::Act(pair[1].clone()), m);
        }
        dfg.add_edge(Node::Act(last.clone()), Node::End, m);
    }
    Ok(dfg)
}

/// Trace-variant query.
pub fn variant_counts(log: &EventLog) -> Result<VariantDistribution> {
    if log.is_empty() {
        return Err(Error::EmptyLog);
    }
    Ok(VariantDistribution {
        counts: log.iter().map(|(t, m)| (t.clone(), m)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn act(n: &str) -> Node {
        Node::Act(Activity::new(n))
    }

    fn log(entries: &[(&[&str], u64)]) -> EventLog {
        entries
            .iter()
            .map(|(t, m)| (Trace::from_names(t), *m))
            .collect()
    }

    #[test]
    fn df_counts_simple() {
        let dfg = df_counts(&log(&[(&["a", "b"], 2)])).unwrap();
        assert_eq!(dfg.edge_count(), 3);
        assert_eq!(dfg.weight(&Node::Start, &act("a")), 2);
        assert_eq!(dfg.weight(&act("a"), &act("b")), 2);
        assert_eq!(dfg.weight(&act("b"), &Node::End), 2);
    }

    #[test]
    fn df_counts_single_event() {
        let dfg = df_counts(&log(&[(&["a"], 1)])).unwrap();
        let edges: Vec<_> = dfg.edges().map(|(a, b, w)| (a.clone(), b.clone(), w)).collect();
        assert_eq!(
            edges,
            vec![(Node::Start, act("a"), 1), (act("a"), Node::End, 1)]
        );
    }

    #[test]
    fn df_counts_two_variants() {
        let dfg = df_counts(&log(&[(&["a", "b", "c"], 1), (&["a", "c"], 1)])).unwrap();
        let expected = [
            (Node::Start, act("a"), 2),
            (act("a"), act("b"), 1),
            (act("b"), act("c"), 1),
            (act("a"), act("c"), 1),
            (act("c"), Node::End, 2),
        ];
        assert_eq!(dfg.edge_count(), expected.len());
        for (a, b, w) in expected {
            assert_eq!(dfg.weight(&a, &b), w, "{a}->{b}");
        }
    }

    #[test]
    fn empty_log_is_rejected() {
        assert!(matches!(df_counts(&EventLog::new()), Err(Error::EmptyLog)));
        assert!(matches!(variant_counts(&EventLog::new()), Err(Error::EmptyLog)));
    }

    #[test]
    fn variant_counts_identity() {
        let l = log(&[(&["a", "b"], 2), (&["a"], 1)]);
        let v = variant_counts(&l).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v.get(&Trace::from_names(&["a", "b"])), 2);
        assert_eq!(v.get(&Trace::from_names(&["a"])), 1);
        assert_eq!(v.total(), l.total_traces());
    }

    #[test]
    fn multiset_equality_ignores_insertion_order() {
        let a = log(&[(&["a"], 1), (&["b"], 2)]);
        let b = log(&[(&["b"], 1), (&["a"], 1), (&["b"], 1)]);
        assert_eq!(a, b);
        assert_eq!(a.total_events(), 3);
    }

    #[test]
    fn reserved_labels_rejected_as_events() {
        assert!(Activity::new("▶").validate_event().is_err());
        assert!(Activity::new("").validate_event().is_err());
        assert!(Activity::new("x").validate_event().is_ok());
    }

    #[test]
    fn outgoing_iterates_only_source() {
        let dfg = df_counts(&log(&[(&["a", "b"], 1), (&["b", "a"], 1)])).unwrap();
        let out: Vec<_> = dfg.outgoing(&act("a")).map(|(n, _)| n.clone()).collect();
        assert_eq!(out, vec![act("b"), Node::End]);
    }
}
