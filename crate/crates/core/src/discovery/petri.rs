//! Workflow nets and token-based replay.
//!
//! Replay is the usual token game with two repairs: a missing token is
//! created (and counted) when an event's transition cannot fire, and tokens
//! left in the net at the end are counted as remaining. Silent transitions
//! are fired lazily, only when a breadth-first search over silent moves finds
//! a marking that enables the next event (or reaches the final marking).
//! Ties are broken by transition index, so replay is deterministic.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt::Write as _;

use crate::log::{Activity, Node, Trace};

use super::heuristic::DependencyGraph;
use super::tree::{Operator, ProcessTree};

/// Upper bound on markings explored by one silent-move search.
pub const SILENT_SEARCH_LIMIT: usize = 10_000;

pub type Marking = Vec<u32>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub name: String,
    /// `None` for silent transitions.
    pub label: Option<Activity>,
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
}

/// A labeled Petri net with one source and one sink place. The initial
/// marking is one token on the source, the final marking one on the sink.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PetriNet {
    pub places: Vec<String>,
    pub transitions: Vec<Transition>,
    pub source: usize,
    pub sink: usize,
}

/// Token counters of a replay. Multiplicities are folded in by the caller.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReplayCounts {
    pub produced: u64,
    pub consumed: u64,
    pub missing: u64,
    pub remaining: u64,
}

impl ReplayCounts {
    pub fn add_scaled(&mut self, other: &ReplayCounts, factor: u64) {
        self.produced += other.produced * factor;
        self.consumed += other.consumed * factor;
        self.missing += other.missing * factor;
        self.remaining += other.remaining * factor;
    }

    /// ½(1 − m/c) + ½(1 − r/p), with empty ratios counting as perfect.
    pub fn fitness(&self) -> f64 {
        let part = |num: u64, den: u64| if den == 0 { 1.0 } else { 1.0 - num as f64 / den as f64 };
        0.5 * part(self.missing, self.consumed) + 0.5 * part(self.remaining, self.produced)
    }
}

impl PetriNet {
    /// A net with only the source and sink places.
    pub fn new() -> Self {
        PetriNet {
            places: vec!["source".into(), "sink".into()],
            transitions: Vec::new(),
            source: 0,
            sink: 1,
        }
    }

    pub fn add_place(&mut self, name: impl Into<String>) -> usize {
        self.places.push(name.into());
        self.places.len() - 1
    }

    pub fn add_transition(
        &mut self,
        label: Option<Activity>,
        inputs: Vec<usize>,
        outputs: Vec<usize>,
    ) -> usize {
        let idx = self.transitions.len();
        self.transitions.push(Transition {
            name: format!("t{idx}"),
            label,
            inputs,
            outputs,
        });
        idx
    }

    pub fn initial_marking(&self) -> Marking {
        let mut m = vec![0; self.places.len()];
        m[self.source] = 1;
        m
    }

    pub fn final_marking(&self) -> Marking {
        let mut m = vec![0; self.places.len()];
        m[self.sink] = 1;
        m
    }

    pub fn is_enabled(&self, m: &Marking, t: usize) -> bool {
        self.transitions[t].inputs.iter().all(|&p| m[p] > 0)
    }

    /// Fires `t`, which must be enabled.
    pub fn fire(&self, m: &mut Marking, t: usize) {
        let tr = &self.transitions[t];
        for &p in &tr.inputs {
            m[p] -= 1;
        }
        for &p in &tr.outputs {
            m[p] += 1;
        }
    }

    pub fn labels(&self) -> BTreeSet<&Activity> {
        self.transitions.iter().filter_map(|t| t.label.as_ref()).collect()
    }

    /// Unique source without inputs, unique sink without outputs, and every
    /// node on some source → sink path.
    pub fn is_workflow_net(&self) -> bool {
        let np = self.places.len();
        let nt = self.transitions.len();
        // node ids: places 0..np, transitions np..np+nt
        let mut succ = vec![Vec::new(); np + nt];
        let mut pred = vec![Vec::new(); np + nt];
        for (i, t) in self.transitions.iter().enumerate() {
            for &p in &t.inputs {
                succ[p].push(np + i);
                pred[np + i].push(p);
            }
            for &p in &t.outputs {
                succ[np + i].push(p);
                pred[p].push(np + i);
            }
        }
        let sources: Vec<usize> = (0..np).filter(|&p| pred[p].is_empty()).collect();
        let sinks: Vec<usize> = (0..np).filter(|&p| succ[p].is_empty()).collect();
        if sources != [self.source] || sinks != [self.sink] {
            return false;
        }
        let reach = |start: usize, adj: &Vec<Vec<usize>>| {
            let mut seen = vec![false; np + nt];
            seen[start] = true;
            let mut stack = vec![start];
            while let Some(x) = stack.pop() {
                for &y in &adj[x] {
                    if !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
            seen
        };
        let fwd = reach(self.source, &succ);
        let bwd = reach(self.sink, &pred);
        fwd.iter().zip(&bwd).all(|(a, b)| *a && *b)
    }

    pub fn replayer(&self) -> Replayer<'_> {
        Replayer::new(self)
    }

    /// Graphviz rendering for inspection.
    pub fn to_dot(&self) -> String {
        let quote = |s: &str| s.replace('\\', "\\\\").replace('"', "\\\"");
        let mut out = String::from("digraph petrinet {\n  rankdir=LR;\n");
        for (i, p) in self.places.iter().enumerate() {
            let tokens = if i == self.source { "•" } else { "" };
            let shape = if i == self.sink { "doublecircle" } else { "circle" };
            let _ = writeln!(
                out,
                "  p{i} [shape={shape}, label=\"{tokens}\", xlabel=\"{}\"];",
                quote(p)
            );
        }
        for (i, t) in self.transitions.iter().enumerate() {
            match &t.label {
                Some(a) => {
                    let _ = writeln!(out, "  t{i} [shape=box, label=\"{}\"];", quote(&a.to_string()));
                }
                None => {
                    let _ = writeln!(
                        out,
                        "  t{i} [shape=box, style=filled, fillcolor=black, label=\"\", width=0.2];"
                    );
                }
            }
            for &p in &t.inputs {
                let _ = writeln!(out, "  p{p} -> t{i};");
            }
            for &p in &t.outputs {
                let _ = writeln!(out, "  t{i} -> p{p};");
            }
        }
        out.push_str("}\n");
        out
    }
}

impl Default for PetriNet {
    fn default() -> Self {
        Self::new()
    }
}

/// Token replay over one net, with the label index built once.
pub struct Replayer<'a> {
    net: &'a PetriNet,
    by_label: HashMap<&'a Activity, Vec<usize>>,
    silent: Vec<usize>,
}

impl<'a> Replayer<'a> {
    pub fn new(net: &'a PetriNet) -> Self {
        let mut by_label: HashMap<&Activity, Vec<usize>> = HashMap::new();
        let mut silent = Vec::new();
        for (i, t) in net.transitions.iter().enumerate() {
            match &t.label {
                Some(a) => by_label.entry(a).or_default().push(i),
                None => silent.push(i),
            }
        }
        Replayer {
            net,
            by_label,
            silent,
        }
    }

    pub fn net(&self) -> &PetriNet {
        self.net
    }

    /// Initial marking; the source token counts as produced.
    pub fn start(&self) -> (Marking, ReplayCounts) {
        let counts = ReplayCounts {
            produced: 1,
            ..Default::default()
        };
        (self.net.initial_marking(), counts)
    }

    fn fire_counted(&self, m: &mut Marking, c: &mut ReplayCounts, t: usize) {
        let tr = &self.net.transitions[t];
        c.consumed += tr.inputs.len() as u64;
        c.produced += tr.outputs.len() as u64;
        self.net.fire(m, t);
    }

    /// Shortest sequence of silent transitions (smallest indices first among
    /// equally short ones) leading to a marking that satisfies `goal`.
    fn silent_path<F>(&self, m: &Marking, goal: F) -> Option<Vec<usize>>
    where
        F: Fn(&Marking) -> bool,
    {
        if goal(m) {
            return Some(Vec::new());
        }
        if self.silent.is_empty() {
            return None;
        }
        // (marking, parent node, transition fired from parent)
        let mut nodes: Vec<(Marking, usize, usize)> = vec![(m.clone(), usize::MAX, usize::MAX)];
        let mut seen: HashSet<Marking> = HashSet::from([m.clone()]);
        let mut queue = VecDeque::from([0usize]);
        while let Some(i) = queue.pop_front() {
            for &t in &self.silent {
                if !self.net.is_enabled(&nodes[i].0, t) {
                    continue;
                }
                let mut next = nodes[i].0.clone();
                self.net.fire(&mut next, t);
                if !seen.insert(next.clone()) {
                    continue;
                }
                let found = goal(&next);
                nodes.push((next, i, t));
                let j = nodes.len() - 1;
                if found {
                    let mut path = Vec::new();
                    let mut k = j;
                    while nodes[k].1 != usize::MAX {
                        path.push(nodes[k].2);
                        k = nodes[k].1;
                    }
                    path.reverse();
                    return Some(path);
                }
                if nodes.len() >= SILENT_SEARCH_LIMIT {
                    return None;
                }
                queue.push_back(j);
            }
        }
        None
    }

    /// Replays one event.
    pub fn step(&self, m: &mut Marking, c: &mut ReplayCounts, a: &Activity) {
        let Some(ts) = self.by_label.get(a) else {
            // no transition carries this label: a virtual one consumes a
            // missing token and leaves a remaining one behind
            c.missing += 1;
            c.consumed += 1;
            c.produced += 1;
            c.remaining += 1;
            return;
        };
        let first_enabled =
            |m: &Marking| ts.iter().copied().find(|&t| self.net.is_enabled(m, t));
        if first_enabled(m).is_none() {
            if let Some(path) = self.silent_path(m, |x| first_enabled(x).is_some()) {
                for t in path {
                    self.fire_counted(m, c, t);
                }
            }
        }
        let t = match first_enabled(m) {
            Some(t) => t,
            None => {
                let missing_for = |t: usize| {
                    self.net.transitions[t]
                        .inputs
                        .iter()
                        .filter(|&&p| m[p] == 0)
                        .count()
                };
                let t = *ts.iter().min_by_key(|&&t| (missing_for(t), t)).unwrap();
                for &p in &self.net.transitions[t].inputs {
                    if m[p] == 0 {
                        m[p] = 1;
                        c.missing += 1;
                    }
                }
                t
            }
        };
        self.fire_counted(m, c, t);
    }

    /// Moves silently towards the final marking, consumes the sink token and
    /// counts whatever is left.
    pub fn finish(&self, m: &mut Marking, c: &mut ReplayCounts) {
        let target = self.net.final_marking();
        let sink = self.net.sink;
        let path = self
            .silent_path(m, |x| *x == target)
            .or_else(|| self.silent_path(m, |x| x[sink] > 0));
        if let Some(path) = path {
            for t in path {
                self.fire_counted(m, c, t);
            }
        }
        if m[sink] > 0 {
            m[sink] -= 1;
        } else {
            c.missing += 1;
        }
        c.consumed += 1;
        c.remaining += m.iter().map(|&x| x as u64).sum::<u64>();
    }

    pub fn replay(&self, trace: &Trace) -> ReplayCounts {
        let (mut m, mut c) = self.start();
        for a in trace {
            self.step(&mut m, &mut c, a);
        }
        self.finish(&mut m, &mut c);
        c
    }

    /// Replays a prefix without repairs. `None` as soon as an event needs a
    /// missing token or has no transition.
    pub fn step_fitting(&self, m: &Marking, a: &Activity) -> Option<Marking> {
        let mut next = m.clone();
        let mut c = ReplayCounts::default();
        self.step(&mut next, &mut c, a);
        (c.missing == 0).then_some(next)
    }

    /// Visible labels enabled in `m` or in any marking silently reachable
    /// from it.
    pub fn enabled_labels(&self, m: &Marking) -> BTreeSet<&'a Activity> {
        let mut out = BTreeSet::new();
        let mut seen: HashSet<Marking> = HashSet::from([m.clone()]);
        let mut queue = VecDeque::from([m.clone()]);
        while let Some(x) = queue.pop_front() {
            for (t, tr) in self.net.transitions.iter().enumerate() {
                if !self.net.is_enabled(&x, t) {
                    continue;
                }
                match &tr.label {
                    Some(a) => {
                        out.insert(a);
                    }
                    None => {
                        if seen.len() < SILENT_SEARCH_LIMIT {
                            let mut next = x.clone();
                            self.net.fire(&mut next, t);
                            if seen.insert(next.clone()) {
                                queue.push_back(next);
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Compositional translation of a process tree into a workflow net.
pub fn tree_to_petri(tree: &ProcessTree) -> PetriNet {
    let mut net = PetriNet::new();
    let (i, o) = (net.source, net.sink);
    build(&mut net, tree, i, o);
    net
}

fn build(net: &mut PetriNet, tree: &ProcessTree, i: usize, o: usize) {
    let fresh = |net: &mut PetriNet| {
        let n = net.places.len();
        net.add_place(format!("p{n}"))
    };
    match tree {
        ProcessTree::Leaf(a) => {
            net.add_transition(Some(a.clone()), vec![i], vec![o]);
        }
        ProcessTree::Tau => {
            net.add_transition(None, vec![i], vec![o]);
        }
        ProcessTree::Node(Operator::Sequence, ch) => {
            let mut from = i;
            for (k, c) in ch.iter().enumerate() {
                let to = if k + 1 == ch.len() { o } else { fresh(net) };
                build(net, c, from, to);
                from = to;
            }
        }
        ProcessTree::Node(Operator::Exclusive, ch) => {
            for c in ch {
                build(net, c, i, o);
            }
        }
        ProcessTree::Node(Operator::Parallel, ch) => {
            let ins: Vec<usize> = ch.iter().map(|_| fresh(net)).collect();
            let outs: Vec<usize> = ch.iter().map(|_| fresh(net)).collect();
            net.add_transition(None, vec![i], ins.clone());
            for (k, c) in ch.iter().enumerate() {
                build(net, c, ins[k], outs[k]);
            }
            net.add_transition(None, outs, vec![o]);
        }
        ProcessTree::Node(Operator::Loop, ch) => {
            let body_in = fresh(net);
            let body_out = fresh(net);
            net.add_transition(None, vec![i], vec![body_in]);
            build(net, &ch[0], body_in, body_out);
            for c in &ch[1..] {
                build(net, c, body_out, body_in);
            }
            net.add_transition(None, vec![body_out], vec![o]);
        }
    }
}

/// Reads a dependency graph as a state machine: one place per activity
/// (holding the token right after that activity fired), one transition per
/// arc into an activity, and a silent transition per end arc.
pub fn dependency_to_model(dg: &DependencyGraph) -> PetriNet {
    let mut net = PetriNet::new();
    let mut place: BTreeMap<Node, usize> = BTreeMap::new();
    place.insert(Node::Start, net.source);
    place.insert(Node::End, net.sink);
    for a in &dg.nodes {
        let p = net.add_place(format!("after {a}"));
        place.insert(Node::Act(a.clone()), p);
    }
    for (from, to) in dg.arcs.keys() {
        let (Some(&pi), Some(&po)) = (place.get(from), place.get(to)) else {
            continue;
        };
        let label = to.activity().cloned();
        net.add_transition(label, vec![pi], vec![po]);
    }
    net
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(names: &[&str]) -> Trace {
        Trace::from_names(names)
    }

    fn tree(s: &str) -> ProcessTree {
        s.parse().unwrap()
    }

    #[test]
    fn construction_sizes() {
        let leaf = tree_to_petri(&tree("'a'"));
        assert_eq!((leaf.places.len(), leaf.transitions.len()), (2, 1));
        let seq = tree_to_petri(&tree("->('a', 'b')"));
        assert_eq!((seq.places.len(), seq.transitions.len()), (3, 2));
        for s in ["'a'", "->('a', 'b')", "X('a', tau)", "+('a', 'b', 'c')", "*('a', 'b')", "*(tau, 'a', 'b')"] {
            assert!(tree_to_petri(&tree(s)).is_workflow_net(), "{s}");
        }
    }

    #[test]
    fn perfect_replay() {
        let net = tree_to_petri(&tree("->('a', 'b')"));
        let c = net.replayer().replay(&t(&["a", "b"]));
        assert_eq!(c, ReplayCounts { produced: 3, consumed: 3, missing: 0, remaining: 0 });
        assert_eq!(c.fitness(), 1.0);
    }

    #[test]
    fn skipped_first_event() {
        // ⟨b⟩ on ->(a, b): b forces a token into the middle place, the
        // source token is left behind
        let net = tree_to_petri(&tree("->('a', 'b')"));
        let c = net.replayer().replay(&t(&["b"]));
        assert_eq!(c, ReplayCounts { produced: 2, consumed: 2, missing: 1, remaining: 1 });
        assert_eq!(c.fitness(), 0.5);
    }

    #[test]
    fn silent_moves_for_concurrency_and_loops() {
        let r = tree_to_petri(&tree("->('a', +('b', 'c'), *('d', 'e'))"));
        let rp = r.replayer();
        for tr in [&["a", "b", "c", "d"][..], &["a", "c", "b", "d", "e", "d", "e", "d"]] {
            assert_eq!(rp.replay(&t(tr)).fitness(), 1.0, "{tr:?}");
        }
        assert!(rp.replay(&t(&["a", "b", "d"])).fitness() < 1.0);
    }

    #[test]
    fn flower_accepts_everything() {
        let net = tree_to_petri(&tree("*(tau, 'a', 'b')"));
        let rp = net.replayer();
        for tr in [&["a"][..], &["b", "a", "a", "b"], &["b"]] {
            assert_eq!(rp.replay(&t(tr)).fitness(), 1.0);
        }
    }

    #[test]
    fn unknown_label_is_virtual() {
        let net = tree_to_petri(&tree("'a'"));
        let c = net.replayer().replay(&t(&["a", "z"]));
        assert_eq!(c, ReplayCounts { produced: 3, consumed: 3, missing: 1, remaining: 1 });
    }

    #[test]
    fn enabled_after_prefix() {
        let net = tree_to_petri(&tree("->('a', X('b', +('c', 'd')))"));
        let rp = net.replayer();
        let (m, _) = rp.start();
        let m = rp.step_fitting(&m, &Activity::new("a")).unwrap();
        let en: Vec<String> = rp.enabled_labels(&m).iter().map(|a| a.to_string()).collect();
        assert_eq!(en, ["b", "c", "d"]);
        assert!(rp.step_fitting(&m, &Activity::new("a")).is_none());
    }

    fn dg(arcs: &[(Node, Node)]) -> DependencyGraph {
        let mut g = DependencyGraph::default();
        for (a, b) in arcs {
            for n in [a, b] {
                if let Node::Act(x) = n {
                    g.nodes.insert(x.clone());
                }
            }
            g.arcs.insert((a.clone(), b.clone()), 0.9);
        }
        g
    }

    #[test]
    fn dependency_model_replay() {
        let a = Node::Act(Activity::new("a"));
        let b = Node::Act(Activity::new("b"));
        let net = dependency_to_model(&dg(&[
            (Node::Start, a.clone()),
            (a.clone(), b.clone()),
            (b.clone(), Node::End),
        ]));
        assert!(net.is_workflow_net());
        let rp = net.replayer();
        assert_eq!(rp.replay(&t(&["a", "b"])).fitness(), 1.0);
        let bad = rp.replay(&t(&["b", "a"]));
        assert!(bad.missing > 0);

        let empty = dependency_to_model(&DependencyGraph::default());
        let c = empty.replayer().replay(&t(&["a"]));
        assert_eq!(c.missing, 2);
    }
}
