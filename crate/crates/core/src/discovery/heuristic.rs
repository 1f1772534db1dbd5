use std::collections::{BTreeMap, BTreeSet};

use crate::error::Result;
use crate::log::{df_counts, Activity, Dfg, EventLog, Node};

/// Dependency arcs between activities and the artificial start/end nodes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DependencyGraph {
    pub nodes: BTreeSet<Activity>,
    pub arcs: BTreeMap<(Node, Node), f64>,
}

impl DependencyGraph {
    pub fn arc(&self, from: &Node, to: &Node) -> Option<f64> {
        self.arcs.get(&(from.clone(), to.clone())).copied()
    }
}

/// Dependency measure between two distinct activities.
pub fn dependency(ab: u64, ba: u64) -> f64 {
    (ab as f64 - ba as f64) / (ab as f64 + ba as f64 + 1.0)
}

fn self_dependency(aa: u64) -> f64 {
    aa as f64 / (aa as f64 + 1.0)
}

pub fn heuristic_mine(log: &EventLog, threshold: f64) -> Result<DependencyGraph> {
    Ok(heuristic_mine_dfg(&df_counts(log)?, threshold))
}

/// Scores every directly-follows edge and keeps those reaching `threshold`,
/// plus the strongest positive incoming and outgoing arc of every activity.
/// Activities not on a path from ▶ to ■ are dropped afterwards.
pub fn heuristic_mine_dfg(dfg: &Dfg, threshold: f64) -> DependencyGraph {
    let mut scored: Vec<((Node, Node), f64)> = Vec::new();
    for (from, to, w) in dfg.edges() {
        let dep = match (from, to) {
            (Node::Act(a), Node::Act(b)) if a != b => dependency(w, dfg.weight(to, from)),
            _ => self_dependency(w),
        };
        scored.push(((from.clone(), to.clone()), dep));
    }

    let mut best_in: BTreeMap<&Node, (usize, f64)> = BTreeMap::new();
    let mut best_out: BTreeMap<&Node, (usize, f64)> = BTreeMap::new();
    for (i, ((from, to), dep)) in scored.iter().enumerate() {
        if from == to || *dep <= 0.0 {
            continue;
        }
        for (map, key) in [(&mut best_out, from), (&mut best_in, to)] {
            let e = map.entry(key).or_insert((i, *dep));
            if *dep > e.1 {
                *e = (i, *dep);
            }
        }
    }
    let forced: BTreeSet<usize> = best_in
        .values()
        .chain(best_out.values())
        .map(|&(i, _)| i)
        .collect();

    let mut arcs: BTreeMap<(Node, Node), f64> = scored
        .into_iter()
        .enumerate()
        .filter(|(i, (_, dep))| *dep >= threshold || forced.contains(i))
        .map(|(_, arc)| arc)
        .collect();

    // keep only activities on some ▶ → ■ path
    let forward = reach(&arcs, &Node::Start, |(a, b)| (a, b));
    let backward = reach(&arcs, &Node::End, |(a, b)| (b, a));
    let live_set: BTreeSet<Node> = forward
        .intersection(&backward)
        .map(|n| (*n).clone())
        .collect();
    let live = |n: &Node| live_set.contains(n);
    arcs.retain(|(a, b), _| live(a) && live(b));
    let nodes = dfg
        .activities()
        .into_iter()
        .filter(|a| live(&Node::Act(a.clone())))
        .collect();
    DependencyGraph { nodes, arcs }
}

fn reach<'a, F>(arcs: &'a BTreeMap<(Node, Node), f64>, root: &'a Node, dir: F) -> BTreeSet<&'a Node>
where
    F: Fn((&'a Node, &'a Node)) -> (&'a Node, &'a Node),
{
    let mut seen = BTreeSet::from([root]);
    let mut stack = vec![root];
    while let Some(x) = stack.pop() {
        for (a, b) in arcs.keys() {
            let (src, dst) = dir((a, b));
            if src == x && seen.insert(dst) {
                stack.push(dst);
            }
        }
    }
    seen
}
