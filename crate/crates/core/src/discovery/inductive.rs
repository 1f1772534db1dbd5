//! Inductive mining on a directly-follows graph.
//!
//! Cuts are tried in the order exclusive, sequence, parallel, loop; the first
//! one found splits the activities and the miner recurses on the projected
//! sub-graphs. Parts are ordered by their smallest activity. When no cut
//! applies the result is a flower model.
//!
//! Projections keep the edges inside a part. The start (end) activities of a
//! part are the activities entered from (leaving to) outside the part, which
//! includes the artificial start (end) node.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::log::{Activity, Dfg, Node};

use super::tree::ProcessTree;

struct Graph {
    acts: Vec<Activity>,
    adj: Vec<Vec<bool>>,
}

impl Graph {
    fn edge(&self, a: usize, b: usize) -> bool {
        self.adj[a][b]
    }
}

/// A projected sub-graph: node indices (sorted) and boundary sets.
#[derive(Clone, Debug)]
struct Part {
    nodes: Vec<usize>,
    starts: BTreeSet<usize>,
    ends: BTreeSet<usize>,
}

/// Discovers a process tree from a (filtered) DFG.
pub fn inductive_mine(dfg: &Dfg) -> ProcessTree {
    let acts: Vec<Activity> = dfg.activities().into_iter().collect();
    let index: BTreeMap<&Activity, usize> = acts.iter().enumerate().map(|(i, a)| (a, i)).collect();
    let n = acts.len();
    let mut adj = vec![vec![false; n]; n];
    let mut starts = BTreeSet::new();
    let mut ends = BTreeSet::new();
    for (from, to, _) in dfg.edges() {
        match (from, to) {
            (Node::Act(a), Node::Act(b)) => adj[index[a]][index[b]] = true,
            (Node::Start, Node::Act(b)) => {
                starts.insert(index[b]);
            }
            (Node::Act(a), Node::End) => {
                ends.insert(index[a]);
            }
            _ => {}
        }
    }
    let g = Graph { acts, adj };
    mine(
        &g,
        Part {
            nodes: (0..n).collect(),
            starts,
            ends,
        },
    )
}

fn mine(g: &Graph, part: Part) -> ProcessTree {
    match part.nodes.len() {
        0 => return ProcessTree::Tau,
        1 => {
            let a = part.nodes[0];
            let leaf = ProcessTree::Leaf(g.acts[a].clone());
            return if g.edge(a, a) {
                ProcessTree::looped(vec![leaf, ProcessTree::Tau])
            } else {
                leaf
            };
        }
        _ => {}
    }
    if let Some(parts) = exclusive_cut(g, &part) {
        return ProcessTree::xor(parts.into_iter().map(|p| mine(g, p)).collect());
    }
    if let Some(parts) = sequence_cut(g, &part) {
        return ProcessTree::seq(
            parts
                .into_iter()
                .map(|(p, skippable)| {
                    let child = mine(g, p);
                    if skippable {
                        ProcessTree::xor(vec![ProcessTree::Tau, child])
                    } else {
                        child
                    }
                })
                .collect(),
        );
    }
    if let Some(parts) = parallel_cut(g, &part) {
        return ProcessTree::par(parts.into_iter().map(|p| mine(g, p)).collect());
    }
    if let Some(parts) = loop_cut(g, &part) {
        return ProcessTree::looped(parts.into_iter().map(|p| mine(g, p)).collect());
    }
    ProcessTree::flower(part.nodes.iter().map(|&i| g.acts[i].clone()))
}

/// Groups of `nodes` under a union-find closure of `join`, ordered by
/// smallest member. Each group is sorted.
fn components<F>(nodes: &[usize], join: F) -> Vec<Vec<usize>>
where
    F: Fn(usize, usize) -> bool,
{
    let mut parent: Vec<usize> = (0..nodes.len()).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut c = x;
        while p[c] != r {
            let next = p[c];
            p[c] = r;
            c = next;
        }
        r
    }
    for i in 0..nodes.len() {
        for j in (i + 1)..nodes.len() {
            if join(nodes[i], nodes[j]) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..nodes.len() {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(nodes[i]);
    }
    // roots are the smallest position, and nodes are sorted, so the map
    // order is already by smallest member
    groups.into_values().collect()
}

fn restrict(set: &BTreeSet<usize>, nodes: &[usize]) -> BTreeSet<usize> {
    nodes.iter().copied().filter(|n| set.contains(n)).collect()
}

fn exclusive_cut(g: &Graph, part: &Part) -> Option<Vec<Part>> {
    let comps = components(&part.nodes, |a, b| g.edge(a, b) || g.edge(b, a));
    if comps.len() < 2 {
        return None;
    }
    Some(
        comps
            .into_iter()
            .map(|c| Part {
                starts: restrict(&part.starts, &c),
                ends: restrict(&part.ends, &c),
                nodes: c,
            })
            .collect(),
    )
}

/// Transitive reachability (paths of length ≥ 1) inside `nodes`.
fn reachability(g: &Graph, nodes: &[usize]) -> BTreeMap<usize, BTreeSet<usize>> {
    let inside: BTreeSet<usize> = nodes.iter().copied().collect();
    let mut out = BTreeMap::new();
    for &s in nodes {
        let mut seen = BTreeSet::new();
        let mut q = VecDeque::from([s]);
        while let Some(x) = q.pop_front() {
            for &y in nodes {
                if g.edge(x, y) && inside.contains(&y) && seen.insert(y) {
                    q.push_back(y);
                }
            }
        }
        out.insert(s, seen);
    }
    out
}

/// Boundary sets of a sub-part: entered from outside `group` (or from the
/// parent's boundary), left towards outside.
fn project(g: &Graph, parent: &Part, group: Vec<usize>) -> Part {
    let members: BTreeSet<usize> = group.iter().copied().collect();
    let outside: Vec<usize> = parent
        .nodes
        .iter()
        .copied()
        .filter(|n| !members.contains(n))
        .collect();
    let starts = group
        .iter()
        .copied()
        .filter(|&v| parent.starts.contains(&v) || outside.iter().any(|&u| g.edge(u, v)))
        .collect();
    let ends = group
        .iter()
        .copied()
        .filter(|&v| parent.ends.contains(&v) || outside.iter().any(|&u| g.edge(v, u)))
        .collect();
    Part {
        nodes: group,
        starts,
        ends,
    }
}

fn sequence_cut(g: &Graph, part: &Part) -> Option<Vec<(Part, bool)>> {
    let reach = reachability(g, &part.nodes);
    let r = |a: usize, b: usize| reach[&a].contains(&b);
    let groups = components(&part.nodes, |a, b| r(a, b) == r(b, a));
    if groups.len() < 2 {
        return None;
    }
    // order by how many other groups reach into the group
    let reaches_group = |from: &[usize], to: &[usize]| {
        from.iter().any(|&a| to.iter().any(|&b| r(a, b)))
    };
    let mut keyed: Vec<(usize, Vec<usize>)> = groups
        .iter()
        .map(|gr| {
            let k = groups
                .iter()
                .filter(|other| *other != gr && reaches_group(other, gr))
                .count();
            (k, gr.clone())
        })
        .collect();
    keyed.sort();
    let ordered: Vec<Vec<usize>> = keyed.into_iter().map(|(_, gr)| gr).collect();
    for i in 0..ordered.len() {
        for j in (i + 1)..ordered.len() {
            for &a in &ordered[i] {
                for &b in &ordered[j] {
                    if !r(a, b) || r(b, a) {
                        return None;
                    }
                }
            }
        }
    }

    let k = ordered.len();
    let mut pos: BTreeMap<usize, usize> = BTreeMap::new();
    for (i, gr) in ordered.iter().enumerate() {
        for &n in gr {
            pos.insert(n, i);
        }
    }
    // (from position, to position); -1 is the start node, k the end node
    let mut jumps: Vec<(isize, isize)> = Vec::new();
    for &s in &part.starts {
        jumps.push((-1, pos[&s] as isize));
    }
    for &e in &part.ends {
        jumps.push((pos[&e] as isize, k as isize));
    }
    for &a in &part.nodes {
        for &b in &part.nodes {
            if g.edge(a, b) {
                jumps.push((pos[&a] as isize, pos[&b] as isize));
            }
        }
    }
    Some(
        ordered
            .into_iter()
            .enumerate()
            .map(|(i, gr)| {
                let i = i as isize;
                let skippable = jumps.iter().any(|&(f, t)| f < i && i < t);
                (project(g, part, gr), skippable)
            })
            .collect(),
    )
}

fn parallel_cut(g: &Graph, part: &Part) -> Option<Vec<Part>> {
    let comps = components(&part.nodes, |a, b| !(g.edge(a, b) && g.edge(b, a)));
    if comps.len() < 2 {
        return None;
    }
    let complete = |c: &Vec<usize>| {
        c.iter().any(|n| part.starts.contains(n)) && c.iter().any(|n| part.ends.contains(n))
    };
    let mut valid: Vec<Vec<usize>> = comps.iter().filter(|c| complete(c)).cloned().collect();
    if valid.len() < 2 {
        return None;
    }
    for c in comps.iter().filter(|c| !complete(c)) {
        valid[0].extend(c);
    }
    valid[0].sort();
    Some(
        valid
            .into_iter()
            .map(|c| Part {
                starts: restrict(&part.starts, &c),
                ends: restrict(&part.ends, &c),
                nodes: c,
            })
            .collect(),
    )
}

fn loop_cut(g: &Graph, part: &Part) -> Option<Vec<Part>> {
    if part.starts.is_empty() || part.ends.is_empty() {
        return None;
    }
    let mut body: BTreeSet<usize> = part.starts.union(&part.ends).copied().collect();
    let rest: Vec<usize> = part
        .nodes
        .iter()
        .copied()
        .filter(|n| !body.contains(n))
        .collect();
    let mut redo = components(&rest, |a, b| g.edge(a, b) || g.edge(b, a));

    loop {
        let mut merged = false;
        let mut keep = Vec::new();
        for comp in std::mem::take(&mut redo) {
            let set: BTreeSet<usize> = comp.iter().copied().collect();
            let entries: Vec<usize> = comp
                .iter()
                .copied()
                .filter(|&v| part.nodes.iter().any(|&u| !set.contains(&u) && g.edge(u, v)))
                .collect();
            let exits: Vec<usize> = comp
                .iter()
                .copied()
                .filter(|&v| part.nodes.iter().any(|&u| !set.contains(&u) && g.edge(v, u)))
                .collect();
            let mut ok = true;
            // entered only from body end activities, left only to body starts
            for &u in &part.nodes {
                if set.contains(&u) {
                    continue;
                }
                for &v in &comp {
                    if g.edge(u, v) && !part.ends.contains(&u) {
                        ok = false;
                    }
                    if g.edge(v, u) && !part.starts.contains(&u) {
                        ok = false;
                    }
                }
            }
            // every body end reaches every redo entry; every redo exit
            // reaches every body start
            ok = ok
                && part
                    .ends
                    .iter()
                    .all(|&e| entries.iter().all(|&v| g.edge(e, v)))
                && exits
                    .iter()
                    .all(|&v| part.starts.iter().all(|&s| g.edge(v, s)))
                && !entries.is_empty()
                && !exits.is_empty();
            if ok {
                keep.push(comp);
            } else {
                body.extend(comp);
                merged = true;
            }
        }
        redo = keep;
        if !merged || redo.is_empty() {
            break;
        }
    }
    if redo.is_empty() {
        return None;
    }
    let body_nodes: Vec<usize> = body.into_iter().collect();
    let mut out = vec![Part {
        starts: part.starts.clone(),
        ends: part.ends.clone(),
        nodes: body_nodes,
    }];
    for comp in redo {
        let set: BTreeSet<usize> = comp.iter().copied().collect();
        let starts = comp
            .iter()
            .copied()
            .filter(|&v| part.nodes.iter().any(|&u| !set.contains(&u) && g.edge(u, v)))
            .collect();
        let ends = comp
            .iter()
            .copied()
            .filter(|&v| part.nodes.iter().any(|&u| !set.contains(&u) && g.edge(v, u)))
            .collect();
        out.push(Part {
            nodes: comp,
            starts,
            ends,
        });
    }
    Some(out)
}
