//! Brute-force reference implementations used by the acceptance suite. They
//! share no code with the library beyond the data types.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use ppdisc_core::discovery::Operator;
use ppdisc_core::{Activity, EventLog, PetriNet, ProcessTree};

pub type Word = Vec<String>;

/// Words of length ≤ `max_len` in the language of `tree`, or `None` once any
/// intermediate set exceeds `cap`.
pub fn language(tree: &ProcessTree, max_len: usize, cap: usize) -> Option<BTreeSet<Word>> {
    let out: BTreeSet<Word> = match tree {
        ProcessTree::Leaf(a) => {
            if max_len == 0 {
                BTreeSet::new()
            } else {
                BTreeSet::from([vec![a.to_string()]])
            }
        }
        ProcessTree::Tau => BTreeSet::from([Vec::new()]),
        ProcessTree::Node(op, children) => {
            let langs = children
                .iter()
                .map(|c| language(c, max_len, cap))
                .collect::<Option<Vec<_>>>()?;
            match op {
                Operator::Sequence => {
                    let mut acc = BTreeSet::from([Vec::new()]);
                    for l in &langs {
                        acc = concat(&acc, l, max_len, cap)?;
                    }
                    acc
                }
                Operator::Exclusive => langs.into_iter().flatten().collect(),
                Operator::Parallel => {
                    let mut acc = BTreeSet::from([Vec::new()]);
                    for l in &langs {
                        acc = shuffle(&acc, l, max_len, cap)?;
                    }
                    acc
                }
                Operator::Loop => {
                    let body = &langs[0];
                    let redo: BTreeSet<Word> = langs[1..].iter().flatten().cloned().collect();
                    let redo_body = concat(&redo, body, max_len, cap)?;
                    let mut all = body.clone();
                    let mut frontier = body.clone();
                    while !frontier.is_empty() {
                        let next = concat(&frontier, &redo_body, max_len, cap)?;
                        frontier = next.difference(&all).cloned().collect();
                        all.extend(frontier.iter().cloned());
                        if all.len() > cap {
                            return None;
                        }
                    }
                    all
                }
            }
        }
    };
    (out.len() <= cap).then_some(out)
}

fn concat(a: &BTreeSet<Word>, b: &BTreeSet<Word>, max_len: usize, cap: usize) -> Option<BTreeSet<Word>> {
    let mut out = BTreeSet::new();
    for u in a {
        for v in b {
            if u.len() + v.len() <= max_len {
                out.insert(u.iter().chain(v).cloned().collect());
                if out.len() > cap {
                    return None;
                }
            }
        }
    }
    Some(out)
}

fn interleavings(u: &[String], v: &[String], prefix: &mut Word, out: &mut BTreeSet<Word>) {
    if u.is_empty() || v.is_empty() {
        let mut w = prefix.clone();
        w.extend(u.iter().chain(v).cloned());
        out.insert(w);
        return;
    }
    prefix.push(u[0].clone());
    interleavings(&u[1..], v, prefix, out);
    prefix.pop();
    prefix.push(v[0].clone());
    interleavings(u, &v[1..], prefix, out);
    prefix.pop();
}

fn shuffle(a: &BTreeSet<Word>, b: &BTreeSet<Word>, max_len: usize, cap: usize) -> Option<BTreeSet<Word>> {
    let mut out = BTreeSet::new();
    for u in a {
        for v in b {
            if u.len() + v.len() <= max_len {
                interleavings(u, v, &mut Vec::new(), &mut out);
                if out.len() > cap {
                    return None;
                }
            }
        }
    }
    Some(out)
}

/// Token replay by explicit search. Silent moves are chosen as the shortest
/// firing sequence, lexicographically smallest by transition index, that
/// reaches a goal marking: distances come from a plain breadth-first pass,
/// the sequence from a depth-first walk along distance-increasing moves.
pub struct ReplayOracle<'a> {
    net: &'a PetriNet,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tokens {
    pub produced: u64,
    pub consumed: u64,
    pub missing: u64,
    pub remaining: u64,
}

type M = Vec<i64>;

impl<'a> ReplayOracle<'a> {
    pub fn new(net: &'a PetriNet) -> Self {
        ReplayOracle { net }
    }

    fn enabled(&self, m: &M, t: usize) -> bool {
        self.net.transitions[t].inputs.iter().all(|&p| m[p] >= 1)
    }

    fn fired(&self, m: &M, t: usize) -> M {
        let mut n = m.clone();
        for &p in &self.net.transitions[t].inputs {
            n[p] -= 1;
        }
        for &p in &self.net.transitions[t].outputs {
            n[p] += 1;
        }
        n
    }

    fn silent(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.net.transitions.len()).filter(|&t| self.net.transitions[t].label.is_none())
    }

    fn distances(&self, m: &M) -> HashMap<M, usize> {
        let mut dist = HashMap::from([(m.clone(), 0usize)]);
        let mut queue = VecDeque::from([m.clone()]);
        while let Some(x) = queue.pop_front() {
            let d = dist[&x];
            for t in self.silent() {
                if self.enabled(&x, t) {
                    let y = self.fired(&x, t);
                    dist.entry(y.clone()).or_insert_with(|| {
                        queue.push_back(y);
                        d + 1
                    });
                }
            }
        }
        dist
    }

    fn silent_path(&self, m: &M, goal: &dyn Fn(&M) -> bool) -> Option<Vec<usize>> {
        let dist = self.distances(m);
        let target = dist.iter().filter(|(x, _)| goal(x)).map(|(_, d)| *d).min()?;
        fn walk(
            o: &ReplayOracle<'_>,
            x: &M,
            depth: usize,
            target: usize,
            dist: &HashMap<M, usize>,
            goal: &dyn Fn(&M) -> bool,
            path: &mut Vec<usize>,
        ) -> bool {
            if depth == target {
                return goal(x);
            }
            for t in o.silent() {
                if o.enabled(x, t) {
                    let y = o.fired(x, t);
                    if dist[&y] == depth + 1 {
                        path.push(t);
                        if walk(o, &y, depth + 1, target, dist, goal, path) {
                            return true;
                        }
                        path.pop();
                    }
                }
            }
            false
        }
        let mut path = Vec::new();
        walk(self, m, 0, target, &dist, goal, &mut path).then_some(path)
    }

    fn fire_counting(&self, m: &mut M, c: &mut Tokens, t: usize) {
        c.consumed += self.net.transitions[t].inputs.len() as u64;
        c.produced += self.net.transitions[t].outputs.len() as u64;
        *m = self.fired(m, t);
    }

    pub fn initial(&self) -> (M, Tokens) {
        let mut m = vec![0; self.net.places.len()];
        m[self.net.source] = 1;
        (m, Tokens { produced: 1, ..Tokens::default() })
    }

    pub fn step(&self, m: &mut M, c: &mut Tokens, a: &Activity) {
        let ts: Vec<usize> = (0..self.net.transitions.len())
            .filter(|&t| self.net.transitions[t].label.as_ref() == Some(a))
            .collect();
        if ts.is_empty() {
            c.missing += 1;
            c.consumed += 1;
            c.produced += 1;
            c.remaining += 1;
            return;
        }
        let enabled_any = |x: &M| ts.iter().any(|&t| self.enabled(x, t));
        if !enabled_any(m) {
            if let Some(path) = self.silent_path(m, &enabled_any) {
                for t in path {
                    self.fire_counting(m, c, t);
                }
            }
        }
        let chosen = ts.iter().copied().find(|&t| self.enabled(m, t)).unwrap_or_else(|| {
            let lacking = |t: usize| {
                self.net.transitions[t].inputs.iter().filter(|&&p| m[p] < 1).count()
            };
            let mut best = ts[0];
            for &t in &ts[1..] {
                if lacking(t) < lacking(best) {
                    best = t;
                }
            }
            best
        });
        for &p in &self.net.transitions[chosen].inputs {
            if m[p] < 1 {
                m[p] = 1;
                c.missing += 1;
            }
        }
        self.fire_counting(m, c, chosen);
    }

    pub fn finish(&self, m: &mut M, c: &mut Tokens) {
        let sink = self.net.sink;
        let exact = |x: &M| x.iter().enumerate().all(|(p, &k)| k == i64::from(p == sink));
        let path = self
            .silent_path(m, &exact)
            .or_else(|| self.silent_path(m, &|x: &M| x[sink] >= 1));
        for t in path.unwrap_or_default() {
            self.fire_counting(m, c, t);
        }
        if m[sink] >= 1 {
            m[sink] -= 1;
        } else {
            c.missing += 1;
        }
        c.consumed += 1;
        c.remaining += m.iter().sum::<i64>() as u64;
    }

    pub fn replay(&self, trace: &[Activity]) -> Tokens {
        let (mut m, mut c) = self.initial();
        for a in trace {
            self.step(&mut m, &mut c, a);
        }
        self.finish(&mut m, &mut c);
        c
    }

    /// Visible labels enabled somewhere in the silent closure of `m`.
    fn reachable_labels(&self, m: &M) -> BTreeSet<Activity> {
        let mut out = BTreeSet::new();
        for x in self.distances(m).keys() {
            for (t, tr) in self.net.transitions.iter().enumerate() {
                if let (Some(a), true) = (&tr.label, self.enabled(x, t)) {
                    out.insert(a.clone());
                }
            }
        }
        out
    }
}

fn ratio_part(num: u64, den: u64) -> f64 {
    if den == 0 {
        1.0
    } else {
        1.0 - num as f64 / den as f64
    }
}

pub fn fitness(net: &PetriNet, log: &EventLog) -> f64 {
    let o = ReplayOracle::new(net);
    let mut total = Tokens::default();
    for (trace, k) in log.iter() {
        let c = o.replay(trace.events());
        total.produced += c.produced * k;
        total.consumed += c.consumed * k;
        total.missing += c.missing * k;
        total.remaining += c.remaining * k;
    }
    0.5 * ratio_part(total.missing, total.consumed) + 0.5 * ratio_part(total.remaining, total.produced)
}

/// Escaping-edges precision by enumerating every prefix of every trace.
pub fn precision(net: &PetriNet, log: &EventLog) -> f64 {
    let mut weight: BTreeMap<Vec<Activity>, u64> = BTreeMap::new();
    let mut follows: BTreeMap<Vec<Activity>, BTreeSet<Activity>> = BTreeMap::new();
    for (trace, k) in log.iter() {
        let ev = trace.events();
        for i in 0..ev.len() {
            let prefix = ev[..i].to_vec();
            *weight.entry(prefix.clone()).or_default() += k;
            follows.entry(prefix).or_default().insert(ev[i].clone());
        }
    }
    let o = ReplayOracle::new(net);
    let (mut escaping, mut allowed) = (0u128, 0u128);
    'prefixes: for (prefix, w) in &weight {
        let (mut m, mut c) = o.initial();
        for a in prefix {
            let before = c.missing;
            o.step(&mut m, &mut c, a);
            if c.missing > before {
                continue 'prefixes;
            }
        }
        let labels = o.reachable_labels(&m);
        let seen = &follows[prefix];
        escaping += u128::from(*w) * labels.iter().filter(|a| !seen.contains(*a)).count() as u128;
        allowed += u128::from(*w) * labels.len() as u128;
    }
    if allowed == 0 {
        1.0
    } else {
        1.0 - escaping as f64 / allowed as f64
    }
}
