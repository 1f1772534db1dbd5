//! Abstraction hierarchies: a child → parent mapping over activity names with
//! the root ⊤ as the unique fixed point.
//!
//! Hierarchies are keyed by activity *name*; the lifecycle of an activity does
//! not influence its parent. This lets higher levels of a multi-level
//! hierarchy map the `start`/`complete` events emitted by partitioning.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::log::{Activity, EventLog, ROOT_LABEL};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Violation {
    /// `parent(a) = a` for some `a ≠ ⊤`.
    SelfAbstraction(String),
    /// Activities on a cycle, starting at the smallest name.
    Cycle(Vec<String>),
    /// Activity whose parent chain ends without reaching ⊤.
    Unrooted(String),
    /// ⊤ mapped to something other than itself.
    RootHasParent(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::SelfAbstraction(a) => write!(f, "{a} is abstracted to itself"),
            Violation::Cycle(c) => write!(f, "cycle {}", c.join("↔")),
            Violation::Unrooted(a) => write!(f, "unrooted {a}: no path to {ROOT_LABEL}"),
            Violation::RootHasParent(p) => write!(f, "{ROOT_LABEL} is mapped to {p}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AbstractionHierarchy {
    parent: BTreeMap<String, String>,
}

impl AbstractionHierarchy {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a hierarchy from `(child, parent)` name pairs without validating.
    pub fn from_pairs<I, A, B>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        AbstractionHierarchy {
            parent: pairs
                .into_iter()
                .map(|(a, b)| (a.into(), b.into()))
                .collect(),
        }
    }

    pub fn insert(&mut self, child: impl Into<String>, parent: impl Into<String>) {
        self.parent.insert(child.into(), parent.into());
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.parent.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    pub fn parent_name(&self, name: &str) -> Option<&str> {
        if name == ROOT_LABEL {
            return Some(ROOT_LABEL);
        }
        self.parent.get(name).map(String::as_str)
    }

    /// The one-step abstraction of `a`: its parent if mapped, ⊤ for ⊤, and
    /// `None` otherwise.
    pub fn abstract_activity(&self, a: &Activity) -> Option<Activity> {
        self.parent_name(a.name()).map(Activity::new)
    }

    /// Sub-process target of `a` during partitioning: the parent, unless the
    /// activity is unmapped or sits directly under ⊤.
    pub fn subprocess_of(&self, a: &Activity) -> Option<&str> {
        self.parent
            .get(a.name())
            .map(String::as_str)
            .filter(|p| *p != ROOT_LABEL)
    }

    /// High-level activities: every parent other than ⊤.
    pub fn subprocesses(&self) -> BTreeSet<&str> {
        self.parent
            .values()
            .map(String::as_str)
            .filter(|p| *p != ROOT_LABEL)
            .collect()
    }

    /// Checks no self-abstraction, acyclicity and rootedness for every mapped
    /// activity and every member of `universe`.
    pub fn validate(&self, universe: &BTreeSet<Activity>) -> Vec<Violation> {
        let mut out = BTreeSet::new();
        if let Some(p) = self.parent.get(ROOT_LABEL) {
            if p != ROOT_LABEL {
                out.insert(Violation::RootHasParent(p.clone()));
            }
        }
        let starts: BTreeSet<&str> = self
            .parent
            .keys()
            .map(String::as_str)
            .chain(universe.iter().map(Activity::name))
            .filter(|n| *n != ROOT_LABEL && self.parent.contains_key(*n))
            .collect();
        for start in starts {
            let mut path: Vec<&str> = vec![start];
            let mut cur = start;
            loop {
                let Some(next) = self.parent.get(cur).map(String::as_str) else {
                    out.insert(Violation::Unrooted(cur.to_string()));
                    break;
                };
                if next == ROOT_LABEL {
                    break;
                }
                if next == cur {
                    out.insert(Violation::SelfAbstraction(cur.to_string()));
                    break;
                }
                if let Some(pos) = path.iter().position(|p| *p == next) {
                    let cycle = &path[pos..];
                    let min = (0..cycle.len()).min_by_key(|&i| cycle[i]).unwrap_or(0);
                    let rotated = cycle[min..]
                        .iter()
                        .chain(&cycle[..min])
                        .map(|s| s.to_string())
                        .collect();
                    out.insert(Violation::Cycle(rotated));
                    break;
                }
                path.push(next);
                cur = next;
            }
        }
        out.into_iter().collect()
    }

    pub fn validated(self, universe: &BTreeSet<Activity>) -> Result<Self> {
        let v = self.validate(universe);
        if v.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidHierarchy(v))
        }
    }

    /// Number of parent steps from `name` to ⊤, if it is rooted.
    pub fn depth(&self, name: &str) -> Option<usize> {
        let mut cur = name;
        let mut steps = 0;
        while cur != ROOT_LABEL {
            cur = self.parent.get(cur)?;
            steps += 1;
            if steps > self.parent.len() + 1 {
                return None;
            }
        }
        Some(steps)
    }
}

fn fresh_group_name(i: usize, taken: &BTreeSet<&str>) -> String {
    let mut name = format!("G_{i}");
    while taken.contains(name.as_str()) {
        name.push('\'');
    }
    name
}

fn groups_to_hierarchy(groups: Vec<Vec<String>>) -> AbstractionHierarchy {
    let taken: BTreeSet<String> = groups.iter().flatten().cloned().collect();
    let taken_ref: BTreeSet<&str> = taken.iter().map(String::as_str).collect();
    let mut h = AbstractionHierarchy::new();
    for (i, group) in groups.into_iter().enumerate() {
        let name = fresh_group_name(i + 1, &taken_ref);
        for a in group {
            h.insert(a, name.clone());
        }
        h.insert(name, ROOT_LABEL);
    }
    h
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "cluster count {k} outside 1..={n}"
        )));
    }
    Ok(())
}

fn distinct_names(universe: &BTreeSet<Activity>) -> Vec<String> {
    let names: BTreeSet<&str> = universe.iter().map(Activity::name).collect();
    names.into_iter().map(str::to_string).collect()
}

/// Random two-level hierarchy with `k` non-empty groups `G_1..G_k`.
///
/// The sorted universe is shuffled; the first `k` activities seed one group
/// each and the rest join a uniformly drawn group.
pub fn derive_random(
    universe: &BTreeSet<Activity>,
    k: usize,
    seed_value: u64,
) -> Result<AbstractionHierarchy> {
    let mut names = distinct_names(universe);
    check_k(k, names.len())?;
    let mut rng = seed::stream(seed_value, &["derive_random"]);
    names.shuffle(&mut rng);
    let mut groups: Vec<Vec<String>> = vec![Vec::new(); k];
    for (i, name) in names.into_iter().enumerate() {
        let g = if i < k { i } else { rng.random_range(0..k) };
        groups[g].push(name);
    }
    for g in &mut groups {
        g.sort();
    }
    groups.sort();
    Ok(groups_to_hierarchy(groups))
}

/// Symmetric window proximity: for every pair of positions at distance
/// `1..=window` inside a trace, the two (distinct) activities gain the trace
/// multiplicity.
pub fn proximity(log: &EventLog, window: usize) -> BTreeMap<(String, String), u64> {
    let mut prox = BTreeMap::new();
    for (trace, m) in log.iter() {
        let ev = trace.events();
        for i in 0..ev.len() {
            for j in (i + 1)..ev.len().min(i + window + 1) {
                let (a, b) = (ev[i].name(), ev[j].name());
                if a == b {
                    continue;
                }
                let key = if a < b { (a, b) } else { (b, a) };
                *prox
                    .entry((key.0.to_string(), key.1.to_string()))
                    .or_insert(0) += m;
            }
        }
    }
    prox
}

/// Window-proximity activity clustering with average-linkage agglomeration.
///
/// The highest average similarity is merged first; ties go to the pair of
/// clusters whose smallest member names compare lowest.
pub fn derive_cooccurrence(
    log: &EventLog,
    k: usize,
    window: usize,
) -> Result<AbstractionHierarchy> {
    if window == 0 {
        return Err(Error::InvalidParameter("window must be positive".into()));
    }
    let names = distinct_names(&log.activities());
    check_k(k, names.len())?;
    let prox = proximity(log, window);
    let sim = |a: &str, b: &str| -> u64 {
        let key = if a < b { (a, b) } else { (b, a) };
        prox.get(&(key.0.to_string(), key.1.to_string()))
            .copied()
            .unwrap_or(0)
    };

    // clusters stay sorted by their smallest member
    let mut clusters: Vec<Vec<String>> = names.into_iter().map(|n| vec![n]).collect();
    while clusters.len() > k {
        let mut best: Option<(usize, usize, u64, u64)> = None;
        for i in 0..clusters.len() {
            for j in (i + 1)..clusters.len() {
                let total: u64 = clusters[i]
                    .iter()
                    .flat_map(|a| clusters[j].iter().map(move |b| (a, b)))
                    .map(|(a, b)| sim(a, b))
                    .sum();
                let pairs = (clusters[i].len() * clusters[j].len()) as u64;
                // compare total/pairs exactly by cross-multiplication
                let better = match best {
                    None => true,
                    Some((_, _, bt, bp)) => (total as u128) * (bp as u128) > (bt as u128) * (pairs as u128),
                };
                if better {
                    best = Some((i, j, total, pairs));
                }
            }
        }
        let (i, j, _, _) = best.expect("at least two clusters");
        let merged = clusters.remove(j);
        clusters[i].extend(merged);
        clusters[i].sort();
    }
    Ok(groups_to_hierarchy(clusters))
}

/// Reads `child,parent` lines (UTF-8, `⊤` for the root) and validates the
/// result. Blank lines are skipped.
pub fn parse_mapping<R: Read>(r: R) -> Result<AbstractionHierarchy> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(r);
    let mut h = AbstractionHierarchy::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Mapping {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        if rec.len() != 2 {
            return Err(Error::Mapping {
                line,
                message: format!("expected `child,parent`, got {} fields", rec.len()),
            });
        }
        let (child, parent) = (rec[0].trim(), rec[1].trim());
        if child.is_empty() || parent.is_empty() {
            return Err(Error::Mapping {
                line,
                message: "empty activity name".into(),
            });
        }
        if let Some(prev) = h.parent.get(child) {
            if prev != parent {
                return Err(Error::Mapping {
                    line,
                    message: format!("{child} mapped to both {prev} and {parent}"),
                });
            }
        }
        h.insert(child, parent);
    }
    h.validated(&BTreeSet::new())
}

pub fn write_mapping<W: Write>(h: &AbstractionHierarchy, w: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for (a, b) in h.pairs() {
        wtr.write_record([a, b]).map_err(|e| Error::Mapping {
            line: 0,
            message: e.to_string(),
        })?;
    }
    wtr.flush()?;
    Ok(())
}
