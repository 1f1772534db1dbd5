//! Event log partitioning along an abstraction hierarchy.
//!
//! Every event whose activity has a sub-process parent is appended to that
//! sub-process's trace and replaced by the high-level activity. The
//! high-level occurrences are then compressed to the first and the last one,
//! which become the `start` and `complete` events of the sub-process. A
//! sub-process touched exactly once in a trace leaves a single `complete`.
//!
//! All events of one sub-process within a trace form a single sub-trace, even
//! when they are not contiguous. A sub-process that runs twice in a case is
//! therefore merged into one sub-trace.

use std::collections::{BTreeMap, BTreeSet};

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::hierarchy::AbstractionHierarchy;
use crate::log::{Activity, EventLog, Lifecycle, Trace};

/// How one distinct input trace was decomposed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceProvenance {
    pub original: Trace,
    pub abstracted: Trace,
    pub multiplicity: u64,
    /// Sub-process name and extracted sub-trace, by first occurrence.
    pub parts: Vec<(String, Trace)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PartitionResult {
    pub abstracted_log: EventLog,
    pub sub_logs: BTreeMap<String, EventLog>,
    pub provenance: Vec<TraceProvenance>,
}

impl PartitionResult {
    /// Number of events that stayed low-level in the abstracted log.
    pub fn unmapped_event_count(&self) -> u64 {
        let subs: BTreeSet<&str> = self.sub_logs.keys().map(String::as_str).collect();
        self.provenance
            .iter()
            .map(|p| {
                let kept = p
                    .abstracted
                    .iter()
                    .filter(|a| !is_span_event(a, &subs))
                    .count() as u64;
                kept * p.multiplicity
            })
            .sum()
    }

    /// Activities belonging to each part: `None` keys the abstracted log.
    pub fn part_alphabets(&self) -> BTreeMap<Option<String>, BTreeSet<Activity>> {
        let mut out = BTreeMap::new();
        out.insert(None, self.abstracted_log.activities());
        for (k, l) in &self.sub_logs {
            out.insert(Some(k.clone()), l.activities());
        }
        out
    }
}

fn is_span_event(a: &Activity, subs: &BTreeSet<&str>) -> bool {
    a.lifecycle() != Lifecycle::Atomic && subs.contains(a.name())
}

/// Indices kept by compression: for every label selected by `is_high`, the
/// first and the last occurrence; every other index.
fn retained<T, F, K>(items: &[T], key: F) -> Vec<bool>
where
    F: Fn(&T) -> Option<K>,
    K: Ord,
{
    let mut first: BTreeMap<K, usize> = BTreeMap::new();
    let mut last: BTreeMap<K, usize> = BTreeMap::new();
    for (i, it) in items.iter().enumerate() {
        if let Some(k) = key(it) {
            last.insert(k, i);
        }
        if let Some(k) = key(it) {
            first.entry(k).or_insert(i);
        }
    }
    items
        .iter()
        .enumerate()
        .map(|(i, it)| match key(it) {
            Some(k) => first[&k] == i || last[&k] == i,
            None => true,
        })
        .collect()
}

/// Keeps only the first and last occurrence of every activity selected by
/// `is_high`; other events and the relative order are untouched.
pub fn compress<F>(trace: &Trace, is_high: F) -> Trace
where
    F: Fn(&Activity) -> bool,
{
    let ev = trace.events();
    let keep = retained(ev, |a| is_high(a).then(|| a.clone()));
    ev.iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(a, _)| a.clone())
        .collect()
}

enum Slot<'a> {
    Low(&'a Activity),
    High(&'a str),
}

fn partition_trace(trace: &Trace, h: &AbstractionHierarchy) -> (Trace, Vec<(String, Trace)>) {
    let mut parts: IndexMap<&str, Trace> = IndexMap::new();
    let slots: Vec<Slot<'_>> = trace
        .iter()
        .map(|a| match h.subprocess_of(a) {
            Some(alpha) => {
                parts.entry(alpha).or_default().push(a.clone());
                Slot::High(alpha)
            }
            None => Slot::Low(a),
        })
        .collect();
    let keep = retained(&slots, |s| match s {
        Slot::High(alpha) => Some(*alpha),
        Slot::Low(_) => None,
    });
    let mut kept_count: BTreeMap<&str, usize> = BTreeMap::new();
    for (slot, k) in slots.iter().zip(&keep) {
        if let (Slot::High(alpha), true) = (slot, k) {
            *kept_count.entry(alpha).or_insert(0) += 1;
        }
    }
    let mut first_seen: BTreeSet<&str> = BTreeSet::new();
    let mut abstracted = Trace::default();
    for (i, slot) in slots.iter().enumerate() {
        if !keep[i] {
            continue;
        }
        match slot {
            Slot::Low(a) => abstracted.push((*a).clone()),
            Slot::High(alpha) => {
                let single = kept_count[alpha] == 1;
                let lifecycle = if single || !first_seen.insert(alpha) {
                    Lifecycle::Complete
                } else {
                    Lifecycle::Start
                };
                abstracted.push(Activity::with_lifecycle(*alpha, lifecycle));
            }
        }
    }
    let parts = parts
        .into_iter()
        .map(|(k, t)| (k.to_string(), t))
        .collect();
    (abstracted, parts)
}

/// Splits `log` into the abstracted high-level log and one sub-log per
/// sub-process of `h`.
pub fn partition(log: &EventLog, h: &AbstractionHierarchy) -> Result<PartitionResult> {
    let violations = h.validate(&log.activities());
    if !violations.is_empty() {
        return Err(Error::InvalidHierarchy(violations));
    }
    let mut result = PartitionResult::default();
    for (trace, m) in log.iter() {
        let (abstracted, parts) = partition_trace(trace, h);
        result.abstracted_log.add(abstracted.clone(), m);
        for (alpha, sub) in &parts {
            result
                .sub_logs
                .entry(alpha.clone())
                .or_default()
                .add(sub.clone(), m);
        }
        result.provenance.push(TraceProvenance {
            original: trace.clone(),
            abstracted,
            multiplicity: m,
            parts,
        });
    }
    Ok(result)
}

/// Applies [`partition`] level by level, bottom-up, until no activity of the
/// current high-level log has a parent below ⊤.
pub fn partition_levels(log: &EventLog, h: &AbstractionHierarchy) -> Result<Vec<PartitionResult>> {
    let mut levels = Vec::new();
    let mut current = log.clone();
    loop {
        let mapped = current.activities().iter().any(|a| h.subprocess_of(a).is_some());
        if !mapped || levels.len() > h.pairs().count() {
            break;
        }
        let r = partition(&current, h)?;
        current = r.abstracted_log.clone();
        levels.push(r);
    }
    Ok(levels)
}

/// Re-inserts every recorded sub-trace at the position of its sub-process's
/// first high-level event and drops the matching `complete` event.
///
/// This inverts [`partition`] for traces in which every sub-process occurs
/// as one contiguous block. Interleaved sub-processes come back with their
/// events grouped at the first occurrence.
pub fn flatten(result: &PartitionResult) -> Result<EventLog> {
    let mut out = EventLog::new();
    for prov in &result.provenance {
        let mut pending: BTreeMap<&str, &Trace> =
            prov.parts.iter().map(|(k, t)| (k.as_str(), t)).collect();
        let known: BTreeSet<&str> = pending.keys().copied().collect();
        let mut opened: BTreeSet<&str> = BTreeSet::new();
        let mut trace = Trace::default();
        for a in &prov.abstracted {
            if !is_span_event(a, &known) {
                trace.push(a.clone());
                continue;
            }
            let name = a.name();
            match a.lifecycle() {
                Lifecycle::Start => {
                    let sub = pending.remove(name).ok_or_else(|| {
                        Error::Partition(format!("second start of {name} in {}", prov.abstracted))
                    })?;
                    opened.insert(name);
                    trace.extend_from(sub);
                }
                Lifecycle::Complete if opened.remove(name) => {}
                Lifecycle::Complete => {
                    let sub = pending.remove(name).ok_or_else(|| {
                        Error::Partition(format!("unmatched complete of {name} in {}", prov.abstracted))
                    })?;
                    trace.extend_from(sub);
                }
                Lifecycle::Atomic => unreachable!("span events are non-atomic"),
            }
        }
        if let Some((name, _)) = pending.into_iter().next() {
            return Err(Error::Partition(format!(
                "orphaned sub-trace for {name}: no span in {}",
                prov.abstracted
            )));
        }
        if !opened.is_empty() {
            return Err(Error::Partition(format!(
                "span without complete in {}",
                prov.abstracted
            )));
        }
        out.add(trace, prov.multiplicity);
    }
    Ok(out)
}

impl Trace {
    fn extend_from(&mut self, other: &Trace) {
        for a in other {
            self.push(a.clone());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h_ab() -> AbstractionHierarchy {
        AbstractionHierarchy::from_pairs([
            ("a", "A"),
            ("b", "A"),
            ("c", "A"),
            ("d", "B"),
            ("e", "B"),
            ("f", "B"),
            ("A", "⊤"),
            ("B", "⊤"),
        ])
    }

    fn hl(name: &str, lc: Lifecycle) -> Activity {
        Activity::with_lifecycle(name, lc)
    }

    fn single(names: &[&str]) -> EventLog {
        [Trace::from_names(names)].into_iter().collect()
    }

    #[test]
    fn running_example() {
        let r = partition(&single(&["a", "b", "c", "d", "e", "f"]), &h_ab()).unwrap();
        let expected = Trace::new(vec![
            hl("A", Lifecycle::Start),
            hl("A", Lifecycle::Complete),
            hl("B", Lifecycle::Start),
            hl("B", Lifecycle::Complete),
        ]);
        assert_eq!(r.abstracted_log, [expected].into_iter().collect());
        assert_eq!(r.sub_logs["A"], single(&["a", "b", "c"]));
        assert_eq!(r.sub_logs["B"], single(&["d", "e", "f"]));
        assert_eq!(flatten(&r).unwrap(), single(&["a", "b", "c", "d", "e", "f"]));
    }

    #[test]
    fn unmapped_trace_unchanged() {
        let log = single(&["x", "y"]);
        let r = partition(&log, &h_ab()).unwrap();
        assert_eq!(r.abstracted_log, log);
        assert!(r.sub_logs.is_empty());
        assert!(r.provenance[0].parts.is_empty());
    }

    #[test]
    fn interleaved_unmapped_event() {
        let h = AbstractionHierarchy::from_pairs([("a", "A"), ("b", "A"), ("A", "⊤")]);
        let r = partition(&single(&["a", "d", "b"]), &h).unwrap();
        let expected = Trace::new(vec![
            hl("A", Lifecycle::Start),
            Activity::new("d"),
            hl("A", Lifecycle::Complete),
        ]);
        assert_eq!(r.abstracted_log.multiplicity(&expected), 1);
        assert_eq!(r.sub_logs["A"], single(&["a", "b"]));
        // lossy: sub-trace regrouped at the first occurrence
        assert_eq!(flatten(&r).unwrap(), single(&["a", "b", "d"]));
    }

    #[test]
    fn single_occurrence_is_complete_only() {
        let h = AbstractionHierarchy::from_pairs([("a", "A"), ("A", "⊤")]);
        let r = partition(&single(&["x", "a", "y"]), &h).unwrap();
        let expected = Trace::new(vec![
            Activity::new("x"),
            hl("A", Lifecycle::Complete),
            Activity::new("y"),
        ]);
        assert_eq!(r.abstracted_log.multiplicity(&expected), 1);
        assert_eq!(flatten(&r).unwrap(), single(&["x", "a", "y"]));
    }

    #[test]
    fn repeated_execution_merges_into_one_subtrace() {
        let h = AbstractionHierarchy::from_pairs([("a", "A"), ("b", "A"), ("A", "⊤")]);
        let r = partition(&single(&["a", "b", "d", "a", "b"]), &h).unwrap();
        assert_eq!(r.sub_logs["A"], single(&["a", "b", "a", "b"]));
        assert_eq!(r.unmapped_event_count(), 1);
    }

    #[test]
    fn compress_examples() {
        let all = |_: &Activity| true;
        let t = |n: &[&str]| Trace::from_names(n);
        assert_eq!(compress(&t(&["A", "A", "A", "B"]), all), t(&["A", "A", "B"]));
        assert_eq!(compress(&t(&["A"]), all), t(&["A"]));
        assert_eq!(compress(&t(&["A", "B", "A", "B"]), all), t(&["A", "B", "A", "B"]));
        let only_a = |a: &Activity| a.name() == "A";
        assert_eq!(
            compress(&t(&["A", "x", "A", "x", "A"]), only_a),
            t(&["A", "x", "x", "A"])
        );
    }

    #[test]
    fn empty_hierarchy_is_identity() {
        let log: EventLog = [
            (Trace::from_names(&["a", "b"]), 2),
            (Trace::from_names(&["c"]), 1),
        ]
        .into_iter()
        .collect();
        let r = partition(&log, &AbstractionHierarchy::new()).unwrap();
        assert_eq!(r.abstracted_log, log);
        assert_eq!(flatten(&r).unwrap(), log);
    }

    #[test]
    fn invalid_hierarchy_rejected() {
        let h = AbstractionHierarchy::from_pairs([("a", "A"), ("A", "a")]);
        assert!(matches!(
            partition(&single(&["a"]), &h),
            Err(Error::InvalidHierarchy(_))
        ));
    }

    #[test]
    fn orphaned_subtrace_is_an_error() {
        let mut r = partition(&single(&["a", "b", "c"]), &h_ab()).unwrap();
        r.provenance[0].parts.push(("B".into(), Trace::from_names(&["d"])));
        assert!(matches!(flatten(&r), Err(Error::Partition(_))));
    }

    #[test]
    fn multilevel_partitioning() {
        let h = AbstractionHierarchy::from_pairs([
            ("a", "A"),
            ("b", "A"),
            ("c", "C"),
            ("A", "X"),
            ("C", "X"),
            ("X", "⊤"),
        ]);
        let levels = partition_levels(&single(&["a", "b", "c"]), &h).unwrap();
        assert_eq!(levels.len(), 2);
        let top = &levels[1].abstracted_log;
        let expected = Trace::new(vec![hl("X", Lifecycle::Start), hl("X", Lifecycle::Complete)]);
        assert_eq!(top.multiplicity(&expected), 1);
        assert_eq!(levels[1].sub_logs["X"].total_events(), 3);
    }
}
