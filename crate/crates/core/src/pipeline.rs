//! Experiment orchestration: the three pipeline orders, the parameter grid,
//! repetitions and CSV reporting.
//!
//! * `anonymize_only`: anonymize the whole log, mine, evaluate.
//! * `partition_first`: partition, anonymize every part on its own, mine and
//!   evaluate each part, average over the levels.
//! * `partition_last`: anonymize the whole log (DF-Laplace output is played
//!   out into a log), partition the result, mine and evaluate each part,
//!   average over the levels.
//!
//! Repetition `r` runs with seed `base_seed + r`; every stage draws from its
//! own stream hashed from that seed and the stage/part labels.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;

use crate::anonymize::{anonymize_log, anonymize_parts, part_label, playout_dfg, Anonymized, Mechanism, PrivacyParams};
use crate::conformance::{self, kfold_split, training_log, MetricSet, DEFAULT_FOLDS};
use crate::discovery::{MinerConfig, MinerKind, Operator, PetriNet, ProcessTree};
use crate::error::{Error, Result};
use crate::hierarchy::{self, AbstractionHierarchy};
use crate::io::{read_log, CsvSchema, LogFormat};
use crate::log::{df_counts, Activity, Dfg, EventLog, Trace, ROOT_LABEL};
use crate::partition::partition;
use crate::seed;

/// Logs with more traces than this get the large-log (ε, p) defaults.
pub const LARGE_LOG_TRACES: u64 = 10_000;

/// Level name of an unpartitioned run.
pub const WHOLE_LOG_LEVEL: &str = "log";

/// Level name of the multi-level average.
pub const AVERAGE_LEVEL: &str = "avg";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Order {
    AnonymizeOnly,
    PartitionFirst,
    PartitionLast,
}

impl Order {
    pub const ALL: [Order; 3] = [Order::AnonymizeOnly, Order::PartitionFirst, Order::PartitionLast];

    pub fn as_str(self) -> &'static str {
        match self {
            Order::AnonymizeOnly => "anonymize_only",
            Order::PartitionFirst => "partition_first",
            Order::PartitionLast => "partition_last",
        }
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Order {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Order::ALL
            .into_iter()
            .find(|o| o.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown order '{s}'")))
    }
}

/// Log that discovered models are scored against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reference {
    #[default]
    Original,
    Anonymized,
}

impl FromStr for Reference {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(Reference::Original),
            "anonymized" => Ok(Reference::Anonymized),
            _ => Err(Error::InvalidParameter(format!("unknown reference '{s}'"))),
        }
    }
}

/// Where the abstraction hierarchy comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Abstraction {
    Mapping(PathBuf),
    Given(AbstractionHierarchy),
    RandomK(usize),
    CooccurK { k: usize, window: usize },
}

impl Abstraction {
    /// Short tag for report rows.
    pub fn tag(&self) -> String {
        match self {
            Abstraction::Mapping(p) => format!(
                "mapping:{}",
                p.file_name().map(|s| s.to_string_lossy()).unwrap_or_default()
            ),
            Abstraction::Given(_) => "given".into(),
            Abstraction::RandomK(k) => format!("random:{k}"),
            Abstraction::CooccurK { k, window } => format!("cooccur:{k}:{window}"),
        }
    }

    pub fn resolve(&self, log: &EventLog, seed: u64) -> Result<AbstractionHierarchy> {
        let universe = log.activities();
        match self {
            Abstraction::Mapping(p) => {
                hierarchy::parse_mapping(std::fs::File::open(p)?)?.validated(&universe)
            }
            Abstraction::Given(h) => h.clone().validated(&universe),
            Abstraction::RandomK(k) => hierarchy::derive_random(&universe, *k, seed),
            Abstraction::CooccurK { k, window } => hierarchy::derive_cooccurrence(log, *k, *window),
        }
    }
}

/// Parses `mapping:PATH`, `random:K` or `cooccur:K[:WINDOW]`.
impl FromStr for Abstraction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("bad abstraction '{s}'"));
        let num = |x: &str| x.parse::<usize>().map_err(|_| bad());
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "mapping" => Ok(Abstraction::Mapping(PathBuf::from(rest))),
            "random" => Ok(Abstraction::RandomK(num(rest)?)),
            "cooccur" => match rest.split_once(':') {
                Some((k, w)) => Ok(Abstraction::CooccurK { k: num(k)?, window: num(w)? }),
                None => Ok(Abstraction::CooccurK { k: num(rest)?, window: 1 }),
            },
            _ => Err(bad()),
        }
    }
}

/// One (ε, p) combination of the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacySetting {
    pub epsilon: f64,
    pub prune: f64,
}

/// Default (ε, p) combinations: larger pruning thresholds for large logs.
pub fn default_settings(total_traces: u64) -> Vec<PrivacySetting> {
    let pairs: [(f64, f64); 3] = if total_traces > LARGE_LOG_TRACES {
        [(0.01, 300.0), (0.1, 200.0), (1.0, 100.0)]
    } else {
        [(0.01, 100.0), (0.1, 100.0), (1.0, 50.0)]
    };
    pairs
        .into_iter()
        .map(|(epsilon, prune)| PrivacySetting { epsilon, prune })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: String,
    pub input: Option<PathBuf>,
    pub schema: CsvSchema,
    pub abstraction: Abstraction,
    pub mechanisms: Vec<Mechanism>,
    pub orders: Vec<Order>,
    /// `None` picks [`default_settings`] from the log size.
    pub settings: Option<Vec<PrivacySetting>>,
    pub max_len: usize,
    pub miners: Vec<MinerConfig>,
    pub repetitions: u32,
    pub base_seed: u64,
    pub reference: Reference,
    pub folds: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: "log".into(),
            input: None,
            schema: CsvSchema::default(),
            abstraction: Abstraction::RandomK(3),
            mechanisms: vec![Mechanism::DfLaplace, Mechanism::VariantTree],
            orders: Order::ALL.to_vec(),
            settings: None,
            max_len: 50,
            miners: vec![MinerConfig::inductive(), MinerConfig::heuristic()],
            repetitions: 10,
            base_seed: 0,
            reference: Reference::Original,
            folds: DEFAULT_FOLDS,
        }
    }
}

fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.repetitions == 0 {
            return fail("repetitions must be at least 1");
        }
        if self.mechanisms.is_empty() || self.orders.is_empty() || self.miners.is_empty() {
            return fail("mechanisms, orders and miners must be non-empty");
        }
        if let Some(s) = &self.settings {
            if s.is_empty() {
                return fail("privacy settings must be non-empty");
            }
            for p in s {
                PrivacyParams::new(p.epsilon, p.prune, self.max_len, 0)?;
            }
        }
        if self.max_len == 0 {
            return fail("max_len must be at least 1");
        }
        if self.folds < 2 {
            return fail("folds must be at least 2");
        }
        for m in &self.miners {
            m.validate()?;
        }
        Ok(())
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::InvalidParameter(format!("bad {what} '{value}'"));
        match key {
            "dataset" => self.dataset = value.to_string(),
            "input" => {
                let p = PathBuf::from(value);
                if self.dataset == "log" {
                    if let Some(stem) = p.file_stem() {
                        self.dataset = stem.to_string_lossy().trim_end_matches(".xes").to_string();
                    }
                }
                self.input = Some(p);
            }
            "case_column" => self.schema.case_column = value.to_string(),
            "activity_column" => self.schema.activity_column = value.to_string(),
            "order_column" => self.schema.order_column = value.to_string(),
            "abstraction" => self.abstraction = value.parse()?,
            "mechanisms" | "mechanism" => {
                self.mechanisms = split_list(value).map(str::parse).collect::<Result<_>>()?
            }
            "orders" | "order" => {
                self.orders = split_list(value).map(str::parse).collect::<Result<_>>()?
            }
            "settings" => {
                // eps:p pairs, e.g. 0.01:100,0.1:100
                let mut out = Vec::new();
                for pair in split_list(value) {
                    let (e, p) = pair.split_once(':').ok_or_else(|| bad("setting"))?;
                    out.push(PrivacySetting {
                        epsilon: e.parse().map_err(|_| bad("epsilon"))?,
                        prune: p.parse().map_err(|_| bad("prune"))?,
                    });
                }
                self.settings = Some(out);
            }
            "epsilons" | "epsilon" => {
                // ε values with the small-log pruning defaults
                let prune_for = |e: f64| if e >= 1.0 { 50.0 } else { 100.0 };
                let mut out = Vec::new();
                for e in split_list(value) {
                    let epsilon: f64 = e.parse().map_err(|_| bad("epsilon"))?;
                    out.push(PrivacySetting { epsilon, prune: prune_for(epsilon) });
                }
                self.settings = Some(out);
            }
            "max_len" => self.max_len = value.parse().map_err(|_| bad("max_len"))?,
            "miners" | "miner" => {
                let threshold = self.miners.first().map_or(0.2, |m| m.threshold);
                self.miners = split_list(value)
                    .map(|m| m.parse::<MinerKind>().map(|kind| MinerConfig { kind, threshold }))
                    .collect::<Result<_>>()?;
            }
            "threshold" => {
                let t: f64 = value.parse().map_err(|_| bad("threshold"))?;
                for m in &mut self.miners {
                    m.threshold = t;
                }
            }
            "repetitions" => self.repetitions = value.parse().map_err(|_| bad("repetitions"))?,
            "seed" => self.base_seed = value.parse().map_err(|_| bad("seed"))?,
            "reference" => self.reference = value.parse()?,
            "folds" => self.folds = value.parse().map_err(|_| bad("folds"))?,
            _ => {
                return Err(Error::InvalidParameter(format!("unknown config key '{key}'")));
            }
        }
        Ok(())
    }

    /// Reads `key = value` lines; `#` starts a comment.
    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::InvalidParameter(format!("config line {}: expected key = value", i + 1))
            })?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Ok,
    Degenerate,
    Error,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Degenerate => "degenerate",
            Status::Error => "error",
        }
    }

    fn of(e: &Error) -> Status {
        match e {
            Error::DegenerateDfg | Error::AllVariantsPruned | Error::EmptyLog => Status::Degenerate,
            _ => Status::Error,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub dataset: String,
    pub order: Order,
    pub mechanism: Mechanism,
    pub abstraction: String,
    pub miner: MinerKind,
    pub epsilon: f64,
    pub prune: f64,
    pub seed: u64,
    pub rep: u32,
    pub level: String,
    pub metrics: MetricSet,
    pub status: Status,
    pub note: String,
}

pub const REPORT_HEADER: [&str; 16] = [
    "dataset",
    "order",
    "mechanism",
    "abstraction",
    "miner",
    "epsilon",
    "prune",
    "seed",
    "rep",
    "level",
    "fitness",
    "precision",
    "f1",
    "generalization",
    "status",
    "note",
];

/// Writes rows as CSV with metrics fixed to six decimals.
pub fn write_report<W: Write>(rows: &[ReportRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Csv {
        row: 0,
        message: e.to_string(),
    };
    out.write_record(REPORT_HEADER).map_err(io)?;
    for r in rows {
        let f = |x: f64| format!("{x:.6}");
        out.write_record([
            r.dataset.clone(),
            r.order.to_string(),
            r.mechanism.to_string(),
            r.abstraction.clone(),
            r.miner.to_string(),
            r.epsilon.to_string(),
            r.prune.to_string(),
            r.seed.to_string(),
            r.rep.to_string(),
            r.level.clone(),
            f(r.metrics.fitness),
            f(r.metrics.precision),
            f(r.metrics.f1),
            f(r.metrics.generalization),
            r.status.as_str().to_string(),
            r.note.clone(),
        ])
        .map_err(io)?;
    }
    out.flush()?;
    Ok(())
}

/// What a miner receives for one level, next to the original data of that
/// level.
#[derive(Debug)]
pub struct LevelInput {
    pub level: String,
    /// The level's part of the un-anonymized input.
    pub original: EventLog,
    /// Anonymized DFG handed to the miners.
    pub dfg: Result<Dfg>,
    /// Log-shaped anonymized data: the mechanism's log, or a playout of its
    /// DFG. Only built when asked for.
    pub log: Option<Result<EventLog>>,
}

fn as_refs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

fn clone_err(e: &Error) -> Error {
    match e {
        Error::DegenerateDfg => Error::DegenerateDfg,
        Error::AllVariantsPruned => Error::AllVariantsPruned,
        Error::EmptyLog => Error::EmptyLog,
        other => Error::InvalidParameter(other.to_string()),
    }
}

fn dfg_of(anon: &Result<Anonymized>) -> Result<Dfg> {
    match anon {
        Ok(Anonymized::Dfg(d)) => Ok(d.clone()),
        Ok(Anonymized::Log(l)) => df_counts(l),
        Err(e) => Err(clone_err(e)),
    }
}

fn log_of(anon: &Result<Anonymized>, n: u64, params: &PrivacyParams, labels: &[&str]) -> Result<EventLog> {
    match anon {
        Ok(Anonymized::Log(l)) => Ok(l.clone()),
        Ok(Anonymized::Dfg(d)) => {
            let mut rng = seed::stream(params.seed, labels);
            let l = playout_dfg(d, n, params.max_len, &mut rng)?;
            if l.is_empty() {
                Err(Error::DegenerateDfg)
            } else {
                Ok(l)
            }
        }
        Err(e) => Err(clone_err(e)),
    }
}

/// Runs the anonymization part of one order and returns the per-level
/// discovery inputs. `scope` is prepended to every stream label (folds use
/// it to draw fresh noise). With `want_logs`, log-shaped anonymized data is
/// built for every level as well.
pub fn discovery_inputs(
    log: &EventLog,
    h: &AbstractionHierarchy,
    order: Order,
    mechanism: Mechanism,
    params: &PrivacyParams,
    scope: &[&str],
    want_logs: bool,
) -> Result<Vec<LevelInput>> {
    let labels = |rest: &[&str]| -> Vec<String> {
        scope
            .iter()
            .chain([mechanism.as_str()].iter())
            .chain(rest.iter())
            .map(|s| s.to_string())
            .collect()
    };
    match order {
        Order::AnonymizeOnly => {
            let anon_labels = labels(&["anonymize", WHOLE_LOG_LEVEL]);
            let mut rng = seed::stream(params.seed, &as_refs(&anon_labels));
            let anon = anonymize_log(log, params, mechanism, &mut rng);
            let play = labels(&["playout", WHOLE_LOG_LEVEL]);
            Ok(vec![LevelInput {
                level: WHOLE_LOG_LEVEL.into(),
                original: log.clone(),
                dfg: dfg_of(&anon),
                log: want_logs.then(|| log_of(&anon, log.total_traces(), params, &as_refs(&play))),
            }])
        }
        Order::PartitionFirst => {
            let parts = partition(log, h)?;
            let prefix = labels(&["anonymize"]);
            let anon = anonymize_parts(&parts, params, mechanism, &as_refs(&prefix));
            let mut out = Vec::new();
            for (key, result) in &anon.parts {
                let level = part_label(key.as_deref());
                let original = match key {
                    None => parts.abstracted_log.clone(),
                    Some(k) => parts.sub_logs[k].clone(),
                };
                let play = labels(&["playout", &level]);
                out.push(LevelInput {
                    log: want_logs
                        .then(|| log_of(result, original.total_traces(), params, &as_refs(&play))),
                    level,
                    original,
                    dfg: dfg_of(result),
                });
            }
            Ok(out)
        }
        Order::PartitionLast => {
            let parts = partition(log, h)?;
            let anon_labels = labels(&["anonymize", WHOLE_LOG_LEVEL]);
            let mut rng = seed::stream(params.seed, &as_refs(&anon_labels));
            let anon = anonymize_log(log, params, mechanism, &mut rng);
            let play = labels(&["playout", WHOLE_LOG_LEVEL]);
            let anon_log = log_of(&anon, log.total_traces(), params, &as_refs(&play));
            let anon_parts = match &anon_log {
                Ok(l) => Some(partition(l, h)?),
                Err(_) => None,
            };
            let mut out = Vec::new();
            let keys = std::iter::once(None).chain(parts.sub_logs.keys().cloned().map(Some));
            for key in keys {
                let level = part_label(key.as_deref());
                let original = match &key {
                    None => parts.abstracted_log.clone(),
                    Some(k) => parts.sub_logs[k].clone(),
                };
                let part: Result<EventLog> = match (&anon_log, &anon_parts) {
                    (Err(e), _) => Err(clone_err(e)),
                    (Ok(_), Some(p)) => match &key {
                        None => Ok(p.abstracted_log.clone()),
                        Some(k) => p.sub_logs.get(k).cloned().ok_or(Error::EmptyLog),
                    },
                    (Ok(_), None) => unreachable!(),
                };
                out.push(LevelInput {
                    level,
                    original,
                    dfg: part.as_ref().map_err(clone_err).and_then(df_counts),
                    log: want_logs.then_some(part),
                });
            }
            Ok(out)
        }
    }
}

/// Levels of a held-out fold, named like [`discovery_inputs`] names them.
fn holdout_levels(log: &EventLog, h: &AbstractionHierarchy, order: Order) -> Result<BTreeMap<String, EventLog>> {
    let mut out = BTreeMap::new();
    match order {
        Order::AnonymizeOnly => {
            out.insert(WHOLE_LOG_LEVEL.to_string(), log.clone());
        }
        Order::PartitionFirst | Order::PartitionLast => {
            let p = partition(log, h)?;
            out.insert(part_label(None), p.abstracted_log);
            for (k, l) in p.sub_logs {
                out.insert(part_label(Some(&k)), l);
            }
        }
    }
    Ok(out)
}

struct Job {
    order: Order,
    mechanism: Mechanism,
    setting: PrivacySetting,
    rep: u32,
}

/// Loads the input, resolves the hierarchy and runs the grid.
pub fn run(config: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    config.validate()?;
    let path = config
        .input
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("no input log configured".into()))?;
    let log = read_log(path, &LogFormat::guess(path, config.schema.clone()))?;
    if log.is_empty() {
        return Err(Error::EmptyLog);
    }
    let h = config.abstraction.resolve(&log, config.base_seed)?;
    run_on(&log, &h, config)
}

/// Runs the grid on an in-memory log and hierarchy. Stage failures end up in
/// the rows' status; only invalid configurations are returned as errors.
pub fn run_on(log: &EventLog, h: &AbstractionHierarchy, config: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    config.validate()?;
    if log.is_empty() {
        return Err(Error::EmptyLog);
    }
    let h = h.clone().validated(&log.activities())?;
    let settings = config
        .settings
        .clone()
        .unwrap_or_else(|| default_settings(log.total_traces()));
    let mut jobs = Vec::new();
    for &order in &config.orders {
        for &mechanism in &config.mechanisms {
            for &setting in &settings {
                for rep in 0..config.repetitions {
                    jobs.push(Job { order, mechanism, setting, rep });
                }
            }
        }
    }
    let tag = config.abstraction.tag();
    let rows: Vec<Vec<ReportRow>> = jobs
        .par_iter()
        .map(|job| run_job(log, &h, config, &tag, job))
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

fn run_job(log: &EventLog, h: &AbstractionHierarchy, config: &ExperimentConfig, tag: &str, job: &Job) -> Vec<ReportRow> {
    let seed = config.base_seed.wrapping_add(job.rep as u64);
    let row = |miner: MinerKind, level: &str, metrics: MetricSet, status: Status, note: String| ReportRow {
        dataset: config.dataset.clone(),
        order: job.order,
        mechanism: job.mechanism,
        abstraction: tag.to_string(),
        miner,
        epsilon: job.setting.epsilon,
        prune: job.setting.prune,
        seed,
        rep: job.rep,
        level: level.to_string(),
        metrics,
        status,
        note,
    };
    let params = PrivacyParams {
        epsilon: job.setting.epsilon,
        max_len: config.max_len,
        prune: job.setting.prune,
        seed,
    };
    let result = evaluate_job(log, h, config, job.order, job.mechanism, &params);
    let mut out = Vec::new();
    match result {
        Err(e) => {
            for m in &config.miners {
                out.push(row(m.kind, AVERAGE_LEVEL, MetricSet::default(), Status::of(&e), e.to_string()));
            }
        }
        Ok(per_miner) => {
            for (kind, levels) in per_miner {
                let partitioned = job.order != Order::AnonymizeOnly;
                if partitioned {
                    let metrics: BTreeMap<String, MetricSet> =
                        levels.iter().map(|(l, (m, _, _))| (l.clone(), *m)).collect();
                    let avg = conformance::multilevel_average(&metrics)
                        .map(|r| r.metrics)
                        .unwrap_or_default();
                    let worst = levels.values().map(|(_, s, _)| *s).max().unwrap_or(Status::Ok);
                    let note = levels
                        .iter()
                        .filter(|(_, (_, s, _))| *s != Status::Ok)
                        .map(|(l, (_, s, _))| format!("{l}: {}", s.as_str()))
                        .collect::<Vec<_>>()
                        .join("; ");
                    out.push(row(kind, AVERAGE_LEVEL, avg, worst, note));
                }
                for (level, (m, s, note)) in levels {
                    out.push(row(kind, &level, m, s, note));
                }
            }
        }
    }
    out
}

type LevelMetrics = BTreeMap<String, (MetricSet, Status, String)>;

fn evaluate_job(
    log: &EventLog,
    h: &AbstractionHierarchy,
    config: &ExperimentConfig,
    order: Order,
    mechanism: Mechanism,
    params: &PrivacyParams,
) -> Result<Vec<(MinerKind, LevelMetrics)>> {
    let want_logs = config.reference == Reference::Anonymized;
    let inputs = discovery_inputs(log, h, order, mechanism, params, &[], want_logs)?;

    // held-out fitness per (miner, level) and fold
    let folds = kfold_split(log, config.folds, params.seed)?;
    let mut held: BTreeMap<(usize, String), Vec<f64>> = BTreeMap::new();
    for i in 0..folds.len() {
        let train = training_log(&folds, i);
        let fold_label = format!("fold{i}");
        let train_inputs = discovery_inputs(&train, h, order, mechanism, params, &[&fold_label], false)?;
        let holdout = holdout_levels(&folds[i], h, order)?;
        for (mi, miner) in config.miners.iter().enumerate() {
            for input in &train_inputs {
                let Some(test) = holdout.get(&input.level).filter(|l| !l.is_empty()) else {
                    continue;
                };
                let fitness = match input.dfg.as_ref().map_err(clone_err).and_then(|d| miner.discover_dfg(d)) {
                    Ok(net) => conformance::token_fitness(&net, test)?,
                    Err(_) => 0.0,
                };
                held.entry((mi, input.level.clone())).or_default().push(fitness);
            }
        }
    }

    let mut out = Vec::new();
    for (mi, miner) in config.miners.iter().enumerate() {
        let mut levels = LevelMetrics::new();
        for input in &inputs {
            let generalization = held
                .get(&(mi, input.level.clone()))
                .map_or(0.0, |v| v.iter().sum::<f64>() / v.len() as f64);
            let outcome = score_level(input, miner, config.reference, generalization);
            let entry = match outcome {
                Ok(m) => (m, Status::Ok, String::new()),
                Err(e) => (MetricSet::default(), Status::of(&e), e.to_string()),
            };
            levels.insert(input.level.clone(), entry);
        }
        out.push((miner.kind, levels));
    }
    Ok(out)
}

fn score_level(input: &LevelInput, miner: &MinerConfig, reference: Reference, generalization: f64) -> Result<MetricSet> {
    let dfg = input.dfg.as_ref().map_err(clone_err)?;
    let net: PetriNet = miner.discover_dfg(dfg)?;
    let reference_log = match reference {
        Reference::Original => &input.original,
        Reference::Anonymized => match &input.log {
            Some(Ok(l)) => l,
            Some(Err(e)) => return Err(clone_err(e)),
            None => &input.original,
        },
    };
    conformance::evaluate(&net, reference_log, generalization)
}

/// Shape of one synthetic sub-process.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubShape {
    Sequence,
    Exclusive,
    Parallel,
    /// A random block-structured tree.
    Random,
}

impl FromStr for SubShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sequence" | "seq" => Ok(SubShape::Sequence),
            "exclusive" | "xor" => Ok(SubShape::Exclusive),
            "parallel" | "par" => Ok(SubShape::Parallel),
            "random" => Ok(SubShape::Random),
            _ => Err(Error::InvalidParameter(format!("unknown sub-process shape '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthSpec {
    pub subprocesses: usize,
    pub activities_per_subprocess: usize,
    pub shape: SubShape,
    /// Sub-processes run in sequence (`true`) or one is chosen per trace.
    pub top_sequence: bool,
    pub traces: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            subprocesses: 2,
            activities_per_subprocess: 3,
            shape: SubShape::Sequence,
            top_sequence: true,
            traces: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub log: EventLog,
    pub hierarchy: AbstractionHierarchy,
    pub model: ProcessTree,
}

/// `a`..`z`, then `aa`, `ab`, ...
fn activity_name(mut i: usize) -> String {
    let mut s = Vec::new();
    loop {
        s.push(b'a' + (i % 26) as u8);
        if i < 26 {
            break;
        }
        i = i / 26 - 1;
    }
    s.reverse();
    String::from_utf8(s).unwrap()
}

fn subprocess_name(i: usize) -> String {
    activity_name(i).to_uppercase()
}

fn random_tree<R: rand::Rng + ?Sized>(leaves: &[Activity], rng: &mut R) -> ProcessTree {
    if leaves.len() == 1 {
        return ProcessTree::Leaf(leaves[0].clone());
    }
    let cut = rng.random_range(1..leaves.len());
    let (l, r) = leaves.split_at(cut);
    let children = vec![random_tree(l, rng), random_tree(r, rng)];
    match rng.random_range(0..3) {
        0 => ProcessTree::seq(children),
        1 => ProcessTree::xor(children),
        _ => ProcessTree::par(children),
    }
}

/// Random execution of a tree. Loops repeat with probability ½, at most
/// `loop_cap` extra times.
pub fn play_tree<R: rand::Rng + ?Sized>(tree: &ProcessTree, rng: &mut R, out: &mut Vec<Activity>) {
    const LOOP_CAP: usize = 3;
    match tree {
        ProcessTree::Leaf(a) => out.push(a.clone()),
        ProcessTree::Tau => {}
        ProcessTree::Node(Operator::Sequence, ch) => ch.iter().for_each(|c| play_tree(c, rng, out)),
        ProcessTree::Node(Operator::Exclusive, ch) => {
            let i = rng.random_range(0..ch.len());
            play_tree(&ch[i], rng, out);
        }
        ProcessTree::Node(Operator::Parallel, ch) => {
            let mut runs: Vec<Vec<Activity>> = ch
                .iter()
                .map(|c| {
                    let mut v = Vec::new();
                    play_tree(c, rng, &mut v);
                    v.reverse();
                    v
                })
                .collect();
            // uniform interleaving: pick a branch proportionally to what it
            // has left
            loop {
                let total: usize = runs.iter().map(Vec::len).sum();
                if total == 0 {
                    break;
                }
                let mut k = rng.random_range(0..total);
                for r in runs.iter_mut() {
                    if k < r.len() {
                        out.push(r.pop().unwrap());
                        break;
                    }
                    k -= r.len();
                }
            }
        }
        ProcessTree::Node(Operator::Loop, ch) => {
            play_tree(&ch[0], rng, out);
            let mut n = 0;
            while n < LOOP_CAP && rng.random_bool(0.5) {
                let i = rng.random_range(1..ch.len());
                play_tree(&ch[i], rng, out);
                play_tree(&ch[0], rng, out);
                n += 1;
            }
        }
    }
}

/// Generates a log from `k` sub-processes composed at the top level, with the
/// two-level hierarchy that maps each activity to its sub-process. Every
/// sub-process runs as one contiguous block, at most once per trace.
pub fn generate_synthetic(spec: &SynthSpec, seed_value: u64) -> Result<Synthetic> {
    if spec.traces == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    if spec.subprocesses == 0 || spec.activities_per_subprocess == 0 {
        return Err(Error::InvalidParameter(
            "need at least one sub-process with at least one activity".into(),
        ));
    }
    let mut rng = seed::stream(seed_value, &["synthetic"]);
    let mut h = AbstractionHierarchy::new();
    let mut subtrees = Vec::new();
    let mut next_act = 0;
    for s in 0..spec.subprocesses {
        let name = subprocess_name(s);
        let acts: Vec<Activity> = (0..spec.activities_per_subprocess)
            .map(|_| {
                let a = Activity::new(activity_name(next_act));
                next_act += 1;
                h.insert(a.name(), name.clone());
                a
            })
            .collect();
        h.insert(name, ROOT_LABEL);
        let leaves = || acts.iter().cloned().map(ProcessTree::Leaf).collect::<Vec<_>>();
        let tree = match (spec.shape, acts.len()) {
            (_, 1) => ProcessTree::Leaf(acts[0].clone()),
            (SubShape::Sequence, _) => ProcessTree::seq(leaves()),
            (SubShape::Exclusive, _) => ProcessTree::xor(leaves()),
            (SubShape::Parallel, _) => ProcessTree::par(leaves()),
            (SubShape::Random, _) => random_tree(&acts, &mut rng),
        };
        subtrees.push(tree);
    }
    let model = match (subtrees.len(), spec.top_sequence) {
        (1, _) => subtrees.pop().unwrap(),
        (_, true) => ProcessTree::seq(subtrees),
        (_, false) => ProcessTree::xor(subtrees),
    };
    let mut log = EventLog::new();
    for _ in 0..spec.traces {
        let mut events = Vec::new();
        play_tree(&model, &mut rng, &mut events);
        log.add(Trace::new(events), 1);
    }
    Ok(Synthetic {
        log,
        hierarchy: h,
        model,
    })
}
