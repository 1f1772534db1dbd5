use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ppdisc_core::anonymize::{anonymize_dfg, anonymize_variants, playout_dfg};
use ppdisc_core::conformance::{self, DEFAULT_FOLDS};
use ppdisc_core::discovery::{
    filter_dfg, heuristic_mine_dfg, inductive_mine, parse_pnml, write_pnml,
};
use ppdisc_core::hierarchy::{self, write_mapping};
use ppdisc_core::io::{open, read_log, write_dfg, write_log, parse_dfg, CsvSchema, LogFormat, XesOptions};
use ppdisc_core::log::df_counts;
use ppdisc_core::partition::partition;
use ppdisc_core::pipeline::{self, generate_synthetic, write_report, ExperimentConfig, Status, SubShape, SynthSpec};
use ppdisc_core::{
    seed, AbstractionHierarchy, Dfg, Error, EventLog, Mechanism, MinerConfig, MinerKind, PrivacyParams, Result,
};

#[derive(Parser)]
#[command(name = "ppdisc", version, about = "Partitioned, differentially private process discovery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a log into an abstracted log and one sub-log per sub-process
    Partition(PartitionArgs),
    /// Anonymize a log with DF-Laplace or the trace-variant mechanism
    Anonymize(AnonymizeArgs),
    /// Mine a Petri net from a log or DFG
    Discover(DiscoverArgs),
    /// Score a PNML model against a log
    Evaluate(EvaluateArgs),
    /// Run the full experiment grid and write a CSV report
    Experiment(ExperimentArgs),
    /// Generate a synthetic log with a known two-level hierarchy
    Synth(SynthArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Auto,
    Xes,
    Csv,
}

#[derive(Args)]
struct LogInput {
    /// Event log (.xes, .xes.gz or .csv)
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Auto)]
    format: Format,
    #[arg(long, default_value = "case")]
    csv_case: String,
    #[arg(long, default_value = "activity")]
    csv_activity: String,
    #[arg(long, default_value = "order")]
    csv_order: String,
    /// Column holding start/complete lifecycles (CSV only)
    #[arg(long)]
    csv_lifecycle: Option<String>,
    /// Keep lifecycle:transition values, e.g. when reading an abstracted log
    #[arg(long)]
    lifecycle: bool,
}

impl LogInput {
    fn schema(&self) -> CsvSchema {
        CsvSchema {
            case_column: self.csv_case.clone(),
            activity_column: self.csv_activity.clone(),
            order_column: self.csv_order.clone(),
            lifecycle_column: self.csv_lifecycle.clone(),
            ..CsvSchema::default()
        }
    }

    fn format(&self) -> LogFormat {
        let xes = XesOptions {
            read_lifecycle: self.lifecycle,
        };
        match self.format {
            Format::Xes => LogFormat::Xes(xes),
            Format::Csv => LogFormat::Csv(self.schema()),
            Format::Auto => match LogFormat::guess(&self.input, self.schema()) {
                LogFormat::Xes(_) => LogFormat::Xes(xes),
                csv => csv,
            },
        }
    }

    fn load(&self) -> Result<EventLog> {
        let log = read_log(&self.input, &self.format())?;
        if log.is_empty() {
            return Err(Error::EmptyLog);
        }
        Ok(log)
    }
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct HierarchySource {
    /// Mapping CSV with `child,parent` lines
    #[arg(long)]
    hierarchy: Option<PathBuf>,
    /// Random split into k sub-processes
    #[arg(long)]
    random_k: Option<usize>,
    /// Co-occurrence clustering into k sub-processes
    #[arg(long)]
    cooccur_k: Option<usize>,
}

impl HierarchySource {
    fn resolve(&self, log: &EventLog, window: usize, seed_value: u64) -> Result<AbstractionHierarchy> {
        let universe = log.activities();
        if let Some(path) = &self.hierarchy {
            return hierarchy::parse_mapping(open(path)?)?.validated(&universe);
        }
        if let Some(k) = self.random_k {
            return hierarchy::derive_random(&universe, k, seed_value);
        }
        let k = self.cooccur_k.expect("clap enforces one hierarchy source");
        hierarchy::derive_cooccurrence(log, k, window)
    }

    fn config_value(&self, window: usize) -> String {
        match (&self.hierarchy, self.random_k, self.cooccur_k) {
            (Some(p), _, _) => format!("mapping:{}", p.display()),
            (_, Some(k), _) => format!("random:{k}"),
            (_, _, Some(k)) => format!("cooccur:{k}:{window}"),
            _ => unreachable!(),
        }
    }
}

#[derive(Args)]
struct PartitionArgs {
    #[command(flatten)]
    log: LogInput,
    #[command(flatten)]
    source: HierarchySource,
    /// Proximity window for --cooccur-k
    #[arg(long, default_value_t = 1)]
    window: usize,
    /// Seed for --random-k
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MechanismArg {
    Df,
    Variants,
}

#[derive(Args)]
struct AnonymizeArgs {
    #[command(flatten)]
    log: LogInput,
    #[arg(long, value_enum)]
    mechanism: MechanismArg,
    #[arg(long)]
    epsilon: f64,
    /// Pruning threshold of the variant mechanism
    #[arg(long, default_value_t = 1.0)]
    prune: f64,
    #[arg(long, default_value_t = 50)]
    max_len: usize,
    #[arg(long)]
    seed: u64,
    /// Output file: a DFG edge list for `df`, a log otherwise
    #[arg(long)]
    out: PathBuf,
    /// With `df`, play the noisy DFG out into a log of the input's size
    #[arg(long)]
    playout: bool,
}

#[derive(Args)]
struct DiscoverArgs {
    /// Event log to mine
    #[arg(long, conflicts_with = "dfg", required_unless_present = "dfg")]
    input: Option<PathBuf>,
    /// DFG edge list to mine instead of a log
    #[arg(long)]
    dfg: Option<PathBuf>,
    #[arg(long, default_value_t = false)]
    lifecycle: bool,
    #[arg(long, value_parser = parse_miner, default_value = "inductive")]
    miner: MinerKind,
    #[arg(long, default_value_t = ppdisc_core::discovery::DEFAULT_THRESHOLD)]
    threshold: f64,
    /// PNML output
    #[arg(long)]
    out: PathBuf,
    /// Graphviz rendering of the net
    #[arg(long)]
    dot: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    log: LogInput,
    /// PNML model
    #[arg(long)]
    model: PathBuf,
    /// Also report k-fold generalization of this miner on the log
    #[arg(long, value_parser = parse_miner)]
    generalization_miner: Option<MinerKind>,
    #[arg(long, default_value_t = ppdisc_core::discovery::DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ExperimentArgs {
    /// `key = value` configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` settings, applied after the file
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    csv_case: Option<String>,
    #[arg(long)]
    csv_activity: Option<String>,
    #[arg(long)]
    csv_order: Option<String>,
    #[arg(long, conflicts_with_all = ["random_k", "cooccur_k"])]
    hierarchy: Option<PathBuf>,
    #[arg(long, conflicts_with = "cooccur_k")]
    random_k: Option<usize>,
    #[arg(long)]
    cooccur_k: Option<usize>,
    #[arg(long, default_value_t = 1)]
    window: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repetitions: Option<u32>,
    /// Report destination; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TopArg {
    Sequence,
    Exclusive,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 2)]
    subprocesses: usize,
    #[arg(long, default_value_t = 3)]
    activities: usize,
    /// sequence, exclusive, parallel or random
    #[arg(long, value_parser = parse_shape, default_value = "sequence")]
    shape: SubShape,
    #[arg(long, value_enum, default_value_t = TopArg::Sequence)]
    top: TopArg,
    #[arg(long, default_value_t = 500)]
    traces: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Log output (.xes or .csv)
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth mapping CSV
    #[arg(long)]
    hierarchy_out: Option<PathBuf>,
}

fn parse_miner(s: &str) -> std::result::Result<MinerKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_shape(s: &str) -> std::result::Result<SubShape, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path)
        .map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(file))
}

/// File-system safe form of a sub-process name.
fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn output_format(path: &Path) -> LogFormat {
    LogFormat::guess(path, CsvSchema::default())
}

fn cmd_partition(args: &PartitionArgs) -> Result<ExitCode> {
    let log = args.log.load()?;
    let h = args.source.resolve(&log, args.window, args.seed)?;
    let result = partition(&log, &h)?;
    fs::create_dir_all(&args.out_dir)?;
    let xes = LogFormat::Xes(XesOptions::default());
    write_log(&args.out_dir.join("abstracted.xes"), &result.abstracted_log, &xes)?;
    for (name, sub) in &result.sub_logs {
        write_log(&args.out_dir.join(format!("sub_{}.xes", file_stem(name))), sub, &xes)?;
    }
    let mut w = create(&args.out_dir.join("hierarchy.csv"))?;
    write_mapping(&h, &mut w)?;
    w.flush()?;
    println!(
        "abstracted: {} traces, {} variants; {} sub-logs; {} unmapped events",
        result.abstracted_log.total_traces(),
        result.abstracted_log.variant_count(),
        result.sub_logs.len(),
        result.unmapped_event_count()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_anonymize(args: &AnonymizeArgs) -> Result<ExitCode> {
    let log = args.log.load()?;
    let params = PrivacyParams::new(args.epsilon, args.prune, args.max_len, args.seed)?;
    match args.mechanism {
        MechanismArg::Df => {
            let mut rng = seed::stream(args.seed, &[Mechanism::DfLaplace.as_str()]);
            let noisy = anonymize_dfg(&df_counts(&log)?, &params, &mut rng)?;
            if args.playout {
                let out = playout_dfg(&noisy, log.total_traces(), args.max_len, &mut rng)?;
                write_log(&args.out, &out, &output_format(&args.out))?;
            } else {
                let mut w = create(&args.out)?;
                write_dfg(&noisy, &mut w)?;
                w.flush()?;
            }
            println!("anonymized DFG: {} edges", noisy.edge_count());
        }
        MechanismArg::Variants => {
            let mut rng = seed::stream(args.seed, &[Mechanism::VariantTree.as_str()]);
            let out = anonymize_variants(&log, &params, &mut rng)?;
            write_log(&args.out, &out, &output_format(&args.out))?;
            println!(
                "anonymized log: {} traces, {} variants",
                out.total_traces(),
                out.variant_count()
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_discover(args: &DiscoverArgs) -> Result<ExitCode> {
    let dfg: Dfg = match (&args.input, &args.dfg) {
        (Some(path), _) => {
            let opts = XesOptions {
                read_lifecycle: args.lifecycle,
            };
            let format = match LogFormat::guess(path, CsvSchema::default()) {
                LogFormat::Xes(_) => LogFormat::Xes(opts),
                csv => csv,
            };
            df_counts(&read_log(path, &format)?)?
        }
        (None, Some(path)) => parse_dfg(open(path)?)?,
        (None, None) => unreachable!("clap requires --input or --dfg"),
    };
    let miner = MinerConfig::new(args.miner, args.threshold)?;
    let net = miner.discover_dfg(&dfg)?;
    match args.miner {
        MinerKind::Inductive => println!("{}", inductive_mine(&filter_dfg(&dfg, args.threshold))),
        MinerKind::Heuristic => {
            let dg = heuristic_mine_dfg(&dfg, args.threshold);
            println!("dependency graph: {} activities, {} arcs", dg.nodes.len(), dg.arcs.len());
        }
    }
    let mut w = create(&args.out)?;
    write_pnml(&net, &mut w)?;
    w.flush()?;
    if let Some(dot) = &args.dot {
        fs::write(dot, net.to_dot())?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<ExitCode> {
    let log = args.log.load()?;
    let net = parse_pnml(open(&args.model)?)?;
    let generalization = match args.generalization_miner {
        Some(kind) => {
            let miner = MinerConfig::new(kind, args.threshold)?;
            Some(conformance::generalization(&log, args.folds, args.seed, &miner)?)
        }
        None => None,
    };
    let m = conformance::evaluate(&net, &log, generalization.unwrap_or(f64::NAN))?;
    println!("fitness,{:.6}", m.fitness);
    println!("precision,{:.6}", m.precision);
    println!("f1,{:.6}", m.f1);
    if let Some(g) = generalization {
        println!("generalization,{g:.6}");
    }
    Ok(ExitCode::SUCCESS)
}

fn experiment_config(args: &ExperimentArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_key_values(&io::read_to_string(open(path)?)?)?,
        None => ExperimentConfig::default(),
    };
    let mut flags: Vec<(&str, String)> = Vec::new();
    if let Some(p) = &args.input {
        flags.push(("input", p.display().to_string()));
    }
    for (key, v) in [
        ("case_column", &args.csv_case),
        ("activity_column", &args.csv_activity),
        ("order_column", &args.csv_order),
    ] {
        if let Some(v) = v {
            flags.push((key, v.clone()));
        }
    }
    if args.hierarchy.is_some() || args.random_k.is_some() || args.cooccur_k.is_some() {
        let source = HierarchySource {
            hierarchy: args.hierarchy.clone(),
            random_k: args.random_k,
            cooccur_k: args.cooccur_k,
        };
        flags.push(("abstraction", source.config_value(args.window)));
    }
    if let Some(s) = args.seed {
        flags.push(("seed", s.to_string()));
    }
    if let Some(r) = args.repetitions {
        flags.push(("repetitions", r.to_string()));
    }
    for (k, v) in flags {
        cfg.set(k, &v)?;
    }
    for kv in &args.sets {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::InvalidParameter(format!("expected KEY=VALUE, got '{kv}'")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    Ok(cfg)
}

fn cmd_experiment(args: &ExperimentArgs) -> Result<ExitCode> {
    let cfg = experiment_config(args)?;
    let rows = pipeline::run(&cfg)?;
    match &args.out {
        Some(path) => {
            let mut w = create(path)?;
            write_report(&rows, &mut w)?;
            w.flush()?;
        }
        None => write_report(&rows, io::stdout().lock())?,
    }
    let bad = rows.iter().filter(|r| r.status != Status::Ok).count();
    eprintln!("{} rows, {bad} not ok", rows.len());
    Ok(if bad == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_synth(args: &SynthArgs) -> Result<ExitCode> {
    let spec = SynthSpec {
        subprocesses: args.subprocesses,
        activities_per_subprocess: args.activities,
        shape: args.shape,
        top_sequence: args.top == TopArg::Sequence,
        traces: args.traces,
    };
    let synth = generate_synthetic(&spec, args.seed)?;
    write_log(&args.out, &synth.log, &output_format(&args.out))?;
    if let Some(path) = &args.hierarchy_out {
        let mut w = create(path)?;
        write_mapping(&synth.hierarchy, &mut w)?;
        w.flush()?;
    }
    println!("{}", synth.model);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Partition(a) => cmd_partition(a),
        Command::Anonymize(a) => cmd_anonymize(a),
        Command::Discover(a) => cmd_discover(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
