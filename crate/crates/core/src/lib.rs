//! Privacy-aware process discovery over partitioned event logs.
//!
//! An event log is split along an abstraction hierarchy into a high-level log
//! plus one sub-log per sub-process ([`partition`]). Each part can be
//! anonymized independently under ε-differential privacy ([`anonymize`]),
//! mined ([`discovery`]), and scored against the original data
//! ([`conformance`]). [`pipeline`] wires the stages into the three experiment
//! orders and writes CSV reports.

pub mod anonymize;
pub mod conformance;
pub mod discovery;
pub mod error;
pub mod hierarchy;
pub mod io;
pub mod log;
pub mod partition;
pub mod pipeline;
pub mod seed;

pub use anonymize::{BudgetLedger, Composition, Mechanism, PrivacyParams};
pub use conformance::{MetricSet, UtilityReport};
pub use discovery::{DependencyGraph, MinerConfig, MinerKind, PetriNet, ProcessTree};
pub use error::{Error, Result};
pub use hierarchy::{AbstractionHierarchy, Violation};
pub use log::{Activity, Dfg, EventLog, Lifecycle, Node, Trace, VariantDistribution};
pub use partition::PartitionResult;
