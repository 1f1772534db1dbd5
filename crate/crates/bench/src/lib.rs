//! Benchmark fixtures shared by the criterion benches.

use ppdisc_core::pipeline::{generate_synthetic, SubShape, SynthSpec, Synthetic};

/// A synthetic log with random sub-process shapes. `scale` sets both the
/// number of sub-processes and the activities per sub-process.
pub fn synthetic(scale: usize, traces: u64) -> Synthetic {
    let spec = SynthSpec {
        subprocesses: scale,
        activities_per_subprocess: scale,
        shape: SubShape::Random,
        top_sequence: true,
        traces,
    };
    generate_synthetic(&spec, 1).expect("valid synthetic spec")
}
