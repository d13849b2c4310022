//! Experiment orchestration: warm-up protocol, regret accounting, seeded
//! ensembles, parameter sweeps, runtime benchmarks and regret scaling.

mod bench;
pub mod output;
mod policies;
mod run;
mod scaling;
pub mod stats;

pub use bench::{bench_policies, bench_runtime, runtime_exponent, BenchRow};
pub use policies::{NamedPolicy, OraclePolicy, PolicyConfig};
pub use run::{
    run_ensemble, run_horizon, run_once, run_sweep, warmup_arms, EnsembleResult, EnsembleRow, ExperimentConfig,
    PolicySummary, RunResult, SweepRow, SweepVariable, TraceRow,
};
pub use scaling::{regret_scaling, with_empirical_lipschitz, ScalingOutcome};
