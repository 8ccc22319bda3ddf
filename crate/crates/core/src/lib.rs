//! Page-cache replacement simulator with forecast-guided eviction.
//!
//! * [`trace`]: Pin trace parsing, page mapping, deltas, vocabulary, synthetic workloads.
//! * [`cache`]: the cache model and the classic policies (Random, FIFO, LRU, CLOCK, ARC, OPT).
//! * [`forecast`]: page-delta forecasters (oracle, n-gram, predictions file) and Accuracy@k.
//! * [`mustache`]: the forecast-guided victim policy.
//! * [`harness`]: replay, metrics, comparisons, horizon sweeps and reports.

pub mod cache;
pub mod forecast;
pub mod harness;
pub mod mustache;
pub mod trace;

pub use cache::{AccessOutcome, CacheConfig, CacheError, CacheState, EvictionContext, VictimPolicy};
pub use forecast::{Forecast, ForecastError, ForecastRequest, Forecaster, PredictionWindow};
pub use harness::{
    emit_report, run_horizon_sweep, run_policy_comparison, run_simulation, ExperimentConfig, ForecasterSpec,
    HarnessError, MustacheConfig, PolicyKind, ReportFormat, RunMetrics, Simulator,
};
pub use mustache::{get_farthest, CandidateSet, MustachePolicy};
pub use trace::{MemoryAccess, Op, PageId, TraceError};
