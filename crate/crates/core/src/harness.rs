//! Trace replay, metrics, comparisons, horizon sweeps and reports.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::cache::{
    AccessOutcome, ArcPolicy, CacheConfig, CacheError, CacheState, ClockPolicy, EvictionContext, FifoPolicy,
    LruPolicy, OptPolicy, RandomPolicy, VictimPolicy,
};
use crate::forecast::{FileForecaster, ForecastError, Forecaster, NgramForecaster, OracleForecaster};
use crate::mustache::{BranchCounts, Fallback, MustachePolicy};
use crate::trace::{DeltaMode, DeltaVocabulary, MemoryAccess};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Forecast(#[from] ForecastError),
}

fn config_err<T>(msg: impl Into<String>) -> Result<T, HarnessError> {
    Err(HarnessError::Config(msg.into()))
}

/// Counters of one run. Warm-up requests are included.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunMetrics {
    pub policy: String,
    /// Prediction horizon, for forecast-driven policies.
    pub k: Option<usize>,
    pub total: u64,
    pub hits: u64,
    pub misses: u64,
    /// One disk read per miss.
    pub disk_reads: u64,
    /// One disk write per dirty eviction.
    pub disk_writes: u64,
    pub evictions: u64,
    pub branches: Option<BranchCounts>,
}

impl RunMetrics {
    pub fn record(&mut self, outcome: &AccessOutcome) {
        self.total += 1;
        match outcome {
            AccessOutcome::Hit => self.hits += 1,
            AccessOutcome::ColdMiss => {
                self.misses += 1;
                self.disk_reads += 1;
            }
            AccessOutcome::EvictMiss { victim_was_dirty, .. } => {
                self.misses += 1;
                self.disk_reads += 1;
                self.evictions += 1;
                if *victim_was_dirty {
                    self.disk_writes += 1;
                }
            }
        }
    }

    pub fn hit_ratio(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.hits as f64 / self.total as f64
        }
    }

    /// `hits / total` with four decimals, rounded half to even.
    pub fn hit_ratio_4dp(&self) -> String {
        ratio_4dp(self.hits, self.total)
    }

    /// Checks the counter identities, returning the first one that fails.
    pub fn check_identities(&self) -> Result<(), String> {
        if self.hits + self.misses != self.total {
            return Err(format!("hits {} + misses {} != total {}", self.hits, self.misses, self.total));
        }
        if self.disk_reads != self.misses {
            return Err(format!("reads {} != misses {}", self.disk_reads, self.misses));
        }
        if !(self.disk_writes <= self.evictions && self.evictions <= self.misses) {
            return Err(format!(
                "expected writes {} <= evictions {} <= misses {}",
                self.disk_writes, self.evictions, self.misses
            ));
        }
        Ok(())
    }
}

/// Exact decimal rendering of `num / den` to four places, ties to even.
pub fn ratio_4dp(num: u64, den: u64) -> String {
    if den == 0 {
        return "0.0000".into();
    }
    let scaled = u128::from(num) * 10_000;
    let den = u128::from(den);
    let mut q = scaled / den;
    let twice_rem = 2 * (scaled % den);
    if twice_rem > den || (twice_rem == den && q % 2 == 1) {
        q += 1;
    }
    format!("{}.{:04}", q / 10_000, q % 10_000)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    Random,
    Fifo,
    Lru,
    Clock,
    Arc,
    Opt,
    Mustache,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 7] = [
        PolicyKind::Random,
        PolicyKind::Fifo,
        PolicyKind::Lru,
        PolicyKind::Clock,
        PolicyKind::Arc,
        PolicyKind::Opt,
        PolicyKind::Mustache,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Random => "random",
            PolicyKind::Fifo => "fifo",
            PolicyKind::Lru => "lru",
            PolicyKind::Clock => "clock",
            PolicyKind::Arc => "arc",
            PolicyKind::Opt => "opt",
            PolicyKind::Mustache => "mustache",
        }
    }
}

impl FromStr for PolicyKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| HarnessError::Config(format!("unknown policy {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FallbackKind {
    #[default]
    Lru,
    Fifo,
    Random,
}

impl FromStr for FallbackKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lru" => Ok(FallbackKind::Lru),
            "fifo" => Ok(FallbackKind::Fifo),
            "random" => Ok(FallbackKind::Random),
            _ => config_err(format!("unsupported fallback {s:?} (expected lru, fifo or random)")),
        }
    }
}

/// Where forecasts come from.
#[derive(Clone, Debug)]
pub enum ForecasterSpec {
    /// True future of the replayed trace, each delta replaced with
    /// probability `rho` by a uniform token of `vocabulary`.
    Oracle { rho: f64, vocabulary: DeltaVocabulary },
    /// A trained count model (cloned into every run).
    Ngram(NgramForecaster),
    /// A predictions file, optionally pinned to a vocabulary hash.
    File { path: PathBuf, vocab_hash: Option<u64> },
}

impl ForecasterSpec {
    pub fn perfect_oracle() -> Self {
        ForecasterSpec::Oracle {
            rho: 0.0,
            vocabulary: DeltaVocabulary::default(),
        }
    }

    fn is_stochastic(&self) -> bool {
        matches!(self, ForecasterSpec::Oracle { rho, .. } if *rho > 0.0)
    }
}

#[derive(Clone, Debug)]
pub struct MustacheConfig {
    pub forecaster: ForecasterSpec,
    pub k: usize,
    pub w: usize,
    pub fallback: FallbackKind,
    pub mode: DeltaMode,
}

impl MustacheConfig {
    pub fn new(forecaster: ForecasterSpec, k: usize) -> Self {
        Self {
            forecaster,
            k,
            w: 100,
            fallback: FallbackKind::Lru,
            mode: DeltaMode::Consecutive,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub policy: PolicyKind,
    pub cache: CacheConfig,
    /// Required for (and only used by) forecast-driven runs.
    pub mustache: Option<MustacheConfig>,
    /// Required whenever a component draws random numbers.
    pub seed: Option<u64>,
}

impl ExperimentConfig {
    pub fn new(policy: PolicyKind, cache: CacheConfig) -> Self {
        Self {
            policy,
            cache,
            mustache: None,
            seed: None,
        }
    }

    pub fn mustache(cache: CacheConfig, mustache: MustacheConfig) -> Self {
        Self {
            policy: PolicyKind::Mustache,
            cache,
            mustache: Some(mustache),
            seed: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn label(&self) -> String {
        self.policy.name().to_string()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.cache.validate()?;
        let stochastic = match (self.policy, &self.mustache) {
            (PolicyKind::Random, _) => true,
            (PolicyKind::Mustache, None) => return config_err("mustache needs a forecaster configuration"),
            (PolicyKind::Mustache, Some(m)) => {
                if m.k == 0 {
                    return config_err("prediction horizon k must be at least 1");
                }
                if let ForecasterSpec::Oracle { rho, vocabulary } = &m.forecaster {
                    if !(0.0..=1.0).contains(rho) {
                        return config_err(format!("rho {rho} is outside [0, 1]"));
                    }
                    if *rho > 0.0 && vocabulary.is_empty() {
                        return config_err("a noisy oracle needs a non-empty vocabulary");
                    }
                }
                m.fallback == FallbackKind::Random || m.forecaster.is_stochastic()
            }
            _ => false,
        };
        if stochastic && self.seed.is_none() {
            return config_err(format!("{} run draws random numbers and needs a seed", self.label()));
        }
        Ok(())
    }

    fn build_policy(&self, trace: &[MemoryAccess]) -> Result<Box<dyn VictimPolicy>, HarnessError> {
        let seed = self.seed.unwrap_or(0);
        let k = self.cache.num_frames;
        Ok(match self.policy {
            PolicyKind::Random => Box::new(RandomPolicy::new(seed)),
            PolicyKind::Fifo => Box::new(FifoPolicy::new()),
            PolicyKind::Lru => Box::new(LruPolicy::new()),
            PolicyKind::Clock => Box::new(ClockPolicy::new(k)),
            PolicyKind::Arc => Box::new(ArcPolicy::new(k)),
            PolicyKind::Opt => Box::new(OptPolicy::new(trace)),
            PolicyKind::Mustache => {
                let m = self.mustache.as_ref().expect("validated");
                let forecaster: Box<dyn Forecaster> = match &m.forecaster {
                    ForecasterSpec::Oracle { rho, vocabulary } => {
                        Box::new(OracleForecaster::noisy(trace, *rho, vocabulary, seed)?.with_mode(m.mode))
                    }
                    ForecasterSpec::Ngram(model) => Box::new(model.clone()),
                    ForecasterSpec::File { path, vocab_hash } => Box::new(FileForecaster::load(path, m.k, *vocab_hash)?),
                };
                let fallback = match m.fallback {
                    FallbackKind::Lru => Fallback::Lru(LruPolicy::new()),
                    FallbackKind::Fifo => Fallback::Fifo(FifoPolicy::new()),
                    // a stream distinct from the oracle's per-query streams
                    FallbackKind::Random => Fallback::Random(RandomPolicy::new(seed ^ 0x9e37_79b9_7f4a_7c15)),
                };
                let universe = self.cache.page_universe();
                Box::new(MustachePolicy::new(forecaster, fallback, m.k, universe)?.with_mode(m.mode))
            }
        })
    }
}

/// Replays a trace one request at a time.
pub struct Simulator<'a> {
    trace: &'a [MemoryAccess],
    state: CacheState,
    policy: Box<dyn VictimPolicy>,
    w: usize,
    position: usize,
    metrics: RunMetrics,
}

impl<'a> Simulator<'a> {
    /// Validates the configuration and the trace before anything is replayed.
    pub fn new(config: &ExperimentConfig, trace: &'a [MemoryAccess]) -> Result<Self, HarnessError> {
        config.validate()?;
        let universe = config.cache.page_universe();
        if let Some((i, a)) = trace.iter().enumerate().find(|(_, a)| a.page.0 >= universe) {
            return config_err(format!(
                "request {i} touches page {} outside the {universe}-page address space",
                a.page
            ));
        }
        let policy = config.build_policy(trace)?;
        let w = config.mustache.as_ref().map_or(1, |m| m.w.max(1));
        Ok(Self {
            trace,
            state: CacheState::new(config.cache.num_frames),
            policy,
            w,
            position: 0,
            metrics: RunMetrics {
                policy: config.label(),
                k: config.mustache.as_ref().map(|m| m.k),
                ..RunMetrics::default()
            },
        })
    }

    /// Serves the next request; `None` once the trace is exhausted.
    pub fn step(&mut self) -> Option<Result<AccessOutcome, HarnessError>> {
        let request = self.trace.get(self.position)?;
        let ctx = EvictionContext::at(self.trace, self.position, self.w);
        self.position += 1;
        Some(match self.state.access(request, self.policy.as_mut(), &ctx) {
            Ok(outcome) => {
                self.metrics.record(&outcome);
                Ok(outcome)
            }
            Err(e) => Err(e.into()),
        })
    }

    pub fn state(&self) -> &CacheState {
        &self.state
    }

    pub fn metrics(&self) -> &RunMetrics {
        &self.metrics
    }

}

pub fn run_simulation(config: &ExperimentConfig, trace: &[MemoryAccess]) -> Result<RunMetrics, HarnessError> {
    let mut sim = Simulator::new(config, trace)?;
    while let Some(r) = sim.step() {
        r?;
    }
    let mut metrics = sim.metrics;
    metrics.branches = sim.policy.branch_counts();
    Ok(metrics)
}

/// One row per configuration, in input order. Runs execute in parallel.
pub fn run_policy_comparison(
    configs: &[ExperimentConfig],
    trace: &[MemoryAccess],
) -> Result<Vec<RunMetrics>, HarnessError> {
    if let Some(first) = configs.first() {
        if let Some(other) = configs.iter().find(|c| c.cache != first.cache) {
            return config_err(format!(
                "{} uses a different cache geometry from {}",
                other.label(),
                first.label()
            ));
        }
    }
    configs.par_iter().map(|c| run_simulation(c, trace)).collect()
}

/// Runs `base` once per horizon with everything else fixed.
pub fn run_horizon_sweep(
    base: &ExperimentConfig,
    horizons: &[usize],
    trace: &[MemoryAccess],
) -> Result<Vec<RunMetrics>, HarnessError> {
    if horizons.is_empty() {
        return config_err("horizon list is empty");
    }
    if base.policy != PolicyKind::Mustache || base.mustache.is_none() {
        return config_err("a horizon sweep needs a mustache configuration");
    }
    let configs: Vec<ExperimentConfig> = horizons
        .iter()
        .map(|&k| {
            let mut c = base.clone();
            c.mustache.as_mut().expect("checked above").k = k;
            c
        })
        .collect();
    configs.par_iter().map(|c| run_simulation(c, trace)).collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ReportFormat {
    #[default]
    Csv,
    Human,
}

impl FromStr for ReportFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "human" | "table" => Ok(ReportFormat::Human),
            _ => config_err(format!("unknown report format {s:?}")),
        }
    }
}

pub const REPORT_COLUMNS: [&str; 9] = [
    "policy", "k", "total", "hits", "misses", "hit_ratio", "reads", "writes", "evictions",
];

fn report_fields(m: &RunMetrics) -> [String; 9] {
    [
        m.policy.clone(),
        m.k.map(|k| k.to_string()).unwrap_or_default(),
        m.total.to_string(),
        m.hits.to_string(),
        m.misses.to_string(),
        m.hit_ratio_4dp(),
        m.disk_reads.to_string(),
        m.disk_writes.to_string(),
        m.evictions.to_string(),
    ]
}

pub fn emit_report(rows: &[RunMetrics], format: ReportFormat) -> String {
    let table: Vec<[String; 9]> = rows.iter().map(report_fields).collect();
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            out.push_str(&REPORT_COLUMNS.join(","));
            out.push('\n');
            for r in &table {
                out.push_str(&r.join(","));
                out.push('\n');
            }
        }
        ReportFormat::Human => {
            let mut widths = REPORT_COLUMNS.map(str::len);
            for r in &table {
                for (w, f) in widths.iter_mut().zip(r) {
                    *w = (*w).max(f.len());
                }
            }
            let line = |out: &mut String, fields: &[&str]| {
                for (i, (f, w)) in fields.iter().zip(widths).enumerate() {
                    let sep = if i == 0 { "" } else { "  " };
                    if i == 0 {
                        let _ = write!(out, "{sep}{f:<w$}");
                    } else {
                        let _ = write!(out, "{sep}{f:>w$}");
                    }
                }
                out.push('\n');
            };
            line(&mut out, &REPORT_COLUMNS);
            for r in &table {
                let fields: Vec<&str> = r.iter().map(String::as_str).collect();
                line(&mut out, &fields);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{accesses_from_pages, generate_synthetic, Op, Workload};

    fn frames(k: usize) -> CacheConfig {
        CacheConfig::new(k, 4096, 32).unwrap()
    }

    fn metrics(hits: u64, total: u64) -> RunMetrics {
        RunMetrics {
            policy: "lru".into(),
            total,
            hits,
            misses: total - hits,
            disk_reads: total - hits,
            ..RunMetrics::default()
        }
    }

    #[test]
    fn rounding_half_even() {
        assert_eq!(ratio_4dp(92468, 100_000), "0.9247");
        assert_eq!(ratio_4dp(92465, 100_000), "0.9246");
        assert_eq!(ratio_4dp(92475, 100_000), "0.9248");
        assert_eq!(ratio_4dp(1, 3), "0.3333");
        assert_eq!(ratio_4dp(2, 3), "0.6667");
        assert_eq!(ratio_4dp(5, 5), "1.0000");
        assert_eq!(ratio_4dp(0, 0), "0.0000");
    }

    #[test]
    fn report_shapes() {
        assert_eq!(emit_report(&[], ReportFormat::Csv), "policy,k,total,hits,misses,hit_ratio,reads,writes,evictions\n");
        let mut a = metrics(92468, 100_000);
        let mut b = metrics(3, 4);
        b.policy = "mustache".into();
        b.k = Some(30);
        a.evictions = 7;
        let csv = emit_report(&[a, b], ReportFormat::Csv);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "lru,,100000,92468,7532,0.9247,7532,0,7");
        assert_eq!(lines[2], "mustache,30,4,3,1,0.7500,1,0,0");
        let human = emit_report(&[metrics(1, 2)], ReportFormat::Human);
        assert_eq!(human.lines().count(), 2);
        assert!(human.contains("0.5000"));
    }

    #[test]
    fn cold_start_counts() {
        let trace = accesses_from_pages(&[1, 2, 3, 4, 5]);
        for p in PolicyKind::ALL {
            let mut cfg = ExperimentConfig::new(p, frames(10)).with_seed(1);
            if p == PolicyKind::Mustache {
                cfg.mustache = Some(MustacheConfig::new(ForecasterSpec::perfect_oracle(), 3));
            }
            let m = run_simulation(&cfg, &trace).unwrap();
            assert_eq!((m.hits, m.misses, m.disk_reads, m.disk_writes), (0, 5, 5, 0), "{}", p.name());
        }
    }

    #[test]
    fn loop_warmup_then_hits() {
        let pages: Vec<u64> = (0..300).map(|i| 1 + i % 3).collect();
        let m = run_simulation(&ExperimentConfig::new(PolicyKind::Lru, frames(3)), &accesses_from_pages(&pages)).unwrap();
        assert_eq!(m.hits, 297);
        assert_eq!(m.hit_ratio_4dp(), "0.9900");
    }

    #[test]
    fn dirty_evictions_are_writes() {
        let trace = vec![
            MemoryAccess::new(0, 1, Op::Write),
            MemoryAccess::new(1, 2, Op::Read),
            MemoryAccess::new(2, 3, Op::Read),
            MemoryAccess::new(3, 4, Op::Read),
        ];
        let m = run_simulation(&ExperimentConfig::new(PolicyKind::Fifo, frames(2)), &trace).unwrap();
        assert_eq!((m.evictions, m.disk_writes, m.disk_reads), (2, 1, 4));
        m.check_identities().unwrap();
    }

    #[test]
    fn residency_bounded_by_frames() {
        let w = Workload::Zipfian {
            universe: 200,
            exponent: 0.8,
        };
        let trace = generate_synthetic(&w, 3000, 0.3, 2).unwrap();
        let cfg = ExperimentConfig::new(PolicyKind::Lru, CacheConfig::default());
        let mut sim = Simulator::new(&cfg, &trace).unwrap();
        while let Some(r) = sim.step() {
            r.unwrap();
            assert!(sim.state().len() <= 10);
        }
        sim.metrics().check_identities().unwrap();
    }

    #[test]
    fn configuration_errors() {
        let trace = accesses_from_pages(&[1, 2]);
        let random = ExperimentConfig::new(PolicyKind::Random, frames(2));
        assert!(matches!(run_simulation(&random, &trace), Err(HarnessError::Config(_))));
        let mut noisy = ExperimentConfig::mustache(
            frames(2),
            MustacheConfig::new(
                ForecasterSpec::Oracle {
                    rho: 0.5,
                    vocabulary: DeltaVocabulary::build(&[1, 1], 1).unwrap(),
                },
                3,
            ),
        );
        assert!(run_simulation(&noisy, &trace).is_err());
        noisy.seed = Some(4);
        assert!(run_simulation(&noisy, &trace).is_ok());
        let zero_k = ExperimentConfig::mustache(frames(2), MustacheConfig::new(ForecasterSpec::perfect_oracle(), 0));
        assert!(run_simulation(&zero_k, &trace).is_err());
        let bare = ExperimentConfig::new(PolicyKind::Mustache, frames(2));
        assert!(run_simulation(&bare, &trace).is_err());
        // 2^20 pages with the default geometry
        let far = accesses_from_pages(&[1 << 20]);
        assert!(run_simulation(&ExperimentConfig::new(PolicyKind::Lru, frames(2)), &far).is_err());
    }

    #[test]
    fn comparison_keeps_order() {
        let trace = generate_synthetic(&Workload::CyclicScan { universe: 12 }, 500, 0.0, 0).unwrap();
        let configs: Vec<_> = [PolicyKind::Opt, PolicyKind::Lru, PolicyKind::Fifo]
            .into_iter()
            .map(|p| ExperimentConfig::new(p, frames(10)))
            .collect();
        let rows = run_policy_comparison(&configs, &trace).unwrap();
        let names: Vec<&str> = rows.iter().map(|r| r.policy.as_str()).collect();
        assert_eq!(names, ["opt", "lru", "fifo"]);
        assert!(rows[0].misses <= rows[1].misses);
        assert_eq!(rows[1], run_simulation(&configs[1], &trace).unwrap());

        let mut mixed = configs.clone();
        mixed[1].cache = frames(4);
        assert!(run_policy_comparison(&mixed, &trace).is_err());
    }

    #[test]
    fn sweep_rows() {
        let trace = generate_synthetic(&Workload::CyclicScan { universe: 12 }, 500, 0.0, 0).unwrap();
        let base = ExperimentConfig::mustache(frames(10), MustacheConfig::new(ForecasterSpec::perfect_oracle(), 1));
        assert!(run_horizon_sweep(&base, &[], &trace).is_err());
        let rows = run_horizon_sweep(&base, &[5], &trace).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].k, Some(5));
        let rows = run_horizon_sweep(&base, &[1, 2, 4], &trace).unwrap();
        assert_eq!(rows.iter().map(|r| r.k.unwrap()).collect::<Vec<_>>(), [1, 2, 4]);
    }

    #[test]
    fn replay_is_reproducible() {
        let w = Workload::Zipfian {
            universe: 100,
            exponent: 1.0,
        };
        let trace = generate_synthetic(&w, 2000, 0.2, 11).unwrap();
        let vocabulary = DeltaVocabulary::build(&crate::trace::raw_deltas(&trace, DeltaMode::Consecutive), 2).unwrap();
        let cfg = ExperimentConfig::mustache(frames(10), MustacheConfig::new(ForecasterSpec::Oracle { rho: 0.3, vocabulary }, 10))
            .with_seed(9);
        let a = emit_report(&[run_simulation(&cfg, &trace).unwrap()], ReportFormat::Csv);
        let b = emit_report(&[run_simulation(&cfg, &trace).unwrap()], ReportFormat::Csv);
        assert_eq!(a, b);
    }
}
