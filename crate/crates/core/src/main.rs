use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mustache_core::cache::CacheConfig;
use mustache_core::forecast::{
    evaluate_forecaster, fnv1a64, FileForecaster, Forecaster, NgramForecaster, OracleForecaster,
};
use mustache_core::harness::{
    emit_report, run_horizon_sweep, run_policy_comparison, run_simulation, ExperimentConfig, FallbackKind,
    ForecasterSpec, MustacheConfig, PolicyKind, ReportFormat,
};
use mustache_core::trace::io::{read_accesses, read_vocabulary, write_accesses, write_vocabulary};
use mustache_core::trace::{
    common_prefix_len, generate_synthetic, parse_pin_trace, raw_deltas, split_train_test, strip_preamble,
    to_page_accesses, DeltaMode, DeltaVocabulary, MemoryAccess, ParseMode, ParseOptions, Workload,
};

#[derive(Parser)]
#[command(name = "mustache", version, about = "Page-cache replacement simulator with forecast-guided eviction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a Pin memory trace into a page-access CSV.
    Ingest(IngestArgs),
    /// Split a page-access CSV into train and test parts.
    Split(SplitArgs),
    /// Build the delta vocabulary from a training CSV.
    Vocab(VocabArgs),
    /// Write a synthetic page-access CSV.
    Generate(GenerateArgs),
    /// Replay a trace under one policy.
    Simulate(SimulateArgs),
    /// Replay a trace under several policies.
    Compare(CompareArgs),
    /// Replay a trace under the forecast-guided policy for several horizons.
    Sweep(SweepArgs),
    /// Mean Accuracy@k of a forecaster on a test CSV.
    Accuracy(AccuracyArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    pin: PathBuf,
    #[arg(long, default_value_t = 4096)]
    page_size: u64,
    #[arg(long)]
    out: PathBuf,
    /// Drop this many leading requests.
    #[arg(long, conflicts_with = "auto_lcp")]
    strip_preamble: Option<usize>,
    /// Drop the page prefix shared with these other Pin traces.
    #[arg(long, num_args = 1..)]
    auto_lcp: Vec<PathBuf>,
    /// Fail on the first malformed line instead of skipping it.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, default_value_t = 0.9)]
    train_fraction: f64,
    #[arg(long)]
    train_out: PathBuf,
    #[arg(long)]
    test_out: PathBuf,
    /// Also write the training vocabulary.
    #[arg(long)]
    vocab_out: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    min_count: u64,
}

#[derive(Args)]
struct VocabArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long, default_value_t = 2)]
    min_count: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum WorkloadKind {
    Cyclic,
    Zipf,
    Looping,
    ZipfHotset,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    workload: WorkloadKind,
    #[arg(long)]
    len: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    write_fraction: f64,
    #[arg(long, default_value_t = 1000)]
    universe: u64,
    #[arg(long, default_value_t = 1.0)]
    exponent: f64,
    #[arg(long, default_value_t = 90)]
    loop_pages: u64,
    #[arg(long, default_value_t = 10)]
    hot_pages: u64,
    #[arg(long, default_value_t = 0.5)]
    hot_prob: f64,
    #[arg(long, default_value_t = 500)]
    objects: u64,
    #[arg(long, default_value_t = 8)]
    object_pages: u64,
    #[arg(long, default_value_t = 8)]
    hot_burst: u64,
    /// Visit the hot set as a cyclic sweep instead of uniform draws.
    #[arg(long)]
    hot_sweep: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct CacheArgs {
    #[arg(long, default_value_t = 40)]
    cache_kib: u64,
    #[arg(long, default_value_t = 4096)]
    page_size: u64,
    #[arg(long, default_value_t = 32)]
    address_bits: u32,
}

impl CacheArgs {
    fn config(&self) -> Result<CacheConfig> {
        Ok(CacheConfig::from_bytes(self.cache_kib * 1024, self.page_size, self.address_bits)?)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ForecasterKind {
    Oracle,
    Ngram,
    File,
}

#[derive(Clone, Copy, ValueEnum)]
enum DeltaModeArg {
    Consecutive,
    Anchored,
}

impl From<DeltaModeArg> for DeltaMode {
    fn from(m: DeltaModeArg) -> Self {
        match m {
            DeltaModeArg::Consecutive => DeltaMode::Consecutive,
            DeltaModeArg::Anchored => DeltaMode::Anchored,
        }
    }
}

#[derive(Args, Clone)]
struct ForecastArgs {
    #[arg(long, value_enum, default_value_t = ForecasterKind::Oracle)]
    forecaster: ForecasterKind,
    /// Prediction horizon; sweep and accuracy take a comma-separated list.
    #[arg(long, value_delimiter = ',', default_value = "30")]
    k: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    w: usize,
    /// Corruption rate of the oracle.
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    /// Context length of the n-gram model.
    #[arg(long, default_value_t = 3)]
    order: usize,
    /// Add-alpha smoothing of the n-gram model.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Training CSV for the n-gram model.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Vocabulary CSV (n-gram tokens, oracle noise, predictions-file check).
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    min_count: u64,
    #[arg(long)]
    pred_file: Option<PathBuf>,
    #[arg(long, default_value = "lru")]
    fallback: String,
    #[arg(long, value_enum, default_value_t = DeltaModeArg::Consecutive)]
    delta_mode: DeltaModeArg,
}

#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long)]
    trace: PathBuf,
    #[command(flatten)]
    cache: CacheArgs,
    #[command(flatten)]
    forecast: ForecastArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "csv")]
    format: String,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    policy: String,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long, value_delimiter = ',', default_value = "random,fifo,lru,clock,arc,opt,mustache")]
    policies: Vec<String>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct AccuracyArgs {
    #[arg(long)]
    test: PathBuf,
    #[command(flatten)]
    forecast: ForecastArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("cannot open {}", path.display()))?,
    ))
}

fn load_trace(path: &Path) -> Result<Vec<MemoryAccess>> {
    read_accesses(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn load_vocab(path: &Path) -> Result<(DeltaVocabulary, u64)> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let vocab = read_vocabulary(bytes.as_slice()).with_context(|| format!("reading {}", path.display()))?;
    Ok((vocab, fnv1a64(&bytes)))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            let mut f = create(p)?;
            f.write_all(text.as_bytes())?;
            f.flush()?;
        }
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn load_pin(path: &Path, page_size: u64, strict: bool) -> Result<Vec<MemoryAccess>> {
    let mode = if strict { ParseMode::Strict } else { ParseMode::Lenient };
    let parsed = parse_pin_trace(open(path)?, ParseOptions { mode }).with_context(|| format!("parsing {}", path.display()))?;
    let pages = to_page_accesses(&parsed.records, page_size)?;
    if parsed.skipped_lines > 0 {
        eprintln!("{}: skipped {} malformed lines", path.display(), parsed.skipped_lines);
    }
    Ok(pages)
}

fn ingest(a: IngestArgs) -> Result<()> {
    let trace = load_pin(&a.pin, a.page_size, a.strict)?;
    let strip = if !a.auto_lcp.is_empty() {
        let mut all = vec![trace.clone()];
        for p in &a.auto_lcp {
            all.push(load_pin(p, a.page_size, a.strict)?);
        }
        common_prefix_len(&all)
    } else {
        a.strip_preamble.unwrap_or(0)
    };
    let trace = strip_preamble(&trace, strip)?;
    write_accesses(create(&a.out)?, &trace)?;
    Ok(())
}

fn split(a: SplitArgs) -> Result<()> {
    let data = split_train_test(load_trace(&a.trace)?, a.train_fraction, a.min_count)?;
    write_accesses(create(&a.train_out)?, data.train())?;
    // test rows keep their global indices
    write_accesses(create(&a.test_out)?, data.test())?;
    if let Some(p) = &a.vocab_out {
        write_vocabulary(create(p)?, data.vocabulary())?;
    }
    Ok(())
}

fn vocab(a: VocabArgs) -> Result<()> {
    let train = load_trace(&a.train)?;
    let v = DeltaVocabulary::build(&raw_deltas(&train, DeltaMode::Consecutive), a.min_count)?;
    write_vocabulary(create(&a.out)?, &v)?;
    Ok(())
}

fn generate(a: GenerateArgs) -> Result<()> {
    let workload = match a.workload {
        WorkloadKind::Cyclic => Workload::CyclicScan { universe: a.universe },
        WorkloadKind::Zipf => Workload::Zipfian {
            universe: a.universe,
            exponent: a.exponent,
        },
        WorkloadKind::Looping => Workload::LoopingHotset {
            loop_pages: a.loop_pages,
            hot_pages: a.hot_pages,
            hot_prob: a.hot_prob,
        },
        WorkloadKind::ZipfHotset => Workload::ZipfianHotset {
            objects: a.objects,
            object_pages: a.object_pages,
            exponent: a.exponent,
            hot_pages: a.hot_pages,
            hot_fraction: a.hot_prob,
            hot_burst: a.hot_burst,
            hot_sweep: a.hot_sweep,
        },
    };
    let trace = generate_synthetic(&workload, a.len, a.write_fraction, a.seed)?;
    write_accesses(create(&a.out)?, &trace)?;
    Ok(())
}

/// Vocabulary from `--vocab`, else built from `fallback` deltas.
fn vocabulary(f: &ForecastArgs, fallback: &[MemoryAccess]) -> Result<(DeltaVocabulary, Option<u64>)> {
    match &f.vocab {
        Some(p) => {
            let (v, hash) = load_vocab(p)?;
            Ok((v, Some(hash)))
        }
        None => Ok((
            DeltaVocabulary::build(&raw_deltas(fallback, DeltaMode::Consecutive), f.min_count)?,
            None,
        )),
    }
}

fn train_ngram(f: &ForecastArgs) -> Result<NgramForecaster> {
    let Some(path) = &f.train else {
        bail!("the ngram forecaster needs --train <csv>");
    };
    let train = load_trace(path)?;
    let (vocab, _) = vocabulary(f, &train)?;
    Ok(NgramForecaster::train_on_deltas(&raw_deltas(&train, DeltaMode::Consecutive), &vocab, f.order, f.alpha)?)
}

fn forecaster_spec(f: &ForecastArgs, trace: &[MemoryAccess]) -> Result<ForecasterSpec> {
    Ok(match f.forecaster {
        ForecasterKind::Oracle => {
            let vocabulary = if f.rho > 0.0 {
                vocabulary(f, trace)?.0
            } else {
                DeltaVocabulary::default()
            };
            ForecasterSpec::Oracle { rho: f.rho, vocabulary }
        }
        ForecasterKind::Ngram => ForecasterSpec::Ngram(train_ngram(f)?),
        ForecasterKind::File => {
            let Some(path) = &f.pred_file else {
                bail!("the file forecaster needs --pred-file <path>");
            };
            let vocab_hash = match &f.vocab {
                Some(p) => Some(load_vocab(p)?.1),
                None => None,
            };
            ForecasterSpec::File {
                path: path.clone(),
                vocab_hash,
            }
        }
    })
}

impl ForecastArgs {
    fn single_k(&self) -> Result<usize> {
        match self.k.as_slice() {
            [k] => Ok(*k),
            _ => bail!("expected a single --k, got {:?}", self.k),
        }
    }
}

fn experiment(policy: PolicyKind, run: &RunArgs, trace: &[MemoryAccess]) -> Result<ExperimentConfig> {
    let cache = run.cache.config()?;
    let mut cfg = ExperimentConfig::new(policy, cache);
    cfg.seed = run.seed;
    if policy == PolicyKind::Mustache {
        let f = &run.forecast;
        let mut m = MustacheConfig::new(forecaster_spec(f, trace)?, f.k[0]);
        m.w = f.w;
        m.fallback = f.fallback.parse::<FallbackKind>()?;
        m.mode = f.delta_mode.into();
        cfg.mustache = Some(m);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let policy: PolicyKind = a.policy.parse()?;
    let format: ReportFormat = a.run.format.parse()?;
    let trace = load_trace(&a.run.trace)?;
    a.run.forecast.single_k()?;
    let cfg = experiment(policy, &a.run, &trace)?;
    let row = run_simulation(&cfg, &trace)?;
    emit(a.run.out.as_deref(), &emit_report(&[row], format))
}

fn compare(a: CompareArgs) -> Result<()> {
    let format: ReportFormat = a.run.format.parse()?;
    a.run.forecast.single_k()?;
    let trace = load_trace(&a.run.trace)?;
    let configs = a
        .policies
        .iter()
        .map(|p| experiment(p.parse()?, &a.run, &trace))
        .collect::<Result<Vec<_>>>()?;
    let rows = run_policy_comparison(&configs, &trace)?;
    emit(a.run.out.as_deref(), &emit_report(&rows, format))
}

fn sweep(a: SweepArgs) -> Result<()> {
    let format: ReportFormat = a.run.format.parse()?;
    let trace = load_trace(&a.run.trace)?;
    let base = experiment(PolicyKind::Mustache, &a.run, &trace)?;
    let rows = run_horizon_sweep(&base, &a.run.forecast.k, &trace)?;
    emit(a.run.out.as_deref(), &emit_report(&rows, format))
}

fn accuracy(a: AccuracyArgs) -> Result<()> {
    let test = load_trace(&a.test)?;
    let f = &a.forecast;
    let mut out = String::from("forecaster,k,accuracy,windows,uncovered\n");
    for &k in &f.k {
        let mut model: Box<dyn Forecaster> = match forecaster_spec(f, &test)? {
            ForecasterSpec::Oracle { rho, vocabulary } => {
                if rho > 0.0 && a.seed.is_none() {
                    bail!("a noisy oracle needs --seed");
                }
                Box::new(OracleForecaster::noisy(&test, rho, &vocabulary, a.seed.unwrap_or(0))?)
            }
            ForecasterSpec::Ngram(m) => Box::new(m),
            ForecasterSpec::File { path, vocab_hash } => Box::new(FileForecaster::load(&path, k, vocab_hash)?),
        };
        let r = evaluate_forecaster(model.as_mut(), &test, f.w, k)?;
        out.push_str(&format!(
            "{},{},{:.6},{},{}\n",
            model.name(),
            k,
            r.mean,
            r.windows,
            r.uncovered
        ));
    }
    emit(a.out.as_deref(), &out)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Split(a) => split(a),
        Command::Vocab(a) => vocab(a),
        Command::Generate(a) => generate(a),
        Command::Simulate(a) => simulate(a),
        Command::Compare(a) => compare(a),
        Command::Sweep(a) => sweep(a),
        Command::Accuracy(a) => accuracy(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
