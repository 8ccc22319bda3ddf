//! Multi-step-ahead page-delta forecasting.
//!
//! A [`Forecaster`] receives the recent request window and returns the next
//! `k` page deltas. [`predict`] turns those deltas back into page ids and the
//! lookup structures the eviction policy needs ([`PredictionWindow`]).

mod file;
mod ngram;
mod oracle;

use std::collections::HashMap;

use thiserror::Error;

use crate::trace::{DeltaMode, DeltaToken, MemoryAccess, PageId};

pub use file::{fnv1a64, FileForecaster, PredictionFile};
pub use ngram::NgramForecaster;
pub use oracle::OracleForecaster;

#[derive(Debug, Error)]
pub enum ForecastError {
    #[error("forecaster returned {got} deltas for a horizon of {horizon}")]
    Shape { horizon: usize, got: usize },
    #[error("UNK token at position {0} cannot be turned into a page")]
    UnknownToken(usize),
    #[error("sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("evaluation needs more than {needed} requests, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("cannot train on an empty sequence")]
    EmptyTraining,
    #[error("no vocabulary token to predict")]
    EmptyVocabulary,
    #[error("order must be at least 1")]
    ZeroOrder,
    #[error("{0}")]
    Unsupported(String),
    #[error("predictions file line {line}: {reason}")]
    FileFormat { line: usize, reason: String },
    #[error("predictions file has k={file}, expected k={expected}")]
    HorizonMismatch { file: usize, expected: usize },
    #[error("predictions file was made for vocabulary {file:016x}, expected {expected:016x}")]
    VocabularyMismatch { file: u64, expected: u64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Opaque non-endogenous inputs (exogenous signals, known-future inputs,
/// static metadata). The built-in forecasters ignore it.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AuxContext {
    pub features: Vec<f64>,
}

/// Input to one forecaster query at time `t`.
#[derive(Clone, Copy, Debug)]
pub struct ForecastRequest<'a> {
    /// Global request index `t`.
    pub time: u64,
    /// Offset of `t` within the replayed sequence.
    pub position: usize,
    /// The last `w` requests, oldest first; the final entry is `y_t`.
    pub history: &'a [MemoryAccess],
    pub current_page: PageId,
    /// Number of future deltas requested (`k`).
    pub horizon: usize,
    pub aux: &'a AuxContext,
}

impl ForecastRequest<'_> {
    /// Consecutive deltas of the history window (`history.len() − 1` values).
    pub fn history_deltas(&self) -> impl Iterator<Item = i64> + '_ {
        self.history.windows(2).map(|w| w[1].page.delta_from(w[0].page))
    }
}

/// What a forecaster produced.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Forecast {
    /// Up to `horizon` deltas. Fewer means the trace ends inside the horizon.
    Deltas(Vec<i64>),
    /// Nothing is known for this request.
    NoPrediction,
}

/// A page-delta forecaster.
pub trait Forecaster: Send {
    fn name(&self) -> &str;

    fn forecast(&mut self, request: &ForecastRequest<'_>) -> Result<Forecast, ForecastError>;
}

impl<F: Forecaster + ?Sized> Forecaster for Box<F> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn forecast(&mut self, request: &ForecastRequest<'_>) -> Result<Forecast, ForecastError> {
        (**self).forecast(request)
    }
}

/// Cumulative reconstruction of pages from `current`; stops at the first page
/// outside `[0, universe)`.
pub fn deltas_to_pages(current: PageId, deltas: &[i64], universe: u64) -> Vec<PageId> {
    reconstruct_pages(current, deltas, universe, DeltaMode::Consecutive)
}

/// [`deltas_to_pages`] for either delta convention.
pub fn reconstruct_pages(current: PageId, deltas: &[i64], universe: u64, mode: DeltaMode) -> Vec<PageId> {
    let mut pages = Vec::with_capacity(deltas.len());
    let mut last = current;
    for &d in deltas {
        let base = match mode {
            DeltaMode::Consecutive => last,
            DeltaMode::Anchored => current,
        };
        match base.offset(d, universe) {
            Some(p) => {
                pages.push(p);
                last = p;
            }
            None => break,
        }
    }
    pages
}

/// Token-level reconstruction; UNK is a contract violation.
pub fn tokens_to_pages(current: PageId, tokens: &[DeltaToken], universe: u64) -> Result<Vec<PageId>, ForecastError> {
    let deltas = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| t.value().ok_or(ForecastError::UnknownToken(i)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(deltas_to_pages(current, &deltas, universe))
}

/// The predicted pages `P̂_{t+1:t+k}` for one query.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PredictionWindow {
    deltas: Vec<i64>,
    pages: Vec<PageId>,
    first_occurrence: HashMap<PageId, usize>,
}

impl PredictionWindow {
    pub fn new(current: PageId, deltas: Vec<i64>, universe: u64, mode: DeltaMode) -> Self {
        let pages = reconstruct_pages(current, &deltas, universe, mode);
        let mut w = Self::from_pages(pages);
        w.deltas = deltas;
        w
    }

    /// A window over already reconstructed pages.
    pub fn from_pages(pages: Vec<PageId>) -> Self {
        let mut first_occurrence = HashMap::with_capacity(pages.len());
        for (i, &p) in pages.iter().enumerate() {
            first_occurrence.entry(p).or_insert(i + 1);
        }
        Self {
            deltas: Vec::new(),
            pages,
            first_occurrence,
        }
    }

    pub fn deltas(&self) -> &[i64] {
        &self.deltas
    }

    /// Reconstructed pages in prediction order.
    pub fn pages(&self) -> &[PageId] {
        &self.pages
    }

    pub fn contains(&self, page: PageId) -> bool {
        self.first_occurrence.contains_key(&page)
    }

    /// Earliest 1-based position at which `page` is predicted.
    pub fn first_occurrence(&self, page: PageId) -> Option<usize> {
        self.first_occurrence.get(&page).copied()
    }

    /// Number of distinct predicted pages.
    pub fn distinct_pages(&self) -> usize {
        self.first_occurrence.len()
    }

    pub fn page_set(&self) -> impl Iterator<Item = PageId> + '_ {
        self.first_occurrence.keys().copied()
    }
}

/// Queries `forecaster` and reconstructs the predicted pages.
///
/// Returns `Ok(None)` when the forecaster has no prediction for this request.
pub fn predict(
    forecaster: &mut dyn Forecaster,
    request: &ForecastRequest<'_>,
    universe: u64,
    mode: DeltaMode,
) -> Result<Option<PredictionWindow>, ForecastError> {
    if request.horizon == 0 {
        return Err(ForecastError::ZeroHorizon);
    }
    match forecaster.forecast(request)? {
        Forecast::NoPrediction => Ok(None),
        Forecast::Deltas(deltas) => {
            if deltas.len() > request.horizon {
                return Err(ForecastError::Shape {
                    horizon: request.horizon,
                    got: deltas.len(),
                });
            }
            Ok(Some(PredictionWindow::new(request.current_page, deltas, universe, mode)))
        }
    }
}

/// Fraction of positions where the predicted delta equals the actual one.
pub fn accuracy_at_k(actual: &[i64], predicted: &[i64]) -> Result<f64, ForecastError> {
    if actual.len() != predicted.len() {
        return Err(ForecastError::LengthMismatch(actual.len(), predicted.len()));
    }
    if actual.is_empty() {
        return Err(ForecastError::ZeroHorizon);
    }
    let hits = actual.iter().zip(predicted).filter(|(a, p)| a == p).count();
    Ok(hits as f64 / actual.len() as f64)
}

/// Mean Accuracy@k of a forecaster over a test sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct AccuracyReport {
    pub k: usize,
    pub mean: f64,
    /// Windows that produced a prediction and entered the mean.
    pub windows: usize,
    /// Windows for which the forecaster had no prediction.
    pub uncovered: usize,
}

/// Slides over every `t` of `test` with a full look-back of `w` and `k` known
/// future deltas, and averages Accuracy@k. Windows without a prediction are
/// counted in `uncovered` and left out of the mean; truncated forecasts are
/// scored on the positions they cover.
pub fn evaluate_forecaster(
    forecaster: &mut dyn Forecaster,
    test: &[MemoryAccess],
    w: usize,
    k: usize,
) -> Result<AccuracyReport, ForecastError> {
    if k == 0 {
        return Err(ForecastError::ZeroHorizon);
    }
    let w = w.max(1);
    if test.len() <= w + k {
        return Err(ForecastError::TooShort {
            needed: w + k,
            got: test.len(),
        });
    }
    let aux = AuxContext::default();
    let mut sum = 0.0;
    let mut windows = 0;
    let mut uncovered = 0;
    for t in (w - 1)..(test.len() - k) {
        let request = ForecastRequest {
            time: test[t].index,
            position: t,
            history: &test[t + 1 - w..=t],
            current_page: test[t].page,
            horizon: k,
            aux: &aux,
        };
        let actual: Vec<i64> = test[t..=t + k]
            .windows(2)
            .map(|p| p[1].page.delta_from(p[0].page))
            .collect();
        match forecaster.forecast(&request)? {
            Forecast::NoPrediction => uncovered += 1,
            Forecast::Deltas(pred) => {
                if pred.is_empty() || pred.len() > k {
                    return Err(ForecastError::Shape { horizon: k, got: pred.len() });
                }
                sum += accuracy_at_k(&actual[..pred.len()], &pred)?;
                windows += 1;
            }
        }
    }
    Ok(AccuracyReport {
        k,
        mean: if windows == 0 { 0.0 } else { sum / windows as f64 },
        windows,
        uncovered,
    })
}
