use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Forecast, ForecastError, ForecastRequest, Forecaster};
use crate::trace::{DeltaMode, DeltaVocabulary, MemoryAccess, PageId};

/// Reads the true future deltas off the trace, optionally corrupting them.
///
/// Each predicted position is independently replaced, with probability
/// `rho`, by a uniformly drawn vocabulary token. The draws for query position
/// `t` come from ChaCha stream `t` of the seed, and both the coin and the
/// replacement token are always drawn, so the corruption pattern is a function
/// of `(seed, t, j)` alone: raising `rho` only ever adds corrupted positions.
///
/// Near the end of the trace the forecast is shortened to the requests that
/// remain. Queries are matched to the trace by [`ForecastRequest::position`].
#[derive(Clone, Debug)]
pub struct OracleForecaster {
    pages: Vec<PageId>,
    tokens: Vec<i64>,
    rho: f64,
    seed: u64,
    mode: DeltaMode,
}

impl OracleForecaster {
    /// The perfect oracle.
    pub fn perfect(trace: &[MemoryAccess]) -> Self {
        Self {
            pages: trace.iter().map(|a| a.page).collect(),
            tokens: Vec::new(),
            rho: 0.0,
            seed: 0,
            mode: DeltaMode::Consecutive,
        }
    }

    pub fn noisy(
        trace: &[MemoryAccess],
        rho: f64,
        vocabulary: &DeltaVocabulary,
        seed: u64,
    ) -> Result<Self, ForecastError> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(ForecastError::Unsupported(format!("corruption rate {rho} is outside [0, 1]")));
        }
        if rho > 0.0 && vocabulary.is_empty() {
            return Err(ForecastError::EmptyVocabulary);
        }
        Ok(Self {
            tokens: vocabulary.tokens().collect(),
            rho,
            seed,
            ..Self::perfect(trace)
        })
    }

    pub fn with_mode(mut self, mode: DeltaMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

impl Forecaster for OracleForecaster {
    fn name(&self) -> &str {
        "oracle"
    }

    fn forecast(&mut self, request: &ForecastRequest<'_>) -> Result<Forecast, ForecastError> {
        let t = request.position;
        if t >= self.pages.len() {
            return Ok(Forecast::Deltas(Vec::new()));
        }
        let end = (t + request.horizon).min(self.pages.len() - 1);
        let anchor = self.pages[t];
        let mut deltas: Vec<i64> = match self.mode {
            DeltaMode::Consecutive => self.pages[t..=end]
                .windows(2)
                .map(|w| w[1].delta_from(w[0]))
                .collect(),
            DeltaMode::Anchored => self.pages[t + 1..=end].iter().map(|p| p.delta_from(anchor)).collect(),
        };
        if self.rho > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(t as u64);
            for d in deltas.iter_mut() {
                let coin: f64 = rng.random();
                let token = self.tokens[rng.random_range(0..self.tokens.len())];
                if coin < self.rho {
                    *d = token;
                }
            }
        }
        Ok(Forecast::Deltas(deltas))
    }
}
