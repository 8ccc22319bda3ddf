//! Count-table delta predictor with backoff.
//!
//! For every order `n ∈ 1..=m` the model counts which vocabulary token follows
//! each `n`-token context in the training deltas. A prediction takes the
//! argmax under add-α smoothing (ties to the smaller token), backing off from
//! the longest seen context to the unigram argmax. Multi-step forecasts feed
//! each predicted token back in as context.

use std::collections::HashMap;

use super::{Forecast, ForecastError, ForecastRequest, Forecaster};
use crate::trace::{DeltaToken, DeltaVocabulary};

#[derive(Clone, Debug, Default)]
struct Successors {
    counts: HashMap<i64, u64>,
    total: u64,
    best: i64,
}

impl Successors {
    fn add(&mut self, token: i64) {
        *self.counts.entry(token).or_insert(0) += 1;
        self.total += 1;
    }

    fn finish(&mut self) {
        // (count + α) is monotone in count, so smoothing never moves the argmax
        self.best = self
            .counts
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(&t, _)| t)
            .expect("successor table is never empty");
    }
}

#[derive(Clone, Debug)]
pub struct NgramForecaster {
    order: usize,
    alpha: f64,
    vocabulary: DeltaVocabulary,
    // tables[n - 1]: context of n tokens -> successors
    tables: Vec<HashMap<Vec<DeltaToken>, Successors>>,
    unigram: Successors,
}

impl NgramForecaster {
    /// Trains on a token sequence already encoded with `vocabulary`.
    pub fn train(
        train: &[DeltaToken],
        vocabulary: &DeltaVocabulary,
        order: usize,
        alpha: f64,
    ) -> Result<Self, ForecastError> {
        if order == 0 {
            return Err(ForecastError::ZeroOrder);
        }
        if train.is_empty() {
            return Err(ForecastError::EmptyTraining);
        }
        if alpha.is_nan() || alpha < 0.0 {
            return Err(ForecastError::Unsupported(format!("smoothing {alpha} must be non-negative")));
        }
        let mut unigram = Successors::default();
        for t in train.iter().filter_map(|t| t.value()) {
            if vocabulary.contains(t) {
                unigram.add(t);
            }
        }
        if unigram.total == 0 {
            return Err(ForecastError::EmptyVocabulary);
        }
        unigram.finish();

        let mut tables = Vec::with_capacity(order);
        for n in 1..=order {
            let mut table: HashMap<Vec<DeltaToken>, Successors> = HashMap::new();
            for i in n..train.len() {
                let Some(next) = train[i].value().filter(|d| vocabulary.contains(*d)) else {
                    continue;
                };
                let ctx = &train[i - n..i];
                match table.get_mut(ctx) {
                    Some(s) => s.add(next),
                    None => {
                        let mut s = Successors::default();
                        s.add(next);
                        table.insert(ctx.to_vec(), s);
                    }
                }
            }
            table.values_mut().for_each(Successors::finish);
            tables.push(table);
        }
        Ok(Self {
            order,
            alpha,
            vocabulary: vocabulary.clone(),
            tables,
            unigram,
        })
    }

    /// Encodes raw training deltas with `vocabulary` and trains.
    pub fn train_on_deltas(
        deltas: &[i64],
        vocabulary: &DeltaVocabulary,
        order: usize,
        alpha: f64,
    ) -> Result<Self, ForecastError> {
        let tokens: Vec<DeltaToken> = deltas.iter().map(|&d| vocabulary.encode(d)).collect();
        Self::train(&tokens, vocabulary, order, alpha)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    fn successors(&self, context: &[DeltaToken]) -> &Successors {
        let longest = self.order.min(context.len());
        (1..=longest)
            .rev()
            .find_map(|n| self.tables[n - 1].get(&context[context.len() - n..]))
            .unwrap_or(&self.unigram)
    }

    /// Smoothed `P(token | context)` from the longest seen suffix of `context`.
    pub fn probability(&self, context: &[DeltaToken], token: i64) -> f64 {
        let s = self.successors(context);
        let count = s.counts.get(&token).copied().unwrap_or(0) as f64;
        let v = self.vocabulary.len() as f64;
        let denom = s.total as f64 + self.alpha * v;
        if denom == 0.0 {
            0.0
        } else if self.vocabulary.contains(token) {
            (count + self.alpha) / denom
        } else {
            0.0
        }
    }

    /// Most likely next token after `context`.
    pub fn next_token(&self, context: &[DeltaToken]) -> i64 {
        self.successors(context).best
    }

    /// `k` tokens predicted recursively from `context`.
    pub fn predict_from(&self, context: &[DeltaToken], k: usize) -> Vec<i64> {
        let keep = context.len().min(self.order);
        let mut ctx: Vec<DeltaToken> = context[context.len() - keep..].to_vec();
        let mut out = Vec::with_capacity(k);
        for _ in 0..k {
            let next = self.next_token(&ctx);
            out.push(next);
            if self.order > 0 {
                if ctx.len() == self.order {
                    ctx.remove(0);
                }
                ctx.push(DeltaToken::Delta(next));
            }
        }
        out
    }
}

impl Forecaster for NgramForecaster {
    fn name(&self) -> &str {
        "ngram"
    }

    fn forecast(&mut self, request: &ForecastRequest<'_>) -> Result<Forecast, ForecastError> {
        let skip = request.history.len().saturating_sub(self.order + 1);
        let context: Vec<DeltaToken> = request.history[skip..]
            .windows(2)
            .map(|w| self.vocabulary.encode(w[1].page.delta_from(w[0].page)))
            .collect();
        Ok(Forecast::Deltas(self.predict_from(&context, request.horizon)))
    }
}
