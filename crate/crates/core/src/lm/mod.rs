//! Language-model contract used for position scoring, call sampling, loss
//! evaluation and decoding.

mod ngram;
mod scripted;

pub use ngram::{CountEntry, CountTable, NgramLm, TableError, BOS, COUNT_TABLE_VERSION};
pub use scripted::{Pattern, RuleSpec, ScriptError, ScriptSpec, ScriptedLm};

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::call::CALL_OPEN;
use crate::token::{TokenId, Tokenizer};

/// A next-token distribution over the tokenizer's vocabulary.
///
/// Implementations must be deterministic and safe for concurrent reads.
pub trait LanguageModel: Send + Sync {
    fn tokenizer(&self) -> &dyn Tokenizer;

    /// Dense distribution with one entry per vocabulary id, summing to 1.
    fn next_distribution(&self, context: &[TokenId]) -> Vec<f64>;

    fn token_prob(&self, context: &[TokenId], token: TokenId) -> f64 {
        self.next_distribution(context)
            .get(token as usize)
            .copied()
            .unwrap_or(0.0)
    }
}

/// The token that opens a call: the first token of ` [`.
pub fn api_token(tok: &dyn Tokenizer) -> TokenId {
    tok.encode(CALL_OPEN)[0]
}

/// Probability of starting a call right after `prefix`.
pub fn api_token_prob(lm: &dyn LanguageModel, prefix: &str) -> f64 {
    let tok = lm.tokenizer();
    lm.token_prob(&tok.encode(prefix), api_token(tok))
}

/// Log-probability of each suffix token given the prefix text and the
/// preceding suffix tokens.
pub fn score_suffix(lm: &dyn LanguageModel, prefix: &str, suffix: &[TokenId]) -> Vec<f64> {
    score_tokens(lm, &lm.tokenizer().encode(prefix), suffix)
}

pub fn score_tokens(lm: &dyn LanguageModel, context: &[TokenId], suffix: &[TokenId]) -> Vec<f64> {
    let mut ctx = Vec::with_capacity(context.len() + suffix.len());
    ctx.extend_from_slice(context);
    suffix
        .iter()
        .map(|&t| {
            let lp = libm::log(lm.token_prob(&ctx, t));
            ctx.push(t);
            lp
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleParams {
    pub samples: usize,
    pub max_len: usize,
    /// 0 decodes greedily.
    pub temperature: f64,
    pub seed: u64,
}

impl Default for SampleParams {
    fn default() -> Self {
        SampleParams {
            samples: 5,
            max_len: 64,
            temperature: 1.0,
            seed: 0,
        }
    }
}

/// Highest-probability token; ties go to the lowest id.
pub fn argmax(dist: &[f64]) -> TokenId {
    let mut best = 0;
    for (i, &p) in dist.iter().enumerate() {
        if p > dist[best] {
            best = i;
        }
    }
    best as TokenId
}

fn draw(dist: &[f64], temperature: f64, rng: &mut ChaCha8Rng) -> Option<TokenId> {
    if temperature <= 0.0 {
        return Some(argmax(dist));
    }
    let inv = 1.0 / temperature;
    let weight = |p: f64| if p > 0.0 { libm::pow(p, inv) } else { 0.0 };
    let total: f64 = dist.iter().map(|&p| weight(p)).sum();
    if !(total > 0.0) || !total.is_finite() {
        return None;
    }
    let mut u = rng.random::<f64>() * total;
    let mut last = None;
    for (i, &p) in dist.iter().enumerate() {
        let w = weight(p);
        if w <= 0.0 {
            continue;
        }
        last = Some(i as TokenId);
        if u < w {
            return last;
        }
        u -= w;
    }
    last
}

/// Samples up to `params.samples` continuations of `prefix`, each ending in
/// one of `stop`. Continuations that do not reach a stop token within
/// `params.max_len` tokens are discarded.
pub fn sample_until(
    lm: &dyn LanguageModel,
    prefix: &str,
    stop: &[TokenId],
    params: &SampleParams,
) -> Vec<Vec<TokenId>> {
    sample_until_tokens(lm, &lm.tokenizer().encode(prefix), stop, params)
}

pub fn sample_until_tokens(
    lm: &dyn LanguageModel,
    context: &[TokenId],
    stop: &[TokenId],
    params: &SampleParams,
) -> Vec<Vec<TokenId>> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut out = Vec::new();
    let mut ctx = context.to_vec();
    for _ in 0..params.samples {
        ctx.truncate(context.len());
        let mut finished = false;
        for _ in 0..params.max_len {
            let Some(t) = draw(&lm.next_distribution(&ctx), params.temperature, &mut rng) else {
                break;
            };
            ctx.push(t);
            if stop.contains(&t) {
                finished = true;
                break;
            }
        }
        if finished {
            out.push(ctx[context.len()..].to_vec());
        }
    }
    out
}
