use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::LanguageModel;
use crate::token::{TokenId, Tokenizer, WordTokenizer};

/// Padding id used for histories that reach before the first token.
pub const BOS: TokenId = u32::MAX;

pub const COUNT_TABLE_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct ContextCounts {
    total: u64,
    next: BTreeMap<TokenId, u64>,
}

/// Fixed-order n-gram model with additive smoothing:
///
/// `p(w | h) = (c(h, w) + alpha) / (c(h) + alpha * |V|)`
///
/// where `h` is the last `order - 1` tokens, left-padded with [`BOS`].
#[derive(Debug, Clone, PartialEq)]
pub struct NgramLm {
    tokenizer: WordTokenizer,
    order: usize,
    alpha: f64,
    counts: BTreeMap<Vec<TokenId>, ContextCounts>,
}

impl NgramLm {
    pub fn new(tokenizer: WordTokenizer, order: usize, alpha: f64) -> Self {
        assert!(order >= 1, "n-gram order must be at least 1");
        assert!(alpha > 0.0, "smoothing constant must be positive");
        NgramLm {
            tokenizer,
            order,
            alpha,
            counts: BTreeMap::new(),
        }
    }

    /// Trains a tokenizer and a model on the same texts.
    pub fn train<'a, I>(texts: I, order: usize, alpha: f64) -> Self
    where
        I: IntoIterator<Item = &'a str> + Clone,
    {
        let tok = WordTokenizer::train(texts.clone(), 1);
        let mut lm = NgramLm::new(tok, order, alpha);
        for t in texts {
            lm.add_text(t);
        }
        lm
    }

    pub fn add_text(&mut self, text: &str) {
        let tokens = self.tokenizer.encode(text);
        self.add_tokens(&tokens);
    }

    pub fn add_tokens(&mut self, tokens: &[TokenId]) {
        let pad = self.order - 1;
        let mut padded = vec![BOS; pad];
        padded.extend_from_slice(tokens);
        for j in 0..tokens.len() {
            let entry = self.counts.entry(padded[j..j + pad].to_vec()).or_default();
            entry.total += 1;
            *entry.next.entry(tokens[j]).or_default() += 1;
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn word_tokenizer(&self) -> &WordTokenizer {
        &self.tokenizer
    }

    /// Last `order - 1` tokens of `context`, BOS-padded.
    pub fn history(&self, context: &[TokenId]) -> Vec<TokenId> {
        let pad = self.order - 1;
        let take = context.len().min(pad);
        let mut h = vec![BOS; pad - take];
        h.extend_from_slice(&context[context.len() - take..]);
        h
    }

    /// `(c(h, w), c(h))` for a history of exactly `order - 1` tokens.
    pub fn count(&self, history: &[TokenId], token: TokenId) -> (u64, u64) {
        match self.counts.get(history) {
            Some(c) => (c.next.get(&token).copied().unwrap_or(0), c.total),
            None => (0, 0),
        }
    }

    pub fn to_table(&self) -> CountTable {
        CountTable {
            version: COUNT_TABLE_VERSION,
            tokenizer_id: self.tokenizer.id().into(),
            order: self.order,
            alpha: self.alpha,
            pieces: self.tokenizer.pieces().to_vec(),
            entries: self
                .counts
                .iter()
                .map(|(h, c)| CountEntry {
                    history: h.clone(),
                    next: c.next.iter().map(|(&t, &n)| (t, n)).collect(),
                })
                .collect(),
        }
    }

    pub fn from_table(table: CountTable) -> Result<Self, TableError> {
        if table.version != COUNT_TABLE_VERSION {
            return Err(TableError::Version(table.version));
        }
        let tokenizer = WordTokenizer::from_pieces(table.pieces);
        if tokenizer.id() != table.tokenizer_id {
            return Err(TableError::TokenizerMismatch {
                stored: table.tokenizer_id,
                rebuilt: tokenizer.id().into(),
            });
        }
        if table.order == 0 || !(table.alpha > 0.0) {
            return Err(TableError::Parameters);
        }
        let mut lm = NgramLm::new(tokenizer, table.order, table.alpha);
        for e in table.entries {
            if e.history.len() != table.order - 1 {
                return Err(TableError::Parameters);
            }
            let c = lm.counts.entry(e.history).or_default();
            for (t, n) in e.next {
                c.total += n;
                *c.next.entry(t).or_default() += n;
            }
        }
        Ok(lm)
    }
}

impl LanguageModel for NgramLm {
    fn tokenizer(&self) -> &dyn Tokenizer {
        &self.tokenizer
    }

    fn next_distribution(&self, context: &[TokenId]) -> Vec<f64> {
        let v = self.tokenizer.vocab_size();
        let h = self.history(context);
        let (total, next) = match self.counts.get(&h) {
            Some(c) => (c.total, Some(&c.next)),
            None => (0, None),
        };
        let denom = total as f64 + self.alpha * v as f64;
        let mut dist = vec![self.alpha / denom; v];
        for (&t, &n) in next.into_iter().flatten() {
            if let Some(slot) = dist.get_mut(t as usize) {
                *slot = (n as f64 + self.alpha) / denom;
            }
        }
        dist
    }

    fn token_prob(&self, context: &[TokenId], token: TokenId) -> f64 {
        let (c, total) = self.count(&self.history(context), token);
        let v = self.tokenizer.vocab_size() as f64;
        (c as f64 + self.alpha) / (total as f64 + self.alpha * v)
    }
}

/// Serializable count dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountTable {
    pub version: u32,
    pub tokenizer_id: String,
    pub order: usize,
    pub alpha: f64,
    pub pieces: Vec<String>,
    pub entries: Vec<CountEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountEntry {
    pub history: Vec<TokenId>,
    pub next: Vec<(TokenId, u64)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TableError {
    Version(u32),
    TokenizerMismatch { stored: String, rebuilt: String },
    Parameters,
}

impl fmt::Display for TableError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TableError::Version(v) => write!(f, "unsupported count table version {v}"),
            TableError::TokenizerMismatch { stored, rebuilt } => {
                write!(f, "tokenizer id mismatch: table has {stored}, vocabulary gives {rebuilt}")
            }
            TableError::Parameters => f.write_str("invalid order, alpha or history length"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::{api_token, score_suffix};

    #[test]
    fn hand_computed_trigram() {
        let lm = NgramLm::train(["a b c a b c"], 3, 0.1);
        let tok = lm.word_tokenizer();
        let v = tok.vocab_size() as f64;
        // histories ("a"," b") and (" a"," b") each precede " c" once
        let h = [tok.lookup("a").unwrap(), tok.lookup(" b").unwrap()];
        let c = tok.lookup(" c").unwrap();
        assert_eq!(lm.count(&h, c), (1, 1));
        let got = score_suffix(&lm, "a b", &[c]);
        let expected = libm::log((1.0 + 0.1) / (1.0 + 0.1 * v));
        assert!((got[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn normalized_and_positive() {
        let lm = NgramLm::train(["x y z", "x y y", "z"], 3, 0.1);
        let tok = lm.word_tokenizer();
        for ctx in [tok.encode(""), tok.encode("x y"), tok.encode("q q q")] {
            let d = lm.next_distribution(&ctx);
            let s: f64 = d.iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
            assert!(d.iter().all(|&p| p > 0.0));
        }
    }

    #[test]
    fn api_prob_rises_after_digits() {
        let docs = ["cost 3 [x] now", "cost 4 [y] now", "cost 5 [z] now"];
        let lm = NgramLm::train(docs, 2, 0.1);
        let tok = lm.word_tokenizer();
        let api = api_token(tok);
        let after_digit = lm.token_prob(&tok.encode("cost 3"), api);
        let unseen = lm.token_prob(&tok.encode("never"), api);
        // bigram history " 3": one " [" out of one continuation
        let v = tok.vocab_size() as f64;
        assert!((after_digit - 1.1 / (1.0 + 0.1 * v)).abs() < 1e-12);
        assert!((unseen - 1.0 / v).abs() < 1e-12);
        assert!(after_digit > unseen);
    }

    #[test]
    fn table_round_trip_and_mismatch() {
        let lm = NgramLm::train(["a b c", "c b a"], 3, 0.1);
        let table = lm.to_table();
        assert_eq!(NgramLm::from_table(table.clone()).unwrap(), lm);
        let mut bad = table;
        bad.tokenizer_id = "other".into();
        assert!(matches!(
            NgramLm::from_table(bad),
            Err(TableError::TokenizerMismatch { .. })
        ));
    }
}
