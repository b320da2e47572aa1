use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::LanguageModel;
use crate::token::{TokenId, Tokenizer, WordTokenizer};

/// Which decoded contexts a rule applies to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    EndsWith(String),
    Exact(String),
}

#[derive(Debug, Clone, PartialEq)]
struct Rule {
    pattern: Pattern,
    dist: Vec<(TokenId, f64)>,
}

/// Test double with fixed next-token distributions keyed on the decoded
/// context text.
///
/// An exact-match rule beats any suffix rule; among suffix rules the longest
/// pattern wins and earlier rules win ties. Mass a rule leaves unassigned is
/// spread evenly over the remaining support tokens. Contexts no rule matches
/// get the uniform distribution over the support.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedLm {
    tokenizer: WordTokenizer,
    rules: Vec<Rule>,
    support: Vec<TokenId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptError {
    UnknownPiece(String),
}

impl fmt::Display for ScriptError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScriptError::UnknownPiece(p) => write!(f, "piece {p:?} is not in the vocabulary"),
        }
    }
}

impl ScriptedLm {
    pub fn new(tokenizer: WordTokenizer) -> Self {
        let support = (0..tokenizer.vocab_size() as TokenId).collect();
        ScriptedLm {
            tokenizer,
            rules: Vec::new(),
            support,
        }
    }

    pub fn with_support(mut self, support: Vec<TokenId>) -> Self {
        self.support = support;
        self
    }

    pub fn word_tokenizer(&self) -> &WordTokenizer {
        &self.tokenizer
    }

    pub fn rule(mut self, pattern: Pattern, dist: &[(&str, f64)]) -> Result<Self, ScriptError> {
        let dist = dist
            .iter()
            .map(|&(piece, p)| {
                self.tokenizer
                    .lookup(piece)
                    .map(|t| (t, p))
                    .ok_or_else(|| ScriptError::UnknownPiece(piece.into()))
            })
            .collect::<Result<_, _>>()?;
        self.rules.push(Rule { pattern, dist });
        Ok(self)
    }

    pub fn rule_ids(mut self, pattern: Pattern, dist: Vec<(TokenId, f64)>) -> Self {
        self.rules.push(Rule { pattern, dist });
        self
    }

    /// After any context ending in `after`, emit the tokens of `continuation`
    /// with certainty.
    pub fn script(self, after: &str, continuation: &str) -> Result<Self, ScriptError> {
        self.script_with(after, continuation, 1.0)
    }

    /// Like [`ScriptedLm::script`] but each scripted token gets probability `p`.
    pub fn script_with(
        mut self,
        after: &str,
        continuation: &str,
        p: f64,
    ) -> Result<Self, ScriptError> {
        let tokens = self.tokenizer.encode(continuation);
        let mut context = String::from(after);
        for &t in &tokens {
            if self.tokenizer.piece(t).is_none() {
                return Err(ScriptError::UnknownPiece(continuation.into()));
            }
            self.rules.push(Rule {
                pattern: Pattern::EndsWith(context.clone()),
                dist: vec![(t, p)],
            });
            context.push_str(self.tokenizer.piece(t).unwrap_or_default());
        }
        Ok(self)
    }

    pub fn from_spec(spec: &ScriptSpec) -> Result<Self, ScriptError> {
        let tok = WordTokenizer::from_pieces(spec.pieces.iter().cloned());
        let mut lm = ScriptedLm::new(tok);
        if let Some(support) = &spec.support {
            let ids = support
                .iter()
                .map(|p| {
                    lm.tokenizer
                        .lookup(p)
                        .ok_or_else(|| ScriptError::UnknownPiece(p.clone()))
                })
                .collect::<Result<_, _>>()?;
            lm.support = ids;
        }
        for r in &spec.rules {
            let dist: Vec<(&str, f64)> = r.dist.iter().map(|(p, x)| (p.as_str(), *x)).collect();
            lm = lm.rule(r.pattern.clone(), &dist)?;
        }
        for (after, cont) in &spec.scripts {
            lm = lm.script(after, cont)?;
        }
        Ok(lm)
    }

    fn matching_rule(&self, text: &str) -> Option<&Rule> {
        let mut best: Option<(usize, &Rule)> = None;
        for r in &self.rules {
            let score = match &r.pattern {
                Pattern::Exact(p) if p == text => usize::MAX,
                Pattern::EndsWith(p) if text.ends_with(p.as_str()) => p.len(),
                _ => continue,
            };
            if best.is_none_or(|(s, _)| score > s) {
                best = Some((score, r));
            }
        }
        best.map(|(_, r)| r)
    }
}

impl LanguageModel for ScriptedLm {
    fn tokenizer(&self) -> &dyn Tokenizer {
        &self.tokenizer
    }

    fn next_distribution(&self, context: &[TokenId]) -> Vec<f64> {
        let v = self.tokenizer.vocab_size();
        let mut dist = vec![0.0; v];
        let text = self.tokenizer.decode(context);
        let explicit: &[(TokenId, f64)] = match self.matching_rule(&text) {
            Some(r) => &r.dist,
            None => &[],
        };
        let mut assigned = 0.0;
        for &(t, p) in explicit {
            if let Some(slot) = dist.get_mut(t as usize) {
                *slot += p.max(0.0);
                assigned += p.max(0.0);
            }
        }
        let rest: Vec<TokenId> = self
            .support
            .iter()
            .copied()
            .filter(|&t| (t as usize) < v && !explicit.iter().any(|&(e, _)| e == t))
            .collect();
        if assigned < 1.0 && !rest.is_empty() {
            let share = (1.0 - assigned) / rest.len() as f64;
            for t in rest {
                dist[t as usize] += share;
            }
        } else if assigned > 0.0 {
            for p in dist.iter_mut() {
                *p /= assigned;
            }
        }
        dist
    }
}

/// Serializable form of a [`ScriptedLm`], keyed on piece text.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptSpec {
    pub pieces: Vec<String>,
    #[serde(default)]
    pub support: Option<Vec<String>>,
    #[serde(default)]
    pub rules: Vec<RuleSpec>,
    /// `(after, continuation)` pairs, see [`ScriptedLm::script`].
    #[serde(default)]
    pub scripts: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSpec {
    pub pattern: Pattern,
    pub dist: Vec<(String, f64)>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_beats_longest_suffix() {
        let tok = WordTokenizer::from_pieces(["a", " b", " c"]);
        let lm = ScriptedLm::new(tok)
            .rule(Pattern::EndsWith(" b".into()), &[(" c", 1.0)])
            .unwrap()
            .rule(Pattern::EndsWith("a b".into()), &[("a", 1.0)])
            .unwrap()
            .rule(Pattern::Exact("a a b".into()), &[(" b", 1.0)])
            .unwrap();
        let t = lm.word_tokenizer();
        let id = |p| t.lookup(p).unwrap() as usize;
        assert_eq!(lm.next_distribution(&t.encode("a b"))[id("a")], 1.0);
        assert_eq!(lm.next_distribution(&t.encode("a a b"))[id(" b")], 1.0);
        assert_eq!(lm.next_distribution(&t.encode("b b"))[id(" c")], 1.0);
    }

    #[test]
    fn leftover_mass_is_uniform() {
        let tok = WordTokenizer::from_pieces(["a"]);
        let lm = ScriptedLm::new(tok.clone()).rule(Pattern::Exact("".into()), &[("a", 0.5)]).unwrap();
        let d = lm.next_distribution(&[]);
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let other = 0.5 / (tok.vocab_size() - 1) as f64;
        assert!((d[tok.lookup("]").unwrap() as usize] - other).abs() < 1e-15);
    }

    #[test]
    fn spec_builds_same_model() {
        let spec = ScriptSpec {
            pieces: vec!["a".into(), " b".into()],
            support: None,
            rules: vec![RuleSpec {
                pattern: Pattern::EndsWith("a".into()),
                dist: vec![(" b".into(), 0.7)],
            }],
            scripts: vec![(" b".into(), " b b".into())],
        };
        let lm = ScriptedLm::from_spec(&spec).unwrap();
        let manual = ScriptedLm::new(WordTokenizer::from_pieces(["a", " b"]))
            .rule(Pattern::EndsWith("a".into()), &[(" b", 0.7)])
            .unwrap()
            .script(" b", " b b")
            .unwrap();
        assert_eq!(lm, manual);
    }
}
