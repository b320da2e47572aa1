//! Weighted-loss scoring of executed calls, thresholding and assembly of the
//! augmented dataset.
//!
//! For a call c with result r at position p over tokens x:
//!
//! ```text
//! L(z)  = −Σ_t w_t · ln p(x[p+t] | z ++ x[..p+t])
//! L⁺    = L(e(c, r))
//! L⁻    = min(L(ε), L(e(c, ε)))
//! gain  = L⁻ − L⁺
//! ```
//!
//! The call text z is a prefix of the whole sequence, not spliced at p.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::call::{
    linearize_with_result, AnnotatedExample, ExecutedCall, Insertion, SpliceError, ToolKind,
};
use crate::lm::LanguageModel;
use crate::token::{TokenId, TokenSequence, Tokenizer};

/// w̃_t = max(0, 1 − decay·t), normalized to sum to one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightScheme {
    decay: Ratio<i64>,
    weights: Vec<Ratio<i64>>,
}

impl Default for WeightScheme {
    fn default() -> Self {
        Self::new(Ratio::new(1, 5))
    }
}

impl WeightScheme {
    /// `decay` must lie in (0, 1].
    pub fn new(decay: Ratio<i64>) -> Self {
        assert!(decay > Ratio::zero() && decay <= Ratio::from_integer(1), "decay outside (0, 1]");
        let one = Ratio::from_integer(1);
        let raw: Vec<Ratio<i64>> = (0..)
            .map(|t| one - decay * Ratio::from_integer(t))
            .take_while(|w| *w > Ratio::zero())
            .collect();
        let total: Ratio<i64> = raw.iter().copied().sum();
        WeightScheme {
            decay,
            weights: raw.into_iter().map(|w| w / total).collect(),
        }
    }

    /// Nearest rational with a denominator of at most 10⁶.
    pub fn from_decay(decay: f64) -> Option<Self> {
        if !(decay > 0.0 && decay <= 1.0) {
            return None;
        }
        let r = Ratio::new(libm::round(decay * 1e6) as i64, 1_000_000);
        (r > Ratio::zero()).then(|| Self::new(r))
    }

    pub fn decay(&self) -> Ratio<i64> {
        self.decay
    }

    /// Exact normalized weights, one per offset in the support.
    pub fn weights(&self) -> &[Ratio<i64>] {
        &self.weights
    }

    pub fn weights_f64(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w.to_f64().unwrap_or(0.0)).collect()
    }

    pub fn support(&self) -> usize {
        self.weights.len()
    }
}

/// L over tokens `x[p..]` given `prefix ++ x[..p]`. `None` when `p` is past
/// the last token.
pub fn weighted_loss_tokens(
    lm: &dyn LanguageModel,
    prefix: &[TokenId],
    x: &[TokenId],
    p: usize,
    weights: &[f64],
) -> Option<f64> {
    if p >= x.len() {
        return None;
    }
    let mut ctx = Vec::with_capacity(prefix.len() + p + weights.len());
    ctx.extend_from_slice(prefix);
    ctx.extend_from_slice(&x[..p]);
    let mut loss = 0.0;
    for (t, &w) in weights.iter().enumerate() {
        let Some(&next) = x.get(p + t) else {
            break;
        };
        loss -= w * libm::log(lm.token_prob(&ctx, next));
        ctx.push(next);
    }
    Some(loss)
}

pub fn weighted_loss(
    lm: &dyn LanguageModel,
    prefix: &str,
    x: &[TokenId],
    p: usize,
    scheme: &WeightScheme,
) -> Option<f64> {
    let prefix = if prefix.is_empty() {
        Vec::new()
    } else {
        lm.tokenizer().encode(prefix)
    };
    weighted_loss_tokens(lm, &prefix, x, p, &scheme.weights_f64())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCall {
    pub position: usize,
    pub executed: ExecutedCall,
    pub l_plus: f64,
    pub l_minus: f64,
    /// L(ε)
    pub l_empty: f64,
    pub gain: f64,
}

/// Scores calls over one token sequence, computing L(ε) once per position.
pub struct Scorer<'a> {
    lm: &'a dyn LanguageModel,
    tokens: &'a [TokenId],
    weights: Vec<f64>,
    empty: BTreeMap<usize, f64>,
}

impl<'a> Scorer<'a> {
    pub fn new(lm: &'a dyn LanguageModel, tokens: &'a [TokenId], scheme: &WeightScheme) -> Self {
        Scorer {
            lm,
            tokens,
            weights: scheme.weights_f64(),
            empty: BTreeMap::new(),
        }
    }

    pub fn empty_loss(&mut self, p: usize) -> Option<f64> {
        if let Some(&l) = self.empty.get(&p) {
            return Some(l);
        }
        let l = weighted_loss_tokens(self.lm, &[], self.tokens, p, &self.weights)?;
        self.empty.insert(p, l);
        Some(l)
    }

    fn loss_with(&self, z: &str, p: usize) -> Option<f64> {
        let prefix = self.lm.tokenizer().encode(z);
        weighted_loss_tokens(self.lm, &prefix, self.tokens, p, &self.weights)
    }

    /// `None` when `p` is past the last token. A missing result scores as
    /// the empty result.
    pub fn score(&mut self, p: usize, executed: &ExecutedCall) -> Option<ScoredCall> {
        let l_empty = self.empty_loss(p)?;
        let result = executed.result.as_deref().unwrap_or("");
        let l_plus = self.loss_with(&linearize_with_result(&executed.call, result), p)?;
        let l_no_result = self.loss_with(&linearize_with_result(&executed.call, ""), p)?;
        let l_minus = l_empty.min(l_no_result);
        Some(ScoredCall {
            position: p,
            executed: executed.clone(),
            l_plus,
            l_minus,
            l_empty,
            gain: l_minus - l_plus,
        })
    }
}

pub fn score_call(
    lm: &dyn LanguageModel,
    tokens: &[TokenId],
    p: usize,
    executed: &ExecutedCall,
    scheme: &WeightScheme,
) -> Option<ScoredCall> {
    Scorer::new(lm, tokens, scheme).score(p, executed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    /// τ_f for tools without an override.
    pub threshold: f64,
    pub overrides: BTreeMap<ToolKind, f64>,
    /// Maximum number of examples per tool.
    pub cap_per_tool: usize,
    pub decay: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            threshold: 1.0,
            overrides: [(ToolKind::Calculator, 0.5), (ToolKind::Mt, 0.5)].into_iter().collect(),
            cap_per_tool: 25_000,
            decay: 0.2,
        }
    }
}

impl FilterConfig {
    pub fn threshold_for(&self, tool: ToolKind) -> f64 {
        self.overrides.get(&tool).copied().unwrap_or(self.threshold)
    }

    pub fn is_valid(&self) -> bool {
        self.threshold > 0.0
            && self.overrides.values().all(|&t| t > 0.0)
            && self.decay > 0.0
            && self.decay <= 1.0
    }

    pub fn scheme(&self) -> WeightScheme {
        WeightScheme::from_decay(self.decay).unwrap_or_default()
    }
}

/// Orders calls for the same position: larger gain, then tool name, then
/// input.
fn better(a: &ScoredCall, b: &ScoredCall) -> core::cmp::Ordering {
    b.gain
        .total_cmp(&a.gain)
        .then_with(|| a.executed.call.tool.name().cmp(b.executed.call.tool.name()))
        .then_with(|| a.executed.call.input.cmp(&b.executed.call.input))
}

/// Calls with gain ≥ their tool's threshold, one per position, by position.
pub fn filter_calls(scored: &[ScoredCall], cfg: &FilterConfig) -> Vec<ScoredCall> {
    let mut kept: Vec<ScoredCall> = scored
        .iter()
        .filter(|s| s.gain >= cfg.threshold_for(s.executed.call.tool))
        .cloned()
        .collect();
    kept.sort_by(|a, b| a.position.cmp(&b.position).then_with(|| better(a, b)));
    kept.dedup_by(|later, first| later.position == first.position);
    kept
}

/// All scored calls of one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocScores {
    pub doc_id: String,
    pub original: TokenSequence,
    pub scored: Vec<ScoredCall>,
}

pub const STATS_THRESHOLDS: [f64; 3] = [0.5, 1.0, 2.0];

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ToolStats {
    pub tool: Option<ToolKind>,
    /// Documents with at least one call at each of [`STATS_THRESHOLDS`].
    pub examples_at: [usize; 3],
    pub calls_at: [usize; 3],
    /// Documents and calls in the final dataset.
    pub examples: usize,
    pub calls: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetStats {
    pub documents: usize,
    pub examples: usize,
    pub tools: Vec<ToolStats>,
}

impl DatasetStats {
    pub fn tool(&self, tool: ToolKind) -> Option<&ToolStats> {
        self.tools.iter().find(|t| t.tool == Some(tool))
    }

    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:<12} {:>10} {:>10} {:>10} {:>10}\n",
            "API", "τ_f=0.5", "τ_f=1.0", "τ_f=2.0", "kept"
        );
        for t in &self.tools {
            let name = t.tool.map_or("?", ToolKind::name);
            s.push_str(&format!(
                "{:<12} {:>10} {:>10} {:>10} {:>10}\n",
                name, t.examples_at[0], t.examples_at[1], t.examples_at[2], t.examples
            ));
        }
        s.push_str(&format!("documents {} examples {}\n", self.documents, self.examples));
        s
    }
}

/// Thresholds, caps and merges per-document calls into augmented examples
/// ordered by document id.
pub fn build_dataset(
    tok: &dyn Tokenizer,
    docs: &[DocScores],
    cfg: &FilterConfig,
) -> Result<(Vec<AnnotatedExample>, DatasetStats), SpliceError> {
    let mut stats = DatasetStats {
        documents: docs.len(),
        ..Default::default()
    };
    let kept: Vec<Vec<ScoredCall>> = docs.iter().map(|d| filter_all(&d.scored, cfg)).collect();

    for tool in ToolKind::ALL {
        let mut ts = ToolStats {
            tool: Some(tool),
            ..Default::default()
        };
        for d in docs {
            for (i, &tau) in STATS_THRESHOLDS.iter().enumerate() {
                let n = d
                    .scored
                    .iter()
                    .filter(|s| s.executed.call.tool == tool && s.gain >= tau)
                    .count();
                ts.calls_at[i] += n;
                ts.examples_at[i] += usize::from(n > 0);
            }
        }
        stats.tools.push(ts);
    }

    // per-tool cap: documents ranked by their best gain for that tool
    let mut allowed: BTreeMap<(usize, ToolKind), ()> = BTreeMap::new();
    for tool in ToolKind::ALL {
        let mut ranked: Vec<(f64, usize)> = kept
            .iter()
            .enumerate()
            .filter_map(|(i, calls)| {
                calls
                    .iter()
                    .filter(|s| s.executed.call.tool == tool)
                    .map(|s| s.gain)
                    .max_by(f64::total_cmp)
                    .map(|g| (g, i))
            })
            .collect();
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| docs[a.1].doc_id.cmp(&docs[b.1].doc_id)));
        for &(_, i) in ranked.iter().take(cfg.cap_per_tool) {
            allowed.insert((i, tool), ());
        }
    }

    let mut order: Vec<usize> = (0..docs.len()).collect();
    order.sort_by(|&a, &b| docs[a].doc_id.cmp(&docs[b].doc_id));
    let mut out = Vec::new();
    for i in order {
        let d = &docs[i];
        let calls: Vec<&ScoredCall> = kept[i]
            .iter()
            .filter(|s| allowed.contains_key(&(i, s.executed.call.tool)))
            .collect();
        if calls.is_empty() {
            continue;
        }
        let offsets = tok.byte_offsets(&d.original.tokens);
        let text = tok.decode(&d.original.tokens);
        let insertions: Vec<Insertion> = calls
            .iter()
            .map(|s| Insertion {
                position: s.position,
                char_pos: offsets
                    .get(s.position)
                    .map_or(0, |&b| text.get(..b).map_or(0, |t| t.chars().count())),
                executed: s.executed.clone(),
                gain: s.gain,
            })
            .collect();
        let ex = AnnotatedExample::new(tok, d.doc_id.clone(), d.original.clone(), insertions)?;
        for ins in &ex.insertions {
            if let Some(ts) = stats.tools.iter_mut().find(|t| t.tool == Some(ins.executed.call.tool)) {
                ts.calls += 1;
            }
        }
        for tool in ToolKind::ALL {
            if ex.insertions.iter().any(|s| s.executed.call.tool == tool) {
                if let Some(ts) = stats.tools.iter_mut().find(|t| t.tool == Some(tool)) {
                    ts.examples += 1;
                }
            }
        }
        out.push(ex);
    }
    stats.examples = out.len();
    Ok((out, stats))
}

/// Every call clearing its threshold, before collision resolution.
fn filter_all(scored: &[ScoredCall], cfg: &FilterConfig) -> Vec<ScoredCall> {
    scored
        .iter()
        .filter(|s| s.gain >= cfg.threshold_for(s.executed.call.tool))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::call::ApiCall;
    use crate::lm::ScriptedLm;
    use crate::token::WordTokenizer;
    use alloc::vec;

    #[test]
    fn default_weights_are_exact() {
        let w = WeightScheme::default();
        let expect: Vec<Ratio<i64>> = [(1, 3), (4, 15), (1, 5), (2, 15), (1, 15)]
            .iter()
            .map(|&(n, d)| Ratio::new(n, d))
            .collect();
        assert_eq!(w.weights(), &expect[..]);
        assert_eq!(w.weights().iter().copied().sum::<Ratio<i64>>(), Ratio::from_integer(1));
        assert_eq!(w.support(), 5);
        assert_eq!(WeightScheme::from_decay(0.2).unwrap(), w);
        assert_eq!(WeightScheme::from_decay(0.3).unwrap().support(), 4);
    }

    fn scored(pos: usize, tool: ToolKind, gain: f64) -> ScoredCall {
        ScoredCall {
            position: pos,
            executed: ExecutedCall {
                call: ApiCall::new(tool, "q"),
                result: Some("r".into()),
            },
            l_plus: 0.0,
            l_minus: gain,
            l_empty: gain,
            gain,
        }
    }

    #[test]
    fn threshold_is_inclusive() {
        let cfg = FilterConfig::default();
        let s = [
            scored(1, ToolKind::Qa, 5.49),
            scored(2, ToolKind::Qa, -0.41),
            scored(3, ToolKind::Qa, 1.0),
        ];
        let kept: Vec<usize> = filter_calls(&s, &cfg).iter().map(|s| s.position).collect();
        assert_eq!(kept, [1, 3]);
    }

    #[test]
    fn single_token_loss() {
        let tok = WordTokenizer::from_pieces(["a", " b"]);
        let p = libm::exp(-2.0);
        let lm = ScriptedLm::new(tok)
            .rule(crate::lm::Pattern::EndsWith("a".into()), &[(" b", p)])
            .unwrap();
        let x = lm.word_tokenizer().encode("a b");
        let l = weighted_loss(&lm, "", &x, 1, &WeightScheme::default()).unwrap();
        assert!((l - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(weighted_loss(&lm, "", &x, 2, &WeightScheme::default()), None);
    }

    #[test]
    fn cap_keeps_highest_gains() {
        let tok = WordTokenizer::from_pieces(["a", " b", " c"]);
        let docs: Vec<DocScores> = [("d1", 3.0), ("d2", 2.0), ("d3", 1.5)]
            .iter()
            .map(|&(id, g)| DocScores {
                doc_id: id.into(),
                original: tok.sequence("a b c"),
                scored: vec![scored(1, ToolKind::Qa, g)],
            })
            .collect();
        let cfg = FilterConfig {
            cap_per_tool: 2,
            ..Default::default()
        };
        let (ex, stats) = build_dataset(&tok, &docs, &cfg).unwrap();
        let ids: Vec<&str> = ex.iter().map(|e| e.doc_id.as_str()).collect();
        assert_eq!(ids, ["d1", "d2"]);
        let qa = stats.tool(ToolKind::Qa).unwrap();
        assert_eq!(qa.examples_at, [3, 3, 2]);
        assert_eq!(qa.examples, 2);
        assert_eq!(ex[0].text, "a [QA(q) -> r] b c");
    }

    #[test]
    fn multiple_calls_merge_and_empty_docs_drop() {
        let tok = WordTokenizer::from_pieces(["a", " b", " c", " d", " e"]);
        let docs = vec![
            DocScores {
                doc_id: "one".into(),
                original: tok.sequence("a b c d e"),
                scored: vec![scored(1, ToolKind::Qa, 2.0), scored(3, ToolKind::Qa, 1.2)],
            },
            DocScores {
                doc_id: "two".into(),
                original: tok.sequence("a b"),
                scored: vec![scored(1, ToolKind::Qa, 0.3)],
            },
        ];
        let (ex, stats) = build_dataset(&tok, &docs, &FilterConfig::default()).unwrap();
        assert_eq!(ex.len(), 1);
        assert_eq!(ex[0].insertions.len(), 2);
        assert_eq!(stats.examples, 1);
        let (none, stats) = build_dataset(&tok, &[], &FilterConfig::default()).unwrap();
        assert!(none.is_empty());
        assert!(stats.tools.iter().all(|t| t.examples_at == [0; 3]));
    }
}
