//! Candidate positions and candidate calls under a per-tool prompt.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::call::{parse_call, ApiCall, ToolKind, CALL_CLOSE};
use crate::lm::{api_token, sample_until_tokens, LanguageModel, SampleParams};
use crate::seed::splitmix64;
use crate::token::{TokenId, Tokenizer};

/// The line of a prompt template that receives the document.
pub const PLACEHOLDER_LINE: &str = "Input: x";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PromptError {
    /// The template needs exactly one `Input: x` line.
    Placeholder(usize),
    /// No demonstration uses `[Tool(`.
    NoDemonstration(ToolKind),
}

impl fmt::Display for PromptError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PromptError::Placeholder(n) => {
                write!(f, "expected one `{PLACEHOLDER_LINE}` line, found {n}")
            }
            PromptError::NoDemonstration(t) => write!(f, "no `[{t}(` demonstration in template"),
        }
    }
}

/// A few-shot annotation prompt P(x).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolPrompt {
    pub tool: ToolKind,
    head: String,
    tail: String,
}

impl ToolPrompt {
    pub fn parse(tool: ToolKind, template: &str) -> Result<Self, PromptError> {
        let mut found = Vec::new();
        let mut at = 0;
        for line in template.split_inclusive('\n') {
            if line.trim_end() == PLACEHOLDER_LINE {
                found.push(at);
            }
            at += line.len();
        }
        if found.len() != 1 {
            return Err(PromptError::Placeholder(found.len()));
        }
        let mut marker = String::from("[");
        marker.push_str(tool.name());
        marker.push('(');
        if !template.contains(marker.as_str()) {
            return Err(PromptError::NoDemonstration(tool));
        }
        let start = found[0] + "Input: ".len();
        Ok(ToolPrompt {
            tool,
            head: template[..start].into(),
            tail: template[start + 1..].trim_end().into(),
        })
    }

    /// The bundled annotation prompt for `tool`.
    pub fn builtin(tool: ToolKind) -> Self {
        let text = match tool {
            ToolKind::Qa => include_str!("../prompts/qa.v1.txt"),
            ToolKind::Calculator => include_str!("../prompts/calculator.v1.txt"),
            ToolKind::WikiSearch => include_str!("../prompts/wikisearch.v1.txt"),
            ToolKind::Mt => include_str!("../prompts/mt.v1.txt"),
            ToolKind::Calendar => include_str!("../prompts/calendar.v1.txt"),
        };
        Self::parse(tool, text).expect("bundled prompts are well formed")
    }

    /// Text before the document.
    pub fn head(&self) -> &str {
        &self.head
    }

    /// Text after the document, ending in `Output:`.
    pub fn tail(&self) -> &str {
        &self.tail
    }

    pub fn render(&self, doc: &str) -> String {
        let mut s = String::with_capacity(self.head.len() + doc.len() + self.tail.len());
        s.push_str(&self.head);
        s.push_str(doc);
        s.push_str(&self.tail);
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    /// τ_s; positions need p > threshold.
    pub threshold: f64,
    /// k
    pub top_k: usize,
    /// m
    pub calls_per_position: usize,
    pub temperature: f64,
    pub max_call_len: usize,
    /// Documents longer than this many tokens are split into windows.
    pub window: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            threshold: 0.05,
            top_k: 5,
            calls_per_position: 5,
            temperature: 1.0,
            max_call_len: 64,
            window: 1024,
        }
    }
}

impl SamplingConfig {
    /// Calculator and translation sample more aggressively.
    pub fn for_tool(tool: ToolKind) -> Self {
        match tool {
            ToolKind::Calculator | ToolKind::Mt => SamplingConfig {
                threshold: 0.0,
                top_k: 20,
                calls_per_position: 10,
                ..Default::default()
            },
            _ => Self::default(),
        }
    }

    pub fn is_valid(&self) -> bool {
        (0.0..=1.0).contains(&self.threshold)
            && self.top_k >= 1
            && self.calls_per_position >= 1
            && self.max_call_len >= 1
            && self.window >= 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidatePosition {
    pub position: usize,
    pub prob: f64,
}

/// Splits a token sequence into consecutive windows of at most `window`
/// tokens whose boundaries fall on piece starts.
pub fn split_windows(tok: &dyn Tokenizer, tokens: &[TokenId], window: usize) -> Vec<Range<usize>> {
    let window = window.max(1);
    let mut out = Vec::new();
    let mut start = 0;
    while start < tokens.len() {
        let mut end = (start + window).min(tokens.len());
        while end < tokens.len() && end > start + 1 && !tok.starts_piece(tokens[end]) {
            end -= 1;
        }
        out.push(start..end);
        start = end;
    }
    out
}

/// One window of a document rendered inside a prompt, ready for position
/// queries. Positions are relative to the window.
#[derive(Debug, Clone)]
pub struct PromptedWindow<'a> {
    pub tokens: &'a [TokenId],
    /// encode(P(x))
    base: Vec<TokenId>,
    /// Tokens of the first piece as they appear after `Output: `.
    lead: Vec<TokenId>,
    /// Length of the first piece in window tokens.
    first_len: usize,
}

impl<'a> PromptedWindow<'a> {
    pub fn new(tok: &dyn Tokenizer, prompt: &ToolPrompt, tokens: &'a [TokenId]) -> Self {
        let text = tok.decode(tokens);
        let base = tok.encode(&prompt.render(&text));
        let first_len = tokens
            .iter()
            .skip(1)
            .position(|&t| tok.starts_piece(t))
            .map_or(tokens.len(), |i| i + 1);
        let mut first = String::from(" ");
        first.push_str(tok.decode(&tokens[..first_len]).trim_start());
        PromptedWindow {
            tokens,
            base,
            lead: tok.encode(&first),
            first_len,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// P(x) followed by x[..p], or `None` inside a byte-fallback piece.
    pub fn context_at(&self, tok: &dyn Tokenizer, p: usize) -> Option<Vec<TokenId>> {
        if p >= self.tokens.len() || (p > 0 && p < self.first_len) || !tok.starts_piece(self.tokens[p]) {
            return None;
        }
        let mut ctx = self.base.clone();
        if p > 0 {
            ctx.extend_from_slice(&self.lead);
            ctx.extend_from_slice(&self.tokens[self.first_len..p]);
        }
        Some(ctx)
    }
}

/// Positions whose call-opening probability exceeds the threshold, at most
/// `top_k` of them (highest first, earlier on ties), in position order.
pub fn sample_positions(
    lm: &dyn LanguageModel,
    window: &PromptedWindow<'_>,
    cfg: &SamplingConfig,
) -> Vec<CandidatePosition> {
    let tok = lm.tokenizer();
    let api = api_token(tok);
    let probs = (0..window.len()).filter_map(|p| {
        let ctx = window.context_at(tok, p)?;
        Some(CandidatePosition {
            position: p,
            prob: lm.token_prob(&ctx, api),
        })
    });
    select_positions(probs, cfg.threshold, cfg.top_k)
}

pub fn select_positions(
    probs: impl IntoIterator<Item = CandidatePosition>,
    threshold: f64,
    top_k: usize,
) -> Vec<CandidatePosition> {
    let mut kept: Vec<CandidatePosition> = probs.into_iter().filter(|c| c.prob > threshold).collect();
    kept.sort_by(|a, b| b.prob.total_cmp(&a.prob).then(a.position.cmp(&b.position)));
    kept.truncate(top_k);
    kept.sort_by_key(|c| c.position);
    kept
}

/// Tokens that end a sampled call.
pub fn close_tokens(tok: &dyn Tokenizer) -> Vec<TokenId> {
    let mut out: Vec<TokenId> = [CALL_CLOSE, " ]"].iter().filter_map(|p| tok.lookup(p)).collect();
    out.dedup();
    out
}

/// Up to `calls_per_position` distinct calls to the prompt's tool sampled
/// after `P(x), x[..p], <API>`.
pub fn sample_calls(
    lm: &dyn LanguageModel,
    window: &PromptedWindow<'_>,
    position: usize,
    tool: ToolKind,
    cfg: &SamplingConfig,
    seed: u64,
) -> Vec<ApiCall> {
    let tok = lm.tokenizer();
    let Some(mut ctx) = window.context_at(tok, position) else {
        return Vec::new();
    };
    ctx.push(api_token(tok));
    let params = SampleParams {
        samples: cfg.calls_per_position,
        max_len: cfg.max_call_len,
        temperature: cfg.temperature,
        seed: splitmix64(seed ^ (position as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)),
    };
    let mut out: Vec<ApiCall> = Vec::new();
    for sample in sample_until_tokens(lm, &ctx, &close_tokens(tok), &params) {
        let text = tok.decode(&sample);
        let body = text.trim_end().strip_suffix(CALL_CLOSE).unwrap_or(&text);
        let Ok(call) = parse_call(body) else {
            continue;
        };
        if call.tool == tool && !out.contains(&call) {
            out.push(call);
        }
    }
    out
}
