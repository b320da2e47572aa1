//! Cheap per-tool document gates applied before sampling.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::call::{ApiCall, Document, ToolKind};
use crate::date::Date;
use crate::numbers::{approx_eq, find_numbers, NumberSpan};
use crate::seed::unit_draw;
use crate::token::{TokenId, Tokenizer};
use crate::tools::{LanguageIdentifier, DEFAULT_LANG_CONFIDENCE};

pub const CALC_MARKERS: [&str; 5] = ["=", "equals", "equal to", "total of", "average of"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrefilterConfig {
    /// Token window for the arithmetic-triple rule.
    pub calc_window: usize,
    /// Keep rate for documents that only have three or more numbers.
    pub calc_subsample: f64,
    pub calc_tolerance: f64,
    /// Chunk size in tokens for foreign-text detection.
    pub mt_chunk: usize,
    /// Compared with `>`.
    pub mt_confidence: f64,
}

impl Default for PrefilterConfig {
    fn default() -> Self {
        PrefilterConfig {
            calc_window: 100,
            calc_subsample: 0.01,
            calc_tolerance: 1e-6,
            mt_chunk: 10,
            mt_confidence: DEFAULT_LANG_CONFIDENCE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateReason {
    /// One number is another two combined by `+ - * /`.
    ArithmeticTriple,
    /// A marker such as `equals` followed by a number.
    MarkerNumber,
    /// Three or more numbers, kept by the seeded subsample.
    NumberSubsample,
    UrlDate,
    ForeignChunk,
    /// Tools without a gate.
    Ungated,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrefilterOutcome {
    pub keep: bool,
    pub reason: Option<GateReason>,
    /// Document date for the calendar tool.
    pub date: Option<Date>,
    /// Byte ranges of foreign chunks for the translation tool.
    pub foreign_spans: Vec<Range<usize>>,
}

impl PrefilterOutcome {
    fn kept(reason: GateReason) -> Self {
        PrefilterOutcome {
            keep: true,
            reason: Some(reason),
            ..Default::default()
        }
    }
}

/// Decides whether `doc` is worth sampling `tool` calls for.
pub fn prefilter(
    doc: &Document,
    tool: ToolKind,
    tok: &dyn Tokenizer,
    langid: &dyn LanguageIdentifier,
    cfg: &PrefilterConfig,
    seed: u64,
) -> PrefilterOutcome {
    match tool {
        ToolKind::Qa | ToolKind::WikiSearch => PrefilterOutcome::kept(GateReason::Ungated),
        ToolKind::Calculator => calculator_gate(&doc.text, tok, cfg, seed, &doc.id)
            .map(PrefilterOutcome::kept)
            .unwrap_or_default(),
        ToolKind::Calendar => match doc.url.as_deref().and_then(url_date) {
            Some(d) => PrefilterOutcome {
                date: Some(d),
                ..PrefilterOutcome::kept(GateReason::UrlDate)
            },
            None => PrefilterOutcome::default(),
        },
        ToolKind::Mt => {
            let spans = foreign_chunks(&doc.text, tok, langid, cfg);
            if spans.is_empty() {
                PrefilterOutcome::default()
            } else {
                PrefilterOutcome {
                    foreign_spans: spans,
                    ..PrefilterOutcome::kept(GateReason::ForeignChunk)
                }
            }
        }
    }
}

/// The three calculator criteria, tried in order.
pub fn calculator_gate(
    text: &str,
    tok: &dyn Tokenizer,
    cfg: &PrefilterConfig,
    seed: u64,
    doc_id: &str,
) -> Option<GateReason> {
    let numbers = find_numbers(text);
    if numbers.len() >= 3 && arithmetic_triple(text, &numbers, tok, cfg) {
        return Some(GateReason::ArithmeticTriple);
    }
    if marker_followed_by_number(text, &numbers) {
        return Some(GateReason::MarkerNumber);
    }
    if numbers.len() >= 3 && unit_draw(seed, &format!("calculator/{doc_id}")) < cfg.calc_subsample {
        return Some(GateReason::NumberSubsample);
    }
    None
}

/// Token index containing each number's first byte.
fn token_positions(text: &str, numbers: &[NumberSpan], tok: &dyn Tokenizer) -> Vec<usize> {
    let tokens: Vec<TokenId> = tok.encode(text);
    let offsets = tok.byte_offsets(&tokens);
    numbers
        .iter()
        .map(|n| offsets.partition_point(|&o| o <= n.start).saturating_sub(1))
        .collect()
}

fn combines(a: f64, b: f64, c: f64, tol: f64) -> bool {
    let mut r = [a + b, a - b, a * b, f64::NAN];
    if b != 0.0 {
        r[3] = a / b;
    }
    r.iter().any(|&v| v.is_finite() && approx_eq(v, c, tol))
}

/// Some three numbers spanning fewer than `calc_window` tokens satisfy
/// `c = a op b` for an ordered pair (a, b).
pub fn arithmetic_triple(
    text: &str,
    numbers: &[NumberSpan],
    tok: &dyn Tokenizer,
    cfg: &PrefilterConfig,
) -> bool {
    let pos = token_positions(text, numbers, tok);
    let n = numbers.len();
    for i in 0..n {
        for j in i + 1..n {
            if pos[j] - pos[i] >= cfg.calc_window {
                break;
            }
            for k in j + 1..n {
                if pos[k] - pos[i] >= cfg.calc_window {
                    break;
                }
                let v = [numbers[i].value, numbers[j].value, numbers[k].value];
                for (a, b, c) in [(0, 1, 2), (1, 0, 2), (0, 2, 1), (2, 0, 1), (1, 2, 0), (2, 1, 0)] {
                    if combines(v[a], v[b], v[c], cfg.calc_tolerance) {
                        return true;
                    }
                }
            }
        }
    }
    false
}

/// A calculator marker, optional whitespace, then a number. Word markers
/// match ASCII case-insensitively at a word start.
pub fn marker_followed_by_number(text: &str, numbers: &[NumberSpan]) -> bool {
    let lower = text.to_ascii_lowercase();
    let b = lower.as_bytes();
    for marker in CALC_MARKERS {
        let wordy = marker.as_bytes()[0].is_ascii_alphabetic();
        let mut from = 0;
        while let Some(rel) = lower[from..].find(marker) {
            let at = from + rel;
            from = at + 1;
            if wordy && at > 0 && (b[at - 1].is_ascii_alphanumeric() || b[at - 1] >= 0x80) {
                continue;
            }
            let mut end = at + marker.len();
            if wordy && b.get(end).is_some_and(|c| c.is_ascii_alphanumeric()) {
                continue;
            }
            while end < b.len() && (b[end] as char).is_ascii_whitespace() {
                end += 1;
            }
            if numbers.iter().any(|n| n.start == end) {
                return true;
            }
        }
    }
    false
}

/// First valid `YYYY<sep>M<sep>D` date in a URL, `sep` one of `/ - _ .`.
pub fn url_date(url: &str) -> Option<Date> {
    let b = url.as_bytes();
    let digits_at = |i: usize| -> usize { b[i..].iter().take_while(|c| c.is_ascii_digit()).count() };
    let mut i = 0;
    while i < b.len() {
        if !b[i].is_ascii_digit() || (i > 0 && b[i - 1].is_ascii_digit()) {
            i += 1;
            continue;
        }
        let run = digits_at(i);
        if run == 4 {
            if let Some(d) = date_after_year(b, i, digits_at) {
                return Some(d);
            }
        }
        i += run;
    }
    None
}

fn date_after_year(b: &[u8], i: usize, digits_at: impl Fn(usize) -> usize) -> Option<Date> {
    let num = |s: usize, len: usize| -> u32 {
        b[s..s + len].iter().fold(0, |acc, &c| acc * 10 + (c - b'0') as u32)
    };
    let year = num(i, 4);
    let sep = *b.get(i + 4)?;
    if !matches!(sep, b'/' | b'-' | b'_' | b'.') {
        return None;
    }
    let m_at = i + 5;
    let m_len = if m_at < b.len() { digits_at(m_at) } else { 0 };
    if !(1..=2).contains(&m_len) || b.get(m_at + m_len) != Some(&sep) {
        return None;
    }
    let d_at = m_at + m_len + 1;
    let d_len = if d_at < b.len() { digits_at(d_at) } else { 0 };
    if !(1..=2).contains(&d_len) {
        return None;
    }
    if !(1900..=2099).contains(&year) {
        return None;
    }
    Date::new(year as i32, num(m_at, m_len), num(d_at, d_len)).ok()
}

/// Byte ranges of `mt_chunk`-token chunks in a non-English language, each
/// with an English chunk directly before and after it.
pub fn foreign_chunks(
    text: &str,
    tok: &dyn Tokenizer,
    langid: &dyn LanguageIdentifier,
    cfg: &PrefilterConfig,
) -> Vec<Range<usize>> {
    let tokens = tok.encode(text);
    let offsets = tok.byte_offsets(&tokens);
    let size = cfg.mt_chunk.max(1);
    let mut bounds = Vec::new();
    let mut t = 0;
    while t < tokens.len() {
        bounds.push(offsets[t]);
        t += size;
        while t < tokens.len() && !tok.starts_piece(tokens[t]) {
            t += 1;
        }
    }
    bounds.push(text.len());
    let chunks: Vec<Range<usize>> = bounds.windows(2).map(|w| w[0]..w[1]).collect();
    let labels: Vec<Option<(String, f64)>> = chunks
        .iter()
        .map(|r| {
            let s = &text[r.clone()];
            if !s.chars().any(char::is_alphabetic) {
                return None;
            }
            let d = langid.detect(s);
            Some((d.lang, d.confidence))
        })
        .collect();
    let english = |l: &Option<(String, f64)>| l.as_ref().is_some_and(|(lang, _)| lang == "en");
    let mut out = Vec::new();
    for c in 1..chunks.len().saturating_sub(1) {
        let foreign = labels[c]
            .as_ref()
            .is_some_and(|(lang, conf)| lang != "en" && lang != "und" && *conf > cfg.mt_confidence);
        if foreign && english(&labels[c - 1]) && english(&labels[c + 1]) {
            out.push(chunks[c].clone());
        }
    }
    out
}

/// Drops translation calls whose input shows up after the call position but
/// not before it.
pub fn mt_postfilter(tok: &dyn Tokenizer, tokens: &[TokenId], call: &ApiCall, position: usize) -> bool {
    let position = position.min(tokens.len());
    let before = tok.decode(&tokens[..position]);
    if before.contains(call.input.as_str()) {
        return true;
    }
    !tok.decode(&tokens[position..]).contains(call.input.as_str())
}
