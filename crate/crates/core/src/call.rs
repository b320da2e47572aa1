//! API-call values, surface linearization, parsing and splicing.
//!
//! Calls are rendered with plain-text markers so no vocabulary extension is
//! needed: ` [` opens a call, `->` separates the result and `]` closes it.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::token::{TokenId, TokenSequence, Tokenizer};

pub const CALL_OPEN: &str = " [";
pub const CALL_CLOSE: &str = "]";
pub const RESULT_ARROW: &str = "->";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ToolKind {
    #[serde(rename = "QA")]
    Qa,
    WikiSearch,
    Calculator,
    Calendar,
    #[serde(rename = "MT")]
    Mt,
}

impl ToolKind {
    pub const ALL: [ToolKind; 5] = [
        ToolKind::Qa,
        ToolKind::WikiSearch,
        ToolKind::Calculator,
        ToolKind::Calendar,
        ToolKind::Mt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ToolKind::Qa => "QA",
            ToolKind::WikiSearch => "WikiSearch",
            ToolKind::Calculator => "Calculator",
            ToolKind::Calendar => "Calendar",
            ToolKind::Mt => "MT",
        }
    }

    pub fn from_name(name: &str) -> Option<ToolKind> {
        ToolKind::ALL.into_iter().find(|t| t.name() == name)
    }
}

impl fmt::Display for ToolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A corpus text, the unit of annotation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lang_hint: Option<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            text: text.into(),
            url: None,
            lang_hint: None,
        }
    }

    pub fn with_url(mut self, url: impl Into<String>) -> Self {
        self.url = Some(url.into());
        self
    }

    /// Text must contain something besides whitespace.
    pub fn is_valid(&self) -> bool {
        !self.text.trim().is_empty() && !self.id.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ApiCall {
    pub tool: ToolKind,
    pub input: String,
}

impl ApiCall {
    pub fn new(tool: ToolKind, input: impl Into<String>) -> Self {
        ApiCall {
            tool,
            input: input.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutedCall {
    pub call: ApiCall,
    /// Absent when the tool produced nothing or failed.
    pub result: Option<String>,
}

/// ` [Tool(input)]`
pub fn linearize(call: &ApiCall) -> String {
    let mut s = String::with_capacity(call.input.len() + 16);
    s.push_str(CALL_OPEN);
    push_head(&mut s, call);
    s.push_str(CALL_CLOSE);
    s
}

/// ` [Tool(input) -> result]`. An empty result keeps the arrow.
pub fn linearize_with_result(call: &ApiCall, result: &str) -> String {
    let mut s = String::with_capacity(call.input.len() + result.len() + 20);
    s.push_str(CALL_OPEN);
    push_head(&mut s, call);
    s.push(' ');
    s.push_str(RESULT_ARROW);
    s.push(' ');
    s.push_str(result);
    s.push_str(CALL_CLOSE);
    s
}

fn push_head(s: &mut String, call: &ApiCall) {
    s.push_str(call.tool.name());
    s.push('(');
    s.push_str(&call.input);
    s.push(')');
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseError {
    /// No `Name(...)` structure.
    Malformed,
    UnknownTool(String),
    /// The input contains the closing marker.
    MarkerInInput,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::Malformed => f.write_str("not a Tool(input) call"),
            ParseError::UnknownTool(name) => write!(f, "unregistered tool `{name}`"),
            ParseError::MarkerInInput => f.write_str("call input contains `]`"),
        }
    }
}

/// Parses `Tool(input)`, tolerating surrounding whitespace and one pair of
/// double quotes around the input.
pub fn parse_call(text: &str) -> Result<ApiCall, ParseError> {
    let text = text.trim();
    let open = text.find('(').ok_or(ParseError::Malformed)?;
    let body = text[open + 1..]
        .strip_suffix(')')
        .ok_or(ParseError::Malformed)?;
    let name = text[..open].trim();
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(ParseError::Malformed);
    }
    let tool = ToolKind::from_name(name).ok_or_else(|| ParseError::UnknownTool(name.into()))?;
    let mut input = body.trim();
    if input.len() >= 2 && input.starts_with('"') && input.ends_with('"') {
        input = &input[1..input.len() - 1];
    }
    if input.contains(']') {
        return Err(ParseError::MarkerInInput);
    }
    Ok(ApiCall::new(tool, input))
}

/// Removes the surrounding ` [` and `]` of a linearized call without result.
pub fn strip_markers(text: &str) -> &str {
    let t = text.trim_start();
    let t = t.strip_prefix('[').unwrap_or(t);
    t.strip_suffix(CALL_CLOSE).unwrap_or(t)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpliceError {
    OutOfRange { position: usize, len: usize },
    /// The position falls inside a multi-byte character.
    NotCharBoundary(usize),
}

impl fmt::Display for SpliceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpliceError::OutOfRange { position, len } => {
                write!(f, "position {position} outside 0..={len}")
            }
            SpliceError::NotCharBoundary(p) => write!(f, "position {p} splits a character"),
        }
    }
}

/// Inserts `e` in front of token `position` (0-based; `len` appends).
pub fn splice(
    tok: &dyn Tokenizer,
    tokens: &[TokenId],
    position: usize,
    e: &str,
) -> Result<String, SpliceError> {
    splice_all(tok, tokens, &[(position, e)])
}

/// Applies several insertions right-to-left so earlier positions stay valid.
/// Insertions at the same position keep their given order.
pub fn splice_all(
    tok: &dyn Tokenizer,
    tokens: &[TokenId],
    insertions: &[(usize, &str)],
) -> Result<String, SpliceError> {
    let mut text = tok.decode(tokens);
    let offsets = tok.byte_offsets(tokens);
    let mut order: Vec<usize> = (0..insertions.len()).collect();
    order.sort_by(|&a, &b| insertions[b].0.cmp(&insertions[a].0).then(b.cmp(&a)));
    for i in order {
        let (pos, e) = insertions[i];
        let at = *offsets.get(pos).ok_or(SpliceError::OutOfRange {
            position: pos,
            len: tokens.len(),
        })?;
        if !text.is_char_boundary(at) {
            return Err(SpliceError::NotCharBoundary(pos));
        }
        text.insert_str(at, e);
    }
    Ok(text)
}

/// One kept call placed in front of token `position`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Insertion {
    pub position: usize,
    /// Character (not byte) offset in the original text.
    pub char_pos: usize,
    pub executed: ExecutedCall,
    pub gain: f64,
}

impl Insertion {
    pub fn rendered(&self) -> String {
        linearize_with_result(
            &self.executed.call,
            self.executed.result.as_deref().unwrap_or(""),
        )
    }
}

/// Larger gain wins, then the lexicographically smaller tool name.
pub fn collision_order(a: &Insertion, b: &Insertion) -> Ordering {
    b.gain
        .total_cmp(&a.gain)
        .then_with(|| a.executed.call.tool.name().cmp(b.executed.call.tool.name()))
        .then_with(|| a.executed.call.input.cmp(&b.executed.call.input))
}

/// A document with its kept calls interleaved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedExample {
    pub doc_id: String,
    pub original: TokenSequence,
    pub insertions: Vec<Insertion>,
    pub text: String,
}

impl AnnotatedExample {
    /// Sorts insertions by position, resolves same-position collisions and
    /// renders the augmented text.
    pub fn new(
        tok: &dyn Tokenizer,
        doc_id: impl Into<String>,
        original: TokenSequence,
        mut insertions: Vec<Insertion>,
    ) -> Result<Self, SpliceError> {
        insertions.sort_by(|a, b| a.position.cmp(&b.position).then_with(|| collision_order(a, b)));
        insertions.dedup_by(|later, kept| later.position == kept.position);
        let mut ex = AnnotatedExample {
            doc_id: doc_id.into(),
            original,
            insertions,
            text: String::new(),
        };
        ex.text = ex.render(tok)?;
        Ok(ex)
    }

    pub fn render(&self, tok: &dyn Tokenizer) -> Result<String, SpliceError> {
        let rendered: Vec<String> = self.insertions.iter().map(Insertion::rendered).collect();
        let pairs: Vec<(usize, &str)> = self
            .insertions
            .iter()
            .zip(&rendered)
            .map(|(ins, r)| (ins.position, r.as_str()))
            .collect();
        splice_all(tok, &self.original.tokens, &pairs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::token::WordTokenizer;
    use alloc::vec;

    #[test]
    fn linearize_matches_prompt_surface() {
        assert_eq!(
            linearize(&ApiCall::new(ToolKind::Calculator, "18 + 12 * 3")),
            " [Calculator(18 + 12 * 3)]"
        );
        assert_eq!(linearize(&ApiCall::new(ToolKind::Calendar, "")), " [Calendar()]");
        assert_eq!(linearize(&ApiCall::new(ToolKind::Qa, "")), " [QA()]");
    }

    #[test]
    fn linearize_with_result_keeps_arrow() {
        assert_eq!(
            linearize_with_result(&ApiCall::new(ToolKind::Calculator, "735 / 499"), "1.47"),
            " [Calculator(735 / 499) -> 1.47]"
        );
        assert_eq!(
            linearize_with_result(
                &ApiCall::new(ToolKind::Calendar, ""),
                "Today is Thursday, March 9, 2017."
            ),
            " [Calendar() -> Today is Thursday, March 9, 2017.]"
        );
        assert_eq!(
            linearize_with_result(&ApiCall::new(ToolKind::Qa, "q"), ""),
            " [QA(q) -> ]"
        );
    }

    #[test]
    fn parse_call_cases() {
        assert_eq!(
            parse_call("QA(\"Where was Joe Biden born?\")"),
            Ok(ApiCall::new(ToolKind::Qa, "Where was Joe Biden born?"))
        );
        assert_eq!(parse_call(" Calendar() "), Ok(ApiCall::new(ToolKind::Calendar, "")));
        assert_eq!(
            parse_call("Frobnicate(x)"),
            Err(ParseError::UnknownTool("Frobnicate".into()))
        );
        assert_eq!(parse_call("just words"), Err(ParseError::Malformed));
        assert_eq!(parse_call("QA(a"), Err(ParseError::Malformed));
        assert_eq!(parse_call("(x)"), Err(ParseError::Malformed));
        assert_eq!(parse_call("QA(a]b)"), Err(ParseError::MarkerInInput));
        assert_eq!(
            parse_call(strip_markers(" [WikiSearch(Fishing Reel Types)]")),
            Ok(ApiCall::new(ToolKind::WikiSearch, "Fishing Reel Types"))
        );
    }

    #[test]
    fn splice_nile_row() {
        let text = "The Nile has an approximate length of 6,853 km";
        let tok = WordTokenizer::train([text], 1);
        let ids = tok.encode(text);
        let pos = ids.iter().position(|&t| tok.piece(t) == Some(" 6")).unwrap();
        let e = linearize_with_result(
            &ApiCall::new(ToolKind::Qa, "What is the approximate length of the Nile?"),
            "6,853 km",
        );
        assert_eq!(
            splice(&tok, &ids, pos, &e).unwrap(),
            "The Nile has an approximate length of [QA(What is the approximate length of the Nile?) -> 6,853 km] 6,853 km"
        );
        assert_eq!(splice(&tok, &ids, 0, "").unwrap(), text);
        assert_eq!(
            splice(&tok, &ids, ids.len() + 1, "x"),
            Err(SpliceError::OutOfRange {
                position: ids.len() + 1,
                len: ids.len()
            })
        );
    }

    fn ins(position: usize, tool: ToolKind, gain: f64) -> Insertion {
        Insertion {
            position,
            char_pos: 0,
            executed: ExecutedCall {
                call: ApiCall::new(tool, "q"),
                result: Some("r".into()),
            },
            gain,
        }
    }

    #[test]
    fn collisions_keep_larger_gain_then_tool_name() {
        let tok = WordTokenizer::train(["a b c d"], 1);
        let seq = tok.sequence("a b c d");
        let ex = AnnotatedExample::new(
            &tok,
            "d",
            seq.clone(),
            vec![
                ins(2, ToolKind::Qa, 1.0),
                ins(2, ToolKind::Calculator, 3.0),
                ins(1, ToolKind::Qa, 2.0),
                ins(1, ToolKind::Calendar, 2.0),
            ],
        )
        .unwrap();
        assert_eq!(ex.insertions.len(), 2);
        assert_eq!(ex.insertions[0].executed.call.tool, ToolKind::Calendar);
        assert_eq!(ex.insertions[1].executed.call.tool, ToolKind::Calculator);
        assert_eq!(ex.text, "a [Calendar(q) -> r] b [Calculator(q) -> r] c d");
        assert_eq!(ex.render(&tok).unwrap(), ex.text);
    }
}
