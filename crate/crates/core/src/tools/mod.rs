//! Tool registry and the built-in tools.

pub mod calc;
pub mod langid;
pub mod search;

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::call::{ApiCall, ToolKind};
use crate::date::Date;

pub use calc::calc_eval;
pub use langid::{FixedLangId, LangIdResult, LanguageIdentifier, TrigramDetector};
pub use search::{wiki_search, Page, SearchIndex, Section};

/// Language confidence a chunk needs before it counts as foreign, and a
/// translation request before it is forwarded. Compared with `>`.
pub const DEFAULT_LANG_CONFIDENCE: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Failure {
    Timeout,
    Transport(String),
    Unregistered(ToolKind),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Timeout => f.write_str("timed out"),
            Failure::Transport(e) => write!(f, "transport failure: {e}"),
            Failure::Unregistered(t) => write!(f, "tool {t} is not registered"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ToolOutcome {
    Result(String),
    NoResult,
    Failed(Failure),
}

impl ToolOutcome {
    pub fn into_result(self) -> Option<String> {
        match self {
            ToolOutcome::Result(r) => Some(r),
            _ => None,
        }
    }

    fn from_option(r: Option<String>) -> Self {
        r.map_or(ToolOutcome::NoResult, ToolOutcome::Result)
    }
}

/// Per-call context. The calendar reads its "current" date from here.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CallContext {
    pub date: Option<Date>,
}

pub trait Tool: Send + Sync {
    fn kind(&self) -> ToolKind;

    fn requires_input(&self) -> bool {
        true
    }

    fn execute(&self, input: &str, ctx: &CallContext) -> ToolOutcome;
}

/// Collapses whitespace so a result is a single line.
pub fn single_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Default)]
pub struct ToolRegistry {
    tools: BTreeMap<ToolKind, Box<dyn Tool>>,
}

impl ToolRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, tool: Box<dyn Tool>) -> &mut Self {
        self.tools.insert(tool.kind(), tool);
        self
    }

    pub fn with(mut self, tool: impl Tool + 'static) -> Self {
        self.register(Box::new(tool));
        self
    }

    pub fn contains(&self, kind: ToolKind) -> bool {
        self.tools.contains_key(&kind)
    }

    pub fn kinds(&self) -> impl Iterator<Item = ToolKind> + '_ {
        self.tools.keys().copied()
    }

    /// Runs the call; results are normalized to one line and an empty
    /// result counts as no result.
    pub fn execute(&self, call: &ApiCall, ctx: &CallContext) -> ToolOutcome {
        let Some(tool) = self.tools.get(&call.tool) else {
            return ToolOutcome::Failed(Failure::Unregistered(call.tool));
        };
        if tool.requires_input() && call.input.trim().is_empty() {
            return ToolOutcome::NoResult;
        }
        match tool.execute(&call.input, ctx) {
            ToolOutcome::Result(r) => {
                let r = single_line(&r);
                if r.is_empty() {
                    ToolOutcome::NoResult
                } else {
                    ToolOutcome::Result(r)
                }
            }
            other => other,
        }
    }
}

impl fmt::Debug for ToolRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.tools.keys()).finish()
    }
}

pub struct Calculator;

impl Tool for Calculator {
    fn kind(&self) -> ToolKind {
        ToolKind::Calculator
    }

    fn execute(&self, input: &str, _ctx: &CallContext) -> ToolOutcome {
        ToolOutcome::from_option(calc_eval(input))
    }
}

/// "Today is Monday, January 30, 2023."
pub fn calendar_now(date: Date) -> String {
    format!(
        "Today is {}, {} {}, {}.",
        date.weekday().name(),
        date.month_name(),
        date.day(),
        date.year()
    )
}

/// Answers with the context date, or a fixed date when the context has none.
#[derive(Debug, Clone, Default)]
pub struct Calendar {
    pub fallback: Option<Date>,
}

impl Tool for Calendar {
    fn kind(&self) -> ToolKind {
        ToolKind::Calendar
    }

    fn requires_input(&self) -> bool {
        false
    }

    fn execute(&self, _input: &str, ctx: &CallContext) -> ToolOutcome {
        ToolOutcome::from_option(ctx.date.or(self.fallback).map(calendar_now))
    }
}

pub struct WikiSearch {
    pub index: SearchIndex,
    pub snippet_chars: usize,
}

impl WikiSearch {
    pub fn new(index: SearchIndex) -> Self {
        WikiSearch {
            index,
            snippet_chars: search::DEFAULT_SNIPPET_CHARS,
        }
    }
}

impl Tool for WikiSearch {
    fn kind(&self) -> ToolKind {
        ToolKind::WikiSearch
    }

    fn execute(&self, input: &str, _ctx: &CallContext) -> ToolOutcome {
        ToolOutcome::from_option(self.index.search(input, self.snippet_chars))
    }
}

/// Request sent to an external text service (QA or MT).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceRequest {
    pub input: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_lang: Option<String>,
}

/// A remote single-request/single-response text service.
pub trait TextService: Send + Sync {
    /// `Ok(None)` when the service has no answer.
    fn request(&self, req: &ServiceRequest) -> Result<Option<String>, Failure>;
}

/// Fixture-backed service: answers are a pure function of the fixture map.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FixtureService {
    pub answers: BTreeMap<String, String>,
    /// When set, every request fails this way.
    pub fail_with: Option<Failure>,
}

impl FixtureService {
    pub fn new<I, K, V>(answers: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        FixtureService {
            answers: answers
                .into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
            fail_with: None,
        }
    }

    pub fn failing(failure: Failure) -> Self {
        FixtureService {
            answers: BTreeMap::new(),
            fail_with: Some(failure),
        }
    }
}

impl TextService for FixtureService {
    fn request(&self, req: &ServiceRequest) -> Result<Option<String>, Failure> {
        if let Some(f) = &self.fail_with {
            return Err(f.clone());
        }
        Ok(self.answers.get(req.input.trim()).cloned())
    }
}

pub struct QuestionAnswering {
    pub service: Box<dyn TextService>,
}

impl Tool for QuestionAnswering {
    fn kind(&self) -> ToolKind {
        ToolKind::Qa
    }

    fn execute(&self, input: &str, _ctx: &CallContext) -> ToolOutcome {
        qa_ask(self.service.as_ref(), input)
    }
}

pub fn qa_ask(service: &dyn TextService, question: &str) -> ToolOutcome {
    let req = ServiceRequest {
        input: question.into(),
        source_lang: None,
    };
    match service.request(&req) {
        Ok(r) => ToolOutcome::from_option(r),
        Err(f) => ToolOutcome::Failed(f),
    }
}

/// Translation into English with automatic source detection.
pub struct Translation {
    pub service: Box<dyn TextService>,
    pub langid: Box<dyn LanguageIdentifier>,
    pub min_confidence: f64,
}

impl Tool for Translation {
    fn kind(&self) -> ToolKind {
        ToolKind::Mt
    }

    fn execute(&self, input: &str, _ctx: &CallContext) -> ToolOutcome {
        mt_translate(
            self.service.as_ref(),
            self.langid.as_ref(),
            self.min_confidence,
            input,
        )
    }
}

/// English input comes back unchanged; input whose language confidence does
/// not exceed `min_confidence` gets no result.
pub fn mt_translate(
    service: &dyn TextService,
    langid: &dyn LanguageIdentifier,
    min_confidence: f64,
    text: &str,
) -> ToolOutcome {
    let det = langid.detect(text);
    if !(det.confidence > min_confidence) {
        return ToolOutcome::NoResult;
    }
    if det.lang == "en" {
        return ToolOutcome::Result(text.into());
    }
    let req = ServiceRequest {
        input: text.into(),
        source_lang: Some(det.lang),
    };
    match service.request(&req) {
        Ok(r) => ToolOutcome::from_option(r),
        Err(f) => ToolOutcome::Failed(f),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn calendar_strings() {
        let cases = [
            ((2023, 1, 30), "Today is Monday, January 30, 2023."),
            ((2017, 3, 9), "Today is Thursday, March 9, 2017."),
            ((2011, 6, 25), "Today is Saturday, June 25, 2011."),
            ((2013, 4, 19), "Today is Friday, April 19, 2013."),
        ];
        for ((y, m, d), want) in cases {
            assert_eq!(calendar_now(Date::new(y, m, d).unwrap()), want);
        }
    }

    #[test]
    fn registry_dispatch_and_normalization() {
        let reg = ToolRegistry::new()
            .with(Calculator)
            .with(Calendar::default())
            .with(QuestionAnswering {
                service: Box::new(FixtureService::new([("q", "line one\nline two")])),
            });
        let ctx = CallContext {
            date: Some(Date::new(2017, 3, 9).unwrap()),
        };
        assert_eq!(
            reg.execute(&ApiCall::new(ToolKind::Calculator, "27 + 4 * 2"), &ctx),
            ToolOutcome::Result("35".into())
        );
        assert_eq!(
            reg.execute(&ApiCall::new(ToolKind::Calendar, ""), &ctx),
            ToolOutcome::Result("Today is Thursday, March 9, 2017.".into())
        );
        assert_eq!(
            reg.execute(&ApiCall::new(ToolKind::Calendar, ""), &CallContext::default()),
            ToolOutcome::NoResult
        );
        assert_eq!(
            reg.execute(&ApiCall::new(ToolKind::Qa, "q"), &ctx),
            ToolOutcome::Result("line one line two".into())
        );
        assert_eq!(
            reg.execute(&ApiCall::new(ToolKind::Mt, "x"), &ctx),
            ToolOutcome::Failed(Failure::Unregistered(ToolKind::Mt))
        );
    }

    #[test]
    fn qa_fixture_contract() {
        let svc = FixtureService::new([(
            "Where was the Knights of Columbus founded?",
            "New Haven, Connecticut",
        )]);
        assert_eq!(
            qa_ask(&svc, "Where was the Knights of Columbus founded?"),
            ToolOutcome::Result("New Haven, Connecticut".into())
        );
        assert_eq!(qa_ask(&svc, "Who?"), ToolOutcome::NoResult);
        let down = FixtureService::failing(Failure::Timeout);
        assert_eq!(qa_ask(&down, "Who?"), ToolOutcome::Failed(Failure::Timeout));
    }

    #[test]
    fn mt_contract() {
        let svc = FixtureService::new([("sûreté nucléaire", "nuclear safety")]);
        let det = TrigramDetector::default();
        assert_eq!(
            mt_translate(&svc, &det, 0.8, "sûreté nucléaire"),
            ToolOutcome::Result("nuclear safety".into())
        );
        let english = "the people who live here are proud of their city";
        assert_eq!(
            mt_translate(&svc, &det, 0.8, english),
            ToolOutcome::Result(english.into())
        );
        let unsure = FixedLangId(LangIdResult {
            lang: "fr".into(),
            confidence: 0.5,
        });
        assert_eq!(
            mt_translate(&svc, &unsure, 0.8, "sûreté nucléaire"),
            ToolOutcome::NoResult
        );
        let _ = vec![0u8];
    }

    #[test]
    fn wiki_search_snippet() {
        let pages = vec![
            Page {
                id: "1".into(),
                title: "Spin fishing".into(),
                sections: vec![Section {
                    heading: String::new(),
                    text: "Spin fishing is distinguished between fly fishing and bait cast \
                           fishing by the type of rod and reel used. There are two types of \
                           reels used when spin fishing, the open faced reel and the closed \
                           faced reel."
                        .into(),
                }],
            },
            Page {
                id: "2".into(),
                title: "Fly".into(),
                sections: vec![Section {
                    heading: String::new(),
                    text: "Flies are insects with a single pair of wings.".into(),
                }],
            },
            Page {
                id: "3".into(),
                title: "Reel".into(),
                sections: vec![Section {
                    heading: "Film".into(),
                    text: "A reel is a spool used to hold film for a motion picture camera.".into(),
                }],
            },
        ];
        let tool = WikiSearch::new(SearchIndex::build(&pages));
        let got = tool
            .execute("Fishing Reel Types", &CallContext::default())
            .into_result()
            .unwrap();
        assert!(got.starts_with("Spin fishing > Spin fishing is distinguished"), "{got}");
        assert!(got.chars().count() <= 320);
        assert_eq!(
            tool.execute("zzzz qqqq", &CallContext::default()),
            ToolOutcome::NoResult
        );
    }
}
