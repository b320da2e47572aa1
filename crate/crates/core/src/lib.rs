//! Self-supervised tool-call annotation and tool-intercepting decoding.
//!
//! This crate holds the algorithmic core and builds without `std`:
//!
//! * [`call`]: API-call values, their surface linearization and splicing.
//! * [`token`]: the reference word tokenizer with byte fallback.
//! * [`lm`]: the language-model contract, an additive-smoothing n-gram model
//!   and a scripted test double.
//! * [`sampling`] and [`prefilter`]: candidate positions, candidate calls and
//!   the cheap per-tool document gates.
//! * [`tools`]: calculator, calendar, BM25 search, fixture-backed QA/MT and
//!   language identification.
//! * [`filtering`]: weighted-loss scoring, thresholding and dataset assembly.
//! * [`decoding`]: greedy generation that intercepts and executes calls.
//! * [`evalgen`]: zero-shot prompts, lenient matchers and the temporal
//!   question generator.
//!
//! File formats, HTTP clients, the worker pool and the CLI live in the
//! `selfcall` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod call;
pub mod date;
pub mod decoding;
pub mod evalgen;
pub mod filtering;
pub mod lm;
pub mod numbers;
pub mod prefilter;
pub mod sampling;
pub mod seed;
pub mod token;
pub mod tools;

pub use crate::call::{
    linearize, linearize_with_result, parse_call, splice, AnnotatedExample, ApiCall, Document,
    ExecutedCall, Insertion, ParseError, ToolKind,
};
pub use crate::date::Date;
pub use crate::lm::{LanguageModel, NgramLm, ScriptedLm};
pub use crate::token::{TokenId, TokenSequence, Tokenizer, WordTokenizer};

impl core::error::Error for call::ParseError {}
impl core::error::Error for call::SpliceError {}
impl core::error::Error for date::InvalidDate {}
impl core::error::Error for evalgen::UnknownFamily {}
impl core::error::Error for lm::ScriptError {}
impl core::error::Error for lm::TableError {}
impl core::error::Error for sampling::PromptError {}
impl core::error::Error for tools::Failure {}
