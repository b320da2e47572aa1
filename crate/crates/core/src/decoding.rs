//! Greedy generation that intercepts and executes tool calls.
//!
//! A call starts whenever the call-opening token ranks among the `k_api`
//! most likely next tokens and the call budget is not spent. The model then
//! writes the call greedily up to `->`; the call is executed and
//! ` result]` is appended before generation resumes.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::call::{parse_call, ApiCall, ToolKind, CALL_CLOSE, RESULT_ARROW};
use crate::lm::{api_token, argmax, LanguageModel};
use crate::sampling::close_tokens;
use crate::token::{TokenId, Tokenizer};
use crate::tools::{CallContext, ToolOutcome, ToolRegistry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecodeConfig {
    pub k_api: usize,
    pub max_api_calls: usize,
    pub api_disabled: bool,
    /// Tokens chosen by the model, call tokens included.
    pub max_tokens: usize,
    /// In-flight call length before the call is abandoned.
    pub max_call_tokens: usize,
    /// Pieces that end generation.
    pub stop: Vec<String>,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            k_api: 10,
            max_api_calls: 1,
            api_disabled: false,
            max_tokens: 128,
            max_call_tokens: 64,
            stop: Vec::new(),
        }
    }
}

/// Microsecond clock for call latency.
pub trait Clock {
    fn now_us(&self) -> u64;
}

/// Always reads zero, keeping traces reproducible.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now_us(&self) -> u64 {
        0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiEvent {
    /// Byte offset in the generated text where the call begins.
    pub position: usize,
    pub call: ApiCall,
    pub result: Option<String>,
    pub failed: bool,
    pub latency_us: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MaxTokens,
    Stop,
    /// The model put no mass on any allowed token.
    Exhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeTrace {
    /// Generated continuation, without the prompt.
    pub text: String,
    pub events: Vec<ApiEvent>,
    pub termination: Termination,
}

/// 0-based rank of `token` with ties broken by id.
pub fn rank_of(dist: &[f64], token: TokenId) -> usize {
    let p = dist.get(token as usize).copied().unwrap_or(0.0);
    dist.iter()
        .enumerate()
        .filter(|&(j, &q)| q > p || (q == p && (j as TokenId) < token))
        .count()
}

pub fn in_top_k(dist: &[f64], token: TokenId, k: usize) -> bool {
    dist.get(token as usize).is_some_and(|&p| p > 0.0) && rank_of(dist, token) < k
}

struct Masks {
    /// Tokens that contain the opening marker outright.
    always: Vec<TokenId>,
    /// Tokens that start with `[`, masked after whitespace.
    after_space: Vec<TokenId>,
}

impl Masks {
    fn new(tok: &dyn Tokenizer) -> Self {
        let mut always = Vec::new();
        let mut after_space = Vec::new();
        for id in 0..tok.vocab_size() as TokenId {
            let text = match tok.piece(id) {
                Some(p) => String::from(p),
                None => tok.decode(&[id]),
            };
            if text.contains(crate::call::CALL_OPEN) {
                always.push(id);
            } else if text.starts_with('[') {
                after_space.push(id);
            }
        }
        Masks { always, after_space }
    }

    fn apply(&self, dist: &mut [f64], after_whitespace: bool) {
        for &t in &self.always {
            dist[t as usize] = 0.0;
        }
        if after_whitespace {
            for &t in &self.after_space {
                dist[t as usize] = 0.0;
            }
        }
    }
}

pub fn generate(
    lm: &dyn LanguageModel,
    prompt: &str,
    tools: &ToolRegistry,
    call_ctx: &CallContext,
    cfg: &DecodeConfig,
    clock: &dyn Clock,
) -> DecodeTrace {
    let tok = lm.tokenizer();
    let api = api_token(tok);
    let arrows: Vec<TokenId> = [RESULT_ARROW, " ->"].iter().filter_map(|p| tok.lookup(p)).collect();
    let closes = close_tokens(tok);
    let stops: Vec<TokenId> = cfg.stop.iter().filter_map(|p| tok.lookup(p)).collect();
    let masks = cfg.api_disabled.then(|| Masks::new(tok));

    let mut context = tok.encode(prompt);
    let start = context.len();
    let mut generated = 0usize;
    let mut events = Vec::new();
    let termination = loop {
        if generated >= cfg.max_tokens {
            break Termination::MaxTokens;
        }
        let mut dist = lm.next_distribution(&context);
        if let Some(m) = &masks {
            let ws = tok.decode(&context).ends_with(char::is_whitespace);
            m.apply(&mut dist, ws);
        }
        if !cfg.api_disabled && events.len() < cfg.max_api_calls && in_top_k(&dist, api, cfg.k_api) {
            let at = context.len();
            let position = tok.decode(&context[start..]).len();
            context.push(api);
            generated += 1;
            let mut reached_arrow = false;
            for _ in 0..cfg.max_call_tokens {
                let d = lm.next_distribution(&context);
                if !d.iter().any(|&p| p > 0.0) {
                    break;
                }
                let t = argmax(&d);
                context.push(t);
                generated += 1;
                if arrows.contains(&t) {
                    reached_arrow = true;
                    break;
                }
                if closes.contains(&t) {
                    break;
                }
            }
            if !reached_arrow {
                continue;
            }
            let body = tok.decode(&context[at + 1..context.len() - 1]);
            let Ok(call) = parse_call(&body) else {
                continue;
            };
            let t0 = clock.now_us();
            let outcome = tools.execute(&call, call_ctx);
            let latency_us = clock.now_us().saturating_sub(t0);
            let failed = matches!(outcome, ToolOutcome::Failed(_));
            let result = outcome.into_result();
            let mut tail = String::from(" ");
            if let Some(r) = &result {
                tail.push_str(r);
            }
            tail.push_str(CALL_CLOSE);
            context.extend(tok.encode(&tail));
            events.push(ApiEvent {
                position,
                call,
                result,
                failed,
                latency_us,
            });
            continue;
        }
        if !dist.iter().any(|&p| p > 0.0) {
            break Termination::Exhausted;
        }
        let t = argmax(&dist);
        context.push(t);
        generated += 1;
        if stops.contains(&t) {
            break Termination::Stop;
        }
    };
    DecodeTrace {
        text: tok.decode(&context[start..]),
        events,
        termination,
    }
}

/// Share of traces that made a call (AC) versus none (NC).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct UsageReport {
    pub all: usize,
    pub with_calls: usize,
    pub without_calls: usize,
    pub percent: f64,
    /// Traces keyed by the tool of their first call.
    pub per_tool: BTreeMap<ToolKind, usize>,
    pub per_tool_percent: BTreeMap<ToolKind, f64>,
}

pub fn trace_stats(traces: &[DecodeTrace]) -> UsageReport {
    let all = traces.len();
    let mut per_tool: BTreeMap<ToolKind, usize> = BTreeMap::new();
    for t in traces {
        if let Some(e) = t.events.first() {
            *per_tool.entry(e.call.tool).or_default() += 1;
        }
    }
    let with_calls: usize = per_tool.values().sum();
    let pct = |n: usize| if all == 0 { 0.0 } else { 100.0 * n as f64 / all as f64 };
    UsageReport {
        all,
        with_calls,
        without_calls: all - with_calls,
        percent: pct(with_calls),
        per_tool_percent: per_tool.iter().map(|(&k, &n)| (k, pct(n))).collect(),
        per_tool,
    }
}
