//! Generation, evaluation and reporting helpers behind the CLI.

use std::collections::BTreeMap;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use selfcall_core::decoding::{trace_stats, Clock, DecodeTrace, UsageReport};
use selfcall_core::evalgen::{is_correct, TaskFamily};
use selfcall_core::filtering::STATS_THRESHOLDS;
use selfcall_core::{Date, ToolKind};

use crate::formats::{PredictionRecord, ScoredRecord};

/// Microseconds since construction.
pub struct SystemClock(Instant);

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock(Instant::now())
    }
}

impl Clock for SystemClock {
    fn now_us(&self) -> u64 {
        self.0.elapsed().as_micros() as u64
    }
}

/// Today's UTC date.
pub fn today() -> Date {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    Date::from_days((secs / 86_400) as i64)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FamilyScore {
    pub items: usize,
    pub correct: usize,
    pub accuracy: f64,
}

/// Accuracy per family under the lenient criteria.
pub fn score_predictions(preds: &[PredictionRecord]) -> BTreeMap<TaskFamily, FamilyScore> {
    let mut out: BTreeMap<TaskFamily, FamilyScore> = BTreeMap::new();
    for p in preds {
        let s = out.entry(p.family).or_default();
        s.items += 1;
        s.correct += usize::from(is_correct(p.family, &p.prediction, &p.golds));
    }
    for s in out.values_mut() {
        s.accuracy = 100.0 * s.correct as f64 / s.items as f64;
    }
    out
}

/// Accuracy split by whether the decoder made a call.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CallSplit {
    pub all: FamilyScore,
    pub with_calls: FamilyScore,
    pub without_calls: FamilyScore,
    pub percent_with_calls: f64,
}

pub fn split_by_calls(preds: &[PredictionRecord]) -> CallSplit {
    let tally = |keep: &dyn Fn(&PredictionRecord) -> bool| {
        let mut s = FamilyScore::default();
        for p in preds.iter().filter(|p| keep(p)) {
            s.items += 1;
            s.correct += usize::from(is_correct(p.family, &p.prediction, &p.golds));
        }
        s.accuracy = if s.items == 0 { 0.0 } else { 100.0 * s.correct as f64 / s.items as f64 };
        s
    };
    let all = tally(&|_| true);
    let with_calls = tally(&|p| p.called);
    CallSplit {
        percent_with_calls: if all.items == 0 { 0.0 } else { 100.0 * with_calls.items as f64 / all.items as f64 },
        without_calls: tally(&|p| !p.called),
        all,
        with_calls,
    }
}

/// Documents and calls with gain ≥ τ for each reporting threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub tool: ToolKind,
    pub examples_at: [usize; 3],
    pub calls_at: [usize; 3],
}

pub fn threshold_table(scored: &[ScoredRecord]) -> Vec<ThresholdRow> {
    ToolKind::ALL
        .into_iter()
        .map(|tool| {
            let mut row = ThresholdRow {
                tool,
                examples_at: [0; 3],
                calls_at: [0; 3],
            };
            for (i, &tau) in STATS_THRESHOLDS.iter().enumerate() {
                let kept: Vec<&ScoredRecord> =
                    scored.iter().filter(|s| s.tool == tool && s.gain >= tau).collect();
                row.calls_at[i] = kept.len();
                let mut docs: Vec<&str> = kept.iter().map(|s| s.doc_id.as_str()).collect();
                docs.sort_unstable();
                docs.dedup();
                row.examples_at[i] = docs.len();
            }
            row
        })
        .collect()
}

pub fn render_threshold_table(rows: &[ThresholdRow]) -> String {
    let mut s = format!(
        "{:<12} {:>10} {:>10} {:>10}\n",
        "API", "tau_f=0.5", "tau_f=1.0", "tau_f=2.0"
    );
    for r in rows {
        s.push_str(&format!(
            "{:<12} {:>10} {:>10} {:>10}\n",
            r.tool.name(),
            r.examples_at[0],
            r.examples_at[1],
            r.examples_at[2]
        ));
    }
    s
}

pub fn usage(traces: &[DecodeTrace]) -> UsageReport {
    trace_stats(traces)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pred(family: TaskFamily, prediction: &str, gold: &str, called: bool) -> PredictionRecord {
        PredictionRecord {
            task_id: "t".into(),
            family,
            prediction: prediction.into(),
            golds: vec![gold.into()],
            called,
        }
    }

    #[test]
    fn per_family_and_call_split() {
        let preds = vec![
            pred(TaskFamily::Math, "The correct answer is 5+3=8", "8", true),
            pred(TaskFamily::Math, "about 7", "8", false),
            pred(TaskFamily::Lama, "Paris , the capital of", "Paris", false),
        ];
        let by = score_predictions(&preds);
        assert_eq!(by[&TaskFamily::Math].correct, 1);
        assert_eq!(by[&TaskFamily::Math].accuracy, 50.0);
        assert_eq!(by[&TaskFamily::Lama].correct, 1);
        let split = split_by_calls(&preds);
        assert_eq!((split.with_calls.items, split.without_calls.items), (1, 2));
        assert_eq!(split.with_calls.accuracy, 100.0);
        assert_eq!(split.without_calls.correct, 1);
    }

    #[test]
    fn thresholds_shrink() {
        let rec = |doc: &str, gain: f64| ScoredRecord {
            v: 1,
            doc_id: doc.into(),
            position: 0,
            tool: ToolKind::Qa,
            input: "q".into(),
            result: None,
            l_plus: 0.0,
            l_minus: gain,
            l_empty: gain,
            gain,
        };
        let rows = threshold_table(&[rec("a", 0.7), rec("a", 1.5), rec("b", 2.5), rec("c", -1.0)]);
        let qa = rows.iter().find(|r| r.tool == ToolKind::Qa).unwrap();
        assert_eq!(qa.examples_at, [2, 2, 1]);
        assert_eq!(qa.calls_at, [3, 2, 1]);
        assert!(render_threshold_table(&rows).contains("QA"));
    }
}
