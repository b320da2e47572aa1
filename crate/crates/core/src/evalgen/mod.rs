//! Zero-shot prompts, lenient answer matching and the temporal question set.

pub mod dateset;
pub mod matchers;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

pub use dateset::{generate_dateset, DatesetItem, Holiday, DATESET_SIZES};
pub use matchers::{lama_match, math_match, qa_match, words};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskFamily {
    Lama,
    Math,
    Qa,
    Mlqa,
    Temporal,
}

impl TaskFamily {
    pub const ALL: [TaskFamily; 5] = [
        TaskFamily::Lama,
        TaskFamily::Math,
        TaskFamily::Qa,
        TaskFamily::Mlqa,
        TaskFamily::Temporal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskFamily::Lama => "lama",
            TaskFamily::Math => "math",
            TaskFamily::Qa => "qa",
            TaskFamily::Mlqa => "mlqa",
            TaskFamily::Temporal => "temporal",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, UnknownFamily> {
        TaskFamily::ALL
            .into_iter()
            .find(|f| f.name() == name)
            .ok_or_else(|| UnknownFamily(name.into()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownFamily(pub String);

impl fmt::Display for UnknownFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown task family `{}`", self.0)
    }
}

/// Builds the zero-shot prompt. `context` is the passage (LAMA text, math
/// context, MLQA paragraph) and `question` the question where the family
/// has one.
pub fn build_prompt(family: TaskFamily, context: &str, question: &str) -> String {
    match family {
        TaskFamily::Lama => {
            let mut s = String::from("Please complete the following text so that it is factually correct: ");
            s.push_str(context);
            s
        }
        TaskFamily::Math => {
            let parts: Vec<&str> = [context.trim(), question.trim(), "The answer is"]
                .into_iter()
                .filter(|p| !p.is_empty())
                .collect();
            parts.join(" ")
        }
        TaskFamily::Qa | TaskFamily::Temporal => {
            let mut s = String::from("Answer the following question: ");
            s.push_str(&with_question_mark(question));
            s
        }
        TaskFamily::Mlqa => {
            let mut s = String::from("Your task is to answer a question based on the following paragraph: ");
            s.push_str(context);
            s.push_str(" Now answer the following question in English: ");
            s.push_str(question);
            s
        }
    }
}

pub fn build_prompt_named(family: &str, context: &str, question: &str) -> Result<String, UnknownFamily> {
    Ok(build_prompt(TaskFamily::from_name(family)?, context, question))
}

fn with_question_mark(q: &str) -> String {
    let q = q.trim_end();
    let mut s = String::from(q);
    if !q.ends_with('?') {
        s.push('?');
    }
    s
}

/// One benchmark item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalItem {
    pub task_id: String,
    pub family: TaskFamily,
    pub prompt: String,
    pub golds: Vec<String>,
}

/// Applies the family's lenient criterion.
pub fn is_correct(family: TaskFamily, prediction: &str, golds: &[String]) -> bool {
    match family {
        TaskFamily::Lama | TaskFamily::Temporal => golds.iter().any(|g| lama_match(prediction, g)),
        TaskFamily::Math => golds
            .iter()
            .filter_map(|g| g.trim().replace(',', "").parse::<f64>().ok())
            .any(|g| math_match(prediction, g)),
        TaskFamily::Qa => qa_match(prediction, golds, 20),
        TaskFamily::Mlqa => qa_match(prediction, golds, 10),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prompt_templates() {
        assert_eq!(
            build_prompt(TaskFamily::Lama, "The Nile flows into the", ""),
            "Please complete the following text so that it is factually correct: The Nile flows into the"
        );
        assert_eq!(
            build_prompt(TaskFamily::Qa, "", "Who wrote Hamlet"),
            "Answer the following question: Who wrote Hamlet?"
        );
        assert_eq!(
            build_prompt(TaskFamily::Qa, "", "Who wrote Hamlet?"),
            "Answer the following question: Who wrote Hamlet?"
        );
        assert_eq!(build_prompt(TaskFamily::Math, "", "2+2?"), "2+2? The answer is");
        assert_eq!(
            build_prompt(TaskFamily::Mlqa, "P.", "Q?"),
            "Your task is to answer a question based on the following paragraph: P. \
             Now answer the following question in English: Q?"
        );
        assert_eq!(
            build_prompt_named("trivia", "", ""),
            Err(UnknownFamily("trivia".into()))
        );
    }
}
