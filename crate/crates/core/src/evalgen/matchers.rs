//! Lenient answer matching.
//!
//! A word is a maximal non-whitespace run with leading punctuation removed;
//! runs that become empty are skipped.

use alloc::string::String;
use alloc::vec::Vec;

use crate::numbers::{find_numbers, NumberSpan};

pub fn words(text: &str) -> Vec<&str> {
    text.split_whitespace()
        .map(|w| w.trim_start_matches(|c: char| !c.is_alphanumeric()))
        .filter(|w| !w.is_empty())
        .collect()
}

fn head_contains(prediction: &str, gold: &str, cap: usize) -> bool {
    let gold = gold.trim().to_lowercase();
    if gold.is_empty() {
        return false;
    }
    let head: Vec<&str> = words(prediction).into_iter().take(cap).collect();
    let head: String = head.join(" ").to_lowercase();
    head.contains(gold.as_str())
}

/// Gold appears within the first five words.
pub fn lama_match(prediction: &str, gold: &str) -> bool {
    head_contains(prediction, gold, 5)
}

/// Any gold appears within the first `cap` words.
pub fn qa_match(prediction: &str, golds: &[String], cap: usize) -> bool {
    golds.iter().any(|g| head_contains(prediction, g, cap))
}

fn is_operator_gap(gap: &str) -> Option<bool> {
    match gap.trim() {
        "=" => Some(true),
        "+" | "-" | "*" | "/" | "x" | "×" | "÷" | "−" => Some(false),
        _ => None,
    }
}

/// The answer a prediction commits to: its first number, or when that
/// number opens an equation such as `5+3=8`, the number after the last `=`.
pub fn extract_answer(prediction: &str) -> Option<f64> {
    let nums: Vec<NumberSpan> = find_numbers(prediction);
    let first = nums.first()?;
    let mut answer = first.value;
    for pair in nums.windows(2) {
        let gap = &prediction[pair[0].end..pair[1].start];
        let signed = matches!(prediction.as_bytes()[pair[1].start], b'+' | b'-');
        match is_operator_gap(gap) {
            Some(true) => answer = pair[1].value,
            Some(false) => {}
            None if signed && gap.trim().is_empty() => {}
            None => break,
        }
    }
    Some(answer)
}

pub fn math_match(prediction: &str, gold: f64) -> bool {
    extract_answer(prediction).is_some_and(|v| (v - gold).abs() <= 1e-6 * gold.abs().max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn lama_boundaries() {
        assert!(lama_match("Paris , the capital of", "Paris"));
        assert!(lama_match("the city of lights Paris today", "Paris"));
        assert!(!lama_match("a b c d e Paris", "Paris"));
        assert!(lama_match("\"paris\" indeed", "Paris"));
    }

    #[test]
    fn math_answers() {
        assert!(math_match("The correct answer is 5+3=8", 8.0));
        assert!(math_match("8 apples", 8.0));
        assert!(!math_match("about 7", 8.0));
        assert!(math_match("It costs 1,250 dollars", 1250.0));
        assert!(math_match("2 * 3 = 6 and then 9", 6.0));
        assert!(!math_match("no digits", 0.0));
    }

    #[test]
    fn qa_caps() {
        let mut w: Vec<String> = (0..25).map(|i| alloc::format!("w{i}")).collect();
        w[18] = "Gold".into();
        let pred = w.join(" ");
        assert!(qa_match(&pred, &["gold".into()], 20));
        w[18] = "w18".into();
        w[20] = "Gold".into();
        let pred = w.join(" ");
        assert!(!qa_match(&pred, &["gold".into()], 20));
        assert!(qa_match("x y", &vec!["nope".into(), "Y".into()], 20));
    }
}
