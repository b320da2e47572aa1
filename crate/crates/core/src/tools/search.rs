//! Okapi BM25 over (page, section) units.
//!
//! score(D, Q) = Σ_t idf(t) · tf · (k1 + 1) / (tf + k1 · (1 − b + b · |D| / avgdl))
//! idf(t)      = ln(1 + (N − df + 0.5) / (df + 0.5))

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub const DEFAULT_K1: f64 = 1.2;
pub const DEFAULT_B: f64 = 0.75;
pub const DEFAULT_SNIPPET_CHARS: usize = 320;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    #[serde(default)]
    pub heading: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page {
    pub id: String,
    pub title: String,
    pub sections: Vec<Section>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexedSection {
    pub page_id: String,
    pub title: String,
    pub heading: String,
    pub text: String,
    pub len: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posting {
    pub section: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchIndex {
    pub k1: f64,
    pub b: f64,
    pub sections: Vec<IndexedSection>,
    pub postings: BTreeMap<String, Vec<Posting>>,
    pub avg_len: f64,
}

/// Lowercased alphanumeric runs.
pub fn analyze(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            out.push(core::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

impl SearchIndex {
    pub fn build(pages: &[Page]) -> Self {
        Self::build_with(pages, DEFAULT_K1, DEFAULT_B)
    }

    /// The title is indexed together with each section's heading and text.
    pub fn build_with(pages: &[Page], k1: f64, b: f64) -> Self {
        let mut sections = Vec::new();
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut total_len = 0u64;
        for page in pages {
            for sec in &page.sections {
                let id = sections.len() as u32;
                let mut terms = analyze(&page.title);
                terms.extend(analyze(&sec.heading));
                terms.extend(analyze(&sec.text));
                let mut tf: BTreeMap<String, u32> = BTreeMap::new();
                for t in &terms {
                    *tf.entry(t.clone()).or_default() += 1;
                }
                for (term, n) in tf {
                    postings.entry(term).or_default().push(Posting { section: id, tf: n });
                }
                total_len += terms.len() as u64;
                sections.push(IndexedSection {
                    page_id: page.id.clone(),
                    title: page.title.clone(),
                    heading: sec.heading.clone(),
                    text: sec.text.clone(),
                    len: terms.len() as u32,
                });
            }
        }
        let avg_len = if sections.is_empty() {
            0.0
        } else {
            total_len as f64 / sections.len() as f64
        };
        SearchIndex {
            k1,
            b,
            sections,
            postings,
            avg_len,
        }
    }

    pub fn len(&self) -> usize {
        self.sections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sections.is_empty()
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.sections.len() as f64;
        let df = self.postings.get(term).map_or(0, Vec::len) as f64;
        libm::log(1.0 + (n - df + 0.5) / (df + 0.5))
    }

    /// One term's contribution for a given term frequency and length.
    pub fn term_score(&self, idf: f64, tf: f64, len: f64) -> f64 {
        if tf == 0.0 {
            return 0.0;
        }
        let norm = if self.avg_len > 0.0 {
            len / self.avg_len
        } else {
            1.0
        };
        idf * tf * (self.k1 + 1.0) / (tf + self.k1 * (1.0 - self.b + self.b * norm))
    }

    /// BM25 of one section for a set of (deduplicated) query terms.
    pub fn bm25_score(&self, query_terms: &[String], section: usize) -> f64 {
        let Some(sec) = self.sections.get(section) else {
            return 0.0;
        };
        let terms: BTreeSet<&String> = query_terms.iter().collect();
        terms
            .into_iter()
            .map(|t| {
                let tf = self
                    .postings
                    .get(t)
                    .and_then(|ps| ps.iter().find(|p| p.section as usize == section))
                    .map_or(0, |p| p.tf);
                self.term_score(self.idf(t), tf as f64, sec.len as f64)
            })
            .sum()
    }

    /// Best section by accumulating postings; ties go to the lower index.
    pub fn top1(&self, query: &str) -> Option<(usize, f64)> {
        let terms: BTreeSet<String> = analyze(query).into_iter().collect();
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        for t in &terms {
            let Some(ps) = self.postings.get(t) else {
                continue;
            };
            let idf = self.idf(t);
            for p in ps {
                let len = self.sections[p.section as usize].len as f64;
                *acc.entry(p.section).or_default() += self.term_score(idf, p.tf as f64, len);
            }
        }
        let mut best: Option<(usize, f64)> = None;
        for (s, score) in acc {
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((s as usize, score));
            }
        }
        best
    }

    /// "Title > Heading > text", cut to `max_chars` at a word boundary.
    pub fn snippet(&self, section: usize, max_chars: usize) -> String {
        let sec = &self.sections[section];
        let mut s = sec.title.clone();
        if !sec.heading.is_empty() {
            s.push_str(" > ");
            s.push_str(&sec.heading);
        }
        s.push_str(" > ");
        s.push_str(&sec.text);
        let single_line: String = s.split_whitespace().collect::<Vec<_>>().join(" ");
        truncate_words(&single_line, max_chars)
    }

    pub fn search(&self, query: &str, max_chars: usize) -> Option<String> {
        self.top1(query).map(|(s, _)| self.snippet(s, max_chars))
    }
}

pub fn wiki_search(index: &SearchIndex, query: &str) -> Option<String> {
    index.search(query, DEFAULT_SNIPPET_CHARS)
}

fn truncate_words(s: &str, max_chars: usize) -> String {
    if s.chars().count() <= max_chars {
        return s.into();
    }
    let cut = s.char_indices().nth(max_chars).map_or(s.len(), |(i, _)| i);
    let head = &s[..cut];
    // cut inside a word: back off to the previous space
    let head = if s[cut..].starts_with(' ') {
        head
    } else {
        head.rfind(' ').map_or(head, |i| &head[..i])
    };
    head.trim_end().into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn page(id: &str, title: &str, text: &str) -> Page {
        Page {
            id: id.into(),
            title: title.into(),
            sections: vec![Section {
                heading: String::new(),
                text: text.into(),
            }],
        }
    }

    #[test]
    fn hand_evaluated_scores() {
        // len == avglen and tf = 1, so the score is the idf itself
        let one = SearchIndex::build(&[page("1", "t", "alpha")]);
        let s = one.bm25_score(&["alpha".into()], 0);
        assert!((s - libm::log(1.0 + 0.5 / 1.5)).abs() < 1e-12);
        assert_eq!(one.bm25_score(&["beta".into()], 0), 0.0);

        let two = SearchIndex::build(&[page("1", "t", "alpha"), page("2", "u", "gamma")]);
        let s = two.bm25_score(&["alpha".into()], 0);
        assert!((s - core::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn longer_documents_score_lower() {
        let idx = SearchIndex::build(&[
            page("1", "a", "x y"),
            page("2", "b", "x y z w v u"),
            page("3", "c", "q"),
        ]);
        let q = ["x".into()];
        assert!(idx.bm25_score(&q, 0) > idx.bm25_score(&q, 1));
    }

    #[test]
    fn higher_tf_wins_at_equal_length() {
        let idx = SearchIndex::build(&[page("a", "a", "cat cat dog"), page("b", "b", "cat dog dog")]);
        assert_eq!(idx.top1("cat").unwrap().0, 0);
        assert_eq!(idx.search("zebra", 320), None);
    }

    #[test]
    fn snippet_truncates_at_word_boundary() {
        assert_eq!(truncate_words("hello brave new world", 13), "hello brave");
        assert_eq!(truncate_words("hello brave new world", 11), "hello brave");
        assert_eq!(truncate_words("short", 320), "short");
    }
}
