//! Reference word tokenizer.
//!
//! Text is cut into pieces: an optional run of leading whitespace followed by
//! either a maximal alphanumeric run, the arrow `->`, or one other character.
//! Whitespace at the very end of a text forms its own piece. Known pieces map
//! to vocabulary ids; unknown pieces fall back to byte tokens so that
//! `decode(encode(s)) == s` for every string.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

pub type TokenId = u32;

/// Token ids plus the identifier of the tokenizer that produced them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<TokenId>,
    pub tokenizer_id: String,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

pub trait Tokenizer {
    fn id(&self) -> &str;
    fn vocab_size(&self) -> usize;
    fn encode(&self, text: &str) -> Vec<TokenId>;
    fn decode(&self, tokens: &[TokenId]) -> String;
    /// Id of a whole known piece, if any.
    fn lookup(&self, piece: &str) -> Option<TokenId>;
    /// Surface text of a vocabulary piece. `None` for byte tokens.
    fn piece(&self, id: TokenId) -> Option<&str>;
    /// False for tokens that continue a byte-fallback piece; positions are
    /// never placed in front of those.
    fn starts_piece(&self, id: TokenId) -> bool;

    fn sequence(&self, text: &str) -> TokenSequence {
        TokenSequence {
            tokens: self.encode(text),
            tokenizer_id: self.id().into(),
        }
    }

    /// Byte offset of every token start in the decoded text, plus a final
    /// entry for the total length.
    fn byte_offsets(&self, tokens: &[TokenId]) -> Vec<usize> {
        let mut out = Vec::with_capacity(tokens.len() + 1);
        let mut at = 0;
        for &t in tokens {
            out.push(at);
            at += self.piece(t).map_or(1, str::len);
        }
        out.push(at);
        out
    }
}

/// Splits `text` into surface pieces. Concatenating the pieces gives `text`.
pub fn pretokenize(text: &str) -> Vec<&str> {
    let mut pieces = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some(&(_, c)) = chars.peek() {
        // leading whitespace
        if c.is_whitespace() {
            while let Some(&(_, c)) = chars.peek() {
                if !c.is_whitespace() {
                    break;
                }
                chars.next();
            }
        }
        let Some((at, c)) = chars.next() else {
            pieces.push(&text[start..]);
            return pieces;
        };
        let mut end = at + c.len_utf8();
        if c.is_alphanumeric() {
            while let Some(&(i, c)) = chars.peek() {
                if !c.is_alphanumeric() {
                    break;
                }
                end = i + c.len_utf8();
                chars.next();
            }
        } else if c == '-' && text[end..].starts_with('>') {
            chars.next();
            end += 1;
        }
        pieces.push(&text[start..end]);
        start = end;
    }
    pieces
}

/// Pieces every vocabulary carries so API-call markers never hit the byte
/// fallback.
pub const MARKER_PIECES: &[&str] = &[" [", "[", "]", " ]", "->", " ->", "(", ")", " (", "\""];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordTokenizer {
    id: String,
    pieces: Vec<String>,
    index: BTreeMap<String, TokenId>,
}

impl WordTokenizer {
    /// Builds a tokenizer whose vocabulary is exactly `pieces` (deduplicated,
    /// sorted) plus the marker pieces.
    pub fn from_pieces<I, S>(pieces: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut all: Vec<String> = pieces.into_iter().map(Into::into).collect();
        all.extend(MARKER_PIECES.iter().map(|p| String::from(*p)));
        all.retain(|p| !p.is_empty());
        all.sort();
        all.dedup();
        let index = all
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i as TokenId))
            .collect();
        let id = vocab_id(&all);
        WordTokenizer {
            id,
            pieces: all,
            index,
        }
    }

    /// Vocabulary of every piece seen in `texts` at least `min_count` times.
    pub fn train<'a, I>(texts: I, min_count: usize) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for text in texts {
            for piece in pretokenize(text) {
                *counts.entry(piece).or_default() += 1;
            }
        }
        Self::from_pieces(
            counts
                .into_iter()
                .filter(|&(_, n)| n >= min_count.max(1))
                .map(|(p, _)| p),
        )
    }

    pub fn pieces(&self) -> &[String] {
        &self.pieces
    }

    fn byte_start(&self) -> TokenId {
        self.pieces.len() as TokenId
    }

    fn byte_cont(&self) -> TokenId {
        self.pieces.len() as TokenId + 256
    }

    /// The byte value carried by a fallback token.
    pub fn byte_of(&self, id: TokenId) -> Option<u8> {
        let id = id.checked_sub(self.byte_start())?;
        if id < 512 {
            Some((id % 256) as u8)
        } else {
            None
        }
    }
}

fn vocab_id(pieces: &[String]) -> String {
    let mut h = crate::seed::Fnv64::new();
    for p in pieces {
        h.write(p.as_bytes());
        h.write(&[0xff]);
    }
    let mut id = String::from("word-v1-");
    let _ = write!(id, "{:016x}", h.finish());
    id
}

impl Tokenizer for WordTokenizer {
    fn id(&self) -> &str {
        &self.id
    }

    fn vocab_size(&self) -> usize {
        self.pieces.len() + 512
    }

    fn encode(&self, text: &str) -> Vec<TokenId> {
        let mut out = Vec::new();
        for piece in pretokenize(text) {
            match self.index.get(piece) {
                Some(&id) => out.push(id),
                None => {
                    for (i, &b) in piece.as_bytes().iter().enumerate() {
                        let base = if i == 0 {
                            self.byte_start()
                        } else {
                            self.byte_cont()
                        };
                        out.push(base + b as TokenId);
                    }
                }
            }
        }
        out
    }

    fn decode(&self, tokens: &[TokenId]) -> String {
        let mut bytes = Vec::new();
        for &t in tokens {
            match self.piece(t) {
                Some(p) => bytes.extend_from_slice(p.as_bytes()),
                None => bytes.extend(self.byte_of(t)),
            }
        }
        match String::from_utf8(bytes) {
            Ok(s) => s,
            Err(e) => String::from_utf8_lossy(e.as_bytes()).into_owned(),
        }
    }

    fn lookup(&self, piece: &str) -> Option<TokenId> {
        self.index.get(piece).copied()
    }

    fn piece(&self, id: TokenId) -> Option<&str> {
        self.pieces.get(id as usize).map(String::as_str)
    }

    fn starts_piece(&self, id: TokenId) -> bool {
        id < self.byte_cont() || id >= self.byte_cont() + 256
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn pieces_attach_leading_whitespace() {
        assert_eq!(
            pretokenize("Joe Biden was born in [QA(x)] -> 6,853 km "),
            vec![
                "Joe", " Biden", " was", " born", " in", " [", "QA", "(", "x", ")", "]", " ->",
                " 6", ",", "853", " km", " "
            ]
        );
        assert_eq!(pretokenize(""), Vec::<&str>::new());
        assert_eq!(pretokenize("  "), vec!["  "]);
    }

    #[test]
    fn unknown_pieces_round_trip_through_bytes() {
        let tok = WordTokenizer::from_pieces(["The", " Nile"]);
        let text = "The Nile  sûreté 南京\n-> x";
        let ids = tok.encode(text);
        assert_eq!(tok.decode(&ids), text);
        assert!(ids.iter().any(|&t| !tok.starts_piece(t)));
        assert_eq!(tok.encode(" [")[0], tok.lookup(" [").unwrap());
    }

    #[test]
    fn offsets_track_decoded_length() {
        let tok = WordTokenizer::from_pieces(["a", " b"]);
        let ids = tok.encode("a b é");
        let offs = tok.byte_offsets(&ids);
        assert_eq!(*offs.last().unwrap(), "a b é".len());
        assert_eq!(offs[1], 1);
    }

    #[test]
    fn training_is_deterministic() {
        let a = WordTokenizer::train(["x y z", "y z"], 1);
        let b = WordTokenizer::train(["x y z", "y z"], 1);
        assert_eq!(a, b);
        assert_eq!(a.id(), b.id());
        let c = WordTokenizer::train(["x y z", "y z"], 2);
        assert!(c.lookup("x").is_none());
        assert!(c.lookup(" z").is_some());
    }
}
