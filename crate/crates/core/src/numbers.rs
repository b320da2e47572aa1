//! Number spotting in running text.

use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumberSpan {
    /// Byte range in the source text, sign included.
    pub start: usize,
    pub end: usize,
    pub value: f64,
}

/// Finds numbers such as `7`, `-3`, `1,250` and `0.5`.
///
/// A sign belongs to the number only when the character before it is not
/// alphanumeric, so `5-3` yields `5` and `3`. Digits glued to a preceding
/// letter (`x2`, `COVID19`) are not numbers.
pub fn find_numbers(text: &str) -> Vec<NumberSpan> {
    let b = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let prev_alnum = i > 0 && is_word_byte(b[i - 1]);
        let signed = matches!(b[i], b'-' | b'+')
            && i + 1 < b.len()
            && b[i + 1].is_ascii_digit()
            && !prev_alnum;
        if !(b[i].is_ascii_digit() && !prev_alnum) && !signed {
            i += 1;
            continue;
        }
        let start = i;
        let negative = b[i] == b'-';
        if signed {
            i += 1;
        }
        let int_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        let mut digits: Vec<u8> = b[int_start..i].to_vec();
        // thousands groups need a 1-3 digit lead and exactly 3 digits each
        if i - int_start <= 3 {
            while i + 4 <= b.len()
                && b[i] == b','
                && b[i + 1..i + 4].iter().all(u8::is_ascii_digit)
                && !b.get(i + 4).is_some_and(u8::is_ascii_digit)
            {
                digits.extend_from_slice(&b[i + 1..i + 4]);
                i += 4;
            }
        }
        if i + 1 < b.len() && b[i] == b'.' && b[i + 1].is_ascii_digit() {
            digits.push(b'.');
            i += 1;
            while i < b.len() && b[i].is_ascii_digit() {
                digits.push(b[i]);
                i += 1;
            }
        }
        let s = core::str::from_utf8(&digits).unwrap_or("0");
        let mut value: f64 = s.parse().unwrap_or(0.0);
        if negative {
            value = -value;
        }
        out.push(NumberSpan {
            start,
            end: i,
            value,
        });
    }
    out
}

fn is_word_byte(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c >= 0x80
}

/// True when `a` and `b` agree to a relative tolerance.
pub fn approx_eq(a: f64, b: f64, rel: f64) -> bool {
    if a == b {
        return true;
    }
    let scale = a.abs().max(b.abs());
    (a - b).abs() <= rel * scale
}

#[cfg(test)]
mod tests {
    use super::*;

    fn values(t: &str) -> Vec<f64> {
        find_numbers(t).into_iter().map(|n| n.value).collect()
    }

    #[test]
    fn spots_plain_grouped_decimal_and_signed() {
        assert_eq!(values("7 apples and 1,250 pears"), [7.0, 1250.0]);
        assert_eq!(values("pi is 3.14."), [3.14]);
        assert_eq!(values("drop to -3 now"), [-3.0]);
        assert_eq!(values("5-3=2"), [5.0, 3.0, 2.0]);
        assert_eq!(values("COVID19 x2"), Vec::<f64>::new());
        assert_eq!(values("12,34"), [12.0, 34.0]);
        assert_eq!(values("1,000,000"), [1e6]);
    }

    #[test]
    fn spans_cover_source_text() {
        let t = "was -1,200.5 in";
        let n = find_numbers(t)[0];
        assert_eq!(&t[n.start..n.end], "-1,200.5");
    }
}
