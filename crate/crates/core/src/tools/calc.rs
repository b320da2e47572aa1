//! Four-operation calculator over exact rationals.

use alloc::format;
use alloc::string::{String, ToString};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

const MAX_INPUT_LEN: usize = 1024;
const MAX_DEPTH: usize = 64;

/// Evaluates `+ - * /` with the usual precedence and parentheses, rounding
/// the exact result half away from zero to two decimals. Integral results
/// print without a decimal point; others always keep two digits.
///
/// Returns `None` for syntax errors and division by zero.
pub fn calc_eval(expr: &str) -> Option<String> {
    eval_exact(expr).map(|v| render(&v))
}

pub fn eval_exact(expr: &str) -> Option<BigRational> {
    if expr.len() > MAX_INPUT_LEN {
        return None;
    }
    let mut p = Parser {
        src: expr.as_bytes(),
        at: 0,
        depth: 0,
    };
    let v = p.expr()?;
    p.skip_ws();
    if p.at != p.src.len() {
        return None;
    }
    Some(v)
}

/// Exact value to the tool's text form.
pub fn render(v: &BigRational) -> String {
    if v.is_integer() {
        return v.to_integer().to_string();
    }
    let hundred = BigInt::from(100);
    let scaled = v * BigRational::from_integer(hundred.clone());
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    let mag = (scaled.abs() + half).floor().to_integer();
    let sign = if v.is_negative() && !mag.is_zero() {
        "-"
    } else {
        ""
    };
    let int = &mag / &hundred;
    let frac = (&mag % &hundred).to_u32().unwrap_or(0);
    format!("{sign}{int}.{frac:02}")
}

struct Parser<'a> {
    src: &'a [u8],
    at: usize,
    depth: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.src.get(self.at).is_some_and(u8::is_ascii_whitespace) {
            self.at += 1;
        }
    }

    fn peek_op(&mut self) -> Option<u8> {
        self.skip_ws();
        let rest = &self.src[self.at..];
        match rest.first()? {
            b @ (b'+' | b'-' | b'*' | b'/' | b'(' | b')') => Some(*b),
            _ => match rest {
                // × ÷ −
                [0xc3, 0x97, ..] => Some(b'*'),
                [0xc3, 0xb7, ..] => Some(b'/'),
                [0xe2, 0x88, 0x92, ..] => Some(b'-'),
                _ => None,
            },
        }
    }

    fn bump_op(&mut self) {
        self.at += match self.src[self.at] {
            0xc3 => 2,
            0xe2 => 3,
            _ => 1,
        };
    }

    fn expr(&mut self) -> Option<BigRational> {
        let mut acc = self.term()?;
        while let Some(op @ (b'+' | b'-')) = self.peek_op() {
            self.bump_op();
            let rhs = self.term()?;
            if op == b'+' {
                acc += rhs;
            } else {
                acc -= rhs;
            }
        }
        Some(acc)
    }

    fn term(&mut self) -> Option<BigRational> {
        let mut acc = self.factor()?;
        while let Some(op @ (b'*' | b'/')) = self.peek_op() {
            self.bump_op();
            let rhs = self.factor()?;
            if op == b'*' {
                acc *= rhs;
            } else {
                if rhs.is_zero() {
                    return None;
                }
                acc /= rhs;
            }
        }
        Some(acc)
    }

    fn factor(&mut self) -> Option<BigRational> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return None;
        }
        let v = match self.peek_op() {
            Some(b'-') => {
                self.bump_op();
                self.factor().map(|v| -v)
            }
            Some(b'+') => {
                self.bump_op();
                self.factor()
            }
            Some(b'(') => {
                self.bump_op();
                let v = self.expr()?;
                if self.peek_op() != Some(b')') {
                    return None;
                }
                self.bump_op();
                Some(v)
            }
            Some(_) => None,
            None => self.number(),
        };
        self.depth -= 1;
        v
    }

    /// `123`, `1,234,567`, `3.14`, `.5`
    fn number(&mut self) -> Option<BigRational> {
        let start = self.at;
        let s = self.src;
        let mut digits = String::new();
        let mut i = start;
        while i < s.len() && s[i].is_ascii_digit() {
            digits.push(s[i] as char);
            i += 1;
        }
        // thousands groups only directly after a leading group of 1-3 digits
        if (1..=3).contains(&(i - start)) {
            while i + 4 <= s.len()
                && s[i] == b','
                && s[i + 1..i + 4].iter().all(u8::is_ascii_digit)
                && !s.get(i + 4).is_some_and(u8::is_ascii_digit)
            {
                digits.extend(s[i + 1..i + 4].iter().map(|&b| b as char));
                i += 4;
            }
        }
        let mut scale = 0u32;
        if i < s.len() && s[i] == b'.' && s.get(i + 1).is_some_and(u8::is_ascii_digit) {
            i += 1;
            while i < s.len() && s[i].is_ascii_digit() {
                digits.push(s[i] as char);
                scale += 1;
                i += 1;
            }
        }
        if digits.is_empty() {
            return None;
        }
        self.at = i;
        let n: BigInt = digits.parse().ok()?;
        let d = num_traits::pow(BigInt::from(10), scale as usize);
        Some(BigRational::new(n, d))
    }
}
