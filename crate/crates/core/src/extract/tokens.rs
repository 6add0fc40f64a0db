//! How a BPE vocabulary holding the integers 0-999 fragments a number:
//! each digit run splits left to right into chunks of at most three digits,
//! and sign and decimal point are tokens of their own.

use std::sync::LazyLock;

use regex::Regex;
use serde::Serialize;

use crate::prompt::format_value;

static NUMERIC: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[+-]?[0-9]+(?:\.[0-9]+)?$").expect("static pattern"));

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("not a plain decimal number: {0:?}")]
pub struct TokenFormatError(pub String);

/// `"13245"` → `["132", "45"]`, `"12.992"` → `["12", ".", "992"]`.
pub fn numeric_token_split(number_text: &str) -> Result<Vec<String>, TokenFormatError> {
    if !NUMERIC.is_match(number_text) {
        return Err(TokenFormatError(number_text.to_string()));
    }
    let mut tokens = Vec::new();
    let mut rest = number_text;
    if let Some(sign) = rest.get(..1).filter(|s| *s == "-" || *s == "+") {
        tokens.push(sign.to_string());
        rest = &rest[1..];
    }
    let (int_part, frac_part) = match rest.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (rest, None),
    };
    push_chunks(&mut tokens, int_part);
    if let Some(frac) = frac_part {
        tokens.push(".".to_string());
        push_chunks(&mut tokens, frac);
    }
    Ok(tokens)
}

fn push_chunks(tokens: &mut Vec<String>, digits: &str) {
    // digits are ASCII, so byte chunks are char chunks
    tokens.extend(
        digits
            .as_bytes()
            .chunks(3)
            .map(|c| String::from_utf8(c.to_vec()).expect("ascii digits")),
    );
}

/// Token counts for a set of series values, serialized as they appear in prompts.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TokenStats {
    pub numbers: usize,
    pub tokens: usize,
    pub max_tokens: usize,
    /// `histogram[k]` = how many numbers took `k` tokens.
    pub histogram: Vec<usize>,
}

impl TokenStats {
    pub fn add_value(&mut self, value: f64) {
        let text = format_value(value);
        let n = numeric_token_split(&text).map_or(0, |t| t.len());
        self.numbers += 1;
        self.tokens += n;
        self.max_tokens = self.max_tokens.max(n);
        if self.histogram.len() <= n {
            self.histogram.resize(n + 1, 0);
        }
        self.histogram[n] += 1;
    }

    pub fn mean_tokens(&self) -> f64 {
        if self.numbers == 0 {
            0.0
        } else {
            self.tokens as f64 / self.numbers as f64
        }
    }
}
