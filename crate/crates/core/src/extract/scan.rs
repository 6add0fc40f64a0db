//! Standalone-number scanning and grouping into value lists.

use std::sync::LazyLock;

use regex::Regex;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumberSpan {
    pub value: f64,
    pub start: usize,
    pub end: usize,
}

fn is_sign(c: char) -> bool {
    matches!(c, '-' | '+' | '\u{2212}')
}

fn sign_allowed_after(prev: Option<char>) -> bool {
    match prev {
        None => true,
        Some(c) => c.is_whitespace() || "([{:=,;~≈$*'\"|/".contains(c),
    }
}

/// Every standalone decimal number in `text`, in order.
///
/// A number is an optional sign, digits, and an optional `.digits` part. It
/// must not touch a letter, digit, `_` or `.` on the left, nor a letter or
/// digit on the right. Commas always separate numbers: `1,234` is `1` and
/// `234`.
pub fn scan_numbers(text: &str) -> Vec<NumberSpan> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let at = |i: usize| chars.get(i).map(|&(_, c)| c);
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i].1;
        let prev = if i == 0 { None } else { at(i - 1) };
        let starts_signed = is_sign(c) && at(i + 1).is_some_and(|d| d.is_ascii_digit()) && sign_allowed_after(prev);
        let starts_plain = c.is_ascii_digit()
            && !prev.is_some_and(|p| p.is_alphanumeric() || p == '_' || p == '.');
        if !(starts_signed || starts_plain) {
            i += 1;
            continue;
        }
        let begin = i;
        let mut j = if starts_signed { i + 1 } else { i };
        while at(j).is_some_and(|d| d.is_ascii_digit()) {
            j += 1;
        }
        if at(j) == Some('.') && at(j + 1).is_some_and(|d| d.is_ascii_digit()) {
            j += 1;
            while at(j).is_some_and(|d| d.is_ascii_digit()) {
                j += 1;
            }
        }
        if at(j).is_some_and(|d| d.is_alphanumeric()) {
            // part of a word such as `5th` or `24h`
            while at(j).is_some_and(|d| d.is_alphanumeric() || d == '.') {
                j += 1;
            }
            i = j;
            continue;
        }
        let start = chars[begin].0;
        let end = chars.get(j).map_or(text.len(), |&(b, _)| b);
        let literal: String = text[start..end]
            .chars()
            .map(|ch| if ch == '\u{2212}' { '-' } else { ch })
            .collect();
        if let Ok(value) = literal.parse::<f64>() {
            if value.is_finite() {
                out.push(NumberSpan { value, start, end });
            }
        }
        i = j;
    }
    out
}

static NON_VALUE_PATTERNS: LazyLock<Vec<Regex>> = LazyLock::new(|| {
    [
        // calendar dates: "April 30, 2020", "Sept. 5th"
        r"(?i)\b(?:jan(?:uary)?|feb(?:ruary)?|mar(?:ch)?|apr(?:il)?|may|june?|july?|aug(?:ust)?|sep(?:t(?:ember)?)?|oct(?:ober)?|nov(?:ember)?|dec(?:ember)?)\.?\s+\d{1,2}(?:st|nd|rd|th)?(?:,?\s+\d{4})?\b",
        r"\b\d{4}-\d{1,2}-\d{1,2}(?:[T ]\d{1,2}:\d{2}(?::\d{2})?)?\b",
        r"\b\d{1,2}/\d{1,2}/\d{2,4}\b",
        // clock times
        r"(?i)\b\d{1,2}:\d{2}(?::\d{2})?(?:\s*[ap]\.?m\.?)?",
        // list enumerators and bullets at line start
        r"(?m)^[ \t>]*(?:\(?\d{1,2}[.)]|[-*•+])[ \t]+",
        // step labels: "Hour 3:", "t+1 =", "Step 2)"
        r"(?i)\b(?:hours?|steps?|days?|h|t|periods?|time\s*steps?)\s*\+?\s*\d{1,3}\s*[:=)\-–]",
        // horizon phrases: "next 6 hours", "last 24 values", "6-hour"
        r"(?i)\b(?:next|following|last|past|first|previous|over|remaining|final|these|those|the|all)\s+\d{1,4}\s+(?:hours?|days?|steps?|values?|points?|periods?|time\s*steps?|observations?|data\s+points?|numbers?|predictions?)\b",
        r"(?i)\b\d{1,4}-(?:hours?|days?|steps?|points?|values?)\b",
        // entity references from the query: "POI 324", "region 110"
        r"(?i)\b(?:poi|region|household|client|series)\s+#?\d+\b",
    ]
    .iter()
    .map(|p| Regex::new(p).expect("static pattern"))
    .collect()
});

/// Blank out dates, clock times, list enumerators, step labels, horizon
/// phrases and entity references so that only candidate forecast values
/// remain as numbers.
pub fn strip_non_values(text: &str) -> String {
    let mut out = text.to_string();
    for re in NON_VALUE_PATTERNS.iter() {
        if re.is_match(&out) {
            out = re.replace_all(&out, " ").into_owned();
        }
    }
    out
}

static LIST_GAP: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r#"(?i)^(?:[\s,;|/*•\[\](){}"'`~≈$]|\band\b|\bthen\b|\bA\b|\bamperes?\b|\bamps?\b|\bkWh\b|\bpeople\b|\bvisitors?\b|\bdegrees?\b|°[CF]?|\bunits?\b)*$"#,
    )
    .expect("static pattern")
});

/// Group consecutive numbers into runs whose separators are list punctuation,
/// `and`, or a unit word.
pub fn number_runs(text: &str) -> Vec<Vec<f64>> {
    let nums = scan_numbers(text);
    let mut runs: Vec<Vec<f64>> = Vec::new();
    let mut prev_end: Option<usize> = None;
    for n in nums {
        let joins = prev_end.is_some_and(|e| LIST_GAP.is_match(&text[e..n.start]));
        match runs.last_mut() {
            Some(run) if joins => run.push(n.value),
            _ => runs.push(vec![n.value]),
        }
        prev_end = Some(n.end);
    }
    runs
}

/// The first run holding at least `horizon` values (truncated to `horizon`),
/// else the longest run (earliest on ties).
pub fn pick_leading_run(runs: &[Vec<f64>], horizon: usize) -> Option<Vec<f64>> {
    if let Some(run) = runs.iter().find(|r| r.len() >= horizon) {
        return Some(run[..horizon].to_vec());
    }
    runs.iter()
        .rev()
        .max_by_key(|r| r.len())
        .filter(|r| !r.is_empty())
        .cloned()
}
