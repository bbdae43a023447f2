//! Tolerant extraction of structured payloads from free-form model replies.
//!
//! Replies rarely arrive as clean JSON: objects come wrapped in prose or
//! code fences, strings are single-quoted, triplets appear as `(a, b, c)`
//! tuples, entity names go unquoted, and lists carry trailing commas. The
//! extractor normalizes all of that into strict JSON, parses it, and then
//! digs out the value under a caller-supplied key.
//!
//! The search order is: each fenced code block first, then the full reply;
//! within a candidate, each balanced top-level `{...}` span in order; within
//! a parsed document, the shallowest object holding the key wins.
//!
//! The inverse direction ([`serialize_triplets`], [`serialize_string_list`])
//! always emits strict JSON, so a serialize/extract round trip is lossless.

use alloc::borrow::ToOwned;
use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde_json::Value;

use crate::kg::Triplet;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExtractError {
    #[error("no parseable object found in the reply")]
    NoJsonObject,
    #[error("no object in the reply carries the key '{0}'")]
    KeyAbsent(String),
    #[error("expected a list under '{key}', found {found}")]
    NotAList { key: String, found: &'static str },
    #[error("triplet entry {index} has {got} elements, expected 3")]
    TupleArity { index: usize, got: usize },
    #[error("triplet entry {index} is {found}, expected a 3-element list")]
    NotATuple { index: usize, found: &'static str },
    #[error("entry {index} is not a scalar")]
    NonScalar { index: usize },
}

/// Pull the value stored under `key` out of a reply, however the model chose
/// to format it.
pub fn extract_value(text: &str, key: &str) -> Result<Value, ExtractError> {
    let mut parsed_any = false;
    for candidate in candidate_texts(text) {
        for span in object_spans(candidate) {
            let Ok(tokens) = lex(span) else { continue };
            let normalized = emit(&tokens);
            let Ok(value) = serde_json::from_str::<Value>(&normalized) else {
                continue;
            };
            parsed_any = true;
            if let Some(found) = shallowest_with_key(&value, key) {
                return Ok(found.clone());
            }
        }
    }
    if parsed_any {
        Err(ExtractError::KeyAbsent(key.to_owned()))
    } else {
        Err(ExtractError::NoJsonObject)
    }
}

/// Extract a list of (head, relation, tail) triplets stored under `key`.
///
/// Accepts a list of 3-element tuples, or a single bare 3-element tuple
/// (wrapped into a one-element list). Scalar elements are stringified.
pub fn extract_triplets(text: &str, key: &str) -> Result<Vec<Triplet>, ExtractError> {
    let value = extract_value(text, key)?;
    let items = match value {
        Value::Array(items) => {
            // A bare [h, r, t] of scalars is a single triplet, not a list.
            if items.len() == 3 && items.iter().all(is_scalar) {
                return Ok(vec![triplet_from(&items, 0)?]);
            }
            items
        }
        other => {
            return Err(ExtractError::NotAList {
                key: key.to_owned(),
                found: kind_name(&other),
            })
        }
    };

    let mut out = Vec::with_capacity(items.len());
    for (index, item) in items.iter().enumerate() {
        match item {
            Value::Array(parts) => {
                if parts.len() != 3 {
                    return Err(ExtractError::TupleArity {
                        index,
                        got: parts.len(),
                    });
                }
                out.push(triplet_from(parts, index)?);
            }
            other => {
                return Err(ExtractError::NotATuple {
                    index,
                    found: kind_name(other),
                })
            }
        }
    }
    Ok(out)
}

/// Extract a flat list of strings stored under `key`. A single scalar is
/// wrapped into a one-element list.
pub fn extract_string_list(text: &str, key: &str) -> Result<Vec<String>, ExtractError> {
    let value = extract_value(text, key)?;
    match value {
        Value::Array(items) => {
            let mut out = Vec::with_capacity(items.len());
            for (index, item) in items.iter().enumerate() {
                if !is_scalar(item) {
                    return Err(ExtractError::NonScalar { index });
                }
                out.push(scalar_text(item));
            }
            Ok(out)
        }
        ref v if is_scalar(v) => Ok(vec![scalar_text(v)]),
        other => Err(ExtractError::NotAList {
            key: key.to_owned(),
            found: kind_name(&other),
        }),
    }
}

/// First token of the reply that names one of the allowed labels,
/// case-insensitive. Returns the canonical label.
pub fn extract_answer_label(text: &str, labels: &[String]) -> Option<String> {
    for token in text.split(|c: char| !c.is_alphanumeric()) {
        if token.is_empty() {
            continue;
        }
        for label in labels {
            if token.eq_ignore_ascii_case(label) {
                return Some(label.clone());
            }
        }
        // Any other alphanumeric token before a label match is fine to skip;
        // replies like "The answer is B" resolve to B.
    }
    None
}

/// Strict JSON `{"key": [["h","r","t"], ...]}`.
pub fn serialize_triplets(key: &str, triplets: &[Triplet]) -> String {
    let rows: Vec<Value> = triplets
        .iter()
        .map(|t| {
            Value::Array(vec![
                Value::String(t.head.clone()),
                Value::String(t.relation.clone()),
                Value::String(t.tail.clone()),
            ])
        })
        .collect();
    let mut obj = serde_json::Map::new();
    obj.insert(key.to_owned(), Value::Array(rows));
    Value::Object(obj).to_string()
}

/// Strict JSON `{"key": ["a", "b", ...]}`.
pub fn serialize_string_list(key: &str, items: &[String]) -> String {
    let rows: Vec<Value> = items.iter().map(|s| Value::String(s.clone())).collect();
    let mut obj = serde_json::Map::new();
    obj.insert(key.to_owned(), Value::Array(rows));
    Value::Object(obj).to_string()
}

fn triplet_from(parts: &[Value], index: usize) -> Result<Triplet, ExtractError> {
    let mut fields = Vec::with_capacity(3);
    for part in parts {
        if !is_scalar(part) {
            return Err(ExtractError::NonScalar { index });
        }
        fields.push(scalar_text(part));
    }
    Ok(Triplet::new(
        fields[0].clone(),
        fields[1].clone(),
        fields[2].clone(),
    ))
}

fn is_scalar(v: &Value) -> bool {
    matches!(
        v,
        Value::String(_) | Value::Number(_) | Value::Bool(_) | Value::Null
    )
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.trim().to_owned(),
        Value::Number(n) => n.to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Null => "null".to_owned(),
        _ => unreachable!("callers check is_scalar first"),
    }
}

fn kind_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "a list",
        Value::Object(_) => "an object",
    }
}

/// Fenced code block contents first (most models put the payload there),
/// then the whole reply as a fallback.
fn candidate_texts(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = text;
    let mut offset = 0;
    while let Some(open) = rest.find("```") {
        let after_open = &rest[open + 3..];
        let Some(close) = after_open.find("```") else {
            break;
        };
        let block = &after_open[..close];
        // Drop the info string ("json", "python") on the opening line, but
        // keep single-line blocks whose first line already holds data.
        let content = match block.find('\n') {
            Some(nl) if !block[..nl].contains('{') => &block[nl + 1..],
            _ => block,
        };
        let start = offset + open + 3 + (content.as_ptr() as usize - after_open.as_ptr() as usize);
        out.push(&text[start..start + content.len()]);
        offset += open + 3 + close + 3;
        rest = &text[offset..];
    }
    out.push(text);
    out
}

/// Balanced top-level `{...}` spans, ignoring braces inside quoted strings
/// of either style.
fn object_spans(text: &str) -> Vec<&str> {
    let bytes = text.as_bytes();
    let mut spans = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    let mut in_double = false;
    let mut in_single = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate() {
        if in_double {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_double = false;
            }
            continue;
        }
        if in_single {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'\'' {
                in_single = false;
            }
            continue;
        }
        match b {
            b'"' => in_double = true,
            b'\'' if depth > 0 => in_single = true,
            b'{' => {
                if depth == 0 {
                    start = i;
                }
                depth += 1;
            }
            b'}' if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    spans.push(&text[start..=i]);
                }
            }
            _ => {}
        }
    }
    spans
}

enum Token {
    Punct(char),
    /// Double-quoted content, emitted verbatim.
    StrRaw(String),
    /// Single-quoted content, escaped on emission.
    StrDecoded(String),
    /// Unquoted run, classified as number/keyword/string on emission.
    Bare(String),
}

fn lex(text: &str) -> Result<Vec<Token>, ()> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '"' => {
                let mut raw = String::new();
                let mut escaped = false;
                i += 1;
                loop {
                    if i >= chars.len() {
                        return Err(()); // unterminated string
                    }
                    let ch = chars[i];
                    if escaped {
                        raw.push(ch);
                        escaped = false;
                    } else if ch == '\\' {
                        raw.push(ch);
                        escaped = true;
                    } else if ch == '"' {
                        break;
                    } else {
                        raw.push(ch);
                    }
                    i += 1;
                }
                tokens.push(Token::StrRaw(raw));
                i += 1;
            }
            '\'' => {
                let mut decoded = String::new();
                i += 1;
                loop {
                    if i >= chars.len() {
                        return Err(());
                    }
                    let ch = chars[i];
                    if ch == '\\' && i + 1 < chars.len() {
                        decoded.push(chars[i + 1]);
                        i += 2;
                        continue;
                    }
                    if ch == '\'' {
                        break;
                    }
                    decoded.push(ch);
                    i += 1;
                }
                tokens.push(Token::StrDecoded(decoded));
                i += 1;
            }
            '{' | '}' | '[' | ']' | ',' | ':' => {
                tokens.push(Token::Punct(c));
                i += 1;
            }
            '(' => {
                tokens.push(Token::Punct('['));
                i += 1;
            }
            ')' => {
                tokens.push(Token::Punct(']'));
                i += 1;
            }
            _ if c.is_whitespace() => i += 1,
            _ => {
                let mut run = String::new();
                while i < chars.len() && !"{}[](),:\"'".contains(chars[i]) {
                    run.push(chars[i]);
                    i += 1;
                }
                let collapsed = run.split_whitespace().collect::<Vec<_>>().join(" ");
                if !collapsed.is_empty() {
                    tokens.push(Token::Bare(collapsed));
                }
            }
        }
    }
    Ok(tokens)
}

fn emit(tokens: &[Token]) -> String {
    let mut out = String::new();
    for (i, token) in tokens.iter().enumerate() {
        match token {
            Token::Punct(',') => {
                // Trailing commas are dropped.
                if matches!(tokens.get(i + 1), Some(Token::Punct('}' | ']'))) {
                    continue;
                }
                out.push(',');
            }
            Token::Punct(c) => out.push(*c),
            Token::StrRaw(s) => {
                out.push('"');
                out.push_str(s);
                out.push('"');
            }
            Token::StrDecoded(s) => push_escaped(&mut out, s),
            Token::Bare(s) => {
                if s == "true" || s == "false" || s == "null" || is_json_number(s) {
                    out.push_str(s);
                } else {
                    push_escaped(&mut out, s);
                }
            }
        }
    }
    out
}

fn push_escaped(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
}

fn is_json_number(s: &str) -> bool {
    s.chars().all(|c| c.is_ascii_digit() || "+-.eE".contains(c)) && s.parse::<f64>().is_ok()
}

/// Breadth-first search for the shallowest object that has `key` as a
/// member.
fn shallowest_with_key<'a>(root: &'a Value, key: &str) -> Option<&'a Value> {
    let mut queue = VecDeque::new();
    queue.push_back(root);
    while let Some(value) = queue.pop_front() {
        match value {
            Value::Object(map) => {
                if let Some(found) = map.get(key) {
                    return Some(found);
                }
                queue.extend(map.values());
            }
            Value::Array(items) => queue.extend(items.iter()),
            _ => {}
        }
    }
    None
}
