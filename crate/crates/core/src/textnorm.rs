//! Deterministic transcript normalization and character tokenization.
//!
//! Scores are only comparable when hypothesis and reference pass through
//! the same normalization, so the policy travels inside every report.
//! Tokenization is character-based for Han text while maximal Latin runs
//! stay single tokens, which keeps an English acronym from counting as
//! three errors.

use serde::{Deserialize, Serialize};
use unicode_properties::{GeneralCategoryGroup, UnicodeGeneralCategory};

/// Normalization switches. Defaults enable everything; normalization is
/// idempotent under any fixed policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormPolicy {
    pub strip_punctuation: bool,
    pub fold_width: bool,
    pub lowercase_latin: bool,
    pub collapse_whitespace: bool,
}

impl Default for NormPolicy {
    fn default() -> Self {
        Self {
            strip_punctuation: true,
            fold_width: true,
            lowercase_latin: true,
            collapse_whitespace: true,
        }
    }
}

fn fold_width_char(c: char) -> char {
    match c {
        // fullwidth ASCII block
        '\u{FF01}'..='\u{FF5E}' => char::from_u32(c as u32 - 0xFEE0).unwrap_or(c),
        // ideographic space
        '\u{3000}' => ' ',
        _ => c,
    }
}

fn is_latin_letter(c: char) -> bool {
    c.is_alphabetic() && (c as u32) < 0x250
}

fn is_token_alnum(c: char) -> bool {
    is_latin_letter(c) || c.is_ascii_digit()
}

/// Applies the policy: width folding, punctuation removal, Latin
/// lowercasing, then whitespace collapsing (runs vanish between Han
/// characters and shrink to one space inside Latin/digit runs).
pub fn normalize_transcript(text: &str, policy: &NormPolicy) -> String {
    let mut chars: Vec<char> = Vec::with_capacity(text.len());
    for raw in text.chars() {
        let c = if policy.fold_width {
            fold_width_char(raw)
        } else {
            raw
        };
        if policy.strip_punctuation
            && c.general_category_group() == GeneralCategoryGroup::Punctuation
        {
            continue;
        }
        if policy.lowercase_latin && is_latin_letter(c) && c.is_uppercase() {
            chars.extend(c.to_lowercase());
        } else {
            chars.push(c);
        }
    }

    if !policy.collapse_whitespace {
        return chars.into_iter().collect();
    }

    let mut out = String::with_capacity(chars.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if !c.is_whitespace() {
            out.push(c);
            i += 1;
            continue;
        }
        // collapse the whole whitespace run
        let mut j = i;
        while j < chars.len() && chars[j].is_whitespace() {
            j += 1;
        }
        let prev_alnum = out.chars().last().map(is_token_alnum).unwrap_or(false);
        let next_alnum = chars.get(j).map(|&c| is_token_alnum(c)).unwrap_or(false);
        if prev_alnum && next_alnum {
            out.push(' ');
        }
        i = j;
    }
    out
}

/// Splits normalized text into scoring tokens: one token per Han
/// character, digit or other non-Latin scalar; maximal Latin-letter runs
/// form a single token. Whitespace separates and is dropped.
pub fn tokenize_chars(text: &str) -> Vec<&str> {
    let mut tokens = Vec::new();
    let mut run_start: Option<usize> = None;
    for (idx, c) in text.char_indices() {
        if is_latin_letter(c) {
            if run_start.is_none() {
                run_start = Some(idx);
            }
            continue;
        }
        if let Some(start) = run_start.take() {
            tokens.push(&text[start..idx]);
        }
        if !c.is_whitespace() {
            tokens.push(&text[idx..idx + c.len_utf8()]);
        }
    }
    if let Some(start) = run_start {
        tokens.push(&text[start..]);
    }
    tokens
}
