//! Text cleaning and whitespace tokenization for short product texts.
//!
//! Cleaning is a fixed six-step pipeline: HTML tags, accent
//! transliteration, non-ASCII removal, non-printable removal,
//! punctuation removal and lower-casing. Tokens are then split at every
//! letter/digit boundary (`"12cm"` becomes `"12"`, `"cm"`). There is no
//! stemming, lemmatization or stop-word removal.

use std::fmt;

use unicode_normalization::UnicodeNormalization;

/// An ordered list of cleaned tokens.
///
/// Every token is non-empty, made only of lowercase ASCII letters or only
/// of ASCII digits.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    /// Builds a sequence from pre-split tokens, validating every token.
    pub fn new<I, S>(tokens: I) -> Result<Self, InvalidToken>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        for t in &tokens {
            if !is_valid_token(t) {
                return Err(InvalidToken(t.clone()));
            }
        }
        Ok(TokenSequence(tokens))
    }

    pub fn empty() -> Self {
        TokenSequence(Vec::new())
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, String> {
        self.0.iter()
    }

    /// Appends another sequence (used to concatenate fields).
    pub fn extend(&mut self, other: TokenSequence) {
        self.0.extend(other.0);
    }

    /// Space-joined form; `tokenize` on it yields the same sequence.
    pub fn join(&self) -> String {
        self.0.join(" ")
    }
}

impl fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.join())
    }
}

impl<'a> IntoIterator for &'a TokenSequence {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid token {0:?}: tokens must be all lowercase letters or all digits")]
pub struct InvalidToken(pub String);

fn is_valid_token(t: &str) -> bool {
    !t.is_empty() && (t.bytes().all(|b| b.is_ascii_lowercase()) || t.bytes().all(|b| b.is_ascii_digit()))
}

/// Applies the cleaning pipeline. Output only contains `[a-z0-9 ]`.
pub fn clean_text(raw: &str) -> String {
    let untagged = strip_html_tags(raw);
    let mut out = String::with_capacity(untagged.len());
    for ch in untagged.chars() {
        if ch.is_ascii() {
            push_ascii(&mut out, ch);
        } else {
            for base in transliterate(ch) {
                push_ascii(&mut out, base);
            }
        }
    }
    out
}

// Steps 4-6 for a single ASCII character.
fn push_ascii(out: &mut String, ch: char) {
    match ch {
        'a'..='z' | '0'..='9' | ' ' => out.push(ch),
        'A'..='Z' => out.push(ch.to_ascii_lowercase()),
        '\t' | '\n' | '\r' | '\x0b' | '\x0c' => out.push(' '),
        c if c.is_ascii_control() => {}
        // remaining printable ASCII is punctuation
        _ => out.push(' '),
    }
}

/// Maps a non-ASCII character to its ASCII base letters, or nothing.
fn transliterate(ch: char) -> impl Iterator<Item = char> {
    let special: Option<&'static str> = match ch {
        'ß' => Some("ss"),
        'æ' => Some("ae"),
        'Æ' => Some("AE"),
        'œ' => Some("oe"),
        'Œ' => Some("OE"),
        'ø' => Some("o"),
        'Ø' => Some("O"),
        'đ' => Some("d"),
        'Đ' => Some("D"),
        'ł' => Some("l"),
        'Ł' => Some("L"),
        'ı' => Some("i"),
        'þ' => Some("th"),
        'Þ' => Some("TH"),
        'ð' => Some("d"),
        'Ð' => Some("D"),
        _ => None,
    };
    let mapped: Vec<char> = match special {
        Some(s) => s.chars().collect(),
        None => {
            // Keep the decomposition only if it is an ASCII letter plus
            // combining marks; anything else is dropped.
            let decomposed: Vec<char> = std::iter::once(ch).nfd().collect();
            match decomposed.split_first() {
                Some((base, marks)) if base.is_ascii_alphabetic() && marks.iter().all(|m| is_combining(*m)) => {
                    vec![*base]
                }
                _ => Vec::new(),
            }
        }
    };
    mapped.into_iter()
}

fn is_combining(c: char) -> bool {
    matches!(c as u32, 0x0300..=0x036F | 0x1AB0..=0x1AFF | 0x1DC0..=0x1DFF | 0x20D0..=0x20FF)
}

/// Removes `<...>` spans. A removed tag acts as a word separator: a space
/// is inserted only when the tag sat directly between two non-space
/// characters. An unterminated `<` is kept as text.
fn strip_html_tags(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut pending_separator = false;
    let mut rest = raw;
    while let Some(start) = rest.find('<') {
        let Some(len) = rest[start..].find('>') else {
            break;
        };
        push_segment(&mut out, &rest[..start], &mut pending_separator);
        pending_separator = true;
        rest = &rest[start + len + 1..];
    }
    push_segment(&mut out, rest, &mut pending_separator);
    out
}

fn push_segment(out: &mut String, segment: &str, pending_separator: &mut bool) {
    if segment.is_empty() {
        return;
    }
    if *pending_separator {
        let prev_is_text = out.chars().last().is_some_and(|c| !c.is_whitespace());
        let next_is_text = segment.chars().next().is_some_and(|c| !c.is_whitespace());
        if prev_is_text && next_is_text {
            out.push(' ');
        }
        *pending_separator = false;
    }
    out.push_str(segment);
}

/// Splits a whitespace-free token at every letter/digit boundary.
pub fn split_mixed_token(token: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut start = 0;
    let mut prev_digit: Option<bool> = None;
    for (i, ch) in token.char_indices() {
        let digit = ch.is_ascii_digit();
        let alpha = ch.is_alphabetic();
        if !digit && !alpha {
            prev_digit = None;
            continue;
        }
        if let Some(p) = prev_digit {
            if p != digit {
                parts.push(&token[start..i]);
                start = i;
            }
        }
        prev_digit = Some(digit);
    }
    if start < token.len() || parts.is_empty() {
        parts.push(&token[start..]);
    }
    parts
}

/// Cleans, splits on whitespace runs and splits mixed letter/digit pieces.
pub fn tokenize(raw: &str) -> TokenSequence {
    let cleaned = clean_text(raw);
    let tokens = cleaned
        .split_whitespace()
        .flat_map(split_mixed_token)
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect();
    TokenSequence(tokens)
}

/// Brand normalization for flag lookup: cleaned, whitespace collapsed.
pub fn normalize_brand(raw: &str) -> String {
    clean_text(raw).split_whitespace().collect::<Vec<_>>().join(" ")
}
