//! Text cleaning and handle redaction for raw social-media records.
//!
//! The detectors at the bottom of this file are the same predicates the
//! cleaning passes remove, so "cleaned text has no residue" is checkable.

use std::sync::LazyLock;

use regex::Regex;

use crate::text::{is_typographic_quote, straighten_char};

static TAG: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"</?[A-Za-z][A-Za-z0-9-]*(?:\s[^<>]*)?/?>|<!--.*?-->").unwrap());
static MD_LINK: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[([^\[\]]*)\]\([^()\s]*\)").unwrap());
static URL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\b(?:https?://|www\.)\S+").unwrap());
static QUOTE_MARKER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?m)^[ \t]*(?:>[ \t]*)+").unwrap());
static HEADER_MARKER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?m)^[ \t]*#{1,6}[ \t]+").unwrap());
static EMPHASIS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\*\*|__|~~|`").unwrap());
static HANDLE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?:^|[^\w@/])(/?u/[A-Za-z0-9_-]+|@[A-Za-z0-9_]+)").unwrap());
static SPACES: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\s+").unwrap());

/// Clean one piece of raw text.
///
/// Decodes HTML entities and strips tags, removes emoji/pictographs,
/// zero-width and control characters, URLs and markdown artifacts, maps
/// typographic quotes to ASCII and collapses whitespace. The passes are
/// repeated until nothing changes, which makes the function idempotent even
/// for nested encodings such as `&amp;amp;`.
pub fn clean_text(raw: &str) -> String {
    let mut current = raw.to_string();
    loop {
        let next = clean_once(&current);
        if next == current {
            return next;
        }
        current = next;
    }
}

fn clean_once(raw: &str) -> String {
    let decoded = html_escape::decode_html_entities(raw);
    let no_tags = TAG.replace_all(&decoded, " ");
    let links = MD_LINK.replace_all(&no_tags, "$1");
    let no_urls = URL.replace_all(&links, " ");
    let no_quotes = QUOTE_MARKER.replace_all(&no_urls, "");
    let no_headers = HEADER_MARKER.replace_all(&no_quotes, "");
    let no_emphasis = EMPHASIS.replace_all(&no_headers, "");
    let filtered: String = no_emphasis
        .chars()
        .filter_map(|c| {
            if is_emoji(c) || is_invisible(c) || (c.is_control() && !c.is_whitespace()) {
                None
            } else {
                Some(straighten_char(c))
            }
        })
        .collect();
    SPACES.replace_all(&filtered, " ").trim().to_string()
}

/// Remove platform user handles (`/u/name`, `u/name`, `@handle`).
pub fn redact_personal(text: &str) -> String {
    let mut current = text.to_string();
    loop {
        let next = HANDLE
            .replace_all(&current, |caps: &regex::Captures<'_>| {
                let whole = caps.get(0).unwrap().as_str();
                let handle = caps.get(1).unwrap().as_str();
                whole[..whole.len() - handle.len()].to_string()
            })
            .into_owned();
        if next == current {
            break;
        }
        current = next;
    }
    if current == text {
        return current;
    }
    SPACES.replace_all(&current, " ").trim().to_string()
}

/// Emoji and pictographic code points removed by [`clean_text`].
pub fn is_emoji(c: char) -> bool {
    matches!(c as u32,
        0x1F000..=0x1FAFF
        | 0x2600..=0x27BF
        | 0x2300..=0x23FF
        | 0x2B00..=0x2BFF
        | 0xFE00..=0xFE0F
        | 0xE0000..=0xE007F
        | 0x20E3
        | 0x203C | 0x2049 | 0x2139
        | 0x2194..=0x2199 | 0x21A9..=0x21AA
        | 0x24C2 | 0x25AA..=0x25AB | 0x25B6 | 0x25C0 | 0x25FB..=0x25FE
        | 0x2934..=0x2935
        | 0x3030 | 0x303D | 0x3297 | 0x3299)
}

/// Zero-width, soft-hyphen and bidi formatting characters.
fn is_invisible(c: char) -> bool {
    matches!(c as u32,
        0x00AD | 0x200B..=0x200F | 0x202A..=0x202E | 0x2060..=0x2069 | 0xFEFF)
}

/// True when `text` still contains a decodable HTML entity or a tag.
pub fn has_html_residue(text: &str) -> bool {
    html_escape::decode_html_entities(text) != text || TAG.is_match(text)
}

pub fn has_emoji_residue(text: &str) -> bool {
    text.chars().any(is_emoji)
}

pub fn has_handle_residue(text: &str) -> bool {
    HANDLE.is_match(text)
}

pub fn has_invisible_residue(text: &str) -> bool {
    text.chars().any(|c| is_invisible(c) || is_typographic_quote(c) || (c.is_control() && c != '\n'))
}
