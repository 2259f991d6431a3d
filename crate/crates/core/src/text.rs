//! Character-level text helpers shared by corpus cleaning and sentiment
//! scoring.

/// Map typographic quotes and primes to their ASCII counterparts.
pub fn straighten_quotes(text: &str) -> String {
    text.chars().map(straighten_char).collect()
}

pub(crate) fn straighten_char(c: char) -> char {
    match c {
        '\u{2018}' | '\u{2019}' | '\u{201A}' | '\u{201B}' | '\u{2032}' => '\'',
        '\u{201C}' | '\u{201D}' | '\u{201E}' | '\u{201F}' | '\u{2033}' => '"',
        other => other,
    }
}

pub(crate) fn is_typographic_quote(c: char) -> bool {
    straighten_char(c) != c
}

/// Whitespace as understood by Python's `str.split()`/`str.isspace()`:
/// Unicode `White_Space` plus the ASCII information separators U+001C..U+001F.
pub(crate) fn is_py_space(c: char) -> bool {
    c.is_whitespace() || ('\u{1C}'..='\u{1F}').contains(&c)
}

/// Python `str.split()` with no arguments.
pub(crate) fn py_split(text: &str) -> impl Iterator<Item = &str> {
    text.split(is_py_space).filter(|s| !s.is_empty())
}

/// Python `str.strip()` with no arguments.
pub(crate) fn py_strip(text: &str) -> &str {
    text.trim_matches(is_py_space)
}

/// Unicode general category Lt. Rust exposes no titlecase predicate.
fn is_titlecase(c: char) -> bool {
    matches!(c as u32,
        0x01C5 | 0x01C8 | 0x01CB | 0x01F2
        | 0x1F88..=0x1F8F | 0x1F98..=0x1F9F | 0x1FA8..=0x1FAF
        | 0x1FBC | 0x1FCC | 0x1FFC)
}

/// Python `str.isupper()`: at least one cased character and no lowercase or
/// titlecase characters.
pub(crate) fn py_isupper(text: &str) -> bool {
    let mut cased = false;
    for c in text.chars() {
        if c.is_lowercase() || is_titlecase(c) {
            return false;
        }
        if c.is_uppercase() {
            cased = true;
        }
    }
    cased
}
