//! Rule-based sentiment scoring (VADER).
//!
//! This is a line-for-line behavioural port of the `vaderSentiment` 3.3.2
//! reference implementation, including its quirks (the contrastive "but"
//! adjustment rescales the *first* sentiment equal to each value, the
//! three-word negation window, the 4-decimal rounding of `compound`).
//! The lexicons and rule tables are vendored under `data/vader/` and loaded
//! verbatim; `scripts/extract_vader_rules.py` regenerates `rules.json` from the
//! reference package.
//!
//! Input text is normalized by straightening typographic quotes before
//! scoring, so "doesn’t" and "doesn't" are the same token.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::{Arc, LazyLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{py_isupper, py_split, py_strip, straighten_quotes};

pub const LEXICON_TXT: &str = include_str!("../data/vader/vader_lexicon.txt");
pub const EMOJI_LEXICON_TXT: &str = include_str!("../data/vader/emoji_utf8_lexicon.txt");
pub const RULES_JSON: &str = include_str!("../data/vader/rules.json");

/// SHA-256 of the lexicon files shipped with vaderSentiment 3.3.2.
pub const REFERENCE_LEXICON_SHA256: &str = "1ec9c6e9ee19aade328f8beb393a6afa71a5bb3acf7d3cc22d4ef568df374bf5";
pub const REFERENCE_EMOJI_LEXICON_SHA256: &str = "b8d54223ae1ce22a3e12c1f745316b71678c328eb5f5d3063a842f37cfbe2823";

/// Lower bound (inclusive) of the positive label.
pub const POSITIVE_THRESHOLD: f64 = 0.05;
/// Upper bound (inclusive) of the negative label.
pub const NEGATIVE_THRESHOLD: f64 = -0.05;

#[derive(Debug, Clone, Deserialize)]
pub struct RuleSource {
    pub package: String,
    pub version: String,
    pub lexicon_sha256: String,
    pub emoji_lexicon_sha256: String,
}

/// Constants and word lists of the reference scorer.
#[derive(Debug, Clone, Deserialize)]
pub struct VaderRules {
    pub source: RuleSource,
    pub b_incr: f64,
    pub b_decr: f64,
    pub c_incr: f64,
    pub n_scalar: f64,
    pub normalize_alpha: f64,
    pub exclamation_increment: f64,
    pub exclamation_cap: usize,
    pub question_increment: f64,
    pub question_cap_count: usize,
    pub question_flood_amplifier: f64,
    pub booster_distance_damping: [f64; 3],
    pub never_so_this_factor: f64,
    pub but_before_factor: f64,
    pub but_after_factor: f64,
    pub negate: Vec<String>,
    pub booster: HashMap<String, f64>,
    pub special_cases: HashMap<String, f64>,
    /// Listed by the reference but never consulted by its scorer.
    #[serde(default)]
    pub sentiment_laden_idioms: HashMap<String, f64>,
}

/// Immutable scoring data: token valences, emoji descriptions and rules.
#[derive(Debug, Clone)]
pub struct ValenceLexicon {
    valence: HashMap<String, f64>,
    emoji: HashMap<char, String>,
    negate: HashSet<String>,
    rules: VaderRules,
}

impl ValenceLexicon {
    /// Parse the three data sources. Lines follow the reference format:
    /// `token<TAB>mean<TAB>...` for the valence lexicon and
    /// `emoji<TAB>description` for the emoji lexicon.
    pub fn parse(lexicon: &str, emoji: &str, rules_json: &str) -> Result<Self> {
        let rules: VaderRules = serde_json::from_str(rules_json)?;
        let mut valence = HashMap::new();
        for (idx, line) in lexicon.trim_end_matches('\n').split('\n').enumerate() {
            if line.is_empty() {
                continue;
            }
            let mut cols = py_strip(line).split('\t');
            let (Some(word), Some(measure)) = (cols.next(), cols.next()) else {
                return Err(Error::Lexicon { line: idx + 1, message: "expected token and valence columns".into() });
            };
            let value: f64 = measure
                .trim()
                .parse()
                .map_err(|_| Error::Lexicon { line: idx + 1, message: format!("bad valence {measure:?}") })?;
            if !value.is_finite() {
                return Err(Error::Lexicon { line: idx + 1, message: "non-finite valence".into() });
            }
            valence.insert(word.to_string(), value);
        }
        if valence.is_empty() {
            return Err(Error::Lexicon { line: 0, message: "empty valence lexicon".into() });
        }
        let mut emoji_map = HashMap::new();
        for line in emoji.trim_end_matches('\n').split('\n') {
            let mut cols = py_strip(line).split('\t');
            let (Some(key), Some(description)) = (cols.next(), cols.next()) else {
                continue;
            };
            // Lookup happens per code point, so multi-code-point keys never match.
            let mut chars = key.chars();
            if let (Some(c), None) = (chars.next(), chars.next()) {
                emoji_map.insert(c, description.to_string());
            }
        }
        if rules.booster.values().any(|v| !v.is_finite()) {
            return Err(Error::Lexicon { line: 0, message: "non-finite booster increment".into() });
        }
        let negate = rules.negate.iter().cloned().collect();
        Ok(Self { valence, emoji: emoji_map, negate, rules })
    }

    /// The vendored reference data.
    pub fn reference() -> Arc<ValenceLexicon> {
        static REFERENCE: LazyLock<Arc<ValenceLexicon>> = LazyLock::new(|| {
            Arc::new(
                ValenceLexicon::parse(LEXICON_TXT, EMOJI_LEXICON_TXT, RULES_JSON)
                    .expect("vendored sentiment lexicon is valid"),
            )
        });
        REFERENCE.clone()
    }

    pub fn len(&self) -> usize {
        self.valence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valence.is_empty()
    }

    pub fn valence(&self, token: &str) -> Option<f64> {
        self.valence.get(token).copied()
    }

    pub fn rules(&self) -> &VaderRules {
        &self.rules
    }

    fn contains(&self, token: &str) -> bool {
        self.valence.contains_key(token)
    }

    fn booster(&self, token: &str) -> Option<f64> {
        self.rules.booster.get(token).copied()
    }

    fn negated(&self, word: &str) -> bool {
        self.negate.contains(word) || word.contains("n't")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentimentLabel {
    Positive,
    Neutral,
    Negative,
}

impl fmt::Display for SentimentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SentimentLabel::Positive => "positive",
            SentimentLabel::Neutral => "neutral",
            SentimentLabel::Negative => "negative",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentResult {
    /// Normalized score rounded to 4 decimals, as the reference reports it.
    pub compound: f64,
    /// Normalized score before rounding.
    pub raw_compound: f64,
    pub pos: f64,
    pub neu: f64,
    pub neg: f64,
    pub label: SentimentLabel,
}

/// Label a compound score: `>= 0.05` positive, `<= -0.05` negative.
pub fn classify(compound: f64) -> Result<SentimentLabel> {
    if !compound.is_finite() || !(-1.0..=1.0).contains(&compound) {
        return Err(Error::InvalidArgument(format!("compound score {compound} outside [-1, 1]")));
    }
    Ok(if compound >= POSITIVE_THRESHOLD {
        SentimentLabel::Positive
    } else if compound <= NEGATIVE_THRESHOLD {
        SentimentLabel::Negative
    } else {
        SentimentLabel::Neutral
    })
}

/// Python's `round(x, ndigits)`: correctly rounded, ties to even on the exact
/// binary value. Rust's fixed-precision formatting has the same semantics.
pub fn py_round(x: f64, ndigits: usize) -> f64 {
    format!("{x:.ndigits$}").parse().expect("formatted float parses")
}

#[derive(Debug, Clone)]
pub struct SentimentAnalyzer {
    lexicon: Arc<ValenceLexicon>,
}

impl Default for SentimentAnalyzer {
    fn default() -> Self {
        Self::new(ValenceLexicon::reference())
    }
}

struct Tokens {
    words: Vec<String>,
    lower: Vec<String>,
    is_cap_diff: bool,
}

impl SentimentAnalyzer {
    pub fn new(lexicon: Arc<ValenceLexicon>) -> Self {
        Self { lexicon }
    }

    pub fn lexicon(&self) -> &ValenceLexicon {
        &self.lexicon
    }

    /// Score `text` after straightening typographic quotes.
    pub fn compound(&self, text: &str) -> SentimentResult {
        self.polarity_scores(&straighten_quotes(text))
    }

    /// Score `text` exactly as given.
    pub fn polarity_scores(&self, text: &str) -> SentimentResult {
        let text = self.replace_emoji(text);
        let text = py_strip(&text);
        let tokens = tokenize(text);
        let lex = &*self.lexicon;

        let mut sentiments: Vec<f64> = Vec::with_capacity(tokens.words.len());
        for (i, lower) in tokens.lower.iter().enumerate() {
            if lex.booster(lower).is_some() {
                sentiments.push(0.0);
                continue;
            }
            if i + 1 < tokens.words.len() && lower == "kind" && tokens.lower[i + 1] == "of" {
                sentiments.push(0.0);
                continue;
            }
            sentiments.push(self.sentiment_valence(&tokens, i));
        }
        self.but_check(&tokens.lower, &mut sentiments);
        self.score_valence(&sentiments, text)
    }

    fn replace_emoji(&self, text: &str) -> String {
        let mut out = String::with_capacity(text.len());
        let mut prev_space = true;
        for c in text.chars() {
            if let Some(description) = self.lexicon.emoji.get(&c) {
                if !prev_space {
                    out.push(' ');
                }
                out.push_str(description);
                prev_space = false;
            } else {
                out.push(c);
                prev_space = c == ' ';
            }
        }
        out
    }

    fn sentiment_valence(&self, tokens: &Tokens, i: usize) -> f64 {
        let lex = &*self.lexicon;
        let rules = &lex.rules;
        let words = &tokens.words;
        let lower = &tokens.lower;
        let item = &words[i];
        let item_lower = &lower[i];
        let Some(base) = lex.valence(item_lower) else {
            return 0.0;
        };
        let mut valence = base;

        // "no" directly before another lexicon word acts as a negator, not
        // as a sentiment word of its own.
        if item_lower == "no" && i != words.len() - 1 && lex.contains(&lower[i + 1]) {
            valence = 0.0;
        }
        if (i > 0 && lower[i - 1] == "no")
            || (i > 1 && lower[i - 2] == "no")
            || (i > 2 && lower[i - 3] == "no" && (lower[i - 1] == "or" || lower[i - 1] == "nor"))
        {
            valence = base * rules.n_scalar;
        }

        if py_isupper(item) && tokens.is_cap_diff {
            if valence > 0.0 {
                valence += rules.c_incr;
            } else {
                valence -= rules.c_incr;
            }
        }

        for start_i in 0..3 {
            if i > start_i && !lex.contains(&lower[i - (start_i + 1)]) {
                let mut s = self.scalar_inc_dec(
                    &words[i - (start_i + 1)],
                    &lower[i - (start_i + 1)],
                    valence,
                    tokens.is_cap_diff,
                );
                if start_i > 0 && s != 0.0 {
                    s *= rules.booster_distance_damping[start_i];
                }
                valence += s;
                valence = self.negation_check(valence, lower, start_i, i);
                if start_i == 2 {
                    valence = self.special_idioms_check(valence, lower, i);
                }
            }
        }

        self.least_check(valence, lower, i)
    }

    fn scalar_inc_dec(&self, word: &str, word_lower: &str, valence: f64, is_cap_diff: bool) -> f64 {
        let rules = &self.lexicon.rules;
        let Some(mut scalar) = self.lexicon.booster(word_lower) else {
            return 0.0;
        };
        if valence < 0.0 {
            scalar *= -1.0;
        }
        if py_isupper(word) && is_cap_diff {
            if valence > 0.0 {
                scalar += rules.c_incr;
            } else {
                scalar -= rules.c_incr;
            }
        }
        scalar
    }

    fn negation_check(&self, valence: f64, lower: &[String], start_i: usize, i: usize) -> f64 {
        let lex = &*self.lexicon;
        let n = lex.rules.n_scalar;
        let amplify = lex.rules.never_so_this_factor;
        let so_or_this = |w: &str| w == "so" || w == "this";
        match start_i {
            0 => {
                if lex.negated(&lower[i - 1]) {
                    return valence * n;
                }
            }
            1 => {
                if lower[i - 2] == "never" && so_or_this(&lower[i - 1]) {
                    return valence * amplify;
                } else if lower[i - 2] == "without" && lower[i - 1] == "doubt" {
                    return valence;
                } else if lex.negated(&lower[i - 2]) {
                    return valence * n;
                }
            }
            2 => {
                // The reference groups this as (never ∧ so/this@-2) ∨ so/this@-1.
                if (lower[i - 3] == "never" && so_or_this(&lower[i - 2])) || so_or_this(&lower[i - 1]) {
                    return valence * amplify;
                } else if lower[i - 3] == "without" && (lower[i - 2] == "doubt" || lower[i - 1] == "doubt") {
                    return valence;
                } else if lex.negated(&lower[i - 3]) {
                    return valence * n;
                }
            }
            _ => {}
        }
        valence
    }

    fn special_idioms_check(&self, mut valence: f64, lower: &[String], i: usize) -> f64 {
        let rules = &self.lexicon.rules;
        let onezero = format!("{} {}", lower[i - 1], lower[i]);
        let twoonezero = format!("{} {} {}", lower[i - 2], lower[i - 1], lower[i]);
        let twoone = format!("{} {}", lower[i - 2], lower[i - 1]);
        let threetwoone = format!("{} {} {}", lower[i - 3], lower[i - 2], lower[i - 1]);
        let threetwo = format!("{} {}", lower[i - 3], lower[i - 2]);

        for seq in [&onezero, &twoonezero, &twoone, &threetwoone, &threetwo] {
            if let Some(&v) = rules.special_cases.get(seq.as_str()) {
                valence = v;
                break;
            }
        }
        if lower.len() - 1 > i {
            let zeroone = format!("{} {}", lower[i], lower[i + 1]);
            if let Some(&v) = rules.special_cases.get(&zeroone) {
                valence = v;
            }
        }
        if lower.len() - 1 > i + 1 {
            let zeroonetwo = format!("{} {} {}", lower[i], lower[i + 1], lower[i + 2]);
            if let Some(&v) = rules.special_cases.get(&zeroonetwo) {
                valence = v;
            }
        }
        for ngram in [&threetwoone, &threetwo, &twoone] {
            if let Some(&v) = rules.booster.get(ngram.as_str()) {
                valence += v;
            }
        }
        valence
    }

    fn least_check(&self, valence: f64, lower: &[String], i: usize) -> f64 {
        let lex = &*self.lexicon;
        let n = lex.rules.n_scalar;
        if i > 1 && !lex.contains(&lower[i - 1]) && lower[i - 1] == "least" {
            if lower[i - 2] != "at" && lower[i - 2] != "very" {
                return valence * n;
            }
        } else if i > 0 && !lex.contains(&lower[i - 1]) && lower[i - 1] == "least" {
            return valence * n;
        }
        valence
    }

    /// Reference behaviour: for each position the value found there is looked
    /// up again by equality, and the *first* equal entry is rescaled.
    fn but_check(&self, lower: &[String], sentiments: &mut [f64]) {
        let rules = &self.lexicon.rules;
        let Some(bi) = lower.iter().position(|w| w == "but") else {
            return;
        };
        for k in 0..sentiments.len() {
            let sentiment = sentiments[k];
            let si = sentiments.iter().position(|&s| s == sentiment).expect("value taken from the slice");
            if si < bi {
                sentiments[si] = sentiment * rules.but_before_factor;
            } else if si > bi {
                sentiments[si] = sentiment * rules.but_after_factor;
            }
        }
    }

    fn punctuation_emphasis(&self, text: &str) -> f64 {
        let rules = &self.lexicon.rules;
        let ep_count = text.matches('!').count().min(rules.exclamation_cap);
        let ep = ep_count as f64 * rules.exclamation_increment;
        let qm_count = text.matches('?').count();
        let qm = if qm_count > 1 {
            if qm_count <= rules.question_cap_count {
                qm_count as f64 * rules.question_increment
            } else {
                rules.question_flood_amplifier
            }
        } else {
            0.0
        };
        ep + qm
    }

    fn score_valence(&self, sentiments: &[f64], text: &str) -> SentimentResult {
        if sentiments.is_empty() {
            return SentimentResult {
                compound: 0.0,
                raw_compound: 0.0,
                pos: 0.0,
                neu: 1.0,
                neg: 0.0,
                label: SentimentLabel::Neutral,
            };
        }
        let mut sum_s: f64 = sentiments.iter().fold(0.0, |acc, s| acc + s);
        let amplifier = self.punctuation_emphasis(text);
        if sum_s > 0.0 {
            sum_s += amplifier;
        } else if sum_s < 0.0 {
            sum_s -= amplifier;
        }
        let raw = normalize(sum_s, self.lexicon.rules.normalize_alpha);

        let mut pos_sum = 0.0;
        let mut neg_sum = 0.0;
        let mut neu_count = 0usize;
        for &s in sentiments {
            if s > 0.0 {
                pos_sum += s + 1.0;
            }
            if s < 0.0 {
                neg_sum += s - 1.0;
            }
            if s == 0.0 {
                neu_count += 1;
            }
        }
        if pos_sum > neg_sum.abs() {
            pos_sum += amplifier;
        } else if pos_sum < neg_sum.abs() {
            neg_sum -= amplifier;
        }
        let total = pos_sum + neg_sum.abs() + neu_count as f64;
        let compound = py_round(raw, 4);
        SentimentResult {
            compound,
            raw_compound: raw,
            pos: (pos_sum / total).abs(),
            neu: (neu_count as f64 / total).abs(),
            neg: (neg_sum / total).abs(),
            label: classify(compound).expect("normalized score is within [-1, 1]"),
        }
    }
}

fn normalize(score: f64, alpha: f64) -> f64 {
    let norm = score / (score * score + alpha).sqrt();
    norm.clamp(-1.0, 1.0)
}

fn tokenize(text: &str) -> Tokens {
    let words: Vec<String> = py_split(text).map(strip_punc_if_word).collect();
    let lower: Vec<String> = words.iter().map(|w| w.to_lowercase()).collect();
    let allcaps = words.iter().filter(|w| py_isupper(w)).count();
    let differential = words.len() - allcaps;
    let is_cap_diff = differential > 0 && differential < words.len();
    Tokens { words, lower, is_cap_diff }
}

/// Strip leading/trailing ASCII punctuation unless that leaves two or fewer
/// characters (likely an emoticon such as ":)").
fn strip_punc_if_word(token: &str) -> String {
    let stripped = token.trim_matches(|c: char| c.is_ascii_punctuation());
    if stripped.chars().count() <= 2 {
        token.to_string()
    } else {
        stripped.to_string()
    }
}

/// Score with the vendored reference lexicon.
pub fn compound(text: &str) -> SentimentResult {
    static ANALYZER: LazyLock<SentimentAnalyzer> = LazyLock::new(SentimentAnalyzer::default);
    ANALYZER.compound(text)
}
