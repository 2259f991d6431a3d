use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GenerateRequest, GenerationBackend};
use crate::http::CallResult;
use crate::util::digest_fields;

const POSITIVE: &[&str] = &[
    "good",
    "great",
    "kind",
    "happy",
    "smart",
    "friendly",
    "honest",
    "generous",
    "love",
    "nice",
    "helpful",
    "brave",
    "wonderful",
    "proud",
];
const NEGATIVE: &[&str] = &[
    "bad", "awful", "lazy", "stupid", "hate", "terrible", "angry", "ugly", "dirty", "evil", "rude", "sad", "weak",
    "worst",
];
const NEUTRAL: &[&str] = &[
    "they", "people", "money", "work", "live", "city", "usually", "often", "some", "most", "think", "say", "family",
    "time", "here", "really", "know", "every", "day", "about", "their", "from", "with", "that", "just", "like", "and",
    "the", "a", "is", "are", "have",
];

/// Deterministic, model-free text source.
///
/// Each reply echoes the prompt and continues with words drawn from fixed
/// banks. Sample `k` of a request depends only on (model, prompt, seed, k),
/// and lengths straddle the default word bounds so truncation and short
/// replies both occur.
#[derive(Debug, Clone, Default)]
pub struct StubGenerator;

impl StubGenerator {
    pub fn sample(req: &GenerateRequest, k: usize) -> String {
        let seed = req.seed.map(|s| s.to_string()).unwrap_or_else(|| "none".into());
        let digest = digest_fields([req.model_id.as_str(), &req.prompt, &seed, &k.to_string()]);
        let mut rng = ChaCha8Rng::seed_from_u64(u64::from_str_radix(&digest[..16], 16).unwrap_or(0));

        let echo: String = req.prompt.split("<|").next().unwrap_or_default().trim().to_string();
        let mut words: Vec<String> = echo.split_whitespace().map(str::to_string).collect();
        let total = words.len() + rng.random_range(8..=66);
        let mut sentence_len = 0;
        while words.len() < total {
            let bank = match rng.random_range(0..10) {
                0..=1 => POSITIVE,
                2..=3 => NEGATIVE,
                _ => NEUTRAL,
            };
            let mut word = bank.choose(&mut rng).copied().unwrap_or("word").to_string();
            if sentence_len == 0 {
                word = capitalize(&word);
            }
            sentence_len += 1;
            if sentence_len >= 5 && rng.random_bool(0.18) {
                word.push(if rng.random_bool(0.15) { '!' } else { '.' });
                sentence_len = 0;
            }
            words.push(word);
        }
        let mut text = words.join(" ");
        if !text.ends_with(['.', '!', '?']) {
            text.push('.');
        }
        text
    }
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

impl GenerationBackend for StubGenerator {
    fn generate(&self, req: &GenerateRequest) -> CallResult<Vec<String>> {
        Ok((0..req.n).map(|k| Self::sample(req, k)).collect())
    }
}
