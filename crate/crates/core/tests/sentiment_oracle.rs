use commbias::sentiment::{compound, SentimentAnalyzer};
use proptest::prelude::*;
use serde::Deserialize;

#[derive(Deserialize)]
struct OracleRow {
    text: String,
    compound: f64,
    raw_compound: f64,
    pos: f64,
    neu: f64,
    neg: f64,
}

fn oracle_rows() -> Vec<OracleRow> {
    include_str!("fixtures/vader_oracle.jsonl")
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn matches_reference_on_validation_corpus() {
    let rows = oracle_rows();
    assert_eq!(rows.len(), 500);
    let analyzer = SentimentAnalyzer::default();
    let mut worst = 0.0f64;
    for row in &rows {
        let got = analyzer.compound(&row.text);
        let err = (got.compound - row.compound).abs();
        worst = worst.max(err);
        assert!(err <= 1e-6, "{:?}: got {} want {}", row.text, got.compound, row.compound);
        assert!((got.raw_compound - row.raw_compound).abs() <= 1e-9, "{:?}", row.text);
        if row.pos + row.neu + row.neg > 0.0 {
            assert!((got.pos - row.pos).abs() <= 1e-9, "{:?}", row.text);
            assert!((got.neu - row.neu).abs() <= 1e-9, "{:?}", row.text);
            assert!((got.neg - row.neg).abs() <= 1e-9, "{:?}", row.text);
        }
    }
    assert!(worst <= 1e-6);
}

proptest! {
    #[test]
    fn compound_in_range_and_deterministic(s in "\\PC{0,80}") {
        let a = compound(&s);
        prop_assert!((-1.0..=1.0).contains(&a.compound));
        prop_assert!((a.pos + a.neu + a.neg - 1.0).abs() < 1e-6);
        prop_assert_eq!(a, compound(&s));
    }

    #[test]
    fn compound_in_range_for_sentiment_words(words in prop::collection::vec(
        prop::sample::select(vec!["good", "BAD", "not", "very", "but", "no", "!!!", "??", "least", "kind", "of", "the", "shit", "never", "so"]), 0..30)) {
        let text = words.join(" ");
        let a = compound(&text);
        prop_assert!((-1.0..=1.0).contains(&a.compound));
    }
}
