use commbias::corpus::{
    clean_text, emit_training_file, has_emoji_residue, has_handle_residue, has_html_residue, has_invisible_residue,
    pair_examples, prepare, redact_personal, InputFormat, InputSpec, RawRecord,
};
use proptest::prelude::*;

fn noisy_text() -> impl Strategy<Value = String> {
    let pieces = prop::sample::select(vec![
        "hello",
        "&amp;",
        "&lt;b&gt;",
        "<i>",
        "</i>",
        "😀",
        "🚀",
        "\u{200B}",
        "https://x.io/a",
        "u/someone",
        "@handle",
        "/u/mod_2",
        "’",
        "“",
        "> ",
        "**",
        "[link](http://a.b)",
        "  ",
        "\n",
        "word",
        "!",
        "?",
        "&#128512;",
        "[deleted]",
        "&amp;amp;",
        "\u{FE0F}",
        "#",
    ]);
    prop::collection::vec(pieces, 0..20).prop_map(|v| v.concat())
}

proptest! {
    #[test]
    fn clean_is_idempotent(s in "\\PC{0,60}") {
        let once = clean_text(&s);
        prop_assert_eq!(clean_text(&once), once);
    }

    #[test]
    fn clean_is_idempotent_on_markup(s in noisy_text()) {
        let once = clean_text(&s);
        prop_assert_eq!(clean_text(&once), once.clone());
        let red = redact_personal(&once);
        prop_assert_eq!(redact_personal(&red), red);
    }

    #[test]
    fn emitted_examples_are_pure_and_counts_conserved(
        posts in prop::collection::vec((noisy_text(), noisy_text()), 1..5),
        comments in prop::collection::vec((0usize..7, noisy_text()), 0..15),
    ) {
        let mut records = Vec::new();
        for (i, (title, body)) in posts.iter().enumerate() {
            records.push(RawRecord::post(&format!("p{i}"), Some(title), body));
        }
        for (i, (parent, body)) in comments.iter().enumerate() {
            let parent = if *parent < posts.len() { format!("p{parent}") } else { format!("c{parent}") };
            records.push(RawRecord::comment(&format!("c{i}"), &parent, body));
        }
        records.reverse();
        let out = pair_examples(records.clone());
        prop_assert_eq!(out.examples.len() + out.dropped_total(), comments.len());
        for ex in &out.examples {
            for text in [&ex.post_text, &ex.comment_text] {
                prop_assert!(!text.is_empty());
                prop_assert!(!has_html_residue(text), "{:?}", text);
                prop_assert!(!has_emoji_residue(text), "{:?}", text);
                prop_assert!(!has_handle_residue(text), "{:?}", text);
                prop_assert!(!has_invisible_residue(text), "{:?}", text);
            }
        }
        records.reverse();
        prop_assert_eq!(pair_examples(records), out);
    }
}

#[test]
fn prepare_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("dump.jsonl");
    std::fs::write(
        &input,
        concat!(
            "{\"id\":\"c2\",\"kind\":\"comment\",\"parent_id\":\"p1\",\"body\":\"u/x said &gt; no 😀\"}\n",
            "{\"id\":\"p1\",\"kind\":\"post\",\"title\":\"Hi\",\"body\":\"<p>body</p>\"}\n",
            "{\"id\":\"c1\",\"kind\":\"comment\",\"parent_id\":\"p1\",\"body\":\"yes\"}\n",
            "{\"id\":\"c3\",\"kind\":\"comment\",\"parent_id\":\"zz\",\"body\":\"lost\"}\n",
            "{\"broken\": true}\n",
        ),
    )
    .unwrap();
    let spec = InputSpec::new(&input, InputFormat::Jsonl);
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    let ma = prepare(std::slice::from_ref(&spec), &a).unwrap();
    let mb = prepare(std::slice::from_ref(&spec), &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ma.checksum, mb.checksum);
    assert_eq!(ma.examples_emitted, 2);
    assert_eq!(ma.malformed_records, 1);
    assert_eq!(ma.total_comments, 3);
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(
        text,
        "{\"post\":\"Hi\\nbody\",\"comment\":\"yes\"}\n{\"post\":\"Hi\\nbody\",\"comment\":\"said > no\"}\n"
    );
    assert!(a.with_file_name("a.jsonl.manifest.json").exists());
}

#[test]
fn unwritable_destination_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = pair_examples(vec![RawRecord::post("p", None, "a"), RawRecord::comment("c", "p", "b")]);
    let err = emit_training_file(&out, vec![], &[], &blocker.join("sub/out.jsonl"));
    assert!(err.is_err());
}
