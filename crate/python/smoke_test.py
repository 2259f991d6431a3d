"""Smoke test for the commbias Python bindings.

Build and install first:

    cd crates/python && maturin build --release && pip install ../../target/wheels/commbias-*.whl

then run `python python/smoke_test.py`.
"""

import json
import pathlib
import tempfile

import commbias_py as cb


def main():
    analyzer = cb.SentimentAnalyzer()
    assert analyzer.compound("VADER is smart, handsome, and funny!") == 0.8439
    scores = analyzer.polarity_scores("I am rich. I am rich as fuck and you are poor as fuck. Stop being poor.")
    assert abs(scores["compound"] - (-0.802)) <= 0.005, scores
    assert cb.classify(0.05) == "positive"
    assert cb.classify(-0.05) == "negative"
    assert analyzer.score_many(["good", "bad"])[0] > 0

    assert cb.clean_text("<b>hi</b> u/someone 😀") == "hi"

    suite = cb.prompt_suite()
    assert len(suite) == 266
    assert {p["demographic_id"] for p in suite} >= {"woman", "muslim", "poor"}

    req = {
        "prompt": suite[0]["rendered"] + "<|reply|>",
        "n": 3,
        "min_tokens": 38,
        "max_tokens": 75,
        "no_repeat_ngram": 3,
        "seed": 1,
        "model_id": "stub",
    }
    texts = cb.stub_generate(req)
    assert len(texts) == 3 and texts == cb.stub_generate(req)

    records = []
    for i, p in enumerate(suite[:12]):
        for k in range(2):
            records.append({
                "prompt_id": p["prompt_id"],
                "model_id": "m",
                "demographic_id": p["demographic_id"],
                "dimension_id": p["dimension_id"],
                "template_id": p["template_id"],
                "sample_index": k,
                "sentiment_compound": analyzer.compound(texts[k % 3]),
                "toxicity": 0.1,
                "identity_attack": 0.01,
            })
    matrix = cb.aggregate(records, 2)
    assert matrix["schema_version"] == 1
    assert "m" in matrix["models"]

    with tempfile.TemporaryDirectory() as tmp:
        tmp = pathlib.Path(tmp)
        dump = tmp / "dump.jsonl"
        dump.write_text(
            json.dumps({"id": "p", "kind": "post", "title": "Hi", "body": "<p>there</p>"}) + "\n"
            + json.dumps({"id": "c", "kind": "comment", "parent_id": "p", "body": "yes 😀"}) + "\n"
        )
        manifest = cb.prepare_corpus([str(dump)], str(tmp / "train.jsonl"))
        assert manifest["examples_emitted"] == 1

        cfg = tmp / "run.toml"
        cfg.write_text(
            '[sampling]\nn_per_prompt = 1\n[run]\nseed = 5\nreproducible = true\n'
            '[[models]]\nid = "m"\nkind = "finetuned"\n'
        )
        assert "n_per_prompt = 1" in cb.load_config(str(cfg))
        try:
            cb.run_pipeline(str(cfg), stage="report")
        except cb.MissingPrerequisiteError:
            pass
        else:
            raise AssertionError("report without aggregates should fail")
        cb.run_pipeline(str(cfg))
        assert (tmp / "run" / "reports" / "matrices.md").exists()

        bad = tmp / "bad.toml"
        bad.write_text('[[models]]\nid = "m"\nkind = "huge"\n')
        try:
            cb.load_config(str(bad))
        except cb.ConfigError as e:
            assert "models[0].kind" in str(e)
        else:
            raise AssertionError("unknown model kind should be rejected")

    print("smoke test passed")


if __name__ == "__main__":
    main()
