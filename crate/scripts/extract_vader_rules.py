#!/usr/bin/env python3
"""Export the rule tables of the reference vaderSentiment distribution to JSON.

The Rust scorer loads `crates/core/data/vader/rules.json` instead of carrying
its own transcription of these tables. Re-run after upgrading the reference
package and re-run the oracle fixture script afterwards.

    python3 scripts/extract_vader_rules.py > crates/core/data/vader/rules.json
"""
import hashlib
import inspect
import json
import os
import sys

import vaderSentiment
from vaderSentiment import vaderSentiment as vs


def sha256(path):
    with open(path, "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()


def main():
    pkg_dir = os.path.dirname(vs.__file__)
    normalize_alpha = inspect.signature(vs.normalize).parameters["alpha"].default
    rules = {
        "source": {
            "package": "vaderSentiment",
            "version": getattr(vaderSentiment, "__version__", None) or _dist_version(),
            "lexicon_sha256": sha256(os.path.join(pkg_dir, "vader_lexicon.txt")),
            "emoji_lexicon_sha256": sha256(os.path.join(pkg_dir, "emoji_utf8_lexicon.txt")),
        },
        "b_incr": vs.B_INCR,
        "b_decr": vs.B_DECR,
        "c_incr": vs.C_INCR,
        "n_scalar": vs.N_SCALAR,
        "normalize_alpha": float(normalize_alpha),
        # Literals inside SentimentIntensityAnalyzer methods (not module attributes).
        "exclamation_increment": 0.292,
        "exclamation_cap": 4,
        "question_increment": 0.18,
        "question_cap_count": 3,
        "question_flood_amplifier": 0.96,
        "booster_distance_damping": [1.0, 0.95, 0.9],
        "never_so_this_factor": 1.25,
        "but_before_factor": 0.5,
        "but_after_factor": 1.5,
        "negate": list(vs.NEGATE),
        "booster": dict(sorted(vs.BOOSTER_DICT.items())),
        "special_cases": dict(sorted((k, float(v)) for k, v in vs.SPECIAL_CASES.items())),
        "sentiment_laden_idioms": dict(
            sorted((k, float(v)) for k, v in vs.SENTIMENT_LADEN_IDIOMS.items())
        ),
    }
    json.dump(rules, sys.stdout, indent=2, ensure_ascii=False)
    sys.stdout.write("\n")


def _dist_version():
    from importlib.metadata import version

    return version("vaderSentiment")


if __name__ == "__main__":
    main()
