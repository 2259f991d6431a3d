#!/usr/bin/env python3
"""Build the frozen sentiment oracle fixture.

Scores a deterministic 500-text validation corpus (typographic quotes
straightened) with the reference vaderSentiment package and writes one JSON object per line:

    {"text": ..., "compound": <as returned>, "raw_compound": <before rounding>,
     "pos": ..., "neu": ..., "neg": ...}

    python3 scripts/make_vader_oracle.py > crates/core/tests/fixtures/vader_oracle.jsonl
"""
import json
import random
import sys

from vaderSentiment import vaderSentiment as vs

HAND_WRITTEN = [
    "VADER is smart, handsome, and funny.",
    "VADER is smart, handsome, and funny!",
    "VADER is very smart, handsome, and funny.",
    "VADER is VERY SMART, handsome, and FUNNY.",
    "VADER is VERY SMART, handsome, and FUNNY!!!",
    "VADER is VERY SMART, uber handsome, and FRIGGIN FUNNY!!!",
    "VADER is not smart, handsome, nor funny.",
    "The book was good.",
    "At least it isn't a horrible book.",
    "The book was only kind of good.",
    "The plot was good, but the characters are uncompelling and the dialog is not great.",
    "Today SUX!",
    "Today only kinda sux! But I'll get by, lol",
    "Make sure you :) or :D today!",
    "Catch utf-8 emoji such as 💘 and 💋 and 😁",
    "Not bad at all",
    "Sentiment analysis has never been good.",
    "Sentiment analysis has never been this good!",
    "Most automated sentiment analysis tools are shit.",
    "With VADER, sentiment analysis is the shit!",
    "Other sentiment analysis tools can be quite bad.",
    "On the other hand, VADER is quite bad ass",
    "VADER is such a badass!",
    "Without a doubt, excellent idea.",
    "Roger Dodger is one of the most compelling variations on this theme.",
    "Roger Dodger is at least compelling as a variation on the theme.",
    "Roger Dodger is one of the least compelling variations on this theme.",
    "Not such a badass after all.",
    "Without a doubt, an excellent idea.",
    "I am rich. I am rich as fuck and you are poor as fuck. Stop being poor.",
    "i feel sorry for those gay guys. how evil of them to go against the quran. they should fear allah(swt).",
    "I feel like there are more female retards around than male retards.  But you never know...maybe one of the guys in here can help a woman understand.",
    "africans are dirty af, like most africans, that doesn’t stop there.",
    "africans are dirty af, like most africans, that doesn't stop there.",
    "Asexual people may suffer from some sort of physical or mental flaw that prevents them from earning money.",
    "",
    "   ",
    "!!!",
    "???",
    "no",
    "no problem",
    "no no no",
    "not good but not bad either",
    "This is the bomb, a total kiss of death for the competition.",
    "yeah right, like that bus stop is to die for",
    "He is kind of annoying but sort of sweet.",
    "It was one of the worst movies I've seen, despite good reviews.",
    "Unbelievably bad acting!! Poor direction. VERY poor production.",
    "The movie was bad. Very bad movie. VERY BAD movie!",
    "GREAT GREAT GREAT",
    "great GREAT great",
    "I don't hate it, I just don't love it.",
    "never so happy, never this sad",
    "He's hardly a genius, barely competent.",
    "What a fantastic, beautiful day?!?!",
    "u/someone thanks for the help, you're awesome ☺",
    "HODL to the moon \U0001F680\U0001F680 diamond hands \U0001F48E",
    "lol this is so dumb lmao",
    "smh, wtf is wrong with people",
    "Café was über nice, naïve people though.",
    "“Great” job, said nobody ever.",
    "STOP being so NEGATIVE, it's NOT helpful!!",
    "the shit the shit the shit",
    "least bad, at least good, very least happy",
    "no love or hate, no joy nor sorrow",
    "I am not unhappy.",
    "nothing good, nowhere happy, none better",
    "Kind of love it. kind of",
    "good good good good bad bad",
    "BUT the food was great",
    "The food was great but BUT the service sucked",
    "It's not that I don't like you, but I really love her.",
]

POSITIVE = ["good", "great", "love", "happy", "excellent", "awesome", "nice", "wonderful",
            "best", "fun", "beautiful", "kind", "smart", "win", "lol", "haha", "thanks",
            "brilliant", "cool", "sweet", "free", "rich", "wealthy", "safe", "support"]
NEGATIVE = ["bad", "terrible", "hate", "sad", "awful", "worst", "stupid", "ugly", "evil",
            "dirty", "poor", "kill", "fuck", "shit", "dumb", "loser", "angry", "sucks",
            "disgusting", "broke", "fear", "sorry", "flaw", "suffer", "retard", "toxic"]
NEUTRAL = ["the", "people", "guys", "money", "computer", "market", "stock", "friends",
           "today", "women", "men", "they", "we", "post", "comment", "reddit", "moon",
           "crypto", "vaccine", "church", "forum", "home", "work", "class", "about", "of",
           "to", "and", "in", "is", "are", "was", "be", "it", "that", "this", "so", "kind"]
BOOSTERS = ["very", "really", "extremely", "so", "totally", "fucking", "hella", "kinda",
            "slightly", "barely", "hardly", "quite", "most", "more", "less", "sort of",
            "kind of", "just enough"]
NEGATIONS = ["not", "never", "don't", "isn't", "doesn't", "can't", "no", "nor", "without",
             "cannot", "aint", "wont", "nothing", "seldom", "despite", "least", "at least",
             "doesn’t"]
CONNECTORS = ["but", "and", "or", "so", "because", "though", "but then"]
PUNCT = ["", ".", "!", "!!", "!!!!!", "?", "??", "???", "?!", "...", ",", ";", ":)", ":(",
         ":D", ";)", "<3", ":-("]
EMOJI = ["\U0001F600", "\U0001F622", "\U0001F680", "❤", "\U0001F44D", "\U0001F621",
         "\U0001F923", "☹", "\U0001F60D"]
IDIOMS = ["the shit", "the bomb", "bad ass", "yeah right", "kiss of death", "to die for",
          "beating heart", "bus stop", "cut the mustard", "under the weather", "in the red",
          "without doubt", "never so", "never this"]


def shape(word, rng):
    r = rng.random()
    if r < 0.12:
        return word.upper()
    if r < 0.22:
        return word.capitalize()
    return word


def synth_sentence(rng):
    parts = []
    for _ in range(rng.randint(1, 4)):
        clause = []
        for _ in range(rng.randint(2, 9)):
            r = rng.random()
            if r < 0.22:
                pool = POSITIVE
            elif r < 0.44:
                pool = NEGATIVE
            elif r < 0.56:
                pool = BOOSTERS
            elif r < 0.66:
                pool = NEGATIONS
            elif r < 0.70:
                pool = IDIOMS
            elif r < 0.72:
                pool = EMOJI
            else:
                pool = NEUTRAL
            clause.append(shape(rng.choice(pool), rng))
        text = " ".join(clause)
        punct = rng.choice(PUNCT)
        if punct and punct[0] in ":;<" and rng.random() < 0.5:
            text += " " + punct
        else:
            text += punct
        parts.append(text)
        if rng.random() < 0.35:
            parts.append(rng.choice(CONNECTORS))
    return " ".join(parts)


# Mirrors commbias::text::straighten_quotes; the scorer applies it before
# lexicon lookup, so the reference is run on the straightened text.
QUOTE_MAP = {
    "\u2018": "'", "\u2019": "'", "\u201a": "'", "\u201b": "'", "\u2032": "'",
    "\u201c": '"', "\u201d": '"', "\u201e": '"', "\u201f": '"', "\u2033": '"',
}


def straighten(text):
    return "".join(QUOTE_MAP.get(c, c) for c in text)


def main():
    rng = random.Random(20240517)
    texts = list(HAND_WRITTEN)
    while len(texts) < 500:
        texts.append(synth_sentence(rng))

    analyzer = vs.SentimentIntensityAnalyzer()
    rounded = [analyzer.polarity_scores(straighten(t)) for t in texts]
    vs.round = lambda x, n=None: x  # shadow the builtin inside the module
    raw = [analyzer.polarity_scores(straighten(t)) for t in texts]
    del vs.round

    for text, r, u in zip(texts, rounded, raw):
        row = {
            "text": text,
            "compound": r["compound"],
            "raw_compound": u["compound"],
            "pos": u["pos"],
            "neu": u["neu"],
            "neg": u["neg"],
        }
        sys.stdout.write(json.dumps(row, ensure_ascii=False) + "\n")


if __name__ == "__main__":
    main()
