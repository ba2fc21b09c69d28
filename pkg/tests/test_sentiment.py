"""Sentence splitting and lexicon polarity scoring.

The splitting and binning tests each carry their own oracle: a literal
re.split written here for splitting, and a from-the-definition fold of
known valence sums for binning.
"""
from __future__ import annotations

import random
import re

import pytest

from reviewpulse.sentiment import (
    LexiconScorer,
    ScorerError,
    bin_valence,
    default_lexicon,
    load_lexicon,
    score_polarity,
    score_review,
    split_sentences,
)


def test_empty_body_yields_nothing() -> None:
    assert split_sentences("") == []
    assert split_sentences("   \n\t ") == []


def test_two_sentence_split() -> None:
    assert split_sentences("Great app. Crashes a lot!") == ["Great app.", "Crashes a lot!"]


def test_unterminated_body_is_one_sentence() -> None:
    assert split_sentences("no punctuation here") == ["no punctuation here"]


def test_decimal_point_does_not_split() -> None:
    assert split_sentences("Version 3.5 is fine.") == ["Version 3.5 is fine."]


def test_split_counts_match_reference_regex_oracle() -> None:
    rng = random.Random(99)
    words = ["app", "update", "crash", "menu", "fine", "3.5", "why?", "ok"]
    enders = [". ", "! ", "? ", "\n", ".\n\n", " "]
    texts = []
    for _ in range(500):
        chunks = []
        for _ in range(rng.randrange(1, 6)):
            chunks.append(" ".join(rng.choice(words) for _ in range(rng.randrange(1, 5))))
            chunks.append(rng.choice(enders))
        texts.append("".join(chunks))

    oracle_break = re.compile(r"(?<=[.!?])\s+|\n+")
    for text in texts:
        expected = [p.strip() for p in oracle_break.split(text)]
        expected = [p for p in expected if p]
        assert split_sentences(text) == expected


def test_splitting_loses_no_text() -> None:
    bodies = [
        "One. Two!  Three?\nFour",
        "Trailing space. ",
        "\n\nLeading breaks. End.",
    ]
    for body in bodies:
        parts = split_sentences(body)
        assert "".join(body.split()) == "".join("".join(p.split()) for p in parts)


def test_bin_valence_table() -> None:
    # (valence, bin) pairs straight from the folding rule.
    table = [(-5, 0), (-2, 0), (-1, 1), (0, 2), (1, 3), (2, 4), (6, 4)]
    for valence, expected in table:
        assert bin_valence(valence) == expected


def test_neutral_sentence_scores_two() -> None:
    scorer = LexiconScorer()
    assert scorer.score("the and of it.") == 2


def test_strong_positive_sentence_scores_four() -> None:
    scorer = LexiconScorer()
    assert scorer.score("excellent, love it") == 4


def test_thousand_lexicon_sentences_match_binning_oracle() -> None:
    lexicon = dict(default_lexicon())
    scorer = LexiconScorer(lexicon)
    tokens = sorted(lexicon)
    rng = random.Random(2024)
    for _ in range(1000):
        picked = [rng.choice(tokens) for _ in range(rng.randrange(1, 6))]
        text = " ".join(picked) + "."
        total = sum(lexicon[t] for t in picked)
        expected = 0 if total <= -2 else 4 if total >= 2 else total + 2
        assert scorer.score(text) == expected, text


def test_negation_flips_within_two_tokens() -> None:
    scorer = LexiconScorer()
    assert scorer.score("good app.") == 3
    assert scorer.score("not good.") == 1
    assert scorer.score("not very good.") == 1  # one token in between
    assert scorer.score("not at all good app.") == 3  # out of the window
    assert scorer.score("never crashes.") == 4  # flipped -2


def test_stemming_reaches_base_forms() -> None:
    scorer = LexiconScorer()
    assert scorer.valence("crashes") == -2
    assert scorer.valence("loved") == 2
    assert scorer.valence("slowly") == -1
    assert scorer.valence("ads") == -1


def test_scorer_contract_enforced() -> None:
    class Bad:
        name = "bad"

        def score(self, text: str) -> int:
            return 7

    class Lies:
        name = "lies"

        def score(self, text: str) -> int:
            return True  # bool is not an acceptable bin

    with pytest.raises(ScorerError):
        score_polarity("x", Bad())
    with pytest.raises(ScorerError):
        score_polarity("x", Lies())


def test_failing_scorer_marks_sentence_unscored() -> None:
    class Flaky:
        name = "flaky"
        calls = 0

        def score(self, text: str) -> int:
            Flaky.calls += 1
            if "bad" in text:
                raise RuntimeError("backend down")
            return 2

    sentences = score_review("r1", "this is bad. this is fine.", Flaky())
    assert [s.polarity for s in sentences] == [None, 2]
    assert [s.index for s in sentences] == [0, 1]


def test_adding_positive_token_never_lowers_score() -> None:
    # Monotonicity holds for negator-free sentences: a +2 token can only
    # push the valence sum up.
    scorer = LexiconScorer()
    rng = random.Random(5)
    tokens = sorted(default_lexicon())
    for _ in range(200):
        base = " ".join(rng.choice(tokens) for _ in range(rng.randrange(0, 4)))
        assert scorer.score(base + " excellent.") >= scorer.score(base + ".")


def test_load_lexicon_validation(tmp_path) -> None:
    good = tmp_path / "lex.tsv"
    good.write_text("# comment\nfoo\t2\nbar\t-1\n", encoding="utf-8")
    assert load_lexicon(good) == {"foo": 2, "bar": -1}
    for bad_line in ("foo 2", "foo\tx", "foo\t0", "foo\t3"):
        bad = tmp_path / "bad.tsv"
        bad.write_text(bad_line + "\n", encoding="utf-8")
        with pytest.raises(ValueError):
            load_lexicon(bad)
