"""Ingestion tests: parsing, rejects, dedup, catalog coverage.

The large-file test checks parse counts against an oracle that scans the
raw lines with nothing but json + datetime, so a parser bug cannot hide
behind its own accounting.
"""
from __future__ import annotations

import json
import random
from datetime import datetime, timezone

import pytest

from reviewpulse.ingest import (
    DatasetError,
    RatingScale,
    Reject,
    Review,
    ScaleMap,
    build_catalog,
    catalog_summary,
    parse_reviews,
    parse_timestamp,
    rejects_to_jsonl,
    serialize_reviews,
)


def _line(review_id: str, app_id: str = "appA", ts: str = "2024-01-05T10:00:00Z",
          rating: int = 5, body: str = "Fine.", source: str = "store") -> str:
    return json.dumps({
        "review_id": review_id,
        "app_id": app_id,
        "timestamp": ts,
        "rating": rating,
        "body": body,
        "source": source,
    })


def test_empty_input_is_identity() -> None:
    reviews, rejects = parse_reviews("", "jsonl")
    assert reviews == [] and rejects == []
    reviews, rejects = parse_reviews("", "csv")
    assert reviews == [] and rejects == []


def test_single_wellformed_line() -> None:
    reviews, rejects = parse_reviews(_line("r1", rating=5), "jsonl")
    assert rejects == []
    assert len(reviews) == 1
    r = reviews[0]
    assert r.raw_rating == 5
    assert r.review_id == "r1"
    assert r.timestamp == datetime(2024, 1, 5, 10, 0, tzinfo=timezone.utc)


def test_timestamp_forms() -> None:
    assert parse_timestamp("2024-01-05T10:00:00Z") == parse_timestamp("2024-01-05T10:00:00+00:00")
    # offsets are normalised to UTC
    assert parse_timestamp("2024-01-05T12:00:00+02:00") == parse_timestamp("2024-01-05T10:00:00Z")
    with pytest.raises(ValueError):
        parse_timestamp("2024-01-05T10:00:00")  # naive
    with pytest.raises(ValueError):
        parse_timestamp("not a date")


def test_thousand_lines_with_three_bad_timestamps_against_line_oracle() -> None:
    rng = random.Random(42)
    lines = []
    for i in range(1000):
        day = rng.randrange(1, 28)
        lines.append(_line(f"r{i:04d}", app_id=f"app{rng.randrange(4)}",
                           ts=f"2024-{rng.randrange(1, 13):02d}-{day:02d}T08:30:00Z",
                           rating=rng.randrange(1, 6)))
    corrupted = (102, 517, 941)  # 1-based line numbers
    for ln in corrupted:
        record = json.loads(lines[ln - 1])
        record["timestamp"] = "sometime last week"
        lines[ln - 1] = json.dumps(record)
    text = "\n".join(lines) + "\n"

    # Oracle: independent scan deciding validity with stdlib only.
    ok = 0
    bad_lines = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        record = json.loads(line)
        try:
            ts = datetime.fromisoformat(str(record["timestamp"]).replace("Z", "+00:00"))
            valid = ts.tzinfo is not None
        except ValueError:
            valid = False
        if valid:
            ok += 1
        else:
            bad_lines.append(line_no)
    assert ok == 997 and bad_lines == list(corrupted)

    reviews, rejects = parse_reviews(text, "jsonl")
    assert len(reviews) == ok == 997
    assert [r.line_no for r in rejects] == bad_lines
    assert all(r.reason.startswith("bad-timestamp") for r in rejects)


def test_reject_reasons_are_machine_readable() -> None:
    lines = [
        "{ not json",
        json.dumps(["a", "list"]),
        _line("r1").replace('"rating": 5', '"rating": "five"'),
        _line("r2", rating=9),
        json.dumps({"app_id": "a", "timestamp": "2024-01-05T10:00:00Z",
                    "rating": 3, "body": "x", "source": "s"}),
        _line("r3"),
        _line("r3"),
    ]
    reviews, rejects = parse_reviews("\n".join(lines), "jsonl")
    assert [r.review_id for r in reviews] == ["r3"]
    reasons = {r.line_no: r.reason for r in rejects}
    assert reasons[1].startswith("invalid-json")
    assert reasons[2] == "not-an-object"
    assert reasons[3].startswith("bad-rating") or reasons[3].startswith("bad-field")
    assert reasons[4].startswith("out-of-range-rating")
    assert reasons[5].startswith("missing-field:") and "review_id" in reasons[5]
    assert reasons[7] == "duplicate: (store, r3) first seen at line 6"


def test_duplicate_key_is_source_scoped() -> None:
    text = "\n".join([_line("r1", source="store"), _line("r1", source="web")])
    reviews, rejects = parse_reviews(text, "jsonl")
    assert len(reviews) == 2 and rejects == []


def test_rating_scales_per_source() -> None:
    scales = ScaleMap(default=RatingScale(1, 5), per_source={"web": RatingScale(0, 10)})
    text = "\n".join([_line("r1", rating=7, source="web"), _line("r2", rating=7, source="store")])
    reviews, rejects = parse_reviews(text, "jsonl", scales)
    assert [r.review_id for r in reviews] == ["r1"]
    assert rejects[0].reason.startswith("out-of-range-rating")


def test_csv_round_trip_and_bad_header() -> None:
    src = [
        Review("r1", "appA", datetime(2024, 3, 1, 12, tzinfo=timezone.utc), 4,
               'Has, commas and "quotes".', "store"),
        Review("r2", "appB", datetime(2024, 3, 2, 9, 30, tzinfo=timezone.utc), 1, "Bad!", "store"),
    ]
    for fmt in ("jsonl", "csv"):
        text = serialize_reviews(src, fmt)
        back, rejects = parse_reviews(text, fmt)
        assert rejects == []
        assert back == src
    with pytest.raises(DatasetError):
        parse_reviews("review_id,app_id\nr1,a\n", "csv")


def test_csv_row_rejects() -> None:
    header = "app_id,body,rating,review_id,source,timestamp"
    rows = [
        header,
        "appA,ok,4,r1,store,2024-01-05T10:00:00Z",
        "appA,bad rating,x,r2,store,2024-01-05T10:00:00Z",
        "appA,too short,4,r3,store",
    ]
    reviews, rejects = parse_reviews("\n".join(rows), "csv")
    assert [r.review_id for r in reviews] == ["r1"]
    assert rejects[0].line_no == 3 and rejects[0].reason.startswith("bad-rating")
    assert rejects[1].line_no == 4 and rejects[1].reason.startswith("bad-row")


def test_rejects_jsonl_shape() -> None:
    text = rejects_to_jsonl([Reject(3, "bad-rating: 'x' is not an integer")])
    entry = json.loads(text)
    assert entry == {"line_no": 3, "reason": "bad-rating: 'x' is not an integer"}


def _review_at(app_id: str, i: int, year: int, month: int, day: int) -> Review:
    return Review(
        review_id=f"{app_id}-{i}",
        app_id=app_id,
        timestamp=datetime(year, month, day, 12, tzinfo=timezone.utc),
        raw_rating=4,
        body="ok.",
        source="store",
    )


def test_zero_reviews_empty_catalog() -> None:
    catalog = build_catalog([])
    assert catalog.apps == ()
    assert catalog.all_reviews() == []
    assert catalog_summary(catalog)["apps"] == {}


def test_insufficient_flag_single_app() -> None:
    # 12 reviews inside one calendar month against a floor of 20/month.
    reviews = [_review_at("appA", i, 2024, 2, 1 + i) for i in range(12)]
    catalog = build_catalog(reviews, monthly_floor=20.0)
    cov = catalog.coverage["appA"]
    assert cov.total == 12 and cov.months_spanned == 1
    assert cov.insufficient
    assert catalog.insufficient_apps() == ("appA",)


def test_coverage_flags_match_brute_force_monthly_average() -> None:
    rng = random.Random(7)
    reviews: list[Review] = []
    per_app: dict[str, list[Review]] = {}
    for a in range(10):
        app_id = f"app{a:02d}"
        n = rng.choice([3, 5, 12, 19, 20, 21, 40, 60, 100, 250])
        span_months = rng.randrange(1, 14)
        app_reviews = []
        for i in range(n):
            month_off = rng.randrange(span_months)
            year, month = 2023 + (2 + month_off) // 12, 1 + (2 + month_off) % 12
            app_reviews.append(_review_at(app_id, i, year, month, rng.randrange(1, 28)))
        per_app[app_id] = app_reviews
        reviews.extend(app_reviews)
    rng.shuffle(reviews)

    catalog = build_catalog(reviews, monthly_floor=20.0)
    for app_id, app_reviews in per_app.items():
        # Brute force: calendar months spanned, inclusive of both ends.
        stamps = sorted(r.timestamp for r in app_reviews)
        first, last = stamps[0], stamps[-1]
        months = (last.year - first.year) * 12 + (last.month - first.month) + 1
        mean = len(app_reviews) / months
        cov = catalog.coverage[app_id]
        assert cov.total == len(app_reviews)
        assert cov.months_spanned == months
        assert cov.monthly_mean == pytest.approx(mean)
        assert cov.insufficient == (mean < 20.0)


def test_catalog_orders_reviews_canonically() -> None:
    reviews = [
        _review_at("appB", 2, 2024, 1, 9),
        _review_at("appA", 1, 2024, 1, 5),
        _review_at("appA", 0, 2024, 1, 5),
        _review_at("appB", 3, 2024, 1, 2),
    ]
    catalog = build_catalog(reviews)
    assert catalog.apps == ("appA", "appB")
    assert [r.review_id for r in catalog.reviews["appA"]] == ["appA-0", "appA-1"]
    assert [r.review_id for r in catalog.reviews["appB"]] == ["appB-3", "appB-2"]
