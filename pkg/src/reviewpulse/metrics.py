"""Windowed per-app metric series.

Three metrics are tracked per app: review count, mean normalised rating,
and mean sentence polarity (both on the shared 0..4 scale). Series are
built over a contiguous grid of fixed-length UTC-day windows; each window
carries its average ``mu`` and the window-over-window difference ``delta``
against the immediately preceding window.

Missing is an explicit state: a window with no observations has no mean
for rating/polarity (the count metric is simply 0 there), and a delta is
missing whenever either side is. Nothing is imputed.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .ingest import RatingScale, Review, ScaleMap
from .sentiment import PolarityScorer, Sentence, score_review

__all__ = [
    "METRICS_CSV_COLUMNS",
    "MetricKind",
    "ScoredReview",
    "TimeWindow",
    "correlation_points",
    "metric_delta",
    "metric_mu",
    "normalize_rating",
    "read_metrics_csv",
    "score_reviews",
    "window_series",
    "window_stats",
    "WindowStat",
    "write_metrics_csv",
]

METRICS_CSV_COLUMNS = ("app_id", "metric", "t0", "w", "mu", "delta", "n_obs")


class MetricKind(str, Enum):
    COUNT = "count"
    RATING = "rating"
    POLARITY = "polarity"


@dataclass(frozen=True, slots=True, order=True)
class TimeWindow:
    """Half-open span of whole UTC days: [start, start + days)."""

    start: date
    days: int

    @property
    def end(self) -> date:
        return self.start + timedelta(days=self.days)

    def contains(self, ts: datetime) -> bool:
        day = ts.astimezone(timezone.utc).date()
        return self.start <= day < self.end

    def overlaps(self, other: "TimeWindow") -> bool:
        return self.start < other.end and other.start < self.end

    def preceding(self) -> "TimeWindow":
        return TimeWindow(self.start - timedelta(days=self.days), self.days)


@dataclass(frozen=True, slots=True)
class ScoredReview:
    """A review with its normalised rating and scored sentences attached."""

    review: Review
    rating_value: int
    sentences: tuple[Sentence, ...]

    def polarities(self) -> list[int]:
        return [s.polarity for s in self.sentences if s.polarity is not None]


@dataclass(frozen=True, slots=True)
class WindowStat:
    app_id: str
    metric: MetricKind
    window: TimeWindow
    mu: float | None
    delta: float | None
    n_obs: int


def normalize_rating(raw: int, scale: RatingScale) -> int:
    """Map a raw rating onto the five bins 0..4 (nearest bin, ties up).

    A 1..5 scale maps as raw - 1; other scales map affinely, e.g. 7 on a
    0..10 scale lands in bin 3.
    """
    if not scale.contains(raw):
        raise ValueError(f"rating {raw} outside scale [{scale.lo}, {scale.hi}]")
    span = scale.hi - scale.lo
    return int((raw - scale.lo) * 4 / span + 0.5)


def window_series(t_start: date, t_end: date, days: int) -> list[TimeWindow]:
    """Contiguous windows of ``days`` days covering [t_start, t_end).

    A trailing span shorter than ``days`` is dropped rather than emitted
    short. An empty or too-short span yields no windows.
    """
    if days < 1:
        raise ValueError(f"window length must be >= 1 day, got {days}")
    windows: list[TimeWindow] = []
    cur = t_start
    step = timedelta(days=days)
    while cur + step <= t_end:
        windows.append(TimeWindow(cur, days))
        cur += step
    return windows


def score_reviews(
    reviews: Iterable[Review],
    scorer: PolarityScorer,
    scales: ScaleMap | None = None,
    with_sentences: bool = True,
) -> list[ScoredReview]:
    """Attach normalised ratings and scored sentences to reviews.

    Scoring is per distinct body text (identical bodies share one scoring
    pass), which keeps large synthetic datasets cheap without changing any
    result. ``with_sentences=False`` skips sentence scoring entirely and
    leaves every ``sentences`` tuple empty — for analyses that will never
    look at polarity.
    """
    if scales is None:
        scales = ScaleMap()
    cache: dict[str, list[tuple[int, str, int | None]]] = {}
    out: list[ScoredReview] = []
    for review in reviews:
        if with_sentences:
            parts = cache.get(review.body)
            if parts is None:
                parts = [
                    (s.index, s.text, s.polarity)
                    for s in score_review(review.review_id, review.body, scorer)
                ]
                cache[review.body] = parts
            sentences = tuple(
                Sentence(review_id=review.review_id, index=idx, text=text, polarity=pol)
                for idx, text, pol in parts
            )
        else:
            sentences = ()
        rating_value = normalize_rating(review.raw_rating, scales.for_source(review.source))
        out.append(ScoredReview(review=review, rating_value=rating_value, sentences=sentences))
    return out


def _mu_and_n(reviews_in_window: Sequence[ScoredReview], metric: MetricKind) -> tuple[float | None, int]:
    if metric is MetricKind.COUNT:
        n = len(reviews_in_window)
        return float(n), n
    if metric is MetricKind.RATING:
        n = len(reviews_in_window)
        if n == 0:
            return None, 0
        return sum(r.rating_value for r in reviews_in_window) / n, n
    if metric is MetricKind.POLARITY:
        total = 0
        n = 0
        for review in reviews_in_window:
            for p in review.polarities():
                total += p
                n += 1
        if n == 0:
            return None, 0
        return total / n, n
    raise ValueError(f"unknown metric {metric!r}")


def metric_mu(reviews_in_window: Sequence[ScoredReview], metric: MetricKind) -> float | None:
    """Window average for one metric; None when there is nothing to average.

    Count is the number of reviews (never missing), rating the mean
    normalised rating over reviews, polarity the flat mean over all scored
    sentences in the window (reviews with more sentences weigh more).
    """
    return _mu_and_n(reviews_in_window, metric)[0]


def _bucket(
    scored: Iterable[ScoredReview], t_start: date, days: int, n_windows: int
) -> list[list[ScoredReview]]:
    buckets: list[list[ScoredReview]] = [[] for _ in range(n_windows)]
    for review in scored:
        day = review.review.timestamp.astimezone(timezone.utc).date()
        idx = (day - t_start).days
        if idx < 0:
            continue
        widx = idx // days
        if widx < n_windows:
            buckets[widx].append(review)
    return buckets


def window_stats(
    app_id: str,
    scored: Sequence[ScoredReview],
    windows: Sequence[TimeWindow],
    metric: MetricKind,
) -> list[WindowStat]:
    """Per-window stats (mu filled, deltas not yet) over a contiguous grid."""
    if not windows:
        return []
    days = windows[0].days
    buckets = _bucket(scored, windows[0].start, days, len(windows))
    stats = []
    for window, bucket in zip(windows, buckets):
        mu, n_obs = _mu_and_n(bucket, metric)
        stats.append(WindowStat(app_id=app_id, metric=metric, window=window, mu=mu, delta=None, n_obs=n_obs))
    return stats


def metric_delta(stats: Sequence[WindowStat]) -> list[WindowStat]:
    """Fill deltas: mu minus the previous window's mu, where both exist.

    The input must be one app/metric series in window order over a
    contiguous grid; the first window's delta is always missing.
    """
    out: list[WindowStat] = []
    prev_mu: float | None = None
    prev_end: date | None = None
    for i, stat in enumerate(stats):
        if prev_end is not None and stat.window.start != prev_end:
            raise ValueError(
                f"windows not contiguous: {stat.window.start} does not follow {prev_end}"
            )
        delta = None
        if i > 0 and stat.mu is not None and prev_mu is not None:
            delta = stat.mu - prev_mu
        out.append(
            WindowStat(
                app_id=stat.app_id,
                metric=stat.metric,
                window=stat.window,
                mu=stat.mu,
                delta=delta,
                n_obs=stat.n_obs,
            )
        )
        prev_mu = stat.mu
        prev_end = stat.window.end
    return out


def correlation_points(stats: Sequence[WindowStat]) -> dict[date, float]:
    """Window averages keyed by window start, for correlation lookbacks."""
    return {s.window.start: s.mu for s in stats if s.mu is not None}


def write_metrics_csv(stats: Iterable[WindowStat]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRICS_CSV_COLUMNS)
    for s in stats:
        writer.writerow(
            [
                s.app_id,
                s.metric.value,
                s.window.start.isoformat(),
                s.window.days,
                "" if s.mu is None else repr(s.mu),
                "" if s.delta is None else repr(s.delta),
                s.n_obs,
            ]
        )
    return buf.getvalue()


def read_metrics_csv(text: str) -> list[WindowStat]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != METRICS_CSV_COLUMNS:
        raise ValueError(f"bad metrics CSV header: {header!r}")
    out: list[WindowStat] = []
    for row in reader:
        if not row:
            continue
        app_id, metric, t0, w, mu, delta, n_obs = row
        out.append(
            WindowStat(
                app_id=app_id,
                metric=MetricKind(metric),
                window=TimeWindow(date.fromisoformat(t0), int(w)),
                mu=None if mu == "" else float(mu),
                delta=None if delta == "" else float(delta),
                n_obs=int(n_obs),
            )
        )
    return out
