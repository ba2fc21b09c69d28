"""End-to-end orchestration: raw review files to the report bundle.

Stages stay independently runnable (each CLI subcommand reads the previous
stage's report), but ``run_pipeline`` drives them all in memory and writes
the whole bundle:

    rejects.jsonl            per-line parse rejects
    catalog.json             per-app coverage and floor flags
    metrics.csv              event-window metric series (mu, delta)
    metrics_daily.csv        correlation-window metric series
    events.csv               deviation events
    correlations.csv         pairwise correlation classes
    correlated_events.json   correlated events with embedded context
    summary_requests.json    sampled texts and prompt hashes per event
    summaries.json           mock-client summaries (when configured)

Every byte of the bundle is a pure function of the inputs and the config,
seed included; running twice produces identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import date, timedelta, timezone
from itertools import combinations
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .config import MarketConfig
from .correlate import (
    CorrelatedEventRecord,
    CorrelationRecord,
    ce_records_to_json,
    detect_correlated_events,
    extract_runs,
    pair_correlations,
    write_correlations_csv,
)
from .detect import EventRecord, detect_series, write_events_csv
from .ingest import (
    DatasetError,
    MarketCatalog,
    Reject,
    Review,
    build_catalog,
    catalog_summary,
    parse_reviews,
    rejects_to_jsonl,
)
from .metrics import (
    MetricKind,
    ScoredReview,
    TimeWindow,
    WindowStat,
    correlation_points,
    metric_delta,
    score_reviews,
    window_series,
    window_stats,
    write_metrics_csv,
)
from .sentiment import LexiconScorer, load_lexicon
from .summarize import (
    MockSummarizer,
    SummaryRequest,
    build_requests,
    default_template,
    load_template,
    request_report_entry,
    summary_report_entry,
)

__all__ = [
    "BUNDLE_FILES",
    "MarketAnalysis",
    "PipelineResult",
    "analyze_catalog",
    "ce_from_reports",
    "read_review_files",
    "run_pipeline",
]

ALL_METRICS = (MetricKind.COUNT, MetricKind.RATING, MetricKind.POLARITY)

BUNDLE_FILES = (
    "rejects.jsonl",
    "catalog.json",
    "metrics.csv",
    "metrics_daily.csv",
    "events.csv",
    "correlations.csv",
    "correlated_events.json",
    "summary_requests.json",
)


@dataclass(slots=True)
class MarketAnalysis:
    config: MarketConfig
    catalog: MarketCatalog
    span: tuple[date, date] | None
    apps: tuple[str, ...]
    scored: Mapping[str, list[ScoredReview]]
    weekly_stats: dict[tuple[str, MetricKind], list[WindowStat]] = field(default_factory=dict)
    daily_stats: dict[tuple[str, MetricKind], list[WindowStat]] = field(default_factory=dict)
    events: dict[tuple[str, MetricKind], list[EventRecord]] = field(default_factory=dict)
    correlations: list[CorrelationRecord] = field(default_factory=list)
    ces: list[CorrelatedEventRecord] = field(default_factory=list)
    requests: list[SummaryRequest] = field(default_factory=list)

    def all_events(self) -> list[EventRecord]:
        out: list[EventRecord] = []
        for key in sorted(self.events, key=lambda k: (k[0], k[1].value)):
            out.extend(self.events[key])
        return out

    def nonzero_events(self) -> list[EventRecord]:
        return [e for e in self.all_events() if e.e != 0]

    def window_scored(self, app_id: str, window: TimeWindow) -> list[ScoredReview]:
        """App reviews inside a window, in canonical order."""
        scored = self.scored.get(app_id, [])
        return [s for s in scored if window.contains(s.review.timestamp)]


def _derive_span(config: MarketConfig, catalog: MarketCatalog, apps: Sequence[str]) -> tuple[date, date] | None:
    starts = [catalog.coverage[a].first for a in apps]
    ends = [catalog.coverage[a].last for a in apps]
    if not starts:
        if config.span_start is not None and config.span_end is not None:
            return config.span_start, config.span_end
        return None
    span_start = config.span_start or min(starts).astimezone(timezone.utc).date()
    span_end = config.span_end or (max(ends).astimezone(timezone.utc).date() + timedelta(days=1))
    if span_start >= span_end:
        return None
    return span_start, span_end


def analyze_catalog(
    config: MarketConfig,
    catalog: MarketCatalog,
    metrics: Sequence[MetricKind] = ALL_METRICS,
) -> MarketAnalysis:
    """Run every analysis stage over an in-memory catalog."""
    scorer = LexiconScorer(
        load_lexicon(config.lexicon_path) if config.lexicon_path else None
    )
    apps = tuple(
        a
        for a in catalog.apps
        if not (config.exclude_insufficient and catalog.coverage[a].insufficient)
    )
    # Sentence polarity only matters when the polarity metric is in play;
    # a count/rating-restricted analysis skips that work wholesale.
    scored = {
        app: score_reviews(
            catalog.reviews[app],
            scorer,
            config.scales,
            with_sentences=MetricKind.POLARITY in metrics,
        )
        for app in apps
    }
    span = _derive_span(config, catalog, apps)
    analysis = MarketAnalysis(config=config, catalog=catalog, span=span, apps=apps, scored=scored)
    if span is None:
        return analysis

    span_start, span_end = span
    weekly = window_series(span_start, span_end, config.event_window_days)
    daily = window_series(span_start, span_end, config.correlation_window_days)
    baseline_start = config.baseline_start or span_start

    points: dict[tuple[str, MetricKind], dict[date, float]] = {}
    for app in apps:
        for metric in metrics:
            wstats = metric_delta(window_stats(app, scored[app], weekly, metric))
            dstats = metric_delta(window_stats(app, scored[app], daily, metric))
            analysis.weekly_stats[(app, metric)] = wstats
            analysis.daily_stats[(app, metric)] = dstats
            analysis.events[(app, metric)] = detect_series(
                wstats,
                baseline_start,
                config.sensitivity,
                min_baseline=config.min_baseline,
                mode=config.sigma_mode,
            )
            points[(app, metric)] = correlation_points(dstats)

    for metric in sorted(metrics, key=lambda m: m.value):
        for app_i, app_j in combinations(apps, 2):
            analysis.correlations.extend(
                pair_correlations(
                    app_i,
                    app_j,
                    metric,
                    points[(app_i, metric)],
                    points[(app_j, metric)],
                    daily,
                    config.lookback_days,
                    config.correlation_threshold,
                    min_points=config.min_corr_points,
                )
            )

    analysis.ces = ce_from_reports(
        analysis.all_events(), analysis.correlations, config.event_window_days
    )
    analysis.requests = build_requests(
        analysis.ces, analysis.window_scored, config.sample_size, config.seed
    )
    return analysis


def ce_from_reports(
    events: Iterable[EventRecord],
    correlations: Iterable[CorrelationRecord],
    event_window_days: int,
) -> list[CorrelatedEventRecord]:
    """Correlated events recomputed purely from events plus correlations.

    This is the only path to CE records; the ``ce`` subcommand feeds it
    from the CSV dumps and gets byte-identical results to a full run.
    """
    events_by_series: dict[tuple[str, MetricKind], list[EventRecord]] = {}
    for record in events:
        events_by_series.setdefault((record.app_id, record.metric), []).append(record)
    corr_by_pair: dict[tuple[str, str, MetricKind], list[CorrelationRecord]] = {}
    for record in correlations:
        corr_by_pair.setdefault((record.app_i, record.app_j, record.metric), []).append(record)

    ces: list[CorrelatedEventRecord] = []
    for app_i, app_j, metric in sorted(corr_by_pair, key=lambda k: (k[2].value, k[0], k[1])):
        runs = [
            r
            for r in extract_runs(corr_by_pair[(app_i, app_j, metric)], event_window_days)
            if r.sign != 0
        ]
        if not runs:
            continue
        ces.extend(
            detect_correlated_events(
                events_by_series.get((app_i, metric), []),
                events_by_series.get((app_j, metric), []),
                runs,
            )
        )
    return ces


@dataclass(slots=True)
class PipelineResult:
    out_dir: Path
    files: tuple[str, ...]
    reviews_accepted: int
    reviews_rejected: int
    apps: int
    events_nonzero: int
    correlated_events: int
    summary_requests: int


def read_review_files(
    paths: Sequence[str | Path],
    fmt: str,
    config: MarketConfig,
) -> tuple[list[Review], list[Reject]]:
    """Parse and pool every input file (multi-source inputs concatenate)."""
    reviews: list[Review] = []
    rejects: list[Reject] = []
    for path in paths:
        p = Path(path)
        if not p.is_file():
            raise DatasetError(f"input file not found: {p}")
        try:
            raw = p.read_bytes()
        except OSError as exc:
            raise DatasetError(f"cannot read {p}: {exc}") from exc
        file_reviews, file_rejects = parse_reviews(raw, fmt=fmt, scales=config.scales)
        reviews.extend(file_reviews)
        rejects.extend(file_rejects)
    return reviews, rejects


def _write(out_dir: Path, name: str, text: str) -> None:
    (out_dir / name).write_text(text, encoding="utf-8", newline="")


def _json_text(payload: object) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def write_bundle(
    analysis: MarketAnalysis,
    rejects: Sequence[Reject],
    out_dir: str | Path,
) -> PipelineResult:
    """Write every report file for an analysis (reports exist even when empty)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config = analysis.config

    _write(out, "rejects.jsonl", rejects_to_jsonl(rejects))
    _write(out, "catalog.json", _json_text(catalog_summary(analysis.catalog)))

    weekly_flat = [s for key in sorted(analysis.weekly_stats, key=lambda k: (k[0], k[1].value)) for s in analysis.weekly_stats[key]]
    daily_flat = [s for key in sorted(analysis.daily_stats, key=lambda k: (k[0], k[1].value)) for s in analysis.daily_stats[key]]
    _write(out, "metrics.csv", write_metrics_csv(weekly_flat))
    _write(out, "metrics_daily.csv", write_metrics_csv(daily_flat))
    _write(out, "events.csv", write_events_csv(analysis.all_events()))
    _write(out, "correlations.csv", write_correlations_csv(analysis.correlations))
    _write(out, "correlated_events.json", ce_records_to_json(analysis.ces))

    template = (
        load_template(config.prompt_template_path)
        if config.prompt_template_path
        else default_template()
    )
    _write(
        out,
        "summary_requests.json",
        _json_text([request_report_entry(r, template) for r in analysis.requests]),
    )
    files = list(BUNDLE_FILES)
    if config.summarizer == "mock":
        client = MockSummarizer()
        _write(
            out,
            "summaries.json",
            _json_text([summary_report_entry(r, client, template) for r in analysis.requests]),
        )
        files.append("summaries.json")

    return PipelineResult(
        out_dir=out,
        files=tuple(files),
        reviews_accepted=sum(len(v) for v in analysis.catalog.reviews.values()),
        reviews_rejected=len(rejects),
        apps=len(analysis.apps),
        events_nonzero=len(analysis.nonzero_events()),
        correlated_events=len(analysis.ces),
        summary_requests=len(analysis.requests),
    )


def run_pipeline(
    config: MarketConfig,
    inputs: Sequence[str | Path],
    out_dir: str | Path,
    fmt: str = "jsonl",
) -> PipelineResult:
    """Parse inputs, run every stage, and write the report bundle."""
    reviews, rejects = read_review_files(inputs, fmt, config)
    catalog = build_catalog(reviews, monthly_floor=config.monthly_floor)
    analysis = analyze_catalog(config, catalog)
    return write_bundle(analysis, rejects, out_dir)
