"""Cross-app correlation and correlated-event detection.

For every app pair and metric, a Pearson correlation is computed at each
correlation window over a trailing lookback of per-window metric points
(pairwise-complete: only dates where both apps have a value). The
correlation is classified against a threshold h:

    +1  rho >= h        (boundary inclusive)
    -1  rho <= -h
     0  otherwise, and whenever rho is undefined

Consecutive windows with the same nonzero class form a run. Each run is
examined only at its first event-window-sized interval: deviation events
of the two apps falling into event windows that overlap that interval are
intersected there. When the same-window intersection is empty, the test is
retried with one app's event taken from the immediately preceding event
window (both single-sided permutations; never both apps preceding).

Pairs are canonical with app_i < app_j, so swapping inputs changes
nothing.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from datetime import date
from typing import Iterable, Mapping, Sequence

import numpy as np

from .detect import EventRecord
from .metrics import MetricKind, TimeWindow

__all__ = [
    "CORRELATIONS_CSV_COLUMNS",
    "CorrelatedEventRecord",
    "CorrelationRecord",
    "CorrelationRun",
    "DEFAULT_MIN_CORR_POINTS",
    "ce_records_from_json",
    "ce_records_to_json",
    "detect_correlated_events",
    "detect_correlation",
    "extract_runs",
    "pair_correlations",
    "pearson_rho",
    "read_correlations_csv",
    "write_correlations_csv",
]

CORRELATIONS_CSV_COLUMNS = ("app_i", "app_j", "metric", "t0", "rho", "c", "n_points")

DEFAULT_MIN_CORR_POINTS = 8

# Relative variance floor below which a lookback is treated as constant
# (sum-of-squares cancellation noise, not signal).
_REL_VARIANCE_EPS = 1e-12


def pearson_rho(
    xs: Iterable[tuple[date, float]],
    ys: Iterable[tuple[date, float]],
    lookback: tuple[date, date],
    min_points: int = DEFAULT_MIN_CORR_POINTS,
) -> float | None:
    """Pearson correlation over pairwise-complete dates in [lo, hi).

    None when fewer than ``min_points`` dates are shared or either series
    is constant over the shared dates.
    """
    lo, hi = lookback
    x_by_date = {d: v for d, v in xs if lo <= d < hi}
    pairs = sorted((d, x_by_date[d], v) for d, v in ys if lo <= d < hi and d in x_by_date)
    if len(pairs) < max(min_points, 2):
        return None
    xv = [p[1] for p in pairs]
    yv = [p[2] for p in pairs]
    if max(xv) == min(xv) or max(yv) == min(yv):
        return None
    n = len(pairs)
    mx = sum(xv) / n
    my = sum(yv) / n
    sxy = 0.0
    sxx = 0.0
    syy = 0.0
    for x, y in zip(xv, yv):
        dx = x - mx
        dy = y - my
        sxy += dx * dy
        sxx += dx * dx
        syy += dy * dy
    denom = math.sqrt(sxx * syy)
    if denom == 0.0:
        return None
    return max(-1.0, min(1.0, sxy / denom))


def detect_correlation(rho: float | None, h: float) -> int:
    if rho is None:
        return 0
    if rho >= h:
        return 1
    if rho <= -h:
        return -1
    return 0


@dataclass(frozen=True, slots=True)
class CorrelationRecord:
    app_i: str
    app_j: str
    metric: MetricKind
    window: TimeWindow
    rho: float | None
    c: int
    n_points: int


def pair_correlations(
    app_i: str,
    app_j: str,
    metric: MetricKind,
    points_i: Mapping[date, float],
    points_j: Mapping[date, float],
    windows: Sequence[TimeWindow],
    lookback_days: int,
    h: float,
    min_points: int = DEFAULT_MIN_CORR_POINTS,
) -> list[CorrelationRecord]:
    """Correlation records for one pair/metric over the whole window grid.

    The sweep shares prefix sums over the pair's common dates, so each
    window costs O(1) after an O(n) setup; results match per-window
    ``pearson_rho`` calls.
    """
    if app_j < app_i:
        app_i, app_j = app_j, app_i
        points_i, points_j = points_j, points_i

    common = sorted(set(points_i) & set(points_j))
    n_common = len(common)
    dates = np.fromiter((d.toordinal() for d in common), dtype=np.int64, count=n_common)
    xs = np.fromiter((points_i[d] for d in common), dtype=np.float64, count=n_common)
    ys = np.fromiter((points_j[d] for d in common), dtype=np.float64, count=n_common)
    pad = np.zeros(1)
    sx = np.concatenate([pad, np.cumsum(xs)])
    sy = np.concatenate([pad, np.cumsum(ys)])
    sxx = np.concatenate([pad, np.cumsum(xs * xs)])
    syy = np.concatenate([pad, np.cumsum(ys * ys)])
    sxy = np.concatenate([pad, np.cumsum(xs * ys)])

    min_points = max(min_points, 2)
    starts = np.fromiter((w.start.toordinal() for w in windows), dtype=np.int64, count=len(windows))
    ends = np.fromiter((w.end.toordinal() for w in windows), dtype=np.int64, count=len(windows))
    i0 = np.searchsorted(dates, starts - lookback_days, side="left")
    i1 = np.searchsorted(dates, ends, side="left")
    n = i1 - i0
    nf = np.where(n > 0, n, 1).astype(np.float64)
    wsx = sx[i1] - sx[i0]
    wsy = sy[i1] - sy[i0]
    wsxx = sxx[i1] - sxx[i0]
    wsyy = syy[i1] - syy[i0]
    wsxy = sxy[i1] - sxy[i0]
    vx = np.maximum(wsxx - wsx * wsx / nf, 0.0)
    vy = np.maximum(wsyy - wsy * wsy / nf, 0.0)
    defined = (
        (n >= min_points)
        & (vx > _REL_VARIANCE_EPS * np.maximum(wsxx, 1.0))
        & (vy > _REL_VARIANCE_EPS * np.maximum(wsyy, 1.0))
    )
    denom = np.sqrt(np.where(defined, vx * vy, 1.0))
    cov = wsxy - wsx * wsy / nf
    rho_arr = np.clip(np.where(defined, cov / denom, np.nan), -1.0, 1.0).tolist()

    records: list[CorrelationRecord] = []
    for widx, window in enumerate(windows):
        rho = rho_arr[widx] if defined[widx] else None
        records.append(
            CorrelationRecord(
                app_i=app_i,
                app_j=app_j,
                metric=metric,
                window=window,
                rho=rho,
                c=detect_correlation(rho, h),
                n_points=int(n[widx]),
            )
        )
    return records


@dataclass(frozen=True, slots=True)
class CorrelationRun:
    """Maximal stretch of consecutive windows with a constant nonzero class."""

    app_i: str
    app_j: str
    metric: MetricKind
    sign: int
    t_start: date
    t_end: date
    first_interval: TimeWindow


def extract_runs(records: Sequence[CorrelationRecord], event_window_days: int) -> list[CorrelationRun]:
    """Collapse a pair/metric correlation series into its nonzero runs.

    Input must be in window order over a contiguous grid (as produced by
    ``pair_correlations``). Each run's first interval is the event-window-
    sized span starting at the run start.
    """
    runs: list[CorrelationRun] = []
    cur_sign = 0
    cur_start: date | None = None
    cur_end: date | None = None

    def flush() -> None:
        if cur_sign != 0 and cur_start is not None and cur_end is not None:
            first = records[0]
            runs.append(
                CorrelationRun(
                    app_i=first.app_i,
                    app_j=first.app_j,
                    metric=first.metric,
                    sign=cur_sign,
                    t_start=cur_start,
                    t_end=cur_end,
                    first_interval=TimeWindow(cur_start, event_window_days),
                )
            )

    for record in records:
        if record.c == cur_sign and cur_sign != 0:
            cur_end = record.window.end
            continue
        flush()
        cur_sign = record.c
        cur_start = record.window.start
        cur_end = record.window.end
    flush()
    return runs


@dataclass(frozen=True, slots=True)
class CorrelatedEventRecord:
    app_i: str
    app_j: str
    metric: MetricKind
    window: TimeWindow
    ce: int
    event_i: EventRecord
    event_j: EventRecord
    run: CorrelationRun


def _match(sign: int, e_i: EventRecord | None, e_j: EventRecord | None) -> int:
    a = e_i.e if e_i is not None else 0
    b = e_j.e if e_j is not None else 0
    if a == 0 or b == 0:
        return 0
    if sign == 1 and a == b:
        return 1
    if sign == -1 and a == -b:
        return -1
    return 0


def detect_correlated_events(
    events_i: Sequence[EventRecord],
    events_j: Sequence[EventRecord],
    runs: Sequence[CorrelationRun],
) -> list[CorrelatedEventRecord]:
    """Intersect two apps' events with their correlation runs.

    For each run, every event window overlapping the run's first interval
    is tested. The same-window pairing is tried first; if it yields nothing
    the two single-sided pairings against the immediately preceding event
    window are tried in order (app_i preceding, then app_j preceding). At
    most one record survives per (event window, class); when several runs
    would duplicate one, the earliest-starting run wins.
    """
    by_start_i = {r.window.start: r for r in events_i}
    by_start_j = {r.window.start: r for r in events_j}
    windows = {r.window for r in events_i} | {r.window for r in events_j}

    found: dict[tuple[date, int], CorrelatedEventRecord] = {}
    for run in sorted(runs, key=lambda r: (r.t_start, r.t_end, r.sign)):
        if run.sign == 0:
            continue
        for window in sorted(w for w in windows if w.overlaps(run.first_interval)):
            same_i = by_start_i.get(window.start)
            same_j = by_start_j.get(window.start)
            prev_start = window.preceding().start
            candidates = (
                (same_i, same_j),
                (by_start_i.get(prev_start), same_j),
                (same_i, by_start_j.get(prev_start)),
            )
            for e_i, e_j in candidates:
                ce = _match(run.sign, e_i, e_j)
                if ce == 0:
                    continue
                key = (window.start, ce)
                if key not in found:
                    assert e_i is not None and e_j is not None
                    found[key] = CorrelatedEventRecord(
                        app_i=run.app_i,
                        app_j=run.app_j,
                        metric=run.metric,
                        window=window,
                        ce=ce,
                        event_i=e_i,
                        event_j=e_j,
                        run=run,
                    )
                break
    return sorted(found.values(), key=lambda r: (r.window.start, -r.ce))


def write_correlations_csv(records: Iterable[CorrelationRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CORRELATIONS_CSV_COLUMNS)
    for r in records:
        writer.writerow(
            [
                r.app_i,
                r.app_j,
                r.metric.value,
                r.window.start.isoformat(),
                "" if r.rho is None else repr(r.rho),
                r.c,
                r.n_points,
            ]
        )
    return buf.getvalue()


def read_correlations_csv(text: str, window_days: int) -> list[CorrelationRecord]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != CORRELATIONS_CSV_COLUMNS:
        raise ValueError(f"bad correlations CSV header: {header!r}")
    out: list[CorrelationRecord] = []
    for row in reader:
        if not row:
            continue
        app_i, app_j, metric, t0, rho, c, n_points = row
        out.append(
            CorrelationRecord(
                app_i=app_i,
                app_j=app_j,
                metric=MetricKind(metric),
                window=TimeWindow(date.fromisoformat(t0), window_days),
                rho=None if rho == "" else float(rho),
                c=int(c),
                n_points=int(n_points),
            )
        )
    return out


def _event_from_dict(data: Mapping) -> EventRecord:
    return EventRecord(
        app_id=str(data["app_id"]),
        metric=MetricKind(data["metric"]),
        window=TimeWindow(date.fromisoformat(data["window_start"]), int(data["window_days"])),
        e=int(data["e"]),
        a=None if data["a"] is None else float(data["a"]),
        sigma=None if data["sigma"] is None else float(data["sigma"]),
        k=float(data["k"]),
        baseline_n=int(data["baseline_n"]),
        warmup=bool(data["warmup"]),
    )


def ce_records_from_json(text: str) -> list[CorrelatedEventRecord]:
    payload = json.loads(text)
    records: list[CorrelatedEventRecord] = []
    for item in payload:
        run = item["run"]
        records.append(
            CorrelatedEventRecord(
                app_i=str(item["app_i"]),
                app_j=str(item["app_j"]),
                metric=MetricKind(item["metric"]),
                window=TimeWindow(date.fromisoformat(item["window_start"]), int(item["window_days"])),
                ce=int(item["ce"]),
                event_i=_event_from_dict(item["event_i"]),
                event_j=_event_from_dict(item["event_j"]),
                run=CorrelationRun(
                    app_i=str(item["app_i"]),
                    app_j=str(item["app_j"]),
                    metric=MetricKind(item["metric"]),
                    sign=int(run["sign"]),
                    t_start=date.fromisoformat(run["t_start"]),
                    t_end=date.fromisoformat(run["t_end"]),
                    first_interval=TimeWindow(
                        date.fromisoformat(run["first_interval_start"]),
                        int(run["first_interval_days"]),
                    ),
                ),
            )
        )
    return records


def _event_to_dict(record: EventRecord) -> dict:
    return {
        "app_id": record.app_id,
        "metric": record.metric.value,
        "window_start": record.window.start.isoformat(),
        "window_days": record.window.days,
        "e": record.e,
        "a": record.a,
        "sigma": record.sigma,
        "k": record.k,
        "baseline_n": record.baseline_n,
        "warmup": record.warmup,
    }


def ce_records_to_json(records: Iterable[CorrelatedEventRecord]) -> str:
    payload = [
        {
            "app_i": r.app_i,
            "app_j": r.app_j,
            "metric": r.metric.value,
            "window_start": r.window.start.isoformat(),
            "window_days": r.window.days,
            "ce": r.ce,
            "event_i": _event_to_dict(r.event_i),
            "event_j": _event_to_dict(r.event_j),
            "run": {
                "sign": r.run.sign,
                "t_start": r.run.t_start.isoformat(),
                "t_end": r.run.t_end.isoformat(),
                "first_interval_start": r.run.first_interval.start.isoformat(),
                "first_interval_days": r.run.first_interval.days,
            },
        }
        for r in records
    ]
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"
