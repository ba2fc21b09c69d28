"""Deviation events against an expanding delta baseline.

For one app/metric series, each window's delta is judged against the
standard deviation of every delta observed since the baseline start date
and strictly before the window under test. The baseline only ever grows
(it is never a rolling window), so sensitivity stabilises as history
accumulates.

An event is a sign:

    +1  delta >= k * sigma      (boundary inclusive on both sides)
    -1  delta <= -k * sigma
     0  otherwise

Detection is suppressed (event 0) while the baseline holds fewer than
``min_baseline`` deltas (the warm-up, flagged on the record) and when the
baseline is degenerate (sigma == 0, visible as such on the record). A
window with a missing delta also yields 0 and contributes nothing to the
baseline.
"""

from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass, field
from datetime import date
from typing import Iterable, Sequence

from .metrics import MetricKind, TimeWindow, WindowStat

__all__ = [
    "EVENTS_CSV_COLUMNS",
    "BaselineState",
    "EventRecord",
    "baseline_sigma",
    "detect_event",
    "detect_series",
    "read_events_csv",
    "write_events_csv",
]

EVENTS_CSV_COLUMNS = ("app_id", "metric", "t0", "e", "a", "sigma", "baseline_n", "warmup")

DEFAULT_MIN_BASELINE = 4


def baseline_sigma(
    deltas: Sequence[float],
    min_baseline: int = DEFAULT_MIN_BASELINE,
    mode: str = "population",
) -> float | None:
    """Standard deviation of the baseline deltas; None while too few.

    Population form by default (the baseline is treated as the complete
    history, not a sample); ``mode="sample"`` switches to the n-1 form,
    which then needs at least two deltas.
    """
    n = len(deltas)
    if n < min_baseline:
        return None
    if mode == "population":
        if n < 1:
            return None
        return statistics.pstdev(deltas)
    if mode == "sample":
        if n < 2:
            return None
        return statistics.stdev(deltas)
    raise ValueError(f"unknown sigma mode {mode!r} (expected 'population' or 'sample')")


@dataclass(slots=True)
class BaselineState:
    """Expanding per-series delta history, from ``baseline_start`` onward."""

    app_id: str
    metric: MetricKind
    baseline_start: date
    deltas: list[float] = field(default_factory=list)

    def sigma(self, min_baseline: int = DEFAULT_MIN_BASELINE, mode: str = "population") -> float | None:
        return baseline_sigma(self.deltas, min_baseline=min_baseline, mode=mode)

    def extend(self, delta: float | None) -> None:
        if delta is not None:
            self.deltas.append(delta)


@dataclass(frozen=True, slots=True)
class EventRecord:
    app_id: str
    metric: MetricKind
    window: TimeWindow
    e: int
    a: float | None
    sigma: float | None
    k: float
    baseline_n: int
    warmup: bool


def detect_event(
    stat: WindowStat,
    baseline: BaselineState,
    k: float,
    min_baseline: int = DEFAULT_MIN_BASELINE,
    mode: str = "population",
) -> EventRecord:
    """Classify one window against the baseline as it stood before it.

    Pure with respect to the baseline: the caller extends the state
    afterwards, so the window under test never contributes to its own
    sigma.
    """
    sigma = baseline.sigma(min_baseline=min_baseline, mode=mode)
    a = stat.delta
    warmup = len(baseline.deltas) < min_baseline
    if a is None or sigma is None or sigma == 0.0:
        e = 0
    elif a >= k * sigma:
        e = 1
    elif a <= -k * sigma:
        e = -1
    else:
        e = 0
    return EventRecord(
        app_id=stat.app_id,
        metric=stat.metric,
        window=stat.window,
        e=e,
        a=a,
        sigma=sigma,
        k=k,
        baseline_n=len(baseline.deltas),
        warmup=warmup,
    )


def detect_series(
    stats: Sequence[WindowStat],
    baseline_start: date,
    k: float,
    min_baseline: int = DEFAULT_MIN_BASELINE,
    mode: str = "population",
) -> list[EventRecord]:
    """Run detection over one app/metric series in window order.

    Windows starting before ``baseline_start`` are skipped entirely; their
    deltas never enter the baseline. One record is emitted per remaining
    window, warm-up and degenerate ones included (with event 0), so the
    events report covers the whole detection span.
    """
    if not stats:
        return []
    state = BaselineState(app_id=stats[0].app_id, metric=stats[0].metric, baseline_start=baseline_start)
    records: list[EventRecord] = []
    for stat in stats:
        if stat.window.start < baseline_start:
            continue
        records.append(detect_event(stat, state, k, min_baseline=min_baseline, mode=mode))
        state.extend(stat.delta)
    return records


def write_events_csv(records: Iterable[EventRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(EVENTS_CSV_COLUMNS)
    for r in records:
        writer.writerow(
            [
                r.app_id,
                r.metric.value,
                r.window.start.isoformat(),
                r.e,
                "" if r.a is None else repr(r.a),
                "" if r.sigma is None else repr(r.sigma),
                r.baseline_n,
                "true" if r.warmup else "false",
            ]
        )
    return buf.getvalue()


def read_events_csv(text: str, window_days: int, k: float) -> list[EventRecord]:
    """Rebuild event records from the CSV dump.

    The window length and sensitivity are not CSV columns; they come from
    the same config that produced the dump.
    """
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != EVENTS_CSV_COLUMNS:
        raise ValueError(f"bad events CSV header: {header!r}")
    out: list[EventRecord] = []
    for row in reader:
        if not row:
            continue
        app_id, metric, t0, e, a, sigma, baseline_n, warmup = row
        out.append(
            EventRecord(
                app_id=app_id,
                metric=MetricKind(metric),
                window=TimeWindow(date.fromisoformat(t0), window_days),
                e=int(e),
                a=None if a == "" else float(a),
                sigma=None if sigma == "" else float(sigma),
                k=k,
                baseline_n=int(baseline_n),
                warmup=warmup == "true",
            )
        )
    return out
