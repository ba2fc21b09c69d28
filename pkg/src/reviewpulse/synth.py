"""Synthetic review market generator.

A scenario describes apps (review rate per window, rating distribution,
sentence polarity mix) plus scripted injections, and generates a full
review dataset with ground-truth labels. Everything is driven by one
scenario seed through named per-app sub-streams, so a scenario generates
the same bytes every time.

Bodies are assembled from the built-in polarity lexicon so that each
sentence lands exactly in its target polarity bin; injected polarity
shifts therefore survive the scoring round trip without noise.

Injection kinds:

    count-spike     multiply the window's review rate by the magnitude
    rating-drop     lower raw ratings in the window by round(magnitude)
    polarity-shift  raise sentence polarity bins in the window by
                    round(magnitude)
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .ingest import Review
from .metrics import MetricKind
from .summarize import derive_seed

__all__ = [
    "AppSpec",
    "Injection",
    "Label",
    "Scenario",
    "default_scenario",
    "flat_scenario",
    "generate",
    "load_scenario",
    "scenario_from_dict",
    "scenario_labels",
    "scenario_to_dict",
    "spike_pair_scenario",
]

SYNTH_SOURCE = "synthetic"

INJECTION_KINDS = ("count-spike", "rating-drop", "polarity-shift")

DEFAULT_RATING_WEIGHTS: Mapping[int, float] = {1: 0.10, 2: 0.10, 3: 0.15, 4: 0.25, 5: 0.40}
DEFAULT_POLARITY_WEIGHTS: Mapping[int, float] = {0: 0.10, 1: 0.15, 2: 0.30, 3: 0.25, 4: 0.20}

# Token pools per polarity bin. Valence words come from the built-in
# lexicon; fillers deliberately stay outside it (and outside its stem
# reach) so a generated sentence scores exactly its target bin.
_POS2 = ("excellent", "awesome", "fantastic", "perfect", "amazing")
_POS1 = ("good", "useful", "smooth", "helpful", "nice")
_NEG1 = ("slow", "buggy", "annoying", "confusing", "laggy")
_NEG2 = ("terrible", "awful", "horrible", "useless", "broken")
_FILLER = ("the", "app", "update", "screen", "version", "today", "menu", "again", "overall", "still")


@dataclass(frozen=True, slots=True)
class AppSpec:
    app_id: str
    rate_per_window: float
    count_model: str = "poisson"
    rating_weights: Mapping[int, float] = field(default_factory=lambda: dict(DEFAULT_RATING_WEIGHTS))
    polarity_weights: Mapping[int, float] = field(default_factory=lambda: dict(DEFAULT_POLARITY_WEIGHTS))
    sentences_per_review: int = 1


@dataclass(frozen=True, slots=True)
class Injection:
    apps: tuple[str, ...]
    window_index: int
    kind: str
    magnitude: float


@dataclass(frozen=True, slots=True)
class Label:
    app_id: str
    metric: MetricKind
    window_index: int
    sign: int


@dataclass(frozen=True, slots=True)
class Scenario:
    start: date
    n_windows: int
    window_days: int
    apps: tuple[AppSpec, ...]
    injections: tuple[Injection, ...]
    seed: int


def _validate(scenario: Scenario) -> None:
    errors: list[str] = []
    if scenario.n_windows < 1:
        errors.append(f"n_windows must be >= 1, got {scenario.n_windows}")
    if scenario.window_days < 1:
        errors.append(f"window_days must be >= 1, got {scenario.window_days}")
    ids = [a.app_id for a in scenario.apps]
    if len(set(ids)) != len(ids):
        errors.append("duplicate app ids in scenario")
    for app in scenario.apps:
        if app.rate_per_window < 0:
            errors.append(f"{app.app_id}: rate_per_window must be >= 0")
        if app.count_model not in ("poisson", "constant"):
            errors.append(f"{app.app_id}: unknown count model {app.count_model!r}")
        if app.sentences_per_review < 1:
            errors.append(f"{app.app_id}: sentences_per_review must be >= 1")
        if not app.rating_weights or any(not 1 <= r <= 5 for r in app.rating_weights):
            errors.append(f"{app.app_id}: rating weights must cover raw values 1..5")
        if not app.polarity_weights or any(not 0 <= b <= 4 for b in app.polarity_weights):
            errors.append(f"{app.app_id}: polarity weights must cover bins 0..4")
    known = set(ids)
    for inj in scenario.injections:
        if inj.kind not in INJECTION_KINDS:
            errors.append(f"unknown injection kind {inj.kind!r}")
        if not 0 <= inj.window_index < scenario.n_windows:
            errors.append(f"injection window {inj.window_index} outside 0..{scenario.n_windows - 1}")
        if inj.magnitude <= 0:
            errors.append(f"injection magnitude must be positive, got {inj.magnitude}")
        for app_id in inj.apps:
            if app_id not in known:
                errors.append(f"injection targets unknown app {app_id!r}")
    if errors:
        raise ValueError("; ".join(errors))


def scenario_labels(scenario: Scenario) -> list[Label]:
    """Ground-truth (app, metric, window, sign) labels for the injections."""
    labels: list[Label] = []
    for inj in scenario.injections:
        if inj.kind == "count-spike":
            metric, sign = MetricKind.COUNT, (1 if inj.magnitude > 1 else -1)
        elif inj.kind == "rating-drop":
            metric, sign = MetricKind.RATING, -1
        else:
            metric, sign = MetricKind.POLARITY, 1
        for app_id in inj.apps:
            labels.append(Label(app_id=app_id, metric=metric, window_index=inj.window_index, sign=sign))
    return labels


def _sentence_for_bin(target: int, coin: int, tone: Sequence[int], fill: Sequence[int]) -> str:
    """One sentence scoring exactly ``target``, from pre-drawn pool indices.

    ``coin`` picks between the one-strong-word and two-mild-words phrasings
    at the extreme bins; ``tone`` indexes the valence pools and ``fill`` the
    filler pool.
    """
    if target >= 4:
        head = _POS2[tone[0]] if coin == 0 else f"{_POS1[tone[0]]} {_POS1[tone[1]]}"
    elif target == 3:
        head = _POS1[tone[0]]
    elif target == 2:
        head = ""
    elif target == 1:
        head = _NEG1[tone[0]]
    else:
        head = _NEG2[tone[0]] if coin == 0 else f"{_NEG1[tone[0]]} {_NEG1[tone[1]]}"
    tail = f"{_FILLER[fill[0]]} {_FILLER[fill[1]]}."
    return f"{head} {tail}" if head else tail


def generate(scenario: Scenario) -> tuple[list[Review], list[Label]]:
    """Generate the scenario's reviews (canonically ordered) and labels."""
    _validate(scenario)
    spikes: dict[tuple[str, int], float] = {}
    rating_shift: dict[tuple[str, int], int] = {}
    polarity_shift: dict[tuple[str, int], int] = {}
    for inj in scenario.injections:
        for app_id in inj.apps:
            key = (app_id, inj.window_index)
            if inj.kind == "count-spike":
                spikes[key] = spikes.get(key, 1.0) * inj.magnitude
            elif inj.kind == "rating-drop":
                rating_shift[key] = rating_shift.get(key, 0) - int(round(inj.magnitude))
            else:
                polarity_shift[key] = polarity_shift.get(key, 0) + int(round(inj.magnitude))

    window_seconds = scenario.window_days * 86400
    reviews: list[Review] = []
    for app in scenario.apps:
        rng = np.random.default_rng(derive_seed(scenario.seed, "synth", app.app_id))
        rating_values = np.array(sorted(app.rating_weights), dtype=np.int64)
        rating_p = np.array([app.rating_weights[v] for v in rating_values], dtype=np.float64)
        rating_p = rating_p / rating_p.sum()
        bin_values = np.array(sorted(app.polarity_weights), dtype=np.int64)
        bin_p = np.array([app.polarity_weights[b] for b in bin_values], dtype=np.float64)
        bin_p = bin_p / bin_p.sum()

        for widx in range(scenario.n_windows):
            key = (app.app_id, widx)
            rate = app.rate_per_window * spikes.get(key, 1.0)
            if app.count_model == "poisson":
                count = int(rng.poisson(rate))
            else:
                count = int(round(rate))
            if count == 0:
                continue
            window_start = datetime.combine(
                scenario.start + timedelta(days=widx * scenario.window_days),
                datetime.min.time(),
                tzinfo=timezone.utc,
            )
            if app.count_model == "poisson":
                offsets = np.sort(rng.integers(0, window_seconds, size=count)).tolist()
            else:
                offsets = ((np.arange(count) * window_seconds) // count).tolist()
            shift_r = rating_shift.get(key, 0)
            shift_p = polarity_shift.get(key, 0)
            n_sent = app.sentences_per_review
            # One batched draw per stream keeps the hot loop free of
            # per-review generator calls.
            ratings = rng.choice(rating_values, size=count, p=rating_p).tolist()
            bins = rng.choice(bin_values, size=count * n_sent, p=bin_p).tolist()
            coins = rng.integers(0, 2, size=count * n_sent).tolist()
            tones = rng.integers(0, 5, size=(count * n_sent, 2)).tolist()
            fills = rng.integers(0, 10, size=(count * n_sent, 2)).tolist()
            sentences = [
                _sentence_for_bin(min(4, max(0, b + shift_p)), coins[j], tones[j], fills[j])
                for j, b in enumerate(bins)
            ]
            for i in range(count):
                raw = min(5, max(1, ratings[i] + shift_r))
                if n_sent == 1:
                    body = sentences[i]
                else:
                    body = " ".join(sentences[i * n_sent : (i + 1) * n_sent])
                reviews.append(
                    Review(
                        review_id=f"{app.app_id}-w{widx:03d}-{i:05d}",
                        app_id=app.app_id,
                        timestamp=window_start + timedelta(seconds=offsets[i]),
                        raw_rating=raw,
                        body=body,
                        source=SYNTH_SOURCE,
                    )
                )
    reviews.sort(key=lambda r: (r.timestamp, r.review_id))
    return reviews, scenario_labels(scenario)


def default_scenario(
    n_apps: int = 10,
    n_windows: int = 52,
    rate: float = 40.0,
    seed: int = 0,
    start: date = date(2024, 1, 4),
    window_days: int = 7,
    injections: Sequence[Injection] = (),
) -> Scenario:
    """Template market: Poisson counts with the default mixes."""
    apps = tuple(
        AppSpec(app_id=f"app{i:02d}", rate_per_window=rate) for i in range(n_apps)
    )
    return Scenario(
        start=start,
        n_windows=n_windows,
        window_days=window_days,
        apps=apps,
        injections=tuple(injections),
        seed=seed,
    )


def spike_pair_scenario(
    seed: int = 0,
    n_apps: int = 10,
    rate: float = 40.0,
    spike_window: int = 30,
    magnitude: float = 5.0,
    n_windows: int = 52,
    start: date = date(2024, 1, 4),
    window_days: int = 7,
) -> Scenario:
    """Two noisy apps against a quiet background, spiked together.

    The last two apps draw Poisson counts; the rest publish at a constant
    rate with a single rating and a single polarity bin, so they can never
    trip a detector. A simultaneous count spike into the noisy pair gives
    them correlated daily counts at the spike window — the one correlated
    event the scenario is built to exhibit.
    """
    quiet = tuple(
        AppSpec(
            app_id=f"app{i:02d}",
            rate_per_window=rate,
            count_model="constant",
            rating_weights={4: 1.0},
            polarity_weights={2: 1.0},
        )
        for i in range(max(0, n_apps - 2))
    )
    noisy = tuple(
        AppSpec(
            app_id=name,
            rate_per_window=rate,
            count_model="poisson",
            rating_weights={4: 1.0},
            polarity_weights={2: 1.0},
        )
        for name in ("spike0", "spike1")
    )
    return Scenario(
        start=start,
        n_windows=n_windows,
        window_days=window_days,
        apps=quiet + noisy,
        injections=(
            Injection(apps=("spike0", "spike1"), window_index=spike_window, kind="count-spike", magnitude=magnitude),
        ),
        seed=seed,
    )


def flat_scenario(
    n_apps: int = 10,
    n_windows: int = 52,
    rate: float = 21.0,
    seed: int = 0,
    start: date = date(2024, 1, 4),
    window_days: int = 7,
) -> Scenario:
    """Null market: constant counts, one rating, one polarity bin, no injections."""
    apps = tuple(
        AppSpec(
            app_id=f"app{i:02d}",
            rate_per_window=rate,
            count_model="constant",
            rating_weights={4: 1.0},
            polarity_weights={2: 1.0},
        )
        for i in range(n_apps)
    )
    return Scenario(
        start=start,
        n_windows=n_windows,
        window_days=window_days,
        apps=apps,
        injections=(),
        seed=seed,
    )


def scenario_to_dict(scenario: Scenario) -> dict:
    return {
        "start": scenario.start.isoformat(),
        "n_windows": scenario.n_windows,
        "window_days": scenario.window_days,
        "seed": scenario.seed,
        "apps": [
            {
                "app_id": a.app_id,
                "rate_per_window": a.rate_per_window,
                "count_model": a.count_model,
                "rating_weights": {str(k): v for k, v in sorted(a.rating_weights.items())},
                "polarity_weights": {str(k): v for k, v in sorted(a.polarity_weights.items())},
                "sentences_per_review": a.sentences_per_review,
            }
            for a in scenario.apps
        ],
        "injections": [
            {
                "apps": list(i.apps),
                "window_index": i.window_index,
                "kind": i.kind,
                "magnitude": i.magnitude,
            }
            for i in scenario.injections
        ],
    }


def scenario_from_dict(data: Mapping) -> Scenario:
    try:
        apps = tuple(
            AppSpec(
                app_id=str(a["app_id"]),
                rate_per_window=float(a["rate_per_window"]),
                count_model=str(a.get("count_model", "poisson")),
                rating_weights={int(k): float(v) for k, v in a.get("rating_weights", DEFAULT_RATING_WEIGHTS).items()},
                polarity_weights={int(k): float(v) for k, v in a.get("polarity_weights", DEFAULT_POLARITY_WEIGHTS).items()},
                sentences_per_review=int(a.get("sentences_per_review", 1)),
            )
            for a in data["apps"]
        )
        injections = tuple(
            Injection(
                apps=tuple(str(x) for x in i["apps"]),
                window_index=int(i["window_index"]),
                kind=str(i["kind"]),
                magnitude=float(i["magnitude"]),
            )
            for i in data.get("injections", [])
        )
        scenario = Scenario(
            start=date.fromisoformat(str(data["start"])),
            n_windows=int(data["n_windows"]),
            window_days=int(data.get("window_days", 7)),
            apps=apps,
            injections=injections,
            seed=int(data.get("seed", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"bad scenario: {exc}") from exc
    _validate(scenario)
    return scenario


def load_scenario(path: str | Path) -> Scenario:
    return scenario_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
