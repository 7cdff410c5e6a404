"""Representative power states and on/off event counting per appliance.

Pipeline: median filter, 1-D k-means with an elbow rule on the number of
clusters, merge of near-duplicate centres, nearest-level assignment and a
debounce on state changes. An event is a change between two levels.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.ndimage import median_filter

from nilmcompare.errors import DataError
from nilmcompare.timeseries import (
    DEFAULT_GAP_FACTOR,
    PowerSeries,
    days,
    effective_duration,
    segments,
)


@dataclass(frozen=True)
class EventParams:
    filter_width: int = 5
    k_max: int = 5
    elbow_ratio: float = 0.05
    merge_delta: float = 10.0
    min_dwell: int = 2
    restarts: int = 10
    seed: int = 0
    gap_factor: float = DEFAULT_GAP_FACTOR
    power_type: str = "P"

    def __post_init__(self) -> None:
        if self.filter_width < 1:
            raise DataError("filter_width must be >= 1")
        if self.k_max < 1:
            raise DataError("k_max must be >= 1")
        if self.min_dwell < 1:
            raise DataError("min_dwell must be >= 1")
        if self.restarts < 1:
            raise DataError("restarts must be >= 1")
        if self.merge_delta < 0 or self.elbow_ratio < 0:
            raise DataError("merge_delta and elbow_ratio must be non-negative")

    def scaled(self, factor: float) -> EventParams:
        return replace(self, merge_delta=self.merge_delta * factor)


@dataclass(frozen=True)
class StateSet:
    levels: tuple[float, ...]
    params: EventParams = field(default_factory=EventParams)

    def __post_init__(self) -> None:
        object.__setattr__(self, "levels", tuple(float(v) for v in self.levels))
        if not self.levels:
            raise DataError("a state set needs at least one level")
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise DataError("levels must be strictly increasing")

    def assign(self, values: np.ndarray) -> np.ndarray:
        """Index of the nearest level; ties go to the lower level."""
        levels = np.asarray(self.levels)
        mids = (levels[:-1] + levels[1:]) / 2.0
        return np.searchsorted(mids, values, side="left")


@dataclass(frozen=True)
class Event:
    timestamp: int
    from_state: int
    to_state: int


@dataclass(frozen=True)
class EventProfile:
    label: str
    state_set: StateSet
    events: tuple[Event, ...]
    events_per_day: float
    effective_days: float

    @property
    def event_count(self) -> int:
        return len(self.events)

    def count_between(self, start: int, end: int) -> int:
        return sum(1 for e in self.events if start <= e.timestamp < end)


def smooth(values: np.ndarray, width: int) -> np.ndarray:
    if width <= 1 or values.size == 0:
        return values.astype(float)
    return median_filter(values, size=width, mode="nearest")


# -- weighted 1-D k-means ---------------------------------------------------


def _assign_sorted(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    mids = (centers[:-1] + centers[1:]) / 2.0
    return np.searchsorted(mids, points, side="left")


def _lloyd(points: np.ndarray, weights: np.ndarray, centers: np.ndarray, max_iter: int = 100):
    centers = np.sort(centers)
    for _ in range(max_iter):
        labels = _assign_sorted(points, centers)
        mass = np.bincount(labels, weights=weights, minlength=centers.size)
        total = np.bincount(labels, weights=weights * points, minlength=centers.size)
        new = np.where(mass > 0, total / np.where(mass > 0, mass, 1.0), centers)
        new = np.sort(new)
        if np.array_equal(new, centers):
            break
        centers = new
    labels = _assign_sorted(points, centers)
    wcss = float(np.sum(weights * (points - centers[labels]) ** 2))
    used = np.bincount(labels, weights=weights, minlength=centers.size) > 0
    return centers[used], wcss


def _kmeans_pp(points: np.ndarray, weights: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    probs = weights / weights.sum()
    centers = [points[rng.choice(points.size, p=probs)]]
    for _ in range(1, k):
        d2 = np.min((points[:, None] - np.asarray(centers)[None, :]) ** 2, axis=1) * weights
        if d2.sum() <= 0:
            break
        centers.append(points[rng.choice(points.size, p=d2 / d2.sum())])
    return np.asarray(centers, dtype=float)


def kmeans_1d(
    values: np.ndarray, k: int, restarts: int = 10, seed: int = 0
) -> tuple[np.ndarray, float]:
    """Best-of-``restarts`` Lloyd k-means on a 1-D sample.

    Returns sorted centres (empty clusters removed) and the within-cluster
    sum of squares. Work is done on the distinct values with multiplicities.
    """
    points, counts = np.unique(np.asarray(values, dtype=float), return_counts=True)
    weights = counts.astype(float)
    k = min(k, points.size)
    if k <= 1:
        center = np.array([np.average(points, weights=weights)])
        return center, float(np.sum(weights * (points - center[0]) ** 2))
    rng = np.random.default_rng(seed)
    best: tuple[np.ndarray, float] | None = None
    for _ in range(restarts):
        init = _kmeans_pp(points, weights, k, rng)
        centers, wcss = _lloyd(points, weights, init)
        if best is None or wcss < best[1]:
            best = (centers, wcss)
    assert best is not None
    return best


def merge_levels(centers: np.ndarray, merge_delta: float) -> list[float]:
    """Collapse runs of centres closer than ``merge_delta`` into their mean."""
    levels = sorted(float(c) for c in centers)
    while True:
        groups: list[list[float]] = [[levels[0]]]
        for c in levels[1:]:
            if c - groups[-1][-1] < merge_delta:
                groups[-1].append(c)
            else:
                groups.append([c])
        merged = [sum(g) / len(g) for g in groups]
        if len(merged) == len(levels):
            return merged
        levels = merged


def representative_states(series: PowerSeries, params: EventParams = EventParams()) -> StateSet:
    if series.empty:
        raise DataError("empty series")
    filtered = smooth(series.values, params.filter_width)
    centers, wcss = kmeans_1d(filtered, 1, params.restarts, params.seed)
    total = wcss
    for k in range(2, params.k_max + 1):
        if wcss <= 0:
            break
        cand, cand_wcss = kmeans_1d(filtered, k, params.restarts, params.seed)
        if wcss - cand_wcss < params.elbow_ratio * total:
            break
        centers, wcss = cand, cand_wcss
    return StateSet(tuple(merge_levels(centers, params.merge_delta)), params)


def _debounced_events(
    timestamps: np.ndarray, assigned: np.ndarray, min_dwell: int
) -> list[Event]:
    events = []
    n = assigned.size
    if n == 0:
        return events
    # run-length encode, then accept a change only if its run is long enough
    change = np.flatnonzero(np.diff(assigned)) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change, [n]))
    # the starting state is the first one that settles, not a leading blip
    settled = np.flatnonzero(ends - starts >= min_dwell)
    current = int(assigned[starts[settled[0]]]) if settled.size else int(assigned[0])
    for a, b in zip(starts.tolist(), ends.tolist()):
        state = int(assigned[a])
        if state == current or b - a < min_dwell:
            continue
        events.append(Event(int(timestamps[a]), current, state))
        current = state
    return events


def detect_events(series: PowerSeries, states: StateSet, label: str = "") -> EventProfile:
    """Debounced transitions between the levels of ``states``.

    Each gap-free stretch is handled on its own, so nothing is reported for a
    change that happened while the meter was not recording.
    """
    params = states.params
    if series.empty:
        return EventProfile(label, states, (), 0.0, 0.0)
    events: list[Event] = []
    for seg in segments(series, params.gap_factor):
        filtered = smooth(series.values[seg], params.filter_width)
        assigned = states.assign(filtered)
        events.extend(_debounced_events(series.timestamps[seg], assigned, params.min_dwell))
    eff_days = days(effective_duration(series, params.gap_factor))
    rate = len(events) / eff_days if eff_days > 0 else 0.0
    return EventProfile(label, states, tuple(events), rate, eff_days)


def profile(series: PowerSeries, params: EventParams = EventParams(), label: str = "") -> EventProfile:
    return detect_events(series, representative_states(series, params), label)


@dataclass(frozen=True)
class EventStats:
    min_events_per_day: float
    avg_events_per_day: float
    profiles: tuple[EventProfile, ...]

    @property
    def min_reported(self) -> int:
        return int(np.floor(self.min_events_per_day))

    @property
    def avg_reported(self) -> int:
        return int(round(self.avg_events_per_day))


def events_per_day_stats(household, params: EventParams = EventParams()) -> EventStats:
    """Least-active appliance rate and household total events per day.

    Uses each submeter's ``params.power_type`` series, falling back to its
    first available power type.
    """
    if not household.submeters:
        raise DataError("no submeters")
    profiles = []
    for ch in household.submeters:
        series = ch.get(params.power_type) or ch.series[ch.power_types[0]]
        profiles.append(profile(series, params, ch.label))
    rates = [p.events_per_day for p in profiles]
    return EventStats(min(rates), float(sum(rates)), tuple(profiles))
