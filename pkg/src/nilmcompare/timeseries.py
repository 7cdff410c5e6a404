"""Power time series, resampling, gap handling and channel composition.

Timestamps are integer UTC seconds. Every operation here returns a new
series; inputs are never mutated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from nilmcompare.errors import DataError

POWER_TYPES = ("P", "Q", "S")
DEFAULT_GAP_FACTOR = 3.0
DEFAULT_FILL_LIMIT = 3

# Cross-channel grids are anchored at the epoch so that any two series
# resampled to the same interval share their grid points.
EPOCH_ANCHOR = 0


@dataclass(frozen=True)
class PowerSeries:
    """Timestamped readings of a single AC power type.

    ``values`` are watts for P, volt-amperes for S and var for Q.
    """

    timestamps: np.ndarray
    values: np.ndarray
    power_type: str
    nominal_interval: int

    def __post_init__(self) -> None:
        ts = np.asarray(self.timestamps, dtype=np.int64).copy()
        vals = np.asarray(self.values, dtype=np.float64).copy()
        if ts.ndim != 1 or vals.ndim != 1:
            raise DataError("timestamps and values must be one-dimensional")
        if ts.shape != vals.shape:
            raise DataError("timestamps and values differ in length")
        if self.power_type not in POWER_TYPES:
            raise DataError(f"unknown power type: {self.power_type!r}")
        if not self.nominal_interval > 0:
            raise DataError("nominal_interval must be positive")
        if ts.size > 1 and np.any(np.diff(ts) <= 0):
            raise DataError("timestamps must be strictly increasing")
        if not np.all(np.isfinite(vals)):
            raise DataError("values must be finite")
        if self.power_type != "Q" and np.any(vals < 0):
            raise DataError(f"negative readings are only allowed for Q, got {self.power_type}")
        ts.flags.writeable = False
        vals.flags.writeable = False
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "nominal_interval", int(self.nominal_interval))

    def __len__(self) -> int:
        return int(self.timestamps.size)

    @property
    def empty(self) -> bool:
        return self.timestamps.size == 0

    def window(self, start: int, end: int) -> PowerSeries:
        """Samples with ``start <= t < end``."""
        mask = (self.timestamps >= start) & (self.timestamps < end)
        return self._replace(self.timestamps[mask], self.values[mask])

    def select(self, timestamps: np.ndarray) -> PowerSeries:
        """Restrict to the given timestamps, which must all be present."""
        idx = np.searchsorted(self.timestamps, timestamps)
        if np.any(idx >= self.timestamps.size) or np.any(self.timestamps[np.minimum(idx, len(self) - 1)] != timestamps):
            raise DataError("requested timestamps are not a subset of the series")
        return self._replace(self.timestamps[idx], self.values[idx])

    def with_values(self, values: np.ndarray) -> PowerSeries:
        return self._replace(self.timestamps, values)

    def _replace(self, timestamps, values, nominal_interval: int | None = None) -> PowerSeries:
        return PowerSeries(
            timestamps,
            values,
            self.power_type,
            self.nominal_interval if nominal_interval is None else nominal_interval,
        )


@dataclass(frozen=True)
class Gap:
    """A stretch of missing data between two consecutive readings."""

    start: int
    end: int

    def __post_init__(self) -> None:
        if not self.end > self.start:
            raise DataError("gap end must be after its start")

    @property
    def span(self) -> int:
        return self.end - self.start


def empty_like(series: PowerSeries, interval: int | None = None) -> PowerSeries:
    return series._replace(np.empty(0, np.int64), np.empty(0), interval)


def _bin_means(values: np.ndarray, bins: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Means are taken about the first sample of each bin, so constant bins
    # come back bit-for-bit unchanged.
    keys, first, counts = np.unique(bins, return_index=True, return_counts=True)
    inverse = np.repeat(np.arange(keys.size), counts)
    base = values[first]
    offsets = np.bincount(inverse, weights=values - base[inverse], minlength=keys.size)
    return keys, base + offsets / counts


def resample(
    series: PowerSeries,
    interval: int,
    policy: str = "mean",
    limit: int = DEFAULT_FILL_LIMIT,
    anchor: int | None = None,
) -> PowerSeries:
    """Put ``series`` on a regular grid of ``interval`` seconds.

    The grid is ``anchor + k * interval``; by default it starts at the first
    timestamp. ``policy="mean"`` averages every reading in
    ``[g, g + interval)`` and drops empty bins. ``policy="ffill"`` carries the
    last reading forward for at most ``limit`` grid points; later grid points
    are left out and show up as gaps.
    """
    if series.empty:
        raise DataError("empty series")
    if interval < 1:
        raise DataError("sub-second not supported")
    if interval != int(interval):
        raise DataError("interval must be a whole number of seconds")
    interval = int(interval)
    ts = series.timestamps
    origin = int(ts[0]) if anchor is None else int(anchor)

    if policy == "mean":
        bins = np.floor_divide(ts - origin, interval)
        keys, means = _bin_means(series.values, bins)
        return series._replace(origin + keys * interval, means, interval)

    if policy == "ffill":
        if limit < 0:
            raise DataError("fill limit must be non-negative")
        first_k = -((origin - int(ts[0])) // interval)  # ceil((ts0 - origin) / interval)
        last_k = (int(ts[-1]) - origin) // interval
        grid = origin + np.arange(first_k, last_k + 1, dtype=np.int64) * interval
        src = np.searchsorted(ts, grid, side="right") - 1
        lag = grid - ts[src]
        steps = -np.floor_divide(-lag, interval)
        keep = steps <= limit
        return series._replace(grid[keep], series.values[src[keep]], interval)

    raise DataError(f"unknown resample policy: {policy!r}")


def to_grid(series: PowerSeries, interval: int, limit: int = DEFAULT_FILL_LIMIT) -> PowerSeries:
    """Epoch-anchored resample, averaging when coarsening and filling otherwise."""
    policy = "mean" if interval >= series.nominal_interval else "ffill"
    return resample(series, interval, policy=policy, limit=limit, anchor=EPOCH_ANCHOR)


def detect_gaps(series: PowerSeries, gap_factor: float = DEFAULT_GAP_FACTOR) -> list[Gap]:
    """Consecutive readings further apart than ``gap_factor`` nominal intervals."""
    if gap_factor < 1:
        raise DataError("gap_factor must be >= 1")
    ts = series.timestamps
    if ts.size < 2:
        return []
    threshold = gap_factor * series.nominal_interval
    idx = np.flatnonzero(np.diff(ts) > threshold)
    return [Gap(int(ts[i]), int(ts[i + 1])) for i in idx]


def effective_duration(series: PowerSeries, gap_factor: float = DEFAULT_GAP_FACTOR) -> int:
    """Covered time in seconds: the wall-clock span minus every gap."""
    if series.empty:
        raise DataError("empty series")
    span = wallclock_duration(series)
    return span - sum(g.span for g in detect_gaps(series, gap_factor))


def wallclock_duration(series: PowerSeries) -> int:
    if series.empty:
        raise DataError("empty series")
    return int(series.timestamps[-1] - series.timestamps[0])


def segments(series: PowerSeries, gap_factor: float = DEFAULT_GAP_FACTOR) -> list[slice]:
    """Index slices of the gap-free runs of ``series``."""
    n = len(series)
    if n == 0:
        return []
    threshold = gap_factor * series.nominal_interval
    breaks = np.flatnonzero(np.diff(series.timestamps) > threshold) + 1
    edges = [0, *breaks.tolist(), n]
    return [slice(a, b) for a, b in zip(edges[:-1], edges[1:])]


def coarsest_interval(series: Sequence[PowerSeries]) -> int:
    return max(s.nominal_interval for s in series)


def stacked_sum(arrays: Sequence[np.ndarray], length: int) -> np.ndarray:
    """Left-to-right pointwise sum.

    Every place that adds channels goes through here so that two sums over
    the same channels agree bit-for-bit.
    """
    total = np.zeros(length)
    for arr in arrays:
        total = total + arr
    return total


def align(series: Sequence[PowerSeries], interval: int) -> tuple[np.ndarray, list[np.ndarray]]:
    """Resample every series to a shared grid and keep common grid points.

    Returns the common timestamps and, per input, its values there.
    """
    gridded = [to_grid(s, interval) for s in series]
    common = gridded[0].timestamps
    for g in gridded[1:]:
        common = np.intersect1d(common, g.timestamps, assume_unique=True)
    out = []
    for g in gridded:
        idx = np.searchsorted(g.timestamps, common)
        out.append(g.values[idx])
    return common, out


def sum_channels(channels: Sequence[PowerSeries], interval: int | None = None) -> PowerSeries:
    """Pointwise sum of channels over the grid points all of them cover."""
    if len(channels) == 0:
        raise DataError("no channels")
    ptype = channels[0].power_type
    if any(c.power_type != ptype for c in channels):
        raise DataError("power type mismatch")
    if interval is None:
        interval = coarsest_interval(channels)
    if interval < 1:
        raise DataError("sub-second not supported")
    live = [c for c in channels if not c.empty]
    if len(live) < len(channels):
        return PowerSeries(np.empty(0, np.int64), np.empty(0), ptype, int(interval))
    common, values = align(live, int(interval))
    return PowerSeries(common, stacked_sum(values, common.size), ptype, int(interval))


def days(seconds: float) -> float:
    return seconds / 86400.0


__all__ = [
    "POWER_TYPES",
    "PowerSeries",
    "Gap",
    "resample",
    "to_grid",
    "detect_gaps",
    "effective_duration",
    "wallclock_duration",
    "segments",
    "sum_channels",
    "align",
    "stacked_sum",
    "coarsest_interval",
    "days",
]
