"""Comparability metrics and the per-household summary row.

* NAR - share of aggregate energy not explained by the submeters,
  ``sum|y - sum(x)| / sum(y)``.
* TSR - test duration over total duration, both with gaps removed.
* EVR - events in the test window over events in the whole dataset.
* RMSE - per-appliance root-mean-square estimation error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from nilmcompare.errors import DataError
from nilmcompare.events import EventParams, events_per_day_stats
from nilmcompare.timeseries import (
    POWER_TYPES,
    PowerSeries,
    align,
    coarsest_interval,
    days,
    effective_duration,
    stacked_sum,
    wallclock_duration,
)


@dataclass(frozen=True)
class NarResult:
    ratio: float
    power_type: str
    samples_used: int
    interval: int

    @property
    def exceeds_one(self) -> bool:
        """Submeters sum to more than the mains, usually double metering."""
        return self.ratio > 1.0


def nar(mains: PowerSeries, submeters: Sequence[PowerSeries], interval: int | None = None) -> NarResult:
    """Noise-to-aggregate ratio on the grid shared by mains and all submeters.

    Inputs are brought to ``interval`` (default: the coarsest nominal
    interval involved). Ratios above 1 are returned as is.
    """
    ptype = mains.power_type
    if any(s.power_type != ptype for s in submeters):
        raise DataError("power type mismatch")
    if interval is None:
        interval = coarsest_interval([mains, *submeters])
    if mains.empty or any(s.empty for s in submeters):
        raise DataError("no overlapping coverage")
    common, values = align([mains, *submeters], int(interval))
    if common.size == 0:
        raise DataError("no overlapping coverage")
    y = values[0]
    metered = stacked_sum(values[1:], common.size)
    energy = float(np.sum(y))
    if energy == 0:
        raise DataError("zero aggregate energy")
    if energy < 0:
        raise DataError("negative aggregate energy")
    ratio = float(np.sum(np.abs(y - metered))) / energy
    return NarResult(ratio, ptype, int(common.size), int(interval))


def tsr(test_duration: float, total_duration: float) -> float:
    if total_duration <= 0:
        raise DataError("total duration must be positive")
    if test_duration < 0:
        raise DataError("test duration must be non-negative")
    if test_duration > total_duration:
        raise DataError("test exceeds total")
    return test_duration / total_duration


def evr(test_events: int, total_events: int) -> float:
    if total_events <= 0:
        raise DataError("no events in dataset")
    if test_events < 0:
        raise DataError("test event count must be non-negative")
    if test_events > total_events:
        raise DataError("test events exceed total events")
    return test_events / total_events


def rmse(estimate: PowerSeries, truth: PowerSeries) -> float:
    if estimate.timestamps.shape != truth.timestamps.shape or not np.array_equal(
        estimate.timestamps, truth.timestamps
    ):
        raise DataError("unaligned series")
    if truth.empty:
        raise DataError("empty overlap")
    err = estimate.values - truth.values
    return math.sqrt(float(np.mean(err * err)))


@dataclass(frozen=True)
class SummaryRow:
    """One household described the way dataset comparison tables do it.

    ``None`` marks a value that cannot be computed from the household and is
    rendered as ``-``.
    """

    dataset: str
    house: str
    duration_days_wallclock: float | None
    duration_days_effective: float | None
    meters_with_mains: int
    meters_without_mains: int
    mains_interval_s: int | None
    sub_interval_s: int | None
    mains_power_types: tuple[str, ...]
    sub_power_types: tuple[str, ...]
    events_min_per_day: float | None
    events_avg_per_day: float | None
    nar: dict[str, float | None]

    @property
    def events_min_reported(self) -> int | None:
        return None if self.events_min_per_day is None else int(math.floor(self.events_min_per_day))

    @property
    def events_avg_reported(self) -> int | None:
        return None if self.events_avg_per_day is None else int(round(self.events_avg_per_day))


def dataset_summary(household, params: EventParams = EventParams(), interval: int | None = None) -> SummaryRow:
    """Summarise a household; unavailable fields become ``None``.

    Durations and event rates use ``params.power_type`` on the first mains
    channel carrying it (any power type if none does). NAR is computed for
    each power type present on a mains channel and on every submeter.
    """
    mains_types = tuple(p for p in POWER_TYPES if any(p in c.series for c in household.mains))
    sub_types = tuple(p for p in POWER_TYPES if any(p in c.series for c in household.submeters))

    ref = household.mains_series(params.power_type)
    if ref is None:
        ref = household.mains_series(mains_types[0])
    wall = eff = None
    if ref is not None and not ref.empty:
        wall = days(wallclock_duration(ref))
        eff = days(effective_duration(ref, params.gap_factor))

    ev_min = ev_avg = None
    if household.submeters:
        try:
            stats = events_per_day_stats(household, params)
            ev_min, ev_avg = stats.min_events_per_day, stats.avg_events_per_day
        except DataError:
            pass

    nar_values: dict[str, float | None] = {}
    for ptype in POWER_TYPES:
        mains = household.mains_series(ptype)
        subs = household.submeter_series(ptype)
        value = None
        if mains is not None and subs is not None:
            try:
                value = nar(mains, subs, interval).ratio
            except DataError:
                value = None
        nar_values[ptype] = value

    return SummaryRow(
        dataset=household.dataset_name,
        house=household.house_id,
        duration_days_wallclock=wall,
        duration_days_effective=eff,
        meters_with_mains=len(household.mains) + len(household.submeters),
        meters_without_mains=len(household.submeters),
        mains_interval_s=min(c.nominal_interval for c in household.mains),
        sub_interval_s=min((c.nominal_interval for c in household.submeters), default=None),
        mains_power_types=mains_types,
        sub_power_types=sub_types,
        events_min_per_day=ev_min,
        events_avg_per_day=ev_avg,
        nar=nar_values,
    )
