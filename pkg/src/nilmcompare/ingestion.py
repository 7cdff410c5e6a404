"""Households on disk (JSON manifest + per-channel CSV) and synthetic households.

A synthetic household follows the usual additive model: the mains reading is
the sum of the metered appliances plus an error term made of unmetered
appliances, a constant offset and Gaussian measurement noise.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from nilmcompare.errors import DataError
from nilmcompare.timeseries import POWER_TYPES, PowerSeries, stacked_sum

logger = logging.getLogger(__name__)

ROLES = ("mains", "submeter")
CSV_HEADER = ("timestamp", "power")


@dataclass(frozen=True)
class Channel:
    meter_id: str
    label: str
    role: str
    series: Mapping[str, PowerSeries]

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise DataError(f"unknown channel role: {self.role!r}")
        if not self.series:
            raise DataError(f"channel {self.meter_id} has no power readings")
        for ptype, s in self.series.items():
            if ptype != s.power_type:
                raise DataError(f"channel {self.meter_id}: series keyed {ptype} holds {s.power_type}")

    @property
    def power_types(self) -> tuple[str, ...]:
        return tuple(p for p in POWER_TYPES if p in self.series)

    @property
    def nominal_interval(self) -> int:
        return min(s.nominal_interval for s in self.series.values())

    def get(self, power_type: str) -> PowerSeries | None:
        return self.series.get(power_type)

    def window(self, start: int, end: int) -> Channel:
        return Channel(
            self.meter_id,
            self.label,
            self.role,
            {p: s.window(start, end) for p, s in self.series.items()},
        )


@dataclass(frozen=True)
class Household:
    dataset_name: str
    house_id: str
    mains: tuple[Channel, ...]
    submeters: tuple[Channel, ...]
    # rows skipped per CSV path while loading
    dropped_rows: Mapping[str, int] = field(default_factory=dict)
    # label -> [(timestamp, from_state, to_state)] recorded by the generator
    transition_log: Mapping[str, list[tuple[int, int, int]]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "mains", tuple(self.mains))
        object.__setattr__(self, "submeters", tuple(self.submeters))
        if not self.mains:
            raise DataError("no mains channel")
        ids = [c.meter_id for c in self.channels]
        if len(set(ids)) != len(ids):
            raise DataError("meter_id values must be unique within a household")
        for c in self.mains:
            if c.role != "mains":
                raise DataError(f"channel {c.meter_id} is listed as mains but has role {c.role}")
        for c in self.submeters:
            if c.role != "submeter":
                raise DataError(f"channel {c.meter_id} is listed as submeter but has role {c.role}")
            if not c.label:
                raise DataError(f"submeter {c.meter_id} has an empty label")

    @property
    def channels(self) -> tuple[Channel, ...]:
        return self.mains + self.submeters

    def window(self, start: int, end: int) -> Household:
        """The household restricted to ``start <= t < end``."""
        return Household(
            self.dataset_name,
            self.house_id,
            tuple(c.window(start, end) for c in self.mains),
            tuple(c.window(start, end) for c in self.submeters),
        )

    def mains_series(self, power_type: str) -> PowerSeries | None:
        for c in self.mains:
            if power_type in c.series:
                return c.series[power_type]
        return None

    def submeter_series(self, power_type: str) -> list[PowerSeries] | None:
        """Every submeter's series of ``power_type``, or None if any lacks it."""
        out = [c.get(power_type) for c in self.submeters]
        if any(s is None for s in out):
            return None
        return out


# -- CSV / manifest --------------------------------------------------------


def read_channel_csv(path: Path, power_type: str, nominal_interval: int) -> tuple[PowerSeries, int]:
    """Parse one channel file, skipping malformed rows.

    A row is dropped when its timestamp or value does not parse, the value is
    not finite, the value is negative for P or S, or its timestamp does not
    come after the last kept row. Returns the series and the dropped count.
    """
    timestamps: list[int] = []
    values: list[float] = []
    dropped = 0
    last = None
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise DataError(f"bad header in {path}: expected 'timestamp,power'")
        for row in reader:
            if not row:
                continue
            try:
                if len(row) != 2:
                    raise ValueError
                t = int(row[0])
                v = float(row[1])
            except ValueError:
                dropped += 1
                continue
            if not math.isfinite(v) or (v < 0 and power_type != "Q") or (last is not None and t <= last):
                dropped += 1
                continue
            timestamps.append(t)
            values.append(v)
            last = t
    series = PowerSeries(np.array(timestamps, dtype=np.int64), np.array(values), power_type, nominal_interval)
    return series, dropped


def write_channel_csv(path: Path, series: PowerSeries) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("timestamp,power\n")
        for t, v in zip(series.timestamps.tolist(), series.values.tolist()):
            fh.write(f"{t},{v:.3f}\n")


def load_household(manifest_path: str | Path) -> Household:
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise DataError(f"manifest not found: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"manifest is not valid JSON: {exc}") from exc
    for key in ("dataset_name", "house_id", "channels"):
        if key not in manifest:
            raise DataError(f"manifest missing field: {key}")

    base = manifest_path.parent
    mains: list[Channel] = []
    subs: list[Channel] = []
    dropped: dict[str, int] = {}
    for entry in manifest["channels"]:
        try:
            meter_id = str(entry["meter_id"])
            role = entry["role"]
            files = entry["files"]
            interval = int(entry["nominal_interval_s"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed channel entry: {entry!r}") from exc
        series = {}
        for ptype, rel in files.items():
            if ptype not in POWER_TYPES:
                raise DataError(f"channel {meter_id}: unknown power type {ptype!r}")
            path = base / rel
            if not path.is_file():
                raise DataError(f"channel file missing: {path}")
            series[ptype], n_bad = read_channel_csv(path, ptype, interval)
            dropped[str(rel)] = n_bad
            if n_bad:
                logger.warning("dropped %d malformed rows from %s", n_bad, path)
        channel = Channel(meter_id, str(entry.get("label", meter_id)), role, series)
        (mains if role == "mains" else subs).append(channel)

    if not mains:
        raise DataError("no mains channel")
    logger.info(
        "loaded %s house %s: %d mains, %d submeters, %d rows dropped",
        manifest["dataset_name"],
        manifest["house_id"],
        len(mains),
        len(subs),
        sum(dropped.values()),
    )
    return Household(str(manifest["dataset_name"]), str(manifest["house_id"]), mains, subs, dropped)


def write_household(household: Household, out_dir: str | Path, manifest_name: str = "manifest.json") -> Path:
    """Write ``household`` as CSV files plus a manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for ch in household.channels:
        files = {}
        for ptype in ch.power_types:
            name = f"{ch.meter_id}_{ptype}.csv"
            write_channel_csv(out_dir / name, ch.series[ptype])
            files[ptype] = name
        entries.append(
            {
                "meter_id": ch.meter_id,
                "label": ch.label,
                "role": ch.role,
                "files": files,
                "nominal_interval_s": ch.nominal_interval,
            }
        )
    manifest = {
        "dataset_name": household.dataset_name,
        "house_id": household.house_id,
        "channels": entries,
    }
    path = out_dir / manifest_name
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


# -- synthetic households --------------------------------------------------


@dataclass(frozen=True)
class ApplianceSpec:
    """One simulated appliance.

    ``levels`` are the per-state power draws and must contain exactly one 0 W
    off state. Each visit to a state lasts ``min_dwell`` samples plus a
    geometric excess, giving an average of ``mean_dwell`` samples (a scalar
    or one value per state). The next state is drawn uniformly from the others.
    """

    label: str
    levels: tuple[float, ...]
    mean_dwell: float | tuple[float, ...] = 60.0
    min_dwell: int = 1
    initial_state: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "levels", tuple(float(v) for v in self.levels))
        if not isinstance(self.mean_dwell, (int, float)):
            object.__setattr__(self, "mean_dwell", tuple(float(v) for v in self.mean_dwell))

    def dwell_means(self) -> list[float]:
        if isinstance(self.mean_dwell, tuple):
            return list(self.mean_dwell)
        return [float(self.mean_dwell)] * len(self.levels)


@dataclass(frozen=True)
class SynthSpec:
    appliances: tuple[ApplianceSpec, ...]
    noise_std: float = 0.0
    noise_offset: float = 0.0
    duration: int = 86400
    interval: int = 60
    unmetered: tuple[ApplianceSpec, ...] = ()
    start: int = 1_300_000_000
    submeter_noise_std: float = 0.0
    # (start, end) offsets in seconds, relative to ``start``, with no readings at all
    outages: tuple[tuple[int, int], ...] = ()
    dataset_name: str = "synthetic"
    house_id: str = "1"

    def __post_init__(self) -> None:
        object.__setattr__(self, "appliances", tuple(self.appliances))
        object.__setattr__(self, "unmetered", tuple(self.unmetered))
        object.__setattr__(self, "outages", tuple(tuple(o) for o in self.outages))

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> SynthSpec:
        data = dict(data)

        def appliance(d: Mapping[str, Any]) -> ApplianceSpec:
            d = dict(d)
            if isinstance(d.get("mean_dwell"), list):
                d["mean_dwell"] = tuple(d["mean_dwell"])
            return ApplianceSpec(**d)

        data["appliances"] = tuple(appliance(a) for a in data.get("appliances", ()))
        data["unmetered"] = tuple(appliance(a) for a in data.get("unmetered", ()))
        try:
            return cls(**data)
        except TypeError as exc:
            raise DataError(f"invalid synthetic spec: {exc}") from exc

    def to_dict(self) -> dict[str, Any]:
        def appliance(a: ApplianceSpec) -> dict[str, Any]:
            return {
                "label": a.label,
                "levels": list(a.levels),
                "mean_dwell": list(a.mean_dwell) if isinstance(a.mean_dwell, tuple) else a.mean_dwell,
                "min_dwell": a.min_dwell,
                "initial_state": a.initial_state,
            }

        return {
            "appliances": [appliance(a) for a in self.appliances],
            "unmetered": [appliance(a) for a in self.unmetered],
            "noise_std": self.noise_std,
            "noise_offset": self.noise_offset,
            "duration": self.duration,
            "interval": self.interval,
            "start": self.start,
            "submeter_noise_std": self.submeter_noise_std,
            "outages": [list(o) for o in self.outages],
            "dataset_name": self.dataset_name,
            "house_id": self.house_id,
        }


def load_synth_spec(path: str | Path) -> SynthSpec:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"spec not found: {path}")
    try:
        return SynthSpec.from_dict(json.loads(path.read_text(encoding="utf-8")))
    except json.JSONDecodeError as exc:
        raise DataError(f"spec is not valid JSON: {exc}") from exc


def _validate(spec: SynthSpec) -> None:
    if spec.interval < 1 or spec.duration < 0:
        raise DataError("interval must be >= 1 s and duration >= 0")
    if spec.noise_std < 0 or spec.submeter_noise_std < 0:
        raise DataError("noise_std must be non-negative")
    if spec.noise_offset < 0:
        raise DataError("noise_offset must be non-negative")
    labels = [a.label for a in spec.appliances]
    if len(set(labels)) != len(labels) or not all(labels):
        raise DataError("appliance labels must be unique and nonempty")
    for a in spec.appliances + spec.unmetered:
        if len(a.levels) < 2:
            raise DataError("appliance needs at least 2 states")
        if sum(1 for v in a.levels if v == 0) != 1:
            raise DataError(f"appliance {a.label}: exactly one state must be 0 W")
        if any(v < 0 for v in a.levels):
            raise DataError(f"appliance {a.label}: negative power level")
        if a.min_dwell < 1:
            raise DataError(f"appliance {a.label}: min_dwell must be >= 1")
        means = a.dwell_means()
        if len(means) != len(a.levels) or any(m < a.min_dwell for m in means):
            raise DataError(f"appliance {a.label}: mean_dwell must be >= min_dwell for every state")
        if a.initial_state is not None and not 0 <= a.initial_state < len(a.levels):
            raise DataError(f"appliance {a.label}: initial_state out of range")


def simulate_states(
    appliance: ApplianceSpec, n: int, rng: np.random.Generator
) -> tuple[np.ndarray, list[tuple[int, int, int]]]:
    """State index per sample and the (sample, from, to) transitions."""
    k = len(appliance.levels)
    means = appliance.dwell_means()
    states = np.empty(n, dtype=np.int64)
    transitions: list[tuple[int, int, int]] = []
    state = int(rng.integers(k)) if appliance.initial_state is None else appliance.initial_state
    i = 0
    while i < n:
        p = 1.0 / (means[state] - appliance.min_dwell + 1.0)
        dwell = appliance.min_dwell - 1 + int(rng.geometric(p))
        states[i : i + dwell] = state
        i += dwell
        if i >= n:
            break
        nxt = int(rng.integers(k - 1))
        if nxt >= state:
            nxt += 1
        transitions.append((i, state, nxt))
        state = nxt
    return states, transitions


def generate_synthetic(spec: SynthSpec, seed: int) -> Household:
    """Simulate a household; bit-identical for a fixed ``seed``.

    Metered appliances become submeters; their hidden state changes are kept
    in ``Household.transition_log``.
    """
    _validate(spec)
    rng = np.random.default_rng(seed)
    n = spec.duration // spec.interval + 1
    ts = spec.start + np.arange(n, dtype=np.int64) * spec.interval

    metered, log = [], {}
    for a in spec.appliances:
        states, trans = simulate_states(a, n, rng)
        metered.append(np.asarray(a.levels)[states])
        log[a.label] = [(int(ts[i]), s, t) for i, s, t in trans]
    hidden = []
    for a in spec.unmetered:
        states, _ = simulate_states(a, n, rng)
        hidden.append(np.asarray(a.levels)[states])

    mains = stacked_sum(metered, n)
    for h in hidden:
        mains = mains + h
    if spec.noise_offset:
        mains = mains + spec.noise_offset
    if spec.noise_std > 0:
        mains = np.maximum(mains + rng.normal(0.0, spec.noise_std, n), 0.0)

    readings = metered
    if spec.submeter_noise_std > 0:
        readings = [np.maximum(x + rng.normal(0.0, spec.submeter_noise_std, n), 0.0) for x in metered]

    keep = np.ones(n, dtype=bool)
    for lo, hi in spec.outages:
        keep &= ~((ts >= spec.start + lo) & (ts < spec.start + hi))

    def series(values: np.ndarray) -> dict[str, PowerSeries]:
        return {"P": PowerSeries(ts[keep], values[keep], "P", spec.interval)}

    mains_ch = Channel("mains", "mains", "mains", series(mains))
    subs = [Channel(f"sub{i + 1}", a.label, "submeter", series(x)) for i, (a, x) in enumerate(zip(spec.appliances, readings))]
    return Household(spec.dataset_name, spec.house_id, (mains_ch,), tuple(subs), transition_log=log)


def square_wave_spec(
    levels: Sequence[float] = (0.0, 100.0),
    mean_dwell: float = 30.0,
    min_dwell: int = 10,
    duration: int = 86400,
    interval: int = 60,
    **kwargs: Any,
) -> SynthSpec:
    """Single on/off appliance; handy for fixtures."""
    return SynthSpec(
        appliances=(ApplianceSpec("appliance", tuple(levels), mean_dwell, min_dwell),),
        duration=duration,
        interval=interval,
        **kwargs,
    )
