"""Baseline disaggregators and the train/test experiment protocol.

CO picks, independently per sample, the combination of appliance levels
whose sum is closest to the aggregate. FHMM runs exact Viterbi over the
product of per-appliance Markov chains with a Gaussian emission on the
aggregate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from nilmcompare.errors import DataError
from nilmcompare.events import EventParams, StateSet, detect_events, representative_states
from nilmcompare.metrics import evr, nar, rmse, tsr
from nilmcompare.timeseries import (
    PowerSeries,
    align,
    coarsest_interval,
    effective_duration,
    segments,
    stacked_sum,
    sum_channels,
)

COMBINATION_CAP = 10**6
JOINT_CAP = 4096
OFF_EPSILON = 5.0
VARIANCE_FLOOR = 1.0


@dataclass(frozen=True)
class ExperimentParams:
    k: int = 3
    off_epsilon: float = OFF_EPSILON
    combination_cap: int = COMBINATION_CAP
    joint_cap: int = JOINT_CAP
    variance_floor: float = VARIANCE_FLOOR
    interval: int | None = None
    events: EventParams = field(default_factory=EventParams)

    @property
    def power_type(self) -> str:
        return self.events.power_type


def _training_series(training, power_type: str) -> list[tuple[str, PowerSeries]]:
    out = []
    for ch in training.submeters:
        s = ch.get(power_type)
        if s is None:
            raise DataError(f"submeter {ch.label} has no {power_type} readings")
        if s.empty:
            raise DataError(f"submeter {ch.label} has no readings in the training window")
        out.append((ch.label, s))
    if not out:
        raise DataError("no submeters")
    return out


def learn_levels(series: PowerSeries, k: int, params: ExperimentParams) -> StateSet:
    """Clustered levels with an explicit 0 W off state."""
    states = representative_states(series, replace(params.events, k_max=k))
    snapped = {0.0 if v < params.off_epsilon else v for v in states.levels}
    snapped.add(0.0)
    return StateSet(tuple(sorted(snapped)), states.params)


# -- combinatorial optimisation --------------------------------------------


@dataclass(frozen=True)
class CoModel:
    labels: tuple[str, ...]
    states: tuple[StateSet, ...]
    power_type: str = "P"

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(s.levels) for s in self.states)


@dataclass(frozen=True)
class Estimates:
    labels: tuple[str, ...]
    series: tuple[PowerSeries, ...]
    state_indices: np.ndarray  # (T, M)

    def __getitem__(self, label: str) -> PowerSeries:
        return self.series[self.labels.index(label)]


def train_co(training, k: int = 3, params: ExperimentParams = ExperimentParams()) -> CoModel:
    if not 2 <= k <= 5:
        raise DataError("K must be between 2 and 5")
    labeled = _training_series(training, params.power_type)
    return CoModel(
        tuple(label for label, _ in labeled),
        tuple(learn_levels(s, k, params) for _, s in labeled),
        params.power_type,
    )


def _joint_table(level_sets: Sequence[Sequence[float]]) -> tuple[np.ndarray, np.ndarray]:
    """Lexicographically ordered state-index vectors and their level sums."""
    sizes = [len(l) for l in level_sets]
    idx = np.indices(sizes).reshape(len(sizes), -1).T
    sums = stacked_sum([np.asarray(l)[idx[:, i]] for i, l in enumerate(level_sets)], idx.shape[0])
    return idx, sums


def _estimates(model_labels, model_states, aggregate: PowerSeries, chosen: np.ndarray) -> Estimates:
    series = []
    for i, st in enumerate(model_states):
        levels = np.asarray(st.levels)
        series.append(aggregate.with_values(levels[chosen[:, i]]))
    return Estimates(tuple(model_labels), tuple(series), chosen)


def disaggregate_co(
    model: CoModel, aggregate: PowerSeries, combination_cap: int = COMBINATION_CAP
) -> Estimates:
    """Per-sample argmin of ``|y - sum of levels|``.

    Ties go to the lexicographically smallest state-index vector, with
    appliances taken in model order.
    """
    if aggregate.empty:
        raise DataError("empty aggregate")
    if math.prod(model.sizes) > combination_cap:
        raise DataError("state space too large for CO")
    idx, sums = _joint_table([s.levels for s in model.states])
    # Equal sums keep only their lexicographically first combination.
    order = np.argsort(sums, kind="stable")
    sorted_sums = sums[order]
    keep = np.concatenate(([True], sorted_sums[1:] != sorted_sums[:-1]))
    uniq, rep = sorted_sums[keep], order[keep]

    y = aggregate.values
    hi = np.clip(np.searchsorted(uniq, y, side="left"), 0, uniq.size - 1)
    lo = np.clip(hi - 1, 0, uniq.size - 1)
    res_lo = np.abs(y - uniq[lo])
    res_hi = np.abs(y - uniq[hi])
    pick_lo = (res_lo < res_hi) | ((res_lo == res_hi) & (rep[lo] < rep[hi]))
    best = np.where(pick_lo, rep[lo], rep[hi])
    return _estimates(model.labels, model.states, aggregate, idx[best])


# -- factorial HMM ----------------------------------------------------------


@dataclass(frozen=True)
class FhmmModel:
    labels: tuple[str, ...]
    states: tuple[StateSet, ...]
    initial: tuple[np.ndarray, ...]
    transitions: tuple[np.ndarray, ...]
    variance: float
    power_type: str = "P"

    def __post_init__(self) -> None:
        for st, pi, a in zip(self.states, self.initial, self.transitions):
            k = len(st.levels)
            if pi.shape != (k,) or a.shape != (k, k):
                raise DataError("parameter shapes do not match the level count")
            if abs(pi.sum() - 1.0) > 1e-9 or np.any(np.abs(a.sum(axis=1) - 1.0) > 1e-9):
                raise DataError("initial and transition rows must sum to 1")
            if min(st.levels) < 0:
                raise DataError("emission means must be non-negative")
        if not self.variance > 0:
            raise DataError("emission variance must be positive")

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(s.levels) for s in self.states)

    @property
    def means(self) -> tuple[np.ndarray, ...]:
        return tuple(np.asarray(s.levels) for s in self.states)


def _count_transitions(series: PowerSeries, assigned: np.ndarray, k: int, gap_factor: float) -> np.ndarray:
    counts = np.zeros((k, k))
    for seg in segments(series, gap_factor):
        a = assigned[seg]
        np.add.at(counts, (a[:-1], a[1:]), 1.0)
    return counts


def train_fhmm(training, k: int = 3, params: ExperimentParams = ExperimentParams()) -> FhmmModel:
    """Hard-assignment estimate of each appliance chain with add-one smoothing.

    The emission variance is the sum of the per-appliance mean squared
    residuals against the assigned levels, floored at ``variance_floor``.
    """
    if not 2 <= k <= 5:
        raise DataError("K must be between 2 and 5")
    labeled = _training_series(training, params.power_type)
    labels, states, initial, transitions = [], [], [], []
    variance = 0.0
    for label, s in labeled:
        if len(s) < 2:
            raise DataError(f"submeter {label} needs at least 2 training samples")
        st = learn_levels(s, k, params)
        assigned = st.assign(s.values)
        kk = len(st.levels)
        occupancy = np.bincount(assigned, minlength=kk) + 1.0
        counts = _count_transitions(s, assigned, kk, params.events.gap_factor) + 1.0
        labels.append(label)
        states.append(st)
        initial.append(occupancy / occupancy.sum())
        transitions.append(counts / counts.sum(axis=1, keepdims=True))
        resid = s.values - np.asarray(st.levels)[assigned]
        variance += float(np.mean(resid * resid))
    return FhmmModel(
        tuple(labels),
        tuple(states),
        tuple(initial),
        tuple(transitions),
        max(variance, params.variance_floor),
        params.power_type,
    )


def joint_means(model: FhmmModel) -> np.ndarray:
    """Aggregate mean of every joint state, shaped like the state tensor."""
    sizes = model.sizes
    total = np.zeros(sizes)
    for i, m in enumerate(model.means):
        shape = [1] * len(sizes)
        shape[i] = sizes[i]
        total = total + m.reshape(shape)
    return total


def log_emission(model: FhmmModel, y: np.ndarray) -> np.ndarray:
    """Gaussian log-density of each observation under each joint state, (T, *sizes)."""
    mu = joint_means(model)
    var = model.variance
    diff = y.reshape((-1,) + (1,) * mu.ndim) - mu[None]
    return -0.5 * math.log(2 * math.pi * var) - diff * diff / (2 * var)


def viterbi(model: FhmmModel, y: np.ndarray) -> tuple[np.ndarray, float]:
    """Most probable joint state path and its log-probability.

    The max over predecessor states is taken one appliance at a time, which
    costs ``J * sum(K_i)`` per step instead of ``J**2``. Ties resolve to the
    lowest joint-state index.
    """
    sizes = model.sizes
    m = len(sizes)
    t_len = y.size
    with np.errstate(divide="ignore"):
        log_pi = [np.log(p) for p in model.initial]
        log_a = [np.log(a) for a in model.transitions]
    emis = log_emission(model, y)

    delta = emis[0].copy()
    for i, lp in enumerate(log_pi):
        shape = [1] * m
        shape[i] = sizes[i]
        delta = delta + lp.reshape(shape)

    pointers = [[None] * m for _ in range(t_len)]
    for t in range(1, t_len):
        h = delta
        # Eliminate previous-state axes from the last appliance to the first so
        # the first-occurrence argmax yields the lexicographically lowest path.
        for i in range(m - 1, -1, -1):
            shape = [1] * (m + 1)
            shape[i] = sizes[i]
            shape[i + 1] = sizes[i]
            cand = np.expand_dims(h, i + 1) + log_a[i].reshape(shape)
            pointers[t][i] = np.argmax(cand, axis=i)
            h = np.max(cand, axis=i)
        delta = h + emis[t]

    flat = int(np.argmax(delta))
    best = float(delta.reshape(-1)[flat])
    path = np.empty((t_len, m), dtype=np.int64)
    path[-1] = np.unravel_index(flat, sizes)
    for t in range(t_len - 1, 0, -1):
        cur = tuple(int(v) for v in path[t])
        prev = []
        for i in range(m):
            prev.append(int(pointers[t][i][tuple(prev) + cur[i:]]))
        path[t - 1] = prev
    return path, best


def path_log_prob(model: FhmmModel, y: np.ndarray, path: np.ndarray) -> float:
    """Log joint probability of a state path and observations."""
    emis = log_emission(model, y)
    with np.errstate(divide="ignore"):
        total = sum(float(np.log(model.initial[i][path[0, i]])) for i in range(path.shape[1]))
        for t in range(1, path.shape[0]):
            for i in range(path.shape[1]):
                total += float(np.log(model.transitions[i][path[t - 1, i], path[t, i]]))
    for t in range(path.shape[0]):
        total += float(emis[(t,) + tuple(path[t])])
    return total


def disaggregate_fhmm(model: FhmmModel, aggregate: PowerSeries, joint_cap: int = JOINT_CAP) -> Estimates:
    if aggregate.empty:
        raise DataError("empty aggregate")
    if math.prod(model.sizes) > joint_cap:
        raise DataError("joint state space too large; reduce appliances or K")
    path, _ = viterbi(model, aggregate.values)
    return _estimates(model.labels, model.states, aggregate, path)


# -- experiment protocol ----------------------------------------------------


@dataclass(frozen=True)
class EvaluationReport:
    dataset: str
    house: str
    algorithm: str
    denoised: bool
    nar: float
    tsr: float
    evr: float
    rmse: dict[str, float]
    samples: int
    params: dict[str, object]
    version: str


def _windows_overlap(a: tuple[int, int], b: tuple[int, int]) -> bool:
    return a[0] < b[1] and b[0] < a[1]


def train(algorithm: str, training, params: ExperimentParams):
    if algorithm == "co":
        return train_co(training, params.k, params)
    if algorithm == "fhmm":
        return train_fhmm(training, params.k, params)
    raise DataError(f"unknown algorithm: {algorithm!r}")


def run_experiment(
    household,
    split: tuple[tuple[int, int], tuple[int, int]],
    algorithm: str,
    denoised: bool = False,
    params: ExperimentParams = ExperimentParams(),
    model: CoModel | FhmmModel | None = None,
    echo: dict[str, object] | None = None,
) -> EvaluationReport:
    """Train on one window, disaggregate another and score the result.

    ``split`` is ``((train_start, train_end), (test_start, test_end))`` with
    half-open windows in Unix seconds. Pass a previously trained ``model`` to
    score several test windows against the same training run.
    """
    from nilmcompare import __version__

    train_win, test_win = split
    for lo, hi in split:
        if not lo < hi:
            raise DataError("windows must have start < end")
    if _windows_overlap(train_win, test_win):
        raise DataError("train/test overlap")
    ptype = params.power_type

    if model is None:
        training = household.window(*train_win)
        model = train(algorithm, training, params)
    test = household.window(*test_win)

    truth_full = household.submeter_series(ptype)
    truth = test.submeter_series(ptype)
    if not truth:
        raise DataError(f"submeters lack {ptype} readings")
    if [ch.label for ch in household.submeters] != list(model.labels):
        raise DataError("model appliances do not match the household submeters")
    if any(s.empty for s in truth):
        raise DataError("test window has no submeter readings")

    mains = household.mains_series(ptype)
    involved = list(truth) + ([mains] if mains is not None else [])
    interval = params.interval or coarsest_interval(involved)
    if denoised:
        aggregate = sum_channels(truth, interval)
    else:
        test_mains = test.mains_series(ptype)
        if test_mains is None:
            raise DataError("mains required")
        if test_mains.empty:
            raise DataError("test window has no mains readings")
        aggregate = test_mains

    grid, values = align([aggregate, *truth], interval)
    if grid.size == 0:
        raise DataError("test window has no overlapping coverage")
    test_aggregate = PowerSeries(grid, values[0], ptype, interval)

    if isinstance(model, CoModel):
        est = disaggregate_co(model, test_aggregate, params.combination_cap)
    else:
        est = disaggregate_fhmm(model, test_aggregate, params.joint_cap)

    errors = {}
    for label, series, x in zip(model.labels, est.series, values[1:]):
        errors[label] = rmse(series, PowerSeries(grid, x, ptype, interval))

    noise = nar(aggregate, truth, interval).ratio

    reference = mains if mains is not None else truth_full[0]
    test_ref = reference.window(*test_win)
    gap_factor = params.events.gap_factor
    test_dur = effective_duration(test_ref, gap_factor) if not test_ref.empty else 0
    ratio_t = tsr(test_dur, effective_duration(reference, gap_factor))

    total_events = test_events = 0
    for s in truth_full:
        prof = detect_events(s, representative_states(s, params.events))
        total_events += prof.event_count
        test_events += prof.count_between(*test_win)
    ratio_e = evr(test_events, total_events)

    return EvaluationReport(
        dataset=household.dataset_name,
        house=household.house_id,
        algorithm=algorithm,
        denoised=denoised,
        nar=noise,
        tsr=ratio_t,
        evr=ratio_e,
        rmse=errors,
        samples=int(grid.size),
        params=dict(echo or {}),
        version=__version__,
    )
