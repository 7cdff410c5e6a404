from __future__ import annotations

import numpy as np

from nilmcompare.ingestion import ApplianceSpec, SynthSpec
from nilmcompare.timeseries import PowerSeries


def series(values, interval=60, start=0, power_type="P", timestamps=None):
    values = np.asarray(values, dtype=float)
    if timestamps is None:
        timestamps = start + interval * np.arange(values.size)
    return PowerSeries(np.asarray(timestamps), values, power_type, interval)


def two_appliance_spec(**overrides) -> SynthSpec:
    base = dict(
        appliances=(
            ApplianceSpec("fridge", (0, 100), 30, 5),
            ApplianceSpec("kettle", (0, 60, 200), 20, 5),
        ),
        duration=4 * 86400,
        interval=60,
    )
    base.update(overrides)
    return SynthSpec(**base)
