from __future__ import annotations

import pytest
from helpers import two_appliance_spec

from nilmcompare.ingestion import ApplianceSpec, generate_synthetic, write_household

_CRITERIA: list[tuple[str, bool, str]] = []


@pytest.fixture
def criterion():
    """Record one acceptance-criterion outcome for the end-of-run table."""

    def record(name: str, passed: bool, detail: str = "") -> None:
        _CRITERIA.append((name, bool(passed), detail))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _CRITERIA:
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{status}  {name}  {detail}")


@pytest.fixture
def noiseless_house():
    return generate_synthetic(two_appliance_spec(), seed=7)


@pytest.fixture
def noisy_house():
    spec = two_appliance_spec(
        unmetered=(ApplianceSpec("heater", (0, 50), 40, 5),),
        noise_std=10.0,
    )
    return generate_synthetic(spec, seed=3)


@pytest.fixture
def house_on_disk(tmp_path, noisy_house):
    return write_household(noisy_house, tmp_path / "house")
