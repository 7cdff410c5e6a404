import numpy as np
import pytest
from helpers import series, two_appliance_spec
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import nar_loop, rmse_loop

from nilmcompare import DataError
from nilmcompare.events import EventParams
from nilmcompare.ingestion import Channel, Household, generate_synthetic
from nilmcompare.metrics import dataset_summary, evr, nar, rmse, tsr
from nilmcompare.timeseries import PowerSeries

DAY = 86400


class TestNar:
    def test_exact_sum_is_zero(self):
        subs = [series([10, 20, 30]), series([1, 2, 3])]
        assert nar(series([11, 22, 33]), subs).ratio == 0.0

    def test_quarter(self):
        result = nar(series(np.full(10, 100.0)), [series(np.full(10, 75.0))])
        assert result.ratio == 0.25
        assert result.samples_used == 10

    def test_hand_example(self):
        result = nar(series([10, 20, 30]), [series([5, 25, 15])])
        assert result.ratio == pytest.approx(25 / 60, abs=1e-9)

    def test_above_one_not_clamped(self):
        result = nar(series([10.0, 10.0]), [series([30.0, 30.0])])
        assert result.ratio == 2.0
        assert result.exceeds_one

    def test_no_overlap(self):
        with pytest.raises(DataError, match="no overlapping coverage"):
            nar(series([1.0, 2.0], start=0), [series([1.0], start=10_000)])

    def test_zero_energy(self):
        with pytest.raises(DataError, match="zero aggregate energy"):
            nar(series([0.0, 0.0]), [series([0.0, 0.0])])

    def test_power_type_mismatch(self):
        with pytest.raises(DataError, match="power type mismatch"):
            nar(series([1.0]), [series([1.0], power_type="S")])

    def test_multirate_aligns_to_coarsest(self):
        mains = series(np.full(12, 100.0), interval=1)
        sub = series([60.0, 60.0], interval=6)
        result = nar(mains, [sub])
        assert result.interval == 6
        assert result.samples_used == 2
        assert result.ratio == pytest.approx(0.4)

    @settings(max_examples=50, deadline=None)
    @given(
        vals=st.lists(st.floats(1, 1e3), min_size=1, max_size=50),
        seed=st.integers(0, 1000),
        scale=st.floats(1e-3, 1e3),
    )
    def test_scale_invariant(self, vals, seed, scale):
        rng = np.random.default_rng(seed)
        y = np.asarray(vals)
        subs = [rng.uniform(0, 1, y.size) * y for _ in range(2)]
        a = nar(series(y), [series(s) for s in subs]).ratio
        b = nar(series(y * scale), [series(s * scale) for s in subs]).ratio
        assert b == pytest.approx(a, rel=1e-9, abs=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(vals=st.lists(st.floats(1, 1e3), min_size=1, max_size=50), seed=st.integers(0, 1000))
    def test_residual_channel_never_increases_noise(self, vals, seed):
        rng = np.random.default_rng(seed)
        y = np.asarray(vals)
        subs = [rng.uniform(0, 0.8, y.size) * y for _ in range(2)]
        if rng.random() < 0.5:
            subs.append(rng.uniform(0, 2, y.size) * y)
        residual = np.maximum(y - np.sum(subs, axis=0), 0.0)
        before = nar(series(y), [series(s) for s in subs]).ratio
        after = nar(series(y), [series(s) for s in subs] + [series(residual)]).ratio
        assert after <= before + 1e-12

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            n = int(rng.integers(1, 1000))
            y = rng.uniform(0, 1000, n)
            rows = [rng.uniform(0, 300, n) for _ in range(int(rng.integers(0, 4)))]
            got = nar(series(y), [series(r) for r in rows]).ratio
            assert abs(got - nar_loop(y.tolist(), [r.tolist() for r in rows])) <= 1e-9


class TestRatios:
    def test_tsr(self):
        assert tsr(10, 10) == 1.0
        assert tsr(9 * DAY, 36 * DAY) == 0.25
        assert tsr(0, 5) == 0.0
        with pytest.raises(DataError, match="test exceeds total"):
            tsr(11, 10)
        with pytest.raises(DataError):
            tsr(1, 0)

    @pytest.mark.parametrize("pct", [25.9, 17.1, 8.5])
    def test_tsr_reported_splits(self, pct):
        # a 36-day house with test windows of the reported sizes
        total = 36 * DAY
        assert tsr(pct / 100 * total, total) == pytest.approx(pct / 100)

    def test_evr(self):
        assert evr(600, 600) == 1.0
        assert evr(150, 600) == 0.25
        assert evr(0, 600) == 0.0
        with pytest.raises(DataError, match="no events in dataset"):
            evr(0, 0)


class TestRmse:
    def test_identical(self):
        s = series([1.0, 2.0, 3.0])
        assert rmse(s, s) == 0.0

    def test_hand_example(self):
        assert rmse(series([0.0, 0.0]), series([3.0, 4.0])) == pytest.approx(np.sqrt(12.5))

    def test_constant_offset(self):
        base = np.array([10.0, 50.0, 20.0])
        assert rmse(series(base + 7.0), series(base)) == pytest.approx(7.0, abs=1e-12)

    def test_errors(self):
        with pytest.raises(DataError, match="unaligned series"):
            rmse(series([1.0, 2.0]), series([1.0, 2.0], start=60))
        with pytest.raises(DataError, match="empty overlap"):
            rmse(series([]), series([]))

    def test_symmetry_and_triangle(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            n = int(rng.integers(1, 200))
            a, b, c = (series(rng.uniform(0, 500, n)) for _ in range(3))
            assert rmse(a, b) == pytest.approx(rmse(b, a), abs=1e-9)
            assert rmse(a, c) <= rmse(a, b) + rmse(b, c) + 1e-9

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            n = int(rng.integers(1, 1000))
            a, b = rng.uniform(0, 2000, n), rng.uniform(0, 2000, n)
            assert abs(rmse(series(a), series(b)) - rmse_loop(a.tolist(), b.tolist())) <= 1e-9


class TestDatasetSummary:
    def test_matches_generator(self):
        spec = two_appliance_spec(duration=6 * DAY, interval=30)
        house = generate_synthetic(spec, 2)
        row = dataset_summary(house)
        assert row.duration_days_wallclock == 6
        assert row.duration_days_effective == 6
        assert (row.meters_with_mains, row.meters_without_mains) == (3, 2)
        assert (row.mains_interval_s, row.sub_interval_s) == (30, 30)
        assert row.mains_power_types == ("P",) and row.sub_power_types == ("P",)
        assert row.nar == {"P": 0.0, "Q": None, "S": None}
        expected = sum(len(v) for v in house.transition_log.values()) / 6
        assert row.events_avg_per_day == pytest.approx(expected)

    def test_missing_sub_apparent_power(self):
        n = 100
        mains = Channel("m", "mains", "mains", {"P": series(np.full(n, 100.0)), "S": series(np.full(n, 120.0), power_type="S")})
        sub = Channel("a", "tv", "submeter", {"P": series(np.full(n, 60.0))})
        row = dataset_summary(Household("d", "1", (mains,), (sub,)))
        assert row.nar["P"] == pytest.approx(0.4)
        assert row.nar["S"] is None
        assert row.mains_power_types == ("P", "S")

    def test_mains_only(self):
        mains = Channel("m", "mains", "mains", {"P": series(np.full(50, 80.0))})
        row = dataset_summary(Household("d", "1", (mains,), ()))
        assert row.nar["P"] == 1.0
        assert row.events_min_per_day is None
        assert row.sub_interval_s is None

    def test_effective_vs_wallclock(self):
        spec = two_appliance_spec(duration=4 * DAY, outages=((DAY, 2 * DAY),))
        row = dataset_summary(generate_synthetic(spec, 0), EventParams())
        assert row.duration_days_wallclock == 4
        assert row.duration_days_effective == pytest.approx(3 - 60 / DAY)
