import csv
import io
import json

import pytest
from helpers import two_appliance_spec

from nilmcompare.cli import main, replay_argv
from nilmcompare.disaggregation import EvaluationReport
from nilmcompare.ingestion import generate_synthetic, write_household
from nilmcompare.report import emit_report, metrics_block, parse_report_csv, sanitize

DAY = 86400


def make_report(**overrides):
    base = dict(
        dataset="REDD",
        house="6",
        algorithm="co",
        denoised=False,
        nar=0.314,
        tsr=0.259,
        evr=0.2,
        rmse={"fridge": 3.53553, "el, heater": 126.04},
        samples=10,
        params={"k": 3},
        version="0.1.0",
    )
    base.update(overrides)
    return EvaluationReport(**base)


class TestEmitReport:
    def test_csv_precision(self):
        text = emit_report(make_report())
        assert "tsr,0.259000\n" in text
        assert "fridge,3.5\n" in text
        assert "nar,0.314000\n" in text

    def test_markdown_rounding(self):
        text = emit_report(make_report(), "markdown")
        assert "| fridge | 3.5 |" in text
        assert "| tsr | 0.259000 |" in text

    def test_labels_sanitized_for_csv(self):
        text = emit_report(make_report())
        rows = list(csv.reader(io.StringIO(text)))
        assert all(len(r) in (0, 2) for r in rows)
        meta, rmse = parse_report_csv(text)
        assert rmse == {"fridge": "3.5", "el_ heater": "126.0"}
        assert meta["evr"] == "0.200000"

    def test_always_has_context_ratios(self):
        meta, _ = parse_report_csv(emit_report(make_report()))
        assert {"nar", "tsr", "evr"} <= set(meta)

    def test_sanitize(self):
        assert sanitize("a|b,c\nd") == "a_b_c_d"


@pytest.fixture
def synth_manifest(tmp_path):
    spec = two_appliance_spec(duration=3 * DAY)
    return write_household(generate_synthetic(spec, 0), tmp_path / "zero"), spec


@pytest.fixture
def noisy_manifest(house_on_disk):
    return house_on_disk


class TestCli:
    def test_nar_zero_noise(self, synth_manifest, capsys):
        path, _ = synth_manifest
        assert main(["nar", "--manifest", str(path), "--power-type", "P"]) == 0
        assert capsys.readouterr().out == "0.000000\n"

    def test_experiment_denoised(self, noisy_manifest, tmp_path):
        out = tmp_path / "r.csv"
        t0 = two_appliance_spec().start
        argv = [
            "experiment", "--manifest", str(noisy_manifest), "--algo", "co",
            "--train-start", str(t0), "--train-end", str(t0 + 2 * DAY),
            "--test-start", str(t0 + 2 * DAY), "--test-end", str(t0 + 4 * DAY + 1),
            "--denoised", "--out", str(out),
        ]  # fmt: skip
        assert main(argv) == 0
        text = out.read_text()
        assert "nar,0.0" in text
        assert "denoised,true" in text

    def test_experiment_markdown(self, noisy_manifest, tmp_path):
        out = tmp_path / "r.md"
        t0 = two_appliance_spec().start
        argv = [
            "experiment", "--manifest", str(noisy_manifest), "--algo", "fhmm", "--k", "2",
            "--train-start", str(t0), "--train-end", str(t0 + 2 * DAY),
            "--test-start", str(t0 + 2 * DAY), "--test-end", str(t0 + 4 * DAY + 1),
            "--format", "markdown", "--out", str(out),
        ]  # fmt: skip
        assert main(argv) == 0
        assert "| appliance | FHMM RMSE [W] |" in out.read_text()

    def test_summarize_matches_generator(self, synth_manifest, tmp_path):
        path, spec = synth_manifest
        out = tmp_path / "summary.csv"
        assert main(["summarize", "--manifest", str(path), "--out", str(out)]) == 0
        row = next(csv.DictReader(io.StringIO(out.read_text())))
        assert float(row["duration_days_wallclock"]) == spec.duration / DAY
        assert row["meters_with_mains"] == "3"
        assert row["meters_without_mains"] == "2"
        assert row["mains_interval_s"] == str(spec.interval)
        assert row["nar_p"] == "0.000000"
        assert row["nar_s"] == "-"

    def test_summarize_markdown_footnote(self, synth_manifest, tmp_path):
        path, _ = synth_manifest
        out = tmp_path / "summary.md"
        assert main(["summarize", "--manifest", str(path), "--format", "markdown", "--out", str(out)]) == 0
        assert "household total" in out.read_text()

    def test_events(self, synth_manifest, tmp_path):
        path, _ = synth_manifest
        out = tmp_path / "events.csv"
        assert main(["events", "--manifest", str(path), "--min-dwell", "2", "--out", str(out)]) == 0
        rows = list(csv.DictReader(io.StringIO(out.read_text())))
        assert [r["label"] for r in rows] == ["fridge", "kettle"]
        assert rows[0]["levels"] == "0.000 100.000"
        assert int(rows[0]["event_count"]) > 0

    def test_synth(self, tmp_path, capsys):
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(json.dumps(two_appliance_spec(duration=DAY).to_dict()))
        assert main(["synth", "--spec", str(spec_path), "--seed", "3", "--out-dir", str(tmp_path / "out")]) == 0
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert [c["role"] for c in manifest["channels"]] == ["mains", "submeter", "submeter"]
        assert capsys.readouterr().out == ""

    def test_unknown_flag_is_usage_error(self, synth_manifest, capsys):
        path, _ = synth_manifest
        assert main(["nar", "--manifest", str(path), "--power-type", "P", "--bogus"]) == 1
        err = capsys.readouterr().err
        assert "--bogus" in err and "--power-type" in err

    def test_missing_subcommand(self, capsys):
        assert main([]) == 1

    def test_data_error_exit_code(self, tmp_path, capsys):
        assert main(["nar", "--manifest", str(tmp_path / "none.json"), "--power-type", "P"]) == 2
        assert "manifest not found" in capsys.readouterr().err

    def test_bad_synth_spec(self, tmp_path):
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(json.dumps({"appliances": [{"label": "a", "levels": [0]}]}))
        assert main(["synth", "--spec", str(spec_path), "--seed", "1", "--out-dir", str(tmp_path)]) == 2

    def test_replay_is_byte_identical(self, noisy_manifest, tmp_path):
        first = tmp_path / "first.csv"
        t0 = two_appliance_spec().start
        argv = [
            "experiment", "--manifest", str(noisy_manifest), "--algo", "fhmm", "--k", "2", "--seed", "4",
            "--train-start", str(t0), "--train-end", str(t0 + 2 * DAY),
            "--test-start", str(t0 + 2 * DAY), "--test-end", str(t0 + 4 * DAY + 1),
            "--out", str(first),
        ]  # fmt: skip
        assert main(argv) == 0
        meta, _ = parse_report_csv(first.read_text())
        second = tmp_path / "second.csv"
        assert main(replay_argv(meta, str(second))) == 0
        assert first.read_bytes() == second.read_bytes()


def test_metrics_block_excludes_identifiers():
    block = metrics_block(make_report())
    assert "dataset" not in block and "tool_version" not in block
    assert block.splitlines()[0] == "algorithm,co"
