"""End-to-end command-line runs: CSV output, exit codes, config files, traces."""

import csv

import pytest

from src.availability_latency.models.code_domain import save_layout, single_object_layout
from src.availability_latency.models.core_types import ExitStatus
from src.availability_latency.service import run
from tests.shared.test_models import CommandLineTestCase

pytestmark = pytest.mark.integration

SMALL_SIMULATION = ("--arrivals", "2000", "--reps", "2")


@pytest.fixture(autouse=True)
def _clean_environment(monkeypatch):
    for name in ("SEED", "ARRIVALS", "REPS", "LAMBDAS", "OUT"):
        monkeypatch.delenv(f"AVAIL_LAB_{name}", raising=False)


def _read(path) -> tuple[list[str], list[dict[str, str]]]:
    lines = path.read_text(encoding="utf-8").splitlines()
    comments = [line[2:] for line in lines if line.startswith("# ")]
    body = [line for line in lines if not line.startswith("#")]
    return comments, list(csv.DictReader(body))


def test_exit_codes(tmp_path):
    out = str(tmp_path)
    cases = [
        CommandLineTestCase(argv=("table1", "--out", out), expected_status=ExitStatus.OK, reason="closed forms"),
        CommandLineTestCase(
            argv=("bounds", "--out", out, "--lambdas", "0.5,1.0"), expected_status=ExitStatus.OK, reason="stable grid"
        ),
        CommandLineTestCase(
            argv=("qbd-ub", "--out", out, "--lambdas", "0.5,1.7"),
            expected_status=ExitStatus.INSTABILITY,
            reason="1.7 is beyond every capacity",
        ),
        CommandLineTestCase(argv=(), expected_status=ExitStatus.INVALID_CONFIG, reason="no subcommand"),
        CommandLineTestCase(argv=("table2",), expected_status=ExitStatus.INVALID_CONFIG, reason="unknown subcommand"),
        CommandLineTestCase(
            argv=("bounds", "--reps", "0"), expected_status=ExitStatus.INVALID_CONFIG, reason="reps below one"
        ),
        CommandLineTestCase(
            argv=("bounds", "--lambdas", "0.5,-1"), expected_status=ExitStatus.INVALID_CONFIG, reason="negative rate"
        ),
        CommandLineTestCase(
            argv=("fjfa-bounds", "--layout-file", str(tmp_path / "missing.json")),
            expected_status=ExitStatus.INVALID_CONFIG,
            reason="layout file does not exist",
        ),
        CommandLineTestCase(
            argv=("bounds", "--config", str(tmp_path / "missing.conf")),
            expected_status=ExitStatus.INVALID_CONFIG,
            reason="config file does not exist",
        ),
    ]
    for case in cases:
        status = run(list(case.argv))
        assert case.verify(status), case.explain(status)


def test_table1_output(tmp_path):
    assert run(["table1", "--out", str(tmp_path)]) == ExitStatus.OK

    comments, rows = _read(tmp_path / "table1.csv")
    by_label = {row["label"]: row for row in rows}

    assert comments[0] == "experiment = table1"
    assert "seed = 20200101" in comments
    assert float(by_label["(14,6,2,3)-LRC"]["et_mu"]) == pytest.approx(16 / 35)
    assert float(by_label["3-replication"]["et_mu_norm"]) == pytest.approx(2 / 3)
    assert by_label["(10,6,3,1)-LRC"]["mismatch"] == "yes"
    assert by_label["(9,6)-MDS"]["mismatch"] == "no"


def test_unstable_cells_are_written_and_flagged(tmp_path):
    assert run(["qbd-ub", "--out", str(tmp_path), "--lambdas", "0.5,1.7"]) == ExitStatus.INSTABILITY

    _, rows = _read(tmp_path / "qbd_ub.csv")

    assert [row["lambda"] for row in rows] == ["0.5", "1.7"]
    assert float(rows[0]["lb_fsm"]) <= float(rows[0]["ub_ma"]) <= float(rows[0]["ub_sm"])
    assert rows[1]["ub_ma"] == rows[1]["ub_sm"] == "unstable"


def test_default_grid_is_used_when_none_is_given(tmp_path):
    assert run(["approx", "--out", str(tmp_path), "--t", "2"]) == ExitStatus.OK

    comments, rows = _read(tmp_path / "approx.csv")

    assert len(rows) == 10
    assert "t = 2" in comments
    assert {"w_2-0", "w_1-1", "w_0-2"} <= set(rows[0])
    assert rows[0]["ub_ma"] == "n/a"


def test_lowtraffic_grid_flags(tmp_path):
    argv = ["lowtraffic", "--out", str(tmp_path), "--r-values", "2", "--t-values", "0,1,2"]
    assert run(argv) == ExitStatus.OK

    _, rows = _read(tmp_path / "lowtraffic.csv")

    assert [row["t"] for row in rows] == ["0", "1", "2"]
    assert float(rows[1]["et"]) == pytest.approx(2 / 3)


def test_config_file_values_and_flag_override(tmp_path):
    config = tmp_path / "lab.conf"
    config.write_text("# short sweep\nlambdas = 0.25, 0.5\nseed = 11\n", encoding="utf-8")

    assert run(["bounds", "--config", str(config), "--out", str(tmp_path), "--seed", "12"]) == ExitStatus.OK
    comments, rows = _read(tmp_path / "bounds.csv")

    assert len(rows) == 2
    assert "seed = 12" in comments
    assert "lambdas = 0.25,0.5" in comments


def test_a_run_is_repeatable_from_its_own_output(tmp_path):
    first, second = tmp_path / "first", tmp_path / "second"
    argv = ["fjfa-bounds", "--out", str(first), "--lambdas", "0.4,0.8", "--seed", "5", *SMALL_SIMULATION]
    assert run(argv) == ExitStatus.OK

    comments, rows = _read(first / "fjfa_bounds.csv")
    config = tmp_path / "repeat.conf"
    config.write_text("\n".join(comments) + "\n", encoding="utf-8")
    assert run(["fjfa-bounds", "--config", str(config), "--out", str(second)]) == ExitStatus.OK

    _, repeated = _read(second / "fjfa_bounds.csv")
    assert repeated == rows


def test_fixed_object_sweep_with_traces(tmp_path):
    argv = ["fjfa-bounds", "--out", str(tmp_path), "--lambdas", "0.5", "--trace", *SMALL_SIMULATION]
    assert run(argv) == ExitStatus.OK

    _, rows = _read(tmp_path / "fjfa_bounds.csv")
    trace = tmp_path / "fjfa_bounds_trace_0p5.csv"

    row = rows[0]
    assert float(row["lb_fsm"]) <= float(row["sim_fa"]) <= float(row["ub_sm"])
    assert float(row["sim_fa_hw"]) > 0
    assert trace.exists()
    assert trace.read_text(encoding="utf-8").startswith("arrival,object,hol_epoch,departure,type,winner")


def test_layout_file_fixes_locality_and_availability(tmp_path):
    layout = tmp_path / "layout.json"
    save_layout(single_object_layout(2, 2), layout)

    argv = ["service-freqs", "--out", str(tmp_path), "--lambdas", "0.5", "--layout-file", str(layout), *SMALL_SIMULATION]
    assert run(argv) == ExitStatus.OK

    comments, rows = _read(tmp_path / "service_freqs.csv")

    assert "t = 2" in comments
    assert {"f_2-0", "f_1-1", "f_0-2", "ws", "wr"} <= set(rows[0])
    assert rows[0]["ws_bound"] == "n/a"
    assert sum(float(rows[0][f"f_{label}"]) for label in ("2-0", "1-1", "0-2")) == pytest.approx(1.0)


def test_service_frequencies_with_a_slower_systematic_server(tmp_path):
    argv = ["service-freqs", "--out", str(tmp_path), "--lambdas", "0.5", "--gamma", "0.5", *SMALL_SIMULATION]
    assert run(argv) == ExitStatus.OK

    _, rows = _read(tmp_path / "service_freqs.csv")
    row = rows[0]

    assert float(row["ws_bound"]) == pytest.approx(0.5 * 2.5 / (0.5 * 2.5 + 2.0))
    assert float(row["ws"]) + float(row["wr"]) == pytest.approx(1.0)


def test_code_comparison(tmp_path):
    argv = ["compare-codes", "--out", str(tmp_path), "--lambdas", "0.5", "--profiles", "uniform", *SMALL_SIMULATION]
    assert run(argv) == ExitStatus.OK

    _, rows = _read(tmp_path / "compare_codes.csv")

    assert set(rows[0]) == {
        "lambda",
        *(f"{code}_uniform{suffix}" for code in ("replication", "mds", "lrc", "availability") for suffix in ("", "_hw")),
    }
    assert all(float(value) > 0 for key, value in rows[0].items() if not key.endswith("_hw"))


def test_plot_is_written_next_to_the_table(tmp_path):
    pytest.importorskip("matplotlib")

    assert run(["bounds", "--out", str(tmp_path), "--lambdas", "0.5,1.0", "--plot"]) == ExitStatus.OK

    assert (tmp_path / "bounds.svg").read_text(encoding="utf-8").lstrip().startswith("<?xml")


def test_parallel_cells_write_the_same_table_and_traces(tmp_path):
    serial, parallel = tmp_path / "serial", tmp_path / "parallel"
    argv = ["fjfa-bounds", "--lambdas", "0.4,0.8,1.2", "--trace", *SMALL_SIMULATION]

    assert run([*argv, "--out", str(serial), "--workers", "1"]) == ExitStatus.OK
    assert run([*argv, "--out", str(parallel), "--workers", "2"]) == ExitStatus.OK

    _, serial_rows = _read(serial / "fjfa_bounds.csv")
    _, parallel_rows = _read(parallel / "fjfa_bounds.csv")
    assert parallel_rows == serial_rows
    assert [row["lambda"] for row in parallel_rows] == ["0.4", "0.8", "1.2"]
    for label in ("0p4", "0p8", "1p2"):
        name = f"fjfa_bounds_trace_{label}.csv"
        assert (parallel / name).read_text(encoding="utf-8") == (serial / name).read_text(encoding="utf-8")


def test_trace_flag_is_reported_for_experiments_without_simulation(tmp_path, caplog):
    with caplog.at_level("WARNING", logger="src.availability_latency"):
        assert run(["bounds", "--out", str(tmp_path), "--lambdas", "0.5", "--trace"]) == ExitStatus.OK

    assert "runs no simulation" in caplog.text
    assert not list(tmp_path.glob("*_trace_*.csv"))
