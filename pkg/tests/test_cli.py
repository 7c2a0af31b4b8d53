"""End-to-end checks of the command-line interface.

Each test drives ``effconc.cli.main`` in-process with an argv list and
captures stdout/stderr, so the assertions cover exactly what a shell user
would see: CSV layout, JSON mirrors, exit codes, and byte determinism.
"""

import csv
import io
import json
import math

import numpy as np
import pytest

from effconc.classical import (
    bernstein_quantile,
    bernstein_tail,
    berry_esseen_tail,
    hoeffding_quantile,
    hoeffding_tail,
    nonuniform_be_tail,
)
from effconc.cli import main
from effconc.empirical import (
    SampleSummary,
    efficient_ebe_quantile,
    empirical_bernstein_quantile,
)
from effconc.model import Problem
from effconc.stopping import StoppingConfig, simulate_uniform
from effconc.wasserstein import wass_quantile, wass_tail
from effconc.zero_bias import zero_bias_tail_at_threshold


def run_cli(args, capsys):
    code = main(args)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def parse_csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], rows[1:]


class TestTail:
    def test_values_match_library_bit_for_bit(self, capsys):
        code, out, err = run_cli(
            ["tail", "--n", "200", "--sigma", "0.25", "--u", "2.0"], capsys
        )
        assert code == 0 and err == ""
        header, rows = parse_csv(out)
        assert header == [
            "bound", "n", "r", "sigma", "u", "value", "winner", "is_min",
        ]
        prob = Problem(n=200, r=1.0, sigma=0.25)
        by_name = {row[0]: row for row in rows}
        expected = {
            "hoeffding": hoeffding_tail(prob, 2.0),
            "bernstein": bernstein_tail(prob, 2.0),
            "berry_esseen": berry_esseen_tail(prob, 2.0),
            "nonuniform_berry_esseen": nonuniform_be_tail(prob, 2.0),
            "zero_bias": zero_bias_tail_at_threshold(prob, 2.0 * 0.25),
            "wasserstein": wass_tail(prob, 2.0).value,
        }
        for name, value in expected.items():
            assert float(by_name[name][5]) == value
            assert by_name[name][5] == repr(value)

    def test_min_flag_marks_smallest(self, capsys):
        _, out, _ = run_cli(
            ["tail", "--n", "50", "--sigma", "0.1", "--u", "1.5"], capsys
        )
        _, rows = parse_csv(out)
        values = [float(row[5]) for row in rows]
        flags = [row[7] for row in rows]
        smallest = min(values)
        for value, flag in zip(values, flags):
            assert flag == ("true" if value == smallest else "false")
        assert "true" in flags

    def test_bounds_subset_and_order(self, capsys):
        _, out, _ = run_cli(
            [
                "tail", "--n", "100", "--sigma", "0.3", "--u", "1.0",
                "--bounds", "zero_bias,hoeffding",
            ],
            capsys,
        )
        _, rows = parse_csv(out)
        assert [row[0] for row in rows] == ["zero_bias", "hoeffding"]

    def test_json_mirror_has_native_types(self, capsys):
        _, out, _ = run_cli(
            [
                "tail", "--n", "100", "--sigma", "0.25", "--u", "1.0",
                "--bounds", "hoeffding,bernstein", "--json",
            ],
            capsys,
        )
        records = [json.loads(line) for line in out.splitlines()]
        assert len(records) == 2
        assert isinstance(records[0]["value"], float)
        assert isinstance(records[0]["is_min"], bool)
        assert records[0]["bound"] == "hoeffding"

    def test_unknown_bound_is_usage_error(self, capsys):
        code, _, err = run_cli(
            [
                "tail", "--n", "100", "--sigma", "0.25", "--u", "1.0",
                "--bounds", "gauss",
            ],
            capsys,
        )
        assert code == 1
        assert "gauss" in err

    def test_bad_problem_is_usage_error(self, capsys):
        code, _, err = run_cli(
            ["tail", "--n", "100", "--sigma", "0.6", "--u", "1.0"], capsys
        )
        assert code == 1 and err != ""

    def test_negative_u_rejected(self, capsys):
        code, _, _ = run_cli(
            ["tail", "--n", "100", "--sigma", "0.25", "--u", "-1.0"], capsys
        )
        assert code == 1

    def test_missing_required_flag_is_usage_error(self, capsys):
        code, _, _ = run_cli(["tail", "--n", "100", "--u", "1.0"], capsys)
        assert code == 1


class TestQuantile:
    def test_point_query_matches_library(self, capsys):
        _, out, _ = run_cli(
            [
                "quantile", "--n", "10000", "--sigma", "0.25",
                "--delta", "0.05",
            ],
            capsys,
        )
        header, rows = parse_csv(out)
        assert header == [
            "bound", "n", "r", "sigma", "delta", "sided", "value", "winner",
        ]
        prob = Problem(n=10000, r=1.0, sigma=0.25)
        by_name = {row[0]: row for row in rows}
        assert float(by_name["efficient"][6]) == wass_quantile(
            prob, 0.05, sided="two"
        ).value
        assert float(by_name["bernstein"][6]) == bernstein_quantile(prob, 0.05)
        assert float(by_name["hoeffding"][6]) == hoeffding_quantile(
            prob, 0.05, "two"
        )

    def test_one_sided_flag_reaches_library(self, capsys):
        _, out, _ = run_cli(
            [
                "quantile", "--n", "400", "--sigma", "0.2", "--delta", "0.1",
                "--sided", "one", "--bounds", "hoeffding",
            ],
            capsys,
        )
        _, rows = parse_csv(out)
        prob = Problem(n=400, r=1.0, sigma=0.2)
        assert float(rows[0][6]) == hoeffding_quantile(prob, 0.1, "one")

    def test_sweep_grid_is_log_spaced_decades(self, capsys):
        _, out, _ = run_cli(
            [
                "quantile", "--sigma", "0.25", "--delta", "0.05", "--sweep",
                "--n-sweep", "1e2..1e5", "--bounds", "efficient",
            ],
            capsys,
        )
        header, rows = parse_csv(out)
        assert header == [
            "bound", "n", "r", "sigma", "delta", "sided", "value",
        ]
        assert [int(row[1]) for row in rows] == [100, 1000, 10000, 100000]
        values = [float(row[6]) for row in rows]
        assert values == sorted(values, reverse=True)

    def test_sweep_range_must_be_decades(self, capsys):
        code, _, err = run_cli(
            [
                "quantile", "--sigma", "0.25", "--delta", "0.05", "--sweep",
                "--n-sweep", "150..9000",
            ],
            capsys,
        )
        assert code == 1
        assert "powers of ten" in err

    def test_point_query_requires_n(self, capsys):
        code, _, err = run_cli(
            ["quantile", "--sigma", "0.25", "--delta", "0.05"], capsys
        )
        assert code == 1
        assert "--n" in err

    def test_delta_out_of_range(self, capsys):
        code, _, _ = run_cli(
            ["quantile", "--n", "10", "--sigma", "0.25", "--delta", "1.5"],
            capsys,
        )
        assert code == 1


class TestEmpirical:
    def test_summary_mode_matches_library(self, capsys):
        _, out, _ = run_cli(
            [
                "empirical", "--n", "100000", "--mean", "0.5",
                "--empvar", "0.0625", "--delta", "0.05",
            ],
            capsys,
        )
        header, rows = parse_csv(out)
        assert header == [
            "bound", "n", "mean", "emp_var", "r", "delta", "sided", "value",
            "half_width", "winner",
        ]
        summary = SampleSummary(n=100000, mean=0.5, emp_var=0.0625)
        by_name = {row[0]: row for row in rows}
        ebe = efficient_ebe_quantile(summary, 1.0, 0.05, sided="two")
        assert float(by_name["ebe"][7]) == ebe.value
        assert float(by_name["emp_bernstein"][7]) == (
            empirical_bernstein_quantile(summary, 1.0, 0.025)
        )
        assert float(by_name["hoeffding"][7]) == math.sqrt(
            math.log(2.0 / 0.05) / 2.0
        )
        hw = float(by_name["ebe"][8])
        assert hw == pytest.approx(ebe.value / math.sqrt(100000), rel=1e-15)

    def test_file_mode_equals_summary_mode(self, tmp_path, capsys):
        rng = np.random.default_rng(11)
        data = rng.uniform(0.0, 1.0, size=64)
        path = tmp_path / "data.txt"
        path.write_text(
            "".join(f"{float(x)!r}\n" for x in data), encoding="utf-8"
        )
        _, out_file, _ = run_cli(
            ["empirical", "--file", str(path), "--delta", "0.1"], capsys
        )
        mean = float(data.mean())
        emp_var = float(np.mean(np.square(data)) - mean * mean)
        _, out_summary, _ = run_cli(
            [
                "empirical", "--n", "64", "--mean", repr(mean),
                "--empvar", repr(emp_var), "--delta", "0.1",
            ],
            capsys,
        )
        assert out_file == out_summary

    def test_file_mode_reports_bad_line_number(self, tmp_path, capsys):
        path = tmp_path / "data.txt"
        path.write_text("0.5\n0.25\nnot-a-number\n0.75\n", encoding="utf-8")
        code, _, err = run_cli(
            ["empirical", "--file", str(path), "--delta", "0.1"], capsys
        )
        assert code == 2
        assert "line 3" in err

    def test_file_mode_reports_out_of_range_line(self, tmp_path, capsys):
        path = tmp_path / "data.txt"
        path.write_text("0.5\n0.25\n0.75\n1.25\n", encoding="utf-8")
        code, _, err = run_cli(
            ["empirical", "--file", str(path), "--delta", "0.1"], capsys
        )
        assert code == 2
        assert "line 4" in err

    def test_file_mode_respects_custom_range(self, tmp_path, capsys):
        path = tmp_path / "data.txt"
        path.write_text("0.5\n1.25\n1.75\n", encoding="utf-8")
        code, _, _ = run_cli(
            ["empirical", "--file", str(path), "--r", "2.0", "--delta", "0.1"],
            capsys,
        )
        assert code == 0

    def test_missing_file_is_data_error(self, tmp_path, capsys):
        code, _, err = run_cli(
            [
                "empirical", "--file", str(tmp_path / "absent.txt"),
                "--delta", "0.1",
            ],
            capsys,
        )
        assert code == 2
        assert "absent.txt" in err

    def test_file_and_summary_flags_conflict(self, tmp_path, capsys):
        path = tmp_path / "data.txt"
        path.write_text("0.5\n0.25\n", encoding="utf-8")
        code, _, _ = run_cli(
            [
                "empirical", "--file", str(path), "--n", "2",
                "--delta", "0.1",
            ],
            capsys,
        )
        assert code == 1

    def test_incomplete_summary_rejected(self, capsys):
        code, _, _ = run_cli(
            ["empirical", "--n", "100", "--mean", "0.5", "--delta", "0.1"],
            capsys,
        )
        assert code == 1


class TestStop:
    def test_trace_csv_matches_library(self, capsys):
        code, out, _ = run_cli(
            [
                "stop", "--ell", "1", "--reps", "2", "--rules", "hoeffding",
                "--seed", "5",
            ],
            capsys,
        )
        assert code == 0
        header, rows = parse_csv(out)
        assert header == [
            "replication", "rule", "ell", "check_index", "n", "half_width",
            "stopped", "correct",
        ]
        config = StoppingConfig(epsilon=0.01, delta=0.1)
        traces = simulate_uniform("hoeffding", 1, config, 2, 5)
        assert len(rows) == sum(len(trace.checks) for trace in traces)
        assert rows[0][1] == "hoeffding"
        assert int(rows[0][4]) == traces[0].checks[0].n
        assert float(rows[0][5]) == traces[0].checks[0].half_width

    def test_byte_identical_on_same_seed(self, capsys):
        args = [
            "stop", "--ell", "1,10", "--reps", "2", "--rules", "eb",
            "--seed", "9", "--epsilon", "0.2",
        ]
        _, first, _ = run_cli(args, capsys)
        _, second, _ = run_cli(args, capsys)
        assert first == second
        _, shifted, _ = run_cli(args[:-3] + ["10", "--epsilon", "0.2"], capsys)
        assert shifted != first

    def test_eb_token_maps_to_canonical_rule_name(self, capsys):
        _, out, _ = run_cli(
            [
                "stop", "--ell", "1", "--reps", "1", "--rules", "eb",
                "--epsilon", "0.3", "--seed", "2",
            ],
            capsys,
        )
        _, rows = parse_csv(out)
        assert {row[1] for row in rows} == {"emp_bernstein"}

    def test_output_file_round_trip(self, tmp_path, capsys):
        out_path = tmp_path / "trace.csv"
        args = [
            "stop", "--ell", "1", "--reps", "1", "--rules", "hoeffding",
            "--seed", "4", "--output", str(out_path),
        ]
        code, out, _ = run_cli(args, capsys)
        assert code == 0 and out == ""
        text = out_path.read_text(encoding="utf-8")
        _, stdout_text, _ = run_cli(args[:-2], capsys)
        assert text == stdout_text

    def test_json_mirror(self, capsys):
        _, out, _ = run_cli(
            [
                "stop", "--ell", "1", "--reps", "1", "--rules", "hoeffding",
                "--seed", "4", "--json",
            ],
            capsys,
        )
        record = json.loads(out.splitlines()[0])
        assert record["rule"] == "hoeffding"
        assert isinstance(record["n"], int)
        assert isinstance(record["half_width"], float)
        assert isinstance(record["stopped"], bool)

    def test_zero_reps_rejected(self, capsys):
        code, _, err = run_cli(["stop", "--reps", "0"], capsys)
        assert code == 1 and "reps" in err

    def test_unknown_rule_rejected(self, capsys):
        code, _, err = run_cli(
            ["stop", "--reps", "1", "--rules", "wald"], capsys
        )
        assert code == 1 and "wald" in err

    def test_bad_ell_rejected(self, capsys):
        code, _, _ = run_cli(
            ["stop", "--reps", "1", "--ell", "0"], capsys
        )
        assert code == 1


class TestSweep:
    def test_deterministic_row_order(self, capsys):
        args = [
            "sweep", "--kind", "quantile", "--n", "100,1000",
            "--sigma", "0.1,0.25", "--delta", "0.05,0.1",
            "--bounds", "bernstein,hoeffding",
        ]
        _, out, _ = run_cli(args, capsys)
        header, rows = parse_csv(out)
        assert header == [
            "bound", "n", "r", "sigma", "delta", "sided", "value",
        ]
        keys = [
            (row[0], int(row[1]), float(row[3]), float(row[4]))
            for row in rows
        ]
        expected = [
            (bound, n, sigma, delta)
            for bound in ("bernstein", "hoeffding")
            for n in (100, 1000)
            for sigma in (0.1, 0.25)
            for delta in (0.05, 0.1)
        ]
        assert keys == expected
        _, again, _ = run_cli(args, capsys)
        assert again == out

    def test_empirical_kind_uses_surrogate_summary(self, capsys):
        _, out, _ = run_cli(
            [
                "sweep", "--kind", "empirical", "--n", "1000",
                "--sigma", "0.25", "--delta", "0.05", "--bounds", "ebe",
            ],
            capsys,
        )
        _, rows = parse_csv(out)
        summary = SampleSummary(n=1000, mean=0.5, emp_var=0.0625)
        expected = efficient_ebe_quantile(summary, 1.0, 0.05, sided="two")
        assert float(rows[0][6]) == expected.value

    def test_kind_is_required(self, capsys):
        code, _, _ = run_cli(["sweep", "--n", "100"], capsys)
        assert code == 1

    def test_empirical_kind_rejects_n_below_two(self, capsys):
        code, _, err = run_cli(
            ["sweep", "--kind", "empirical", "--n", "1"], capsys
        )
        assert code == 1
        assert "minimum" in err


class TestSelftest:
    def test_fast_suites_pass(self, capsys):
        code, out, _ = run_cli(["selftest", "--suite", "stopping"], capsys)
        assert code == 0
        assert "stopping: PASS" in out

    def test_unknown_suite_rejected(self, capsys):
        code, _, err = run_cli(["selftest", "--suite", "unknown"], capsys)
        assert code == 1 and "unknown" in err

    def test_corrupted_b21_detected_and_restored(self, capsys):
        from effconc import wasserstein

        code, out, _ = run_cli(
            ["selftest", "--suite", "wasserstein", "--corrupt", "b21"],
            capsys,
        )
        assert code == 3
        assert "b21" in out
        assert wasserstein._B21_SCALE == 1.0
        code, out, _ = run_cli(["selftest", "--suite", "wasserstein"], capsys)
        assert code == 0
        assert "wasserstein: PASS" in out

    @pytest.mark.study
    def test_default_selftest_passes_within_budget(self, capsys):
        import time

        start = time.perf_counter()
        code, out, _ = run_cli(["selftest"], capsys)
        elapsed = time.perf_counter() - start
        assert code == 0
        assert out.count("PASS") == 5
        assert elapsed < 600.0


class TestParser:
    def test_no_command_is_usage_error(self, capsys):
        code, _, _ = run_cli([], capsys)
        assert code == 1

    def test_unknown_command_is_usage_error(self, capsys):
        code, _, _ = run_cli(["frobnicate"], capsys)
        assert code == 1

    def test_output_file_for_csv(self, tmp_path, capsys):
        out_path = tmp_path / "tail.csv"
        code, out, _ = run_cli(
            [
                "tail", "--n", "100", "--sigma", "0.25", "--u", "1.0",
                "--bounds", "hoeffding", "--output", str(out_path),
            ],
            capsys,
        )
        assert code == 0 and out == ""
        text = out_path.read_text(encoding="utf-8")
        assert text.startswith("bound,")
        assert text.endswith("\n")
        assert "\r" not in text
