# GNU General Public License v3.0+ (see LICENSES/GPL-3.0-or-later.txt or https://www.gnu.org/licenses/gpl-3.0.txt)
# SPDX-License-Identifier: GPL-3.0-or-later

"""
Test the inch-movement command line.
"""

from __future__ import annotations

import copy
import pathlib

import yaml
from fixtures import SMALL_RUN, inch_env, simulated_env  # noqa: F401; pylint: disable=unused-variable

from inch_movement import constants as C
from inch_movement.cli import run as run_inch_tool
from inch_movement.config import DEFAULT_CONFIG


def test_init(inch_env):  # noqa: F811; pylint: disable=redefined-outer-name
    rc, stdout, _ = inch_env.run_tool_w_output("init", [])
    assert rc == C.RC_SUCCESS
    assert stdout == 'Created config file "inch.yaml"\n'

    diff = inch_env.diff()
    assert diff.added_files == ["inch.yaml"]
    assert diff.parse_yaml("inch.yaml") == DEFAULT_CONFIG

    # An existing file is never overwritten.
    assert inch_env.run_tool("init", []) == C.RC_COMMAND_FAILED
    assert inch_env.diff().unchanged


def test_init_json(inch_env):  # noqa: F811; pylint: disable=redefined-outer-name
    assert inch_env.run_tool("init", ["--out", "inch.json"]) == C.RC_SUCCESS
    diff = inch_env.diff()
    assert diff.added_files == ["inch.json"]
    assert diff.parse_json("inch.json")["run"]["sampler"] == "inch-hom"


def test_simulate(inch_env):  # noqa: F811; pylint: disable=redefined-outer-name
    inch_env.set_config(simulate={"n_obs": 15, "drop_prob": 0.0})
    inch_env.diff()
    rc, stdout, _ = inch_env.run_tool_w_output(
        "simulate",
        ["--config", "inch.yaml", "--out", "track.csv", "--trajectory", "trajectory.csv"],
    )
    assert rc == C.RC_SUCCESS
    assert 'Wrote track "track.csv"' in stdout

    diff = inch_env.diff()
    assert diff.added_files == ["trajectory.csv", "track.csv"]
    assert diff.file_contents["track.csv"].startswith(b"# time_unit: minutes\ntime,x,y\n")
    track = diff.parse_csv("track.csv")
    assert len(track) == 15
    assert set(track["time"].diff().dropna()) <= {9.0, 11.0}
    trajectory = diff.parse_csv("trajectory.csv")
    assert list(trajectory.columns) == ["time", "state", "x", "y", "event_kind"]
    assert trajectory["state"].iloc[0] == 1
    assert set(trajectory["state"]) <= {1, 2, 3}
    assert (trajectory["event_kind"] == "observation").sum() >= 13


def test_simulate_is_reproducible(inch_env):  # noqa: F811; pylint: disable=redefined-outer-name
    for name, seed in (("a.csv", "4"), ("b.csv", "4"), ("c.csv", "5")):
        assert inch_env.run_tool("simulate", ["--seed", seed, "--out", name]) == C.RC_SUCCESS
    assert inch_env.read_file("a.csv") == inch_env.read_file("b.csv")
    assert inch_env.read_file("a.csv") != inch_env.read_file("c.csv")


def test_bundled_track_is_regenerated(inch_env):  # noqa: F811; pylint: disable=redefined-outer-name
    config = str(pathlib.Path(__file__).parents[2] / "configs" / "synthetic-61.yaml")
    for name in ("first.csv", "second.csv"):
        assert inch_env.run_tool("simulate", ["--config", config, "--out", name]) == C.RC_SUCCESS
    assert inch_env.read_file("first.csv") == inch_env.read_file("second.csv")
    track = inch_env.diff().parse_csv("first.csv")
    assert len(track) == 61


def test_simulate_n_obs(inch_env):  # noqa: F811; pylint: disable=redefined-outer-name
    assert inch_env.run_tool("simulate", ["--n-obs", "7", "--out", "track.csv"]) == C.RC_SUCCESS
    assert len(inch_env.diff().parse_csv("track.csv")) == 7


def test_fit(simulated_env):  # noqa: F811; pylint: disable=redefined-outer-name
    rc, stdout, _ = simulated_env.run_tool_w_output(
        "fit", ["--config", "inch.yaml", "--data", "track.csv", "--out", "fit"]
    )
    assert rc == C.RC_SUCCESS
    assert stdout.startswith("inch-hom: minimum ESS ")

    diff = simulated_env.diff()
    assert diff.added_dirs == ["fit"]
    assert diff.added_files == ["fit/efficiency.json", "fit/report.rst", "fit/samples.csv"]
    samples = diff.parse_csv("fit/samples.csv")
    # (300 - 50) / 10 draws
    assert len(samples) == 25
    assert list(samples.columns) == [
        "iter",
        "loglik",
        "v_1",
        "v_2",
        "v_3",
        "rate_1_2",
        "rate_1_3",
        "rate_2_1",
        "rate_2_3",
        "rate_3_1",
        "rate_3_2",
        "total_switch_count",
        "elapsed_s",
    ]
    assert samples["iter"].tolist() == list(range(60, 301, 10))
    assert (samples["elapsed_s"] == 0).all()
    assert (samples["v_1"] < samples["v_2"]).all() and (samples["v_2"] < samples["v_3"]).all()
    efficiency = diff.parse_json("fit/efficiency.json")
    assert efficiency["sampler"] == "inch-hom"
    assert efficiency["wall_time"] is None
    assert efficiency["draws"] == 25
    assert diff.file_contents["fit/report.rst"].startswith(
        b"=" * 22 + b"\nEfficiency of inch-hom\n"
    )


def test_fit_is_bit_identical(simulated_env):  # noqa: F811; pylint: disable=redefined-outer-name
    for out in ("first", "second"):
        assert (
            simulated_env.run_tool(
                "fit", ["--config", "inch.yaml", "--data", "track.csv", "--out", out]
            )
            == C.RC_SUCCESS
        )
    for name in ("samples.csv", "efficiency.json", "report.rst"):
        assert simulated_env.read_file("first/" + name) == simulated_env.read_file(
            "second/" + name
        )


def test_fit_other_samplers(simulated_env):  # noqa: F811; pylint: disable=redefined-outer-name
    simulated_env.set_config(
        "short.yaml", run=dict(SMALL_RUN, report_format="md"), simulate={"n_obs": 21}
    )
    simulated_env.diff()
    for sampler in ("baseline", "inch-het"):
        assert (
            simulated_env.run_tool(
                "fit",
                [
                    "--config",
                    "short.yaml",
                    "--data",
                    "track.csv",
                    "--out",
                    sampler,
                    "--sampler",
                    sampler,
                    "--iterations",
                    "200",
                ],
            )
            == C.RC_SUCCESS
        )
    diff = simulated_env.diff()
    assert "baseline/report.md" in diff.added_files
    assert "inch-het/report.md" in diff.added_files
    baseline = diff.parse_csv("baseline/samples.csv")
    # (200 - 50) / 10 draws
    assert len(baseline) == 15
    assert "occupancy_3" in baseline.columns
    het = diff.parse_json("inch-het/efficiency.json")
    assert het["sampler"] == "inch-het"
    assert het["iterations"] == 200


def test_benchmark(simulated_env):  # noqa: F811; pylint: disable=redefined-outer-name
    rc, stdout, _ = simulated_env.run_tool_w_output(
        "benchmark", ["--config", "inch.yaml", "--data", "track.csv", "--out", "bench"]
    )
    assert rc == C.RC_SUCCESS
    lines = stdout.splitlines()
    assert lines[0].startswith("inch-hom: efficiency ")
    assert lines[1].startswith("baseline: efficiency ")

    diff = simulated_env.diff()
    assert diff.added_files == [
        "bench/benchmark.json",
        "bench/benchmark.rst",
        "bench/efficiency-baseline.json",
        "bench/efficiency-inch-hom.json",
        "bench/samples-baseline.csv",
        "bench/samples-inch-hom.csv",
    ]
    summary = diff.parse_json("bench/benchmark.json")
    assert sorted(summary) == ["baseline", "inch-hom"]
    text = diff.file_contents["bench/benchmark.rst"].decode("utf-8")
    assert "ESS per iteration" in text
    assert "ratio to baseline" in text


def test_benchmark_in_processes(simulated_env):  # noqa: F811; pylint: disable=redefined-outer-name
    arguments = ["--config", "inch.yaml", "--data", "track.csv", "--iterations", "150"]
    assert simulated_env.run_tool("benchmark", arguments + ["--out", "serial"]) == C.RC_SUCCESS
    assert (
        simulated_env.run_tool("benchmark", arguments + ["--out", "parallel", "--jobs", "2"])
        == C.RC_SUCCESS
    )
    for name in ("benchmark.json", "samples-inch-hom.csv", "samples-baseline.csv"):
        assert simulated_env.read_file("serial/" + name) == simulated_env.read_file(
            "parallel/" + name
        )


def test_benchmark_arguments(simulated_env):  # noqa: F811; pylint: disable=redefined-outer-name
    base = ["--config", "inch.yaml", "--data", "track.csv", "--out", "bench"]
    assert (
        simulated_env.run_tool("benchmark", base + ["--samplers", "inch-hom", "inch-hom"])
        == C.RC_VALIDATION_ERROR
    )
    assert simulated_env.run_tool("benchmark", base + ["--jobs", "0"]) == C.RC_VALIDATION_ERROR
    assert (
        simulated_env.run_tool("benchmark", base + ["--samplers", "gibbs"])
        == C.RC_VALIDATION_ERROR
    )
    assert simulated_env.diff().unchanged


def test_tune(simulated_env):  # noqa: F811; pylint: disable=redefined-outer-name
    simulated_env.set_config(
        "grid.yaml",
        run=SMALL_RUN,
        tuning_grid={"resample_frac": [0.05, 0.3], "speed_step": [0.1]},
    )
    simulated_env.diff()
    rc, stdout, _ = simulated_env.run_tool_w_output(
        "tune", ["--config", "grid.yaml", "--data", "track.csv", "--out", "tuned.yaml"]
    )
    assert rc == C.RC_SUCCESS
    lines = stdout.splitlines()
    assert lines[0].startswith("resample_frac=0.05, speed_step=0.1: efficiency ")
    assert lines[1].startswith("resample_frac=0.3, speed_step=0.1: efficiency ")
    assert lines[2] == 'Wrote tuned config "tuned.yaml"'

    diff = simulated_env.diff()
    assert diff.added_files == ["tuned.yaml"]
    tuned = diff.parse_yaml("tuned.yaml")
    assert tuned["tuning"]["resample_frac"] in (0.05, 0.3)
    assert tuned["tuning"]["speed_step"] == 0.1
    assert tuned["run"] == diff.parse_yaml("grid.yaml")["run"]


def test_tune_needs_grid(simulated_env):  # noqa: F811; pylint: disable=redefined-outer-name
    config = copy.deepcopy(DEFAULT_CONFIG)
    del config["tuning_grid"]
    simulated_env.add_file("nogrid.yaml", yaml.dump(config).encode("utf-8"))
    assert (
        simulated_env.run_tool(
            "tune", ["--config", "nogrid.yaml", "--data", "track.csv", "--out", "tuned.yaml"]
        )
        == C.RC_VALIDATION_ERROR
    )
    assert simulated_env.diff().unchanged


def test_return_codes(simulated_env):  # noqa: F811; pylint: disable=redefined-outer-name
    assert simulated_env.run_tool_w_output("fit", [])[0] == C.RC_VALIDATION_ERROR

    simulated_env.set_config("bad.yaml", run={"thin": 0})
    assert (
        simulated_env.run_tool(
            "fit", ["--config", "bad.yaml", "--data", "track.csv", "--out", "out"]
        )
        == C.RC_VALIDATION_ERROR
    )

    simulated_env.add_file("unordered.csv", b"time,x,y\n0,0,0\n10,1,1\n5,2,2\n")
    assert (
        simulated_env.run_tool("fit", ["--data", "unordered.csv", "--out", "out"])
        == C.RC_VALIDATION_ERROR
    )

    simulated_env.set_config("guard.yaml", run=dict(SMALL_RUN, guard=1, kappa=5.0))
    assert (
        simulated_env.run_tool(
            "fit", ["--config", "guard.yaml", "--data", "track.csv", "--out", "out"]
        )
        == C.RC_GUARD_BREACH
    )
    assert "out" not in simulated_env.diff().added_dirs

    # 120 iterations keep 7 thinned draws
    assert (
        simulated_env.run_tool(
            "fit",
            [
                "--config",
                "inch.yaml",
                "--data",
                "track.csv",
                "--iterations",
                "120",
                "--out",
                "short",
            ],
        )
        == C.RC_VALIDATION_ERROR
    )
    assert "short" not in simulated_env.diff().added_dirs


def test_no_command():
    assert run_inch_tool(["inch-movement"]) == C.RC_VALIDATION_ERROR
