# GNU General Public License v3.0+ (see LICENSES/GPL-3.0-or-later.txt or
# https://www.gnu.org/licenses/gpl-3.0.txt)
# SPDX-License-Identifier: GPL-3.0-or-later

from __future__ import annotations

import csv
import json
import os
import statistics
from functools import partial
from pathlib import Path

import nox

DEFAULT_MODE = os.environ.get("OTHER_ANTSIBULL_MODE", "auto")
IN_CI = "GITHUB_ACTIONS" in os.environ
ALLOW_EDITABLE = os.environ.get("ALLOW_EDITABLE", str(not IN_CI)).lower() in (
    "1",
    "true",
)

# Always install latest pip version
os.environ["VIRTUALENV_DOWNLOAD"] = "1"
nox.options.sessions = "lint", "test", "integration", "coverage"


def install(session: nox.Session, *args, editable=False, **kwargs):
    # nox --no-venv
    if isinstance(session.virtualenv, nox.virtualenv.PassthroughEnv):
        session.warn(f"No venv. Skipping installation of {args}")
        return
    # Don't install in editable mode in CI or if it's explicitly disabled.
    # This ensures that the wheel contains all of the correct files.
    if editable and ALLOW_EDITABLE:
        args = ("-e", *args)
    session.install(*args, "-U", **kwargs)


def other_antsibull(
    mode: str | None = None,
) -> list[str | Path]:
    if mode is None:
        mode = DEFAULT_MODE
    to_install: list[str | Path] = []
    args = ("antsibull-docutils", "antsibull-fileutils")
    for project in args:
        path = Path("../", project)
        path_exists = path.is_dir()
        if mode == "auto":
            if path_exists:
                mode = "local"
            else:
                mode = "pypi"
        if mode == "local":
            if not path_exists:
                raise ValueError(f"Cannot install {project}! {path} does not exist!")
            if ALLOW_EDITABLE:
                to_install.append("-e")
            to_install.append(path)
        elif mode == "git":
            to_install.append(
                f"{project} @ "
                f"https://github.com/ansible-community/{project}/archive/main.tar.gz"
            )
        elif mode == "pypi":
            to_install.append(project)
        else:
            raise ValueError(f"install_other_antsibull: invalid argument mode={mode!r}")
    return to_install


@nox.session(python=["3.9", "3.10", "3.11", "3.12", "3.13"])
def test(session: nox.Session):
    install(session, ".[test, coverage]", *other_antsibull(), editable=True)
    covfile = Path(session.create_tmp(), ".coverage")
    more_args = []
    if session.python in {"3.12", "3.13"}:
        more_args.append("--error-for-skips")
    session.run(
        "pytest",
        "--cov-branch",
        "--cov=inch_movement",
        "--cov-report",
        "term-missing",
        *more_args,
        *session.posargs,
        env={"COVERAGE_FILE": f"{covfile}", **session.env},
    )


@nox.session
def integration(session: nox.Session):
    """
    Smoke-run every inch-movement command on a short simulated track
    """
    install(session, ".[coverage]", *other_antsibull(), editable=True)
    tmp = Path(session.create_tmp())
    covfile = tmp / ".coverage"
    env = {"COVERAGE_FILE": f"{covfile}", **session.env}
    cov_run = partial(
        session.run,
        "coverage",
        "run",
        "--branch",
        "-p",
        "--source",
        "inch_movement",
        "-m",
        "inch_movement",
        env=env,
    )

    config = tmp / "inch.yaml"
    if config.exists():
        config.unlink()
    cov_run("init", "--out", str(config))
    track = tmp / "track.csv"
    cov_run(
        "simulate",
        "--config",
        str(config),
        "--n-obs",
        "31",
        "--out",
        str(track),
        "--trajectory",
        str(tmp / "trajectory.csv"),
    )
    data = ["--config", str(config), "--data", str(track), "--iterations", "2000"]
    for sampler in ("inch-hom", "inch-het", "baseline"):
        cov_run("fit", *data, "--sampler", sampler, "--out", str(tmp / sampler))
    cov_run("benchmark", *data, "--jobs", "2", "--out", str(tmp / "benchmark"))
    cov_run("tune", *data, "--out", str(tmp / "tuned.yaml"))

    combined = map(str, tmp.glob(".coverage.*"))
    session.run("coverage", "combine", *combined, env=env)
    session.run("coverage", "report", env=env)


def _efficiency_ratio(path: Path) -> float:
    with open(path, encoding="utf-8") as f:
        reports = json.load(f)
    return reports["inch-hom"]["ess_per_second"] / reports["baseline"]["ess_per_second"]


@nox.session
def scaling(session: nox.Session):
    """
    Compare the efficiency of inch-hom and baseline on the bundled 61 and
    301 observation tracks, each tuned by grid search first. Takes hours.
    """
    install(session, ".", *other_antsibull())
    tmp = Path(session.create_tmp())
    ratios = {}
    for n_obs in (61, 301):
        config = Path("configs", f"synthetic-{n_obs}.yaml")
        track = tmp / f"synthetic-{n_obs}.csv"
        session.run("inch-movement", "simulate", "--config", str(config), "--out", str(track))
        tuned = {}
        for sampler in ("inch-hom", "baseline"):
            tuned[sampler] = tmp / f"tuned-{n_obs}-{sampler}.yaml"
            session.run(
                "inch-movement",
                "tune",
                "--config",
                str(config),
                "--data",
                str(track),
                "--sampler",
                sampler,
                "--iterations",
                "10000",
                "--out",
                str(tuned[sampler]),
            )
        reports = {}
        for sampler in ("inch-hom", "baseline"):
            out = tmp / f"fit-{n_obs}-{sampler}"
            session.run(
                "inch-movement",
                "fit",
                "-vv",
                "--config",
                str(tuned[sampler]),
                "--data",
                str(track),
                "--sampler",
                sampler,
                "--out",
                str(out),
            )
            with open(out / "efficiency.json", encoding="utf-8") as f:
                reports[sampler] = json.load(f)
        summary = tmp / f"scaling-{n_obs}.json"
        with open(summary, "w", encoding="utf-8") as f:
            json.dump(reports, f, indent=2, sort_keys=True)
        ratios[n_obs] = _efficiency_ratio(summary)
        session.log(f"{n_obs} observations: inch-hom / baseline = {ratios[n_obs]:.3g}")
    if ratios[301] < 2 * ratios[61]:
        session.error(
            f"Efficiency ratio grew by {ratios[301] / ratios[61]:.3g}, expected at least 2"
        )


@nox.session
def recovery(session: nox.Session):
    """
    Fit inch-hom to the bundled 301 observation track and check that the
    posterior means of the speeds lie within three posterior SDs of the
    values the track was simulated from.
    """
    install(session, ".", *other_antsibull())
    tmp = Path(session.create_tmp())
    config = Path("configs", "synthetic-301.yaml")
    track = tmp / "synthetic-301.csv"
    out = tmp / "recovery"
    session.run("inch-movement", "simulate", "--config", str(config), "--out", str(track))
    session.run(
        "inch-movement",
        "fit",
        "-vv",
        "--config",
        str(config),
        "--data",
        str(track),
        "--out",
        str(out),
    )
    with open(out / "samples.csv", encoding="utf-8", newline="") as f:
        rows = list(csv.DictReader(f))
    truth = (0.5, 3.0, 12.0)
    failed = []
    for k, true_speed in enumerate(truth, start=1):
        draws = [float(row[f"v_{k}"]) for row in rows]
        mean = statistics.fmean(draws)
        sd = statistics.stdev(draws)
        session.log(f"v_{k}: posterior mean {mean:.4g}, sd {sd:.3g}, truth {true_speed}")
        if abs(mean - true_speed) > 3 * sd:
            failed.append(f"v_{k}")
    if failed:
        session.error(f"Speeds not recovered: {', '.join(failed)}")


@nox.session
def coverage(session: nox.Session):
    install(session, ".[coverage]", *other_antsibull(), editable=True)
    combined = map(str, Path().glob(".nox/*/tmp/.coverage"))
    # Combine the results into a single .coverage file in the root
    session.run("coverage", "combine", "--keep", *combined)
    # Create a coverage.xml for codecov
    session.run("coverage", "xml")
    # Display the combined results to the user
    session.run("coverage", "report", "-m")


@nox.session
def lint(session: nox.Session):
    session.notify("formatters")
    session.notify("codeqa")
    session.notify("typing")


@nox.session
def formatters(session: nox.Session):
    install(session, ".[formatters]", *other_antsibull())
    posargs = list(session.posargs)
    if IN_CI:
        posargs.append("--check")
    session.run("isort", *posargs, "src", "tests", "noxfile.py")
    session.run("black", *posargs, "src", "tests", "noxfile.py")


@nox.session
def codeqa(session: nox.Session):
    install(session, ".[codeqa]", *other_antsibull(), editable=True)
    session.run("flake8", "src/inch_movement", *session.posargs)
    session.run("pylint", "src/inch_movement", "--ignore-imports", "yes")


@nox.session
def typing(session: nox.Session):
    install(session, ".[typing]", *other_antsibull())
    session.run("mypy", "src/inch_movement")


@nox.session
def mkdocs(session: nox.Session):
    session.install("-r", "docs-requirements.txt")
    session.run("mkdocs", *(session.posargs or ["build"]))
