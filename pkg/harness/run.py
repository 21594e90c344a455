"""Run orchestration: load a config, build its family, verify / simulate / evaluate.

Each ``run_*`` function returns a :class:`RunOutcome`; the CLI turns it into
an exit code.  Construction failures during ``verify`` are reported (exit 1)
rather than raised, so the report file always records the counterexample.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from harness import catalog
from harness.catalog import BuildContext, Family
from harness.schemas import RunConfig
from qsp.console import Console
from qsp.defaults import (
    ENV_DEFAULT_TOL,
    EXIT_CHECK_FAILED,
    EXIT_OK,
    ORACLE_SAMPLE_RATE,
)
from qsp.errors import ConstructionError, Finding
from qsp.evolution import Distribution, closed_form_m1, closed_form_m2_limit, trajectory
from qsp.families import (
    CubicProcessFamily,
    M1Params,
    M2Params,
    classify_time_dependence,
    kce_residual_cubic,
    stochasticity_report_cubic,
)
from qsp.formats import write_matrix, write_trajectory_csv, write_twin_reports
from qsp.grid import Sampling, TimeGrid, VerificationReport
from qsp.markov_square import SquareProcessFamily, kce_residual_square, stochasticity_report_square
from qsp.twins import TwinBranch, TwinModelParams, twin_reports, verify_nine_equations
from shared.event_log import EventLog
from shared.run_context import sha256_json, write_json_atomic

logger = logging.getLogger(__name__)


class ConfigError(Exception):
    """The configuration file is missing, unreadable or incomplete for the command."""


@dataclass
class RunOutcome:
    exit_code: int
    reports: list[dict[str, Any]] = field(default_factory=list)
    files: list[str] = field(default_factory=list)
    findings: list[Finding] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.exit_code == EXIT_OK


# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------


def load_config(path: str) -> RunConfig:
    """Read and validate a JSON run config.

    Raises :class:`ConfigError` for a missing file or invalid JSON and
    ``pydantic.ValidationError`` for schema violations.
    """
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    return RunConfig.model_validate(data)


def resolve_kce_tol(cfg: RunConfig, override: float | None = None) -> float:
    """``--tol`` beats ``$QSP_DEFAULT_TOL``, which beats the config value."""
    if override is not None:
        if not override > 0:
            raise ConfigError(f"--tol must be positive, got {override}")
        return float(override)
    env = os.environ.get(ENV_DEFAULT_TOL, "").strip()
    if env:
        try:
            value = float(env)
        except ValueError:
            raise ConfigError(f"{ENV_DEFAULT_TOL}={env!r} is not a number") from None
        if not value > 0:
            raise ConfigError(f"{ENV_DEFAULT_TOL} must be positive, got {value}")
        return value
    return cfg.tolerances.kce_tol


def config_sha256(cfg: RunConfig) -> str:
    return sha256_json(cfg.model_dump(mode="json"))


def build_grid(cfg: RunConfig) -> TimeGrid:
    """Uniform grid plus extra points, with every declared cutoff and its neighbours."""
    return TimeGrid.uniform(cfg.grid.t_max, cfg.grid.points, cfg.grid.extra_points, cfg.cutoffs())


def build_family(cfg: RunConfig, grid: TimeGrid, kce_tol: float, strict: bool = False) -> Family:
    sampling = Sampling(t_max=cfg.horizon)
    base = BuildContext(sampling, grid, kce_tol)
    layers = tuple(catalog.build(layer.family, layer.values, base) for layer in cfg.layers)
    ctx = BuildContext(sampling, grid, kce_tol, strict, layers, cfg.beta_values)
    return catalog.build(cfg.family, cfg.values, ctx)


def _record_file(outcome: RunOutcome, con: Console, events: EventLog, kind: str, path: str) -> None:
    outcome.files.append(path)
    con.kv(kind, path)
    events.file_written(kind, path)


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def _checks(cfg: RunConfig, family: Family, grid: TimeGrid, kce_tol: float) -> list[VerificationReport]:
    tol = cfg.tolerances
    if isinstance(family, SquareProcessFamily):
        kinds = None if cfg.kind is None else (cfg.kind,)
        return [
            stochasticity_report_square(family, grid, tol.stoch_tol, kinds),
            kce_residual_square(family, grid, kce_tol),
        ]
    reports = [
        stochasticity_report_cubic(family, grid, tol.stoch_tol, cfg.kind),
        kce_residual_cubic(family, grid, kce_tol, ORACLE_SAMPLE_RATE, np.random.default_rng(0)),
    ]
    if cfg.entry.twin:
        reports.append(verify_nine_equations(family, grid, tol.nine_tol))
    return reports


def run_verify(
    cfg: RunConfig,
    *,
    tol: float | None = None,
    strict: bool = False,
    console: Console | None = None,
    events: EventLog | None = None,
) -> RunOutcome:
    """Stochasticity and Kolmogorov-Chapman sweeps (plus the nine twin equations).

    Exit 0 only if every check passes; in strict mode warnings fail the run too.
    """
    con = console or Console()
    events = events if events is not None else EventLog(None)
    kce_tol = resolve_kce_tol(cfg, tol)
    strict = strict or cfg.strict
    digest = config_sha256(cfg)
    grid = build_grid(cfg)
    outcome = RunOutcome(EXIT_OK)

    con.header(f"verify {cfg.family}")
    con.kv("grid", f"{len(grid)} points on [0, {grid.t_max:g}], {grid.triple_count()} triples")
    con.kv("kce_tol", f"{kce_tol:g}")
    con.kv("strict", str(strict).lower())
    con.kv("config", digest[:16], verbose_only=True)
    events.run_start("verify", cfg.family, digest)

    report: dict[str, Any] = {
        "config_sha256": digest,
        "family": {"family": cfg.family},
        "grid": {"points": list(grid.points), "triples": grid.triple_count()},
        "tolerances": {
            "kce_tol": kce_tol,
            "stoch_tol": cfg.tolerances.stoch_tol,
            "nine_tol": cfg.tolerances.nine_tol,
        },
        "strict": strict,
        "checks": [],
        "warnings": [],
        "classification": None,
        "error": None,
    }

    try:
        family = build_family(cfg, grid, kce_tol, strict)
    except ConstructionError as exc:
        logger.info("construction of %s failed: %s", cfg.family, exc.finding)
        con.error(str(exc.finding))
        events.warning(exc.finding.to_dict())
        outcome.exit_code = EXIT_CHECK_FAILED
        outcome.findings.append(exc.finding)
        report["error"] = exc.finding.to_dict()
    else:
        report["family"] = family.describe()
        events.family_built(family.describe())
        for check in _checks(cfg, family, grid, kce_tol):
            data = check.to_dict()
            report["checks"].append(data)
            events.check_done(data)
            con.check(check.name, check.passed, f"max {check.max_residual:.3g} over {check.count} points")
            if check.worst is not None:
                con.bullet(f"worst at {check.worst}", verbose_only=True)
            for slot, value in sorted(check.slots.items()):
                con.bullet(f"{slot}: {value:.3g}", verbose_only=True)
            if not check.passed:
                outcome.exit_code = EXIT_CHECK_FAILED

        for finding in getattr(family, "warnings", ()):
            con.warning(str(finding))
            events.warning(finding.to_dict())
            report["warnings"].append(finding.to_dict())
            outcome.findings.append(finding)
            if strict:
                outcome.exit_code = EXIT_CHECK_FAILED

        classification = classify_time_dependence(family, grid)
        report["classification"] = classification.to_dict()
        con.kv("time", classification.kind.value)

        origin = getattr(family, "origin", None)
        if (
            cfg.output.twin_report
            and isinstance(origin, TwinModelParams)
            and origin.branch is not TwinBranch.EXTINCTION_A
        ):
            path = write_twin_reports(cfg.output.twin_report, twin_reports(family, grid))
            _record_file(outcome, con, events, "twin_report", path)

    report["passed"] = outcome.exit_code == EXIT_OK
    outcome.reports.append(report)
    if cfg.output.report:
        path = write_json_atomic(cfg.output.report, report)
        _record_file(outcome, con, events, "report", path)

    con.verdict("PASS" if outcome.passed else "FAIL")
    events.run_end("verify", outcome.exit_code)
    return outcome


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def _closed_form_gap(family: CubicProcessFamily, s0: float, x0: Distribution, last: Distribution) -> float | None:
    """Distance of the last point to the known closed form, when the family has one."""
    origin = family.origin
    if isinstance(origin, M1Params):
        target = closed_form_m1(origin, s0)
    elif isinstance(origin, M2Params) and origin.psi_inf is not None:
        target = closed_form_m2_limit(origin, s0, x0)
    else:
        return None
    return float(np.max(np.abs(last.array - target.array)))


def run_simulate(
    cfg: RunConfig,
    out: str | None = None,
    *,
    console: Console | None = None,
    events: EventLog | None = None,
) -> RunOutcome:
    """Trajectory of the configured start distribution, written as CSV."""
    con = console or Console()
    events = events if events is not None else EventLog(None)
    sim = cfg.simulation
    if sim is None:
        raise ConfigError("the config has no simulation block")
    path = out or cfg.output.trajectory
    if not path:
        raise ConfigError("no trajectory path: pass --out or set output.trajectory")
    grid = build_grid(cfg)
    digest = config_sha256(cfg)

    con.header(f"simulate {cfg.family}")
    con.kv("s0", f"{sim.s0:g}")
    con.kv("times", f"{len(sim.times)} points up to {sim.times[-1]:g}")
    con.kv("mode", sim.mode)
    events.run_start("simulate", cfg.family, digest)

    family = build_family(cfg, grid, resolve_kce_tol(cfg), cfg.strict)
    if not isinstance(family, CubicProcessFamily):
        raise ConfigError(f"{cfg.family} is a square family; simulation needs a cubic one")
    events.family_built(family.describe())
    for finding in family.warnings:
        con.warning(str(finding))
        events.warning(finding.to_dict())

    x0 = Distribution(tuple(sim.x0))
    traj = trajectory(family, x0, sim.s0, sim.times, sim.mode, cfg.tolerances.stoch_tol)
    outcome = RunOutcome(EXIT_OK, findings=list(family.warnings))
    _record_file(outcome, con, events, "trajectory", write_trajectory_csv(path, traj))

    gap = _closed_form_gap(family, sim.s0, x0, traj.points[-1])
    if gap is not None:
        con.kv("closed form", f"last point differs by {gap:.3g}")
    outcome.reports.append({
        "config_sha256": digest,
        "family": family.describe(),
        "rows": len(traj.times),
        "closed_form_gap": gap,
    })

    con.verdict("PASS")
    events.run_end("simulate", outcome.exit_code)
    return outcome


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


def run_eval(
    cfg: RunConfig,
    s: float,
    t: float,
    out: str | None = None,
    *,
    console: Console | None = None,
    events: EventLog | None = None,
) -> RunOutcome:
    """Write ``M^[s,t]`` in the configured matrix format."""
    con = console or Console()
    events = events if events is not None else EventLog(None)
    path = out or cfg.output.matrix
    if not path:
        raise ConfigError("no matrix path: pass --out or set output.matrix")
    grid = build_grid(cfg)
    events.run_start("eval", cfg.family, config_sha256(cfg))

    con.header(f"eval {cfg.family}")
    con.kv("(s, t)", f"({s:g}, {t:g})")
    family = build_family(cfg, grid, resolve_kce_tol(cfg), cfg.strict)
    if not isinstance(family, CubicProcessFamily):
        raise ConfigError(f"{cfg.family} is a square family; eval writes cubic matrices")
    events.family_built(family.describe())

    outcome = RunOutcome(EXIT_OK)
    matrix = family.at(s, t)
    _record_file(outcome, con, events, "matrix", write_matrix(path, matrix, cfg.output.matrix_format))
    con.verdict("PASS")
    events.run_end("eval", outcome.exit_code)
    return outcome
