"""Experiment plumbing: flat configs, command dispatch, reports and sweeps.

A config is plain text with one ``key = value`` pair per line and ``#``
comments.  Each command reads the keys it needs, writes ``report.json`` and
``data.csv`` into an output directory and returns an exit status that is 0
exactly when every check in the report passed.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__, cgeom, falconer, families, incidence, solids
from .cgeom import PreconditionError

EXIT_PASS, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


class ConfigError(ValueError):
    """Malformed or out-of-range configuration."""


# --------------------------------------------------------------------------- config keys


def _float(text: str) -> float:
    text = text.strip()
    if text in ("pi", "pi/2", "pi/4"):
        return {"pi": math.pi, "pi/2": math.pi / 2, "pi/4": math.pi / 4}[text]
    return float(Fraction(text)) if "/" in text else float(text)


def _int(text: str) -> int:
    value = float(text)
    if not value.is_integer():
        raise ValueError(f"{text!r} is not an integer")
    return int(value)


def _floats(text: str) -> tuple:
    return tuple(_float(t) for t in text.split(",") if t.strip())


def _str(text: str) -> str:
    return text.strip()


@dataclass(frozen=True)
class Key:
    kind: type
    default: object
    check: object = None
    help: str = ""

    def parse(self, text: str):
        return {float: _float, int: _int, tuple: _floats, str: _str}[self.kind](text)

    def emit(self, value) -> str:
        if self.kind is tuple:
            return ",".join(repr(float(v)) for v in value)
        return repr(float(value)) if self.kind is float else str(value)


def _choice(*options):
    return lambda v: v in options or f"must be one of {', '.join(options)}"


def _between(lo, hi, closed_hi=False):
    def check(v):
        ok = lo < v <= hi if closed_hi else lo < v < hi
        return ok or f"must lie in ({lo}, {hi}{']' if closed_hi else ')'}"
    return check


def _at_least(lo):
    return lambda v: v >= lo or f"must be >= {lo}"


COMMANDS = (
    "volume-check", "slice-check", "angle-check", "dualslab-check", "spacing-gen", "spacing-check",
    "rich-count", "dichotomy-check", "bound-verify", "falconer", "sweep",
)

KEYS: dict[str, Key] = {
    "seed": Key(int, 0, _at_least(0), "master seed"),
    "n": Key(int, 2, lambda v: v in (2, 3) or "must be 2 or 3", "complex dimension"),
    "delta": Key(float, 1 / 32, _between(0, 1), "tube radius / ball scale"),
    "theta": Key(float, math.pi / 4, _between(0, math.pi / 2, True), "angle between lines"),
    "samples": Key(int, 10**6, _at_least(1), "Monte-Carlo samples or random trials"),
    "shards": Key(int, 1, _at_least(1), "independent RNG streams"),
    "band": Key(float, 1e-9, _at_least(0), "boundary band excluded from comparisons"),
    "sigma": Key(tuple, (0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8), lambda v: (len(v) > 0 and all(0 < s <= 1 for s in v)) or "values must lie in (0, 1]"),
    "probes": Key(int, 2000, _at_least(1)),
    "slope_lo": Key(float, -2.5),
    "slope_hi": Key(float, -1.5),
    "big_w": Key(float, 4.0, _at_least(1), "coarse scale W"),
    "spacing_kind": Key(str, "uniform-N", _choice("uniform-N", "exact-H0", "at-most-H0")),
    "big_n": Key(int, 1, _at_least(0), "N: per-cell count or per-ball cap"),
    "h0": Key(int, 1, _at_least(1), "H0 for exact/at-most families"),
    "family": Key(str, "", None, "path of a family file; empty = generate"),
    "rule": Key(str, "cell", _choice("cell", "essential")),
    "mode": Key(str, "indexed", _choice("indexed", "exhaustive")),
    "theorem": Key(str, "t41", _choice("t41", "t42")),
    "epsilon": Key(float, 0.1, _between(0, 1)),
    "constant": Key(float, 100.0, _between(0, math.inf)),
    "r_threshold": Key(float, 1.0, _between(0, math.inf), "multiplier c1 of the richness threshold"),
    "big_d": Key(float, 16.0, _at_least(2), "tube length D in the dichotomy"),
    "layout": Key(str, "mixed", _choice("generic", "concentrated", "mixed")),
    "tubes": Key(int, 40, _at_least(1)),
    "level": Key(str, "top", lambda v: v in ("top", "bottom") or v.lstrip("-").isdigit() or "must be top, bottom or an integer"),
    "slack": Key(float, 64.0, _between(0, math.inf)),
    "count": Key(int, 1, _at_least(1), "number of instances (seeds seed, seed+1, ...)"),
    "s": Key(float, 1.5, _between(1, 2)),
    "c1": Key(float, falconer.DEFAULT_C1, _between(0, 0.4, True), "radius of B1, B2"),
    "method": Key(str, "hashed", _choice("hashed", "brute")),
    "placement": Key(str, "strict", _choice("strict", "lattice")),
    "command": Key(str, "", lambda v: v in COMMANDS[:-1] or "must name a non-sweep command"),
    "workers": Key(int, 1, _at_least(1)),
    "budget": Key(int, 64, _at_least(1), "maximum number of sweep cells"),
}

AXIS_PREFIX = "axis."


@dataclass
class ExperimentConfig:
    """Explicitly set values plus sweep axes; unset keys fall back to defaults."""

    values: dict = field(default_factory=dict)
    axes: dict = field(default_factory=dict)

    def __getitem__(self, key: str):
        if key in self.values:
            return self.values[key]
        return KEYS[key].default

    def effective(self) -> dict:
        out = {k: KEYS[k].default for k in KEYS}
        out.update(self.values)
        out.update({AXIS_PREFIX + k: list(v) for k, v in self.axes.items()})
        return {k: list(v) if isinstance(v, tuple) else v for k, v in out.items()}

    def defaults_applied(self) -> list[str]:
        return sorted(k for k in KEYS if k not in self.values)

    def with_values(self, **kw) -> "ExperimentConfig":
        vals = dict(self.values)
        vals.update(kw)
        return ExperimentConfig(vals, dict(self.axes))

    def __eq__(self, other) -> bool:
        return isinstance(other, ExperimentConfig) and self.values == other.values and self.axes == other.axes


def _apply(cfg: ExperimentConfig, key: str, raw: str, where: str) -> None:
    if key.startswith(AXIS_PREFIX):
        name = key[len(AXIS_PREFIX):]
        if name not in KEYS or name in ("command", "workers", "budget"):
            raise ConfigError(f"{where}: unknown sweep axis {name!r}")
        spec = KEYS[name]
        try:
            vals = tuple(spec.parse(t) for t in raw.split(";" if spec.kind is tuple else ",") if t.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"{where}: bad value for {key}: {exc}") from None
        if not vals:
            raise ConfigError(f"{where}: axis {name!r} has no values")
        for v in vals:
            _guard(name, v, where)
        cfg.axes[name] = vals
        return
    if key not in KEYS:
        raise ConfigError(f"{where}: unknown key {key!r}")
    try:
        value = KEYS[key].parse(raw)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{where}: type mismatch for {key}: {exc}") from None
    _guard(key, value, where)
    cfg.values[key] = value


def _guard(key: str, value, where: str) -> None:
    check = KEYS[key].check
    verdict = True if check is None else check(value)
    if verdict is not True:
        raise ConfigError(f"{where}: {key} = {value!r} {verdict}")


def parse_config(text: str, overrides=()) -> ExperimentConfig:
    """Parse ``key = value`` lines; ``overrides`` are extra ``key=value`` strings applied last."""
    cfg = ExperimentConfig()
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in body.split("=", 1))
        _apply(cfg, key, raw, f"line {lineno}")
    for i, item in enumerate(overrides, 1):
        if "=" not in item:
            raise ConfigError(f"--set #{i}: expected key=value")
        key, raw = (part.strip() for part in item.split("=", 1))
        _apply(cfg, key, raw, f"--set #{i}")
    return cfg


def emit(cfg: ExperimentConfig) -> str:
    lines = [f"{k} = {KEYS[k].emit(v)}" for k, v in sorted(cfg.values.items())]
    for name, vals in sorted(cfg.axes.items()):
        sep = ";" if KEYS[name].kind is tuple else ","
        lines.append(f"{AXIS_PREFIX}{name} = {sep.join(KEYS[name].emit(v) for v in vals)}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------- outputs


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def _cell(v):
    v = _jsonable(v)
    return repr(v) if isinstance(v, float) else v


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for row in rows:
        wr.writerow([_cell(v) for v in row])
    return buf.getvalue()


@dataclass
class Outcome:
    result: dict
    header: list
    rows: list
    passed: bool
    files: dict = field(default_factory=dict)


def _write(out: Path, name: str, text: str) -> None:
    with open(out / name, "w", newline="\n") as fh:
        fh.write(text)


def _report(command: str, cfg: ExperimentConfig, passed: bool, result: dict | None = None, failure: dict | None = None) -> dict:
    rep = {
        "command": command,
        "config": cfg.effective(),
        "defaults_applied": cfg.defaults_applied(),
        "version": __version__,
        "pass": bool(passed),
    }
    if result is not None:
        rep["result"] = result
    if failure is not None:
        rep["failure"] = failure
    return _jsonable(rep)


def dumps_report(rep: dict) -> str:
    return json.dumps(rep, sort_keys=True, indent=2, allow_nan=False) + "\n"


# --------------------------------------------------------------------------- commands


def _volume_check(cfg):
    theta, delta, n = cfg["theta"], cfg["delta"], cfg["n"]
    u1 = np.eye(n, dtype=complex)[0]
    u2 = np.zeros(n, complex)
    u2[0], u2[1] = math.cos(theta), math.sin(theta)
    T1, T2 = solids.line_neighbourhood_tube(u1, delta, theta), solids.line_neighbourhood_tube(u2, delta, theta)
    est = solids.intersection_volume_mc(T1, T2, cfg["samples"], cfg["seed"], cfg["shards"])
    exact = solids.intersection_volume_exact(theta, delta, n)
    err = abs(est.value - exact)
    within_se = err <= 3 * est.standard_error
    rel = err / exact
    passed = within_se and rel < 0.02
    res = {"exact": exact, "mc": est.value, "standard_error": est.standard_error, "hits": est.hits,
           "relative_error": rel, "within_3se": within_se, "within_2pct": rel < 0.02}
    return Outcome(res, ["theta", "delta", "n", "exact", "mc", "standard_error", "relative_error"],
                   [[theta, delta, n, exact, est.value, est.standard_error, rel]], passed)


def _slice_check(cfg):
    rng = np.random.default_rng(cfg["seed"])
    m = cfg["samples"]
    x, y = rng.uniform(-1, 1, (m, 2)), rng.uniform(-1, 1, (m, 2))
    r = np.exp(rng.uniform(-2, 2, m))
    z = rng.uniform(0, 2 * np.pi, m)
    d = rng.uniform(0.01, 1, m)
    resid = solids.projection_residual(x, y, r, z)
    member = solids.slice_membership(x, y, r, z, d)
    outside = np.abs(resid - d) > cfg["band"]
    bad = int(np.count_nonzero(member[outside] != (resid < d)[outside]))
    res = {"trials": m, "in_band": int(np.count_nonzero(~outside)), "disagreements": bad,
           "members": int(np.count_nonzero(member))}
    rows = [[int(np.count_nonzero(~outside)), bad, int(np.count_nonzero(member)), m]]
    return Outcome(res, ["in_band", "disagreements", "members", "trials"], rows, bad == 0)


def _angle_check(cfg):
    rng = np.random.default_rng(cfg["seed"])
    n, m = cfg["n"], cfg["samples"]
    u1 = families.sample_cp(n, m, rng)
    u2 = families.sample_cp(n, m, rng)
    grid_tol = 2 * math.pi / 720
    rows, worst_grid, worst_pa = [], 0.0, 0.0
    for a, b in zip(u1, u2):
        exact = cgeom.line_angle(a, b)
        d1 = cgeom.definition1_angle(a, b)
        p1, p2 = cgeom.principal_angle_oracle(a, b)
        worst_grid = max(worst_grid, abs(d1 - exact))
        worst_pa = max(worst_pa, abs(p1 - p2), abs(p1 - exact))
        rows.append([float(exact), d1, p1, p2])
    passed = worst_grid <= grid_tol and worst_pa <= 1e-9
    res = {"pairs": m, "max_grid_error": worst_grid, "grid_tolerance": grid_tol, "max_principal_error": worst_pa}
    return Outcome(res, ["angle", "definition1", "principal1", "principal2"], rows, passed)


def _dualslab_check(cfg):
    pts, rows = [], []
    for sigma in cfg["sigma"]:
        obs, pred = families.dual_slab_count_check(cfg["n"], cfg["delta"], sigma, cfg["probes"], cfg["seed"])
        rows.append([sigma, obs, pred])
        if obs > 0:
            pts.append((sigma, obs))
    slope = incidence.fit_exponent(pts) if len(pts) >= 2 else float("nan")
    passed = cfg["slope_lo"] <= slope <= cfg["slope_hi"]
    return Outcome({"slope": slope, "points": len(pts)}, ["sigma", "observed", "predicted"], rows, passed)


def _make_family(cfg) -> families.TubeFamily:
    if cfg["family"]:
        return families.TubeFamily.load(cfg["family"])
    kind = cfg["spacing_kind"]
    if kind == "uniform-N":
        return families.generate_spaced_family(cfg["n"], cfg["delta"], cfg["big_w"], cfg["big_n"], cfg["seed"])
    return families.generate_h0_family(cfg["n"], cfg["delta"], cfg["big_w"], cfg["h0"], cfg["seed"], kind=kind)


def _spacing_rows(rep):
    return ["count", "cells"], [[int(k), v] for k, v in sorted(rep.histogram.items())]


def _spacing_gen(cfg):
    fam = _make_family(cfg)
    rep = families.check_spacing(fam, rule=cfg["rule"])
    header, rows = _spacing_rows(rep)
    res = {"tubes": len(fam), "family_id": incidence.family_id(fam), "spacing": rep.to_dict()}
    return Outcome(res, header, rows, rep.verdict, {"family.txt": fam.dumps()})


def _spacing_check(cfg):
    fam = _make_family(cfg)
    big_w = cfg["big_w"] if "big_w" in cfg.values else None
    rep = families.check_spacing(fam, big_w, rule=cfg["rule"])
    header, rows = _spacing_rows(rep)
    return Outcome({"tubes": len(fam), "family_id": incidence.family_id(fam), "spacing": rep.to_dict()}, header, rows,
                   rep.verdict)


def _profile_rows(profile):
    return ["r", "count"], [[r, c] for r, c in sorted(profile.entries.items())]


def _rich_count(cfg):
    fam = _make_family(cfg)
    prof = incidence.richness_profile(incidence.ball_grid(fam.n, fam.delta), fam, cfg["mode"])
    header, rows = _profile_rows(prof)
    return Outcome({"tubes": len(fam), "profile": prof.to_dict()}, header, rows, True)


def _dichotomy_check(cfg):
    rows, reports = [], []
    for k in range(cfg["count"]):
        seed = cfg["seed"] + k
        balls, fam, E = incidence.dichotomy_instance(cfg["n"], cfg["big_d"], cfg["layout"], cfg["tubes"], seed, cfg["level"])
        rep = incidence.heavy_ball_check(balls, fam, E, cfg["epsilon"], cfg["big_d"], cfg["slack"])
        ok = rep.thin_holds or rep.thick_holds
        reports.append(rep.to_dict())
        rows.append([seed, E, rep.balls, rep.tubes, rep.thin_ratio, rep.thin_holds, rep.capture_fraction, rep.thick_holds, ok])
    passed = all(r[-1] for r in rows)
    header = ["seed", "E", "balls", "tubes", "thin_ratio", "thin_holds", "capture_fraction", "thick_holds", "holds"]
    return Outcome({"instances": reports, "held": sum(r[-1] for r in rows)}, header, rows, passed)


def _bound_verify(cfg):
    fam = _make_family(cfg)
    prof = incidence.richness_profile(incidence.ball_grid(fam.n, fam.delta), fam, cfg["mode"])
    rep = incidence.verify_bound(fam, prof, cfg["theorem"], cfg["epsilon"], cfg["constant"], cfg["r_threshold"])
    rows = [[row["r"], row["count"], row["bound"], row["ratio"]] for row in rep.rows]
    res = {"bound": rep.to_dict(), "profile": prof.to_dict(),
           "max_ratio": max((row["ratio"] for row in rep.rows), default=0.0)}
    return Outcome(res, ["r", "count", "bound", "ratio"], rows, rep.verdict)


def _falconer(cfg):
    rep, prof = falconer.run_falconer(cfg["s"], cfg["delta"], cfg["big_n"], cfg["epsilon"], cfg["seed"], cfg["c1"],
                                      method=cfg["method"], placement=cfg["placement"], spacing_rule=cfg["rule"])
    header, rows = _profile_rows(prof)
    return Outcome(rep.to_dict(), header, rows, rep.passed)


HANDLERS = {
    "volume-check": _volume_check,
    "slice-check": _slice_check,
    "angle-check": _angle_check,
    "dualslab-check": _dualslab_check,
    "spacing-gen": _spacing_gen,
    "spacing-check": _spacing_check,
    "rich-count": _rich_count,
    "dichotomy-check": _dichotomy_check,
    "bound-verify": _bound_verify,
    "falconer": _falconer,
}

# metric tracked per sweep cell, when the command has a natural one
SWEEP_METRIC = {
    "bound-verify": "max_ratio",
    "falconer": "covering_count",
    "dualslab-check": "slope",
    "volume-check": "relative_error",
}


def _cell_name(point: dict) -> str:
    return "_".join(f"{k}={KEYS[k].emit(v)}".replace("/", "-") for k, v in sorted(point.items()))


def _run_cell(args):
    target, cfg, out = args
    status = run_command(target, cfg, out)
    with open(Path(out) / "report.json") as fh:
        return status, json.load(fh)


def _sweep(cfg, out: Path):
    target = cfg["command"]
    if not target:
        raise ConfigError("sweep needs command = <name>")
    if not cfg.axes:
        raise ConfigError("sweep needs at least one axis.<key> line")
    names = sorted(cfg.axes)
    points = [dict(zip(names, combo)) for combo in itertools.product(*(cfg.axes[k] for k in names))]
    if len(points) > cfg["budget"]:
        raise ConfigError(f"sweep has {len(points)} cells, budget is {cfg['budget']}")
    jobs = []
    for point in points:
        cell = ExperimentConfig({k: v for k, v in cfg.values.items() if k not in ("command", "workers", "budget")})
        cell.values.update(point)
        jobs.append((target, cell, str(out / _cell_name(point))))
    if cfg["workers"] > 1:
        with ProcessPoolExecutor(cfg["workers"]) as pool:
            results = list(pool.map(_run_cell, jobs))
    else:
        results = [_run_cell(job) for job in jobs]
    metric = SWEEP_METRIC.get(target)
    rows, cells = [], {}
    for point, (status, rep) in sorted(zip(points, results), key=lambda pr: _cell_name(pr[0])):
        value = rep.get("result", {}).get(metric) if metric else None
        rows.append([point[k] for k in names] + [status == EXIT_PASS, value])
        cells[_cell_name(point)] = {"exit": status, "pass": rep["pass"], "metric": value}
    res = {"target": target, "axes": {k: list(v) for k, v in cfg.axes.items()}, "cells": cells, "metric": metric}
    numeric = [k for k in names if KEYS[k].kind in (int, float)]
    if metric and len(numeric) == 1 and len(names) == 1:
        pts = [(r[0], r[-1]) for r in rows if isinstance(r[-1], (int, float)) and r[-1] > 0]
        res["fitted_exponent"] = incidence.fit_exponent(pts) if len(pts) >= 2 else None
    passed = all(status == EXIT_PASS for status, _ in results)
    return Outcome(res, names + ["pass", metric or "metric"], rows, passed)


def run_command(name: str, cfg: ExperimentConfig, out) -> int:
    """Run one command, write ``report.json`` and ``data.csv`` under ``out`` and return the exit status."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if name not in COMMANDS:
            raise ConfigError(f"unknown command {name!r}")
        if name != "sweep" and cfg.axes:
            raise ConfigError("axis.<key> lines are only valid for sweep")
        outcome = _sweep(cfg, out) if name == "sweep" else HANDLERS[name](cfg)
    except (ConfigError, PreconditionError, OSError, ValueError, ZeroDivisionError) as exc:
        failure = {"type": type(exc).__name__, "message": str(exc)}
        _write(out, "report.json", dumps_report(_report(name, cfg, False, failure=failure)))
        _write(out, "data.csv", csv_text(["error"], [[failure["message"]]]))
        return EXIT_ERROR
    for fname, text in outcome.files.items():
        _write(out, fname, text)
    _write(out, "report.json", dumps_report(_report(name, cfg, outcome.passed, outcome.result)))
    _write(out, "data.csv", csv_text(outcome.header, outcome.rows))
    return EXIT_PASS if outcome.passed else EXIT_FAIL


def load_config(path: str | os.PathLike | None, overrides=()) -> ExperimentConfig:
    text = Path(path).read_text() if path else ""
    return parse_config(text, overrides)
