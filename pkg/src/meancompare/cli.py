"""Command line front end: ``meancompare compare <config>`` and ``meancompare selftest``.

Exit codes: 0 success, 1 comparison refuted, 2 configuration error,
3 evaluation error (including internal-consistency failures).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .comparator import (
    ALL_CHECKS,
    FAILS,
    REFUTED,
    RULES,
    ComparisonReport,
    ConsistencyError,
    Tolerances,
    Verdict,
    compare_means,
    derive_conclusions,
    PowerParams,
    classify_power,
)
from .expr import EvalError, ParseError, parse_expr
from .gapsearch import SearchConfig, gap_landscape, local_gap_probe, max_gap
from .kernel import (
    DEFAULT_SAMPLES,
    GeneratorSpec,
    Interval,
    MeanSpec,
    SpecError,
    WeightFamily,
    Window,
    power_generator,
    power_weights,
)

EXIT_OK, EXIT_REFUTED, EXIT_CONFIG, EXIT_EVAL = 0, 1, 2, 3

log = logging.getLogger("meancompare")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration

@dataclass
class OutputPaths:
    summary: Optional[Path] = None
    report: Optional[Path] = None
    csv: Optional[Path] = None


@dataclass
class ProblemConfig:
    interval: Interval
    n: int
    mean_fp: MeanSpec
    mean_gq: MeanSpec
    tolerances: Tolerances = field(default_factory=Tolerances)
    samples: int = DEFAULT_SAMPLES
    grid: int = 256
    window: Optional[tuple] = None
    checks: tuple = ALL_CHECKS
    search: Optional[SearchConfig] = None
    landscape: int = 41
    output: OutputPaths = field(default_factory=OutputPaths)
    source: Optional[Path] = None


def _number(value, what: str) -> float:
    # PyYAML reads "1e-9" (no dot) as a string; accept it and "inf" spellings.
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{what}: expected a number, got {value!r}") from None
    if math.isnan(v):
        raise ConfigError(f"{what}: NaN is not allowed")
    return v


def _integer(value, what: str, minimum: int) -> int:
    v = _number(value, what)
    if v != int(v) or v < minimum:
        raise ConfigError(f"{what}: expected an integer >= {minimum}, got {value!r}")
    return int(v)


def _section(raw: dict, key: str, allowed: set) -> dict:
    sec = raw.get(key) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"{key}: expected a mapping")
    unknown = set(sec) - allowed
    if unknown:
        raise ConfigError(f"{key}: unknown keys {sorted(unknown)}")
    return sec


def _build_mean(name: str, raw, interval: Interval, n: int, samples: int, window) -> MeanSpec:
    if not isinstance(raw, dict):
        raise ConfigError(f"{name}: expected a mapping")
    unknown = set(raw) - {"generator", "power", "weights", "weight_coeffs", "weight_exponents"}
    if unknown:
        raise ConfigError(f"{name}: unknown keys {sorted(unknown)}")
    kw = dict(samples=samples, window=window)
    try:
        if ("generator" in raw) == ("power" in raw):
            raise ConfigError(f"{name}: give exactly one of 'generator' or 'power'")
        if "power" in raw:
            f = power_generator(_number(raw["power"], f"{name}.power"), interval, **kw)
        else:
            f = GeneratorSpec.create(parse_expr(str(raw["generator"])), interval, **kw)

        preset = "weight_coeffs" in raw or "weight_exponents" in raw
        if "weights" in raw and preset:
            raise ConfigError(f"{name}: 'weights' and 'weight_coeffs'/'weight_exponents' are mutually exclusive")
        if "weights" in raw:
            ws = raw["weights"]
            if not isinstance(ws, list):
                raise ConfigError(f"{name}.weights: expected a list of expressions")
            p = WeightFamily.create([parse_expr(str(w)) for w in ws], interval, **kw)
        elif preset or interval.positive:
            coeffs = [_number(c, f"{name}.weight_coeffs") for c in raw.get("weight_coeffs", [1.0] * n)]
            exps = [_number(e, f"{name}.weight_exponents") for e in raw.get("weight_exponents", [0.0] * len(coeffs))]
            p = power_weights(coeffs, exps, interval, **kw)
        else:
            p = WeightFamily.create(["1"] * n, interval, **kw)
    except ParseError as exc:
        raise ConfigError(f"{name}: {exc}") from exc
    except SpecError as exc:
        raise ConfigError(f"{name}: {exc}") from exc
    if p.n != n:
        raise ConfigError(f"{name}: {p.n} weights given, n = {n}")
    return MeanSpec(f, p)


def load_config(path, overrides: Optional[dict] = None) -> ProblemConfig:
    """Parse and validate a YAML problem file.

    Relative output paths resolve against the config file's directory.
    """
    path = Path(path)
    overrides = overrides or {}
    try:
        raw = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    unknown = set(raw) - {"interval", "n", "mean_fp", "mean_gq", "tolerances", "samples", "grid",
                          "window", "checks", "search", "output"}
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    for key in ("mean_fp", "mean_gq"):
        if key not in raw:
            raise ConfigError(f"missing '{key}'")

    iv = _section(raw, "interval", {"lower", "upper"})
    try:
        interval = Interval(_number(iv.get("lower", 0.0), "interval.lower"),
                            _number(iv.get("upper", math.inf), "interval.upper"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    n = _integer(raw.get("n", 2), "n", 2)
    samples = _integer(raw.get("samples", DEFAULT_SAMPLES), "samples", 16)
    grid = _integer(overrides.get("grid") or raw.get("grid", 256), "grid", 4)

    window = raw.get("window")
    if window is not None:
        window = tuple(_number(v, "window") for v in window)
        try:
            Window.for_interval(interval, window)
        except ValueError as exc:
            raise ConfigError(f"window: {exc}") from exc

    tol = _section(raw, "tolerances", {"equality", "monotone", "minors"})
    defaults = Tolerances()
    tolerances = Tolerances(
        equality=_number(tol.get("equality", defaults.equality), "tolerances.equality"),
        monotone=_number(tol.get("monotone", defaults.monotone), "tolerances.monotone"),
        minors=_number(tol.get("minors", defaults.minors), "tolerances.minors"),
    )
    if overrides.get("tol") is not None:
        t = overrides["tol"]
        tolerances = Tolerances(equality=t, monotone=t, minors=tolerances.minors)

    checks = raw.get("checks", list(ALL_CHECKS))
    if not isinstance(checks, list) or set(checks) - set(ALL_CHECKS):
        raise ConfigError(f"checks: expected a subset of {list(ALL_CHECKS)}, got {checks!r}")

    m1 = _build_mean("mean_fp", raw["mean_fp"], interval, n, samples, window)
    m2 = _build_mean("mean_gq", raw["mean_gq"], interval, n, samples, window)

    sec = _section(raw, "search", {"enabled", "window", "resolution", "multistart", "max_iter", "radii",
                                   "seed", "anchors", "landscape"})
    search = None
    landscape = _integer(sec.get("landscape", 41), "search.landscape", 2)
    if sec.get("enabled", True):
        swin = sec.get("window", window)
        try:
            search = SearchConfig(
                n=n,
                window=None if swin is None else tuple(_number(v, "search.window") for v in swin),
                resolution=_integer(sec.get("resolution", 32), "search.resolution", 2),
                multistart=_integer(sec.get("multistart", 64), "search.multistart", 0),
                max_iter=_integer(sec.get("max_iter", 200), "search.max_iter", 1),
                radii=tuple(_number(r, "search.radii") for r in sec.get("radii", (1.0, 0.1, 0.01))),
                seed=_integer(overrides.get("seed", sec.get("seed", 0)), "search.seed", 0),
                anchors=_integer(sec.get("anchors", 16), "search.anchors", 1),
                tol=tolerances.equality,
            )
            Window.for_interval(interval, search.window)
        except ValueError as exc:
            raise ConfigError(f"search: {exc}") from exc

    out = _section(raw, "output", {"summary", "report", "csv"})
    base = path.resolve().parent
    resolve = lambda p: None if p is None else (base / p)  # noqa: E731
    output = OutputPaths(resolve(out.get("summary")), resolve(out.get("report")), resolve(out.get("csv")))
    if overrides.get("csv") is not None:
        output.csv = Path(overrides["csv"])

    return ProblemConfig(interval, n, m1, m2, tolerances, samples, grid, window, tuple(checks),
                         search, landscape, output, path)


# ---------------------------------------------------------------------------
# running

@dataclass
class RunResult:
    config: ProblemConfig
    report: ComparisonReport
    search: dict
    landscape: Optional[np.ndarray]

    @property
    def exit_code(self) -> int:
        return EXIT_REFUTED if self.report.globally_smaller.status == REFUTED else EXIT_OK


def run_compare(cfg: ProblemConfig) -> RunResult:
    m1, m2 = cfg.mean_fp, cfg.mean_gq
    rep = compare_means(m1, m2, tol=cfg.tolerances, samples=cfg.samples, grid=cfg.grid,
                        window=cfg.window, checks=cfg.checks)
    search = {}
    if cfg.search is not None:
        g = max_gap(m1, m2, cfg.search)
        search["max_gap"] = g.to_dict()
        search["local"] = [lg.to_dict() for lg in local_gap_probe(m1, m2, cfg.search)]
        search["seed"] = cfg.search.seed
        if g.witness is not None:
            rep.extra["gap_search"] = Verdict(FAILS, g.witness.to_dict(), "search",
                                              detail="point with A[f,p] > A[g,q]")
            params = PowerParams.from_specs(m1, m2) if "power" in cfg.checks else None
            derive_conclusions(rep, classify_power(params) if params is not None else None)
    landscape = None
    if cfg.n == 2 and (cfg.output.csv is not None):
        window = Window.for_interval(cfg.interval, cfg.search.window if cfg.search else cfg.window)
        landscape = gap_landscape(m1, m2, window, cfg.landscape)
    return RunResult(cfg, rep, search, landscape)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _describe(m: MeanSpec) -> dict:
    return {"generator": str(m.generator.expr), "weights": [str(w) for w in m.weights.weights]}


def report_dict(res: RunResult) -> dict:
    cfg, rep = res.config, res.report
    body = rep.to_dict()
    for key in ("locally_smaller", "globally_smaller"):
        rule = body["conclusions"][key]["rule"]
        body["conclusions"][key]["statement"] = RULES.get(rule, "")
    return _jsonable({
        "config": None if cfg.source is None else str(cfg.source),
        "interval": [cfg.interval.lower, cfg.interval.upper],
        "n": cfg.n,
        "means": {"mean_fp": _describe(cfg.mean_fp), "mean_gq": _describe(cfg.mean_gq)},
        "checks": list(cfg.checks),
        "tolerances": vars(cfg.tolerances),
        **body,
        "search": res.search,
        "rules": RULES,
        "exit_code": res.exit_code,
    })


def summary_text(res: RunResult) -> str:
    cfg, rep = res.config, res.report
    lines = [f"comparing A[f,p] <= A[g,q] on ({cfg.interval.lower:g}, {cfg.interval.upper:g}), n = {cfg.n}"]
    for label, m in (("f,p", cfg.mean_fp), ("g,q", cfg.mean_gq)):
        lines.append(f"  {label}: {m.generator.expr} ; weights " + ", ".join(str(w) for w in m.weights.weights))
    lines.append("verdicts")
    for name, v in rep.verdicts().items():
        extra = f" [{v.detail}]" if v.detail else ""
        lines.append(f"  {name:<36} {v.status:<12} {v.certification}{extra}")
        if v.witness:
            lines.append(f"  {'':<36} witness {json.dumps(_jsonable(v.witness))}")
    if res.search:
        mg = res.search["max_gap"]
        found = "witness found" if mg["witness"] else "no violation found"
        lines.append("search")
        lines.append(f"  max gap {mg['gap']:.6g} ({found})")
        for lg in res.search["local"]:
            lines.append(f"  radius {lg['radius']:g}: gap {lg['gap']:.6g}")
    lines.append("conclusions")
    lines.append(f"  locally smaller: {rep.locally_smaller}")
    lines.append(f"  globally smaller: {rep.globally_smaller}")
    for c in (rep.locally_smaller, rep.globally_smaller):
        if c.rule:
            lines.append(f"  [{c.rule}] {RULES[c.rule]}")
    for note in rep.notes:
        lines.append(f"note: {note}")
    return "\n".join(lines) + "\n"


def write_csv(path: Path, rows: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "mean_fp", "mean_gq", "gap"])
        for row in rows:
            w.writerow(["%.17g" % v for v in row])


def write_outputs(res: RunResult) -> None:
    out = res.config.output
    if out.summary is not None:
        out.summary.parent.mkdir(parents=True, exist_ok=True)
        out.summary.write_text(summary_text(res))
    if out.report is not None:
        out.report.parent.mkdir(parents=True, exist_ok=True)
        out.report.write_text(json.dumps(report_dict(res), indent=2) + "\n")
    if out.csv is not None and res.landscape is not None:
        write_csv(out.csv, res.landscape)


# ---------------------------------------------------------------------------
# entry points

def cmd_compare(args) -> int:
    overrides = {"seed": args.seed, "grid": args.grid, "tol": args.tol, "csv": args.csv}
    try:
        cfg = load_config(args.config, {k: v for k, v in overrides.items() if v is not None})
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        res = run_compare(cfg)
    except (EvalError, ConsistencyError, ArithmeticError) as exc:
        print(f"evaluation error: {exc}", file=sys.stderr)
        return EXIT_EVAL
    write_outputs(res)
    if not args.quiet:
        sys.stdout.write(summary_text(res))
    return res.exit_code


def cmd_selftest(args) -> int:
    from .battery import run_suites
    results = run_suites()
    for r in results:
        if not args.quiet or not r.passed:
            print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_REFUTED


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="meancompare", description="Compare generalized Bajraktarevic means.")
    ap.add_argument("--quiet", action="store_true", help="print nothing on success")
    sub = ap.add_subparsers(dest="command", required=True)
    c = sub.add_parser("compare", help="run every applicable criterion on a YAML problem file")
    c.add_argument("config")
    c.add_argument("--seed", type=int, help="override search.seed")
    c.add_argument("--grid", type=int, help="override the two-point grid resolution")
    c.add_argument("--tol", type=float, help="override the equality and monotonicity tolerances")
    c.add_argument("--csv", help="write the gap landscape (n = 2) to this path")
    c.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)
    c.set_defaults(func=cmd_compare)
    s = sub.add_parser("selftest", help="run the invariant battery")
    s.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)
    s.set_defaults(func=cmd_selftest)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
