"""Command line front end: ``statmix run <config>``, ``statmix list``, ``statmix version``.

A config is one JSON object describing one experiment::

    {
      "experiment-id": "rtt-parity-5",
      "engine": "exact",                       # exact | mc | analytic | paper-suite
      "chain": {"kind": "random-to-top", "n": 5},
      "statistics": [{"kind": "parity"}],
      "times": {"stop": 20},                   # or an explicit increasing list
      "starts": "all",                         # exact: "all" or one state
      "checks": [{"id": "d1", "metric": "d_tv", "t": 1, "op": "<=", "value": 0.1}]
    }

Monte Carlo configs add ``coupling``, ``measure``, ``trials``, ``x0``, ``y0``
and ``horizon``; analytic configs name a ``scenario`` (and ``k``);
paper-suite configs list ``checks`` by name or use ``"all"``.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import re
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, analytic, exact, montecarlo, suite
from . import features as F
from .couplings import COUPLING_KINDS, CouplingSpec
from .model import (
    CHAIN_KINDS,
    CapExceeded,
    ChainSpec,
    ValidationError,
    cycle_graph,
    graph_from_edges,
    make_initial_state,
    path_graph,
)

ENGINES = ("analytic", "exact", "mc", "paper-suite")
OPS = {"<=": lambda a, b: a <= b, ">=": lambda a, b: a >= b, "==": lambda a, b: a == b,
       "<": lambda a, b: a < b, ">": lambda a, b: a > b}
ANALYTIC_COLUMNS = ("scenario", "n", "k", "t", "pmf", "cdf", "tail")


class ConfigError(ValueError):
    def __init__(self, path, line, msg):
        self.path, self.line, self.msg = path, line, msg
        super().__init__(f"{path}:{line}: {msg}")


@dataclass
class ExperimentConfig:
    experiment_id: str
    engine: str
    raw: dict
    chain: ChainSpec | None = None
    statistics: list = field(default_factory=list)
    coupling: CouplingSpec | None = None
    times: list = field(default_factory=list)
    trials: int | None = None
    seed: int = 0
    output: str | None = None
    locator: object = None


class _Locator:
    """Maps config keys back to source lines for diagnostics."""

    def __init__(self, path, text):
        self.path = path
        self.lines = text.splitlines()

    def line_of(self, key) -> int:
        pat = re.compile(r'"%s"\s*:' % re.escape(key))
        for i, line in enumerate(self.lines, 1):
            if pat.search(line):
                return i
        return 1

    def error(self, key, msg) -> ConfigError:
        return ConfigError(self.path, self.line_of(key), msg)


def _graph(spec, loc):
    if isinstance(spec, dict):
        if "cycle" in spec:
            return cycle_graph(int(spec["cycle"]))
        if "path" in spec:
            return path_graph(int(spec["path"]))
        if "edges" in spec:
            return graph_from_edges(int(spec["n"]), [tuple(e) for e in spec["edges"]])
    raise loc.error("graph", "graph must be {\"cycle\": n}, {\"path\": n} or {\"n\": .., \"edges\": ..}")


def parse_chain(d: dict, loc, n_override=None) -> ChainSpec:
    if not isinstance(d, dict) or "kind" not in d:
        raise loc.error("chain", "chain needs a \"kind\"")
    kind = d["kind"]
    if kind not in CHAIN_KINDS:
        raise loc.error("chain", f"unknown chain kind {kind!r}; see `statmix list`")
    n = n_override if n_override is not None else d.get("n")
    try:
        if kind == "glauber":
            return ChainSpec.glauber(_graph(d.get("graph"), loc), int(d.get("colours", 0)))
        if n is None:
            raise ValidationError("chain needs \"n\"")
        if kind == "sticky-random-to-top":
            return ChainSpec.sticky(int(n), float(d.get("q", 0.01)), d.get("stuck", "position"))
        return ChainSpec(kind, int(n))
    except ValidationError as e:
        raise loc.error("chain", str(e)) from None


_STAT_PARAMS = ("k", "label", "labels", "positions", "colour")


def parse_statistic(d: dict, loc) -> F.StatisticSpec:
    if not isinstance(d, dict) or d.get("kind") not in F.STAT_KINDS:
        raise loc.error("statistics", f"unknown statistic {d!r}; see `statmix list`")
    kw = {}
    for p in _STAT_PARAMS:
        if p in d:
            kw[p] = tuple(d[p]) if p in ("labels", "positions") else d[p]
    extra = set(d) - set(_STAT_PARAMS) - {"kind"}
    if extra:
        raise loc.error("statistics", f"unexpected statistic fields {sorted(extra)}")
    try:
        return F.StatisticSpec(d["kind"], **kw)
    except (ValidationError, TypeError) as e:
        raise loc.error("statistics", str(e)) from None


def parse_coupling(d: dict, loc) -> CouplingSpec:
    if not isinstance(d, dict) or d.get("kind") not in COUPLING_KINDS:
        raise loc.error("coupling", f"unknown coupling {d!r}; see `statmix list`")
    try:
        return CouplingSpec(d["kind"], tuple(d.get("positions", ())), tuple(d.get("labels", ())))
    except ValidationError as e:
        raise loc.error("coupling", str(e)) from None


def parse_times(v, loc) -> list:
    if isinstance(v, dict):
        times = list(range(int(v.get("start", 0)), int(v["stop"]) + 1, int(v.get("step", 1))))
    elif isinstance(v, list):
        times = [int(t) for t in v]
    else:
        raise loc.error("times", "times must be a list or {\"start\", \"stop\", \"step\"}")
    if not times or any(b <= a for a, b in zip(times, times[1:])) or times[0] < 0:
        raise loc.error("times", "time grid must be non-empty, non-negative and strictly increasing")
    return times


def load_config(path) -> ExperimentConfig:
    path = str(path)
    text = Path(path).read_text()
    loc = _Locator(path, text)
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(path, e.lineno, f"column {e.colno}: {e.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError(path, 1, "config must be a JSON object")
    for key in ("experiment-id", "engine"):
        if key not in raw:
            raise ConfigError(path, 1, f"missing required field \"{key}\"")
    engine = raw["engine"]
    if engine not in ENGINES:
        raise loc.error("engine", f"unknown engine {engine!r}; expected one of {', '.join(ENGINES)}")
    cfg = ExperimentConfig(str(raw["experiment-id"]), engine, raw, seed=int(raw.get("seed", 0)),
                           trials=raw.get("trials"), output=raw.get("output"))
    cfg.locator = loc
    if engine == "paper-suite":
        names = raw.get("checks", "all")
        if names != "all":
            bad = [n for n in names if n not in suite.CHECKS]
            if bad:
                raise loc.error("checks", f"unknown paper-suite checks {bad}")
        return cfg
    if engine == "analytic":
        if raw.get("scenario") not in analytic.SCENARIOS:
            raise loc.error("scenario", f"unknown scenario {raw.get('scenario')!r}")
        if "n" not in raw:
            raise ConfigError(path, 1, "analytic configs need \"n\"")
        cfg.times = parse_times(raw.get("times", {"stop": 10 * int(raw["n"])}), loc)
        return cfg
    if "chain" not in raw:
        raise ConfigError(path, 1, "missing required field \"chain\"")
    cfg.chain = parse_chain(raw["chain"], loc, raw.get("n"))
    stats = raw.get("statistics", [raw["statistic"]] if "statistic" in raw else None)
    if not stats:
        raise ConfigError(path, 1, "missing \"statistics\"")
    cfg.statistics = [parse_statistic(s, loc) for s in stats]
    for s in cfg.statistics:
        try:
            F.check_compatible(s, cfg.chain)
        except ValidationError as e:
            raise loc.error("statistics", str(e)) from None
    if "coupling" in raw:
        cfg.coupling = parse_coupling(raw["coupling"], loc)
    cfg.times = parse_times(raw.get("times", {"stop": 20}), loc)
    if engine == "mc" and raw.get("measure", "match") not in montecarlo.MEASURES:
        raise loc.error("measure", f"unknown measure {raw.get('measure')!r}")
    return cfg


# --------------------------------------------------------------------------
# engines


def _state(chain, v, name, loc):
    if v is None or isinstance(v, str) and v in ("identity", "reversed"):
        return make_initial_state(chain, v or "identity")
    try:
        return make_initial_state(chain, tuple(v))
    except (ValidationError, TypeError) as e:
        raise loc.error(name, str(e)) from None


def _generic_checks(cfg, records, loc) -> list:
    """Evaluate ``checks`` entries against ``records`` (list of dicts)."""
    out = []
    for c in cfg.raw.get("checks", []):
        metric, op = c.get("metric"), c.get("op", "<=")
        if op not in OPS:
            raise loc.error("checks", f"unknown comparison {op!r}")
        stat_idx = int(c.get("statistic", 0))
        hits = [r for r in records if r.get("_stat") == stat_idx and
                ("t" not in c or str(r.get("t")) == str(c["t"]))]
        if not hits or metric not in hits[0]:
            raise loc.error("checks", f"check {c.get('id')!r} matches no output row")
        observed = max(float(r[metric]) for r in hits) if op in ("<=", "<") else \
            min(float(r[metric]) for r in hits)
        tol = float(c.get("tolerance", 0.0))
        target = float(c["value"])
        if op in ("<=", "<"):
            ok = OPS[op](observed, target + tol)
        elif op in (">=", ">"):
            ok = OPS[op](observed, target - tol)
        else:
            ok = abs(observed - target) <= tol
        out.append(suite.Claim(str(c.get("id", metric)), str(c.get("anchor", cfg.experiment_id)),
                               f"{op} {target}", observed, tol, bool(ok)))
    return out


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


def _write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r[k]) for k in columns})


def run_exact(cfg, out: Path, workers: int):
    loc = cfg.locator
    T = max(cfg.times)
    starts = cfg.raw.get("starts", "all")
    if starts != "all":
        starts = _state(cfg.chain, starts, "starts", loc)
    records = []
    for idx, stat in enumerate(cfg.statistics):
        curve = exact.statistic_curve(cfg.chain, stat, starts, T)
        wanted = set(cfg.times)
        for r in curve.rows():
            if r["t"] in wanted:
                records.append({**r, "_stat": idx})
    path = out / f"{cfg.experiment_id}.csv"
    _write_csv(path, exact.CURVE_COLUMNS, records)
    return _generic_checks(cfg, records, loc), [path]


def run_mc(cfg, out: Path, workers: int):
    loc = cfg.locator
    raw = cfg.raw
    measure = raw.get("measure", "match")
    y0 = raw.get("y0", "stationary")
    if y0 != "stationary":
        y0 = _state(cfg.chain, y0, "y0", loc)
    try:
        spec = montecarlo.TrialMatrixSpec(
            cfg.experiment_id, cfg.chain, cfg.statistics, cfg.times, int(cfg.trials or 10_000),
            cfg.seed, measure, cfg.coupling, _state(cfg.chain, raw.get("x0"), "x0", loc), y0,
            raw.get("horizon"), raw.get("mode"), float(raw.get("level", 0.99)),
        )
    except ValidationError as e:
        raise loc.error("measure", str(e)) from None
    rows = montecarlo.run_trial_matrix(spec, workers=workers)
    records = []
    stat_index = {s.describe(): i for i, s in enumerate(cfg.statistics)}
    for r in rows:
        d = r.to_csv_row()
        d["_stat"] = stat_index[r.statistic]
        records.append(d)
    path = out / f"{cfg.experiment_id}.csv"
    montecarlo.write_rows_csv(path, rows)
    return _generic_checks(cfg, records, loc), [path]


def run_analytic(cfg, out: Path, workers: int):
    loc = cfg.locator
    raw = cfg.raw
    scenario, n, k = raw["scenario"], int(raw["n"]), raw.get("k")
    try:
        law = analytic.coupling_time_law(scenario, n, k)
    except ValidationError as e:
        raise loc.error("scenario", str(e)) from None
    T = max(cfg.times)
    pmf = law.pmf(T)
    cdf = np.cumsum(pmf)
    records = [{"scenario": scenario, "n": n, "k": "" if k is None else k, "t": t,
                "pmf": float(pmf[t]), "cdf": float(cdf[t]), "tail": float(1 - cdf[t]), "_stat": 0}
               for t in cfg.times]
    summary = {"_stat": 0, "t": "summary", "mean": law.mean, "variance": law.variance}
    path = out / f"{cfg.experiment_id}.csv"
    _write_csv(path, ANALYTIC_COLUMNS, records)
    return _generic_checks(cfg, records + [summary], loc), [path]


def run_paper_suite(cfg, out: Path, workers: int, trials=None):
    names = cfg.raw.get("checks", "all")
    ctx = suite.SuiteContext(seed=cfg.seed, trials=trials if trials is not None else cfg.trials,
                             workers=workers)
    results = suite.run_suite(names, ctx)
    claims = [c for r in results for c in r.claims]
    rows = [row for r in results for row in r.rows]
    curves = [c for r in results for c in r.curves]
    est_path = out / f"{cfg.experiment_id}-estimates.csv"
    curve_path = out / f"{cfg.experiment_id}-curves.csv"
    montecarlo.write_rows_csv(est_path, rows)
    exact.write_curves_csv(curve_path, curves)
    return claims, [est_path, curve_path]


ENGINE_RUNNERS = {"exact": run_exact, "mc": run_mc, "analytic": run_analytic}


def summary_text(cfg, claims, runtime, files) -> str:
    lines = [f"experiment {cfg.experiment_id} ({cfg.engine}), seed {cfg.seed}"]
    passed = sum(c.passed for c in claims)
    lines.append(f"{passed}/{len(claims)} claim checks passed in {runtime:.1f}s")
    for c in claims:
        lines.append(f"  [{'PASS' if c.passed else 'FAIL'}] {c.id}: expected {c.expected}, "
                     f"observed {c.observed} (tolerance {c.tolerance})")
    for f in files:
        lines.append(f"  wrote {f}")
    return "\n".join(lines) + "\n"


def run(cfg: ExperimentConfig, out: Path, workers: int = 1, trials=None, timing=False) -> int:
    out.mkdir(parents=True, exist_ok=True)
    if trials is not None:
        cfg.trials = trials
    start = time.perf_counter()
    if cfg.engine == "paper-suite":
        claims, files = run_paper_suite(cfg, out, workers, trials)
    else:
        claims, files = ENGINE_RUNNERS[cfg.engine](cfg, out, workers)
    runtime = time.perf_counter() - start
    summary = {
        "experiment_id": cfg.experiment_id,
        "claims": [c.to_dict() for c in claims],
        "seed": cfg.seed,
        "runtime_seconds": round(runtime, 3) if timing else None,
    }
    json_path = out / f"{cfg.experiment_id}.json"
    json_path.write_text(json.dumps(summary, indent=2, sort_keys=False) + "\n")
    text = summary_text(cfg, claims, runtime, files + [json_path])
    (out / f"{cfg.experiment_id}.txt").write_text(text)
    sys.stdout.write(text)
    return 0 if all(c.passed for c in claims) else 1


def list_vocabulary() -> str:
    sections = {
        "chains": CHAIN_KINDS,
        "couplings": COUPLING_KINDS,
        "engines": ENGINES,
        "measures": montecarlo.MEASURES,
        "paper-suite checks": tuple(suite.CHECKS),
        "scenarios": tuple(analytic.SCENARIOS),
        "statistics": F.STAT_KINDS,
    }
    lines = []
    for name in sorted(sections):
        lines.append(f"{name}:")
        lines += [f"  {v}" for v in sorted(sections[name])]
    return "\n".join(lines) + "\n"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="statmix", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment config")
    r.add_argument("config")
    r.add_argument("--seed", type=int, help="override the config seed")
    r.add_argument("--trials", type=int, help="override Monte Carlo trial counts")
    r.add_argument("--out", help="output directory (default: config \"output\" or ./out)")
    r.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                   help="worker processes for trials (default: all cores)")
    r.add_argument("--timing", action="store_true",
                   help="record runtime_seconds in the JSON summary (breaks byte-identity)")
    sub.add_parser("list", help="print the vocabulary usable in configs")
    sub.add_parser("version", help="print the version")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        sys.stdout.write(list_vocabulary())
        return 0
    if args.command == "version":
        print(f"statmix {__version__}")
        return 0
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        out = Path(args.out or cfg.output or "out")
        return run(cfg, out, max(1, args.workers), args.trials, args.timing)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except CapExceeded as e:
        print(f"error: cap exceeded: {e}", file=sys.stderr)
        return 3
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
