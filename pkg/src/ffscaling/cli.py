"""Command-line front end.

Run a scenario::

    ffscaling --scenario two-level --out runs/two-level
    ffscaling --config run.json --alpha-bar 3 --format json

Compare two output directories::

    ffscaling regress GOLDEN FRESH --tol 1e-5

Exit codes: 0 success, 1 a built-in check failed, 2 the phase condition is
infeasible, 3 node singularities were clamped, 64 usage error, 65 schema
mismatch in ``regress``, 66 unreadable input or unwritable output.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import sys
import time
import warnings
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .errors import BranchLossError, FFScalingError, InfeasibleError
from .ffscale import scaling_map
from .scenarios import (
    DEFAULT_OMEGA,
    ENVELOPES,
    DecreasingFieldScenario,
    ScenarioResult,
    TwoLevelScenario,
    TwoSpinScenario,
    run_cd_check,
    run_decreasing_field,
    run_invariant_check,
    run_two_level,
    run_two_spin,
)

log = logging.getLogger("ffscaling")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INFEASIBLE = 2
EXIT_SINGULAR = 3
EXIT_USAGE = 64
EXIT_DATA = 65
EXIT_IO = 66

SCENARIOS = ("two-level", "two-spin", "decreasing-field", "cd-check", "invariant-check")
FORMATS = ("csv", "json")
STATUS_EXIT = {"ok": EXIT_OK, "failed": EXIT_CHECK_FAILED, "infeasible": EXIT_INFEASIBLE, "singular": EXIT_SINGULAR}


class UsageError(Exception):
    """Bad flags, config keys or parameter values (exit 64)."""


class InputError(Exception):
    """A file could not be read or written (exit 66)."""


class SchemaError(Exception):
    """Two result sets do not share a column schema (exit 65)."""


@dataclasses.dataclass(frozen=True)
class RunConfig:
    scenario: str = "two-level"
    alpha_bar: float = 2.0
    t0: float = 10.0
    omega: float = DEFAULT_OMEGA
    dt: float = 1e-3
    gauge_eliminate_v0: bool = True
    output_dir: str = "."
    format: str = "csv"
    envelope: str = "fast-decay"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(key: str, value):
    """Type-check one config value; JSON ``true`` is not accepted as a number."""
    kind = _FIELDS[key].type
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise UsageError(f"{key} must be a number, got {value!r}")
        return float(value)
    if kind == "bool":
        if not isinstance(value, bool):
            raise UsageError(f"{key} must be true or false, got {value!r}")
        return value
    if not isinstance(value, str):
        raise UsageError(f"{key} must be a string, got {value!r}")
    return value


def validate(cfg: RunConfig) -> RunConfig:
    """Check value ranges and that the scenario grid is well formed."""
    if cfg.scenario not in SCENARIOS:
        raise UsageError(f"unknown scenario {cfg.scenario!r}; choose from {', '.join(SCENARIOS)}")
    if cfg.format not in FORMATS:
        raise UsageError(f"unknown format {cfg.format!r}; choose from {', '.join(FORMATS)}")
    if cfg.envelope not in ENVELOPES:
        raise UsageError(f"unknown envelope {cfg.envelope!r}; choose from {', '.join(ENVELOPES)}")
    for key in ("alpha_bar", "t0", "omega", "dt"):
        if not math.isfinite(getattr(cfg, key)):
            raise UsageError(f"{key} must be finite")
    if cfg.alpha_bar < 1.0:
        raise UsageError(f"alpha_bar must be >= 1 so that alpha(t) >= 1, got {cfg.alpha_bar}")
    for key in ("t0", "omega", "dt"):
        if getattr(cfg, key) <= 0:
            raise UsageError(f"{key} must be positive, got {getattr(cfg, key)}")
    if cfg.dt > cfg.t0 / 1000:
        warnings.warn(f"dt={cfg.dt} exceeds t0/1000; results may be inaccurate", stacklevel=2)
    try:
        _scenario_object(cfg).grid
    except ValueError as exc:
        raise UsageError(f"grid: {exc}") from None
    return cfg


def _read_config_file(path: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read config file {path}: {exc.strerror or exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    unknown = sorted(set(data) - set(_FIELDS))
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    return {k: _coerce(k, v) for k, v in data.items()}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _run_parser() -> _Parser:
    p = _Parser(prog="ffscaling", description="Fast-forward scaling scenarios.")
    p.add_argument("--scenario", choices=SCENARIOS)
    p.add_argument("--alpha-bar", dest="alpha_bar", type=float, help="peak-to-mean magnification (>= 1)")
    p.add_argument("--t0", type=float, help="duration of the fast-forward protocol")
    p.add_argument("--omega", type=float, help="sweep frequency")
    p.add_argument("--dt", type=float, help="output grid step")
    p.add_argument("--no-gauge", dest="gauge_eliminate_v0", action="store_const", const=False,
                   help="report v0 as solved instead of eliminating it")
    p.add_argument("--out", dest="output_dir", help="output directory (created if missing)")
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--envelope", choices=tuple(ENVELOPES), help="field envelope for decreasing-field")
    p.add_argument("--config", help="JSON file with RunConfig fields")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def parse_config(argv: Sequence[str]) -> RunConfig:
    """Merge defaults, the optional config file and flags (flags win)."""
    args = _run_parser().parse_args(list(argv))
    values = RunConfig().to_dict()
    if args.config is not None:
        values.update(_read_config_file(args.config))
    for key in _FIELDS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return validate(RunConfig(**values))


# -- execution ------------------------------------------------------------------


def _scenario_object(cfg: RunConfig):
    common = dict(omega=cfg.omega, alpha_bar=cfg.alpha_bar, t0=cfg.t0, dt=cfg.dt)
    if cfg.scenario == "two-spin":
        return TwoSpinScenario(**common)
    if cfg.scenario == "decreasing-field":
        return DecreasingFieldScenario(envelope=ENVELOPES[cfg.envelope], **common)
    return TwoLevelScenario(**common)


def run_scenario(cfg: RunConfig) -> ScenarioResult:
    """Dispatch ``cfg`` to the scenario runner.

    A phase condition without a real solution (or a lost branch) yields an
    ``"infeasible"`` result holding the time axis only.
    """
    s = _scenario_object(cfg)
    try:
        if cfg.scenario == "two-level":
            return run_two_level(s, gauge=cfg.gauge_eliminate_v0)
        if cfg.scenario == "two-spin":
            return run_two_spin(s, gauge=cfg.gauge_eliminate_v0)
        if cfg.scenario == "decreasing-field":
            return run_decreasing_field(s)
        if cfg.scenario == "cd-check":
            return run_cd_check(s)
        return run_invariant_check(s)
    except (InfeasibleError, BranchLossError) as exc:
        ts = s.grid.points
        smap = scaling_map(s.protocol)
        kind = "infeasible" if isinstance(exc, InfeasibleError) else "branch-loss"
        series = {"t": ts, "alpha": smap.derivative(ts), "lambda": smap(ts), "singular_flag": np.ones(len(ts), int)}
        return ScenarioResult(cfg.scenario, series, [{"kind": kind, "time": float(exc.time), "source": "solver",
                                                      "message": str(exc)}], {}, "infeasible")


def format_number(x) -> str:
    """17 significant digits; integers stay integers, non-finite values spelled out."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _json_number(x) -> str:
    s = format_number(x)
    return "null" if s in ("nan", "inf", "-inf") else s


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_csv(path: Path, result: ScenarioResult) -> None:
    cols = result.columns
    data = [np.asarray(result.series[c]) for c in cols]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in zip(*data):
            w.writerow([format_number(v) for v in row])


def write_series_json(path: Path, result: ScenarioResult, cfg: RunConfig) -> None:
    head = json.dumps({"scenario": result.name, "version": __version__, "config": cfg.to_dict(),
                       "columns": result.columns}, sort_keys=True)
    body = ",\n".join(
        f"  {json.dumps(c)}: [" + ", ".join(_json_number(v) for v in np.asarray(result.series[c])) + "]"
        for c in result.columns
    )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("{\n" + f'  "header": {head},\n' + '  "series": {\n' + body + "\n  }\n}\n")


def read_series(directory: Path) -> tuple[str, list[str], dict[str, np.ndarray]]:
    """Load the single ``<scenario>.csv`` or ``.json`` series file in ``directory``."""
    if not directory.is_dir():
        raise InputError(f"{directory} is not a directory")
    files = sorted(p for p in directory.iterdir() if p.suffix in (".csv", ".json") and p.name != "events.json")
    if len(files) != 1:
        raise InputError(f"expected exactly one series file in {directory}, found {len(files)}")
    path = files[0]
    try:
        if path.suffix == ".csv":
            with open(path, encoding="utf-8", newline="") as fh:
                rows = list(csv.reader(fh))
            if not rows:
                raise SchemaError(f"{path} is empty")
            cols = rows[0]
            values = np.array(rows[1:], dtype=float).reshape(len(rows) - 1, len(cols))
            return path.stem, cols, {c: values[:, i] for i, c in enumerate(cols)}
        doc = json.loads(path.read_text(encoding="utf-8"))
        cols = list(doc["header"]["columns"])
        return path.stem, cols, {c: np.array([np.nan if v is None else v for v in doc["series"][c]], dtype=float)
                                 for c in cols}
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise SchemaError(f"malformed series file {path}: {exc}") from None


def execute(cfg: RunConfig) -> int:
    """Run the scenario, write ``<scenario>.<format>`` and ``events.json``."""
    out = Path(cfg.output_dir)
    start = time.perf_counter()
    try:
        result = run_scenario(cfg)
    except FFScalingError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_CHECK_FAILED
    wall = time.perf_counter() - start
    code = STATUS_EXIT.get(result.status, EXIT_CHECK_FAILED)
    try:
        out.mkdir(parents=True, exist_ok=True)
        series_path = out / f"{cfg.scenario}.{cfg.format}"
        if cfg.format == "csv":
            write_csv(series_path, result)
        else:
            write_series_json(series_path, result, cfg)
        events = {
            "scenario": cfg.scenario,
            "status": result.status,
            "exit_code": code,
            "version": __version__,
            "wall_time_s": wall,
            "config": cfg.to_dict(),
            "metadata": result.metadata,
            "events": result.events,
        }
        (out / "events.json").write_text(json.dumps(_jsonable(events), indent=2, sort_keys=True) + "\n",
                                         encoding="utf-8")
    except OSError as exc:
        log.error("cannot write output to %s: %s", out, exc)
        return EXIT_IO
    log.info("%s: status %s in %.2f s -> %s", cfg.scenario, result.status, wall, series_path)
    return code


# -- regression -------------------------------------------------------------------


@dataclasses.dataclass
class RegressReport:
    passed: bool
    max_diff: dict
    compared_rows: int
    excluded_rows: int
    tol: float

    def lines(self) -> list[str]:
        out = [f"{c}: max |diff| = {d:.3e}" for c, d in self.max_diff.items()]
        verdict = "PASS" if self.passed else "FAIL"
        out.append(f"{verdict}: {self.compared_rows} rows compared, {self.excluded_rows} flagged rows excluded, "
                   f"tol {self.tol:g}")
        return out


def regress(golden_dir, fresh_dir, tol: float) -> RegressReport:
    """Columnwise max-abs comparison on the time points both runs share.

    Rows flagged singular in either run are skipped, as are NaN entries
    present in both. Grids may differ (e.g. a halved dt); rows are matched
    on ``t``.
    """
    name_g, cols_g, gold = read_series(Path(golden_dir))
    name_f, cols_f, fresh = read_series(Path(fresh_dir))
    if name_g != name_f or cols_g != cols_f:
        raise SchemaError(f"schema mismatch: {name_g}{cols_g} vs {name_f}{cols_f}")
    if "t" not in cols_g:
        raise SchemaError("series has no 't' column")
    # match rows on t rounded well below any sensible step
    key_g = np.round(gold["t"], 9)
    key_f = np.round(fresh["t"], 9)
    common, ig, jf = np.intersect1d(key_g, key_f, return_indices=True)
    if common.size == 0:
        raise SchemaError("the two runs share no time points")
    keep = np.ones(common.size, dtype=bool)
    if "singular_flag" in cols_g:
        keep &= (gold["singular_flag"][ig] == 0) & (fresh["singular_flag"][jf] == 0)
    diffs = {}
    for c in cols_g:
        if c in ("t", "singular_flag"):
            continue
        a, b = gold[c][ig][keep], fresh[c][jf][keep]
        both_nan = np.isnan(a) & np.isnan(b)
        d = np.abs(a - b)
        d = np.where(both_nan, 0.0, d)
        diffs[c] = float(np.max(np.where(np.isnan(d), np.inf, d), initial=0.0))
    passed = all(d <= tol for d in diffs.values())
    return RegressReport(passed, diffs, int(keep.sum()), int((~keep).sum()), tol)


def _regress_main(argv: Sequence[str]) -> int:
    p = _Parser(prog="ffscaling regress", description="Compare a fresh run against golden output.")
    p.add_argument("golden")
    p.add_argument("fresh")
    p.add_argument("--tol", type=float, default=1e-9)
    args = p.parse_args(list(argv))
    report = regress(args.golden, args.fresh, args.tol)
    print("\n".join(report.lines()))
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(levelname)s: %(message)s")
    logging.captureWarnings(True)
    try:
        if argv and argv[0] == "regress":
            return _regress_main(argv[1:])
        if "-v" in argv or "--verbose" in argv:
            log.setLevel(logging.INFO)
        return execute(parse_config(argv))
    except UsageError as exc:
        print(f"ffscaling: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"ffscaling: {exc}", file=sys.stderr)
        return EXIT_IO
    except SchemaError as exc:
        print(f"ffscaling: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
