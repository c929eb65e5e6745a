"""Command-line sweeps: ``omstat {spectrum,rotator,qao-thermo,avg-energy,verify}``.

Grids are given as comma lists (``0.1,1,10``), inclusive linear ranges
(``0:1:0.25``) or log ranges (``log:0.01:100:9``). A JSON config file may
supply any option; flags given on the command line override it.

Exit status: 0 success, 1 invalid input, 2 numerical failure under
``--strict``, 3 failed acceptance criteria in ``verify``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import shutil
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import partial
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .cumulant import ROOT_TOL, SERIES_TOL
from .datasets import (METHODS, ResultRow, avg_energy_task, qao_thermo_task,
                       rotator_task, spectrum_task)

log = logging.getLogger("omstat")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_ACCEPTANCE = 0, 1, 2, 3

COLUMNS = ["beta_or_x", "lambda", "mu", "n", "method", "kind", "value", "ref_value", "rel_err"]

DEFAULT_GRIDS = {
    "spectrum": {"lambda": "log:0.01:100:9", "mu": "0", "n_range": "0:10"},
    "rotator": {"x": "log:0.01:10:31"},
    "qao-thermo": {"beta": "log:0.1:10:9", "lambda": "log:0.1:100:7", "mu": "0"},
    "avg-energy": {"beta": "log:0.1:10:9", "lambda": "log:0.1:100:7", "mu": "0"},
}


class ConfigError(ValueError):
    pass


def parse_grid(spec) -> list[float]:
    """Expand a grid given as a number, list, string or ``{"start", "stop", ...}`` dict."""
    if isinstance(spec, (int, float)):
        return [float(spec)]
    if isinstance(spec, (list, tuple)):
        return [float(v) for v in spec]
    if isinstance(spec, dict):
        start, stop = float(spec["start"]), float(spec["stop"])
        if spec.get("log"):
            return list(np.logspace(np.log10(start), np.log10(stop), int(spec["num"])))
        if "num" in spec:
            return list(np.linspace(start, stop, int(spec["num"])))
        return _arange(start, stop, float(spec["step"]))
    text = str(spec).strip()
    try:
        if text.startswith("log:"):
            start, stop, num = text[4:].split(":")
            if float(start) <= 0 or float(stop) <= 0:
                raise ConfigError(f"log grid needs positive ends: {text!r}")
            return [float(v) for v in np.logspace(np.log10(float(start)),
                                                  np.log10(float(stop)), int(num))]
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            step = parts[2] if len(parts) == 3 else 1.0
            return _arange(parts[0], parts[1], step)
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse grid {text!r}: {exc}") from exc


def _arange(start, stop, step):
    if step <= 0:
        raise ConfigError("grid step must be positive")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [float(start + i * step) for i in range(max(count, 0))]


@dataclass
class RunConfig:
    command: str
    beta: list = field(default_factory=list)
    lam: list = field(default_factory=list)
    mu: list = field(default_factory=lambda: [0.0])
    x: list = field(default_factory=list)
    n_range: list = field(default_factory=list)
    methods: list = field(default_factory=list)
    tol_series: float = SERIES_TOL
    tol_root: float = ROOT_TOL
    out: str = "omstat-out"
    format: str = "csv"
    jobs: int = 1
    overwrite: bool = False
    strict: bool = False

    def validate(self):
        allowed = METHODS[self.command]
        if not self.methods:
            raise ConfigError("method set is empty")
        bad = [m for m in self.methods if m not in allowed]
        if bad:
            raise ConfigError(f"methods {bad} not available for {self.command}; "
                              f"choose from {list(allowed)}")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if not self.tol_series > 0 or not self.tol_root > 0:
            raise ConfigError("tolerances must be positive")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if any(not b > 0 for b in self.beta):
            raise ConfigError("beta values must be positive")
        if any(not v >= 0 for v in self.lam):
            raise ConfigError("lambda values must be >= 0")
        if any(not 1 + 2 * m > 0 for m in self.mu):
            raise ConfigError("mu values must satisfy 1 + 2 mu > 0")
        if any(not v > 0 for v in self.x):
            raise ConfigError("x values must be positive")
        if any(n < 0 or n != int(n) for n in self.n_range):
            raise ConfigError("levels must be non-negative integers")
        needs = {"spectrum": ("lam", "n_range"), "rotator": ("x",),
                 "qao-thermo": ("beta", "lam"), "avg-energy": ("beta", "lam")}[self.command]
        for name in needs:
            if not getattr(self, name):
                raise ConfigError(f"{self.command} needs a non-empty {name} grid")

    def public(self):
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d


def build_config(args) -> RunConfig:
    raw = {}
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
    raw = {k.replace("-", "_"): v for k, v in raw.items()}
    if "lambda" in raw:
        raw["lam"] = raw.pop("lambda")
    known = {f.name for f in fields(RunConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    cmd = args.command
    merged = {**{("lam" if k == "lambda" else k): v for k, v in DEFAULT_GRIDS[cmd].items()}, **raw}
    for name in ("beta", "lam", "mu", "x", "n_range", "methods", "tol_series", "tol_root",
                 "out", "format", "jobs"):
        value = getattr(args, name, None)
        if value is not None:
            merged[name] = value
    if args.overwrite:
        merged["overwrite"] = True
    if args.strict:
        merged["strict"] = True

    cfg = RunConfig(cmd)
    for name in ("beta", "lam", "mu", "x"):
        if name in merged:
            setattr(cfg, name, parse_grid(merged[name]))
    if "n_range" in merged:
        cfg.n_range = [int(round(v)) for v in parse_grid(merged["n_range"])]
    methods = merged.get("methods", list(METHODS[cmd]))
    if isinstance(methods, str):
        methods = [m.strip() for m in methods.split(",") if m.strip()]
    cfg.methods = list(methods)
    for name in ("tol_series", "tol_root"):
        if name in merged:
            setattr(cfg, name, float(merged[name]))
    for name, cast in (("out", str), ("format", str), ("jobs", int),
                       ("overwrite", bool), ("strict", bool)):
        if name in merged:
            setattr(cfg, name, cast(merged[name]))
    cfg.validate()
    return cfg


# --- running -------------------------------------------------------------------


def make_tasks(cfg: RunConfig):
    tols = dict(tol_series=cfg.tol_series, tol_root=cfg.tol_root)
    methods = tuple(cfg.methods)
    if cfg.command == "spectrum":
        return [partial(spectrum_task, lam, mu, tuple(cfg.n_range), methods, **tols)
                for lam in cfg.lam for mu in cfg.mu]
    if cfg.command == "rotator":
        return [partial(rotator_task, x, methods, **tols) for x in cfg.x]
    task = qao_thermo_task if cfg.command == "qao-thermo" else avg_energy_task
    return [partial(task, b, lam, mu, methods, **tols)
            for lam in cfg.lam for mu in cfg.mu for b in cfg.beta]


def _call(task):
    return task()


def run_tasks(tasks, jobs: int):
    if jobs == 1:
        results = [t() for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_call, tasks))
    rows = [r for rs, _ in results for r in rs]
    failures = [f for _, fs in results for f in fs]
    rows.sort(key=ResultRow.sort_key)
    failures.sort(key=lambda f: (f.inputs, f.method, f.code))
    return rows, failures


# --- output --------------------------------------------------------------------


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return format(float(v), ".12g")


def _round(v):
    if v is None or isinstance(v, (str, int)):
        return v
    return float(format(float(v), ".12g"))


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        d = r.as_dict()
        w.writerow([_fmt(d[c]) for c in COLUMNS])
    return buf.getvalue()


def rows_to_json(rows, meta) -> str:
    plain = [{c: _round(r.as_dict()[c]) for c in COLUMNS} for r in rows]
    digest = hashlib.sha256(json.dumps(plain, sort_keys=True).encode()).hexdigest()
    doc = {"meta": {**meta, "rows_sha256": digest}, "rows": plain}
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def failures_to_text(failures) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["command", "method", "inputs", "code", "message"])
    for f in failures:
        w.writerow([f.command, f.method, f.inputs, f.code, f.message])
    return buf.getvalue()


def render_files(cfg: RunConfig, rows, failures) -> dict[str, str]:
    meta = {
        "command": cfg.command,
        "config": {k: v for k, v in cfg.public().items() if k not in ("out", "jobs", "overwrite")},
        "versions": {"omstat": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
    }
    ext = cfg.format

    def render(subset):
        return rows_to_csv(subset) if ext == "csv" else rows_to_json(subset, meta)

    files = {}
    if cfg.command == "spectrum":
        for m in cfg.methods:
            files[f"spectrum_{m}.{ext}"] = render([r for r in rows if r.method == m])
        if "oracle" in cfg.methods:
            err_rows = [r for r in rows if r.method != "oracle"]
            files[f"spectrum_errors.{ext}"] = render(err_rows)
    else:
        files[f"{cfg.command}.{ext}"] = render(rows)
    files["failures.csv"] = failures_to_text(failures)
    return files


def write_atomically(out: Path, files: dict[str, str], overwrite: bool):
    """Write every file into a fresh sibling directory, then swap it into place."""
    out = out.resolve()
    out.parent.mkdir(parents=True, exist_ok=True)
    if out.exists() and not overwrite:
        raise ConfigError(f"output directory {out} exists; pass --overwrite to replace it")
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    try:
        for name, text in files.items():
            (tmp / name).write_text(text)
        if out.exists():
            backup = Path(tempfile.mkdtemp(prefix=f".{out.name}.old.", dir=out.parent))
            os.rmdir(backup)
            os.replace(out, backup)
            os.replace(tmp, out)
            shutil.rmtree(backup)
        else:
            os.replace(tmp, out)
    finally:
        if tmp.exists():
            shutil.rmtree(tmp)


def run_sweep(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    if out.exists() and not cfg.overwrite:
        raise ConfigError(f"output directory {out} exists; pass --overwrite to replace it")
    rows, failures = run_tasks(make_tasks(cfg), cfg.jobs)
    for f in failures:
        log.warning("%s %s [%s]: %s", f.method, f.inputs, f.code, f.message)
    if failures and cfg.strict:
        log.error("%d numerical failures; nothing written", len(failures))
        return EXIT_NUMERICAL
    write_atomically(out, render_files(cfg, rows, failures), cfg.overwrite)
    log.info("%d rows, %d failures written to %s", len(rows), len(failures), out)
    return EXIT_OK


def run_verify(args) -> int:
    from .acceptance import CRITERIA, run_criterion

    ids = [c[0] for c in CRITERIA]
    if args.only:
        try:
            ids = [int(v) for v in args.only.split(",")]
        except ValueError as exc:
            raise ConfigError(f"--only takes criterion numbers: {exc}") from exc
        unknown = set(ids) - {c[0] for c in CRITERIA}
        if unknown:
            raise ConfigError(f"unknown criteria {sorted(unknown)}")
    results = [run_criterion(i) for i in ids]
    for r in results:
        print(r.line(), file=sys.stderr)
    report = {
        "passed": all(r.passed for r in results),
        "criteria": [r.to_dict() for r in results],
    }
    text = json.dumps(report, indent=1, sort_keys=True, default=float) + "\n"
    if args.out:
        write_atomically(Path(args.out), {"verify.json": text}, bool(args.overwrite))
    else:
        sys.stdout.write(text)
    return EXIT_OK if report["passed"] else EXIT_ACCEPTANCE


# --- argument parsing -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="omstat", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON file with any of the options below")
        sp.add_argument("--methods", help="comma-separated method tags")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--format", choices=("csv", "json"))
        sp.add_argument("--jobs", type=int, help="worker processes")
        sp.add_argument("--tol-series", dest="tol_series", type=float)
        sp.add_argument("--tol-root", dest="tol_root", type=float)
        sp.add_argument("--overwrite", action="store_true",
                        help="replace an existing output directory")
        sp.add_argument("--strict", action="store_true",
                        help="exit with status 2 on any numerical failure")
        sp.add_argument("--mu")

    sp = sub.add_parser("spectrum", help="energy levels per method")
    common(sp)
    sp.add_argument("--lambda", dest="lam")
    sp.add_argument("--n-range", dest="n_range")

    sp = sub.add_parser("rotator", help="rotator free energy")
    common(sp)
    sp.add_argument("--x")

    for name, text in (("qao-thermo", "oscillator free energy"),
                       ("avg-energy", "oscillator mean energy")):
        sp = sub.add_parser(name, help=text)
        common(sp)
        sp.add_argument("--lambda", dest="lam")
        sp.add_argument("--beta")

    sp = sub.add_parser("verify", help="run the acceptance checks")
    sp.add_argument("--out", help="directory for verify.json (default: stdout)")
    sp.add_argument("--overwrite", action="store_true")
    sp.add_argument("--only", help="comma-separated criterion numbers")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "verify":
            return run_verify(args)
        return run_sweep(build_config(args))
    except ConfigError as exc:
        print(f"omstat: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
