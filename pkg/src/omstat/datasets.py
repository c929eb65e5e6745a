"""Row generators behind the command-line sweeps.

Each ``*_task`` evaluates one grid point and returns ``(rows, failures)``;
tasks are independent so they can run in any order or in worker processes.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .cumulant import SERIES_TOL, ROOT_TOL, qao_z0c
from .errors import OmstatError
from .om import cpt2_terms, quadratic_model_size
from .oracle import (f01_expanded, om_free_energy, oracle_table, partition_direct,
                     qao_thermo_oracle)
from .qao import (QaoParams, QaoProvider, cpt2_energies, cpt_rising_count, cpt_spectrum,
                  energies, om_spectrum, strong_coupling_bn)
from .rotator import rotator_partition_direct, rotator_z0, rotator_z1_factor

# levels in the few-level reference
FEW_LEVELS = 8

METHODS = {
    "spectrum": ("om0", "om2", "om3", "cpt", "strong", "oracle"),
    "rotator": ("ce0", "ce1", "oracle"),
    "qao-thermo": ("om0", "om2", "f01", "ce0", "ce1", "cpt", "oracle"),
    "avg-energy": ("om0", "cpt", "ce0", "oracle"),
}


@dataclass(frozen=True)
class ResultRow:
    beta_or_x: float | None
    lam: float | None
    mu: float | None
    n: int | None
    method: str
    kind: str  # E, Z, F or Ebar
    value: float
    ref_value: float | None = None
    rel_err: float | None = None

    def sort_key(self):
        def k(v):
            return (v is None, v if v is not None else 0)
        return (k(self.lam), k(self.mu), k(self.beta_or_x), k(self.n), self.method, self.kind)

    def as_dict(self):
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d


@dataclass(frozen=True)
class Failure:
    command: str
    method: str
    inputs: str
    code: str
    message: str


def _attach_refs(rows, key_fn):
    # every row gets the oracle row's value with the same key as reference
    refs = {key_fn(r): r.value for r in rows if r.method == "oracle"}
    out = []
    for r in rows:
        ref = refs.get(key_fn(r))
        if ref is None:
            out.append(r)
            continue
        rel = abs(r.value - ref) / abs(ref) if ref != 0 else (0.0 if r.value == ref else math.inf)
        out.append(ResultRow(r.beta_or_x, r.lam, r.mu, r.n, r.method, r.kind, r.value, ref, rel))
    return out


def _evaluate(command, inputs, methods, fns):
    """Run ``fns[method]()`` for each requested method, collecting failures."""
    rows, failures = [], []
    for m in methods:
        try:
            produced = fns[m]()
        except OmstatError as exc:
            failures.append(Failure(command, m, inputs, exc.code, str(exc)))
            continue
        except (ValueError, FloatingPointError, ZeroDivisionError) as exc:
            failures.append(Failure(command, m, inputs, "numerical", str(exc)))
            continue
        for r in produced:
            if not np.isfinite(r.value):
                failures.append(Failure(command, m, inputs, "non-finite", f"{r.kind}={r.value}"))
            else:
                rows.append(r)
    return rows, failures


def qao_cpt2_free_energy(beta, lam, mu=0.0):
    """Second-order thermodynamic perturbation theory about the ``mu = lam = 0``
    oscillator, with ``V = mu x^2 + lam x^4``."""
    size = quadratic_model_size(beta)
    h = QaoProvider(QaoParams(lam, mu)).matrix(size, 1.0)
    e0 = np.arange(size) + 0.5
    v = h - np.diag(e0)
    f0, first, second = cpt2_terms(e0, v, beta)
    return f0 + first + second


# --- tasks -------------------------------------------------------------------


def spectrum_task(lam, mu, n_values, methods, tol_series=SERIES_TOL, tol_root=ROOT_TOL):
    params = QaoParams(lam, mu)
    n = np.asarray(n_values)

    def level_rows(method, values):
        return [ResultRow(None, lam, mu, int(k), method, "E", float(v)) for k, v in zip(n, values)]

    fns = {
        "om0": lambda: level_rows("om0", energies(params, n, 0)),
        "om2": lambda: level_rows("om2", energies(params, n, 2)),
        "om3": lambda: level_rows("om3", energies(params, n, 3)),
        "cpt": lambda: level_rows("cpt", cpt2_energies(params, n)),
        "strong": lambda: level_rows("strong", np.cbrt(lam) * strong_coupling_bn(n)),
        "oracle": lambda: level_rows(
            "oracle", oracle_table(params, int(n.max()) + 1).levels[n]),
    }
    rows, failures = _evaluate("spectrum", f"lambda={lam} mu={mu}", methods, fns)
    if "oracle" in methods:
        rows = _attach_refs(rows, lambda r: (r.lam, r.mu, r.n))
    return rows, failures


def rotator_task(x, methods, tol_series=SERIES_TOL, tol_root=ROOT_TOL):
    cache = {}

    def ce():
        if "z0" not in cache:
            cache["z0"], cache["q"] = rotator_z0(x, tol_root)
        return cache["z0"], cache["q"]

    def rows_for(method, log_z):
        return [ResultRow(x, None, None, None, method, "Z", float(np.exp(log_z))),
                ResultRow(x, None, None, None, method, "F", float(-log_z / x))]

    def ce0():
        z0, _ = ce()
        return rows_for("ce0", np.log(z0))

    def ce1():
        z0, q = ce()
        return rows_for("ce1", np.log(z0) + np.log(rotator_z1_factor(q)))

    def exact():
        return rows_for("oracle", np.log(rotator_partition_direct(x, max(tol_series, 1e-16))))

    rows, failures = _evaluate("rotator", f"x={x}", methods,
                               {"ce0": ce0, "ce1": ce1, "oracle": exact})
    if "oracle" in methods:
        rows = _attach_refs(rows, lambda r: (r.beta_or_x, r.kind))
    return rows, failures


def qao_thermo_task(beta, lam, mu, methods, tol_series=SERIES_TOL, tol_root=ROOT_TOL):
    def f_row(method, value):
        return [ResultRow(beta, lam, mu, None, method, "F", float(value))]

    def ce(order):
        est = qao_z0c(beta, lam, mu, series_tol=tol_series, root_tol=tol_root)
        return f_row(f"ce{order}", est.free_energy(order))

    def oracle():
        full = qao_thermo_oracle(beta, lam, mu, tol_series)
        few = qao_thermo_oracle(beta, lam, mu, tol_series, levels=FEW_LEVELS)
        return f_row("oracle", full.free_energy) + f_row("oracle8", few.free_energy)

    fns = {
        "om0": lambda: f_row("om0", om_free_energy(beta, lam, mu, 0, tol_series)),
        "om2": lambda: f_row("om2", om_free_energy(beta, lam, mu, 2, tol_series)),
        "f01": lambda: f_row("f01", f01_expanded(beta, lam, mu, tol_series)),
        "ce0": lambda: ce(0),
        "ce1": lambda: ce(1),
        "cpt": lambda: f_row("cpt", qao_cpt2_free_energy(beta, lam, mu)),
        "oracle": oracle,
    }
    rows, failures = _evaluate("qao-thermo", f"beta={beta} lambda={lam} mu={mu}", methods, fns)
    if "oracle" in methods:
        rows = _attach_refs(rows, lambda r: (r.beta_or_x, r.lam, r.mu))
    return rows, failures


def avg_energy_task(beta, lam, mu, methods, tol_series=SERIES_TOL, tol_root=ROOT_TOL):
    params = QaoParams(lam, mu)

    def e_row(method, value):
        return [ResultRow(beta, lam, mu, None, method, "Ebar", float(value))]

    def oracle():
        full = qao_thermo_oracle(beta, lam, mu, tol_series)
        few = qao_thermo_oracle(beta, lam, mu, tol_series, levels=FEW_LEVELS)
        return e_row("oracle", full.mean_energy) + e_row("oracle8", few.mean_energy)

    fns = {
        "om0": lambda: e_row("om0", partition_direct(
            om_spectrum(params, 0), beta, tol_series).mean_energy),
        # the perturbative levels turn over and fall without bound, so only the
        # rising part of the spectrum enters
        "cpt": lambda: e_row("cpt", partition_direct(
            cpt_spectrum(params), beta, tol_series,
            truncate=cpt_rising_count(params)).mean_energy),
        "ce0": lambda: e_row("ce0", qao_z0c(beta, lam, mu, with_levels=False,
                                            series_tol=tol_series,
                                            root_tol=tol_root).mean_energy),
        "oracle": oracle,
    }
    rows, failures = _evaluate("avg-energy", f"beta={beta} lambda={lam} mu={mu}", methods, fns)
    if "oracle" in methods:
        rows = _attach_refs(rows, lambda r: (r.beta_or_x, r.lam, r.mu))
    return rows, failures
