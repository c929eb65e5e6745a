"""Reference values: truncated-basis diagonalisation of the oscillator, direct
Boltzmann sums over any spectrum, the exact harmonic free energy and the
analytic asymptotic partition functions."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import eig_banded

from .errors import (ConvergenceTooFew, LogOfNonPositive, RegimeViolation, SlowConvergence,
                     TailUnbounded)
from .qao import (QaoParams, QaoProvider, delta_e2_full, diagonal_energy, energy0, om_spectrum,
                  omega_n, strong_coupling_bn)
from .series import sum_series
from .spectrum import SpectrumSource, table_spectrum

REL_TOL = 1e-9
M_DEFAULT = 120
M_MAX = 8192
SUM_TOL = 1e-14


@dataclass(frozen=True)
class SpectrumTable:
    """Levels that agree to ``rel_tol`` between bases of size ``M`` and ``2M``."""

    levels: np.ndarray
    basis_size: int
    converged_count: int
    params: QaoParams
    omega_basis: float

    def spectrum(self, count: int | None = None) -> SpectrumSource:
        levels = self.levels if count is None else self.levels[:count]
        return table_spectrum(levels, method="oracle")


@dataclass(frozen=True)
class ThermoReference:
    beta: float
    log_z: float
    mean_energy: float
    tail_estimate: float  # bound on the omitted part of Z, relative to Z
    n_terms: int
    lam: float | None = None
    mu: float | None = None

    @property
    def z(self):
        return float(np.exp(self.log_z))

    @property
    def free_energy(self):
        return -self.log_z / self.beta


def _parity_eigenvalues(params: QaoParams, size: int, omega: float) -> np.ndarray:
    # H only couples n to n+-2 and n+-4, so even and odd states decouple
    # into two pentadiagonal blocks
    d, o2, o4 = QaoProvider(params).bands(size, omega)
    out = []
    for p in (0, 1):
        dd = d[p::2]
        m = len(dd)
        band = np.zeros((3, m))
        band[2] = dd
        band[1, 1:] = o2[p::2][: m - 1]
        band[0, 2:] = o4[p::2][: m - 2]
        out.append(eig_banded(band, eigvals_only=True))
    return np.sort(np.concatenate(out))


def diagonalize_qao(params: QaoParams, M: int = M_DEFAULT, omega_basis: float | None = None,
                    n_levels: int | None = None, rel_tol: float = REL_TOL) -> SpectrumTable:
    """Eigenvalues of the oscillator in a harmonic basis of ``M`` states.

    The computation is repeated with ``2M`` states and only the leading run
    of levels that agree to ``rel_tol`` (at most ``M // 3``) is kept.

    Raises
    ------
    ConvergenceTooFew
        If fewer than ``n_levels`` levels converged.
    """
    if M < 20:
        raise ValueError("basis size must be at least 20")
    w = omega_n(params, 0) if omega_basis is None else float(omega_basis)
    if w <= 0:
        raise ValueError("basis frequency must be positive")
    small = _parity_eigenvalues(params, M, w)
    big = _parity_eigenvalues(params, 2 * M, w)[:M]
    ok = np.abs(small - big) <= rel_tol * np.abs(big)
    count = int(np.argmin(ok)) if not ok.all() else M
    count = min(count, M // 3)
    if n_levels is not None and count < n_levels:
        raise ConvergenceTooFew(f"{count} levels converged at M={M}, need {n_levels}")
    return SpectrumTable(big[:count], M, count, params, w)


@lru_cache(maxsize=256)
def oracle_table(params: QaoParams, n_levels: int, rel_tol: float = REL_TOL) -> SpectrumTable:
    """Smallest doubling of the basis that converges ``n_levels`` levels.

    The basis frequency is tuned to the highest requested level, which keeps
    the high states well resolved without hurting the low ones.
    """
    w = omega_n(params, max(n_levels - 1, 0))
    M = max(M_DEFAULT, 3 * n_levels)
    while True:
        try:
            return diagonalize_qao(params, M, w, n_levels, rel_tol)
        except ConvergenceTooFew:
            if 2 * M > M_MAX:
                raise
            M *= 2


def partition_direct(spectrum: SpectrumSource, beta: float, tol: float = SUM_TOL,
                     truncate: int | None = None) -> ThermoReference:
    """``Z = sum_n g_n exp(-beta E_n)`` with its free and mean energy.

    Weights are taken relative to the ground level so that large ``beta E_0``
    cannot underflow. Infinite spectra are summed until the ratio tail bound
    drops below ``tol Z``; finite tables (or ``truncate`` levels of any
    spectrum) are summed exactly, with the omitted tail bounded by treating
    the last gap as the smallest of all later gaps.

    Raises
    ------
    TailUnbounded
        If the sum cannot be closed: an infinite spectrum whose terms decay
        too slowly, or a table too short for ``tol`` (``truncate`` unset).
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    n_max = spectrum.n_max
    if truncate is not None:
        n_max = truncate - 1 if n_max is None else min(n_max, truncate - 1)
    if n_max is None:
        e0 = float(spectrum(np.array([0]))[0])
    else:
        # finite sums need not start at their lowest level
        e0 = float(np.min(spectrum(np.arange(n_max + 1))))

    def terms(n):
        e = spectrum(n)
        w = spectrum.g(n) * np.exp(-beta * (e - e0))
        return np.vstack([w, w * (e - e0)])

    if n_max is None:
        try:
            res = sum_series(terms, tol)
        except SlowConvergence as exc:
            raise TailUnbounded(f"partition sum does not close at beta={beta}: {exc}") from exc
        s, n_terms, tail = res.value, res.n_terms, float(res.tail_bound[0] / res.value[0])
    else:
        n = np.arange(n_max + 1)
        t = terms(n)
        s, n_terms = t.sum(axis=1), n_max + 1
        tail = 0.0
        if n_max >= 1:
            e = spectrum(n[-2:])
            r = np.exp(-beta * (e[1] - e[0])) if e[1] > e[0] else 1.0
            tail = np.inf if r >= 1 else float(t[0, -1] * r / (1 - r) / s[0])
        if truncate is None and tail > tol:
            raise TailUnbounded(
                f"table of {n_max + 1} levels leaves relative tail {tail:.3g} at beta={beta}"
            )
    log_z = float(np.log(s[0]) - beta * e0)
    return ThermoReference(beta, log_z, float(e0 + s[1] / s[0]), tail, n_terms)


def qao_thermo_oracle(beta: float, lam: float, mu: float = 0.0, tol: float = SUM_TOL,
                      levels: int | None = None) -> ThermoReference:
    """Partition sum over diagonalised levels, grown until the tail is below ``tol``.

    ``levels`` fixes the number of levels instead (the few-level reference of
    the high-temperature caveat).
    """
    params = QaoParams(lam, mu)
    if levels is not None:
        table = oracle_table(params, levels)
        ref = partition_direct(table.spectrum(levels), beta, tol, truncate=levels)
    else:
        count = 32
        while True:
            table = oracle_table(params, count)
            try:
                ref = partition_direct(table.spectrum(count), beta, tol)
                break
            except TailUnbounded:
                count *= 2
    return ThermoReference(beta, ref.log_z, ref.mean_energy, ref.tail_estimate,
                           ref.n_terms, lam, mu)


def harmonic_exact_free_energy(mu: float, beta: float) -> float:
    """``(1/beta) ln[2 sinh(beta w / 2)]`` with ``w = sqrt(1 + 2 mu)``."""
    if not 1 + 2 * mu > 0 or beta <= 0:
        raise ValueError("need 1 + 2 mu > 0 and beta > 0")
    bw = beta * np.sqrt(1 + 2 * mu)
    return float((0.5 * bw + np.log(-np.expm1(-bw))) / beta)


def qao_asymptotic_z(beta: float, lam: float, regime: str) -> float:
    """Analytic approximations to the oscillator partition function.

    ``regime`` is ``"low-T"`` (``1 + exp(-beta E_0)``), ``"weak-coupling"``
    (harmonic ``Z`` times ``1 + 3 lam e^-beta/(1 - e^-beta)^2``) or
    ``"strong-coupling"`` (sum of ``exp(-beta lam^(1/3) b_n)``). A
    :class:`RegimeViolation` warning is issued when the inputs fall outside
    the regime's domain; the value is still returned.
    """
    if beta <= 0 or lam < 0:
        raise ValueError("need beta > 0 and lam >= 0")
    if regime == "low-T":
        if beta < 5:
            warnings.warn(f"low-T form used at beta={beta}", RegimeViolation, stacklevel=2)
        return float(1 + np.exp(-beta * energy0(QaoParams(lam), 0)))
    if regime == "weak-coupling":
        omq = -np.expm1(-beta)
        if lam / omq**2 > 0.1:
            warnings.warn(f"weak-coupling form used at lam/(1-e^-beta)^2={lam / omq**2:.3g}",
                          RegimeViolation, stacklevel=2)
        return float(np.exp(-beta / 2) / omq * (1 + 3 * lam * np.exp(-beta) / omq**2))
    if regime == "strong-coupling":
        if lam < 10:
            warnings.warn(f"strong-coupling form used at lam={lam}", RegimeViolation, stacklevel=2)
        c = beta * np.cbrt(lam)
        spec = SpectrumSource(lambda n: c * strong_coupling_bn(np.asarray(n)), method="strong")
        return float(sum_series(lambda n: np.exp(-spec(n)), SUM_TOL).value[0])
    raise ValueError(f"unknown regime {regime!r}")


# --- free energies from sums over operator-method levels ----------------------


def _om_levels(params: QaoParams, n):
    w = omega_n(params, n)
    return diagonal_energy(params, n, w), delta_e2_full(params, n, w)


def om_free_energy(beta: float, lam: float, mu: float = 0.0, order: int = 0,
                   tol: float = SUM_TOL, levels: int | None = None) -> float:
    """``-(1/beta) ln sum_n exp(-beta E_n)`` over zeroth (``order=0``) or
    second-iteration (``order=2``, downward couplings included) operator-method
    levels. ``levels`` truncates the sum to the lowest levels."""
    spec = om_spectrum(QaoParams(lam, mu), order, downward=True)
    return partition_direct(spec, beta, tol, truncate=levels).free_energy


def f01_expanded(beta: float, lam: float, mu: float = 0.0, tol: float = SUM_TOL) -> float:
    """Free energy with the level corrections linearised in the Boltzmann factor,
    ``-(1/beta) ln sum_n exp(-beta E0_n) (1 - beta dE_n)``.

    Raises
    ------
    LogOfNonPositive
        If the bracketed sum is not positive. No clamping is attempted.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    params = QaoParams(lam, mu)
    g0 = float(energy0(params, 0))

    def terms(n):
        e, de = _om_levels(params, n.astype(float))
        w = np.exp(-beta * (e - g0))
        return np.vstack([w, w * (1 - beta * de)])

    s = sum_series(terms, tol).value
    if not s[1] > 0:
        raise LogOfNonPositive(f"linearised partition sum {s[1]:.3g} at beta={beta}, lam={lam}")
    return float(g0 - np.log(s[1]) / beta)
