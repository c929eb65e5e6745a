"""Cumulant expansion of the partition function over a trial excitation ensemble.

The partition function ``Z = sum_n g_n exp(-beta E_n)`` is rewritten as an
average ``<exp A(n)>`` over the normalised weights ``N g_n q^n`` with

    A(n) = -beta E_n - n ln q - ln N,      q = exp(-2 beta*),

and expanded in cumulants. Keeping ``K1`` gives ``Z0 = exp(phi)``; the
second cumulant gives the correction factor ``Z1 = exp(K2/2)``. The trial
parameter ``q`` (and, for the oscillator, a single basis frequency) is fixed
by stationarity of ``phi``.
"""

from __future__ import annotations

import logging
from math import comb
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import bisect

from .errors import BracketFailure, MultipleStationaryPoints, NoStationaryPoint, SeriesOverflow
from .qao import QaoParams, delta_e2_full, fixed_omega_spectrum, solve_depressed_cubic
from .series import sum_series
from .spectrum import Degeneracy, SpectrumSource, degeneracy_values

log = logging.getLogger(__name__)

Q_CEILING = 1 - 1e-12
SERIES_TOL = 1e-14
ROOT_TOL = 1e-15  # relative; scipy's bisect floor is 4 eps


# --- trial ensemble ----------------------------------------------------------


@lru_cache(maxsize=None)
def _eulerian(k: int) -> tuple:
    """Coefficients of the Eulerian polynomial with
    ``sum_n n^k q^n = q A_k(q) / (1-q)^(k+1)`` (``k >= 1``)."""
    return tuple(
        sum((-1) ** j * comb(k + 1, j) * (i + 1 - j) ** k for j in range(i + 2))
        for i in range(k)
    )


def power_sum(k: int, q: float) -> float:
    """``sum_{n>=0} n^k q^n`` in closed form."""
    if k == 0:
        return 1.0 / (1.0 - q)
    a = np.polynomial.polynomial.polyval(q, _eulerian(k))
    return q * a / (1.0 - q) ** (k + 1)


@dataclass(frozen=True)
class TrialEnsemble:
    """Weights ``N g_n q^n``; ``moments[k] = <n^k>``."""

    q: float
    degeneracy: Degeneracy
    norm: float
    moments: tuple

    @property
    def nbar(self):
        return self.moments[1]

    @property
    def n2bar(self):
        return self.moments[2]

    @property
    def log_q(self):
        return np.log(self.q)

    @property
    def variance(self):
        return self.moments[2] - self.moments[1] ** 2


def trial_moments(q: float, degeneracy: Degeneracy = "uniform", order: int = 2,
                  tol: float = SERIES_TOL) -> TrialEnsemble:
    """Normalisation and number moments ``<n^k>``, ``k <= order``.

    Closed forms for ``g_n = 1`` and ``g_n = 2n + 1``; any other degeneracy
    is summed as a series.
    """
    if not 0 < q < 1:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    if q >= Q_CEILING:
        raise SeriesOverflow(f"q = {q} too close to 1")
    if degeneracy == "uniform":
        s = [power_sum(k, q) for k in range(order + 1)]
    elif degeneracy == "rotational":
        s = [2 * power_sum(k + 1, q) + power_sum(k, q) for k in range(order + 1)]
    else:
        def terms(n):
            w = degeneracy_values(degeneracy, n) * q ** n.astype(float)
            nf = n.astype(float)
            return np.vstack([w * nf**k for k in range(order + 1)])

        s = list(sum_series(terms, tol).value)
    norm = 1.0 / s[0]
    return TrialEnsemble(q, degeneracy, norm, tuple([1.0] + [norm * v for v in s[1:]]))


# --- spectral moments --------------------------------------------------------


@dataclass(frozen=True)
class SpectrumMoments:
    mean_energy: float
    mean_energy_sq: float
    mean_energy_n: float

    @property
    def energy_variance(self):
        return self.mean_energy_sq - self.mean_energy**2


def spectral_moments(spectrum: SpectrumSource, ensemble: TrialEnsemble,
                     tol: float = SERIES_TOL) -> SpectrumMoments:
    """``<E>``, ``<E^2>`` and ``<E n>`` under the trial weights.

    Polynomial spectra use exact number moments; otherwise the three series
    are summed with a tail bound.
    """
    if spectrum.poly is not None:
        c = np.asarray(spectrum.poly)
        deg = len(c) - 1
        need = 2 * deg
        ens = ensemble
        if len(ens.moments) <= need:
            ens = trial_moments(ensemble.q, ensemble.degeneracy, max(need, 2), tol)
        m = np.asarray(ens.moments)
        c2 = np.polynomial.polynomial.polymul(c, c)
        mean = float(np.dot(c, m[: deg + 1]))
        mean_sq = float(np.dot(c2, m[: len(c2)]))
        mean_n = float(np.dot(c, m[1 : deg + 2]))
        return SpectrumMoments(mean, mean_sq, mean_n)

    q = ensemble.q

    def terms(n):
        w = spectrum.g(n) * q ** n.astype(float)
        e = spectrum(n)
        return np.vstack([w, w * e, w * e * e, w * e * n])

    s = sum_series(terms, tol, n_max=spectrum.n_max).value
    return SpectrumMoments(s[1] / s[0], s[2] / s[0], s[3] / s[0])


# --- cumulants ------------------------------------------------------------------


@dataclass
class CumulantEstimate:
    """Zeroth-order value ``z0 = exp(phi)`` and first correction ``z1 = exp(phi1)``.

    ``phi_levels`` carries ``-beta <dE>`` when level corrections are folded
    into the first-order estimate (oscillator path); it is zero otherwise.
    """

    beta: float
    phi: float
    phi1: float
    q_star: float
    omega_star: float | None = None
    phi_levels: float = 0.0
    mean_energy: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def z0(self):
        return float(np.exp(self.phi))

    @property
    def z1(self):
        return float(np.exp(self.phi1))

    def log_z(self, order: int = 0):
        if order == 0:
            return self.phi
        return self.phi + self.phi1 + self.phi_levels

    def free_energy(self, order: int = 0):
        return -self.log_z(order) / self.beta


def cumulants_z0_z1(beta: float, ensemble: TrialEnsemble, moments: SpectrumMoments) -> CumulantEstimate:
    """First two cumulants of ``A(n) = -beta E_n + 2 beta* n`` (plus ``-ln N``).

    ``phi = -beta <E> + 2 beta* <n> - ln N`` and
    ``phi1 = (beta^2 var E - 4 beta beta* cov(E, n) + 4 beta*^2 var n) / 2``
    with ``2 beta* = -ln q``.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    two_bs = -np.log(ensemble.q)
    nbar = ensemble.nbar
    phi = -beta * moments.mean_energy + two_bs * nbar - np.log(ensemble.norm)
    cov = moments.mean_energy_n - moments.mean_energy * nbar
    phi1 = 0.5 * (
        beta**2 * moments.energy_variance
        - 2 * beta * two_bs * cov
        + two_bs**2 * ensemble.variance
    )
    return CumulantEstimate(beta, float(phi), float(phi1), ensemble.q,
                            mean_energy=moments.mean_energy)


def cumulants_direct(a_values, weights, count: int = 3):
    """``K1..K_count`` of the values ``a_values`` under (unnormalised) ``weights``."""
    a = np.asarray(a_values, dtype=float)
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    mean = np.dot(w, a)
    d = a - mean
    k2 = np.dot(w, d * d)
    k3 = np.dot(w, d**3)
    return (mean, k2, k3)[:count]


def stationarity_residual(beta: float, spectrum: SpectrumSource, q: float,
                          tol: float = SERIES_TOL) -> float:
    """``q dphi/dq = -beta cov(E, n) - ln q var(n)``; zero at a stationary ``q``."""
    ens = trial_moments(q, spectrum.degeneracy, 2, tol)
    mom = spectral_moments(spectrum, ens, tol)
    cov = mom.mean_energy_n - mom.mean_energy * ens.nbar
    return float(-beta * cov - np.log(q) * ens.variance)


def phi_of_q(beta: float, spectrum: SpectrumSource, q: float, tol: float = SERIES_TOL) -> float:
    ens = trial_moments(q, spectrum.degeneracy, 2, tol)
    mom = spectral_moments(spectrum, ens, tol)
    return cumulants_z0_z1(beta, ens, mom).phi


def generic_q_condition(beta: float, spectrum: SpectrumSource, scan: int = 400,
                        tol: float = SERIES_TOL, strict: bool = False) -> float:
    """Stationary trial parameter ``q*`` for an arbitrary spectrum.

    Scans ``t = -ln q`` on a log grid, brackets every sign change of
    ``dphi/dq`` and refines each by bisection. When several stationary points
    exist the one with the largest ``phi`` is returned (and a warning is
    logged, or :class:`MultipleStationaryPoints` raised if ``strict``).
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    ts = np.logspace(-6, np.log10(700.0), scan)
    qs = np.exp(-ts)
    qs = qs[(qs > 0) & (qs < Q_CEILING)]

    def g(q):
        return stationarity_residual(beta, spectrum, q, tol)

    vals = np.array([g(q) for q in qs])
    roots = []
    for i in range(len(qs) - 1):
        a, b = vals[i], vals[i + 1]
        if a == 0.0:
            roots.append(qs[i])
        elif a * b < 0:
            lo, hi = sorted((qs[i], qs[i + 1]))
            roots.append(bisect(g, lo, hi, xtol=1e-300, rtol=1e-15, maxiter=400))
    if not roots:
        raise NoStationaryPoint(f"dphi/dq has no sign change for beta={beta}")
    if len(roots) > 1:
        msg = f"{len(roots)} stationary points for beta={beta}: {roots}"
        if strict:
            raise MultipleStationaryPoints(msg)
        log.warning("%s; keeping the one with largest phi", msg)
        return max(roots, key=lambda q: phi_of_q(beta, spectrum, q, tol))
    return float(roots[0])


# --- oscillator specialisation ------------------------------------------------


def _coth_half(t):
    # coth(t/2) = (1+q)/(1-q) with q = e^-t, stable for small t
    return -(2.0 - (-np.expm1(-t))) / np.expm1(-t)


def _omega_of_t(lam, mu, t):
    return solve_depressed_cubic(1 + 2 * mu, 6.0 * lam * _coth_half(t))


def _beta_of_t(lam, mu, t):
    s = 1 + 2 * mu
    w = _omega_of_t(lam, mu, t)
    return t / ((w * w + s) / (2 * w) + 3 * lam * _coth_half(t) / w**2), w


def qao_phi(beta, q, omega, lam, mu=0.0):
    """Zeroth-order exponent for ``g_n = 1`` with one common frequency ``omega``."""
    s = 1 + 2 * mu
    nbar = q / (1 - q)
    n2bar = (q + q * q) / (1 - q) ** 2
    mean_e = (omega**2 + s) * (2 * nbar + 1) / (4 * omega) + 3 * lam * (1 + 2 * nbar + 2 * n2bar) / (4 * omega**2)
    return -beta * mean_e - np.log(q) * nbar - np.log1p(-q), mean_e


def qao_stationary_parametric(lam: float, mu: float, q: float):
    """``(omega, beta, phi)`` at which ``q`` is the stationary trial parameter.

    ``omega`` solves ``w^3 - w(1 + 2 mu) - 6 lam (1+q)/(1-q) = 0`` and
    ``beta = -ln q / [(w^2 + 1 + 2 mu)/(2 w) + 3 lam (1+q)/(w^2 (1-q))]``.
    """
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    t = -np.log(q)
    beta, w = _beta_of_t(lam, mu, t)
    phi, _ = qao_phi(beta, q, w, lam, mu)
    return float(w), float(beta), float(phi)


def _solve_t(lam, mu, beta, root_tol=ROOT_TOL):
    t_lo, t_hi = 1e-12, 745.0
    grid = np.logspace(np.log10(t_lo), np.log10(t_hi), 200)
    b_grid, _ = _beta_of_t(lam, mu, grid)
    if not np.all(np.diff(b_grid) > 0):
        raise BracketFailure(f"beta(q) not monotone for lam={lam}, mu={mu}")
    if not b_grid[0] < beta < b_grid[-1]:
        raise BracketFailure(
            f"beta={beta} outside reachable range [{b_grid[0]:.3g}, {b_grid[-1]:.3g}]"
        )
    i = int(np.searchsorted(b_grid, beta))
    lo, hi = grid[i - 1], grid[i]
    return bisect(lambda t: _beta_of_t(lam, mu, t)[0] - beta, lo, hi,
                  xtol=1e-300, rtol=root_tol, maxiter=400)


def qao_z0c(beta: float, lam: float, mu: float = 0.0, with_levels: bool = True,
            series_tol: float = SERIES_TOL, root_tol: float = ROOT_TOL) -> CumulantEstimate:
    """Zeroth and first order cumulant estimates for the oscillator.

    ``q*`` and ``omega*`` are fixed once, by the zeroth order; the first-order
    exponent reuses them: ``phi1`` is half the second cumulant of the
    fixed-frequency spectrum and ``phi_levels = -beta <dE2>`` adds the
    second-iteration level corrections at ``omega*``.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    params = QaoParams(lam, mu)
    if lam == 0:
        w = np.sqrt(params.stiffness)
        t = beta * w
    else:
        t = _solve_t(lam, mu, beta, root_tol)
        w = float(_omega_of_t(lam, mu, t))
    q = float(np.exp(-t))
    spec = fixed_omega_spectrum(params, w)
    ens = trial_moments(q, "uniform", 4, series_tol)
    mom = spectral_moments(spec, ens, series_tol)
    est = cumulants_z0_z1(beta, ens, mom)
    est.omega_star = w
    if with_levels and lam > 0:
        def terms(n):
            return np.vstack([q ** n.astype(float),
                              q ** n.astype(float) * delta_e2_full(params, n, w)])
        s = sum_series(terms, series_tol).value
        est.phi_levels = float(-beta * s[1] / s[0])
    return est


def average_energy_ce(beta: float, lam: float, mu: float = 0.0) -> float:
    """``-d ln Z0 / d beta``; at the stationary point this is ``<E>(q*, omega*)``."""
    return qao_z0c(beta, lam, mu, with_levels=False).mean_energy
