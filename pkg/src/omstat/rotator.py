"""Quantum rotator: ``Z(x) = sum_n (2n+1) exp(-x n(n+1))`` with ``x = beta theta_r``.

Direct summation, the zeroth-order cumulant estimate in parametric form
(``x`` and ``phi`` both as functions of the trial parameter ``q``), its
first correction, and the small/large ``x`` asymptotics.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import bisect

from .cumulant import cumulants_z0_z1, spectral_moments, trial_moments
from .errors import BracketFailure, SlowConvergence
from .series import sum_series
from .spectrum import rotator_spectrum

log = logging.getLogger(__name__)

X_FLOOR = 1e-8
ROOT_TOL = 1e-15
T_MIN, T_MAX = 1e-12, 700.0


@dataclass(frozen=True)
class RotatorPoint:
    x: float
    q: float
    z0: float
    z1_factor: float
    z_exact: float

    @property
    def free_energies(self):
        """``(F_exact, F_ce0, F_ce1)`` in units of the rotational temperature."""
        return (
            -np.log(self.z_exact) / self.x,
            -np.log(self.z0) / self.x,
            -np.log(self.z0 * self.z1_factor) / self.x,
        )


def rotator_partition_direct(x: float, tol: float = 1e-15) -> float:
    if not x > 0:
        raise ValueError("x must be positive")
    if x < X_FLOOR:
        raise SlowConvergence(f"x={x} below {X_FLOOR:g}; direct sum would need > 1e7 terms")

    def terms(n):
        nf = n.astype(float)
        return (2 * nf + 1) * np.exp(-x * nf * (nf + 1))

    return float(sum_series(terms, tol, chunk=max(64, int(4 / np.sqrt(x)))).value[0])


def rotator_high_t(x):
    """Euler-Maclaurin estimate ``1/x + 1/3 + x/12`` for ``x << 1``."""
    return 1.0 / x + 1.0 / 3.0 + x / 12.0


def rotator_low_t(x):
    """``1 + 3 exp(-2x)`` for ``x >> 1``."""
    return 1.0 + 3.0 * np.exp(-2.0 * x)


def rotator_trial_moments(q):
    """``(N, <n>, <n^2>)`` for weights ``(2n+1) q^n``."""
    n_ = (1 - q) ** 2 / (1 + q)
    nbar = q * (3 + q) / (1 - q * q)
    n2bar = q * (3 + 8 * q + q * q) / ((1 + q) * (1 - q) ** 2)
    return n_, nbar, n2bar


def _x_of_t(t):
    # q = e^-t; 1 - q = -expm1(-t) keeps precision as q -> 1
    q = np.exp(-t)
    omq = -np.expm1(-t)
    return (3 + 2 * q + 3 * q * q) * omq * t / (6 * (1 + q) ** 3)


def rotator_x_of_q(q):
    """Value of ``x`` at which ``q`` makes ``phi(x, q)`` stationary."""
    return _x_of_t(-np.log(q))


def rotator_phi(x, q):
    """Zeroth-order exponent ``ln Z0(x, q)``."""
    lq = np.log(q)
    return (-6 * x * q / (1 - q) ** 2
            - (3 * q + q * q) / (1 - q * q) * lq
            - np.log((1 - q) ** 2 / (1 + q)))


def rotator_phi_stationary(q):
    """``phi(x(q), q)`` simplified; used only as a cross-check of
    :func:`rotator_phi` evaluated at :func:`rotator_x_of_q`."""
    lq = np.log(q)
    return (-q * q * (5 + 2 * q + q * q) * lq / ((1 - q) * (1 + q) ** 3)
            - np.log((1 - q) ** 2 / (1 + q)))


@lru_cache(maxsize=1)
def _assert_monotone():
    t = np.logspace(np.log10(T_MIN), np.log10(T_MAX), 10_000)
    x = _x_of_t(t)
    if not np.all(np.diff(x) > 0):
        raise BracketFailure("x(q) is not strictly decreasing in q on the check grid")
    return True


def rotator_q_of_x(x: float, root_tol: float = ROOT_TOL) -> float:
    """Invert ``x(q)`` by bisection in ``t = -ln q`` (``x`` increases with ``t``)."""
    if not x > 0:
        raise ValueError("x must be positive")
    _assert_monotone()
    lo, hi = T_MIN, T_MAX
    if not _x_of_t(lo) < x < _x_of_t(hi):
        raise BracketFailure(f"x={x} outside the invertible range")
    t = bisect(lambda t: _x_of_t(t) - x, lo, hi, xtol=1e-300, rtol=root_tol, maxiter=500)
    return float(np.exp(-t))


def rotator_z0(x: float, root_tol: float = ROOT_TOL):
    """Zeroth-order estimate ``(z0, q*)``."""
    q = rotator_q_of_x(x, root_tol)
    return float(np.exp(rotator_phi(x, q))), q


def rotator_phi1(q):
    """First-correction exponent at the stationary point, closed form."""
    lq = np.log(q)
    num = 15 + 4 * q + 26 * q**2 + 4 * q**3 + 15 * q**4
    return q * q / 6 * num / ((1 - q) ** 2 * (1 + q) ** 6) * lq * lq


def rotator_phi1_moments(q: float) -> float:
    """Half the second cumulant of ``-x n(n+1) - n ln q`` at ``x = x(q)``,
    from the number moments of the ``(2n+1) q^n`` ensemble."""
    x = float(rotator_x_of_q(q))
    ens = trial_moments(q, "rotational", 4)
    mom = spectral_moments(rotator_spectrum(), ens)
    return cumulants_z0_z1(x, ens, mom).phi1


def rotator_z1_factor(q: float, check: bool = True) -> float:
    """``exp(phi1)`` at a stationary ``q``.

    The closed form is checked against the moment evaluation; if they
    disagree by more than 1e-8 the moment value is used and a warning logged.
    """
    phi1 = float(rotator_phi1(q))
    if check:
        ref = rotator_phi1_moments(q)
        if abs(phi1 - ref) > 1e-8 * max(1.0, abs(ref)):
            log.warning("closed-form phi1=%r disagrees with moment value %r at q=%r",
                        phi1, ref, q)
            phi1 = ref
    return float(np.exp(phi1))


def rotator_point(x: float) -> RotatorPoint:
    z0, q = rotator_z0(x)
    return RotatorPoint(x, q, z0, rotator_z1_factor(q), rotator_partition_direct(x))
