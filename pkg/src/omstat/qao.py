"""Quantum anharmonic oscillator ``H = (p^2 + x^2)/2 + mu x^2 + lam x^4``.

Closed-form operator-method results: the per-level basis frequency, the
zeroth-order levels, the second and third iteration corrections, the
strong-coupling coefficients, and the matrix elements in the harmonic basis
of frequency ``omega`` (``x = (a + a^+)/sqrt(2 omega)``).

Everything here is vectorised over the level index ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .om import MatrixElementProvider, OmLevel
from .spectrum import SpectrumSource


@dataclass(frozen=True)
class QaoParams:
    lam: float = 0.0
    mu: float = 0.0

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if not 1 + 2 * self.mu > 0:
            raise ValueError(f"need 1 + 2 mu > 0, got mu={self.mu}")

    @property
    def stiffness(self) -> float:
        """``1 + 2 mu``, the squared harmonic frequency."""
        return 1.0 + 2.0 * self.mu


@dataclass(frozen=True)
class StrongCouplingCoeff:
    n: int
    b_n: float


def _level_sums(n):
    n = np.asarray(n, dtype=float)
    return 2 * n + 1, 2 * n * n + 2 * n + 1


def solve_depressed_cubic(p, c):
    """Positive root of ``w**3 - p w - c = 0`` for ``p > 0``, ``c >= 0``.

    Cardano / trigonometric closed form followed by one Newton step, which
    removes the rounding left by the branch formulas.
    """
    p, c = np.broadcast_arrays(np.asarray(p, dtype=float), np.asarray(c, dtype=float))
    disc = (c / 2) ** 2 - (p / 3) ** 3
    out = np.empty(p.shape)

    one = disc >= 0
    if np.any(one):
        cc, pp, dd = c[one], p[one], disc[one]
        u = np.cbrt(cc / 2 + np.sqrt(dd))
        # w = u + p/(3u) avoids the cancellation in cbrt(c/2 - sqrt(disc))
        out[one] = u + pp / (3 * u)
    three = ~one
    if np.any(three):
        cc, pp = c[three], p[three]
        r = np.sqrt(pp / 3)
        arg = np.clip(cc / (2 * r**3), -1.0, 1.0)
        out[three] = 2 * r * np.cos(np.arccos(arg) / 3)

    f = out**3 - p * out - c
    fp = 3 * out**2 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        step = np.where(fp != 0, f / fp, 0.0)
    return out - step


def omega_n(params: QaoParams, n):
    """Optimal basis frequency of level ``n``: positive root of
    ``w^3 - w(1 + 2 mu) - 6 lam (2n^2 + 2n + 1)/(2n + 1) = 0``."""
    s1, s2 = _level_sums(n)
    w = solve_depressed_cubic(params.stiffness, 6.0 * params.lam * s2 / s1)
    return w if np.ndim(n) else float(w)


def diagonal_energy(params: QaoParams, n, omega):
    """``H_nn(omega)``: the zeroth-order energy at an arbitrary frequency."""
    s1, s2 = _level_sums(n)
    omega = np.asarray(omega, dtype=float)
    return (omega**2 + params.stiffness) * s1 / (4 * omega) + 3 * params.lam * s2 / (4 * omega**2)


def energy0(params: QaoParams, n):
    """Zeroth-order operator-method level ``E_n^(0) = H_nn(omega_n)``."""
    e = diagonal_energy(params, n, omega_n(params, n))
    return e if np.ndim(n) else float(e)


def corrections(params: QaoParams, n, omega):
    """Second and third iteration corrections ``(dE2, dE3)`` at frequency ``omega``.

    These are the standard closed forms built from the couplings of level
    ``n`` to ``n + 2`` and ``n + 4`` only. For ``n >= 2`` the couplings to
    ``n - 2`` and ``n - 4`` are not included; :func:`delta_e2_full` adds
    them for ``dE2``.
    """
    n = np.asarray(n, dtype=float)
    w = np.asarray(omega, dtype=float)
    lam, s = params.lam, params.stiffness
    p = (n + 1) * (n + 2)
    q = (n + 3) * (n + 4)
    up2 = w * (s - w * w) + 2 * lam * (2 * n + 3)
    d2 = w * (w * w + s) + 3 * lam * (3 + 2 * n)
    d4 = w * (w * w + s) + 3 * lam * (5 + 2 * n)

    de2 = -p * up2**2 / (16 * w**2 * d2) - lam**2 * p * q / (32 * w**2 * d4)

    p32 = p**1.5
    de3 = -(1.0 / (256 * w**2)) * (
        4 * p32 * up2**3 / d2**2
        + 2 * lam * p32 * np.sqrt(q) * up2**2 / (d2 * d4)
        + 2 * lam**2 * q * p32 * up2 / (d2 * d4)
        + lam**3 * (p * q) ** 1.5 / d4**2
    )
    if np.ndim(de2) == 0:
        return float(de2), float(de3)
    return de2, de3


def delta_e2_full(params: QaoParams, n, omega):
    """Second-order correction including the downward couplings ``n-2``, ``n-4``.

    Equals ``om_second_order(qao_provider(params), n, omega) - H_nn`` for
    every ``n``; coincides with ``corrections(...)[0]`` for ``n < 2``.
    """
    n = np.asarray(n, dtype=float)
    w = np.asarray(omega, dtype=float)
    lam, s = params.lam, params.stiffness

    def up_terms(k):
        up2 = w * (s - w * w) + 2 * lam * (2 * k + 3)
        d2 = w * (w * w + s) + 3 * lam * (3 + 2 * k)
        d4 = w * (w * w + s) + 3 * lam * (5 + 2 * k)
        t2 = -(k + 1) * (k + 2) * up2**2 / (16 * w**2 * d2)
        t4 = -(lam**2) * (k + 1) * (k + 2) * (k + 3) * (k + 4) / (32 * w**2 * d4)
        return t2, t4

    t2, t4 = up_terms(n)
    # the coupling of n to n-2 is the upward coupling of n-2, with the
    # energy denominator reversed
    b2, _ = up_terms(n - 2)
    _, b4 = up_terms(n - 4)
    out = t2 + t4 - np.where(n >= 2, b2, 0.0) - np.where(n >= 4, b4, 0.0)
    return float(out) if out.ndim == 0 else out


def om_level(params: QaoParams, n: int) -> OmLevel:
    w = omega_n(params, n)
    de2, de3 = corrections(params, n, w)
    return OmLevel(int(n), w, float(diagonal_energy(params, n, w)), de2, de3)


def energies(params: QaoParams, n, order: int = 0, downward: bool = False):
    """Operator-method levels of the given order (0, 2 or 3) at ``omega_n``.

    With ``downward`` the second-order level includes the couplings to
    ``n - 2`` and ``n - 4`` (:func:`delta_e2_full`). Without them ``E^(2)``
    falls without bound as ``n`` grows, so any Boltzmann sum over all levels
    needs ``downward=True``.
    """
    w = omega_n(params, n)
    e = diagonal_energy(params, n, w)
    if order == 0:
        return e
    if order == 2 and downward:
        return e + delta_e2_full(params, n, w)
    de2, de3 = corrections(params, n, w)
    if order == 2:
        return e + de2
    if order == 3:
        return e + de2 + de3
    raise ValueError("order must be 0, 2 or 3")


def strong_coupling_bn(n) -> StrongCouplingCoeff | np.ndarray:
    """``b_n`` in ``E_n ~ lam^(1/3) b_n`` from the zeroth-order levels.

    As ``lam -> inf``, ``omega_n^3 -> 6 lam s2/s1`` and ``E_n -> 3 omega_n s1/8``
    with ``s1 = 2n+1``, ``s2 = 2n^2+2n+1``, so
    ``b_n = (3/4)^(4/3) (s1^2 s2)^(1/3)``.
    """
    s1, s2 = _level_sums(n)
    b = 0.75 ** (4.0 / 3.0) * np.cbrt(s2 * s1**2)
    if np.ndim(n):
        return b
    return StrongCouplingCoeff(int(n), float(b))


# --- spectra ---------------------------------------------------------------


def om_spectrum(params: QaoParams, order: int = 0, downward: bool = False) -> SpectrumSource:
    return SpectrumSource(lambda n: energies(params, n, order, downward), "uniform", f"om{order}")


def fixed_omega_spectrum(params: QaoParams, omega: float) -> SpectrumSource:
    """``H_nn(omega)`` at one common frequency, as a polynomial in ``n``."""
    s = params.stiffness
    a = (omega**2 + s) / (4 * omega)
    b = 3 * params.lam / (4 * omega**2)
    # a(2n + 1) + b(2n^2 + 2n + 1)
    coeffs = (a + b, 2 * a + 2 * b, 2 * b)
    return SpectrumSource(
        lambda n: diagonal_energy(params, n, omega), "uniform", "om0-fixed", poly=coeffs
    )


def strong_coupling_spectrum(params: QaoParams) -> SpectrumSource:
    c = np.cbrt(params.lam)
    return SpectrumSource(lambda n: c * strong_coupling_bn(np.asarray(n)), "uniform", "strong")


def cpt2_energies(params: QaoParams, n):
    """Rayleigh-Schroedinger second-order levels about the ``mu = lam = 0``
    oscillator (vectorised form of :func:`omstat.om.rs_pt2_energy`)."""
    n = np.asarray(n, dtype=float)
    prov = QaoProvider(params)
    e0 = n + 0.5
    v = diagonal_energy(params, n, 1.0) - e0
    total = e0 + v
    for off in (2, 4):
        up = prov.offdiag(n, off, 1.0)
        down = np.where(n >= off, prov.offdiag(np.maximum(n - off, 0), off, 1.0), 0.0)
        total = total - up**2 / off + down**2 / off
    return total


def cpt_rising_count(params: QaoParams, cap: int = 100_000) -> int | None:
    """Number of leading levels over which the perturbative spectrum rises.

    For ``lam > 0`` the second-order levels peak and then fall without bound;
    ``None`` means no turnover below ``cap``.
    """
    e = cpt2_energies(params, np.arange(cap))
    falls = np.nonzero(np.diff(e) <= 0)[0]
    return int(falls[0]) + 1 if len(falls) else None


def cpt_spectrum(params: QaoParams) -> SpectrumSource:
    return SpectrumSource(lambda n: cpt2_energies(params, n), "uniform", "cpt")


# --- matrix elements ---------------------------------------------------------


class QaoProvider(MatrixElementProvider):
    """Matrix elements of the oscillator in the harmonic basis of frequency ``omega``.

    Nonzero elements sit at offsets 0, +-2 and +-4.
    """

    band = 4
    parity_step = 2

    def __init__(self, params: QaoParams):
        self.params = params

    def offdiag(self, n, offset, omega):
        """``H_{n, n+offset}`` for ``offset`` in (2, 4)."""
        n = np.asarray(n, dtype=float)
        lam, s = self.params.lam, self.params.stiffness
        if offset == 2:
            amp = np.sqrt((n + 1) * (n + 2))
            return amp * (omega * (s - omega**2) + 2 * lam * (2 * n + 3)) / (4 * omega**2)
        if offset == 4:
            amp = np.sqrt((n + 1) * (n + 2) * (n + 3) * (n + 4))
            return lam * amp / (4 * omega**2)
        raise ValueError("offset must be 2 or 4")

    def evaluate(self, n, k, omega):
        lo, d = min(n, k), abs(n - k)
        if d == 0:
            return float(diagonal_energy(self.params, n, omega))
        if d in (2, 4):
            return float(self.offdiag(lo, d, omega))
        return 0.0

    def diagonal(self, n, omega):
        return diagonal_energy(self.params, np.atleast_1d(n), omega)

    def diagonal_derivative(self, n, omega):
        s1, s2 = _level_sums(np.atleast_1d(n))
        s = self.params.stiffness
        return s1 * (1 - s / omega**2) / 4 - 3 * self.params.lam * s2 / (2 * omega**3)

    def bands(self, size, omega):
        """``(diag, off2, off4)`` arrays for the leading ``size`` states."""
        n = np.arange(size)
        return (
            diagonal_energy(self.params, n, omega),
            self.offdiag(n[:-2], 2, omega),
            self.offdiag(n[:-4], 4, omega),
        )

    def matrix(self, size, omega):
        d, o2, o4 = self.bands(size, omega)
        diags, offs = [d], [0]
        if size > 2:
            diags += [o2, o2]
            offs += [2, -2]
        if size > 4:
            diags += [o4, o4]
            offs += [4, -4]
        return sp.diags(diags, offs, shape=(size, size), format="csr")


def qao_provider(params: QaoParams) -> QaoProvider:
    return QaoProvider(params)
