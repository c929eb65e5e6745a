"""Operator-method eigenvalue engine and perturbation-theory baselines.

The engine works on any Hamiltonian whose matrix elements in a
frequency-dependent basis ``|n, omega>`` are supplied by a
:class:`MatrixElementProvider`. For level ``n`` the exact eigenvector is
written ``|n> + sum_{k != n} C_k |k>`` and the eigenproblem becomes the
fixed point

    E   = H_nn + sum_{k != n} C_k H_nk
    C_m = -(H_mn + sum_{k != m, n} C_k H_mk) / (H_mm - E)

which :func:`om_iterate` solves by successive substitution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq
from scipy.sparse.linalg import spsolve_triangular

from .errors import (
    DegenerateDiagonal,
    NonConvergence,
    NoStationaryPoint,
    TruncationInsufficient,
)

GAP_FLOOR = 1e-8


class MatrixElementProvider:
    """Real symmetric banded matrix elements ``H_nk(omega)``.

    Subclasses implement :meth:`evaluate`; :meth:`matrix` has a generic
    (slow) default that subclasses with closed-form bands should override.
    ``diagonal_derivative`` may be overridden to give ``dH_nn/domega``
    analytically; otherwise ``None`` is returned and callers fall back to
    central differences.
    """

    band: int = 0
    parity_step: int = 1

    def evaluate(self, n: int, k: int, omega: float) -> float:
        raise NotImplementedError

    def diagonal(self, n, omega):
        n = np.atleast_1d(n)
        return np.array([self.evaluate(int(i), int(i), omega) for i in n])

    def diagonal_derivative(self, n, omega):
        return None

    def matrix(self, size: int, omega: float) -> sp.csr_matrix:
        rows, cols, vals = [], [], []
        for i in range(size):
            for j in range(max(0, i - self.band), min(size, i + self.band + 1)):
                if (j - i) % self.parity_step:
                    continue
                v = self.evaluate(i, j, omega)
                if v != 0.0:
                    rows.append(i)
                    cols.append(j)
                    vals.append(v)
        return sp.csr_matrix((vals, (rows, cols)), shape=(size, size))


@dataclass
class IterationState:
    """Result of :func:`om_iterate`.

    ``energies[s]`` is ``E_n^(s)`` for ``s = 0..self.s`` (entries 0 and 1
    both equal ``H_nn``). ``coefficients`` maps ``k -> C_nk`` for the
    nonzero off-diagonal amplitudes of the last iterate.
    """

    n: int
    omega: float
    s: int
    energies: list
    coefficients: dict = field(default_factory=dict)
    truncation: int = 0
    converged: bool = False

    @property
    def energy(self) -> float:
        return self.energies[-1]


@dataclass(frozen=True)
class OmLevel:
    n: int
    omega: float
    e0: float
    de2: float
    de3: float

    @property
    def e2(self):
        return self.e0 + self.de2

    @property
    def e3(self):
        return self.e0 + self.de2 + self.de3


def _check_gaps(diag: np.ndarray, n: int, gap_floor: float) -> None:
    gaps = np.abs(diag - diag[n])
    gaps[n] = np.inf
    k = int(np.argmin(gaps))
    if gaps[k] <= gap_floor:
        raise DegenerateDiagonal(
            f"|H_kk - H_nn| = {gaps[k]:.3e} <= {gap_floor:g} for k={k}, n={n}"
        )


def om_iterate(
    provider: MatrixElementProvider,
    n: int,
    omega: float,
    s_max: int = 200,
    k_trunc: int | None = None,
    tol: float = 1e-12,
    scheme: str = "jacobi",
    gap_floor: float = GAP_FLOOR,
) -> IterationState:
    """Iterate the operator-method recurrences for level ``n`` at fixed ``omega``.

    Parameters
    ----------
    provider : MatrixElementProvider
    n : int
        Level index.
    omega : float
        Basis frequency, must be positive.
    s_max : int
        Highest iteration computed.
    k_trunc : int, optional
        Largest basis index kept. Defaults to ``n + s_max * band``, the
        furthest state the recurrence can reach in ``s_max`` steps.
    tol : float
        Relative tolerance on successive energies (and on the amplitude
        update, so that an accidental equality ``E^(s) = E^(s-1)`` does not
        stop the loop).
    scheme : {"jacobi", "gauss-seidel"}
        ``"jacobi"`` is the plain recurrence: iterate ``s`` uses only
        amplitudes and energy from iterate ``s-1``; it reproduces the
        familiar second-order formula at ``s = 2``. ``"gauss-seidel"``
        sweeps ``m`` upward and reuses amplitudes already updated in the
        current sweep. Both share the exact eigenpair as fixed point, but
        the Jacobi iteration can diverge at strong coupling.

    Raises
    ------
    DegenerateDiagonal
        If some ``|H_kk - H_nn| <= gap_floor``.
    NonConvergence
        If ``s_max >= 4`` is reached while the iterates are not contracting.
    """
    if omega <= 0:
        raise ValueError("omega must be positive")
    if k_trunc is None:
        k_trunc = n + s_max * max(provider.band, 1)
    if k_trunc < n:
        raise ValueError("k_trunc must be >= n")
    size = k_trunc + 1
    H = provider.matrix(size, omega).tocsr()
    diag = H.diagonal().copy()
    _check_gaps(diag, n, gap_floor)

    off = (H - sp.diags(diag)).tocsr()
    h_col = np.asarray(H[:, [n]].todense()).ravel()
    h_col[n] = 0.0
    h_row = h_col  # symmetric
    hnn = diag[n]

    if scheme == "gauss-seidel":
        mask = np.ones(size)
        mask[n] = 0.0
        lower = sp.tril(off, k=-1, format="csr")
        upper = sp.triu(off, k=1, format="csr")
        # row and column n drop out: C_n is pinned to zero
        keep = sp.diags(mask)
        lower = (keep @ lower @ keep).tocsr()
        upper = (keep @ upper @ keep).tocsr()
    elif scheme != "jacobi":
        raise ValueError(f"unknown scheme {scheme!r}")

    # C^(1) from C^(0) = 0 and E^(0) = H_nn; shared by both schemes so that
    # E^(2) is always the second-order result
    denom0 = diag - hnn
    denom0[n] = 1.0
    c = -h_col / denom0
    c[n] = 0.0
    energies = [hnn, hnn]
    e_prev = hnn
    converged = False
    s = 1
    deltas = []
    while s < s_max:
        s += 1
        # E^(s) uses C^(s-1); C^(s) uses E^(s-1) and C^(s-1)
        e_new = hnn + h_row @ c
        denom = diag - e_prev
        denom[n] = 1.0
        if scheme == "jacobi":
            c_new = -(h_col + off @ c) / denom
            c_new[n] = 0.0
        else:
            lhs = (sp.diags(np.where(np.arange(size) == n, 1.0, denom)) + lower).tocsr()
            rhs = -(h_col + upper @ c)
            rhs[n] = 0.0
            c_new = spsolve_triangular(lhs, rhs, lower=True)
        if not (np.isfinite(e_new) and np.all(np.isfinite(c_new))):
            raise NonConvergence(
                f"iterates became non-finite at s={s}", energies[-1], energies[-2]
            )
        de = abs(e_new - energies[-1])
        dc = np.max(np.abs(c_new - c)) if size > 1 else 0.0
        deltas.append(de)
        energies.append(e_new)
        c, e_prev = c_new, e_new
        if s >= 3 and de <= tol * abs(e_new) and dc <= tol * max(1.0, np.max(np.abs(c))):
            converged = True
            break

    if not converged and s_max >= 4 and len(deltas) >= 2 and deltas[-1] >= deltas[-2] > 0:
        raise NonConvergence(
            f"iterates not contracting after s={s}: "
            f"E^(s)={energies[-1]!r}, E^(s-1)={energies[-2]!r}",
            energies[-1],
            energies[-2],
        )
    coeffs = {int(k): float(c[k]) for k in np.flatnonzero(c)}
    return IterationState(n, omega, s, energies, coeffs, k_trunc, converged)


def om_second_order(
    provider: MatrixElementProvider,
    n: int,
    omega: float,
    k_trunc: int | None = None,
    gap_floor: float = GAP_FLOOR,
) -> float:
    """``H_nn - sum_{m != n} H_nm H_mn / (H_mm - H_nn)``.

    Only states within one band of ``n`` (and of matching parity) couple, so
    the sum is finite and exact.
    """
    band = max(provider.band, 1)
    if k_trunc is None:
        k_trunc = n + band
    lo = max(0, n - band)
    hnn = provider.evaluate(n, n, omega)
    ms = [m for m in range(lo, min(k_trunc, n + band) + 1)
          if m != n and (m - n) % provider.parity_step == 0]
    total = hnn
    for m in ms:
        hmm = provider.evaluate(m, m, omega)
        if abs(hmm - hnn) <= gap_floor:
            raise DegenerateDiagonal(f"|H_mm - H_nn| <= {gap_floor:g} for m={m}, n={n}")
        hnm = provider.evaluate(n, m, omega)
        total -= hnm * hnm / (hmm - hnn)
    return total


def _diag_derivative(provider, n, omega):
    d = provider.diagonal_derivative(n, omega)
    if d is not None:
        return float(np.asarray(d).ravel()[0])
    h = 1e-6 * omega
    return (provider.evaluate(n, n, omega + h) - provider.evaluate(n, n, omega - h)) / (2 * h)


def optimize_omega(
    provider: MatrixElementProvider,
    n: int,
    bracket: tuple | None = None,
) -> float:
    """Basis frequency making ``H_nn(omega)`` stationary.

    With no ``bracket`` the search starts at ``(1e-6, 1)`` and widens the
    upper end by factors of ten until the derivative changes sign.
    """
    def f(w):
        return _diag_derivative(provider, n, w)

    if bracket is None:
        lo, hi = 1e-6, 1.0
        while f(lo) * f(hi) > 0 and hi < 1e12:
            hi *= 10.0
    else:
        lo, hi = bracket
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        raise NoStationaryPoint(f"dH_nn/domega has no sign change on [{lo}, {hi}]")
    return brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def rs_pt2_energy(
    provider: MatrixElementProvider,
    n: int,
    k_trunc: int | None = None,
    unperturbed=lambda k: k + 0.5,
    omega: float = 1.0,
) -> float:
    """Second-order Rayleigh-Schroedinger energy in the fixed ``omega = 1`` basis.

    The unperturbed Hamiltonian is taken diagonal with eigenvalues
    ``unperturbed(k)`` (harmonic by default) and ``V = H - H_0``.
    """
    band = max(provider.band, 1)
    e_n = unperturbed(n)
    v_nn = provider.evaluate(n, n, omega) - e_n
    total = e_n + v_nn
    hi = n + band if k_trunc is None else min(k_trunc, n + band)
    for m in range(max(0, n - band), hi + 1):
        if m == n or (m - n) % provider.parity_step:
            continue
        v = provider.evaluate(m, n, omega)
        total += v * v / (e_n - unperturbed(m))
    return total


# --- thermodynamic perturbation theory ------------------------------------


def cpt2_terms(e0, v, beta: float, coupling: float = 1.0, tail_tol: float = 1e-12):
    """Zeroth, first and second order pieces of the perturbative free energy.

    ``e0`` are the unperturbed levels (ascending), ``v`` the perturbation in
    the unperturbed basis (dense or scipy.sparse), ``coupling`` the small
    parameter multiplying it. Returns ``(F0, first, second)``.
    """
    e0 = np.asarray(e0, dtype=float)
    if beta <= 0:
        raise ValueError("beta must be positive")
    shifted = -beta * (e0 - e0[0])
    boltz = np.exp(shifted)
    z_rel = boltz.sum()
    f0 = e0[0] - np.log(z_rel) / beta
    w = boltz / z_rel

    if len(e0) > 1:
        gap = e0[-1] - e0[-2]
        r = np.exp(-beta * gap)
        tail = w[-1] * r / (1 - r) if r < 1 else np.inf
    else:
        tail = np.inf
    if not tail <= tail_tol:
        raise TruncationInsufficient(
            f"tail weight {tail:.3e} exceeds {tail_tol:g}; enlarge the basis"
        )

    vc = sp.coo_matrix(v)
    diag_mask = vc.row == vc.col
    vdiag = np.zeros(len(e0))
    vdiag[vc.row[diag_mask]] = vc.data[diag_mask]
    first = coupling * np.dot(vdiag, w)

    r_, c_, d_ = vc.row[~diag_mask], vc.col[~diag_mask], vc.data[~diag_mask]
    # sum_n sum_{m != n} |V_mn|^2 w_n / (E_n - E_m); entry (m, n) = (r_, c_)
    pair = d_ * d_ * w[c_] / (e0[c_] - e0[r_])
    second = coupling**2 * pair.sum()
    mean_v = np.dot(vdiag, w)
    second += 0.5 * beta * coupling**2 * (mean_v**2 - np.dot(vdiag**2, w))
    return f0, first, second


def thermo_cpt2_free_energy(e0, v, coupling: float, beta: float) -> float:
    """Free energy through second order of thermodynamic perturbation theory."""
    f0, first, second = cpt2_terms(e0, v, beta, coupling)
    return f0 + first + second


def quadratic_model(size: int):
    """Harmonic oscillator perturbed by ``x**2``: levels ``n + 1/2`` and the
    perturbation ``V`` with ``V_nn = n + 1/2`` and
    ``V_{n+2,n} = sqrt((n+1)(n+2))/2``."""
    n = np.arange(size, dtype=float)
    off = 0.5 * np.sqrt((n[:-2] + 1) * (n[:-2] + 2))
    v = sp.diags([n + 0.5, off, off], [0, 2, -2], shape=(size, size), format="csr")
    return n + 0.5, v


def quadratic_model_cpt2(mu: float, beta: float) -> float:
    """Closed form of the second-order sums for :func:`quadratic_model`.

    Evaluating the sums by hand gives
    ``F0 + (mu/2) coth(b/2) - (mu**2/4) coth(b/2) - b mu**2 / (8 sinh(b/2)**2)``,
    which is the Taylor expansion of the exact free energy to ``O(mu**2)``.
    """
    h = beta / 2
    coth = 1.0 / np.tanh(h)
    f0 = np.log(2 * np.sinh(h)) / beta
    return f0 + 0.5 * mu * coth - 0.25 * mu**2 * coth - beta * mu**2 / (8 * np.sinh(h) ** 2)


def quadratic_model_size(beta: float, weight_floor: float = 1e-14) -> int:
    """Basis size whose last Boltzmann weight is below ``weight_floor``."""
    # w_K = (1 - e^-b) e^{-b K}
    return int(np.ceil((-np.log(weight_floor) + np.log1p(-np.exp(-beta))) / beta)) + 8
