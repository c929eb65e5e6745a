"""Level-energy functions with degeneracies, tagged by the method that made them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

Degeneracy = Union[str, Callable[[np.ndarray], np.ndarray]]


def degeneracy_values(degeneracy: Degeneracy, n: np.ndarray) -> np.ndarray:
    n = np.asarray(n)
    if callable(degeneracy):
        return np.asarray(degeneracy(n), dtype=float)
    if degeneracy == "uniform":
        return np.ones(n.shape)
    if degeneracy == "rotational":
        return 2.0 * n + 1.0
    raise ValueError(f"unknown degeneracy family {degeneracy!r}")


@dataclass(frozen=True)
class SpectrumSource:
    """A spectrum ``E(n)`` with degeneracy ``g(n)``.

    ``energy`` must accept integer arrays. ``poly`` holds the coefficients
    ``(c0, c1, ...)`` of ``E(n) = sum_k c_k n**k`` when the spectrum is an
    exact polynomial, which lets trial-ensemble moments be taken in closed
    form. ``n_max`` marks a finite table (levels ``0..n_max``).
    """

    energy: Callable[[np.ndarray], np.ndarray]
    degeneracy: Degeneracy = "uniform"
    method: str = "custom"
    poly: tuple | None = None
    n_max: int | None = None

    def __call__(self, n):
        return np.asarray(self.energy(np.asarray(n)), dtype=float)

    def g(self, n):
        return degeneracy_values(self.degeneracy, n)


def polynomial_spectrum(coeffs, degeneracy: Degeneracy = "uniform", method="poly"):
    coeffs = tuple(float(c) for c in coeffs)

    def energy(n):
        return np.polynomial.polynomial.polyval(np.asarray(n, dtype=float), coeffs)

    return SpectrumSource(energy, degeneracy, method, poly=coeffs)


def harmonic_spectrum(omega: float = 1.0) -> SpectrumSource:
    return polynomial_spectrum((0.5 * omega, omega), method="harmonic")


def rotator_spectrum() -> SpectrumSource:
    """``E_n = n(n+1)`` in units of the rotational temperature, ``g_n = 2n+1``."""
    return polynomial_spectrum((0.0, 1.0, 1.0), "rotational", method="rotator")


def table_spectrum(levels, method="table", degeneracy: Degeneracy = "uniform"):
    levels = np.asarray(levels, dtype=float)

    def energy(n):
        return levels[np.asarray(n)]

    return SpectrumSource(energy, degeneracy, method, n_max=len(levels) - 1)
