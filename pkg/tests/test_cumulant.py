import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from omstat.cumulant import (average_energy_ce, cumulants_direct, cumulants_z0_z1,
                             generic_q_condition, phi_of_q, power_sum, qao_phi,
                             qao_stationary_parametric, qao_z0c, spectral_moments, trial_moments)
from omstat.errors import MultipleStationaryPoints, SeriesOverflow
from omstat.oracle import harmonic_exact_free_energy, om_free_energy, qao_thermo_oracle
from omstat.qao import QaoParams, fixed_omega_spectrum
from omstat.rotator import rotator_q_of_x, rotator_trial_moments
from omstat.spectrum import SpectrumSource, harmonic_spectrum, rotator_spectrum, table_spectrum


def test_power_sums_against_series():
    q = 0.37
    n = np.arange(400, dtype=float)
    for k in range(6):
        assert power_sum(k, q) == pytest.approx(math.fsum(n**k * q**n), rel=1e-13)


def test_uniform_moments():
    ens = trial_moments(0.5)
    assert ens.norm == 0.5
    assert ens.moments[1:] == pytest.approx((1.0, 3.0), rel=1e-15)
    tiny = trial_moments(1e-15, order=4)
    assert tiny.norm == pytest.approx(1.0)
    assert max(tiny.moments[1:]) < 1e-14


def test_rotational_moments_match_rotator():
    ens = trial_moments(0.5, "rotational")
    assert (ens.norm, ens.nbar, ens.n2bar) == pytest.approx(rotator_trial_moments(0.5), rel=1e-15)


def test_custom_degeneracy_goes_through_series():
    ens = trial_moments(0.4, lambda n: (n + 1.0) ** 2, order=3)
    n = np.arange(300, dtype=float)
    w = (n + 1) ** 2 * 0.4**n
    s = w.sum()
    assert ens.norm == pytest.approx(1 / s, rel=1e-13)
    for k in range(1, 4):
        assert ens.moments[k] == pytest.approx((w * n**k).sum() / s, rel=1e-12)


def test_trial_moments_domain():
    with pytest.raises(ValueError):
        trial_moments(1.0)
    with pytest.raises(SeriesOverflow):
        trial_moments(1 - 1e-13)


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-6, 0.999), st.sampled_from(["uniform", "rotational"]))
def test_normalisation_and_variance(q, g):
    ens = trial_moments(q, g, 2)
    n = np.arange(200_000, dtype=float)
    gw = np.ones_like(n) if g == "uniform" else 2 * n + 1
    assert ens.norm * math.fsum(gw * q**n) == pytest.approx(1.0, rel=1e-10)
    assert ens.variance >= 0


def test_spectral_moments_examples():
    ens = trial_moments(0.3, order=2)
    mom = spectral_moments(harmonic_spectrum(1.7), ens)
    assert mom.mean_energy == pytest.approx(1.7 * (ens.nbar + 0.5), rel=1e-15)
    fixed = fixed_omega_spectrum(QaoParams(1.0), 2.0)
    assert spectral_moments(fixed, trial_moments(1e-14)).mean_energy == pytest.approx(0.8125, rel=1e-12)
    mom = spectral_moments(rotator_spectrum(), trial_moments(0.5, "rotational"))
    assert mom.mean_energy == pytest.approx(12.0, rel=1e-14)


def test_spectral_moments_series_path():
    # same spectrum without the polynomial shortcut
    fixed = fixed_omega_spectrum(QaoParams(0.7, 0.2), 1.6)
    plain = SpectrumSource(fixed.energy)
    ens = trial_moments(0.6, order=4)
    a, b = spectral_moments(fixed, ens), spectral_moments(plain, ens)
    assert (a.mean_energy, a.mean_energy_sq, a.mean_energy_n) == pytest.approx(
        (b.mean_energy, b.mean_energy_sq, b.mean_energy_n), rel=1e-12)
    assert a.energy_variance >= 0


def test_qao_mean_energy_closed_form():
    p, w, q = QaoParams(0.8, 0.1), 1.9, 0.45
    ens = trial_moments(q, order=2)
    _, mean = qao_phi(1.0, q, w, p.lam, p.mu)
    assert spectral_moments(fixed_omega_spectrum(p, w), ens).mean_energy == pytest.approx(mean, rel=1e-14)


@pytest.mark.parametrize("q", [0.1, 0.3])
def test_k1_k2_against_truncated_sums(q):
    beta, spec = 0.7, fixed_omega_spectrum(QaoParams(1.0), 2.0)
    n = np.arange(50)
    ens = trial_moments(q, order=4)
    est = cumulants_z0_z1(beta, ens, spectral_moments(spec, ens))
    a = -beta * spec(n) - np.log(q) * n
    k1, k2 = cumulants_direct(a, q**n.astype(float), 2)
    assert est.phi == pytest.approx(k1 - np.log(ens.norm), rel=1e-10)
    assert est.phi1 == pytest.approx(k2 / 2, rel=1e-10)


@pytest.mark.parametrize("mu", [0.0, 0.5, 2.0])
def test_harmonic_ensemble_is_exact(mu):
    w = np.sqrt(1 + 2 * mu)
    beta = 0.8
    ens = trial_moments(np.exp(-beta * w), order=4)
    est = cumulants_z0_z1(beta, ens, spectral_moments(harmonic_spectrum(w), ens))
    assert est.z0 == pytest.approx(np.exp(-beta * w / 2) / -np.expm1(-beta * w), rel=1e-13)
    assert abs(est.phi1) < 1e-12


def test_infinite_temperature_limit():
    q = 0.4
    ens = trial_moments(q, order=4)
    mom = spectral_moments(fixed_omega_spectrum(QaoParams(3.0), 2.5), ens)
    est = cumulants_z0_z1(1e-300, ens, mom)
    assert est.phi == pytest.approx(-np.log(q) * ens.nbar - np.log(ens.norm), rel=1e-14)


def test_representation_identity():
    # truncated spectra, small beta: K2 improves on K1
    rng = np.random.default_rng(3)
    for _ in range(20):
        levels = np.sort(rng.uniform(0, 20, 40))
        q = rng.uniform(0.5, 0.95)
        beta = 0.05
        n = np.arange(40)
        w = q ** n.astype(float)
        a = -beta * levels - np.log(q) * n
        k1, k2, _ = cumulants_direct(a, w)
        log_z = np.log(np.exp(-beta * levels).sum()) + np.log(w.sum())
        assert abs(log_z - (k1 + k2 / 2)) <= abs(log_z - k1)


def test_parametric_examples():
    w, beta, phi = qao_stationary_parametric(1e-9, 0.0, 0.3)
    assert w == pytest.approx(1.0, rel=1e-8)
    assert beta == pytest.approx(-np.log(0.3), rel=1e-8)
    w, beta, phi = qao_stationary_parametric(1.0, 0.0, 0.2)
    assert w**3 - w - 9 == pytest.approx(0, abs=1e-12)
    assert w == pytest.approx(2.2401, abs=1e-4)
    expected = -np.log(0.2) / ((w * w + 1) / (2 * w) + 3 * 1.2 / (w * w * 0.8))
    assert beta == pytest.approx(expected, rel=1e-14)
    # stationary in both q and omega
    h = 1e-6
    dq = (qao_phi(beta, 0.2 + h, w, 1.0)[0] - qao_phi(beta, 0.2 - h, w, 1.0)[0]) / (2 * h)
    dw = (qao_phi(beta, 0.2, w + h, 1.0)[0] - qao_phi(beta, 0.2, w - h, 1.0)[0]) / (2 * h)
    assert abs(dq) <= 1e-8 and abs(dw) <= 1e-8
    q = 1 - 1e-9
    w, beta, _ = qao_stationary_parametric(1.0, 0.0, q)
    assert beta < 1e-10
    assert w == pytest.approx(np.cbrt(6 * (1 + q) / (1 - q)), rel=1e-5)


@pytest.mark.parametrize("mu", [0.0, 0.5, 2.0])
@pytest.mark.parametrize("beta", [0.1, 1.0, 10.0])
def test_harmonic_exactness(mu, beta):
    est = qao_z0c(beta, 0.0, mu)
    exact = harmonic_exact_free_energy(mu, beta)
    assert abs(est.free_energy(0) - exact) / abs(exact) <= 1e-10
    assert abs(est.phi1) <= 1e-12


def test_z0c_harmonic_example():
    assert qao_z0c(1.0, 0.0).free_energy(0) == pytest.approx(0.04132, abs=1e-5)


def test_z0c_relative_error_lambda1():
    worst = 0.0
    for beta in np.logspace(-1, 1, 25):
        ref = qao_thermo_oracle(beta, 1.0).free_energy
        worst = max(worst, abs(qao_z0c(beta, 1.0).free_energy(0) - ref) / abs(ref))
    assert worst <= 0.1


def test_z0c_close_to_level_sum():
    assert abs(qao_z0c(1.0, 1.0).free_energy(0) - om_free_energy(1.0, 1.0)) <= 0.05


def test_z0c_is_upper_bound():
    # Jensen: the zeroth order never exceeds the true partition function
    for lam in (0.1, 1.0, 10.0):
        for beta in (0.2, 1.0, 5.0):
            assert qao_z0c(beta, lam).phi <= qao_thermo_oracle(beta, lam).log_z + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 20.0), st.floats(0.0, 100.0), st.floats(-0.3, 2.0))
def test_phi1_non_negative(beta, lam, mu):
    est = qao_z0c(beta, lam, mu)
    assert est.phi1 >= -1e-12 * max(1.0, abs(est.phi))


@pytest.mark.parametrize("lam", [0.3, 1.0, 10.0])
@pytest.mark.parametrize("beta", [0.3, 2.0])
def test_stationary_point_is_local_maximum(lam, beta):
    est = qao_z0c(beta, lam, with_levels=False)
    q, w = est.q_star, est.omega_star
    for dq in np.linspace(-0.05, 0.05, 11):
        qq = q + dq
        if 0 < qq < 1:
            assert qao_phi(beta, qq, w, lam)[0] <= est.phi + 1e-12


def test_average_energy_examples():
    for beta in (0.5, 2.0):
        assert average_energy_ce(beta, 0.0) == pytest.approx(0.5 / np.tanh(beta / 2), rel=1e-13)
    ref = qao_thermo_oracle(5.0, 1.0).mean_energy
    assert abs(average_energy_ce(5.0, 1.0) - ref) / ref <= 0.1


@pytest.mark.parametrize("lam", [0.5, 2.0])
@pytest.mark.parametrize("beta", [0.5, 2.0])
def test_envelope(lam, beta):
    h = 1e-4 * beta
    fd = -(qao_z0c(beta + h, lam, with_levels=False).phi
           - qao_z0c(beta - h, lam, with_levels=False).phi) / (2 * h)
    e = average_energy_ce(beta, lam)
    assert abs(e - fd) / e <= 1e-5


def test_generic_q_examples():
    assert generic_q_condition(1.0, rotator_spectrum()) == pytest.approx(rotator_q_of_x(1.0), rel=1e-8)
    assert generic_q_condition(1.3, harmonic_spectrum(1.7)) == pytest.approx(np.exp(-1.3 * 1.7),
                                                                             rel=1e-10)
    for lam, q0 in ((1.0, 0.2), (5.0, 0.6)):
        w, beta, _ = qao_stationary_parametric(lam, 0.0, q0)
        q = generic_q_condition(beta, fixed_omega_spectrum(QaoParams(lam), w))
        assert q == pytest.approx(q0, rel=1e-8)


def test_generic_q_multiple_roots():
    # two well separated level clusters give two stationary points
    levels = np.r_[np.zeros(3), 30 + np.arange(40) * 0.01]
    spec = table_spectrum(levels)
    try:
        q = generic_q_condition(0.4, spec)
    except Exception as exc:  # pragma: no cover - reported below
        pytest.fail(f"unexpected {exc!r}")
    roots_strict = None
    try:
        generic_q_condition(0.4, spec, strict=True)
    except MultipleStationaryPoints:
        roots_strict = "multiple"
    if roots_strict:
        grid = np.linspace(0.01, 0.99, 99)
        assert phi_of_q(0.4, spec, q) >= max(phi_of_q(0.4, spec, g) for g in grid) - 1e-9
