"""Acceptance suite: each check measures one quantity against its threshold.

Every check returns a :class:`CriterionResult`; a check passes when the
measured value meets its threshold and it ran within its time budget.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .cumulant import (average_energy_ce, cumulants_direct, cumulants_z0_z1, qao_phi, qao_z0c,
                       spectral_moments, trial_moments)
from .om import cpt2_terms, quadratic_model, quadratic_model_cpt2, quadratic_model_size
from .oracle import (f01_expanded, harmonic_exact_free_energy, om_free_energy, oracle_table,
                     partition_direct, qao_asymptotic_z, qao_thermo_oracle)
from .qao import QaoParams, energies, fixed_omega_spectrum, omega_n, om_spectrum
from .rotator import rotator_partition_direct, rotator_x_of_q, rotator_z0, rotator_z1_factor
from .spectrum import rotator_spectrum


@dataclass
class CriterionResult:
    id: int
    name: str
    measured: float
    threshold: float
    passed: bool
    runtime: float
    budget: float
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return (f"[{flag}] {self.id:2d} {self.name}: measured={self.measured:.6g} "
                f"threshold={self.threshold:.6g} runtime={self.runtime:.2f}s/{self.budget:g}s")

    def to_dict(self):
        return asdict(self)


LAMBDAS_LEVELS = (0.1, 1.0, 10.0, 100.0)
N_LEVELS = 11


def _level_errors(order):
    errs = []
    for lam in LAMBDAS_LEVELS:
        params = QaoParams(lam)
        ref = oracle_table(params, N_LEVELS).levels[:N_LEVELS]
        e = energies(params, np.arange(N_LEVELS), order)
        errs.append(np.abs(e - ref) / ref)
    return np.array(errs)


def eigenvalue_use():
    err = _level_errors(0)
    return err.max(), {"worst_lambda": LAMBDAS_LEVELS[int(np.argmax(err.max(axis=1)))]}


def order_improvement():
    """Count of grid points where a higher order is further from the oracle."""
    e0, e2, e3 = (_level_errors(o) for o in (0, 2, 3))
    slack = 1e-10
    bad = (e3 > e2 + slack) | (e2 > e0 + slack)
    params = QaoParams(1.0)
    ref0 = oracle_table(params, N_LEVELS).levels[0]
    spot = [float(energies(params, 0, o)) for o in (0, 2, 3)]
    spot_ok = abs(spot[0] - 0.8125) < 1e-12 and abs(spot[1] - 0.8050) < 1e-12 \
        and abs(spot[2] - ref0) < abs(spot[1] - ref0)
    worst = [(LAMBDAS_LEVELS[i], int(n)) for i, n in zip(*np.nonzero(bad))]
    return int(bad.sum()) + (0 if spot_ok else 1), {
        "violations": worst, "spot": spot, "oracle_e0": float(ref0), "spot_ok": spot_ok,
    }


def harmonic_exactness():
    worst_f, worst_phi1 = 0.0, 0.0
    for mu in (0.0, 0.5, 2.0):
        for beta in (0.1, 1.0, 10.0):
            est = qao_z0c(beta, 0.0, mu)
            exact = harmonic_exact_free_energy(mu, beta)
            worst_f = max(worst_f, abs(est.free_energy(0) - exact) / abs(exact))
            worst_phi1 = max(worst_phi1, abs(est.phi1))
    # both sub-bounds folded into one ratio to the threshold
    return max(worst_f / 1e-10, worst_phi1 / 1e-12), {
        "max_rel_f": worst_f, "max_abs_phi1": worst_phi1,
    }


def rotator_use():
    xs = np.logspace(-2, 1, 200)
    errs = []
    for x in xs:
        z0, _ = rotator_z0(x)
        f_ex = -np.log(rotator_partition_direct(x)) / x
        errs.append(abs(-np.log(z0) / x - f_ex) / abs(f_ex))
    x = 0.01
    z0, q = rotator_z0(x)
    z01 = z0 * rotator_z1_factor(q)
    small0 = abs(z0 / (0.906 / x + 0.303) - 1)
    small1 = abs(z01 / (1.063 / x + 0.348) - 1)
    worst = float(np.max(errs))
    return max(worst / 0.1, small0 / 0.01, small1 / 0.01), {
        "max_rel_f": worst, "worst_x": float(xs[int(np.argmax(errs))]),
        "z0_vs_asymptote": small0, "z01_vs_asymptote": small1,
    }


def qao_thermo_use():
    betas = np.logspace(-1, 1, 10)
    lams = np.logspace(-1, 2, 10)
    worst, worst_at, gap, gap_at = 0.0, None, 0.0, None
    for lam in lams:
        for beta in betas:
            f_ref = qao_thermo_oracle(beta, lam).free_energy
            f_ce = qao_z0c(beta, lam).free_energy(0)
            f_om = om_free_energy(beta, lam)
            err = abs(f_ce - f_ref) / abs(f_ref)
            if err > worst:
                worst, worst_at = err, (float(lam), float(beta))
            if abs(f_ce - f_om) > gap:
                gap, gap_at = abs(f_ce - f_om), (float(lam), float(beta))
    return max(worst / 0.1, gap / 0.05), {
        "max_rel_f": worst, "at": worst_at, "max_gap_ce_vs_om_sum": gap, "gap_at": gap_at,
    }


def stationarity():
    worst = 0.0
    for lam in (0.1, 1.0, 10.0):
        for beta in (0.1, 1.0, 10.0):
            est = qao_z0c(beta, lam)
            # differentiate in ln q and ln omega: q* falls to ~1e-18 at beta = 10
            lq, lw = np.log(est.q_star), np.log(est.omega_star)
            h = 1e-6

            def phi(a, b):
                return qao_phi(beta, np.exp(a), np.exp(b), lam)[0]

            dq = (phi(lq + h, lw) - phi(lq - h, lw)) / (2 * h)
            dw = (phi(lq, lw + h) - phi(lq, lw - h)) / (2 * h)
            worst = max(worst, abs(dq), abs(dw))
    return worst, {}


def envelope():
    worst = 0.0
    for lam in (0.5, 2.0):
        for beta in (0.5, 2.0):
            e = average_energy_ce(beta, lam)
            h = 1e-4 * beta
            dlnz = (qao_z0c(beta + h, lam).phi - qao_z0c(beta - h, lam).phi) / (2 * h)
            worst = max(worst, abs(e + dlnz) / e)
    return worst, {}


def _direct_k1_k2(a_of_n, weights_of_n, size=4000):
    n = np.arange(size)
    k1, k2 = cumulants_direct(a_of_n(n), weights_of_n(n), 2)
    return k1, k2


def cumulant_identities():
    worst = 0.0
    for q in (0.1, 0.5, 0.9):
        # rotator at its stationary x
        x = float(rotator_x_of_q(q))
        ens = trial_moments(q, "rotational", 4)
        est = cumulants_z0_z1(x, ens, spectral_moments(rotator_spectrum(), ens))
        spec = rotator_spectrum()
        k1, k2 = _direct_k1_k2(lambda n: -x * spec(n) - n * np.log(q) - np.log(ens.norm),
                               lambda n: (2 * n + 1.0) * q ** n.astype(float))
        worst = max(worst, abs(est.phi - k1) / max(1, abs(k1)),
                    abs(2 * est.phi1 - k2) / max(1, abs(k2)))
        # oscillator at fixed frequency
        params, beta = QaoParams(1.0), 1.0
        w = omega_n(params, 0)
        spec = fixed_omega_spectrum(params, w)
        ens = trial_moments(q, "uniform", 4)
        est = cumulants_z0_z1(beta, ens, spectral_moments(spec, ens))
        k1, k2 = _direct_k1_k2(lambda n: -beta * spec(n) - n * np.log(q) - np.log(ens.norm),
                               lambda n: q ** n.astype(float))
        worst = max(worst, abs(est.phi - k1) / max(1, abs(k1)),
                    abs(2 * est.phi1 - k2) / max(1, abs(k2)))
    return worst, {}


def f01_nonuniformity():
    """Signed margins: at beta = 1 the linearised form must win, somewhere in
    (1, 20] it must lose. Measured value is the number of failed conditions."""
    lam = 1.0

    def errs(beta):
        ref = qao_thermo_oracle(beta, lam).free_energy
        return abs(f01_expanded(beta, lam) - ref), abs(om_free_energy(beta, lam, order=2) - ref)

    e01, e1 = errs(1.0)
    low_t_ok = e01 < e1
    betas = np.linspace(1.0, 20.0, 39)[1:]
    losses = [(float(b), *errs(b)) for b in betas]
    found = [b for b, a, c in losses if a > c]
    failures = int(not low_t_ok) + int(not found)
    return failures, {
        "beta1_err_f01": e01, "beta1_err_f1": e1, "f01_worse_at": found[:5],
    }


def strong_coupling():
    lam, beta = 100.0, 1.0
    z_strong = qao_asymptotic_z(beta, lam, "strong-coupling")
    z_om = partition_direct(om_spectrum(QaoParams(lam)), beta).z
    return abs(z_strong - z_om) / z_om, {"z_strong": z_strong, "z_om0": z_om}


def cpt_divergence():
    mu, beta = 0.1, 2.0
    e0, v = quadratic_model(quadratic_model_size(beta))
    f0, first, second = cpt2_terms(e0, v, beta, mu)
    sums = f0 + first + second
    closed = quadratic_model_cpt2(mu, beta)
    agree = abs(sums - closed) / abs(closed)

    mu, beta = 0.5, 0.01
    e0, v = quadratic_model(quadratic_model_size(beta))
    _, _, second = cpt2_terms(e0, v, beta, mu)
    ratio = second / (-(mu**2) / (4 * beta**2))
    off = max(ratio, 1 / ratio) if ratio > 0 else np.inf
    return max(agree / 1e-6, off / 1.1), {
        "rel_diff_sums_vs_closed": agree, "second_order_at_beta_0.01": second,
        "ratio_to_minus_mu2_over_4beta2": ratio,
        "ratio_to_minus_mu2_over_beta": second / (-(mu**2) / beta),
    }


# (id, name, function, threshold, budget seconds)
CRITERIA = [
    (1, "eigenvalue USE, max relative level error", eigenvalue_use, 0.03, 10),
    (2, "order improvement, violations of err3 <= err2 <= err0", order_improvement, 0, 10),
    (3, "harmonic exactness of CE (ratio to tolerance)", harmonic_exactness, 1.0, 1),
    (4, "rotator USE (ratio to bounds)", rotator_use, 1.0, 5),
    (5, "oscillator thermodynamic USE (ratio to bounds)", qao_thermo_use, 1.0, 60),
    (6, "stationarity, max |dphi/dln q|, |dphi/dln omega|", stationarity, 1e-6, 1),
    (7, "envelope, relative mean-energy mismatch", envelope, 1e-5, 1),
    (8, "cumulant identities, max deviation", cumulant_identities, 1e-10, 1),
    (9, "linearised correction non-uniformity, failed conditions", f01_nonuniformity, 0, 5),
    (10, "strong-coupling Z vs zeroth-order level sum", strong_coupling, 0.05, 1),
    (11, "thermodynamic perturbation sums (ratio to bounds)", cpt_divergence, 1.0, 1),
]


def run_criterion(cid: int) -> CriterionResult:
    for id_, name, fn, threshold, budget in CRITERIA:
        if id_ == cid:
            t = time.perf_counter()
            measured, detail = fn()
            runtime = time.perf_counter() - t
            measured = float(measured)
            ok = measured <= threshold and runtime <= budget
            return CriterionResult(id_, name, measured, threshold, bool(ok), runtime, budget,
                                   _plain(detail))
    raise KeyError(cid)


def run_all() -> list[CriterionResult]:
    return [run_criterion(c[0]) for c in CRITERIA]


def _plain(obj):
    # numpy scalars -> python, for json
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj
