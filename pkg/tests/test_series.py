import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from omstat.errors import SlowConvergence
from omstat.series import sum_series


def test_geometric_sum():
    res = sum_series(lambda n: 0.5 ** n.astype(float), 1e-15)
    assert res.value[0] == pytest.approx(2.0, rel=1e-15)
    assert res.tail_bound[0] <= 1e-15 * res.value[0]


def test_rows_summed_independently():
    def terms(n):
        nf = n.astype(float)
        return np.vstack([0.9 ** nf, nf * 0.9 ** nf])

    res = sum_series(terms, 1e-14)
    assert res.value[0] == pytest.approx(10.0, rel=1e-13)
    assert res.value[1] == pytest.approx(0.9 / 0.01, rel=1e-13)


def test_finite_table_is_exact():
    res = sum_series(lambda n: n.astype(float), n_max=10)
    assert res.value[0] == 55.0
    assert res.n_terms == 11


def test_harmonic_series_is_rejected():
    with pytest.raises(SlowConvergence):
        sum_series(lambda n: 1.0 / (n + 1.0), 1e-12, max_terms=20_000)


def test_non_finite_terms_raise():
    with pytest.raises(SlowConvergence):
        with np.errstate(over="ignore"):
            sum_series(lambda n: np.exp(n.astype(float) * 10.0), 1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 0.99))
def test_geometric_property(r):
    res = sum_series(lambda n: r ** n.astype(float), 1e-14)
    assert res.value[0] == pytest.approx(1 / (1 - r), rel=1e-12)
