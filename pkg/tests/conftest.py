import numpy as np
import pytest

from omstat.qao import QaoParams
from omstat.oracle import oracle_table


def dense_levels(lam, mu=0.0, size=600, count=12):
    """Independent reference: dense eigenvalues of ``n + 1/2 + mu x^2 + lam x^4``
    with ``x`` built from ladder operators and the powers taken by matrix
    products (the top of the basis is unreliable, only ``count`` are kept)."""
    a = np.diag(np.sqrt(np.arange(1, size)), 1)
    x = (a + a.T) / np.sqrt(2)
    x2 = x @ x
    h = np.diag(np.arange(size) + 0.5) + mu * x2 + lam * x2 @ x2
    return np.linalg.eigvalsh(h)[:count]


@pytest.fixture(scope="session")
def oracle_levels():
    def get(lam, mu=0.0, count=11):
        return oracle_table(QaoParams(lam, mu), count).levels[:count]
    return get
