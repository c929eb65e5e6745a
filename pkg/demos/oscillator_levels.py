"""Oscillator levels from the operator method against exact diagonalisation.

Prints, for a few couplings, the zeroth/second/third order levels next to
the diagonalised ones and the worst relative error of each order.
"""

import numpy as np

from omstat.oracle import oracle_table
from omstat.qao import QaoParams, energies, strong_coupling_bn

n = np.arange(11)
for lam in (0.1, 1.0, 10.0, 100.0):
    p = QaoParams(lam)
    ref = oracle_table(p, len(n)).levels[: len(n)]
    print(f"lambda = {lam:g}")
    print("   n      E0          E2          E3          exact")
    e0, e2, e3 = (energies(p, n, k) for k in (0, 2, 3))
    for row in zip(n, e0, e2, e3, ref):
        print("  {:2d}  {:10.6f}  {:10.6f}  {:10.6f}  {:10.6f}".format(*row))
    for name, e in (("E0", e0), ("E2", e2), ("E2 incl. downward", energies(p, n, 2, downward=True))):
        print(f"  max rel err {name}: {np.max(np.abs(e - ref) / ref):.4f}")
    print()

# approach to the strong-coupling limit
lam = 1e4
ref = oracle_table(QaoParams(lam), 5).levels
print("lambda = 1e4, E_n / lambda^(1/3) vs b_n:")
for k in range(5):
    print(f"  n={k}: {ref[k] / np.cbrt(lam):.5f}  {strong_coupling_bn(k).b_n:.5f}")
