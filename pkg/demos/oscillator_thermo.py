"""Free energy of the quartic oscillator by several routes.

Columns: exact (diagonalised levels), sums over zeroth and second order
levels, the linearised correction, cumulant zeroth and first order.
"""

from omstat.cumulant import qao_z0c
from omstat.oracle import f01_expanded, om_free_energy, qao_thermo_oracle

lam = 1.0
print(f"lambda = {lam}")
print("   beta     exact       F0        F1       F01       CE0       CE1")
for beta in (0.1, 0.3, 1.0, 3.0, 10.0):
    exact = qao_thermo_oracle(beta, lam).free_energy
    ce = qao_z0c(beta, lam)
    vals = (exact, om_free_energy(beta, lam), om_free_energy(beta, lam, order=2),
            f01_expanded(beta, lam), ce.free_energy(0), ce.free_energy(1))
    print(f"{beta:7.2f} " + " ".join(f"{v:9.5f}" for v in vals))
