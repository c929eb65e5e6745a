"""Quantum rotator: cumulant estimates of Z against the direct sum."""

import numpy as np

from omstat.rotator import rotator_point

print("     x        F exact     F zeroth    F first    err0     err1")
for x in np.logspace(-2, 1, 13):
    p = rotator_point(x)
    f, f0, f1 = p.free_energies
    print(f"{x:8.4f}  {f:11.5f}  {f0:11.5f}  {f1:10.5f}  {abs(f0 - f) / abs(f):.4f}  "
          f"{abs(f1 - f) / abs(f):.4f}")

p = rotator_point(0.01)
print("\nsmall x: z0 =", round(p.z0, 3), " vs 0.906/x + 0.303 =", 0.906 / 0.01 + 0.303)
print("         z0 z1 =", round(p.z0 * p.z1_factor, 3), " vs 1.063/x + 0.348 =",
      1.063 / 0.01 + 0.348)
