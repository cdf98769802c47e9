"""
Discrete energy under refinement
================================

The energy of a smooth path of curves, evaluated on curves with n edges,
approaches its continuous value at rate 1/n.
"""

from geomatch.convergence import FAMILIES, energy_convergence_study

for name in sorted(FAMILIES):
    table = energy_convergence_study(name, [8, 16, 32, 64])
    print(f"{name}: reference {table.reference:.8f} (n = {table.reference_n}), "
          f"slope {table.slope:.3f}")
    for n, energy, err in table.rows:
        print(f"   n = {n:3d}  energy {energy:.8f}  error {err:.2e}")
