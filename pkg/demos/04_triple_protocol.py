"""
Performed but discarded measurements
====================================

The three-time combination K_3 = C_ab + C_bc + C_ac + 1 can be made negative
by firing probe pulses between the chosen times and discarding their results.
A macrorealist would say the discarded pulses cannot matter. Quantum
mechanically their back action decorrelates the kept pair.
"""

# %%
import numpy as np

from qndlg import PhysicalParams
from qndlg.protocol import default_theta_grid, optimize_triple, sweep_triple

params = PhysicalParams()
res = optimize_triple(7, np.pi / 2, params)
print("best triple:", res.triple, "K3 =", round(res.k3, 5))
for pair, mask in res.masks.items():
    print(pair, "".join("x" if m else "." for m in mask))

# %%
# Nine slots give more room for discarded pulses.
grid = default_theta_grid(128)
for n in (7, 9):
    rows = sweep_triple(n, params, grid)
    best = min(rows, key=lambda r: r.k3)
    print(f"n={n}: min K3 = {best.k3:+.4f} at theta = {best.theta / np.pi:.3f} pi, triple {best.triple}")
