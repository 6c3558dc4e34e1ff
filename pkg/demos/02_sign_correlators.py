"""
From Gaussian readouts to +-1 correlators
=========================================

The Leggett-Garg inequalities need dichotomic outcomes, so each readout is
replaced by its sign. For zero-mean Gaussian readouts the sign correlator has
the closed form (2/pi) asin(rho). Here we check it against plain sampling.
"""

# %%
import numpy as np

from qndlg import oracle
from qndlg.lgi_metrics import corr_sign

for rho in (0.0, 0.5, 0.9, -0.7):
    gamma = np.array([[1.0, rho], [rho, 1.0]])
    est = oracle.mc_sign_corr(gamma, 1_000_000, seed=1)
    print(f"rho={rho:+.1f}  exact={corr_sign(1, rho, 1):+.5f}  sampled={est.value:+.5f} +- {est.std_error:.5f}")

# %%
# Two repeated readouts of an undisturbed J_z share the spin variance but each
# carries its own light shot noise, so their signs agree only partly.
gain = 25.0
shared = gain ** 2 * 5e5
total = shared + 1.25e8
print("two ideal repeated readouts:", corr_sign(total, shared, total))
