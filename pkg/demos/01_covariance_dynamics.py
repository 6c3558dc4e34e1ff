"""
Following one probe pulse through the covariance matrix
========================================================

The atoms start in a coherent spin state polarized along x and each light
pulse starts shot-noise limited. A pulse couples J_z into the S_y channel
that we read out, kicks J_y through back action, and then a fraction of the
atoms scatter a photon and are replaced by noise.
"""

# %%
import numpy as np

from qndlg import PhysicalParams
from qndlg import gaussian_dynamics as gd

np.set_printoptions(precision=4, linewidth=110)
params = PhysicalParams()
print(f"survival fraction chi = {params.chi:.6f}, readout gain = {params.readout_gain:g}")

# %%
# Variables are ordered (J_y, J_z, S_y1, S_z1, S_y2, S_z2).
state = gd.init_state(params, 2)
print(state.cov)

# %%
# The interaction alone. J_z is untouched while S_y picks up gain^2 var(J_z)
# and J_y picks up the S_z noise.
after_qnd = gd.qnd_update(state, 1)
print("var(J_y):", state.cov[0, 0], "->", after_qnd.cov[0, 0])
print("var(J_z):", state.cov[1, 1], "->", after_qnd.cov[1, 1])
print("var(S_y):", state.cov[2, 2], "->", after_qnd.cov[2, 2])

# %%
# Scattering shrinks the spin block by chi^2 and adds fresh noise.
after_loss = gd.loss_update(after_qnd, params)
print("var(J_z) after loss:", after_loss.cov[1, 1])
print("invariants violated:", after_loss.check())

# %%
# A quarter turn of Larmor precession swaps the roles of J_y and J_z, so the
# second pulse now reads the quadrature that absorbed the back action.
rotated = gd.rotate(after_loss, np.pi / 2)
second = gd.pulse_step(rotated, params)
record = gd.readout_cov(second, [1, 2])
print(record.gamma_y)
