"""
Auditing the probe for accidental disturbance
=============================================

A skeptic may blame a violation on clumsy measurements. Fire two pulses with
no precession in between and compare the second readout with and without the
first. Without scattering the two agree exactly, since the interaction never
touches J_z.
"""

# %%
from qndlg import PhysicalParams
from qndlg.protocol import audit_var_diff_closed_form, disturbance_audit

for eta in (0.0, 0.5e-9, 1e-9):
    p = PhysicalParams(eta=eta)
    res = disturbance_audit(p)
    print(f"eta={eta:g}: mean_diff={res.mean_diff:g}  var_diff={res.var_diff:.6g}"
          f"  closed form={audit_var_diff_closed_form(p):.6g}")
