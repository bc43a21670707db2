"""Ricci flow immediately destroys non-negativity.

Evolves the default metric to t = 1e-3 and reports, at each snapshot, where
the radial eigenvalue lambda2 has gone negative.  Near the cap at z = 0 it is
compared with the linear-in-t prediction t * d/dt psi_r / phi_r.
"""

import numpy as np

from kahlerflow import analysis, build_profile, flow

profile = build_profile()
config = flow.SolverConfig(t_end=1e-3, snapshot_times=(0.0, 1e-4, 2.5e-4, 5e-4))
state = flow.init_state(profile, config)
snapshots = flow.evolve(state, config)

print(" t         #nodes lambda2<0   locus right edge   min lambda2")
for report in analysis.detect_mixed_sign(snapshots):
    edge = f"{report.negative_locus.max():8.4f}" if report.mixed else "      --"
    print(f"{report.t:8.1e}   {report.negative_locus.size:14d}   {edge:>16s}   {report.min_lambda2[1]: .4e}")

end = snapshots[-1]
predicted = analysis.first_order_lambda2(profile, state, end.t)
print("\n r      lambda2(t=1e-3)     t * rate / phi_r")
for r in (-30, -20, -10, -5, -2):
    i = np.argmin(np.abs(end.grid - r))
    print(f"{end.grid[i]:6.2f}  {end.lambda2[i]: .8e}  {predicted[i]: .8e}")

# The other end closes up with lambda2 > 0, so the curvature has mixed sign.
print(f"\nlambda2 near r = +30: {end.lambda2[np.argmin(np.abs(end.grid - 30))]:.4e}")
