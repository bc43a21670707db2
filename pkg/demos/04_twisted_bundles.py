"""Twisted profiles in complex dimension 4.

With slope k a(r) the construction still gives psi = n - k a, so Ricci is
non-negative for 1 <= k <= n-1, and the flow again makes lambda2 negative
near the cap.  The smooth-extension verdict for k > 1 is heuristic.
"""

import numpy as np

from kahlerflow import analysis, build_profile, flow
from kahlerflow.profile import ProfileParams

grid = np.linspace(-40, 40, 4096)
for k in (1, 2, 3):
    profile = build_profile(ProfileParams(n=4, k=k))
    cert = analysis.certify_initial(profile, grid)
    config = flow.SolverConfig()
    end = flow.evolve(flow.init_state(profile, config), config)[-1]
    report = analysis.detect_mixed_sign([end])[0]
    zero, inf = cert.extension.witnesses
    print(f"k={k}: certificate {'all true' if cert.all_true else cert.conditions}"
          f"{' (heuristic at the ends)' if cert.extension.heuristic else ''}")
    print(f"      a1 = {zero.coefficients[1]:.6f} (1/k = {1 / k:.6f}),  b1 = {inf.coefficients[1]:.6f}")
    print(f"      t=1e-3: lambda2 < 0 on {report.negative_locus.size} nodes, "
          f"r in [{report.negative_locus.min():.2f}, {report.negative_locus.max():.2f}], "
          f"threshold log(kc)/k = {report.predicted_threshold:.3f}")
