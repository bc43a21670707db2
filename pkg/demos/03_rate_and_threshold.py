"""The initial rate d/dt psi_r on the cap side and its sign threshold r = log c.

With c = e^-5 the closed-form rate (n-1)^2 e^r (e^r - c) / phi^(2n+1)
changes sign inside the ray r <= -delta.  Two short evolutions
Richardson-extrapolated in time recover the rate and the crossing.
"""

import numpy as np

from kahlerflow import analysis, build_profile, flow
from kahlerflow.profile import ProfileParams

for n in (2, 3):
    for c in (1.0, np.exp(-5)):
        profile = build_profile(ProfileParams(n=n, c=c))
        cmp = analysis.compare_dt_psi_r(profile)
        crossings = ", ".join(f"{x:.4f}" for x in cmp.sign_changes) or "none"
        print(f"n={n} log c={np.log(c):5.1f}:  max rel error {cmp.max_relative_error:.2e}  "
              f"(mean {cmp.mean_relative_error:.2e}),  sign change at r = {crossings}")

profile = build_profile(ProfileParams(c=np.exp(-5)))
cmp = analysis.compare_dt_psi_r(profile)
print("\n r        numerical          closed form")
for r in (-12, -8, -6, -5.2, -4.8, -3, -2):
    i = np.argmin(np.abs(cmp.r - r))
    print(f"{cmp.r[i]:7.3f}  {cmp.numerical[i]: .10e}  {cmp.analytic[i]: .10e}")
print(f"\nthreshold log(c) = {flow.sign_threshold(profile.params):.4f}")
