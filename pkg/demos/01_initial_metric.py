"""A U(2)-invariant metric with non-negative Ricci curvature, and one that fails to close up.

Builds the default profile (n=2, k=1, c=1, delta=1), checks the six
conditions on a grid, and looks at the Ricci eigenvalues at a few points of
C^2.  The constant-slope profile is shown alongside: it has the same
pointwise properties but no expansion at infinity.
"""

import numpy as np

from kahlerflow import analysis, build_profile, ricci_eigenpairs, sample
from kahlerflow.profile import Mode

grid = np.linspace(-40, 40, 4096)

for mode in Mode:
    profile = build_profile(mode=mode)
    cert = analysis.certify_initial(profile, grid)
    print(f"\n== {mode.value} ==")
    for name, ok in cert.conditions.items():
        print(f"  {name:20s} {ok}   witness {cert.witnesses[name]}")
    zero, inf = cert.extension.witnesses
    print(f"  phi ~ {zero.coefficients[0]:.6f} + {zero.coefficients[1]:.6f} w + ...  near w = 0")
    if inf.valid:
        print(f"  phi ~ {inf.coefficients[0]:.6f} + {inf.coefficients[1]:.6f} / w + ...  near w = inf")
    else:
        print(f"  no expansion in 1/w (fit residual {inf.fit_residual:.2e})")

# The radial eigenvalue psi_r/phi_r vanishes on the rays and is positive in between.
profile = build_profile()
print("\n r       lambda1 = psi/phi   lambda2 = psi_r/phi_r   (numerical eigenpairs)")
for r in (-6.0, -0.5, 0.0, 0.5, 6.0):
    z = np.exp(r / 2) * np.array([np.cos(0.3), 1j * np.sin(0.3)])
    s = sample(profile, r)
    pairs = ricci_eigenpairs(profile, z)
    found = ", ".join(f"{p.value:.6g}" for p in pairs)
    print(f"{r:5.1f}   {s.psi / s.phi:16.6g}   {s.psi_r / s.phi_r:20.6g}   [{found}]")
