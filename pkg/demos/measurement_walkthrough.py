"""Walk through one ideal measurement of sigma_z on the shipped spin-1/2 config.

Run:  python3 demos/measurement_walkthrough.py
"""

import numpy as np

from supmech.config import default_config
from supmech.hybrid import marginals
from supmech.measurement import build_experiment, calibrate, run_measurement

config = default_config()
exp = build_experiment(config)
print(f"grid {exp.grid.n_q}x{exp.grid.n_p}, kappa = {config.coupling}, tau = {config.duration}")
print("eigenvalues of F:", exp.eigenvalues)
print("branch shifts in q:", [exp.branch_shift(j) for j in range(len(exp.eigenvalues))])

# Each eigenstate on its own must end up in its own pointer domain.
for line in calibrate(exp).lines():
    print(line)

res = run_measurement(exp)
print(f"\neta/hbar = {res.eta:.4g}")
for b, p in zip(config.branches, res.born):
    print(f"  outcome {b.eigenvalue:+g}: pointer mass {p:.6f}   |c|^2 = {abs(b.amplitude) ** 2:.6f}")

# Off-diagonal coherence survives only as a momentum phase average, |c+ c-| |<exp(2i kappa tau p)>| here.
rho, _ = marginals(res.Phi_f, check=False)
print("\nquantum marginal in the eigenbasis of F (eigenvalues", exp.spectral.eigenvalues, "):")
print(np.round(exp.spectral.to_eigenbasis(rho.matrix), 6))

print("\nresidual discrepancy W against the reduced mixture:")
for name, w in sorted(res.W_values.items(), key=lambda kv: -abs(kv[1]))[:5]:
    print(f"  {name:24s} W = {w:+.3e}   bound {res.W_bounds[name]:.3e}")
print(f"smallest cell eigenvalue of the evolved state: {res.min_eigenvalue:.3e}")
