"""State and observable pictures agree, and RK4 converges at fourth order in the step.

Run:  python3 demos/picture_duality.py
"""

import numpy as np

from supmech.evolution import EvolutionSpec, evolve_observable, evolve_state
from supmech.hybrid import compose_hamiltonian, embed, expect, product_state
from supmech.phase_space import ClassicalState, GridFunction, PhaseSpaceGrid
from supmech.quantum import SIGMA_X, SIGMA_Z, QuantumObservable, QuantumState

grid = PhaseSpaceGrid(-6, 6, -6, 6, 32, 32)
H = compose_hamiltonian(
    QuantumObservable(0.5 * SIGMA_Z),
    GridFunction.from_callable(grid, lambda q, p: 0.1 * (p**2 + q**2)),
    [(QuantumObservable(SIGMA_X), GridFunction.from_callable(grid, lambda q, p: 0.3 * q))])

blob = GridFunction.from_callable(grid, lambda q, p: np.exp(-((q - 0.3) ** 2 + p**2) / 0.72))
Phi = product_state(QuantumState.pure([1, 1j]), ClassicalState(blob * (1 / float(blob.values.sum() * grid.cell_volume))))
O = embed(QuantumObservable(SIGMA_X), GridFunction.from_callable(grid, lambda q, p: np.sin(0.4 * q + 0.3)))

ref = expect(Phi, evolve_observable(O, EvolutionSpec(H, 1.0, 512)))
prev = None
print(f"{'N':>5} {'state picture':>22} {'observable picture':>22} {'gap':>9} {'err vs N=512':>13} {'order':>6}")
for n in (16, 32, 64, 128):
    spec = EvolutionSpec(H, 1.0, n)
    a, b = expect(evolve_state(Phi, spec), O), expect(Phi, evolve_observable(O, spec))
    err = abs(b - ref)
    order = f"{np.log2(prev / err):6.2f}" if prev else ""
    print(f"{n:5d} {a:22.15f} {b:22.15f} {abs(a - b):9.1e} {err:13.3e} {order:>6}")
    prev = err
