"""Finite-time evolution of hybrid observables and states.

Observables follow ``dO/dt = {H, O}`` and are integrated with classical RK4.
States follow the transpose flow: the state generator is built as the exact
matrix transpose of the discretized observable generator under the pairing
``<Phi, O> = sum trace(Phi O) dGamma``. Consequently the two pictures give the
same expectation values to rounding for any step count, and the trace
integral of a state is conserved exactly (the generator annihilates the unit).

For ``H = F (x) kappa p`` the flow is solved exactly along characteristics in
the eigenbasis of ``F``: component ``(m, n)`` of the state moves in q at speed
``kappa (lambda_m + lambda_n) / 2`` and picks up the phase
``exp(-i (lambda_m - lambda_n) kappa p t / hbar)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import CflViolation, DimensionMismatch, GridMismatch, MassLeak, UnsupportedCoupling
from .hybrid import CompositeHamiltonian, HybridObservable, HybridState, dagger
from .phase_space import (
    P_AXIS,
    Q_AXIS,
    GridFunction,
    PhaseSpaceGrid,
    derivative,
    derivative_adjoint,
    shift_along_q,
)
from .quantum import SpectralData, eigendecompose

GENERIC = "generic-stepper"
CHARACTERISTICS = "characteristics"
METHODS = (GENERIC, CHARACTERISTICS)

CFL_LIMIT = 0.5
# RK4 is stable on the imaginary axis up to 2*sqrt(2); keep a margin.
PHASE_LIMIT = 2.0
LEAK_BAND = 2
LEAK_TOL = 1e-6


@dataclass(frozen=True)
class EvolutionSpec:
    hamiltonian: CompositeHamiltonian
    duration: float
    n_steps: int = 512
    hbar: float = 1.0
    method: str = GENERIC

    def __post_init__(self):
        if not np.isfinite(self.duration):
            raise ValueError("duration must be finite")
        if self.n_steps < 1:
            raise ValueError("n_steps must be positive")
        if not self.hbar > 0:
            raise ValueError("hbar must be positive")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")

    @property
    def dt(self) -> float:
        return self.duration / self.n_steps

    @property
    def grid(self) -> PhaseSpaceGrid:
        return self.hamiltonian.grid


# ------------------------------------------------------------ generic stepper

def _left(m: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``M X`` for a constant matrix and a component-major field ``x[i, j, q, p]``."""
    return np.tensordot(m, x, axes=(1, 0))


def _right(x: np.ndarray, m: np.ndarray) -> np.ndarray:
    d = m.shape[0]
    out = np.zeros_like(x)
    for i in range(d):
        for k in range(d):
            for j in range(d):
                if m[k, j] != 0:
                    out[i, j] += x[i, k] * m[k, j]
    return out


class _Generator:
    """``O -> {H, O}`` and its exact transpose.

    H is kept as its terms ``sum_i M_i (x) g_i`` so products with the
    constant matrices ``M_i`` are single BLAS calls. Fields are handled in
    component-major layout ``[i, j, q, p]`` inside the stepper.
    """

    def __init__(self, spec: EvolutionSpec):
        ham = spec.hamiltonian
        grid = self.grid = spec.grid
        self.hbar = spec.hbar
        self.sign = 0.5 * grid.orientation
        d = ham.dim
        terms = []
        if np.any(ham.H1.matrix):
            terms.append((np.asarray(ham.H1.matrix), np.ones(grid.shape)))
        if np.any(ham.H2.values):
            terms.append((np.eye(d, dtype=complex), ham.H2.values))
        for F, G in ham.interactions:
            terms.append((np.asarray(F.matrix), G.values))
        self.terms = []
        for m, g in terms:
            ident = bool(np.allclose(m, m[0, 0] * np.eye(d), atol=0, rtol=0))
            gp = derivative(g, grid, P_AXIS)
            gq = derivative(g, grid, Q_AXIS)
            self.terms.append((m, ident, g, gp if np.any(gp) else None, gq if np.any(gq) else None))

    def _anti(self, m, ident, x):
        if ident:
            return 2 * m[0, 0] * x
        return _left(m, x) + _right(x, m)

    def observable(self, o: np.ndarray) -> np.ndarray:
        out = np.zeros_like(o)
        oq = op = None
        for m, ident, g, gp, gq in self.terms:
            if not ident:
                out += (1j / self.hbar) * g * (_left(m, o) - _right(o, m))
            if gp is not None:
                if oq is None:
                    oq = derivative(o, self.grid, 2, spacing_axis=Q_AXIS)
                out += self.sign * gp * self._anti(m, ident, oq)
            if gq is not None:
                if op is None:
                    op = derivative(o, self.grid, 3, spacing_axis=P_AXIS)
                out -= self.sign * gq * self._anti(m, ident, op)
        return out

    def state(self, phi: np.ndarray) -> np.ndarray:
        out = np.zeros_like(phi)
        flux_q = flux_p = None
        for m, ident, g, gp, gq in self.terms:
            if not ident:
                out += (1j / self.hbar) * g * (_right(phi, m) - _left(m, phi))
            if gp is not None or gq is not None:
                anti = self._anti(m, ident, phi)
                if gp is not None:
                    flux_q = gp * anti if flux_q is None else flux_q + gp * anti
                if gq is not None:
                    flux_p = gq * anti if flux_p is None else flux_p + gq * anti
        if flux_q is not None:
            out += self.sign * derivative_adjoint(flux_q, self.grid, 2, spacing_axis=Q_AXIS)
        if flux_p is not None:
            out -= self.sign * derivative_adjoint(flux_p, self.grid, 3, spacing_axis=P_AXIS)
        return out


def _to_components(field: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.transpose(field, (2, 3, 0, 1)))


def _from_components(x: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.transpose(x, (2, 3, 0, 1)))


def _rk4_step(f: Callable[[np.ndarray], np.ndarray], y: np.ndarray, h: float) -> np.ndarray:
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def stability_numbers(spec: EvolutionSpec) -> tuple[float, float]:
    """``(cfl, phase)``: advective Courant number and largest ``dt * omega``.

    The advective speeds are the spectral norms of ``dH/dp`` (motion in q) and
    ``dH/dq`` (motion in p); ``omega`` is the cellwise spectral spread of H over hbar.
    """
    grid = spec.grid
    h = spec.hamiltonian.realization.field
    hp = derivative(h, grid, P_AXIS)
    hq = derivative(h, grid, Q_AXIS)
    speed_q = np.max(np.abs(np.linalg.eigvalsh(hp))) if np.any(hp) else 0.0
    speed_p = np.max(np.abs(np.linalg.eigvalsh(hq))) if np.any(hq) else 0.0
    lam = np.linalg.eigvalsh(h)
    omega = np.max(lam[..., -1] - lam[..., 0]) / spec.hbar
    dt = abs(spec.dt)
    return dt * max(speed_q / grid.dq, speed_p / grid.dp), dt * omega


def check_cfl(spec: EvolutionSpec) -> None:
    cfl, phase = stability_numbers(spec)
    if cfl > CFL_LIMIT:
        raise CflViolation(f"Courant number {cfl:.3f} exceeds {CFL_LIMIT}; increase n_steps")
    if phase > PHASE_LIMIT:
        raise CflViolation(f"dt*omega = {phase:.3f} exceeds {PHASE_LIMIT}; increase n_steps")


def min_steps(hamiltonian: CompositeHamiltonian, duration: float, hbar: float = 1.0) -> int:
    """Smallest step count satisfying :func:`check_cfl`."""
    probe = EvolutionSpec(hamiltonian, duration, 1, hbar)
    cfl, phase = stability_numbers(probe)
    return max(1, int(np.ceil(max(cfl / CFL_LIMIT, phase / PHASE_LIMIT) - 1e-12)))


def _check_compatible(grid: PhaseSpaceGrid, dim: int, spec: EvolutionSpec):
    if grid != spec.grid:
        raise GridMismatch("operand and Hamiltonian live on different grids")
    if dim != spec.hamiltonian.dim:
        raise DimensionMismatch(f"operand dimension {dim} vs Hamiltonian dimension {spec.hamiltonian.dim}")


def leaked_mass(field: np.ndarray, grid: PhaseSpaceGrid, band: int = LEAK_BAND) -> float:
    """Trace mass (absolute) within ``band`` cells of the grid edge."""
    tr = np.abs(np.trace(field, axis1=-2, axis2=-1).real)
    inner = tr[band:-band, band:-band].sum()
    return float((tr.sum() - inner) * grid.cell_volume)


def _check_leak_components(x, grid):
    tr = np.abs(np.einsum("iiqp->qp", x).real)
    b = LEAK_BAND
    leak = (tr.sum() - tr[b:-b, b:-b].sum()) * grid.cell_volume
    if leak > LEAK_TOL:
        raise MassLeak(f"{leak:.3e} of the trace mass is within {LEAK_BAND} cells of the boundary")


def _check_leak(field, grid):
    leak = leaked_mass(field, grid)
    if leak > LEAK_TOL:
        raise MassLeak(f"{leak:.3e} of the trace mass is within {LEAK_BAND} cells of the boundary")


SnapshotCallback = Callable[[int, float, HybridState], None]


def evolve_observable(O: HybridObservable, spec: EvolutionSpec) -> HybridObservable:
    """``exp(tau D_H) O``."""
    _check_compatible(O.grid, O.dim, spec)
    if spec.method == CHARACTERISTICS:
        F, kappa = measurement_coupling(spec.hamiltonian)
        return _characteristics(O.field, O.grid, eigendecompose(F), kappa, spec.duration, spec.hbar,
                                observable=True, as_cls=HybridObservable)
    check_cfl(spec)
    gen = _Generator(spec)
    o = _to_components(O.field)
    for _ in range(spec.n_steps):
        o = _rk4_step(gen.observable, o, spec.dt)
    return HybridObservable(O.grid, _from_components(o), check=False)


def evolve_state(Phi: HybridState, spec: EvolutionSpec, callback: Optional[SnapshotCallback] = None,
                 stride: Optional[int] = None) -> HybridState:
    """``exp(tau D~_H) Phi``.

    ``callback(step, t, state)`` is invoked at step 0, every ``stride`` steps
    and at the final step.

    Raises
    ------
    CflViolation
        Step too large for the generic stepper.
    MassLeak
        More than 1e-6 of the trace mass comes within two cells of the boundary.
    """
    _check_compatible(Phi.grid, Phi.dim, spec)
    if spec.method == CHARACTERISTICS:
        F, kappa = measurement_coupling(spec.hamiltonian)
        return characteristics_propagator(Phi, eigendecompose(F), GridFunction.coordinate(Phi.grid, "p") * kappa,
                                          spec, callback=callback, stride=stride)
    check_cfl(spec)
    _check_leak(Phi.field, Phi.grid)
    gen = _Generator(spec)
    phi = _to_components(Phi.field)
    if callback is not None:
        callback(0, 0.0, Phi)
    for step in range(1, spec.n_steps + 1):
        phi = _rk4_step(gen.state, phi, spec.dt)
        _check_leak_components(phi, Phi.grid)
        if callback is not None and stride and (step % stride == 0 or step == spec.n_steps):
            callback(step, step * spec.dt, HybridState(Phi.grid, _from_components(phi), check=False))
    return HybridState(Phi.grid, _from_components(phi), check=False)


# ------------------------------------------------------------ characteristics

def measurement_coupling(hamiltonian: CompositeHamiltonian, tol: float = 1e-12) -> tuple:
    """Return ``(F, kappa)`` when the Hamiltonian is exactly ``F (x) kappa p``."""
    if np.any(hamiltonian.H1.matrix) or np.any(hamiltonian.H2.values):
        raise UnsupportedCoupling("characteristics require H1 = 0 and H2 = 0")
    if len(hamiltonian.interactions) != 1:
        raise UnsupportedCoupling("characteristics require exactly one interaction term F (x) K")
    F, K = hamiltonian.interactions[0]
    return F, coupling_constant(K, tol)


def coupling_constant(K: GridFunction, tol: float = 1e-12) -> float:
    """``kappa`` such that ``K = kappa p``; raises UnsupportedCoupling otherwise."""
    _, p = K.grid.mesh()
    kappa = float(np.sum(K.values * p) / np.sum(p * p))
    resid = np.max(np.abs(K.values - kappa * p))
    if resid > tol * max(1.0, np.max(np.abs(K.values))):
        raise UnsupportedCoupling(f"K is not linear in p (residual {resid:.3e})")
    return kappa


def _characteristics(field, grid, F: SpectralData, kappa, t, hbar, observable=False, as_cls=HybridState):
    lam = F.eigenvalues
    d = len(lam)
    if field.shape[-1] != d:
        raise DimensionMismatch(f"field dimension {field.shape[-1]} vs spectrum size {d}")
    eig = F.to_eigenbasis(field)
    _, p = grid.mesh()
    out = np.empty_like(eig)
    # states move forward along the flow, observables are pulled back
    direction = -1.0 if observable else 1.0
    for m in range(d):
        for n in range(d):
            speed = grid.orientation * kappa * (lam[m] + lam[n]) / 2.0
            comp = shift_along_q(eig[:, :, m, n], grid, direction * speed * t)
            phase = np.exp(-direction * 1j * (lam[m] - lam[n]) * kappa * p * t / hbar)
            out[:, :, m, n] = comp * phase
    back = F.from_eigenbasis(out)
    back = 0.5 * (back + dagger(back))
    return as_cls(grid, back, check=False)


def characteristics_propagator(Phi: HybridState, F: SpectralData, K: GridFunction, spec: EvolutionSpec,
                               callback: Optional[SnapshotCallback] = None,
                               stride: Optional[int] = None) -> HybridState:
    """Exact state flow for ``H = F (x) K`` with ``K = kappa p``.

    Non-whole-cell shifts use linear interpolation.
    """
    if K.grid != Phi.grid:
        raise GridMismatch("K and state live on different grids")
    kappa = coupling_constant(K)
    _check_leak(Phi.field, Phi.grid)
    if callback is not None:
        callback(0, 0.0, Phi)
        if stride:
            for step in range(stride, spec.n_steps, stride):
                t = step * spec.dt
                callback(step, t, _characteristics(Phi.field, Phi.grid, F, kappa, t, spec.hbar))
    out = _characteristics(Phi.field, Phi.grid, F, kappa, spec.duration, spec.hbar)
    _check_leak(out.field, out.grid)
    if callback is not None and stride:
        callback(spec.n_steps, spec.duration, out)
    return out
