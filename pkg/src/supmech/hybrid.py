"""Composite quantum-classical algebra.

An element ``sum_i A_i (x) f_i`` is stored as the matrix-valued field
``X(u) = sum_i f_i(u) A_i`` with shape ``(n_q, n_p, d, d)``. The bracket of
two such fields is

    {X, Y}(u) = (-i hbar)^{-1} [X(u), Y(u)]
                + 1/2 ({dX/dp, dY/dq}_+ - {dX/dq, dY/dp}_+)

which on product elements reduces to
``{A,C}_Q (x) (BD+DB)/2 + (AC+CA)/2 (x) {B,D}_cl``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, GridMismatch, InvalidState, NotHermitian
from .phase_space import (
    P_AXIS,
    Q_AXIS,
    ClassicalState,
    GridFunction,
    PhaseSpaceGrid,
    derivative,
    integrate,
)
from .quantum import HERMITIAN_TOL, STATE_TOL, QuantumObservable, QuantumState

NORMALIZATION_TOL = 1e-8


def dagger(x: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(x, -1, -2))


def hermiticity_error(x: np.ndarray) -> float:
    return float(np.max(np.abs(x - dagger(x)))) if x.size else 0.0


def _as_field(grid: PhaseSpaceGrid, x) -> np.ndarray:
    f = np.array(x, dtype=complex)
    if f.ndim != 4 or f.shape[:2] != grid.shape or f.shape[2] != f.shape[3]:
        raise DimensionMismatch(f"field shape {f.shape} incompatible with grid {grid.shape}")
    return f


@dataclass(frozen=True, eq=False)
class HybridObservable:
    """Hermitian-matrix-valued function on phase space."""

    grid: PhaseSpaceGrid
    field: np.ndarray
    check: bool = True

    def __post_init__(self):
        f = _as_field(self.grid, self.field)
        if self.check:
            err = hermiticity_error(f)
            if err > HERMITIAN_TOL:
                raise NotHermitian(f"field is not Hermitian (max deviation {err:.3e})")
        f.setflags(write=False)
        object.__setattr__(self, "field", f)

    @property
    def dim(self) -> int:
        return self.field.shape[-1]

    @classmethod
    def unit(cls, grid: PhaseSpaceGrid, dim: int) -> "HybridObservable":
        return embed(QuantumObservable(np.eye(dim)), GridFunction.constant(grid, 1.0))

    def _compatible(self, other: "HybridObservable"):
        if self.grid != other.grid:
            raise GridMismatch("observables live on different grids")
        if self.dim != other.dim:
            raise DimensionMismatch(f"dimensions {self.dim} and {other.dim} differ")

    def __add__(self, other):
        self._compatible(other)
        return HybridObservable(self.grid, self.field + other.field, check=False)

    def __sub__(self, other):
        self._compatible(other)
        return HybridObservable(self.grid, self.field - other.field, check=False)

    def __mul__(self, scalar: float):
        return HybridObservable(self.grid, self.field * float(scalar), check=False)

    __rmul__ = __mul__

    def __neg__(self):
        return HybridObservable(self.grid, -self.field, check=False)

    def at(self, i_q: int, i_p: int) -> np.ndarray:
        return self.field[i_q, i_p]


def product(X: HybridObservable, Y: HybridObservable) -> np.ndarray:
    """Cellwise matrix product ``X(u) Y(u)`` (not Hermitian in general)."""
    X._compatible(Y)
    return X.field @ Y.field


@dataclass(frozen=True, eq=False)
class HybridState:
    """Matrix-valued density on phase space, ``int trace(field) dGamma = 1``.

    ``check=False`` skips the cellwise positivity and normalization checks;
    evolved states are built that way because the hybrid flow does not keep
    every cell matrix positive semidefinite (see :meth:`min_eigenvalue`).
    """

    grid: PhaseSpaceGrid
    field: np.ndarray
    check: bool = True

    def __post_init__(self):
        f = _as_field(self.grid, self.field)
        if self.check:
            if hermiticity_error(f) > STATE_TOL:
                raise InvalidState("cell matrices are not Hermitian")
            total = self.total_trace_of(f)
            if abs(total - 1.0) > NORMALIZATION_TOL:
                raise InvalidState(f"trace integral is {total!r}, not 1")
            lam = _min_eigenvalue(f)
            if lam < -STATE_TOL:
                raise InvalidState(f"cell matrix has negative eigenvalue {lam:.3e}")
        f.setflags(write=False)
        object.__setattr__(self, "field", f)

    def total_trace_of(self, f: np.ndarray) -> float:
        return float(np.trace(f, axis1=-2, axis2=-1).real.sum() * self.grid.cell_volume)

    @property
    def dim(self) -> int:
        return self.field.shape[-1]

    @property
    def total_trace(self) -> float:
        return self.total_trace_of(self.field)

    def min_eigenvalue(self) -> float:
        """Most negative cell eigenvalue, scaled by the cell volume so it is
        comparable with probability mass per cell."""
        return _min_eigenvalue(self.field) * self.grid.cell_volume

    @classmethod
    def mixture(cls, weights: Sequence[float], states: Sequence["HybridState"], check: bool = True) -> "HybridState":
        grid = states[0].grid
        total = np.zeros_like(states[0].field)
        for w, s in zip(weights, states):
            if s.grid != grid:
                raise GridMismatch("mixture components live on different grids")
            total = total + w * s.field
        return cls(grid, total, check=check)


def _min_eigenvalue(f: np.ndarray) -> float:
    h = 0.5 * (f + dagger(f))
    return float(np.min(np.linalg.eigvalsh(h)))


def embed(A: QuantumObservable, f: GridFunction) -> HybridObservable:
    """``A (x) f`` as the field ``f(u) A``."""
    a = np.asarray(A.matrix)
    return HybridObservable(f.grid, f.values[..., None, None] * a[None, None], check=False)


def product_state(phi1: QuantumState, phi2: ClassicalState) -> HybridState:
    """``phi1 x phi2``: field ``density(u) rho``."""
    f = phi2.density.values[..., None, None] * np.asarray(phi1.matrix)[None, None]
    return HybridState(phi2.grid, f, check=False)


def expect(Phi: HybridState, O: HybridObservable) -> float:
    """``int trace(Phi(u) O(u)) dGamma``."""
    if Phi.grid != O.grid:
        raise GridMismatch("state and observable live on different grids")
    if Phi.dim != O.dim:
        raise DimensionMismatch(f"state dimension {Phi.dim} vs observable dimension {O.dim}")
    return pairing(Phi.field, O.field, Phi.grid)


def pairing(state_field: np.ndarray, obs_field: np.ndarray, grid: PhaseSpaceGrid) -> float:
    val = np.einsum("qpij,qpji->", state_field, obs_field) * grid.cell_volume
    return float(val.real)


def _anticommutator(a, b):
    return a @ b + b @ a


def bracket_field(x: np.ndarray, y: np.ndarray, grid: PhaseSpaceGrid, hbar: float) -> np.ndarray:
    """The hybrid bracket on raw fields."""
    out = (x @ y - y @ x) / (-1j * hbar)
    xp, xq = derivative(x, grid, P_AXIS), derivative(x, grid, Q_AXIS)
    yp, yq = derivative(y, grid, P_AXIS), derivative(y, grid, Q_AXIS)
    classical = 0.5 * (_anticommutator(xp, yq) - _anticommutator(xq, yp))
    return out + grid.orientation * classical


def hybrid_bracket(X: HybridObservable, Y: HybridObservable, hbar: float = 1.0) -> HybridObservable:
    X._compatible(Y)
    if not hbar > 0:
        raise ValueError("hbar must be positive")
    return HybridObservable(X.grid, bracket_field(X.field, Y.field, X.grid, hbar), check=False)


def jacobi_residual(X: HybridObservable, Y: HybridObservable, Z: HybridObservable, hbar: float = 1.0) -> np.ndarray:
    """Cellwise ``{X,{Y,Z}} + {Y,{Z,X}} + {Z,{X,Y}}``. Reported, not asserted, for hybrid triples."""
    g = X.grid
    b = lambda a, c: bracket_field(a, c, g, hbar)  # noqa: E731
    x, y, z = X.field, Y.field, Z.field
    return b(x, b(y, z)) + b(y, b(z, x)) + b(z, b(x, y))


def leibniz_residual(X: HybridObservable, Y: HybridObservable, Z: HybridObservable, hbar: float = 1.0) -> np.ndarray:
    """Cellwise ``{X, YZ} - {X,Y} Z - Y {X,Z}``."""
    g = X.grid
    x, y, z = X.field, Y.field, Z.field
    return (bracket_field(x, y @ z, g, hbar) - bracket_field(x, y, g, hbar) @ z
            - y @ bracket_field(x, z, g, hbar))


@dataclass(frozen=True, eq=False)
class CompositeHamiltonian:
    """``H1 (x) I + I (x) H2 + sum_i F_i (x) G_i``."""

    H1: QuantumObservable
    H2: GridFunction
    interactions: tuple = field(default_factory=tuple)
    realization: HybridObservable = None

    @property
    def grid(self) -> PhaseSpaceGrid:
        return self.H2.grid

    @property
    def dim(self) -> int:
        return self.H1.dim


def compose_hamiltonian(H1: QuantumObservable | None, H2: GridFunction | None,
                        interactions: Sequence[tuple[QuantumObservable, GridFunction]] = (),
                        grid: PhaseSpaceGrid | None = None, dim: int | None = None) -> CompositeHamiltonian:
    """Assemble a composite Hamiltonian; ``None`` stands for the zero element."""
    interactions = tuple(interactions)
    if grid is None:
        grids = ([H2.grid] if H2 is not None else []) + [G.grid for _, G in interactions]
        if not grids:
            raise ValueError("cannot infer the grid: pass H2, an interaction, or grid=")
        grid = grids[0]
    if dim is None:
        dims = ([H1.dim] if H1 is not None else []) + [F.dim for F, _ in interactions]
        if not dims:
            raise ValueError("cannot infer the dimension: pass H1, an interaction, or dim=")
        dim = dims[0]
    if H1 is None:
        H1 = QuantumObservable(np.zeros((dim, dim)))
    if H2 is None:
        H2 = GridFunction.constant(grid, 0.0)
    if H1.dim != dim:
        raise DimensionMismatch(f"H1 has dimension {H1.dim}, expected {dim}")
    if H2.grid != grid:
        raise GridMismatch("H2 lives on a different grid")
    total = embed(H1, GridFunction.constant(grid, 1.0)) + embed(QuantumObservable(np.eye(dim)), H2)
    for F, G in interactions:
        if F.dim != dim:
            raise DimensionMismatch(f"interaction operator has dimension {F.dim}, expected {dim}")
        if G.grid != grid:
            raise GridMismatch("interaction function lives on a different grid")
        total = total + embed(F, G)
    realization = HybridObservable(grid, total.field)
    return CompositeHamiltonian(H1, H2, interactions, realization)


def marginals(Phi: HybridState, check: bool = True) -> tuple[QuantumState, ClassicalState]:
    """Quantum marginal ``int Phi dGamma`` and classical marginal ``trace Phi(u)``.

    Both are renormalized by the total trace (which evolution conserves to
    rounding), so they are exact states whenever ``Phi`` is.
    """
    total = Phi.total_trace
    rho = integrate(Phi.field, grid=Phi.grid) / total
    rho = 0.5 * (rho + rho.conj().T)
    density = np.trace(Phi.field, axis1=-2, axis2=-1).real / total
    quantum = QuantumState(rho) if check else _unchecked_quantum_state(rho)
    return quantum, ClassicalState(GridFunction(Phi.grid, density), check=check)


def _unchecked_quantum_state(rho: np.ndarray) -> QuantumState:
    state = object.__new__(QuantumState)
    a = np.array(rho, dtype=complex)
    a.setflags(write=False)
    object.__setattr__(state, "matrix", a)
    return state
