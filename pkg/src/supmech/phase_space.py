"""Discretized one-degree-of-freedom phase space.

Functions live on cell centers of a uniform ``n_q x n_p`` grid, arrays are
indexed ``[i_q, i_p]``. Partial derivatives use second-order central
differences with second-order one-sided stencils on the boundary rows
(``numpy.gradient(..., edge_order=2)``).

The Poisson bracket follows the sign convention

    {f, g} = df/dp dg/dq - df/dq dg/dp

so that ``dq/dt = {H, q} = dH/dp``. ``PhaseSpaceGrid.orientation = -1`` flips it
to the textbook sign.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.ndimage import convolve1d

from .errors import (
    DuplicateLabel,
    EmptyDomain,
    EmptyReadyDomain,
    GridMismatch,
    InvalidGrid,
    InvalidState,
    OverlappingDomains,
    ZeroLabel,
)

MIN_CELLS = 16
NORMALIZATION_TOL = 1e-8

Q_AXIS, P_AXIS = 0, 1


@dataclass(frozen=True)
class PhaseSpaceGrid:
    q_min: float
    q_max: float
    p_min: float
    p_max: float
    n_q: int
    n_p: int
    orientation: int = 1

    def __post_init__(self):
        if not (self.q_max > self.q_min and self.p_max > self.p_min):
            raise InvalidGrid("grid bounds must satisfy q_max > q_min and p_max > p_min")
        if self.n_q < MIN_CELLS or self.n_p < MIN_CELLS:
            raise InvalidGrid(f"need at least {MIN_CELLS} cells per axis, got {self.n_q}x{self.n_p}")
        if self.orientation not in (1, -1):
            raise InvalidGrid("orientation must be +1 or -1")

    @property
    def dq(self) -> float:
        return (self.q_max - self.q_min) / self.n_q

    @property
    def dp(self) -> float:
        return (self.p_max - self.p_min) / self.n_p

    @property
    def cell_volume(self) -> float:
        return self.dq * self.dp

    @property
    def volume(self) -> float:
        return (self.q_max - self.q_min) * (self.p_max - self.p_min)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_q, self.n_p)

    @property
    def q(self) -> np.ndarray:
        """Cell-center q coordinates."""
        return self.q_min + (np.arange(self.n_q) + 0.5) * self.dq

    @property
    def p(self) -> np.ndarray:
        return self.p_min + (np.arange(self.n_p) + 0.5) * self.dp

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.q, self.p, indexing="ij")

    def spacing(self, axis: int) -> float:
        return self.dq if axis == Q_AXIS else self.dp

    def scaled_q(self, factor: float) -> "PhaseSpaceGrid":
        """Same grid with the q bounds multiplied by ``factor``."""
        return PhaseSpaceGrid(self.q_min * factor, self.q_max * factor, self.p_min, self.p_max,
                              self.n_q, self.n_p, self.orientation)


def _check_grids(*grids):
    first = grids[0]
    for g in grids[1:]:
        if g != first:
            raise GridMismatch("operands live on different grids")


# ---------------------------------------------------------------- derivatives

def derivative(values: np.ndarray, grid: PhaseSpaceGrid, axis: int, spacing_axis: int | None = None) -> np.ndarray:
    """Partial derivative along array ``axis``.

    Same stencil as ``numpy.gradient(values, h, axis=axis, edge_order=2)``.
    ``spacing_axis`` selects the grid spacing (0 = q, 1 = p) when the array
    axis is not the grid axis itself, e.g. for component-major fields.
    """
    h = grid.spacing(axis if spacing_axis is None else spacing_axis)
    v = np.moveaxis(np.asarray(values), axis, 0)
    out = np.empty(v.shape, dtype=np.result_type(v.dtype, float))
    np.subtract(v[2:], v[:-2], out=out[1:-1])
    out[0] = -3 * v[0] + 4 * v[1] - v[2]
    out[-1] = 3 * v[-1] - 4 * v[-2] + v[-3]
    out /= 2 * h
    return np.moveaxis(out, 0, axis)


def derivative_adjoint(values: np.ndarray, grid: PhaseSpaceGrid, axis: int,
                       spacing_axis: int | None = None) -> np.ndarray:
    """Exact matrix transpose of :func:`derivative` along ``axis``.

    In the interior this equals ``-derivative``; the boundary rows differ.
    """
    h = grid.spacing(axis if spacing_axis is None else spacing_axis)
    v = np.moveaxis(np.asarray(values), axis, 0)
    n = v.shape[0]
    out = np.zeros_like(v)
    out[:-2] -= v[1:-1]
    out[2:] += v[1:-1]
    out[0] -= 3 * v[0]
    out[1] += 4 * v[0]
    out[2] -= v[0]
    out[n - 3] += v[n - 1]
    out[n - 2] -= 4 * v[n - 1]
    out[n - 1] += 3 * v[n - 1]
    out /= 2 * h
    return np.moveaxis(out, 0, axis)


# --------------------------------------------------------------- grid values

@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real function sampled at cell centers."""

    grid: PhaseSpaceGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape == ():
            v = np.full(self.grid.shape, float(v))
        if v.shape != self.grid.shape:
            raise GridMismatch(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function has non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, grid: PhaseSpaceGrid, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]):
        q, p = grid.mesh()
        return cls(grid, np.broadcast_to(fn(q, p), grid.shape))

    @classmethod
    def constant(cls, grid: PhaseSpaceGrid, value: float = 1.0):
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def coordinate(cls, grid: PhaseSpaceGrid, name: str):
        """``q`` or ``p`` as a grid function."""
        q, p = grid.mesh()
        return cls(grid, {"q": q, "p": p}[name])

    def _combine(self, other, op):
        if isinstance(other, GridFunction):
            _check_grids(self.grid, other.grid)
            return GridFunction(self.grid, op(self.values, other.values))
        return GridFunction(self.grid, op(self.values, other))

    def __add__(self, other):
        return self._combine(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __rsub__(self, other):
        return self._combine(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self._combine(other, np.multiply)

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def d(self, axis: int) -> np.ndarray:
        return derivative(self.values, self.grid, axis)


def classical_bracket(f: GridFunction, g: GridFunction) -> GridFunction:
    """``{f, g} = df/dp dg/dq - df/dq dg/dp`` (times the grid orientation)."""
    _check_grids(f.grid, g.grid)
    vals = f.d(P_AXIS) * g.d(Q_AXIS) - f.d(Q_AXIS) * g.d(P_AXIS)
    return GridFunction(f.grid, f.grid.orientation * vals)


def integrate(f, grid: PhaseSpaceGrid | None = None, domain: "Domain | None" = None):
    """Midpoint rule ``sum f(cell) dGamma``; optionally restricted to ``domain``.

    Accepts a :class:`GridFunction` or a bare array (with ``grid``). Arrays with
    trailing axes (matrix fields) are integrated cellwise.
    """
    if isinstance(f, GridFunction):
        grid, values = f.grid, f.values
    else:
        if grid is None:
            raise TypeError("grid required when integrating a bare array")
        values = np.asarray(f)
    if domain is not None:
        _check_grids(grid, domain.grid)
        values = values[domain.mask]
        return values.sum(axis=0) * grid.cell_volume
    return values.sum(axis=(0, 1)) * grid.cell_volume


# ------------------------------------------------------------------- domains

@dataclass(frozen=True, eq=False)
class Domain:
    """Set of grid cells."""

    grid: PhaseSpaceGrid
    mask: np.ndarray

    def __post_init__(self):
        m = np.array(self.mask, dtype=bool)
        if m.shape != self.grid.shape:
            raise GridMismatch(f"mask shape {m.shape} does not match grid {self.grid.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    @classmethod
    def from_rectangles(cls, grid: PhaseSpaceGrid, rects: Iterable[Sequence[float | None]]):
        """Cells whose centers lie in any ``(q0, q1, p0, p1)`` rectangle (closed).

        ``p0``/``p1`` may be ``None`` (or omitted) for the full momentum range.
        """
        q, p = grid.mesh()
        mask = np.zeros(grid.shape, dtype=bool)
        eps = 1e-9 * max(grid.dq, grid.dp)
        for rect in rects:
            q0, q1, *rest = rect
            p0 = rest[0] if len(rest) > 0 and rest[0] is not None else -math.inf
            p1 = rest[1] if len(rest) > 1 and rest[1] is not None else math.inf
            mask |= (q >= q0 - eps) & (q <= q1 + eps) & (p >= p0 - eps) & (p <= p1 + eps)
        return cls(grid, mask)

    @classmethod
    def full(cls, grid: PhaseSpaceGrid):
        return cls(grid, np.ones(grid.shape, dtype=bool))

    @classmethod
    def empty(cls, grid: PhaseSpaceGrid):
        return cls(grid, np.zeros(grid.shape, dtype=bool))

    @property
    def cell_count(self) -> int:
        return int(self.mask.sum())

    @property
    def volume(self) -> float:
        return self.cell_count * self.grid.cell_volume

    def is_empty(self) -> bool:
        return self.cell_count == 0

    def intersects(self, other: "Domain") -> bool:
        _check_grids(self.grid, other.grid)
        return bool(np.any(self.mask & other.mask))

    def union(self, other: "Domain") -> "Domain":
        _check_grids(self.grid, other.grid)
        return Domain(self.grid, self.mask | other.mask)

    def difference(self, other: "Domain") -> "Domain":
        _check_grids(self.grid, other.grid)
        return Domain(self.grid, self.mask & ~other.mask)

    def contains(self, other: "Domain") -> bool:
        _check_grids(self.grid, other.grid)
        return not np.any(other.mask & ~self.mask)

    def indicator(self) -> GridFunction:
        return GridFunction(self.grid, self.mask.astype(float))

    def index_extent(self, axis: int) -> tuple[int, int]:
        """First and last occupied cell index along ``axis``."""
        if self.is_empty():
            raise EmptyDomain("empty domain has no extent")
        idx = np.nonzero(self.mask.any(axis=1 - axis))[0]
        return int(idx[0]), int(idx[-1])

    def extent(self, axis: int) -> tuple[float, float]:
        """Cell-edge extent along ``axis``."""
        lo, hi = self.index_extent(axis)
        lo_edge = (self.grid.q_min if axis == Q_AXIS else self.grid.p_min)
        h = self.grid.spacing(axis)
        return lo_edge + lo * h, lo_edge + (hi + 1) * h

    def distance_to_boundary(self) -> int:
        """Smallest number of cells between the domain and the grid edge."""
        q0, q1 = self.index_extent(Q_AXIS)
        p0, p1 = self.index_extent(P_AXIS)
        return min(q0, self.grid.n_q - 1 - q1, p0, self.grid.n_p - 1 - p1)


def _check_disjoint(domains: Sequence[Domain]):
    for j in range(len(domains)):
        for k in range(j + 1, len(domains)):
            if domains[j].intersects(domains[k]):
                raise OverlappingDomains(f"domains {j} and {k} share cells")


# ------------------------------------------------------------------ mollifier

def raised_cosine_kernel(width: float) -> np.ndarray:
    """Normalized raised-cosine weights spanning ``width`` cells (``[1.]`` for 0)."""
    if width < 0:
        raise ValueError("width must be non-negative")
    half = width / 2.0
    m = int(math.floor(half))
    i = np.arange(-m, m + 1)
    w = 1.0 + np.cos(np.pi * i / (half + 1.0))
    return w / w.sum()


def mollify(values: np.ndarray, width: float, axes: Sequence[int] = (Q_AXIS, P_AXIS)) -> np.ndarray:
    """Separable raised-cosine smoothing; edges are replicated so the result stays
    inside the convex hull of the input values."""
    out = np.asarray(values, dtype=float)
    kernel = raised_cosine_kernel(width)
    if len(kernel) == 1:
        return out.copy()
    for ax in axes:
        out = convolve1d(out, kernel, axis=ax, mode="nearest")
    return out


# ----------------------------------------------------------- pointer objects

@dataclass(frozen=True, eq=False)
class PointerObservable:
    """``J = sum_j b_j chi_{D_j}``, optionally smoothed over ``width`` cells."""

    labels: tuple
    domains: tuple
    width: float
    realization: GridFunction

    @property
    def grid(self) -> PhaseSpaceGrid:
        return self.realization.grid

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.realization.values)))


def pointer_observable(domains: Sequence[Domain], labels: Sequence[float], width: float = 2.0) -> PointerObservable:
    if len(domains) != len(labels):
        raise ValueError(f"{len(domains)} domains but {len(labels)} labels")
    if not domains:
        raise ValueError("at least one pointer domain is required")
    labels = tuple(float(b) for b in labels)
    for j, b in enumerate(labels):
        if b == 0:
            raise ZeroLabel(f"label {j} is zero")
    if len(set(labels)) != len(labels):
        raise DuplicateLabel(f"labels {labels} are not distinct")
    _check_grids(*(d.grid for d in domains))
    _check_disjoint(domains)
    grid = domains[0].grid
    sharp = np.zeros(grid.shape)
    for d, b in zip(domains, labels):
        sharp[d.mask] = b
    values = mollify(sharp, width) if width > 0 else sharp
    return PointerObservable(labels, tuple(domains), float(width), GridFunction(grid, values))


@dataclass(frozen=True, eq=False)
class ClassicalState:
    """Normalized non-negative phase-space density."""

    density: GridFunction
    check: bool = True

    def __post_init__(self):
        if self.check:
            v = self.density.values
            if np.min(v) < 0:
                raise InvalidState(f"density has negative value {np.min(v):.3e}")
            total = integrate(self.density)
            if abs(total - 1.0) > NORMALIZATION_TOL:
                raise InvalidState(f"density integrates to {total!r}, not 1")

    @property
    def grid(self) -> PhaseSpaceGrid:
        return self.density.grid

    @classmethod
    def uniform(cls, domain: Domain) -> "ClassicalState":
        if domain.is_empty():
            raise EmptyDomain("cannot build a uniform density on an empty domain")
        return cls(GridFunction(domain.grid, domain.mask / domain.volume))

    def mass(self, domain: Domain) -> float:
        return float(integrate(self.density, domain=domain))


def pointer_state(D: Domain) -> ClassicalState:
    """``rho = chi_D / V(D)``."""
    return ClassicalState.uniform(D)


def ready_domain(grid: PhaseSpaceGrid, pointer_domains: Sequence[Domain], ready_is_pointer: bool = False) -> Domain:
    """Complement of the pointer domains.

    With ``ready_is_pointer`` the first entry of ``pointer_domains`` is the
    ready reading's own domain and is not removed.
    """
    _check_disjoint(pointer_domains)
    removed = pointer_domains[1:] if ready_is_pointer else pointer_domains
    mask = np.ones(grid.shape, dtype=bool)
    for d in removed:
        _check_grids(grid, d.grid)
        mask &= ~d.mask
    out = Domain(grid, mask)
    if out.is_empty():
        raise EmptyReadyDomain("pointer domains cover the whole phase space")
    return out


# ------------------------------------------------------------------ transport

def shift_along_q(values: np.ndarray, grid: PhaseSpaceGrid, shift: float) -> np.ndarray:
    """Translate ``values`` by ``shift`` in q: ``out(q) = values(q - shift)``.

    Linear interpolation between cells, zero fill from outside the grid.
    Whole-cell shifts are exact.
    """
    values = np.asarray(values)
    s = shift / grid.dq
    n = int(math.floor(s))
    frac = s - n
    if abs(frac - 1.0) < 1e-9:
        n, frac = n + 1, 0.0
    elif frac < 1e-9:
        frac = 0.0
    out = _roll_zero(values, n)
    if frac:
        out = (1.0 - frac) * out + frac * _roll_zero(values, n + 1)
    return out


def _roll_zero(values: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros_like(values)
    size = values.shape[0]
    if abs(n) >= size:
        return out
    if n >= 0:
        out[n:] = values[:size - n]
    else:
        out[:size + n] = values[-n:]
    return out
