"""Finite-dimensional operator algebra.

Observables are Hermitian ``d x d`` matrices, states are density matrices.
The quantum Poisson bracket is ``{A, B}_Q = (-i hbar)^{-1} (AB - BA)`` so that
``dA/dt = {H, A}_Q`` is the Heisenberg equation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSpectrum, DimensionMismatch, InvalidState, NotHermitian

HERMITIAN_TOL = 1e-12
STATE_TOL = 1e-10
DEGENERACY_TOL = 1e-8

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)


def _frozen(a):
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class QuantumOperator:
    """Dense complex square matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("operator has non-finite entries")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim})"


class QuantumObservable(QuantumOperator):
    """Hermitian operator. Inputs outside tolerance are rejected, not symmetrized."""

    def __post_init__(self):
        super().__post_init__()
        err = np.max(np.abs(self.matrix - self.matrix.conj().T))
        if err > HERMITIAN_TOL:
            raise NotHermitian(f"max |A - A^dagger| = {err:.3e} exceeds {HERMITIAN_TOL}")


class QuantumState(QuantumOperator):
    """Density matrix: Hermitian, positive semidefinite, unit trace."""

    def __post_init__(self):
        super().__post_init__()
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > STATE_TOL:
            raise InvalidState("density matrix is not Hermitian")
        tr = np.trace(m).real
        if abs(tr - 1.0) > STATE_TOL:
            raise InvalidState(f"trace {tr!r} differs from 1")
        lam_min = np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0]
        if lam_min < -STATE_TOL:
            raise InvalidState(f"negative eigenvalue {lam_min:.3e}")

    @classmethod
    def pure(cls, psi) -> "QuantumState":
        psi = np.asarray(psi, dtype=complex).ravel()
        norm = np.linalg.norm(psi)
        if norm == 0:
            raise InvalidState("zero vector")
        psi = psi / norm
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "QuantumState":
        return cls(np.eye(dim, dtype=complex) / dim)

    @property
    def purity(self) -> float:
        return float(np.trace(self.matrix @ self.matrix).real)


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Ascending eigenvalues and the matching orthonormal eigenvectors.

    ``eigenvectors[:, j]`` is the eigenvector for ``eigenvalues[j]``. Each
    eigenvector's largest-magnitude component is made real and positive so
    the decomposition is reproducible.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    def projector(self, j: int) -> np.ndarray:
        v = self.eigenvectors[:, j]
        return np.outer(v, v.conj())

    def index_of(self, value: float, tol: float = 1e-8) -> int:
        """Index of the eigenvalue equal to ``value`` within ``tol``."""
        diffs = np.abs(self.eigenvalues - value)
        j = int(np.argmin(diffs))
        if diffs[j] > tol * max(1.0, abs(value)):
            raise KeyError(f"{value!r} is not an eigenvalue (closest {self.eigenvalues[j]!r})")
        return j

    def to_eigenbasis(self, m: np.ndarray) -> np.ndarray:
        """``V^dagger M V``; broadcasts over leading axes."""
        v = self.eigenvectors
        return v.conj().T @ m @ v

    def from_eigenbasis(self, m: np.ndarray) -> np.ndarray:
        v = self.eigenvectors
        return v @ m @ v.conj().T


def _check_same_dim(*ops):
    dims = {op.dim for op in ops}
    if len(dims) != 1:
        raise DimensionMismatch(f"operator dimensions differ: {sorted(dims)}")


def quantum_bracket(A: QuantumOperator, B: QuantumOperator, hbar: float = 1.0) -> QuantumOperator:
    """``(-i hbar)^{-1} [A, B]``.

    Returns a :class:`QuantumObservable` when both arguments are observables.
    """
    _check_same_dim(A, B)
    if not hbar > 0:
        raise ValueError("hbar must be positive")
    a, b = A.matrix, B.matrix
    out = (a @ b - b @ a) / (-1j * hbar)
    if isinstance(A, QuantumObservable) and isinstance(B, QuantumObservable):
        # i[A,B] is Hermitian; remove rounding residue
        return QuantumObservable(0.5 * (out + out.conj().T))
    return QuantumOperator(out)


def eigendecompose(F: QuantumObservable, degeneracy_tol: float = DEGENERACY_TOL) -> SpectralData:
    """Spectral decomposition of a nondegenerate observable.

    Raises
    ------
    DegenerateSpectrum
        If two eigenvalues are closer than ``degeneracy_tol`` times the
        spectral scale (the spread of the spectrum, or its largest magnitude
        when the spread vanishes).
    """
    if not isinstance(F, QuantumObservable):
        F = QuantumObservable(np.asarray(F))
    lam, vecs = np.linalg.eigh(F.matrix)
    if len(lam) > 1:
        scale = max(lam[-1] - lam[0], np.max(np.abs(lam)), 1e-300)
        gaps = np.diff(lam)
        if np.min(gaps) < degeneracy_tol * scale:
            j = int(np.argmin(gaps))
            raise DegenerateSpectrum(
                f"eigenvalues {lam[j]!r} and {lam[j + 1]!r} are degenerate (gap {gaps[j]:.3e})"
            )
    for j in range(vecs.shape[1]):
        v = vecs[:, j]
        k = int(np.argmax(np.abs(v)))
        vecs[:, j] = v * (abs(v[k]) / v[k])
        vecs[k, j] = abs(v[k])
    lam = np.array(lam, dtype=float)
    lam.setflags(write=False)
    vecs.setflags(write=False)
    return SpectralData(lam, vecs)


def expectation(state: QuantumState, A: QuantumOperator) -> float:
    """``trace(rho A)``, real part. The imaginary residue is below 1e-10 for observables."""
    _check_same_dim(state, A)
    val = np.trace(state.matrix @ A.matrix)
    return float(val.real)


def evolve_quantum(state: QuantumState, H: QuantumObservable, t: float, hbar: float = 1.0) -> QuantumState:
    """Exact von Neumann evolution ``rho(t) = U rho U^dagger`` with
    ``U = exp(-i H t / hbar)`` built from the spectral decomposition of ``H``."""
    _check_same_dim(state, H)
    if not hbar > 0:
        raise ValueError("hbar must be positive")
    lam, v = np.linalg.eigh(H.matrix)
    u = (v * np.exp(-1j * lam * t / hbar)) @ v.conj().T
    rho = u @ state.matrix @ u.conj().T
    return QuantumState(0.5 * (rho + rho.conj().T))


def heisenberg(A: QuantumObservable, H: QuantumObservable, t: float, hbar: float = 1.0) -> QuantumObservable:
    """``A(t) = U^dagger A U``, the observable-picture counterpart of :func:`evolve_quantum`."""
    _check_same_dim(A, H)
    lam, v = np.linalg.eigh(H.matrix)
    u = (v * np.exp(-1j * lam * t / hbar)) @ v.conj().T
    a = u.conj().T @ A.matrix @ u
    return QuantumObservable(0.5 * (a + a.conj().T))


def hermitian_basis(dim: int) -> dict[str, np.ndarray]:
    """Identity plus the generalized Gell-Mann matrices.

    For ``dim == 2`` the names are ``I, sigma_x, sigma_y, sigma_z``.
    """
    if dim == 2:
        return {"I": IDENTITY_2.copy(), "sigma_x": SIGMA_X.copy(),
                "sigma_y": SIGMA_Y.copy(), "sigma_z": SIGMA_Z.copy()}
    basis = {"I": np.eye(dim, dtype=complex)}
    for j in range(dim):
        for k in range(j + 1, dim):
            s = np.zeros((dim, dim), dtype=complex)
            s[j, k] = s[k, j] = 1
            basis[f"sym_{j}{k}"] = s
            a = np.zeros((dim, dim), dtype=complex)
            a[j, k], a[k, j] = -1j, 1j
            basis[f"asym_{j}{k}"] = a
    for l in range(1, dim):
        diag = np.zeros(dim)
        diag[:l] = 1
        diag[l] = -l
        basis[f"diag_{l}"] = np.diag(diag * np.sqrt(2 / (l * (l + 1)))).astype(complex)
    return basis


def random_hermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * 0.5 * (a + a.conj().T)


def random_state(dim: int, rng: np.random.Generator) -> QuantumState:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    return QuantumState(rho / np.trace(rho).real)
