"""Measurement of a nondegenerate observable by a classical pointer.

The interaction ``H = F (x) kappa p`` drives the pointer along q at a speed
set by the eigenvalue of F. Each branch of the initial superposition lands in
its own pointer domain, and the cross terms carry the phase
``exp(-i (lambda_m - lambda_n) kappa p tau / hbar)``. Averaging that phase
over the momentum spread of the ready state suppresses the discrepancy W
between the evolved state and the von Neumann reduced mixture.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate as sp_integrate

from .config import ExperimentConfig
from .errors import (
    CalibrationFailure,
    DegenerateSpectrum,
    DimensionMismatch,
    EmptyDomain,
    GeometryInfeasible,
    InvalidGrid,
    OverlappingDomains,
)
from .evolution import EvolutionSpec, evolve_state
from .hybrid import CompositeHamiltonian, HybridState, compose_hamiltonian, embed, expect, marginals, product_state
from .phase_space import (
    P_AXIS,
    Q_AXIS,
    ClassicalState,
    Domain,
    GridFunction,
    PhaseSpaceGrid,
    PointerObservable,
    integrate,
    pointer_observable,
    ready_domain,
    shift_along_q,
)
from .quantum import QuantumObservable, QuantumState, SpectralData, eigendecompose, hermitian_basis, random_hermitian

CALIBRATION_MASS = 0.99
CALIBRATION_FIDELITY = 1.0 - 1e-6
BOUND_SLACK = 1.2
BOUND_FLOOR = 1e-9
NON_CLASSICAL = "non-classical regime"


# ------------------------------------------------------------------ geometry

def _grid_of(config: ExperimentConfig) -> PhaseSpaceGrid:
    return PhaseSpaceGrid(**config.grid)


def _initial_density(grid: PhaseSpaceGrid, support: Domain, rect: tuple, power: int) -> np.ndarray:
    """``cos^power`` bump across the q-extent of the support, flat in p."""
    q, _ = grid.mesh()
    q0, q1 = rect[0], rect[1]
    if power == 0:
        prof = np.ones(grid.shape)
    else:
        centre, length = 0.5 * (q0 + q1), q1 - q0
        prof = np.cos(np.pi * (q - centre) / length) ** power
    dens = np.where(support.mask, prof, 0.0)
    return dens / (dens.sum() * grid.cell_volume)


def _shifted_mask(mask: np.ndarray, grid: PhaseSpaceGrid, shift: float) -> tuple[np.ndarray, bool]:
    moved = shift_along_q(mask.astype(float), grid, shift)
    lost = abs(moved.sum() - mask.sum()) > 1e-9 * max(1.0, mask.sum())
    return moved > 1e-12, lost


def branch_shifts(config: ExperimentConfig, spectral: SpectralData | None = None) -> list[float]:
    """q displacement of each branch over the interaction, in config order."""
    orient = config.grid.get("orientation", 1)
    return [orient * config.coupling * b.eigenvalue * config.duration for b in config.branches]


def geometry_problems(config: ExperimentConfig) -> list[tuple[str, str]]:
    """Everything that makes the pointer geometry unusable, as ``(field, message)``."""
    try:
        grid = _grid_of(config)
    except (InvalidGrid, ValueError, TypeError) as exc:
        return [("grid", str(exc))]
    problems = []
    domains = []
    for j, b in enumerate(config.branches):
        d = Domain.from_rectangles(grid, b.domain)
        if d.is_empty():
            problems.append((f"branches[{j}].domain", "contains no grid cell"))
        domains.append(d)
    for j in range(len(domains)):
        for k in range(j + 1, len(domains)):
            if domains[j].intersects(domains[k]):
                problems.append((f"branches[{j}].domain", f"overlaps branches[{k}].domain"))
    support = Domain.from_rectangles(grid, [config.ready_support])
    if support.is_empty():
        problems.append(("ready.support", "contains no grid cell"))
        return problems
    for j, d in enumerate(domains):
        if d.intersects(support):
            problems.append(("ready.support", f"overlaps branches[{j}].domain"))
    if config.ready_is_pointer and config.ready_domain is not None:
        d0 = Domain.from_rectangles(grid, config.ready_domain)
        if not d0.contains(support):
            problems.append(("ready.domain", "does not contain the initial support"))
        for j, d in enumerate(domains):
            if d0.intersects(d):
                problems.append(("ready.domain", f"overlaps branches[{j}].domain"))
    if problems:
        return problems
    margin = math.ceil(config.pointer_width) + 2
    if support.distance_to_boundary() < margin:
        problems.append(("ready.support", f"closer than {margin} cells to the grid boundary"))
    for j, (d, shift) in enumerate(zip(domains, branch_shifts(config))):
        moved, lost = _shifted_mask(support.mask, grid, shift)
        if lost:
            problems.append((f"branches[{j}]", f"shift {shift!r} carries the support off the grid"))
            continue
        if not d.contains(Domain(grid, moved)):
            problems.append((f"branches[{j}].domain",
                             f"shift {shift!r} does not land the initial support inside the domain"))
            continue
        if Domain(grid, moved).distance_to_boundary() < margin:
            problems.append((f"branches[{j}]", f"shifted support closer than {margin} cells to the grid boundary"))
    return problems


# -------------------------------------------------------------- preparation

@dataclass(frozen=True, eq=False)
class PreparedExperiment:
    config: ExperimentConfig
    grid: PhaseSpaceGrid
    spectral: SpectralData
    eigen_index: tuple          # branch j -> column of spectral.eigenvectors
    psi: np.ndarray             # system state vector
    domains: tuple              # pointer domain of each branch
    ready: Domain               # complement of the branch domains
    support: Domain
    phi0: ClassicalState
    Phi_in: HybridState
    hamiltonian: CompositeHamiltonian
    spec: EvolutionSpec
    pointer: PointerObservable

    @property
    def amplitudes(self) -> np.ndarray:
        return self.config.amplitudes

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([b.eigenvalue for b in self.config.branches])

    @property
    def labels(self) -> tuple:
        return tuple(b.label for b in self.config.branches)

    def branch_projector(self, j: int) -> np.ndarray:
        return self.spectral.projector(self.eigen_index[j])

    def branch_vector(self, j: int) -> np.ndarray:
        return self.spectral.eigenvectors[:, self.eigen_index[j]]

    def branch_shift(self, j: int) -> float:
        return branch_shifts(self.config)[j]

    def with_psi(self, psi) -> "PreparedExperiment":
        """Same apparatus, different system input."""
        psi = np.asarray(psi, dtype=complex)
        Phi_in = product_state(QuantumState.pure(psi), self.phi0)
        return PreparedExperiment(**{**self.__dict__, "psi": psi, "Phi_in": Phi_in})


def build_experiment(config: ExperimentConfig, check_geometry: bool = True) -> PreparedExperiment:
    """Initial state ``|psi><psi| x phi_0``, Hamiltonian ``F (x) kappa p`` and pointer observable.

    Raises
    ------
    DegenerateSpectrum
        F has (nearly) coincident eigenvalues.
    OverlappingDomains
        Two pointer domains, or a domain and the initial support, share cells.
    GeometryInfeasible
        A branch shift misses its domain or approaches the grid edge.
    """
    grid = _grid_of(config)
    F = QuantumObservable(config.observable)
    spectral = eigendecompose(F)
    if len(config.branches) != spectral.dim:
        raise DimensionMismatch(f"{len(config.branches)} branches for a {spectral.dim}-dimensional observable")
    try:
        index = tuple(spectral.index_of(b.eigenvalue) for b in config.branches)
    except KeyError as exc:
        raise GeometryInfeasible(f"branch eigenvalue does not match the spectrum of F: {exc}") from exc
    if len(set(index)) != len(index):
        raise DegenerateSpectrum("two branches name the same eigenvalue")

    domains = tuple(Domain.from_rectangles(grid, b.domain) for b in config.branches)
    for j, d in enumerate(domains):
        if d.is_empty():
            raise EmptyDomain(f"pointer domain of branch {j} contains no grid cell")
    support = Domain.from_rectangles(grid, [config.ready_support])
    if support.is_empty():
        raise EmptyDomain("initial support contains no grid cell")
    extra = ()
    if config.ready_is_pointer:
        extra = (Domain.from_rectangles(grid, config.ready_domain),)
    ready = ready_domain(grid, extra + domains, ready_is_pointer=config.ready_is_pointer)
    for j, d in enumerate(domains):
        if d.intersects(support):
            raise OverlappingDomains(f"initial support overlaps the pointer domain of branch {j}")
    if check_geometry:
        problems = geometry_problems(config)
        if problems:
            raise GeometryInfeasible("; ".join(f"{f}: {m}" for f, m in problems))

    psi = spectral.eigenvectors[:, list(index)] @ config.amplitudes
    phi0 = ClassicalState(GridFunction(grid, _initial_density(grid, support, config.ready_support,
                                                              config.q_profile_power)))
    Phi_in = product_state(QuantumState.pure(psi), phi0)
    K = GridFunction.coordinate(grid, "p") * config.coupling
    hamiltonian = compose_hamiltonian(None, None, [(F, K)], grid=grid, dim=spectral.dim)
    spec = EvolutionSpec(hamiltonian, config.duration, config.n_steps, config.hbar, config.method)
    labels = tuple(b.label for b in config.branches)
    pdomains, plabels = domains, labels
    if config.ready_is_pointer:
        pdomains, plabels = extra + domains, (config.ready_label,) + labels
    pointer = pointer_observable(pdomains, plabels, width=config.pointer_width)
    return PreparedExperiment(config, grid, spectral, index, psi, domains, ready, support, phi0, Phi_in,
                              hamiltonian, spec, pointer)


# --------------------------------------------------------------- calibration

@dataclass(frozen=True)
class CalibrationEntry:
    index: int
    eigenvalue: float
    label: float
    mass: float
    fidelity: float

    @property
    def passed(self) -> bool:
        return self.mass >= CALIBRATION_MASS and self.fidelity >= CALIBRATION_FIDELITY


@dataclass(frozen=True)
class CalibrationReport:
    entries: tuple

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def lines(self) -> list[str]:
        return [f"{'PASS' if e.passed else 'FAIL'} branch {e.index} eigenvalue={e.eigenvalue!r} "
                f"mass={e.mass:.17g} fidelity={e.fidelity:.17g}" for e in self.entries]


def calibrate(experiment: PreparedExperiment, raise_on_failure: bool = True) -> CalibrationReport:
    """Run each eigenvector through the interaction and check that the pointer
    lands in its domain while the system state is left unchanged."""
    entries = []
    for j, b in enumerate(experiment.config.branches):
        v = experiment.branch_vector(j)
        Phi = product_state(QuantumState.pure(v), experiment.phi0)
        out = evolve_state(Phi, experiment.spec)
        rho, dens = marginals(out, check=False)
        mass = dens.mass(experiment.domains[j])
        fid = float(np.real(v.conj() @ rho.matrix @ v))
        entries.append(CalibrationEntry(j, b.eigenvalue, b.label, mass, fid))
    report = CalibrationReport(tuple(entries))
    if raise_on_failure:
        for e in entries:
            if not e.passed:
                raise CalibrationFailure(
                    f"branch {e.index} (eigenvalue {e.eigenvalue!r}): mass in domain {e.mass:.6g}, "
                    f"fidelity {e.fidelity:.12g}", index=e.index, report=report)
    return report


# -------------------------------------------------------------------- probes

@dataclass(frozen=True, eq=False)
class Probe:
    name: str
    A: np.ndarray
    J: GridFunction


def pointer_probes(experiment: PreparedExperiment) -> dict[str, GridFunction]:
    """Sharp and smoothed pointer, plus a sharp pointer that also reads the ready region."""
    cfg = experiment.config
    sharp = pointer_observable(experiment.pointer.domains, experiment.pointer.labels, width=0.0)
    ready = pointer_observable((experiment.ready,) + experiment.domains,
                               (cfg.ready_label,) + experiment.labels, width=0.0)
    return {"J_sharp": sharp.realization, "J_smooth": experiment.pointer.realization,
            "J_ready": ready.realization}


def standard_probes(experiment: PreparedExperiment, seed: int = 0, n_random: int | None = None) -> list[Probe]:
    """Hermitian basis crossed with the pointer probes, plus seeded random Hermitian A."""
    pointers = pointer_probes(experiment)
    probes = [Probe(f"{a}|{j}", A, J) for a, A in hermitian_basis(experiment.spectral.dim).items()
              for j, J in pointers.items()]
    n_random = experiment.config.random_probes if n_random is None else n_random
    rng = np.random.default_rng(seed)
    for r in range(n_random):
        A = random_hermitian(experiment.spectral.dim, rng)
        probes.append(Probe(f"random_{r}|J_smooth", A, pointers["J_smooth"]))
    return probes


# --------------------------------------------------------------- measurement

@dataclass(frozen=True, eq=False)
class MeasurementResult:
    Phi_f: HybridState
    Phi_ref: HybridState
    born: tuple
    eta: float
    W_values: dict
    W_bounds: dict
    residual_mass: float
    min_eigenvalue: float
    experiment: PreparedExperiment = field(repr=False)

    @property
    def max_abs_W(self) -> float:
        return max((abs(w) for w in self.W_values.values()), default=0.0)

    def bound_violations(self) -> list[str]:
        return [k for k, w in self.W_values.items() if abs(w) > BOUND_SLACK * self.W_bounds[k] + BOUND_FLOOR]


def reference_state(experiment: PreparedExperiment) -> HybridState:
    """``sum_j |c_j|^2 P_j x phi_j`` with ``phi_j`` the ready density carried by branch j."""
    grid = experiment.grid
    weights = np.abs(experiment.amplitudes) ** 2
    total = np.zeros(grid.shape + (experiment.spectral.dim,) * 2, dtype=complex)
    for j, w in enumerate(weights):
        moved = shift_along_q(experiment.phi0.density.values, grid, experiment.branch_shift(j))
        total += w * moved[..., None, None] * experiment.branch_projector(j)[None, None]
    return HybridState(grid, total, check=False)


def reduce_initial(experiment: PreparedExperiment) -> HybridState:
    """The reduced input ``sum_j |c_j|^2 P_j x phi_0``; evolving it must reproduce :func:`reference_state`."""
    weights = np.abs(experiment.amplitudes) ** 2
    f = sum(w * experiment.branch_projector(j)[None, None] * experiment.phi0.density.values[..., None, None]
            for j, w in enumerate(weights))
    return HybridState(experiment.grid, f, check=False)


def born_probabilities(Phi: HybridState, domains: Sequence[Domain]) -> tuple[tuple, float]:
    """Classical-marginal mass of each domain, and the mass left outside all of them."""
    _, dens = marginals(Phi, check=False)
    born = tuple(max(0.0, dens.mass(d)) for d in domains)
    return born, 1.0 - sum(born)


def run_measurement(experiment: PreparedExperiment, seed: int = 0, probes: Sequence[Probe] | None = None,
                    callback: Optional[Callable] = None, stride: Optional[int] = None) -> MeasurementResult:
    Phi_f = evolve_state(experiment.Phi_in, experiment.spec, callback=callback, stride=stride)
    Phi_ref = reference_state(experiment)
    born, residual = born_probabilities(Phi_f, experiment.domains)
    if probes is None:
        probes = standard_probes(experiment, seed)
    W, B = {}, {}
    for pr in probes:
        W[pr.name] = _W(Phi_f, Phi_ref, pr.A, pr.J)
        B[pr.name] = phase_integral_bound(experiment, pr.A, pr.J)
    return MeasurementResult(Phi_f, Phi_ref, born, eta_criterion(experiment), W, B, residual,
                             Phi_f.min_eigenvalue(), experiment)


def _as_grid_function(J) -> GridFunction:
    return J.realization if isinstance(J, PointerObservable) else J


def _W(Phi_f, Phi_ref, A, J) -> float:
    A = QuantumObservable(np.asarray(A))
    if A.dim != Phi_f.dim:
        raise DimensionMismatch(f"probe dimension {A.dim} vs state dimension {Phi_f.dim}")
    O = embed(A, _as_grid_function(J))
    return expect(Phi_f, O) - expect(Phi_ref, O)


def discrepancy_W(result: MeasurementResult, A, J) -> float:
    """``(Phi_f - Phi_ref)(A (x) J)``, computed from the two states."""
    return _W(result.Phi_f, result.Phi_ref, A, J)


# ------------------------------------------------------------ oracle bound

def phase_average(omega: float, p0: float, p1: float) -> float:
    """``|(1/(p1-p0)) int_{p0}^{p1} exp(i omega p) dp|`` by oscillatory quadrature."""
    if omega == 0.0:
        return 1.0
    re, _ = sp_integrate.quad(lambda p: 1.0, p0, p1, weight="cos", wvar=omega)
    im, _ = sp_integrate.quad(lambda p: 1.0, p0, p1, weight="sin", wvar=omega)
    return float(np.hypot(re, im) / (p1 - p0))


def phase_integral_bound(experiment: PreparedExperiment, A, J) -> float:
    """Upper bound on ``|W(A, J)|`` from the phase averaging of each cross term.

    ``sum_{j != k} |c_j c_k| |A_kj| max|J| |<exp(i (lambda_k - lambda_j) kappa tau p / hbar)>_p|``
    with A in the eigenbasis of F and the average over the momentum extent of the
    initial support. Exact as a bound when J depends on q only and the ready
    density is flat in p.
    """
    cfg = experiment.config
    a = experiment.spectral.to_eigenbasis(np.asarray(A, dtype=complex))
    jmax = float(np.max(np.abs(_as_grid_function(J).values)))
    p0, p1 = experiment.support.extent(P_AXIS)
    c = experiment.amplitudes
    lam = experiment.eigenvalues
    idx = experiment.eigen_index
    total = 0.0
    for j in range(len(c)):
        for k in range(len(c)):
            if j == k or c[j] == 0 or c[k] == 0:
                continue
            omega = (lam[k] - lam[j]) * cfg.coupling * cfg.duration / cfg.hbar
            total += abs(c[j] * c[k]) * abs(a[idx[k], idx[j]]) * jmax * phase_average(omega, p0, p1)
    return float(total)


def eta_criterion(x) -> float:
    """``min gap * mean|K| over the initial support * tau / hbar``."""
    experiment = x.experiment if isinstance(x, MeasurementResult) else x
    cfg = experiment.config
    lam = np.sort(experiment.eigenvalues)
    gap = float(np.min(np.diff(lam)))
    _, p = experiment.grid.mesh()
    kbar = float(np.mean(np.abs(cfg.coupling * p[experiment.support.mask])))
    return gap * kbar * cfg.duration / cfg.hbar


# --------------------------------------------------------------------- sweep

@dataclass(frozen=True)
class SweepRow:
    scale: float
    eta_over_hbar: float
    max_abs_W: float
    max_bound: float
    regime: str


@dataclass(frozen=True)
class SweepResult:
    rows: tuple
    trend_ok: Optional[bool]          # None when there is no decade to compare
    envelope_decreasing: Optional[bool]


def _sweep_row(config: ExperimentConfig, scale: float, seed: int) -> SweepRow:
    exp = build_experiment(config.scaled(scale))
    res = run_measurement(exp, seed=seed)
    eta = res.eta
    regime = NON_CLASSICAL if eta < 1.0 else "classical"
    return SweepRow(float(scale), eta, res.max_abs_W, max(res.W_bounds.values(), default=0.0), regime)


def decoherence_sweep(config: ExperimentConfig, scales: Sequence[float] | None = None, seed: int = 0,
                      max_workers: int | None = None) -> SweepResult:
    """Scale the coupling (and the q geometry with it) and tabulate max |W|.

    Rows are independent and run concurrently; order follows ``scales``.
    """
    scales = tuple(config.sweep_scales if scales is None else scales)
    if not scales:
        raise ValueError("at least one scale is required")
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        rows = tuple(pool.map(lambda s: _sweep_row(config, s, seed), scales))
    trend = envelope = None
    if len(rows) > 1:
        by_eta = sorted(rows, key=lambda r: r.eta_over_hbar)
        lo, hi = by_eta[0], by_eta[-1]
        if hi.eta_over_hbar >= 10 * lo.eta_over_hbar * (1 - 1e-12):
            trend = hi.max_abs_W <= 0.1 * lo.max_abs_W
        envelope = all(b.max_abs_W < a.max_abs_W for a, b in zip(by_eta, by_eta[1:]))
    return SweepResult(rows, trend, envelope)
