import numpy as np
import pytest
from hypothesis import given, strategies as st

from supmech.errors import DimensionMismatch, GridMismatch, InvalidState, NotHermitian
from supmech.hybrid import (
    HybridObservable,
    HybridState,
    compose_hamiltonian,
    embed,
    expect,
    hybrid_bracket,
    jacobi_residual,
    leibniz_residual,
    marginals,
    product,
    product_state,
)
from supmech.phase_space import ClassicalState, Domain, GridFunction, PhaseSpaceGrid, classical_bracket
from supmech.quantum import (
    SIGMA_X,
    SIGMA_Z,
    QuantumObservable,
    QuantumState,
    expectation,
    quantum_bracket,
    random_hermitian,
    random_state,
)

GRID = PhaseSpaceGrid(-4, 4, -3, 3, 32, 24)
seeds = st.integers(0, 2**32 - 1)


def gauss_state(grid=GRID, q0=0.0, p0=0.0, s=0.8):
    f = GridFunction.from_callable(grid, lambda q, p: np.exp(-((q - q0) ** 2 + (p - p0) ** 2) / (2 * s * s)))
    return ClassicalState(f * (1 / float(f.values.sum() * grid.cell_volume)))


def rand_fn(rng, grid=GRID):
    a, b, c = rng.normal(size=3)
    return GridFunction.from_callable(grid, lambda q, p: a * np.sin(0.5 * q + b) + c * np.cos(0.3 * p) * q)


def test_embed_examples():
    unit = embed(QuantumObservable(np.eye(2)), GridFunction.constant(GRID))
    np.testing.assert_array_equal(unit.field, HybridObservable.unit(GRID, 2).field)
    q = GridFunction.coordinate(GRID, "q")
    x = embed(QuantumObservable(SIGMA_Z), q)
    np.testing.assert_array_equal(x.field[5, 7], GRID.q[5] * SIGMA_Z)


def test_embed_product_and_sum(rng):
    A, B = QuantumObservable(random_hermitian(2, rng)), QuantumObservable(random_hermitian(2, rng))
    f, g = rand_fn(rng), rand_fn(rng)
    prod = product(embed(A, f), embed(B, g))
    expected = (f.values * g.values)[..., None, None] * (A.matrix @ B.matrix)
    np.testing.assert_allclose(prod, expected, atol=1e-13)
    s = embed(A, f) + embed(B, g)
    np.testing.assert_allclose(s.field[3, 4], f.values[3, 4] * A.matrix + g.values[3, 4] * B.matrix)


def test_observable_checks():
    f = np.zeros(GRID.shape + (2, 2), dtype=complex)
    f[0, 0, 0, 1] = 1.0
    with pytest.raises(NotHermitian):
        HybridObservable(GRID, f)
    with pytest.raises(DimensionMismatch):
        HybridObservable(GRID, np.zeros((3, 3, 2, 2)))
    other = PhaseSpaceGrid(-4, 4, -3, 3, 16, 16)
    with pytest.raises(GridMismatch):
        HybridObservable.unit(GRID, 2) + HybridObservable.unit(other, 2)
    with pytest.raises(DimensionMismatch):
        HybridObservable.unit(GRID, 2) + HybridObservable.unit(GRID, 3)


def test_product_state_uniform_mixed():
    uni = ClassicalState.uniform(Domain.full(GRID))
    phi = product_state(QuantumState.maximally_mixed(2), uni)
    np.testing.assert_allclose(phi.field, np.broadcast_to(np.eye(2) / (2 * GRID.volume), phi.field.shape))


def test_product_state_pairing():
    psi = QuantumState.pure([np.sqrt(0.3), np.sqrt(0.7)])
    for cl in (gauss_state(), gauss_state(q0=1, s=0.5)):
        phi = product_state(psi, cl)
        assert expect(phi, embed(QuantumObservable(SIGMA_Z), GridFunction.constant(GRID))) == pytest.approx(-0.4, abs=1e-8)
        d = Domain.from_rectangles(GRID, [(0, 4)])
        assert expect(phi, embed(QuantumObservable(np.eye(2)), d.indicator())) == pytest.approx(cl.mass(d), abs=1e-12)


@given(seeds)
def test_product_state_factorizes(seed):
    rng = np.random.default_rng(seed)
    rho, A = random_state(3, rng), QuantumObservable(random_hermitian(3, rng))
    cl, f = gauss_state(), rand_fn(rng)
    phi = product_state(rho, cl)
    want = expectation(rho, A) * float((f.values * cl.density.values).sum() * GRID.cell_volume)
    assert expect(phi, embed(A, f)) == pytest.approx(want, abs=1e-8)
    assert expect(phi, HybridObservable.unit(GRID, 3)) == pytest.approx(1, abs=1e-12)


def test_expect_linear_in_mixture(rng):
    states = [product_state(random_state(2, rng), gauss_state(q0=q0)) for q0 in (-1, 0, 1.5)]
    w = [0.2, 0.5, 0.3]
    mix = HybridState.mixture(w, states)
    O = embed(QuantumObservable(random_hermitian(2, rng)), rand_fn(rng))
    assert expect(mix, O) == pytest.approx(sum(wi * expect(s, O) for wi, s in zip(w, states)), abs=1e-12)


def test_expect_mismatch():
    phi = product_state(QuantumState.maximally_mixed(2), gauss_state())
    with pytest.raises(DimensionMismatch):
        expect(phi, HybridObservable.unit(GRID, 3))
    other = PhaseSpaceGrid(-4, 4, -3, 3, 16, 16)
    with pytest.raises(GridMismatch):
        expect(phi, HybridObservable.unit(other, 2))


def test_state_checks():
    good = product_state(QuantumState.maximally_mixed(2), gauss_state())
    HybridState(GRID, good.field)
    with pytest.raises(InvalidState):
        HybridState(GRID, 2 * good.field)
    bad = good.field.copy()
    bad[..., 0, 0] -= 2 * bad[..., 1, 1]
    bad[..., 1, 1] *= 3
    with pytest.raises(InvalidState):
        HybridState(GRID, bad)
    assert HybridState(GRID, bad, check=False).min_eigenvalue() < 0


# ------------------------------------------------------------- bracket

@given(seeds)
def test_classical_reduction(seed):
    rng = np.random.default_rng(seed)
    f, g = rand_fn(rng), rand_fn(rng)
    I = QuantumObservable(np.eye(2))
    out = hybrid_bracket(embed(I, f), embed(I, g))
    want = classical_bracket(f, g).values[..., None, None] * np.eye(2)
    np.testing.assert_allclose(out.field, want, atol=1e-10)


@given(seeds, st.floats(0.2, 3))
def test_quantum_reduction(seed, hbar):
    rng = np.random.default_rng(seed)
    A, B = (QuantumObservable(random_hermitian(3, rng)) for _ in range(2))
    one = GridFunction.constant(GRID)
    out = hybrid_bracket(embed(A, one), embed(B, one), hbar)
    want = quantum_bracket(A, B, hbar).matrix
    np.testing.assert_allclose(out.field, np.broadcast_to(want, out.field.shape), atol=1e-10)


def _two_term_oracle(F, K, A, J, grid, hbar):
    """``(-i hbar)^-1 K J [F, A] + {K, J} (FA + AF)/2`` assembled with numpy.gradient."""
    grad = lambda v, ax: np.gradient(v, grid.spacing(ax), axis=ax, edge_order=2)  # noqa: E731
    pb = grad(K, 1) * grad(J, 0) - grad(K, 0) * grad(J, 1)
    comm = (F @ A - A @ F) / (-1j * hbar)
    anti = (F @ A + A @ F) / 2
    return (K * J)[..., None, None] * comm + grid.orientation * pb[..., None, None] * anti


@given(seeds, st.sampled_from([1, -1]), st.floats(0.3, 2))
def test_measurement_bracket_two_term_form(seed, orientation, hbar):
    rng = np.random.default_rng(seed)
    grid = PhaseSpaceGrid(-4, 4, -3, 3, 32, 24, orientation)
    F, A = QuantumObservable(random_hermitian(2, rng)), QuantumObservable(random_hermitian(2, rng))
    kappa = rng.uniform(0.5, 5)
    K = GridFunction.coordinate(grid, "p") * kappa
    J = rand_fn(rng, grid)
    out = hybrid_bracket(embed(F, K), embed(A, J), hbar).field
    want = _two_term_oracle(F.matrix, K.values, A.matrix, J.values, grid, hbar)
    np.testing.assert_allclose(out, want, atol=1e-10)


@given(seeds)
def test_bracket_properties(seed):
    rng = np.random.default_rng(seed)
    X = embed(QuantumObservable(random_hermitian(2, rng)), rand_fn(rng)) + \
        embed(QuantumObservable(random_hermitian(2, rng)), rand_fn(rng))
    Y = embed(QuantumObservable(random_hermitian(2, rng)), rand_fn(rng))
    Z = embed(QuantumObservable(random_hermitian(2, rng)), rand_fn(rng))
    xy, yx = hybrid_bracket(X, Y).field, hybrid_bracket(Y, X).field
    np.testing.assert_allclose(xy, -yx, atol=1e-10)
    np.testing.assert_allclose(xy, np.conj(np.swapaxes(xy, -1, -2)), atol=1e-12)
    np.testing.assert_allclose(hybrid_bracket(X * 2.0 + Z, Y).field, 2 * xy + hybrid_bracket(Z, Y).field, atol=1e-10)
    assert np.max(np.abs(hybrid_bracket(X, HybridObservable.unit(GRID, 2)).field)) == 0


def test_hybrid_residuals_are_reported(rng):
    # not identities for genuinely hybrid triples; they are computed, finite, and vanish on pure triples
    X, Y, Z = (embed(QuantumObservable(random_hermitian(2, rng)), rand_fn(rng)) for _ in range(3))
    assert np.all(np.isfinite(jacobi_residual(X, Y, Z)))
    assert np.all(np.isfinite(leibniz_residual(X, Y, Z)))
    one = GridFunction.constant(GRID)
    P = [embed(QuantumObservable(random_hermitian(2, rng)), one) for _ in range(3)]
    assert np.abs(jacobi_residual(*P)).max() < 1e-10
    assert np.abs(leibniz_residual(*P)).max() < 1e-10


# ------------------------------------------------------- hamiltonians

def test_compose_examples():
    H = compose_hamiltonian(QuantumObservable(SIGMA_Z), None, grid=GRID)
    np.testing.assert_array_equal(H.realization.field, np.broadcast_to(SIGMA_Z, H.realization.field.shape))
    kin = GridFunction.from_callable(GRID, lambda q, p: p**2 / 2)
    H = compose_hamiltonian(None, kin, dim=2)
    np.testing.assert_allclose(H.realization.field[2, 3], kin.values[2, 3] * np.eye(2))
    K = GridFunction.coordinate(GRID, "p") * 5.0
    H = compose_hamiltonian(None, None, [(QuantumObservable(SIGMA_Z), K)])
    np.testing.assert_allclose(H.realization.field[:, :, 0, 0], K.values)
    np.testing.assert_allclose(H.realization.field[:, :, 1, 1], -K.values)


def test_compose_realization_invariant(rng):
    H1 = QuantumObservable(random_hermitian(2, rng))
    H2 = rand_fn(rng)
    terms = [(QuantumObservable(random_hermitian(2, rng)), rand_fn(rng)) for _ in range(2)]
    H = compose_hamiltonian(H1, H2, terms)
    want = H1.matrix + H2.values[..., None, None] * np.eye(2)
    for F, G in terms:
        want = want + G.values[..., None, None] * F.matrix
    np.testing.assert_allclose(H.realization.field, want, atol=1e-12)


def test_compose_errors():
    with pytest.raises(DimensionMismatch):
        compose_hamiltonian(QuantumObservable(SIGMA_Z), None, [(QuantumObservable(np.eye(3)), GridFunction.constant(GRID))])
    with pytest.raises(ValueError):
        compose_hamiltonian(None, None)


def test_decoupled_hamiltonian_brackets_factor(rng):
    H = compose_hamiltonian(QuantumObservable(random_hermitian(2, rng)), rand_fn(rng))
    A = QuantumObservable(random_hermitian(2, rng))
    f = rand_fn(rng)
    out = hybrid_bracket(H.realization, embed(A, f)).field
    want = (f.values[..., None, None] * quantum_bracket(H.H1, A).matrix
            + classical_bracket(H.H2, f).values[..., None, None] * A.matrix)
    np.testing.assert_allclose(out, want, atol=1e-10)


# ------------------------------------------------------------ marginals

def test_marginals_round_trip(rng):
    rho, cl = random_state(3, rng), gauss_state()
    q, c = marginals(product_state(rho, cl))
    np.testing.assert_allclose(q.matrix, rho.matrix, atol=1e-8)
    np.testing.assert_allclose(c.density.values, cl.density.values, atol=1e-8)


def test_marginals_of_reduced_mixture():
    c2 = np.array([0.3, 0.7])
    parts = [product_state(QuantumState(np.diag(e)), gauss_state(q0=q0)) for e, q0 in (([1, 0], 2), ([0, 1], -2))]
    q, _ = marginals(HybridState.mixture(c2, parts))
    np.testing.assert_allclose(q.matrix, np.diag(c2), atol=1e-8)


def test_marginals_maximally_mixed():
    uni = ClassicalState.uniform(Domain.full(GRID))
    q, c = marginals(product_state(QuantumState.maximally_mixed(2), uni))
    np.testing.assert_allclose(q.matrix, np.eye(2) / 2, atol=1e-12)
    np.testing.assert_allclose(c.density.values, 1 / GRID.volume)
