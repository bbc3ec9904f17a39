import numpy as np
import pytest
from hypothesis import given, strategies as st

from supmech.errors import (
    DuplicateLabel,
    EmptyDomain,
    EmptyReadyDomain,
    GridMismatch,
    InvalidGrid,
    InvalidState,
    OverlappingDomains,
    ZeroLabel,
)
from supmech.phase_space import (
    P_AXIS,
    Q_AXIS,
    ClassicalState,
    Domain,
    GridFunction,
    PhaseSpaceGrid,
    classical_bracket,
    derivative,
    derivative_adjoint,
    integrate,
    mollify,
    pointer_observable,
    pointer_state,
    raised_cosine_kernel,
    ready_domain,
    shift_along_q,
)

BOX = PhaseSpaceGrid(-10, 10, -10, 10, 100, 100)


def blocks(grid=BOX):
    return (Domain.from_rectangles(grid, [(3, 7)]), Domain.from_rectangles(grid, [(-7, -3)]))


def smooth_fn(rng):
    k = rng.uniform(-1, 1, size=(3, 2))
    ph = rng.uniform(0, 2 * np.pi, 3)
    a = rng.normal(size=3)
    return lambda q, p: sum(a[i] * np.sin(k[i, 0] * q + k[i, 1] * p + ph[i]) for i in range(3))


# ---------------------------------------------------------------- grid

def test_grid_geometry():
    g = PhaseSpaceGrid(-8, 8, 0, 2, 256, 128)
    assert g.dq == 0.0625 and g.dp == 2 / 128
    assert g.volume == pytest.approx(g.cell_volume * g.n_q * g.n_p, rel=1e-12)
    assert g.q[0] == -8 + 0.03125 and g.p[-1] == 2 - 1 / 128
    q, p = g.mesh()
    assert q.shape == p.shape == (256, 128)


@pytest.mark.parametrize("kw", [dict(q_max=-20), dict(p_max=-10), dict(n_q=15), dict(n_p=8), dict(orientation=0)])
def test_grid_invalid(kw):
    args = dict(q_min=-10, q_max=10, p_min=-10, p_max=10, n_q=32, n_p=32) | kw
    with pytest.raises(InvalidGrid):
        PhaseSpaceGrid(**args)


def test_grid_function_rejects_nan():
    with pytest.raises(ValueError):
        GridFunction(BOX, np.full(BOX.shape, np.nan))


def test_grid_function_shape_mismatch():
    with pytest.raises(GridMismatch):
        GridFunction(BOX, np.zeros((3, 3)))


# ---------------------------------------------------------- derivatives

@given(st.integers(0, 2**32 - 1), st.sampled_from([Q_AXIS, P_AXIS]))
def test_derivative_matches_numpy_gradient(seed, axis):
    g = PhaseSpaceGrid(-2, 3, -1, 1, 17, 23)
    v = np.random.default_rng(seed).normal(size=g.shape)
    np.testing.assert_allclose(derivative(v, g, axis),
                               np.gradient(v, g.spacing(axis), axis=axis, edge_order=2), rtol=1e-13, atol=1e-12)


@given(st.integers(0, 2**32 - 1), st.sampled_from([Q_AXIS, P_AXIS]))
def test_derivative_adjoint_is_transpose(seed, axis):
    g = PhaseSpaceGrid(-2, 3, -1, 1, 17, 19)
    rng = np.random.default_rng(seed)
    u, v = rng.normal(size=g.shape), rng.normal(size=g.shape)
    lhs = np.sum(derivative(u, g, axis) * v)
    rhs = np.sum(u * derivative_adjoint(v, g, axis))
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_derivative_exact_on_quadratics():
    g = PhaseSpaceGrid(-3, 3, -2, 2, 32, 32)
    f = GridFunction.from_callable(g, lambda q, p: q**2 - 3 * q * p + p**2)
    q, p = g.mesh()
    np.testing.assert_allclose(f.d(Q_AXIS), 2 * q - 3 * p, atol=1e-12)
    np.testing.assert_allclose(f.d(P_AXIS), -3 * q + 2 * p, atol=1e-12)


# ------------------------------------------------------------- bracket

def test_bracket_p_q_is_one():
    p, q = GridFunction.coordinate(BOX, "p"), GridFunction.coordinate(BOX, "q")
    np.testing.assert_allclose(classical_bracket(p, q).values, 1.0, atol=1e-13)


def test_bracket_orientation_flips_sign():
    g = PhaseSpaceGrid(-10, 10, -10, 10, 32, 32, orientation=-1)
    p, q = GridFunction.coordinate(g, "p"), GridFunction.coordinate(g, "q")
    np.testing.assert_allclose(classical_bracket(p, q).values, -1.0, atol=1e-13)


def test_bracket_q_squared_p():
    q = GridFunction.coordinate(BOX, "q")
    p = GridFunction.coordinate(BOX, "p")
    out = classical_bracket(q * q, p)
    # exact: the stencil differentiates quadratics exactly
    np.testing.assert_allclose(out.values, -2 * q.values, atol=1e-12)


def test_free_particle_velocity():
    # dq/dt = {H, q} = p for H = p^2/2
    h = GridFunction.from_callable(BOX, lambda q, p: p**2 / 2)
    q = GridFunction.coordinate(BOX, "q")
    np.testing.assert_allclose(classical_bracket(h, q).values, BOX.mesh()[1], atol=1e-12)


def test_bracket_grid_mismatch():
    other = PhaseSpaceGrid(-10, 10, -10, 10, 32, 32)
    with pytest.raises(GridMismatch):
        classical_bracket(GridFunction.constant(BOX), GridFunction.constant(other))


@given(st.integers(0, 2**32 - 1))
def test_bracket_bilinear_antisymmetric(seed):
    rng = np.random.default_rng(seed)
    g = PhaseSpaceGrid(-3, 3, -3, 3, 24, 20)
    f, h, k = (GridFunction(g, rng.normal(size=g.shape)) for _ in range(3))
    b = lambda x, y: classical_bracket(x, y).values  # noqa: E731
    np.testing.assert_allclose(b(f, h), -b(h, f), atol=1e-10)
    assert np.abs(b(f, f)).max() < 1e-10
    np.testing.assert_allclose(b(f * 2.5 + k, h), 2.5 * b(f, h) + b(k, h), atol=1e-9)


def _interior_residual(n, fns, kind):
    g = PhaseSpaceGrid(-np.pi, np.pi, -np.pi, np.pi, n, n)
    f, h, k = (GridFunction.from_callable(g, fn) for fn in fns)
    b = classical_bracket
    if kind == "jacobi":
        r = b(f, b(h, k)) + b(h, b(k, f)) + b(k, b(f, h))
    else:
        r = b(f, h * k) - b(f, h) * k - h * b(f, k)
    q, p = g.mesh()
    inner = (np.abs(q) < np.pi / 2) & (np.abs(p) < np.pi / 2)
    return np.abs(r.values[inner]).max()


@pytest.mark.parametrize("kind", ["jacobi", "leibniz"])
def test_identities_converge_second_order(kind):
    rng = np.random.default_rng(7)
    for _ in range(10):
        fns = [smooth_fn(rng) for _ in range(3)]
        coarse, fine = _interior_residual(64, fns, kind), _interior_residual(128, fns, kind)
        assert fine < 2e-3
        assert coarse / fine == pytest.approx(4.0, abs=0.5)


# ------------------------------------------------------------ integrate

def test_integrate_constant():
    assert integrate(GridFunction.constant(BOX, 1.0)) == pytest.approx(400, rel=1e-12)


def test_integrate_gaussian():
    g = PhaseSpaceGrid(-10, 10, -10, 10, 64, 64)
    f = GridFunction.from_callable(g, lambda q, p: np.exp(-((q - 1) ** 2 + (p + 0.5) ** 2) / 2) / (2 * np.pi))
    assert integrate(f) == pytest.approx(1.0, abs=1e-4)


def test_integrate_array_needs_grid():
    with pytest.raises(TypeError):
        integrate(np.ones(BOX.shape))


def test_integrate_matrix_field_cellwise():
    field = np.ones(BOX.shape + (2, 2))
    np.testing.assert_allclose(integrate(field, grid=BOX), np.full((2, 2), 400.0))


# -------------------------------------------------------------- domains

def test_block_volume():
    d_plus, d_minus = blocks()
    assert d_plus.volume == pytest.approx(80) and d_minus.volume == pytest.approx(80)
    assert d_plus.extent(Q_AXIS) == pytest.approx((3, 7))
    assert d_plus.extent(P_AXIS) == pytest.approx((-10, 10))
    assert not d_plus.intersects(d_minus)


def test_domain_set_ops():
    d_plus, d_minus = blocks()
    u = d_plus.union(d_minus)
    assert u.cell_count == d_plus.cell_count + d_minus.cell_count
    assert u.contains(d_plus) and not d_plus.contains(u)
    assert u.difference(d_plus).cell_count == d_minus.cell_count
    assert Domain.empty(BOX).is_empty()
    with pytest.raises(EmptyDomain):
        Domain.empty(BOX).extent(Q_AXIS)


def test_distance_to_boundary():
    d = Domain.from_rectangles(BOX, [(-1, 1, 0.5, 1.5)])
    # cells 45..54 in q, 53..57 in p on a 100-cell axis
    assert d.distance_to_boundary() == 42


# ------------------------------------------------------------- pointer

def test_pointer_sharp():
    d_plus, d_minus = blocks()
    J = pointer_observable([d_plus, d_minus], [1, -1], width=0)
    v = J.realization.values
    np.testing.assert_array_equal(v[d_plus.mask], 1.0)
    np.testing.assert_array_equal(v[d_minus.mask], -1.0)
    np.testing.assert_array_equal(v[~(d_plus.mask | d_minus.mask)], 0.0)
    assert sorted(np.unique(v)) == [-1, 0, 1]
    assert J.max_abs == 1


@given(st.floats(0, 8), st.floats(-3, 3).filter(lambda b: b != 0), st.floats(-3, 3).filter(lambda b: b != 0))
def test_pointer_smooth_stays_in_hull(width, b1, b2):
    if b1 == b2:
        return
    d_plus, d_minus = blocks()
    v = pointer_observable([d_plus, d_minus], [b1, b2], width=width).realization.values
    lo, hi = min(0, b1, b2), max(0, b1, b2)
    assert v.min() >= lo - 1e-12 and v.max() <= hi + 1e-12


def test_pointer_errors():
    d_plus, d_minus = blocks()
    with pytest.raises(DuplicateLabel):
        pointer_observable([d_plus, d_minus], [1, 1])
    with pytest.raises(ZeroLabel):
        pointer_observable([d_plus, d_minus], [0, 1])
    wide = Domain.from_rectangles(BOX, [(-4, 4)])
    with pytest.raises(OverlappingDomains):
        pointer_observable([d_plus, wide], [1, 2])


def test_mollifier_kernel():
    np.testing.assert_array_equal(raised_cosine_kernel(0), [1.0])
    k = raised_cosine_kernel(2)
    assert len(k) == 3 and k.sum() == pytest.approx(1) and k[1] > k[0] == k[2]
    v = np.random.default_rng(0).normal(size=(20, 20))
    np.testing.assert_array_equal(mollify(v, 0), v)


# ---------------------------------------------------- classical states

def test_pointer_state():
    d_plus, _ = blocks()
    s = pointer_state(d_plus)
    np.testing.assert_allclose(s.density.values[d_plus.mask], 1 / 80)
    assert np.all(s.density.values[~d_plus.mask] == 0)
    assert s.mass(d_plus) == pytest.approx(1, abs=1e-12)
    full = pointer_state(Domain.full(BOX))
    np.testing.assert_allclose(full.density.values, 1 / 400)
    with pytest.raises(EmptyDomain):
        pointer_state(Domain.empty(BOX))


def test_classical_state_checks():
    with pytest.raises(InvalidState):
        ClassicalState(GridFunction.constant(BOX, 1.0))
    v = np.full(BOX.shape, 1 / 400)
    v[0, 0] = -1e-3
    with pytest.raises(InvalidState):
        ClassicalState(GridFunction(BOX, v))


def test_ready_domain():
    d_plus, d_minus = blocks()
    assert ready_domain(BOX, [d_plus, d_minus]).volume == pytest.approx(240)
    assert ready_domain(BOX, []).volume == pytest.approx(400)
    # the first domain is the ready reading when the ready state is a pointer state
    d0 = Domain.from_rectangles(BOX, [(-1, 1)])
    kept = ready_domain(BOX, [d0, d_plus, d_minus], ready_is_pointer=True)
    assert kept.contains(d0) and kept.volume == pytest.approx(240)
    tiles = [Domain.from_rectangles(BOX, [(-10, 0)]), Domain.from_rectangles(BOX, [(0.1, 10)])]
    with pytest.raises(EmptyReadyDomain):
        ready_domain(BOX, tiles)


# ------------------------------------------------------------ transport

def test_shift_whole_cells_exact():
    rng = np.random.default_rng(3)
    v = np.zeros(BOX.shape)
    v[40:60] = rng.random((20, 100))
    out = shift_along_q(v, BOX, 5 * BOX.dq)
    np.testing.assert_array_equal(out[45:65], v[40:60])
    np.testing.assert_array_equal(shift_along_q(out, BOX, -5 * BOX.dq), v)


def test_shift_fractional_conserves_sum():
    v = np.zeros(BOX.shape)
    v[40:60, :] = 1.0
    out = shift_along_q(v, BOX, 2.3 * BOX.dq)
    assert out.sum() == pytest.approx(v.sum(), rel=1e-14)
    assert out[42, 0] == pytest.approx(0.7) and out[43, 0] == 1.0 and out[62, 0] == pytest.approx(0.3)
