import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lrbms.grid import build_nested_grid, dof_permutation
from lrbms.linalg import SolverError
from lrbms.presets import (checkerboard_kappa, checkerboard_problem, constant_kappa, lambda_field,
                           make_problem, manufactured_problem)
from lrbms.problem import AffineScalarField, Theta, energy_error
from lrbms.swipdg import (assemble, assemble_rhs, dirichlet_rhs_components, face_coupling_data,
                          face_couplings, solve_dg)

from oracle import naive_swipdg


def _constant_problem(N, n, kappa, comps=("one",), thetas=("mu0",), source=lambda x, y: 0 * x):
    grid = build_nested_grid(N, n)
    if not callable(kappa):
        k = np.asarray(kappa, dtype=float)
        kappa = lambda g: constant_kappa(g, k)
    return make_problem(grid, lambda_field(comps, thetas), kappa(grid), source, ((0.5, 2.0),))


def _find_face(grid, normal, boundary, minus_centroid=None):
    for e in range(grid.num_faces):
        if grid.face_on_boundary[e] != boundary or not np.allclose(grid.face_normals[e], normal):
            continue
        if minus_centroid is None or minus_centroid(grid.centroids[grid.face_elements[e, 0]]):
            return e
    raise AssertionError("face not found")


def test_coupling_identity_kappa():
    p = _constant_problem(1, 4, np.eye(2))
    e = _find_face(p.grid, [1.0, 0.0], False)
    fc = face_coupling_data(p, e, 8.0)
    assert (fc.omega_minus, fc.omega_plus) == (0.5, 0.5)
    assert p.grid.face_lengths[e] == 0.25
    assert fc.gamma == pytest.approx(32.0)


def test_coupling_contrast():
    grid = build_nested_grid(2, 1)
    kappa = constant_kappa(grid, np.eye(2))
    kappa[grid.centroids[:, 0] < 0.5] *= 4.0
    p = make_problem(grid, lambda_field(("one",), ("1",)), kappa, lambda x, y: 0 * x, ((0.5, 2.0),))
    e = _find_face(grid, [1.0, 0.0], False, lambda c: c[0] < 0.5)
    fc = face_coupling_data(p, e, 1.0)
    assert (fc.omega_minus, fc.omega_plus) == pytest.approx((0.2, 0.8))
    # harmonic mean 8/5 over the face length 1/2
    assert fc.gamma == pytest.approx(1.6 / grid.face_lengths[e])


def test_coupling_boundary():
    p = _constant_problem(2, 1, np.eye(2))
    e = _find_face(p.grid, [0.0, -1.0], True)
    assert p.grid.face_lengths[e] == 0.5
    fc = face_coupling_data(p, e, 8.0)
    assert fc.omega_minus == 1.0 and fc.omega_plus == 0.0
    assert fc.gamma == pytest.approx(16.0)


def test_coupling_rejects_bad_penalty():
    p = _constant_problem(1, 1, np.eye(2))
    with pytest.raises(ValueError):
        face_couplings(p, 0.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.1, 20.0))
def test_coupling_invariants(seed, factor):
    grid = build_nested_grid(2, 2)
    rng = np.random.default_rng(seed)
    L = rng.standard_normal((grid.num_triangles, 2, 2))
    kappa = L @ np.transpose(L, (0, 2, 1)) + 0.1 * np.eye(2)
    p = make_problem(grid, lambda_field(("one",), ("1",)), kappa, lambda x, y: 0 * x, ((0.5, 2.0),))
    om, op, gamma = face_couplings(p, factor)
    np.testing.assert_allclose(om + op, 1.0, rtol=1e-15)
    assert np.all((om >= 0) & (om <= 1) & (op >= 0) & (op <= 1))
    assert np.all(gamma > 0)


def test_components_exactly_symmetric(checkerboard_op):
    for A in checkerboard_op.components:
        assert abs(A - A.T).max() == 0.0


def test_constant_row_sums_away_from_boundary(checkerboard_op):
    grid = checkerboard_op.problem.grid
    touches = np.zeros(grid.num_triangles, dtype=bool)
    touches[grid.face_elements[grid.face_on_boundary, 0]] = True
    rows = np.repeat(~touches, 3)
    for A in checkerboard_op.components:
        r = A @ np.ones(grid.num_dofs)
        assert np.abs(r[rows]).max() <= 1e-13 * abs(A).max()


def test_single_square_is_spd():
    p = _constant_problem(1, 1, np.eye(2), thetas=("1",))
    A = assemble(p).matrix([1.0])
    assert np.linalg.eigvalsh(A.toarray()).min() > 0
    b = np.random.default_rng(1).standard_normal(A.shape[0])
    x = solve_dg(assemble(p), [1.0], rhs=b)
    assert np.linalg.norm(A @ x - b) <= 1e-12 * np.linalg.norm(b)


def test_against_loop_oracle():
    grid = build_nested_grid(2, 2)
    kappa = checkerboard_kappa(grid, 7.0)
    kappa[:, 0, 1] = kappa[:, 1, 0] = 0.3
    lam = AffineScalarField((lambda x, y: 1 + x + 0.5 * y,), (Theta(1.0, 0),))
    p = make_problem(grid, lam, kappa, lambda x, y: 0 * x, ((0.5, 2.0),))
    A = assemble(p, 5.0).matrix([1.7]).toarray()
    ref = 1.7 * naive_swipdg(grid.vertices, grid.triangles, kappa, lam.components[0], 5.0)
    assert np.abs(A - ref).max() <= 1e-13 * np.abs(ref).max()


def test_independent_of_coarse_partition():
    problems = [checkerboard_problem(N, n, cells=4) for N, n in [(1, 4), (2, 2), (4, 1)]]
    mu = [0.3, 0.8]
    ref = assemble(problems[0]).matrix(mu)
    for p in problems[1:]:
        perm = dof_permutation(problems[0].grid, p.grid)
        A = assemble(p).matrix(mu)[perm][:, perm]
        assert abs(A - ref).max() <= 1e-14 * abs(ref).max()


def test_zero_source_gives_zero(checkerboard):
    p = make_problem(checkerboard.grid, checkerboard.lam, checkerboard.kappa, lambda x, y: 0 * x,
                     checkerboard.box)
    x, it = solve_dg(assemble(p), [0.5, 0.5], return_info=True)
    assert it == 0 and not x.any()


def test_galerkin_orthogonality(checkerboard_op):
    mu = [0.2, 0.9]
    p = solve_dg(checkerboard_op, mu)
    A = checkerboard_op.matrix(mu)
    l = checkerboard_op.rhs
    rng = np.random.default_rng(7)
    for _ in range(20):
        q = rng.standard_normal(len(l))
        assert abs(l @ q - q @ (A @ p)) <= 1e-10 * np.linalg.norm(l) * np.linalg.norm(q)


def test_affine_superposition():
    grid = build_nested_grid(2, 2)
    kappa = checkerboard_kappa(grid, 10.0)
    two = make_problem(grid, lambda_field(("one", "channel"), ("1", "mu0")), kappa,
                       lambda x, y: 1 + 0 * x, ((0.5, 2.0),))
    merged_lam = AffineScalarField((lambda x, y: 1 + two.lam.components[1](x, y),), (Theta(1.0),))
    merged = make_problem(grid, merged_lam, kappa, lambda x, y: 1 + 0 * x, ((0.5, 2.0),))
    a = solve_dg(assemble(two), [1.0])
    b = solve_dg(assemble(merged), [1.0])
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-10 * np.abs(b).max())


def test_rhs_is_exact_for_linear_source():
    p = _constant_problem(2, 2, np.eye(2), source=lambda x, y: 1 + 2 * x)
    l = assemble_rhs(p)
    # sum of all basis functions is 1, so the total is the integral of f
    assert l.sum() == pytest.approx(1 + 2 * 0.5, rel=1e-14)


def test_small_penalty_breaks_coercivity():
    p = manufactured_problem(2, 2)
    op = assemble(p, 0.01)
    assert np.linalg.eigvalsh(op.matrix([1.0]).toarray()).min() < 0
    with pytest.raises(SolverError, match="penalty"):
        solve_dg(op, [1.0])


def test_manufactured_convergence():
    errors = []
    for n in (4, 8):
        p = manufactured_problem(1, n)
        ph = solve_dg(assemble(p), [1.0])
        errors.append(energy_error(p, [1.0], p.exact([1.0])[1], ph))
    assert np.log2(errors[0] / errors[1]) == pytest.approx(1.0, abs=0.15)


def test_adjoint_consistency_piecewise_linear():
    """Flux-continuous piecewise-linear solution across a kappa jump is reproduced."""
    k1, k2 = 1.0, 50.0
    grid = build_nested_grid(2, 4)
    kappa = constant_kappa(grid, np.eye(2))
    kappa[grid.centroids[:, 0] > 0.5] *= k2
    kappa[grid.centroids[:, 0] < 0.5] *= k1
    lam = lambda_field(("one",), ("mu0",))
    p = make_problem(grid, lam, kappa, lambda x, y: 0 * x, ((0.5, 2.0),))
    a, c = 2.0, -0.7
    b = k1 * a / k2

    def exact(x, y):
        return np.where(x <= 0.5, a * x, a * 0.5 + b * (x - 0.5)) + c * y

    op = assemble(p)
    mu = [1.3]
    g = dirichlet_rhs_components(p, exact)
    rhs = op.rhs + p.lam.coefficients(mu) @ g
    ph = solve_dg(op, mu, rhs=rhs)
    v = grid.vertices[grid.triangles]
    # interpolate one-sidedly so the kink sits on element boundaries
    side = (grid.centroids[:, 0] <= 0.5)[:, None]
    ref = np.where(side, a * v[..., 0], a * 0.5 + b * (v[..., 0] - 0.5)) + c * v[..., 1]
    assert np.abs(ph - ref.ravel()).max() <= 1e-10
