import numpy as np
import pytest

from lrbms.estimate import eta_global, eta_online
from lrbms.grid import build_nested_grid
from lrbms.presets import checkerboard_kappa, checkerboard_problem, lambda_field, make_problem
from lrbms.problem import energy_norm
from lrbms.reconstruct import check_coarse_conservation, reconstruct_flux
from lrbms.reduced import (FORMAT_VERSION, ModelFormatError, estimate_reduced, greedy_train,
                           load_model, local_inner_product, read_manifest, save_model, seed_and_extend,
                           seed_constants, solve_reduced)
from lrbms.swipdg import assemble, solve_dg


@pytest.fixture(scope="module")
def one_param():
    p = checkerboard_problem(2, 4, components=("one", "channel"), thetas=("1", "mu0"),
                             box=((0.5, 2.0),))
    return assemble(p)


@pytest.fixture(scope="module")
def extended(checkerboard_op):
    model = seed_constants(checkerboard_op)
    for mu in ([0.1, 1.0], [1.0, 0.1]):
        model = seed_and_extend(model, solve_dg(checkerboard_op, mu))
    return model


def test_constants_in_every_local_basis(extended):
    op = extended.operator
    for T, b in enumerate(extended.bases):
        K = local_inner_product(op, extended.mu_hat, T)
        one = np.ones(b.shape[0])
        proj = b @ (b.T @ (K @ one))
        assert np.linalg.norm(proj - one) <= 1e-12 * np.linalg.norm(one)
        G = b.T @ (K @ b)
        assert np.abs(G - np.eye(b.shape[1])).max() <= 1e-10


def test_projection_matches_definition(extended):
    B = extended.basis_matrix()
    op = extended.operator
    for A, Ar in zip(op.components, extended.components):
        np.testing.assert_allclose(Ar, B.T @ (A @ B), atol=1e-12 * np.abs(Ar).max())
        assert np.array_equal(Ar, Ar.T)
    np.testing.assert_allclose(extended.rhs, B.T @ op.rhs)


def test_reproduction_and_galerkin(extended, checkerboard):
    op = extended.operator
    for mu in ([0.1, 1.0], [1.0, 0.1]):
        _, p = solve_reduced(extended, mu)
        assert energy_norm(checkerboard, mu, p - solve_dg(op, mu)) <= 1e-8
    mu = [0.5, 0.5]
    _, p = solve_reduced(extended, mu)
    B = extended.basis_matrix()
    r = B.T @ (op.rhs - op.matrix(mu) @ p)
    assert np.abs(r).max() <= 1e-10 * np.linalg.norm(op.rhs)


def test_reduced_conservation(extended, checkerboard):
    mu = [0.37, 0.61]
    _, p = solve_reduced(extended, mu)
    u = reconstruct_flux(checkerboard, p, mu)
    for T in range(checkerboard.grid.num_coarse_elements):
        assert abs(check_coarse_conservation(checkerboard, u, T)) <= 1e-10


def test_extend_with_known_snapshot_is_noop(extended):
    again = seed_and_extend(extended, solve_dg(extended.operator, [0.1, 1.0]))
    assert again is extended


def test_constants_only_zero_source():
    grid = build_nested_grid(2, 2)
    p = make_problem(grid, lambda_field(("one",), ("mu0",)), checkerboard_kappa(grid, 5.0),
                     lambda x, y: 0 * x, ((0.5, 2.0),))
    model = seed_constants(assemble(p))
    c, q = solve_reduced(model, [1.0])
    assert not c.any() and not q.any()


def test_estimate_reduced_matches_direct(extended, checkerboard):
    mu = [0.8, 0.3]
    c, rep = estimate_reduced(extended, mu)
    direct = eta_global(checkerboard, extended.reconstruct(c), mu, mu_hat=extended.mu_hat)
    assert rep.eta == pytest.approx(direct.eta, rel=1e-9)


def test_greedy_single_parameter_reproduces(one_param):
    mu = one_param.problem.box.midpoint()
    plateau = eta_global(one_param.problem, solve_dg(one_param, mu), mu).eta
    model = greedy_train(one_param, [mu], tol=plateau * (1 + 1e-6), max_extensions=3)
    assert model.converged
    assert len(model.history) == 2
    assert model.history[1]["max_eta"] < model.history[0]["max_eta"]
    assert model.history[1]["max_eta"] == pytest.approx(plateau, rel=1e-6)


def test_greedy_infinite_tolerance(one_param):
    model = greedy_train(one_param, one_param.problem.box.uniform(3), np.inf, 5)
    assert model.converged and model.sizes == [1] * 4 and len(model.history) == 1


def test_greedy_history_and_budget(one_param):
    train = one_param.problem.box.uniform(5)
    model = greedy_train(one_param, train, 0.0, 2)
    assert not model.converged
    etas = [h["max_eta"] for h in model.history]
    assert all(b <= a for a, b in zip(etas, etas[1:]))
    for h in model.history:
        if not h.get("stagnated"):
            assert any(np.allclose(h["mu"], m) for m in train)
    assert greedy_train(one_param, train, 0.0, 0).size == 4
    with pytest.raises(ValueError):
        greedy_train(one_param, [], 0.0, 1)


def test_greedy_stops_when_snapshot_adds_nothing(one_param):
    model = greedy_train(one_param, one_param.problem.box.uniform(8), 0.0, 8)
    assert model.history[-1].get("stagnated")
    assert not model.converged
    picked = model.history[-1]["mu"]
    assert energy_norm(one_param.problem, picked,
                       solve_reduced(model, picked)[1] - solve_dg(one_param, picked)) <= 1e-8


def test_save_load_roundtrip(tmp_path, extended, checkerboard):
    save_model(extended, tmp_path / "m", extra={"note": "x"})
    loaded, meta = load_model(tmp_path / "m", checkerboard.lam)
    assert meta["note"] == "x"
    assert loaded.sizes == extended.sizes
    np.testing.assert_array_equal(loaded.components, extended.components)
    mu = [0.25, 0.75]
    c1, r1 = estimate_reduced(loaded, mu)
    c2, r2 = estimate_reduced(extended, mu)
    np.testing.assert_array_equal(c1, c2)
    assert r1.eta == r2.eta
    assert loaded.operator is None and solve_reduced(loaded, mu)[1] is None
    np.testing.assert_array_equal(loaded.reconstruct(c1), extended.reconstruct(c2))


def test_format_errors(tmp_path, extended, checkerboard):
    with pytest.raises(ModelFormatError):
        read_manifest(tmp_path)
    save_model(extended, tmp_path / "m")
    manifest = tmp_path / "m" / "manifest.txt"
    text = manifest.read_text()
    manifest.write_text(text.replace(f"format_version = {FORMAT_VERSION}", "format_version = 99"))
    with pytest.raises(ModelFormatError):
        load_model(tmp_path / "m", checkerboard.lam)
    manifest.write_text(text)
    with pytest.raises(ModelFormatError):
        load_model(tmp_path / "m", lambda_field(("one",), ("1",)))


def test_empty_model_cannot_solve(checkerboard_op):
    from lrbms.reduced import empty_model
    with pytest.raises(ValueError):
        solve_reduced(empty_model(checkerboard_op), [0.5, 0.5])


def test_online_cost_independent_of_grid(checkerboard_op):
    """Offline blocks only depend on the reduced sizes, not on the fine grid."""
    coarse = seed_constants(checkerboard_op)
    fine_op = assemble(checkerboard_problem(2, 8))
    fine = seed_constants(fine_op)
    for a, b in zip(coarse.offline.locals, fine.offline.locals):
        assert a.r_df.shape == b.r_df.shape and a.r_r.shape == b.r_r.shape
    c = np.ones(coarse.size)
    eta_online(fine.offline, c, [0.5, 0.5])
