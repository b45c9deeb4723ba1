"""Multi-scale SWIPDG discretization with P1 elements on the fine triangles.

Every fine face carries the symmetric weighted interior penalty terms: faces
inside a coarse element belong to the local forms, faces on coarse faces to the
coupling forms, and boundary faces enforce homogeneous Dirichlet data weakly.
Each term is linear in the scalar factor, so the operator is assembled per
affine component.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .grid import face_rule
from .linalg import SolverError, cg_solve, sparse_matrix

#: Gauss rule on faces; the flux reconstruction uses the same points.
FACE_ORDER = 5
DEFAULT_PENALTY = 8.0


@dataclass(frozen=True)
class FaceCoupling:
    omega_minus: float
    omega_plus: float
    gamma: float
    normal: np.ndarray


def _normal_diffusivities(problem):
    grid = problem.grid
    n = grid.face_normals
    minus, plus = grid.face_elements[:, 0], grid.face_elements[:, 1]
    d_minus = np.einsum("fi,fij,fj->f", n, problem.kappa[minus], n)
    d_plus = np.einsum("fi,fij,fj->f", n, problem.kappa[np.maximum(plus, 0)], n)
    return d_minus, np.where(plus < 0, 0.0, d_plus)


def face_couplings(problem, penalty_factor):
    """Vectorized ``(omega_minus, omega_plus, gamma)`` for every fine face."""
    if penalty_factor <= 0:
        raise ValueError("penalty factor must be positive")
    grid = problem.grid
    h = grid.face_lengths
    if np.any(h <= 0):
        raise ValueError("degenerate face of zero length")
    dm, dp = _normal_diffusivities(problem)
    boundary = grid.face_on_boundary
    denom = np.where(boundary, 1.0, dm + dp)
    om = np.where(boundary, 1.0, dp / denom)
    op = np.where(boundary, 0.0, dm / denom)
    harmonic = np.where(boundary, dm, 2.0 * dm * dp / denom)
    return om, op, penalty_factor * harmonic / h


def face_coupling_data(problem, e, penalty_factor):
    om, op, gamma = face_couplings(problem, penalty_factor)
    return FaceCoupling(float(om[e]), float(op[e]), float(gamma[e]), problem.grid.face_normals[e])


@dataclass(frozen=True, eq=False)
class FaceData:
    """Per-face quadrature data for the six local DOFs (minus triangle, then plus).

    ``jump[f, q, a]`` is the jump of local basis function ``a`` at point ``q``,
    ``flux[f, a]`` its weighted-average normal flux ``omega * (kappa grad phi) . n``
    and ``lam[xi, f, q]`` the scalar components at the points.
    """

    dofs: np.ndarray
    valid: np.ndarray
    points: np.ndarray
    weights: np.ndarray
    jump: np.ndarray
    flux: np.ndarray
    gamma: np.ndarray
    lam: np.ndarray


def face_data(problem, penalty_factor):
    cache = problem.__dict__.setdefault("_face_cache", {})
    key = float(penalty_factor)
    if key not in cache:
        cache[key] = _build_face_data(problem, key)
    return cache[key]


def _build_face_data(problem, penalty_factor):
    grid = problem.grid
    om, op, gamma = face_couplings(problem, penalty_factor)
    s, w = face_rule(FACE_ORDER)
    v = grid.vertices[grid.faces]
    points = v[:, None, 0, :] + s[None, :, None] * (v[:, None, 1, :] - v[:, None, 0, :])
    weights = grid.face_lengths[:, None] * w[None, :]
    minus, plus = grid.face_elements[:, 0], grid.face_elements[:, 1]
    boundary = plus < 0
    plus_safe = np.where(boundary, minus, plus)

    dofs = np.concatenate([3 * minus[:, None] + np.arange(3), 3 * plus_safe[:, None] + np.arange(3)], axis=1)
    valid = np.ones(dofs.shape, dtype=bool)
    valid[boundary, 3:] = False

    jump = np.concatenate([grid.evaluate_basis(minus, points),
                           -grid.evaluate_basis(plus_safe, points)], axis=2)
    jump[boundary, :, 3:] = 0.0

    n = grid.face_normals
    kgm = np.einsum("fij,faj->fai", problem.kappa[minus], grid.gradients[minus])
    kgp = np.einsum("fij,faj->fai", problem.kappa[plus_safe], grid.gradients[plus_safe])
    flux = np.concatenate([om[:, None] * np.einsum("fai,fi->fa", kgm, n),
                           op[:, None] * np.einsum("fai,fi->fa", kgp, n)], axis=1)
    flux[boundary, 3:] = 0.0
    lam = problem.lam.component_values(points)
    return FaceData(dofs, valid, points, weights, jump, flux, gamma, lam)


def local_volume_matrices(problem, xi):
    """(nt, 3, 3) element matrices ``int lambda_xi kappa grad phi_b . grad phi_a``."""
    G = problem.grid.gradients
    return problem.lambda_integrals[xi][:, None, None] * np.einsum(
        "tai,tij,tbj->tab", G, problem.kappa, G)


def local_face_matrices(problem, xi, penalty_factor):
    fd = face_data(problem, penalty_factor)
    wl = fd.weights * fd.lam[xi]
    S = -np.einsum("fq,fi,fqj->fij", wl, fd.flux, fd.jump)
    P = np.einsum("fq,f,fqi,fqj->fij", wl, fd.gamma, fd.jump, fd.jump)
    return S + np.transpose(S, (0, 2, 1)) + P


def assemble_rhs(problem):
    """``l_i = int f phi_i`` for the elementwise P1 source (exact)."""
    mass = (np.ones((3, 3)) + np.eye(3)) / 12.0
    local = problem.grid.areas[:, None] * (problem.source @ mass)
    return local.ravel()


@dataclass(frozen=True, eq=False)
class AssembledOperator:
    problem: object
    penalty_factor: float
    components: tuple      # one CSR matrix per affine component
    rhs: np.ndarray

    @property
    def blocks(self):
        grid = self.problem.grid
        return [grid.dofs_of_coarse(T) for T in range(grid.num_coarse_elements)]

    def matrix(self, mu):
        theta = self.problem.lam.coefficients(mu)
        A = theta[0] * self.components[0]
        for th, Ax in zip(theta[1:], self.components[1:]):
            A = A + th * Ax
        return A

    @cached_property
    def volume_components(self):
        """Broken-gradient energy matrices (no face terms), one per component."""
        return tuple(_scatter_cells(self.problem, local_volume_matrices(self.problem, xi))
                     for xi in range(self.problem.num_components))


def _scatter_cells(problem, local):
    nt = problem.grid.num_triangles
    dofs = 3 * np.arange(nt)[:, None] + np.arange(3)
    rows = np.repeat(dofs, 3, axis=1).ravel()
    cols = np.tile(dofs, (1, 3)).ravel()
    return sparse_matrix(rows, cols, local.ravel(), (3 * nt, 3 * nt))


def assemble(problem, penalty_factor=DEFAULT_PENALTY):
    grid = problem.grid
    n = grid.num_dofs
    nt = grid.num_triangles
    fd = face_data(problem, penalty_factor)
    cell_dofs = 3 * np.arange(nt)[:, None] + np.arange(3)
    cell_rows = np.repeat(cell_dofs, 3, axis=1).ravel()
    cell_cols = np.tile(cell_dofs, (1, 3)).ravel()
    mask = (fd.valid[:, :, None] & fd.valid[:, None, :]).ravel()
    face_rows = np.repeat(fd.dofs, 6, axis=1).ravel()[mask]
    face_cols = np.tile(fd.dofs, (1, 6)).ravel()[mask]
    components = []
    for xi in range(problem.num_components):
        vol = local_volume_matrices(problem, xi).ravel()
        fac = local_face_matrices(problem, xi, penalty_factor).ravel()[mask]
        A = sparse_matrix(np.concatenate([cell_rows, face_rows]),
                          np.concatenate([cell_cols, face_cols]),
                          np.concatenate([vol, fac]), (n, n))
        # duplicate summation order differs between (i, j) and (j, i)
        components.append(((A + A.T) * 0.5).tocsr())
    return AssembledOperator(problem, float(penalty_factor), tuple(components), assemble_rhs(problem))


def dirichlet_rhs_components(problem, g, penalty_factor=DEFAULT_PENALTY):
    """Per-component right-hand sides lifting Dirichlet data ``g(x, y)`` weakly.

    Adds ``int_{boundary} (-lambda_xi kappa grad q . n + lambda_xi gamma q) g`` for every
    test function ``q``. Returns an array of shape (Xi+1, ndofs).
    """
    grid = problem.grid
    fd = face_data(problem, penalty_factor)
    bnd = grid.face_on_boundary
    gq = np.asarray(g(fd.points[bnd, :, 0], fd.points[bnd, :, 1]), dtype=float)
    out = np.zeros((problem.num_components, grid.num_dofs))
    for xi in range(problem.num_components):
        wl = (fd.weights * fd.lam[xi])[bnd] * gq
        local = (-fd.flux[bnd, None, :3] + fd.gamma[bnd, None, None] * fd.jump[bnd, :, :3])
        vals = np.einsum("fq,fqa->fa", wl, local)
        np.add.at(out[xi], fd.dofs[bnd, :3].ravel(), vals.ravel())
    return out


def solve_dg(op, mu, rel_tol=1e-12, max_iter=None, rhs=None, return_info=False):
    """Multi-scale DG approximation ``b_h(p_h, q) = l(q)`` at parameter ``mu``."""
    mu = op.problem.box.check(mu)
    b = op.rhs if rhs is None else rhs
    try:
        return cg_solve(op.matrix(mu), b, rel_tol=rel_tol, max_iter=max_iter, return_info=return_info)
    except SolverError as err:
        raise SolverError(f"{err}; the penalty factor {op.penalty_factor} may be too small",
                          residual=err.residual, iterations=err.iterations) from err
