"""Conforming reconstructions of a DG function: Oswald interpolant and RT0 diffusive flux."""

import csv

import numpy as np

from .linalg import sparse_matrix
from .problem import VOLUME_ORDER
from .grid import triangle_rule
from .swipdg import DEFAULT_PENALTY, assemble_rhs, face_data


# --------------------------------------------------------------------------- Oswald


def oswald_interpolate(grid, p):
    """Nodal values of the conforming P1 interpolant (mean of one-sided values, 0 on the boundary)."""
    p = np.asarray(p, dtype=float).reshape(-1, 3)
    nv = grid.num_vertices
    total = np.bincount(grid.triangles.ravel(), weights=p.ravel(), minlength=nv)
    count = np.bincount(grid.triangles.ravel(), minlength=nv)
    s = total / count
    s[grid.vertex_on_boundary] = 0.0
    return s


def conforming_to_dg(grid, s):
    return np.asarray(s)[grid.triangles].ravel()


def oswald_matrix(grid):
    """Sparse map DG coefficients -> DG coefficients of the Oswald interpolant."""
    tri = grid.triangles.ravel()
    count = np.bincount(tri, minlength=grid.num_vertices)
    rows, cols, vals = [], [], []
    dof_of = np.arange(grid.num_dofs)
    for v, patch_dofs in _vertex_dofs(grid, tri, dof_of):
        if grid.vertex_on_boundary[v]:
            continue
        r, c = np.meshgrid(patch_dofs, patch_dofs, indexing="ij")
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(np.full(r.size, 1.0 / count[v]))
    n = grid.num_dofs
    if not rows:
        return sparse_matrix([], [], [], (n, n))
    return sparse_matrix(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), (n, n))


def _vertex_dofs(grid, tri, dof_of):
    order = np.argsort(tri, kind="stable")
    bounds = np.searchsorted(tri[order], np.arange(grid.num_vertices + 1))
    for v in range(grid.num_vertices):
        yield v, dof_of[order[bounds[v]:bounds[v + 1]]]


def face_jumps(grid, dg):
    """Max absolute jump across every interior face (endpoint values suffice for P1)."""
    dg = np.asarray(dg).reshape(-1, 3)
    interior = ~grid.face_on_boundary
    out = np.zeros(grid.num_faces)
    tris = grid.triangles
    for side_vertices in (grid.faces[:, 0], grid.faces[:, 1]):
        t_m, t_p = grid.face_elements[:, 0], grid.face_elements[:, 1]
        vm = dg[t_m, np.argmax(tris[t_m] == side_vertices[:, None], axis=1)]
        tp = np.where(interior, t_p, t_m)
        vp = dg[tp, np.argmax(tris[tp] == side_vertices[:, None], axis=1)]
        out = np.maximum(out, np.where(interior, np.abs(vm - vp), 0.0))
    return out


# --------------------------------------------------------------------------- RT0 flux


def flux_operator(problem, xi, penalty_factor=DEFAULT_PENALTY):
    """Sparse map DG coefficients -> RT0 face DOFs of the component-``xi`` flux.

    ``DOF_e = |e|^{-1} int_e ( -{lambda_xi kappa grad p . n}_omega + lambda_xi gamma_e [[p]] )``.
    """
    cache = problem.__dict__.setdefault("_flux_cache", {})
    key = (int(xi), float(penalty_factor))
    if key not in cache:
        fd = face_data(problem, penalty_factor)
        grid = problem.grid
        wl = fd.weights * fd.lam[xi]
        vals = (np.einsum("fq,fa->fa", wl, -fd.flux)
                + np.einsum("fq,f,fqa->fa", wl, fd.gamma, fd.jump)) / grid.face_lengths[:, None]
        rows = np.repeat(np.arange(grid.num_faces), 6)
        m = fd.valid.ravel()
        cache[key] = sparse_matrix(rows[m], fd.dofs.ravel()[m], vals.ravel()[m],
                                   (grid.num_faces, grid.num_dofs))
    return cache[key]


def reconstruct_flux_component(problem, p, xi, penalty_factor=DEFAULT_PENALTY):
    return flux_operator(problem, xi, penalty_factor) @ np.asarray(p, dtype=float)


def reconstruct_flux(problem, p, mu, penalty_factor=DEFAULT_PENALTY):
    """``u_h(mu) = sum_xi theta_xi(mu) u_xi[p]``."""
    theta = problem.lam.coefficients(mu)
    return sum(th * reconstruct_flux_component(problem, p, xi, penalty_factor)
               for xi, th in enumerate(theta))


def divergence(grid, u, t=None):
    """Elementwise constant divergence of an RT0 field (all triangles if ``t`` is None)."""
    u = np.asarray(u)
    tt = np.arange(grid.num_triangles) if t is None else np.atleast_1d(t)
    faces = grid.triangle_faces[tt]
    div = np.sum(grid.triangle_face_signs[tt] * u[faces] * grid.face_lengths[faces], axis=1) / grid.areas[tt]
    return div if t is None or np.ndim(t) else float(div[0])


def rt_shape_values(grid, points_bary):
    """(nt, nq, 2, 3) values of the outward-normalized RT0 shape functions.

    Shape function ``j`` of triangle ``t`` is ``sign_j |e_j| / (2|t|) (x - P_j)`` with
    ``P_j`` the vertex opposite face ``j``.
    """
    v = grid.vertices[grid.triangles]                           # (nt, 3, 2)
    x = np.einsum("qa,tad->tqd", points_bary, v)                # (nt, nq, 2)
    scale = grid.triangle_face_signs * grid.face_lengths[grid.triangle_faces] / (2 * grid.areas[:, None])
    return scale[:, None, None, :] * (x[:, :, :, None] - np.transpose(v, (0, 2, 1))[:, None, :, :])


def rt_volume_shapes(grid):
    cache = grid.__dict__.setdefault("_rt_cache", {})
    if VOLUME_ORDER not in cache:
        bary, _ = triangle_rule(VOLUME_ORDER)
        cache[VOLUME_ORDER] = rt_shape_values(grid, bary)
    return cache[VOLUME_ORDER]


def rt_values_at_volume_points(grid, u, t=None):
    """Field values (n, nq, 2) at the volume quadrature points; ``u`` may carry
    extra trailing columns (face DOFs x fields), giving (n, nq, 2, fields)."""
    tt = np.arange(grid.num_triangles) if t is None else np.asarray(t)
    shapes = rt_volume_shapes(grid)[tt]
    dofs = np.asarray(u)[grid.triangle_faces[tt]]
    if dofs.ndim == 2:
        return np.einsum("tqdj,tj->tqd", shapes, dofs)
    return np.einsum("tqdj,tjm->tqdm", shapes, dofs)


def check_coarse_conservation(problem, u, T):
    """``(div u, 1)_T - (f, 1)_T``."""
    grid = problem.grid
    t = grid.fine_of_coarse(T)
    balance = float(np.sum(divergence(grid, u, t) * grid.areas[t]))
    source = float(np.sum(assemble_rhs(problem)[grid.dofs_of_coarse(T)]))
    return balance - source


def volume_moment_residual(problem, p, mu, T, q, penalty_factor=DEFAULT_PENALTY):
    """``(u, grad_h q)_T + b_h^T(p, q) - sum_E (omega (lambda kappa grad q) . n, [[p]])_E``.

    Only defined here for test functions ``q`` that are constant on every fine
    triangle of ``T`` (given as one value per triangle), where the first and last
    terms vanish and the residual is the local form ``b_h^T(p, q)`` restricted to
    faces inside ``T``.
    """
    grid = problem.grid
    t = grid.fine_of_coarse(T)
    qfull = np.zeros(grid.num_triangles)
    qfull[t] = q
    q_dg = np.repeat(qfull, 3)
    inner = (grid.coarse_face_of_fine_face < 0) & ~grid.face_on_boundary
    inner &= grid.coarse_of_fine[grid.face_elements[:, 0]] == T
    u = reconstruct_flux(problem, p, mu, penalty_factor)
    jumps = qfull[grid.face_elements[:, 0]] - qfull[np.maximum(grid.face_elements[:, 1], 0)]
    # b_h^T(p, q) for elementwise constant q reduces to the face flux times the jump of q
    return float(np.sum((u * grid.face_lengths * jumps)[inner]))


def write_rt_csv(path, grid, u):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["face", "mid_x", "mid_y", "n_x", "n_y", "dof"])
        for e in range(grid.num_faces):
            mx, my = grid.face_midpoints[e]
            nx, ny = grid.face_normals[e]
            w.writerow([e] + [f"{v:.17g}" for v in (mx, my, nx, ny, u[e])])
