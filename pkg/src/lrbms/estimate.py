"""Localized energy-norm estimator: nonconformity, residual and diffusive-flux parts.

Evaluated either directly on a DG function or, for functions in a reduced
space, from precomputed Gram blocks whose online cost does not depend on the
fine grid.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .grid import diameter
from .problem import ProblemError, energy_norm, equivalence_constants
from .reconstruct import (conforming_to_dg, divergence, flux_operator, oswald_interpolate,
                          oswald_matrix, reconstruct_flux, rt_values_at_volume_points)
from .swipdg import DEFAULT_PENALTY

#: Poincare constant for convex elements (Payne-Weinberger), used as C_P^T.
POINCARE_CONSTANT = 1.0 / np.pi**2

NC_PARAMETERS = ("mu_bar", "mu_hat")


@dataclass
class EstimatorReport:
    eta_nc: np.ndarray
    eta_r: np.ndarray
    eta_df: np.ndarray
    mu: np.ndarray
    mu_bar: np.ndarray
    mu_hat: np.ndarray
    constants: dict
    poincare: np.ndarray
    eta: float = field(init=False)

    def __post_init__(self):
        self.eta = combine(self.eta_nc, self.eta_r, self.eta_df, self.constants)

    @property
    def totals(self):
        return tuple(float(np.sqrt(np.sum(np.square(v)))) for v in (self.eta_nc, self.eta_r, self.eta_df))

    def write_csv(self, path_or_file):
        own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["T", "eta_nc", "eta_r", "eta_df"])
            for T, vals in enumerate(zip(self.eta_nc, self.eta_r, self.eta_df)):
                w.writerow([T] + [_fmt(v) for v in vals])
            w.writerow(["global"] + [_fmt(v) for v in self.totals])
            keys = ["alpha_bar", "gamma_bar", "alpha_hat", "gamma_hat"]
            w.writerow(["eta"] + keys + ["mu", "mu_bar", "mu_hat"])
            w.writerow([_fmt(self.eta)] + [_fmt(self.constants[k]) for k in keys]
                       + [" ".join(_fmt(v) for v in m) for m in (self.mu, self.mu_bar, self.mu_hat)])
        finally:
            if own:
                fh.close()


def _fmt(v):
    return f"{float(v):.17g}"


def prefactors(constants):
    a_bar, g_bar = constants["alpha_bar"], constants["gamma_bar"]
    a_hat, g_hat = constants["alpha_hat"], constants["gamma_hat"]
    return (np.sqrt(g_bar) / np.sqrt(a_bar),
            1.0 / np.sqrt(a_bar),
            max(np.sqrt(g_hat), 1.0 / np.sqrt(a_hat)) / np.sqrt(a_bar * a_hat))


def combine(eta_nc, eta_r, eta_df, constants):
    c_nc, c_r, c_df = prefactors(constants)
    return float(c_nc * np.sqrt(np.sum(np.square(eta_nc)))
                 + c_r * np.sqrt(np.sum(np.square(eta_r)))
                 + c_df * np.sqrt(np.sum(np.square(eta_df))))


def _constants(lam, mu, mu_bar, mu_hat):
    a_bar, g_bar = equivalence_constants(lam, mu, mu_bar)
    a_hat, g_hat = equivalence_constants(lam, mu, mu_hat)
    return {"alpha_bar": a_bar, "gamma_bar": g_bar, "alpha_hat": a_hat, "gamma_hat": g_hat}


def _parameters(problem, mu, mu_bar, mu_hat):
    box = problem.box
    mu = box.check(mu)
    mu_bar = mu if mu_bar is None else box.check(mu_bar)
    mu_hat = box.midpoint() if mu_hat is None else box.check(mu_hat)
    return mu, mu_bar, mu_hat


def residual_scale(problem, T):
    """``(C_P / c^T)^{1/2} h_T``."""
    c_T = problem.eigen_bounds[2][T]
    return float(np.sqrt(POINCARE_CONSTANT / c_T) * diameter(problem.grid, T))


# --------------------------------------------------------------------------- direct


def eta_nc(problem, p, s, mu_bar, T):
    """Energy norm of ``p - s`` on ``T`` at ``mu_bar``; ``s`` holds conforming nodal values."""
    return energy_norm(problem, mu_bar, np.asarray(p) - conforming_to_dg(problem.grid, s), T)


def _l2_p1_squared(areas, g):
    """``int_t g^2`` for P1 nodal values ``g`` (exact)."""
    return areas / 12.0 * (np.sum(g * g, axis=1) + np.sum(g, axis=1) ** 2)


def eta_r(problem, u, T):
    grid = problem.grid
    t = grid.fine_of_coarse(T)
    g = problem.source[t] - divergence(grid, u, t)[:, None]
    return residual_scale(problem, T) * float(np.sqrt(np.sum(_l2_p1_squared(grid.areas[t], g))))


def eta_df(problem, p, u, mu_hat, T):
    """``|| (lam_hat kappa)^{1/2} grad_h p + (lam_hat kappa)^{-1/2} u ||_{L2(T)}``."""
    grid = problem.grid
    t = grid.fine_of_coarse(T)
    lam_hat = problem.lambda_at(mu_hat, problem.volume_points[t])           # (n, q)
    grad = np.einsum("ta,tad->td", np.asarray(p).reshape(-1, 3)[t], grid.gradients[t])
    kgrad = np.einsum("tij,tj->ti", problem.kappa[t], grad)
    v = lam_hat[..., None] * kgrad[:, None, :] + rt_values_at_volume_points(grid, u, t)
    kinv = np.linalg.inv(problem.kappa[t])
    integrand = np.einsum("tqi,tij,tqj->tq", v, kinv, v) / lam_hat
    return float(np.sqrt(max(np.sum(integrand * problem.volume_weights[t]), 0.0)))


def eta_global(problem, p, mu, mu_bar=None, mu_hat=None, penalty_factor=DEFAULT_PENALTY,
               nc_parameter="mu_bar"):
    """Full estimator report for a DG function ``p`` approximating the solution at ``mu``.

    ``mu_bar`` defaults to ``mu`` and ``mu_hat`` to the midpoint of the parameter box.
    """
    if nc_parameter not in NC_PARAMETERS:
        raise ValueError(f"nc_parameter must be one of {NC_PARAMETERS}")
    mu, mu_bar, mu_hat = _parameters(problem, mu, mu_bar, mu_hat)
    grid = problem.grid
    s = oswald_interpolate(grid, p)
    u = reconstruct_flux(problem, p, mu, penalty_factor)
    mu_nc = mu_bar if nc_parameter == "mu_bar" else mu_hat
    nT = grid.num_coarse_elements
    nc = np.array([eta_nc(problem, p, s, mu_nc, T) for T in range(nT)])
    r = np.array([eta_r(problem, u, T) for T in range(nT)])
    df = np.array([eta_df(problem, p, u, mu_hat, T) for T in range(nT)])
    return EstimatorReport(nc, r, df, mu, mu_bar, mu_hat, _constants(problem.lam, mu, mu_bar, mu_hat),
                           np.full(nT, POINCARE_CONSTANT))


# --------------------------------------------------------------------------- offline / online


@dataclass
class LocalGram:
    """Triangular factors of the estimator quantities on one coarse element.

    Each local estimator is the norm of a linear combination of fixed vectors
    (basis functions, their Oswald residuals and flux reconstructions, the
    source). Offline, those vectors are collected in a weighted matrix whose
    R factor is kept; online the norm is ``||R w||`` for a short coefficient
    vector ``w``. Working with the factor instead of the Gram matrix avoids the
    cancellation in ``w^T G w`` when the estimator is small.
    Columns refer to the reduced DOFs in ``index``.
    """

    index: np.ndarray       # reduced DOFs whose reconstructions touch T
    r_nc: np.ndarray        # (Xi+1, k, I)   energy of (id - I_os) phi_n per component
    r_r: np.ndarray         # (k, 1 + (Xi+1) I)   [f, div u_xi[phi_n]] in L2(T)
    r_df: np.ndarray        # (k, (Xi+2) I)  [(lam_hat kappa)^1/2 grad phi_n, (lam_hat kappa)^-1/2 u_xi[phi_n]]
    scale_r: float


_FIELDS = ("index", "r_nc", "r_r", "r_df")


@dataclass
class EstimatorOfflineData:
    locals: list
    mu_hat: np.ndarray
    penalty_factor: float
    size: int
    lam: object             # affine field; only its coefficient functions are used online

    def arrays(self):
        """Flat name -> array mapping used for persistence."""
        out = {"mu_hat": np.asarray(self.mu_hat, dtype=float)}
        for T, g in enumerate(self.locals):
            for name in _FIELDS:
                out[f"T{T}_{name}"] = getattr(g, name)
            out[f"T{T}_scale_r"] = np.array(g.scale_r)
        return out

    @classmethod
    def from_arrays(cls, arrays, num_coarse_elements, penalty_factor, size, lam):
        locs = []
        for T in range(num_coarse_elements):
            index, r_nc, r_r, r_df = (arrays[f"T{T}_{name}"] for name in _FIELDS)
            locs.append(LocalGram(index.astype(np.int64), r_nc, r_r, r_df, float(arrays[f"T{T}_scale_r"])))
        return cls(locs, arrays["mu_hat"], penalty_factor, size, lam)


def _r_factor(M):
    """R of a thin QR of ``M`` (rows x cols); empty columns give an empty factor."""
    if M.shape[1] == 0 or M.shape[0] == 0:
        return np.zeros((0, M.shape[1]))
    return np.linalg.qr(M, mode="r")


# Cholesky factor of the P1 mass matrix on the reference triangle, scaled by |t| later:
# int_t g^2 = |t| / 12 * g^T (I + 1 1^T) g
_P1_MASS_FACTOR = np.linalg.cholesky(np.eye(3) + np.ones((3, 3))).T


def offline_decompose(problem, basis, mu_hat=None, penalty_factor=DEFAULT_PENALTY):
    """Precompute the estimator factors for the columns of ``basis`` (ndofs x N).

    The Oswald residual and the flux reconstruction of a basis function reach
    beyond its own coarse element; the data of ``T`` therefore covers every
    column that is nonzero on ``T`` after either map.
    """
    mu_hat = problem.box.midpoint() if mu_hat is None else problem.box.check(mu_hat)
    grid = problem.grid
    B = np.asarray(basis, dtype=float)
    if B.ndim != 2 or B.shape[0] != grid.num_dofs:
        raise ValueError("basis must have shape (num_dofs, N)")
    if np.any(problem.lambda_integrals < 0):
        raise ProblemError("offline decomposition needs nonnegative scalar components")
    nX = problem.num_components
    D = B - oswald_matrix(grid) @ B
    U = [np.asarray(flux_operator(problem, xi, penalty_factor) @ B) for xi in range(nX)]
    lam_hat_all = problem.lambda_at(mu_hat, problem.volume_points)
    # kappa = C C^T and kappa^{-1} = C^{-T} C^{-1}
    chol = np.linalg.cholesky(problem.kappa)
    chol_inv = np.linalg.inv(chol)
    locs = []
    for T in range(grid.num_coarse_elements):
        t = grid.fine_of_coarse(T)
        dofs = grid.dofs_of_coarse(T)
        faces = np.unique(grid.triangle_faces[t])
        touched = (np.any(B[dofs] != 0, axis=0) | np.any(D[dofs] != 0, axis=0)
                   | np.any([np.any(Ux[faces] != 0, axis=0) for Ux in U], axis=0))
        index = np.flatnonzero(touched)
        nI = len(index)
        G = grid.gradients[t]
        area = grid.areas[t]
        C, Cinv = chol[t], chol_inv[t]

        def grads(M):
            return np.einsum("tad,tam->tdm", G, M[dofs][:, index].reshape(len(t), 3, -1))

        # nonconformity: sum_xi theta_xi int lam_xi |C^T grad d|^2
        cgd = np.einsum("tij,tim->tjm", C, grads(D))                          # C^T grad d
        r_nc = np.stack([_r_factor((np.sqrt(problem.lambda_integrals[xi, t])[:, None, None]
                                    * cgd).reshape(-1, nI)) for xi in range(nX)])

        # residual: f - sum_xi theta_xi div u_xi, both P1 per triangle
        div = np.stack([divergence_columns(grid, Ux[:, index], t) for Ux in U])      # (X, t, I)
        cols = [problem.source[t][:, :, None]] + [np.repeat(div[xi][:, None, :], 3, axis=1)
                                                  for xi in range(nX)]
        g = np.concatenate(cols, axis=2)                                             # (t, 3, 1 + X I)
        g = np.sqrt(area / 12.0)[:, None, None] * np.einsum("ab,tbm->tam", _P1_MASS_FACTOR, g)
        r_r = _r_factor(g.reshape(-1, g.shape[2]))

        # diffusive flux: sum_q w / lam_hat |C^{-1} (lam_hat kappa grad p + u)|^2
        w = problem.volume_weights[t]
        lam_hat = lam_hat_all[t]
        scale = np.sqrt(w / lam_hat)                                                  # (t, q)
        kgrad = np.einsum("tij,tjm->tim", problem.kappa[t], grads(B))                # (t, 2, I)
        a = (scale * lam_hat)[:, :, None, None] * np.einsum("tij,tjm->tim", Cinv, kgrad)[:, None]
        V = [rt_values_at_volume_points(grid, Ux[:, index], t) for Ux in U]          # (t, q, 2, I)
        b = [scale[:, :, None, None] * np.einsum("tij,tqjm->tqim", Cinv, v) for v in V]
        r_df = _r_factor(np.concatenate([a] + b, axis=3).reshape(-1, (nX + 1) * nI))

        locs.append(LocalGram(index, r_nc, r_r, r_df, residual_scale(problem, T)))
    return EstimatorOfflineData(locs, mu_hat, float(penalty_factor), B.shape[1], problem.lam)


def divergence_columns(grid, U, t):
    faces = grid.triangle_faces[t]
    signed = (grid.triangle_face_signs[t] * grid.face_lengths[faces])[:, :, None]
    return np.sum(signed * U[faces], axis=1) / grid.areas[t][:, None]


def eta_online(offline, coefficients, mu, mu_bar=None, mu_hat=None, nc_parameter="mu_bar"):
    """Estimator report for the reduced function with the given coefficients.

    Cost per coarse element is ``O((Xi+1)^2 I^2)`` with ``I`` the number of local
    reduced DOFs; nothing here touches the fine grid.
    """
    c = np.asarray(coefficients, dtype=float)
    if c.shape != (offline.size,):
        raise ValueError(f"expected {offline.size} coefficients, got shape {c.shape}")
    if nc_parameter not in NC_PARAMETERS:
        raise ValueError(f"nc_parameter must be one of {NC_PARAMETERS}")
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    mu_bar = mu if mu_bar is None else np.atleast_1d(np.asarray(mu_bar, dtype=float))
    if mu_hat is not None and not np.allclose(mu_hat, offline.mu_hat, rtol=0, atol=1e-14):
        raise ProblemError("mu_hat differs from the one used offline")
    mu_hat = np.asarray(offline.mu_hat, dtype=float)
    theta = offline.lam.coefficients(mu)
    theta_nc = offline.lam.coefficients(mu_bar if nc_parameter == "mu_bar" else mu_hat)
    nT = len(offline.locals)
    nc, r, df = np.empty(nT), np.empty(nT), np.empty(nT)
    for T, g in enumerate(offline.locals):
        y = c[g.index]
        ty = np.kron(theta, y)
        nc[T] = np.sqrt(max(float(theta_nc @ np.sum((g.r_nc @ y) ** 2, axis=1)), 0.0))
        r[T] = g.scale_r * np.linalg.norm(g.r_r @ np.concatenate([[1.0], -ty]))
        df[T] = np.linalg.norm(g.r_df @ np.concatenate([y, ty]))
    return EstimatorReport(nc, r, df, mu, mu_bar, mu_hat, _constants(offline.lam, mu, mu_bar, mu_hat),
                           np.full(nT, POINCARE_CONSTANT))
