"""Named data fields and ready-made problems."""

import csv

import numpy as np

from .grid import build_nested_grid
from .problem import (AffineScalarField, ParameterBox, ParametricProblem, ProblemError, Theta,
                      nodal_source, parse_theta)


def _ramp(d, inner, width):
    """1 for d <= inner, linear down to 0 at inner + width (continuous)."""
    return np.clip((inner + width - d) / width, 0.0, 1.0)


def _one(x, y):
    return np.ones_like(np.asarray(x, dtype=float))


def _channel(x, y):
    return _ramp(np.abs(np.asarray(y) - 0.5), 0.1, 0.05)


def _channel_vertical(x, y):
    return _ramp(np.abs(np.asarray(x) - 0.3), 0.08, 0.05)


def _bump(x, y):
    r2 = (np.asarray(x) - 0.7) ** 2 + (np.asarray(y) - 0.7) ** 2
    return np.exp(-r2 / 0.02)


def _wave(x, y):
    return 1.0 + 0.5 * np.sin(2 * np.pi * np.asarray(x)) * np.sin(2 * np.pi * np.asarray(y))


LAMBDA_COMPONENTS = {
    "one": _one,
    "channel": _channel,
    "channel_vertical": _channel_vertical,
    "bump": _bump,
    "wave": _wave,
}


def _sinsin(x, y):
    return 2 * np.pi**2 * np.sin(np.pi * x) * np.sin(np.pi * y)


SOURCES = {
    "sinsin": _sinsin,
    "one": lambda x, y: np.ones_like(np.asarray(x, dtype=float)),
    "zero": lambda x, y: np.zeros_like(np.asarray(x, dtype=float)),
}


def lambda_field(names, thetas, fixed_last=False):
    try:
        comps = tuple(LAMBDA_COMPONENTS[n] for n in names)
    except KeyError as err:
        raise ProblemError(f"unknown lambda component {err.args[0]!r}") from None
    thetas = tuple(t if isinstance(t, Theta) else parse_theta(str(t)) for t in thetas)
    return AffineScalarField(comps, thetas, tuple(names), fixed_last)


def constant_kappa(grid, matrix):
    return np.broadcast_to(np.asarray(matrix, dtype=float), (grid.num_triangles, 2, 2)).copy()


def checkerboard_kappa(grid, contrast, cells=None):
    """``contrast * I`` on the odd cells of a ``cells x cells`` board, ``I`` elsewhere."""
    M = grid.num_coarse * grid.refinement
    cells = M if cells is None else int(cells)
    if cells < 1 or M % cells:
        raise ProblemError(f"checkerboard cells ({cells}) must divide the fine resolution ({M})")
    c = grid.centroids
    ij = np.floor(c * cells).astype(int)
    odd = (ij[:, 0] + ij[:, 1]) % 2 == 1
    kappa = np.tile(np.eye(2), (grid.num_triangles, 1, 1))
    kappa[odd] *= contrast
    return kappa


def table_kappa(grid, path):
    """Per-triangle tensors from a CSV with columns ``k11,k12,k22`` in grid order."""
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].lstrip().startswith("#"):
                continue
            try:
                rows.append([float(v) for v in rec])
            except ValueError:
                continue  # header
    arr = np.array(rows)
    if arr.shape != (grid.num_triangles, 3):
        raise ProblemError(f"kappa table has shape {arr.shape}, expected ({grid.num_triangles}, 3)")
    kappa = np.empty((len(arr), 2, 2))
    kappa[:, 0, 0], kappa[:, 0, 1], kappa[:, 1, 0], kappa[:, 1, 1] = arr[:, 0], arr[:, 1], arr[:, 1], arr[:, 2]
    return kappa


def sinsin_exact(kappa_diag, field):
    """Exact solution for the sin-sin source with constant diagonal ``kappa`` and
    constant components: ``p = 2 sin(pi x) sin(pi y) / ((k11 + k22) lambda(mu))``."""
    k = float(kappa_diag[0] + kappa_diag[1])
    consts = field.component_values(np.zeros((1, 2)))[:, 0]

    def exact(mu):
        scale = 2.0 / (k * float(field.coefficients(mu) @ consts))

        def value(x, y):
            return scale * np.sin(np.pi * x) * np.sin(np.pi * y)

        def gradient(x, y):
            return np.stack([scale * np.pi * np.cos(np.pi * x) * np.sin(np.pi * y),
                             scale * np.pi * np.sin(np.pi * x) * np.cos(np.pi * y)])

        return value, gradient

    return exact


def make_problem(grid, lam, kappa, source, box, exact=None):
    if callable(source):
        source = nodal_source(grid, source)
    if not isinstance(box, ParameterBox):
        lo, hi = zip(*box)
        box = ParameterBox(tuple(map(float, lo)), tuple(map(float, hi)))
    return ParametricProblem(grid, lam, kappa, source, box, exact)


def manufactured_problem(num_coarse, refinement, kappa_diag=(1.0, 1.0), components=("one",),
                         thetas=("mu0",), box=((0.5, 2.0),)):
    """sin-sin source with a known solution; components must be spatially constant."""
    grid = build_nested_grid(num_coarse, refinement)
    lam = lambda_field(components, thetas)
    if any(n != "one" for n in components):
        raise ProblemError("the manufactured solution needs spatially constant components")
    kappa = constant_kappa(grid, np.diag(kappa_diag))
    return make_problem(grid, lam, kappa, _sinsin, box, exact=sinsin_exact(kappa_diag, lam))


def checkerboard_problem(num_coarse, refinement, contrast=100.0, cells=None,
                         components=("one", "channel", "bump"), thetas=("1", "mu0", "mu1"),
                         box=((0.1, 1.0), (0.1, 1.0)), source="one"):
    grid = build_nested_grid(num_coarse, refinement)
    lam = lambda_field(components, thetas)
    kappa = checkerboard_kappa(grid, contrast, cells)
    return make_problem(grid, lam, kappa, SOURCES[source], box)
