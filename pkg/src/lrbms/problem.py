"""Parametric data: affine diffusion factor, elementwise tensor, source, parameter box."""

import itertools
import re
import warnings
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .grid import triangle_rule

#: Volume rule used for every integral that involves the scalar factor.
VOLUME_ORDER = 5


class ProblemError(ValueError):
    """Invalid data configuration (non-positive diffusion, bad coefficients, ...)."""


# --------------------------------------------------------------------------- parameters


@dataclass(frozen=True)
class ParameterBox:
    lower: tuple
    upper: tuple

    def __post_init__(self):
        if len(self.lower) != len(self.upper) or not self.lower:
            raise ProblemError("parameter box bounds must be nonempty and of equal length")
        if any(lo > hi for lo, hi in zip(self.lower, self.upper)):
            raise ProblemError("parameter box has lower > upper")

    @property
    def dim(self):
        return len(self.lower)

    def contains(self, mu, tol=1e-12):
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        return (mu.shape == (self.dim,)
                and bool(np.all(mu >= np.array(self.lower) - tol))
                and bool(np.all(mu <= np.array(self.upper) + tol)))

    def check(self, mu):
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        if not self.contains(mu):
            raise ProblemError(f"parameter {mu.tolist()} outside box {self.lower}..{self.upper}")
        return mu

    def corners(self):
        return [np.array(c, dtype=float) for c in itertools.product(*zip(self.lower, self.upper))]

    def midpoint(self):
        return 0.5 * (np.array(self.lower, dtype=float) + np.array(self.upper, dtype=float))

    def uniform(self, count):
        """Evenly spaced points for 1-d boxes, seeded random points otherwise."""
        if self.dim == 1:
            return [np.array([v]) for v in np.linspace(self.lower[0], self.upper[0], count)]
        return self.random(count, np.random.default_rng(0))

    def random(self, count, rng):
        lo, hi = np.array(self.lower, dtype=float), np.array(self.upper, dtype=float)
        return [lo + (hi - lo) * rng.random(self.dim) for _ in range(count)]


@dataclass(frozen=True)
class Theta:
    """Coefficient ``coef`` or ``coef * mu[index]``."""

    coef: float = 1.0
    index: int = None

    def __call__(self, mu):
        if self.index is None:
            return self.coef
        return self.coef * float(np.atleast_1d(mu)[self.index])

    def __str__(self):
        if self.index is None:
            return repr(self.coef)
        return f"mu{self.index}" if self.coef == 1.0 else f"{self.coef!r}*mu{self.index}"


_THETA_RE = re.compile(
    r"^\s*(?:(?P<c>[-+]?[0-9.]+(?:[eE][-+]?\d+)?)\s*(?:\*\s*)?)?(?:mu\s*(?P<i>\d+))?\s*$")


def parse_theta(text):
    """Parse ``c``, ``mu_i``/``mui`` or ``c*mu_i`` into a :class:`Theta`."""
    m = _THETA_RE.match(text.replace("mu_", "mu"))
    if not m or (m.group("c") is None and m.group("i") is None):
        raise ProblemError(f"invalid coefficient expression {text!r}")
    coef = float(m.group("c")) if m.group("c") is not None else 1.0
    index = int(m.group("i")) if m.group("i") is not None else None
    return Theta(coef, index)


# --------------------------------------------------------------------------- data fields


@dataclass(frozen=True, eq=False)
class AffineScalarField:
    """``lambda(mu; x) = sum_xi theta_xi(mu) * lambda_xi(x)``.

    If ``fixed_last`` is set, the last component carries a constant coefficient in
    {0, 1} and is excluded from the equivalence constants.
    """

    components: tuple
    thetas: tuple
    names: tuple = ()
    fixed_last: bool = False

    def __post_init__(self):
        if len(self.components) != len(self.thetas) or not self.components:
            raise ProblemError("need one coefficient per component and at least one component")
        if self.fixed_last:
            last = self.thetas[-1]
            if last.index is not None or last.coef not in (0.0, 1.0):
                raise ProblemError("fixed last coefficient must be the constant 0 or 1")
            if len(self.components) < 2:
                raise ProblemError("need at least one parametric component")

    @property
    def size(self):
        return len(self.components)

    @property
    def parametric(self):
        """Indices entering the equivalence constants."""
        n = self.size - 1 if self.fixed_last else self.size
        return range(n)

    def coefficients(self, mu):
        return np.array([th(mu) for th in self.thetas])

    def component_values(self, points):
        points = np.asarray(points, dtype=float)
        return np.stack([np.broadcast_to(np.asarray(c(points[..., 0], points[..., 1]), dtype=float),
                                         points.shape[:-1]) for c in self.components])


def evaluate_lambda(field, mu, x):
    x = np.asarray(x, dtype=float)
    value = np.tensordot(field.coefficients(mu), field.component_values(x), axes=1)
    if np.any(value <= 0):
        raise ProblemError(f"non-positive diffusion factor at parameter {np.atleast_1d(mu).tolist()}")
    return value if value.ndim else float(value)


def equivalence_constants(field, mu, mu_bar):
    """Return ``(alpha, gamma)`` comparing ``lambda(mu)`` with ``lambda(mu_bar)``."""
    ratios = []
    for xi in field.parametric:
        den = field.thetas[xi](mu_bar)
        if den == 0:
            raise ProblemError(f"coefficient {xi} vanishes at {np.atleast_1d(mu_bar).tolist()}")
        ratios.append(field.thetas[xi](mu) / den)
    return min(ratios), max(ratios)


# --------------------------------------------------------------------------- problem


@dataclass(frozen=True, eq=False)
class ParametricProblem:
    grid: object
    lam: AffineScalarField
    kappa: np.ndarray               # (nt, 2, 2)
    source: np.ndarray              # (nt, 3) nodal values of the P1 source per triangle
    box: ParameterBox
    exact: object = None            # mu -> (value, gradient) callables, if known
    eigen_sample: tuple = field(default=())

    def __post_init__(self):
        nt = self.grid.num_triangles
        if self.kappa.shape != (nt, 2, 2) or self.source.shape != (nt, 3):
            raise ProblemError("data arrays do not match the grid")
        if np.any(self.kappa[:, 0, 1] != self.kappa[:, 1, 0]):
            raise ProblemError("diffusion tensor must be symmetric")
        if np.any(np.linalg.eigvalsh(self.kappa)[:, 0] <= 0):
            raise ProblemError("diffusion tensor must be positive definite")
        for mu in self.box.corners():
            if any(self.lam.thetas[xi](mu) <= 0 for xi in self.lam.parametric):
                raise ProblemError("coefficients must be strictly positive on the parameter box")
        if self.lam.fixed_last and self.lam.thetas[-1].coef != 0.0:
            if np.any(self.lam.component_values(self.grid.centroids)[-1] != 0):
                warnings.warn("fixed component is nonzero: norm equivalence requires its "
                              "contribution to be parameter independent", stacklevel=2)
        for mu in self.sample():
            evaluate_lambda(self.lam, mu, self.volume_points)

    def sample(self):
        return list(self.eigen_sample) or self.box.corners() + [self.box.midpoint()]

    @property
    def num_components(self):
        return self.lam.size

    @cached_property
    def volume_points(self):
        bary, _ = triangle_rule(VOLUME_ORDER)
        return np.einsum("qa,tad->tqd", bary, self.grid.vertices[self.grid.triangles])

    @cached_property
    def volume_weights(self):
        _, w = triangle_rule(VOLUME_ORDER)
        return self.grid.areas[:, None] * w[None, :]

    @cached_property
    def lambda_at_volume_points(self):
        """(Xi+1, nt, nq) component values at the volume quadrature points."""
        return self.lam.component_values(self.volume_points)

    @cached_property
    def lambda_integrals(self):
        """(Xi+1, nt) integrals of every component over every triangle."""
        return np.einsum("xtq,tq->xt", self.lambda_at_volume_points, self.volume_weights)

    def lambda_at(self, mu, points):
        return evaluate_lambda(self.lam, mu, points)

    @cached_property
    def eigen_bounds(self):
        return eigen_bounds(self, self.sample())

    def with_eigen_sample(self, sample):
        return replace(self, eigen_sample=tuple(np.asarray(m, dtype=float) for m in sample))


def eigen_bounds(problem, sample):
    """Per-triangle ``(c^t, C^t)`` and per coarse element ``c^T``.

    The scalar factor is evaluated at triangle centroids; extrema over the
    parameter set are taken over ``sample``.
    """
    if len(sample) == 0:
        raise ProblemError("eigenvalue bounds need a nonempty parameter sample")
    ev = np.linalg.eigvalsh(problem.kappa)          # (nt, 2) ascending
    lam = np.array([evaluate_lambda(problem.lam, mu, problem.grid.centroids) for mu in sample])
    c_t = (lam * ev[None, :, 0]).min(axis=0)
    C_t = (lam * ev[None, :, 1]).max(axis=0)
    grid = problem.grid
    # c^T = (max_t 1/c^t)^{-1}
    c_T = 1.0 / np.array([np.max(1.0 / c_t[grid.fine_of_coarse(T)])
                          for T in range(grid.num_coarse_elements)])
    return c_t, C_t, c_T


# --------------------------------------------------------------------------- energy norms


def _element_gradients(grid, q):
    return np.einsum("ta,tad->td", q.reshape(-1, 3), grid.gradients)


def _triangles(grid, region):
    return np.arange(grid.num_triangles) if region is None else grid.fine_of_coarse(region)


def energy_product_component(problem, xi, p, q, region=None):
    """``int_region (lambda_xi kappa grad_h p) . grad_h q``; ``region`` is a coarse index or None."""
    grid = problem.grid
    t = _triangles(grid, region)
    gp = _element_gradients(grid, p)[t]
    gq = _element_gradients(grid, q)[t]
    return float(np.sum(problem.lambda_integrals[xi, t]
                        * np.einsum("ti,tij,tj->t", gp, problem.kappa[t], gq)))


def energy_norm(problem, mu, q, region=None):
    theta = problem.lam.coefficients(mu)
    value = sum(theta[xi] * energy_product_component(problem, xi, q, q, region)
                for xi in range(problem.num_components))
    if value < -1e-12:
        raise ProblemError(f"negative energy {value}")
    return float(np.sqrt(max(value, 0.0)))


def energy_error(problem, mu, exact_gradient, p):
    """``|||p_exact - p|||_mu`` against an analytic gradient, by volume quadrature."""
    grid = problem.grid
    pts = problem.volume_points
    g = np.asarray(exact_gradient(pts[..., 0], pts[..., 1]))          # (2, nt, nq)
    diff = np.moveaxis(g, 0, -1) - _element_gradients(grid, p)[:, None, :]
    lam = problem.lambda_at(mu, pts)
    integrand = lam * np.einsum("tqi,tij,tqj->tq", diff, problem.kappa, diff)
    return float(np.sqrt(np.sum(integrand * problem.volume_weights)))


def nodal_source(grid, f):
    """P1 source per triangle from nodal values of ``f(x, y)``."""
    v = grid.vertices[grid.triangles]
    return np.asarray(f(v[..., 0], v[..., 1]), dtype=float) * np.ones(v.shape[:2])
