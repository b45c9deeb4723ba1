"""Localized reduced bases, Galerkin projection and estimator-driven greedy training."""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .estimate import EstimatorOfflineData, eta_online, offline_decompose
from .linalg import dense_solve, orthonormalize
from .swipdg import solve_dg

log = logging.getLogger(__name__)

FORMAT_VERSION = 1


class ModelFormatError(RuntimeError):
    pass


@dataclass(eq=False)
class ReducedModel:
    """Per coarse element orthonormal bases and the projected affine system.

    ``bases[T]`` has shape (local DOFs, N_T); the reduced DOFs are numbered
    coarse-element major. ``operator`` is None for models loaded from disk.
    """

    lam: object
    bases: list
    components: np.ndarray     # (Xi+1, N, N)
    rhs: np.ndarray
    mu_hat: np.ndarray
    penalty_factor: float
    offline: EstimatorOfflineData = None
    history: list = field(default_factory=list)
    converged: bool = False
    operator: object = None

    @property
    def sizes(self):
        return [b.shape[1] for b in self.bases]

    @property
    def size(self):
        return int(sum(self.sizes))

    @property
    def offsets(self):
        return np.concatenate([[0], np.cumsum(self.sizes)]).astype(int)

    def basis_matrix(self):
        """Dense (num_dofs x N) block-diagonal embedding of the local bases."""
        nloc = self.bases[0].shape[0]
        B = np.zeros((nloc * len(self.bases), self.size))
        off = self.offsets
        for T, b in enumerate(self.bases):
            B[T * nloc:(T + 1) * nloc, off[T]:off[T + 1]] = b
        return B

    def reconstruct(self, coefficients):
        return self.basis_matrix() @ np.asarray(coefficients, dtype=float)

    def matrix(self, mu):
        return np.tensordot(self.lam.coefficients(mu), self.components, axes=1)


def local_inner_product(op, mu_hat, T):
    """DG energy of the zero extension of functions on ``T``: the diagonal block of ``A(mu_hat)``.

    The broken energy alone vanishes on constants, so the face penalty on the
    boundary of ``T`` is kept to obtain an inner product.
    """
    dofs = op.problem.grid.dofs_of_coarse(T)
    return op.matrix(mu_hat)[dofs][:, dofs].tocsr()


def empty_model(op, mu_hat=None):
    problem = op.problem
    mu_hat = problem.box.midpoint() if mu_hat is None else problem.box.check(mu_hat)
    nloc = 3 * problem.grid.fine_per_coarse
    bases = [np.zeros((nloc, 0)) for _ in range(problem.grid.num_coarse_elements)]
    return ReducedModel(problem.lam, bases, np.zeros((problem.num_components, 0, 0)), np.zeros(0),
                        mu_hat, op.penalty_factor, operator=op)


def _project(model):
    op = model.operator
    B = model.basis_matrix()
    comps = np.stack([B.T @ (A @ B) for A in op.components])
    comps = 0.5 * (comps + np.transpose(comps, (0, 2, 1)))
    offline = offline_decompose(op.problem, B, model.mu_hat, model.penalty_factor)
    return replace(model, components=comps, rhs=B.T @ op.rhs, offline=offline)


def seed_and_extend(model, snapshot, drop_tol=1e-10, rebuild=True):
    """Restrict ``snapshot`` to every coarse element and append what is new."""
    op = model.operator
    grid = op.problem.grid
    snapshot = np.asarray(snapshot, dtype=float)
    bases = []
    for T, basis in enumerate(model.bases):
        K = local_inner_product(op, model.mu_hat, T)
        new = orthonormalize([snapshot[grid.dofs_of_coarse(T)]], K, drop_tol,
                             basis=list(basis.T))
        bases.append(np.column_stack([basis] + new) if new else basis)
    grown = replace(model, bases=bases)
    if grown.sizes == model.sizes:
        return model
    return _project(grown) if rebuild else grown


def seed_constants(op, mu_hat=None):
    model = empty_model(op, mu_hat)
    return seed_and_extend(model, np.ones(op.problem.grid.num_dofs))


def solve_reduced(model, mu):
    """Reduced coefficients and, when the fine operator is attached, the DG reconstruction."""
    if model.size == 0:
        raise ValueError("reduced model is empty")
    c = dense_solve(model.matrix(mu), model.rhs)
    p = model.reconstruct(c) if model.operator is not None else None
    return c, p


def estimate_reduced(model, mu, mu_bar=None, nc_parameter="mu_bar"):
    """Reduced coefficients and their online estimator report."""
    c = dense_solve(model.matrix(mu), model.rhs)
    return c, eta_online(model.offline, c, mu, mu_bar=mu_bar, nc_parameter=nc_parameter)


def greedy_train(op, training_set, tol, max_extensions, mu_hat=None, drop_tol=1e-10,
                 rel_tol=1e-12):
    """Estimator-driven greedy: extend with the fine solution at the worst training parameter.

    History records, per iteration, the maximal estimator over the training set
    before the extension and the parameter selected (ties go to the lowest index).
    """
    training_set = [op.problem.box.check(mu) for mu in training_set]
    if not training_set:
        raise ValueError("training set is empty")
    model = seed_constants(op, mu_hat)
    history = []
    extensions = 0
    while True:
        etas = np.array([estimate_reduced(model, mu)[1].eta for mu in training_set])
        worst = int(np.argmax(etas))
        history.append({"iteration": extensions, "max_eta": float(etas[worst]),
                        "mu": training_set[worst].tolist(), "sizes": model.sizes})
        log.info("greedy iteration %d: max eta %.6e at %s", extensions, etas[worst], training_set[worst])
        if etas[worst] <= tol:
            return replace(model, history=history, converged=True)
        if extensions >= max_extensions:
            return replace(model, history=history, converged=False)
        snapshot = solve_dg(op, training_set[worst], rel_tol=rel_tol)
        grown = seed_and_extend(model, snapshot, drop_tol)
        if grown is model:
            log.info("greedy stagnated: snapshot at %s is already in the reduced space",
                     training_set[worst])
            history[-1]["stagnated"] = True
            return replace(model, history=history, converged=False)
        model = grown
        extensions += 1


# --------------------------------------------------------------------------- persistence


def _write_array(directory, name, arr):
    arr = np.asarray(arr)
    dtype = "int64" if np.issubdtype(arr.dtype, np.integer) else "float64"
    arr.astype("<i8" if dtype == "int64" else "<f8").tofile(directory / f"{name}.bin")
    shape = "x".join(str(s) for s in arr.shape) or "scalar"
    return f"array {name} {dtype} {shape}"


def save_model(model, directory, extra=None):
    """Write bases, projected components and estimator data as raw little-endian
    binaries plus a plain-text ``manifest.txt``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = [f"format_version = {FORMAT_VERSION}",
             f"num_coarse_elements = {len(model.bases)}",
             f"sizes = {' '.join(map(str, model.sizes))}",
             f"penalty_factor = {model.penalty_factor!r}",
             f"mu_hat = {' '.join(repr(float(v)) for v in model.mu_hat)}",
             f"converged = {int(model.converged)}"]
    for k, v in (extra or {}).items():
        lines.append(f"{k} = {v}")
    lines.append(_write_array(directory, "components", model.components))
    lines.append(_write_array(directory, "rhs", model.rhs))
    for T, b in enumerate(model.bases):
        lines.append(_write_array(directory, f"basis_T{T}", b))
    for name, arr in model.offline.arrays().items():
        lines.append(_write_array(directory, f"est_{name}", arr))
    (directory / "manifest.txt").write_text("\n".join(lines) + "\n")


def read_manifest(directory):
    path = Path(directory) / "manifest.txt"
    if not path.exists():
        raise ModelFormatError(f"no manifest in {directory}")
    meta, arrays = {}, {}
    for line in path.read_text().splitlines():
        if not line.strip():
            continue
        if line.startswith("array "):
            _, name, dtype, shape = line.split()
            arrays[name] = (dtype, () if shape == "scalar" else tuple(int(s) for s in shape.split("x")))
        else:
            k, _, v = line.partition("=")
            meta[k.strip()] = v.strip()
    if meta.get("format_version") != str(FORMAT_VERSION):
        raise ModelFormatError(
            f"model format version {meta.get('format_version')!r}, expected {FORMAT_VERSION}")
    return meta, arrays


def load_model(directory, lam):
    directory = Path(directory)
    meta, layout = read_manifest(directory)
    data = {}
    for name, (dtype, shape) in layout.items():
        raw = np.fromfile(directory / f"{name}.bin", dtype="<i8" if dtype == "int64" else "<f8")
        data[name] = raw.reshape(shape)
    nT = int(meta["num_coarse_elements"])
    bases = [data[f"basis_T{T}"] for T in range(nT)]
    comps = data["components"]
    if comps.shape[0] != lam.size:
        raise ModelFormatError("number of affine components does not match the configuration")
    est = {k[4:]: v for k, v in data.items() if k.startswith("est_")}
    penalty = float(meta["penalty_factor"])
    offline = EstimatorOfflineData.from_arrays(est, nT, penalty, comps.shape[1], lam)
    return ReducedModel(lam, bases, comps, data["rhs"], offline.mu_hat, penalty, offline,
                        converged=meta.get("converged") == "1"), meta
