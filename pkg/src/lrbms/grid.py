"""Nested coarse/fine triangulations of the unit square.

The coarse partition consists of ``N_H x N_H`` axis-aligned squares. Every
coarse square is cut into ``n_h x n_h`` subsquares and each subsquare into two
triangles along its SW-NE diagonal. Fine triangles are numbered coarse-element
major, so the degrees of freedom of a coarse element form a contiguous range.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "NestedGrid",
    "build_nested_grid",
    "diameter",
    "triangle_rule",
    "face_rule",
    "quadrature",
]


@dataclass(frozen=True, eq=False)
class NestedGrid:
    """Immutable two-level triangulation with all incidence data.

    Faces carry a fixed orientation: the normal points from the ``minus``
    triangle (lower index) to the ``plus`` triangle, outward on the boundary
    where ``plus == -1``.
    """

    num_coarse: int
    refinement: int
    vertices: np.ndarray            # (nv, 2)
    triangles: np.ndarray           # (nt, 3) vertex ids, counter-clockwise
    coarse_of_fine: np.ndarray      # (nt,)
    coarse_boxes: np.ndarray        # (nT, 4): xmin, ymin, xmax, ymax
    faces: np.ndarray               # (nf, 2) vertex ids
    face_elements: np.ndarray       # (nf, 2) minus / plus triangle, plus=-1 on boundary
    face_local: np.ndarray          # (nf, 2) local edge index in minus / plus
    face_normals: np.ndarray        # (nf, 2)
    face_lengths: np.ndarray        # (nf,)
    triangle_faces: np.ndarray      # (nt, 3) face opposite local vertex k
    triangle_face_signs: np.ndarray  # (nt, 3) +1 where the face normal is outward
    coarse_faces: np.ndarray        # (nE, 2) minus / plus coarse element, -1 on boundary
    coarse_face_normals: np.ndarray  # (nE, 2)
    fine_faces_of_coarse_face: tuple
    coarse_face_of_fine_face: np.ndarray  # (nf,), -1 for faces inside a coarse element
    coarse_faces_of_element: tuple
    vertex_patches: tuple
    vertex_on_boundary: np.ndarray
    face_on_boundary: np.ndarray

    @property
    def num_coarse_elements(self):
        return len(self.coarse_boxes)

    @property
    def num_triangles(self):
        return len(self.triangles)

    @property
    def num_faces(self):
        return len(self.faces)

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_dofs(self):
        return 3 * len(self.triangles)

    @property
    def fine_per_coarse(self):
        return 2 * self.refinement**2

    @property
    def mesh_size(self):
        """Leg length of the fine triangles."""
        return 1.0 / (self.num_coarse * self.refinement)

    def fine_of_coarse(self, T):
        """Indices of the fine triangles covering coarse element ``T``."""
        n = self.fine_per_coarse
        return np.arange(T * n, (T + 1) * n)

    def dofs_of_coarse(self, T):
        n = 3 * self.fine_per_coarse
        return np.arange(T * n, (T + 1) * n)

    @cached_property
    def areas(self):
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def centroids(self):
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def face_midpoints(self):
        return self.vertices[self.faces].mean(axis=1)

    @cached_property
    def basis_coefficients(self):
        """Affine coefficients of the P1 nodal basis on every triangle.

        ``phi_a(x, y) = C[t, 0, a] + C[t, 1, a] * x + C[t, 2, a] * y``.
        """
        p = self.vertices[self.triangles]
        V = np.concatenate([np.ones((len(p), 3, 1)), p], axis=2)
        return np.linalg.inv(V)

    @cached_property
    def gradients(self):
        """(nt, 3, 2) constant gradients of the local nodal basis."""
        return np.transpose(self.basis_coefficients[:, 1:, :], (0, 2, 1))

    def evaluate_basis(self, t, points):
        """Values of the three local basis functions of triangles ``t`` at ``points``.

        ``t`` has shape (n,), ``points`` shape (n, q, 2); returns (n, q, 3).
        """
        C = self.basis_coefficients[t]
        return (C[:, None, 0, :] + points[..., 0:1] * C[:, None, 1, :]
                + points[..., 1:2] * C[:, None, 2, :])

    def diameter(self, T):
        return diameter(self, T)

    def summary(self):
        """Plain key/value description used in reports and manifests."""
        return {
            "num_coarse_per_dim": self.num_coarse,
            "refinement_per_dim": self.refinement,
            "coarse_elements": self.num_coarse_elements,
            "fine_triangles": self.num_triangles,
            "fine_faces": self.num_faces,
            "vertices": self.num_vertices,
            "dofs": self.num_dofs,
            "H": 1.0 / self.num_coarse,
            "h": self.mesh_size,
        }


def build_nested_grid(num_coarse_per_dim, refinement_per_dim):
    N, n = int(num_coarse_per_dim), int(refinement_per_dim)
    if N != num_coarse_per_dim or n != refinement_per_dim or N < 1 or n < 1:
        raise ValueError(
            f"grid sizes must be positive integers, got ({num_coarse_per_dim}, {refinement_per_dim})")
    M = N * n
    xs = np.linspace(0.0, 1.0, M + 1)
    X, Y = np.meshgrid(xs, xs)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (M + 1) + i

    tris = []
    coarse_of_fine = []
    boxes = []
    for J in range(N):
        for I in range(N):
            T = J * N + I
            boxes.append((I / N, J / N, (I + 1) / N, (J + 1) / N))
            for b in range(n):
                for a in range(n):
                    i, j = I * n + a, J * n + b
                    tris.append((vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)))
                    tris.append((vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)))
                    coarse_of_fine += [T, T]
    triangles = np.array(tris, dtype=np.int64)
    coarse_of_fine = np.array(coarse_of_fine, dtype=np.int64)
    nt = len(triangles)

    # local edge k is opposite local vertex k
    edges = np.stack([triangles[:, [1, 2]], triangles[:, [2, 0]], triangles[:, [0, 1]]], axis=1)
    keys = np.sort(edges.reshape(-1, 2), axis=1)
    uniq, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    nf = len(uniq)
    # order faces by first occurrence for a stable, triangle-driven numbering
    order = np.argsort(first, kind="stable")
    rank = np.empty(nf, dtype=np.int64)
    rank[order] = np.arange(nf)
    face_of_edge = rank[inverse]

    face_elements = -np.ones((nf, 2), dtype=np.int64)
    face_local = -np.ones((nf, 2), dtype=np.int64)
    owner = np.repeat(np.arange(nt), 3)
    local = np.tile(np.arange(3), nt)
    for e, t, k in zip(face_of_edge, owner, local):
        # triangles are visited in increasing order, so slot 0 gets the lower index
        slot = 0 if face_elements[e, 0] < 0 else 1
        face_elements[e, slot] = t
        face_local[e, slot] = k

    minus_edges = edges[face_elements[:, 0], face_local[:, 0]]
    faces = minus_edges
    d = vertices[faces[:, 1]] - vertices[faces[:, 0]]
    lengths = np.hypot(d[:, 0], d[:, 1])
    # counter-clockwise edge traversal: outward normal is the tangent rotated clockwise
    normals = np.column_stack([d[:, 1], -d[:, 0]]) / lengths[:, None]

    triangle_faces = face_of_edge.reshape(nt, 3)
    triangle_face_signs = np.where(
        face_elements[triangle_faces, 0] == np.arange(nt)[:, None], 1, -1)

    on_boundary = face_elements[:, 1] < 0
    vertex_on_boundary = np.zeros(len(vertices), dtype=bool)
    vertex_on_boundary[faces[on_boundary].ravel()] = True

    # coarse faces: group fine faces by (coarse minus, coarse plus) or (coarse, side)
    cminus = coarse_of_fine[face_elements[:, 0]]
    cplus = np.where(on_boundary, -1, coarse_of_fine[np.maximum(face_elements[:, 1], 0)])
    coarse_key = {}
    coarse_face_of_fine = -np.ones(nf, dtype=np.int64)
    coarse_faces = []
    coarse_normals = []
    members = []
    for e in range(nf):
        if not on_boundary[e] and cminus[e] == cplus[e]:
            continue
        nrm = normals[e]
        key = (int(cminus[e]), int(cplus[e]), round(float(nrm[0]), 12), round(float(nrm[1]), 12))
        if key not in coarse_key:
            coarse_key[key] = len(coarse_faces)
            coarse_faces.append((cminus[e], cplus[e]))
            coarse_normals.append(nrm)
            members.append([])
        E = coarse_key[key]
        coarse_face_of_fine[e] = E
        members[E].append(e)
    coarse_faces = np.array(coarse_faces, dtype=np.int64)
    faces_of_element = [[] for _ in range(N * N)]
    for E, (tm, tp) in enumerate(coarse_faces):
        faces_of_element[tm].append(E)
        if tp >= 0:
            faces_of_element[tp].append(E)

    incidence = [[] for _ in range(len(vertices))]
    for t, tri in enumerate(triangles):
        for v in tri:
            incidence[v].append(t)

    return NestedGrid(
        num_coarse=N,
        refinement=n,
        vertices=vertices,
        triangles=triangles,
        coarse_of_fine=coarse_of_fine,
        coarse_boxes=np.array(boxes),
        faces=faces,
        face_elements=face_elements,
        face_local=face_local,
        face_normals=normals,
        face_lengths=lengths,
        triangle_faces=triangle_faces,
        triangle_face_signs=triangle_face_signs,
        coarse_faces=coarse_faces,
        coarse_face_normals=np.array(coarse_normals),
        fine_faces_of_coarse_face=tuple(np.array(m, dtype=np.int64) for m in members),
        coarse_face_of_fine_face=coarse_face_of_fine,
        coarse_faces_of_element=tuple(np.array(f, dtype=np.int64) for f in faces_of_element),
        vertex_patches=tuple(np.array(p, dtype=np.int64) for p in incidence),
        vertex_on_boundary=vertex_on_boundary,
        face_on_boundary=on_boundary,
    )


def diameter(grid, T):
    """Euclidean diameter ``h_T`` of coarse element ``T``."""
    x0, y0, x1, y1 = grid.coarse_boxes[T]
    return float(np.hypot(x1 - x0, y1 - y0))


def dof_permutation(source, target, decimals=12):
    """Index array ``perm`` with DOF ``perm[i]`` of ``target`` sitting at the same
    triangle vertex as DOF ``i`` of ``source``.

    Both grids must triangulate the domain identically (e.g. the same fine grid
    grouped into different coarse elements).
    """
    if source.num_dofs != target.num_dofs:
        raise ValueError("grids have different numbers of DOFs")

    def keys(grid):
        pts = np.round(grid.vertices[grid.triangles], decimals)            # (nt, 3, 2)
        cen = np.round(grid.centroids, decimals)
        return [(tuple(cen[t]), tuple(pts[t, a])) for t in range(grid.num_triangles) for a in range(3)]

    where = {k: i for i, k in enumerate(keys(target))}
    try:
        return np.array([where[k] for k in keys(source)])
    except KeyError:
        raise ValueError("grids do not share the same fine triangulation") from None


# Barycentric rules on the reference triangle, weights normalized to sum 1.
_A3, _B3 = 0.445948490915965, 0.091576213509771
_WA3, _WB3 = 0.223381589678011, 0.109951743655322
_R1, _R2 = (6 - np.sqrt(15)) / 21, (6 + np.sqrt(15)) / 21
_W1, _W2 = (155 - np.sqrt(15)) / 1200, (155 + np.sqrt(15)) / 1200


def _sym3(a):
    b = 1 - 2 * a
    return [(b, a, a), (a, b, a), (a, a, b)]


_TRIANGLE_RULES = {
    1: (np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0])),
    2: (np.array(_sym3(1 / 6)), np.full(3, 1 / 3)),
    3: (np.array(_sym3(_A3) + _sym3(_B3)), np.array([_WA3] * 3 + [_WB3] * 3)),
    5: (np.array([[1 / 3, 1 / 3, 1 / 3]] + _sym3(_R1) + _sym3(_R2)),
        np.array([9 / 40] + [_W1] * 3 + [_W2] * 3)),
}
_TRIANGLE_RULES[4] = _TRIANGLE_RULES[3]


def triangle_rule(order):
    """Barycentric points and unit-sum weights exact for polynomials of ``order``."""
    try:
        return _TRIANGLE_RULES[order]
    except KeyError:
        raise ValueError(f"unsupported triangle quadrature order {order}") from None


def face_rule(order):
    """Gauss-Legendre points on [0, 1] with unit-sum weights."""
    if order not in (1, 2, 3, 4, 5):
        raise ValueError(f"unsupported face quadrature order {order}")
    s, w = np.polynomial.legendre.leggauss(order // 2 + 1)
    return 0.5 * (s + 1.0), 0.5 * w


def quadrature(entity, order):
    """Physical quadrature rule on a face (2 vertices) or a triangle (3 vertices).

    Returns ``(points, weights)`` with weights summing to the entity measure.
    """
    entity = np.asarray(entity, dtype=float)
    if entity.shape == (3, 2):
        bary, w = triangle_rule(order)
        d1, d2 = entity[1] - entity[0], entity[2] - entity[0]
        area = 0.5 * abs(d1[0] * d2[1] - d1[1] * d2[0])
        return bary @ entity, w * area
    if entity.shape == (2, 2):
        s, w = face_rule(order)
        length = float(np.hypot(*(entity[1] - entity[0])))
        return entity[0] + s[:, None] * (entity[1] - entity[0]), w * length
    raise ValueError("entity must be a face (2 vertices) or a triangle (3 vertices)")
