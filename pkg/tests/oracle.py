"""Straightforward loop-based SWIPDG assembly used as an independent reference.

Builds its own face list from the triangle array and integrates with a
two-point Gauss rule, so the scalar factor must be at most linear.
"""

import numpy as np


def _basis(coords):
    """Rows: coefficients (c0, cx, cy) of the three nodal P1 functions."""
    M = np.column_stack([np.ones(3), coords])
    return np.linalg.inv(M).T


def naive_swipdg(vertices, triangles, kappa, lam, penalty):
    nt = len(triangles)
    A = np.zeros((3 * nt, 3 * nt))
    coefs = [_basis(vertices[tri]) for tri in triangles]

    def value(t, a, x):
        c = coefs[t][a]
        return c[0] + c[1] * x[0] + c[2] * x[1]

    def grad(t, a):
        return coefs[t][a][1:]

    for t, tri in enumerate(triangles):
        P = vertices[tri]
        area = 0.5 * abs(np.linalg.det(np.array([P[1] - P[0], P[2] - P[0]])))
        lam_int = area * lam(*P.mean(axis=0))
        for a in range(3):
            for b in range(3):
                A[3 * t + a, 3 * t + b] += lam_int * grad(t, a) @ kappa[t] @ grad(t, b)

    edges = {}
    for t, tri in enumerate(triangles):
        for k in range(3):
            key = tuple(sorted((tri[(k + 1) % 3], tri[(k + 2) % 3])))
            edges.setdefault(key, []).append(t)

    gp = 0.5 + np.array([-0.5, 0.5]) / np.sqrt(3.0)
    for (i, j), ts in edges.items():
        x0, x1 = vertices[i], vertices[j]
        length = np.linalg.norm(x1 - x0)
        tangent = (x1 - x0) / length
        n = np.array([tangent[1], -tangent[0]])
        tm = min(ts)
        # orient from the lower triangle index outwards
        if n @ (x0 - vertices[triangles[tm]].mean(axis=0)) < 0:
            n = -n
        dm = n @ kappa[tm] @ n
        if len(ts) == 2:
            tp = max(ts)
            dp = n @ kappa[tp] @ n
            wm, wp = dp / (dm + dp), dm / (dm + dp)
            gamma = penalty * 2 * dm * dp / (dm + dp) / length
            sides = [(tm, 1.0, wm), (tp, -1.0, wp)]
        else:
            gamma = penalty * dm / length
            sides = [(tm, 1.0, 1.0)]
        local = [(t, a, s, w) for t, s, w in sides for a in range(3)]
        for s_q in gp:
            x = x0 + s_q * (x1 - x0)
            w = 0.5 * length * lam(*x)
            for (ti, ai, si, wi) in local:
                jump_i = si * value(ti, ai, x)
                avg_i = wi * (kappa[ti] @ grad(ti, ai)) @ n
                for (tj, aj, sj, wj) in local:
                    jump_j = sj * value(tj, aj, x)
                    avg_j = wj * (kappa[tj] @ grad(tj, aj)) @ n
                    A[3 * ti + ai, 3 * tj + aj] += w * (-avg_j * jump_i - avg_i * jump_j
                                                        + gamma * jump_i * jump_j)
    return A
