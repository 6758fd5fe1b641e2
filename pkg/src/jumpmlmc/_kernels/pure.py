"""NumPy reference implementations of the per-sample hot kernels.

The compiled extension in ``_core.pyx`` mirrors these routines one to one.
Both backends must agree to floating-point roundoff; the test suite checks
them against each other and against dense oracles.
"""
from __future__ import annotations

import numpy as np

BACKEND = "pure"


def interp_lattice(values: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Piecewise-linear interpolation of lattice values at points.

    ``values`` has shape (m+1, m+1) with ``values[i, j]`` the field value at
    (i/m, j/m).  Each lattice cell is split by its lower-left to upper-right
    diagonal; interpolation is linear on the two resulting triangles.
    """
    n = values.shape[0]
    m = n - 1
    x = pts[:, 0] * m
    y = pts[:, 1] * m
    i = np.clip(np.floor(x).astype(np.intp), 0, m - 1)
    j = np.clip(np.floor(y).astype(np.intp), 0, m - 1)
    fx = x - i
    fy = y - j
    v00 = values[i, j]
    v10 = values[i + 1, j]
    v01 = values[i, j + 1]
    v11 = values[i + 1, j + 1]
    lower = fx >= fy
    out = np.where(
        lower,
        v00 * (1.0 - fx) + v10 * (fx - fy) + v11 * fy,
        v00 * (1.0 - fy) + v01 * (fy - fx) + v11 * fx,
    )
    return out


def locate_chords(chord1: np.ndarray, chord2: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Region index (0..3) of each point for a two-chord quadrangle partition.

    ``chord1`` is (B, T), the bottom-to-top chord; ``chord2`` is (L, R), the
    left-to-right chord.  Points exactly on a chord belong to the region on
    the chord's left (orientation of increasing parameter).
    """
    b, t = chord1
    l, r = chord2
    d1 = t - b
    d2 = r - l
    s1 = d1[0] * (pts[:, 1] - b[1]) - d1[1] * (pts[:, 0] - b[0])
    s2 = d2[0] * (pts[:, 1] - l[1]) - d2[1] * (pts[:, 0] - l[0])
    east = s1 < 0.0
    north = s2 >= 0.0
    out = np.where(
        north,
        np.where(east, 2, 3),
        np.where(east, 1, 0),
    )
    return out.astype(np.intp)


def tri_geometry(vertices: np.ndarray, triangles: np.ndarray):
    """Areas, centroids and P1 basis gradients for every triangle."""
    p0 = vertices[triangles[:, 0]]
    p1 = vertices[triangles[:, 1]]
    p2 = vertices[triangles[:, 2]]
    e01 = p1 - p0
    e02 = p2 - p0
    det = e01[:, 0] * e02[:, 1] - e01[:, 1] * e02[:, 0]
    areas = 0.5 * det
    centroids = (p0 + p1 + p2) / 3.0
    grads = np.empty((triangles.shape[0], 3, 2))
    inv = 1.0 / det
    grads[:, 0, 0] = (p1[:, 1] - p2[:, 1]) * inv
    grads[:, 0, 1] = (p2[:, 0] - p1[:, 0]) * inv
    grads[:, 1, 0] = (p2[:, 1] - p0[:, 1]) * inv
    grads[:, 1, 1] = (p0[:, 0] - p2[:, 0]) * inv
    grads[:, 2, 0] = (p0[:, 1] - p1[:, 1]) * inv
    grads[:, 2, 1] = (p1[:, 0] - p0[:, 0]) * inv
    return areas, centroids, grads


def assemble_p1(
    vertices: np.ndarray,
    triangles: np.ndarray,
    a_tri: np.ndarray,
    b_tri: np.ndarray,
):
    """Element contributions of the P1 advection-diffusion operator.

    Returns (rows, cols, stiff_vals, mass_vals), 9 entries per triangle.
    Stiffness entry (j, k): ``[a ∇v_j·∇v_k + b (1ᵀ∇v_j) v_k] |K|`` with both
    coefficients evaluated at the centroid (one-point rule, ``v_k = 1/3``).
    Mass is the exact P1 element matrix ``|K|/12 (1 + δ_jk)``.
    """
    nt = triangles.shape[0]
    areas, _, grads = tri_geometry(vertices, triangles)
    gsum = grads.sum(axis=2)  # (nt, 3): 1ᵀ∇v_j
    gdot = np.einsum("tjd,tkd->tjk", grads, grads)  # (nt, 3, 3)
    stiff = (a_tri * areas)[:, None, None] * gdot
    stiff += (b_tri * areas / 3.0)[:, None, None] * gsum[:, :, None]
    mass = np.empty((nt, 3, 3))
    mass[:] = (areas / 12.0)[:, None, None]
    mass[:, [0, 1, 2], [0, 1, 2]] *= 2.0
    rows = np.repeat(triangles, 3, axis=1).reshape(-1)
    cols = np.tile(triangles, (1, 3)).reshape(-1)
    return rows, cols, stiff.reshape(-1), mass.reshape(-1)
