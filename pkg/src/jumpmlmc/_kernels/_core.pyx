# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twins of the kernels in ``pure.py``.

Single fused loops over points/triangles; semantics identical to the NumPy
fallback up to floating-point associativity.
"""
import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "compiled"


def interp_lattice(cnp.ndarray[double, ndim=2] values, cnp.ndarray[double, ndim=2] pts):
    cdef Py_ssize_t npts = pts.shape[0]
    cdef Py_ssize_t m = values.shape[0] - 1
    cdef cnp.ndarray[double, ndim=1] out = np.empty(npts)
    cdef Py_ssize_t p, i, j
    cdef double x, y, fx, fy
    for p in range(npts):
        x = pts[p, 0] * m
        y = pts[p, 1] * m
        i = <Py_ssize_t> x
        j = <Py_ssize_t> y
        if i < 0:
            i = 0
        elif i > m - 1:
            i = m - 1
        if j < 0:
            j = 0
        elif j > m - 1:
            j = m - 1
        fx = x - i
        fy = y - j
        if fx >= fy:
            out[p] = values[i, j] * (1.0 - fx) + values[i + 1, j] * (fx - fy) + values[i + 1, j + 1] * fy
        else:
            out[p] = values[i, j] * (1.0 - fy) + values[i, j + 1] * (fy - fx) + values[i + 1, j + 1] * fx
    return out


def locate_chords(cnp.ndarray[double, ndim=2] chord1, cnp.ndarray[double, ndim=2] chord2,
                  cnp.ndarray[double, ndim=2] pts):
    cdef Py_ssize_t npts = pts.shape[0]
    cdef cnp.ndarray[cnp.intp_t, ndim=1] out = np.empty(npts, dtype=np.intp)
    cdef double bx = chord1[0, 0], by = chord1[0, 1]
    cdef double d1x = chord1[1, 0] - bx, d1y = chord1[1, 1] - by
    cdef double lx = chord2[0, 0], ly = chord2[0, 1]
    cdef double d2x = chord2[1, 0] - lx, d2y = chord2[1, 1] - ly
    cdef Py_ssize_t p
    cdef double s1, s2
    cdef bint east, north
    for p in range(npts):
        s1 = d1x * (pts[p, 1] - by) - d1y * (pts[p, 0] - bx)
        s2 = d2x * (pts[p, 1] - ly) - d2y * (pts[p, 0] - lx)
        east = s1 < 0.0
        north = s2 >= 0.0
        if north:
            out[p] = 2 if east else 3
        else:
            out[p] = 1 if east else 0
    return out


def assemble_p1(cnp.ndarray[double, ndim=2] vertices, cnp.ndarray[cnp.intp_t, ndim=2] triangles,
                cnp.ndarray[double, ndim=1] a_tri, cnp.ndarray[double, ndim=1] b_tri):
    cdef Py_ssize_t nt = triangles.shape[0]
    cdef cnp.ndarray[cnp.intp_t, ndim=1] rows = np.empty(9 * nt, dtype=np.intp)
    cdef cnp.ndarray[cnp.intp_t, ndim=1] cols = np.empty(9 * nt, dtype=np.intp)
    cdef cnp.ndarray[double, ndim=1] stiff = np.empty(9 * nt)
    cdef cnp.ndarray[double, ndim=1] mass = np.empty(9 * nt)
    cdef Py_ssize_t t, j, k, base, v0, v1, v2
    cdef double x0, y0, x1, y1, x2, y2, det, inv, area, am, bm, moff
    cdef double gx[3]
    cdef double gy[3]
    cdef double gs[3]
    for t in range(nt):
        v0 = triangles[t, 0]
        v1 = triangles[t, 1]
        v2 = triangles[t, 2]
        x0 = vertices[v0, 0]; y0 = vertices[v0, 1]
        x1 = vertices[v1, 0]; y1 = vertices[v1, 1]
        x2 = vertices[v2, 0]; y2 = vertices[v2, 1]
        det = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        inv = 1.0 / det
        area = 0.5 * det
        gx[0] = (y1 - y2) * inv; gy[0] = (x2 - x1) * inv
        gx[1] = (y2 - y0) * inv; gy[1] = (x0 - x2) * inv
        gx[2] = (y0 - y1) * inv; gy[2] = (x1 - x0) * inv
        for j in range(3):
            gs[j] = gx[j] + gy[j]
        am = a_tri[t] * area
        bm = b_tri[t] * area / 3.0
        moff = area / 12.0
        base = 9 * t
        for j in range(3):
            for k in range(3):
                rows[base + 3 * j + k] = triangles[t, j]
                cols[base + 3 * j + k] = triangles[t, k]
                stiff[base + 3 * j + k] = am * (gx[j] * gx[k] + gy[j] * gy[k]) + bm * gs[j]
                mass[base + 3 * j + k] = 2.0 * moff if j == k else moff
    return rows, cols, stiff, mass
