# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Same contract as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor, pow

cnp.import_array()

NAME = "native"


def mls_similarity(queries, controls, targets, double alpha, double eps):
    cdef double[:, ::1] v = np.ascontiguousarray(queries, dtype=np.float64)
    cdef double[:, ::1] d = np.ascontiguousarray(controls, dtype=np.float64)
    cdef double[:, ::1] b = np.ascontiguousarray(targets, dtype=np.float64)
    cdef Py_ssize_t nq = v.shape[0], n = d.shape[0]
    out_arr = np.empty((nq, 2), dtype=np.float64)
    w_arr = np.empty(n, dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] w = w_arr
    cdef Py_ssize_t q, i, hit
    cdef double vx, vy, dx, dy, d2, eps2 = eps * eps
    cdef double wsum, px, py, qx, qy, phx, phy, qhx, qhy, mu, re, im, ux, uy

    with nogil:
        for q in range(nq):
            vx = v[q, 0]
            vy = v[q, 1]
            hit = -1
            for i in range(n):
                dx = d[i, 0] - vx
                dy = d[i, 1] - vy
                d2 = dx * dx + dy * dy
                if d2 < eps2:
                    hit = i
                    break
                if alpha == 1.0:
                    w[i] = 1.0 / d2
                else:
                    w[i] = pow(d2, -alpha)
            if hit >= 0:
                out[q, 0] = b[hit, 0]
                out[q, 1] = b[hit, 1]
                continue
            wsum = 0.0
            px = 0.0
            py = 0.0
            qx = 0.0
            qy = 0.0
            for i in range(n):
                wsum += w[i]
                px += w[i] * d[i, 0]
                py += w[i] * d[i, 1]
                qx += w[i] * b[i, 0]
                qy += w[i] * b[i, 1]
            px /= wsum
            py /= wsum
            qx /= wsum
            qy /= wsum
            mu = 0.0
            re = 0.0
            im = 0.0
            for i in range(n):
                phx = d[i, 0] - px
                phy = d[i, 1] - py
                qhx = b[i, 0] - qx
                qhy = b[i, 1] - qy
                mu += w[i] * (phx * phx + phy * phy)
                re += w[i] * (qhx * phx + qhy * phy)
                im += w[i] * (qhy * phx - qhx * phy)
            re /= mu
            im /= mu
            ux = vx - px
            uy = vy - py
            out[q, 0] = re * ux - im * uy + qx
            out[q, 1] = re * uy + im * ux + qy
    return out_arr


def remap_bilinear(src, mapx, mapy, double tol):
    cdef const unsigned char[:, :, ::1] s = np.ascontiguousarray(src, dtype=np.uint8)
    cdef double[:, ::1] mx = np.ascontiguousarray(mapx, dtype=np.float64)
    cdef double[:, ::1] my = np.ascontiguousarray(mapy, dtype=np.float64)
    cdef Py_ssize_t h = s.shape[0], w = s.shape[1], nc = s.shape[2]
    cdef Py_ssize_t oh = mx.shape[0], ow = mx.shape[1]
    out_arr = np.zeros((oh, ow, nc), dtype=np.uint8)
    cdef unsigned char[:, :, ::1] out = out_arr
    cdef Py_ssize_t r, c, k, x0, y0, x1, y1
    cdef double sx, sy, fx, fy, val

    with nogil:
        for r in range(oh):
            for c in range(ow):
                sx = mx[r, c]
                sy = my[r, c]
                if not (sx >= -tol and sx <= w - 1 + tol and sy >= -tol and sy <= h - 1 + tol):
                    continue
                if sx < 0.0:
                    sx = 0.0
                elif sx > w - 1.0:
                    sx = w - 1.0
                if sy < 0.0:
                    sy = 0.0
                elif sy > h - 1.0:
                    sy = h - 1.0
                x0 = <Py_ssize_t>floor(sx)
                y0 = <Py_ssize_t>floor(sy)
                fx = sx - x0
                fy = sy - y0
                x1 = x0 + 1 if x0 + 1 < w else w - 1
                y1 = y0 + 1 if y0 + 1 < h else h - 1
                for k in range(nc):
                    val = ((1.0 - fx) * (1.0 - fy) * s[y0, x0, k]
                           + fx * (1.0 - fy) * s[y0, x1, k]
                           + (1.0 - fx) * fy * s[y1, x0, k]
                           + fx * fy * s[y1, x1, k])
                    val = floor(val + 0.5)
                    if val < 0.0:
                        val = 0.0
                    elif val > 255.0:
                        val = 255.0
                    out[r, c, k] = <unsigned char>val
    return out_arr


def remap_nearest(src, mapx, mapy):
    cdef const unsigned char[:, ::1] s = np.ascontiguousarray(src, dtype=np.uint8)
    cdef double[:, ::1] mx = np.ascontiguousarray(mapx, dtype=np.float64)
    cdef double[:, ::1] my = np.ascontiguousarray(mapy, dtype=np.float64)
    cdef Py_ssize_t h = s.shape[0], w = s.shape[1]
    cdef Py_ssize_t oh = mx.shape[0], ow = mx.shape[1]
    out_arr = np.zeros((oh, ow), dtype=np.uint8)
    cdef unsigned char[:, ::1] out = out_arr
    cdef Py_ssize_t r, c
    cdef double xi, yi

    with nogil:
        for r in range(oh):
            for c in range(ow):
                xi = floor(mx[r, c] + 0.5)
                yi = floor(my[r, c] + 0.5)
                if xi >= 0 and xi <= w - 1 and yi >= 0 and yi <= h - 1:
                    out[r, c] = s[<Py_ssize_t>yi, <Py_ssize_t>xi]
    return out_arr
