# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled special-function tables.

Both routines fill an ``(lmax + 1, n)`` table in one pass per abscissa,
which is what the sector loops need.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, fabs, log, log1p, sqrt, ceil

cnp.import_array()

cdef double _BIG = 1e200
cdef double _SMALL = 1e-200
SERIES_X = 1e-5


def spherical_jn_table(double[::1] x, int lmax):
    """Spherical Bessel functions ``j_0 .. j_lmax`` at every ``x``.

    Upward recurrence where it is stable (``x > lmax``), otherwise Miller
    downward recurrence with rescaling, normalised against ``j_0`` or ``j_1``.
    Below ``SERIES_X`` the two-term power series is used.
    """
    cdef Py_ssize_t n = x.shape[0]
    out_arr = np.zeros((lmax + 1, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i
    cdef int l, l2, start
    cdef double xi, j0, j1, f_next, f_cur, f_prev, scale, term
    for i in range(n):
        xi = fabs(x[i])
        if xi == 0.0:
            out[0, i] = 1.0
            continue
        if xi < SERIES_X:
            # x^l / (2l+1)!! (1 - x^2 / (2 (2l+3))); the quartic term is below 1e-21
            term = 1.0
            for l in range(lmax + 1):
                if l > 0:
                    term *= xi / (2 * l + 1)
                out[l, i] = term * (1.0 - xi * xi / (2.0 * (2 * l + 3)))
            continue
        j0 = sin(xi) / xi
        out[0, i] = j0
        if lmax == 0:
            continue
        j1 = sin(xi) / (xi * xi) - cos(xi) / xi
        if xi > lmax:
            out[1, i] = j1
            f_prev = j0
            f_cur = j1
            for l in range(1, lmax):
                f_next = (2 * l + 1) / xi * f_cur - f_prev
                out[l + 1, i] = f_next
                f_prev = f_cur
                f_cur = f_next
            continue
        start = lmax + 40 + <int>sqrt(40.0 * lmax)
        f_next = 0.0
        f_cur = _SMALL
        for l in range(start, 0, -1):
            f_prev = (2 * l + 1) / xi * f_cur - f_next
            f_next = f_cur
            f_cur = f_prev
            if l - 1 <= lmax:
                out[l - 1, i] = f_cur
            if fabs(f_cur) > _BIG:
                f_cur *= _SMALL
                f_next *= _SMALL
                for l2 in range(l - 1, lmax + 1):
                    out[l2, i] *= _SMALL
        if fabs(j0) >= fabs(j1):
            scale = j0 / out[0, i]
        else:
            scale = j1 / out[1, i]
        for l in range(lmax + 1):
            out[l, i] *= scale
    # odd orders flip sign for negative arguments
    for i in range(n):
        if x[i] < 0.0:
            for l in range(1, lmax + 1, 2):
                out[l, i] = -out[l, i]
    return out_arr


def legendre_q_table(double[::1] chi, int lmax):
    """Legendre functions of the second kind ``Q_0 .. Q_lmax`` for ``chi > 1``.

    Upward recurrence while its error growth ``rho**(2 lmax)`` stays small and Miller backward recurrence,
    normalised by the closed form of ``Q_0``, further out.
    """
    cdef Py_ssize_t n = chi.shape[0]
    out_arr = np.zeros((lmax + 1, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i
    cdef int l, l2, start
    cdef double c, q0, q1, f_next, f_cur, f_prev, rho, scale
    for i in range(n):
        c = chi[i]
        q0 = 0.5 * log1p(2.0 / (c - 1.0))
        out[0, i] = q0
        if lmax == 0:
            continue
        rho = c + sqrt(c * c - 1.0)
        if lmax * log(rho) < 5.0:
            f_prev = q0
            f_cur = c * q0 - 1.0
            out[1, i] = f_cur
            for l in range(1, lmax):
                f_next = ((2 * l + 1) * c * f_cur - l * f_prev) / (l + 1)
                out[l + 1, i] = f_next
                f_prev = f_cur
                f_cur = f_next
            continue
        start = lmax + <int>ceil(40.0 / log(rho)) + 10
        f_next = 0.0
        f_cur = _SMALL
        for l in range(start, 0, -1):
            # Q_{l-1} = ((2l+1) chi Q_l - (l+1) Q_{l+1}) / l
            f_prev = ((2 * l + 1) * c * f_cur - (l + 1) * f_next) / l
            f_next = f_cur
            f_cur = f_prev
            if l - 1 <= lmax:
                out[l - 1, i] = f_cur
            if fabs(f_cur) > _BIG:
                f_cur *= _SMALL
                f_next *= _SMALL
                for l2 in range(l - 1, lmax + 1):
                    out[l2, i] *= _SMALL
        scale = q0 / out[0, i]
        for l in range(lmax + 1):
            out[l, i] *= scale
    return out_arr
