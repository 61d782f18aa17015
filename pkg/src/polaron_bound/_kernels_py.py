"""Pure numpy implementation of the special-function tables.

Same recurrences as the compiled module, vectorised over the abscissae.
"""
from __future__ import annotations

import numpy as np

_BIG = 1e200
_SMALL = 1e-200
SERIES_X = 1e-5


def spherical_jn_table(x: np.ndarray, lmax: int) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    ax = np.abs(x)
    out = np.zeros((lmax + 1, x.size))
    tiny = ax < SERIES_X
    # the series also covers x = 0
    if tiny.any():
        xt = ax[tiny]
        term = np.ones_like(xt)
        for l in range(lmax + 1):
            if l > 0:
                term = term * xt / (2 * l + 1)
            out[l, tiny] = term * (1.0 - xt * xt / (2.0 * (2 * l + 3)))
    safe = np.where(tiny, 1.0, ax)
    j0 = np.where(tiny, out[0], np.sin(safe) / safe)
    out[0] = j0
    if lmax == 0:
        return out
    j1 = np.where(tiny, out[1], np.sin(safe) / safe**2 - np.cos(safe) / safe)

    up = (ax > lmax) & ~tiny
    if up.any():
        xu = ax[up]
        prev, cur = j0[up], j1[up]
        out[1, up] = cur
        for l in range(1, lmax):
            nxt = (2 * l + 1) / xu * cur - prev
            out[l + 1, up] = nxt
            prev, cur = cur, nxt

    down = ~up & ~tiny
    if down.any():
        xd = ax[down]
        block = np.zeros((lmax + 1, xd.size))
        start = lmax + 40 + int(np.sqrt(40.0 * lmax))
        nxt = np.zeros_like(xd)
        cur = np.full_like(xd, _SMALL)
        for l in range(start, 0, -1):
            prev = (2 * l + 1) / xd * cur - nxt
            nxt, cur = cur, prev
            if l - 1 <= lmax:
                block[l - 1] = cur
            big = np.abs(cur) > _BIG
            if big.any():
                cur[big] *= _SMALL
                nxt[big] *= _SMALL
                if l - 1 <= lmax:
                    block[l - 1:, big] *= _SMALL
        jd0, jd1 = j0[down], j1[down]
        use0 = np.abs(jd0) >= np.abs(jd1)
        scale = np.where(use0, jd0 / block[0], jd1 / np.where(use0, 1.0, block[1]))
        out[:, down] = block * scale
    neg = x < 0.0
    if neg.any():
        out[1::2, neg] *= -1.0
    return out


def legendre_q_table(chi: np.ndarray, lmax: int) -> np.ndarray:
    chi = np.ascontiguousarray(chi, dtype=np.float64)
    out = np.zeros((lmax + 1, chi.size))
    q0 = 0.5 * np.log1p(2.0 / (chi - 1.0))
    out[0] = q0
    if lmax == 0:
        return out

    rho_all = chi + np.sqrt(chi * chi - 1.0)
    near = lmax * np.log(rho_all) < 5.0
    if near.any():
        c = chi[near]
        prev = q0[near]
        cur = c * prev - 1.0
        out[1, near] = cur
        for l in range(1, lmax):
            nxt = ((2 * l + 1) * c * cur - l * prev) / (l + 1)
            out[l + 1, near] = nxt
            prev, cur = cur, nxt

    far = ~near
    if far.any():
        c = chi[far]
        rho = rho_all[far]
        starts = lmax + np.ceil(40.0 / np.log(rho)).astype(int) + 10
        block = np.zeros((lmax + 1, c.size))
        nxt = np.zeros_like(c)
        cur = np.zeros_like(c)
        for l in range(int(starts.max()), 0, -1):
            cur = np.where(starts == l, _SMALL, cur)
            prev = ((2 * l + 1) * c * cur - (l + 1) * nxt) / l
            nxt, cur = cur, prev
            if l - 1 <= lmax:
                block[l - 1] = cur
            big = np.abs(cur) > _BIG
            if big.any():
                cur[big] *= _SMALL
                nxt[big] *= _SMALL
                if l - 1 <= lmax:
                    block[l - 1:, big] *= _SMALL
        out[:, far] = block * (q0[far] / block[0])
    return out
