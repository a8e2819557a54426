"""Compiled inner loops for the frontier engine and PRF fields."""

from __future__ import annotations

import numpy as np
from numba import njit

from .prf import STREAM_TIE, coin_nb, uniform_nb


@njit(cache=True, nogil=True)
def _popcount(v):
    c = 0
    while v:
        v &= v - np.uint32(1)
        c += 1
    return c


@njit(cache=True, nogil=True)
def _nth_bit(mask, n):
    # index of the n-th set bit (0-based) in ascending order
    i = 0
    while True:
        if (mask >> np.uint32(i)) & np.uint32(1):
            if n == 0:
                return i
            n -= 1
        i += 1


@njit(cache=True, nogil=True)
def _target(fx, fy, dx, dy, W, H, torus):
    # site x with x + (dx, dy) == f; -1 when off a dead boundary
    x = fx - dx
    y = fy - dy
    if torus:
        x %= W
        y %= H
    elif x < 0 or x >= W or y < 0 or y >= H:
        return -1
    return y * W + x


@njit(cache=True, nogil=True)
def run_frontier(color, colored_at, ids, off_dx, off_dy, off_ptr, period, torus, seed, horizon):
    """Evolve ``color``/``colored_at`` (flattened, modified in place).

    Species index ``s`` has id ``ids[s]`` (ascending), offsets
    ``off_*[off_ptr[s]:off_ptr[s+1]]`` and period ``period[s]`` ticks.
    Returns ``(last_change_tick, capped)``.
    """
    H, W = color.shape
    n = H * W
    S = ids.shape[0]
    cflat = color.reshape(n)
    tflat = colored_at.reshape(n)

    index_of = np.full(128, -1, np.int64)
    for s in range(S):
        index_of[ids[s]] = s

    buf = np.empty((S, n), np.int32)
    start = np.zeros(S, np.int64)
    end = np.zeros(S, np.int64)
    for j in range(n):
        c = cflat[j]
        if c != 0:
            s = index_of[c]
            buf[s, end[s]] = j
            end[s] += 1
    alive = np.zeros(S, np.bool_)
    next_tick = np.zeros(S, np.int64)
    for s in range(S):
        alive[s] = end[s] > start[s]
        next_tick[s] = period[s]

    claim = np.zeros(n, np.uint32)
    touched = np.empty(n, np.int32)
    new_start = np.zeros(S, np.int64)
    updating = np.zeros(S, np.bool_)
    last_change = 0
    capped = False

    while True:
        t = -1
        for s in range(S):
            if alive[s] and (t < 0 or next_tick[s] < t):
                t = next_tick[s]
        if t < 0:
            break
        if t > horizon:
            # capped only if some live species would still grow
            for s in range(S):
                if not alive[s]:
                    continue
                for i in range(start[s], end[s]):
                    f = buf[s, i]
                    fy = f // W
                    fx = f - fy * W
                    for o in range(off_ptr[s], off_ptr[s + 1]):
                        j = _target(fx, fy, off_dx[o], off_dy[o], W, H, torus)
                        if j >= 0 and cflat[j] == 0:
                            capped = True
                            break
                    if capped:
                        break
                if capped:
                    break
            break

        nt = 0
        for s in range(S):
            updating[s] = alive[s] and next_tick[s] == t
            if not updating[s]:
                continue
            bit = np.uint32(1) << np.uint32(s)
            for i in range(start[s], end[s]):
                f = buf[s, i]
                fy = f // W
                fx = f - fy * W
                for o in range(off_ptr[s], off_ptr[s + 1]):
                    j = _target(fx, fy, off_dx[o], off_dy[o], W, H, torus)
                    if j < 0 or cflat[j] != 0:
                        continue
                    if claim[j] == 0:
                        touched[nt] = j
                        nt += 1
                    claim[j] |= bit
            new_start[s] = end[s]

        for k in range(nt):
            j = touched[k]
            mask = claim[j]
            claim[j] = 0
            cnt = _popcount(mask)
            if cnt == 1:
                s = _nth_bit(mask, 0)
            else:
                y = j // W
                x = j - y * W
                s = _nth_bit(mask, coin_nb(seed, STREAM_TIE, x, y, t, cnt))
            cflat[j] = ids[s]
            tflat[j] = t
            buf[s, end[s]] = j
            end[s] += 1

        for s in range(S):
            if updating[s]:
                start[s] = new_start[s]
                if end[s] == start[s]:
                    alive[s] = False
                next_tick[s] += period[s]
        if nt > 0:
            last_change = t

    return last_change, capped


@njit(cache=True, nogil=True)
def bernoulli_rows_any(seed, stream, threshold, x0, x1, y0, y1):
    """Per row y in [y0, y1): does the PRF field have a hit in [x0, x1)?"""
    out = np.zeros(y1 - y0, np.bool_)
    for y in range(y0, y1):
        for x in range(x0, x1):
            if uniform_nb(seed, stream, x, y, 0) < threshold:
                out[y - y0] = True
                break
    return out


@njit(cache=True, nogil=True)
def bernoulli_block(seed, stream, threshold, x0, x1, y0, y1):
    out = np.zeros((y1 - y0, x1 - x0), np.bool_)
    for y in range(y0, y1):
        for x in range(x0, x1):
            out[y - y0, x - x0] = uniform_nb(seed, stream, x, y, 0) < threshold
    return out


@njit(cache=True, nogil=True)
def categorical_block(seed, stream, cum, ids, x0, y0, H, W):
    """``out[y, x] = ids[i]`` for the first i with u(x0+x, y0+y) < cum[i], else 0."""
    out = np.zeros((H, W), np.int8)
    n = cum.shape[0]
    for y in range(H):
        for x in range(W):
            u = uniform_nb(seed, stream, x0 + x, y0 + y, 0)
            lo = 0.0
            for i in range(n):
                if lo <= u < cum[i]:
                    out[y, x] = ids[i]
                    break
                lo = cum[i]
    return out
