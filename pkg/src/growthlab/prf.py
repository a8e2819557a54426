"""Counter-based pseudorandomness.

Every random decision in the package is a pure function of
``(seed, stream, x, y, tick)``.  The mixer is the splitmix64 finalizer
applied once per input word::

    h = mix64(seed + GOLDEN)
    for v in (stream, x, y, tick):
        h = mix64((h ^ (v mod 2**64)) + GOLDEN)

``mix64`` is the splitmix64 output function (Stafford variant 13).  Negative
coordinates enter in two's complement.  The construction is frozen: changing
it changes every simulation result.

Three implementations are kept in lockstep and tested against each other:
pure Python (the definition), a numpy vectorized version and a numba
scalar version used inside the kernels.
"""

from __future__ import annotations

import numpy as np
from numba import njit

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

# stream identifiers
STREAM_TIE = 1
STREAM_INIT = 2
STREAM_RED_MARK = 3
STREAM_BLUE_MARK = 4
STREAM_REPLICATE = 5
STREAM_FIELD = 6


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def prf64(seed: int, stream: int, x: int, y: int, tick: int) -> int:
    h = mix64(seed + GOLDEN)
    for v in (stream, x, y, tick):
        h = mix64(((h ^ (v & MASK64)) + GOLDEN) & MASK64)
    return h


def uniform(seed: int, stream: int, x: int, y: int, tick: int = 0) -> float:
    """Uniform draw in [0, 1) with 53 bits of resolution."""
    return (prf64(seed, stream, x, y, tick) >> 11) * 2.0**-53


def coin(seed: int, stream: int, x: int, y: int, tick: int, n_claimants: int) -> int:
    """Winner index in ``range(n_claimants)`` for a tie at site (x, y)."""
    if n_claimants < 2:
        raise ValueError("a tie needs at least two claimants")
    return ((prf64(seed, stream, x, y, tick) >> 32) * n_claimants) >> 32


def derive_seed(seed: int, index: int, stream: int = 5) -> int:
    """Independent 64-bit seed for replicate ``index``."""
    return prf64(seed, stream, index, 0, 0)


# ---------------------------------------------------------------- numpy

_U = np.uint64


def _mix64_np(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _U(30))) * _U(_M1)
    z = (z ^ (z >> _U(27))) * _U(_M2)
    return z ^ (z >> _U(31))


def _as_u64(v) -> np.ndarray:
    return np.asarray(v, dtype=np.int64).astype(np.uint64)


def prf64_np(seed: int, stream: int, x, y, tick) -> np.ndarray:
    """Vectorized :func:`prf64`; ``x``, ``y``, ``tick`` broadcast."""
    x, y, tick = np.broadcast_arrays(_as_u64(x), _as_u64(y), _as_u64(tick))
    with np.errstate(over="ignore"):
        h = _mix64_np(np.full(x.shape, (seed + GOLDEN) & MASK64, dtype=np.uint64))
        h = _mix64_np((h ^ _U(stream & MASK64)) + _U(GOLDEN))
        for v in (x, y, tick):
            h = _mix64_np((h ^ v) + _U(GOLDEN))
    return h


def uniform_np(seed: int, stream: int, x, y, tick=0) -> np.ndarray:
    return (prf64_np(seed, stream, x, y, tick) >> _U(11)).astype(np.float64) * 2.0**-53


def coin_np(seed: int, stream: int, x, y, tick, n_claimants) -> np.ndarray:
    h = prf64_np(seed, stream, x, y, tick) >> _U(32)
    n = np.asarray(n_claimants).astype(np.uint64)
    with np.errstate(over="ignore"):
        return ((h * n) >> _U(32)).astype(np.int64)


# ---------------------------------------------------------------- numba


@njit(cache=True, nogil=True)
def _mix64_nb(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True)
def prf64_nb(seed, stream, x, y, tick):
    g = np.uint64(GOLDEN)
    h = _mix64_nb(np.uint64(seed) + g)
    h = _mix64_nb((h ^ np.uint64(stream)) + g)
    h = _mix64_nb((h ^ np.uint64(np.int64(x))) + g)
    h = _mix64_nb((h ^ np.uint64(np.int64(y))) + g)
    h = _mix64_nb((h ^ np.uint64(np.int64(tick))) + g)
    return h


@njit(cache=True, nogil=True)
def uniform_nb(seed, stream, x, y, tick):
    return np.float64(prf64_nb(seed, stream, x, y, tick) >> np.uint64(11)) * 2.0**-53


@njit(cache=True, nogil=True)
def coin_nb(seed, stream, x, y, tick, n):
    h = prf64_nb(seed, stream, x, y, tick) >> np.uint64(32)
    return np.int64((h * np.uint64(n)) >> np.uint64(32))
