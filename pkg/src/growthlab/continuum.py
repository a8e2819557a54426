"""Continuous comparison process: triple recurrence and breakthrough times.

Red moves vertically for free and horizontally at cost ``alpha`` per unit
length; it may not cross blue horizontal segments.  A layer of ``m`` blue
segments of length ``g`` with overlap ``h`` holds red of width ``f`` back
for time ``alpha * h``, after which the red front has width ``f + 2h`` and
the next, ``lambda`` times larger layer takes over.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np


class Triple(NamedTuple):
    f: float
    g: float
    h: float

    def scaled(self, c: float) -> "Triple":
        return Triple(c * self.f, c * self.g, c * self.h)


class Segment(NamedTuple):
    level: float
    left: float
    right: float


def lambda_of(m: int, alpha: float) -> float:
    """Growth eigenvalue ``(m + alpha*m - 1) / (m + 1)``."""
    if m < 1 or alpha <= 0:
        raise ValueError("need m >= 1 and alpha > 0")
    return (m + alpha * m - 1) / (m + 1)


def sigma_of(m: int, lam: float) -> float:
    """Height constant ``2 m sqrt(lam) / (sqrt(lam) - 1)``."""
    s = math.sqrt(lam)
    return 2 * m * s / (s - 1)


@dataclass(frozen=True)
class ContinuumConfig:
    alpha: float
    alpha_bar: float
    m: int

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.alpha_bar <= self.alpha:
            raise ValueError("alpha_bar must exceed alpha")
        if self.m * self.alpha <= 2:
            raise ValueError(f"need m > 2/alpha (m={self.m}, alpha={self.alpha})")

    @property
    def lam(self) -> float:
        return lambda_of(self.m, self.alpha)

    @property
    def sigma(self) -> float:
        return sigma_of(self.m, self.lam)


def affine_map(m: int, alpha: float) -> np.ndarray:
    """Matrix taking (f, g) to (f', g') once h is eliminated by the constraint."""
    return np.array(
        [
            [1 - 2 / (m + 1), 2 * m / (m + 1)],
            [-alpha / (m + 1), (m + alpha * m + 1) / (m + 1)],
        ]
    )


def overhang(f: float, g: float, m: int) -> float:
    """The h solving m (g - h) = f + h."""
    return (m * g - f) / (m + 1)


def initial_triple(cfg: ContinuumConfig) -> Triple:
    m, a = cfg.m, cfg.alpha
    return Triple(1.0, a / 2, (m * a / 2 - 1) / (m + 1))


def constraint_residual(t: Triple, m: int) -> float:
    return m * (t.g - t.h) - (t.f + t.h)


def advance_triple(t: Triple, cfg: ContinuumConfig, tol: float = 1e-12) -> Triple:
    """One layer: f' = f + 2h, g' = g + alpha h, h' from the constraint."""
    scale = max(abs(t.f), abs(t.g), abs(t.h), 1.0)
    if abs(constraint_residual(t, cfg.m)) > tol * scale:
        raise ValueError(f"triple {t} violates m(g-h) = f+h")
    f2 = t.f + 2 * t.h
    g2 = t.g + cfg.alpha * t.h
    return Triple(f2, g2, overhang(f2, g2, cfg.m))


def triples(cfg: ContinuumConfig, n_layers: int) -> list[Triple]:
    """``[t_0, ..., t_{n_layers}]`` by repeated advancing."""
    out = [initial_triple(cfg)]
    for _ in range(n_layers):
        out.append(advance_triple(out[-1], cfg))
    return out


def shifts(cfg: ContinuumConfig, n_layers: int) -> list[float]:
    """Frame shifts with S_0 = 0 and S_{l+1} = S_l - h_l for every l >= 0."""
    ts = triples(cfg, n_layers)
    out = [0.0]
    for t in ts[:-1]:
        out.append(out[-1] - t.h)
    return out


def canonical_obstacles(t: Triple, m: int) -> list[Segment]:
    """The blue layer ``[(k-1)g - kh, kg - kh] x {k}`` for k = 1..m."""
    return [Segment(k, (k - 1) * t.g - k * t.h, k * t.g - k * t.h) for k in range(1, m + 1)]


def _merged_blocks(segs: Sequence[Segment]) -> list[tuple[float, float]]:
    iv = sorted((s.left, s.right) for s in segs)
    out: list[list[float]] = []
    for lo, hi in iv:
        if out and lo <= out[-1][1]:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return [(lo, hi) for lo, hi in out]


def breakthrough(obstacles: Sequence[Segment], red0: Segment, alpha: float) -> tuple[float, tuple[float, float]]:
    """Cheapest time for red to rise above the top obstacle level.

    Returns ``(time, (xmin, xmax))`` where the interval is the hull of the
    points at which red first emerges above the top level.  Vertical moves
    are free; horizontal moves cost ``alpha`` per unit; a path may touch a
    segment's endpoint but not pass through its interior.  Optimal paths
    turn only at segment endpoints, so the cost function is evaluated on the
    finite set of endpoints level by level.
    """
    if red0.left > red0.right:
        raise ValueError("red0 must have left <= right")
    if not obstacles:
        return 0.0, (red0.left, red0.right)
    by_level: dict[float, list[Segment]] = {}
    for s in obstacles:
        if s.left > s.right:
            raise ValueError(f"bad segment {s}")
        if s.level <= red0.level:
            raise ValueError("obstacles must lie above red0")
        by_level.setdefault(s.level, []).append(s)
    pts = sorted({red0.left, red0.right} | {v for s in obstacles for v in (s.left, s.right)})
    xs = np.array(pts)
    cost = alpha * np.maximum(0.0, np.maximum(red0.left - xs, xs - red0.right))
    for level in sorted(by_level):
        prev = cost.copy()
        for lo, hi in _merged_blocks(by_level[level]):
            inside = (xs > lo) & (xs < hi)
            if not inside.any():
                continue
            c_lo = prev[np.searchsorted(xs, lo)]
            c_hi = prev[np.searchsorted(xs, hi)]
            cost[inside] = np.minimum(c_lo + alpha * (xs[inside] - lo), c_hi + alpha * (hi - xs[inside]))
    best = float(cost.min())
    tol = 1e-12 * max(1.0, abs(best))
    hit = xs[cost <= best + tol]
    return best, (float(hit.min()), float(hit.max()))


def layer_table(cfg: ContinuumConfig, n_layers: int) -> list[dict]:
    """Rows of (l, f, g, h, S) for display."""
    ts = triples(cfg, n_layers)
    ss = shifts(cfg, n_layers)
    return [dict(l=i, f=t.f, g=t.g, h=t.h, S=s) for i, (t, s) in enumerate(zip(ts, ss))]
