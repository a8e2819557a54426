"""Synchronous evolution of the competing growth process.

Two engines share one contract.  :func:`run_to_fixation` walks per-species
frontiers in compiled code; :func:`run_reference` rescans the whole lattice
at every event tick with numpy and serves as its oracle.  Both must return
bit-identical :class:`SimResult` values.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

import numpy as np

from . import _kernels, prf
from .lattice import EMPTY, NEVER, Lattice, ModelSpec, Topology

_TICK_LIMIT = 2**62


@dataclass(frozen=True)
class Schedule:
    """Event ticks of every species: species ``s`` updates at k * period_ticks[s], k >= 1."""

    tick_scale: int
    period_ticks: dict[int, int]

    @classmethod
    def from_model(cls, model: ModelSpec) -> "Schedule":
        return cls(model.tick_scale, {s.id: model.period_ticks(s) for s in model.species})

    def updating(self, tick: int) -> list[int]:
        if tick <= 0:
            return []
        return sorted(sid for sid, per in self.period_ticks.items() if tick % per == 0)

    def is_tie_tick(self, tick: int) -> bool:
        return len(self.updating(tick)) >= 2

    def events(self, after: int = 0) -> Iterator[tuple[int, list[int]]]:
        """Merged stream of ``(tick, updating species ids)`` for ticks > ``after``."""
        heap = [((after // per + 1) * per, sid) for sid, per in self.period_ticks.items()]
        heapq.heapify(heap)
        while heap:
            t = heap[0][0]
            ups = []
            while heap and heap[0][0] == t:
                _, sid = heapq.heappop(heap)
                ups.append(sid)
                heapq.heappush(heap, (t + self.period_ticks[sid], sid))
            yield t, sorted(ups)

    def to_time(self, tick: int) -> Fraction:
        return Fraction(tick, self.tick_scale)


@dataclass(frozen=True)
class SimResult:
    lattice: Lattice
    fixation_tick: int  # tick of the last change (0 if none)
    capped: bool  # horizon reached before fixation
    counts: dict[int, int]
    empty: int

    @property
    def colored_at(self) -> np.ndarray:
        return self.lattice.colored_at

    @property
    def fixation_time(self) -> Fraction:
        return Fraction(self.fixation_tick, self.lattice.tick_scale)

    def fractions(self) -> dict[int, float]:
        n = self.lattice.color.size
        out = {sid: c / n for sid, c in self.counts.items()}
        out[EMPTY] = self.empty / n
        return out

    def same_as(self, other: "SimResult") -> bool:
        return (
            self.fixation_tick == other.fixation_tick
            and self.capped == other.capped
            and np.array_equal(self.lattice.color, other.lattice.color)
            and np.array_equal(self.lattice.colored_at, other.lattice.colored_at)
        )


def default_horizon(model: ModelSpec) -> int:
    return 4 * (model.width + model.height) * model.tick_scale


def _result(model: ModelSpec, color, colored_at, last_change: int, capped: bool) -> SimResult:
    lat = Lattice(model, color, colored_at)
    counts = lat.counts()
    return SimResult(lat, int(last_change), bool(capped), counts, int((lat.color == EMPTY).sum()))


def _check_horizon(model: ModelSpec, horizon_ticks: int | None) -> int:
    if horizon_ticks is None:
        horizon_ticks = default_horizon(model)
    if horizon_ticks < 0:
        raise ValueError("horizon must be >= 0")
    sched = Schedule.from_model(model)
    if horizon_ticks + max(sched.period_ticks.values()) >= _TICK_LIMIT:
        raise OverflowError(f"horizon {horizon_ticks} overflows tick arithmetic")
    return int(horizon_ticks)


def _kernel_args(model: ModelSpec):
    sp = sorted(model.species, key=lambda s: s.id)
    ids = np.array([s.id for s in sp], dtype=np.int64)
    dxs, dys, ptr = [], [], [0]
    for s in sp:
        dx, dy = s.neighborhood.as_arrays()
        dxs.append(dx)
        dys.append(dy)
        ptr.append(ptr[-1] + len(dx))
    period = np.array([model.period_ticks(s) for s in sp], dtype=np.int64)
    return ids, np.concatenate(dxs), np.concatenate(dys), np.array(ptr, dtype=np.int64), period


def run_to_fixation(lattice: Lattice, horizon_ticks: int | None = None) -> SimResult:
    """Run the frontier engine until every species is dead or the horizon passes.

    Events at ticks ``<= horizon_ticks`` are applied.  The default horizon is
    ``4 * (width + height) * tick_scale``.
    """
    model = lattice.model
    horizon = _check_horizon(model, horizon_ticks)
    color = np.array(lattice.color, dtype=np.int8)
    colored_at = np.array(lattice.colored_at, dtype=np.int64)
    ids, dx, dy, ptr, period = _kernel_args(model)
    last, capped = _kernels.run_frontier(
        color, colored_at, ids, dx, dy, ptr, period,
        model.topology is Topology.TORUS, np.uint64(model.seed), horizon,
    )
    last = max(last, int(lattice.colored_at.max(initial=0)))
    return _result(model, color, colored_at, last, capped)


# ---------------------------------------------------------------- reference


def _shifted(mask: np.ndarray, dx: int, dy: int, torus: bool) -> np.ndarray:
    """``out[y, x] = mask[y + dy, x + dx]`` (False off a dead boundary)."""
    if torus:
        return np.roll(mask, shift=(-dy, -dx), axis=(0, 1))
    H, W = mask.shape
    out = np.zeros_like(mask)
    if abs(dx) >= W or abs(dy) >= H:
        return out
    ys = slice(max(0, -dy), min(H, H - dy))
    xs = slice(max(0, -dx), min(W, W - dx))
    ys_src = slice(max(0, dy), min(H, H + dy))
    xs_src = slice(max(0, dx), min(W, W + dx))
    out[ys, xs] = mask[ys_src, xs_src]
    return out


def _claims(model: ModelSpec, color: np.ndarray, sid: int) -> np.ndarray:
    torus = model.topology is Topology.TORUS
    own = color == sid
    seen = np.zeros_like(own)
    for o in model.by_id(sid).neighborhood:
        seen |= _shifted(own, o.dx, o.dy, torus)
    return seen & (color == EMPTY)


def _apply(model: ModelSpec, color: np.ndarray, colored_at: np.ndarray,
           updating: list[int], tick: int) -> np.ndarray:
    """One synchronous update in place; returns the (y, x) of new sites."""
    if not updating:
        return np.empty((0, 2), dtype=np.int64)
    claims = np.stack([_claims(model, color, sid) for sid in updating])
    n_claim = claims.sum(axis=0)
    winner = np.argmax(claims, axis=0)  # first claimant in ascending id order
    ys, xs = np.nonzero(n_claim >= 2)
    if len(ys):
        k = n_claim[ys, xs]
        pick = prf.coin_np(model.seed, prf.STREAM_TIE, xs, ys, tick, k)
        # index of the pick-th True along the species axis
        csum = np.cumsum(claims[:, ys, xs], axis=0)
        winner[ys, xs] = np.argmax(csum > pick[None, :], axis=0)
    new = n_claim >= 1
    ids = np.array(updating, dtype=np.int8)
    assert not (color[new] != EMPTY).any(), "write-once violated"
    color[new] = ids[winner[new]]
    colored_at[new] = tick
    return np.argwhere(new)


def step(lattice: Lattice, schedule: Schedule, tick: int) -> tuple[Lattice, np.ndarray]:
    """Apply the update at ``tick`` to a copy of ``lattice``.

    Returns the new lattice and the ``(x, y)`` coordinates of newly colored
    sites.  Candidates are read from the pre-update state.
    """
    color = np.array(lattice.color)
    colored_at = np.array(lattice.colored_at)
    new = _apply(lattice.model, color, colored_at, schedule.updating(tick), tick)
    return Lattice(lattice.model, color, colored_at), new[:, ::-1]


def _is_fixed(model: ModelSpec, color: np.ndarray) -> bool:
    return not any(_claims(model, color, s.id).any() for s in model.species)


def run_reference(lattice: Lattice, horizon_ticks: int | None = None,
                  check_invariants: bool = False) -> SimResult:
    """Full-scan oracle for :func:`run_to_fixation`.

    Stops as soon as the state is a fixed point (no species could color any
    site), which does not rely on the frontier argument.  With
    ``check_invariants`` it also asserts that a species whose update colored
    nothing never colors anything later.
    """
    model = lattice.model
    horizon = _check_horizon(model, horizon_ticks)
    sched = Schedule.from_model(model)
    color = np.array(lattice.color)
    colored_at = np.array(lattice.colored_at)
    last = int(colored_at.max(initial=0))
    dead: set[int] = set()
    fixed = _is_fixed(model, color)
    for tick, ups in sched.events():
        if fixed or tick > horizon:
            break
        before = color.copy() if check_invariants else None
        new = _apply(model, color, colored_at, ups, tick)
        if len(new):
            last = tick
        if check_invariants:
            grew = {int(c) for c in np.unique(color[before != color])}
            assert not (grew & dead), f"dead species {grew & dead} grew at tick {tick}"
            dead |= set(ups) - grew
        if not len(new):
            fixed = _is_fixed(model, color)
    capped = not fixed and not _is_fixed(model, color)
    return _result(model, color, colored_at, last, capped)


def window_dependence_radius(model: ModelSpec, t_ticks: int) -> int:
    """Speed-of-light radius (L-infinity) for a time horizon of ``t_ticks``.

    ``ceil(T * sum_s maxnorm(N_s) / period_s)`` with ``T = t_ticks / tick_scale``.
    """
    if t_ticks < 0:
        raise ValueError("T must be >= 0")
    t = Fraction(t_ticks, model.tick_scale)
    rate = sum(Fraction(s.neighborhood.maxnorm) / s.period for s in model.species)
    return math.ceil(t * rate)
