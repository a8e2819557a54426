"""Domain types, neighborhoods and initial-configuration sampling."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import _kernels, prf

EMPTY = 0
NEVER = -1

DEFAULT_RGB = {
    "blue": (0, 0, 255),
    "red": (255, 0, 0),
    "green": (0, 160, 0),
}


class Offset(NamedTuple):
    dx: int
    dy: int


class Topology(enum.Enum):
    TORUS = "torus"
    DEAD = "dead"


class Axis(enum.Enum):
    X = "x"
    Y = "y"


@dataclass(frozen=True)
class Neighborhood:
    """Finite set of offsets, stored deduplicated in sorted order."""

    offsets: tuple[Offset, ...]

    def __init__(self, offsets: Iterable[Sequence[int]]):
        canon = tuple(sorted({Offset(int(o[0]), int(o[1])) for o in offsets}))
        if not canon:
            raise ValueError("neighborhood must be nonempty")
        object.__setattr__(self, "offsets", canon)

    def __iter__(self):
        return iter(self.offsets)

    def __len__(self):
        return len(self.offsets)

    def __contains__(self, item):
        return Offset(*item) in self.offsets

    @property
    def maxnorm(self) -> int:
        return max(max(abs(o.dx), abs(o.dy)) for o in self.offsets)

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        dx = np.array([o.dx for o in self.offsets], dtype=np.int64)
        dy = np.array([o.dy for o in self.offsets], dtype=np.int64)
        return dx, dy


def line_neighborhood(range_: int, axis: Axis | str = Axis.X, directed: bool = False) -> Neighborhood:
    """Offsets along one axis.

    Undirected: every nonzero step in ``[-range_, range_]``.  Directed: steps
    ``1..range_`` only, so ``line_neighborhood(1, "x", directed=True)`` is
    ``{e1}`` (a site copies the color of its right neighbor, i.e. growth
    runs leftward).
    """
    if range_ < 1:
        raise ValueError("range must be >= 1")
    axis = Axis(axis)
    steps = range(1, range_ + 1) if directed else [s for s in range(-range_, range_ + 1) if s]
    if axis is Axis.X:
        return Neighborhood((s, 0) for s in steps)
    return Neighborhood((0, s) for s in steps)


def l1_ball(radius: int) -> Neighborhood:
    if radius < 1:
        raise ValueError("radius must be >= 1")
    return Neighborhood(
        (dx, dy)
        for dx in range(-radius, radius + 1)
        for dy in range(-radius, radius + 1)
        if 0 < abs(dx) + abs(dy) <= radius
    )


def parse_period(value) -> Fraction:
    if isinstance(value, str):
        value = value.strip()
    per = Fraction(value)
    if per <= 0:
        raise ValueError(f"period must be positive, got {value!r}")
    return per


@dataclass(frozen=True)
class Species:
    id: int
    neighborhood: Neighborhood
    period: Fraction = Fraction(1)
    label: str = ""
    rgb: tuple[int, int, int] = (0, 0, 0)

    def __post_init__(self):
        if not 1 <= self.id <= 32:
            raise ValueError("species id must be in 1..32")
        object.__setattr__(self, "period", parse_period(self.period))
        if not self.label:
            object.__setattr__(self, "label", f"s{self.id}")


@dataclass(frozen=True)
class ModelSpec:
    species: tuple[Species, ...]
    densities: tuple[float, ...]
    width: int
    height: int
    topology: Topology = Topology.TORUS
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "species", tuple(self.species))
        object.__setattr__(self, "densities", tuple(float(d) for d in self.densities))
        object.__setattr__(self, "topology", Topology(self.topology))
        object.__setattr__(self, "seed", int(self.seed) & prf.MASK64)
        if len(self.species) != len(self.densities):
            raise ValueError("one density per species")
        ids = [s.id for s in self.species]
        if len(set(ids)) != len(ids):
            raise ValueError("species ids must be unique")
        if any(d < 0 for d in self.densities):
            raise ValueError("densities must be nonnegative")
        if sum(self.densities) > 1 + 1e-12:
            raise ValueError(f"densities sum to {sum(self.densities)} > 1")
        if self.width < 1 or self.height < 1:
            raise ValueError("width and height must be >= 1")

    @property
    def tick_scale(self) -> int:
        return math.lcm(*(s.period.denominator for s in self.species))

    def period_ticks(self, sp: Species) -> int:
        t = sp.period * self.tick_scale
        assert t.denominator == 1
        return int(t)

    def by_id(self, sid: int) -> Species:
        for s in self.species:
            if s.id == sid:
                return s
        raise KeyError(sid)

    def with_(self, **changes) -> "ModelSpec":
        kw = dict(
            species=self.species,
            densities=self.densities,
            width=self.width,
            height=self.height,
            topology=self.topology,
            seed=self.seed,
        )
        kw.update(changes)
        return ModelSpec(**kw)


@dataclass(frozen=True)
class Lattice:
    """A configuration: per-site color and coloring tick.

    ``color[y, x]`` is 0 for empty or a species id; ``colored_at[y, x]`` is
    the tick of coloring or -1 (never).  Arrays are read-only.
    """

    model: ModelSpec
    color: np.ndarray
    colored_at: np.ndarray
    tick_scale: int = field(init=False)

    def __post_init__(self):
        color = np.array(self.color, dtype=np.int8)
        colored_at = np.array(self.colored_at, dtype=np.int64)
        shape = (self.model.height, self.model.width)
        if color.shape != shape or colored_at.shape != shape:
            raise ValueError(f"arrays must have shape {shape}")
        valid = np.zeros(256, dtype=bool)
        valid[[0] + [s.id for s in self.model.species]] = True
        if not valid[color.view(np.uint8)].all():
            raise ValueError("unknown color in state")
        if not np.array_equal(color == EMPTY, colored_at == NEVER):
            raise ValueError("a site is empty exactly when it was never colored")
        color.flags.writeable = False
        colored_at.flags.writeable = False
        object.__setattr__(self, "color", color)
        object.__setattr__(self, "colored_at", colored_at)
        object.__setattr__(self, "tick_scale", self.model.tick_scale)

    @classmethod
    def from_colors(cls, model: ModelSpec, color) -> "Lattice":
        color = np.asarray(color, dtype=np.int8)
        return cls(model, color, np.where(color == EMPTY, NEVER, 0))

    @classmethod
    def from_points(cls, model: ModelSpec, points: dict[int, Iterable[tuple[int, int]]]) -> "Lattice":
        """Build a time-0 lattice from ``{species_id: [(x, y), ...]}``.

        Later ids overwrite earlier ones at shared points.
        """
        color = np.zeros((model.height, model.width), dtype=np.int8)
        for sid, pts in points.items():
            for x, y in pts:
                color[y % model.height, x % model.width] = sid
        return cls.from_colors(model, color)

    def counts(self) -> dict[int, int]:
        return {s.id: int((self.color == s.id).sum()) for s in self.model.species}

    def sites(self, sid: int) -> set[tuple[int, int]]:
        ys, xs = np.nonzero(self.color == sid)
        return set(zip(xs.tolist(), ys.tolist()))


def _grid(model: ModelSpec) -> tuple[np.ndarray, np.ndarray]:
    ys, xs = np.mgrid[0 : model.height, 0 : model.width]
    return xs, ys


def sample_initial(model: ModelSpec) -> Lattice:
    """Independent categorical draw at each site from the model densities.

    Site (x, y) takes the first species whose cumulative density exceeds
    ``uniform(seed, INIT, x, y)``.
    """
    cum = np.cumsum(np.array(model.densities, dtype=np.float64))
    ids = np.array([s.id for s in model.species], dtype=np.int8)
    color = _kernels.categorical_block(np.uint64(model.seed), np.uint64(prf.STREAM_INIT), cum, ids,
                                       0, 0, model.height, model.width)
    return Lattice.from_colors(model, color)


def sample_initial_reference(model: ModelSpec) -> Lattice:
    """Vectorized numpy twin of :func:`sample_initial` (same draws)."""
    xs, ys = _grid(model)
    u = prf.uniform_np(model.seed, prf.STREAM_INIT, xs, ys, 0)
    color = np.zeros(u.shape, dtype=np.int8)
    lo = 0.0
    for sp, d in zip(model.species, model.densities):
        hi = lo + d
        color[(u >= lo) & (u < hi)] = sp.id
        lo = hi
    return Lattice.from_colors(model, color)


@dataclass(frozen=True)
class TwoStageSample:
    red: np.ndarray  # bool mask
    potentially_blue: np.ndarray  # bool mask
    lattice: Lattice


def two_stage_sample(model: ModelSpec, p: float, q: float, blue_id: int = 1, red_id: int = 2,
                     origin: tuple[int, int] = (0, 0)) -> TwoStageSample:
    """Mark red with probability q, then potentially blue with p/(1-q).

    The realized lattice is red where marked red, blue where potentially blue
    but not red, empty otherwise; its law matches :func:`sample_initial` with
    densities (p, q).  ``origin`` is the coordinate of array cell (0, 0) in
    the PRF keying, so windows of one infinite field can be sampled.
    """
    if q >= 1:
        raise ValueError("q must be < 1")
    if p < 0 or q < 0 or p + q > 1 + 1e-12:
        raise ValueError("need p, q >= 0 and p + q <= 1")
    x0, y0 = origin
    x1, y1 = x0 + model.width, y0 + model.height
    seed = np.uint64(model.seed)
    red = _kernels.bernoulli_block(seed, np.uint64(prf.STREAM_RED_MARK), q, x0, x1, y0, y1)
    pblue = _kernels.bernoulli_block(seed, np.uint64(prf.STREAM_BLUE_MARK), p / (1 - q), x0, x1, y0, y1)
    color = np.zeros(red.shape, dtype=np.int8)
    color[pblue] = blue_id
    color[red] = red_id
    return TwoStageSample(red, pblue, Lattice.from_colors(model, color))
