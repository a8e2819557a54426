"""Discrete multiscale blocking configurations.

A scaffold is a stack of layers, each made of ``m`` boxes piled on top of
each other.  Box ``k`` of layer ``l`` starts at the rescaled x-coordinate
``(k-1) g_l - k h_l + S_l``, is rescaled ``g_l`` wide and rescaled
``lambda**(-l/2)`` tall.  Right of every box sits its activation region; a
blue site there grows leftward across the box.  Lengths are converted to
lattice units by ``rescaled(u) = ceil(u * p**(-rho/(rho+1)))``.

Coordinates are lattice coordinates with y pointing up (array row index).
A rectangle covers the cells ``x .. x+width-1`` by ``y .. y+height-1``.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, NamedTuple, Protocol, Sequence

import numpy as np

from . import _kernels, prf
from .continuum import ContinuumConfig, shifts, triples
from .engine import SimResult, run_to_fixation
from .lattice import Lattice, ModelSpec, Species, Topology, l1_ball, line_neighborhood


@dataclass(frozen=True)
class RescaleRule:
    p: float
    rho: int = 1

    def __post_init__(self):
        if not 0 < self.p <= 1:
            raise ValueError("p must be in (0, 1]")
        if self.rho < 1:
            raise ValueError("rho must be >= 1")

    @property
    def scale(self) -> float:
        return self.p ** (-self.rho / (self.rho + 1))

    def __call__(self, u: float) -> int:
        v = u * self.scale
        # absorb float noise so exact products are not pushed up by one
        return math.ceil(v - 1e-9 * max(1.0, abs(v)))


class Rect(NamedTuple):
    x: int
    y: int
    width: int
    height: int

    @property
    def x1(self) -> int:
        return self.x + self.width

    @property
    def y1(self) -> int:
        return self.y + self.height

    def shifted(self, dx: int, dy: int) -> "Rect":
        return Rect(self.x + dx, self.y + dy, self.width, self.height)

    def reflected(self) -> "Rect":
        return Rect(self.x, -(self.y + self.height - 1), self.width, self.height)

    def contains(self, x: int, y: int) -> bool:
        return self.x <= x < self.x1 and self.y <= y < self.y1


class Box(NamedTuple):
    layer: int
    k: int
    rect: Rect
    activation: Rect


@dataclass(frozen=True)
class BlockingScaffold:
    center: tuple[int, int]
    transposed: bool
    layers: tuple[tuple[Box, ...], ...]
    cfg: ContinuumConfig
    rule: RescaleRule
    r: Fraction
    sigma: float
    ell_max: int

    @property
    def boxes(self) -> list[Box]:
        return [b for layer in self.layers for b in layer]

    def layer_rows(self, ell: int) -> tuple[int, int]:
        """``[y0, y1)`` of the smallest strip holding layer ``ell``."""
        rows = [(b.rect.y, b.rect.y1) for b in self.layers[ell]]
        return min(r[0] for r in rows), max(r[1] for r in rows)

    def total_height(self) -> int:
        return sum(b.rect.height for b in self.boxes)

    def bounds(self) -> Rect:
        rects = [b.rect for b in self.boxes] + [b.activation for b in self.boxes]
        x0 = min(r.x for r in rects)
        y0 = min(r.y for r in rects)
        return Rect(x0, y0, max(r.x1 for r in rects) - x0, max(r.y1 for r in rects) - y0)

    def shifted(self, dx: int, dy: int) -> "BlockingScaffold":
        layers = tuple(
            tuple(Box(b.layer, b.k, b.rect.shifted(dx, dy), b.activation.shifted(dx, dy)) for b in layer)
            for layer in self.layers
        )
        return replace(self, center=(self.center[0] + dx, self.center[1] + dy), layers=layers)

    def cone_apex(self) -> tuple[int, int]:
        """Apex of the red cone this scaffold protects against (rescaled g_1/alpha away)."""
        g1 = self.cfg.lam * self.cfg.alpha / 2
        off = self.rule(g1 / self.cfg.alpha)
        return (self.center[0], self.center[1] + off) if self.transposed else (self.center[0], self.center[1] - off)


def default_ell_max(p: float, lam: float) -> int:
    return max(0, math.ceil(math.log(1 / p) / math.log(lam) - 1e-12))


def build_scaffold(center: tuple[int, int], p: float, alpha: float, alpha_bar: float, m: int,
                   ell_max: int | None = None, transposed: bool = False,
                   r: Fraction | float = 1, rho: int = 1) -> BlockingScaffold:
    """Blocking configuration centered at the lattice point ``center``.

    Layer 0 starts one row above the center.  The transposed version is the
    mirror image in the horizontal line through the center.
    """
    r = Fraction(r).limit_denominator(10**6)
    if not alpha < alpha_bar <= r:
        raise ValueError(f"need alpha < alpha_bar <= r, got {alpha}, {alpha_bar}, {r}")
    cfg = ContinuumConfig(alpha, alpha_bar, m)
    rule = RescaleRule(p, rho)
    lam = cfg.lam
    if ell_max is None:
        ell_max = default_ell_max(p, lam)
    if ell_max < 0:
        raise ValueError("ell_max must be >= 0")
    ts = triples(cfg, ell_max)
    ss = shifts(cfg, ell_max)
    layers = []
    base = 1
    for ell in range(ell_max + 1):
        t, s = ts[ell], ss[ell]
        height = rule(lam ** (-ell / 2))
        width = rule(t.g)
        act_w = rule(0.5 * (alpha_bar - alpha)) if ell == 0 else rule((alpha_bar - alpha) * ts[ell - 1].h)
        layer = []
        for k in range(1, m + 1):
            x0 = rule((k - 1) * t.g - k * t.h + s)
            y0 = base + (k - 1) * height
            rect = Rect(x0, y0, width, height)
            act = Rect(x0 + width, y0, act_w, height)
            if transposed:
                rect, act = rect.reflected(), act.reflected()
            layer.append(Box(ell, k, rect.shifted(*center), act.shifted(*center)))
        layers.append(tuple(layer))
        base += m * height
    return BlockingScaffold(tuple(center), transposed, tuple(layers), cfg, rule, r, cfg.sigma, ell_max)


# ---------------------------------------------------------------- blue fields


class BlueField(Protocol):
    def rows_any(self, x0: int, x1: int, y0: int, y1: int) -> np.ndarray:
        """For each row y in [y0, y1): is there a blue site with x in [x0, x1)?"""

    def block(self, x0: int, x1: int, y0: int, y1: int) -> np.ndarray:
        """Boolean mask ``[y - y0, x - x0]`` of blue sites in the rectangle."""


class PointField:
    """An explicit finite set of blue sites."""

    def __init__(self, points: Iterable[tuple[int, int]]):
        rows: dict[int, list[int]] = {}
        for x, y in points:
            rows.setdefault(int(y), []).append(int(x))
        self.rows = {y: np.unique(xs) for y, xs in rows.items()}

    @property
    def points(self) -> set[tuple[int, int]]:
        return {(int(x), y) for y, xs in self.rows.items() for x in xs}

    def rows_any(self, x0, x1, y0, y1):
        out = np.zeros(y1 - y0, dtype=bool)
        for y in range(y0, y1):
            xs = self.rows.get(y)
            if xs is not None:
                i = np.searchsorted(xs, x0)
                out[y - y0] = i < len(xs) and xs[i] < x1
        return out

    def block(self, x0, x1, y0, y1):
        out = np.zeros((y1 - y0, x1 - x0), dtype=bool)
        for y, xs in self.rows.items():
            if y0 <= y < y1:
                sel = xs[(xs >= x0) & (xs < x1)]
                out[y - y0, sel - x0] = True
        return out

    def without(self, rects: Sequence[Rect]) -> "PointField":
        return PointField(pt for pt in self.points if not any(r.contains(*pt) for r in rects))

    def __or__(self, other: "PointField") -> "PointField":
        return PointField(self.points | other.points)


@dataclass(frozen=True)
class BernoulliField:
    """I.i.d. blue sites of the given density on all of Z^2, keyed by the PRF."""

    density: float
    seed: int
    stream: int = prf.STREAM_FIELD

    def rows_any(self, x0, x1, y0, y1):
        if x1 <= x0:
            return np.zeros(max(0, y1 - y0), dtype=bool)
        return _kernels.bernoulli_rows_any(np.uint64(self.seed), np.uint64(self.stream), self.density,
                                           x0, x1, y0, y1)

    def block(self, x0, x1, y0, y1):
        return _kernels.bernoulli_block(np.uint64(self.seed), np.uint64(self.stream), self.density,
                                        x0, x1, y0, y1)


def _has_run(rows: np.ndarray, rho: int) -> bool:
    if rho == 1:
        return bool(rows.any())
    run = 0
    for v in rows:
        run = run + 1 if v else 0
        if run >= rho:
            return True
    return False


class Success(NamedTuple):
    ok: bool
    failing: tuple[int, int] | None


def region_success(blue: BlueField, act: Rect, rho: int = 1) -> bool:
    return _has_run(blue.rows_any(act.x, act.x1, act.y, act.y1), rho)


def is_successful(scaffold: BlockingScaffold, blue: BlueField, rho: int = 1) -> Success:
    """Every activation region holds rho neighboring rows with a blue site each.

    Boxes are examined layer by layer, ``k = 1..m`` within a layer; the first
    failure is reported as ``(layer, k)``.
    """
    for b in scaffold.boxes:
        if not region_success(blue, b.activation, rho):
            return Success(False, (b.layer, b.k))
    return Success(True, None)


def plant_field(scaffolds: Sequence[BlockingScaffold], rho: int = 1, rows: str = "all") -> PointField:
    """Blue sites making every given scaffold successful.

    One site per activation region, at its leftmost column (``rho`` stacked
    rows for ``rho > 1``).  ``rows="alternate"`` puts sites on every other
    row instead, which defeats success for ``rho >= 2``.
    """
    pts = []
    for sc in scaffolds:
        for b in sc.boxes:
            a = b.activation
            if rows == "alternate":
                pts += [(a.x, y) for y in range(a.y, a.y1, 2)]
            else:
                mid = a.y + max(0, (a.height - rho) // 2)
                pts += [(a.x, y) for y in range(mid, min(a.y1, mid + rho))]
    return PointField(pts)


# ---------------------------------------------------------------- gaps


@dataclass(frozen=True)
class GapStats:
    ks: np.ndarray
    indicators: np.ndarray  # I_k, bool
    gaps: np.ndarray  # Z_k, float with inf when no success ahead
    area: float
    depth: float


def unprotected_area(indicators: Sequence[bool], depth: float) -> float:
    """Area left uncovered by cones hanging from the successful indices.

    Each index contributes ``depth``; an interior run of ``l`` failures adds
    the triangle ``l**2 / 4``, a run touching the window edge the one-sided
    ``l**2 / 2``.  With no success at all the area is infinite.
    """
    ind = np.asarray(indicators, dtype=bool)
    if not ind.any():
        return math.inf
    area = depth * len(ind)
    succ = np.flatnonzero(ind)
    area += succ[0] ** 2 / 2 + (len(ind) - 1 - succ[-1]) ** 2 / 2
    for a, b in zip(succ[:-1], succ[1:]):
        area += (b - a - 1) ** 2 / 4
    return float(area)


def gap_stats(blue: BlueField, window: tuple[int, int], p: float, alpha: float, alpha_bar: float, m: int,
              r: float = 1, rho: int = 1, ell_max: int | None = None, lookahead: int = 0) -> GapStats:
    """Indicators I_k for scaffolds at rescaled (k, -sigma), gaps Z_k, and area.

    ``window = (k_lo, k_hi)`` inclusive.  Indicators are evaluated up to
    ``k_hi + lookahead`` so gaps near the right edge can resolve; gaps with
    no success in range are ``inf``.
    """
    k_lo, k_hi = window
    base = build_scaffold((0, 0), p, alpha, alpha_bar, m, ell_max, r=r, rho=rho)
    rule = base.rule
    cy = rule(-base.sigma)
    ks = np.arange(k_lo, k_hi + lookahead + 1)
    ind = np.array([is_successful(base.shifted(rule(k), cy), blue, rho).ok for k in ks])
    gaps = np.full(len(ks), math.inf)
    nxt = math.inf
    for i in range(len(ks) - 1, -1, -1):
        if ind[i]:
            nxt = ks[i]
        gaps[i] = nxt - ks[i]
    n = k_hi - k_lo + 1
    g1 = base.cfg.lam * alpha / 2
    depth = base.sigma + g1 / alpha
    return GapStats(ks[:n], ind[:n], gaps[:n], unprotected_area(ind[:n], depth), depth)


def first_gap(blue: BlueField, p: float, alpha: float, alpha_bar: float, m: int, r: float = 1,
              rho: int = 1, k0: int = 0, limit: int = 10_000) -> int:
    """Z_{k0}: scan k = k0, k0+1, ... until a successful scaffold; -1 past ``limit``."""
    base = build_scaffold((0, 0), p, alpha, alpha_bar, m, r=r, rho=rho)
    cy = base.rule(-base.sigma)
    for z in range(limit):
        if is_successful(base.shifted(base.rule(k0 + z), cy), blue, rho).ok:
            return z
    return -1


# ---------------------------------------------------------------- certificates


class UnsuccessfulScaffold(ValueError):
    def __init__(self, index: int, failing: tuple[int, int]):
        super().__init__(f"scaffold {index} is not successful: first failing box (layer, k) = {failing}")
        self.index = index
        self.failing = failing


class Cone(NamedTuple):
    x: int
    y: int
    up: bool = False

    def mask(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        if self.up:
            return ys - self.y >= np.abs(xs - self.x)
        return ys - self.y <= -np.abs(xs - self.x)


class Violation(NamedTuple):
    scaffold: int
    layer: int
    k: int | None
    tick: int
    what: str


@dataclass
class CertificateReport:
    mode: str
    passed: bool
    horizon_ticks: int
    tick_scale: int
    violations: list[Violation]
    exercised: int  # boxes/layers whose strip red entered within the horizon
    checked: int
    min_margin: int | None  # smallest slack in ticks over exercised checks
    axis_reachable: bool
    origin: tuple[int, int]  # lattice coordinate of array cell [0, 0]
    result: SimResult = field(repr=False)

    @property
    def first_violation(self) -> Violation | None:
        return self.violations[0] if self.violations else None

    def summary(self) -> str:
        lines = [
            f"mode={self.mode} passed={self.passed} horizon_ticks={self.horizon_ticks}",
            f"checks={self.checked} exercised={self.exercised} min_margin_ticks={self.min_margin}",
            f"axis_reachable={self.axis_reachable}",
        ]
        for v in self.violations[:10]:
            lines.append(f"violation scaffold={v.scaffold} layer={v.layer} k={v.k} tick={v.tick}: {v.what}")
        return "\n".join(lines)


def _static_segments(sc: BlockingScaffold, blue: BlueField, rho: int) -> list[tuple[int, int, int]]:
    """(row, x_from, x_to) blue segments crossing every box, ending at the nearest activation site."""
    segs = []
    for b in sc.boxes:
        a = b.activation
        blk = blue.block(a.x, a.x1, a.y, a.y1)
        has = blk.any(axis=1)
        rows = None
        for i in range(len(has) - rho + 1):
            if has[i : i + rho].all():
                rows = range(i, i + rho)
                break
        if rows is None:
            continue
        for i in rows:
            xi = int(np.flatnonzero(blk[i])[0])
            segs.append((a.y + i, b.rect.x, a.x + xi))
    return segs


def _cone_distance(cones: Sequence[Cone], xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """L1 distance from each site to the union of the cones."""
    out = None
    for c in cones:
        d = (c.y - ys if c.up else ys - c.y) + np.abs(xs - c.x)
        d = np.maximum(d, 0)
        out = d if out is None else np.minimum(out, d)
    return out


def _rect_distance(rects: Sequence[Rect], xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    out = None
    for r in rects:
        dx = np.maximum(0, np.maximum(r.x - xs, xs - (r.x1 - 1)))
        dy = np.maximum(0, np.maximum(r.y - ys, ys - (r.y1 - 1)))
        out = dx + dy if out is None else np.minimum(out, dx + dy)
    return out


def _relevant_box(rois: Sequence[Rect], cones: Sequence[Cone], reach: int) -> tuple[int, int, int, int]:
    """Bounding box ``(x0, y0, x1, y1)`` of every site a red path of length <= reach
    from the cones to a region of interest can visit, united with the regions.

    A site z matters only if d(cones, z) + d(z, rois) <= reach.  The test runs
    on a coarse grid and the result is padded by the grid step.
    """
    bx0 = min(r.x for r in rois) - reach
    by0 = min(r.y for r in rois) - reach
    bx1 = max(r.x1 for r in rois) + reach
    by1 = max(r.y1 for r in rois) + reach
    step = max(1, max(bx1 - bx0, by1 - by0) // 400)
    ys, xs = np.mgrid[by0:by1:step, bx0:bx1:step]
    ok = _cone_distance(cones, xs, ys) + _rect_distance(rois, xs, ys) <= reach + 2 * step
    x0, y0 = min(r.x for r in rois), min(r.y for r in rois)
    x1, y1 = max(r.x1 for r in rois), max(r.y1 for r in rois)
    if ok.any():
        x0 = min(x0, int(xs[ok].min()) - step)
        y0 = min(y0, int(ys[ok].min()) - step)
        x1 = max(x1, int(xs[ok].max()) + step + 1)
        y1 = max(y1, int(ys[ok].max()) + step + 1)
    return max(x0, bx0), max(y0, by0), min(x1, bx1), min(y1, by1)


def protection_certificate(scaffolds: Sequence[BlockingScaffold], cones: Sequence[Cone], blue: BlueField,
                           p: float, C: float, mode: str = "dynamic", rho: int = 1,
                           suppress: Sequence[tuple[int, ...]] = (), engine=run_to_fixation,
                           seed: int = 0, require_success: bool = True) -> CertificateReport:
    """Run the engine against solid red cones and check the blocking claims.

    Blue grows with ``B = {e1}``; red grows with the L1 ball of radius
    ``rho`` every ``r`` time units (``r`` taken from the scaffolds).

    ``dynamic``: every box must be crossed by a fully blue row before red
    first enters the box's horizontal strip.  ``static``: blue is frozen to
    one crossing segment per box and red must not enter the strip of layer
    ``l`` before rescaled ``g_l + (alpha_bar - alpha) h_{l-1}``.  In both
    modes no red may appear on ``[-C/p, C/p] x {0}`` through time ``C/p``.

    ``suppress`` lists boxes as ``(layer, k)`` (all scaffolds) or
    ``(scaffold, layer, k)`` whose activation-region blue is removed from
    the run after the success check.  The run lives on a dead-boundary box
    holding every site that a red path of length at most red's reach over
    the horizon could use on its way from a cone to a scaffold or to the
    axis segment.  Blue outside that box is dropped, which only helps red.

    ``require_success=False`` skips the precondition; the report is then a
    diagnostic, not a certificate.
    """
    if mode not in ("dynamic", "static"):
        raise ValueError("mode must be 'dynamic' or 'static'")
    if not scaffolds:
        raise ValueError("need at least one scaffold")
    for i, sc in enumerate(scaffolds if require_success else ()):
        ok, failing = is_successful(sc, blue, rho)
        if not ok:
            raise UnsuccessfulScaffold(i, failing)
    r = scaffolds[0].r
    tick_scale = r.denominator
    horizon = math.floor(Fraction(C).limit_denominator(10**6) / Fraction(p).limit_denominator(10**12) * tick_scale)
    reach = math.ceil(Fraction(horizon, tick_scale) * rho / r)

    rois = [sc.bounds() for sc in scaffolds]
    axis_half = math.floor(C / p)
    # axis points red could reach at all, ignoring blue
    ax = np.arange(-axis_half, axis_half + 1)
    hit = ax[_cone_distance(cones, ax, np.zeros_like(ax)) <= reach]
    axis_reachable = len(hit) > 0
    if axis_reachable:
        rois.append(Rect(int(hit.min()), 0, int(hit.max() - hit.min()) + 1, 1))
    x0, y0, x1, y1 = _relevant_box(rois, cones, reach)
    W, H = x1 - x0, y1 - y0

    blue_sp = Species(1, line_neighborhood(1, "x", directed=True), 1, "blue", (0, 0, 255))
    if mode == "static":
        blue_sp = replace(blue_sp, period=Fraction(horizon + 1, tick_scale))
    red_sp = Species(2, l1_ball(rho), r, "red", (255, 0, 0))
    model = ModelSpec((blue_sp, red_sp), (0.0, 0.0), W, H, Topology.DEAD, seed)

    color = np.zeros((H, W), dtype=np.int8)
    if mode == "dynamic":
        drop = []
        for s in suppress:
            idx = range(len(scaffolds)) if len(s) == 2 else [s[0]]
            for i in idx:
                for b in scaffolds[i].boxes:
                    if (b.layer, b.k) == tuple(s[-2:]):
                        drop.append(b.activation)
        field_ = blue.without(drop) if drop and isinstance(blue, PointField) else blue
        if drop and not isinstance(field_, PointField):
            mask = field_.block(x0, x1, y0, y1)
            for a in drop:
                mask[a.y - y0 : a.y1 - y0, a.x - x0 : a.x1 - x0] = False
        else:
            mask = field_.block(x0, x1, y0, y1)
        color[mask] = 1
    else:
        for sc in scaffolds:
            for row, xa, xb in _static_segments(sc, blue, rho):
                color[row - y0, max(xa, x0) - x0 : min(xb + 1, x1) - x0] = 1
    ys, xs = np.mgrid[y0:y1, x0:x1]
    red = np.zeros((H, W), dtype=bool)
    for c in cones:
        red |= c.mask(xs, ys)
    color[red] = 2
    res = engine(Lattice.from_colors(model, color), horizon)
    col, when = res.lattice.color, res.lattice.colored_at
    is_red = col == 2
    red_when = np.where(is_red, when, np.iinfo(np.int64).max)
    row_entry = red_when.min(axis=1)  # first red tick per row

    def strip_entry(ya: int, yb: int) -> int:
        return int(row_entry[ya - y0 : yb - y0].min())

    violations: list[Violation] = []
    exercised = checked = 0
    margins = []
    never = np.iinfo(np.int64).max
    for i, sc in enumerate(scaffolds):
        if mode == "dynamic":
            for b in sc.boxes:
                rr = b.rect
                checked += 1
                entry = strip_entry(rr.y, rr.y1)
                if entry == never:
                    continue
                exercised += 1
                cells_c = col[rr.y - y0 : rr.y1 - y0, rr.x - x0 : rr.x1 - x0]
                cells_t = when[rr.y - y0 : rr.y1 - y0, rr.x - x0 : rr.x1 - x0]
                full = (cells_c == 1).all(axis=1)
                crossing = int(cells_t[full].max(axis=1).min()) if full.any() else never
                if crossing >= entry:
                    violations.append(Violation(i, b.layer, b.k, entry, "red entered the strip before a blue crossing"))
                else:
                    margins.append(entry - crossing)
        else:
            ts = triples(sc.cfg, sc.ell_max)
            a, ab = sc.cfg.alpha, sc.cfg.alpha_bar
            for ell in range(sc.ell_max + 1):
                checked += 1
                extra = 0.5 * (ab - a) if ell == 0 else (ab - a) * ts[ell - 1].h
                need = sc.rule(ts[ell].g + extra) * tick_scale
                ya, yb = sc.layer_rows(ell)
                entry = strip_entry(ya, yb)
                if entry == never:
                    continue
                exercised += 1
                if entry < need:
                    violations.append(Violation(i, ell, None, entry, f"red reached the layer before tick {need}"))
                else:
                    margins.append(entry - need)
    if axis_reachable:
        lo, hi = max(-axis_half, x0) - x0, min(axis_half + 1, x1) - x0
        if is_red[0 - y0, lo:hi].any():
            t_axis = int(red_when[0 - y0, lo:hi].min())
            violations.append(Violation(-1, -1, None, t_axis, "red on the protected axis segment"))
    violations.sort(key=lambda v: (v.tick, v.layer))
    return CertificateReport(mode, not violations, horizon, tick_scale, violations, exercised, checked,
                             min(margins) if margins else None, axis_reachable, (x0, y0), res)
