"""Monte Carlo experiments: origin fates, phase scans, exponent fits and certificates."""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import stats
from scipy.optimize import isotonic_regression
from scipy.sparse.csgraph import connected_components
from scipy.sparse import coo_matrix

from . import prf
from .engine import SimResult, run_to_fixation, window_dependence_radius
from .lattice import (EMPTY, Lattice, ModelSpec, Neighborhood, Species, Topology, l1_ball,
                      line_neighborhood, sample_initial, two_stage_sample)

log = logging.getLogger(__name__)

BLUE, RED, GREEN = 1, 2, 3

CSV_FIELDS = [
    "run_id", "p", "q", "a", "gamma", "rho", "tau", "r", "L", "topology", "replicates",
    "P_blue", "P_blue_lo", "P_blue_hi", "P_red", "P_empty",
    "mean_frac_blue", "mean_frac_red", "mean_frac_empty", "mean_fixation_time", "horizon_hits",
]


def thread_count(requested: int | None = None) -> int:
    """Worker threads: ``requested``, else ``GROWTHLAB_THREADS``, else the CPU count."""
    if requested is None:
        env = os.environ.get("GROWTHLAB_THREADS")
        requested = int(env) if env else (os.cpu_count() or 1)
    return max(1, requested)


# ---------------------------------------------------------------- models


def blue(neighborhood: Neighborhood, period=1) -> Species:
    return Species(BLUE, neighborhood, period, "blue", (0, 0, 255))


def red(neighborhood: Neighborhood, period=1) -> Species:
    return Species(RED, neighborhood, period, "red", (255, 0, 0))


def green(neighborhood: Neighborhood, period=1) -> Species:
    return Species(GREEN, neighborhood, period, "green", (0, 160, 0))


def one_dim_model(p: float, q: float, L: int, tau: int = 1, rho: int = 1, r=1, seed: int = 0,
                  topology: Topology | str = Topology.TORUS) -> ModelSpec:
    """Blue grows horizontally with range tau, red vertically with range rho every r."""
    sp = (blue(line_neighborhood(tau, "x")), red(line_neighborhood(rho, "y"), r))
    return ModelSpec(sp, (p, q), L, L, topology, seed)


def two_dim_model(p: float, q: float, L: int, rho: int = 1, tau: int = 1, directed: bool = True, r=1,
                  seed: int = 0, topology: Topology | str = Topology.TORUS) -> ModelSpec:
    """Blue grows horizontally (``{e1}`` when directed with tau=1), red in the L1 ball of radius rho."""
    sp = (blue(line_neighborhood(tau, "x", directed)), red(l1_ball(rho), r))
    return ModelSpec(sp, (p, q), L, L, topology, seed)


def three_color_model(p_b: float, p_r: float, p_g: float, L: int, B: Neighborhood | None = None,
                      R: Neighborhood | None = None, G: Neighborhood | None = None, seed: int = 0,
                      topology: Topology | str = Topology.TORUS) -> ModelSpec:
    B = B or line_neighborhood(1, "x")
    R = R or line_neighborhood(1, "y")
    G = G or l1_ball(1)
    return ModelSpec((blue(B), red(R), green(G)), (p_b, p_r, p_g), L, L, topology, seed)


# ---------------------------------------------------------------- fates


def wilson(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    ci = stats.binomtest(k, n).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class FateEstimate:
    """Origin fate over replicates, keyed by species id with 0 for empty."""

    replicates: int
    counts: dict[int, int]
    frac_mean: dict[int, float]
    frac_sd: dict[int, float]
    mean_fixation_time: float
    horizon_hits: int
    level: float = 0.95

    def prob(self, sid: int) -> float:
        return self.counts.get(sid, 0) / self.replicates

    def ci(self, sid: int) -> tuple[float, float]:
        return wilson(self.counts.get(sid, 0), self.replicates, self.level)

    def frac_ci(self, sid: int) -> tuple[float, float]:
        z = stats.norm.ppf(0.5 + self.level / 2)
        half = z * self.frac_sd[sid] / math.sqrt(self.replicates)
        return float(self.frac_mean[sid] - half), float(self.frac_mean[sid] + half)

    @property
    def p_blue(self) -> float:
        return self.prob(BLUE)

    @property
    def p_red(self) -> float:
        return self.prob(RED)

    @property
    def p_empty(self) -> float:
        return self.prob(EMPTY)


def _replicate(model: ModelSpec, i: int, origin: tuple[int, int], horizon: int | None):
    m = model.with_(seed=prf.derive_seed(model.seed, i))
    res = run_to_fixation(sample_initial(m), horizon)
    x, y = origin
    return int(res.lattice.color[y, x]), res.fractions(), float(res.fixation_time), res.capped


def run_replicates(model: ModelSpec, replicates: int, fn: Callable[[ModelSpec, int], object],
                   threads: int | None = None) -> list:
    """``[fn(model, i) for i in range(replicates)]``, possibly in parallel, in index order."""
    n = thread_count(threads)
    if n == 1 or replicates == 1:
        return [fn(model, i) for i in range(replicates)]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(lambda i: fn(model, i), range(replicates)))


def estimate_origin_fate(model: ModelSpec, replicates: int, threads: int | None = None,
                         horizon_ticks: int | None = None, origin: tuple[int, int] = (0, 0)) -> FateEstimate:
    """Run ``replicates`` independent copies of ``model`` to fixation and tally the origin.

    Replicate ``i`` uses seed ``derive_seed(model.seed, i)``, so results do
    not depend on execution order or thread count.  Runs that hit the
    horizon are counted in ``horizon_hits`` (and logged), not dropped.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    if min(model.width, model.height) < 8:
        raise ValueError("lattice side must be >= 8")
    out = run_replicates(model, replicates, lambda m, i: _replicate(m, i, origin, horizon_ticks), threads)
    ids = [EMPTY] + [s.id for s in model.species]
    counts = {sid: 0 for sid in ids}
    fr = {sid: [] for sid in ids}
    for c, fracs, _, _ in out:
        counts[c] += 1
        for sid in ids:
            fr[sid].append(fracs[sid])
    hits = sum(o[3] for o in out)
    if hits:
        log.warning("%d of %d replicates reached the horizon before fixation", hits, replicates)
    return FateEstimate(
        replicates,
        counts,
        {sid: float(np.mean(v)) for sid, v in fr.items()},
        {sid: float(np.std(v, ddof=1)) if len(v) > 1 else 0.0 for sid, v in fr.items()},
        float(np.mean([o[2] for o in out])),
        hits,
    )


# ---------------------------------------------------------------- scans


@dataclass(frozen=True)
class ExperimentParams:
    p_grid: tuple[float, ...]
    a_grid: tuple[float, ...]
    gamma: float
    replicates: int
    L: int | None = None  # None: max(L_min, ceil(L_per_p / p))
    seed: int = 0
    r: Fraction = Fraction(1)
    rho: int = 1
    tau: int = 1
    kind: str = "1d"  # "1d": line vs line, "2d": line vs L1 ball
    directed: bool = True  # blue direction in the "2d" kind
    topology: str = "torus"
    L_per_p: float = 4.0
    L_min: int = 200
    epsilon: float = 0.5
    C: float = 1.0

    def __post_init__(self):
        if not self.p_grid or not self.a_grid:
            raise ValueError("p and a grids must be nonempty")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.kind not in ("1d", "2d"):
            raise ValueError("kind must be '1d' or '2d'")
        object.__setattr__(self, "r", Fraction(self.r).limit_denominator(10**6))

    def side(self, p: float) -> int:
        return self.L if self.L is not None else max(self.L_min, math.ceil(self.L_per_p / p))

    def model(self, p: float, q: float) -> ModelSpec:
        L = self.side(p)
        bp, bq = (int(v) for v in np.array([p, q], dtype=np.float64).view(np.uint64))
        seed = prf.mix64(self.seed ^ prf.mix64(bp ^ prf.mix64(bq)))
        if self.kind == "1d":
            return one_dim_model(p, q, L, self.tau, self.rho, self.r, seed, self.topology)
        return two_dim_model(p, q, L, self.rho, self.tau, self.directed, self.r, seed, self.topology)


def gamma_1d(rho: int, tau: int) -> float:
    """Blue/empty boundary exponent ``1/tau + rho/(rho+1)``."""
    return 1 / tau + rho / (rho + 1)


def gamma_2d(rho: int) -> float:
    """Blue/red boundary exponent ``1 + rho/(rho+1)`` for blue {e1} against an L1 ball."""
    return 1 + rho / (rho + 1)


@dataclass(frozen=True)
class ScanRow:
    p: float
    a: float
    q: float
    P_blue: float
    P_blue_lo: float
    P_blue_hi: float
    P_red: float
    P_empty: float
    mean_frac_blue: float = math.nan
    mean_frac_red: float = math.nan
    mean_frac_empty: float = math.nan
    mean_fixation_time: float = math.nan
    horizon_hits: int = 0
    replicates: int = 0
    run_id: str = ""


@dataclass
class ScanResult:
    rows: list[ScanRow]
    flags: list[str] = field(default_factory=list)


def _key(p: float, a: float) -> tuple[str, str]:
    return repr(float(p)), repr(float(a))


def _read_rows(path: Path) -> list[ScanRow]:
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            out.append(ScanRow(
                float(rec["p"]), float(rec["a"]), float(rec["q"]),
                float(rec["P_blue"]), float(rec["P_blue_lo"]), float(rec["P_blue_hi"]),
                float(rec["P_red"]), float(rec["P_empty"]),
                float(rec["mean_frac_blue"]), float(rec["mean_frac_red"]), float(rec["mean_frac_empty"]),
                float(rec["mean_fixation_time"]), int(rec["horizon_hits"]), int(rec["replicates"]),
                rec["run_id"],
            ))
    return out


def _csv_record(row: ScanRow, params: ExperimentParams) -> dict:
    return dict(
        run_id=row.run_id, p=repr(row.p), q=repr(row.q), a=repr(row.a), gamma=params.gamma,
        rho=params.rho, tau=params.tau, r=str(params.r), L=params.side(row.p), topology=params.topology,
        replicates=row.replicates, P_blue=row.P_blue, P_blue_lo=row.P_blue_lo, P_blue_hi=row.P_blue_hi,
        P_red=row.P_red, P_empty=row.P_empty, mean_frac_blue=row.mean_frac_blue,
        mean_frac_red=row.mean_frac_red, mean_frac_empty=row.mean_frac_empty,
        mean_fixation_time=row.mean_fixation_time, horizon_hits=row.horizon_hits,
    )


def monotonicity_flags(rows: Sequence[ScanRow]) -> list[str]:
    """Pairs (a_i < a_j) at equal p where P_blue rises beyond both intervals."""
    flags = []
    for p in sorted({r.p for r in rows}):
        cur = sorted((r for r in rows if r.p == p), key=lambda r: r.a)
        for i, lo in enumerate(cur):
            for hi in cur[i + 1:]:
                if hi.P_blue_lo > lo.P_blue_hi:
                    flags.append(f"p={p}: P_blue rises from a={lo.a} ({lo.P_blue:.3f}) to a={hi.a} ({hi.P_blue:.3f})")
    return flags


def phase_scan(params: ExperimentParams, csv_path: str | os.PathLike | None = None,
               threads: int | None = None, progress: Callable[[ScanRow], None] | None = None) -> ScanResult:
    """Estimate origin fates on the grid q = a p**gamma.

    With ``csv_path`` every finished cell is appended at once, and cells
    already present in the file (matched on p and a) are read back instead
    of recomputed, so an interrupted scan can be resumed.
    """
    done: dict[tuple[str, str], ScanRow] = {}
    path = Path(csv_path) if csv_path is not None else None
    if path is not None and path.exists() and path.stat().st_size:
        done = {_key(r.p, r.a): r for r in _read_rows(path)}
    rows = []
    fh = writer = None
    if path is not None:
        new_file = not path.exists() or not path.stat().st_size
        fh = open(path, "a", newline="")
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        if new_file:
            writer.writeheader()
    try:
        for p in params.p_grid:
            for a in params.a_grid:
                if _key(p, a) in done:
                    rows.append(done[_key(p, a)])
                    continue
                q = a * p ** params.gamma
                est = estimate_origin_fate(params.model(p, q), params.replicates, threads)
                lo, hi = est.ci(BLUE)
                row = ScanRow(float(p), float(a), q, est.p_blue, lo, hi, est.p_red, est.p_empty,
                              est.frac_mean[BLUE], est.frac_mean[RED], est.frac_mean[EMPTY],
                              est.mean_fixation_time, est.horizon_hits, est.replicates,
                              f"{params.kind}-s{params.seed}-p{p:g}-a{a:g}")
                rows.append(row)
                if writer is not None:
                    writer.writerow(_csv_record(row, params))
                    fh.flush()
                if progress is not None:
                    progress(row)
    finally:
        if fh is not None:
            fh.close()
    res = ScanResult(rows, monotonicity_flags(rows))
    for f in res.flags:
        log.warning("non-monotone: %s", f)
    return res


def planted_scan(p_grid: Sequence[float], a_grid: Sequence[float], gamma_true: float = 1.5,
                 gamma_scan: float = 1.5, steepness: float = 2.0) -> list[ScanRow]:
    """Noise-free rows with P_blue = 1 / (1 + (q / p**gamma_true)**steepness)."""
    rows = []
    for p in p_grid:
        for a in a_grid:
            q = a * p ** gamma_scan
            pb = 1 / (1 + (q / p ** gamma_true) ** steepness)
            rows.append(ScanRow(p, a, q, pb, pb, pb, 1 - pb, 0.0, run_id="planted"))
    return rows


# ---------------------------------------------------------------- exponent


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class ExponentFit:
    gamma_hat: float
    stderr: float
    points: list[tuple[float, float]]  # (p, q*)
    skipped: list[float]


def crossing(a: Sequence[float], pb: Sequence[float], level: float = 0.5) -> float | None:
    """a where the nonincreasing isotonic fit of P_blue crosses ``level``.

    Linear interpolation in log a between the bracketing grid points;
    ``None`` without a bracket.
    """
    order = np.argsort(a)
    a = np.asarray(a, dtype=float)[order]
    y = isotonic_regression(np.asarray(pb, dtype=float)[order], increasing=False).x
    if y[0] < level or y[-1] > level:
        return None
    i = int(np.flatnonzero(y >= level)[-1])
    if y[i] == level or i == len(y) - 1:
        return float(a[i])
    la, lb = math.log(a[i]), math.log(a[i + 1])
    t = (y[i] - level) / (y[i] - y[i + 1])
    return math.exp(la + t * (lb - la))


def fit_exponent(rows: Sequence[ScanRow], gamma_scan: float) -> ExponentFit:
    """Slope of log q*(p) against log p, with q* = a* p**gamma_scan at the P_blue = 1/2 crossing."""
    pts, skipped = [], []
    for p in sorted({r.p for r in rows}):
        cur = [r for r in rows if r.p == p]
        a_star = crossing([r.a for r in cur], [r.P_blue for r in cur]) if len(cur) >= 2 else None
        if a_star is None:
            log.warning("p=%g: no bracketing crossing of 1/2, omitted", p)
            skipped.append(p)
            continue
        pts.append((p, a_star * p ** gamma_scan))
    if len(pts) < 3:
        raise FitError(f"need >= 3 usable p values, have {len(pts)}")
    lp = np.log([x[0] for x in pts])
    lq = np.log([x[1] for x in pts])
    fit = stats.linregress(lp, lq)
    return ExponentFit(float(fit.slope), float(fit.stderr), pts, skipped)


# ---------------------------------------------------------------- red wins


@dataclass(frozen=True)
class RedWinsResult:
    G: bool
    H: bool
    verified: bool | None  # None when G and H do not both hold
    witness: tuple[int, int] | None  # the red site certifying H
    radius: int
    horizon_ticks: int
    origin_color: int | None = None


def _rows_with_run(flags: np.ndarray, rho: int) -> bool:
    run = 0
    for v in flags:
        run = run + 1 if v else 0
        if run >= rho:
            return True
    return False


def red_wins_certificate(p: float, q: float, epsilon: float, r=1, tau: int = 1, rho: int = 1,
                         seed: int = 0, marks: tuple[set, set] | None = None) -> RedWinsResult:
    """Check the red-wins events and, when both hold, confirm with the engine.

    Blue grows horizontally with range tau, red in the L1 ball of radius rho
    every r.  With ``s = p**(rho/(rho+1))``:

    * G: no potentially blue site in ``[-eps tau r/p, eps tau r/p] x {0}``;
    * H: some red (x, y) in ``[0, eps/2p] x [0, eps/s]`` such that no rho
      neighboring rows of ``[x - 2 eps tau r/s, x + 2 eps tau r/s] x [0, eps/s]``
      each hold a potentially blue site.

    On G and H the engine runs on a dead-boundary box of radius
    ``window_dependence_radius(T)`` around the origin for ``T = eps r / p``
    and the origin must end red.  ``marks = (red, potentially_blue)`` replaces
    the random two-stage sample with explicit site sets.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    r = Fraction(r).limit_denominator(10**6)
    s = p ** (rho / (rho + 1))
    model0 = ModelSpec((blue(line_neighborhood(tau, "x")), red(l1_ball(rho), r)), (0.0, 0.0), 1, 1,
                       Topology.DEAD, seed)
    T = math.floor(Fraction(epsilon).limit_denominator(10**6) * r / Fraction(p).limit_denominator(10**12)
                   * model0.tick_scale)
    R = window_dependence_radius(model0, T)
    g_half = math.floor(epsilon * tau * r / p)
    hx = math.floor(epsilon / (2 * p))
    hy = math.floor(epsilon / s)
    w = math.floor(2 * epsilon * tau * r / s)
    R = max(R, g_half, hx + w, hy)
    if 2 * R + 1 > 1 << 15:
        raise OverflowError(f"window radius {R} too large")
    side = 2 * R + 1
    model = model0.with_(width=side, height=side)
    if marks is None:
        ts = two_stage_sample(model, p, q, BLUE, RED, origin=(-R, -R))
        redm, pblue, lat = ts.red, ts.potentially_blue, ts.lattice
    else:
        redm = np.zeros((side, side), dtype=bool)
        pblue = np.zeros((side, side), dtype=bool)
        for x, y in marks[1]:
            pblue[y + R, x + R] = True
        for x, y in marks[0]:
            redm[y + R, x + R] = True
        color = np.zeros((side, side), dtype=np.int8)
        color[pblue] = BLUE
        color[redm] = RED
        lat = Lattice.from_colors(model, color)

    G = not pblue[R, R - g_half : R + g_half + 1].any()
    cum = np.zeros((side, side + 1), dtype=np.int64)
    np.cumsum(pblue, axis=1, out=cum[:, 1:])
    witness = None
    ys, xs = np.nonzero(redm[R : R + hy + 1, R : R + hx + 1])
    for y, x in sorted(zip(ys.tolist(), xs.tolist()), key=lambda t: (t[1], t[0])):
        lo, hi = x - w + R, x + w + R + 1
        rows = cum[R : R + hy + 1, hi] - cum[R : R + hy + 1, lo] > 0
        if not _rows_with_run(rows, rho):
            witness = (x, y)
            break
    H = witness is not None
    if not (G and H):
        return RedWinsResult(G, H, None, witness, R, T)
    res = run_to_fixation(lat, T)
    c = int(res.lattice.color[R, R])
    return RedWinsResult(G, H, c == RED, witness, R, T, c)


# ---------------------------------------------------------------- three colors


def three_color_experiment(p_b: float, p_r: float, p_g: float, L: int, replicates: int,
                           B: Neighborhood | None = None, R: Neighborhood | None = None,
                           G: Neighborhood | None = None, seed: int = 0,
                           threads: int | None = None) -> FateEstimate:
    """Origin fate with blue, red (one-dimensional) and green (two-dimensional)."""
    model = three_color_model(p_b, p_r, p_g, L, B, R, G, seed)
    return estimate_origin_fate(model, replicates, threads)


@dataclass(frozen=True)
class RectangleReport:
    components: int
    rectangles: int
    bad: list[int]  # component labels that are not rectangles

    @property
    def all_rectangular(self) -> bool:
        return not self.bad


def torus_components(mask: np.ndarray) -> tuple[int, np.ndarray]:
    """4-connected components of ``mask`` on the torus; labels -1 off the mask."""
    H, W = mask.shape
    idx = np.arange(H * W).reshape(H, W)
    src, dst = [], []
    for sh in ((0, 1), (1, 0)):
        other = np.roll(idx, (-sh[0], -sh[1]), axis=(0, 1))
        both = mask & np.roll(mask, (-sh[0], -sh[1]), axis=(0, 1))
        src.append(idx[both])
        dst.append(other[both])
    src = np.concatenate(src)
    dst = np.concatenate(dst)
    g = coo_matrix((np.ones(len(src), dtype=np.int8), (src, dst)), shape=(H * W, H * W))
    _, lab = connected_components(g, directed=False)
    lab = lab.reshape(H, W)
    out = np.full((H, W), -1, dtype=np.int64)
    uniq, inv = np.unique(lab[mask], return_inverse=True)
    out[mask] = inv
    return len(uniq), out


def _cyclic_arc(present: np.ndarray) -> bool:
    """Is the set of True positions one contiguous arc of the cycle?"""
    if present.all():
        return True
    # count rising edges around the cycle
    return int((present & ~np.roll(present, 1)).sum()) == 1


def empty_rectangles(lattice: Lattice) -> RectangleReport:
    """Check every 4-connected empty component (on the torus) is a product of two arcs."""
    mask = lattice.color == EMPTY
    n, lab = torus_components(mask)
    if n == 0:
        return RectangleReport(0, 0, [])
    H, W = mask.shape
    ys, xs = np.nonzero(mask)
    l = lab[ys, xs]
    sizes = np.bincount(l, minlength=n)
    rowhit = np.zeros((n, H), dtype=bool)
    colhit = np.zeros((n, W), dtype=bool)
    rowhit[l, ys] = True
    colhit[l, xs] = True
    bad = []
    for c in range(n):
        ok = (_cyclic_arc(rowhit[c]) and _cyclic_arc(colhit[c])
              and sizes[c] == rowhit[c].sum() * colhit[c].sum())
        if not ok:
            bad.append(c)
    return RectangleReport(n, n - len(bad), bad)


def rectangle_trials(p: float, q: float, L: int, trials: int, seed: int = 0) -> list[RectangleReport]:
    """Empty-component check on three-color runs with green density 0.

    Blue ``{+-e1}`` at density p, red ``{+-e2}`` at density q, green (L1
    ball, unseeded) present only as a species.
    """
    out = []
    for i in range(trials):
        m = three_color_model(p, q, 0.0, L, seed=prf.derive_seed(seed, i))
        out.append(empty_rectangles(run_to_fixation(sample_initial(m)).lattice))
    return out
