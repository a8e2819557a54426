"""growthlab command line.

Exit status: 0 success or certificate pass, 1 error (including usage
errors), 2 certificate failure.  ``GROWTHLAB_THREADS`` caps worker threads.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import continuum, harness, scaffold
from .engine import run_reference, run_to_fixation
from .fileio import (ConfigError, RenderSpec, append_csv, load_config, load_experiment, parse_floats,
                     parse_neighborhood, ppm_bytes, render, sim_record, write_image)
from .lattice import EMPTY, sample_initial

EXIT_OK, EXIT_ERROR, EXIT_CERT = 0, 1, 2

SIMULATE_DEFAULTS = dict(scale=1)
SCAN_DEFAULTS = dict(kind="1d", gamma=1.5, replicates=100, L_per_p=4.0, L_min=200, seed=0, r="1", rho=1, tau=1,
                     directed=True, topology="torus")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


class UsageError(Exception):
    pass


def _fraction(text: str) -> Fraction:
    return Fraction(text)


# ---------------------------------------------------------------- simulate


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, seed=args.seed)
    model = cfg.model
    engine = run_reference if args.engine == "reference" else run_to_fixation
    res = engine(sample_initial(model), args.horizon)
    scale = args.scale or int(cfg.render.get("scale", SIMULATE_DEFAULTS["scale"]))
    png = args.png or cfg.render.get("png", "false").lower() in ("1", "true", "yes")
    if args.out:
        write_image(args.out, res.lattice, scale, png)
    if args.csv:
        append_csv(args.csv, sim_record(res))
    print(f"fixation_time {res.fixation_time} ({res.fixation_tick} ticks){' CAPPED' if res.capped else ''}")
    fr = res.fractions()
    print(f"empty {fr[EMPTY]:.6f}")
    for sp in model.species:
        print(f"{sp.label} {fr[sp.id]:.6f}")
    return EXIT_OK


# ---------------------------------------------------------------- phase scan


def _scan_params(args) -> harness.ExperimentParams:
    exp = dict(SCAN_DEFAULTS)
    if args.config:
        exp.update(load_experiment(args.config))

    def pick(name, conv):
        v = getattr(args, name, None)
        return conv(v if v is not None else exp.get(name))

    p_grid = parse_floats(args.p_grid) if args.p_grid is not None else parse_floats(exp.get("p_grid", ""))
    a_grid = parse_floats(args.a_grid) if args.a_grid is not None else parse_floats(exp.get("a_grid", ""))
    if not p_grid:
        raise UsageError("empty p grid (set p_grid in [experiment] or pass --p-grid)")
    if not a_grid:
        raise UsageError("empty a grid (set a_grid in [experiment] or pass --a-grid)")
    L = args.L if args.L is not None else (int(exp["L"]) if exp.get("L") else None)
    directed = str(exp.get("directed")).lower() in ("1", "true", "yes")
    return harness.ExperimentParams(
        p_grid, a_grid, pick("gamma", float), pick("replicates", int), L, pick("seed", int),
        Fraction(str(exp.get("r", "1"))), int(exp.get("rho", 1)), int(exp.get("tau", 1)), exp.get("kind", "1d"),
        directed, exp.get("topology", "torus"), float(exp.get("L_per_p", 4.0)), int(exp.get("L_min", 200)),
    )


def cmd_phase_scan(args) -> int:
    if args.planted:
        p_grid = parse_floats(args.p_grid) if args.p_grid else (0.02, 0.01, 0.005, 0.0025)
        a_grid = parse_floats(args.a_grid) if args.a_grid else tuple(np.geomspace(0.01, 100, 21))
        if not p_grid:
            raise UsageError("empty p grid")
        gamma = args.gamma if args.gamma is not None else 1.5
        rows = harness.planted_scan(p_grid, a_grid, gamma_true=1.5, gamma_scan=gamma)
        fit = harness.fit_exponent(rows, gamma)
        print(f"planted gamma 1.5: gamma_hat {fit.gamma_hat:.4f} +- {fit.stderr:.4f}")
        return EXIT_OK
    params = _scan_params(args)

    def show(row):
        print(f"p={row.p:g} a={row.a:g} q={row.q:.3e} P_blue={row.P_blue:.3f} "
              f"[{row.P_blue_lo:.3f},{row.P_blue_hi:.3f}] P_red={row.P_red:.3f} P_empty={row.P_empty:.3f}",
              flush=True)

    res = harness.phase_scan(params, args.out, args.threads, progress=show)
    for f in res.flags:
        print(f"non-monotone: {f}")
    try:
        fit = harness.fit_exponent(res.rows, params.gamma)
    except harness.FitError as e:
        print(f"no exponent fit: {e}")
        return EXIT_OK
    print(f"gamma_hat {fit.gamma_hat:.4f} +- {fit.stderr:.4f} from {len(fit.points)} p values")
    return EXIT_OK


# ---------------------------------------------------------------- blocking


def _defaults_alpha(r: Fraction, alpha, alpha_bar) -> tuple[float, float]:
    if alpha is None:
        alpha = 0.9 * min(1.0, float(r))
    if alpha_bar is None:
        alpha_bar = (alpha + float(r)) / 2
    return alpha, alpha_bar


def _read_points(path: str) -> list[tuple[int, int]]:
    pts = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            x, y = line.replace(",", " ").split()[:2]
            pts.append((int(x), int(y)))
    return pts


def _scaffold_image(rep: scaffold.CertificateReport, scaffolds, scale: int) -> np.ndarray:
    lat = rep.result.lattice
    img = render(lat.color, RenderSpec.for_model(lat.model, 1))
    ox, oy = rep.origin
    H, W = lat.color.shape

    def outline(r: scaffold.Rect, rgb):
        xa, xb = max(r.x - ox, 0), min(r.x1 - ox, W)
        ya, yb = max(r.y - oy, 0), min(r.y1 - oy, H)
        if xa >= xb or ya >= yb:
            return
        img[ya, xa:xb] = img[yb - 1, xa:xb] = rgb
        img[ya:yb, xa] = img[ya:yb, xb - 1] = rgb

    for sc in scaffolds:
        for b in sc.boxes:
            outline(b.rect, (0, 0, 0))
            outline(b.activation, (128, 128, 128))
    if scale > 1:
        img = img.repeat(scale, axis=0).repeat(scale, axis=1)
    return img


def cmd_blocking_verify(args) -> int:
    r = args.r
    alpha, alpha_bar = _defaults_alpha(r, args.alpha, args.alpha_bar)
    base = scaffold.build_scaffold((0, 0), args.p, alpha, alpha_bar, args.m, args.ell_max, r=r, rho=args.rho)
    rule = base.rule
    K = args.cones
    xs = [rule(k * args.spacing) for k in range(-(K // 2), K - K // 2)]
    scs = [base.shifted(x, rule(-base.sigma)) for x in xs]
    cones = [scaffold.Cone(*sc.cone_apex()) for sc in scs]
    print(f"lambda {base.cfg.lam:.6f} sigma {base.sigma:.4f} ell_max {base.ell_max} "
          f"scale {rule.scale:.4f} height {base.total_height()} <= {rule(base.sigma)}")
    if args.blue_file:
        blue = scaffold.PointField(_read_points(args.blue_file))
    elif args.field == "bernoulli":
        blue = scaffold.BernoulliField(min(1.0, args.B * args.p), args.seed)
    else:
        blue = scaffold.plant_field(scs, args.rho)
    if args.sabotage:
        if not isinstance(blue, scaffold.PointField):
            raise UsageError("--sabotage needs a point field")
        blue = blue.without([scs[0].layers[0][0].activation])
    suppress = []
    for s in args.suppress or []:
        suppress.append(tuple(int(v) for v in s.split(",")))
    engine = run_reference if args.engine == "reference" else run_to_fixation
    mode = "static" if args.static else "dynamic"
    try:
        rep = scaffold.protection_certificate(scs, cones, blue, args.p, args.C, mode, args.rho, suppress, engine,
                                              args.seed)
    except scaffold.UnsuccessfulScaffold as e:
        layer, k = e.failing
        print(f"FAIL scaffold {e.index} unsuccessful: layer {layer} k {k} tick NA")
        return EXIT_CERT
    print(rep.summary())
    if args.out:
        img = _scaffold_image(rep, scs, args.scale)
        if args.png:
            from PIL import Image

            Image.fromarray(img, "RGB").save(args.out, format="PNG")
        else:
            Path(args.out).write_bytes(ppm_bytes(img))
    if rep.passed:
        print("PASS")
        return EXIT_OK
    v = rep.first_violation
    print(f"FAIL layer {v.layer} k {v.k} tick {v.tick}: {v.what}")
    return EXIT_CERT


# ---------------------------------------------------------------- continuum


def cmd_continuum(args) -> int:
    cfg = continuum.ContinuumConfig(args.alpha, args.alpha_bar, args.m)
    print(f"lambda {cfg.lam:.12g}")
    print(f"sigma {cfg.sigma:.12g}")
    print(f"{'l':>4} {'f':>14} {'g':>14} {'h':>14} {'S':>14}")
    for row in continuum.layer_table(cfg, args.ell_max):
        print(f"{row['l']:>4} {row['f']:>14.8g} {row['g']:>14.8g} {row['h']:>14.8g} {row['S']:>14.8g}")
    return EXIT_OK


# ---------------------------------------------------------------- red wins


def cmd_red_cert(args) -> int:
    if (args.q is None) == (args.a is None):
        raise UsageError("give exactly one of --q and --a")
    q = args.q if args.q is not None else args.a * args.p ** 1.5
    n_g = n_h = n_gh = n_ok = 0
    bad = []
    i = 0
    while i < args.samples and (args.target is None or n_gh < args.target):
        res = harness.red_wins_certificate(args.p, q, args.epsilon, args.r, args.tau, args.rho,
                                           seed=args.seed + i)
        n_g += res.G
        n_h += res.H
        if res.G and res.H:
            n_gh += 1
            n_ok += bool(res.verified)
            if not res.verified:
                bad.append((args.seed + i, res.origin_color))
        i += 1
    print(f"samples {i} q {q:.4e} G {n_g} H {n_h} G&H {n_gh} verified_red {n_ok}")
    for seed, c in bad[:10]:
        print(f"FAIL seed {seed}: origin color {c}")
    return EXIT_CERT if bad else EXIT_OK


# ---------------------------------------------------------------- three colors


def cmd_three_color(args) -> int:
    B, R, G = (parse_neighborhood(t) for t in (args.B, args.R, args.G))
    model = harness.three_color_model(args.pb, args.pr, args.pg, args.L, B, R, G, args.seed)
    est = harness.estimate_origin_fate(model, args.replicates, args.threads)
    names = {EMPTY: "empty", 1: "blue", 2: "red", 3: "green"}
    for sid, name in names.items():
        lo, hi = est.ci(sid)
        flo, fhi = est.frac_ci(sid)
        print(f"{name:5} P={est.prob(sid):.3f} [{lo:.3f},{hi:.3f}] frac={est.frac_mean[sid]:.4f} [{flo:.4f},{fhi:.4f}]")
    print(f"mean_fixation_time {est.mean_fixation_time:.2f} horizon_hits {est.horizon_hits}")
    if args.out or args.rectangles:
        res = run_to_fixation(sample_initial(model))
        if args.out:
            write_image(args.out, res.lattice, args.scale, args.png)
        if args.rectangles:
            rep = harness.empty_rectangles(res.lattice)
            print(f"empty components {rep.components} rectangles {rep.rectangles}")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="growthlab", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="one run to fixation from a config file",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    s.add_argument("config")
    s.add_argument("--out", help="image path (binary PPM unless --png)")
    s.add_argument("--csv", help="append one summary row here")
    s.add_argument("--seed", type=lambda v: int(v, 0), help="override [model] seed")
    s.add_argument("--scale", type=int, help="pixels per site (default: [render] scale or 1)")
    s.add_argument("--png", action="store_true")
    s.add_argument("--horizon", type=int, help="horizon in ticks (default 4*(W+H)*tick_scale)")
    s.add_argument("--engine", choices=("frontier", "reference"), default="frontier")
    s.set_defaults(fn=cmd_simulate)

    s = sub.add_parser("phase-scan", help="P(blue) over q = a p^gamma and the fitted exponent",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter,
                       epilog="[experiment] keys and defaults: " + ", ".join(f"{k}={v}" for k, v in SCAN_DEFAULTS.items())
                       + "; p_grid and a_grid have no default; L defaults to max(L_min, ceil(L_per_p/p))")
    s.add_argument("config", nargs="?")
    s.add_argument("--out", help="CSV path; existing (p, a) cells are reused")
    s.add_argument("--p-grid")
    s.add_argument("--a-grid")
    s.add_argument("--gamma", type=float)
    s.add_argument("--replicates", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--L", type=int)
    s.add_argument("--threads", type=int)
    s.add_argument("--planted", action="store_true", help="self-test on a noise-free planted curve with gamma 1.5")
    s.set_defaults(fn=cmd_phase_scan)

    s = sub.add_parser("blocking-verify", help="protection certificate for blocking scaffolds",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    s.add_argument("--p", type=float, default=0.01)
    s.add_argument("--alpha", type=float, help="default 0.9*min(1, r)")
    s.add_argument("--alpha-bar", type=float, help="default midpoint of (alpha, r]")
    s.add_argument("--m", type=int, default=5)
    s.add_argument("--r", type=_fraction, default=Fraction(1))
    s.add_argument("--rho", type=int, default=1)
    s.add_argument("--C", type=float, default=27.0)
    s.add_argument("--ell-max", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--cones", type=int, default=1, help="number of scaffolds, each with its own cone")
    s.add_argument("--spacing", type=float, default=1.0, help="scaffold spacing in continuum units")
    s.add_argument("--field", choices=("planted", "bernoulli"), default="planted")
    s.add_argument("--B", type=float, default=10.0, help="Bernoulli blue density is B*p")
    s.add_argument("--blue-file", help="text file of 'x y' blue sites")
    s.add_argument("--static", action="store_true", help="freeze blue to one crossing segment per box")
    s.add_argument("--sabotage", action="store_true", help="empty the first activation region")
    s.add_argument("--suppress", action="append", metavar="L,K", help="drop blue of box (L, K) from the run")
    s.add_argument("--engine", choices=("frontier", "reference"), default="frontier")
    s.add_argument("--out", help="image of scaffold and final state")
    s.add_argument("--scale", type=int, default=1)
    s.add_argument("--png", action="store_true")
    s.set_defaults(fn=cmd_blocking_verify)

    s = sub.add_parser("continuum", help="layer table (f, g, h, S) with lambda and sigma",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    s.add_argument("--alpha", type=float, default=1.0)
    s.add_argument("--alpha-bar", type=float, default=1.25)
    s.add_argument("--m", type=int, default=3)
    s.add_argument("--ell-max", type=int, default=10)
    s.set_defaults(fn=cmd_continuum)

    s = sub.add_parser("red-cert", help="red-wins events and engine confirmation",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    s.add_argument("--p", type=float, default=0.01)
    s.add_argument("--q", type=float)
    s.add_argument("--a", type=float, help="q = a p^(3/2)")
    s.add_argument("--epsilon", type=float, default=0.5)
    s.add_argument("--r", type=_fraction, default=Fraction(1))
    s.add_argument("--tau", type=int, default=1)
    s.add_argument("--rho", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--samples", type=int, default=1000)
    s.add_argument("--target", type=int, help="stop after this many samples with G and H")
    s.set_defaults(fn=cmd_red_cert)

    s = sub.add_parser("three-color", help="origin fate with blue, red and green",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    s.add_argument("--pb", type=float, default=0.001)
    s.add_argument("--pr", type=float, default=0.001)
    s.add_argument("--pg", type=float, default=0.002)
    s.add_argument("--B", default="line(1, x)")
    s.add_argument("--R", default="line(1, y)")
    s.add_argument("--G", default="l1_ball(1)")
    s.add_argument("--L", type=int, default=800)
    s.add_argument("--replicates", type=int, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--threads", type=int)
    s.add_argument("--out", help="image of the run with the base seed")
    s.add_argument("--scale", type=int, default=1)
    s.add_argument("--png", action="store_true")
    s.add_argument("--rectangles", action="store_true", help="check empty components of that run")
    s.set_defaults(fn=cmd_three_color)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.fn(args)
    except UsageError as e:
        ap.print_usage(sys.stderr)
        print(f"growthlab: error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except (ConfigError, OSError, ValueError, OverflowError) as e:
        print(f"growthlab: error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
