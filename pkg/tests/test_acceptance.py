"""Acceptance criteria, one test each; verdicts are echoed in the session summary."""

import itertools
import time
from fractions import Fraction

import numpy as np
import pytest

from growthlab.continuum import (ContinuumConfig, Segment, breakthrough, canonical_obstacles, lambda_of, triples)
from growthlab.engine import Schedule, run_reference, run_to_fixation, step
from growthlab.harness import (BLUE, RED, ExperimentParams, estimate_origin_fate, fit_exponent, one_dim_model,
                               phase_scan, planted_scan, rectangle_trials, red_wins_certificate, two_dim_model)
from growthlab.lattice import EMPTY, Lattice, ModelSpec, Species, Topology, l1_ball, line_neighborhood, sample_initial
from growthlab.scaffold import Cone, build_scaffold, is_successful, plant_field, protection_certificate

pytestmark = pytest.mark.slow


def test_1_oracle_equivalence(record):
    combos = list(itertools.product((1, 2), (1, 2), ("1/2", "2/3", "1", "3/2"), (0.02, 0.1), (0.02, 0.1)))
    rng = np.random.default_rng(1)
    bad = 0
    for i in range(200):
        rho, tau, r, p, q = combos[i % len(combos)]
        B = line_neighborhood(tau, "x", directed=bool(rng.integers(2)))
        R = l1_ball(rho) if i % 2 else line_neighborhood(rho, "y")
        topo = Topology.TORUS if rng.integers(4) else Topology.DEAD
        m = ModelSpec((Species(1, B), Species(2, R, r)), (p, q), 32, 32, topo, int(rng.integers(2**63)))
        lat = sample_initial(m)
        bad += not run_to_fixation(lat).same_as(run_reference(lat))
    record(1, bad == 0, f"oracle equivalence: {200 - bad}/200 identical")
    assert bad == 0


def test_2_no_empty_with_e1(record):
    # q >= p: with blue much denser a whole torus row can close before red
    # arrives, a wrap-around wall impossible on Z^2 (see test_engine)
    pairs = [(p, q) for p in (0.005, 0.02, 0.1) for q in (0.005, 0.02, 0.1) if q >= p]
    rng = np.random.default_rng(2)
    leftover = 0
    for i in range(1000):
        p, q = pairs[int(rng.integers(len(pairs)))]
        m = two_dim_model(p, q, 64, rho=int(rng.integers(1, 3)), seed=i)
        res = run_to_fixation(sample_initial(m))
        leftover += res.empty > 0 or res.capped
    record(2, leftover == 0, f"e1 in B: {1000 - leftover}/1000 runs with no empty site")
    assert leftover == 0


def test_3_continuum(record):
    worst = 0.0
    for m, alpha in itertools.product(range(3, 12), np.linspace(0.25, 2.0, 8)):
        if m * alpha <= 2:
            continue
        cfg = ContinuumConfig(float(alpha), float(alpha) + 0.1, m)
        ts = triples(cfg, 40)
        t0 = np.array(ts[0])
        for ell, t in enumerate(ts):
            worst = max(worst, float(np.max(np.abs(np.array(t) / (cfg.lam**ell * t0) - 1))))
    exact = lambda_of(3, 1.0) == Fraction(5, 4)
    err_b = 0.0
    cfg = ContinuumConfig(1.0, 1.25, 3)
    for t in triples(cfg, 10):
        tb, _ = breakthrough(canonical_obstacles(t, 3), Segment(0, 0.0, t.f), 1.0)
        err_b = max(err_b, abs(tb - t.h) / t.h)
    ok = worst < 1e-9 and exact and err_b < 1e-9
    record(3, ok, f"continuum: recurrence rel err {worst:.1e}, lambda(3,1)=5/4 {exact}, breakthrough err {err_b:.1e}")
    assert ok


def test_4_blocking_certificate(record):
    base = build_scaffold((0, 0), 1e-2, 0.5, 0.75, 5)
    sc = base.shifted(0, base.rule(-base.sigma))
    blue = plant_field([sc])
    cone = [Cone(*sc.cone_apex())]
    t0 = time.perf_counter()
    dyn = protection_certificate([sc], cone, blue, 1e-2, 27)
    sta = protection_certificate([sc], cone, blue, 1e-2, 27, mode="static")
    removed = [is_successful(sc, blue.without([b.activation])).ok for b in sc.boxes]
    ok = dyn.passed and sta.passed and dyn.axis_reachable and not any(removed)
    record(4, ok, f"blocking certificate C=27: dynamic {dyn.passed} ({dyn.exercised}/{dyn.checked} boxes reached), "
                  f"static {sta.passed}, {len(removed) - sum(removed)}/{len(removed)} removals unsuccessful, "
                  f"{time.perf_counter() - t0:.0f}s")
    assert ok


def test_5_phase_ordering(record):
    left = estimate_origin_fate(one_dim_model(0.001, 0.001, 800, seed=11), 20)
    right = estimate_origin_fate(one_dim_model(0.001, 0.02, 800, seed=11), 20)
    e_ok = left.frac_ci(EMPTY)[0] > right.frac_ci(EMPTY)[1]
    r_ok = right.frac_ci(RED)[0] > left.frac_ci(RED)[1]
    record(5, e_ok and r_ok, f"phase ordering p=0.001: empty {left.frac_mean[EMPTY]:.3f} vs "
                             f"{right.frac_mean[EMPTY]:.3f}, red {left.frac_mean[RED]:.3f} vs {right.frac_mean[RED]:.3f}")
    assert e_ok and r_ok


def test_6_planted_exponent(record):
    rows = planted_scan([0.02, 0.01, 0.005, 0.0025], np.geomspace(0.01, 100, 21))
    fit = fit_exponent(rows, 1.5)
    ok = abs(fit.gamma_hat - 1.5) <= 0.01
    record(6, ok, f"planted exponent: gamma_hat {fit.gamma_hat:.4f}")
    assert ok


def test_7_real_exponent(record, tmp_path):
    params = ExperimentParams((0.02, 0.01, 0.005, 0.0025), tuple(np.geomspace(0.2, 12, 7)), 1.5, 400, seed=7)
    t0 = time.perf_counter()
    scan = phase_scan(params, tmp_path / "scan.csv")
    fit = fit_exponent(scan.rows, 1.5)
    ok = 1.2 <= fit.gamma_hat <= 1.8
    record(7, ok, f"exponent 1D vs 1D: gamma_hat {fit.gamma_hat:.3f} +- {fit.stderr:.3f} "
                  f"({len(fit.points)} p values, {time.perf_counter() - t0:.0f}s)")
    assert ok


def test_8_red_wins(record):
    p, hits, good, seed = 0.01, 0, 0, 0
    while hits < 500 and seed < 50_000:
        res = red_wins_certificate(p, 25 * p**1.5, 0.5, seed=seed)
        seed += 1
        if res.G and res.H:
            hits += 1
            good += bool(res.verified)
    ok = hits == 500 and good == 500
    record(8, ok, f"red wins on G and H: {good}/{hits} verified red ({seed} samples)")
    assert ok


def test_9_rectangles(record):
    reps = rectangle_trials(0.01, 1e-5, 500, 100, seed=9)
    n_ok = sum(r.all_rectangular for r in reps)
    comps = sum(r.components for r in reps)
    record(9, n_ok == 100, f"empty components rectangular in {n_ok}/100 runs ({comps} components)")
    assert n_ok == 100


def test_10_tie_fairness(record):
    # 10^4 isolated tie sites on one lattice: each target has blue on its right, red above
    n = 100
    E1 = line_neighborhood(1, "x", directed=True)
    m = ModelSpec((Species(1, E1), Species(2, l1_ball(1))), (0.0, 0.0), 3 * n, 3 * n, Topology.DEAD, 10)
    pts = {1: [], 2: []}
    for i in range(n):
        for j in range(n):
            pts[1].append((3 * i + 1, 3 * j))
            pts[2].append((3 * i, 3 * j + 1))
    new, _ = step(Lattice.from_points(m, pts), Schedule.from_model(m), 1)
    targets = new.color[0::3, 0::3]
    assert (targets != EMPTY).all()
    frac = float((targets == BLUE).mean())
    ok = abs(frac - 0.5) <= 0.015
    record(10, ok, f"tie fairness: blue wins {frac:.4f} of 10^4 ties")
    assert ok
