import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from growthlab.engine import run_reference
from growthlab.scaffold import (BernoulliField, Cone, PointField, RescaleRule, build_scaffold, first_gap, gap_stats,
                                is_successful, plant_field, protection_certificate, unprotected_area,
                                UnsuccessfulScaffold)

A4 = dict(p=1e-2, alpha=0.5, alpha_bar=0.75, m=5)


def protected(center_k=0, **kw):
    kw = {**A4, **kw}
    base = build_scaffold((0, 0), **kw)
    rule = base.rule
    return base.shifted(rule(center_k), rule(-base.sigma))


def test_rescale_rule():
    rule = RescaleRule(1e-2)
    assert rule.scale == pytest.approx(10)
    assert rule(0.5) == 5 and rule(-0.125) == -1 and rule(0.25) == 3
    assert RescaleRule(1e-2, rho=2).scale == pytest.approx(100 ** (2 / 3))
    with pytest.raises(ValueError):
        RescaleRule(0.0)


def test_layer0_example():
    sc = build_scaffold((0, 0), 1e-2, 1.0, 1.25, 3, r=1.5)
    layer = sc.layers[0]
    assert [b.rect.x for b in layer] == [-1, 3, 7]
    assert {b.rect.width for b in layer} == {5}
    assert {b.rect.height for b in layer} == {10}
    assert layer[0].rect.y == 1
    for b in layer:
        assert b.activation.x == b.rect.x1 and b.activation.height == b.rect.height
        assert b.activation.width == math.ceil(10 * 0.5 * 0.25)


@pytest.mark.parametrize("p", [1e-2, 1e-3, 1e-4])
@pytest.mark.parametrize("alpha,alpha_bar,m", [(1.0, 1.25, 3), (0.5, 0.75, 5), (0.3, 0.6, 9)])
def test_geometry(p, alpha, alpha_bar, m):
    sc = build_scaffold((3, -7), p, alpha, alpha_bar, m, r=1.5)
    lam = sc.cfg.lam
    assert sc.ell_max == math.ceil(math.log(1 / p) / math.log(lam) - 1e-12)
    assert sc.total_height() <= sc.rule(sc.sigma)
    y = -7 + 1
    for layer in sc.layers:
        for b in layer:
            assert b.rect.y == y
            y = b.rect.y1
        # disjoint within a layer: rows are distinct, so any overlap would need equal rows
        spans = sorted((b.rect.y, b.rect.y1) for b in layer)
        assert all(s[1] <= t[0] for s, t in zip(spans, spans[1:]))
    ws = [layer[0].rect.width for layer in sc.layers]
    # ceil(lam x) vs lam ceil(x) differ by less than lam
    assert all(abs(ws[i + 1] - lam * ws[i]) < lam for i in range(len(ws) - 1))


def test_parameter_errors():
    with pytest.raises(ValueError):
        build_scaffold((0, 0), 1e-2, 0.5, 0.75, 4)  # m <= 2/alpha
    with pytest.raises(ValueError):
        build_scaffold((0, 0), 1e-2, 0.5, 1.5, 5)  # alpha_bar > r
    with pytest.raises(ValueError):
        build_scaffold((0, 0), 1e-2, 0.5, 0.75, 5, ell_max=-1)


def test_transposed_is_mirror():
    c = (4, 9)
    up = build_scaffold(c, 1e-2, **{k: v for k, v in A4.items() if k != "p"})
    down = build_scaffold(c, 1e-2, **{k: v for k, v in A4.items() if k != "p"}, transposed=True)

    def cells(sc, flip):
        out = set()
        for b in sc.boxes:
            for r in (b.rect, b.activation):
                for yy in range(r.y, r.y1):
                    for xx in range(r.x, r.x1):
                        out.add((xx, 2 * c[1] - yy if flip else yy))
        return out

    assert cells(up, False) == cells(down, True)


def test_success_examples():
    sc = protected()
    assert is_successful(sc, PointField([])) == (False, (0, 1))
    assert is_successful(sc, plant_field([sc])).ok
    sc2 = build_scaffold((0, 0), 1e-2, 0.5, 0.75, 5, rho=2)
    assert min(b.activation.height for b in sc2.boxes) >= 2
    assert is_successful(sc2, plant_field([sc2], rho=2), rho=2).ok
    assert not is_successful(sc2, plant_field([sc2], rows="alternate"), rho=2).ok
    assert is_successful(sc2, plant_field([sc2], rows="alternate"), rho=1).ok


def _brute_success(sc, pts, rho):
    for b in sc.boxes:
        a = b.activation
        rows = [any(a.contains(x, y) for x, y in pts if y == yy) for yy in range(a.y, a.y1)]
        if not any(all(rows[i : i + rho]) for i in range(len(rows) - rho + 1)):
            return False
    return True


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), rho=st.sampled_from([1, 2]), extra=st.integers(1, 40))
def test_success_matches_bruteforce_and_is_monotone(seed, rho, extra):
    sc = build_scaffold((0, 0), 0.04, 1.0, 1.25, 3, ell_max=3, r=1.5)
    rng = np.random.default_rng(seed)
    b = sc.bounds()
    pts = set(map(tuple, np.column_stack([rng.integers(b.x, b.x1, 60), rng.integers(b.y, b.y1, 60)]).tolist()))
    # thin out planted sites so verdicts vary
    planted = [q for q in plant_field([sc], rho=rho).points if rng.random() < 0.9]
    pts |= set(planted)
    ok = is_successful(sc, PointField(pts), rho).ok
    assert ok == _brute_success(sc, pts, rho)
    more = pts | set(map(tuple, np.column_stack([rng.integers(b.x, b.x1, extra),
                                                  rng.integers(b.y, b.y1, extra)]).tolist()))
    assert is_successful(sc, PointField(more), rho).ok >= ok
    # mirror the field about the center row and use the transposed scaffold
    tr = build_scaffold((0, 0), 0.04, 1.0, 1.25, 3, ell_max=3, r=1.5, transposed=True)
    assert is_successful(tr, PointField((x, -y) for x, y in pts), rho) == is_successful(sc, PointField(pts), rho)


def test_bernoulli_field_matches_block():
    f = BernoulliField(0.05, 7)
    blk = f.block(-20, 30, -5, 40)
    assert (blk.any(axis=1) == f.rows_any(-20, 30, -5, 40)).all()
    assert 0.03 < blk.mean() < 0.07
    assert (f.block(0, 10, 0, 10) == blk[5:15, 20:30]).all()


def test_unprotected_area():
    d = 7.5
    assert unprotected_area([True] * 6, d) == 6 * d
    for ell in range(1, 6):
        ind = [True] + [False] * ell + [True]
        # integrate d + min(s, l - s) over the gap numerically
        s = np.linspace(0, ell, 200_001)
        integral = np.trapezoid(d + np.minimum(s, ell - s), s)
        assert unprotected_area(ind, d) - 2 * d == pytest.approx(integral, rel=1e-6)
        assert integral == pytest.approx(d * ell + ell**2 / 4, rel=1e-6)
    assert unprotected_area([False, False, True], d) == 3 * d + 2
    assert unprotected_area([False] * 4, d) == math.inf


def test_gap_stats_invariants():
    kw = dict(p=0.01, alpha=1.0, alpha_bar=1.5, m=3, r=2)
    f = BernoulliField(30 * 0.01, 11)
    g = gap_stats(f, (-20, 20), lookahead=30, **kw)
    assert len(g.ks) == 41
    assert ((g.gaps == 0) == g.indicators).all()
    for i, k in enumerate(g.ks):
        if np.isfinite(g.gaps[i]):
            z = int(g.gaps[i])
            assert first_gap(f, k0=int(k), **kw) == z
    base = build_scaffold((0, 0), 0.01, 1.0, 1.5, 3, r=2)
    assert g.depth == pytest.approx(base.sigma + base.cfg.lam / 2)
    full = gap_stats(plant_field([]) | PointField([]), (0, 2), **kw)
    assert not full.indicators.any() and full.area == math.inf


def test_all_success_window():
    kw = dict(p=0.01, alpha=1.0, alpha_bar=1.5, m=3, r=2)
    base = build_scaffold((0, 0), 0.01, 1.0, 1.5, 3, r=2)
    cy = base.rule(-base.sigma)
    scs = [base.shifted(base.rule(k), cy) for k in range(5)]
    g = gap_stats(plant_field(scs), (0, 4), **kw)
    assert g.indicators.all() and (g.gaps == 0).all()
    assert g.area == pytest.approx(5 * g.depth)


@pytest.mark.slow
def test_gap_tail():
    kw = dict(alpha=1.0, alpha_bar=1.5, m=3, r=2)
    means = []
    for p in (1e-2, 1e-3):
        z = np.array([first_gap(BernoulliField(60 * p, s), p, limit=500, **kw) for s in range(1000)])
        assert (z >= 0).all()
        means.append(z.mean())
    assert max(means) < 1.0


# ---------------------------------------------------------------- certificates


def test_certificate_passes_and_is_nontrivial():
    sc = protected()
    blue = plant_field([sc])
    cone = Cone(*sc.cone_apex())
    rep = protection_certificate([sc], [cone], blue, 1e-2, 27)
    assert rep.passed and rep.axis_reachable
    assert rep.exercised == rep.checked == len(sc.boxes)
    assert rep.min_margin > 0
    st_rep = protection_certificate([sc], [cone], blue, 1e-2, 27, mode="static")
    assert st_rep.passed
    bare = protection_certificate([sc], [cone], PointField([]), 1e-2, 27, require_success=False)
    assert not bare.passed and bare.first_violation.layer == 0


@pytest.mark.parametrize("box", [(0, 3), (2, 1)])
def test_suppressed_box_fails_there(box):
    sc = protected()
    blue = plant_field([sc])
    rep = protection_certificate([sc], [Cone(*sc.cone_apex())], blue, 1e-2, 27, suppress=[box])
    assert not rep.passed
    v = rep.first_violation
    assert (v.layer, v.k) == box
    drop = [b.activation for b in sc.boxes if (b.layer, b.k) == box]
    assert not is_successful(sc, blue.without(drop)).ok


def test_unsuccessful_rejected():
    sc = protected()
    with pytest.raises(UnsuccessfulScaffold) as e:
        protection_certificate([sc], [Cone(*sc.cone_apex())], PointField([]), 1e-2, 27)
    assert e.value.failing == (0, 1)
    with pytest.raises(ValueError):
        protection_certificate([sc], [], plant_field([sc]), 1e-2, 27, mode="sideways")


@pytest.mark.slow
def test_three_cones():
    base = protected()
    scs = [base.shifted(base.rule(k), 0) for k in (-1, 0, 1)]
    cones = [Cone(*s.cone_apex()) for s in scs]
    rep = protection_certificate(scs, cones, plant_field(scs), 1e-2, 27)
    assert rep.passed and rep.exercised == 3 * len(base.boxes)


def test_reference_engine_agrees():
    kw = dict(p=0.04, alpha=0.5, alpha_bar=0.75, m=5, ell_max=4)
    sc = protected(**kw)
    blue = plant_field([sc])
    cone = [Cone(*sc.cone_apex())]
    for suppress in ((), [(1, 2)]):
        fast = protection_certificate([sc], cone, blue, 0.04, 2, suppress=suppress)
        ref = protection_certificate([sc], cone, blue, 0.04, 2, suppress=suppress, engine=run_reference)
        assert fast.passed == ref.passed
        assert fast.violations == ref.violations
        assert (fast.result.lattice.color == ref.result.lattice.color).all()
