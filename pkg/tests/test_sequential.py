import itertools
import math

import numpy as np
import pytest
from scipy.optimize import brentq

from flipguard.best_response import defender_best_response
from flipguard.errors import ResourceLimitError, ValidationError
from flipguard.model import GameInstance, m_bar, payoff, rho
from flipguard.nash import enumerate_equilibria
from flipguard.sequential import (base_case_lp, brute_force_sequential, error_constants, rho_max,
                                  seq_value, solve_sequential)

from instances import random_instance, two_node


def test_rho_max_examples():
    x = brentq(lambda t: 2 / (2 * t + 3) + 1 / (t + 4.5) - 0.2, 0, 100, xtol=1e-14)
    assert rho_max(two_node()) == pytest.approx(x, abs=1e-10)
    assert rho_max(two_node()) == pytest.approx(7.22, abs=5e-3)
    assert rho_max(two_node(M=2)) == 0.0
    one = GameInstance.from_arrays([1], [1], [0], [0.5], 1, 0.5)
    assert rho_max(one) == pytest.approx(1.0, abs=1e-10)


def test_m_bar_round_trip_at_rho_max():
    inst = two_node()
    x = rho_max(inst)
    np.testing.assert_allclose(rho(inst, m_bar(inst, x)), x, atol=1e-9)
    assert float(np.sum(inst.w * m_bar(inst, x))) == pytest.approx(inst.M, abs=1e-10)


def test_error_constants():
    inst = two_node()
    lam, psi = error_constants(inst)
    assert lam > 0 and psi > 0 and math.isfinite(lam) and math.isfinite(psi)
    half = GameInstance.from_arrays(inst.r, inst.w, inst.ca, inst.cd / 2, inst.B, inst.M)
    lam2, _ = error_constants(half)
    # the max(w / C^D) term doubles; the rest cannot shrink
    assert lam2 - lam >= np.max(inst.w / inst.cd) - 1e-9
    k = 3.0
    scaled = GameInstance.from_arrays(inst.r / k, inst.w * k, inst.ca, inst.cd, inst.B / k, inst.M)
    lam3, psi3 = error_constants(scaled)
    assert rho_max(scaled) == pytest.approx(rho_max(inst) / k, rel=1e-12)
    assert lam3 == pytest.approx(k * lam, rel=1e-12) and psi3 == pytest.approx(k * psi, rel=1e-12)


def scan_base(b, m, nd, nf, m_d, mb_f, ind, step=1e-4):
    """1-D scan over the f level; p on d follows from the attack-budget equation."""
    best = -math.inf
    for x in np.append(np.arange(0, mb_f, step), mb_f):
        if m_d + x > b + 1e-12:
            break
        if ind:
            p = (m - x * nf.w) / (nd.w * m_d)
            if p < -1e-12 or p > 1 + 1e-12:
                continue
        else:
            p = 1.0
            if x * nf.w + nd.w * m_d > m + 1e-12:
                continue
        v = m_d * (p * nd.r * nd.w - nd.c_defend) - p * nd.r + x * (nf.r * nf.w - nf.c_defend) - nf.r
        best = max(best, v)
    return best


def test_base_case_lp_matches_scan():
    inst = two_node()
    nd, nf = inst.nodes
    mb = m_bar(inst, 1.5)
    mf1, mf2, p, val = base_case_lp(1 / 3, 0.2, nd, nf, nf, mb[0], mb[1], mb[1], True)
    assert val == pytest.approx(scan_base(1 / 3, 0.2, nd, nf, mb[0], mb[1], True), abs=1e-3)
    assert val == pytest.approx(-16 / 15, abs=1e-9) and p == pytest.approx(0.1)
    rng = np.random.default_rng(2)
    for _ in range(30):
        x = rng.uniform(0.1, 5)
        mb = m_bar(inst, x)
        b, m = rng.uniform(0, 0.6), rng.uniform(0, 0.6)
        for ind in (True, False):
            val = base_case_lp(b, m, nd, nf, nf, mb[0], mb[1], mb[1], ind, x)[3]
            ref = scan_base(b, m, nd, nf, mb[0], mb[1], ind)
            if math.isinf(ref):
                assert math.isinf(val) or val <= ref
            else:
                assert val >= ref - 1e-12 and val - ref <= 1e-3


def test_base_case_lp_degenerate():
    inst = two_node()
    nd = inst.nodes[0]
    mb = m_bar(inst, 1.5)
    assert base_case_lp(0, 0, nd, inst.nodes[1], inst.nodes[1], mb[0], mb[1], mb[1], True)[3] == -math.inf
    # d alone: p = m / (w m_d)
    _, _, p, val = base_case_lp(1 / 3, 0.2, nd, nd, nd, mb[0], mb[0], mb[0], True)
    assert p == pytest.approx(0.6) and val == pytest.approx(payoff(
        GameInstance((nd,), 1, 1), [mb[0]], [0.6]).u_d, abs=1e-12)


def exhaustive_seq(inst, rho_d, d, fset, ind, delta):
    mb = m_bar(inst, rho_d)
    rest = [i for i in range(inst.n) if i != d and i not in fset]
    Bu = math.floor(inst.B / delta + 1e-9)
    Mu = math.floor(inst.M / delta + 1e-9)
    nodes = inst.nodes
    f = list(fset) or [d]
    f1, f2 = f[0], f[-1]
    best = -math.inf
    for lab in itertools.product("FEG", repeat=len(rest)):
        bu = au = 0
        v = 0.0
        ok = True
        for i, c in zip(rest, lab):
            nd = nodes[i]
            if c == "F":
                units = math.floor(mb[i] / delta)
                bu += units
                au += math.ceil(nd.w * units * delta / delta - 1e-9)
                v += units * delta * nd.key - nd.r
            elif c == "E":
                units = math.ceil(mb[i] / delta)
                if not ind and nd.r - units * delta * (nd.r * nd.w + nd.c_attack) > 0:
                    ok = False
                bu += units
                v -= units * delta * nd.c_defend
            else:
                v -= nd.r
        if not ok or bu > Bu or au > Mu:
            continue
        lp = base_case_lp(inst.B - bu * delta, inst.M - au * delta, nodes[d], nodes[f1], nodes[f2],
                          mb[d], mb[f1], mb[f2], ind, rho_d)[3]
        best = max(best, v + lp)
    return best


def test_dp_matches_exhaustive_labelings():
    rng = np.random.default_rng(14)
    for k in range(12):
        inst = random_instance(rng, 3 + k % 2, (0.2, 2), (0.2, 2))
        delta = 1e-3
        x = rng.uniform(0.05, 3)
        for d in range(inst.n):
            others = [i for i in range(inst.n) if i != d]
            for fset in [(), (others[0],), tuple(others[:2])]:
                for ind in (True, False):
                    got = seq_value(inst, x, d, fset, ind, delta)[0]
                    ref = exhaustive_seq(inst, x, d, fset, ind, delta)
                    if math.isinf(ref):
                        assert math.isinf(got)
                    else:
                        assert got == pytest.approx(ref, abs=1e-9)


def test_two_node_solution():
    inst = two_node()
    s = solve_sequential(inst, 0.05)
    # eps / (2 Lambda) needs ~1.8e5 sweep points here, so the refined sweep is used
    assert not s.guaranteed
    assert s.payoff.u_d == pytest.approx(-17 / 30, abs=1e-6)
    np.testing.assert_allclose(s.m, [1 / 6, 1 / 6], atol=1e-6)
    _, c_star = brute_force_sequential(inst, 1e-3)
    assert abs(s.payoff.u_d) <= 1.05 * abs(c_star)
    assert s.payoff.u_d >= max(r.payoffs.u_d for r in enumerate_equilibria(inst)) - 1e-6
    assert s.lambda_const == pytest.approx(627.5) and s.psi_const == pytest.approx(1365)
    coarse = solve_sequential(inst, 5.0)
    assert coarse.guaranteed and coarse.rho_step == pytest.approx(5.0 / (2 * 627.5))
    assert abs(coarse.payoff.u_d) <= 6.0 * abs(c_star)


def test_no_attack_budget():
    inst = two_node(M=0)
    s = solve_sequential(inst)
    assert np.all(s.p == 0)
    assert -1e-6 <= s.payoff.u_d <= 0 and s.payoff.u_a == 0


def test_all_attacked_reduces_to_defender_knapsack():
    # rho_max = 0 and no node can be deterred within B: every node is attacked surely
    inst = two_node(B=0.1, M=10)
    assert rho_max(inst) == 0
    s = solve_sequential(inst)
    ones = np.ones(2)
    ref = payoff(inst, defender_best_response(inst, ones), ones).u_d
    assert s.payoff.u_d == pytest.approx(ref, abs=1e-9)
    np.testing.assert_allclose(s.p, 1.0)


def test_partition_structure():
    rng = np.random.default_rng(17)
    for k in range(8):
        inst = random_instance(rng, 2 + k % 3, (0.05, 0.6), (0.05, 1.0))
        s = solve_sequential(inst)
        parts = s.partition
        union = set().union(*parts.values())
        assert union == set(range(inst.n))
        assert sum(len(v) for v in parts.values()) == inst.n
        assert len(parts["D"]) <= 1
        assert all(s.m[i] == 0 for i in parts["G"])
        assert all(s.p[i] == 1 for i in parts["F"]) and all(s.p[i] == 0 for i in parts["E"])
        if s.source == "dp":
            below = [i for i in parts["F"] if s.m[i] < s.m_bar[i] - s.delta]
            assert len(below) <= 2


def test_monotone_in_budgets():
    inst = two_node()
    by_m = [solve_sequential(inst.replace(M=x)).payoff.u_d for x in np.linspace(0.05, 0.6, 5)]
    by_b = [solve_sequential(inst.replace(B=x)).payoff.u_d for x in np.linspace(0.1, 0.6, 5)]
    assert all(a >= b - 1e-9 for a, b in zip(by_m, by_m[1:]))
    assert all(a <= b + 1e-9 for a, b in zip(by_b, by_b[1:]))


def test_strict_mode_and_bad_epsilon():
    with pytest.raises(ValidationError):
        solve_sequential(two_node(), 0)
    with pytest.raises(ResourceLimitError):
        solve_sequential(two_node(), 1e-4, strict=True)
    s = solve_sequential(two_node(), 1e-3, max_rho_points=100)
    assert not s.guaranteed and s.payoff.u_d == pytest.approx(-17 / 30, abs=1e-6)


def test_brute_force_sequential_single_node():
    one = GameInstance.from_arrays([1], [1], [0.1], [0.1], 1, 1)
    m, v = brute_force_sequential(one, 1e-5)
    xs = np.linspace(0, 1, 100001)
    # attacked surely below the deterrence level 1/1.1, left alone at or above it
    ref = np.where(1 - xs * 1.1 > 0, xs * 0.9 - 1, -0.1 * xs)
    assert v == pytest.approx(ref.max(), abs=1e-5)
    with pytest.raises(ResourceLimitError):
        brute_force_sequential(random_instance(np.random.default_rng(0), 3, (5, 6), (1, 2)), 1e-4)
