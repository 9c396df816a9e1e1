import numpy as np
import pytest

from flipguard.errors import ResourceLimitError, ValidationError
from flipguard.model import GameInstance
from flipguard.nash import (brute_force_equilibria, enumerate_equilibria, solve_type_system,
                            verify_equilibrium)

from instances import existence_instances, two_node


def find(recs, m, p=None, atol=1e-6):
    for r in recs:
        if np.allclose(r.m, m, atol=atol) and (p is None or np.allclose(r.p, p, atol=atol)):
            return r
    return None


def test_two_node_records():
    recs = enumerate_equilibria(two_node())
    t2 = find(recs, [1 / 6, 1 / 6], [0.15, 0.9])
    assert t2 is not None and t2.ne_type == 2
    assert t2.payoffs.u_d == pytest.approx(-61 / 60, abs=1e-9)
    assert t2.mu_star == pytest.approx(0.1) and t2.rho_star == pytest.approx(1.5)
    fam = find(recs, [1 / 3, 0.0])
    assert fam is not None and fam.ne_type == 1 and fam.family is not None
    assert fam.family.lo == pytest.approx(0.2) and fam.family.hi == pytest.approx(0.4)
    assert fam.family.p_lo[0] == pytest.approx(0.2) and fam.family.p_hi[0] == pytest.approx(0.3)
    assert fam.family.p_lo[1] == 1 and fam.family.p_hi[1] == 1
    for m, p in fam.points(11):
        assert verify_equilibrium(two_node(), m, p, 1e-9).passed


def test_multiplicity_witness():
    pays = [r.payoffs.u_d for r in enumerate_equilibria(two_node())]
    assert len(pays) >= 2 and max(pays) - min(pays) > 1e-3


def test_single_node_slack_budgets():
    one = GameInstance.from_arrays([1], [1], [0.5], [0.5], 2, 2)
    recs = enumerate_equilibria(one)
    assert recs
    for r in recs:
        assert r.ne_type in (4, 5, 6)
        assert r.mu_star == pytest.approx(0.0, abs=1e-9)
        assert r.p[0] == pytest.approx(0.5)
    assert find(recs, [2 / 3], [0.5]) is not None


def test_large_budgets_give_slack_defense():
    inst = two_node(B=10, M=10)
    recs = enumerate_equilibria(inst)
    assert any(r.m.sum() < inst.B - 1e-9 and abs(r.mu_star) <= 1e-9 for r in recs)
    assert all(r.ne_type >= 4 for r in recs)


def test_verify_flags_attack_budget():
    inst = two_node()
    rep = verify_equilibrium(inst, [1 / 6, 1 / 6], [1.0, 1.0])
    assert not rep.passed
    assert rep.violations["attack_budget"] == pytest.approx(0.3)
    rep = verify_equilibrium(inst, [1 / 6, 1 / 6], [0.15, 0.9])
    assert rep.passed and rep.defender_gap <= 1e-9 and rep.attacker_gap <= 1e-9


def test_solve_type_system():
    inst = two_node()
    m, p = solve_type_system(inst, {0, 1}, {0, 1}, 2)
    np.testing.assert_allclose(m, [1 / 6, 1 / 6], atol=1e-9)
    np.testing.assert_allclose(p, [0.15, 0.9], atol=1e-9)
    m, p = solve_type_system(inst, {0, 1}, {0}, 1)
    np.testing.assert_allclose(m, [1 / 3, 0.0], atol=1e-12)
    assert 0.2 - 1e-9 <= p[0] <= 0.3 + 1e-9 and p[1] == 1
    # type 3 needs equal r w - C^D across F
    assert solve_type_system(inst, {0, 1}, {0}, 3) is None
    with pytest.raises(ValidationError):
        solve_type_system(inst, {1}, {1}, 2)


def test_rejects_degenerate_inputs():
    with pytest.raises(ValidationError, match="C\\^A > 0"):
        enumerate_equilibria(GameInstance.from_arrays([1, 1], [1, 1], [0, 1], [0.5, 0.5], 1, 1))
    with pytest.raises(ValidationError):
        enumerate_equilibria(two_node(B=0))


def test_prefix_ordering_and_soundness():
    for inst in existence_instances(60, seed=21):
        keys = inst.keys
        for r in enumerate_equilibria(inst):
            assert verify_equilibrium(inst, r.m, r.p, 1e-6).passed
            D, F = sorted(r.D), sorted(r.F)
            FD = [i for i in F if i not in r.D]
            out = [i for i in range(inst.n) if i not in r.F]
            if D and FD:
                assert keys[D].min() >= keys[FD].max() - 1e-9
            if out:
                assert keys[F].min() > keys[out].max() - 1e-9


def test_brute_force_contains_enumerated():
    inst = two_node()
    h = 1 / 120
    g = brute_force_equilibria(inst, h)
    X = np.hstack([g.m, g.p])
    for r in enumerate_equilibria(inst):
        for m, p in r.points(5):
            assert np.abs(X - np.concatenate([m, p])).max(axis=1).min() <= 2 * h


def test_brute_force_resource_limit():
    with pytest.raises(ResourceLimitError) as exc:
        brute_force_equilibria(two_node(B=1), 1e-4)
    assert exc.value.required > 4e9
