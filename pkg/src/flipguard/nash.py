"""Pure-strategy Nash equilibria of the periodic game with deterministic attack times.

Nodes are sorted by r_i w_i - C^D_i.  An equilibrium is described by a prefix F
of that order (the nodes the defender is indifferent between), a prefix D of F
(the nodes the attacker is indifferent between) and one of six regimes:

    1  defender budget spent, rho* = 0
    2  defender budget spent, rho* > 0, attacker budget spent
    3  defender budget spent, rho* > 0, every node in F attacked surely
    4  defender budget slack, mu* = 0, rho* = 0
    5  defender budget slack, mu* = 0, rho* > 0, attacker budget spent
    6  defender budget slack, mu* = 0, rho* > 0, every node attacked surely

Within D the attack probabilities follow from equalising mu and the defense
frequencies from equalising rho, so each regime reduces to at most one
monotone scalar equation.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .best_response import attacker_best_response, defender_best_response
from .errors import ResourceLimitError, ValidationError
from .model import (GameInstance, PayoffPair, front_sets, m_bar, payoff,
                    reward_coefficients)

log = logging.getLogger(__name__)

VERIFY_TOL = 1e-7


@dataclass(frozen=True)
class Family:
    """A one-parameter continuum of equilibria sharing the same defense (or attack) shape.

    ``parameter`` is ``"mu_star"`` (attack probabilities on D move with it) or
    ``"rho_star"`` (defense frequencies move with it).  ``*_lo``/``*_hi`` hold
    the strategies at the two ends of the interval.
    """

    parameter: str
    lo: float
    hi: float
    lo_open: bool
    hi_open: bool
    m_lo: tuple
    m_hi: tuple
    p_lo: tuple
    p_hi: tuple

    def contains(self, x: float, tol: float = 1e-12) -> bool:
        above = x > self.lo - tol if not self.lo_open else x > self.lo - tol
        below = x < self.hi + tol
        return above and below


@dataclass(frozen=True)
class EquilibriumRecord:
    ne_type: int
    F: frozenset
    D: frozenset
    m: np.ndarray
    p: np.ndarray
    payoffs: PayoffPair
    residuals: float
    mu_star: float
    rho_star: float
    family: Family | None = None

    def points(self, count: int = 21):
        """Sample (m, p) points along the family (just the representative for isolated NEs)."""
        if self.family is None:
            return [(self.m, self.p)]
        fam = self.family
        out = []
        for t in np.linspace(0.0, 1.0, count):
            m = (1 - t) * np.asarray(fam.m_lo) + t * np.asarray(fam.m_hi)
            p = (1 - t) * np.asarray(fam.p_lo) + t * np.asarray(fam.p_hi)
            out.append((m, p))
        return out


@dataclass
class VerificationReport:
    defender_gap: float
    attacker_gap: float
    violations: dict = field(default_factory=dict)
    tol: float = VERIFY_TOL

    @property
    def residual(self) -> float:
        return max([self.defender_gap, self.attacker_gap, *self.violations.values()])

    @property
    def passed(self) -> bool:
        return self.residual <= self.tol


def require_positive_costs(instance: GameInstance):
    for nd in instance.nodes:
        if nd.c_attack <= 0 or nd.c_defend <= 0:
            raise ValidationError(
                f"node {nd.id}: equilibrium analysis needs C^A > 0 and C^D > 0 "
                f"(got C^A={nd.c_attack}, C^D={nd.c_defend})")


def verify_equilibrium(instance: GameInstance, m, p, tol: float = VERIFY_TOL) -> VerificationReport:
    m = np.asarray(m, dtype=float)
    p = np.asarray(p, dtype=float)
    r, w = instance.r, instance.w
    v = {}
    v["defense_box"] = float(max(0.0, np.max(-m), np.max(m - 1.0 / w)))
    v["attack_box"] = float(max(0.0, np.max(-p), np.max(p - 1.0)))
    v["defense_budget"] = max(0.0, float(m.sum() - instance.B))
    v["attack_budget"] = max(0.0, float(np.sum(m * w * p) - instance.M))

    here = payoff(instance, m, p)
    d_gap = payoff(instance, defender_best_response(instance, p), p).u_d - here.u_d
    a_gap = payoff(instance, m, attacker_best_response(instance, m)).u_a - here.u_a

    # necessary conditions: m_i <= r_i/(r_i w_i + C^A_i), p_i >= C^D_i/(r_i w_i),
    # and nodes outside F undefended and attacked surely
    v["defense_range"] = float(max(0.0, np.max(m - instance.m_zero)))
    v["attack_range"] = float(max(0.0, np.max(instance.cd / (r * w) - p)))
    fs = front_sets(instance, m, p, tol)
    off = [i for i in range(instance.n) if i not in fs.F]
    v["off_front"] = float(max([0.0] + [max(m[i], 1.0 - p[i]) for i in off]))
    return VerificationReport(max(d_gap, 0.0), max(a_gap, 0.0), v, tol)


# --------------------------------------------------------------------------
# per-regime constraint systems

def _root_decreasing(fun, target: float, lo: float = 0.0):
    """Smallest rho >= lo with fun(rho) = target for fun decreasing to 0; None if fun(lo) <= target."""
    f_lo = fun(lo) - target
    if f_lo <= 0:
        return None
    hi = max(1.0, 2.0 * lo)
    while fun(hi) - target > 0:
        hi *= 4.0
        if hi > 1e300:
            return None
    return optimize.brentq(lambda x: fun(x) - target, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)


def _mbar_sum(instance, idx, weights=None):
    idx = list(idx)
    r, w, ca = instance.r[idx], instance.w[idx], instance.ca[idx]
    k = np.ones(len(idx)) if weights is None else np.asarray(weights, dtype=float)

    def f(rho_value):
        return float(np.sum(k * r / ((rho_value + r) * w + ca)))
    return f


@dataclass
class _Candidate:
    ne_type: int
    h: int
    k: int
    D: tuple
    m: np.ndarray
    rho_star: float
    mu_lo: float
    mu_hi: float
    lo_open: bool = False
    hi_open: bool = False
    rho_family: tuple | None = None  # (lo, hi, lo_open) for regime-6 continua


def _p_of_mu(instance, D, mu_value):
    p = np.ones(instance.n)
    D = list(D)
    p[D] = (mu_value + instance.cd[D]) / (instance.r[D] * instance.w[D])
    return np.clip(p, 0.0, 1.0)


def _mu_range(instance, order, h, k, tol):
    keys = instance.keys
    D, FD = order[:k], order[k:h]
    if FD:
        kv = keys[FD]
        if kv.max() - kv.min() > tol:
            return None
        val = float(kv[0])
        return val, val, False, False
    hi = float(keys[D].min())
    if h < instance.n:
        return float(keys[order[h]]), hi, True, False
    return 0.0, hi, False, False


def _theta_root(instance, D, FD, pD, tol):
    """Regime-2 system when F\\D is non-empty.

    Nodes of F\\D get theta * m_bar_j(rho) with a shared theta in [0, 1), so
    both budgets pin (rho, theta).  Scans rho for a sign change, then refines.
    """
    sBD, sBFD = _mbar_sum(instance, D), _mbar_sum(instance, FD)
    sMD = _mbar_sum(instance, D, instance.w[list(D)] * pD)
    sMFD = _mbar_sum(instance, FD, instance.w[list(FD)])
    B, M = instance.B, instance.M
    rho_a = _root_decreasing(sBD, B) or 0.0
    rho_b = _root_decreasing(lambda x: sBD(x) + sBFD(x), B)
    if rho_b is None or rho_b <= rho_a:
        return None

    def theta(x):
        return (B - sBD(x)) / sBFD(x)

    def g(x):
        return sMD(x) + theta(x) * sMFD(x) - M

    grid = np.linspace(rho_a, rho_b, 401)[:-1]
    grid = grid[grid > 0] if rho_a == 0 else grid
    vals = np.array([g(x) for x in grid])
    for j in range(len(grid)):
        if abs(vals[j]) <= tol:
            x = grid[j]
            break
        if j + 1 < len(grid) and vals[j] * vals[j + 1] < 0:
            x = optimize.brentq(g, grid[j], grid[j + 1], xtol=1e-14, maxiter=500)
            break
    else:
        return None
    t = theta(x)
    if not (-tol <= t < 1 - tol):
        return None
    return x, max(t, 0.0)


def _solve(instance: GameInstance, order, h, k, ne_type, tol) -> _Candidate | None:
    n = instance.n
    D, FD = list(order[:k]), list(order[k:h])
    F = D + FD
    keys = instance.keys
    rng_ = _mu_range(instance, order, h, k, tol)
    if rng_ is None:
        return None
    lo, hi, lo_open, hi_open = rng_
    B, M = instance.B, instance.M
    r, w, cd = instance.r, instance.w, instance.cd
    m0 = instance.m_zero
    m = np.zeros(n)

    def mu_ok(x):
        return (x > lo + tol if lo_open else x >= lo - tol) and x <= hi + tol

    if ne_type in (4, 5, 6):
        if h != n or not mu_ok(0.0):
            return None

    if ne_type in (1, 4):
        m[D] = m0[D]
        spent = m0[D].sum()
        if ne_type == 1:
            rest = B - spent
            if FD:
                cap = m0[FD].sum()
                if rest < -tol or rest >= cap - tol:
                    return None
                if rest > tol:
                    rho_p = _root_decreasing(_mbar_sum(instance, FD), rest)
                    m[FD] = m_bar(instance, rho_p)[FD]
            elif abs(rest) > tol:
                return None
        else:
            if spent >= B - tol:
                return None
        # attack usage is linear in mu*: sum_D m0 (mu + cd)/r + sum_FD m w
        base = float(np.sum(m[FD] * w[FD]))
        slope = float(np.sum(m0[D] / r[D]))
        mu_cap = (M - base - float(np.sum(m0[D] * cd[D] / r[D]))) / slope
        if ne_type == 4:
            if mu_cap < -tol:
                return None
            return _Candidate(4, h, k, tuple(D), m, 0.0, 0.0, 0.0)
        new_hi = min(hi, mu_cap)
        if lo == hi:
            if mu_cap < lo - tol:
                return None
            return _Candidate(1, h, k, tuple(D), m, 0.0, lo, lo)
        if (lo_open and new_hi <= lo + tol) or new_hi < lo - tol:
            return None
        return _Candidate(1, h, k, tuple(D), m, 0.0, lo, max(new_hi, lo), lo_open, False)

    if ne_type == 2:
        if not FD:
            rho_s = _root_decreasing(_mbar_sum(instance, D), B)
            if rho_s is None or rho_s <= tol:
                return None
            mb = m_bar(instance, rho_s)
            m[D] = mb[D]
            mu_s = (M - float(np.sum(mb[D] * cd[D] / r[D]))) / float(np.sum(mb[D] / r[D]))
            if not mu_ok(mu_s):
                return None
            mu_s = min(max(mu_s, lo), hi)
            return _Candidate(2, h, k, tuple(D), m, rho_s, mu_s, mu_s)
        pD = _p_of_mu(instance, D, lo)[D]
        sol = _theta_root(instance, D, FD, pD, tol)
        if sol is None:
            return None
        rho_s, theta = sol
        mb = m_bar(instance, rho_s)
        m[D] = mb[D]
        m[FD] = theta * mb[FD]
        return _Candidate(2, h, k, tuple(D), m, rho_s, lo, lo)

    if ne_type in (3, 6):
        kv = keys[F]
        target = 0.0 if ne_type == 6 else float(kv[0])
        if np.max(np.abs(kv - target)) > tol:
            return None
        if not mu_ok(target):
            return None
        sB = _mbar_sum(instance, D)
        sM = _mbar_sum(instance, D, w[D])
        if ne_type == 3:
            rho_s = _root_decreasing(sB, B)
            if rho_s is None or rho_s <= tol:
                return None
            mb = m_bar(instance, rho_s)
            m[D] = mb[D]
            if float(np.sum(mb[D] * w[D])) > M + tol:
                return None
            return _Candidate(3, h, k, tuple(D), m, rho_s, target, target)
        rho_lo = max(_root_decreasing(sB, B) or 0.0, _root_decreasing(sM, M) or 0.0)
        rho_s = rho_lo + 1.0
        mb = m_bar(instance, rho_s)
        m[D] = mb[D]
        return _Candidate(6, h, k, tuple(D), m, rho_s, 0.0, 0.0, rho_family=(rho_lo, math.inf, True))

    if ne_type == 5:
        pD = cd[D] / (r[D] * w[D])
        rho_s = _root_decreasing(_mbar_sum(instance, D, w[D] * pD), M)
        if rho_s is None or rho_s <= tol:
            return None
        mb = m_bar(instance, rho_s)
        m[D] = mb[D]
        if m.sum() >= B - tol:
            return None
        return _Candidate(5, h, k, tuple(D), m, rho_s, 0.0, 0.0)
    raise ValueError(f"ne_type must be 1..6, got {ne_type}")


def _sorted_order(instance):
    return [int(i) for i in np.argsort(-instance.keys, kind="stable")]


def _front_cuts(instance, order, tol):
    keys = instance.keys
    n = instance.n
    return [h for h in range(1, n + 1) if h == n or keys[order[h - 1]] > keys[order[h]] + tol]


def solve_type_system(instance: GameInstance, F, D, ne_type: int, tol: float = 1e-9):
    """Solve one regime for given node sets; returns (m, p) or None.

    ``F`` and ``D`` must be prefixes of the order by r w - C^D (D within F).
    For continua the midpoint representative is returned.
    """
    require_positive_costs(instance)
    order = _sorted_order(instance)
    F, D = set(F), set(D)
    h, k = len(F), len(D)
    if not D <= F or set(order[:h]) != F or set(order[:k]) != D:
        raise ValidationError("F and D must be nested prefixes of the order by r*w - C^D")
    cand = _solve(instance, order, h, k, ne_type, tol)
    if cand is None:
        return None
    mu_rep = _representative_mu(cand.mu_lo, cand.mu_hi)
    return cand.m.copy(), _p_of_mu(instance, cand.D, mu_rep)


def _representative_mu(lo, hi):
    return lo if hi <= lo else 0.5 * (lo + hi)


def _merge(cands, tol):
    """Join mu*-intervals of candidates with the same regime, D and defense."""
    groups = []
    for c in cands:
        for g in groups:
            c0 = g[0]
            if c0.ne_type == c.ne_type and c0.D == c.D and c0.rho_family is None and c.rho_family is None \
                    and np.allclose(c0.m, c.m, atol=1e-10, rtol=1e-9):
                g.append(c)
                break
        else:
            groups.append([c])
    out = []
    for g in groups:
        g.sort(key=lambda c: (c.mu_lo, c.lo_open))
        cur = [g[0]]
        for c in g[1:]:
            last = cur[-1]
            touching = c.mu_lo < last.mu_hi - tol or (abs(c.mu_lo - last.mu_hi) <= tol and not (c.lo_open and last.hi_open))
            if touching:
                if c.mu_hi > last.mu_hi + tol or (abs(c.mu_hi - last.mu_hi) <= tol and not c.hi_open):
                    last.mu_hi, last.hi_open = c.mu_hi, c.hi_open
            else:
                cur.append(c)
        out.extend(cur)
    return out


def enumerate_equilibria(instance: GameInstance, tol: float = 1e-9, verify_tol: float = VERIFY_TOL) -> list[EquilibriumRecord]:
    """All six regimes over every admissible (F, D) prefix pair, verified and deduplicated."""
    require_positive_costs(instance)
    if instance.B <= 0 or instance.M <= 0:
        raise ValidationError("equilibrium enumeration needs B > 0 and M > 0")
    order = _sorted_order(instance)
    cands = []
    for h in _front_cuts(instance, order, tol):
        for k in range(1, h + 1):
            for t in range(1, 7):
                try:
                    c = _solve(instance, order, h, k, t, tol)
                except (ValueError, ZeroDivisionError, FloatingPointError) as exc:
                    log.debug("regime %d (h=%d, k=%d) failed: %s", t, h, k, exc)
                    continue
                if c is not None:
                    cands.append(c)
    records = []
    for c in _merge(cands, tol):
        rec = _make_record(instance, c, tol, verify_tol)
        if rec is None:
            continue
        if any(r.ne_type == rec.ne_type and np.allclose(r.m, rec.m, atol=1e-9) and np.allclose(r.p, rec.p, atol=1e-9)
               for r in records):
            continue
        records.append(rec)
    records.sort(key=lambda r: r.ne_type)
    return records


def _make_record(instance, c: _Candidate, tol, verify_tol):
    mu_rep = _representative_mu(c.mu_lo, c.mu_hi)
    p = _p_of_mu(instance, c.D, mu_rep)
    checks = [(c.m, p)]
    family = None
    if c.mu_hi > c.mu_lo + tol:
        p_lo, p_hi = _p_of_mu(instance, c.D, c.mu_lo), _p_of_mu(instance, c.D, c.mu_hi)
        family = Family("mu_star", c.mu_lo, c.mu_hi, c.lo_open, c.hi_open,
                        tuple(c.m), tuple(c.m), tuple(p_lo), tuple(p_hi))
        span = c.mu_hi - c.mu_lo
        for end, is_open, sgn in ((c.mu_lo, c.lo_open, 1), (c.mu_hi, c.hi_open, -1)):
            x = end + sgn * 1e-6 * span if is_open else end
            checks.append((c.m, _p_of_mu(instance, c.D, x)))
    elif c.rho_family is not None:
        lo = c.rho_family[0]
        m_lo = m_bar(instance, lo)
        m_lo = np.where(c.m > 0, m_lo, 0.0)
        family = Family("rho_star", lo, math.inf, True, True, tuple(m_lo), tuple(np.zeros(instance.n)),
                        tuple(p), tuple(p))
    worst = 0.0
    for mm, pp in checks:
        rep = verify_equilibrium(instance, mm, pp, verify_tol)
        worst = max(worst, rep.residual)
        if not rep.passed:
            log.debug("dropping regime-%d candidate (h=%d, k=%d): %s", c.ne_type, c.h, c.k, rep.violations)
            return None
    fs = front_sets(instance, c.m, p, 1e-9)
    return EquilibriumRecord(c.ne_type, fs.F, fs.D, c.m.copy(), p, payoff(instance, c.m, p), worst,
                             fs.mu_star, c.rho_star, family)


# --------------------------------------------------------------------------
# grid oracle

@dataclass
class GridEquilibria:
    m: np.ndarray
    p: np.ndarray
    defender_gap: np.ndarray
    attacker_gap: np.ndarray
    grid_step: float
    slack: float

    def __len__(self):
        return len(self.m)

    def __iter__(self):
        return iter(zip(self.m, self.p))


def _axis(top, step):
    k = int(math.floor(top / step + 1e-9))
    return np.arange(k + 1) * step


def lipschitz_bound(instance: GameInstance) -> float:
    r, w = instance.r, instance.w
    return float(np.sum(r * w + np.maximum(instance.ca, instance.cd)) + np.sum(r))


def brute_force_equilibria(instance: GameInstance, grid_step: float, slack: float | None = None,
                           max_pairs: float = 4e9, chunk: int = 4_000_000,
                           max_m_rows: float = 2e7) -> GridEquilibria:
    """Grid points where neither player gains more than ``slack`` by a grid deviation.

    Test oracle only.  Default slack is 2 * grid_step * (sum_i r_i w_i + max(C^A_i, C^D_i) + r_i).
    """
    n = instance.n
    r, w, cd = instance.r, instance.w, instance.cd
    if slack is None:
        slack = 2.0 * grid_step * lipschitz_bound(instance)
    axes = [_axis(min(1.0 / w[i], instance.B), grid_step) for i in range(n)]
    p_count = float(len(_axis(1.0, grid_step))) ** n
    box = float(np.prod([len(a) for a in axes]))
    # check before building: the budget filter keeps roughly a 1/n! share of the box
    if box > max_m_rows or box / math.factorial(n) * p_count > max_pairs:
        need = box / math.factorial(n) * p_count
        raise ResourceLimitError(f"grid has about {need:.3g} (m, p) pairs, cap is {max_pairs:.3g}", required=need)
    mg = np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, n)
    mg = mg[mg.sum(axis=1) <= instance.B + 1e-12]
    pg = np.array(list(itertools.product(*[_axis(1.0, grid_step)] * n)), dtype=float).reshape(-1, n)
    pairs = float(len(mg)) * len(pg)
    if pairs > max_pairs:
        raise ResourceLimitError(f"grid has {pairs:.3g} (m, p) pairs, cap is {max_pairs:.3g}", required=pairs)

    rw = r * w
    pr = pg @ r
    mcd = mg @ cd
    coef_a = r - mg * (rw + instance.ca)          # attacker reward coefficients per m row
    wt = mg * w                                   # attack weights per m row

    rows = max(1, chunk // max(1, len(pg)))
    vd = np.full(len(pg), -np.inf)
    va = np.empty(len(mg))
    for s in range(0, len(mg), rows):
        sl = slice(s, s + rows)
        ud = (mg[sl] * rw) @ pg.T - mcd[sl, None] - pr[None, :]
        np.maximum(vd, ud.max(axis=0), out=vd)
        ua = coef_a[sl] @ pg.T
        feas = wt[sl] @ pg.T <= instance.M + 1e-12
        va[sl] = np.where(feas, ua, -np.inf).max(axis=1)

    keep_m, keep_p, gd, ga = [], [], [], []
    for s in range(0, len(mg), rows):
        sl = slice(s, s + rows)
        ud = (mg[sl] * rw) @ pg.T - mcd[sl, None] - pr[None, :]
        ua = coef_a[sl] @ pg.T
        feas = wt[sl] @ pg.T <= instance.M + 1e-12
        g_d = vd[None, :] - ud
        g_a = va[sl, None] - ua
        hit = feas & (g_d <= slack) & (g_a <= slack)
        ii, jj = np.nonzero(hit)
        keep_m.append(mg[s + ii])
        keep_p.append(pg[jj])
        gd.append(g_d[ii, jj])
        ga.append(g_a[ii, jj])
    return GridEquilibria(np.concatenate(keep_m), np.concatenate(keep_p),
                          np.concatenate(gd), np.concatenate(ga), grid_step, slack)
