"""Best responses of both players.

The defender's problem against a fixed attack is a box-constrained linear
program solved exactly by greedy filling; the attacker's problem against a
fixed defense is a fractional knapsack.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import ValidationError
from .model import GameInstance, _vec

TIE_BREAKS = ("any", "favor_defender")
RHO_TIE_RTOL = 1e-9
ZERO_REWARD_RTOL = 1e-12


def defender_best_response(instance: GameInstance, p) -> np.ndarray:
    """Fill the budget in decreasing order of mu_i(p), capping each node at 1/w_i."""
    p = _vec(instance, p, "p")
    coef = p * instance.r * instance.w - instance.cd
    caps = 1.0 / instance.w
    m = np.zeros(instance.n)
    left = instance.B
    for i in np.argsort(-coef, kind="stable"):
        if coef[i] <= 0 or left <= 0:
            break
        m[i] = min(caps[i], left)
        left -= m[i]
    return m


def _tie_groups(ratio: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sort each row by ratio descending and label runs of near-equal ratios.

    Returns the sort order and, per sorted position, a group index that is
    non-decreasing along the row.
    """
    order = np.argsort(-ratio, axis=1, kind="stable")
    s = np.take_along_axis(ratio, order, axis=1)
    with np.errstate(invalid="ignore"):
        gap = s[:, :-1] - s[:, 1:]
        scale = np.maximum(1.0, np.abs(s[:, :-1]))
        same = (s[:, :-1] == s[:, 1:]) | (gap <= RHO_TIE_RTOL * scale)
    new = np.concatenate([np.zeros((s.shape[0], 1), dtype=int), (~same).astype(int)], axis=1)
    return order, np.cumsum(new, axis=1)


def attacker_best_response(instance: GameInstance, m, tie_break: str = "any") -> np.ndarray:
    """Greedy fractional knapsack over nodes sorted by rho non-increasing.

    Nodes with m_i = 0 are attacked for free.  Nodes whose reward coefficient
    is not positive are never attacked.  Under ``favor_defender`` nodes tied on
    rho are filled in increasing order of defender loss per unit of attack
    weight, which picks the attacker-optimal response best for the defender.
    """
    if tie_break not in TIE_BREAKS:
        raise ValidationError(f"tie_break must be one of {TIE_BREAKS}, got {tie_break!r}")
    m = _vec(instance, m, "m")
    return attacker_best_response_batch(instance, m[None, :], tie_break)[0]


def attacker_best_response_batch(instance: GameInstance, m_rows: np.ndarray, tie_break: str = "any") -> np.ndarray:
    """Vectorised :func:`attacker_best_response` over the rows of ``m_rows``."""
    m_rows = np.atleast_2d(np.asarray(m_rows, dtype=float))
    r, w, ca = instance.r, instance.w, instance.ca
    coef = r - m_rows * (r * w + ca)
    if tie_break == "favor_defender":
        # a reward that is zero up to round-off leaves the attacker indifferent; do not attack
        coef = np.where(np.abs(coef) <= ZERO_REWARD_RTOL * r, 0.0, coef)
    weight = m_rows * w
    free = weight <= 0
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(free, np.inf, coef / np.where(free, 1.0, weight))
        if tie_break == "favor_defender":
            loss = np.where(free, 0.0, r * (1.0 - m_rows * w) / np.where(free, 1.0, weight))
        else:
            loss = np.zeros_like(ratio)
    order, group = _tie_groups(ratio)
    # within a tie group: ascending defender loss, then node index
    sloss = np.take_along_axis(loss, order, axis=1)
    perm = np.lexsort((order, sloss, group), axis=1)
    order = np.take_along_axis(order, perm, axis=1)

    p = np.zeros_like(m_rows)
    left = np.full(m_rows.shape[0], float(instance.M))
    rows = np.arange(m_rows.shape[0])
    for j in range(m_rows.shape[1]):
        i = order[:, j]
        c = coef[rows, i]
        a = weight[rows, i]
        take = np.where(a <= 0, np.where(c > 0, 1.0, 0.0),
                        np.where(c > 0, np.clip(left / np.where(a > 0, a, 1.0), 0.0, 1.0), 0.0))
        p[rows, i] = take
        left = np.maximum(left - take * a, 0.0)
        # budget leftovers from round-off would otherwise show up as ~1e-30 probabilities
        left[left <= 1e-14 * max(1.0, float(instance.M))] = 0.0
    return p


def attacker_best_response_general(instance: GameInstance, m) -> np.ndarray:
    """Knapsack with attack weight E[min(w_i, 1/m_i)] m_i for random attack times.

    Uses the same greedy as the deterministic case; the equilibrium solvers never
    call it.
    """
    m = _vec(instance, m, "m")
    n = instance.n
    coef = np.empty(n)
    weight = np.empty(n)
    for i, nd in enumerate(instance.nodes):
        if m[i] > 0:
            e = nd.attack_time.expected_min(1.0 / m[i])
            weight[i] = e * m[i]
            coef[i] = nd.r * (1.0 - weight[i]) - nd.c_attack * m[i]
        else:
            weight[i] = 0.0
            coef[i] = nd.r
    with np.errstate(divide="ignore"):
        ratio = np.where(weight > 0, coef / np.where(weight > 0, weight, 1.0), np.inf)
    p = np.zeros(n)
    left = instance.M
    for i in np.argsort(-ratio, kind="stable"):
        if coef[i] <= 0:
            continue
        if weight[i] <= 0:
            p[i] = 1.0
            continue
        p[i] = min(1.0, max(left, 0.0) / weight[i])
        left -= p[i] * weight[i]
    return p


def _marginal_attack_share(dist, m: float) -> float:
    """d/dm [m E[min(w, 1/m)]] = E[min(w, 1/m)] - S(1/m)/m; non-increasing in m."""
    x = 1.0 / m
    return dist.expected_min(x) - x * dist.survival(x)


def _node_argmax(dist, pr: float, cd: float, lam: float, cap: float, tol: float) -> float:
    """argmax over [0, cap] of pr*m*E[min(w,1/m)] - (cd + lam) m (concave in m)."""
    if cap <= 0:
        return 0.0
    slope0 = pr * dist.mean - cd - lam
    if slope0 <= 0:
        return 0.0
    if pr * _marginal_attack_share(dist, cap) - cd - lam >= 0:
        return cap
    lo, hi = 0.0, cap
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if mid <= 0:
            break
        if pr * _marginal_attack_share(dist, mid) - cd - lam > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def general_defender_objective(instance: GameInstance, p, m) -> float:
    p = _vec(instance, p, "p")
    m = _vec(instance, m, "m")
    total = 0.0
    for i, nd in enumerate(instance.nodes):
        share = m[i] * nd.attack_time.expected_min(1.0 / m[i]) if m[i] > 0 else 0.0
        total += share * p[i] * nd.r - nd.c_defend * m[i] - p[i] * nd.r
    return total


def defender_best_response_general(instance: GameInstance, p, solver_tol: float = 1e-9) -> np.ndarray:
    """Concave budget allocation for random attack times via Lagrangian bisection.

    For each multiplier the per-node problem is one-dimensional and concave, so
    its maximiser is found by bisection on the (non-increasing) marginal value.
    The outer bisection on the multiplier brackets the budget; the residual
    inside the final bracket is split by interpolating between the two sides.
    """
    p = _vec(instance, p, "p")
    dists = [nd.attack_time for nd in instance.nodes]
    for nd, d in zip(instance.nodes, dists):
        if not math.isfinite(d.mean):
            raise ValidationError(f"node {nd.id}: attack time without finite mean")
    pr = p * instance.r
    cap = instance.B
    inner_tol = min(solver_tol, 1e-10) * 1e-2

    def alloc(lam):
        return np.array([_node_argmax(d, pr[i], instance.cd[i], lam, cap, inner_tol)
                         for i, d in enumerate(dists)])

    m0 = alloc(0.0)
    if m0.sum() <= instance.B:
        return m0
    lo, hi = 0.0, 1.0
    while alloc(hi).sum() > instance.B:
        lo, hi = hi, hi * 2.0
    m_lo, m_hi = alloc(lo), alloc(hi)
    while hi - lo > solver_tol * 1e-3 * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        m_mid = alloc(mid)
        if m_mid.sum() > instance.B:
            lo, m_lo = mid, m_mid
        else:
            hi, m_hi = mid, m_mid
    extra = m_lo.sum() - m_hi.sum()
    theta = 0.0 if extra <= 0 else (instance.B - m_hi.sum()) / extra
    return m_hi + theta * (m_lo - m_hi)
