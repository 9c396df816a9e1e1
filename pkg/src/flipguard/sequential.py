"""Near-optimal commitment for the defender when the attacker best-responds.

For a swept value rho_d of the attacker's marginal ratio on the one node d
that is attacked fractionally, every other node is either attacked surely at
m_bar_i(rho_d) (set F), deterred at m_bar_i(rho_d) (set E), or abandoned
(set G).  At most two nodes f1, f2 of F sit below m_bar; their levels and the
attack probability on d come from a two-variable linear program.  A dynamic
program over the remaining nodes chooses the F/E/G labels on a lattice of
budget units of size delta.

Every candidate defense produced along the way is re-scored with the
attacker's actual best response (ties broken in the defender's favour), and
the best one is returned.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .best_response import attacker_best_response, attacker_best_response_batch
from .errors import ResourceLimitError, ValidationError
from .model import GameInstance, NodeParams, PayoffPair, m_bar, payoff

__all__ = [
    "SequentialSolution", "m_bar", "rho_max", "error_constants", "base_case_lp",
    "seq_states", "seq_value", "solve_sequential", "brute_force_sequential",
]

log = logging.getLogger(__name__)

NEG_INF = -math.inf
CHOICE_F, CHOICE_E, CHOICE_G = 0, 1, 2
LABELS = "FEG"


@dataclass(frozen=True)
class SequentialSolution:
    m: np.ndarray
    p: np.ndarray
    rho_d: float
    d: int | None
    f1: int | None
    f2: int | None
    ind: bool | None
    partition: dict
    payoff: PayoffPair
    epsilon: float
    lambda_const: float
    psi_const: float
    rho_step: float
    delta: float
    guaranteed: bool
    source: str
    m_bar: np.ndarray
    model_value: float
    dp_labels: dict | None = None


def rho_max(instance: GameInstance) -> float:
    """Smallest rho with sum_i w_i m_bar_i(rho) <= M."""
    if instance.M <= 0:
        raise ValidationError("rho_max needs M > 0")
    w = instance.w

    def excess(x):
        return float(np.sum(w * m_bar(instance, x))) - instance.M

    if excess(0.0) <= 0:
        return 0.0
    hi = 1.0
    while excess(hi) > 0:
        hi *= 2.0
    return optimize.brentq(excess, 0.0, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=500)


def error_constants(instance: GameInstance) -> tuple[float, float]:
    """(Lambda, Psi): the sweep step eps/Lambda and lattice unit eps/(2 Psi) carry the (1+eps) bound.

    Both use the bound n min(r w) / (M max w) on the largest useful rho.
    """
    if instance.M <= 0:
        raise ValidationError("error constants need M > 0")
    r, w, ca, cd = instance.r, instance.w, instance.ca, instance.cd
    if np.any(cd <= 0):
        raise ValidationError("error constants need C^D > 0 on every node")
    rho_hat = instance.n * np.min(r * w) / (instance.M * np.max(w))
    spread = rho_hat + np.max(r + ca / w)
    inner = np.maximum(1.0, (rho_hat + r) * w / cd + ca / cd)
    lam = np.max(w / cd) + spread * np.max(inner / r ** 2)
    psi = np.max(w ** 2 / cd * (rho_hat + r + ca / w)) + spread * np.max(w / r * inner)
    return float(lam), float(psi)


# --------------------------------------------------------------------------
# base case: nodes d, f1, f2

def _lp_constraints(w_f, key_f, r_f, mb_f, r_d, w_d, cd_d, m_d, ind, positive, b, m):
    """Rows G x <= c and objective q.x + const for the base program, one program per entry of ``b``.

    ``m_d`` and ``mb_f`` may vary per program; G does not.
    """
    k = len(w_f)
    b = np.asarray(b, dtype=float)
    S = b.shape
    m = np.broadcast_to(np.asarray(m, dtype=float), S)
    m_d = np.broadcast_to(np.asarray(m_d, dtype=float), S)
    mb_f = np.broadcast_to(np.asarray(mb_f, dtype=float), S + (k,))
    key_d = r_d * w_d - cd_d
    rows, rhs = [np.ones(k)], [b - m_d]
    if ind and positive:
        rows += [w_f, -w_f]
        rhs += [m, w_d * m_d - m]
        kappa = r_d * (1.0 - w_d * m_d) / (w_d * m_d)
        q = key_f + kappa[..., None] * w_f
        const = -np.sum(r_f) - m_d * cd_d - kappa * m
    elif ind:
        # rho_d = 0: attacking d earns nothing, so the attacker leaves it alone
        rows.append(w_f)
        rhs.append(m)
        q = np.broadcast_to(key_f, S + (k,))
        const = -np.sum(r_f) - m_d * cd_d
    else:
        rows.append(w_f)
        rhs.append(m - w_d * m_d)
        q = np.broadcast_to(key_f, S + (k,))
        const = -np.sum(r_f) + m_d * key_d - r_d
    for j in range(k):
        e = np.zeros(k)
        e[j] = 1.0
        rows += [e, -e]
        rhs += [mb_f[..., j], np.zeros(S)]
    G = np.array(rows, dtype=float).reshape(len(rows), k)
    c = np.stack([np.broadcast_to(x, S) for x in rhs], axis=-1)
    return G, c, q, np.broadcast_to(const, S).astype(float)


def _solve_small_lp(G, c, q, const, tol=1e-12):
    """Maximise q.x + const over {G x <= c} with k <= 2 variables by vertex enumeration.

    ``c`` is (S, rows), ``q`` is (S, k), ``const`` is (S,); one program per row.
    """
    S, k = c.shape[0], G.shape[1]
    best = np.full(S, NEG_INF)
    best_x = np.zeros((S, k))
    scale = 1.0 + np.abs(c)
    if k == 0:
        ok = np.all(c >= -tol * scale, axis=1)
        best[ok] = const[ok]
        return best_x, best
    for idx in itertools.combinations(range(G.shape[0]), k):
        A = G[list(idx)]
        if abs(np.linalg.det(A)) < 1e-14:
            continue
        x = c[:, list(idx)] @ np.linalg.inv(A).T
        ok = np.all(x @ G.T <= c + tol * scale, axis=1)
        val = np.where(ok, np.einsum("sk,sk->s", x, q) + const, NEG_INF)
        better = val > best
        best = np.where(better, val, best)
        best_x[better] = x[better]
    return best_x, best


def _base_rows(instance, b, m, d, fset, m_d, mb_f, ind, positive):
    """Base program for many residual budgets at once; returns (x, p_d, value)."""
    fset = list(fset)
    r, w, cd = instance.r, instance.w, instance.cd
    G, c, q, const = _lp_constraints(w[fset], (r * w - cd)[fset], r[fset], mb_f,
                                     r[d], w[d], cd[d], m_d, ind, positive, b, m)
    S = c.shape[:-1]
    rows = int(np.prod(S))
    x, val = _solve_small_lp(G, c.reshape(rows, c.shape[-1]), np.reshape(q, (rows, len(fset))), const.reshape(rows))
    x = x.reshape(S + (len(fset),))
    val = val.reshape(S)
    if ind and positive:
        p = (m - x @ w[fset]) / (w[d] * m_d)
    elif ind:
        p = np.zeros(S)
    else:
        p = np.ones(S)
    return x, np.clip(p, 0.0, 1.0), val


def base_case_lp(b: float, m: float, node_d: NodeParams, node_f1: NodeParams, node_f2: NodeParams,
                 m_d: float, m_bar_f1: float, m_bar_f2: float, ind: bool, rho_d: float | None = None):
    """Best levels for f1, f2 and attack probability on d given residual budgets (b, m).

    Returns ``(m_f1, m_f2, p, value)``; ``value`` is -inf when the residual
    polygon is empty.  When f1 or f2 coincides with d (or f1 == f2) the
    program loses that variable.
    """
    nodes = [node_d]
    for nd in (node_f1, node_f2):
        if all(nd.id != x.id for x in nodes):
            nodes.append(nd)
    local = GameInstance(tuple(NodeParams(j, nd.r, nd.w, nd.c_attack, nd.c_defend) for j, nd in enumerate(nodes)),
                         0.0, 0.0)
    bars = {node_f1.id: m_bar_f1, node_f2.id: m_bar_f2}
    mb_f = np.array([bars[nd.id] for nd in nodes[1:]])
    if rho_d is None:
        rho_d = (node_d.r - m_d * (node_d.r * node_d.w + node_d.c_attack)) / (m_d * node_d.w)
    fset = list(range(1, len(nodes)))
    x, p, val = _base_rows(local, np.array([float(b)]), np.array([float(m)]), 0, fset, m_d, mb_f, ind, rho_d > 0)
    levels = {nodes[j].id: x[0, j - 1] for j in fset}
    levels[node_d.id] = m_d
    return float(levels[node_f1.id]), float(levels[node_f2.id]), float(p[0]), float(val[0])


# --------------------------------------------------------------------------
# dynamic program over the remaining nodes

@dataclass
class SeqStates:
    """Reachable (defense units, attack units) states after all non-base nodes."""

    rest: list
    b_units: np.ndarray
    a_units: np.ndarray
    value: np.ndarray
    choices: np.ndarray        # (states, len(rest)) codes F/E/G
    m_rest: np.ndarray         # (states, len(rest)) defense levels used


def _node_options(instance, mb, delta):
    """Per-node lattice levels: F rounds m_bar down, E rounds it up so rho stays on the right side."""
    r, w, ca, cd = instance.r, instance.w, instance.ca, instance.cd
    fu = np.floor(mb / delta).astype(np.int64)
    eu = np.ceil(mb / delta).astype(np.int64)
    mF, mE = fu * delta, eu * delta
    aF = np.ceil(w * mF / delta - 1e-9).astype(np.int64)
    vF = mF * (r * w - cd) - r
    vE = -mE * cd
    deterred = r - mE * (r * w + ca) <= 0
    return fu, eu, mF, mE, aF, vF, vE, deterred


def seq_states(instance: GameInstance, rho_d: float, d: int, fset, ind: bool, delta: float,
               exhausted_slack_rule: bool = False, max_states: int = 2_000_000) -> SeqStates:
    """Forward DP: states keyed by integer (defense, attack) units, keeping the best value per key."""
    n = instance.n
    base = {d, *fset}
    rest = [i for i in range(n) if i not in base]
    if 3 ** len(rest) > max_states:
        raise ResourceLimitError(f"dynamic program needs up to {3 ** len(rest)} states, cap is {max_states}",
                                 required=3 ** len(rest))
    mb = m_bar(instance, rho_d)
    r = instance.r
    fu, eu, mF, mE, aF, vF, vE, deterred = _node_options(instance, mb, delta)
    Bu = int(np.floor(instance.B / delta + 1e-9))
    Mu = int(np.floor(instance.M / delta + 1e-9))

    bu = np.zeros(1, dtype=np.int64)
    au = np.zeros(1, dtype=np.int64)
    val = np.zeros(1)
    ch = np.zeros((1, 0), dtype=np.int8)
    mr = np.zeros((1, 0))
    for i in rest:
        opts = [(CHOICE_F, fu[i], aF[i], vF[i], mF[i]), (CHOICE_G, 0, 0, -r[i], 0.0)]
        if ind or deterred[i]:
            opts.append((CHOICE_E, eu[i], 0, vE[i], mE[i]))
        parts = []
        for code, du, da, dv, mv in opts:
            nb, na = bu + du, au + da
            ok = (nb <= Bu) & (na <= Mu)
            if not ok.any():
                continue
            cnt = int(ok.sum())
            parts.append((nb[ok], na[ok], val[ok] + dv,
                          np.hstack([ch[ok], np.full((cnt, 1), code, dtype=np.int8)]),
                          np.hstack([mr[ok], np.full((cnt, 1), mv)])))
        bu = np.concatenate([x[0] for x in parts])
        au = np.concatenate([x[1] for x in parts])
        val = np.concatenate([x[2] for x in parts])
        ch = np.concatenate([x[3] for x in parts])
        mr = np.concatenate([x[4] for x in parts])
        # keep the best value per (b, a) key
        order = np.lexsort((-val, au, bu))
        bu, au, val, ch, mr = bu[order], au[order], val[order], ch[order], mr[order]
        first = np.ones(len(bu), dtype=bool)
        first[1:] = (bu[1:] != bu[:-1]) | (au[1:] != au[:-1])
        bu, au, val, ch, mr = bu[first], au[first], val[first], ch[first], mr[first]
    if exhausted_slack_rule and not ind and rest:
        val = np.where(au >= Mu, NEG_INF, val)
    return SeqStates(rest, bu, au, val, ch, mr)


def _deterred_level(instance, i, level):
    """Smallest float >= level at which attacking node i earns nothing (guards against round-off)."""
    r, w, ca = instance.r[i], instance.w[i], instance.ca[i]
    while r - level * (r * w + ca) > 0:
        level = np.nextafter(level, np.inf)
    return float(level)


def _d_level(instance, d, rho_d, mb_d):
    return _deterred_level(instance, d, mb_d) if rho_d == 0 else float(mb_d)


def _finish(instance, st: SeqStates, rho_d, d, fset, ind, delta):
    """Attach the base LP to every DP state; returns per-state m, model value, p_d."""
    mb = m_bar(instance, rho_d)
    m_d = _d_level(instance, d, rho_d, mb[d])
    b = instance.B - st.b_units * delta
    m = instance.M - st.a_units * delta
    x, p_d, lp_val = _base_rows(instance, b, m, d, fset, m_d, mb[list(fset)], ind, rho_d > 0)
    total = st.value + lp_val
    M_all = np.zeros((len(total), instance.n))
    M_all[:, st.rest] = st.m_rest
    M_all[:, d] = m_d
    if fset:
        M_all[:, list(fset)] = x
    return M_all, total, p_d


def seq_value(instance: GameInstance, rho_d: float, d: int, fset, ind: bool, delta: float,
              exhausted_slack_rule: bool = False):
    """Model optimum SEQ(n, B, M) for one (rho_d, d, f-set, ind), its labels and defense."""
    fset = tuple(sorted(set(fset) - {d}))
    st = seq_states(instance, rho_d, d, fset, ind, delta, exhausted_slack_rule)
    M_all, total, _ = _finish(instance, st, rho_d, d, fset, ind, delta)
    j = int(np.argmax(total))
    labels = {i: LABELS[c] for i, c in zip(st.rest, st.choices[j])}
    return float(total[j]), labels, M_all[j]


# --------------------------------------------------------------------------
# sweep

def _combos(n):
    for d in range(n):
        others = [i for i in range(n) if i != d]
        for size in range(3):
            for fset in itertools.combinations(others, size):
                yield d, fset


@dataclass
class _Best:
    value: float = NEG_INF
    key: tuple = ()
    m: np.ndarray | None = None
    p: np.ndarray | None = None
    meta: dict | None = None

    def offer(self, value, key, m, p, meta, tol=1e-12):
        scale = tol * max(1.0, abs(value))
        if value > self.value + scale or (abs(value - self.value) <= scale and key < self.key):
            self.value, self.key, self.m, self.p, self.meta = value, key, m, p, meta
            return True
        return False


def _labelings(k):
    return np.array(list(itertools.product((CHOICE_F, CHOICE_E, CHOICE_G), repeat=k)), dtype=np.int8).reshape(3 ** k, k)


def _evaluate_rhos(instance, rhos, delta, exhausted_slack_rule, best: _Best, max_states: int = 2_000_000):
    """Best actual defender payoff at each rho in ``rhos`` (also offered to ``best``).

    Same recurrence as :func:`seq_states`, evaluated for a batch of rho values
    at once: every F/E/G labelling is expanded and infeasible ones are masked
    with -inf rather than merged per (b, a) key.
    """
    rhos = np.asarray(rhos, dtype=float)
    n = instance.n
    r, w, cd = instance.r, instance.w, instance.cd
    P = len(rhos)
    out = np.full(P, NEG_INF)
    Bu = int(np.floor(instance.B / delta + 1e-9))
    Mu = int(np.floor(instance.M / delta + 1e-9))
    mb = np.array([m_bar(instance, x) for x in rhos])                     # (P, n)
    fu, eu, mF, mE, aF, vF, vE, deterred = _node_options(instance, mb, delta)
    for d, fset in _combos(n):
        rest = [i for i in range(n) if i != d and i not in fset]
        if 3 ** len(rest) > max_states:
            raise ResourceLimitError(f"dynamic program needs up to {3 ** len(rest)} states, cap is {max_states}",
                                     required=3 ** len(rest))
        lab = _labelings(len(rest))                                        # (S, k)
        S = len(lab)
        isF, isE = (lab == CHOICE_F), (lab == CHOICE_E)
        sel = lambda arr: arr[:, rest][:, None, :]                         # (P, 1, k)
        bu = np.sum(np.where(isF, sel(fu), 0) + np.where(isE, sel(eu), 0), axis=2)
        au = np.sum(np.where(isF, sel(aF), 0), axis=2)
        val = np.sum(np.where(isF, sel(vF), np.where(isE, sel(vE), -r[rest])), axis=2)
        m_rest = np.where(isF, sel(mF), np.where(isE, sel(mE), 0.0))      # (P, S, k)
        feasible = (bu <= Bu) & (au <= Mu)
        e_ok = np.all(~isE | sel(deterred), axis=2)
        m_d = np.array([_d_level(instance, d, x, mb[j, d]) for j, x in enumerate(rhos)])
        b = instance.B - bu * delta
        m = instance.M - au * delta
        for ind in (True, False):
            ok = feasible if ind else feasible & e_ok
            if not ind and exhausted_slack_rule and rest:
                ok = ok & (au < Mu)
            total = np.full((P, S), NEG_INF)
            X = np.zeros((P, S, len(fset)))
            for positive in (True, False):
                rows = (rhos > 0) if positive else (rhos == 0)
                if not rows.any():
                    continue
                x, _, lp = _base_rows(instance, b[rows], m[rows], d, fset,
                                      np.repeat(m_d[rows, None], S, axis=1),
                                      mb[rows][:, None, list(fset)], ind, positive)
                total[rows] = np.where(ok[rows], val[rows] + lp, NEG_INF)
                X[rows] = x
            live = np.isfinite(total)
            if not live.any():
                continue
            pj, sj = np.nonzero(live)
            M_all = np.zeros((len(pj), n))
            M_all[:, rest] = m_rest[pj, sj]
            M_all[:, d] = m_d[pj]
            if fset:
                M_all[:, list(fset)] = X[pj, sj]
            Pm = attacker_best_response_batch(instance, M_all, "favor_defender")
            ud = np.sum(M_all * (Pm * r * w - cd) - Pm * r, axis=1)
            # best labelling per rho
            order = np.lexsort((-ud, pj))
            first = np.ones(len(order), dtype=bool)
            first[1:] = pj[order][1:] != pj[order][:-1]
            f = list(fset)
            key_f1 = f[0] if f else d
            key_f2 = f[1] if len(f) > 1 else key_f1
            for t in order[first]:
                j = int(pj[t])
                out[j] = max(out[j], float(ud[t]))
                meta = dict(rho_d=float(rhos[j]), d=d, f1=key_f1, f2=key_f2, ind=ind,
                            model_value=float(total[j, sj[t]]),
                            labels={i: LABELS[c] for i, c in zip(rest, lab[sj[t]])}, source="dp")
                best.offer(float(ud[t]), (float(rhos[j]), d, key_f1, key_f2), M_all[t].copy(), Pm[t].copy(), meta)
    return out


def _knapsack_candidate(instance):
    """All nodes attacked surely: maximise sum m_i (r_i w_i - C^D_i) within both budgets."""
    n = instance.n
    keys = instance.keys
    res = optimize.linprog(-keys, A_ub=np.vstack([np.ones(n), instance.w]), b_ub=[instance.B, instance.M],
                           bounds=[(0.0, 1.0 / wi) for wi in instance.w], method="highs")
    if not res.success:
        return None
    return np.clip(res.x, 0.0, 1.0 / instance.w)


def _score(instance, m):
    p = attacker_best_response(instance, m, "favor_defender")
    return payoff(instance, m, p).u_d, p


def solve_sequential(instance: GameInstance, epsilon: float = 0.05, rho_step: float | None = None,
                     delta: float | None = None, *, strict: bool = False, max_rho_points: int = 4000,
                     coarse_points: int = 48, zoom_levels: int = 12, zoom_points: int = 9, zoom_top: int = 3,
                     exhausted_slack_rule: bool = False) -> SequentialSolution:
    """Sweep rho_d, run the labelled DP for every (d, f1, f2, ind) and keep the best actual payoff.

    The lattice step eps/(2 Lambda) is used whenever it needs at most
    ``max_rho_points`` evaluations (``guaranteed=True``).  Otherwise a coarse
    sweep is refined around its best points; ``strict=True`` turns that case
    into a ResourceLimitError instead.
    """
    if not epsilon > 0:
        raise ValidationError(f"epsilon must be > 0, got {epsilon}")
    n = instance.n
    if instance.M <= 0:
        return _no_attack_budget(instance, epsilon)
    lam, psi = error_constants(instance)
    if delta is None:
        delta = min(epsilon / (2.0 * psi), 1e-9)
    if rho_step is None:
        rho_step = epsilon / (2.0 * lam)
    rmax = rho_max(instance)

    best = _Best()
    count = int(math.floor(rmax / rho_step)) + 2
    guaranteed = count <= max_rho_points
    if not guaranteed and strict:
        raise ResourceLimitError(f"rho sweep needs {count} points at step {rho_step:.3g}, cap is {max_rho_points}",
                                 required=count)
    if guaranteed:
        grid = np.unique(np.append(np.arange(count - 1) * rho_step, rmax))
        grid = grid[grid <= rmax]
        for s in range(0, len(grid), 256):
            _evaluate_rhos(instance, grid[s:s + 256], delta, exhausted_slack_rule, best)
    else:
        lin = np.linspace(0.0, rmax, coarse_points)
        geo = np.geomspace(rmax * 1e-4, rmax, coarse_points // 2) if rmax > 0 else np.array([])
        grid = np.unique(np.concatenate([lin, geo, [0.0, rmax]]))
        scores = _evaluate_rhos(instance, grid, delta, exhausted_slack_rule, best)
        top = np.argsort(-scores, kind="stable")[:zoom_top]
        windows = [(grid[max(j - 1, 0)], grid[min(j + 1, len(grid) - 1)]) for j in top]
        for _ in range(zoom_levels):
            windows = [(lo, hi) for lo, hi in windows if hi - lo > 1e-13]
            if not windows:
                break
            pts = np.array([np.linspace(lo, hi, zoom_points + 2) for lo, hi in windows])
            vals = _evaluate_rhos(instance, pts.ravel(), delta, exhausted_slack_rule, best).reshape(pts.shape)
            nxt = []
            for row, v in zip(pts, vals):
                k = int(np.argmax(v))
                step = row[1] - row[0]
                nxt.append((max(row[k] - step, 0.0), min(row[k] + step, rmax)))
            windows = nxt

    ks = _knapsack_candidate(instance)
    if ks is not None:
        v, p = _score(instance, ks)
        meta = dict(rho_d=math.inf, d=None, f1=None, f2=None, ind=None, model_value=float(v), labels=None,
                    source="knapsack")
        best.offer(v, (math.inf,), ks, p, meta)
    meta = best.meta
    mb = m_bar(instance, meta["rho_d"]) if math.isfinite(meta["rho_d"]) else np.zeros(n)
    partition = _partition(best.m, best.p)
    return SequentialSolution(best.m, best.p, meta["rho_d"], meta["d"], meta["f1"], meta["f2"], meta["ind"],
                              partition, payoff(instance, best.m, best.p), epsilon, lam, psi,
                              rho_step, delta, guaranteed, meta["source"], mb, meta["model_value"],
                              meta["labels"])


def _partition(m, p):
    """F: defended and attacked surely, D: fractional attack, E: defended and left alone, G: abandoned."""
    sets = {"F": set(), "D": set(), "E": set(), "G": set()}
    for i in range(len(m)):
        if m[i] <= 0:
            sets["G"].add(i)
        elif p[i] >= 1:
            sets["F"].add(i)
        elif p[i] <= 0:
            sets["E"].add(i)
        else:
            sets["D"].add(i)
    return {k: frozenset(v) for k, v in sets.items()}


def _no_attack_budget(instance, epsilon):
    """M = 0: any positive defense level makes a node unattackable, so spend almost nothing everywhere."""
    n = instance.n
    eta = min(instance.B / n, 1e-9)
    m = np.full(n, eta)
    p = attacker_best_response(instance, m, "favor_defender")
    meta = dict(rho_d=math.inf, d=None, f1=None, f2=None, ind=None, labels=None, source="no_attack")
    return SequentialSolution(m, p, math.inf, None, None, None, None, _partition(m, p),
                              payoff(instance, m, p), epsilon, math.nan, math.nan, math.nan, math.nan,
                              False, "no_attack", np.zeros(n), payoff(instance, m, p).u_d, None)


# --------------------------------------------------------------------------
# grid oracle

def brute_force_sequential(instance: GameInstance, grid_step: float, max_points: float = 3e8,
                           chunk: int = 500_000) -> tuple[np.ndarray, float]:
    """Grid search over defenses, each scored against the defender-favouring best response."""
    n = instance.n
    tops = [min(1.0 / instance.w[i], instance.B) for i in range(n)]
    axes = [np.arange(int(math.floor(t / grid_step + 1e-9)) + 1) * grid_step for t in tops]
    total = float(np.prod([len(a) for a in axes]))
    if total > max_points:
        raise ResourceLimitError(f"grid has {total:.3g} points, cap is {max_points:.3g}", required=total)
    r, w, cd = instance.r, instance.w, instance.cd
    best_v, best_m = NEG_INF, None
    # iterate over the first n-1 axes in blocks, last axis vectorised
    head = list(itertools.product(*axes[:-1]))
    head = np.array(head, dtype=float).reshape(len(head), n - 1)
    head = head[head.sum(axis=1) <= instance.B + 1e-12]
    last = axes[-1]
    rows_per = max(1, chunk // len(last))
    for s in range(0, len(head), rows_per):
        h = head[s:s + rows_per]
        M_all = np.hstack([np.repeat(h, len(last), axis=0), np.tile(last, len(h))[:, None]])
        M_all = M_all[M_all.sum(axis=1) <= instance.B + 1e-12]
        if not len(M_all):
            continue
        P = attacker_best_response_batch(instance, M_all, "favor_defender")
        ud = np.sum(M_all * (P * r * w - cd) - P * r, axis=1)
        j = int(np.argmax(ud))
        if ud[j] > best_v:
            best_v, best_m = float(ud[j]), M_all[j].copy()
    return best_m, best_v
