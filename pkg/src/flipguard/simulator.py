"""Monte-Carlo simulation of periodic defense against a stealthy attacker.

Nodes never interact, so each node is simulated on its own: the defender
resets it every X = 1/m time units, and after each reset the attacker picks a
waiting time alpha (0 for an immediate attack, or a give-up).  An attack
started at alpha takes an attack-time draw w and is wiped out by the next
reset if it has not finished.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ResourceLimitError, ValidationError
from .model import GameInstance, NodeParams, _vec


@dataclass(frozen=True)
class SimConfig:
    """``attacker`` is either a vector of immediate-attack probabilities or one
    waiting-time distribution per node; a draw at or past the period end means give-up."""

    instance: GameInstance
    m: np.ndarray
    attacker: object
    horizon: float = 1e6
    seed: int = 42
    replications: int = 1
    threads: int | None = None

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValidationError(f"horizon must be > 0, got {self.horizon}")
        if int(self.replications) < 1:
            raise ValidationError(f"replications must be >= 1, got {self.replications}")
        m = _vec(self.instance, self.m, "m")
        if np.any(m < 0):
            raise ValidationError("defense frequencies must be >= 0")
        object.__setattr__(self, "m", m)
        if not _is_waiting_mode(self.attacker):
            p = _vec(self.instance, self.attacker, "p")
            if np.any(p < 0) or np.any(p > 1):
                raise ValidationError("attack probabilities must lie in [0, 1]")
            object.__setattr__(self, "attacker", p)
        elif len(self.attacker) != self.instance.n:
            raise ValidationError(f"need {self.instance.n} waiting-time distributions, got {len(self.attacker)}")


def _is_waiting_mode(attacker) -> bool:
    return isinstance(attacker, (list, tuple)) and len(attacker) > 0 and all(hasattr(a, "sample") for a in attacker)


@dataclass
class SimResult:
    u_d_hat: float
    u_a_hat: float
    u_d_se: float
    u_a_se: float
    defense_rate_hat: float
    attack_busy_hat: float
    attack_busy_se: float
    compromise_fraction: np.ndarray
    replications: int
    per_replication: dict = field(repr=False, default_factory=dict)


def _node_run(rng, node: NodeParams, m_i: float, attacker, T: float):
    """Totals over [0, T] for one node: (compromised time, defenses, attacks, busy time)."""
    if m_i > 0:
        X = 1.0 / m_i
        k = int(math.ceil(T / X - 1e-12))
        starts = np.arange(k) * X
        lengths = np.minimum(starts + X, T) - starts
        defenses = int(math.floor(T / X + 1e-9))
    else:
        lengths = np.array([T])
        defenses = 0
    periods = len(lengths)
    if isinstance(attacker, np.ndarray):
        go = rng.random(periods) < attacker
        alpha = np.where(go, 0.0, np.inf)
    else:
        alpha = np.asarray(attacker.sample(rng, periods), dtype=float)
    started = alpha < lengths
    w = node.attack_time.sample(rng, periods)
    finish = np.where(started, alpha + w, np.inf)
    compromised = np.where(started, np.maximum(lengths - finish, 0.0), 0.0)
    busy = np.minimum(finish, lengths) - np.minimum(alpha, lengths)
    return float(compromised.sum()), defenses, int(started.sum()), float(busy.sum())


def _replication(cfg: SimConfig, rep: int):
    inst = cfg.instance
    T = float(cfg.horizon)
    out = np.zeros((inst.n, 4))
    for i, nd in enumerate(inst.nodes):
        # independent counter-based stream per (replication, node)
        ss = np.random.SeedSequence([int(cfg.seed), rep, i])
        rng = np.random.Generator(np.random.Philox(ss))
        att = cfg.attacker[i] if not isinstance(cfg.attacker, np.ndarray) else cfg.attacker[i:i + 1]
        out[i] = _node_run(rng, nd, float(cfg.m[i]), att, T)
    comp, defs, attacks, busy = out.T
    r, cd, ca = inst.r, inst.cd, inst.ca
    u_d = -float(np.sum(r * comp + cd * defs)) / T
    u_a = float(np.sum(r * comp - ca * attacks)) / T
    return u_d, u_a, float(defs.sum()) / T, float(busy.sum()) / T, comp / T


def _worker_count(requested):
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("FLIPGUARD_THREADS")
    return max(1, int(env)) if env else 1


def simulate(config: SimConfig) -> SimResult:
    reps = int(config.replications)
    workers = _worker_count(config.threads)
    if workers > 1 and reps > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda k: _replication(config, k), range(reps)))
    else:
        rows = [_replication(config, k) for k in range(reps)]
    ud = np.array([x[0] for x in rows])
    ua = np.array([x[1] for x in rows])
    rate = np.array([x[2] for x in rows])
    busy = np.array([x[3] for x in rows])
    comp = np.array([x[4] for x in rows])

    def se(a):
        return float(a.std(ddof=1) / math.sqrt(len(a))) if len(a) > 1 else math.nan

    return SimResult(float(ud.mean()), float(ua.mean()), se(ud), se(ua), float(rate.mean()),
                     float(busy.mean()), se(busy), comp.mean(axis=0), reps,
                     {"u_d": ud, "u_a": ua, "defense_rate": rate, "attack_busy": busy})


# --------------------------------------------------------------------------
# single-period attacker and single-node defender structure checks

@dataclass
class WaitingTimeReport:
    best_v: float
    best_q: float
    best_cost: float
    boundary_cost: float
    boundary_q: float
    threshold: float
    interior_gain: float
    boundary_optimal: bool


def _attack_mass(budget_weight, e):
    if e <= 0:
        return 1.0
    return float(min(1.0, budget_weight / e))


def best_waiting_time_search(node: NodeParams, X: float, budget_weight: float, grid_step: float,
                             slack: float = 1e-9) -> WaitingTimeReport:
    """Scan two-point waiting strategies (mass q at alpha = v, rest give-up) for one period of length X.

    The expected period cost to the attacker is r (X - compromised) + q C^A,
    with compromised time X - v - E[min(w, X - v)].  The mass q is as large as
    the expected attack effort q E[min(w, X - v)] <= budget_weight allows,
    unless attacking at all is unprofitable.  A negative threshold
    r (E[min(w, X)] - X) + C^A means attacking at once beats giving up.
    """
    if not X > 0:
        raise ValidationError(f"X must be > 0, got {X}")
    if not grid_step > 0:
        raise ValidationError(f"grid_step must be > 0, got {grid_step}")
    dist = node.attack_time
    r, ca = node.r, node.c_attack

    def per_unit(v):
        e = dist.expected_min(X - v)
        return r * (v + e - X) + ca, e

    threshold = per_unit(0.0)[0]
    vs = np.arange(0.0, X, grid_step)
    best = (math.inf, 0.0, 0.0)
    boundary = None
    for v in vs:
        c, e = per_unit(float(v))
        q = _attack_mass(budget_weight, e) if c < 0 else 0.0
        cost = r * X + q * c
        if v == 0.0:
            boundary = (cost, q)
        if cost < best[0] - 1e-15:
            best = (cost, float(v), q)
    interior_gain = boundary[0] - best[0]
    return WaitingTimeReport(best[1], best[2], best[0], boundary[0], boundary[1], threshold,
                             interior_gain, interior_gain <= slack)


@dataclass
class PeriodicReport:
    best_schedule: np.ndarray
    best_payoff: float
    equal_payoff: float
    grid_slack: float
    equal_split_optimal: bool


def schedule_payoff(node: NodeParams, p: float, periods, T: float) -> float:
    """Defender's time-average payoff for L defense moves whose periods X_1..X_L cover [0, T]."""
    periods = np.asarray(periods, dtype=float)
    dist = node.attack_time
    protected = sum(dist.expected_min(x) for x in periods)
    moves = len(periods)
    return (-node.r * p * (T - protected) - moves * node.c_defend) / T


def periodic_optimality_check(node: NodeParams, p: float, L: int, T: float, grid_step: float,
                              max_points: float = 2e6) -> PeriodicReport:
    """Compare the equal split against every grid schedule with L periods summing to T.

    ``grid_step`` is in units of T.  The slack allowed is the payoff change
    from moving one period boundary by one grid step.
    """
    if L < 1:
        raise ValidationError(f"L must be >= 1, got {L}")
    if L > 5:
        raise ResourceLimitError(f"simplex grid for L={L} periods is too large (cap is L <= 5)", required=L)
    units = int(round(1.0 / grid_step))
    count = math.comb(units - 1, L - 1) if units >= L else 0
    if count > max_points:
        raise ResourceLimitError(f"simplex grid has {count} schedules, cap is {max_points:.3g}", required=count)
    dist = node.attack_time
    h = T / units
    # compositions of `units` into L positive parts
    cuts = _compositions(units, L)
    X = cuts * h
    # E[min(w, x)] on the lattice, computed once per distinct length
    table = np.array([dist.expected_min(k * h) for k in range(units + 1)])
    protected = table[cuts].sum(axis=1)
    pay = (-node.r * p * (T - protected) - L * node.c_defend) / T
    j = int(np.argmax(pay))
    equal = schedule_payoff(node, p, np.full(L, T / L), T)
    slack = 2.0 * node.r * p * h / T + 1e-12
    return PeriodicReport(X[j], float(pay[j]), float(equal), slack, bool(pay[j] - equal <= slack))


def _compositions(total: int, parts: int) -> np.ndarray:
    if parts == 1:
        return np.array([[total]])
    rows = []
    for first in range(1, total - parts + 2):
        rest = _compositions(total - first, parts - 1)
        rows.append(np.hstack([np.full((len(rest), 1), first), rest]))
    return np.vstack(rows)
