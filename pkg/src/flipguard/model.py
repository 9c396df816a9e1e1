"""Game instances, strategies and the closed-form payoffs of the periodic game.

Strategies are plain float arrays: ``m`` holds per-node defense frequencies
(the reciprocal of the defense period) and ``p`` the per-node probability of
attacking immediately after each recovery.  Node ids are 0-based.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .distributions import AttackTime, PointMass
from .errors import ValidationError

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class NodeParams:
    """Economics of one node.

    ``w`` is the deterministic attack time used by the equilibrium solvers;
    ``w_dist`` optionally replaces it with a distribution for the general
    best response and the simulator.
    """

    id: int
    r: float
    w: float
    c_attack: float
    c_defend: float
    w_dist: AttackTime | None = None

    @property
    def attack_time(self) -> AttackTime:
        return self.w_dist if self.w_dist is not None else PointMass(self.w)

    @property
    def key(self) -> float:
        """Marginal value of defending under certain attack, r*w - C^D."""
        return self.r * self.w - self.c_defend

    @property
    def m_zero(self) -> float:
        """Defense frequency at which attacking the node earns exactly nothing."""
        return self.r / (self.r * self.w + self.c_attack)


@dataclass(frozen=True)
class GameInstance:
    nodes: tuple[NodeParams, ...]
    B: float
    M: float
    _arrays: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        self.validate()
        arrays = {
            "r": np.array([nd.r for nd in self.nodes], dtype=float),
            "w": np.array([nd.w for nd in self.nodes], dtype=float),
            "ca": np.array([nd.c_attack for nd in self.nodes], dtype=float),
            "cd": np.array([nd.c_defend for nd in self.nodes], dtype=float),
        }
        for a in arrays.values():
            a.setflags(write=False)
        object.__setattr__(self, "_arrays", arrays)

    def validate(self):
        if not self.nodes:
            raise ValidationError("instance has no nodes")
        for pos, nd in enumerate(self.nodes):
            if nd.id != pos:
                raise ValidationError(f"node ids must be contiguous from 0; position {pos} has id {nd.id}")
            for name in ("r", "w", "c_attack", "c_defend"):
                v = getattr(nd, name)
                if not isinstance(v, (int, float)) or not math.isfinite(v):
                    raise ValidationError(f"node {nd.id}: {name} must be a finite number, got {v!r}")
            if nd.r <= 0:
                raise ValidationError(f"node {nd.id}: r must be > 0, got {nd.r}")
            if nd.w <= 0:
                raise ValidationError(f"node {nd.id}: w must be > 0, got {nd.w}")
            if nd.c_attack < 0 or nd.c_defend < 0:
                raise ValidationError(f"node {nd.id}: costs must be >= 0")
            if nd.c_defend > nd.r * nd.w * (1 + 1e-12):
                raise ValidationError(
                    f"node {nd.id}: C^D/(r*w) = {nd.c_defend / (nd.r * nd.w):.6g} > 1; "
                    "such a node is never worth defending, drop it from the scenario")
        for name in ("B", "M"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v) or v < 0:
                raise ValidationError(f"{name} must be a finite number >= 0, got {v!r}")

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def r(self) -> np.ndarray:
        return self._arrays["r"]

    @property
    def w(self) -> np.ndarray:
        return self._arrays["w"]

    @property
    def ca(self) -> np.ndarray:
        return self._arrays["ca"]

    @property
    def cd(self) -> np.ndarray:
        return self._arrays["cd"]

    @property
    def keys(self) -> np.ndarray:
        return self.r * self.w - self.cd

    @property
    def m_zero(self) -> np.ndarray:
        return self.r / (self.r * self.w + self.ca)

    def replace(self, **changes) -> "GameInstance":
        kw = {"nodes": self.nodes, "B": self.B, "M": self.M}
        kw.update(changes)
        return GameInstance(**kw)

    @classmethod
    def from_arrays(cls, r, w, c_attack, c_defend, B, M) -> "GameInstance":
        r, w, ca, cd = (np.broadcast_to(np.asarray(x, dtype=float), np.shape(r)) for x in (r, w, c_attack, c_defend))
        nodes = [NodeParams(i, float(r[i]), float(w[i]), float(ca[i]), float(cd[i])) for i in range(len(r))]
        return cls(tuple(nodes), float(B), float(M))


@dataclass(frozen=True)
class PayoffPair:
    u_d: float
    u_a: float


@dataclass(frozen=True)
class FrontSets:
    F: frozenset
    D: frozenset
    mu_star: float
    rho_star: float


def _vec(instance: GameInstance, x: Sequence[float], name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.shape != (instance.n,):
        raise ValidationError(f"{name} has shape {arr.shape}, expected ({instance.n},)")
    return arr


def check_defense(instance: GameInstance, m, tol: float = DEFAULT_TOL, budget: bool = True) -> np.ndarray:
    m = _vec(instance, m, "m")
    if np.any(m < -tol) or np.any(m > 1.0 / instance.w + tol):
        raise ValidationError("defense frequencies must lie in [0, 1/w_i]")
    if budget and m.sum() > instance.B + tol:
        raise ValidationError(f"defense budget exceeded: sum(m) = {m.sum():.9g} > B = {instance.B}")
    return m


def check_attack(instance: GameInstance, p, m=None, tol: float = DEFAULT_TOL) -> np.ndarray:
    p = _vec(instance, p, "p")
    if np.any(p < -tol) or np.any(p > 1 + tol):
        raise ValidationError("attack probabilities must lie in [0, 1]")
    if m is not None:
        used = float(np.sum(_vec(instance, m, "m") * instance.w * p))
        if used > instance.M + tol:
            raise ValidationError(f"attack budget exceeded: sum(m w p) = {used:.9g} > M = {instance.M}")
    return p


def mu(instance: GameInstance, p) -> np.ndarray:
    """Coefficient of m_i in the defender payoff: p_i r_i w_i - C^D_i."""
    p = _vec(instance, p, "p")
    return p * instance.r * instance.w - instance.cd


def rho(instance: GameInstance, m) -> np.ndarray:
    """Attacker reward per unit of attack budget; +inf where m_i = 0."""
    m = _vec(instance, m, "m")
    out = np.full(instance.n, np.inf)
    pos = m > 0
    r, w, ca = instance.r[pos], instance.w[pos], instance.ca[pos]
    out[pos] = (r - m[pos] * (r * w + ca)) / (m[pos] * w)
    return out


def m_bar(instance: GameInstance, rho_value: float) -> np.ndarray:
    """Defense frequencies that make every node's rho equal ``rho_value``."""
    if rho_value < 0:
        raise ValidationError(f"rho must be >= 0, got {rho_value}")
    if math.isinf(rho_value):
        return np.zeros(instance.n)
    r, w = instance.r, instance.w
    return r / ((rho_value + r) * w + instance.ca)


def reward_coefficients(instance: GameInstance, m) -> np.ndarray:
    """Attacker's gain from attacking node i with certainty: r_i - m_i (r_i w_i + C^A_i)."""
    m = _vec(instance, m, "m")
    return instance.r - m * (instance.r * instance.w + instance.ca)


def payoff(instance: GameInstance, m, p) -> PayoffPair:
    m = _vec(instance, m, "m")
    p = _vec(instance, p, "p")
    r, w = instance.r, instance.w
    u_d = float(np.sum(m * (p * r * w - instance.cd) - p * r))
    u_a = float(np.sum(p * (r - m * (r * w + instance.ca))))
    return PayoffPair(u_d, u_a)


def front_sets(instance: GameInstance, m, p, tol: float = DEFAULT_TOL) -> FrontSets:
    """mu-maximal nodes F and, within F, the rho-minimal nodes D."""
    mus = mu(instance, p)
    rhos = rho(instance, m)
    mu_star = float(mus.max())
    F = frozenset(int(i) for i in np.flatnonzero(mus >= mu_star - tol))
    rho_star = float(rhos.min())
    if math.isinf(rho_star):
        D = frozenset(i for i in F if math.isinf(rhos[i]))
    else:
        D = frozenset(i for i in F if rhos[i] <= rho_star + tol * max(1.0, abs(rho_star)))
    return FrontSets(F, D, mu_star, rho_star)
