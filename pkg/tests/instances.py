"""Shared instances and seeded generators for the test suite."""
from __future__ import annotations

from fractions import Fraction as Fr

import numpy as np

from flipguard.model import GameInstance

DATA = __import__("pathlib").Path(__file__).parent / "data"


def two_node(B=Fr(1, 3), M=Fr(1, 5)) -> GameInstance:
    return GameInstance.from_arrays([1, 1], [2, 1], [1, Fr(7, 2)], [Fr(1, 5), Fr(4, 5)], float(B), float(M))


def five_node(M=0.5, B=0.5) -> GameInstance:
    return GameInstance.from_arrays([5, 4, 3, 2, 1], [2] * 5, [1] * 5, [1] * 5, B, M)


def random_instance(rng: np.random.Generator, n: int, b_range=(0.05, 1.5), m_range=(0.05, 1.5)) -> GameInstance:
    """Log-uniform r, w, C^A, C^D in [0.1, 10], with C^D kept below r w so every node is worth defending."""
    def lu(k):
        return np.exp(rng.uniform(np.log(0.1), np.log(10), k))
    r, w, ca = lu(n), lu(n), lu(n)
    cd = np.minimum(lu(n), r * w * rng.uniform(0.05, 0.95, n))
    return GameInstance.from_arrays(r, w, ca, cd, rng.uniform(*b_range), rng.uniform(*m_range))


def existence_instances(count=200, seed=7):
    rng = np.random.default_rng(seed)
    return [random_instance(rng, 2 + k % 4) for k in range(count)]


def oracle_nash_instances(count=20, seed=11):
    # small budgets keep the brute-force (m, p) lattice at 1/200 within memory
    rng = np.random.default_rng(seed)
    return [random_instance(rng, 2, (0.05, 0.3), (0.05, 1.0)) for _ in range(count)]


def oracle_sequential_instances(count=20, seed=5):
    rng = np.random.default_rng(seed)
    return [random_instance(rng, 2 + k % 2, (0.05, 0.4), (0.05, 1.0)) for k in range(count)]
