"""Capacity planning for a d-dimensional address space.

Closed-form and recursive estimates of how many nodes can join before
addresses run out, in sparse (few neighbors) and dense (clustered)
regimes, plus a path-length estimate and the dimension-choice heuristic.

Note on degenerate chains: with k = 2 neighbors the halving delegation
rule yields a physical chain of d + 1 nodes (each hop splits one block
until the mask is exhausted), not 2d; the simulator pins the d + 1
value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache


@dataclass(frozen=True)
class CapacityEstimate:
    """A capacity figure plus whether the inputs were inside the formula's validity range."""

    value: float
    valid: bool
    note: str = ""


@lru_cache(maxsize=None)
def s_recursive(h: int, k: int) -> int:
    """Nodes reachable through a subtree of height h with fan-out bound k.

    s(h, k) = 2^h for h <= k, otherwise the sum of s(h - j, k) for
    j = 1 .. k - 1.
    """
    if h < 0:
        raise ValueError(f"height must be non-negative, got {h}")
    if k < 2:
        raise ValueError(f"neighbor count must be at least 2, got {k}")
    if h <= k:
        return 1 << h
    return sum(s_recursive(h - j, k) for j in range(1, k))


def n_max_sparse(d: int, k: int) -> CapacityEstimate:
    """Maximum joinable nodes in a sparse network with k neighbors per node.

    The formula is derived for 2 < k < d; outside that range the value is
    still computed (heights below zero contribute nothing) but flagged.
    """
    if d < 1 or k < 2:
        raise ValueError("need d >= 1 and k >= 2")
    total = sum(s_recursive(d - i, k) for i in range(1, k + 1) if d - i >= 0)
    valid = 2 < k < d
    note = "" if valid else f"formula derived for 2 < k < d, got k={k}, d={d}"
    return CapacityEstimate(float(total), valid, note)


def n_max_dense(d: int, k: int, c: float) -> int:
    """Upper bound on joinable nodes when a fraction c of each node's k neighbors cluster.

    Secondary addresses consumed by cliques bound the population by
    floor(2^(d+1) / (c*k - 1)); undefined when c*k <= 1.
    """
    if not 0 < c <= 1:
        raise ValueError(f"clustering fraction must be in (0, 1], got {c}")
    if c * k <= 1:
        raise ValueError(f"dense bound undefined for c*k <= 1 (c={c}, k={k})")
    return math.floor((1 << (d + 1)) / (c * k - 1))


def max_path_length(n: int, k: int, d: int | None = None) -> CapacityEstimate:
    """Estimated maximum path length log_(k-1)(n) for an n-node, k-regular network.

    The estimate assumes k < d/2; when d is supplied and that fails the
    result carries a validity flag.
    """
    if k <= 2:
        raise ValueError(f"path-length estimate needs k >= 3, got {k}")
    if n < 2:
        raise ValueError(f"need at least 2 nodes, got {n}")
    value = math.log(n, k - 1)
    valid = d is None or k < d / 2
    note = "" if valid else f"estimate assumes k < d/2, got k={k}, d={d}"
    return CapacityEstimate(value, valid, note)


def choose_dimension(n_target: int) -> int:
    """Smallest d with 2^(4d/5) >= n_target.

    Sizing the space to the 4/5 power of its bit budget leaves roughly
    2^(d/5) spare addresses per node for secondaries.  Uses exact integer
    arithmetic (16^d >= n^5) to avoid float edge cases.
    """
    if n_target < 2:
        raise ValueError(f"need a target of at least 2 nodes, got {n_target}")
    target = n_target**5
    d = 1
    while 16**d < target:
        d += 1
    return d
