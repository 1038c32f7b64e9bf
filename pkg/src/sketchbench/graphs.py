"""Left-regular bipartite graphs with combinatorial verifiers.

Two graph properties matter for the sketching experiments and both are
checked exactly here, at sizes where exactness is affordable:

* vertex expansion — every left subset C with |C| ≤ k has more than
  (1−eps)·s·|C| distinct neighbors; verified by exhausting all subsets, with
  an explicit enumeration budget so a careless call fails fast instead of
  running for hours;
* matching coverage — a given left subset C can be saturated by a matching;
  decided by Hopcroft–Karp on the induced subgraph.

``estimate_magical_delta`` ties the two to the sketch constructions: it
samples fresh degree-s sketches and uniform k-subsets of columns and reports
how often matching coverage fails.  That failure frequency is the empirical
stand-in for the per-subset failure probability the s=2 construction is
supposed to keep at O(1/k) once m is a constant multiple of k.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .rng import Prng

EXPANSION_BUDGET = 10_000_000


class BudgetExceededError(ValueError):
    """Exhaustive enumeration would exceed the subset budget."""


@dataclass
class BipartiteGraph:
    """Left-regular bipartite graph; adjacency rows are sorted and distinct."""

    left_count: int
    right_count: int
    degree: int
    adjacency: np.ndarray  # (left_count, degree) int64, sorted within rows

    def validate(self) -> None:
        n, s = self.left_count, self.degree
        if self.adjacency.shape != (n, s):
            raise ValueError("adjacency must be left_count x degree")
        if n and (self.adjacency.min() < 0 or self.adjacency.max() >= self.right_count):
            raise ValueError("right-vertex id out of range")
        for j in range(n):
            row = self.adjacency[j]
            if np.any(np.diff(row) <= 0):
                raise ValueError(f"left vertex {j}: neighbors not sorted distinct")


def _check_left_ids(g: BipartiteGraph, c) -> list[int]:
    ids = sorted(int(x) for x in c)
    for x in ids:
        if not 0 <= x < g.left_count:
            raise ValueError(f"left id {x} out of range [0, {g.left_count})")
    return ids


def neighborhood(g: BipartiteGraph, c) -> set[int]:
    """Union of the adjacency lists of the left ids in c."""
    ids = _check_left_ids(g, c)
    out: set[int] = set()
    for x in ids:
        out.update(int(v) for v in g.adjacency[x])
    return out


@dataclass
class ExpansionResult:
    holds: bool
    witness: tuple[int, ...] | None


def verify_expansion(g: BipartiteGraph, k: int, eps: float) -> ExpansionResult:
    """Exhaustively check |Γ(C)| > (1-eps)·s·|C| for all C with 1 ≤ |C| ≤ k.

    Refuses (BudgetExceededError) when the subset count exceeds the budget
    of ten million.  Returns the first violating subset found, scanning
    sizes in increasing order and subsets in lexicographic order.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must be in (0, 1), got {eps}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    n, s = g.left_count, g.degree
    kmax = min(k, n)
    required = 0
    for j in range(1, kmax + 1):
        required += math.comb(n, j)
        if required > EXPANSION_BUDGET:
            raise BudgetExceededError(
                f"checking all subsets up to size {k} of {n} left vertices needs "
                f"more than {EXPANSION_BUDGET} subset evaluations ({required}+)"
            )
    neighbor_sets = [frozenset(int(v) for v in g.adjacency[j]) for j in range(n)]
    for size in range(1, kmax + 1):
        bound = (1.0 - eps) * s * size
        for subset in combinations(range(n), size):
            union: set[int] = set()
            for x in subset:
                union |= neighbor_sets[x]
            if not len(union) > bound:
                return ExpansionResult(holds=False, witness=subset)
    return ExpansionResult(holds=True, witness=None)


def _hopcroft_karp(adj: dict[int, tuple[int, ...]]) -> int:
    """Maximum matching size for left-to-right adjacency lists."""
    match_left: dict[int, int | None] = {u: None for u in adj}
    match_right: dict[int, int | None] = {}
    for vs in adj.values():
        for v in vs:
            match_right.setdefault(v, None)
    inf = math.inf
    dist: dict[int, float] = {}

    def bfs() -> bool:
        queue: deque[int] = deque()
        for u in adj:
            if match_left[u] is None:
                dist[u] = 0
                queue.append(u)
            else:
                dist[u] = inf
        reachable_free = inf
        while queue:
            u = queue.popleft()
            if dist[u] < reachable_free:
                for v in adj[u]:
                    w = match_right[v]
                    if w is None:
                        reachable_free = dist[u] + 1
                    elif dist[w] == inf:
                        dist[w] = dist[u] + 1
                        queue.append(w)
        return reachable_free != inf

    def dfs(u: int) -> bool:
        for v in adj[u]:
            w = match_right[v]
            if w is None or (dist[w] == dist[u] + 1 and dfs(w)):
                match_left[u] = v
                match_right[v] = u
                return True
        dist[u] = inf
        return False

    size = 0
    while bfs():
        for u in adj:
            if match_left[u] is None and dfs(u):
                size += 1
    return size


def max_matching_covers(g: BipartiteGraph, c) -> bool:
    """True iff some matching saturates every left vertex in c."""
    ids = _check_left_ids(g, c)
    if not ids:
        return True
    adj = {u: tuple(int(v) for v in g.adjacency[u]) for u in ids}
    return _hopcroft_karp(adj) == len(ids)


def estimate_magical_delta(
    n: int, m: int, s: int, k: int, trials: int, rng: Prng
) -> float:
    """Fraction of (fresh sketch graph, uniform k-subset) trials without coverage.

    Each trial draws an independent degree-s sketch on its own split stream
    plus a uniform k-subset of left vertices, then runs the matching check.
    This estimates the failure probability delta of Definition-2 style
    coverage; it samples subsets rather than quantifying over all of them.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    from .sketch import graph_sketch_new, sketch_to_graph

    failures = 0
    for t in range(trials):
        trial_rng = rng.split(t)
        g = sketch_to_graph(graph_sketch_new(n, m, s, trial_rng))
        subset = trial_rng.subset(n, k)
        if not max_matching_covers(g, subset):
            failures += 1
    return failures / trials
