"""Exact combinatorial subroutines.

Three oracles live here:

* ``solve_tsp`` - exact minimum tour cost over the depot plus a vertex set,
  via a subset dynamic program (bitmask Held-Karp, vectorised over subsets).
* ``solve_ptp`` - the follower's profitable tour problem: pick a subset of
  the offered customers and a depot-anchored tour maximising collected
  prizes minus tour cost.  Ties in the follower value are broken in favour
  of the leader (optimistic setting), lexicographically rather than by
  epsilon perturbation.
* ``solve_mckp`` - the multiple-choice knapsack used by the warm-start
  heuristic: one margin per accepted item, maximise the leader's take
  subject to a cap.

``brute_force_ptp`` re-solves the profitable tour problem by exhaustive
enumeration of subsets and permutations; it exists purely as an independent
check of ``solve_ptp`` and stays deliberately naive.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .tolerances import COST_TOL

# Subset DP over more than this many customers would need > 2^20 states.
MAX_DP_SIZE = 20
MAX_BRUTE_SIZE = 8


@dataclass(frozen=True)
class Route:
    """Depot-anchored tour.

    ``vertices`` is the closed sequence (0, v1, ..., vt, 0); the empty route
    is just (0,).  Customers appear at most once.
    """

    vertices: tuple[int, ...]

    def __post_init__(self):
        v = self.vertices
        if not v or v[0] != 0 or (len(v) > 1 and v[-1] != 0):
            raise ValueError(f"route must start and end at the depot: {v}")
        inner = v[1:-1] if len(v) > 1 else ()
        if 0 in inner or len(set(inner)) != len(inner):
            raise ValueError(f"repeated or depot-internal vertex in route {v}")

    @classmethod
    def empty(cls) -> "Route":
        return cls((0,))

    @classmethod
    def through(cls, customers: Sequence[int]) -> "Route":
        if not customers:
            return cls.empty()
        return cls((0, *customers, 0))

    @property
    def customers(self) -> tuple[int, ...]:
        return self.vertices[1:-1] if len(self.vertices) > 1 else ()

    @property
    def customer_set(self) -> frozenset[int]:
        return frozenset(self.customers)

    @property
    def arcs(self) -> tuple[tuple[int, int], ...]:
        v = self.vertices
        return tuple(zip(v[:-1], v[1:])) if len(v) > 1 else ()

    def cost(self, costs: np.ndarray) -> float:
        return float(sum(costs[i, j] for i, j in self.arcs))


@dataclass(frozen=True)
class PtpResult:
    """Follower response: net profit, chosen route, leader's share."""

    value: float
    route: Route
    leader_value: float

    @property
    def accepted(self) -> frozenset[int]:
        return self.route.customer_set


# ---------------------------------------------------------------------------
# Held-Karp machinery


def _popcounts(size: int) -> np.ndarray:
    return np.bitwise_count(np.arange(size, dtype=np.uint32))


def _held_karp(dist: np.ndarray, duration_cap: Optional[float] = None,
               return_dp: bool = False):
    """Subset DP over ``dist`` (index 0 = depot, 1..m = customers).

    Returns the array of optimal closed-tour costs indexed by customer
    bitmask (length 2^m); with ``return_dp`` also the path table
    dp[mask, j] = cheapest depot->...->j path covering exactly ``mask``.

    With a duration cap, states whose cost plus the direct return to the
    depot already exceed the cap are pruned; under the triangle inequality
    this is exact, because extending a path never shortens its best
    completion.  Capped entries of the tour array may therefore read +inf.
    """
    m = dist.shape[0] - 1
    if m == 0:
        tours = np.zeros(1)
        return (tours, np.zeros((1, 0))) if return_dp else tours
    size = 1 << m
    inner = dist[1:, 1:]
    ret = dist[1:, 0]
    dp = np.full((size, m), np.inf)
    dp[1 << np.arange(m), np.arange(m)] = dist[0, 1:]
    counts = _popcounts(size)
    masks_by_count = [np.nonzero(counts == c)[0] for c in range(m + 1)]
    for count in range(1, m):
        layer = masks_by_count[count]
        if duration_cap is not None:
            block = dp[layer]
            dp[layer] = np.where(block + ret[None, :] > duration_cap + COST_TOL,
                                 np.inf, block)
        for j in range(m):
            rows = layer[(layer >> j) & 1 == 1]
            base = dp[rows, j]
            ok = np.isfinite(base)
            rows, base = rows[ok], base[ok]
            if rows.size == 0:
                continue
            for t in range(m):
                if t == j:
                    continue
                free = (rows >> t) & 1 == 0
                src = rows[free]
                if src.size == 0:
                    continue
                cand = base[free] + inner[j, t]
                tgt = src | (1 << t)
                cur = dp[tgt, t]
                better = cand < cur
                dp[tgt[better], t] = cand[better]
    tours = (dp + ret[None, :]).min(axis=1)
    tours[0] = 0.0
    if duration_cap is not None:
        tours[tours > duration_cap + COST_TOL] = np.inf
    return (tours, dp) if return_dp else tours


def _subset_sums(values: np.ndarray) -> np.ndarray:
    """sums[mask] = sum of values[j] over bits j set in mask."""
    m = len(values)
    sums = np.zeros(1 << m)
    for j in range(m):
        step = 1 << j
        view = sums.reshape(-1, 2 * step)
        view[:, step:] += values[j]
    return sums


class TspTable:
    """Optimal tour costs for every subset of a fixed customer ground set.

    One Held-Karp pass per carrier; lookups by global customer bitmask
    (bit i-1 <-> customer i).  Used to amortise the many small TSP/PTP
    evaluations inside separation and the brute-force bilevel oracle.
    """

    def __init__(self, costs: np.ndarray, n: int):
        if n > MAX_DP_SIZE:
            raise ValueError(f"subset table over {n} customers exceeds "
                             f"{MAX_DP_SIZE}")
        self.n = n
        self.costs = costs
        self.tours = _held_karp(costs[:n + 1, :n + 1])

    def tour_cost(self, mask: int) -> float:
        return float(self.tours[mask])

    def tour_cost_of(self, vertex_set: Iterable[int]) -> float:
        return float(self.tours[mask_of(vertex_set)])


def mask_of(vertex_set: Iterable[int]) -> int:
    mask = 0
    for i in vertex_set:
        mask |= 1 << (i - 1)
    return mask


def set_of(mask: int) -> frozenset[int]:
    out = []
    i = 1
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return frozenset(out)


def solve_tsp(costs: np.ndarray, vertex_set: Iterable[int]) -> float:
    """Exact minimum closed-tour cost over the depot plus ``vertex_set``."""
    verts = sorted(set(vertex_set))
    if not verts:
        return 0.0
    if len(verts) > MAX_DP_SIZE:
        raise ValueError(f"vertex set of size {len(verts)} exceeds DP bound "
                         f"{MAX_DP_SIZE}")
    sub = costs[np.ix_([0] + verts, [0] + verts)]
    return float(_held_karp(sub)[-1])


def _lex_smallest_tour(dist: np.ndarray, verts: list[int],
                       target: float) -> tuple[int, ...]:
    """Lexicographically smallest vertex sequence among optimal tours.

    ``dist`` is the (m+1)x(m+1) submatrix over [depot] + verts and
    ``target`` its optimal tour cost.  Completion costs come from the
    Held-Karp table on the transposed matrix: dpT[mask, j] is the cheapest
    j -> ... -> depot path covering ``mask``.
    """
    m = len(verts)
    _, dpT = _held_karp(np.ascontiguousarray(dist.T), return_dp=True)
    seq = [0]
    cur = 0  # local index into dist (0 = depot)
    remaining = (1 << m) - 1
    budget = target
    for _ in range(m):
        for j in range(m):
            if not (remaining >> j) & 1:
                continue
            step = dist[cur, j + 1]
            if step + dpT[remaining, j] <= budget + COST_TOL:
                seq.append(verts[j])
                budget -= step
                remaining &= ~(1 << j)
                cur = j + 1
                break
        else:  # numeric fallback; should not happen
            raise RuntimeError("tour reconstruction failed")
    seq.append(0)
    return tuple(seq)


# ---------------------------------------------------------------------------
# profitable tour problem


def _argmax_lex(values: np.ndarray, leader: np.ndarray) -> int:
    """Lexicographic argmax over (value, leader value) with COST_TOL ties.

    Remaining ties go to the smallest index, i.e. the smallest subset
    bitmask under ascending enumeration.  Entries with +-inf value are
    skipped (capped-out subsets); index 0 (the empty subset, value 0) is
    always present.
    """
    finite = np.isfinite(values)
    vmax = values[finite].max()
    cand = finite & (values >= vmax - COST_TOL)
    lmax = leader[cand].max()
    cand &= leader >= lmax - COST_TOL
    return int(np.flatnonzero(cand)[0])


def solve_ptp(costs: np.ndarray, prizes: np.ndarray, offered: Iterable[int],
              duration_cap: Optional[float] = None,
              leader_prizes: Optional[np.ndarray] = None,
              tsp_table: Optional[TspTable] = None) -> PtpResult:
    """Optimal follower response over the offered customer set.

    ``prizes`` and ``leader_prizes`` are vertex-indexed vectors; entries
    outside ``offered`` are ignored.  The search runs over subsets of the
    offered set only, which is exact because a route never visits an
    unaccepted vertex.  Among value-maximal subsets the one with the larger
    leader share wins (optimistic rule); among those, the smallest subset
    bitmask, and the returned tour is the lexicographically smallest optimal
    sequence -- a determinism convention of this implementation.

    A precomputed ``tsp_table`` (uncapped tour costs over the full customer
    set) replaces the per-call subset DP; results are identical.
    """
    off = sorted(set(offered))
    m = len(off)
    if m > MAX_DP_SIZE:
        raise ValueError(f"offered set of size {m} exceeds DP bound {MAX_DP_SIZE}")
    if m == 0:
        return PtpResult(0.0, Route.empty(), 0.0)

    prize = np.asarray(prizes, dtype=float)[off]
    leader = (np.zeros(m) if leader_prizes is None
              else np.asarray(leader_prizes, dtype=float)[off])
    prize_sums = _subset_sums(prize)
    leader_sums = _subset_sums(leader)

    if tsp_table is not None:
        globs = np.zeros(1 << m, dtype=np.int64)
        for j in range(m):
            step = 1 << j
            view = globs.reshape(-1, 2 * step)
            view[:, step:] |= 1 << (off[j] - 1)
        tours = tsp_table.tours[globs]
        if duration_cap is not None:
            tours = np.where(tours > duration_cap + COST_TOL, np.inf, tours)
    else:
        sub = costs[np.ix_([0] + off, [0] + off)]
        tours = _held_karp(sub, duration_cap=duration_cap)

    values = prize_sums - tours
    best = _argmax_lex(values, leader_sums)
    if best == 0:
        return PtpResult(0.0, Route.empty(), 0.0)

    verts = [off[j] for j in range(m) if (best >> j) & 1]
    dist = costs[np.ix_([0] + verts, [0] + verts)]
    target = float(tours[best])
    seq = _lex_smallest_tour(dist, verts, target)
    return PtpResult(float(values[best]), Route(seq), float(leader_sums[best]))


def brute_force_ptp(costs: np.ndarray, prizes: np.ndarray,
                    offered: Iterable[int],
                    duration_cap: Optional[float] = None,
                    leader_prizes: Optional[np.ndarray] = None) -> PtpResult:
    """Exhaustive profitable-tour oracle: all subsets, all visiting orders.

    Same value contract and optimistic tie-breaking as :func:`solve_ptp`;
    kept free of any shared DP machinery so it can serve as an independent
    check.  Enumeration order (subsets by ascending bitmask over the sorted
    offered list, permutations lexicographically) realises the same
    deterministic tie conventions.
    """
    off = sorted(set(offered))
    m = len(off)
    if m > MAX_BRUTE_SIZE:
        raise ValueError(f"offered set of size {m} exceeds brute-force bound "
                         f"{MAX_BRUTE_SIZE}")
    prizes = np.asarray(prizes, dtype=float)
    leader = (None if leader_prizes is None
              else np.asarray(leader_prizes, dtype=float))
    best_v, best_l, best_route = 0.0, 0.0, Route.empty()
    for mask in range(1, 1 << m):
        subset = [off[j] for j in range(m) if (mask >> j) & 1]
        gain = float(prizes[subset].sum())
        lead = 0.0 if leader is None else float(leader[subset].sum())
        for perm in itertools.permutations(subset):
            cost = costs[0, perm[0]] + costs[perm[-1], 0]
            cost += sum(costs[perm[t], perm[t + 1]]
                        for t in range(len(perm) - 1))
            if duration_cap is not None and cost > duration_cap + COST_TOL:
                continue
            v = gain - cost
            if v > best_v + COST_TOL or (
                    v > best_v - COST_TOL and lead > best_l + COST_TOL):
                best_v, best_l, best_route = v, lead, Route((0, *perm, 0))
    return PtpResult(best_v, best_route, best_l)


# ---------------------------------------------------------------------------
# multiple-choice knapsack


def solve_mckp(groups: Sequence[Sequence[tuple[float, float]]],
               cap: float) -> tuple[list[float], float]:
    """Pick one (margin, profit) option per group maximising total profit <= cap.

    Profit doubles as weight here, so the state space is just the set of
    achievable profit sums; exact for float profits.  Returns the chosen
    margin per group and the optimal total.  Raises on an empty group or
    when no combination fits under the cap.
    """
    for g, options in enumerate(groups):
        if not options:
            raise ValueError(f"empty option group at position {g}")
    sums = np.zeros(1)
    trail: list[np.ndarray] = []
    for options in groups:
        vals = np.asarray([p for _, p in options], dtype=float)
        grid = (sums[:, None] + vals[None, :]).ravel()
        grid = grid[grid <= cap + COST_TOL]
        if grid.size == 0:
            raise ValueError("no margin choice fits under the cap")
        trail.append(sums)
        sums = np.unique(grid)
    total = float(sums.max())
    # backtrack: first matching option per group, walking groups in reverse
    chosen: list[float] = [0.0] * len(groups)
    remaining = total
    for g in range(len(groups) - 1, -1, -1):
        prev = trail[g]
        for margin, profit in groups[g]:
            need = remaining - profit
            pos = np.searchsorted(prev, need - COST_TOL)
            if pos < prev.size and abs(prev[pos] - need) <= COST_TOL:
                chosen[g] = margin
                remaining = float(prev[pos])
                break
        else:
            raise RuntimeError("knapsack backtracking failed")
    return chosen, total


# ---------------------------------------------------------------------------
# route enumeration (test instrument for the full-enumeration LPs)


def all_routes(n: int, max_n: int = 6) -> list[Route]:
    """Every depot-anchored route over customers 1..n, including the empty one.

    Distinct visiting orders are distinct routes (directed arc sets), so the
    count grows as sum_s C(n,s) s!; bounded to small n by ``max_n``.
    """
    if n > max_n:
        raise ValueError(f"route enumeration over {n} customers exceeds {max_n}")
    routes = [Route.empty()]
    for size in range(1, n + 1):
        for subset in itertools.combinations(range(1, n + 1), size):
            for perm in itertools.permutations(subset):
                routes.append(Route((0, *perm, 0)))
    return routes
