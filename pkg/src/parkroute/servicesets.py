"""Service-set catalog: feasible customer sets, exact walking-tour costs, and
the parked-customer variable reduction.

A service set is a group of customers served in one walking loop from a parked
vehicle.  The catalog enumerates every set that fits the carrier capacity
(count, weight, volume); walking costs are computed lazily and memoized.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from itertools import combinations, permutations
from pathlib import Path

import numpy as np

from .errors import InfeasibleInstanceError, ResourceLimitError, UnsupportedError
from .instance import Instance
from .tsp import held_karp_cycle

MAX_WALK_SET = 12
DEFAULT_PAIR_CAP = 20_000_000


@dataclass(frozen=True, order=True)
class ServiceSet:
    """A nonempty, sorted, duplicate-free customer group within capacity."""

    members: tuple[int, ...]
    total_weight: float = 0.0
    total_volume: float = 0.0

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class ReductionReport:
    removed_pairs: int
    total_pairs: int

    @property
    def percent(self) -> float:
        return 100.0 * self.removed_pairs / self.total_pairs if self.total_pairs else 0.0


@dataclass
class ServiceSetCatalog:
    """Enumerated sets in lexicographic (size, members) order plus pair
    admissibility after the reduction that bans serving a multi-customer set
    from the location of one of its own members.

    Walk-cost memoization uses a plain dict; concurrent reads/inserts of
    immutable values are safe under the GIL and results are thread-count
    independent.
    """

    inst: Instance
    sets: tuple[ServiceSet, ...]
    reduced: bool = False
    reduction: ReductionReport | None = None
    _index: dict[tuple[int, ...], int] = field(default_factory=dict, repr=False)
    _member_sets: dict[int, tuple[int, ...]] = field(default_factory=dict, repr=False)
    _walk: dict[tuple[int, int], tuple[float, tuple[int, ...]]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self._index:
            self._index = {s.members: j for j, s in enumerate(self.sets)}
            by_member: dict[int, list[int]] = {}
            for j, s in enumerate(self.sets):
                for c in s.members:
                    by_member.setdefault(c, []).append(j)
            self._member_sets = {c: tuple(js) for c, js in by_member.items()}

    def index_of(self, members) -> int:
        return self._index[tuple(sorted(members))]

    def sets_containing(self, customer: int) -> tuple[int, ...]:
        return self._member_sets.get(customer, ())

    def admissible(self, parking: int, j: int) -> bool:
        if not self.reduced:
            return True
        s = self.sets[j]
        return not (s.size >= 2 and parking in s.members)

    def pair_count(self) -> int:
        return len(self.inst.spots) * len(self.sets)

    def admissible_pair_count(self) -> int:
        return self.pair_count() - self.removed_pair_count()

    def removed_pair_count(self) -> int:
        if not self.reduced:
            return 0
        spots = set(self.inst.spots)
        return sum(
            1
            for s in self.sets
            if s.size >= 2
            for c in s.members
            if c in spots
        )

    def precompute_walk_costs(self, parkings=None, threads: int = 1) -> None:
        """Opt-in eager fill of the walk-cost memo (the lazy default keeps the
        pair count from dominating memory).  Independent per parking location,
        so extra threads are safe: entries are immutable and identical however
        the work is scheduled."""
        parkings = list(parkings) if parkings is not None else list(self.inst.spots)

        def fill(i: int) -> None:
            for j in range(len(self.sets)):
                if self.admissible(i, j):
                    self.walk_entry(i, j)

        if threads > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=threads) as pool:
                list(pool.map(fill, parkings))
        else:
            for i in parkings:
                fill(i)

    def walk_cost(self, parking: int, j: int) -> float:
        return self.walk_entry(parking, j)[0]

    def walk_order(self, parking: int, j: int) -> tuple[int, ...]:
        return self.walk_entry(parking, j)[1]

    def walk_entry(self, parking: int, j: int) -> tuple[float, tuple[int, ...]]:
        key = (parking, j)
        hit = self._walk.get(key)
        if hit is None:
            hit = walk_tour(self.inst, parking, self.sets[j].members)
            self._walk[key] = hit
        return hit


def enumerate_catalog(
    inst: Instance,
    customers=None,
    max_pairs: int = DEFAULT_PAIR_CAP,
) -> ServiceSetCatalog:
    """All customer subsets satisfying every active capacity, smallest first.

    ``customers`` restricts enumeration to a sub-universe (used by the per-spot
    set assignment).  Raises when the (parking, set) pair count would exceed
    ``max_pairs``; at that point use the heuristic pipeline instead.
    """
    pool = sorted(customers) if customers is not None else list(inst.customers)
    if not pool:
        raise InfeasibleInstanceError("no customers to enumerate")
    q = inst.capacity_count
    if q is None and inst.capacity_weight is None and inst.capacity_volume is None:
        raise UnsupportedError("need a package-count, weight, or volume capacity to bound the catalog")
    qmax = min(q if q is not None else len(pool), len(pool))

    weights = inst.weights
    volumes = inst.volumes
    cap_w = inst.capacity_weight
    cap_v = inst.capacity_volume

    for c in pool:
        if cap_w is not None and weights is not None and weights[c] > cap_w + 1e-9:
            raise InfeasibleInstanceError(f"package for customer {c} exceeds the weight capacity alone")
        if cap_v is not None and volumes is not None and volumes[c] > cap_v + 1e-9:
            raise InfeasibleInstanceError(f"package for customer {c} exceeds the volume capacity alone")

    # size bound for the pair cap uses the count-only closed form first
    if cap_w is None and cap_v is None:
        projected = len(inst.spots) * count_sets(len(pool), qmax)
        if projected > max_pairs:
            raise ResourceLimitError(
                f"catalog would hold {projected} (parking, set) pairs; cap is {max_pairs}. "
                "Use the heuristic solver for instances of this size."
            )

    sets: list[ServiceSet] = []
    for size in range(1, qmax + 1):
        for members in combinations(pool, size):
            tw = float(sum(weights[c] for c in members)) if weights is not None else 0.0
            tv = float(sum(volumes[c] for c in members)) if volumes is not None else 0.0
            if cap_w is not None and tw > cap_w + 1e-9:
                continue
            if cap_v is not None and tv > cap_v + 1e-9:
                continue
            sets.append(ServiceSet(members, tw, tv))
    cat = ServiceSetCatalog(inst=inst, sets=tuple(sets))
    if cat.pair_count() > max_pairs:
        raise ResourceLimitError(
            f"catalog holds {cat.pair_count()} (parking, set) pairs; cap is {max_pairs}. "
            "Use the heuristic solver for instances of this size."
        )
    return cat


def reduce_catalog(cat: ServiceSetCatalog) -> ServiceSetCatalog:
    """Ban every (parking i, set) pair where i is a member of a set of size
    >= 2: serving the parked customer alone first is never worse, so the pairs
    can be dropped without losing any optimal value."""
    reduced = ServiceSetCatalog(inst=cat.inst, sets=cat.sets, reduced=True)
    removed = reduced.removed_pair_count()
    reduced.reduction = ReductionReport(removed_pairs=removed, total_pairs=cat.pair_count())
    return reduced


# ---------------------------------------------------------------------------
# walking tours

def walk_time(inst: Instance, parking: int, members) -> float:
    """Minimum walking-loop time from the parking spot through all members and
    back.  Exact for up to MAX_WALK_SET customers."""
    return walk_tour(inst, parking, members)[0]


def walk_tour(inst: Instance, parking: int, members) -> tuple[float, tuple[int, ...]]:
    """Exact minimum walking loop plus its service order.

    Ties break toward the lexicographically smallest customer sequence so that
    decoded solutions are deterministic.
    """
    ms = tuple(sorted(members))
    m = len(ms)
    if m == 0:
        raise UnsupportedError("walking tour of an empty set")
    if m > MAX_WALK_SET:
        raise UnsupportedError(f"walking sets larger than {MAX_WALK_SET} are unsupported, got {m}")
    W = inst.walk
    if m == 1:
        c = ms[0]
        cost = 0.0 if c == parking else float(W[parking, c] + W[c, parking])
        return cost, ms
    if m == 2:
        a, b = ms
        c1 = float(W[parking, a] + W[a, b] + W[b, parking])
        c2 = float(W[parking, b] + W[b, a] + W[a, parking])
        return (c1, ms) if c1 <= c2 + 1e-12 else (c2, (b, a))
    if m == 3:
        best = None
        for perm in permutations(ms):
            cost = float(W[parking, perm[0]] + W[perm[0], perm[1]] + W[perm[1], perm[2]] + W[perm[2], parking])
            if best is None or cost < best[0] - 1e-12:
                best = (cost, perm)
        return best
    local = np.empty((m + 1, m + 1))
    ids = (parking,) + ms
    for a in range(m + 1):
        local[a] = W[ids[a], list(ids)]
    cost, order = held_karp_cycle(local)
    return cost, tuple(ms[v - 1] for v in order)


# ---------------------------------------------------------------------------
# closed-form accounting (count capacity only)

def count_sets(n: int, q: int) -> int:
    """Number of service sets with at most q of n packages."""
    return sum(math.comb(n, s) for s in range(1, q + 1))


def pair_count(n: int, q: int) -> int:
    """Total (parking, set) pairs when every customer location is a spot."""
    return n * count_sets(n, q)


def removed_pair_count(n: int, q: int) -> int:
    """Pairs dropped by the reduction: per spot i, the sets of size >= 2 that
    contain i."""
    return n * sum(math.comb(n - 1, s - 1) for s in range(2, q + 1))


def reduced_pair_count(n: int, q: int) -> int:
    return pair_count(n, q) - removed_pair_count(n, q)


# ---------------------------------------------------------------------------
# optional export

def dump_catalog_csv(cat: ServiceSetCatalog, path: str | Path, parkings=None) -> None:
    """Write set_id, members, and (on demand) the walking cost per parking spot."""
    parkings = list(parkings) if parkings is not None else []
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["set_id", "members"] + [f"cost_from_{i}" for i in parkings])
        for j, s in enumerate(cat.sets):
            row = [j, "|".join(map(str, s.members))]
            row += [f"{cat.walk_cost(i, j):.6f}" for i in parkings]
            writer.writerow(row)
