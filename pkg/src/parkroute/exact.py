"""Desk-scale exact solver, LP-free.

Metric driving matrices (the usual case) are solved by a bitmask dynamic
program over (unserved customers, last parking spot) whose transitions pick
the next spot and the customer bundle walked from it; under the triangle
inequality revisits and pass-through stops never improve, so the state space
is exact.  Non-metric inputs or more than 13 customers fall back to a
depth-first branch-and-bound over parking sequences whose lower bound
combines the unavoidable drive legs with a per-customer share of the cheapest
admissible walk-plus-park increment, which stays admissible on any input.

Each bundle's optimal split into catalog sets comes from a per-spot subset DP
shared by both paths.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleInstanceError, ResourceLimitError
from .instance import Instance
from .model import Solution, assemble_solution, structural_violations
from .servicesets import ServiceSetCatalog

_EPS = 1e-9

MAX_EXACT_CUSTOMERS = 18
DP_MAX_CUSTOMERS = 13


class _ReconstructionTie(Exception):
    """Raised when tie-filtering leaves the DP reconstruction without a
    revisit-free continuation; the solver then reruns as a sequence search."""


@dataclass(frozen=True)
class SearchBudget:
    max_nodes: int = 10_000_000
    max_seconds: float = 300.0
    require_proof: bool = True

    def __post_init__(self):
        if self.max_nodes <= 0 or self.max_seconds <= 0:
            raise ValueError("budget limits must be positive")


@dataclass(frozen=True)
class SearchOptions:
    """Structural restrictions that provably preserve the optimal value.

    require_self_singleton: when parking at a customer location, that customer
    is served alone from there (matches the ``vi.claim4``/``vi.corollary1``
    model rows).
    require_served_stop: every stop serves at least one set (``vi.claim5``);
    ``None`` enables pass-through stops only when the drive matrix violates
    the triangle inequality, the one case where they can pay off.
    enforce_stops_leq_sets: reject candidates parking more often than the
    number of sets served (``vi.corollary3``).
    """

    require_self_singleton: bool = False
    require_served_stop: bool | None = None
    enforce_stops_leq_sets: bool = False


@dataclass
class ExactResult:
    solution: Solution | None
    status: str  # "optimal" | "feasible" | "timeout"
    bound: float
    value: float | None
    nodes: int

    @property
    def proof(self) -> bool:
        return self.status == "optimal"


class _Control:
    def __init__(self, budget: SearchBudget):
        self.max_nodes = budget.max_nodes
        self.deadline = time.monotonic() + budget.max_seconds
        self.nodes = 0
        self.stopped = False
        self.abandoned_lb = float("inf")
        self.best_value = float("inf")
        self.best_key: tuple | None = None
        self.best_state: tuple | None = None  # (stops, bundles) or ("warm", solution)
        self.lock = threading.Lock()

    def tick(self) -> bool:
        self.nodes += 1
        if self.nodes >= self.max_nodes:
            self.stopped = True
        elif self.nodes % 256 == 0 and time.monotonic() > self.deadline:
            self.stopped = True
        return self.stopped

    def abandon(self, lb: float) -> None:
        with self.lock:
            if lb < self.abandoned_lb:
                self.abandoned_lb = lb

    def offer(self, value: float, key: tuple, state) -> None:
        with self.lock:
            if value < self.best_value - _EPS:
                self.best_value, self.best_key, self.best_state = value, key, state
            elif value <= self.best_value + _EPS and (
                self.best_state is None or self.best_key is None or key < self.best_key
            ):
                self.best_value = min(self.best_value, value)
                self.best_key, self.best_state = key, state

    def set_value_bound(self, value: float) -> None:
        """Prune with a known feasible value without adopting its solution."""
        with self.lock:
            if value < self.best_value - _EPS:
                self.best_value = value
                self.best_key = None
                self.best_state = None


class _Searcher:
    def __init__(self, inst: Instance, cat: ServiceSetCatalog, options: SearchOptions):
        n = inst.n
        if n > MAX_EXACT_CUSTOMERS:
            raise ResourceLimitError(
                f"exact search supports up to {MAX_EXACT_CUSTOMERS} customers, got {n}"
            )
        self.inst = inst
        self.cat = cat
        self.options = options
        self.n = n
        self.full = (1 << n) - 1
        self.spots = inst.spots
        self.D = inst.drive
        self.P = inst.park_time

        if not self.spots:
            raise InfeasibleInstanceError("no parking locations: empty catalog coverage")
        covered = set()
        for j, s in enumerate(cat.sets):
            if any(cat.admissible(i, j) for i in self.spots):
                covered.update(s.members)
        missing = [c for c in inst.customers if c not in covered]
        if missing:
            raise InfeasibleInstanceError(f"customers {missing} appear in no admissible set")

        # candidate sets grouped by their smallest member, pre-filtered per spot
        by_min: dict[int, list[tuple[int, int]]] = {c: [] for c in inst.customers}
        for j, s in enumerate(cat.sets):
            mask = 0
            for c in s.members:
                mask |= 1 << (c - 1)
            by_min[s.members[0]].append((mask, j))
        self.sets_by_min = by_min

        from .instance import _triangle_stats

        self.metric_drive = _triangle_stats(inst.drive)[0] == 0
        if options.require_served_stop is None:
            self.allow_empty = not self.metric_drive
        else:
            self.allow_empty = not options.require_served_stop

        self.ssa: dict[int, object] = {}
        for i in self.spots:
            self.ssa[i] = self._build_ssa(i)
        self.dsum = None  # built on demand by the branch-and-bound path

    def _admissible_cands(self, i: int):
        cands: dict[int, list[tuple[int, float]]] = {}
        for c, pairs in self.sets_by_min.items():
            row = []
            for mask, j in pairs:
                if self.cat.admissible(i, j):
                    row.append((mask, self.cat.walk_cost(i, j)))
            cands[c] = row
        return cands

    def _build_ssa(self, i: int):
        """ssa[mask] = cheapest split of the customer mask into admissible sets
        walked from spot i.  Dense table for small n, memoized dict otherwise."""
        cands = self._admissible_cands(i)
        by_bit = [cands.get(b + 1, ()) for b in range(self.n)]
        if self.n <= DP_MAX_CUSTOMERS:
            size = self.full + 1
            table = np.full(size, np.inf)
            table[0] = 0.0
            for mask in range(1, size):
                b0 = (mask & -mask).bit_length() - 1
                best = np.inf
                for smask, cost in by_bit[b0]:
                    if smask & mask == smask:
                        cand = cost + table[mask ^ smask]
                        if cand < best:
                            best = cand
                table[mask] = best
            return table
        memo = {0: 0.0}

        def ssa(mask: int) -> float:
            hit = memo.get(mask)
            if hit is not None:
                return hit
            b0 = (mask & -mask).bit_length() - 1
            best = float("inf")
            for smask, cost in by_bit[b0]:
                if smask & mask == smask:
                    cand = cost + ssa(mask ^ smask)
                    if cand < best:
                        best = cand
            memo[mask] = best
            return best

        class _Lazy:
            __slots__ = ()

            def __getitem__(_, mask):
                return ssa(mask)

        return _Lazy()

    def build_bound_tables(self):
        if self.dsum is not None:
            return
        n = self.n
        delta = np.full(n + 1, np.inf)
        for i in self.spots:
            p_share = self.P[i] / n
            for c in self.inst.customers:
                for j in self.cat.sets_containing(c):
                    if self.cat.admissible(i, j):
                        s = self.cat.sets[j]
                        val = self.cat.walk_cost(i, j) / s.size + p_share
                        if val < delta[c]:
                            delta[c] = val
        dsum = np.zeros(self.full + 1)
        for mask in range(1, self.full + 1):
            b0 = (mask & -mask).bit_length() - 1
            dsum[mask] = dsum[mask & (mask - 1)] + delta[b0 + 1]
        self.dsum = dsum

    # -- search -------------------------------------------------------------

    def _consider(self, ctl: _Control, g_close: float, stops: list[int], bundles: list[int]):
        if self.options.enforce_stops_leq_sets:
            n_sets = sum(
                len(self._split_bundle(i, a)) for i, a in zip(stops, bundles) if a
            )
            if len(stops) > n_sets:
                return
        ctl.offer(g_close, (len(stops), tuple(stops)), (tuple(stops), tuple(bundles)))

    # -- dynamic program (metric driving times) ------------------------------

    def solve_dp(self) -> tuple[float, tuple[int, ...], tuple[int, ...], int]:
        """Exact optimum via a completion DP: B[mask][j] is the cheapest way to
        serve the customer mask and return to the depot starting parked at
        spot j.  Valid because with metric driving times neither revisiting a
        spot nor parking without serving can improve a solution.

        Returns (value-without-load, stops, bundles, states)."""
        S = self.spots
        m = len(S)
        n = self.n
        full = self.full
        D = self.inst.drive
        size = full + 1
        force = self.options.require_self_singleton
        jbits = [1 << (j - 1) for j in S]
        ssa = [self.ssa[j] for j in S]
        park = [float(self.P[j]) for j in S]
        d_home = np.array([D[j, 0] for j in S])
        d_spot = D[np.ix_(S, S)]
        d_depot = np.array([D[0, j] for j in S])

        B = np.empty((size, m))
        Qp = np.empty((size, m))  # park + bundle + completion, before arrival leg
        B[0] = d_home
        inf = float("inf")
        for mask in range(1, size):
            row = Qp[mask]
            for sj in range(m):
                jb = jbits[sj]
                if force and not (mask & jb):
                    row[sj] = inf
                    continue
                t = ssa[sj]
                Bcol = B[:, sj]
                best = inf
                A = mask
                if force:
                    rest = mask ^ jb
                    A = rest
                    w = t[0]
                    v = w + Bcol[rest]  # bundle == {j}
                    if v < best:
                        best = v
                    while A:
                        w = t[A]
                        if w < inf:
                            v = w + Bcol[mask ^ (A | jb)]
                            if v < best:
                                best = v
                        A = (A - 1) & rest
                else:
                    while A:
                        w = t[A]
                        if w < inf:
                            v = w + Bcol[mask ^ A]
                            if v < best:
                                best = v
                        A = (A - 1) & mask
                row[sj] = best + park[sj]
            B[mask] = (d_spot + row[None, :]).min(axis=1)
        opt = float((d_depot + Qp[full]).min())

        stops, bundles = self._dp_reconstruct(B, Qp, d_depot, d_spot, jbits, ssa, park)
        return opt, tuple(stops), tuple(bundles), size * m

    def _dp_transitions(self, mask: int, arrival: np.ndarray, B, jbits, ssa, park):
        force = self.options.require_self_singleton
        inf = float("inf")
        for sj in range(len(self.spots)):
            jb = jbits[sj]
            base = arrival[sj] + park[sj]
            t = ssa[sj]
            Bcol = B[:, sj]
            if force:
                if not (mask & jb):
                    continue
                rest = mask ^ jb
                yield sj, jb, base + t[0] + Bcol[rest]
                A = rest
                while A:
                    w = t[A]
                    if w < inf:
                        yield sj, A | jb, base + w + Bcol[mask ^ (A | jb)]
                    A = (A - 1) & rest
            else:
                A = mask
                while A:
                    w = t[A]
                    if w < inf:
                        yield sj, A, base + w + Bcol[mask ^ A]
                    A = (A - 1) & mask

    def _dp_reconstruct(self, B, Qp, d_depot, d_spot, jbits, ssa, park):
        """Greedy front construction of the canonical optimal solution:
        value first, then fewest stops, then the lexicographically smallest
        stop sequence (bundles canonicalized by smallest bit mask)."""
        S = self.spots
        cnt_memo: dict[tuple[int, int], int] = {}

        def cnt(mask: int, si: int) -> int:
            if mask == 0:
                return 0
            key = (mask, si)
            hit = cnt_memo.get(key)
            if hit is not None:
                return hit
            target = B[mask, si]
            best = len(S) + self.n
            if len(cnt_memo) < 200_000:
                for sj, A, v in self._dp_transitions(mask, d_spot[si], B, jbits, ssa, park):
                    if v <= target + _EPS:
                        c = 1 + cnt(mask ^ A, sj)
                        if c < best:
                            best = c
            cnt_memo[key] = best
            return best

        stops: list[int] = []
        bundles: list[int] = []
        mask = self.full
        arrival = d_depot
        target = float((d_depot + Qp[self.full]).min())
        visited = 0
        while mask:
            choices = []
            for sj, A, v in self._dp_transitions(mask, arrival, B, jbits, ssa, park):
                if v <= target + _EPS and not (visited >> sj & 1):
                    choices.append((1 + cnt(mask ^ A, sj), S[sj], A, sj, v))
            if not choices:
                # every optimal continuation would revisit a spot: a tie-only
                # corner case; the caller falls back to the sequence search
                raise _ReconstructionTie
            _, j, A, sj, _ = min(choices)
            stops.append(j)
            bundles.append(A)
            visited |= 1 << sj
            mask ^= A
            arrival = d_spot[sj]
            if mask:
                target = float(B[mask, sj])
        return stops, bundles

    # -- branch and bound (any input) ----------------------------------------

    def expand(self, ctl: _Control, served: int, visited: int, loc: int, g: float,
               stops: list[int], bundles: list[int], node_lb: float):
        if ctl.stopped or ctl.tick():
            ctl.abandon(node_lb)
            return
        U = self.full & ~served
        D = self.D
        kids = []
        for bi, i in enumerate(self.spots):
            if visited >> bi & 1:
                continue
            ibit = 1 << (i - 1)
            force_self = self.options.require_self_singleton
            if force_self and not (U & ibit):
                continue  # parked customer already served elsewhere
            arrive = g + D[loc, i] + self.P[i]
            vis2 = visited | (1 << bi)
            tail_leg = np.inf
            tail_home = np.inf
            for bk, k in enumerate(self.spots):
                if not (vis2 >> bk & 1):
                    if D[i, k] < tail_leg:
                        tail_leg = D[i, k]
                    if D[k, 0] < tail_home:
                        tail_home = D[k, 0]
            ssa_i = self.ssa[i]
            A = U
            while A:
                if force_self and not (A & ibit):
                    A = (A - 1) & U
                    continue
                walk = ssa_i[A ^ ibit] if force_self else ssa_i[A]
                if walk < np.inf:
                    cg = arrive + walk
                    rem = U & ~A
                    if rem == 0:
                        cand = cg + D[i, 0]
                        if cand <= ctl.best_value + _EPS:
                            self._consider(ctl, cand, stops + [i], bundles + [A])
                    else:
                        lb = cg + self.dsum[rem] + tail_leg + tail_home
                        if lb <= ctl.best_value + _EPS:
                            kids.append((lb, bi, i, A, cg))
                A = (A - 1) & U
            if self.allow_empty and U:
                lb = arrive + self.dsum[U] + tail_leg + tail_home
                if lb <= ctl.best_value + _EPS:
                    kids.append((lb, bi, i, 0, arrive))
        kids.sort(key=lambda t: (t[0], t[2], t[3]))
        for lb, bi, i, A, cg in kids:
            if ctl.stopped:
                ctl.abandon(lb)
                continue
            if lb > ctl.best_value + _EPS:
                continue
            self.expand(
                ctl, served | A, visited | (1 << bi), i, cg,
                stops + [i], bundles + [A], lb,
            )

    # -- reconstruction -----------------------------------------------------

    def _split_bundle(self, i: int, mask: int) -> list[int]:
        """Deterministic optimal split of a bundle into catalog set indices."""
        ssa_i = self.ssa[i]
        force_self = self.options.require_self_singleton
        parts: list[int] = []
        ibit = 1 << (i - 1)
        if force_self and mask & ibit:
            parts.append(self.cat.index_of((i,)))
            mask ^= ibit
        while mask:
            b0 = (mask & -mask).bit_length() - 1
            target = ssa_i[mask]
            chosen = None
            for smask, j in self.sets_by_min[b0 + 1]:
                if smask & mask == smask and self.cat.admissible(i, j):
                    if self.cat.walk_cost(i, j) + ssa_i[mask ^ smask] <= target + 1e-9:
                        chosen = (smask, j)
                        break
            if chosen is None:  # numeric guard; cannot happen for finite ssa
                raise RuntimeError("bundle split reconstruction failed")
            parts.append(chosen[1])
            mask ^= chosen[0]
        return parts

    def materialize(self, stops: tuple[int, ...], bundles: tuple[int, ...]) -> Solution:
        served = []
        for i, mask in zip(stops, bundles):
            orders = [self.cat.walk_order(i, j) for j in self._split_bundle(i, mask)]
            served.append(tuple(orders))
        return assemble_solution(self.inst, stops, served)


def _respects_structure(sol: Solution, options: SearchOptions, allow_empty: bool) -> bool:
    if options.require_self_singleton:
        for s, stop_sets in zip(sol.stops, sol.served):
            if (s,) not in [tuple(sorted(o)) for o in stop_sets]:
                return False
    if not allow_empty and any(len(stop_sets) == 0 for stop_sets in sol.served):
        return False
    if options.enforce_stops_leq_sets and sol.num_stops > sol.num_sets:
        return False
    return True


def _nn_park_all(inst: Instance) -> Solution | None:
    if inst.spots != tuple(inst.customers):
        return None
    order = []
    unvisited = set(inst.customers)
    cur = 0
    while unvisited:
        nxt = min(unvisited, key=lambda c: (inst.drive[cur, c], c))
        order.append(nxt)
        unvisited.remove(nxt)
        cur = nxt
    return assemble_solution(inst, order, [((c,),) for c in order])


def solve_exact(
    inst: Instance,
    cat: ServiceSetCatalog,
    budget: SearchBudget | None = None,
    options: SearchOptions | None = None,
    threads: int = 1,
    warm_start: bool = True,
) -> ExactResult:
    """Solve to proven optimality within the budget.

    Returns the solution, a status, and a lower bound valid in every status.
    Deterministic with ``threads=1``; with more threads the objective value is
    unchanged but cost ties may resolve differently under budget truncation.
    """
    budget = budget or SearchBudget()
    options = options or SearchOptions()
    searcher = _Searcher(inst, cat, options)

    load = inst.n * inst.load_per_package
    if searcher.metric_drive and inst.n <= DP_MAX_CUSTOMERS and not searcher.allow_empty:
        try:
            value, stops, bundles, states = searcher.solve_dp()
            sol = searcher.materialize(stops, bundles)
            return ExactResult(
                solution=sol, status="optimal", bound=value + load, value=sol.total, nodes=states,
            )
        except _ReconstructionTie:
            pass  # proven value exists but no canonical decode; re-search below

    searcher.build_bound_tables()
    ctl = _Control(budget)

    if warm_start:
        candidates: list[Solution] = []
        nn = _nn_park_all(inst)
        if nn is not None:
            candidates.append(nn)
        try:
            from .heuristic import heuristic_solve

            candidates.append(heuristic_solve(inst, cat))
        except Exception:
            pass
        for sol in candidates:
            if _respects_structure(sol, options, searcher.allow_empty):
                ctl.offer(sol.total, (sol.num_stops, sol.stops), ("warm", sol))
            else:
                ctl.set_value_bound(sol.total)

    # search in completion-time space: the constant loading term is folded in
    # up front so incumbent totals and bounds are directly comparable
    root_lb = load + float(searcher.dsum[searcher.full])
    if threads <= 1:
        searcher.expand(ctl, 0, 0, 0, load, [], [], root_lb)
    else:
        _parallel_expand(searcher, ctl, threads, load, root_lb)

    if ctl.best_state is None:
        return ExactResult(
            solution=None, status="timeout",
            bound=min(ctl.abandoned_lb, root_lb), value=None, nodes=ctl.nodes,
        )
    if isinstance(ctl.best_state[0], str):  # warm solution survived
        sol = ctl.best_state[1]
    else:
        sol = searcher.materialize(*ctl.best_state)
    if ctl.stopped:
        return ExactResult(
            solution=sol, status="feasible",
            bound=min(ctl.abandoned_lb, ctl.best_value), value=sol.total, nodes=ctl.nodes,
        )
    return ExactResult(
        solution=sol, status="optimal", bound=ctl.best_value, value=sol.total, nodes=ctl.nodes,
    )


def _parallel_expand(
    searcher: _Searcher, ctl: _Control, threads: int, load: float, root_lb: float
) -> None:
    """Explore first-stop subtrees in a thread pool sharing one incumbent."""
    from concurrent.futures import ThreadPoolExecutor

    ctl.tick()  # root node
    jobs = []
    U = searcher.full
    for bi, i in enumerate(searcher.spots):
        if searcher.options.require_self_singleton and not (U & (1 << (i - 1))):
            continue
        jobs.append((bi, i))

    def run(job):
        bi, i = job
        arrive = load + searcher.D[0, i] + searcher.P[i]
        ibit = 1 << (i - 1)
        ssa_i = searcher.ssa[i]
        A = U
        while A:
            if searcher.options.require_self_singleton and not (A & ibit):
                A = (A - 1) & U
                continue
            walk = ssa_i[A ^ ibit] if searcher.options.require_self_singleton else ssa_i[A]
            if walk < np.inf:
                cg = arrive + walk
                rem = U & ~A
                if rem == 0:
                    cand = cg + searcher.D[i, 0]
                    if cand <= ctl.best_value + _EPS:
                        searcher._consider(ctl, cand, [i], [A])
                else:
                    searcher.expand(ctl, A, 1 << bi, i, cg, [i], [A], cg)
            A = (A - 1) & U
        if searcher.allow_empty:
            searcher.expand(ctl, 0, 1 << bi, i, arrive, [i], [0], arrive)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(run, jobs))


def check_feasible(inst: Instance, cat: ServiceSetCatalog, sol: Solution) -> list[str]:
    """Coverage, capacity, stop-structure, and catalog-admissibility checks.
    Returns an empty list when the solution is feasible."""
    violations = structural_violations(inst, sol.stops, sol.served)
    for s, stop_sets in zip(sol.stops, sol.served):
        for order in stop_sets:
            members = tuple(sorted(order))
            try:
                j = cat.index_of(members)
            except KeyError:
                violations.append(f"set {members} not in catalog")
                continue
            if not cat.admissible(s, j):
                violations.append(f"pair (spot {s}, set {members}) inadmissible under reduced catalog")
    return violations
