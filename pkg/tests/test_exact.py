import numpy as np
import pytest

from brutes import brute_optimum
from parkroute.errors import InfeasibleInstanceError
from parkroute.exact import SearchBudget, SearchOptions, check_feasible, solve_exact
from parkroute.instance import GridParams, Instance, gen_geo_instance, gen_grid_instance
from parkroute.model import Breakdown, Solution, assemble_solution
from parkroute.servicesets import enumerate_catalog, reduce_catalog


def test_single_customer_closed_form():
    inst = Instance(drive=[[0, 2], [2, 0]], walk=[[0.0]], park_time=[1.0], load_per_package=0.5, capacity_count=1)
    res = solve_exact(inst, enumerate_catalog(inst))
    assert res.status == "optimal"
    assert res.value == pytest.approx(2 + 1 + 2 + 0.5)
    assert res.solution.stops == (1,)


def test_two_customers_huge_search_time_consolidates():
    # customers adjacent by walk: one stop serving both beats parking twice
    drive = [[0, 5, 5], [5, 0, 1], [5, 1, 0]]
    walk = [[0, 0.5], [0.5, 0]]
    inst = Instance(drive=drive, walk=walk, park_time=[40.0, 40.0], capacity_count=2)
    res = solve_exact(inst, enumerate_catalog(inst))
    assert res.value == pytest.approx(brute_optimum(inst), abs=1e-9)
    assert res.solution.num_stops == 1


@pytest.mark.parametrize("seed", range(6))
def test_matches_structural_enumeration(seed):
    n = 3 + seed % 3  # n in {3,4,5}
    inst = gen_geo_instance(n, seed=seed, p=float(seed) / 2, q=2, f=0.3)
    res = solve_exact(inst, enumerate_catalog(inst))
    assert res.status == "optimal"
    assert res.value == pytest.approx(brute_optimum(inst), abs=1e-9)


def test_true_optima_on_2x2_grid_sweep():
    # independent brute-force values; a single consolidated stop takes over at
    # p > 5.6/3, before the two-stop structures do
    expected = {0.0: 8.0, 1.0: 12.0, 2.0: 15.6, 2.2: 15.8, 2.3: 15.9, 3.0: 16.6}
    for p, want in expected.items():
        gp = GridParams(sqrt_n=2, walk_rate=1.6, park_time=p, capacity=2)
        inst = gen_grid_instance(gp)
        res = solve_exact(inst, enumerate_catalog(inst))
        assert res.value == pytest.approx(want, abs=1e-9)
        assert res.value == pytest.approx(brute_optimum(inst), abs=1e-9)


def test_explicit_pass_through_allowance_matches_default_on_metric_input():
    # allowing empty stops on a metric instance routes through the budgeted
    # search instead of the DP; the optimum must not change
    inst = gen_geo_instance(6, seed=31, p=3.0, q=2)
    cat = enumerate_catalog(inst)
    dp = solve_exact(inst, cat)
    bnb = solve_exact(inst, cat, options=SearchOptions(require_served_stop=False))
    assert bnb.status == "optimal"
    assert bnb.value == pytest.approx(dp.value, abs=1e-9)


def test_option_invariance_single_instance():
    inst = gen_geo_instance(7, seed=3, p=4.0, q=3)
    cat = enumerate_catalog(inst)
    base = solve_exact(inst, cat).value
    variants = [
        solve_exact(inst, cat, options=SearchOptions(require_self_singleton=True)),
        solve_exact(inst, cat, options=SearchOptions(require_served_stop=True)),
        solve_exact(inst, cat, options=SearchOptions(enforce_stops_leq_sets=True)),
        solve_exact(inst, reduce_catalog(cat)),
    ]
    for res in variants:
        assert res.value == pytest.approx(base, abs=1e-6)


def test_self_singleton_structure_holds_when_requested():
    inst = gen_geo_instance(6, seed=11, p=3.0, q=3)
    res = solve_exact(inst, enumerate_catalog(inst), options=SearchOptions(require_self_singleton=True))
    for stop, stop_sets in zip(res.solution.stops, res.solution.served):
        assert (stop,) in [tuple(sorted(o)) for o in stop_sets]


def test_every_stop_serves_and_stops_bounded_by_sets():
    inst = gen_geo_instance(7, seed=13, p=5.0, q=3)
    res = solve_exact(inst, enumerate_catalog(inst))
    sol = res.solution
    assert all(len(stop_sets) >= 1 for stop_sets in sol.served)
    assert sol.num_stops <= sol.num_sets


def test_weak_monotonicity_in_search_time():
    for seed in range(3):
        base = gen_geo_instance(5, seed=seed, p=1.0, q=2)
        bumped = Instance(
            drive=base.drive, walk=base.walk, park_time=base.park_time + np.where(np.arange(6) > 0, 0.7, 0.0),
            capacity_count=2,
        )
        v0 = solve_exact(base, enumerate_catalog(base)).value
        v1 = solve_exact(bumped, enumerate_catalog(bumped)).value
        assert v1 >= v0 + 0.7 - 1e-9


def test_determinism_two_runs():
    inst = gen_geo_instance(7, seed=21, p=2.0, q=2)
    cat = enumerate_catalog(inst)
    a = solve_exact(inst, cat)
    b = solve_exact(inst, cat)
    assert a.value == b.value
    assert a.solution.stops == b.solution.stops
    assert a.solution.served == b.solution.served


def test_threads_return_same_value_on_bnb_path():
    # triangle violation forces the branch-and-bound; threads must agree
    drive = np.array([[0, 1, 9, 1], [1, 0, 9, 1], [9, 9, 0, 9], [1, 1, 9, 0.0]])
    drive[0, 2] = 30; drive[2, 0] = 30
    walk = np.full((3, 3), 4.0); np.fill_diagonal(walk, 0.0)
    inst = Instance(drive=drive, walk=walk, park_time=[0.5, 0.5, 0.5], capacity_count=2)
    cat = enumerate_catalog(inst)
    one = solve_exact(inst, cat, threads=1)
    two = solve_exact(inst, cat, threads=2)
    assert one.value == pytest.approx(two.value, abs=1e-9)


def test_budget_exhaustion_keeps_valid_bound():
    # non-metric drive forces the budgeted search path
    drive = np.array([[0, 1, 9, 1], [1, 0, 9, 1], [9, 9, 0, 9], [1, 1, 9, 0.0]])
    drive[0, 2] = 30; drive[2, 0] = 30
    walk = np.full((3, 3), 4.0); np.fill_diagonal(walk, 0.0)
    inst = Instance(drive=drive, walk=walk, park_time=[0.5, 0.5, 0.5], capacity_count=2)
    cat = enumerate_catalog(inst)
    full = solve_exact(inst, cat)
    capped = solve_exact(inst, cat, budget=SearchBudget(max_nodes=2))
    assert capped.status == "feasible"
    assert capped.bound <= full.value + 1e-9
    assert capped.value >= full.value - 1e-9


def test_restricted_parking_and_empty_coverage():
    inst = Instance(
        drive=[[0, 1, 1], [1, 0, 1], [1, 1, 0]], walk=[[0, 1], [1, 0]],
        park_time=[1.0, 1.0], capacity_count=1, parking_locations=(1,),
    )
    cat = enumerate_catalog(inst)
    res = solve_exact(inst, cat)  # spot 1 can serve both customers on foot
    assert res.status == "optimal"
    # a catalog that covers only part of the customers cannot serve everyone
    partial = enumerate_catalog(inst, customers=[1])
    with pytest.raises(InfeasibleInstanceError):
        solve_exact(inst, partial)


def test_check_feasible_accepts_oracle_output():
    inst = gen_geo_instance(6, seed=2, p=2.0, q=2)
    cat = enumerate_catalog(inst)
    res = solve_exact(inst, cat)
    assert check_feasible(inst, cat, res.solution) == []


def test_check_feasible_flags_reduced_pair():
    inst = gen_geo_instance(4, seed=5, q=2)
    red = reduce_catalog(enumerate_catalog(inst))
    sol = assemble_solution(inst, [1, 3], [((1, 2),), ((3,), (4,))])
    violations = check_feasible(inst, red, sol)
    assert any("inadmissible" in v for v in violations)


def test_check_feasible_flags_missing_coverage():
    inst = gen_geo_instance(3, seed=6, q=1)
    cat = enumerate_catalog(inst)
    empty = Solution(stops=(), served=(), breakdown=Breakdown(0, 0, 0, 0), total=0.0)
    violations = check_feasible(inst, cat, empty)
    assert any("not served" in v for v in violations)
