import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cases import build, oracle_dispatch, random_three_bus
from sced.case import canonical_case
from sced.centralized import InfeasibleDispatchError, assemble_sced_qp, solve_centralized
from sced.network import linear_network


def check_dispatch_invariants(case, sol):
    for g, p in zip(case.generators, sol.p_g):
        assert g.p_min_pu - 1e-9 <= p <= g.p_max_pu + 1e-9
    for ln, f in zip(case.lines, sol.flows):
        assert abs(f) <= ln.f_max_pu + 1e-9
    net = linear_network(case)
    z = np.concatenate([sol.p_g, sol.theta])
    assert np.max(np.abs(net.balance(z))) <= 1e-6
    assert sol.theta[case.slack_bus - 1] == 0.0
    assert sol.objective_cost == case.total_cost(sol.p_g)
    assert sol.total_generation == pytest.approx(case.total_load, abs=1e-9)


def test_canonical_qp_sizes():
    case, _ = canonical_case()
    qp = assemble_sced_qp(case)
    assert qp.n == 9
    assert qp.A.shape == (6, 9)
    assert qp.G.shape == (8 + 2 * 7, 9)
    assert qp.offset == pytest.approx(sum(g.cost_a for g in case.generators))


def test_canonical_dispatch():
    case, _ = canonical_case()
    sol = solve_centralized(case)
    check_dispatch_invariants(case, sol)
    assert sol.p_g[case.gens_at(1)[0]] == pytest.approx(0.1, abs=1e-12)
    # tie 3-6 carries its limit into area 1
    assert sol.flows[6] == pytest.approx(-0.2, abs=1e-9)
    assert sol.bus_prices[:3] == pytest.approx([sol.bus_prices[0]] * 3, abs=1e-6)
    assert sol.bus_prices[3:] == pytest.approx([sol.bus_prices[3]] * 3, abs=1e-6)
    assert sol.bus_prices[0] > sol.bus_prices[3] > 0


def test_single_bus_case():
    case = build([0.7], [(1, 0.0, 1.0, 0.0, 2.0, 1.0)], [])
    qp = assemble_sced_qp(case)
    assert qp.n == 1 and qp.A.shape == (1, 1)
    sol = solve_centralized(case)
    assert sol.p_g == pytest.approx([0.7])
    assert sol.bus_prices == pytest.approx([2.0 + 2 * 0.7])


def test_zero_load_puts_generators_at_minimum():
    case = build([0.0, 0.0], [(1, 0.0, 1.0, 0, 1.0, 0.5), (2, 0.0, 1.0, 0, 2.0, 0.1)], [(1, 2, 10, 1)])
    sol = solve_centralized(case)
    assert sol.p_g == pytest.approx([0.0, 0.0], abs=1e-12)


def test_identical_generators_split_equally():
    case = build([0.8], [(1, 0.0, 1.0, 0, 1.0, 0.5), (1, 0.0, 1.0, 0, 1.0, 0.5)], [])
    sol = solve_centralized(case)
    assert sol.p_g == pytest.approx([0.4, 0.4], abs=1e-9)


def test_infeasible_flow_limits_raise():
    case = build([0.0, 1.0], [(1, 0.0, 2.0, 0, 1.0, 0.1)], [(1, 2, 10, 0.5)])
    with pytest.raises(InfeasibleDispatchError):
        solve_centralized(case)


def test_congested_three_bus_matches_grid_oracle():
    rng = np.random.default_rng(1)
    for _ in range(20):
        case = random_three_bus(rng, congested=True)
        try:
            sol = solve_centralized(case)
        except InfeasibleDispatchError:
            continue
        if np.max(np.abs(sol.flows[0])) < case.lines[0].f_max_pu - 1e-6:
            continue
        p_ref, _ = oracle_dispatch(case)
        assert np.max(np.abs(sol.p_g - p_ref)) <= 2e-3
        check_dispatch_invariants(case, sol)
        return
    pytest.fail("no congested instance generated")


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_equal_marginal_cost_when_uncongested(seed):
    rng = np.random.default_rng(seed)
    case = random_three_bus(rng, congested=False)
    sol = solve_centralized(case)
    check_dispatch_invariants(case, sol)
    flows_slack = [ln.f_max_pu - abs(f) for ln, f in zip(case.lines, sol.flows)]
    assert min(flows_slack) > 1e-6
    interior = [k for k, g in enumerate(case.generators) if g.p_min_pu + 1e-7 < sol.p_g[k] < g.p_max_pu - 1e-7]
    mc = [case.generators[k].marginal_cost(sol.p_g[k]) for k in interior]
    if len(mc) > 1:
        assert max(mc) - min(mc) <= 1e-6
    # no active flow limit: one system price
    assert np.ptp(sol.bus_prices) <= 1e-6
    for k in interior:
        assert mc[interior.index(k)] == pytest.approx(sol.bus_prices[0], abs=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_random_dispatch_invariants(seed):
    rng = np.random.default_rng(seed)
    case = random_three_bus(rng, congested=True)
    try:
        sol = solve_centralized(case)
    except InfeasibleDispatchError:
        return
    check_dispatch_invariants(case, sol)
