import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cases import balanced_injections, build, random_network, two_bus
from sced.case import CaseValidationError, canonical_case
from sced.centralized import solve_centralized
from sced.dcpf import build_b_matrix, solve_dcpf


def test_two_bus_b_matrix():
    assert np.array_equal(build_b_matrix(two_bus()), [[10, -10], [-10, 10]])


def test_canonical_b_matrix():
    case, _ = canonical_case()
    B = build_b_matrix(case)
    assert B.shape == (6, 6)
    assert np.allclose(B, B.T)
    assert np.allclose(B.sum(axis=1), 0.0)
    assert B[2, 5] == -5.0 and B[2, 2] == 25.0


def test_parallel_lines_merge():
    case = build([0, 1], [(1, 0, 2, 0, 1, 0)], [(1, 2, 4, 1), (2, 1, 6, 1)])
    B = build_b_matrix(case)
    assert B[0, 1] == -10.0
    sol = solve_dcpf(case, {1: 1.0, 2: -1.0})
    assert len(sol.flows) == 1
    assert sol.flow(1, 2) == pytest.approx(1.0)


def test_no_lines_is_disconnected():
    with pytest.raises(CaseValidationError, match="not connected"):
        build([0, 1], [(1, 0, 2, 0, 1, 0)], [])


def test_two_bus_solve():
    sol = solve_dcpf(two_bus(), {1: 1.0, 2: -1.0})
    assert sol.theta[1] == 0.0
    assert sol.theta[2] == pytest.approx(-0.1)
    assert sol.flow(1, 2) == pytest.approx(1.0)
    assert sol.flow(2, 1) == pytest.approx(-1.0)


def test_zero_injections():
    case, _ = canonical_case()
    sol = solve_dcpf(case, {})
    assert all(t == 0.0 for t in sol.theta.values())
    assert all(f == 0.0 for f in sol.flows.values())


def test_unbalanced_injections_rejected():
    with pytest.raises(ValueError, match="do not balance"):
        solve_dcpf(two_bus(), {1: 1.0})
    with pytest.raises(ValueError):
        solve_dcpf(two_bus(), [1.0, -1.0, 0.0])


def test_canonical_dispatch_flows_within_limits():
    case, _ = canonical_case()
    disp = solve_centralized(case)
    inj = np.zeros(6)
    for g, p in zip(case.generators, disp.p_g):
        inj[g.bus - 1] += p
    inj -= case.loads
    sol = solve_dcpf(case, inj)
    for ln in case.lines:
        assert abs(sol.flow(ln.from_bus, ln.to_bus)) <= ln.f_max_pu + 1e-9


def kcl_residual(case, sol, inj):
    out = np.zeros(case.n_bus)
    for (i, j), f in sol.flows.items():
        out[i - 1] += f
        out[j - 1] -= f
    return np.max(np.abs(out - inj))


def check_invariants(case, rng):
    p = balanced_injections(rng, case.n_bus)
    q = balanced_injections(rng, case.n_bus)
    a, b = rng.normal(size=2)
    sp, sq = solve_dcpf(case, p), solve_dcpf(case, q)
    s = solve_dcpf(case, a * p + b * q)
    assert s.theta[case.slack_bus] == 0.0
    assert kcl_residual(case, sp, p) <= 1e-8
    for bus in s.theta:
        assert abs(s.theta[bus] - (a * sp.theta[bus] + b * sq.theta[bus])) <= 1e-8
    for key in s.flows:
        assert abs(s.flows[key] - (a * sp.flows[key] + b * sq.flows[key])) <= 1e-8
        i, j = key
        assert sp.flow(j, i) == -sp.flow(i, j)


def test_canonical_invariants():
    case, _ = canonical_case()
    check_invariants(case, np.random.default_rng(0))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(2, 8))
def test_random_network_invariants(seed, nbus):
    rng = np.random.default_rng(seed)
    check_invariants(random_network(rng, nbus), rng)
