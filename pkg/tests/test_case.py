import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cases import build, random_network, two_bus
from sced.case import (
    BoundaryAssumptionError, CaseParseError, CaseValidationError, TopologyError,
    canonical_case, case_from_dict, load_case, make_partition, save_case, single_area,
)


def test_canonical_case_facts():
    case, part = canonical_case()
    assert case.n_bus == 6
    assert len(case.generators) == 4
    assert case.total_load == pytest.approx(1.2)
    assert [b.id for b in case.buses if b.load_pu > 0] == [1, 2, 4, 6]
    assert all(b.load_pu == pytest.approx(0.3) for b in case.buses if b.load_pu > 0)
    assert sorted(g.bus for g in case.generators) == [1, 2, 4, 5]
    assert case.generators[case.gens_at(1)[0]].p_max_pu == 0.1
    assert len(part.tie_lines) == 1
    assert case.lines[part.tie_lines[0]].key == (3, 6)
    assert part.boundary_buses == {3, 6}


@pytest.mark.xfail(strict=True, reason="canonical load placement puts 0.3 pu on boundary bus 6")
def test_canonical_boundary_buses_are_empty():
    case, part = canonical_case()
    for b in part.boundary_buses:
        assert case.buses[b - 1].load_pu == 0.0
        assert not case.gens_at(b)


def test_canonical_strict_partition_rejects_loaded_boundary():
    case, _ = canonical_case()
    with pytest.raises(BoundaryAssumptionError, match="boundary bus 6"):
        make_partition(case, case.areas)


def test_minimal_two_bus_case():
    case = two_bus()
    assert case.n_bus == 2 and len(case.lines) == 1 and len(case.generators) == 1


def _canonical_dict():
    case, _ = canonical_case()
    return case.to_dict()


def test_duplicate_bus_id_rejected():
    d = _canonical_dict()
    d["buses"][1]["id"] = 1
    with pytest.raises(CaseValidationError, match="duplicate"):
        case_from_dict(d)


@pytest.mark.parametrize("mutate, match", [
    (lambda d: d["buses"][0].update(load_pu=-1.0), "negative load"),
    (lambda d: d["generators"][0].update(p_min_pu=2.0), "p_min > p_max"),
    (lambda d: d["generators"][0].update(cost_c=-1.0), "non-convex"),
    (lambda d: d["lines"][0].update(susceptance_pu=0.0), "susceptance"),
    (lambda d: d["lines"][0].update(f_max_pu=0.0), "flow limit"),
    (lambda d: d["lines"][0].update(to=1), "self-loop"),
    (lambda d: d["lines"][0].update(to=9), "unknown bus"),
    (lambda d: d.update(slack_bus=7), "slack bus"),
    (lambda d: d["generators"][0].update(bus=8), "unknown bus"),
    (lambda d: d.update(lines=[]), "not connected"),
    (lambda d: [g.update(p_max_pu=0.1) for g in d["generators"]], "capacity"),
])
def test_invariant_violations_named(mutate, match):
    d = _canonical_dict()
    mutate(d)
    with pytest.raises(CaseValidationError, match=match):
        case_from_dict(d)


def test_unknown_keys_and_bad_types_rejected():
    d = _canonical_dict()
    d["extra"] = 1
    with pytest.raises(CaseParseError, match="extra"):
        case_from_dict(d)
    d = _canonical_dict()
    d["buses"][0]["load_pu"] = "a lot"
    with pytest.raises(CaseParseError):
        case_from_dict(d)


def test_malformed_file(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(CaseParseError, match="malformed"):
        load_case(p)


def test_round_trip_bit_identical(tmp_path):
    case, _ = canonical_case()
    p = tmp_path / "c.json"
    save_case(case, p)
    again = load_case(p)
    assert again == case
    save_case(again, tmp_path / "c2.json")
    assert (tmp_path / "c2.json").read_text() == p.read_text()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(2, 8))
def test_round_trip_random_cases(tmp_path_factory, seed, nbus):
    rng = np.random.default_rng(seed)
    case = random_network(rng, nbus)
    p = tmp_path_factory.mktemp("rt") / "c.json"
    save_case(case, p)
    again = load_case(p)
    for a, b in zip(case.buses, again.buses):
        assert a.load_pu == b.load_pu
    for a, b in zip(case.lines, again.lines):
        assert a == b
    assert again == case


def test_single_area_partition():
    case, _ = canonical_case()
    part = single_area(case)
    assert part.tie_lines == () and part.boundary_buses == frozenset()
    assert part.areas == (1,)


def test_loaded_bus_on_boundary_rejected():
    case = build([0.0, 0.5, 0.0, 0.0], [(1, 0, 1, 0, 1, 0)],
                 [(1, 2, 10, 1), (2, 3, 10, 1), (3, 4, 10, 1)])
    with pytest.raises(BoundaryAssumptionError, match="boundary bus 2"):
        make_partition(case, {1: 1, 2: 1, 3: 2, 4: 2})
    part = make_partition(case, {1: 1, 2: 1, 3: 1, 4: 2})
    assert part.boundary_buses == {3, 4}


def test_partition_errors():
    case = build([0.0, 0.0, 0.0, 0.5], [(4, 0, 1, 0, 1, 0)],
                 [(1, 2, 10, 1), (2, 3, 10, 1), (3, 4, 10, 1)])
    with pytest.raises(TopologyError, match="area 1"):
        make_partition(case, {1: 1, 2: 2, 3: 1, 4: 2}, require_empty_boundary=False)
    with pytest.raises(CaseValidationError, match="does not assign"):
        make_partition(case, {1: 1, 2: 1, 3: 1})
    with pytest.raises(CaseValidationError, match="unknown"):
        make_partition(case, {1: 1, 2: 1, 3: 1, 4: 1, 5: 1})


@st.composite
def partitioned(draw):
    seed = draw(st.integers(0, 2**31 - 1))
    nbus = draw(st.integers(2, 8))
    rng = np.random.default_rng(seed)
    case = random_network(rng, nbus, extra=draw(st.integers(0, 4)))
    # grow two areas from a random split of a BFS order so each stays connected
    adj = {b: set() for b in range(1, nbus + 1)}
    for ln in case.lines:
        adj[ln.from_bus].add(ln.to_bus)
        adj[ln.to_bus].add(ln.from_bus)
    order, seen = [], {1}
    queue = [1]
    while queue:
        b = queue.pop(0)
        order.append(b)
        for n in sorted(adj[b]):
            if n not in seen:
                seen.add(n)
                queue.append(n)
    k = draw(st.integers(1, nbus))
    area_of = {b: 1 for b in order[:k]}
    area_of.update({b: 2 for b in order[k:]})
    try:
        part = make_partition(case, area_of, require_empty_boundary=False)
    except TopologyError:
        part = single_area(case)
    return case, part


@settings(max_examples=60, deadline=None)
@given(partitioned())
def test_every_line_internal_or_tie(cp):
    case, part = cp
    internal = [k for a in part.areas for k in part.internal_lines(case, a)]
    assert len(internal) == len(set(internal))
    assert set(internal).isdisjoint(part.tie_lines)
    assert sorted(internal + list(part.tie_lines)) == list(range(len(case.lines)))


@settings(max_examples=60, deadline=None)
@given(partitioned())
def test_removing_ties_separates_areas_and_keeps_them_connected(cp):
    case, part = cp
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import connected_components
    keep = [ln for k, ln in enumerate(case.lines) if k not in part.tie_lines]
    n = case.n_bus
    adj = csr_matrix((np.ones(len(keep)), ([ln.from_bus - 1 for ln in keep], [ln.to_bus - 1 for ln in keep])),
                     shape=(n, n))
    ncomp, labels = connected_components(adj, directed=False)
    assert ncomp == len(part.areas)
    for a in part.areas:
        assert len({labels[b - 1] for b in part.buses_in(a)}) == 1


def test_case_json_schema_shipped():
    case, _ = canonical_case()
    d = case.to_dict()
    assert json.loads(json.dumps(d)) == d
