"""Network data model, case files and area partitions."""

import json
from dataclasses import dataclass, field
from importlib import resources

import jsonschema
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components


class CaseError(ValueError):
    """Base class for problems with a case or partition."""


class CaseParseError(CaseError):
    pass


class CaseValidationError(CaseError):
    pass


class TopologyError(CaseValidationError):
    pass


class BoundaryAssumptionError(CaseValidationError):
    """A boundary bus carries load or generation."""


CASE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["buses", "generators", "lines", "slack_bus"],
    "properties": {
        "name": {"type": "string"},
        "buses": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "load_pu"],
                "properties": {"id": {"type": "integer"}, "load_pu": {"type": "number"}},
            },
        },
        "generators": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["bus", "p_min_pu", "p_max_pu", "cost_a", "cost_b", "cost_c"],
                "properties": {
                    "bus": {"type": "integer"},
                    "p_min_pu": {"type": "number"},
                    "p_max_pu": {"type": "number"},
                    "cost_a": {"type": "number"},
                    "cost_b": {"type": "number"},
                    "cost_c": {"type": "number"},
                },
            },
        },
        "lines": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["from", "to", "susceptance_pu", "f_max_pu"],
                "properties": {
                    "from": {"type": "integer"},
                    "to": {"type": "integer"},
                    "susceptance_pu": {"type": "number"},
                    "f_max_pu": {"type": "number"},
                },
            },
        },
        "slack_bus": {"type": "integer"},
        "areas": {
            "type": "object",
            "patternProperties": {"^[0-9]+$": {"type": "integer"}},
            "additionalProperties": False,
        },
    },
}


@dataclass(frozen=True)
class Bus:
    id: int
    load_pu: float = 0.0


@dataclass(frozen=True)
class Generator:
    bus: int
    p_min_pu: float
    p_max_pu: float
    cost_a: float = 0.0
    cost_b: float = 0.0
    cost_c: float = 0.0

    def cost(self, p):
        return self.cost_a + self.cost_b * p + self.cost_c * p * p

    def marginal_cost(self, p):
        return self.cost_b + 2.0 * self.cost_c * p


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    susceptance_pu: float
    f_max_pu: float

    @property
    def key(self):
        return (self.from_bus, self.to_bus)


def _connected(nodes, edges):
    if len(nodes) <= 1:
        return True
    pos = {b: i for i, b in enumerate(nodes)}
    rows = [pos[i] for i, j in edges]
    cols = [pos[j] for i, j in edges]
    adj = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(nodes), len(nodes)))
    ncomp, _ = connected_components(adj, directed=False)
    return ncomp == 1


@dataclass(frozen=True)
class NetworkCase:
    """A validated network. Bus ids run 1..n; construction checks invariants."""

    buses: tuple
    generators: tuple
    lines: tuple
    slack_bus: int
    areas: dict = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(sorted(self.buses, key=lambda b: b.id)))
        object.__setattr__(self, "generators", tuple(self.generators))
        object.__setattr__(self, "lines", tuple(self.lines))
        self._validate()

    def _validate(self):
        ids = [b.id for b in self.buses]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise CaseValidationError(f"duplicate bus ids: {dup}")
        if ids != list(range(1, len(ids) + 1)):
            raise CaseValidationError(f"bus ids must be contiguous from 1, got {ids}")
        known = set(ids)
        for b in self.buses:
            if b.load_pu < 0:
                raise CaseValidationError(f"bus {b.id} has negative load {b.load_pu}")
        for g in self.generators:
            if g.bus not in known:
                raise CaseValidationError(f"generator references unknown bus {g.bus}")
            if g.p_min_pu > g.p_max_pu:
                raise CaseValidationError(f"generator at bus {g.bus} has p_min > p_max")
            if g.cost_c < 0:
                raise CaseValidationError(f"generator at bus {g.bus} has negative cost_c (non-convex cost)")
        for ln in self.lines:
            if ln.from_bus not in known or ln.to_bus not in known:
                raise CaseValidationError(f"line {ln.key} references an unknown bus")
            if ln.from_bus == ln.to_bus:
                raise CaseValidationError(f"line {ln.key} is a self-loop")
            if ln.susceptance_pu <= 0:
                raise CaseValidationError(f"line {ln.key} has non-positive susceptance")
            if ln.f_max_pu <= 0:
                raise CaseValidationError(f"line {ln.key} has non-positive flow limit")
        if self.slack_bus not in known:
            raise CaseValidationError(f"slack bus {self.slack_bus} does not exist")
        if not _connected(ids, [(ln.from_bus, ln.to_bus) for ln in self.lines]):
            raise TopologyError("network graph is not connected")
        if sum(g.p_max_pu for g in self.generators) < self.total_load - 1e-12:
            raise CaseValidationError("total generation capacity is below total load")
        if self.areas is not None:
            missing = known - set(self.areas)
            if missing:
                raise CaseValidationError(f"areas map misses buses {sorted(missing)}")
            extra = set(self.areas) - known
            if extra:
                raise CaseValidationError(f"areas map names unknown buses {sorted(extra)}")

    @property
    def n_bus(self):
        return len(self.buses)

    @property
    def total_load(self):
        return float(sum(b.load_pu for b in self.buses))

    @property
    def loads(self):
        return np.array([b.load_pu for b in self.buses])

    def gens_at(self, bus):
        return [k for k, g in enumerate(self.generators) if g.bus == bus]

    def total_cost(self, p_g):
        return float(sum(g.cost(p) for g, p in zip(self.generators, p_g)))

    def to_dict(self):
        d = {}
        if self.name:
            d["name"] = self.name
        d["buses"] = [{"id": b.id, "load_pu": b.load_pu} for b in self.buses]
        d["generators"] = [
            {"bus": g.bus, "p_min_pu": g.p_min_pu, "p_max_pu": g.p_max_pu,
             "cost_a": g.cost_a, "cost_b": g.cost_b, "cost_c": g.cost_c}
            for g in self.generators
        ]
        d["lines"] = [
            {"from": ln.from_bus, "to": ln.to_bus, "susceptance_pu": ln.susceptance_pu, "f_max_pu": ln.f_max_pu}
            for ln in self.lines
        ]
        d["slack_bus"] = self.slack_bus
        if self.areas is not None:
            d["areas"] = {str(b): a for b, a in sorted(self.areas.items())}
        return d


def case_from_dict(data):
    try:
        jsonschema.validate(data, CASE_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise CaseParseError(f"case schema violation at {where}: {exc.message}") from None
    areas = data.get("areas")
    if areas is not None:
        areas = {int(k): int(v) for k, v in areas.items()}
    return NetworkCase(
        buses=[Bus(b["id"], float(b["load_pu"])) for b in data["buses"]],
        generators=[
            Generator(g["bus"], float(g["p_min_pu"]), float(g["p_max_pu"]),
                      float(g["cost_a"]), float(g["cost_b"]), float(g["cost_c"]))
            for g in data["generators"]
        ],
        lines=[Line(ln["from"], ln["to"], float(ln["susceptance_pu"]), float(ln["f_max_pu"]))
               for ln in data["lines"]],
        slack_bus=data["slack_bus"],
        areas=areas,
        name=data.get("name", ""),
    )


def load_case(path):
    """Read and validate a JSON case file."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CaseParseError(f"{path}: malformed JSON: {exc}") from None
    return case_from_dict(data)


def save_case(case, path):
    with open(path, "w") as fh:
        json.dump(case.to_dict(), fh, indent=2)
        fh.write("\n")


@dataclass(frozen=True)
class Partition:
    """Assignment of buses to areas plus the derived tie-lines and boundary buses.

    ``tie_lines`` holds indices into ``case.lines``.
    """

    area_of: dict
    tie_lines: tuple
    boundary_buses: frozenset
    areas: tuple = field(default=())

    def buses_in(self, area):
        return sorted(b for b, a in self.area_of.items() if a == area)

    def internal_lines(self, case, area):
        return [k for k, ln in enumerate(case.lines)
                if self.area_of[ln.from_bus] == area and self.area_of[ln.to_bus] == area]


def make_partition(case, area_of, require_empty_boundary=True):
    """Split ``case`` into areas.

    With ``require_empty_boundary`` every boundary bus must have zero load and
    no generator.
    """
    area_of = {int(b): a for b, a in area_of.items()}
    missing = {b.id for b in case.buses} - set(area_of)
    if missing:
        raise CaseValidationError(f"partition does not assign buses {sorted(missing)}")
    unknown = set(area_of) - {b.id for b in case.buses}
    if unknown:
        raise CaseValidationError(f"partition assigns unknown buses {sorted(unknown)}")
    areas = tuple(sorted(set(area_of.values())))
    ties = tuple(k for k, ln in enumerate(case.lines) if area_of[ln.from_bus] != area_of[ln.to_bus])
    boundary = frozenset(b for k in ties for b in (case.lines[k].from_bus, case.lines[k].to_bus))
    for a in areas:
        members = [b for b, x in area_of.items() if x == a]
        edges = [(ln.from_bus, ln.to_bus) for ln in case.lines
                 if area_of[ln.from_bus] == a and area_of[ln.to_bus] == a]
        if not _connected(sorted(members), edges):
            raise TopologyError(f"area {a} is not internally connected")
    if require_empty_boundary:
        for b in sorted(boundary):
            if case.buses[b - 1].load_pu != 0.0 or case.gens_at(b):
                raise BoundaryAssumptionError(
                    f"boundary bus {b} carries load or generation; boundary buses must be empty")
    return Partition(dict(sorted(area_of.items())), ties, boundary, areas)


def canonical_case():
    """The built-in two-area 6-bus case and its partition.

    Areas {1, 2, 3} and {4, 5, 6} meet on the tie-line 3-6. The fixed load
    placement puts 0.3 pu on bus 6, which is a boundary bus, so the partition
    is built without the empty-boundary check.
    """
    text = resources.files("sced").joinpath("data/canonical_6bus.json").read_text()
    case = case_from_dict(json.loads(text))
    return case, make_partition(case, case.areas, require_empty_boundary=False)


def single_area(case):
    return make_partition(case, {b.id: 1 for b in case.buses})
