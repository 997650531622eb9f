"""Lagrangian relaxation of the area coupling constraints.

The boundary-bus balances and the tie-line limits are priced by multipliers
(lambda for balances, mu for limits) and dropped from the constraint set.
Because every coupling term is linear in the stacked network vector, the
priced objective splits exactly into one term per area: each area's
subproblem sees its own generators and angles, and the subproblem optima sum
to the dual function. Multipliers move along the normalized mismatch with
the diminishing step 1 / (a + b v).

A tie-line limit |F| <= F_max is carried as two one-sided rows, F <= F_max
and -F <= F_max, each with its own mu entry, so the relaxation stays
separable.

An area without the slack bus has a free angle shift once its boundary
balances are relaxed. Every feasible dispatch satisfies
|theta_i| <= dist(slack, i), the shortest path measured in F_max / B per line,
so boundary angles are boxed by that bound. This keeps each subproblem
bounded without excluding any feasible point.
"""

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .centralized import DispatchSolution, generator_bound_rows
from .network import linear_network
from .qp import QpProblem, solve_qp
from .trace import ConvergenceTrace, TraceRecord


@dataclass(frozen=True)
class LrParams:
    step_a: float = 3.0
    step_b: float = 0.2
    lambda0: object = None
    mu0: object = None
    stop_tol: float = 0.01
    max_iter: int = 1000
    criterion: str = "gen_load"

    def __post_init__(self):
        if self.step_a <= 0:
            raise ValueError("step_a must be positive")
        if self.step_b < 0:
            raise ValueError("step_b must be nonnegative")
        if self.stop_tol <= 0:
            raise ValueError("stop_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.criterion not in ("gen_load", "mismatch", "none"):
            raise ValueError(f"unknown stopping criterion {self.criterion!r}")

    def step(self, v):
        return 1.0 / (self.step_a + self.step_b * v)


@dataclass(frozen=True)
class MultiplierState:
    lam: np.ndarray
    mu: np.ndarray
    iteration: int = 1

    def __post_init__(self):
        object.__setattr__(self, "lam", np.asarray(self.lam, dtype=float))
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float))
        if np.any(self.mu < 0):
            raise ValueError("mu must be nonnegative")


def _fill(value, n, what):
    if value is None:
        return np.zeros(n)
    arr = np.broadcast_to(np.asarray(value, dtype=float), (n,)).copy() if np.ndim(value) == 0 \
        else np.asarray(value, dtype=float)
    if arr.shape != (n,):
        raise ValueError(f"{what} needs {n} entries, got {arr.shape[0]}")
    return arr


def implied_angle_bounds(case):
    """Largest |theta_i| any flow-feasible operating point can have."""
    n = case.n_bus
    w = {}
    for ln in case.lines:
        key = tuple(sorted((ln.from_bus - 1, ln.to_bus - 1)))
        w[key] = min(w.get(key, np.inf), ln.f_max_pu / ln.susceptance_pu)
    rows = [i for i, j in w] + [j for i, j in w]
    cols = [j for i, j in w] + [i for i, j in w]
    graph = csr_matrix((list(w.values()) * 2, (rows, cols)), shape=(n, n))
    return dijkstra(graph, indices=case.slack_bus - 1)


@dataclass
class AreaBlock:
    area: int
    buses: list
    gens: list
    cols: list             # indices into the stacked network vector
    internal_buses: list   # balances kept as hard constraints
    internal_lines: list
    boundary_buses: list


@dataclass
class CouplingStructure:
    """Constraint classification for a partitioned case.

    ``coupling_equalities`` are boundary bus ids (one balance each);
    ``coupling_inequalities`` are tie-line indices (one |F| <= F_max each,
    expanded into two rows in ``H``).
    """

    case: object
    part: object
    net: object
    blocks: list
    coupling_equalities: list
    coupling_inequalities: list
    E: np.ndarray = field(repr=False)      # g_int = E z + e
    e: np.ndarray = field(repr=False)
    H: np.ndarray = field(repr=False)      # h_int = H z - f
    f: np.ndarray = field(repr=False)
    angle_bound: np.ndarray = field(repr=False)
    _constraints: dict = field(default_factory=dict, repr=False)

    @property
    def n_lambda(self):
        return len(self.coupling_equalities)

    @property
    def n_mu(self):
        return self.H.shape[0]

    def block(self, area):
        for b in self.blocks:
            if b.area == area:
                return b
        raise KeyError(area)

    def stitch(self, xs):
        z = np.zeros(self.net.n_z)
        for blk, x in zip(self.blocks, xs):
            z[blk.cols] = x
        return z


def classify_constraints(case, part):
    net = linear_network(case)
    boundary = sorted(part.boundary_buses)
    blocks = []
    for a in part.areas:
        buses = part.buses_in(a)
        gens = [k for k, g in enumerate(case.generators) if part.area_of[g.bus] == a]
        cols = [net.p_index(k) for k in gens] + [net.theta_index(b) for b in buses if b != case.slack_bus]
        blocks.append(AreaBlock(
            area=a,
            buses=buses,
            gens=gens,
            cols=cols,
            internal_buses=[b for b in buses if b not in part.boundary_buses],
            internal_lines=part.internal_lines(case, a),
            boundary_buses=[b for b in buses if b in part.boundary_buses],
        ))
    E = net.net_export[[b - 1 for b in boundary]].reshape(len(boundary), net.n_z)
    e = net.loads[[b - 1 for b in boundary]]
    ties = list(part.tie_lines)
    H = np.zeros((2 * len(ties), net.n_z))
    fvec = np.zeros(2 * len(ties))
    for t, k in enumerate(ties):
        H[2 * t] = net.flow[k]
        H[2 * t + 1] = -net.flow[k]
        fvec[2 * t: 2 * t + 2] = case.lines[k].f_max_pu
    return CouplingStructure(case, part, net, blocks, boundary, ties, E, e, H, fvec,
                             implied_angle_bounds(case))


def _area_constant(cs, blk, ms):
    """This area's share of lambda'e - mu'f: own boundary loads, and the
    limits of ties whose from-bus lies in the area."""
    const = 0.0
    for i, b in enumerate(cs.coupling_equalities):
        if b in blk.buses:
            const += ms.lam[i] * cs.e[i]
    for t, k in enumerate(cs.coupling_inequalities):
        if cs.case.lines[k].from_bus in blk.buses:
            const -= ms.mu[2 * t] * cs.f[2 * t] + ms.mu[2 * t + 1] * cs.f[2 * t + 1]
    return const


def area_constraints(cs, blk, angle_box=True):
    """Hard constraints of one area: internal balances, generator limits,
    internal line limits and (optionally) the boundary angle box. Cached on
    ``cs`` since they do not change between iterations."""
    key = (blk.area, angle_box)
    if key not in cs._constraints:
        cs._constraints[key] = _area_constraints(cs, blk, angle_box)
    return cs._constraints[key]


def _area_constraints(cs, blk, angle_box):
    case, net = cs.case, cs.net
    cols = blk.cols
    n = len(cols)
    A = net.net_export[[b - 1 for b in blk.internal_buses]][:, cols].reshape(-1, n)
    b = -net.loads[[b - 1 for b in blk.internal_buses]]
    G, h = generator_bound_rows(
        type("C", (), {"generators": [case.generators[k] for k in blk.gens]}),
        n, {i: i for i in range(len(blk.gens))})
    for k in blk.internal_lines:
        row = net.flow[k, cols]
        G += [row, -row]
        h += [case.lines[k].f_max_pu] * 2
    if angle_box:
        for bus in blk.boundary_buses:
            if bus == case.slack_bus:
                continue
            row = np.zeros(n)
            row[cols.index(net.theta_index(bus))] = 1.0
            G += [row, -row]
            h += [cs.angle_bound[bus - 1]] * 2
    return A, b, np.array(G).reshape(-1, n), np.array(h)


def build_area_subproblem(cs, area, ms):
    """The priced subproblem of ``area`` for multipliers ``ms``."""
    blk = cs.block(area)
    case = cs.case
    n = len(blk.cols)
    Q = np.zeros((n, n))
    c = np.zeros(n)
    for i, k in enumerate(blk.gens):
        Q[i, i] = 2.0 * case.generators[k].cost_c
        c[i] = case.generators[k].cost_b
    c += cs.E[:, blk.cols].T @ ms.lam + cs.H[:, blk.cols].T @ ms.mu
    offset = sum(case.generators[k].cost_a for k in blk.gens) + _area_constant(cs, blk, ms)
    A, b, G, h = area_constraints(cs, blk, angle_box=bool(blk.boundary_buses))
    return QpProblem(Q, c, A, b, G, h, offset=offset)


def coupling_mismatch(cs, area_solutions):
    """Stacked coupling residuals: boundary balances, then tie-limit
    violations clamped at zero."""
    z = cs.stitch(area_solutions)
    g = cs.E @ z + cs.e
    viol = np.maximum(cs.H @ z - cs.f, 0.0)
    return np.concatenate([g, viol])


def update_direction(cs, area_solutions, ms):
    """Projected subgradient used for the multiplier step.

    Equal to the clamped mismatch except that a tie-limit row whose
    multiplier is already positive keeps its (negative) slack, so mu can
    come back down once the limit is no longer violated.
    """
    z = cs.stitch(area_solutions)
    h = cs.H @ z - cs.f
    h = np.where((h > 0) | (ms.mu > 0), h, 0.0)
    return np.concatenate([cs.E @ z + cs.e, h])


def update_multipliers(ms, s, p):
    """One normalized subgradient step; negative mu entries are reset to 0."""
    s = np.asarray(s, dtype=float)
    norm = float(np.linalg.norm(s))
    if norm < 1e-12:
        raise ValueError("zero mismatch: coupling satisfied, no update is defined")
    k = p.step(ms.iteration)
    nl = ms.lam.size
    lam = ms.lam + k * s[:nl] / norm
    mu = np.maximum(ms.mu + k * s[nl:] / norm, 0.0)
    return MultiplierState(lam, mu, ms.iteration + 1)


def initial_multipliers(cs, p):
    return MultiplierState(_fill(p.lambda0, cs.n_lambda, "lambda0"),
                           np.maximum(_fill(p.mu0, cs.n_mu, "mu0"), 0.0), 1)


def dispatch_from_stacked(case, net, z):
    ng = len(case.generators)
    p_g = z[:ng].copy()
    return DispatchSolution(p_g, z[ng:].copy(), net.flow @ z, case.total_cost(p_g))


def run_lr(case, part, p=None, cs=None):
    """Lagrangian relaxation; returns (DispatchSolution, ConvergenceTrace).

    Stops once |total generation - total load| < stop_tol (or the coupling
    mismatch norm does, with ``criterion="mismatch"``). Without convergence
    the iterate with the smallest generation-load error is returned.
    """
    p = p or LrParams()
    cs = cs or classify_constraints(case, part)
    ms = initial_multipliers(cs, p)
    trace = ConvergenceTrace("lr")
    warm = [None] * len(cs.blocks)
    best = None
    start = time.perf_counter()
    for v in range(1, p.max_iter + 1):
        xs, objs = [], []
        for i, blk in enumerate(cs.blocks):
            sub = build_area_subproblem(cs, blk.area, ms)
            sol = solve_qp(sub, x0=warm[i][0], active0=warm[i][1]) if warm[i] else solve_qp(sub)
            if not sol.optimal:
                raise RuntimeError(f"LR subproblem of area {blk.area} failed: {sol.status}")
            warm[i] = (sol.x, sol.active_set)
            xs.append(sol.x)
            objs.append(sol.objective)
        s = coupling_mismatch(cs, xs)
        z = cs.stitch(xs)
        err = abs(float(np.sum(z[: cs.net.n_gen])) - case.total_load)
        norm = float(np.linalg.norm(s))
        trace.append(TraceRecord(v, norm, err, float(sum(objs)), tuple(ms.lam), tuple(ms.mu),
                                 time.perf_counter() - start), objs)
        if best is None or err < best[0]:
            best = (err, z)
        if p.criterion == "gen_load" and err < p.stop_tol:
            trace.converged = True
        elif p.criterion == "mismatch" and norm < p.stop_tol:
            trace.converged = True
        elif norm < 1e-12:
            trace.converged = True
        if trace.converged:
            break
        ms = update_multipliers(ms, update_direction(cs, xs, ms), p)
    z_final = z if trace.converged else best[1]
    return dispatch_from_stacked(case, cs.net, z_final), trace
