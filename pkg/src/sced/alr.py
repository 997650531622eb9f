"""Augmented Lagrangian relaxation, solved by alternating directions.

Two areas only. The boundary-bus balances g_int are priced by lambda and
penalized by gamma/2 ||g_int||^2; each iteration solves area 1 with area 2
frozen, then area 2 with the fresh area-1 solution frozen, then moves
lambda by alpha * g_int.

The tie-line limit never enters the augmented Lagrangian. It is replaced by
a bound on each area's net export, |sum own P - sum own load| <= F_max,
which only touches that area's own generators.
"""

import time
from dataclasses import dataclass

import numpy as np

from .case import CaseValidationError
from .lr import area_constraints, classify_constraints, dispatch_from_stacked, _fill
from .qp import QpProblem, solve_qp
from .trace import ConvergenceTrace, TraceRecord

OSCILLATION_WINDOW = 50


class UnsupportedTopologyError(CaseValidationError):
    pass


@dataclass(frozen=True)
class AlrParams:
    alpha: float = 0.1
    gamma: float = 0.15
    lambda0: object = None
    stop_tol: float = 0.01
    max_iter: int = 1000
    criterion: str = "gen_load"

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.stop_tol <= 0:
            raise ValueError("stop_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.criterion not in ("gen_load", "mismatch", "none"):
            raise ValueError(f"unknown stopping criterion {self.criterion!r}")


def alr_structure(case, part):
    if len(part.areas) != 2:
        raise UnsupportedTopologyError(f"ALR needs exactly two areas, got {len(part.areas)}")
    if len(part.tie_lines) != 1:
        raise UnsupportedTopologyError(f"ALR needs exactly one tie-line, got {len(part.tie_lines)}")
    return classify_constraints(case, part)


def coupling_residual(cs, x1, x2):
    """g_int at the stitched point."""
    return cs.E @ cs.stitch([x1, x2]) + cs.e


def area_cost(cs, blk, x):
    p = x[: len(blk.gens)]
    return sum(cs.case.generators[k].cost(pk) for k, pk in zip(blk.gens, p))


def augmented_lagrangian_value(cs, x1, x2, lam, gamma):
    f = area_cost(cs, cs.blocks[0], x1) + area_cost(cs, cs.blocks[1], x2)
    g = coupling_residual(cs, x1, x2)
    return float(f + np.dot(lam, g) + 0.5 * gamma * np.dot(g, g))


def make_tie_bound_constraints(case, part, cs=None):
    """Per-area rows (G, h) on that area's own variables bounding its net
    export by the tie limit, as a list in area order."""
    cs = cs or alr_structure(case, part)
    fmax = case.lines[part.tie_lines[0]].f_max_pu
    rows = []
    for blk in cs.blocks:
        n = len(blk.cols)
        load = sum(case.buses[b - 1].load_pu for b in blk.buses)
        r = np.zeros(n)
        r[: len(blk.gens)] = 1.0
        rows.append((np.array([r, -r]), np.array([fmax + load, fmax - load])))
    return rows


def alr_step(cs, k, x_other, lam, gamma, tie_rows=None, warm=None):
    """Minimize area k's augmented Lagrangian with the other area frozen.

    ``warm`` is an optional previous QpSolution of the same area."""
    blk = cs.blocks[k]
    oth = cs.blocks[1 - k]
    case = cs.case
    n = len(blk.cols)
    Gk = cs.E[:, blk.cols]
    r0 = cs.E[:, oth.cols] @ x_other + cs.e
    Q = gamma * Gk.T @ Gk
    c = Gk.T @ lam + gamma * Gk.T @ r0
    for i, g in enumerate(blk.gens):
        Q[i, i] += 2.0 * case.generators[g].cost_c
        c[i] += case.generators[g].cost_b
    offset = sum(case.generators[g].cost_a for g in blk.gens) + float(lam @ r0) + 0.5 * gamma * float(r0 @ r0)
    A, b, G, h = area_constraints(cs, blk, angle_box=False)
    if tie_rows is None:
        tie_rows = make_tie_bound_constraints(case, cs.part, cs)
    G = np.vstack([G, tie_rows[k][0]])
    h = np.concatenate([h, tie_rows[k][1]])
    qp = QpProblem(Q, c, A, b, G, h, offset=offset)
    sol = solve_qp(qp, x0=warm.x, active0=warm.active_set) if warm is not None else solve_qp(qp)
    if not sol.optimal:
        raise RuntimeError(f"ALR subproblem of area {blk.area} failed: {sol.status}")
    return sol


def initial_foreign(cs, k):
    """Starting point for area k before its first solve: generation at the
    area's load split in proportion to capacity, angles zero."""
    blk = cs.blocks[k]
    gens = [cs.case.generators[g] for g in blk.gens]
    x = np.zeros(len(blk.cols))
    if gens:
        load = sum(cs.case.buses[b - 1].load_pu for b in blk.buses)
        cap = np.array([g.p_max_pu for g in gens])
        share = load * cap / cap.sum()
        x[: len(gens)] = np.clip(share, [g.p_min_pu for g in gens], cap)
    return x


def is_oscillating(norms, window=OSCILLATION_WINDOW):
    """True if some window of ``window`` iterations never improves on the
    mismatch norm at its start."""
    norms = np.asarray(norms, dtype=float)
    for v in range(len(norms) - window):
        if norms[v + 1: v + 1 + window].min() >= norms[v]:
            return True
    return False


def run_alr(case, part, p=None, cs=None):
    """Alternating-direction ALR; returns (DispatchSolution, ConvergenceTrace).

    Stops once |total generation - total load| < stop_tol. Without
    convergence the iterate with the smallest error is returned, and the
    trace is annotated "oscillating" when the mismatch stalls.
    """
    p = p or AlrParams()
    cs = cs or alr_structure(case, part)
    tie_rows = make_tie_bound_constraints(case, part, cs)
    lam = _fill(p.lambda0, cs.n_lambda, "lambda0")
    x2 = initial_foreign(cs, 1)
    s1 = s2 = None
    trace = ConvergenceTrace("alr")
    best = None
    start = time.perf_counter()
    for v in range(1, p.max_iter + 1):
        s1 = alr_step(cs, 0, x2, lam, p.gamma, tie_rows, warm=s1)
        x1 = s1.x
        s2 = alr_step(cs, 1, x1, lam, p.gamma, tie_rows, warm=s2)
        x2 = s2.x
        g = coupling_residual(cs, x1, x2)
        z = cs.stitch([x1, x2])
        err = abs(float(np.sum(z[: cs.net.n_gen])) - case.total_load)
        norm = float(np.linalg.norm(g))
        trace.append(TraceRecord(v, norm, err, augmented_lagrangian_value(cs, x1, x2, lam, p.gamma),
                                 tuple(lam), (), time.perf_counter() - start),
                     (s1.objective, s2.objective))
        if best is None or err < best[0]:
            best = (err, z)
        if (p.criterion == "gen_load" and err < p.stop_tol) or (p.criterion == "mismatch" and norm < p.stop_tol):
            trace.converged = True
            break
        lam = lam + p.alpha * g
    if not trace.converged and is_oscillating(trace.column("mismatch_norm")):
        trace.annotations.add("oscillating")
    z_final = z if trace.converged else best[1]
    return dispatch_from_stacked(case, cs.net, z_final), trace
