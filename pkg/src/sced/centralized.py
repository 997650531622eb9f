"""Centralized SCED: the whole network as one QP.

Decision vector: every generator output, then every non-slack bus angle.
Nodal balances are equality rows, generator limits and both directions of
every line limit are inequality rows.
"""

from dataclasses import dataclass

import numpy as np

from .network import linear_network
from .qp import QpProblem, solve_qp


class InfeasibleDispatchError(RuntimeError):
    pass


@dataclass
class DispatchSolution:
    """Generator outputs (case order), bus angles (bus id order), line flows
    (case line order), total cost in $/h and nodal prices (bus id order)."""

    p_g: np.ndarray
    theta: np.ndarray
    flows: np.ndarray
    objective_cost: float
    bus_prices: np.ndarray = None

    @property
    def total_generation(self):
        return float(np.sum(self.p_g))

    def gen_load_error(self, case):
        return abs(self.total_generation - case.total_load)


def sced_columns(case):
    """Indices of the stacked network vector kept as QP variables."""
    net = linear_network(case)
    slack = net.theta_index(case.slack_bus)
    return [j for j in range(net.n_z) if j != slack]


def generator_bound_rows(case, n_cols, col_of):
    G, h = [], []
    for k, g in enumerate(case.generators):
        row = np.zeros(n_cols)
        row[col_of[k]] = 1.0
        G += [row, -row]
        h += [g.p_max_pu, -g.p_min_pu]
    return G, h


def assemble_sced_qp(case):
    net = linear_network(case)
    cols = sced_columns(case)
    col_of = {j: i for i, j in enumerate(cols)}
    n = len(cols)
    ng = len(case.generators)

    Q = np.zeros((n, n))
    c = np.zeros(n)
    for k, g in enumerate(case.generators):
        Q[col_of[k], col_of[k]] = 2.0 * g.cost_c
        c[col_of[k]] = g.cost_b
    offset = sum(g.cost_a for g in case.generators)

    A = net.net_export[:, cols]
    b = -net.loads

    G, h = generator_bound_rows(case, n, {k: col_of[k] for k in range(ng)})
    for k, ln in enumerate(case.lines):
        row = net.flow[k, cols]
        G += [row, -row]
        h += [ln.f_max_pu, ln.f_max_pu]
    return QpProblem(Q, c, A, b, np.array(G).reshape(-1, n), np.array(h), offset=offset)


def solve_centralized(case, tol=1e-8):
    p = assemble_sced_qp(case)
    sol = solve_qp(p, tol=tol)
    if not sol.optimal:
        raise InfeasibleDispatchError(f"centralized SCED not solved: {sol.status}")
    net = linear_network(case)
    z = np.zeros(net.n_z)
    z[sced_columns(case)] = sol.x
    ng = len(case.generators)
    p_g = z[:ng].copy()
    return DispatchSolution(
        p_g=p_g,
        theta=z[ng:].copy(),
        flows=net.flow @ z,
        objective_cost=case.total_cost(p_g),
        bus_prices=sol.eq_duals.copy(),
    )
