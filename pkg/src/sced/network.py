"""Affine network relations over the stacked vector z = (P_G, theta).

``z`` holds every generator output (case order) followed by every bus angle
(bus id order, slack included). Balance residuals use the sign

    g_i(z) = load_i + (flow out of bus i) - (generation at bus i)

so that the multiplier priced against g_i is a nodal price in $/h per pu.
"""

from dataclasses import dataclass

import numpy as np

from .dcpf import build_b_matrix


@dataclass(frozen=True)
class LinearNetwork:
    n_gen: int
    n_bus: int
    net_export: np.ndarray  # (n_bus, n_z): g = loads + net_export @ z
    flow: np.ndarray        # (n_line, n_z): F = flow @ z
    loads: np.ndarray

    @property
    def n_z(self):
        return self.n_gen + self.n_bus

    def p_index(self, k):
        return k

    def theta_index(self, bus):
        return self.n_gen + bus - 1

    def balance(self, z):
        return self.loads + self.net_export @ z


def linear_network(case):
    ng, nb = len(case.generators), case.n_bus
    gen_inc = np.zeros((nb, ng))
    for k, g in enumerate(case.generators):
        gen_inc[g.bus - 1, k] = 1.0
    net_export = np.hstack([-gen_inc, build_b_matrix(case)])
    flow = np.zeros((len(case.lines), ng + nb))
    for k, ln in enumerate(case.lines):
        flow[k, ng + ln.from_bus - 1] = ln.susceptance_pu
        flow[k, ng + ln.to_bus - 1] = -ln.susceptance_pu
    return LinearNetwork(ng, nb, net_export, flow, case.loads)
