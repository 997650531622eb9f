"""Linear (DC) power flow."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AnglesSolution:
    theta: dict
    flows: dict

    def flow(self, i, j):
        if (i, j) in self.flows:
            return self.flows[(i, j)]
        return -self.flows[(j, i)]


def build_b_matrix(case):
    """Bus susceptance matrix (a weighted Laplacian); parallel lines add up."""
    n = case.n_bus
    B = np.zeros((n, n))
    for ln in case.lines:
        i, j, b = ln.from_bus - 1, ln.to_bus - 1, ln.susceptance_pu
        B[i, i] += b
        B[j, j] += b
        B[i, j] -= b
        B[j, i] -= b
    return B


def merged_edges(case):
    """Susceptance per unordered bus pair, keyed by the first orientation seen."""
    edges = {}
    for ln in case.lines:
        key = ln.key if (ln.to_bus, ln.from_bus) not in edges else (ln.to_bus, ln.from_bus)
        edges[key] = edges.get(key, 0.0) + ln.susceptance_pu
    return edges


def solve_dcpf(case, injections, balance_tol=1e-9):
    """Bus angles and line flows for net injections (bus id -> pu, or an array).

    The slack row and column are removed and the reduced system is solved
    directly; the slack angle is zero.
    """
    if isinstance(injections, dict):
        p = np.array([float(injections.get(b.id, 0.0)) for b in case.buses])
    else:
        p = np.asarray(injections, dtype=float)
    if p.shape != (case.n_bus,):
        raise ValueError(f"expected {case.n_bus} injections, got shape {p.shape}")
    if abs(p.sum()) > balance_tol:
        raise ValueError(f"injections do not balance (sum = {p.sum():.3e})")
    B = build_b_matrix(case)
    s = case.slack_bus - 1
    keep = [i for i in range(case.n_bus) if i != s]
    theta = np.zeros(case.n_bus)
    if keep:
        try:
            theta[keep] = np.linalg.solve(B[np.ix_(keep, keep)], p[keep])
        except np.linalg.LinAlgError:
            raise ValueError("reduced susceptance matrix is singular (disconnected network)") from None
    flows = {(i, j): b * (theta[i - 1] - theta[j - 1]) for (i, j), b in merged_edges(case).items()}
    return AnglesSolution({b.id: float(theta[b.id - 1]) for b in case.buses}, flows)
