"""Dense convex quadratic programming by a primal active-set method.

Solves

    minimize    0.5 x'Qx + c'x + offset
    subject to  A x  = b
                G x <= h

for small dense problems. A phase-1 linear program finds a feasible start
when none is supplied. Steps are computed in the null space of the working
set, so positive semidefinite (rank-deficient) Q is handled: zero-curvature
descent directions are followed as rays until a constraint blocks them, and
an unblocked ray means the problem is unbounded.
"""

from dataclasses import dataclass, field

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
ITERATION_LIMIT = "iteration_limit"
DUAL_INFEASIBLE = "dual_infeasible"


def _as_matrix(M, ncols):
    if M is None:
        return np.zeros((0, ncols))
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return np.zeros((0, ncols))
    return M


def _as_vector(v):
    if v is None:
        return np.zeros(0)
    return np.atleast_1d(np.asarray(v, dtype=float))


@dataclass
class QpProblem:
    """A QP in canonical form. ``offset`` is a constant added to the objective."""

    Q: np.ndarray
    c: np.ndarray
    A: np.ndarray = None
    b: np.ndarray = None
    G: np.ndarray = None
    h: np.ndarray = None
    offset: float = 0.0

    def __post_init__(self):
        self.c = _as_vector(self.c)
        n = self.c.size
        self.Q = np.asarray(self.Q, dtype=float).reshape(n, n)
        self.A = _as_matrix(self.A, n)
        self.b = _as_vector(self.b)
        self.G = _as_matrix(self.G, n)
        self.h = _as_vector(self.h)
        if self.A.shape != (self.b.size, n):
            raise ValueError(f"A has shape {self.A.shape}, expected ({self.b.size}, {n})")
        if self.G.shape != (self.h.size, n):
            raise ValueError(f"G has shape {self.G.shape}, expected ({self.h.size}, {n})")
        if not np.allclose(self.Q, self.Q.T, rtol=0.0, atol=1e-12):
            raise ValueError("Q is not symmetric")

    @property
    def n(self):
        return self.c.size

    def objective(self, x):
        return float(0.5 * x @ self.Q @ x + self.c @ x + self.offset)


@dataclass
class QpSolution:
    x: np.ndarray
    eq_duals: np.ndarray
    ineq_duals: np.ndarray
    objective: float
    status: str
    iterations: int = 0
    active_set: list = field(default_factory=list)

    @property
    def optimal(self):
        return self.status == OPTIMAL


def kkt_residuals(p, sol):
    """Return (stationarity, primal_eq, primal_ineq, complementarity) sup-norms."""
    x, y, mu = sol.x, sol.eq_duals, sol.ineq_duals
    stat = p.Q @ x + p.c + p.A.T @ y + p.G.T @ mu
    slack = p.G @ x - p.h
    return (
        float(np.max(np.abs(stat), initial=0.0)),
        float(np.max(np.abs(p.A @ x - p.b), initial=0.0)),
        float(np.max(slack, initial=0.0)),
        float(np.max(np.abs(mu * slack), initial=0.0)),
    )


def _null_space(M, n):
    if M.shape[0] == 0:
        return np.eye(n)
    _, s, vt = np.linalg.svd(M)
    rank = int(np.sum(s > 1e-12 * max(1.0, s[0])))
    return vt[rank:].T


def _initial_working_set(A, G, h, x, candidates, tol):
    """Rows of ``candidates`` tight at ``x`` whose normals stay linearly
    independent of the equalities and of each other."""
    W = []
    M = A
    rank = np.linalg.matrix_rank(M) if M.shape[0] else 0
    for i in sorted(set(candidates)):
        if abs(G[i] @ x - h[i]) > tol * max(1.0, abs(h[i])):
            continue
        trial = np.vstack([M, G[i]])
        r = np.linalg.matrix_rank(trial)
        if r > rank:
            W.append(i)
            M, rank = trial, r
    return W


def _active_set(Q, c, A, G, h, x, max_iter, dual_tol, W0=()):
    """Primal active-set iterations from the feasible point ``x``.

    ``W0`` seeds the working set (rows not tight at ``x`` are ignored).
    Returns (status, x, working_set, multipliers, iterations) where the
    multipliers are stacked (equality, working-set inequality).
    """
    n = x.size
    W = _initial_working_set(A, G, h, x, W0, dual_tol) if len(W0) else []
    y = np.zeros(A.shape[0])
    for it in range(1, max_iter + 1):
        g = Q @ x + c
        M = np.vstack([A, G[W]]) if W else A
        Z = _null_space(M, n)
        p = np.zeros(n)
        ray = False
        if Z.shape[1] > 0:
            lam, V = np.linalg.eigh(Z.T @ Q @ Z)
            w = V.T @ (Z.T @ g)
            flat = lam <= 1e-10 * max(1.0, float(np.max(np.abs(lam))))
            if np.max(np.abs(w[flat]), initial=0.0) > 1e-12 * max(1.0, float(np.max(np.abs(g)))):
                p = -Z @ (V[:, flat] @ w[flat])
                ray = True
            else:
                curved = ~flat
                p = -Z @ (V[:, curved] @ (w[curved] / lam[curved]))

        if np.max(np.abs(p)) <= 1e-12 * max(1.0, float(np.max(np.abs(x)))):
            if M.shape[0]:
                mult = np.linalg.lstsq(M.T, -g, rcond=None)[0]
            else:
                mult = np.zeros(0)
            mu_w = mult[A.shape[0]:]
            if not W or np.min(mu_w) >= -dual_tol:
                return OPTIMAL, x, W, mult, it
            worst = np.min(mu_w)
            drop = min(W[j] for j in range(len(W)) if mu_w[j] == worst)
            W.remove(drop)
            continue

        step = np.inf if ray else 1.0
        blocking = None
        Gp = G @ p
        for i in range(G.shape[0]):
            if i in W or Gp[i] <= 1e-14 * max(1.0, float(np.max(np.abs(p)))):
                continue
            alpha = max(0.0, (h[i] - G[i] @ x) / Gp[i])
            if alpha < step:
                step = alpha
                blocking = i
        if blocking is None and ray:
            return DUAL_INFEASIBLE, x, W, y, it
        x = x + step * p
        if blocking is not None:
            W.append(blocking)
            W.sort()
    return ITERATION_LIMIT, x, W, None, max_iter


def _phase_one(p, tol, max_iter):
    n = p.n
    if p.A.shape[0]:
        x = np.linalg.lstsq(p.A, p.b, rcond=None)[0]
        if np.max(np.abs(p.A @ x - p.b)) > tol * max(1.0, float(np.max(np.abs(p.b)))):
            return None
    else:
        x = np.zeros(n)
    viol = float(np.max(p.G @ x - p.h, initial=0.0))
    if viol <= 0.0:
        return x
    # minimize t  s.t.  Ax = b, Gx - t <= h, t >= 0
    m = p.G.shape[0]
    Qa = np.zeros((n + 1, n + 1))
    ca = np.zeros(n + 1)
    ca[n] = 1.0
    Aa = np.hstack([p.A, np.zeros((p.A.shape[0], 1))])
    Ga = np.vstack([np.hstack([p.G, -np.ones((m, 1))]), np.eye(1, n + 1, n) * -1.0])
    ha = np.concatenate([p.h, [0.0]])
    status, z, _, _, _ = _active_set(Qa, ca, Aa, Ga, ha, np.append(x, viol), max_iter, tol)
    if status != OPTIMAL or z[n] > tol:
        return None
    return z[:n]


def solve_qp(p, tol=1e-8, max_iter=None, x0=None, active0=()):
    """Solve ``p`` to tolerance ``tol``.

    ``x0`` is an optional warm start; it is used only if it is feasible,
    otherwise a phase-1 problem supplies the starting point. ``active0``
    (inequality row indices, e.g. a previous solution's ``active_set``)
    seeds the working set when ``x0`` is used.
    """
    n = p.n
    if n:
        eig = np.linalg.eigvalsh(p.Q)
        if eig[0] < -1e-10 * max(1.0, abs(eig[-1])):
            raise ValueError(f"Q is not positive semidefinite (min eigenvalue {eig[0]:.3e})")
    if max_iter is None:
        max_iter = 10 * (n + p.A.shape[0] + p.G.shape[0])
    max_iter = max(max_iter, 1)

    x = None
    seed = ()
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float)
        if (np.max(np.abs(p.A @ x0 - p.b), initial=0.0) <= tol
                and np.max(p.G @ x0 - p.h, initial=0.0) <= tol):
            x = x0
            seed = active0
    if x is None:
        x = _phase_one(p, tol, max_iter)
    if x is None:
        return QpSolution(np.full(n, np.nan), np.zeros(p.A.shape[0]),
                          np.zeros(p.G.shape[0]), np.nan, INFEASIBLE)

    status, x, W, mult, iters = _active_set(p.Q, p.c, p.A, p.G, p.h, x, max_iter, tol, seed)
    y = np.zeros(p.A.shape[0])
    mu = np.zeros(p.G.shape[0])
    if status == OPTIMAL:
        y = mult[: p.A.shape[0]]
        mu[W] = np.maximum(mult[p.A.shape[0]:], 0.0)
    return QpSolution(x, y, mu, p.objective(x), status, iters, list(W))
