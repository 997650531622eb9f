"""Per-iteration convergence records and their CSV form."""

import csv
from dataclasses import dataclass, field


@dataclass(frozen=True)
class TraceRecord:
    iter: int
    mismatch_norm: float
    gen_load_error: float
    objective: float
    lam: tuple
    mu: tuple
    wall_time_s: float

    def __post_init__(self):
        object.__setattr__(self, "lam", tuple(float(v) for v in self.lam))
        object.__setattr__(self, "mu", tuple(float(v) for v in self.mu))


@dataclass
class ConvergenceTrace:
    """Iteration history of a decomposition run.

    ``objective`` is the dual function value for LR and the augmented
    Lagrangian value for ALR. ``area_objectives`` holds the per-area
    subproblem values of each iteration; it is not part of the CSV.
    """

    method: str
    records: list = field(default_factory=list)
    area_objectives: list = field(default_factory=list)
    converged: bool = False
    annotations: set = field(default_factory=set)

    def append(self, record, area_objectives=()):
        if self.records and record.iter <= self.records[-1].iter:
            raise ValueError("trace iterations must be strictly increasing")
        if record.mismatch_norm < 0:
            raise ValueError("mismatch norm must be nonnegative")
        self.records.append(record)
        self.area_objectives.append(tuple(area_objectives))

    def __len__(self):
        return len(self.records)

    @property
    def last(self):
        return self.records[-1]

    @property
    def iterations(self):
        return self.records[-1].iter if self.records else 0

    def column(self, name):
        return [getattr(r, name) for r in self.records]

    def header(self):
        n_lam = len(self.records[0].lam) if self.records else 0
        n_mu = len(self.records[0].mu) if self.records else 0
        return (["iter", "mismatch_norm", "gen_load_error", "objective"]
                + [f"lambda_{i + 1}" for i in range(n_lam)]
                + [f"mu_{j + 1}" for j in range(n_mu)]
                + ["wall_time_s"])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.header())
            for r in self.records:
                w.writerow([r.iter] + [repr(float(v)) for v in
                                       (r.mismatch_norm, r.gen_load_error, r.objective, *r.lam, *r.mu, r.wall_time_s)])

    @classmethod
    def from_csv(cls, path, method=""):
        trace = cls(method)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header = rows[0]
        lam_cols = [i for i, h in enumerate(header) if h.startswith("lambda_")]
        mu_cols = [i for i, h in enumerate(header) if h.startswith("mu_")]
        for row in rows[1:]:
            trace.append(TraceRecord(
                iter=int(row[0]),
                mismatch_norm=float(row[1]),
                gen_load_error=float(row[2]),
                objective=float(row[3]),
                lam=tuple(float(row[i]) for i in lam_cols),
                mu=tuple(float(row[i]) for i in mu_cols),
                wall_time_s=float(row[-1]),
            ))
        return trace
