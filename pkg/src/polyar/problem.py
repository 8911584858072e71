"""Problem, configuration and verdict types shared by the solver layers."""

from __future__ import annotations

import enum
import os
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .geometry import Box
from .polynomial import Polynomial

SENSES = ("<=", "<", ">=", ">", "=")


class Status(enum.Enum):
    SAT = "sat"
    UNSAT = "unsat"
    UNKNOWN = "unknown"
    TIMEOUT = "timeout"

    @property
    def exit_code(self) -> int:
        return {"sat": 0, "unsat": 1, "unknown": 2, "timeout": 3}[self.value]


def default_workers() -> int:
    env = os.environ.get("POLYAR_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


@dataclass
class Config:
    """Solver knobs.  ``vol_threshold`` is absolute; ``None`` means
    ``vol_threshold_rel`` times the domain volume."""

    vol_threshold: float | None = None
    vol_threshold_rel: float = 1e-3
    epsilon: float = 1e-6
    timeout_s: float = 3600.0
    max_workers: int = field(default_factory=default_workers)
    subsolver: str = "internal"
    template: str = "simplex"
    seed: int = 0
    refine_budget: int = 500
    min_gain: float = 0.01
    sat_tol: float = 1e-9
    min_width_rel: float = 1e-9
    node_limit: int = 100_000
    local_search: bool = True
    polish_depth: int = 4
    certificates: bool = True  # LP-weighted refutations at shallow nodes and on the whole domain
    presolve_starts: int = 16  # local witness attempts on the whole domain; 0 disables
    smt_local_assignments: int = 64  # Boolean assignments tried by local search first; 0 disables
    max_neg_regions: int = 400
    use_cache: bool = True
    minimize_core: bool = False

    def __post_init__(self):
        if self.template not in ("simplex", "axis"):
            raise ValueError(f"unknown template kind {self.template!r}")
        if not (self.subsolver == "internal" or self.subsolver.startswith("external:")):
            raise ValueError("subsolver must be 'internal' or 'external:<path>'")
        if self.max_workers < 1:
            raise ValueError("max_workers must be at least 1")

    def threshold_for(self, domain: Box) -> float:
        if self.vol_threshold is not None:
            return self.vol_threshold
        w = domain.widths
        return self.vol_threshold_rel * float(np.prod(w[w > 0])) if np.any(w > 0) else 1.0

    def as_dict(self) -> dict:
        return asdict(self)


def rewrite_sense(p: Polynomial, sense: str, eps: float) -> list[Polynomial]:
    """Express ``p <sense> 0`` as constraints of the form ``q <= 0``.

    Strict inequalities keep an ``eps`` margin; equalities become the band
    ``|p| <= eps``.
    """
    if sense == "<=":
        return [p]
    if sense == "<":
        return [p + eps]
    if sense == ">=":
        return [-p]
    if sense == ">":
        return [-p + eps]
    if sense == "=":
        return [p - eps, -p - eps]
    raise ValueError(f"unknown sense {sense!r}")


@dataclass
class ProblemF:
    """Conjunction of ``p_i(x) <= 0`` over a box domain."""

    domain: Box
    constraints: list
    names: list | None = None

    def __post_init__(self):
        self.constraints = list(self.constraints)
        if not self.constraints:
            raise ValueError("a problem needs at least one constraint")
        for p in self.constraints:
            if p.nvars != self.domain.nvars:
                raise ValueError(f"constraint has {p.nvars} variables, domain has {self.domain.nvars}")
        if self.names is None:
            self.names = [f"x{k + 1}" for k in range(self.nvars)]
        elif len(self.names) != self.nvars:
            raise ValueError("one name per variable required")

    @property
    def nvars(self) -> int:
        return self.domain.nvars

    @classmethod
    def from_senses(cls, domain: Box, items: Sequence[tuple[Polynomial, str]], eps: float = 1e-6,
                    names=None) -> "ProblemF":
        cons = []
        for p, sense in items:
            cons.extend(rewrite_sense(p, sense, eps))
        return cls(domain, cons, names)

    def max_violation(self, x) -> float:
        return max(p.eval(x) for p in self.constraints)

    def is_model(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=np.float64)
        return self.domain.contains(x) and all(p.eval(x) <= tol for p in self.constraints)


@dataclass
class Verdict:
    status: Status
    model: np.ndarray | None = None
    stats: dict = field(default_factory=dict)
    bool_model: dict | None = None
    message: str = ""

    @property
    def is_definitive(self) -> bool:
        return self.status in (Status.SAT, Status.UNSAT)

    def __repr__(self):
        m = None if self.model is None else np.array2string(self.model, precision=6)
        return f"Verdict({self.status.name}, model={m})"


def check_model(constraints, domain: Box, x, tol: float = 1e-9) -> bool:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (domain.nvars,) or not np.all(np.isfinite(x)):
        return False
    return domain.contains(x) and all(p.eval(x) <= tol for p in constraints)
