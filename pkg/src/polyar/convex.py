"""Small convex subproblems over boxes.

Both solvers are best effort: every point they return has been re-evaluated
against the constraints and clamped into the box, but a ``None`` result is
not a proof of infeasibility.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linprog, minimize

from .geometry import Box

DEFAULT_TOL = 1e-8


def _check_symmetric(H: np.ndarray):
    H = np.asarray(H, dtype=np.float64)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("matrix must be square")
    scale = max(1.0, float(np.max(np.abs(H)))) if H.size else 1.0
    if not np.allclose(H, H.T, rtol=0.0, atol=1e-12 * scale):
        raise ValueError("matrix is not symmetric")
    return H


def is_psd(H, tol: float = 1e-10) -> bool:
    """True iff ``H + tol*I`` admits a diagonally pivoted LDL' factorization
    with no negative pivots."""
    M = _check_symmetric(H).copy()
    n = M.shape[0]
    M[np.diag_indices(n)] += tol
    for k in range(n):
        j = k + int(np.argmax(np.diag(M)[k:]))
        if j != k:
            M[[k, j]] = M[[j, k]]
            M[:, [k, j]] = M[:, [j, k]]
        d = M[k, k]
        if d < 0:
            return False
        if d == 0:
            # largest remaining diagonal is zero: PSD only if the rest vanishes
            return bool(np.all(M[k:, k:] == 0.0))
        M[k + 1:, k + 1:] -= np.outer(M[k + 1:, k], M[k, k + 1:]) / d
    return True


def is_nsd(H, tol: float = 1e-10) -> bool:
    return is_psd(-_check_symmetric(H), tol)


@dataclass(frozen=True, eq=False)
class ConvexConstraint:
    """``0.5 (x-o)' Q (x-o) + g.(x-o) + c <= 0`` with ``o = origin`` (zero by default).

    The origin lets Taylor relaxations keep their expansion point instead of
    re-expanding, which would cost accuracy.
    """

    Q: np.ndarray
    g: np.ndarray
    c: float
    origin: np.ndarray | None = None
    kind: str = field(init=False)

    def __post_init__(self):
        g = np.asarray(self.g, dtype=np.float64).reshape(-1)
        n = g.shape[0]
        Q = np.zeros((n, n)) if self.Q is None else _check_symmetric(self.Q)
        if Q.shape != (n, n):
            raise ValueError("Q and g dimensions disagree")
        o = np.zeros(n) if self.origin is None else np.asarray(self.origin, dtype=np.float64)
        kind = "affine" if not np.any(Q) else "quadratic"
        if kind == "quadratic" and not is_psd(Q, 1e-8):
            raise ValueError("quadratic constraint is not convex")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "kind", kind)

    @classmethod
    def affine(cls, g, c: float) -> "ConvexConstraint":
        return cls(None, g, c)

    @property
    def nvars(self) -> int:
        return self.g.shape[0]

    def value(self, x) -> float:
        d = np.asarray(x, dtype=np.float64) - self.origin
        return float(0.5 * d @ self.Q @ d + self.g @ d + self.c)

    __call__ = value

    def grad(self, x) -> np.ndarray:
        d = np.asarray(x, dtype=np.float64) - self.origin
        return self.Q @ d + self.g

    def affine_form(self) -> tuple[np.ndarray, float]:
        """(g, c0) with the constraint equal to ``g.x + c0`` (affine kind only)."""
        return self.g, self.c - float(self.g @ self.origin)


def _verified(x, cons: Sequence[ConvexConstraint], b: Box, tol: float):
    if x is None or not np.all(np.isfinite(x)):
        return None
    x = b.clamp(x)
    if all(con.value(x) <= tol for con in cons):
        return x
    return None


def _slack_lp(cons: Sequence[ConvexConstraint], b: Box, tol: float):
    """Point of the box maximizing the smallest normalized slack of affine constraints."""
    n = b.nvars
    rows, rhs = [], []
    for con in cons:
        g, c0 = con.affine_form()
        norm = float(np.linalg.norm(g))
        if norm == 0.0:
            if c0 > tol:
                return None
            continue
        rows.append(np.append(g, norm))
        rhs.append(-c0)
    if not rows:
        return b.center
    cap = float(np.max(b.widths)) + 1.0
    cost = np.zeros(n + 1)
    cost[-1] = -1.0
    bounds = [(float(l), float(h)) for l, h in zip(b.lo, b.hi)] + [(None, cap)]
    res = linprog(cost, A_ub=np.array(rows), b_ub=np.array(rhs), bounds=bounds, method="highs")
    if res.status != 0 or res.x is None:
        return None
    return res.x[:n]


def feasible_point(cons: Sequence[ConvexConstraint], b: Box, tol: float = DEFAULT_TOL):
    """Some point of ``b`` where every constraint is ``<= tol``, or None.

    Affine systems go to a max-slack LP; systems with quadratic rows minimize
    the largest constraint value with SLSQP, so the answer lands deep inside
    the feasible set when one exists.
    """
    cons = list(cons)
    if not cons:
        return b.center.copy()
    affine = [con for con in cons if con.kind == "affine"]
    x_aff = _slack_lp(affine, b, tol) if affine else b.center
    if x_aff is None:
        return None
    if len(affine) == len(cons):
        return _verified(x_aff, cons, b, tol)
    n = b.nvars

    def obj(z):
        return z[-1]

    def obj_grad(z):
        g = np.zeros(n + 1)
        g[-1] = 1.0
        return g

    constraints = []
    for con in cons:
        constraints.append({
            "type": "ineq",
            "fun": (lambda z, con=con: z[-1] - con.value(z[:n])),
            "jac": (lambda z, con=con: np.append(-con.grad(z[:n]), 1.0)),
        })
    for x0 in (np.asarray(x_aff, dtype=np.float64), b.center):
        t0 = max(con.value(x0) for con in cons)
        z0 = np.append(x0, t0)
        bounds = [(float(l), float(h)) for l, h in zip(b.lo, b.hi)] + [(None, None)]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = minimize(obj, z0, jac=obj_grad, bounds=bounds, constraints=constraints,
                           method="SLSQP", options={"maxiter": 200, "ftol": 1e-12})
        x = _verified(res.x[:n], cons, b, tol)
        if x is not None:
            return x
    return None


def minimize_linear(l, con: ConvexConstraint, b: Box, tol: float = DEFAULT_TOL):
    """Point of ``b`` minimizing ``l.x`` subject to ``con <= 0``, or None."""
    l = np.asarray(l, dtype=np.float64)
    if con.kind == "affine":
        return _min_linear_affine(l, con, b, tol)
    start = feasible_point([con], b, tol)
    if start is None:
        return None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = minimize(
            lambda x: float(l @ x), start, jac=lambda x: l,
            bounds=[(float(lo), float(hi)) for lo, hi in zip(b.lo, b.hi)],
            constraints=[{"type": "ineq", "fun": lambda x: -con.value(x),
                          "jac": lambda x: -con.grad(x)}],
            method="SLSQP", options={"maxiter": 300, "ftol": 1e-14},
        )
    x = _verified(res.x, [con], b, tol)
    if x is None or l @ x > l @ start:
        return start
    return x


def _min_linear_affine(l, con: ConvexConstraint, b: Box, tol: float):
    """Closed form: minimize l.x over the box cut by one half-space g.x <= -c0.

    Start from the box corner minimizing l.x.  If it violates the cut, move
    coordinates toward their g-decreasing bound in order of best exchange
    rate (objective increase per unit of constraint decrease), like a
    fractional knapsack.
    """
    g, c0 = con.affine_form()
    x = np.where(l > 0, b.lo, np.where(l < 0, b.hi, b.center))
    if g @ x + c0 <= 0:
        return _verified(x, [con], b, tol)
    # Coordinates with l == 0 are free: put them where they help the cut most.
    zero = l == 0
    x[zero] = np.where(g[zero] > 0, b.lo[zero], b.hi[zero])
    excess = float(g @ x + c0)
    if excess <= 0:
        return _verified(x, [con], b, tol)
    target = np.where(g > 0, b.lo, b.hi)
    gain = np.abs(g) * np.abs(target - x)  # constraint decrease available per coordinate
    cost = np.abs(l) * np.abs(target - x)
    cand = np.flatnonzero(gain > 0)
    with np.errstate(over="ignore"):  # subnormal gains just sort last
        rate = cost[cand] / gain[cand]
    for k in cand[np.argsort(rate, kind="stable")]:
        if gain[k] >= excess:
            x[k] += (target[k] - x[k]) * (excess / gain[k])
            excess = 0.0
            break
        x[k] = target[k]
        excess -= gain[k]
    if excess > 0:
        return None
    x = _verified(x, [con], b, tol)
    if x is None:
        # rounding pushed us just outside; the max-slack LP is a safe fallback
        x2 = _slack_lp([con], b, tol)
        return _verified(x2, [con], b, tol)
    return x
