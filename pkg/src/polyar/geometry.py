"""Boxes, simplicial polytopes and the maximum-volume inscribed box."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class DegenerateSimplex(ValueError):
    """Vertices are affinely dependent; no full-dimensional simplex exists."""


class EmptyInterior(ValueError):
    """The polytope has no interior, so no box of positive volume fits."""


class Box:
    """Closed axis-aligned box ``[lo_1, hi_1] x ... x [lo_n, hi_n]``."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi):
        lo = np.array(lo, dtype=np.float64).reshape(-1)
        hi = np.array(hi, dtype=np.float64).reshape(-1)
        if lo.shape != hi.shape:
            raise ValueError("lower and upper bound vectors differ in length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("box bounds must be finite")
        if np.any(lo > hi):
            raise ValueError(f"inverted bounds: lo={lo}, hi={hi}")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def __setattr__(self, name, value):
        raise AttributeError("Box is immutable")

    def __getstate__(self):
        return (self.lo.copy(), self.hi.copy())

    def __setstate__(self, state):
        lo, hi = state
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def from_bounds(cls, bounds: Iterable[Sequence[float]]) -> "Box":
        bounds = [tuple(b) for b in bounds]
        return cls([b[0] for b in bounds], [b[1] for b in bounds])

    @classmethod
    def unit(cls, n: int) -> "Box":
        return cls(np.zeros(n), np.ones(n))

    @property
    def nvars(self) -> int:
        return self.lo.shape[0]

    @property
    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def bounds(self) -> list[tuple[float, float]]:
        return [(float(a), float(b)) for a, b in zip(self.lo, self.hi)]

    def volume(self, dims: Sequence[int] | None = None) -> float:
        w = self.widths if dims is None else self.widths[list(dims)]
        return float(np.prod(w))

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=np.float64)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def contains_box(self, other: "Box", tol: float = 0.0) -> bool:
        return bool(np.all(other.lo >= self.lo - tol) and np.all(other.hi <= self.hi + tol))

    def intersect(self, other: "Box") -> "Box | None":
        lo = np.maximum(self.lo, other.lo)
        hi = np.minimum(self.hi, other.hi)
        if np.any(lo > hi):
            return None
        return Box(lo, hi)

    def clamp(self, x) -> np.ndarray:
        return np.minimum(np.maximum(np.asarray(x, dtype=np.float64), self.lo), self.hi)

    def corners(self) -> np.ndarray:
        n = self.nvars
        idx = (np.arange(2 ** n)[:, None] >> np.arange(n)[None, :]) & 1
        return np.where(idx == 1, self.hi[None, :], self.lo[None, :])

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return self.lo + (self.hi - self.lo) * rng.random((count, self.nvars))

    def project(self, dims: Sequence[int]) -> "Box":
        dims = list(dims)
        return Box(self.lo[dims], self.hi[dims])

    def replace(self, dims: Sequence[int], sub: "Box") -> "Box":
        """Copy of this box with the coordinates ``dims`` taken from ``sub``."""
        lo, hi = self.lo.copy(), self.hi.copy()
        lo[list(dims)] = sub.lo
        hi[list(dims)] = sub.hi
        return Box(lo, hi)

    def scaled(self, factor: float) -> "Box":
        c = self.center
        half = 0.5 * self.widths * factor
        return Box(np.maximum(c - half, self.lo), np.minimum(c + half, self.hi))

    def __eq__(self, other):
        if not isinstance(other, Box):
            return NotImplemented
        return np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    def __hash__(self):
        return hash((self.lo.tobytes(), self.hi.tobytes()))

    def __repr__(self):
        inner = " x ".join(f"[{a:.6g}, {b:.6g}]" for a, b in zip(self.lo, self.hi))
        return f"Box({inner})"


def volume(b: Box) -> float:
    return b.volume()


def longest_dim(b: Box, dims: Sequence[int] | None = None) -> int:
    """Index of the widest coordinate; ties go to the lowest index."""
    w = b.widths
    if dims is None:
        return int(np.argmax(w))
    dims = list(dims)
    return dims[int(np.argmax(w[dims]))]


def half_div(b: Box, dims: Sequence[int] | None = None) -> tuple[Box, Box]:
    """Split ``b`` at the midpoint of its longest dimension (restricted to ``dims``)."""
    if b.volume(dims) <= 0.0:
        raise ValueError("cannot bisect a box of zero volume")
    k = longest_dim(b, dims)
    mid = b.lo[k] + 0.5 * (b.hi[k] - b.lo[k])
    hi1 = b.hi.copy()
    hi1[k] = mid
    lo2 = b.lo.copy()
    lo2[k] = mid
    return Box(b.lo, hi1), Box(lo2, b.hi)


def _subtract_one(a: Box, cut: Box) -> list[Box]:
    ilo = np.maximum(a.lo, cut.lo)
    ihi = np.minimum(a.hi, cut.hi)
    wide = a.widths > 0
    if np.any(ilo > ihi) or np.any((ilo == ihi) & wide):
        return [a]
    out = []
    lo, hi = a.lo.copy(), a.hi.copy()
    for k in range(a.nvars):
        if lo[k] < ilo[k]:
            h = hi.copy()
            h[k] = ilo[k]
            out.append(Box(lo.copy(), h))
        if ihi[k] < hi[k]:
            l = lo.copy()
            l[k] = ihi[k]
            out.append(Box(l, hi.copy()))
        lo[k], hi[k] = ilo[k], ihi[k]
    return out


def box_difference(b: Box, cut: Sequence[Box]) -> list[Box]:
    """Closure of ``b`` minus the union of ``cut`` as interior-disjoint boxes.

    Cuts are subtracted in the given order; zero-width slabs are dropped.
    """
    pieces = [b]
    wide = b.widths > 0
    for c in cut:
        nxt = []
        for p in pieces:
            for q in _subtract_one(p, c):
                if not np.any((q.widths == 0) & wide):
                    nxt.append(q)
        pieces = nxt
    return pieces


@dataclass(frozen=True, eq=False)
class Polytope:
    """``{x : normals @ x <= offsets}``, optionally with its vertex list."""

    normals: np.ndarray
    offsets: np.ndarray
    vertices: np.ndarray | None = None

    @property
    def nvars(self) -> int:
        return self.normals.shape[1]

    def contains(self, x, tol: float = 1e-8) -> bool:
        return bool(np.all(self.normals @ np.asarray(x) <= self.offsets + tol))

    @classmethod
    def from_box(cls, b: Box) -> "Polytope":
        n = b.nvars
        eye = np.eye(n)
        return cls(np.vstack([eye, -eye]), np.concatenate([b.hi, -b.lo]))


@dataclass(frozen=True, eq=False)
class TemplateSet:
    directions: np.ndarray = field()

    def __post_init__(self):
        d = np.asarray(self.directions, dtype=np.float64)
        if d.ndim != 2 or d.shape[0] != d.shape[1] + 1:
            raise ValueError("a template set holds n+1 directions in R^n")
        if not np.allclose(np.linalg.norm(d, axis=1), 1.0, atol=1e-12):
            raise ValueError("template directions must be unit vectors")
        if np.linalg.matrix_rank(d) < d.shape[1]:
            raise ValueError("template directions must span R^n")
        object.__setattr__(self, "directions", d)

    @property
    def nvars(self) -> int:
        return self.directions.shape[1]

    def __iter__(self):
        return iter(self.directions)

    def __len__(self):
        return self.directions.shape[0]


def default_templates(n: int) -> TemplateSet:
    """Unit vectors pointing at the vertices of a regular simplex centered at 0."""
    if n < 1:
        raise ValueError("dimension must be positive")
    # Helmert basis of the hyperplane sum(z) = 0 in R^(n+1)
    H = np.zeros((n, n + 1))
    for j in range(1, n + 1):
        H[j - 1, :j] = 1.0
        H[j - 1, j] = -float(j)
        H[j - 1] /= math.sqrt(j * (j + 1))
    v = H.T.copy()
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return TemplateSet(v)


def axis_templates(n: int) -> TemplateSet:
    """Negative coordinate axes plus the normalized all-ones direction."""
    if n < 1:
        raise ValueError("dimension must be positive")
    d = np.vstack([-np.eye(n), np.full((1, n), 1.0 / math.sqrt(n))])
    return TemplateSet(d)


def make_templates(kind: str, n: int) -> TemplateSet:
    if kind == "simplex":
        return default_templates(n)
    if kind == "axis":
        return axis_templates(n)
    raise ValueError(f"unknown template kind {kind!r}")


def convex_hull_simplex(vertices) -> Polytope:
    """H-representation of the simplex spanned by n+1 points in R^n."""
    V = np.asarray(vertices, dtype=np.float64)
    if V.ndim != 2 or V.shape[0] != V.shape[1] + 1:
        raise ValueError("need exactly n+1 points in R^n")
    n = V.shape[1]
    v0 = V[0]
    E = V[1:] - v0
    scale = float(np.max(np.linalg.norm(V[:, None, :] - V[None, :, :], axis=2)))
    if scale == 0.0:
        raise DegenerateSimplex("all vertices coincide")
    if n == 1:
        a, b = float(V.min()), float(V.max())
        if (b - a) / max(abs(a), abs(b), scale) < 1e-10:
            raise DegenerateSimplex("interval endpoints coincide")
        return Polytope(np.array([[1.0], [-1.0]]), np.array([b, -a]), np.array([[a], [b]]))
    if abs(np.linalg.det(E / scale)) < 1e-10:
        raise DegenerateSimplex("vertices are affinely dependent")
    # barycentric coordinates relative to v0: lambda = R @ [x - v0; 1]
    M = np.vstack([np.hstack([np.zeros((n, 1)), E.T]), np.ones((1, n + 1))])
    R = np.linalg.inv(M)
    normals = -R[:, :n]
    offsets = R[:, n].copy()
    norms = np.linalg.norm(normals, axis=1)
    normals = normals / norms[:, None]
    offsets = offsets / norms + normals @ v0
    return Polytope(normals, offsets, V.copy())


def _chebyshev_center(P: Polytope) -> tuple[np.ndarray, float]:
    from scipy.optimize import linprog

    A = P.normals
    norms = np.linalg.norm(A, axis=1)
    n = A.shape[1]
    c = np.zeros(n + 1)
    c[-1] = -1.0
    res = linprog(c, A_ub=np.hstack([A, norms[:, None]]), b_ub=P.offsets,
                  bounds=[(None, None)] * n + [(0, None)], method="highs")
    if res.status != 0:
        raise EmptyInterior(f"interior point search failed: {res.message}")
    return res.x[:n], float(res.x[-1])


def _axis_aligned_box(P: Polytope) -> Box | None:
    A, c = P.normals, P.offsets
    if np.any(np.count_nonzero(A, axis=1) != 1):
        return None
    n = A.shape[1]
    lo = np.full(n, -np.inf)
    hi = np.full(n, np.inf)
    for row, off in zip(A, c):
        k = int(np.flatnonzero(row)[0])
        bound = off / row[k]
        if row[k] > 0:
            hi[k] = min(hi[k], bound)
        else:
            lo[k] = max(lo[k], bound)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise EmptyInterior("polytope is unbounded")
    if np.any(hi <= lo):
        raise EmptyInterior("polytope has no interior")
    return Box(lo, hi)


def _simplex_box(P: Polytope) -> Box | None:
    """Closed-form optimum when ``P`` has exactly n+1 facets (a simplex).

    The facet normals of a bounded simplex have a strictly positive null
    combination ``mu' A = 0``.  The KKT conditions of the log-volume program
    then force every facet to be active with multipliers proportional to
    ``mu``, which gives the widths ``w_k = 2 mu'c / (n (mu'|A|)_k)`` and a
    consistent linear system ``A l = c - max(A, 0) w`` for the lower corner.
    Returns None when the data does not look like a bounded simplex.
    """
    A, c = P.normals, P.offsets
    m, n = A.shape
    if m != n + 1:
        return None
    _, sv, vt = np.linalg.svd(A.T)
    mu = vt[-1]
    if mu.sum() < 0:
        mu = -mu
    if sv[-1] <= 1e-12 * sv[0] or np.any(mu <= 1e-14 * np.abs(mu).max()):
        return None
    muc = float(mu @ c)
    if not muc > 0:
        raise EmptyInterior("polytope has no interior")
    weight = mu @ np.abs(A)
    w = 2.0 * muc / (n * weight)
    l = np.linalg.lstsq(A, c - np.maximum(A, 0.0) @ w, rcond=None)[0]
    u = l + w
    # absorb rounding so the corners stay inside
    excess = np.maximum(A, 0.0) @ u - np.maximum(-A, 0.0) @ l - c
    if np.any(excess > 0):
        shrink = np.max(excess / (np.abs(A) @ w))
        pad = 2.0 * shrink * w
        l, u = l + pad, u - pad
    if np.any(u <= l):
        raise EmptyInterior("no box of positive volume fits")
    return Box(l, u)


def inscribed_box(P: Polytope, gap: float = 1e-9, method: str = "auto") -> Box:
    """Maximum-volume axis-aligned box inside ``P``.

    Maximizes ``sum_k log(u_k - l_k)`` subject to
    ``sum_k (max(a_ik, 0) u_k - max(-a_ik, 0) l_k) <= c_i`` for every row.
    Axis-aligned H-representations and simplices are solved in closed form
    (``method="auto"``); other polytopes, or ``method="barrier"``, use a
    primal log-barrier Newton method run until the duality gap bound falls
    below ``gap``.
    """
    if method not in ("auto", "barrier"):
        raise ValueError(f"unknown method {method!r}")
    direct = _axis_aligned_box(P)
    if direct is not None:
        return direct
    if method == "auto":
        direct = _simplex_box(P)
        if direct is not None:
            return direct
    A = P.normals
    c = P.offsets
    n = A.shape[1]
    m = A.shape[0]
    if P.vertices is not None and P.vertices.shape[0] == n + 1:
        x0 = P.vertices.mean(axis=0)
        slack0 = c - A @ x0
    else:
        x0, _ = _chebyshev_center(P)
        slack0 = c - A @ x0
    scale = max(1.0, float(np.max(np.abs(x0))))
    l1 = np.abs(A).sum(axis=1)
    delta = 0.5 * float(np.min(slack0 / l1))
    if not delta > 1e-13 * scale:
        raise EmptyInterior("polytope has no interior")
    G = np.hstack([-np.maximum(-A, 0.0), np.maximum(A, 0.0)])  # acts on z = (l, u)
    z = np.concatenate([x0 - delta, x0 + delta])

    def parts(z):
        w = z[n:] - z[:n]
        s = c - G @ z
        return w, s

    def f(z, t):
        w, s = parts(z)
        if np.any(w <= 0) or np.any(s <= 0):
            return np.inf
        return -t * np.sum(np.log(w)) - np.sum(np.log(s))

    idx = np.arange(n)
    GW = np.zeros((m + n, 2 * n))  # rows: constraint slacks, then widths u - l
    GW[:m] = G
    GW[m + idx, idx] = 1.0
    GW[m + idx, n + idx] = -1.0
    t = float(m) / n
    final = False
    while True:
        for _ in range(60):
            w, s = parts(z)
            gw = t / w
            grad = G.T @ (1.0 / s)
            grad[:n] += gw
            grad[n:] -= gw
            H = G.T @ (G / (s ** 2)[:, None])
            hw = t / w ** 2
            H[idx, idx] += hw
            H[idx + n, idx + n] += hw
            H[idx, idx + n] -= hw
            H[idx + n, idx] -= hw
            try:
                dz = -np.linalg.solve(H, grad)
            except np.linalg.LinAlgError:
                dz = -np.linalg.lstsq(H, grad, rcond=None)[0]
            dec = -float(grad @ dz)
            if dec / 2 <= (1e-9 if final else 1e-2):
                break
            # largest step keeping slacks and widths positive
            rate = GW @ dz
            slack = np.concatenate([s, w])
            shrinking = rate > 0
            step = 1.0
            if shrinking.any():
                step = min(1.0, 0.99 * float(np.min(slack[shrinking] / rate[shrinking])))
            f0 = f(z, t)
            while step > 1e-14:
                znew = z + step * dz
                if f(znew, t) <= f0 - 0.25 * step * dec + 1e-13 * abs(f0):
                    break
                step *= 0.5
            else:
                break
            z = znew
        if final:
            break
        t *= 50.0
        if m / t < gap:
            final = True
    lo, hi = z[:n], z[n:]
    if np.any(hi - lo <= 0):
        raise EmptyInterior("no box of positive volume fits")
    return Box(lo, hi)


def inscribed_objective(b: Box) -> float:
    return float(np.sum(np.log(b.widths)))
