"""Sparse multivariate polynomials with rigorous interval enclosures.

A :class:`Polynomial` stores its terms as an integer exponent matrix
(``T x n``) and a coefficient vector (``T``).  Instances are immutable and
kept in canonical form: no duplicate exponent rows, no zero coefficients,
rows sorted lexicographically.

Interval enclosures are computed per monomial with even-power tightening.
Floating-point rounding is handled by outward widening: every elementary
bound is pushed outward by four units of roundoff relative to its
magnitude, and sums use ``math.fsum`` (correctly rounded) before widening.
Bounds that are exactly zero stay zero, which keeps results such as
``x**2 >= 0`` exact.  Underflow into the subnormal range is not tracked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.special import comb

from .convex import is_nsd, is_psd
from .geometry import Box

_U = 2.0 ** -53
_REL = 4 * _U


def _down(v):
    return v - np.abs(v) * _REL


def _up(v):
    return v + np.abs(v) * _REL


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError(f"interval bounds must be finite, got [{self.lo}, {self.hi}]")
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def __contains__(self, v: float) -> bool:
        return self.lo <= v <= self.hi

    def intersect(self, other: "Interval") -> "Interval":
        return Interval(max(self.lo, other.lo), min(self.hi, other.hi))

    def mag(self) -> float:
        return max(abs(self.lo), abs(self.hi))


def _canonical(exps: np.ndarray, coefs: np.ndarray, nvars: int):
    """Merge duplicate exponent rows, drop zero coefficients, sort rows."""
    exps = np.asarray(exps, dtype=np.int64).reshape(-1, nvars)
    coefs = np.asarray(coefs, dtype=np.float64).reshape(-1)
    if exps.shape[0] == 0:
        return np.zeros((0, nvars), dtype=np.int64), np.zeros(0)
    if nvars == 0:
        c = math.fsum(coefs.tolist())
        if c == 0.0:
            return np.zeros((0, 0), dtype=np.int64), np.zeros(0)
        return np.zeros((1, 0), dtype=np.int64), np.array([c])
    if np.any(exps < 0):
        raise ValueError("negative exponent")
    radix = exps.max(axis=0) + 1
    if float(np.sum(np.log2(radix.astype(np.float64)))) < 62:
        mult = np.ones(nvars, dtype=np.int64)
        for k in range(nvars - 2, -1, -1):
            mult[k] = mult[k + 1] * radix[k + 1]
        keys = exps @ mult
        _, first, inv = np.unique(keys, return_index=True, return_inverse=True)
        uexps = exps[first]
    else:
        uexps, inv = np.unique(exps, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    ucoefs = np.bincount(inv, weights=coefs, minlength=uexps.shape[0])
    keep = ucoefs != 0.0
    uexps, ucoefs = uexps[keep], ucoefs[keep]
    order = np.lexsort(uexps.T[::-1]) if uexps.shape[0] else np.zeros(0, dtype=np.int64)
    return uexps[order], ucoefs[order]


class Polynomial:
    """Immutable sparse real polynomial in ``nvars`` variables."""

    __slots__ = ("nvars", "exps", "coefs", "_cache")

    def __init__(self, terms: Mapping[Sequence[int], float] | None = None, nvars: int | None = None):
        terms = dict(terms or {})
        if nvars is None:
            if not terms:
                raise ValueError("nvars is required for an empty term map")
            nvars = len(next(iter(terms)))
        for e in terms:
            if len(e) != nvars:
                raise ValueError(f"exponent vector {tuple(e)} does not have length {nvars}")
        exps = np.array([tuple(e) for e in terms], dtype=np.int64).reshape(-1, nvars)
        coefs = np.array(list(terms.values()), dtype=np.float64)
        self._set(*_canonical(exps, coefs, nvars), nvars)

    def _set(self, exps, coefs, nvars):
        exps.setflags(write=False)
        coefs.setflags(write=False)
        object.__setattr__(self, "nvars", int(nvars))
        object.__setattr__(self, "exps", exps)
        object.__setattr__(self, "coefs", coefs)
        object.__setattr__(self, "_cache", {})

    def __setattr__(self, name, value):
        raise AttributeError("Polynomial is immutable")

    def __getstate__(self):
        return (self.exps.copy(), self.coefs.copy(), self.nvars)

    def __setstate__(self, state):
        exps, coefs, nvars = state
        self._set(exps, coefs, nvars)

    # construction -------------------------------------------------------

    @classmethod
    def from_arrays(cls, exps, coefs, nvars: int) -> "Polynomial":
        obj = cls.__new__(cls)
        obj._set(*_canonical(exps, coefs, nvars), nvars)
        return obj

    @classmethod
    def _raw(cls, exps, coefs, nvars) -> "Polynomial":
        obj = cls.__new__(cls)
        obj._set(np.ascontiguousarray(exps, dtype=np.int64), np.ascontiguousarray(coefs, dtype=np.float64), nvars)
        return obj

    @classmethod
    def zero(cls, nvars: int) -> "Polynomial":
        return cls.from_arrays(np.zeros((0, nvars)), np.zeros(0), nvars)

    @classmethod
    def constant(cls, c: float, nvars: int) -> "Polynomial":
        return cls.from_arrays(np.zeros((1, nvars)), [c], nvars)

    @classmethod
    def variable(cls, k: int, nvars: int) -> "Polynomial":
        if not 0 <= k < nvars:
            raise IndexError(f"variable index {k} out of range for {nvars} variables")
        e = np.zeros((1, nvars), dtype=np.int64)
        e[0, k] = 1
        return cls.from_arrays(e, [1.0], nvars)

    @classmethod
    def variables(cls, nvars: int) -> list["Polynomial"]:
        return [cls.variable(k, nvars) for k in range(nvars)]

    # basic properties ---------------------------------------------------

    @property
    def terms(self) -> dict[tuple[int, ...], float]:
        return {tuple(int(v) for v in e): float(c) for e, c in zip(self.exps, self.coefs)}

    @property
    def nterms(self) -> int:
        return self.coefs.shape[0]

    @property
    def degree(self) -> int:
        if self.nterms == 0:
            return 0
        return int(self.exps.sum(axis=1).max())

    def is_zero(self) -> bool:
        return self.nterms == 0

    def is_constant(self) -> bool:
        return self.nterms == 0 or (self.nterms == 1 and not self.exps.any())

    def support(self) -> tuple[int, ...]:
        """Indices of variables that actually occur."""
        if "support" not in self._cache:
            used = np.flatnonzero(self.exps.any(axis=0)) if self.nterms else np.zeros(0, dtype=int)
            self._cache["support"] = tuple(int(k) for k in used)
        return self._cache["support"]

    def constant_term(self) -> float:
        if self.nterms and not self.exps[0].any():
            return float(self.coefs[0])
        return 0.0

    # evaluation ---------------------------------------------------------

    def eval(self, x) -> float:
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        if x.shape[0] != self.nvars:
            raise ValueError(f"point has {x.shape[0]} coordinates, polynomial has {self.nvars} variables")
        if self.nterms == 0:
            return 0.0
        mons = np.prod(x[None, :] ** self.exps, axis=1)
        return float(mons @ self.coefs)

    __call__ = eval

    def eval_many(self, points, chunk: int = 1 << 15) -> np.ndarray:
        X = np.asarray(points, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.nvars:
            raise ValueError(f"expected an (N, {self.nvars}) array of points")
        out = np.empty(X.shape[0])
        sup = self.support()
        for s in range(0, X.shape[0], chunk):
            blk = X[s:s + chunk]
            mons = np.ones((blk.shape[0], self.nterms))
            for k in sup:
                mons *= blk[:, k:k + 1] ** self.exps[:, k]
            out[s:s + chunk] = mons @ self.coefs
        return out

    # arithmetic ---------------------------------------------------------

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.nvars != self.nvars:
                raise ValueError(f"variable count mismatch: {self.nvars} vs {other.nvars}")
            return other
        if isinstance(other, (int, float, np.integer, np.floating)):
            return Polynomial.constant(float(other), self.nvars)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Polynomial.from_arrays(np.vstack([self.exps, other.exps]),
                                      np.concatenate([self.coefs, other.coefs]), self.nvars)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial._raw(self.exps, -self.coefs, self.nvars)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, np.integer, np.floating)):
            if other == 0:
                return Polynomial.zero(self.nvars)
            return Polynomial._raw(self.exps, self.coefs * float(other), self.nvars)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if self.nterms == 0 or other.nterms == 0:
            return Polynomial.zero(self.nvars)
        exps = (self.exps[:, None, :] + other.exps[None, :, :]).reshape(-1, self.nvars)
        coefs = np.outer(self.coefs, other.coefs).reshape(-1)
        return Polynomial.from_arrays(exps, coefs, self.nvars)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float, np.integer, np.floating)):
            return Polynomial._raw(self.exps, self.coefs / float(other), self.nvars)
        return NotImplemented

    def __pow__(self, k: int):
        if not isinstance(k, (int, np.integer)) or k < 0:
            raise ValueError("only non-negative integer powers are supported")
        result = Polynomial.constant(1.0, self.nvars)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return (self.nvars == other.nvars and self.exps.shape == other.exps.shape
                and np.array_equal(self.exps, other.exps) and np.array_equal(self.coefs, other.coefs))

    def __hash__(self):
        return hash((self.nvars, self.exps.tobytes(), self.coefs.tobytes()))

    def prune(self, rel_tol: float) -> "Polynomial":
        """Drop terms whose magnitude is below ``rel_tol`` times the largest."""
        if self.nterms == 0:
            return self
        keep = np.abs(self.coefs) > rel_tol * np.abs(self.coefs).max()
        return Polynomial._raw(self.exps[keep], self.coefs[keep], self.nvars)

    # calculus -----------------------------------------------------------

    def derivative(self, k: int) -> "Polynomial":
        if not 0 <= k < self.nvars:
            raise IndexError(k)
        mask = self.exps[:, k] > 0
        exps = self.exps[mask].copy()
        coefs = self.coefs[mask] * exps[:, k]
        exps[:, k] -= 1
        return Polynomial.from_arrays(exps, coefs, self.nvars)

    def gradient(self) -> list["Polynomial"]:
        if "grad" not in self._cache:
            self._cache["grad"] = [self.derivative(k) for k in range(self.nvars)]
        return self._cache["grad"]

    def hessian(self) -> list[list["Polynomial"]]:
        if "hess" not in self._cache:
            g = self.gradient()
            self._cache["hess"] = [[g[i].derivative(j) for j in range(self.nvars)] for i in range(self.nvars)]
        return self._cache["hess"]

    # change of variables --------------------------------------------------

    def shift(self, a) -> "Polynomial":
        """Return q with q(y) = p(a + y)."""
        exps, coefs, _, _ = _shift_arrays(self, np.asarray(a, dtype=np.float64))
        return Polynomial.from_arrays(exps, coefs, self.nvars)

    def project(self, dims: Sequence[int]) -> "Polynomial":
        """Restrict to the variables ``dims``; all other variables must be absent."""
        dims = list(dims)
        others = [k for k in range(self.nvars) if k not in set(dims)]
        if self.nterms and others and self.exps[:, others].any():
            raise ValueError("polynomial depends on a variable outside the projection")
        return Polynomial._raw(self.exps[:, dims], self.coefs, len(dims))

    def embed(self, dims: Sequence[int], nvars: int) -> "Polynomial":
        """Inverse of :meth:`project`: variable i becomes variable ``dims[i]``."""
        exps = np.zeros((self.nterms, nvars), dtype=np.int64)
        exps[:, list(dims)] = self.exps
        return Polynomial.from_arrays(exps, self.coefs, nvars)

    def fix(self, dims: Sequence[int], values) -> "Polynomial":
        """Substitute ``x[dims] = values`` (floating point, not outward rounded)."""
        dims = list(dims)
        if not dims or self.nterms == 0:
            return self
        vals = np.asarray(values, dtype=np.float64)
        factor = np.prod(vals[None, :] ** self.exps[:, dims], axis=1)
        exps = self.exps.copy()
        exps[:, dims] = 0
        return Polynomial.from_arrays(exps, self.coefs * factor, self.nvars)

    # display ------------------------------------------------------------

    def to_string(self, names: Sequence[str] | None = None) -> str:
        names = list(names) if names is not None else [f"x{k + 1}" for k in range(self.nvars)]
        if self.nterms == 0:
            return "0"
        parts = []
        for e, c in zip(self.exps, self.coefs):
            factors = [names[k] if v == 1 else f"{names[k]}^{v}" for k, v in enumerate(e) if v]
            if not factors:
                parts.append(repr(float(c)))
            elif c == 1.0:
                parts.append("*".join(factors))
            elif c == -1.0:
                parts.append("-" + "*".join(factors))
            else:
                parts.append(repr(float(c)) + "*" + "*".join(factors))
        return " + ".join(parts).replace("+ -", "- ")

    def __repr__(self):
        return f"Polynomial({self.to_string()}, nvars={self.nvars})"


def as_polynomial_list(polys: Iterable[Polynomial]) -> list[Polynomial]:
    polys = list(polys)
    if polys and len({p.nvars for p in polys}) != 1:
        raise ValueError("all polynomials must share the same number of variables")
    return polys


# ---------------------------------------------------------------------------
# interval enclosures


def _natural_bounds(exps: np.ndarray, coefs: np.ndarray, lo: np.ndarray, hi: np.ndarray):
    """Per-term outward bounds [tlo, thi] of c * x^e over the box.

    Each bound is a product of powers and the coefficient, with no additions,
    so one relative widening at the end covers all roundings: a power
    contributes at most 2 units of roundoff, each product one more.
    """
    T = coefs.shape[0]
    rlo = np.ones(T)
    rhi = np.ones(T)
    dims = np.flatnonzero(exps.any(axis=0)) if T else ()
    for k in dims:
        e = exps[:, k]
        a = lo[k] ** e
        b = hi[k] ** e
        plo = np.minimum(a, b)
        phi = np.maximum(a, b)
        if lo[k] < 0 < hi[k]:
            plo[(e % 2 == 0) & (e > 0)] = 0.0
        if not np.any(rlo < 0) and not np.any(plo < 0):
            rlo, rhi = rlo * plo, rhi * phi
        else:
            c1, c2, c3, c4 = rlo * plo, rlo * phi, rhi * plo, rhi * phi
            rlo = np.minimum(np.minimum(c1, c2), np.minimum(c3, c4))
            rhi = np.maximum(np.maximum(c1, c2), np.maximum(c3, c4))
    tlo = np.where(coefs >= 0, coefs * rlo, coefs * rhi)
    thi = np.where(coefs >= 0, coefs * rhi, coefs * rlo)
    gamma = (3 * int(exps.sum(axis=1).max(initial=0)) + 2 * len(dims) + 4) * _U
    return tlo - np.abs(tlo) * gamma, thi + np.abs(thi) * gamma


def _sum_down(v: np.ndarray) -> float:
    return float(_down(math.fsum(v.tolist())))


def _sum_up(v: np.ndarray) -> float:
    return float(_up(math.fsum(v.tolist())))


def _shift_plan(p: Polynomial):
    """Index data for expanding p(a + y) for arbitrary a.

    Term c*x^e contributes c * binom(e, f) * a^(e - f) to the coefficient of
    y^f for every 0 <= f <= e (componentwise)."""
    plan = p._cache.get("shift_plan")
    if plan is not None:
        return plan
    n = p.nvars
    fs, srcs = [], []
    for t, e in enumerate(p.exps):
        nz = np.flatnonzero(e)
        if nz.shape[0] == 0:
            grid = np.zeros((1, 0), dtype=np.int64)
        else:
            mesh = np.meshgrid(*[np.arange(e[k] + 1) for k in nz], indexing="ij")
            grid = np.stack([m.reshape(-1) for m in mesh], axis=1)
        f = np.zeros((grid.shape[0], n), dtype=np.int64)
        f[:, nz] = grid
        fs.append(f)
        srcs.append(np.full(grid.shape[0], t, dtype=np.int64))
    F = np.vstack(fs) if fs else np.zeros((0, n), dtype=np.int64)
    src = np.concatenate(srcs) if srcs else np.zeros(0, dtype=np.int64)
    E = p.exps[src]
    binom = np.prod(comb(E, F, exact=False), axis=1) if F.shape[0] else np.zeros(0)
    sup = list(p.support())
    D = (E - F)[:, sup]
    if F.shape[0]:
        uF, target = np.unique(F, axis=0, return_inverse=True)
        target = target.reshape(-1)
    else:
        uF, target = F, src
    fan_in = int(np.bincount(target).max()) if target.shape[0] else 0
    plan = (uF, target, src, D, binom, sup, fan_in)
    p._cache["shift_plan"] = plan
    return plan


def _shift_arrays(p: Polynomial, a: np.ndarray):
    """Expand p(a + y).  Returns exponents, coefficients, a per-coefficient
    rounding error bound, and the total degree of each output term."""
    n = p.nvars
    if a.shape != (n,):
        raise ValueError(f"shift point must have {n} coordinates")
    uF, target, src, D, binom, sup, fan_in = _shift_plan(p)
    if uF.shape[0] == 0:
        z = np.zeros(0)
        return uF, z, z, np.zeros(0, dtype=np.int64)
    pw = np.prod(a[sup][None, :] ** D, axis=1) if sup else np.ones(D.shape[0])
    base = p.coefs[src] * binom
    U = uF.shape[0]
    coefs = np.bincount(target, weights=base * pw, minlength=U)
    absc = np.bincount(target, weights=np.abs(base * pw), minlength=U)
    # each contribution carries at most 2n + deg + 4 roundings (powers,
    # products); the summation adds at most fan_in more
    gamma = (2 * n + p.degree + fan_in + 6) * 2 * _U
    err = absc * gamma * 1.01
    return uF, coefs, err, uF.sum(axis=1)


def _centered_data(p: Polynomial, box: Box):
    a = box.center
    r = _up(np.maximum(a - box.lo, box.hi - a))
    exps, coefs, err, tdeg = _shift_arrays(p, a)
    return a, r, exps, coefs, err, tdeg


def _err_bound(exps, err, r) -> float:
    if err.shape[0] == 0:
        return 0.0
    mons = np.prod(r[None, :] ** exps, axis=1)
    return float(_up(math.fsum((err * mons).tolist())) * 1.01)


def natural_enclosure(p: Polynomial, box: Box) -> Interval:
    """Term-by-term enclosure in the original coordinates."""
    _check_box(p, box)
    if p.nterms == 0:
        return Interval(0.0, 0.0)
    tlo, thi = _natural_bounds(p.exps, p.coefs, box.lo, box.hi)
    return Interval(_sum_down(tlo), _sum_up(thi))


def centered_enclosure(p: Polynomial, box: Box) -> Interval:
    """Term-by-term enclosure after re-expanding about the box center."""
    _check_box(p, box)
    if p.nterms == 0:
        return Interval(0.0, 0.0)
    a, r, exps, coefs, err, _ = _centered_data(p, box)
    if coefs.shape[0] == 0:
        e = _err_bound(exps, err, r)
        return Interval(-e, e)
    tlo, thi = _natural_bounds(exps, coefs, -r, r)
    e = _err_bound(exps, err, r)
    return Interval(float(_down(_sum_down(tlo) - e)), float(_up(_sum_up(thi) + e)))


def _check_box(p: Polynomial, box: Box):
    if box.nvars != p.nvars:
        raise ValueError(f"box has {box.nvars} dimensions, polynomial has {p.nvars} variables")


def interval_eval(p: Polynomial, box: Box) -> Interval:
    """Sound enclosure of the range of ``p`` over ``box``.

    Intersects the natural (term-wise) enclosure with the centered one;
    both are outward rounded.
    """
    nat = natural_enclosure(p, box)
    if p.degree <= 1 or nat.lo == nat.hi:
        return nat
    cen = centered_enclosure(p, box)
    lo, hi = max(nat.lo, cen.lo), min(nat.hi, cen.hi)
    if lo > hi:  # both enclosures are sound, so this only happens through rounding noise
        lo, hi = min(lo, hi), max(lo, hi)
    return Interval(lo, hi)


def eval(p: Polynomial, x) -> float:  # noqa: A001 - mirrors the operation name
    return p.eval(x)


def gradient(p: Polynomial) -> list[Polynomial]:
    return p.gradient()


def hessian(p: Polynomial) -> list[list[Polynomial]]:
    return p.hessian()


def lipschitz_bound(p: Polynomial, box: Box) -> float:
    """Upper bound on the sup over ``box`` of the infinity norm of the gradient."""
    best = 0.0
    for k in p.support():
        best = max(best, interval_eval(p.gradient()[k], box).mag())
    return best


# ---------------------------------------------------------------------------
# Taylor relaxations


@dataclass(frozen=True, eq=False)
class Relaxation:
    """Affine or quadratic bounds of a polynomial valid on ``domain``.

    For every x in the domain::

        base(x) + lo_off <= p(x) <= base(x) + hi_off

    with ``base(x) = value + grad.(x - center) + 0.5 (x - center)' hess (x - center)``
    (``hess`` is zero for order 1).
    """

    center: np.ndarray
    order: int
    value: float
    grad: np.ndarray
    hess: np.ndarray
    lo_off: float
    hi_off: float
    domain: Box
    convex_over: bool
    concave_under: bool
    source: Polynomial

    @property
    def base(self) -> Polynomial:
        n = self.center.shape[0]
        if self.source.degree <= self.order:
            return self.source
        y = Polynomial.variables(n)
        q = Polynomial.constant(self.value, n)
        for k in range(n):
            if self.grad[k]:
                q = q + self.grad[k] * y[k]
        if self.order == 2:
            for i in range(n):
                for j in range(n):
                    if self.hess[i, j]:
                        q = q + 0.5 * self.hess[i, j] * y[i] * y[j]
        return q.shift(-self.center)

    def base_value(self, x) -> float:
        d = np.asarray(x, dtype=np.float64) - self.center
        return float(self.value + self.grad @ d + 0.5 * d @ self.hess @ d)

    def over(self, x) -> float:
        return self.base_value(x) + self.hi_off

    def under(self, x) -> float:
        return self.base_value(x) + self.lo_off


def taylor_relax(p: Polynomial, box: Box, order: int) -> Relaxation:
    """Taylor polynomial of ``p`` at the box center plus rigorous remainder offsets."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    _check_box(p, box)
    n = p.nvars
    a, r, exps, coefs, err, tdeg = _centered_data(p, box)
    value = 0.0
    grad = np.zeros(n)
    hess = np.zeros((n, n))
    for e, c, d in zip(exps, coefs, tdeg):
        if d == 0:
            value = float(c)
        elif d == 1:
            grad[int(np.argmax(e))] = c
        elif d == 2 and order == 2:
            nz = np.flatnonzero(e)
            if nz.shape[0] == 1:
                hess[nz[0], nz[0]] = 2.0 * c
            else:
                hess[nz[0], nz[1]] = hess[nz[1], nz[0]] = c
    if p.degree <= order:
        lo_off = hi_off = 0.0
    else:
        high = tdeg > order
        if high.any():
            tlo, thi = _natural_bounds(exps[high], coefs[high], -r, r)
            rlo, rhi = _sum_down(tlo), _sum_up(thi)
        else:
            rlo = rhi = 0.0
        e = _err_bound(exps, err, r)
        lo_off = float(_down(rlo - e))
        hi_off = float(_up(rhi + e))
    if order == 2:
        convex_over = is_psd(hess, 1e-10)
        concave_under = is_nsd(hess, 1e-10)
    else:
        convex_over = concave_under = True
    return Relaxation(center=a, order=order, value=value, grad=grad, hess=hess,
                      lo_off=lo_off, hi_off=hi_off, domain=box,
                      convex_over=convex_over, concave_under=concave_under, source=p)
