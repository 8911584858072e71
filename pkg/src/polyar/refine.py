"""Abstraction refinement: split boxes into certified-negative, certified-positive
and ambiguous parts for one polynomial.

Each queued box gets fresh Taylor relaxations.  The sublevel set of the
convex over-approximation ``O`` lies inside ``{p <= 0}``; the superlevel set of
the concave under-approximation ``U`` lies inside ``{p >= 0}``.  Support
vertices of those sets along the template directions span a simplex, the
largest axis-aligned box inside the simplex is shrunk until interval
arithmetic certifies its sign, and the certified boxes are cut out of the
queued box.  Boxes that yield nothing are bisected.  Anything left at or below
the volume threshold (or when the per-region budget runs out) is ambiguous.
"""

from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .convex import ConvexConstraint, minimize_linear
from .geometry import (Box, DegenerateSimplex, EmptyInterior, TemplateSet, box_difference,
                       convex_hull_simplex, half_div, inscribed_box, make_templates)
from .polynomial import Polynomial, interval_eval, taylor_relax

SHRINK_STEPS = (0.0, 1e-6, 1e-3, 0.05, 0.25)


@dataclass
class RefineStats:
    boxes_processed: int = 0
    shortcuts: int = 0
    certified: int = 0
    demoted: int = 0
    splits: int = 0
    vertex_failures: int = 0
    budget_exhausted: bool = False
    timed_out: bool = False

    def merge(self, other: "RefineStats") -> None:
        for name in ("boxes_processed", "shortcuts", "certified", "demoted", "splits", "vertex_failures"):
            setattr(self, name, getattr(self, name) + getattr(other, name))
        self.budget_exhausted |= other.budget_exhausted
        self.timed_out |= other.timed_out


@dataclass
class Classification:
    neg: list = field(default_factory=list)
    pos: list = field(default_factory=list)
    ambig: list = field(default_factory=list)
    stats: RefineStats = field(default_factory=RefineStats)

    def volumes(self) -> dict:
        return {
            "neg": float(sum(b.volume() for b in self.neg)),
            "pos": float(sum(b.volume() for b in self.pos)),
            "ambig": float(sum(b.volume() for b in self.ambig)),
        }

    def counts(self) -> dict:
        return {"neg": len(self.neg), "pos": len(self.pos), "ambig": len(self.ambig)}

    def flipped(self) -> "Classification":
        """Classification of ``-p``: negative and positive parts trade places."""
        return Classification(list(self.pos), list(self.neg), list(self.ambig), self.stats)


def _templates_for(templates, n: int) -> TemplateSet:
    if isinstance(templates, TemplateSet):
        if templates.nvars == n:
            return templates
        return make_templates("simplex", n)
    return make_templates(templates or "simplex", n)


class _Region:
    """One input region reduced to the coordinates the polynomial actually uses."""

    def __init__(self, region: Box, p: Polynomial):
        self.region = region
        self.p = p
        free = region.widths > 0
        support = set(p.support())
        self.sub = [k for k in range(region.nvars) if free[k] and k in support]
        fixed = [k for k in support if not free[k]]
        others = [k for k in range(region.nvars) if free[k] and k not in support]
        self.other_vol = float(np.prod(region.widths[others])) if others else 1.0
        if self.sub:
            q = p.fix(fixed, region.lo[fixed]) if fixed else p
            self.q = q.project(self.sub)
            self.box = region.project(self.sub)

    def lift(self, b: Box) -> Box:
        return self.region.replace(self.sub, b)


def _sign_of(p: Polynomial, box: Box) -> int:
    iv = interval_eval(p, box)
    if iv.hi <= 0.0:
        return -1
    if iv.lo >= 0.0:
        return 1
    return 0


def _relaxations(q: Polynomial, b: Box):
    r2 = taylor_relax(q, b, 2)
    if r2.convex_over and r2.concave_under:
        return r2, r2
    r1 = taylor_relax(q, b, 1)
    return (r2 if r2.convex_over else r1), (r2 if r2.concave_under else r1)


def _snap(inner: Box, outer: Box) -> Box:
    tol = 1e-9 * outer.widths
    lo = np.where(inner.lo - outer.lo <= tol, outer.lo, np.maximum(inner.lo, outer.lo))
    hi = np.where(outer.hi - inner.hi <= tol, outer.hi, np.minimum(inner.hi, outer.hi))
    return Box(lo, np.maximum(hi, lo))


def _shrink(inner: Box, outer: Box, f: float) -> Box:
    """Pull the faces of ``inner`` that are not on ``outer``'s boundary inward by f*width."""
    if f == 0.0:
        return inner
    d = f * inner.widths
    lo = np.where(inner.lo <= outer.lo, inner.lo, inner.lo + d)
    hi = np.where(inner.hi >= outer.hi, inner.hi, inner.hi - d)
    return Box(lo, np.maximum(hi, lo))


class _Refiner:
    def __init__(self, reg: _Region, templates: TemplateSet, stats: RefineStats, min_gain: float):
        self.reg = reg
        self.templates = templates
        self.stats = stats
        self.min_gain = min_gain

    def certify(self, inner: Box, outer: Box, sign: int) -> Box | None:
        for f in SHRINK_STEPS:
            cand = _shrink(inner, outer, f)
            if cand.volume() <= 0.0:
                return None
            if _sign_of(self.reg.p, self.reg.lift(cand)) == sign:
                return cand
        return None

    def side(self, con: ConvexConstraint, b: Box, sign: int) -> Box | None:
        verts = []
        for l in self.templates:
            v = minimize_linear(l, con, b)
            if v is None:
                return None
            verts.append(v)
        try:
            hull = convex_hull_simplex(np.array(verts))
            inner = inscribed_box(hull)
        except (DegenerateSimplex, EmptyInterior, np.linalg.LinAlgError):
            self.stats.vertex_failures += 1
            return None
        inner = b.intersect(inner)
        if inner is None or inner.volume() <= 0.0:
            return None
        inner = _snap(inner, b)
        cert = self.certify(inner, b, sign)
        if cert is None:
            self.stats.demoted += 1
        return cert

    def process(self, b: Box):
        """Refine one box.  Returns (neg, pos, remainder) lists of sub-boxes."""
        O, U = _relaxations(self.reg.q, b)
        over = ConvexConstraint(O.hess, O.grad, O.value + O.hi_off, O.center)
        under = ConvexConstraint(-U.hess, -U.grad, -(U.value + U.lo_off), U.center)
        found_neg = self.side(over, b, -1)
        found_pos = self.side(under, b, 1)
        cut = [c for c in (found_neg, found_pos) if c is not None]
        gain = sum(c.volume() for c in cut)
        if not cut or gain < self.min_gain * b.volume():
            self.stats.splits += 1
            return [], [], list(half_div(b))
        self.stats.certified += len(cut)
        neg = [found_neg] if found_neg is not None else []
        pos = [found_pos] if found_pos is not None else []
        return neg, pos, box_difference(b, cut)


def abst_refin(neg_regions: Sequence[Box], p: Polynomial, templates="simplex",
               vol_threshold: float | None = None, budget: int = 500, *,
               min_gain: float = 0.01, deadline: float | None = None) -> Classification:
    """Classify ``neg_regions`` by the sign of ``p``.

    ``vol_threshold`` is compared against volumes over the positive-width
    coordinates of each region; it defaults to 1e-3 of the total input
    volume.  ``budget`` caps how many boxes are refined per region.
    ``deadline`` is a ``time.monotonic()`` value.
    """
    regions = list(neg_regions)
    out = Classification()
    if vol_threshold is None:
        vol_threshold = 1e-3 * sum(float(np.prod(r.widths[r.widths > 0])) for r in regions)
    if not vol_threshold > 0:
        raise ValueError("volume threshold must be positive")
    stats = out.stats
    for region in regions:
        sign = _sign_of(p, region)
        if sign != 0:
            stats.shortcuts += 1
            (out.neg if sign < 0 else out.pos).append(region)
            continue
        reg = _Region(region, p)
        if not reg.sub:
            out.ambig.append(region)
            continue
        thr = vol_threshold / reg.other_vol
        ref = _Refiner(reg, _templates_for(templates, len(reg.sub)), stats, min_gain)
        counter = itertools.count()
        heap = [(-reg.box.volume(), next(counter), reg.box)]
        processed = 0
        while heap:
            _, _, b = heapq.heappop(heap)
            full = reg.lift(b)
            sign = _sign_of(p, full)
            if sign != 0:
                stats.shortcuts += 1
                (out.neg if sign < 0 else out.pos).append(full)
                continue
            if b.volume() <= thr:
                out.ambig.append(full)
                continue
            if processed >= budget or (deadline is not None and time.monotonic() > deadline):
                if processed >= budget:
                    stats.budget_exhausted = True
                else:
                    stats.timed_out = True
                out.ambig.append(full)
                continue
            processed += 1
            stats.boxes_processed += 1
            neg, pos, rest = ref.process(b)
            out.neg.extend(reg.lift(c) for c in neg)
            out.pos.extend(reg.lift(c) for c in pos)
            for c in rest:
                heapq.heappush(heap, (-c.volume(), next(counter), c))
    return out
