"""Top-level solver loop.

Start with the whole domain as the candidate region set.  Each round:

1. try to find a common point of all convex over-approximations on one of
   the candidate regions (a verified hit ends the search with SAT);
2. pick the remaining constraint with the largest gradient bound;
3. refine the candidate regions against it, keeping only the parts
   certified negative as the next candidate set.

Once every constraint is processed, the center of the largest candidate
box satisfies everything (it is re-checked).  Otherwise the ambiguous boxes
collected along the way go to the region solver with the full constraint
list.
"""

from __future__ import annotations

import time
from typing import Mapping, Sequence

import numpy as np

from .convex import ConvexConstraint, feasible_point
from .geometry import Box
from .polynomial import Polynomial, lipschitz_bound, taylor_relax
from .problem import Config, ProblemF, Status, Verdict, check_model
from .refine import Classification, abst_refin
from .region_solver import PolySystem, linear_certificate, local_witness, solve_parallel

__all__ = ["conv_solver", "select_poly", "select_index", "solve", "intersect_classification"]


def _over_constraint(p: Polynomial, b: Box) -> ConvexConstraint:
    r = taylor_relax(p, b, 2)
    if not r.convex_over:
        r = taylor_relax(p, b, 1)
    return ConvexConstraint(r.hess, r.grad, r.value + r.hi_off, r.center)


def conv_solver(neg: Sequence[Box], pols: Sequence[Polynomial], sat_tol: float = 1e-9,
                deadline: float | None = None):
    """First verified point found by the convex feasibility problem on some region, else None."""
    for b in neg:
        if deadline is not None and time.monotonic() > deadline:
            return None
        cons = [_over_constraint(p, b) for p in pols]
        x = feasible_point(cons, b)
        if x is not None and check_model(pols, b, x, sat_tol):
            return x
    return None


def select_index(pols: Sequence[Polynomial], b: Box) -> int:
    if not pols:
        raise ValueError("no polynomials to select from")
    bounds = [lipschitz_bound(p, b) for p in pols]
    return int(np.argmax(bounds))  # argmax keeps the first of equal maxima


def select_poly(pols: Sequence[Polynomial], b: Box) -> Polynomial:
    """Polynomial with the largest gradient bound over ``b`` (ties: lowest index)."""
    return pols[select_index(pols, b)]


def _bounding_box(boxes: Sequence[Box]) -> Box:
    lo = np.min([b.lo for b in boxes], axis=0)
    hi = np.max([b.hi for b in boxes], axis=0)
    return Box(lo, hi)


def _overlaps(boxes: Sequence[Box], targets: Sequence[Box]):
    """Pairs (i, j) whose intersection has positive width wherever boxes[i] does."""
    if not boxes or not targets:
        return []
    A_lo = np.array([b.lo for b in boxes])
    A_hi = np.array([b.hi for b in boxes])
    B_lo = np.array([b.lo for b in targets])
    B_hi = np.array([b.hi for b in targets])
    out = []
    for i in range(len(boxes)):
        lo = np.maximum(A_lo[i], B_lo)
        hi = np.minimum(A_hi[i], B_hi)
        wide = A_hi[i] > A_lo[i]
        ok = np.all(hi >= lo, axis=1) & np.all((hi > lo) | ~wide, axis=1)
        out.extend((i, int(j)) for j in np.flatnonzero(ok))
    return out


def intersect_classification(regions: Sequence[Box], cached: Classification) -> Classification:
    """Restrict a classification computed on a larger domain to ``regions``.

    Sub-boxes of certified boxes stay certified, so no new interval work is needed.
    """
    out = Classification()
    for attr in ("neg", "pos", "ambig"):
        targets = getattr(cached, attr)
        dest = getattr(out, attr)
        for i, j in _overlaps(regions, targets):
            b = regions[i].intersect(targets[j])
            if b is not None:
                dest.append(b)
    return out


def solve(F: ProblemF, cfg: Config | None = None, priors: Mapping[int, Classification] | None = None) -> Verdict:
    """Decide whether some point of ``F.domain`` satisfies every constraint of ``F``.

    ``priors`` maps constraint indices to classifications over (a superset
    of) the domain; those constraints are intersected instead of refined.
    """
    cfg = cfg or Config()
    t0 = time.monotonic()
    deadline = t0 + cfg.timeout_s
    pols = list(F.constraints)
    domain = F.domain
    thr = cfg.threshold_for(domain)
    min_width = cfg.min_width_rel * max(float(np.max(domain.widths)), 1e-300)
    stats = {
        "iterations": 0, "neg": 0, "pos": 0, "ambig": 0, "neg_volume": 0.0, "pos_volume": 0.0,
        "ambig_volume": 0.0, "refined_boxes": 0, "budget_exhausted": False, "demoted_neg": 0,
        "subsolver_calls": 0, "conv_ms": 0.0, "refine_ms": 0.0, "endgame_ms": 0.0, "presolve_ms": 0.0,
        "bp_nodes": 0, "early_exit": None,
    }

    def done(status, model=None, msg=""):
        if status == Status.SAT and not check_model(pols, domain, model, cfg.sat_tol):
            raise AssertionError("refusing to report an unverified model")
        stats["wall_ms"] = 1000.0 * (time.monotonic() - t0)
        return Verdict(status, None if model is None else np.asarray(model, dtype=np.float64), stats, message=msg)

    if cfg.local_search and cfg.presolve_starts > 0:
        # cheap local search before any refinement; only verified points count
        rng = np.random.default_rng(cfg.seed)
        starts = [domain.center] + list(domain.sample(rng, cfg.presolve_starts - 1))
        tp = time.monotonic()
        x = local_witness(PolySystem(pols), pols, domain, starts, cfg.sat_tol, deadline)
        stats["presolve_ms"] = 1000.0 * (time.monotonic() - tp)
        if x is not None:
            stats["early_exit"] = "presolve"
            return done(Status.SAT, x)
    if cfg.certificates and linear_certificate(pols, domain) is not None:
        stats["early_exit"] = "certificate"
        return done(Status.UNSAT)

    remaining = list(range(len(pols)))
    neg: list[Box] = [domain]
    ambig: list[Box] = []
    while remaining:
        if time.monotonic() > deadline:
            return done(Status.TIMEOUT)
        stats["iterations"] += 1
        tc = time.monotonic()
        x = conv_solver(neg, pols, cfg.sat_tol, deadline)
        stats["conv_ms"] += 1000.0 * (time.monotonic() - tc)
        if x is not None:
            stats["early_exit"] = "convex"
            return done(Status.SAT, x)
        rest = [pols[i] for i in remaining]
        i = remaining[select_index(rest, _bounding_box(neg))]
        tr = time.monotonic()
        if priors is not None and i in priors:
            cls = intersect_classification(neg, priors[i])
        else:
            cls = abst_refin(neg, pols[i], cfg.template, thr, cfg.refine_budget,
                             min_gain=cfg.min_gain, deadline=deadline)
            stats["refined_boxes"] += cls.stats.boxes_processed
            stats["budget_exhausted"] |= cls.stats.budget_exhausted
        stats["refine_ms"] += 1000.0 * (time.monotonic() - tr)
        vols = cls.volumes()
        for key in ("neg", "pos", "ambig"):
            stats[key] += len(getattr(cls, key))
            stats[key + "_volume"] += vols[key]
        ambig.extend(cls.ambig)
        remaining.remove(i)
        neg = sorted(cls.neg, key=lambda b: -b.volume())
        if len(neg) > cfg.max_neg_regions:
            stats["demoted_neg"] += len(neg) - cfg.max_neg_regions
            ambig.extend(neg[cfg.max_neg_regions:])
            neg = neg[:cfg.max_neg_regions]
        if not neg:
            break
    if neg and not remaining:
        c = max(neg, key=lambda b: b.volume()).center
        if check_model(pols, domain, c, cfg.sat_tol):
            stats["early_exit"] = "certified_center"
            return done(Status.SAT, c)
        ambig.extend(neg)
    if time.monotonic() > deadline:
        return done(Status.TIMEOUT)
    v = solve_parallel(ambig, pols, cfg, min_width=min_width, deadline=deadline)
    stats["subsolver_calls"] += v.stats.get("subsolver_calls", 0)
    stats["endgame_ms"] += v.stats.get("endgame_ms", 0.0)
    stats["bp_nodes"] = v.stats.get("bp_nodes", 0)
    return done(v.status, v.model, v.message)
