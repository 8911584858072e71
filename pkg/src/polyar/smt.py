"""Lazy SMT layer over the polynomial engine.

Boolean structure is a CNF plus pseudo-Boolean rows.  Literals are signed
1-based integers (``3`` is b3, ``-3`` is not b3).  A :class:`Link` ties a
Boolean to polynomial constraints:

* ``iff``:     b <-> p <= 0; a false b asserts ``-p + eps <= 0``
* ``implies``: b -> (all p_j <= 0); a false b asserts nothing

A DPLL core proposes total assignments; the theory check solves the induced
conjunction with the engine, reusing per-polynomial classifications computed
once over the whole domain.  Theory conflicts come back as clauses blocking
the linking literals that were involved.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .engine import solve
from .geometry import Box
from .polynomial import Polynomial, interval_eval
from .problem import Config, ProblemF, Status, Verdict, check_model
from .refine import Classification, abst_refin
from .region_solver import PolySystem, local_witness

PB_TOL = 1e-9


@dataclass(frozen=True)
class PBRow:
    """``sum coeffs[v] * b_v  <sense>  bound`` with sense in ``=``, ``<=``, ``>=``."""

    coeffs: tuple
    sense: str
    bound: float

    def __post_init__(self):
        if self.sense not in ("=", "<=", ">="):
            raise ValueError(f"bad pseudo-Boolean sense {self.sense!r}")
        object.__setattr__(self, "coeffs", tuple((int(v), float(a)) for v, a in self.coeffs))

    @classmethod
    def exactly_one(cls, vars_: Sequence[int]) -> "PBRow":
        return cls(tuple((v, 1.0) for v in vars_), "=", 1.0)

    @classmethod
    def at_least_one(cls, vars_: Sequence[int]) -> "PBRow":
        return cls(tuple((v, 1.0) for v in vars_), ">=", 1.0)

    def value(self, assign: dict) -> float:
        return sum(a for v, a in self.coeffs if assign[v])

    def holds(self, assign: dict) -> bool:
        s = self.value(assign)
        if self.sense == "=":
            return abs(s - self.bound) <= PB_TOL
        if self.sense == "<=":
            return s <= self.bound + PB_TOL
        return s >= self.bound - PB_TOL


@dataclass(frozen=True)
class Link:
    var: int
    polys: tuple
    kind: str = "iff"

    def __post_init__(self):
        polys = self.polys
        if isinstance(polys, Polynomial):
            polys = (polys,)
        object.__setattr__(self, "polys", tuple(polys))
        if self.kind not in ("iff", "implies"):
            raise ValueError(f"bad link kind {self.kind!r}")
        if self.kind == "iff" and len(self.polys) != 1:
            raise ValueError("an iff link carries exactly one polynomial")
        if self.var < 1:
            raise ValueError("Boolean variables are numbered from 1")


@dataclass
class SmtProblem:
    nbool: int
    clauses: list
    pb_rows: list
    domain: Box
    constraints: list = field(default_factory=list)
    links: list = field(default_factory=list)
    names: list | None = None
    bool_names: list | None = None

    def __post_init__(self):
        self.clauses = [tuple(int(l) for l in c) for c in self.clauses]
        for c in self.clauses:
            for l in c:
                if l == 0 or abs(l) > self.nbool:
                    raise ValueError(f"literal {l} out of range")
        for row in self.pb_rows:
            for v, _ in row.coeffs:
                if not 1 <= v <= self.nbool:
                    raise ValueError(f"pseudo-Boolean row mentions unknown variable {v}")
        seen = set()
        for link in self.links:
            if link.var > self.nbool:
                raise ValueError(f"link variable {link.var} out of range")
            if link.var in seen:
                raise ValueError(f"Boolean {link.var} is linked twice")
            seen.add(link.var)
            for p in link.polys:
                if p.nvars != self.domain.nvars:
                    raise ValueError("linked polynomial has the wrong number of variables")
        for p in self.constraints:
            if p.nvars != self.domain.nvars:
                raise ValueError("constraint has the wrong number of variables")
        if self.names is None:
            self.names = [f"x{k + 1}" for k in range(self.domain.nvars)]
        if self.bool_names is None:
            self.bool_names = [f"b{k + 1}" for k in range(self.nbool)]

    @property
    def nvars(self) -> int:
        return self.domain.nvars

    def induced(self, assign: dict, eps: float):
        """Constraints implied by a Boolean assignment, tagged with their source."""
        cons, tags = list(self.constraints), [None] * len(self.constraints)
        for li, link in enumerate(self.links):
            if assign[link.var]:
                for j, p in enumerate(link.polys):
                    cons.append(p)
                    tags.append((li, j, True))
            elif link.kind == "iff":
                cons.append(-link.polys[0] + eps)
                tags.append((li, 0, False))
        return cons, tags

    def check(self, assign: dict, x, eps: float, tol: float = 1e-9) -> bool:
        """Hybrid model check: clauses, rows and every induced inequality."""
        if any(not any((l > 0) == assign[abs(l)] for l in c) for c in self.clauses):
            return False
        if not all(row.holds(assign) for row in self.pb_rows):
            return False
        cons, _ = self.induced(assign, eps)
        return check_model(cons, self.domain, x, tol) if cons else self.domain.contains(x)


# ---------------------------------------------------------------------------
# SAT core


def _lit_value(l: int, assign: dict):
    v = assign.get(abs(l))
    if v is None:
        return None
    return v if l > 0 else not v


def _propagate(assign: dict, clauses, rows) -> bool:
    """Unit and counting propagation in place.  False on conflict."""
    changed = True
    while changed:
        changed = False
        for c in clauses:
            free = None
            nfree = 0
            sat = False
            for l in c:
                val = _lit_value(l, assign)
                if val is None:
                    nfree += 1
                    free = l
                elif val:
                    sat = True
                    break
            if sat:
                continue
            if nfree == 0:
                return False
            if nfree == 1:
                assign[abs(free)] = free > 0
                changed = True
        for row in rows:
            lo = hi = 0.0
            unassigned = []
            for v, a in row.coeffs:
                val = assign.get(v)
                if val is None:
                    lo += min(a, 0.0)
                    hi += max(a, 0.0)
                    unassigned.append((v, a))
                elif val:
                    lo += a
                    hi += a
            need_le = row.sense in ("=", "<=")
            need_ge = row.sense in ("=", ">=")
            if need_le and lo > row.bound + PB_TOL:
                return False
            if need_ge and hi < row.bound - PB_TOL:
                return False
            for v, a in unassigned:
                forced = None
                # effect on lo/hi of fixing b_v to 1 or 0
                if need_le:
                    if lo + max(a, 0.0) > row.bound + PB_TOL:
                        forced = False
                    elif lo + max(-a, 0.0) > row.bound + PB_TOL:
                        forced = True
                if forced is None and need_ge:
                    if hi - max(-a, 0.0) < row.bound - PB_TOL and a < 0:
                        forced = False
                    elif hi - max(a, 0.0) < row.bound - PB_TOL and a > 0:
                        forced = True
                if forced is not None:
                    assign[v] = forced
                    changed = True
                    break
    return True


def sat_next(nbool: int, clauses, pb_rows=(), lemmas=(), rng=None) -> dict | None:
    """A total assignment satisfying all clauses, rows and lemmas, or None.

    DPLL with unit/counting propagation and chronological backtracking;
    decisions take the lowest unassigned variable, false first.  With ``rng``
    the variable order and the first value tried are random instead.
    """
    clauses = [tuple(c) for c in clauses] + [tuple(c) for c in lemmas]
    rows = list(pb_rows)
    if any(len(c) == 0 for c in clauses):
        return None
    order = list(range(1, nbool + 1))
    first = {v: False for v in order}
    if rng is not None:
        order = [int(v) for v in rng.permutation(order)]
        first = {v: bool(rng.integers(2)) for v in order}

    def search(assign: dict):
        if not _propagate(assign, clauses, rows):
            return None
        for v in order:
            if v not in assign:
                break
        else:
            return assign
        for val in (first[v], not first[v]):
            trial = dict(assign)
            trial[v] = val
            found = search(trial)
            if found is not None:
                return found
        return None

    result = search({})
    if result is None:
        return None
    # final guard: the search only returns total assignments that satisfy everything
    assert all(any(_lit_value(l, result) for l in c) for c in clauses)
    assert all(row.holds(result) for row in rows)
    return result


# ---------------------------------------------------------------------------
# theory side


def _negated_classification(p: Polynomial, cls: Classification, eps: float) -> Classification:
    """Classification of ``-p + eps`` from one of ``p``.

    Boxes certified ``p <= 0`` give ``-p + eps >= eps > 0`` directly.  Boxes
    certified ``p >= 0`` only become certified for ``p >= eps`` after a fresh
    interval check; the rest are ambiguous.
    """
    out = Classification(stats=cls.stats)
    out.pos = list(cls.neg)
    for b in cls.pos:
        (out.neg if interval_eval(p, b).lo >= eps else out.ambig).append(b)
    out.ambig.extend(cls.ambig)
    return out


class TheoryCache:
    """Per-polynomial classifications over the full domain.

    Entries are computed on first use and then shared by every later theory
    check, so polynomials the engine never refines cost nothing.
    """

    def __init__(self, problem: SmtProblem, cfg: Config):
        self.problem = problem
        self.eps = cfg.epsilon
        self._thr = cfg.threshold_for(problem.domain)
        self._cfg = cfg
        self._entries: dict = {}
        self.builds = 0

    def _refine(self, p: Polynomial) -> Classification:
        cfg = self._cfg
        self.builds += 1
        return abst_refin([self.problem.domain], p, cfg.template, self._thr, cfg.refine_budget,
                          min_gain=cfg.min_gain)

    def lookup(self, tag, index: int) -> Classification:
        key = ("c", index) if tag is None else tag[:2] + (tag[2],)
        if key in self._entries:
            return self._entries[key]
        if tag is None:
            cls = self._refine(self.problem.constraints[index])
        else:
            li, j, positive = tag
            if positive:
                cls = self._refine(self.problem.links[li].polys[j])
            else:
                p = self.problem.links[li].polys[0]
                cls = _negated_classification(p, self.lookup((li, 0, True), index), self.eps)
        self._entries[key] = cls
        return cls


class _Priors(Mapping):
    """Constraint index -> cached classification, resolved on access."""

    def __init__(self, cache: TheoryCache, tags):
        self.cache = cache
        self.tags = list(tags)

    def __getitem__(self, k):
        if not 0 <= k < len(self.tags):
            raise KeyError(k)
        return self.cache.lookup(self.tags[k], k)

    def __iter__(self):
        return iter(range(len(self.tags)))

    def __len__(self):
        return len(self.tags)


@dataclass
class TheoryResult:
    status: Status
    model: np.ndarray | None = None
    core: tuple = ()
    verdict: Verdict | None = None


def _solve_tagged(problem: SmtProblem, cons, tags, cfg: Config, cache: TheoryCache | None, deadline):
    if not cons:
        return Verdict(Status.SAT, problem.domain.center.copy())
    sub = Config(**{**cfg.as_dict(), "timeout_s": max(0.0, deadline - time.monotonic())})
    priors = None
    if cache is not None:
        priors = _Priors(cache, tags)
    return solve(ProblemF(problem.domain, cons, problem.names), sub, priors)


def theory_check(assign: dict, problem: SmtProblem, cache: TheoryCache | None, cfg: Config,
                 deadline: float | None = None) -> TheoryResult:
    """Solve the conjunction induced by ``assign``; explain UNSAT by linking literals."""
    if deadline is None:
        deadline = time.monotonic() + cfg.timeout_s
    cons, tags = problem.induced(assign, cfg.epsilon)
    v = _solve_tagged(problem, cons, tags, cfg, cache, deadline)
    if v.status == Status.SAT:
        return TheoryResult(Status.SAT, v.model, verdict=v)
    if v.status != Status.UNSAT:
        return TheoryResult(v.status, verdict=v)
    involved = sorted({t[0] for t in tags if t is not None})
    if cfg.minimize_core and involved:
        involved = _minimize_core(problem, cons, tags, involved, cfg, cache, deadline)
    core = []
    for li in involved:
        var = problem.links[li].var
        core.append(var if assign[var] else -var)
    return TheoryResult(Status.UNSAT, core=tuple(core), verdict=v)


def _minimize_core(problem, cons, tags, involved, cfg, cache, deadline):
    """Greedy deletion: drop a link's constraints if the rest stays UNSAT."""
    keep = list(involved)
    for li in list(involved):
        if time.monotonic() > deadline:
            break
        trial = [x for x in keep if x != li]
        sel = [k for k, t in enumerate(tags) if t is None or t[0] in trial]
        v = _solve_tagged(problem, [cons[k] for k in sel], [tags[k] for k in sel], cfg, cache, deadline)
        if v.status == Status.UNSAT:
            keep = trial
    return keep


def _local_phase(problem: SmtProblem, cfg: Config, deadline: float, stats: dict):
    """Try a few Boolean assignments with local search only.

    Cheap and incomplete: an assignment whose theory part is infeasible can
    stall the complete loop for a long time, while a feasible neighbour is
    often found in milliseconds.  Blocking here is local to this phase.
    """
    rng = np.random.default_rng(cfg.seed)
    link_vars = sorted({link.var for link in problem.links})
    blocked: list = []
    dom = problem.domain
    for _ in range(cfg.smt_local_assignments):
        if time.monotonic() > deadline:
            break
        assign = sat_next(problem.nbool, problem.clauses + blocked, problem.pb_rows, rng=rng)
        if assign is None:
            break
        stats["local_assignments"] += 1
        cons, _ = problem.induced(assign, cfg.epsilon)
        if cons:
            starts = [dom.center] + list(dom.sample(rng, max(cfg.presolve_starts, 1) - 1))
            x = local_witness(PolySystem(cons), cons, dom, starts, cfg.sat_tol, deadline)
        else:
            x = dom.center.copy()
        if x is not None and problem.check(assign, x, cfg.epsilon, cfg.sat_tol):
            return x, assign
        blocked.append(tuple(-v if assign[v] else v for v in link_vars))
    return None, None


def solve_smt(problem: SmtProblem, cfg: Config | None = None) -> Verdict:
    cfg = cfg or Config()
    t0 = time.monotonic()
    deadline = t0 + cfg.timeout_s
    stats = {"smt_iterations": 0, "lemmas": 0, "unknown_assignments": 0, "theory_calls": 0,
             "local_assignments": 0}
    cache = None
    if cfg.use_cache and problem.links:
        cache = TheoryCache(problem, cfg)
    stats["cache_ms"] = 1000.0 * (time.monotonic() - t0)
    lemmas: list = []
    blocked: list = []
    link_vars = sorted(link.var for link in problem.links)
    saw_unknown = False

    def done(status, x=None, assign=None):
        stats["wall_ms"] = 1000.0 * (time.monotonic() - t0)
        bm = None if assign is None else {problem.bool_names[v - 1]: bool(assign[v]) for v in range(1, problem.nbool + 1)}
        return Verdict(status, x, stats, bool_model=bm)

    if cfg.local_search and cfg.smt_local_assignments > 0 and problem.links:
        # at most a quarter of the budget goes to the incomplete phase
        x, assign = _local_phase(problem, cfg, min(deadline, t0 + 0.25 * cfg.timeout_s), stats)
        if x is not None:
            return done(Status.SAT, x, assign)

    while True:
        if time.monotonic() > deadline:
            return done(Status.TIMEOUT)
        assign = sat_next(problem.nbool, problem.clauses + blocked, problem.pb_rows, lemmas)
        if assign is None:
            return done(Status.UNKNOWN if saw_unknown else Status.UNSAT)
        stats["smt_iterations"] += 1
        if stats["smt_iterations"] > 2 ** problem.nbool:
            raise AssertionError("lemma blocking failed to make progress")
        stats["theory_calls"] += 1
        r = theory_check(assign, problem, cache, cfg, deadline)
        if r.status == Status.SAT:
            x = r.model
            if not problem.check(assign, x, cfg.epsilon, cfg.sat_tol):
                raise AssertionError("hybrid model failed re-verification")
            return done(Status.SAT, x, assign)
        if r.status == Status.UNSAT:
            lemma = tuple(-l for l in r.core)
            if any(_lit_value(l, assign) for l in lemma):
                raise AssertionError("lemma does not block the conflicting assignment")
            if not lemma:
                return done(Status.UNSAT)
            lemmas.append(lemma)
            stats["lemmas"] += 1
            continue
        if r.status == Status.TIMEOUT:
            return done(Status.TIMEOUT)
        saw_unknown = True
        stats["unknown_assignments"] += 1
        if not link_vars:  # the theory part does not depend on the Booleans
            return done(Status.UNKNOWN)
        # skip assignments inducing the same theory problem; this is not a lemma
        blocked.append(tuple(-v if assign[v] else v for v in link_vars))


def solve_problem(problem, cfg: Config | None = None) -> Verdict:
    """Dispatch on problem type."""
    if isinstance(problem, SmtProblem):
        return solve_smt(problem, cfg)
    return solve(problem, cfg)
