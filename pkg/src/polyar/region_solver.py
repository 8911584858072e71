"""Decision procedure for small boxes.

``branch_and_prune`` bisects a box, discards sub-boxes where interval
arithmetic proves some constraint positive, and stops at the first
sub-box whose midpoint satisfies every constraint.  A short local
minimization of the squared constraint violation runs on shallow nodes to
find witnesses inside thin feasible bands that midpoints rarely hit.

``solve_parallel`` runs one task per ambiguous box over a process pool.
``export_smtlib``/``parse_smtlib``/``parse_model`` bridge to external
QF_NRA solvers.
"""

from __future__ import annotations

import multiprocessing as mp
import shlex
import subprocess
import time
import warnings
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.optimize import linprog, minimize

from .geometry import Box, half_div
from .polynomial import Polynomial, interval_eval, taylor_relax
from .problem import Config, Status, Verdict, check_model


class PolySystem:
    """Evaluates a list of polynomials and their gradients with one monomial sweep."""

    def __init__(self, polys: Sequence[Polynomial]):
        polys = list(polys)
        self.m = len(polys)
        self.n = n = polys[0].nvars
        blocks = [p.exps for p in polys]
        for p in polys:
            blocks.extend(d.exps for d in p.gradient())
        allexps = np.vstack(blocks) if blocks else np.zeros((0, n), dtype=np.int64)
        self.E, inv = np.unique(allexps, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        U = self.E.shape[0]
        self.C = np.zeros((self.m, U))
        self.CG = np.zeros((n * self.m, U))
        pos = 0
        for i, p in enumerate(polys):
            k = p.nterms
            self.C[i, inv[pos:pos + k]] = p.coefs
            pos += k
        for i, p in enumerate(polys):
            for j, d in enumerate(p.gradient()):
                k = d.nterms
                self.CG[j * self.m + i, inv[pos:pos + k]] = d.coefs
                pos += k
        self.scale = np.array([max(1.0, float(np.abs(p.coefs).max()) if p.nterms else 1.0)
                               for p in polys])

    def monomials(self, x) -> np.ndarray:
        return np.prod(np.asarray(x, dtype=np.float64)[None, :] ** self.E, axis=1)

    def values(self, x) -> np.ndarray:
        return self.C @ self.monomials(x)

    def values_grads(self, x):
        mon = self.monomials(x)
        return self.C @ mon, (self.CG @ mon).reshape(self.n, self.m)


def _max_slack(system: PolySystem, box: Box, x0, maxiter: int = 100):
    """SLSQP on ``min t  s.t.  p_i(x) / s_i <= t`` started from ``x0``."""
    s = system.scale
    n = box.nvars

    def cons(y):
        return y[-1] - system.values(y[:n]) / s

    def cons_jac(y):
        _, g = system.values_grads(y[:n])
        J = np.empty((system.m, n + 1))
        J[:, :n] = -(g / s[None, :]).T
        J[:, -1] = 1.0
        return J

    grad_t = np.zeros(n + 1)
    grad_t[-1] = 1.0
    y0 = np.r_[x0, float(np.max(system.values(x0) / s))]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = minimize(lambda y: y[-1], y0, jac=lambda y: grad_t, method="SLSQP",
                       bounds=list(zip(box.lo, box.hi)) + [(None, None)],
                       constraints=[{"type": "ineq", "fun": cons, "jac": cons_jac}],
                       options={"maxiter": maxiter, "ftol": 1e-12})
    return box.clamp(res.x[:n])


def local_witness(system: PolySystem, polys, box: Box, starts, sat_tol: float = 1e-9,
                  deadline: float | None = None):
    """Search for a verified point from each start; None if every attempt fails.

    The first start gets a bounded quasi-Newton pass on the squared scaled
    violation, continued by a max-slack SLSQP run if its end point does not
    verify.  Later starts alternate between that route and SLSQP alone,
    which is cheaper and often better on tightly coupled systems.
    """
    margin = 1e-10
    s = system.scale

    def fun(x):
        v, g = system.values_grads(x)
        r = np.maximum(v / s + margin, 0.0)
        return float(r @ r), 2.0 * (g / s[None, :]) @ r

    def verified(x):
        return np.all(np.isfinite(x)) and all(p.eval(x) <= sat_tol for p in polys)

    bounds = list(zip(box.lo, box.hi))
    for k, x0 in enumerate(starts):
        if deadline is not None and time.monotonic() > deadline:
            return None
        x = np.asarray(x0, dtype=np.float64)
        if k % 2 == 0:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                res = minimize(fun, x, jac=True, method="L-BFGS-B", bounds=bounds,
                               options={"maxiter": 200, "ftol": 1e-30, "gtol": 1e-30})
            x = box.clamp(res.x)
            if verified(x):
                return x
            if not np.all(np.isfinite(x)):
                continue
        x = _max_slack(system, box, x)
        if verified(x):
            return x
    return None


def linear_certificate(polys: Sequence[Polynomial], box: Box) -> np.ndarray | None:
    """Weights ``y >= 0`` with ``sum y_i p_i > 0`` everywhere on ``box``, or None.

    Such weights prove that no point of the box satisfies every ``p_i <= 0``.
    They are proposed by the LP ``min t  s.t.  l_i(x) <= t`` over first-order
    Taylor under-estimators ``l_i``; the proof itself is an interval
    evaluation of the combined polynomial, with the rounding of the
    combination's coefficients bounded separately, so the LP is not trusted.
    """
    polys = list(polys)
    if len(polys) < 2:
        return None  # a single constraint is refuted by interval evaluation or not at all
    n = box.nvars
    A = np.empty((len(polys), n + 1))
    b = np.empty(len(polys))
    for i, p in enumerate(polys):
        r = taylor_relax(p, box, 1)
        A[i, :n] = r.grad
        A[i, n] = -1.0
        b[i] = r.grad @ r.center - r.value - r.lo_off
    res = linprog(np.r_[np.zeros(n), 1.0], A_ub=A, b_ub=b,
                  bounds=list(zip(box.lo, box.hi)) + [(None, None)], method="highs")
    if res.status != 0 or not res.fun > 0:
        return None
    y = np.maximum(-np.asarray(res.ineqlin.marginals, dtype=np.float64), 0.0)
    if not y.sum() > 0:
        return None
    y = y / y.sum()
    q = Polynomial.zero(n)
    for yi, p in zip(y, polys):
        if yi > 0:
            q = q + p * float(yi)
    # each coefficient of q is a sum of at most m rounded products
    mag = np.maximum(np.abs(box.lo), np.abs(box.hi))
    err = 0.0
    for yi, p in zip(y, polys):
        if yi > 0 and p.nterms:
            err += float(np.sum(np.abs(p.coefs) * yi * np.prod(mag[None, :] ** p.exps, axis=1)))
    err *= 4.0 * (len(polys) + 2) * np.finfo(float).eps
    return y if interval_eval(q, box).lo > 2.0 * err else None


@dataclass
class RegionTask:
    box: Box
    constraints: list
    min_width: float
    deadline: float | None = None
    sat_tol: float = 1e-9
    node_limit: int = 100_000
    local_search: bool = True
    polish_depth: int = 4
    certificates: bool = True
    seed: int = 0

    def __post_init__(self):
        if not self.min_width > 0:
            raise ValueError("min_width must be positive")


@dataclass
class _Counters:
    nodes: int = 0
    local_calls: int = 0
    certified: int = 0


def branch_and_prune(t: RegionTask, system: PolySystem | None = None, cancel=None) -> Verdict:
    """Interval branch-and-prune on one box (depth-first, iterative)."""
    polys = list(t.constraints)
    system = system or PolySystem(polys)
    ctr = _Counters()
    rng = np.random.default_rng(t.seed)
    order = list(range(len(polys)))
    unknown = False
    stack = [(t.box, 0)]

    def finish(status, model=None):
        return Verdict(status, model, {"nodes": ctr.nodes, "local_searches": ctr.local_calls,
                                       "certificates": ctr.certified})

    while stack:
        if t.deadline is not None and time.monotonic() > t.deadline:
            return finish(Status.TIMEOUT)
        if cancel is not None and ctr.nodes % 64 == 0 and cancel.is_set():
            return finish(Status.UNKNOWN)
        if ctr.nodes >= t.node_limit:
            unknown = True
            break
        box, depth = stack.pop()
        ctr.nodes += 1
        refuted = False
        for j, i in enumerate(order):
            if interval_eval(polys[i], box).lo > 0.0:
                refuted = True
                if j:  # move the refuting constraint to the front
                    order.insert(0, order.pop(j))
                break
        if refuted:
            continue
        mid = box.center
        if all(p.eval(mid) <= t.sat_tol for p in polys):
            return finish(Status.SAT, mid)
        if t.certificates and depth <= t.polish_depth and linear_certificate(polys, box) is not None:
            ctr.certified += 1
            continue
        if t.local_search and depth <= t.polish_depth:
            ctr.local_calls += 1
            starts = [mid] if depth else [mid, box.sample(rng, 1)[0]]
            x = local_witness(system, polys, box, starts, t.sat_tol, t.deadline)
            if x is not None:
                return finish(Status.SAT, x)
        if np.all(box.widths < t.min_width):
            unknown = True
            continue
        wide = [k for k in range(box.nvars) if box.widths[k] >= t.min_width]
        a, b = half_div(box, wide)
        va = float(np.max(system.values(a.center) / system.scale))
        vb = float(np.max(system.values(b.center) / system.scale))
        # push the less promising child first so the better one is explored next
        if va <= vb:
            stack.extend([(b, depth + 1), (a, depth + 1)])
        else:
            stack.extend([(a, depth + 1), (b, depth + 1)])
    return finish(Status.UNKNOWN if unknown else Status.UNSAT)


# ---------------------------------------------------------------------------
# SMT-LIB2 bridge


def _num(v: float) -> str:
    """Exact decimal spelling of a binary float (negatives as ``(- v)``)."""
    v = float(v)
    if v < 0:
        return f"(- {_num(-v)})"
    if v == int(v) and abs(v) < 2 ** 63:
        return str(int(v))
    s = format(Decimal(v), "f")
    return s


def _monomial(coef: float, e, names) -> str:
    factors = []
    for k, d in enumerate(e):
        factors.extend([names[k]] * int(d))
    if not factors:
        return _num(coef)
    if coef != 1.0:
        factors.insert(0, _num(coef))
    return factors[0] if len(factors) == 1 else "(* " + " ".join(factors) + ")"


def _sum(parts: list[str]) -> str:
    return parts[0] if len(parts) == 1 else "(+ " + " ".join(parts) + ")"


def smt_term(p: Polynomial, names) -> str:
    pos = [_monomial(c, e, names) for e, c in zip(p.exps, p.coefs) if c > 0]
    neg = [_monomial(-c, e, names) for e, c in zip(p.exps, p.coefs) if c < 0]
    if not pos and not neg:
        return "0"
    if not neg:
        return _sum(pos)
    if not pos:
        return f"(- {_sum(neg)})"
    return f"(- {_sum(pos)} {_sum(neg)})"


def export_smtlib(box: Box, constraints: Sequence[Polynomial], names=None) -> str:
    """QF_NRA script: bounds first (two asserts per variable), then one assert per constraint."""
    n = box.nvars
    names = list(names) if names is not None else [f"x{k + 1}" for k in range(n)]
    lines = ["(set-logic QF_NRA)"]
    lines += [f"(declare-const {v} Real)" for v in names]
    for k, v in enumerate(names):
        lines.append(f"(assert (>= {v} {_num(box.lo[k])}))")
        lines.append(f"(assert (<= {v} {_num(box.hi[k])}))")
    for p in constraints:
        lines.append(f"(assert (<= {smt_term(p, names)} 0))")
    lines += ["(check-sat)", "(get-model)"]
    return "\n".join(lines) + "\n"


class SmtParseError(ValueError):
    pass


def _tokens(text: str):
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch in " \t\r\n":
            i += 1
        elif ch == ";":
            while i < len(text) and text[i] != "\n":
                i += 1
        elif ch in "()":
            out.append(ch)
            i += 1
        elif ch == "|":
            j = text.index("|", i + 1)
            out.append(text[i + 1:j])
            i = j + 1
        else:
            j = i
            while j < len(text) and text[j] not in " \t\r\n();":
                j += 1
            out.append(text[i:j])
            i = j
    return out


def parse_sexprs(text: str) -> list:
    toks = _tokens(text)
    pos = 0

    def read():
        nonlocal pos
        if pos >= len(toks):
            raise SmtParseError("unexpected end of input")
        tok = toks[pos]
        pos += 1
        if tok == "(":
            items = []
            while True:
                if pos >= len(toks):
                    raise SmtParseError("unbalanced parentheses")
                if toks[pos] == ")":
                    pos += 1
                    return items
                items.append(read())
        if tok == ")":
            raise SmtParseError("unexpected ')'")
        return tok

    out = []
    while pos < len(toks):
        out.append(read())
    return out


def _value(expr) -> Fraction:
    if isinstance(expr, str):
        try:
            return Fraction(expr)
        except ValueError as exc:
            raise SmtParseError(f"not a number: {expr!r}") from exc
    if expr and expr[0] == "-" and len(expr) == 2:
        return -_value(expr[1])
    if expr and expr[0] == "/" and len(expr) == 3:
        return _value(expr[1]) / _value(expr[2])
    raise SmtParseError(f"unsupported value {expr!r}")


def _poly(expr, index: dict, n: int) -> Polynomial:
    if isinstance(expr, str):
        if expr in index:
            return Polynomial.variable(index[expr], n)
        return Polynomial.constant(float(_value(expr)), n)
    op, args = expr[0], expr[1:]
    ps = [_poly(a, index, n) for a in args]
    if op == "+":
        out = Polynomial.zero(n)
        for q in ps:
            out = out + q
        return out
    if op == "-":
        if len(ps) == 1:
            return -ps[0]
        out = ps[0]
        for q in ps[1:]:
            out = out - q
        return out
    if op == "*":
        out = Polynomial.constant(1.0, n)
        for q in ps:
            out = out * q
        return out
    if op == "/" and len(ps) == 2 and ps[1].is_constant():
        return ps[0] * (1.0 / ps[1].constant_term())
    raise SmtParseError(f"unsupported operator {op!r}")


def parse_smtlib(text: str):
    """Read back a script produced by :func:`export_smtlib`.  Returns (box, constraints, names)."""
    names, asserts = [], []
    for form in parse_sexprs(text):
        if not isinstance(form, list) or not form:
            continue
        if form[0] in ("declare-const",):
            names.append(form[1])
        elif form[0] == "declare-fun" and form[2] == []:
            names.append(form[1])
        elif form[0] == "assert":
            asserts.append(form[1])
    n = len(names)
    index = {v: k for k, v in enumerate(names)}
    if len(asserts) < 2 * n:
        raise SmtParseError("missing variable bounds")
    lo, hi = np.zeros(n), np.zeros(n)
    for k in range(n):
        a, b = asserts[2 * k], asserts[2 * k + 1]
        if a[0] != ">=" or b[0] != "<=" or a[1] != names[k] or b[1] != names[k]:
            raise SmtParseError(f"bounds of {names[k]} not in expected form")
        lo[k] = float(_value(a[2]))
        hi[k] = float(_value(b[2]))
    cons = []
    for a in asserts[2 * n:]:
        if a[0] != "<=" or _value(a[2]) != 0:
            raise SmtParseError(f"constraint not of the form (<= p 0): {a!r}")
        cons.append(_poly(a[1], index, n))
    return Box(lo, hi), cons, names


def parse_model(text: str, names: Sequence[str]):
    """Parse solver output.  Returns (status string, {name: value} or None)."""
    forms = parse_sexprs(text)
    if not forms or not isinstance(forms[0], str):
        raise SmtParseError("no check-sat answer found")
    answer = forms[0]
    if answer in ("unsat", "unknown"):
        return answer, None
    if answer != "sat":
        raise SmtParseError(f"unexpected answer {answer!r}")
    values = {}
    for form in forms[1:]:
        if not isinstance(form, list):
            continue
        items = form[1:] if form and form[0] == "model" else form
        for item in items:
            if not isinstance(item, list) or not item:
                continue
            if item[0] == "define-fun" and len(item) == 5:
                values[item[1]] = float(_value(item[4]))
            elif len(item) == 2 and isinstance(item[0], str):
                values[item[0]] = float(_value(item[1]))
    missing = [v for v in names if v not in values]
    if missing:
        raise SmtParseError(f"model lacks values for {missing}")
    return "sat", values


def run_external(command: str, box: Box, constraints, timeout: float | None, sat_tol: float = 1e-9) -> Verdict:
    names = [f"x{k + 1}" for k in range(box.nvars)]
    script = export_smtlib(box, constraints, names)
    try:
        proc = subprocess.run(shlex.split(command), input=script, capture_output=True,
                              text=True, timeout=timeout)
    except subprocess.TimeoutExpired:
        return Verdict(Status.TIMEOUT, message="external solver timed out")
    except OSError as exc:
        return Verdict(Status.UNKNOWN, message=f"cannot run external solver: {exc}")
    try:
        answer, values = parse_model(proc.stdout, names)
    except SmtParseError as exc:
        return Verdict(Status.UNKNOWN, message=f"unreadable solver output: {exc}")
    if answer == "unsat":
        return Verdict(Status.UNSAT)
    if answer == "unknown":
        return Verdict(Status.UNKNOWN, message="external solver answered unknown")
    x = box.clamp([values[v] for v in names])
    if check_model(constraints, box, x, sat_tol):
        return Verdict(Status.SAT, x)
    return Verdict(Status.UNKNOWN, message="external model failed re-verification")


# ---------------------------------------------------------------------------
# parallel dispatch

_WORKER: dict = {}


def _task_options(cfg: Config, min_width: float, deadline):
    return dict(min_width=min_width, deadline=deadline, sat_tol=cfg.sat_tol, node_limit=cfg.node_limit,
                local_search=cfg.local_search, polish_depth=cfg.polish_depth,
                certificates=cfg.certificates, seed=cfg.seed)


def _solve_box(box: Box, constraints, system, options: dict, subsolver: str, cancel=None) -> Verdict:
    if subsolver.startswith("external:"):
        dl = options.get("deadline")
        timeout = None if dl is None else max(0.0, dl - time.monotonic())
        return run_external(subsolver[len("external:"):], box, constraints, timeout, options["sat_tol"])
    return branch_and_prune(RegionTask(box, constraints, **options), system, cancel)


def _worker_init(constraints, options, subsolver, cancel):
    _WORKER.update(constraints=constraints, options=options, subsolver=subsolver, cancel=cancel,
                   system=PolySystem(constraints))


def _worker_run(indexed_boxes):
    out = []
    w = _WORKER
    for i, box in indexed_boxes:
        if w["cancel"].is_set():
            break
        v = _solve_box(box, w["constraints"], w["system"], w["options"], w["subsolver"], w["cancel"])
        out.append((i, v.status, v.model, v.stats.get("nodes", 0)))
        if v.status == Status.SAT:
            w["cancel"].set()
            break
    return out


def _combine(statuses) -> Status:
    statuses = list(statuses)
    if Status.SAT in statuses:
        return Status.SAT
    if Status.TIMEOUT in statuses:
        return Status.TIMEOUT
    if Status.UNKNOWN in statuses:
        return Status.UNKNOWN
    return Status.UNSAT


def _order_boxes(ambig, system: PolySystem):
    """Most promising boxes (smallest worst violation at the center) first."""
    keys = [float(np.max(system.values(b.center) / system.scale)) for b in ambig]
    return sorted(range(len(ambig)), key=lambda i: (keys[i], i))


def solve_parallel(ambig: Sequence[Box], constraints: Sequence[Polynomial], cfg: Config,
                   min_width: float | None = None, deadline: float | None = None) -> Verdict:
    """Decide the disjunction over ``ambig`` of "some point of the box satisfies all constraints"."""
    ambig = list(ambig)
    constraints = list(constraints)
    t0 = time.monotonic()
    if not ambig:
        return Verdict(Status.UNSAT, stats={"region_tasks": 0, "subsolver_calls": 0})
    if min_width is None:
        min_width = cfg.min_width_rel * max(float(np.max(b.widths)) for b in ambig)
    min_width = max(min_width, 1e-300)
    options = _task_options(cfg, min_width, deadline)
    system = PolySystem(constraints)
    order = _order_boxes(ambig, system)
    workers = min(cfg.max_workers, len(ambig))
    results: dict[int, tuple] = {}
    nodes = 0
    if workers <= 1:
        for i in order:
            v = _solve_box(ambig[i], constraints, system, options, cfg.subsolver)
            results[i] = (v.status, v.model)
            nodes += v.stats.get("nodes", 0)
            if v.status == Status.SAT:
                break
    else:
        ctx = mp.get_context("fork")
        cancel = ctx.Event()
        chunk = max(1, min(16, len(order) // (4 * workers)))
        batches = [[(i, ambig[i]) for i in order[s:s + chunk]] for s in range(0, len(order), chunk)]
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx, initializer=_worker_init,
                                 initargs=(constraints, options, cfg.subsolver, cancel)) as pool:
            pending = {pool.submit(_worker_run, b) for b in batches}
            while pending:
                done, pending = wait(pending, return_when=FIRST_COMPLETED)
                for fut in done:
                    for i, status, model, k in fut.result():
                        results[i] = (status, model)
                        nodes += k
                if any(s == Status.SAT for s, _ in results.values()):
                    cancel.set()
                    for fut in pending:
                        fut.cancel()
    stats = {"region_tasks": len(ambig), "subsolver_calls": len(results), "bp_nodes": nodes,
             "endgame_ms": 1000.0 * (time.monotonic() - t0)}
    sat = [(i, m) for i, (s, m) in results.items() if s == Status.SAT]
    if sat:
        i, model = min(sat, key=lambda im: order.index(im[0]))
        if not check_model(constraints, ambig[i], model, cfg.sat_tol):
            raise AssertionError("region solver produced an unverified model")
        return Verdict(Status.SAT, model, stats)
    if len(results) < len(ambig):
        # a task never ran: only possible through cancellation or deadline
        status = Status.TIMEOUT if deadline is not None and time.monotonic() > deadline else Status.UNKNOWN
        return Verdict(status, stats=stats)
    return Verdict(_combine(s for s, _ in results.values()), stats=stats)
