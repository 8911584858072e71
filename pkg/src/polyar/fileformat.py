"""Plain-text problem files.

::

    polyar 1
    # comments run to the end of the line
    epsilon 1e-6
    var x 0 1
    var y -2 2.5
    con <= 1 1 0 | -0.5 0 0          # x - 0.5 <= 0
    bool b1 b2
    clause b1 -b2
    pb = 1 : 1 b1 | 1 b2
    link b1 iff < 1 0 2 | -1 0 0     # b1 <-> y^2 - 1 < 0
    link b2 implies >= 1 1 1         # b2 -> x*y >= 0

A term is a decimal coefficient followed by one exponent per declared
variable; terms are separated by ``|``.  Every constraint compares its
polynomial with zero.  Strict and ``>=``/``=`` senses are rewritten to
``q <= 0`` form at load time using ``epsilon``.  Several ``implies`` lines for
the same Boolean form one link.  Decimal coefficients are converted to the
nearest binary double (round half to even), so writing ``repr`` of a float
and reading it back is exact.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .geometry import Box
from .polynomial import Polynomial
from .problem import SENSES, ProblemF, rewrite_sense
from .smt import Link, PBRow, SmtProblem

HEADER = "polyar"
VERSION = 1
_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*$")
_INT = re.compile(r"[0-9]+$")


class ProblemFileError(ValueError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {msg}")
        self.line = line
        self.col = col
        self.msg = msg


@dataclass
class _Tok:
    text: str
    line: int
    col: int


@dataclass
class ProblemDocument:
    """Parsed file before sense rewriting; keeps the constraints as written."""

    names: list = field(default_factory=list)
    lo: list = field(default_factory=list)
    hi: list = field(default_factory=list)
    epsilon: float = 1e-6
    constraints: list = field(default_factory=list)  # (Polynomial, sense)
    bools: list = field(default_factory=list)
    clauses: list = field(default_factory=list)
    pb_rows: list = field(default_factory=list)
    links: dict = field(default_factory=dict)  # var -> (kind, [(Polynomial, sense)])

    @property
    def domain(self) -> Box:
        return Box(self.lo, self.hi)

    @property
    def is_smt(self) -> bool:
        return bool(self.bools or self.links)

    def problem(self):
        eps = self.epsilon
        cons = []
        for p, sense in self.constraints:
            cons.extend(rewrite_sense(p, sense, eps))
        if not self.is_smt:
            return ProblemF(self.domain, cons, list(self.names))
        links = []
        for var in sorted(self.links):
            kind, items = self.links[var]
            polys = []
            for p, sense in items:
                polys.extend(rewrite_sense(p, sense, eps))
            links.append(Link(var, tuple(polys), kind))
        return SmtProblem(len(self.bools), list(self.clauses), list(self.pb_rows), self.domain, cons,
                          links, list(self.names), list(self.bools))

    def max_violation(self, x, bool_model: dict | None = None) -> float:
        """Largest violation of the constraints as written, at ``x``.

        ``<=``/``<`` contribute ``p(x)``, ``>=``/``>`` contribute ``-p(x)``,
        ``=`` contributes ``|p(x)|``.  Linked constraints count when active.
        """
        x = np.asarray(x, dtype=np.float64)
        items = list(self.constraints)
        if bool_model is not None:
            for var, (kind, its) in self.links.items():
                on = bool_model[self.bools[var - 1]]
                if on:
                    items.extend(its)
                elif kind == "iff":
                    p, sense = its[0]
                    items.append((p, _NEGATED[sense]))
        worst = -math.inf
        for p, sense in items:
            v = p.eval(x)
            worst = max(worst, abs(v) if sense == "=" else (v if sense in ("<=", "<") else -v))
        box = self.domain
        worst = max(worst, float(np.max(box.lo - x)), float(np.max(x - box.hi)))
        return worst


_NEGATED = {"<=": ">", "<": ">=", ">=": "<", ">": "<="}


def _lines(text: str):
    for ln, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        toks = [_Tok(m.group(), ln, m.start() + 1) for m in re.finditer(r"\S+", body)]
        if toks:
            yield ln, toks


def _float(tok: _Tok) -> float:
    try:
        v = float(tok.text)
    except ValueError:
        raise ProblemFileError(f"expected a decimal number, got {tok.text!r}", tok.line, tok.col) from None
    if not math.isfinite(v):
        raise ProblemFileError(f"non-finite number {tok.text!r}", tok.line, tok.col)
    return v


def _terms(toks: list, nvars: int, line: int) -> Polynomial:
    groups, cur, seps = [], [], []
    for t in toks:
        if t.text == "|":
            groups.append(cur)
            seps.append(t)
            cur = []
        else:
            cur.append(t)
    groups.append(cur)
    exps, coefs = [], []
    for k, g in enumerate(groups):
        if not g:
            # point at the separator next to the gap
            col = seps[min(k, len(seps) - 1)].col if seps else 1
            raise ProblemFileError("empty term", line, col)
        if len(g) != nvars + 1:
            raise ProblemFileError(f"term needs a coefficient and {nvars} exponents, got {len(g)} fields",
                                   g[0].line, g[0].col)
        coefs.append(_float(g[0]))
        row = []
        for t in g[1:]:
            if not _INT.match(t.text):
                raise ProblemFileError(f"bad exponent {t.text!r}", t.line, t.col)
            row.append(int(t.text))
        exps.append(row)
    return Polynomial.from_arrays(np.array(exps, dtype=np.int64).reshape(-1, nvars), coefs, nvars)


def _sense(tok: _Tok) -> str:
    if tok.text not in SENSES:
        raise ProblemFileError(f"unknown sense {tok.text!r}", tok.line, tok.col)
    return tok.text


def parse_document(text: str) -> ProblemDocument:
    doc = ProblemDocument()
    lines = list(_lines(text))
    if not lines:
        raise ProblemFileError("empty document", 1, 1)
    ln, toks = lines[0]
    if len(toks) != 2 or toks[0].text != HEADER:
        raise ProblemFileError(f"missing header line '{HEADER} {VERSION}'", ln, toks[0].col)
    if toks[1].text != str(VERSION):
        raise ProblemFileError(f"unsupported format version {toks[1].text!r}", ln, toks[1].col)
    bool_index: dict = {}
    var_names: set = set()
    constraints_started = False

    def need(toks, k, what):
        if len(toks) <= k:
            last = toks[-1]
            raise ProblemFileError(f"missing {what}", last.line, last.col + len(last.text))
        return toks[k]

    def literal(t: _Tok) -> int:
        neg = t.text.startswith(("-", "!"))
        name = t.text[1:] if neg else t.text
        if name not in bool_index:
            raise ProblemFileError(f"unknown Boolean {name!r}", t.line, t.col)
        v = bool_index[name]
        return -v if neg else v

    for ln, toks in lines[1:]:
        kw = toks[0]
        key = kw.text
        if key == "epsilon":
            doc.epsilon = _float(need(toks, 1, "epsilon value"))
            if not doc.epsilon > 0:
                raise ProblemFileError("epsilon must be positive", ln, toks[1].col)
        elif key == "var":
            if constraints_started:
                raise ProblemFileError("variables must be declared before constraints", ln, kw.col)
            if len(toks) != 4:
                raise ProblemFileError("expected 'var <name> <lo> <hi>'", ln, kw.col)
            name = toks[1].text
            if not _NAME.match(name) or name in var_names or name in bool_index:
                raise ProblemFileError(f"bad or duplicate name {name!r}", ln, toks[1].col)
            lo, hi = _float(toks[2]), _float(toks[3])
            if lo > hi:
                raise ProblemFileError(f"lower bound {lo} exceeds upper bound {hi}", ln, toks[2].col)
            var_names.add(name)
            doc.names.append(name)
            doc.lo.append(lo)
            doc.hi.append(hi)
        elif key == "bool":
            if len(toks) < 2:
                raise ProblemFileError("expected at least one Boolean name", ln, kw.col)
            for t in toks[1:]:
                if not _NAME.match(t.text) or t.text in bool_index or t.text in var_names:
                    raise ProblemFileError(f"bad or duplicate name {t.text!r}", ln, t.col)
                doc.bools.append(t.text)
                bool_index[t.text] = len(doc.bools)
        elif key == "con":
            constraints_started = True
            if not doc.names:
                raise ProblemFileError("constraint before any variable", ln, kw.col)
            sense = _sense(need(toks, 1, "sense"))
            doc.constraints.append((_terms(toks[2:], len(doc.names), ln), sense))
        elif key == "clause":
            if len(toks) < 2:
                raise ProblemFileError("empty clause", ln, kw.col)
            doc.clauses.append(tuple(literal(t) for t in toks[1:]))
        elif key == "pb":
            sense_tok = need(toks, 1, "sense")
            if sense_tok.text not in ("=", "<=", ">="):
                raise ProblemFileError(f"pseudo-Boolean sense must be =, <= or >=, got {sense_tok.text!r}",
                                       ln, sense_tok.col)
            bound = _float(need(toks, 2, "bound"))
            colon = need(toks, 3, "':'")
            if colon.text != ":":
                raise ProblemFileError("expected ':' after the bound", ln, colon.col)
            coeffs, cur = [], []
            for t in toks[4:] + [_Tok("|", ln, 0)]:
                if t.text == "|":
                    if len(cur) != 2:
                        col = cur[0].col if cur else colon.col
                        raise ProblemFileError("pseudo-Boolean term is '<coef> <bool>'", ln, col)
                    v = literal(cur[1])
                    if v < 0:
                        raise ProblemFileError("negated literal in a pseudo-Boolean row", ln, cur[1].col)
                    coeffs.append((v, _float(cur[0])))
                    cur = []
                else:
                    cur.append(t)
            doc.pb_rows.append(PBRow(tuple(coeffs), sense_tok.text, bound))
        elif key == "link":
            constraints_started = True
            if not doc.names:
                raise ProblemFileError("link before any variable", ln, kw.col)
            var_tok = need(toks, 1, "Boolean name")
            v = literal(var_tok)
            if v < 0:
                raise ProblemFileError("link needs a positive Boolean", ln, var_tok.col)
            kind_tok = need(toks, 2, "link kind")
            if kind_tok.text not in ("iff", "implies"):
                raise ProblemFileError(f"link kind must be iff or implies, got {kind_tok.text!r}", ln, kind_tok.col)
            sense_tok = need(toks, 3, "sense")
            sense = _sense(sense_tok)
            poly = _terms(toks[4:], len(doc.names), ln)
            kind = kind_tok.text
            if kind == "iff" and sense == "=":
                raise ProblemFileError("an iff link cannot use '='", ln, sense_tok.col)
            if v in doc.links:
                old_kind, items = doc.links[v]
                if old_kind != "implies" or kind != "implies":
                    raise ProblemFileError(f"Boolean {var_tok.text!r} is already linked", ln, var_tok.col)
                items.append((poly, sense))
            else:
                doc.links[v] = (kind, [(poly, sense)])
        else:
            raise ProblemFileError(f"unknown keyword {key!r}", ln, kw.col)
    if not doc.names:
        raise ProblemFileError("no variables declared", lines[-1][0], 1)
    if not doc.constraints and not doc.links:
        raise ProblemFileError("no constraints", lines[-1][0], 1)
    return doc


def parse_problem(text: str):
    """Parse a problem file into a ProblemF (no Booleans) or an SmtProblem."""
    return parse_document(text).problem()


def _num(v: float) -> str:
    return repr(float(v))


def _poly_terms(p: Polynomial) -> str:
    if p.nterms == 0:
        return " ".join(["0"] * (p.nvars + 1))
    return " | ".join(" ".join([_num(c)] + [str(int(e)) for e in row]) for row, c in zip(p.exps, p.coefs))


def write_problem(problem, epsilon: float | None = None) -> str:
    """Serialize a ProblemF or SmtProblem; every constraint is written as ``<= 0``."""
    out = [f"{HEADER} {VERSION}"]
    if epsilon is not None:
        out.append(f"epsilon {_num(epsilon)}")
    names = problem.names or [f"x{k + 1}" for k in range(problem.domain.nvars)]
    for name, lo, hi in zip(names, problem.domain.lo, problem.domain.hi):
        out.append(f"var {name} {_num(lo)} {_num(hi)}")
    for p in problem.constraints:
        out.append(f"con <= {_poly_terms(p)}")
    if isinstance(problem, SmtProblem):
        bn = problem.bool_names
        if problem.nbool:
            out.append("bool " + " ".join(bn))

        def lit(l):
            return ("-" if l < 0 else "") + bn[abs(l) - 1]

        for c in problem.clauses:
            out.append("clause " + " ".join(lit(l) for l in c))
        for row in problem.pb_rows:
            terms = " | ".join(f"{_num(a)} {bn[v - 1]}" for v, a in row.coeffs)
            out.append(f"pb {row.sense} {_num(row.bound)} : {terms}")
        for link in problem.links:
            for p in link.polys:
                out.append(f"link {bn[link.var - 1]} {link.kind} <= {_poly_terms(p)}")
    return "\n".join(out) + "\n"
