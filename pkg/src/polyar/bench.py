"""Benchmark generators: static output feedback, Duffing oscillator control,
switching-signal design.  Each family comes with a substitution verifier that
re-evaluates the original (pre-split) constraints on a returned model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import Box
from .polynomial import Polynomial, interval_eval
from .problem import ProblemF, rewrite_sense
from .smt import Link, PBRow, SmtProblem

# the five controller shapes (n_A, n_B, n_C) with their entry bounds
SOF_SHAPES = {
    1: ((3, 4, 4), (-4.0, 7.0)),
    2: ((3, 5, 5), (-0.5, 1.0)),
    3: ((2, 6, 6), (0.0, 5.0)),
    4: ((2, 7, 7), (-10.0, 0.0)),
    5: ((5, 4, 4), (-4.0, 7.0)),
}
# the structured example needs many more local starts before refinement pays off
SOF_PRESOLVE_STARTS = 128


# ---------------------------------------------------------------------------
# characteristic polynomial and stability conditions


def _poly_matrix(M, nvars: int):
    return [[e if isinstance(e, Polynomial) else Polynomial.constant(float(e), nvars) for e in row] for row in M]


def _dot(pairs, nvars: int) -> Polynomial:
    """``sum a * b`` over polynomial pairs with a single merge of like terms."""
    exps, coefs = [], []
    for a, b in pairs:
        if a.nterms and b.nterms:
            exps.append((a.exps[:, None, :] + b.exps[None, :, :]).reshape(-1, nvars))
            coefs.append(np.outer(a.coefs, b.coefs).reshape(-1))
    if not exps:
        return Polynomial.zero(nvars)
    return Polynomial.from_arrays(np.vstack(exps), np.concatenate(coefs), nvars)


def _matmul(X, Y, nvars: int):
    k = len(Y)
    return [[_dot(((X[i][l], Y[l][j]) for l in range(k)), nvars) for j in range(len(Y[0]))]
            for i in range(len(X))]


def char_poly_symbolic(M, nvars: int | None = None, prune_tol: float = 1e-14) -> list[Polynomial]:
    """Coefficients ``[1, c_1, ..., c_n]`` of ``det(lambda I - M)`` (highest power first).

    Faddeev-LeVerrier over the polynomial ring: ``N_k = M N_{k-1} + c_{k-1} I``,
    ``c_k = -tr(M N_k) / k``.  Entries may be numbers or polynomials.
    """
    n = len(M)
    if any(len(row) != n for row in M):
        raise ValueError("matrix must be square")
    if nvars is None:
        nvars = next((e.nvars for row in M for e in row if isinstance(e, Polynomial)), 1)
    M = _poly_matrix(M, nvars)
    zero = Polynomial.zero(nvars)
    coeffs = [Polynomial.constant(1.0, nvars)]
    N = [[zero] * n for _ in range(n)]
    for k in range(1, n + 1):
        MN = _matmul(M, N, nvars) if k > 1 else [[zero] * n for _ in range(n)]
        N = [[MN[i][j] + coeffs[-1] if i == j else MN[i][j] for j in range(n)] for i in range(n)]
        tr = _dot(((M[i][l], N[l][i]) for i in range(n) for l in range(n)), nvars)
        coeffs.append((tr * (-1.0 / k)).prune(prune_tol))
    return coeffs


def routh_hurwitz(coeffs: Sequence[Polynomial]) -> list[Polynomial]:
    """Stability conditions for a monic polynomial of degree 2..5.

    ``coeffs`` is ``[1, c_1, ..., c_n]`` for ``lambda^n + c_1 lambda^(n-1) + ... + c_n``.
    Returns ``n`` polynomials ``g_j``; all roots have negative real part iff
    every ``g_j < 0``.  The conditions are the positivity of ``c_1``, ``c_n``
    and the inner Hurwitz determinants.
    """
    n = len(coeffs) - 1
    if n not in (2, 3, 4, 5):
        raise ValueError(f"unsupported degree {n}")
    lead = coeffs[0]
    if not (lead.is_constant() and lead.constant_term() == 1.0):
        raise ValueError("polynomial must be monic")
    c = list(coeffs)
    if n == 2:
        return [-c[1], -c[2]]
    if n == 3:
        return [-c[1], -c[3], -(c[1] * c[2] - c[3])]
    d2 = c[1] * c[2] - c[3]
    if n == 4:
        d3 = c[3] * d2 - c[1] * c[1] * c[4]
        return [-c[1], -d2, -d3, -c[4]]
    d3 = c[3] * d2 - c[1] * (c[1] * c[4] - c[5])
    d4 = d2 * (c[3] * c[4] - c[2] * c[5]) - (c[1] * c[4] - c[5]) ** 2
    return [-c[1], -d2, -d3, -d4, -c[5]]


def hurwitz_determinants(c) -> np.ndarray:
    """Leading principal minors of the numeric Hurwitz matrix (used as a cross-check)."""
    c = np.asarray(c, dtype=np.float64)
    n = len(c) - 1
    H = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            k = 2 * j - i + 1
            if 0 <= k <= n:
                H[i, j] = c[k]
    return np.array([np.linalg.det(H[:k, :k]) for k in range(1, n + 1)])


# ---------------------------------------------------------------------------
# static output feedback


@dataclass
class SofInstance:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    bounds: tuple
    seed: int | None = None
    eps: float = 1e-6
    structure: bool = False  # attach the Boolean controller-structure constraints
    encoding: str = "direct"
    margin: float = 1e-3  # stability margin of the lifted encoding

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        self.B = np.atleast_2d(np.asarray(self.B, dtype=np.float64))
        self.C = np.atleast_2d(np.asarray(self.C, dtype=np.float64))
        nA = self.A.shape[0]
        if self.A.shape != (nA, nA) or self.B.shape[0] != nA or self.C.shape[1] != nA:
            raise ValueError("inconsistent system dimensions")
        if nA > 5 or nA < 2:
            raise ValueError(f"unsupported state dimension {nA}")
        lo, hi = self.bounds
        if not lo <= hi:
            raise ValueError("bad controller bounds")
        if self.encoding not in ("direct", "lifted"):
            raise ValueError(f"unknown encoding {self.encoding!r}")

    @property
    def n_A(self) -> int:
        return self.A.shape[0]

    @property
    def n_B(self) -> int:
        return self.B.shape[1]

    @property
    def n_C(self) -> int:
        return self.C.shape[0]

    @property
    def nk(self) -> int:
        return self.n_B * self.n_C

    @property
    def k_names(self) -> list[str]:
        return [f"k{i + 1}_{j + 1}" for i in range(self.n_B) for j in range(self.n_C)]

    def K_of(self, x) -> np.ndarray:
        return np.asarray(x, dtype=np.float64)[: self.nk].reshape(self.n_B, self.n_C)

    def closed_loop(self, nvars: int):
        """``A + B K C`` with K the first ``n_B * n_C`` variables."""
        K = Polynomial.variables(nvars)[: self.nk]
        out = []
        for a in range(self.n_A):
            row = []
            for b in range(self.n_A):
                w = np.outer(self.B[a], self.C[:, b]).ravel()
                exps = np.zeros((self.nk + 1, nvars), dtype=np.int64)
                exps[1:, : self.nk] = np.eye(self.nk, dtype=np.int64)
                coefs = np.concatenate([[self.A[a, b]], w])
                row.append(Polynomial.from_arrays(exps, coefs, nvars))
            out.append(row)
        return out

    def problem(self):
        lo, hi = self.bounds
        names = self.k_names
        if self.encoding == "direct":
            nv = self.nk
            cp = char_poly_symbolic(self.closed_loop(nv), nv)
            cons = [g + self.eps for g in routh_hurwitz(cp)]
            dom = Box(np.full(nv, lo), np.full(nv, hi))
        else:
            cons, dom, names = self._lifted()
        if not self.structure:
            return ProblemF(dom, cons, names)
        nv = dom.nvars
        k = Polynomial.variables(nv)
        k21, k22, k23 = k[self.n_C], k[self.n_C + 1], k[self.n_C + 2]
        links = [Link(1, (k21 * k22 * k23 + self.eps,), "implies"),
                 Link(2, (k21 + k22 + k23 + 1.0 + self.eps,), "implies")]
        return SmtProblem(2, [(1,), (2,)], [], dom, cons, links, names, ["b1", "b2"])

    def _lifted(self):
        """Characteristic coefficients become extra variables tied to K by
        epsilon-bands; the stability conditions then act on those variables.

        Expanding the degree-4 and degree-5 Hurwitz determinants directly in
        the controller entries produces millions of monomials.
        """
        n, nk = self.n_A, self.nk
        nv = nk + n
        lo, hi = self.bounds
        kbox = Box(np.full(nk, lo), np.full(nk, hi))
        cp = char_poly_symbolic(self.closed_loop(nk), nk)
        xs = Polynomial.variables(nv)
        # c_k = S_k z_k with z_k of order one keeps the lifted variables comparable to K
        clo, chi, cons, cvars = [], [], [], []
        for k in range(1, n + 1):
            a = cp[k].embed(range(nk), nv)
            iv = interval_eval(cp[k], kbox)
            S = max(1.0, iv.mag())
            clo.append(iv.lo / S)
            chi.append(iv.hi / S)
            z = xs[nk + k - 1]
            cons += [z - a * (1.0 / S) - self.eps, a * (1.0 / S) - z - self.eps]
            cvars.append(z * S)
        # p(s - margin) must be Hurwitz, i.e. every root has real part below -margin
        one = Polynomial.constant(1.0, nv)
        coeff_polys = [one] + cvars
        shifted = [Polynomial.zero(nv) for _ in range(n + 1)]
        for k in range(n + 1):  # c_{n-k} (s - m)^k, collected by powers of s
            for i in range(k + 1):
                shifted[i] = shifted[i] + coeff_polys[n - k] * (math.comb(k, i) * (-self.margin) ** (k - i))
        q = [shifted[n - i] for i in range(n + 1)]
        for g in routh_hurwitz(q):
            g = g * (1.0 / max(1.0, float(np.abs(g.coefs).max())))
            cons.append(g + self.eps)
        dom = Box(np.concatenate([np.full(nk, lo), clo]), np.concatenate([np.full(nk, hi), chi]))
        names = self.k_names + [f"z{k}" for k in range(1, n + 1)]
        return cons, dom, names

    def max_real_eig(self, K) -> float:
        K = np.asarray(K, dtype=np.float64).reshape(self.n_B, self.n_C)
        return float(np.max(np.linalg.eigvals(self.A + self.B @ K @ self.C).real))

    def verify(self, model, bool_model=None) -> dict:
        """Eigenvalue and structure checks for a controller model."""
        K = self.K_of(model)
        lo, hi = self.bounds
        out = {"max_real_eig": self.max_real_eig(K), "in_bounds": bool(np.all((K >= lo) & (K <= hi)))}
        out["stable"] = out["max_real_eig"] < 0
        if self.structure:
            r = K[1, :3]
            out["product"] = float(np.prod(r))
            out["sum"] = float(np.sum(r))
            out["structure_ok"] = out["product"] < 0 and out["sum"] < -1
        out["ok"] = out["stable"] and out["in_bounds"] and out.get("structure_ok", True)
        return out


def make_sof(dims, bounds, seed: int = 0, eps: float = 1e-6, structure: bool | None = None,
             encoding: str = "auto") -> SofInstance:
    """Random system ``(A, B, C)`` with standard normal entries."""
    n_A, n_B, n_C = dims
    if n_A > 5:
        raise ValueError(f"unsupported state dimension {n_A}")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n_A, n_A))
    B = rng.standard_normal((n_A, n_B))
    C = rng.standard_normal((n_C, n_A))
    if structure is None:
        structure = tuple(dims) == SOF_SHAPES[5][0]
    if encoding == "auto":
        encoding = "lifted" if n_A >= 4 else "direct"
    return SofInstance(A, B, C, tuple(map(float, bounds)), seed, eps, structure, encoding)


def sof_example(k: int, seed: int = 0, **kw) -> SofInstance:
    dims, bounds = SOF_SHAPES[k]
    return make_sof(dims, bounds, seed, **kw)


def sof_config(**kw):
    """Solver settings used for the controller family."""
    from .problem import Config

    kw.setdefault("presolve_starts", SOF_PRESOLVE_STARTS)
    return Config(**kw)


def gen_sof(dims, bounds, seed: int = 0, **kw):
    return make_sof(dims, bounds, seed, **kw).problem()


# ---------------------------------------------------------------------------
# discrete Lyapunov equation


def discrete_lyapunov(A, Q, tol: float = 1e-12, max_terms: int = 1_000_000) -> np.ndarray:
    """Solve ``A^T P A - P + Q = 0`` by the series ``sum (A^T)^k Q A^k``.

    Doubling (``P <- P + W^T P W``, ``W <- W^2``) sums ``2^j`` terms per step.
    """
    A = np.asarray(A, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    rho = float(np.max(np.abs(np.linalg.eigvals(A)))) if A.size else 0.0
    if rho >= 1.0:
        raise ValueError(f"Lyapunov series diverges: spectral radius {rho:.6g} >= 1")
    P = Q.copy()
    W = A.copy()
    terms = 1
    while True:
        step = W.T @ P @ W
        P = P + step
        terms *= 2
        W = W @ W
        if np.max(np.abs(step)) <= tol * max(1.0, np.max(np.abs(P))) and np.max(np.abs(W)) < 1.0:
            break
        if terms > max_terms:
            raise ValueError("Lyapunov series did not converge")
    P = 0.5 * (P + P.T)
    res = np.max(np.abs(A.T @ P @ A - P + Q))
    if res > 1e-8 * max(1.0, np.max(np.abs(P))):
        raise ValueError(f"Lyapunov residual {res:.3g} too large")
    return P


# ---------------------------------------------------------------------------
# Duffing oscillator


def duffing_matrices(n: int, zeta: float, h: float = 0.05):
    """Forward-difference model ``x+ = A x + B u + E(x)`` of
    ``y^(n) + ... + y'' + 2 zeta y' + y + y^3 = u``."""
    if n < 2:
        raise ValueError("need n >= 2")
    A = np.eye(n)
    for i in range(n - 1):
        A[i, i + 1] = h
    ode = np.ones(n)
    ode[1] = 2.0 * zeta
    A[n - 1] -= h * ode
    B = np.zeros(n)
    B[-1] = h
    return A, B


def default_smoothness(n: int) -> tuple:
    """The smoothness filters used for n = 2, 3, 4: ``sum s_i x_i^d + s_u u^du``."""
    if n == 2:
        return np.array([1.0, 1.0]), 11, -1.0, 10
    if n == 3:
        return np.array([1.0, 1.0, 1.0]), 5, 1.0, 5
    if n == 4:
        return np.ones(4), 4, -1.0, 4
    raise ValueError(f"no default smoothness filter for n={n}")


@dataclass
class DuffingInstance:
    n: int
    zeta: float
    x_k: np.ndarray
    h: float = 0.05
    eps: float = 1e-8  # must stay well below V near the origin or late steps turn infeasible
    state_bound: float = 0.6
    u_bound: float = 1.0
    Q: np.ndarray | None = None
    smooth: tuple | None = None  # (state coefs, state degree, input coef, input degree)
    A: np.ndarray = field(init=False)
    B: np.ndarray = field(init=False)
    P: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.n not in (2, 3, 4):
            raise ValueError("n must be 2, 3 or 4")
        self.x_k = np.asarray(self.x_k, dtype=np.float64)
        if self.x_k.shape != (self.n,):
            raise ValueError("state has the wrong dimension")
        if np.max(np.abs(self.x_k)) > self.state_bound + 1e-12:
            raise ValueError("state outside the admissible box")
        if self.Q is None:
            self.Q = np.eye(self.n)
        if self.smooth is None:
            self.smooth = default_smoothness(self.n)
        self.A, self.B = duffing_matrices(self.n, self.zeta, self.h)
        self.P = discrete_lyapunov(self.A, self.Q)

    def V(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        return float(x @ self.P @ x)

    def E(self, x) -> np.ndarray:
        e = np.zeros(self.n)
        e[-1] = -self.h * x[0] ** 3
        return e

    def step(self, x, u) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return self.A @ x + self.B * u + self.E(x)

    def L(self, x_next, u) -> float:
        s, d, su, du = self.smooth
        return float(np.sum(s * np.asarray(x_next) ** d) + su * u ** du)

    @property
    def names(self) -> list[str]:
        return [f"x{i + 1}_next" for i in range(self.n)] + ["u"]

    def problem(self) -> ProblemF:
        n = self.n
        v = Polynomial.variables(n + 1)
        xn, u = v[:n], v[n]
        pred = self.step(self.x_k, 0.0)  # A x + E(x); the input enters through B
        cons = []
        for i in range(n):
            r = xn[i] - (u * self.B[i] + pred[i])
            cons += rewrite_sense(r, "=", self.eps)
        V_next = sum((xn[i] * xn[j] * self.P[i, j] for i in range(n) for j in range(n)),
                     Polynomial.zero(n + 1))
        cons.append(V_next - self.V(self.x_k) + self.eps)
        s, d, su, du = self.smooth
        Lp = sum((xn[i] ** d * s[i] for i in range(n)), u ** du * su)
        cons.append(Lp)
        b = self.state_bound
        dom = Box(np.r_[np.full(n, -b), -self.u_bound], np.r_[np.full(n, b), self.u_bound])
        return ProblemF(dom, cons, self.names)

    def verify(self, model, tol: float = 1e-9) -> dict:
        """Residuals of the original constraints at ``(x(k+1), u)``."""
        model = np.asarray(model, dtype=np.float64)
        xn, u = model[: self.n], float(model[self.n])
        dyn = float(np.max(np.abs(xn - self.step(self.x_k, u))))
        dV = self.V(xn) - self.V(self.x_k)
        Lv = self.L(xn, u)
        inside = bool(np.max(np.abs(xn)) <= self.state_bound + tol and abs(u) <= self.u_bound + tol)
        ok = dyn <= self.eps + tol and dV <= -self.eps + tol and Lv <= tol and inside
        return {"dynamics": dyn, "dV": dV, "L": Lv, "inside": inside, "ok": bool(ok)}


def gen_duffing(n: int, zeta: float, x_k, L=None, **kw) -> ProblemF:
    return DuffingInstance(n, zeta, x_k, smooth=L, **kw).problem()


def duffing_example(n: int) -> DuffingInstance:
    """The three settings of the Duffing experiment (initial states)."""
    zeta, x0 = {2: (0.3, [0.4, 0.1]), 3: (1.0, [0.1, 0.1, 0.1]), 4: (1.75, [0.1, 0.1, 0.01, 0.1])}[n]
    return DuffingInstance(n, zeta, np.array(x0))


def duffing_rollout(n: int, zeta: float, x0, steps: int, cfg=None, solve_fn=None, **kw):
    """Repeated single-step solves.  The next state is the solver's x(k+1).

    Yields one dict per step; stops early on a non-SAT step.
    """
    from .engine import solve

    solve_fn = solve_fn or solve
    x = np.asarray(x0, dtype=np.float64)
    for k in range(steps):
        inst = DuffingInstance(n, zeta, x, **kw)
        v = solve_fn(inst.problem(), cfg)
        rec = {"k": k, "x": x.tolist(), "V": inst.V(x), "status": v.status.value, "wall_ms": v.stats.get("wall_ms")}
        if v.model is None:
            yield rec
            return
        rec["u"] = float(v.model[n])
        rec["x_next"] = v.model[:n].tolist()
        rec["verify"] = inst.verify(v.model)
        yield rec
        x = np.clip(v.model[:n], -inst.state_bound, inst.state_bound)


# ---------------------------------------------------------------------------
# switching system


REFERENCE_MODES = (
    np.array([[-1.0, 2.0], [-2.0, -2.0]]),
    np.array([[-1.0, 3.0], [-3.0, -1.0]]),
    np.array([[0.0, 2.0], [-2.0, 0.0]]),
)


def exp_truncated(A, t: float, order: int = 3) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    out = np.eye(len(A))
    term = np.eye(len(A))
    for k in range(1, order + 1):
        term = term @ A * (t / k)
        out = out + term
    return out


def truncated_trajectory(modes, x0, schedule, order: int = 3) -> np.ndarray:
    """States x(0..L) for a list of (mode index, duration) pairs."""
    xs = [np.asarray(x0, dtype=np.float64)]
    for j, t in schedule:
        xs.append(exp_truncated(modes[j], t, order) @ xs[-1])
    return np.array(xs)


@dataclass
class SwitchingInstance:
    modes: tuple = REFERENCE_MODES
    L: int = 3
    x0: np.ndarray = field(default_factory=lambda: np.array([40.0, 30.0]))
    goal: Box | None = None
    obstacles: list = field(default_factory=list)
    state_box: Box = field(default_factory=lambda: Box([-100.0, -100.0], [100.0, 100.0]))
    t_max: float = 1.0
    order: int = 3
    eps: float = 1e-3

    def __post_init__(self):
        self.modes = tuple(np.asarray(A, dtype=np.float64) for A in self.modes)
        self.x0 = np.asarray(self.x0, dtype=np.float64)
        if self.goal is None:
            self.goal = self.state_box
        if not self.state_box.contains_box(self.goal):
            raise ValueError("goal must lie inside the state box")
        for o in self.obstacles:
            if not self.state_box.contains_box(o):
                raise ValueError("obstacles must lie inside the state box")
            if self.goal.intersect(o) is not None:
                raise ValueError("goal and obstacle overlap")

    @property
    def q(self) -> int:
        return len(self.modes)

    def mode_var(self, i: int, j: int) -> int:
        """Boolean index of 'mode j active during step i' (both 0-based)."""
        return i * self.q + j + 1

    @property
    def nreal(self) -> int:
        return 2 * self.L + self.L

    @property
    def names(self) -> list[str]:
        out = []
        for i in range(1, self.L + 1):
            out += [f"x{i}_1", f"x{i}_2"]
        return out + [f"t{i}" for i in range(1, self.L + 1)]

    def _phi(self, A, t: Polynomial, nv: int):
        """Truncated exponential as a 2x2 matrix of polynomials in t."""
        out = [[Polynomial.constant(1.0 if r == c else 0.0, nv) for c in range(2)] for r in range(2)]
        Ak = np.eye(2)
        tk = Polynomial.constant(1.0, nv)
        for k in range(1, self.order + 1):
            Ak = Ak @ A
            tk = tk * t
            for r in range(2):
                for c in range(2):
                    if Ak[r, c] != 0.0:
                        out[r][c] = out[r][c] + tk * (Ak[r, c] / math.factorial(k))
        return out

    def problem(self) -> SmtProblem:
        L, q, nv = self.L, self.q, self.nreal
        v = Polynomial.variables(nv)
        xs = [[Polynomial.constant(float(c), nv) for c in self.x0]]
        for i in range(L):
            xs.append([v[2 * i], v[2 * i + 1]])
        ts = v[2 * L:]
        links, rows, clauses = [], [], []
        for i in range(L):
            for j, A in enumerate(self.modes):
                Phi = self._phi(A, ts[i], nv)
                polys = []
                for r in range(2):
                    res = xs[i + 1][r] - (Phi[r][0] * xs[i][0] + Phi[r][1] * xs[i][1])
                    polys += rewrite_sense(res, "=", self.eps)
                links.append(Link(self.mode_var(i, j), tuple(polys), "implies"))
            rows.append(PBRow.exactly_one([self.mode_var(i, j) for j in range(q)]))
        nbool = L * q
        bool_names = [f"b{i + 1}{j + 1}" for i in range(L) for j in range(q)]
        # x(i) outside each obstacle, i = 1..L-1: one Boolean per face
        for i in range(1, L):
            for oi, o in enumerate(self.obstacles):
                faces = []
                for d in range(2):
                    x = xs[i][d]
                    for side, poly in (("lo", x - o.lo[d] + self.eps), ("hi", -x + o.hi[d] + self.eps)):
                        nbool += 1
                        bool_names.append(f"o{i}_{oi + 1}_{side}{d + 1}")
                        links.append(Link(nbool, (poly,), "implies"))
                        faces.append(nbool)
                rows.append(PBRow.at_least_one(faces))
        lo = np.concatenate([np.tile(self.state_box.lo, L - 1), self.goal.lo, np.zeros(L)])
        hi = np.concatenate([np.tile(self.state_box.hi, L - 1), self.goal.hi, np.full(L, self.t_max)])
        return SmtProblem(nbool, clauses, rows, Box(lo, hi), [], links, self.names, bool_names)

    def schedule_of(self, bool_model: dict) -> list[int]:
        modes = []
        for i in range(self.L):
            on = [j for j in range(self.q) if bool_model[self.bool_name(i, j)]]
            if len(on) != 1:
                raise ValueError(f"step {i + 1} has {len(on)} active modes")
            modes.append(on[0])
        return modes

    def bool_name(self, i: int, j: int) -> str:
        return f"b{i + 1}{j + 1}"

    def verify(self, model, modes: Sequence[int], tol: float = 1e-9) -> dict:
        """Dynamics residuals under the truncated exponential, obstacle and goal checks."""
        model = np.asarray(model, dtype=np.float64)
        L = self.L
        xs = [self.x0] + [model[2 * i: 2 * i + 2] for i in range(L)]
        ts = model[2 * L: 3 * L]
        res = max(float(np.max(np.abs(xs[i + 1] - exp_truncated(self.modes[modes[i]], ts[i], self.order) @ xs[i])))
                  for i in range(L))
        clear = all(not o.contains(xs[i]) for i in range(1, L) for o in self.obstacles)
        in_goal = self.goal.contains(xs[L])
        in_x = all(self.state_box.contains(x) for x in xs[1:])
        t_ok = bool(np.all(ts >= -tol) and np.all(ts <= self.t_max + tol))
        ok = res <= self.eps + tol and clear and in_goal and in_x and t_ok
        return {"residual": res, "clear": clear, "in_goal": in_goal, "in_state_box": in_x,
                "times_ok": t_ok, "ok": bool(ok)}


REFERENCE_SCHEDULE = ((0, 0.391), (1, 0.5), (2, 0.25))


def reference_switching(goal_halfwidth: float = 5.0) -> SwitchingInstance:
    """Reference modes and start state with a goal box around the end of the
    reference schedule and one obstacle that path passes by."""
    traj = truncated_trajectory(REFERENCE_MODES, [40.0, 30.0], REFERENCE_SCHEDULE)
    end = traj[-1]
    goal = Box(end - goal_halfwidth, end + goal_halfwidth)
    obstacle = Box([-10.0, 0.0], [10.0, 10.0])
    return SwitchingInstance(goal=goal, obstacles=[obstacle])


def gen_switching(inst: SwitchingInstance) -> SmtProblem:
    return inst.problem()
