"""Decide a small polynomial system, then a hybrid one with Booleans."""

from polyar import Box, Config, Link, PBRow, Polynomial, ProblemF, SmtProblem, solve, solve_smt

x, y = Polynomial.variables(2)
cfg = Config(max_workers=1, timeout_s=60.0)

# inside the unit disk and above the parabola y = x^2 + 0.5
F = ProblemF(Box([-2.0, -2.0], [2.0, 2.0]), [x ** 2 + y ** 2 - 1, x ** 2 + 0.5 - y], ["x", "y"])
v = solve(F, cfg)
print("continuous:", v.status.value, v.model)
print("  stats:", {k: v.stats[k] for k in ("iterations", "neg", "pos", "ambig", "wall_ms")})

# same disk, but a tighter parabola makes it empty
G = ProblemF(F.domain, [x ** 2 + y ** 2 - 1, x ** 2 + 1.5 - y], ["x", "y"])
print("empty:", solve(G, cfg).status.value)

# exactly one of b1, b2; b1 forces x <= -0.5, b2 forces x >= 0.5, y must be positive
P = SmtProblem(
    nbool=2, clauses=[], pb_rows=[PBRow.exactly_one([1, 2])], domain=F.domain,
    constraints=[-y + 0.1],
    links=[Link(1, (x + 0.5,), "iff"), Link(2, (0.5 - x,), "implies")],
    names=["x", "y"], bool_names=["b1", "b2"],
)
v = solve_smt(P, cfg)
print("hybrid:", v.status.value, v.model, v.bool_model)
