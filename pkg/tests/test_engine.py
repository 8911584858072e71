import numpy as np
import pytest
from instances import random_problem

from polyar.engine import conv_solver, select_index, select_poly, solve
from polyar.geometry import Box
from polyar.polynomial import Polynomial
from polyar.problem import Config, ProblemF, Status, check_model
from polyar.region_solver import RegionTask, branch_and_prune


def xs(n):
    return Polynomial.variables(n)


def cfg(**kw):
    kw.setdefault("max_workers", 1)
    kw.setdefault("timeout_s", 60.0)
    return Config(**kw)


# -- conv_solver -----------------------------------------------------------------


def test_conv_solver_affine():
    (x,) = xs(1)
    pt = conv_solver([Box([0.0], [1.0])], [x - 0.5])
    assert pt is not None and pt[0] <= 0.5


def test_conv_solver_exact_quadratic():
    (x,) = xs(1)
    pt = conv_solver([Box([-1.0], [1.0])], [x ** 2 - 0.25])
    assert pt is not None and abs(pt[0]) <= 0.5


def test_conv_solver_disjoint_disks_against_grid():
    x1, x2 = xs(2)
    pols = [x1 ** 2 + x2 ** 2 - 1, (x1 - 3) ** 2 + x2 ** 2 - 1]
    b = Box([-1.0, -1.0], [4.0, 1.0])
    g = np.stack(np.meshgrid(np.linspace(-1, 4, 100), np.linspace(-1, 1, 100)), -1).reshape(-1, 2)
    assert not np.any((pols[0].eval_many(g) <= 0) & (pols[1].eval_many(g) <= 0))
    assert conv_solver([b], pols) is None


# -- select_poly ---------------------------------------------------------------------


def test_select_poly_examples():
    (x,) = xs(1)
    assert select_poly([x, 10 * x], Box([0.0], [1.0])) == 10 * x
    x1, x2 = xs(2)
    assert select_index([x1, x2], Box([0.0, 0.0], [1.0, 1.0])) == 0
    (y,) = xs(1)
    assert select_poly([y ** 3, y], Box([-2.0], [2.0])) == y ** 3
    with pytest.raises(ValueError):
        select_index([], Box([0.0], [1.0]))


# -- solve -------------------------------------------------------------------------


def test_solve_trivial_sat():
    (x,) = xs(1)
    v = solve(ProblemF(Box([0.0], [1.0]), [x - 0.5]), cfg())
    assert v.status == Status.SAT and v.model[0] <= 0.5


def test_solve_trivial_unsat():
    (x,) = xs(1)
    v = solve(ProblemF(Box([0.0], [1.0]), [x ** 2 + 1]), cfg())
    assert v.status == Status.UNSAT and v.model is None


def test_solve_disk_and_halfplane_against_grid():
    x1, x2 = xs(2)
    F = ProblemF(Box([-1.0, -1.0], [1.0, 1.0]), [x1 ** 2 + x2 ** 2 - 0.25, x1 + x2 - 0.1])
    g = np.stack(np.meshgrid(np.linspace(-1, 1, 200), np.linspace(-1, 1, 200)), -1).reshape(-1, 2)
    assert np.any(np.all([p.eval_many(g) <= 0 for p in F.constraints], axis=0))
    v = solve(F, cfg())
    assert v.status == Status.SAT
    assert all(p.eval(v.model) <= 1e-9 for p in F.constraints)


@pytest.mark.parametrize("presolve", [16, 0])
def test_solve_without_refinement(presolve):
    # threshold equal to the domain volume: no refinement, straight to the endgame
    x1, x2 = xs(2)
    F = ProblemF(Box([-1.0, -1.0], [1.0, 1.0]), [x1 ** 2 + x2 ** 2 - 0.25, 0.3 - x1])
    v = solve(F, cfg(vol_threshold=4.0, presolve_starts=presolve))
    assert v.status == Status.SAT and check_model(F.constraints, F.domain, v.model)
    G = ProblemF(Box([-1.0, -1.0], [1.0, 1.0]), [x1 ** 2 + x2 ** 2 - 0.25, 0.6 - x1])
    assert solve(G, cfg(vol_threshold=4.0, presolve_starts=presolve)).status == Status.UNSAT


def test_two_thin_components_need_refinement():
    # feasible set: two small disks far apart; the center of the box is infeasible
    x1, x2 = xs(2)
    p = ((x1 - 1.5) ** 2 + x2 ** 2 - 0.01) * ((x1 + 1.5) ** 2 + x2 ** 2 - 0.01)
    F = ProblemF(Box([-2.0, -1.0], [2.0, 1.0]), [p, -x1 - 1.0])
    v = solve(F, cfg(presolve_starts=0, local_search=False))
    assert v.status == Status.SAT
    assert v.model[0] >= 1.0 and p.eval(v.model) <= 1e-9


def test_stats_schema_is_stable():
    (x,) = xs(1)
    keys = None
    for p in (x - 0.5, x ** 2 + 1, x ** 3 - 0.2 * x):
        v = solve(ProblemF(Box([-1.0], [1.0]), [p]), cfg())
        k = set(v.stats)
        assert keys is None or k == keys
        keys = k
    for k in ("iterations", "neg", "pos", "ambig", "neg_volume", "subsolver_calls", "wall_ms"):
        assert k in keys


def test_problem_validation():
    (x,) = xs(1)
    x1, _ = xs(2)
    with pytest.raises(ValueError):
        ProblemF(Box([0.0], [1.0]), [])
    with pytest.raises(ValueError):
        ProblemF(Box([0.0], [1.0]), [x1])


def _oracle(F: ProblemF):
    t = RegionTask(F.domain, F.constraints, min_width=1e-9 * float(np.max(F.domain.widths)),
                   node_limit=2_000_000, local_search=False)
    return branch_and_prune(t).status


@pytest.mark.parametrize("seed", range(20))
def test_random_three_var_against_branch_and_prune(seed):
    F = random_problem(500 + seed, nvars=(3, 3), degree=4, ncons=(1, 3))
    want = _oracle(F)
    v = solve(F, cfg())
    if v.status == Status.SAT:
        assert check_model(F.constraints, F.domain, v.model)
    if want in (Status.SAT, Status.UNSAT):
        assert v.status == want


@pytest.mark.parametrize("seed", range(30))
def test_unsat_soundness_low_dimension(seed):
    F = random_problem(2000 + seed, nvars=(1, 2), degree=5, ncons=(2, 4))
    if _oracle(F) == Status.UNSAT:
        assert solve(F, cfg()).status != Status.SAT


def test_model_avoids_certified_positive_regions():
    x1, x2 = xs(2)
    p = x1 ** 2 + x2 ** 2 - 1
    q = x1 - x2 ** 2
    F = ProblemF(Box([-2.0, -2.0], [2.0, 2.0]), [p, q])
    from polyar.refine import abst_refin
    pos = abst_refin([F.domain], p, vol_threshold=1e-3).pos
    for presolve in (16, 0):
        v = solve(F, cfg(presolve_starts=presolve))
        assert v.status == Status.SAT
        for b in pos:
            assert not b.contains(v.model) or p.eval(v.model) >= -1e-12


def test_timeout_status():
    x = xs(4)
    p = sum((xi ** 2 - 0.5) ** 2 for xi in x) - 1e-9
    v = solve(ProblemF(Box.from_bounds([(-1, 1)] * 4), [p, -p - 1e-10]), cfg(timeout_s=0.0))
    assert v.status == Status.TIMEOUT
