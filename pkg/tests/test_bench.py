import numpy as np
import pytest
import scipy.linalg

from polyar import bench
from polyar.bench import (DuffingInstance, SwitchingInstance, char_poly_symbolic, discrete_lyapunov,
                          exp_truncated, hurwitz_determinants, routh_hurwitz)
from polyar.geometry import Box
from polyar.polynomial import Polynomial
from polyar.problem import Config, ProblemF, Status
from polyar.smt import solve_smt


def consts(cs):
    return [Polynomial.constant(float(c), 1) for c in cs]


# -- characteristic polynomial ----------------------------------------------------------


def test_char_poly_rotation():
    (k,) = Polynomial.variables(1)
    cp = char_poly_symbolic([[0.0, 1.0], [-k, 0.0]], 1)
    assert cp[0] == Polynomial.constant(1.0, 1)
    assert cp[1] == Polynomial.zero(1)
    assert cp[2] == k


def test_char_poly_diagonal():
    a, b = Polynomial.variables(2)
    cp = char_poly_symbolic([[a, 0.0], [0.0, b]], 2)
    assert cp[1] == -(a + b)
    assert cp[2] == a * b


def test_char_poly_numeric_against_eigenvalues():
    rng = np.random.default_rng(11)
    for _ in range(20):
        M = rng.standard_normal((3, 3))
        cp = char_poly_symbolic(M.tolist(), 1)
        got = np.array([c.constant_term() for c in cp])
        assert all(c.is_constant() for c in cp)
        want = np.real(np.poly(np.linalg.eigvals(M)))
        assert np.allclose(got, want, atol=1e-9)


def test_char_poly_rejects_non_square():
    with pytest.raises(ValueError):
        char_poly_symbolic([[1.0, 2.0]], 1)


# -- Routh-Hurwitz ----------------------------------------------------------------------


def _rh_stable(c) -> bool:
    return all(g.constant_term() < 0 for g in routh_hurwitz(consts(c)))


def test_rh_stable_quadratic():
    assert _rh_stable([1, 3, 2])


def test_rh_unstable_cubic():
    gs = routh_hurwitz(consts([1, 1, 1, 2]))
    assert [g.constant_term() for g in gs] == [-1.0, -2.0, 1.0]
    assert np.max(np.roots([1, 1, 1, 2]).real) > 0


@pytest.mark.parametrize("degree", [2, 3, 4, 5])
def test_rh_agrees_with_roots(degree):
    rng = np.random.default_rng(degree)
    agree = 0
    for _ in range(50):
        if rng.random() < 0.5:  # stable by construction from left half-plane roots
            re = -rng.uniform(0.1, 2.0, degree)
            roots = re.astype(complex)
            if degree >= 2 and rng.random() < 0.5:
                im = rng.uniform(0.1, 2.0)
                roots[0], roots[1] = complex(re[0], im), complex(re[0], -im)
            c = np.real(np.poly(roots))
        else:
            c = np.concatenate([[1.0], rng.uniform(-1.0, 3.0, degree)])
        stable = bool(np.max(np.roots(c).real) < 0)
        agree += _rh_stable(c) == stable
        # the numeric Hurwitz minors give the same verdict
        assert (bool(np.all(hurwitz_determinants(c) > 0)) and c[-1] > 0) == stable
    assert agree == 50


def test_rh_errors():
    with pytest.raises(ValueError):
        routh_hurwitz(consts([1, 2]))
    with pytest.raises(ValueError):
        routh_hurwitz(consts([1, 1, 1, 1, 1, 1, 1]))
    with pytest.raises(ValueError):
        routh_hurwitz(consts([2, 1, 1]))


# -- static output feedback -----------------------------------------------------------------


def test_sof_example_one_counts():
    F = bench.sof_example(1, seed=0).problem()
    assert isinstance(F, ProblemF)
    assert len(F.constraints) == 3 and F.nvars == 16
    assert np.all(F.domain.lo == -4.0) and np.all(F.domain.hi == 7.0)


def test_sof_example_four_counts():
    F = bench.sof_example(4, seed=0).problem()
    assert len(F.constraints) == 2 and F.nvars == 49
    assert max(p.degree for p in F.constraints) == 2


def test_sof_example_five_is_structured():
    inst = bench.sof_example(5, seed=0)
    assert inst.structure and inst.encoding == "lifted"
    P = inst.problem()
    assert P.nbool == 2 and len(P.links) == 2


def test_sof_constraints_match_eigenvalues():
    # direct encoding: all g_j < 0 exactly when A + BKC is Hurwitz
    rng = np.random.default_rng(5)
    for seed in range(3):
        inst = bench.make_sof((3, 2, 2), (-3.0, 3.0), seed)
        F = inst.problem()
        for _ in range(100):
            K = rng.uniform(-3, 3, inst.nk)
            g = max(p.eval(K) for p in F.constraints) - inst.eps
            lam = inst.max_real_eig(K)
            if abs(lam) > 1e-6 and abs(g) > 1e-9:
                assert (g < 0) == (lam < 0)


def test_sof_rejects_large_state():
    with pytest.raises(ValueError):
        bench.make_sof((6, 2, 2), (-1.0, 1.0))


def test_sof_deterministic():
    a = bench.sof_example(2, seed=3)
    b = bench.sof_example(2, seed=3)
    assert np.array_equal(a.A, b.A) and np.array_equal(a.B, b.B) and np.array_equal(a.C, b.C)
    assert a.problem().constraints == b.problem().constraints
    assert not np.array_equal(a.A, bench.sof_example(2, seed=4).A)


def test_sof_structure_verifier():
    inst = bench.sof_example(5, seed=0)
    K = np.zeros((4, 4))
    K[1, :3] = [1.0, -3.5, 1.0]
    out = inst.verify(K.ravel())
    assert out["product"] == -3.5 and out["sum"] == -1.5 and out["structure_ok"]


def test_sof_config_uses_more_starts():
    assert bench.sof_config().presolve_starts == bench.SOF_PRESOLVE_STARTS
    assert bench.sof_config(presolve_starts=3).presolve_starts == 3


# -- discrete Lyapunov ------------------------------------------------------------------------


def test_lyapunov_zero():
    Q = np.array([[2.0, 0.5], [0.5, 1.0]])
    assert np.array_equal(discrete_lyapunov(np.zeros((2, 2)), Q), Q)


def test_lyapunov_scalar_series():
    P = discrete_lyapunov(0.5 * np.eye(3), np.eye(3))
    assert np.allclose(P, 4.0 / 3.0 * np.eye(3), atol=1e-12)


def test_lyapunov_random_stable():
    rng = np.random.default_rng(2)
    for _ in range(20):
        A = rng.standard_normal((3, 3))
        A *= 0.95 / np.max(np.abs(np.linalg.eigvals(A)))
        P = discrete_lyapunov(A, np.eye(3))
        assert np.max(np.abs(A.T @ P @ A - P + np.eye(3))) <= 1e-10
        assert np.all(np.linalg.eigvalsh(P) > 0)
        assert np.allclose(P, scipy.linalg.solve_discrete_lyapunov(A.T, np.eye(3)), atol=1e-8)


def test_lyapunov_diverges():
    with pytest.raises(ValueError):
        discrete_lyapunov(np.array([[1.0, 0.0], [0.0, 0.5]]), np.eye(2))


# -- Duffing -----------------------------------------------------------------------------------


def test_duffing_matrix_rows():
    A, B = bench.duffing_matrices(3, 1.0, 0.05)
    assert np.allclose(A[0], [1.0, 0.05, 0.0])
    assert np.allclose(A[1], [0.0, 1.0, 0.05])
    assert np.allclose(A[2], [-0.05, -0.1, 0.95])
    assert np.allclose(B, [0.0, 0.0, 0.05])


def test_duffing_n2_counts():
    F = bench.gen_duffing(2, 0.3, [0.4, 0.1])
    assert len(F.constraints) == 6 and F.nvars == 3
    assert max(p.degree for p in F.constraints) == 11


def test_duffing_n3_counts():
    F = bench.duffing_example(3).problem()
    assert len(F.constraints) == 8 and F.nvars == 4
    assert max(p.degree for p in F.constraints) == 5


def test_duffing_n4_unstable_discretization():
    # h = 0.05 forward differences make this setting unstable, so no Lyapunov matrix exists
    with pytest.raises(ValueError):
        bench.duffing_example(4)


def test_duffing_rejects_bad_state():
    with pytest.raises(ValueError):
        DuffingInstance(2, 0.3, [0.7, 0.0])
    with pytest.raises(ValueError):
        DuffingInstance(2, 0.3, [0.1, 0.0, 0.0])


def test_duffing_lyapunov_matrix():
    inst = bench.duffing_example(2)
    assert np.allclose(inst.P, inst.P.T)
    assert np.all(np.linalg.eigvalsh(inst.P) > 0)


def test_duffing_single_step_verifies():
    inst = bench.duffing_example(2)
    from polyar.engine import solve

    v = solve(inst.problem(), Config(max_workers=1, timeout_s=60.0))
    assert v.status == Status.SAT
    check = inst.verify(v.model)
    assert check["ok"] and check["dV"] < 0


def test_duffing_verifier_rejects_wrong_dynamics():
    inst = bench.duffing_example(2)
    x = inst.step(inst.x_k, 0.0)
    assert inst.verify(np.r_[x + 0.01, 0.0])["dynamics"] >= 0.01 - 1e-12
    assert not inst.verify(np.r_[x + 0.01, 0.0])["ok"]


# -- switching ---------------------------------------------------------------------------------


def test_reference_schedule_verifies():
    inst = bench.reference_switching()
    traj = bench.truncated_trajectory(inst.modes, inst.x0, bench.REFERENCE_SCHEDULE)
    model = np.r_[traj[1:].ravel(), [t for _, t in bench.REFERENCE_SCHEDULE]]
    out = inst.verify(model, [j for j, _ in bench.REFERENCE_SCHEDULE])
    assert out["ok"] and out["residual"] <= inst.eps
    # the same point satisfies every linked constraint of the encoding
    P = inst.problem()
    bools = {inst.mode_var(i, j): j == bench.REFERENCE_SCHEDULE[i][0] for i in range(3) for j in range(3)}
    for link in P.links:
        if link.var in bools and bools[link.var]:
            assert all(p.eval(model) <= 0 for p in link.polys)


def test_reference_trajectory_values():
    traj = bench.truncated_trajectory(bench.REFERENCE_MODES, [40.0, 30.0], bench.REFERENCE_SCHEDULE)
    assert np.allclose(traj[1:], [[32.659, -5.199], [-0.589, -12.464], [-6.487, -10.624]], atol=5e-3)


def test_switching_structure():
    inst = bench.reference_switching()
    P = inst.problem()
    assert P.nvars == 9
    # 9 mode Booleans plus 4 faces per obstacle at the two intermediate states
    assert P.nbool == 9 + 2 * 4
    assert P.domain.lo[-3:].tolist() == [0.0, 0.0, 0.0]
    assert inst.goal.intersect(inst.obstacles[0]) is None


def test_switching_rejects_overlap():
    with pytest.raises(ValueError):
        SwitchingInstance(goal=Box([0.0, 0.0], [5.0, 5.0]), obstacles=[Box([4.0, 4.0], [6.0, 6.0])])


def test_switching_single_step_is_sat():
    inst = SwitchingInstance(L=1)
    v = solve_smt(inst.problem(), Config(max_workers=1, timeout_s=60.0))
    assert v.status == Status.SAT
    modes = inst.schedule_of(v.bool_model)
    assert inst.verify(v.model, modes)["ok"]


# matrix-exponential oracle (scipy expm), max-entry error of the cubic truncation at t = 0.5
TRUNCATION_ERROR_AT_HALF = (0.082774, 0.230011, 0.040302)


def test_truncation_error_against_expm():
    for A, frozen in zip(bench.REFERENCE_MODES, TRUNCATION_ERROR_AT_HALF):
        errs = [np.max(np.abs(scipy.linalg.expm(A * t) - exp_truncated(A, t))) for t in np.linspace(0, 0.5, 51)]
        assert errs[-1] == pytest.approx(frozen, abs=1e-6)
        assert max(errs) == pytest.approx(errs[-1], rel=1e-9)  # error grows with t
        # Lagrange-type remainder bound of the cubic truncation
        a = np.linalg.norm(A, np.inf)
        for t, e in zip(np.linspace(0, 0.5, 51), errs):
            assert e <= (a * t) ** 4 / 24 * np.exp(a * t) + 1e-15
