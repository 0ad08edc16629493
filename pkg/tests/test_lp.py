import numpy as np
import pytest
from scipy.optimize import linprog

from atmcoord import lp
from atmcoord.errors import GameInputError, NumericalError
from atmcoord.lp import LinearProgram, solve_lp, solve_with_concave_cuts


def test_simple_max():
    # max x + y s.t. x + 2y <= 4, 3x + y <= 6
    sol = solve_lp(LinearProgram([1, 1], [[1, 2], [3, 1]], [4, 6]))
    assert sol.optimal
    np.testing.assert_allclose(sol.x, [1.6, 1.2], atol=1e-12)
    assert sol.objective_value == pytest.approx(2.8, abs=1e-12)


def test_infeasible():
    sol = solve_lp(LinearProgram([1, 0], [[1, 0]], [1], A_eq=[[1, 0]], b_eq=[2]))
    assert sol.status == lp.INFEASIBLE and sol.x is None


def test_unbounded():
    sol = solve_lp(LinearProgram([1, 0], [[-1, 1]], [1]))
    assert sol.status == lp.UNBOUNDED


def test_equality_and_negative_rhs():
    # max -x0 - x1 s.t. x0 + x1 = 3, -x0 <= -1  (x0 >= 1)
    sol = solve_lp(LinearProgram([-1, -1], [[-1, 0]], [-1], A_eq=[[1, 1]], b_eq=[3]))
    assert sol.optimal and sol.objective_value == pytest.approx(-3.0)
    assert sol.x[0] >= 1 - 1e-12


def test_redundant_equalities():
    sol = solve_lp(
        LinearProgram([1, 2, 0], A_eq=[[1, 1, 1], [2, 2, 2], [1, 0, 0]], b_eq=[1, 2, 0.25])
    )
    assert sol.optimal
    np.testing.assert_allclose(sol.x, [0.25, 0.75, 0.0], atol=1e-12)


@pytest.mark.parametrize("pricing", lp.PRICING_RULES)
def test_degenerate_does_not_cycle(pricing):
    # Beale's example (as a max problem) cycles under textbook Dantzig pricing
    c = [0.75, -150, 0.02, -6]
    a = [[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]]
    sol = solve_lp(LinearProgram(c, a, [0, 0, 1]), pricing=pricing)
    assert sol.optimal and sol.objective_value == pytest.approx(0.05)


def test_unknown_pricing_rule():
    with pytest.raises(GameInputError):
        solve_lp(LinearProgram([1.0], [[1.0]], [1.0]), pricing="steepest")


@pytest.mark.parametrize("seed", range(20))
def test_pricing_rules_agree(seed):
    rng = np.random.default_rng(100 + seed)
    m, n = rng.integers(2, 8, size=2)
    prog = LinearProgram(
        rng.uniform(-1, 1, n), rng.uniform(-1, 1, (m, n)), rng.uniform(0, 1, m), np.ones((1, n)), [1.0]
    )
    a = solve_lp(prog, pricing=lp.DANTZIG)
    b = solve_lp(prog, pricing=lp.BLAND)
    assert a.status == b.status
    if a.optimal:
        assert a.objective_value == pytest.approx(b.objective_value, abs=1e-10)


def test_validation():
    with pytest.raises(GameInputError):
        LinearProgram([1, 2], [[1, 2, 3]], [1])
    with pytest.raises(GameInputError):
        LinearProgram([1, np.inf])
    with pytest.raises(GameInputError):
        LinearProgram([1, 2], [[1, 2]], [1, 2])


def test_iteration_cap_is_numerical_error():
    with pytest.raises(NumericalError):
        solve_lp(LinearProgram([1, 1], [[1, 2], [3, 1]], [4, 6]), max_iter=1)


@pytest.mark.parametrize("seed", range(60))
def test_matches_highs(seed):
    rng = np.random.default_rng(seed)
    m, n = rng.integers(1, 7, size=2)
    a = rng.uniform(-1, 1, size=(m, n))
    b = rng.uniform(-0.5, 1, size=m)
    a_eq = rng.uniform(0, 1, size=(1, n)) if seed % 2 else None
    b_eq = [1.0] if seed % 2 else None
    c = rng.uniform(-1, 1, size=n)
    bounds_row = np.ones((1, n))
    a_full = np.vstack([a, bounds_row])
    b_full = np.concatenate([b, [5.0]])
    ref = linprog(-c, A_ub=a_full, b_ub=b_full, A_eq=a_eq, b_eq=b_eq, method="highs")
    sol = solve_lp(LinearProgram(c, a_full, b_full, a_eq, b_eq))
    if ref.status == 2:
        assert sol.status == lp.INFEASIBLE
    else:
        assert ref.status == 0
        assert sol.optimal
        assert sol.objective_value == pytest.approx(-ref.fun, abs=1e-8)
        assert np.all(a_full @ sol.x <= b_full + 1e-8)
        assert np.all(sol.x >= 0)


def test_pivot_sequence_is_deterministic():
    rng = np.random.default_rng(7)
    prog = LinearProgram(rng.uniform(-1, 1, 6), rng.uniform(0, 1, (5, 6)), np.ones(5))
    a, b = solve_lp(prog), solve_lp(prog)
    assert a.pivots == b.pivots and a.pivots
    np.testing.assert_array_equal(a.x, b.x)


def _circle(x):
    # g(x) = 1 - ||x - (1, 1)||, concave
    d = x[:2] - 1.0
    r = float(np.linalg.norm(d))
    grad = -d / r if r > 0 else np.zeros(2)
    return 1.0 - r, grad


def test_cut_loop_circle():
    prog = LinearProgram([1, -1], [[1, 0], [0, 1]], [3, 3])
    sol = solve_with_concave_cuts(prog, [_circle], tol=1e-7)
    assert sol.optimal
    # max x - y on the unit disc centred at (1, 1) is sqrt 2
    assert sol.objective_value == pytest.approx(np.sqrt(2), abs=1e-5)
    assert sol.min_constraint >= -1e-7
    assert sol.rounds > 1 and 0 < len(sol.cuts) <= sol.rounds - 1


def test_cut_loop_infeasible_constant():
    prog = LinearProgram([1, 1], [[1, 1]], [1])
    sol = solve_with_concave_cuts(prog, [lambda x: (-1.0, np.zeros(2))])
    assert sol.status == lp.INFEASIBLE


def test_cuts_never_remove_feasible_points():
    prog = LinearProgram([1, -1], [[1, 0], [0, 1]], [3, 3])
    sol = solve_with_concave_cuts(prog, [_circle], tol=1e-9)
    rng = np.random.default_rng(0)
    pts = rng.uniform(0, 2, size=(5000, 2))
    feas = np.array([_circle(p)[0] >= 0 for p in pts])
    for row, rhs in sol.cuts:
        assert np.all(pts[feas] @ row <= rhs + 1e-12)


def test_cut_loop_without_constraints_is_plain_lp():
    prog = LinearProgram([1, 1], [[1, 2], [3, 1]], [4, 6])
    sol = solve_with_concave_cuts(prog)
    assert sol.rounds == 1 and sol.objective_value == pytest.approx(2.8)


def test_cut_loop_round_cap():
    prog = LinearProgram([1, -1], [[1, 0], [0, 1]], [3, 3])
    sol = solve_with_concave_cuts(prog, [_circle], tol=1e-12, max_rounds=2)
    assert sol.status == lp.NOT_CONVERGED and sol.rounds == 2


@pytest.mark.parametrize("seed", [13, 96, 138, 150])
def test_degenerate_ce_programs_match_highs(seed):
    # 4x4x4 CE polytopes: all-zero rhs, long degenerate Bland runs
    from atmcoord.equilibria import ce_constraint_matrix
    from conftest import random_game

    game = random_game(seed)
    g, _ = ce_constraint_matrix(game)
    c = game.utilities.sum(axis=0)
    ones = np.ones((1, game.n_joint))
    sol = solve_lp(LinearProgram(c, -g, np.zeros(len(g)), ones, [1.0]))
    ref = linprog(-c, A_ub=-g, b_ub=np.zeros(len(g)), A_eq=ones, b_eq=[1], method="highs")
    assert sol.optimal and sol.objective_value == pytest.approx(-ref.fun, abs=1e-8)
