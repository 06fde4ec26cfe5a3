import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import cellhom.cell as cell
from cellhom.cell import CellProblem, SolverOptions, residual_norm, solve_cell
from cellhom.errors import ConeViolation, RightSideNotAdmissible, ValidationError
from cellhom.grid import GridFunction, make_grid, mean
from cellhom.operators import BellmanMin, HessianSigmaK, LinearNondivergence, PucciMinus, PucciPlus, Trace


def trig(grid, a=1.0, b=0.0, c=0.0):
    return GridFunction.from_callable(
        grid,
        lambda x1, x2, *rest: a * np.sin(2 * np.pi * x1) + b * np.cos(2 * np.pi * x2)
        + c * np.sin(2 * np.pi * (x1 + x2)),
    )


def test_trace_matches_fourier_solution():
    g = make_grid(2, 32)
    sol = solve_cell(CellProblem(g, Trace(), np.diag([1.0, 2.0]), trig(g)))
    X1, _ = g.coords()
    # the discrete Laplacian acts on sin(2 pi x1) by -4 sin^2(pi h)/h^2
    v_exact = -np.sin(2 * np.pi * X1).ravel() * g.h**2 / (4 * np.sin(np.pi * g.h) ** 2)
    assert abs(sol.beta - 3.0) < 1e-12
    assert np.max(np.abs(sol.v.values - v_exact)) < 1e-12
    assert sol.v.mean_zero and abs(mean(sol.v)) < 1e-15
    assert sol.t_path == [0.0, 1.0]


@pytest.mark.parametrize("op", [PucciPlus(1, 2), PucciMinus(0.5, 1.5),
                                BellmanMin(((( 1.0, 0.0), (0.0, 1.0)), ((2.0, 0.0), (0.0, 0.5))))])
def test_nonlinear_solves_converge(op):
    g = make_grid(2, 16)
    p = CellProblem(g, op, np.array([[1.0, 0.3], [0.3, -0.5]]), trig(g, 1.0, 0.5))
    sol = solve_cell(p)
    assert sol.residual <= 1e-10
    assert residual_norm(p, sol.v, sol.beta) == pytest.approx(sol.residual, abs=1e-15)
    assert sol.t_path[-1] == 1.0


def test_sigma2_fixed_point_small_amplitude():
    g = make_grid(2, 32)
    sol = solve_cell(CellProblem(g, HessianSigmaK(2), np.eye(2), trig(g, 0.2)))
    assert abs(sol.beta - 1.0) < 1e-4
    assert sol.residual < 1e-10


def test_sigma2_admissibility():
    g = make_grid(2, 16)
    with pytest.raises(ConeViolation):
        solve_cell(CellProblem(g, HessianSigmaK(2), np.diag([1.0, -1.0]), trig(g, 0.1)))
    with pytest.raises(RightSideNotAdmissible):
        solve_cell(CellProblem(g, HessianSigmaK(2), np.eye(2), trig(g, 2.0)))


def test_problem_validation():
    g = make_grid(2, 8)
    with pytest.raises(ValidationError):
        CellProblem(g, Trace(), np.eye(3), trig(g))
    with pytest.raises(ValidationError):
        CellProblem(g, Trace(), np.array([[1.0, 1.0], [0.0, 1.0]]), trig(g))
    with pytest.raises(ValidationError):
        CellProblem(g, Trace(), np.eye(2), trig(make_grid(2, 16)))
    with pytest.raises(ValidationError):
        SolverOptions.from_dict({"tolerance": 1})


def test_krylov_path_agrees_with_direct(monkeypatch):
    g = make_grid(2, 16)
    p = CellProblem(g, PucciPlus(1, 2), np.eye(2), trig(g, 1.0, 0.5))
    direct = solve_cell(p)
    monkeypatch.setattr(cell, "DIRECT_SOLVE_LIMIT", 0)
    krylov = solve_cell(p)
    assert abs(krylov.beta - direct.beta) < 1e-9
    assert np.max(np.abs(krylov.v.values - direct.v.values)) < 1e-8


def test_three_dimensional_solves():
    g = make_grid(3, 8)
    f = trig(g, 1.0, 0.5)
    sol = solve_cell(CellProblem(g, Trace(), np.diag([1.0, 2.0, 3.0]), f))
    assert abs(sol.beta - 6.0) < 1e-12
    sol = solve_cell(CellProblem(g, PucciMinus(1, 2), np.eye(3), f))
    assert sol.residual < 1e-10


def test_linear_operator_solve():
    g = make_grid(2, 16)
    op = LinearNondivergence.from_strings([["1 + 0.5*sin(2*pi*x1)", "0"], ["0", "1"]], 2)
    sol = solve_cell(CellProblem(g, op, np.eye(2), trig(g)))
    assert sol.residual < 1e-10


def test_perturbed_start_gives_same_solution():
    g = make_grid(2, 16)
    p = CellProblem(g, PucciPlus(1, 2), np.eye(2), trig(g, 1.0, 0.5))
    ref = solve_cell(p)
    v0 = GridFunction(g, ref.v.values + 0.05 * np.cos(2 * np.pi * g.points()[:, 1]))
    again = solve_cell(p, v0)
    assert abs(again.beta - ref.beta) < 1e-10
    assert np.max(np.abs(again.v.values - ref.v.values)) < 1e-8


amplitudes = st.floats(-1, 1)


@given(amplitudes, amplitudes, st.floats(0.2, 3), st.integers(0, 7), st.integers(0, 7))
def test_trace_scaling_and_translation(a, b, scale, s1, s2):
    g = make_grid(2, 8)
    f = trig(g, a, b, 0.3)
    A = np.array([[1.0, 0.2], [0.2, 0.5]])
    sol = solve_cell(CellProblem(g, Trace(scale), A, f))
    # the mean of the discrete Laplacian vanishes, so beta is exactly scale * tr A
    assert abs(sol.beta - scale * 1.5) < 1e-12 * (1 + scale)
    shifted = solve_cell(CellProblem(g, Trace(scale), A, f.shifted((s1, s2))))
    assert np.allclose(shifted.v.values, sol.v.shifted((s1, s2)).values, atol=1e-11)


@given(amplitudes, amplitudes, st.floats(-5, 5))
def test_constant_shift_of_data_is_invisible(a, b, c):
    g = make_grid(2, 8)
    f = trig(g, a, b)
    op = PucciMinus(1, 2)
    s0 = solve_cell(CellProblem(g, op, np.eye(2), f))
    s1 = solve_cell(CellProblem(g, op, np.eye(2), GridFunction(g, f.values + c)))
    assert abs(s0.beta - s1.beta) < 1e-10
    assert np.allclose(s0.v.values, s1.v.values, atol=1e-9)


@given(amplitudes, amplitudes, st.integers(0, 2**31))
def test_uniqueness_from_random_starts(a, b, seed):
    g = make_grid(2, 8)
    p = CellProblem(g, PucciPlus(1, 3), np.diag([1.0, -0.5]), trig(g, a, b))
    ref = solve_cell(p)
    start = GridFunction(g, np.random.default_rng(seed).uniform(-0.01, 0.01, g.size))
    other = solve_cell(p, start)
    assert abs(other.beta - ref.beta) < 1e-9
    assert np.max(np.abs(other.v.values - ref.v.values)) < 1e-7
