import warnings

import numpy as np
import pytest

from morphogen.discretization import build_grid1d, build_grid2d
from morphogen.linear import (
    DominanceWarning,
    LinearSolveError,
    LinearSubproblem,
    SolverOptions,
    coupled_matrix,
    make_test_fields,
    residual_vectors,
    solve_coupled_linear,
    solve_coupled_linear_1d,
    weak_residual,
)


def ref_subproblem(h=0.1):
    # frozen coefficients at H(0, 0) = 10 with k1 = k2 = 0.5
    return LinearSubproblem(lam=10, d=0.1, h=h, a0=90, a11=15, a12=10, a21=10, a22=15, dirac=100)


def dense_oracle(sub, g2):
    """Assemble column by column through the edge-difference residual path."""
    N, n1 = g2.size, g2.n1
    homog = LinearSubproblem(**{**sub.__dict__, "mu_omega": 0.0, "mu_I": 0.0, "dirac": 0.0})
    cols = []
    for k in range(N + n1):
        e = np.zeros(N + n1)
        e[k] = 1.0
        r1, r2 = residual_vectors(homog, g2, e[:N].reshape(g2.n1, g2.n2), e[N:])
        cols.append(np.concatenate([r1.ravel(), r2]))
    A = np.array(cols).T
    r1, r2 = residual_vectors(sub, g2, np.zeros((g2.n1, g2.n2)), np.zeros(n1))
    b = -np.concatenate([r1.ravel(), r2])
    return A, b


def random_dominant(rng, n1, n2):
    a21 = rng.uniform(0, 5, n1)
    a12 = rng.uniform(0, 5, n1)
    return LinearSubproblem(
        lam=rng.uniform(0.1, 10),
        d=rng.uniform(0.01, 2),
        h=rng.uniform(0.02, 1),
        a0=rng.uniform(0, 20, (n1, n2)),
        a11=a21 + rng.uniform(0, 5, n1),
        a12=a12,
        a21=a21,
        a22=a12 + rng.uniform(0, 5, n1),
        mu_omega=rng.uniform(0, 1, (n1, n2)) * (rng.uniform() < 0.5),
        mu_I=rng.uniform(0, 3, n1),
        dirac=rng.uniform(0, 100),
    )


def test_matrix_matches_dense_oracle():
    g = build_grid2d(7, 4)
    sub = random_dominant(np.random.default_rng(3), 7, 4)
    A, b = coupled_matrix(sub, g, g.bottom())
    Ad, bd = dense_oracle(sub, g)
    np.testing.assert_allclose(A.toarray(), Ad, rtol=1e-13, atol=1e-12)
    np.testing.assert_allclose(b, bd, rtol=1e-14, atol=1e-14)
    sol = solve_coupled_linear(sub, g)
    x = np.linalg.solve(Ad, bd)
    np.testing.assert_allclose(np.concatenate([sol.u1.ravel(), sol.u2]), x, rtol=1e-10, atol=1e-12)


def test_constant_bulk_source():
    g = build_grid2d(11, 6)
    sub = LinearSubproblem(lam=2.0, d=0.3, h=0.2, mu_omega=3.0)
    sol = solve_coupled_linear(sub, g)
    np.testing.assert_allclose(sol.u1, 1.5, rtol=1e-12)
    np.testing.assert_allclose(sol.u2, 0.0, atol=1e-14)


def test_zero_data_gives_zero():
    g = build_grid2d(11, 6)
    sol = solve_coupled_linear(ref_subproblem().__class__(lam=1.0, d=1.0, a11=2, a12=1, a21=1, a22=2), g)
    assert np.all(sol.u1 == 0) and np.all(sol.u2 == 0)


@pytest.mark.parametrize("h", [1.0, 0.1])
def test_reference_frozen_problem(grid201, h):
    sub = ref_subproblem(h)
    sol = solve_coupled_linear(sub, grid201)
    assert weak_residual(sol, sub) <= 1e-10
    assert sol.u1.min() >= 0 and sol.u2.min() >= 0
    assert sol.relative_residual <= 1e-10


def test_weak_residual_detects_perturbation():
    g = build_grid2d(9, 5)
    sub = ref_subproblem()
    sol = solve_coupled_linear(sub, g)
    tests = make_test_fields(g.bottom(), g)
    base = weak_residual(sol, sub, tests)
    i, j = 4, 2
    sol.u1 = sol.u1.copy()
    sol.u1[i, j] += 1.0
    A, _ = coupled_matrix(sub, g, g.bottom())
    col = A[:, i * g.n2 + j].toarray().ravel()
    col1, col2 = col[: g.size].reshape(g.n1, g.n2), col[g.size :]
    expected = max(
        max(abs(np.sum(v * col1)) for v in tests[0]),
        max(abs(np.sum(v * col2)) for v in tests[1]),
    )
    assert base <= 1e-11
    assert weak_residual(sol, sub, tests) == pytest.approx(expected, rel=1e-9)


def test_residual_paths_agree_on_random_vector():
    g = build_grid2d(41, 11)
    rng = np.random.default_rng(7)
    sub = random_dominant(rng, 41, 11)
    u1, u2 = rng.normal(size=(41, 11)), rng.normal(size=41)
    A, b = coupled_matrix(sub, g, g.bottom())
    r_mat = A @ np.concatenate([u1.ravel(), u2]) - b
    r1, r2 = residual_vectors(sub, g, u1, u2)
    r_edge = np.concatenate([r1.ravel(), r2])
    X1, X2 = g.mesh()
    for k in range(20):
        v1 = np.cos((k % 5) * np.pi * (X1 + 1) / 2) * np.cos((k // 5) * np.pi * X2)
        v2 = np.cos(k * np.pi * (g.x1 + 1) / 2)
        v = np.concatenate([v1.ravel(), v2])
        scale = np.abs(v) @ (abs(A) @ np.abs(np.concatenate([u1.ravel(), u2])) + np.abs(b))
        assert abs(v @ r_mat - v @ r_edge) <= 1e-14 * scale


def test_positivity_randomized():
    rng = np.random.default_rng(2024)
    for _ in range(50):
        n1, n2 = 2 * rng.integers(3, 15) + 1, int(rng.integers(2, 10))
        sub = random_dominant(rng, n1, n2)
        assert sub.is_positivity_preserving(n1)
        sol = solve_coupled_linear(sub, build_grid2d(n1, n2))
        top = max(sol.u1.max(), sol.u2.max(), 1e-300)
        assert sol.u1.min() >= -1e-12 * top
        assert sol.u2.min() >= -1e-12 * top


@pytest.mark.parametrize("alpha", [2.0, -3.0, 10.0])
def test_linearity(alpha):
    g = build_grid2d(21, 6)
    sub = random_dominant(np.random.default_rng(11), 21, 6)
    base = solve_coupled_linear(sub, g)
    scaled = LinearSubproblem(
        **{
            **sub.__dict__,
            "mu_omega": alpha * np.asarray(sub.mu_omega),
            "mu_I": alpha * np.asarray(sub.mu_I),
            "dirac": alpha * sub.dirac,
        }
    )
    sol = solve_coupled_linear(scaled, g)
    np.testing.assert_allclose(sol.u1, alpha * base.u1, rtol=1e-12, atol=1e-12 * abs(alpha) * base.u1.max())
    np.testing.assert_allclose(sol.u2, alpha * base.u2, rtol=1e-12, atol=1e-12 * abs(alpha) * base.u2.max())


@pytest.mark.parametrize("h", [1.0, 0.1, 1 / 50])
def test_l1_bound_uniform_in_h(h):
    g = build_grid2d(101, 21)
    sub = LinearSubproblem(lam=2.0, d=0.1, h=h, a0=3.0, a11=4.0, a12=1.0, a21=3.0, a22=1.5, mu_I=0.5, dirac=10.0)
    sol = solve_coupled_linear(sub, g)
    l1 = np.sum(g.weights * np.abs(sol.u1)) + np.sum(g.w1 * np.abs(sol.u2))
    mass = 10.0 + 0.5 * 2.0
    assert sub.lam * l1 <= mass + 1e-8


def test_iterative_backend_matches_direct():
    g = build_grid2d(21, 6)
    sub = ref_subproblem(0.5)
    d = solve_coupled_linear(sub, g)
    it = solve_coupled_linear(sub, g, opts=SolverOptions(backend="iterative", lin_tol=1e-12))
    assert it.iterations > 0
    np.testing.assert_allclose(it.u1, d.u1, rtol=1e-8, atol=1e-9)
    np.testing.assert_allclose(it.u2, d.u2, rtol=1e-8, atol=1e-9)


def test_iterative_nonconvergence_reports_history():
    g = build_grid2d(41, 11)
    with pytest.raises(LinearSolveError) as info:
        solve_coupled_linear(ref_subproblem(0.05), g, opts=SolverOptions(backend="iterative", max_iter=2))
    assert len(info.value.residual_history) >= 1


def test_dominance_violation_warns_but_solves():
    g = build_grid2d(11, 4)
    sub = LinearSubproblem(lam=1.0, d=1.0, a11=1.0, a21=2.0, a12=0.0, a22=0.0, dirac=1.0)
    with pytest.warns(DominanceWarning) as rec:
        sol = solve_coupled_linear(sub, g)
    assert rec[0].message.violation == pytest.approx(1.0)
    assert np.all(np.isfinite(sol.u1))
    assert not sub.is_positivity_preserving(11)


def test_no_warning_when_dominant():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        solve_coupled_linear(ref_subproblem(), build_grid2d(11, 4))


def test_invalid_subproblems():
    with pytest.raises(ValueError):
        LinearSubproblem(lam=0.0, d=1.0)
    with pytest.raises(ValueError):
        LinearSubproblem(lam=1.0, d=1.0, a0=-1.0)
    with pytest.raises(ValueError):
        SolverOptions(backend="cg")
    with pytest.raises(ValueError, match="bottom"):
        solve_coupled_linear(ref_subproblem(), build_grid2d(11, 4), build_grid1d(9))


def test_interval_problem_constant_source():
    g = build_grid1d(21)
    sub = LinearSubproblem(lam=2.0, d=0.5, a0=1.0, mu_omega=6.0)
    sol = solve_coupled_linear_1d(sub, g)
    np.testing.assert_allclose(sol.u1, 2.0, rtol=1e-12)
    np.testing.assert_allclose(sol.u2, 0.0, atol=1e-14)
    assert weak_residual(sol, sub) < 1e-12
