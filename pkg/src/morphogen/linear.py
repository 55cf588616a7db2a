"""Coupled linear bulk/surface subproblem.

Solves, for given coefficients,

    div(J_h(u1)) + (lam + a0) u1 = mu_omega              in the bulk
    -J_h(u1).nu + a11 u1 - a12 u2 = mu_I + p1 delta      on the bottom edge
    -d u2'' - a21 u1 + (lam + a22) u2 = 0                on the bottom edge

with no-flux conditions elsewhere, as one monolithic sparse system over the
bulk and surface unknowns. The same frozen-coefficient problem on the
interval (bulk collapsed onto the edge) is provided for the reduced model.

Residuals are evaluated by a separate code path built from edge difference
quotients, so they do not reuse the assembled matrix.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .discretization import (
    Grid1D,
    Grid2D,
    assemble_bulk,
    assemble_dirac,
    assemble_surface,
)

__all__ = [
    "SolverOptions",
    "LinearSubproblem",
    "CoupledSolution",
    "DominanceWarning",
    "LinearSolveError",
    "check_dominance",
    "coupled_matrix",
    "solve_coupled_linear",
    "solve_coupled_linear_1d",
    "residual_vectors",
    "residual_vectors_1d",
    "weak_residual",
    "make_test_fields",
]


class DominanceWarning(UserWarning):
    """Raised (as a warning) when a11 >= |a21| or a22 >= |a12| fails.

    The solve still proceeds but nonnegativity of the result is no longer
    guaranteed.
    """

    def __init__(self, message: str, violation: float):
        super().__init__(message)
        self.violation = violation


class LinearSolveError(RuntimeError):
    def __init__(self, message: str, residual_history: Sequence[float] = ()):
        super().__init__(message)
        self.residual_history = list(residual_history)


@dataclass(frozen=True)
class SolverOptions:
    lin_tol: float = 1e-10
    max_iter: int = 10_000
    backend: str = "direct"

    def __post_init__(self) -> None:
        if self.backend not in ("direct", "iterative"):
            raise ValueError(f"backend must be 'direct' or 'iterative', got {self.backend!r}")
        if not self.lin_tol > 0:
            raise ValueError("lin_tol must be positive")


@dataclass
class LinearSubproblem:
    """Coefficients and data of the coupled linear problem.

    Bulk fields (``a0``, ``mu_omega``) are scalars or ``(n1, n2)`` arrays for
    the 2D problem and ``(n1,)`` arrays for the interval problem. Edge fields
    are scalars or ``(n1,)`` arrays. ``mu_I`` is a density on the edge; the
    point source of strength ``dirac`` at x1 = 0 is carried separately.
    """

    lam: float
    d: float
    h: float = 1.0
    a0: object = 0.0
    a11: object = 0.0
    a12: object = 0.0
    a21: object = 0.0
    a22: object = 0.0
    mu_omega: object = 0.0
    mu_I: object = 0.0
    dirac: float = 0.0

    def __post_init__(self) -> None:
        if not self.lam > 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if not self.d > 0:
            raise ValueError(f"d must be positive, got {self.d}")
        if not 0 < self.h <= 1:
            raise ValueError(f"h must lie in (0, 1], got {self.h}")
        if np.any(np.asarray(self.a0) < 0):
            raise ValueError("a0 must be nonnegative")

    def edge(self, name: str, n1: int) -> np.ndarray:
        return np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (n1,))

    def bulk(self, name: str, shape: tuple[int, ...]) -> np.ndarray:
        return np.broadcast_to(np.asarray(getattr(self, name), dtype=float), shape)

    def is_positivity_preserving(self, n1: int) -> bool:
        data_ok = (
            np.all(np.asarray(self.mu_omega) >= 0)
            and np.all(np.asarray(self.mu_I) >= 0)
            and self.dirac >= 0
        )
        return bool(
            data_ok
            and np.all(self.edge("a12", n1) >= 0)
            and np.all(self.edge("a21", n1) >= 0)
            and dominance_violation(self, n1) <= 0
        )


def dominance_violation(sub: LinearSubproblem, n1: int) -> float:
    """Largest amount by which a11 >= |a21| or a22 >= |a12| fails (<= 0 if it holds)."""
    v1 = np.abs(sub.edge("a21", n1)) - sub.edge("a11", n1)
    v2 = np.abs(sub.edge("a12", n1)) - sub.edge("a22", n1)
    return float(max(v1.max(), v2.max()))


def check_dominance(sub: LinearSubproblem, n1: int) -> bool:
    viol = dominance_violation(sub, n1)
    if viol > 0:
        warnings.warn(
            DominanceWarning(
                f"dominance condition violated by {viol:.3g}; positivity is not guaranteed", viol
            ),
            stacklevel=3,
        )
        return False
    return True


@dataclass
class CoupledSolution:
    u1: np.ndarray
    u2: np.ndarray
    grid1: Grid1D
    grid2: Grid2D | None = None
    relative_residual: float = 0.0
    iterations: int = 0
    residual_history: list[float] = field(default_factory=list)


def coupled_matrix(sub: LinearSubproblem, grid2: Grid2D, grid1: Grid1D) -> tuple[sp.csr_matrix, np.ndarray]:
    """Monolithic weighted matrix and right-hand side for the 2D problem."""
    _check_grids(grid2, grid1)
    n1, n2 = grid2.n1, grid2.n2
    N = grid2.size
    w1 = grid1.weights
    tr = grid2.trace_indices()
    a11, a12, a21 = sub.edge("a11", n1), sub.edge("a12", n1), sub.edge("a21", n1)
    a22 = sub.edge("a22", n1)

    bulk = assemble_bulk(grid2, sub.h, sub.lam + sub.bulk("a0", (n1, n2))).matrix
    surf = assemble_surface(grid1, sub.d, sub.lam + a22).matrix
    robin = sp.csr_matrix((w1 * a11, (tr, tr)), shape=(N, N))
    c12 = sp.csr_matrix((-w1 * a12, (tr, np.arange(n1))), shape=(N, n1))
    c21 = sp.csr_matrix((-w1 * a21, (np.arange(n1), tr)), shape=(n1, N))
    A = sp.bmat([[bulk + robin, c12], [c21, surf]], format="csr")
    A.sort_indices()

    rhs = np.zeros(N + n1)
    rhs[:N] = (grid2.weights * sub.bulk("mu_omega", (n1, n2))).ravel()
    rhs[tr] += w1 * sub.edge("mu_I", n1) + _point_load(grid1, sub.dirac)
    return A, rhs


def coupled_matrix_1d(sub: LinearSubproblem, grid1: Grid1D) -> tuple[sp.csr_matrix, np.ndarray]:
    n1 = grid1.n1
    w1 = grid1.weights
    a11, a12, a21 = sub.edge("a11", n1), sub.edge("a12", n1), sub.edge("a21", n1)
    a22 = sub.edge("a22", n1)
    A11 = assemble_surface(grid1, 1.0, sub.lam + sub.edge("a0", n1) + a11).matrix
    A22 = assemble_surface(grid1, sub.d, sub.lam + a22).matrix
    A = sp.bmat([[A11, sp.diags(-w1 * a12)], [sp.diags(-w1 * a21), A22]], format="csr")
    A.sort_indices()
    rhs = np.zeros(2 * n1)
    rhs[:n1] = w1 * (sub.edge("mu_omega", n1) + sub.edge("mu_I", n1))
    rhs[:n1] += _point_load(grid1, sub.dirac)
    return A, rhs


def _point_load(grid1: Grid1D, strength: float) -> np.ndarray:
    # signed data are allowed here; the model source itself is nonnegative
    return np.sign(strength) * assemble_dirac(grid1, abs(strength)).weighted


def _check_grids(grid2: Grid2D, grid1: Grid1D) -> None:
    if grid2.n1 != grid1.n1:
        raise ValueError(f"edge grid ({grid1.n1} nodes) is not the bottom of the bulk grid ({grid2.n1})")


def _solve_sparse(A: sp.csr_matrix, rhs: np.ndarray, opts: SolverOptions) -> tuple[np.ndarray, int, list[float]]:
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0:
        return np.zeros_like(rhs), 0, [0.0]
    history: list[float] = []
    if opts.backend == "direct":
        try:
            lu = spla.splu(A.tocsc())
        except RuntimeError as exc:
            raise LinearSolveError(f"sparse factorisation failed: {exc}") from exc
        x = lu.solve(rhs)
        iterations = 0
    else:
        dinv = 1.0 / A.diagonal()
        M = spla.LinearOperator(A.shape, matvec=lambda v: dinv * v)

        def record(xk):
            history.append(float(np.linalg.norm(rhs - A @ xk) / bnorm))

        x, info = spla.bicgstab(A, rhs, rtol=opts.lin_tol, atol=0.0, maxiter=opts.max_iter, M=M, callback=record)
        iterations = len(history)
        if info != 0:
            raise LinearSolveError(f"BiCGSTAB did not converge (info={info})", history)
    rel = float(np.linalg.norm(rhs - A @ x) / bnorm)
    history.append(rel)
    if not np.all(np.isfinite(x)) or rel > opts.lin_tol:
        raise LinearSolveError(f"relative residual {rel:.3e} exceeds lin_tol {opts.lin_tol:.1e}", history)
    return x, iterations, history


def solve_coupled_linear(
    sub: LinearSubproblem,
    grid2: Grid2D,
    grid1: Grid1D | None = None,
    opts: SolverOptions | None = None,
) -> CoupledSolution:
    grid1 = grid1 or grid2.bottom()
    opts = opts or SolverOptions()
    check_dominance(sub, grid2.n1)
    A, rhs = coupled_matrix(sub, grid2, grid1)
    x, its, hist = _solve_sparse(A, rhs, opts)
    N = grid2.size
    return CoupledSolution(
        u1=x[:N].reshape(grid2.n1, grid2.n2),
        u2=x[N:].copy(),
        grid1=grid1,
        grid2=grid2,
        relative_residual=hist[-1],
        iterations=its,
        residual_history=hist,
    )


def solve_coupled_linear_1d(sub: LinearSubproblem, grid1: Grid1D, opts: SolverOptions | None = None) -> CoupledSolution:
    """Interval analogue: ``u1`` lives on the edge grid as well."""
    opts = opts or SolverOptions()
    check_dominance(sub, grid1.n1)
    A, rhs = coupled_matrix_1d(sub, grid1)
    x, its, hist = _solve_sparse(A, rhs, opts)
    n1 = grid1.n1
    return CoupledSolution(
        u1=x[:n1].copy(),
        u2=x[n1:].copy(),
        grid1=grid1,
        relative_residual=hist[-1],
        iterations=its,
        residual_history=hist,
    )


def _flux_1d(u: np.ndarray, dx: float, axis: int, weight: np.ndarray) -> np.ndarray:
    """Weighted Neumann stiffness applied through edge difference quotients."""
    g = np.diff(u, axis=axis) / dx * weight
    r = np.zeros_like(u)
    lo = [slice(None)] * u.ndim
    hi = [slice(None)] * u.ndim
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    r[tuple(lo)] -= g
    r[tuple(hi)] += g
    return r


def residual_vectors(
    sub: LinearSubproblem, grid2: Grid2D, u1: np.ndarray, u2: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Weighted residuals ``(r1, r2)`` so that ``sum(v1*r1) + sum(v2*r2)`` is
    bilinear form minus load for nodal test fields ``(v1, v2)``."""
    n1, n2 = grid2.n1, grid2.n2
    w1, w2, W = grid2.w1, grid2.w2, grid2.weights
    u1 = np.asarray(u1, dtype=float).reshape(n1, n2)
    u2 = np.asarray(u2, dtype=float)
    r1 = _flux_1d(u1, grid2.dx1, 0, w2[None, :])
    r1 += sub.h**-2 * _flux_1d(u1, grid2.dx2, 1, w1[:, None])
    r1 += W * (sub.lam + sub.bulk("a0", (n1, n2))) * u1 - W * sub.bulk("mu_omega", (n1, n2))
    t = u1[:, 0]
    r1[:, 0] += w1 * (sub.edge("a11", n1) * t - sub.edge("a12", n1) * u2 - sub.edge("mu_I", n1))
    r1[(n1 - 1) // 2, 0] -= sub.dirac
    r2 = sub.d * _flux_1d(u2, grid2.dx1, 0, 1.0)
    r2 += w1 * ((sub.lam + sub.edge("a22", n1)) * u2 - sub.edge("a21", n1) * t)
    return r1, r2


def residual_vectors_1d(
    sub: LinearSubproblem, grid1: Grid1D, u1: np.ndarray, u2: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    n1, w = grid1.n1, grid1.weights
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    r1 = _flux_1d(u1, grid1.dx, 0, 1.0)
    r1 += w * ((sub.lam + sub.edge("a0", n1) + sub.edge("a11", n1)) * u1 - sub.edge("a12", n1) * u2)
    r1 -= w * (sub.edge("mu_omega", n1) + sub.edge("mu_I", n1))
    r1[grid1.origin] -= sub.dirac
    r2 = sub.d * _flux_1d(u2, grid1.dx, 0, 1.0)
    r2 += w * ((sub.lam + sub.edge("a22", n1)) * u2 - sub.edge("a21", n1) * u1)
    return r1, r2


def make_test_fields(
    grid1: Grid1D,
    grid2: Grid2D | None = None,
    n_smooth: int = 20,
    n_random: int = 20,
    seed: int = 0,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Test functions for the bulk identity and for the surface identity.

    Smooth fields are products of Neumann cosines, starting with the constant;
    random fields are uniform on [-1, 1] nodewise.
    """
    rng = np.random.default_rng(seed)
    x1 = grid1.x
    modes1 = [np.cos(k * np.pi * (x1 + 1) / 2) for k in range(n_smooth)]
    if grid2 is None:
        bulk_tests = list(modes1) + [rng.uniform(-1, 1, grid1.n1) for _ in range(n_random)]
    else:
        X1, X2 = grid2.mesh()
        pairs = sorted(((k, l) for k in range(n_smooth) for l in range(n_smooth)), key=lambda kl: (sum(kl), kl))
        bulk_tests = [
            np.cos(k * np.pi * (X1 + 1) / 2) * np.cos(l * np.pi * X2) for k, l in pairs[:n_smooth]
        ]
        bulk_tests += [rng.uniform(-1, 1, (grid2.n1, grid2.n2)) for _ in range(n_random)]
    surface_tests = list(modes1) + [rng.uniform(-1, 1, grid1.n1) for _ in range(n_random)]
    return bulk_tests, surface_tests


def weak_residual(
    sol: CoupledSolution,
    sub: LinearSubproblem,
    tests: tuple[Sequence[np.ndarray], Sequence[np.ndarray]] | None = None,
) -> float:
    """Max over test fields of |bilinear form - load| for either identity."""
    if tests is None:
        tests = make_test_fields(sol.grid1, sol.grid2)
    if sol.grid2 is None:
        r1, r2 = residual_vectors_1d(sub, sol.grid1, sol.u1, sol.u2)
    else:
        r1, r2 = residual_vectors(sub, sol.grid2, sol.u1, sol.u2)
    bulk_tests, surface_tests = tests
    vals = [abs(float(np.sum(v * r1))) for v in bulk_tests]
    vals += [abs(float(np.sum(v * r2))) for v in surface_tests]
    return max(vals) if vals else 0.0
