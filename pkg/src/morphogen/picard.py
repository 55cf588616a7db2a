"""Stationary states of the bulk/surface system and of its 1D limit.

Each outer step freezes the receptor closure H at the current iterate and
solves the resulting coupled linear problem with

    lam = min(b1, b2),  a0 = b1 - lam,
    a11 = c1 + k1 H,    a12 = c2,
    a21 = c1,           a22 = b2 - lam + c2 + k2 H,
    mu_omega = 0,       mu_I = p1 delta.

Because H is nonincreasing in both arguments and the frozen problem is an
M-matrix system, the frozen map is order preserving and the iteration
settles monotonically; the damping safeguard only matters when round-off
makes the update norm oscillate.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import IO, Callable

import numpy as np

from .discretization import Grid1D, Grid2D
from .linear import (
    CoupledSolution,
    LinearSubproblem,
    SolverOptions,
    make_test_fields,
    residual_vectors,
    residual_vectors_1d,
    solve_coupled_linear,
    solve_coupled_linear_1d,
)
from .model import DerivedConstants, ModelParams, derive_constants, eval_H, recover_complexes

log = logging.getLogger(__name__)

__all__ = [
    "PicardOptions",
    "PicardError",
    "SpeciesFields",
    "StationarySolution",
    "frozen_subproblem",
    "solve_stationary_2d",
    "solve_stationary_1d",
    "nonlinear_weak_residual",
]

INITIAL_GUESSES = ("default", "zero", "constant", "supplied")


class PicardError(RuntimeError):
    def __init__(self, message: str, history: list[tuple[int, float, float, float]]):
        super().__init__(message)
        self.history = history


@dataclass(frozen=True)
class PicardOptions:
    """Outer-iteration controls.

    ``initial`` selects the starting iterate: ``"default"`` is the solution
    with H switched off (exact when p3 = 0), ``"constant"`` uses
    ``initial_value`` for both fields, ``"supplied"`` uses ``initial_fields``.
    """

    tol: float = 1e-10
    max_outer: int = 200
    theta: float = 1.0
    theta_min: float = 0.25
    initial: str = "default"
    initial_value: float = 1.0
    initial_fields: tuple[np.ndarray, np.ndarray] | None = None
    linear: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self) -> None:
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 < self.theta <= 1:
            raise ValueError("damping theta must lie in (0, 1]")
        if not 0 < self.theta_min <= self.theta:
            raise ValueError("theta_min must lie in (0, theta]")
        if self.initial not in INITIAL_GUESSES:
            raise ValueError(f"initial must be one of {INITIAL_GUESSES}")
        if self.initial == "supplied" and self.initial_fields is None:
            raise ValueError("initial='supplied' needs initial_fields")
        if self.max_outer < 1:
            raise ValueError("max_outer must be >= 1")


@dataclass
class SpeciesFields:
    u1: np.ndarray
    u2: np.ndarray
    u3: np.ndarray
    u4: np.ndarray
    u5: np.ndarray


@dataclass
class StationarySolution:
    species: SpeciesFields
    params: ModelParams
    grid1: Grid1D
    grid2: Grid2D | None
    iterations: int
    update_norm: float
    residual: float
    converged: bool = True
    history: list[tuple[int, float, float, float]] = field(default_factory=list)

    @property
    def u1(self) -> np.ndarray:
        return self.species.u1

    @property
    def u2(self) -> np.ndarray:
        return self.species.u2

    @property
    def is_2d(self) -> bool:
        return self.grid2 is not None

    @property
    def h(self) -> float | None:
        return self.params.h if self.is_2d else None

    @property
    def trace(self) -> np.ndarray:
        """u1 on the bottom edge."""
        return self.u1[:, 0] if self.is_2d else self.u1

    def write_log(self, fh: IO[str]) -> None:
        """Convergence history as CSV."""
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration", "update_norm", "weak_residual", "theta"])
        for it, upd, res, theta in self.history:
            writer.writerow([it, f"{upd:.17g}", f"{res:.17g}", f"{theta:.17g}"])


def frozen_subproblem(
    params: ModelParams,
    dc: DerivedConstants,
    v1_trace: np.ndarray,
    v2: np.ndarray,
    H: np.ndarray | None = None,
) -> LinearSubproblem:
    b, c = params.b, params.c
    lam = min(b[0], b[1])
    if H is None:
        H = eval_H(v1_trace, v2, dc)
    return LinearSubproblem(
        lam=lam,
        d=params.d,
        h=params.h,
        a0=b[0] - lam,
        a11=c[0] + dc.k1 * H,
        a12=c[1],
        a21=c[0],
        a22=b[1] - lam + c[1] + dc.k2 * H,
        dirac=params.p1,
    )


def _weighted_l1(u1, u2, w_bulk, w_edge) -> float:
    return float(np.sum(w_bulk * np.abs(u1)) + np.sum(w_edge * np.abs(u2)))


def _picard(
    params: ModelParams,
    grid1: Grid1D,
    grid2: Grid2D | None,
    opts: PicardOptions,
) -> StationarySolution:
    dc = derive_constants(params)
    if grid2 is None:
        w_bulk, bulk_shape = grid1.weights, (grid1.n1,)
        trace_of: Callable[[np.ndarray], np.ndarray] = lambda u: u

        def linear(sub: LinearSubproblem) -> CoupledSolution:
            return solve_coupled_linear_1d(sub, grid1, opts.linear)

        def residual(sub, u1, u2):
            return residual_vectors_1d(sub, grid1, u1, u2)

    else:
        if grid2.n1 != grid1.n1:
            raise ValueError("edge grid does not match the bulk grid")
        w_bulk, bulk_shape = grid2.weights, (grid2.n1, grid2.n2)
        trace_of = lambda u: u[:, 0]

        def linear(sub: LinearSubproblem) -> CoupledSolution:
            return solve_coupled_linear(sub, grid2, grid1, opts.linear)

        def residual(sub, u1, u2):
            return residual_vectors(sub, grid2, u1, u2)

    w_edge = grid1.weights
    tests = make_test_fields(grid1, grid2)

    def weak_res(u1, u2) -> float:
        sub = frozen_subproblem(params, dc, trace_of(u1), u2)
        r1, r2 = residual(sub, u1, u2)
        return max(
            max(abs(float(np.sum(v * r1))) for v in tests[0]),
            max(abs(float(np.sum(v * r2))) for v in tests[1]),
        )

    n1 = grid1.n1
    if opts.initial == "default":
        s = linear(frozen_subproblem(params, dc, None, None, H=np.zeros(n1)))
        u1, u2 = s.u1, s.u2
    elif opts.initial == "zero":
        u1, u2 = np.zeros(bulk_shape), np.zeros(n1)
    elif opts.initial == "constant":
        u1, u2 = np.full(bulk_shape, float(opts.initial_value)), np.full(n1, float(opts.initial_value))
    else:
        f1, f2 = opts.initial_fields
        u1 = np.array(f1, dtype=float).reshape(bulk_shape)
        u2 = np.array(f2, dtype=float).reshape(n1)

    theta = opts.theta
    history: list[tuple[int, float, float, float]] = []
    updates: list[float] = []
    converged = False
    for it in range(1, opts.max_outer + 1):
        step = linear(frozen_subproblem(params, dc, trace_of(u1), u2))
        new1 = (1 - theta) * u1 + theta * step.u1
        new2 = (1 - theta) * u2 + theta * step.u2
        diff = _weighted_l1(new1 - u1, new2 - u2, w_bulk, w_edge)
        scale = _weighted_l1(new1, new2, w_bulk, w_edge)
        upd = diff / scale if scale > 0 else diff
        u1, u2 = new1, new2
        res = weak_res(u1, u2)
        history.append((it, upd, res, theta))
        log.debug("picard it=%d update=%.3e residual=%.3e theta=%.3g", it, upd, res, theta)
        if upd <= opts.tol:
            converged = True
            break
        updates.append(upd)
        if len(updates) >= 3 and updates[-1] > updates[-2] > updates[-3] and theta > opts.theta_min:
            theta = max(theta / 2, opts.theta_min)
            updates.clear()
    if not converged:
        raise PicardError(
            f"Picard iteration did not reach tol={opts.tol:.1e} in {opts.max_outer} steps "
            f"(last update {history[-1][1]:.3e})",
            history,
        )

    u3, u4, u5 = recover_complexes(trace_of(u1), u2, dc, params)
    return StationarySolution(
        species=SpeciesFields(u1, u2, u3, u4, u5),
        params=params,
        grid1=grid1,
        grid2=grid2,
        iterations=len(history),
        update_norm=history[-1][1],
        residual=history[-1][2],
        converged=True,
        history=history,
    )


def solve_stationary_2d(
    params: ModelParams, grid2: Grid2D, opts: PicardOptions | None = None
) -> StationarySolution:
    """Unique nonnegative steady state on the rectangle for thickness ``params.h``."""
    return _picard(params, grid2.bottom(), grid2, opts or PicardOptions())


def solve_stationary_1d(
    params: ModelParams, grid1: Grid1D, opts: PicardOptions | None = None
) -> StationarySolution:
    """Steady state of the reduced interval system (``params.h`` is ignored)."""
    return _picard(params, grid1, None, opts or PicardOptions())


def nonlinear_weak_residual(
    sol: StationarySolution,
    params: ModelParams | None = None,
    tests=None,
) -> float:
    """Max residual of both weak identities with H evaluated at the solution.

    ``tests`` defaults to 20 smooth plus 20 random test fields per identity.
    """
    params = params or sol.params
    dc = derive_constants(params)
    sub = frozen_subproblem(params, dc, sol.trace, sol.u2)
    if tests is None:
        tests = make_test_fields(sol.grid1, sol.grid2)
    if sol.is_2d:
        r1, r2 = residual_vectors(sub, sol.grid2, sol.u1, sol.u2)
    else:
        r1, r2 = residual_vectors_1d(sub, sol.grid1, sol.u1, sol.u2)
    vals = [abs(float(np.sum(v * r1))) for v in tests[0]]
    vals += [abs(float(np.sum(v * r2))) for v in tests[1]]
    return max(vals)
