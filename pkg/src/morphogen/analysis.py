"""Norms, diagnostics and the thickness sweep.

Weak convergence in h is not computable directly; the sweep measures the
strong Lp distance between the x2-average of the bulk field and the reduced
1D solution, plus the uniform distance of the surface fields.
"""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .discretization import Grid1D, Grid2D
from .model import ModelParams, derive_constants, eval_H
from .picard import (
    PicardError,
    PicardOptions,
    SpeciesFields,
    StationarySolution,
    solve_stationary_1d,
    solve_stationary_2d,
)

__all__ = [
    "NormReport",
    "SweepRow",
    "SweepReport",
    "SweepError",
    "lp_norm",
    "compute_norms",
    "mass_balance_residual",
    "homogeneity_index",
    "distance_to_1d",
    "derivative_jump",
    "extrude",
    "run_sweep",
]

REPORT_HEADER = (
    "distance_to_1d = ||mean_x2(u1^h) - u1^0||_Lp(I) + ||u2^h - u2^0||_inf(I); "
    "a strong-norm surrogate for the weak limit as h -> 0"
)


def lp_norm(f: np.ndarray, weights: np.ndarray, p: float) -> float:
    """Trapezoidal Lp norm; ``p = inf`` gives the max norm."""
    f = np.abs(np.asarray(f, dtype=float))
    if np.isinf(p):
        return float(f.max())
    return float(np.sum(weights * f**p) ** (1.0 / p))


def _second_difference(u: np.ndarray, dx: float) -> np.ndarray:
    # Neumann ends via a mirrored ghost node
    padded = np.concatenate(([u[1]], u, [u[-2]]))
    return (padded[2:] - 2 * u + padded[:-2]) / dx**2


@dataclass
class NormReport:
    p: float
    q: float
    h: float
    u1_lp: float
    dx1_u1_lp: float
    dx2_u1_lp: float
    mh_lp: float
    scaled_dx2_lp: float
    u2_lq: float
    du2_lq: float
    d2u2_lq: float
    mass_balance: float

    @property
    def u1_w1p(self) -> float:
        return self.u1_lp + self.dx1_u1_lp + self.dx2_u1_lp

    @property
    def u2_w2q(self) -> float:
        return self.u2_lq + self.du2_lq + self.d2u2_lq

    @property
    def composite(self) -> float:
        """Left-hand side of the h-uniform estimate."""
        return self.u1_w1p + self.scaled_dx2_lp + self.u2_w2q

    def to_dict(self) -> dict:
        out = asdict(self)
        out.update(u1_w1p=self.u1_w1p, u2_w2q=self.u2_w2q, composite=self.composite)
        return out


def _bulk_view(sol: StationarySolution) -> tuple[np.ndarray, Grid2D, float]:
    """Bulk field on a 2D grid; 1D solutions are extruded onto two x2 nodes."""
    if sol.is_2d:
        return sol.u1, sol.grid2, sol.params.h
    grid2 = Grid2D(sol.grid1.n1, 2)
    return np.repeat(sol.u1[:, None], 2, axis=1), grid2, 1.0


def mass_balance_residual(sol: StationarySolution) -> float:
    """Relative defect of the total budget obtained by testing with constants."""
    params = sol.params
    dc = derive_constants(params)
    b = params.b
    w1 = sol.grid1.weights
    t, u2 = sol.trace, sol.u2
    H = eval_H(t, u2, dc)
    edge = np.sum(w1 * (dc.k1 * H * t + b[1] * u2 + dc.k2 * H * u2))
    if sol.is_2d:
        bulk = b[0] * np.sum(sol.grid2.weights * sol.u1)
    else:
        bulk = b[0] * np.sum(w1 * sol.u1)
    defect = abs(bulk + edge - params.p1)
    return float(defect / params.p1) if params.p1 > 0 else float(defect)


def compute_norms(sol: StationarySolution, p: float = 1.5, q: float = 4.0) -> NormReport:
    if not 1 <= p < 2:
        raise ValueError(f"p must satisfy 1 <= p < 2 (the bulk field is in W^1_p for every 1 <= p < 2), got {p}")
    if not 1 <= q < np.inf:
        raise ValueError(f"q must satisfy 1 <= q < inf, got {q}")
    u1, grid2, h = _bulk_view(sol)
    W = grid2.weights
    g1 = np.gradient(u1, grid2.x1, axis=0)
    g2 = np.gradient(u1, grid2.x2, axis=1)
    mh = np.sqrt(g1**2 + h**-2 * g2**2)
    w = sol.grid1.weights
    u2 = sol.u2
    return NormReport(
        p=p,
        q=q,
        h=h,
        u1_lp=lp_norm(u1, W, p),
        dx1_u1_lp=lp_norm(g1, W, p),
        dx2_u1_lp=lp_norm(g2, W, p),
        mh_lp=lp_norm(mh, W, p),
        scaled_dx2_lp=lp_norm(g2, W, p) / h,
        u2_lq=lp_norm(u2, w, q),
        du2_lq=lp_norm(np.gradient(u2, sol.grid1.x), w, q),
        d2u2_lq=lp_norm(_second_difference(u2, sol.grid1.dx), w, q),
        mass_balance=mass_balance_residual(sol),
    )


def homogeneity_index(sol2d: StationarySolution | np.ndarray, grid2: Grid2D | None = None) -> float:
    """Largest relative vertical spread over x1-columns of the field scaled to max 1."""
    if isinstance(sol2d, StationarySolution):
        u, grid2 = sol2d.u1, sol2d.grid2
    else:
        u = np.asarray(sol2d, dtype=float)
    if grid2 is None:
        raise ValueError("a 2D grid is required")
    top = np.abs(u).max()
    if top == 0:
        raise ValueError("homogeneity index is undefined for the zero field")
    u = u / top
    mean = u @ grid2.w2
    spread = u.max(axis=1) - u.min(axis=1)
    return float(np.max(spread / mean))


def distance_to_1d(sol2d: StationarySolution, sol1d: StationarySolution, p: float = 1.5) -> float:
    if sol2d.grid2 is None or sol2d.grid1.n1 != sol1d.grid1.n1:
        raise ValueError("solutions must share the x1 grid")
    w = sol1d.grid1.weights
    mean = sol2d.u1 @ sol2d.grid2.w2
    return lp_norm(mean - sol1d.u1, w, p) + lp_norm(sol2d.u2 - sol1d.u2, w, np.inf)


def derivative_jump(sol1d: StationarySolution) -> float:
    """``u1'(0+) - u1'(0-)`` from second-order one-sided differences."""
    u, i, dx = sol1d.u1, sol1d.grid1.origin, sol1d.grid1.dx
    right = (-3 * u[i] + 4 * u[i + 1] - u[i + 2]) / (2 * dx)
    left = (3 * u[i] - 4 * u[i - 1] + u[i - 2]) / (2 * dx)
    return float(right - left)


def extrude(sol1d: StationarySolution, grid2: Grid2D, h: float = 1.0) -> StationarySolution:
    """A 2D solution object whose bulk field is ``sol1d.u1`` constant in x2."""
    if grid2.n1 != sol1d.grid1.n1:
        raise ValueError("grid mismatch")
    u1 = np.repeat(sol1d.u1[:, None], grid2.n2, axis=1)
    s = sol1d.species
    return StationarySolution(
        species=SpeciesFields(u1, s.u2.copy(), s.u3.copy(), s.u4.copy(), s.u5.copy()),
        params=sol1d.params.with_h(h),
        grid1=sol1d.grid1,
        grid2=grid2,
        iterations=sol1d.iterations,
        update_norm=sol1d.update_norm,
        residual=sol1d.residual,
    )


@dataclass
class SweepRow:
    h: float
    norms: NormReport
    homogeneity: float
    distance: float
    iterations: int
    residual: float


@dataclass
class SweepReport:
    rows: list[SweepRow]
    reference: StationarySolution | None
    grid2: Grid2D
    p: float = 1.5
    q: float = 4.0
    bound_factor: float = 3.0
    solutions: dict[float, StationarySolution] = field(default_factory=dict, repr=False)
    failures: list[dict] = field(default_factory=list)

    @property
    def h_values(self) -> list[float]:
        return [r.h for r in self.rows]

    @property
    def composite_ratio(self) -> float:
        vals = np.array([r.norms.composite for r in self.rows])
        return float(vals.max() / np.median(vals)) if len(vals) else float("nan")

    @property
    def uniform_bound_ok(self) -> bool:
        return bool(self.composite_ratio <= self.bound_factor)

    def to_dict(self) -> dict:
        return {
            "header": REPORT_HEADER,
            "grid": self.grid2.describe(),
            "p": self.p,
            "q": self.q,
            "bound_factor": self.bound_factor,
            "composite_ratio": self.composite_ratio,
            "uniform_bound_ok": self.uniform_bound_ok,
            "rows": [
                {
                    "h": r.h,
                    "homogeneity_index": r.homogeneity,
                    "distance_to_1d": r.distance,
                    "iterations": r.iterations,
                    "weak_residual": r.residual,
                    "norms": r.norms.to_dict(),
                }
                for r in self.rows
            ],
            "failures": self.failures,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        cols = ["u1_lp", "u1_w1p", "mh_lp", "scaled_dx2_lp", "u2_w2q", "composite", "mass_balance"]
        writer.writerow(["h", "homogeneity_index", "distance_to_1d", "iterations", *cols])
        for r in self.rows:
            nd = r.norms.to_dict()
            writer.writerow(
                [f"{r.h:.17g}", f"{r.homogeneity:.17g}", f"{r.distance:.17g}", r.iterations]
                + [f"{nd[c]:.17g}" for c in cols]
            )
        return buf.getvalue()


class SweepError(RuntimeError):
    def __init__(self, message: str, report: SweepReport):
        super().__init__(message)
        self.report = report


def _solve_member(args):
    params, grid2, opts = args
    try:
        return solve_stationary_2d(params, grid2, opts), None
    except PicardError as exc:
        return None, {"h": params.h, "error": str(exc), "history": exc.history}


def run_sweep(
    params: ModelParams,
    h_list,
    grid2: Grid2D,
    grid1: Grid1D | None = None,
    opts: PicardOptions | None = None,
    p: float = 1.5,
    q: float = 4.0,
    bound_factor: float = 3.0,
    workers: int = 1,
) -> SweepReport:
    """Solve the 2D problem for each thickness and compare with the 1D limit."""
    h_list = [float(h) for h in h_list]
    if not h_list:
        raise ValueError("h_list must be nonempty")
    if any(not 0 < h <= 1 for h in h_list):
        raise ValueError("every h must lie in (0, 1]")
    if any(b >= a for a, b in zip(h_list, h_list[1:])):
        raise ValueError("h_list must be strictly decreasing")
    grid1 = grid1 or grid2.bottom()
    if grid1.n1 != grid2.n1:
        raise ValueError("edge grid does not match the bulk grid")
    opts = opts or PicardOptions()

    reference = solve_stationary_1d(params, grid1, opts)
    jobs = [(params.with_h(h), grid2, opts) for h in h_list]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_solve_member, jobs))
    else:
        results = [_solve_member(j) for j in jobs]

    report = SweepReport(rows=[], reference=reference, grid2=grid2, p=p, q=q, bound_factor=bound_factor)
    for h, (sol, failure) in zip(h_list, results):
        if failure is not None:
            report.failures.append(failure)
            raise SweepError(f"solve failed for h={h}: {failure['error']}", report)
        report.solutions[h] = sol
        report.rows.append(
            SweepRow(
                h=h,
                norms=compute_norms(sol, p, q),
                homogeneity=homogeneity_index(sol) if np.any(sol.u1) else 0.0,
                distance=distance_to_1d(sol, reference, p),
                iterations=sol.iterations,
                residual=sol.residual,
            )
        )
    return report
