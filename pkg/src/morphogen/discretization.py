"""Tensor-product grids and weighted finite-difference operators.

All operators are stored in *weighted* form: row ``k`` of the matrix is the
discrete bilinear form tested against the nodal hat function of node ``k``.
Dividing a row by the node's quadrature weight gives the familiar
finite-difference stencil. Neumann boundaries are handled by ghost-node
elimination, which in weighted form is just the half-weight boundary row of
the 1D stiffness matrix.

Bulk nodes are flattened in C order over arrays of shape ``(n1, n2)``, so the
bottom edge (x2 = 0) is ``u[:, 0]`` and has flat indices ``i * n2``.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Grid1D",
    "Grid2D",
    "SparseOperator",
    "DiracLoad",
    "build_grid1d",
    "build_grid2d",
    "stiffness_1d",
    "bulk_parts",
    "assemble_bulk",
    "assemble_surface",
    "assemble_dirac",
]


def _trapezoid_weights(n: int, dx: float) -> np.ndarray:
    w = np.full(n, dx)
    w[0] = w[-1] = dx / 2
    return w


@dataclass(frozen=True, eq=False)
class Grid1D:
    """Uniform grid on [-1, 1] with trapezoidal weights."""

    n1: int

    def __post_init__(self) -> None:
        if self.n1 < 3 or self.n1 % 2 == 0:
            raise ValueError(f"n1 must be odd and >= 3 so that x1 = 0 is a node, got {self.n1}")

    @property
    def dx(self) -> float:
        return 2.0 / (self.n1 - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(-1.0, 1.0, self.n1)

    @property
    def weights(self) -> np.ndarray:
        return _trapezoid_weights(self.n1, self.dx)

    @property
    def origin(self) -> int:
        """Index of the node at x1 = 0."""
        return (self.n1 - 1) // 2

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Grid1D) and other.n1 == self.n1

    def __hash__(self) -> int:
        return hash(("Grid1D", self.n1))

    def describe(self) -> dict:
        return {"n1": self.n1}


@dataclass(frozen=True, eq=False)
class Grid2D:
    """Uniform grid on [-1, 1] x [0, 1]."""

    n1: int
    n2: int

    def __post_init__(self) -> None:
        if self.n1 < 3 or self.n1 % 2 == 0:
            raise ValueError(f"n1 must be odd and >= 3 so that x1 = 0 is a node, got {self.n1}")
        if self.n2 < 2:
            raise ValueError(f"n2 must be >= 2, got {self.n2}")

    @property
    def dx1(self) -> float:
        return 2.0 / (self.n1 - 1)

    @property
    def dx2(self) -> float:
        return 1.0 / (self.n2 - 1)

    @property
    def x1(self) -> np.ndarray:
        return np.linspace(-1.0, 1.0, self.n1)

    @property
    def x2(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n2)

    @property
    def w1(self) -> np.ndarray:
        return _trapezoid_weights(self.n1, self.dx1)

    @property
    def w2(self) -> np.ndarray:
        return _trapezoid_weights(self.n2, self.dx2)

    @property
    def weights(self) -> np.ndarray:
        """2D quadrature weights, shape ``(n1, n2)``."""
        return np.outer(self.w1, self.w2)

    @property
    def size(self) -> int:
        return self.n1 * self.n2

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x1, self.x2, indexing="ij")

    def bottom(self) -> Grid1D:
        return Grid1D(self.n1)

    def trace_indices(self) -> np.ndarray:
        return np.arange(self.n1) * self.n2

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Grid2D) and (other.n1, other.n2) == (self.n1, self.n2)

    def __hash__(self) -> int:
        return hash(("Grid2D", self.n1, self.n2))

    def describe(self) -> dict:
        return {"n1": self.n1, "n2": self.n2}


def build_grid1d(n1: int) -> Grid1D:
    return Grid1D(int(n1))


def build_grid2d(n1: int, n2: int) -> Grid2D:
    return Grid2D(int(n1), int(n2))


@dataclass(frozen=True)
class SparseOperator:
    """CSR matrix plus a flag recording whether it was assembled symmetric."""

    matrix: sp.csr_matrix
    symmetric: bool

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def __matmul__(self, other):
        return self.matrix @ other

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def dump(self, path: str | Path) -> None:
        """Write ``row col value`` lines, sorted row-major (debugging aid)."""
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        with open(path, "w") as fh:
            for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
                fh.write(f"{r} {c} {v:.17g}\n")


@dataclass(frozen=True)
class DiracLoad:
    """Point source at x1 = 0 stored as a nodal density.

    ``density`` is zero except at the origin node where it equals
    ``strength / w0``; ``weighted`` is the right-hand side vector of the
    weighted system (``strength`` at the origin node).
    """

    density: np.ndarray
    weights: np.ndarray
    strength: float
    origin: int

    @property
    def weighted(self) -> np.ndarray:
        out = np.zeros_like(self.density)
        out[self.origin] = self.strength
        return out

    def pair(self, v) -> float:
        return float(np.dot(self.weighted, v))


def stiffness_1d(n: int, dx: float) -> sp.csr_matrix:
    """Weighted Neumann stiffness matrix ``(1/dx) * tridiag(-1, 2, -1)`` with
    half diagonal at the two ends."""
    main = np.full(n, 2.0 / dx)
    main[0] = main[-1] = 1.0 / dx
    off = np.full(n - 1, -1.0 / dx)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def bulk_parts(grid: Grid2D) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """The x1- and x2-difference parts of the weighted bulk Laplacian.

    The anisotropic operator is ``D1 + h**-2 * D2``.
    """
    K1 = stiffness_1d(grid.n1, grid.dx1)
    K2 = stiffness_1d(grid.n2, grid.dx2)
    D1 = sp.kron(K1, sp.diags(grid.w2), format="csr")
    D2 = sp.kron(sp.diags(grid.w1), K2, format="csr")
    return D1, D2


def assemble_bulk(grid: Grid2D, h: float, zeroth_order) -> SparseOperator:
    """Weighted discretisation of ``div(J_h(u)) + a*u`` with no-flux boundaries.

    ``zeroth_order`` is a scalar or an ``(n1, n2)`` field. Robin terms on the
    bottom edge are added by the caller.
    """
    if not h > 0:
        raise ValueError(f"h must be positive, got {h}")
    a = np.broadcast_to(np.asarray(zeroth_order, dtype=float), (grid.n1, grid.n2))
    if np.any(a < 0):
        raise ValueError("zeroth-order coefficient must be nonnegative")
    D1, D2 = bulk_parts(grid)
    M = sp.diags((grid.weights * a).ravel())
    A = (D1 + h**-2 * D2 + M).tocsr()
    A.sort_indices()
    return SparseOperator(A, symmetric=True)


def assemble_surface(grid: Grid1D, d: float, zeroth_order) -> SparseOperator:
    """Weighted discretisation of ``-d u'' + a*u`` with Neumann ends."""
    if not d > 0:
        raise ValueError(f"diffusivity must be positive, got {d}")
    a = np.broadcast_to(np.asarray(zeroth_order, dtype=float), (grid.n1,))
    A = (d * stiffness_1d(grid.n1, grid.dx) + sp.diags(grid.weights * a)).tocsr()
    A.sort_indices()
    return SparseOperator(A, symmetric=True)


def assemble_dirac(grid: Grid1D, p1: float) -> DiracLoad:
    if p1 < 0:
        raise ValueError(f"source strength must be nonnegative, got {p1}")
    x = grid.x
    i0 = grid.origin
    if x[i0] != 0.0:
        raise ValueError("grid has no node at x1 = 0")
    w = grid.weights
    density = np.zeros(grid.n1)
    density[i0] = p1 / w[i0]
    return DiracLoad(density=density, weights=w, strength=float(p1), origin=i0)
