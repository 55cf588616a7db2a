"""Model parameters, derived constants and the receptor closure H.

Species indexing follows the nondimensional system: u1 free morphogen (bulk),
u2 morphogen-glypican complex, u3 free receptor, u4 morphogen-receptor
complex, u5 morphogen-glypican-receptor complex (all on the bottom edge).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import numpy as np

__all__ = [
    "ModelParams",
    "DerivedConstants",
    "derive_constants",
    "eval_H",
    "recover_complexes",
    "reference_params",
]


def _vec5(name: str, values: Any) -> tuple[float, ...]:
    try:
        out = tuple(float(v) for v in values)
    except TypeError as exc:
        raise ValueError(f"{name} must be a sequence of 5 numbers") from exc
    if len(out) != 5:
        raise ValueError(f"{name} must have exactly 5 entries, got {len(out)}")
    if not all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite entries")
    return out


@dataclass(frozen=True)
class ModelParams:
    """Nondimensional rates of the stationary bulk/surface system.

    ``b`` are degradation/internalisation rates (all > 0), ``c`` reaction
    rates (>= 0), ``p`` production rates of which only ``p[0]`` (morphogen
    source) and ``p[2]`` (receptor production) may be nonzero. ``d`` is the
    surface diffusivity and ``h`` the thickness parameter in (0, 1].
    """

    b: tuple[float, ...]
    c: tuple[float, ...]
    p: tuple[float, ...]
    d: float
    h: float = 1.0

    def __post_init__(self) -> None:
        b, c, p = _vec5("b", self.b), _vec5("c", self.c), _vec5("p", self.p)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "d", float(self.d))
        object.__setattr__(self, "h", float(self.h))
        if not self.d > 0:
            raise ValueError(f"d must be > 0, got {self.d}")
        if not all(x > 0 for x in b):
            raise ValueError(f"every b_i must be > 0, got {b}")
        if not all(x >= 0 for x in c):
            raise ValueError(f"every c_i must be >= 0, got {c}")
        if not all(x >= 0 for x in p):
            raise ValueError(f"every p_i must be >= 0, got {p}")
        if p[1] != 0 or p[3] != 0 or p[4] != 0:
            raise ValueError("p2, p4 and p5 are unused and must be 0")
        if not 0 < self.h <= 1:
            raise ValueError(f"h must lie in (0, 1], got {self.h}")

    @property
    def p1(self) -> float:
        return self.p[0]

    @property
    def p3(self) -> float:
        return self.p[2]

    def with_h(self, h: float) -> "ModelParams":
        return replace(self, h=h)

    def to_dict(self) -> dict[str, Any]:
        return {"b": list(self.b), "c": list(self.c), "p": list(self.p), "d": self.d, "h": self.h}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ModelParams":
        missing = [k for k in ("b", "c", "p", "d") if k not in data]
        if missing:
            raise ValueError(f"missing parameter keys: {', '.join(missing)}")
        return cls(b=data["b"], c=data["c"], p=data["p"], d=data["d"], h=data.get("h", 1.0))

    @classmethod
    def from_json(cls, source: str | Path) -> "ModelParams":
        """Parse from a JSON string or a path to a JSON file."""
        text = Path(source).read_text() if isinstance(source, Path) else source
        return cls.from_dict(json.loads(text))


def reference_params(h: float = 1.0) -> ModelParams:
    """Reference parameter set used for the homogenisation study."""
    return ModelParams(
        b=(100, 10, 10, 10, 10),
        c=(10, 10, 1, 10, 10),
        p=(100, 0, 100, 0, 0),
        d=0.1,
        h=h,
    )


@dataclass(frozen=True)
class DerivedConstants:
    k1: float
    k2: float
    b3: float
    p3: float

    @property
    def h_max(self) -> float:
        """Upper bound of H on the nonnegative quadrant."""
        return self.p3 / self.b3

    @property
    def lipschitz(self) -> float:
        return self.p3 * max(self.k1, self.k2) / self.b3**2


def derive_constants(params: ModelParams) -> DerivedConstants:
    b, c = params.b, params.c
    if b[3] + c[3] <= 0 or b[4] + c[4] <= 0:
        raise ValueError("b4 + c4 and b5 + c5 must be positive")
    k1 = b[3] / (b[3] + c[3])
    k2 = c[2] * b[4] / (b[4] + c[4])
    return DerivedConstants(k1=k1, k2=k2, b3=b[2], p3=params.p3)


def eval_H(u1, u2, dc: DerivedConstants):
    """Free receptor level p3 / (k1*u1 + k2*u2 + b3).

    Negative inputs (round-off from the linear solves) are clamped to zero
    here only; the stored fields are never modified.
    """
    u1 = np.maximum(u1, 0.0)
    u2 = np.maximum(u2, 0.0)
    return dc.p3 / (dc.k1 * u1 + dc.k2 * u2 + dc.b3)


def recover_complexes(u1_trace, u2, dc: DerivedConstants, params: ModelParams):
    """Return ``(u3, u4, u5)`` from the bulk trace and the surface field."""
    u1_trace = np.asarray(u1_trace, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    if u1_trace.shape != u2.shape:
        raise ValueError(f"grid mismatch: trace {u1_trace.shape} vs u2 {u2.shape}")
    H = eval_H(u1_trace, u2, dc)
    u3 = H
    u4 = dc.k1 / params.b[3] * u1_trace * H
    u5 = dc.k2 / params.b[4] * u2 * H
    return u3, u4, u5


def ode_residuals(u1_trace, u2, u3, u4, u5, params: ModelParams):
    """Stationary residuals of the three receptor ODEs, pointwise."""
    b, c = params.b, params.c
    r3 = -(b[2] + u1_trace + c[2] * u2) * u3 + c[3] * u4 + c[4] * u5 + params.p3
    r4 = u1_trace * u3 - (b[3] + c[3]) * u4
    r5 = c[2] * u2 * u3 - (b[4] + c[4]) * u5
    return r3, r4, r5
