import numpy as np
import pytest

from morphogen import build_grid1d, build_grid2d, reference_params, solve_stationary_1d, solve_stationary_2d
from morphogen.model import ModelParams, derive_constants, recover_complexes
from morphogen.picard import SpeciesFields, StationarySolution


def make_solution(u1, u2, params, grid2=None, grid1=None):
    """Wrap raw fields in a StationarySolution (complexes recovered from them)."""
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    grid1 = grid1 or (grid2.bottom() if grid2 is not None else build_grid1d(len(u2)))
    trace = u1[:, 0] if grid2 is not None else u1
    u3, u4, u5 = recover_complexes(trace, u2, derive_constants(params), params)
    return StationarySolution(
        species=SpeciesFields(u1, u2, u3, u4, u5),
        params=params,
        grid1=grid1,
        grid2=grid2,
        iterations=0,
        update_norm=0.0,
        residual=0.0,
    )


@pytest.fixture(scope="session")
def grid201():
    return build_grid2d(201, 21)


@pytest.fixture(scope="session")
def ref_h10(grid201):
    return solve_stationary_2d(reference_params(0.1), grid201)


@pytest.fixture(scope="session")
def ref_1d():
    return solve_stationary_1d(reference_params(), build_grid1d(801))


@pytest.fixture
def params_ref():
    return reference_params()


@pytest.fixture
def small_params():
    return ModelParams(b=(5, 3, 2, 4, 6), c=(1, 2, 0.5, 1, 2), p=(10, 0, 8, 0, 0), d=0.5, h=0.5)


ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def acceptance():
    """Record one pass/fail line per acceptance criterion."""

    def record(number: int, ok: bool, detail: str) -> bool:
        ACCEPTANCE_RESULTS[number] = (bool(ok), detail)
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
