import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_solution
from morphogen import build_grid2d, reference_params, solve_stationary_1d, solve_stationary_2d
from morphogen.analysis import (
    SweepError,
    compute_norms,
    distance_to_1d,
    extrude,
    homogeneity_index,
    lp_norm,
    run_sweep,
)
from morphogen.model import ModelParams
from morphogen.picard import PicardOptions

P = 1.5


def test_norm_of_constant(grid201, params_ref):
    u1 = np.full((201, 21), 3.0)
    sol = make_solution(u1, np.full(201, 2.0), params_ref.with_h(0.5), grid201)
    r = compute_norms(sol, p=P, q=4)
    assert r.u1_lp == pytest.approx(3.0 * 2 ** (1 / P), rel=1e-14)
    assert max(r.dx1_u1_lp, r.dx2_u1_lp, r.scaled_dx2_lp) <= 1e-13
    assert r.u2_lq == pytest.approx(2.0 * 2 ** (1 / 4), rel=1e-14)
    assert max(r.du2_lq, r.d2u2_lq) <= 1e-13


def test_scaled_vertical_derivative(grid201):
    _, X2 = grid201.mesh()
    sol = make_solution(X2, np.zeros(201), reference_params(0.1), grid201)
    r = compute_norms(sol, p=P)
    assert r.scaled_dx2_lp == pytest.approx(10 * 2 ** (1 / P), rel=1e-12)
    assert r.mh_lp == pytest.approx(10 * 2 ** (1 / P), rel=1e-12)


@pytest.mark.parametrize("p,q", [(2.0, 4.0), (0.5, 4.0), (1.5, np.inf), (1.5, 0.5)])
def test_norm_exponent_validation(ref_h10, p, q):
    with pytest.raises(ValueError):
        compute_norms(ref_h10, p=p, q=q)


def test_norms_regression(ref_h10):
    r = compute_norms(ref_h10, p=1.5, q=4)
    expected = {
        "u1_lp": 1.1893251294709188,
        "dx1_u1_lp": 13.355651661354218,
        "dx2_u1_lp": 1.1269700826945896,
        "mh_lp": 18.682224731855296,
        "scaled_dx2_lp": 11.269700826945895,
        "u2_lq": 1.0231996081413957,
        "du2_lq": 6.794521354286125,
        "d2u2_lq": 302.59827965063687,
        "u1_w1p": 15.671946873519726,
        "u2_w2q": 310.4160006130644,
        "composite": 337.35764831353004,
    }
    got = r.to_dict()
    for key, val in expected.items():
        assert got[key] == pytest.approx(val, rel=1e-8), key


def test_homogeneity_regression(grid201):
    assert homogeneity_index(solve_stationary_2d(reference_params(1.0), grid201)) == pytest.approx(
        18.98693570765959, rel=1e-8
    )
    assert homogeneity_index(solve_stationary_2d(reference_params(1 / 50), grid201)) == pytest.approx(
        0.28377695884304827, rel=1e-8
    )


def test_homogeneity_exact_cases(grid201):
    X1, X2 = grid201.mesh()
    assert homogeneity_index(np.cos(X1) + 2, grid201) == 0.0
    assert homogeneity_index(1 + X2, grid201) == pytest.approx(2 / 3, rel=1e-12)
    with pytest.raises(ValueError):
        homogeneity_index(np.zeros((201, 21)), grid201)


@settings(max_examples=30, deadline=None)
@given(st.floats(min_value=1e-6, max_value=1e6))
def test_homogeneity_scale_invariant(scale):
    g = build_grid2d(21, 5)
    X1, X2 = g.mesh()
    u = np.exp(-X1**2) * (1 + X2**2)
    assert homogeneity_index(scale * u, g) == pytest.approx(homogeneity_index(u, g), rel=1e-12)


def test_extruded_solution_has_zero_distance(ref_1d):
    g = build_grid2d(801, 5)
    ext = extrude(ref_1d, g)
    assert distance_to_1d(ext, ref_1d) <= 1e-14
    assert homogeneity_index(ext) <= 1e-14


def test_distance_zero_without_source():
    p = ModelParams(b=(100, 10, 10, 10, 10), c=(10, 10, 1, 10, 10), p=(0, 0, 100, 0, 0), d=0.1, h=0.1)
    g = build_grid2d(101, 11)
    assert distance_to_1d(solve_stationary_2d(p, g), solve_stationary_1d(p, g.bottom())) == 0.0


def test_distance_triangle_and_holder(grid201, ref_h10):
    g1 = grid201.bottom()
    ref = solve_stationary_1d(reference_params(), g1)
    other = solve_stationary_2d(reference_params(0.5), grid201)
    other_1d = make_solution(other.u1 @ grid201.w2, other.u2, reference_params(), grid1=g1)
    d_ab = distance_to_1d(ref_h10, ref)
    d_ac = distance_to_1d(ref_h10, other_1d)
    d_cb = distance_to_1d(extrude(other_1d, grid201), ref)
    assert d_ab <= d_ac + d_cb + 1e-12
    f = ref_h10.u1 @ grid201.w2 - ref.u1
    assert lp_norm(f, g1.weights, 1) <= np.sqrt(2) * lp_norm(f, g1.weights, 2) + 1e-12


def test_distance_grid_mismatch(ref_h10, ref_1d):
    with pytest.raises(ValueError):
        distance_to_1d(ref_h10, ref_1d)


@pytest.fixture(scope="module")
def small_sweep():
    return run_sweep(reference_params(), [1.0, 0.1], build_grid2d(101, 11))


def test_sweep_row_matches_standalone(small_sweep):
    g = build_grid2d(101, 11)
    sol = solve_stationary_2d(reference_params(0.1), g)
    row = small_sweep.rows[1]
    assert row.h == 0.1
    assert row.norms.composite == compute_norms(sol).composite
    assert row.homogeneity == homogeneity_index(sol)
    np.testing.assert_array_equal(small_sweep.solutions[0.1].u1, sol.u1)


def test_sweep_parallel_identical(small_sweep):
    par = run_sweep(reference_params(), [1.0, 0.1], build_grid2d(101, 11), workers=2)
    assert par.to_json() == small_sweep.to_json()
    assert par.to_csv() == small_sweep.to_csv()


def test_sweep_serialization(small_sweep):
    data = json.loads(small_sweep.to_json())
    assert [r["h"] for r in data["rows"]] == [1.0, 0.1]
    assert "header" in data and data["composite_ratio"] == small_sweep.composite_ratio
    lines = small_sweep.to_csv().splitlines()
    assert lines[0].startswith("h,homogeneity_index,distance_to_1d")
    assert len(lines) == 3
    assert float(lines[2].split(",")[0]) == 0.1


@pytest.mark.parametrize("h_list", [[], [0.1, 1.0], [1.0, 1.0], [1.0, 0.0], [2.0]])
def test_sweep_validation(h_list):
    with pytest.raises(ValueError):
        run_sweep(reference_params(), h_list, build_grid2d(21, 5))


def test_sweep_failure_carries_report():
    with pytest.raises(SweepError) as info:
        run_sweep(reference_params(), [1.0, 0.1], build_grid2d(101, 11), opts=PicardOptions(max_outer=7))
    report = info.value.report
    assert report.failures[0]["h"] == 1.0
    assert report.rows == []
    assert report.reference is not None
