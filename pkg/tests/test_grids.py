"""Slope oracle: discrete slopes, limiting slopes, witness search, KL fits."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modelcert.grids import (
    GridFunction,
    PointSet,
    dist_to_set,
    estimate_kl_parameters,
    find_certificate_witness,
    find_witness,
    witness_slack,
)

H = 1e-3


@pytest.fixture(scope="module")
def abs_grid():
    return GridFunction.sample_vectorized(lambda X: np.abs(X[:, 0]), [(-1.0, 1.0)], H)


@pytest.fixture(scope="module")
def square_grid():
    return GridFunction.sample_vectorized(lambda X: X[:, 0] ** 2, [(-1.0, 1.0)], H)


@pytest.fixture(scope="module")
def folded_grid():
    # |t^2/2 + t|: smooth with derivative t + 1 on (0, inf), sharp minimum at 0
    return GridFunction.sample_vectorized(
        lambda X: np.abs(0.5 * X[:, 0] ** 2 + X[:, 0]), [(-3.0, 3.0)], H
    )


class TestSlope:
    def test_zero_at_minimizer(self, abs_grid):
        assert abs_grid.slope_at(abs_grid.nearest_node(0.0), radius=8 * H) == 0.0

    def test_smooth_point_of_abs(self, abs_grid):
        s = abs_grid.slope_at(abs_grid.nearest_node(0.5), radius=2 * H)
        assert s == pytest.approx(1.0, abs=5 * H)

    def test_folded_parabola_matches_derivative(self, folded_grid):
        s = folded_grid.slope_at(folded_grid.nearest_node(0.1), radius=H)
        assert s == pytest.approx(1.1, abs=5 * H)

    def test_schedule_reports_shrinking_radii(self, folded_grid):
        vals = folded_grid.slope_schedule(folded_grid.nearest_node(0.1))
        assert len(vals) == 4
        assert vals[-1] == folded_grid.slope_at(folded_grid.nearest_node(0.1), radius=H)

    def test_radius_below_spacing_rejected(self, abs_grid):
        with pytest.raises(ValueError):
            abs_grid.slope_at(abs_grid.nearest_node(0.0), radius=0.1 * H)

    def test_c1_convergence_ladder(self):
        # slope -> |f'| at O(spacing) rate for a C^1 function
        fn = lambda X: np.sin(3.0 * X[:, 0]) + X[:, 0] ** 2
        deriv = lambda t: 3.0 * math.cos(3.0 * t) + 2.0 * t
        curv = 11.0  # sup |f''| on the box
        for h in (4e-3, 2e-3, 1e-3):
            grid = GridFunction.sample_vectorized(fn, [(-1.0, 1.0)], h)
            for t in (0.3, -0.52, 0.744):
                node = grid.nearest_node(t)
                err = abs(grid.slope_at(node, radius=h) - abs(deriv(grid.node_point(node)[0])))
                assert err <= curv * h

    @given(st.lists(st.floats(-100, 100), min_size=5, max_size=40))
    @settings(max_examples=60, deadline=None)
    def test_global_minimum_node_has_zero_slope(self, values):
        grid = GridFunction([(0.0, (len(values) - 1) * 0.1)], 0.1, values)
        idx = (int(np.argmin(grid.values)),)
        assert grid.slope_at(idx, radius=0.1) == 0.0
        assert grid.slope_at(idx, radius=0.35) == 0.0

    def test_slope_field_matches_pointwise(self, folded_grid):
        field = folded_grid.slope_field()
        for t in (-2.5, -1.0, -0.25, 0.0, 0.3, 1.7):
            idx = folded_grid.nearest_node(t)
            assert field[idx] == pytest.approx(folded_grid.slope_at(idx, radius=H), abs=0)

    def test_2d_slope(self):
        grid = GridFunction.sample_vectorized(
            lambda X: np.abs(X[:, 0]) + np.abs(X[:, 1]), [(-0.5, 0.5), (-0.5, 0.5)], 2e-3
        )
        assert grid.slope_at(grid.nearest_node([0.0, 0.0]), radius=4e-3) == 0.0
        # steepest single-axis decrease at a generic point has rate 1
        s = grid.slope_at(grid.nearest_node([0.25, -0.3]), radius=2e-3)
        assert s == pytest.approx(1.0, abs=1e-9)


class TestLimitingSlope:
    def test_sharp_minimum_is_stationary(self, folded_grid):
        assert folded_grid.limiting_slope_at(folded_grid.nearest_node(0.0)) == 0.0

    def test_smooth_minimizer(self, square_grid):
        assert square_grid.limiting_slope_at(square_grid.nearest_node(0.0)) == 0.0

    def test_locally_constant_slope(self, abs_grid):
        lim = abs_grid.limiting_slope_at(abs_grid.nearest_node(0.5))
        assert lim == pytest.approx(1.0, abs=5 * H)


class TestDistToSet:
    def test_scalar(self):
        assert dist_to_set([0.3], PointSet([[0.0]])) == pytest.approx(0.3)

    def test_two_points(self):
        s = PointSet([[0.0, 0.0], [2.0, 2.0]])
        assert dist_to_set([1.0, 1.0], s) == pytest.approx(math.sqrt(2.0))

    def test_member(self):
        assert dist_to_set([0.0], PointSet([[0.0]])) == 0.0

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            dist_to_set([0.0], PointSet(np.zeros((0, 1))))

    def test_membership_tolerance(self):
        s = PointSet([[1.0]], tolerance=0.05)
        assert s.contains([1.04])
        assert not s.contains([1.2])


class TestWitnessSearch:
    def test_footnote_step_has_witness(self, folded_grid):
        w = find_certificate_witness(folded_grid, [1.0], [0.25], eta=1.0)
        assert w is not None
        # nodes near the sharp minimum qualify
        d = abs(0.25 - 1.0)
        assert w.dist_to_center <= d + witness_slack(1.0, H)
        assert w.value <= folded_grid.value_at(folded_grid.nearest_node(0.25)) + 0.5 * d * d + witness_slack(1.0, H)
        assert w.slope <= 5.0 * d + witness_slack(1.0, H)

    def test_zero_step_at_stationary_point(self, folded_grid):
        w = find_certificate_witness(folded_grid, [0.0], [0.0], eta=1.0)
        assert w is not None
        assert np.allclose(w.point, [0.0])

    def test_zero_step_at_nonstationary_point(self, folded_grid):
        assert find_certificate_witness(folded_grid, [0.5], [0.5], eta=1.0) is None

    def test_exact_model_step_finds_the_minimizer(self, square_grid):
        w = find_certificate_witness(square_grid, [1.0], [0.0], eta=1.0)
        assert w is not None
        assert np.allclose(w.point, [0.0])

    def test_center_outside_box_rejected(self, square_grid):
        with pytest.raises(ValueError):
            find_certificate_witness(square_grid, [0.5], [3.0], eta=1.0)

    def test_generalized_bounds(self, folded_grid):
        # a tight slope cap excludes everything away from the two minima
        w = find_witness(folded_grid, [1.5], reference_value=10.0, point_radius=0.2,
                         value_gap=0.0, slope_bound=0.01, slack=5e-3)
        assert w is None
        w = find_witness(folded_grid, [0.1], reference_value=10.0, point_radius=0.2,
                         value_gap=0.0, slope_bound=0.01, slack=5e-3)
        assert w is not None and abs(w.point[0]) <= 2 * H


class TestKLEstimation:
    def test_parabola(self, square_grid):
        fit = estimate_kl_parameters(square_grid, 0.0)
        assert fit.theta == pytest.approx(0.5, abs=1e-12)
        assert fit.alpha == pytest.approx(0.5, rel=0.05)
        assert fit.residual <= 1e-12

    def test_sharp_vee_picks_smallest_candidate(self, abs_grid):
        thetas = tuple(np.round(np.arange(0.1, 0.96, 0.05), 2))
        fit = estimate_kl_parameters(abs_grid, 0.0, theta_grid=thetas)
        assert fit.theta == thetas[0]
        # slope is constantly 1 off the kink: alpha is the envelope max (f)^theta
        assert fit.alpha == pytest.approx(1.0, rel=1e-6)

    def test_quartic(self):
        grid = GridFunction.sample_vectorized(lambda X: X[:, 0] ** 4, [(-1.0, 1.0)], H)
        fit = estimate_kl_parameters(grid, 0.0)
        assert fit.theta == pytest.approx(0.75, abs=1e-12)
        assert fit.alpha == pytest.approx(0.25, rel=0.05)

    def test_fitted_inequality_holds(self, square_grid):
        fit = estimate_kl_parameters(square_grid, 0.0)
        slopes = square_grid.slope_field()
        gap = square_grid.values - 0.0
        mask = (gap >= 10 * H) & (slopes >= H)
        assert np.all(np.power(gap[mask], fit.theta) <= fit.alpha * slopes[mask] * (1 + 1e-12))

    def test_flat_function_has_no_kl(self):
        grid = GridFunction([(-1.0, 1.0)], H, np.ones(2001))
        with pytest.raises(ValueError, match="zero slope"):
            estimate_kl_parameters(grid, 0.0)

    def test_region_below_f_star_rejected(self, square_grid):
        with pytest.raises(ValueError):
            estimate_kl_parameters(square_grid, 2.0)


class TestGridFunctionValidation:
    def test_json_round_trip(self, abs_grid, tmp_path):
        path = tmp_path / "g.json"
        abs_grid.save(path)
        loaded = GridFunction.load(path)
        assert loaded.dimension == 1
        assert loaded.shape == abs_grid.shape
        assert np.array_equal(loaded.values, abs_grid.values)
        doc = json.loads(path.read_text())
        assert set(doc) == {"dimension", "box", "spacing", "values_row_major"}

    def test_value_count_mismatch(self):
        with pytest.raises(ValueError, match="size"):
            GridFunction([(0.0, 1.0)], 0.5, [1.0, 2.0])

    def test_nonfinite_values(self):
        with pytest.raises(ValueError, match="finite"):
            GridFunction([(0.0, 1.0)], 0.5, [1.0, np.nan, 2.0])

    def test_bad_spacing(self):
        with pytest.raises(ValueError):
            GridFunction([(0.0, 1.0)], -0.5, [1.0, 2.0, 3.0])

    def test_flat_box(self):
        with pytest.raises(ValueError, match="volume"):
            GridFunction([(1.0, 1.0)], 0.5, [1.0])

    def test_three_dimensions_rejected(self):
        with pytest.raises(ValueError, match="1-d and 2-d"):
            GridFunction([(0, 1), (0, 1), (0, 1)], 0.5, np.zeros(27))

    def test_off_node_query_rejected(self, abs_grid):
        with pytest.raises(ValueError, match="not a grid node"):
            abs_grid.slope_at(np.array([0.50037]), radius=H)

    def test_values_immutable(self, abs_grid):
        with pytest.raises(ValueError):
            abs_grid.values[0] = 5.0
