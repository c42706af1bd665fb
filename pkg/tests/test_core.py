import numpy as np
import pytest
from hypothesis import given, strategies as st

from zifqr.core import (
    EmptySubject,
    InvalidArgumentError,
    NegativeValue,
    ReplicatedFunctionalDataset,
    RunConfig,
    ScalarCovariates,
    Segmentation,
    TimeGrid,
    build_grid,
    substream,
    validate_dataset,
)


class TestBuildGrid:
    def test_two_points_are_endpoints(self):
        assert build_grid(2).points.tolist() == [0.0, 1.0]

    def test_equispaced_100(self):
        g = build_grid(100)
        assert g.L == 100
        assert np.allclose(g.spacing, 1.0 / 99.0)

    def test_three_points(self):
        assert build_grid(3).points.tolist() == [0.0, 0.5, 1.0]

    def test_too_small(self):
        with pytest.raises(InvalidArgumentError):
            build_grid(1)

    def test_trapezoid_weights_integrate_constants(self):
        g = build_grid(37)
        assert np.isclose(g.trapezoid_weights().sum(), 1.0)


class TestTimeGrid:
    def test_rejects_decreasing(self):
        with pytest.raises(InvalidArgumentError):
            TimeGrid(np.array([0.0, 0.5, 0.4, 1.0]))

    def test_rejects_out_of_range(self):
        with pytest.raises(InvalidArgumentError):
            TimeGrid(np.array([-0.1, 0.5, 1.0]))

    def test_points_read_only(self):
        g = build_grid(5)
        with pytest.raises(ValueError):
            g.points[0] = 3.0


def _toy_dataset(values, observed=None):
    values = np.asarray(values, float)
    return ReplicatedFunctionalDataset(build_grid(values.shape[2]), values, observed)


class TestValidateDataset:
    def test_valid_is_empty(self):
        d = _toy_dataset(np.ones((2, 2, 3)))
        assert validate_dataset(d) == []

    def test_negative_value_reported(self):
        v = np.ones((2, 2, 3))
        v[1, 0, 2] = -4.0
        out = validate_dataset(_toy_dataset(v))
        assert out == [NegativeValue(1, 0, 2, -4.0)]

    def test_empty_subject_reported(self):
        obs = np.ones((2, 2, 3), bool)
        obs[1] = False
        out = validate_dataset(_toy_dataset(np.ones((2, 2, 3)), obs))
        assert out == [EmptySubject(1)]

    def test_negative_only_counts_when_observed(self):
        v = np.ones((1, 1, 3))
        v[0, 0, 1] = -9.0
        obs = np.ones((1, 1, 3), bool)
        obs[0, 0, 1] = False
        assert validate_dataset(_toy_dataset(v, obs)) == []


class TestSegmentation:
    def test_zero_goes_to_first_segment(self):
        seg = Segmentation.equal(4)
        assert seg.segment_of(0.0) == 0

    def test_half_open_right_closed(self):
        seg = Segmentation.equal(4)
        assert seg.segment_of(0.25) == 0
        assert seg.segment_of(0.2500001) == 1
        assert seg.segment_of(1.0) == 3

    @given(st.integers(min_value=1, max_value=9),
           st.floats(min_value=0.0, max_value=1.0))
    def test_partition_property(self, M, t):
        seg = Segmentation.equal(M)
        m = int(seg.segment_of(t))
        lo, hi = seg.boundaries[m], seg.boundaries[m + 1]
        if t == 0.0:
            assert m == 0
        else:
            assert lo < t <= hi

    def test_requires_unit_cover(self):
        with pytest.raises(InvalidArgumentError):
            Segmentation(np.array([0.0, 0.5, 0.9]))

    def test_validate_against_grid(self):
        # (0.3, 0.31] contains no point of the 5-point grid.
        seg = Segmentation(np.array([0.0, 0.3, 0.31, 1.0]))
        with pytest.raises(InvalidArgumentError):
            seg.validate_against(build_grid(5))


class TestScalarCovariates:
    def test_requires_intercept(self):
        with pytest.raises(InvalidArgumentError):
            ScalarCovariates(np.array([[2.0, 1.0]]), ("intercept", "z"))

    def test_rejects_nonfinite(self):
        with pytest.raises(InvalidArgumentError):
            ScalarCovariates(np.array([[1.0, np.nan]]), ("intercept", "z"))


class TestRunConfig:
    def test_defaults_valid(self):
        cfg = RunConfig()
        assert cfg.convergence_tol == 1e-3 and cfg.max_iter == 50
        assert cfg.pi_cap == 0.99

    @pytest.mark.parametrize("kwargs", [
        {"convergence_tol": 0.0},
        {"max_iter": 0},
        {"pi_cap": 1.0},
        {"tau_levels": (0.5, 0.25)},
        {"tau_levels": (0.0, 0.5)},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidArgumentError):
            RunConfig(**kwargs)


class TestSubstream:
    def test_identical_path_identical_stream(self):
        a = substream(7, 3, 1).random(5)
        b = substream(7, 3, 1).random(5)
        assert np.array_equal(a, b)

    def test_paths_differ(self):
        a = substream(7, 3, 1).random(5)
        b = substream(7, 3, 2).random(5)
        assert not np.array_equal(a, b)
