import itertools
import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from cfglmm import bbox_diagonal, center_count, kernel_weight, place_centers
from cfglmm.geometry import pairwise_distances

UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])


class TestBboxDiagonal:
    def test_unit_square(self):
        assert bbox_diagonal([[0.0, 0.0], [1.0, 1.0]]) == pytest.approx(math.sqrt(2))

    def test_single_site(self):
        assert bbox_diagonal([[3.0, 4.0]]) == 0.0

    def test_3_4_5(self):
        assert bbox_diagonal([[0.0, 0.0], [3.0, 4.0]]) == pytest.approx(5.0)

    def test_empty_errors(self):
        with pytest.raises(Exception):
            bbox_diagonal(np.empty((0, 2)))


class TestCenterCount:
    def test_equal_diag_and_bandwidth(self):
        assert center_count(math.sqrt(2), math.sqrt(2), 1.5) == 2

    def test_fine_bandwidth(self):
        assert center_count(math.sqrt(2), 0.1, 1.5) == 300

    def test_degenerate_diag_floors_at_one(self):
        assert center_count(0.0, 1.0, 1.5) == 1

    def test_nonpositive_bandwidth_errors(self):
        with pytest.raises(ValueError):
            center_count(1.0, 0.0, 1.5)

    @given(
        diag=st.floats(min_value=0.1, max_value=100),
        h=st.floats(min_value=1e-3, max_value=100),
        decay=st.floats(min_value=0.1, max_value=0.99),
    )
    def test_counts_grow_as_scales_refine(self, diag, h, decay):
        assert center_count(diag, decay * h, 1.5) >= center_count(diag, h, 1.5)


class TestKernelWeight:
    def test_zero_distance(self):
        assert kernel_weight(0.0, 2.0) == 1.0

    def test_distance_equals_bandwidth(self):
        assert kernel_weight(1.7, 1.7) == pytest.approx(math.exp(-1))

    def test_far_distance(self):
        assert kernel_weight(10.0, 1.0) == pytest.approx(math.exp(-10), rel=1e-12)

    @given(
        d=st.floats(min_value=1e-6, max_value=50),
        h=st.floats(min_value=1e-3, max_value=50),
        bump=st.floats(min_value=1e-3, max_value=10),
    )
    def test_monotonicity(self, d, h, bump):
        # keep exp(-d/h) away from float underflow, where strictness is lost
        assume((d + bump) / h < 500)
        assert kernel_weight(d + bump, h) < kernel_weight(d, h)
        assert kernel_weight(d, h + bump) > kernel_weight(d, h)


def _brute_force_two_clusters(points):
    """Best 2-partition by within-cluster SSE, by exhaustive enumeration."""
    n = len(points)
    best = (np.inf, None)
    for size in range(1, n):
        for subset in itertools.combinations(range(n), size):
            mask = np.zeros(n, dtype=bool)
            mask[list(subset)] = True
            sse = 0.0
            for side in (mask, ~mask):
                c = points[side].mean(axis=0)
                sse += ((points[side] - c) ** 2).sum()
            if sse < best[0]:
                best = (sse, mask)
    mask = best[1]
    return sorted([tuple(points[mask].mean(axis=0)), tuple(points[~mask].mean(axis=0))])


class TestPlaceCenters:
    def test_single_center_is_centroid(self):
        cs = place_centers(UNIT_SQUARE, 1, bandwidth=1.0, seed=0)
        np.testing.assert_allclose(cs.centers, [[0.5, 0.5]])

    def test_two_well_separated_clouds(self, rng):
        clouds = np.vstack(
            [
                rng.normal([0.0, 0.0], 0.05, size=(4, 2)),
                rng.normal([10.0, 10.0], 0.05, size=(4, 2)),
            ]
        )
        expected = _brute_force_two_clusters(clouds)
        cs = place_centers(clouds, 2, bandwidth=1.0, seed=5)
        got = sorted(tuple(c) for c in cs.centers)
        np.testing.assert_allclose(got, expected, atol=1e-9)

    def test_centers_equal_sites_when_c_matches(self):
        cs = place_centers(UNIT_SQUARE, 4, bandwidth=1.0, seed=1)
        got = sorted(tuple(c) for c in cs.centers)
        want = sorted(tuple(s) for s in UNIT_SQUARE)
        np.testing.assert_allclose(got, want)

    def test_c_beyond_distinct_sites(self):
        doubled = np.vstack([UNIT_SQUARE, UNIT_SQUARE])
        cs = place_centers(doubled, 7, bandwidth=1.0, seed=1)
        assert len(cs) == 4

    def test_deterministic(self, rng):
        pts = rng.random((40, 2))
        a = place_centers(pts, 6, bandwidth=0.5, seed=9)
        b = place_centers(pts, 6, bandwidth=0.5, seed=9)
        np.testing.assert_array_equal(a.centers, b.centers)

    def test_permutation_invariance(self, rng):
        pts = rng.random((30, 2))
        shuffled = pts[rng.permutation(30)]
        a = place_centers(pts, 5, bandwidth=0.5, seed=4)
        b = place_centers(shuffled, 5, bandwidth=0.5, seed=4)
        np.testing.assert_allclose(
            sorted(tuple(c) for c in a.centers), sorted(tuple(c) for c in b.centers)
        )

    def test_centers_inside_bounding_box(self, rng):
        pts = rng.random((60, 2)) * [3.0, 2.0]
        cs = place_centers(pts, 10, bandwidth=0.5, seed=2)
        assert (cs.centers >= pts.min(axis=0) - 1e-12).all()
        assert (cs.centers <= pts.max(axis=0) + 1e-12).all()


class TestPairwiseDistances:
    def test_exact_zero_for_coincident_points(self):
        pts = np.array([[0.3713, 0.9182]])
        assert pairwise_distances(pts, pts)[0, 0] == 0.0

    def test_matches_hypot(self, rng):
        a = rng.random((7, 2))
        b = rng.random((5, 2))
        want = np.hypot(a[:, None, 0] - b[None, :, 0], a[:, None, 1] - b[None, :, 1])
        np.testing.assert_allclose(pairwise_distances(a, b), want, rtol=1e-14)
