import json

import numpy as np
import pytest

from ppdepth import (
    DiagonalGaussian,
    EmpiricalReference,
    FixedCount,
    PointPattern,
    Sample,
    UniformBox,
    batch_depth_queries,
    deepest_point,
    depth_1d,
    depth_2d_exact,
    depth_approx,
    depth_oracle,
    depth_sup_deviation,
    half_lines,
    halfspace_mass,
    reference_for,
    sup_deviation,
)
from ppdepth.depth import depth_rows_to_csv

DIAMOND = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])


def point_measure(points) -> EmpiricalReference:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return EmpiricalReference(Sample(tuple(PointPattern([p]) for p in pts)))


class TestHalfspaceMass:
    def test_empty_side_is_zero(self):
        m = point_measure([[0.1], [0.5], [0.9]])
        assert halfspace_mass(m, [0.0], [1.0]) == 0.0

    def test_three_point_line(self):
        m = point_measure([[0.1], [0.5], [0.9]])
        assert halfspace_mass(m, [0.5], [1.0]) == pytest.approx(2.0 / 3.0)

    def test_analytic_box(self):
        ref = reference_for(FixedCount(2), UniformBox([0, 0], [1, 1]))
        assert halfspace_mass(ref, [0.5, 0.5], [1.0, 0.0]) == pytest.approx(1.0)

    def test_rejects_non_unit_direction(self):
        m = point_measure([[0.0, 0.0]])
        with pytest.raises(ValueError, match="unit"):
            halfspace_mass(m, [0.0, 0.0], [1.0, 1.0])

    def test_boundary_points_count(self):
        m = point_measure([[0.5], [0.5]])
        assert halfspace_mass(m, [0.5], [1.0]) == 1.0
        assert halfspace_mass(m, [0.5], [-1.0]) == 1.0


class TestDepth1d:
    def test_middle_point(self):
        m = point_measure([[0.1], [0.5], [0.9]])
        res = depth_1d(m, 0.5)
        assert res.depth == pytest.approx(2.0 / 3.0)
        assert res.exact

    def test_below_all_mass(self):
        m = point_measure([[0.1], [0.5], [0.9]])
        assert depth_1d(m, 0.0).depth == 0.0

    def test_continuous_reference(self):
        ref = reference_for(FixedCount(1), UniformBox([0.0], [1.0]))
        assert depth_1d(ref, 0.25).depth == pytest.approx(0.25)
        assert depth_1d(ref, 0.5).depth == pytest.approx(0.5)

    def test_total_mass_scales_depth(self):
        ref = reference_for(FixedCount(3), UniformBox([0.0], [1.0]))
        assert depth_1d(ref, 0.25).depth == pytest.approx(0.75)


class TestDepth2dExact:
    def test_diamond_center(self):
        res = depth_2d_exact(point_measure(DIAMOND), [0.0, 0.0])
        assert res.depth == pytest.approx(0.5)
        assert res.exact

    def test_outside_convex_hull_is_zero(self):
        res = depth_2d_exact(point_measure(DIAMOND), [2.0, 2.0])
        assert res.depth == 0.0

    def test_far_points_have_zero_depth(self):
        rng = np.random.default_rng(1)
        pts = rng.normal(size=(25, 2))
        m = point_measure(pts)
        radius = float(np.linalg.norm(pts, axis=1).max())
        x = np.array([radius + 1.0, 0.0])
        assert depth_2d_exact(m, x).depth == 0.0

    def test_all_points_at_query(self):
        m = point_measure([[0.3, 0.3]] * 5)
        res = depth_2d_exact(m, [0.3, 0.3])
        assert res.depth == pytest.approx(1.0)  # total mass 5/5

    def test_matches_oracle_on_random_configs(self):
        rng = np.random.default_rng(2)
        for _ in range(40):
            pts = rng.integers(-3, 4, size=(12, 2)).astype(float)
            x = rng.integers(-3, 4, size=2).astype(float)
            m = EmpiricalReference(Sample((PointPattern(pts),)))
            got = depth_2d_exact(m, x).depth
            want = depth_oracle(pts, x, random_directions=20_000)
            assert got == want, f"pts={pts.tolist()}, x={x.tolist()}"

    def test_mass_rescale_scales_depth_linearly(self):
        pts = np.random.default_rng(3).normal(size=(10, 2))
        single = EmpiricalReference(Sample((PointPattern(pts),)))
        doubled = EmpiricalReference(
            Sample((PointPattern(np.vstack([pts, pts])),))
        )
        for x in ([0.0, 0.0], [0.2, -0.1]):
            assert depth_2d_exact(doubled, x).depth == pytest.approx(
                2.0 * depth_2d_exact(single, x).depth
            )


class TestDepthOracle:
    def test_single_point_full_mass(self):
        assert depth_oracle([[1.0, 2.0]], [1.0, 2.0], weights=[3.0]) == 3.0

    def test_diamond_value(self):
        got = depth_oracle(DIAMOND, [0.0, 0.0], weights=[0.25] * 4)
        assert got == pytest.approx(0.5)

    def test_weight_scaling(self):
        rng = np.random.default_rng(4)
        pts = rng.normal(size=(15, 2))
        w = rng.uniform(0.5, 2.0, size=15)
        base = depth_oracle(pts, [0.1, 0.1], weights=w)
        scaled = depth_oracle(pts, [0.1, 0.1], weights=5.0 * w)
        assert scaled == pytest.approx(5.0 * base)

    def test_size_limits(self):
        with pytest.raises(ValueError):
            depth_oracle(np.zeros((201, 2)), [0.0, 0.0])
        with pytest.raises(ValueError):
            depth_oracle(np.zeros((5, 4)), [0.0] * 4)


class TestDepthApprox:
    def test_two_directions_on_line_match_exact(self):
        m = point_measure([[0.1], [0.5], [0.9]])
        res = depth_approx(m, [0.5], 2)
        assert res.depth == depth_1d(m, 0.5).depth
        assert not res.exact

    def test_upper_bounds_exact_planar_depth(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            pts = rng.normal(size=(18, 2))
            m = point_measure(pts)
            x = rng.normal(size=2) * 0.5
            exact = depth_2d_exact(m, x).depth
            for k in (8, 64, 512):
                assert depth_approx(m, x, k).depth >= exact - 1e-12

    def test_nonincreasing_in_k_on_prefix_sequence(self):
        rng = np.random.default_rng(6)
        pts = rng.normal(size=(80, 2))
        m = point_measure(pts)
        x = np.array([0.05, -0.1])
        vals = [depth_approx(m, x, k).depth for k in (4, 16, 64, 256, 1024)]
        assert all(a >= b - 1e-15 for a, b in zip(vals, vals[1:]))

    def test_gaussian_center_is_half_mass(self):
        """Center of a symmetric continuous law: depth = E[L] / 2."""
        ref = reference_for(FixedCount(1), DiagonalGaussian([0, 0, 0], [1, 1, 1]))
        res = depth_approx(ref, [0.0, 0.0, 0.0], 4096)
        assert abs(res.depth - 0.5) <= 0.01


class TestDeepestPoint:
    def test_diamond_median(self):
        x, d = deepest_point(point_measure(DIAMOND), ([-1.5, -1.5], [1.5, 1.5]), 13)
        assert np.linalg.norm(x) <= 0.3
        assert d == pytest.approx(0.5)

    def test_single_point_measure(self):
        m = point_measure([[0.4, 0.6]] * 3)
        x, d = deepest_point(m, ([0.0, 0.0], [1.0, 1.0]), 11)
        assert np.linalg.norm(x - [0.4, 0.6]) <= 0.11
        assert d == pytest.approx(1.0)

    def test_uniform_line_median(self):
        ref = reference_for(FixedCount(1), UniformBox([0.0], [1.0]))
        x, d = deepest_point(ref, ([0.0], [1.0]), 41)
        assert x[0] == pytest.approx(0.5, abs=1e-6)
        assert d == pytest.approx(0.5, abs=1e-6)

    def test_empty_region_rejected(self):
        with pytest.raises(ValueError):
            deepest_point(point_measure([[0.0]]), ([1.0], [0.0]), 5)


class TestDepthSupDeviation:
    def test_self_reference_zero(self):
        s = Sample(tuple(PointPattern([[v]]) for v in (0.1, 0.4, 0.8)))
        assert depth_sup_deviation(s, EmpiricalReference(s), [[0.5]]) == 0.0

    def test_dominated_by_halfline_sup(self):
        rng = np.random.default_rng(7)
        ref = reference_for(FixedCount(1), UniformBox([0.0], [1.0]))
        for _ in range(25):
            s = Sample(tuple(PointPattern([[v]]) for v in rng.uniform(0, 1, 40)))
            dd = depth_sup_deviation(s, ref, [[0.5]])
            ks = sup_deviation(s, half_lines(), ref).value
            assert dd <= ks + 1e-12

    def test_three_point_hand_value(self):
        """Max over the 7 candidate positions (3 data points, 2 midpoints,
        2 query points) computed by hand against the uniform reference."""
        s = Sample(tuple(PointPattern([[v]]) for v in (0.1, 0.5, 0.9)))
        ref = reference_for(FixedCount(1), UniformBox([0.0], [1.0]))
        emp = EmpiricalReference(s)
        candidates = [0.1, 0.3, 0.5, 0.7, 0.9, 0.25, 0.75]
        expected = max(
            abs(depth_1d(ref, t).depth - depth_1d(emp, t).depth) for t in candidates
        )
        got = depth_sup_deviation(s, ref, [[0.25], [0.75]])
        assert got == pytest.approx(expected, abs=1e-13)

    def test_rejects_missing_eval_points(self):
        s = Sample((PointPattern([[0.0]]),))
        with pytest.raises(ValueError):
            depth_sup_deviation(s, EmpiricalReference(s), [])


class TestBatchQueries:
    def test_exact2d_schema_and_values(self, tmp_path):
        payload = {
            "points": DIAMOND.tolist(),
            "queries": [[0.0, 0.0], [2.0, 2.0]],
            "method": "exact2d",
        }
        rows = batch_depth_queries(payload)
        assert rows[0]["depth"] == pytest.approx(0.5)
        assert rows[1]["depth"] == 0.0
        assert set(rows[0]) == {"x1", "x2", "depth", "dir1", "dir2", "exact", "tie_count"}
        assert rows[0]["exact"] is True
        path = tmp_path / "depth.csv"
        depth_rows_to_csv(rows, path)
        header = path.read_text().splitlines()[0]
        assert header == "x1,x2,depth,dir1,dir2,exact,tie_count"

    def test_json_payload_from_disk(self, tmp_path):
        path = tmp_path / "query.json"
        path.write_text(
            json.dumps(
                {"points": [[0.0], [1.0]], "queries": [[0.5]], "method": "exact1d"}
            )
        )
        rows = batch_depth_queries(json.loads(path.read_text()))
        assert rows[0]["depth"] == pytest.approx(0.5)

    def test_approx_method_with_budget(self):
        rows = batch_depth_queries(
            {"points": DIAMOND.tolist(), "queries": [[0.0, 0.0]], "method": "approx:256"}
        )
        assert rows[0]["depth"] >= 0.5 - 1e-12
        assert rows[0]["exact"] is False

    def test_unknown_method_rejected(self):
        with pytest.raises(ValueError):
            batch_depth_queries(
                {"points": [[0.0]], "queries": [[0.0]], "method": "bogus"}
            )
