import math

import numpy as np
import pytest

from jumpmlmc.jump_field import (
    DEFAULT_JUMP_LAWS,
    BMap,
    CoefficientSample,
    JumpHeights,
    eval_a,
    eval_b,
    locate,
    partition_from_text,
    partition_from_uniforms,
    partition_to_text,
    sample_jump_heights,
    sample_partition_quadrangles,
)
from jumpmlmc.random_field import GridField, SampleGrid
from jumpmlmc.streams import RandomStream


def constant_field(c=0.0, m=4):
    return GridField(grid=SampleGrid.from_spacing(1.0 / m), values=np.full((m + 1, m + 1), c))


def make_sample(u=(0.5, 0.5, 0.5, 0.5), jumps=(0.0, 0.0, 0.0, 0.0), field_value=0.0,
                b1=-2.0, b2=-5.0, mode="max"):
    part = partition_from_uniforms(u)
    laws = tuple((min(v, 0.0), max(v, 1.0) + 11.0) for v in jumps)
    jh = JumpHeights(values=np.array(jumps, dtype=float), laws=laws)
    bm = BMap(b1=lambda p: np.full(p.shape[0], b1), b2=lambda p: np.full(p.shape[0], b2), mode=mode)
    return CoefficientSample(field=constant_field(field_value), partition=part, jumps=jh, b_map=bm)


class TestPartitionSampler:
    def test_symmetric_cross(self):
        part = partition_from_uniforms([0.5, 0.5, 0.5, 0.5])
        np.testing.assert_allclose(part.areas(), 0.25, atol=1e-15)
        assert part.tau == 4

    def test_areas_sum_to_one_for_any_draw(self):
        root = RandomStream(11)
        for i in range(200):
            part = sample_partition_quadrangles(root.child(i))
            assert abs(part.areas().sum() - 1.0) < 1e-12
            assert part.areas().min() > 0.0

    def test_regions_are_convex_and_inside(self):
        root = RandomStream(12)
        for i in range(50):
            part = sample_partition_quadrangles(root.child(i))
            for poly in part.regions:
                assert np.all(poly >= -1e-15) and np.all(poly <= 1.0 + 1e-15)
                rolled = np.roll(poly, -1, axis=0)
                rolled2 = np.roll(poly, -2, axis=0)
                cross = (rolled[:, 0] - poly[:, 0]) * (rolled2[:, 1] - rolled[:, 1]) - (
                    rolled[:, 1] - poly[:, 1]) * (rolled2[:, 0] - rolled[:, 0])
                assert np.all(cross > 0.0)

    def test_chord_intersection_and_raster_oracle(self):
        part = partition_from_uniforms([0.2, 0.8, 0.5, 0.5])
        # chords cross at (0.5, 0.5)
        x = part.regions[0][2]
        np.testing.assert_allclose(x, [0.5, 0.5], atol=1e-14)
        # shoelace areas vs 2048^2 rasterization count
        n = 2048
        g = (np.arange(n) + 0.5) / n
        xx, yy = np.meshgrid(g, g, indexing="ij")
        pts = np.column_stack([xx.ravel(), yy.ravel()])
        counts = np.bincount(locate(part, pts), minlength=4) / (n * n)
        np.testing.assert_allclose(part.areas(), counts, atol=2e-4)
        np.testing.assert_allclose(part.areas(), [0.175, 0.325, 0.175, 0.325], atol=1e-12)

    def test_region_zero_contains_origin_corner(self):
        root = RandomStream(13)
        for i in range(50):
            part = sample_partition_quadrangles(root.child(i))
            assert locate(part, np.array([0.0, 0.0])) == 0
            assert locate(part, np.array([1.0, 0.0])) == 1
            assert locate(part, np.array([1.0, 1.0])) == 2
            assert locate(part, np.array([0.0, 1.0])) == 3


class TestJumpHeights:
    def test_law_supports(self):
        root = RandomStream(21)
        for i in range(100):
            part = sample_partition_quadrangles(root.child(i, 0))
            jh = sample_jump_heights(part, root.child(i, 1))
            assert 0.0 < jh.values[0] < 1.0
            assert 5.0 < jh.values[1] < 6.0
            assert 0.0 < jh.values[2] < 1.0
            assert 10.0 < jh.values[3] < 11.0

    def test_adjacent_regions_have_distinct_laws(self):
        # adjacency of the two-chord partition is the 4-cycle 0-1-2-3-0
        laws = DEFAULT_JUMP_LAWS
        for a, b in ((0, 1), (1, 2), (2, 3), (3, 0)):
            assert laws[a] != laws[b]

    def test_top_law_mean(self):
        root = RandomStream(22)
        n = 2000
        vals = np.empty(n)
        part = sample_partition_quadrangles(root.child(0))
        for i in range(n):
            vals[i] = sample_jump_heights(part, root.child(1, i)).values[3]
        se = (1.0 / math.sqrt(12.0)) / math.sqrt(n)
        assert abs(vals.mean() - 10.5) < 3 * se

    def test_wrong_tau_rejected(self):
        with pytest.raises(ValueError):
            sample_jump_heights(_FakeTau3(), RandomStream(0))


class _FakeTau3:
    tau = 3


class TestLocate:
    def test_symmetric_cross_quadrants(self):
        part = partition_from_uniforms([0.5, 0.5, 0.5, 0.5])
        assert locate(part, np.array([0.25, 0.25])) == 0
        assert locate(part, np.array([0.75, 0.25])) == 1
        assert locate(part, np.array([0.75, 0.75])) == 2
        assert locate(part, np.array([0.25, 0.75])) == 3

    def test_centroids_locate_to_their_region(self):
        root = RandomStream(31)
        for i in range(50):
            part = sample_partition_quadrangles(root.child(i))
            for ridx, poly in enumerate(part.regions):
                assert locate(part, poly.mean(axis=0)) == ridx

    def test_against_sign_oracle_on_random_points(self):
        part = sample_partition_quadrangles(RandomStream(5).child(0))
        (b, t), (l, r) = part.chords
        pts = np.random.default_rng(0).uniform(0.0, 1.0, (10_000, 2))
        got = locate(part, pts)
        # independent half-plane classification
        s1 = (t[0] - b[0]) * (pts[:, 1] - b[1]) - (t[1] - b[1]) * (pts[:, 0] - b[0])
        s2 = (r[0] - l[0]) * (pts[:, 1] - l[1]) - (r[1] - l[1]) * (pts[:, 0] - l[0])
        expect = np.where(s2 >= 0, np.where(s1 < 0, 2, 3), np.where(s1 < 0, 1, 0))
        assert np.array_equal(got, expect)

    def test_tie_break_points_on_chords(self):
        part = partition_from_uniforms([0.5, 0.5, 0.5, 0.5])
        # on chord 1 below X: left of upward chord is region 0
        assert locate(part, np.array([0.5, 0.25])) == 0
        # on chord 2 left of X: left of rightward chord is region 3
        assert locate(part, np.array([0.25, 0.5])) == 3
        # the intersection is doubly left: region 3
        assert locate(part, np.array([0.5, 0.5])) == 3


class TestCoefficients:
    def test_unit_coefficient_when_everything_trivial(self):
        sample = make_sample()
        pts = np.random.default_rng(0).uniform(0.0, 1.0, (100, 2))
        np.testing.assert_allclose(eval_a(sample, pts), 1.0, atol=0.0)

    def test_constant_field_with_jump(self):
        sample = make_sample(jumps=(0.0, 0.0, 0.0, 10.5))
        assert eval_a(sample, np.array([0.25, 0.75])) == pytest.approx(11.5, abs=1e-15)

    def test_positivity_on_random_samples(self):
        root = RandomStream(41)
        rng = np.random.default_rng(2)
        pts = rng.uniform(0.0, 1.0, (10_000, 2))
        for i in range(5):
            part = sample_partition_quadrangles(root.child(i, 0))
            jumps = sample_jump_heights(part, root.child(i, 1))
            m = 16
            vals = rng.standard_normal((m + 1, m + 1))
            field = GridField(grid=SampleGrid.from_spacing(1.0 / m), values=vals)
            sample = CoefficientSample(field=field, partition=part, jumps=jumps)
            assert eval_a(sample, pts).min() > 0.0

    def test_b_clamp_modes(self):
        # max form: a = 1 -> max(-2, -5) = -2
        sample = make_sample()
        assert eval_b(sample, np.array([0.1, 0.1])) == pytest.approx(-2.0, abs=0.0)
        # cap active: a = 11.5 in region 3
        sample = make_sample(jumps=(0.0, 0.0, 0.0, 10.5))
        assert eval_b(sample, np.array([0.25, 0.75])) == pytest.approx(-5.0, abs=0.0)
        # min form with positive b1: min(3 * 1, 2) = 2
        sample = make_sample(jumps=(2.0, 2.0, 2.0, 2.0), b1=1.0, b2=2.0, mode="min")
        assert eval_b(sample, np.array([0.1, 0.1])) == pytest.approx(2.0, abs=0.0)

    def test_b_range_for_experiment_parameters(self):
        root = RandomStream(43)
        rng = np.random.default_rng(3)
        pts = rng.uniform(0.0, 1.0, (5000, 2))
        part = sample_partition_quadrangles(root.child(0))
        jumps = sample_jump_heights(part, root.child(1))
        field = GridField(grid=SampleGrid.from_spacing(1 / 16),
                          values=rng.standard_normal((17, 17)))
        sample = CoefficientSample(field=field, partition=part, jumps=jumps)
        b = eval_b(sample, pts)
        assert np.all(b >= -5.0) and np.all(b < 0.0)

    def test_affine_exp_structure_within_one_cell(self):
        # inside one region and one interpolation triangle, a is exp of an
        # affine function plus a constant: check midpoint consistency
        rng = np.random.default_rng(7)
        m = 4
        field = GridField(grid=SampleGrid.from_spacing(1.0 / m),
                          values=rng.standard_normal((m + 1, m + 1)))
        part = partition_from_uniforms([0.5, 0.5, 0.5, 0.5])
        jumps = JumpHeights(values=np.array([1.0, 5.5, 0.5, 10.5]), laws=DEFAULT_JUMP_LAWS)
        sample = CoefficientSample(field=field, partition=part, jumps=jumps)
        # lower triangle of cell (0,0): corners (0,0), (1/4,0), (1/4,1/4)
        p1, p2 = np.array([0.05, 0.01]), np.array([0.2, 0.1])
        w1 = math.log(eval_a(sample, p1) - jumps.values[0])
        w2 = math.log(eval_a(sample, p2) - jumps.values[0])
        mid = 0.5 * (p1 + p2)
        w_mid = math.log(eval_a(sample, mid) - jumps.values[0])
        assert w_mid == pytest.approx(0.5 * (w1 + w2), abs=1e-12)


class TestSerialization:
    def test_round_trip(self):
        root = RandomStream(51)
        part = sample_partition_quadrangles(root.child(0))
        jumps = sample_jump_heights(part, root.child(1))
        text = partition_to_text(part, jumps)
        part2, jumps2 = partition_from_text(text)
        for a, b in zip(part.regions, part2.regions):
            assert np.array_equal(a, b)
        for a, b in zip(part.interface_segments, part2.interface_segments):
            assert np.array_equal(a, b)
        assert np.array_equal(part.chords[0], part2.chords[0])
        assert np.array_equal(jumps.values, jumps2.values)
        assert jumps.laws == jumps2.laws
