import numpy as np
import pytest

import cocyclelab as cl
from cocyclelab import io as fmt
from cocyclelab.cocycle import CocyclePath, LinearCocycle
from cocyclelab.manifold import TorusCurve, curve_hausdorff

from conftest import random_gl2


class TestRoundtrips:
    def test_cocycle(self):
        rng = np.random.default_rng(0)
        c = LinearCocycle(np.stack([random_gl2(rng) for _ in range(4)]))
        back = fmt.load_cocycle(fmt.dump_cocycle(c))
        np.testing.assert_array_equal(back.mats, c.mats)

    def test_path(self, base_witness):
        back = fmt.load_path(fmt.dump_path(base_witness))
        np.testing.assert_array_equal(back.nodes, base_witness.nodes)
        np.testing.assert_array_equal(back.mats, base_witness.mats)

    def test_theta(self, realized):
        th = realized.rc.theta
        back = fmt.load_theta(fmt.dump_theta(th))
        np.testing.assert_array_equal(back.log_bp, th.log_bp)
        np.testing.assert_array_equal(back.values, th.values)
        assert back.delta == th.delta

    def test_kit(self, base_kit):
        kit, sched = fmt.load_kit(fmt.dump_kit(base_kit, schedule=(2, 21, 2, 22)))
        assert kit.lambda1 == base_kit.lambda1
        assert kit.r == base_kit.r
        np.testing.assert_array_equal(kit.T1, base_kit.T1)
        assert sched == (2, 21, 2, 22)

    def test_curve_csv(self, base_meridians):
        m = base_meridians[0]
        back = fmt.read_curve_csv(fmt.write_curve_csv(m))
        np.testing.assert_array_equal(back.uv, m.uv)
        assert back.homology == m.homology


class TestErrors:
    def test_bad_header(self):
        with pytest.raises(fmt.FormatError, match="header"):
            fmt.load_cocycle("something 9\ncocycle n=1\n1 0 0 1\n")

    def test_bad_block(self):
        with pytest.raises(fmt.FormatError, match="unknown block"):
            fmt.load_blocks("cocyclelab 1\nwhatever\n")

    def test_truncated_cocycle(self):
        with pytest.raises(fmt.FormatError, match="end of file"):
            fmt.load_cocycle("cocyclelab 1\ncocycle n=2\n1 0 0 1\n")

    def test_bad_number(self):
        with pytest.raises(fmt.FormatError):
            fmt.load_cocycle("cocyclelab 1\ncocycle n=1\n1 0 zero 1\n")

    def test_missing_block(self):
        with pytest.raises(fmt.FormatError, match="no kit"):
            fmt.load_kit("cocyclelab 1\ncocycle n=1\n1 0 0 1\n")

    def test_curve_needs_header(self):
        with pytest.raises(fmt.FormatError, match="header"):
            fmt.read_curve_csv("0,0\n1,0\n")


class TestComments:
    def test_comments_and_blanks_ignored(self):
        text = "cocyclelab 1\n# a comment\n\ncocycle n=1\n# entries\n0.9 0 0 0.4\n"
        c = fmt.load_cocycle(text)
        np.testing.assert_array_equal(c.mats[0], np.diag([0.9, 0.4]))


class TestSvg:
    def test_svg_renders_curves(self, base_meridians):
        svg = fmt.torus_svg([("m1", base_meridians[0]), ("m2", base_meridians[1])])
        assert svg.startswith("<svg")
        assert svg.count("<polyline") >= 2
        assert "m1" in svg and "m2" in svg

    def test_svg_deterministic(self, base_meridians):
        a = fmt.torus_svg([("m", base_meridians[0])])
        b = fmt.torus_svg([("m", base_meridians[0])])
        assert a == b
