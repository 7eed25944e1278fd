import math

import pytest
import src.utils as utils


class TestLogLogSlope:
    def test_power_law(self):
        x = [4.0, 8.0, 16.0, 32.0]
        y = [3.0 * value**-1.5 for value in x]
        assert utils.loglog_slope(x, y) == pytest.approx(-1.5, rel=1e-12)

    def test_unusable_points_are_dropped(self):
        x = [1.0, 2.0, 4.0, 8.0, 16.0]
        y = [0.0, 2.0**-2, math.nan, 8.0**-2, 16.0**-2]
        assert utils.loglog_slope(x, y) == pytest.approx(-2.0, rel=1e-12)

    def test_needs_two_points(self):
        assert utils.loglog_slope([1.0, 2.0], [1.0, 0.0]) is None
        assert utils.loglog_slope([], []) is None
