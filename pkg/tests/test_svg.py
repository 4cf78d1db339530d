import math
import xml.etree.ElementTree as ET

import numpy as np

from blightwave.svg import bar_chart_svg, snapshot_svg

NS = "{http://www.w3.org/2000/svg}"


def _fields(n):
    x = np.linspace(0.5, n - 0.5, n)
    bump = np.exp(-0.5 * ((x - n / 3) / 5.0) ** 2)
    return x, {"B": 1e6 * bump, "O": 1e3 * bump, "S": 5 - 4 * bump, "I": 3 * bump,
               "R": bump}


class TestSnapshot:
    def test_well_formed(self):
        x, fields = _fields(100)
        root = ET.fromstring(snapshot_svg(x, fields, 4.5, 5.0))
        assert root.tag == NS + "svg" and root.get("version") == "1.1"
        assert root.find(NS + "title").text == "t = 4.5 days"
        assert len(root.findall(NS + "polyline")) == 5

    def test_points_stay_inside_the_canvas(self):
        x, fields = _fields(5000)
        root = ET.fromstring(snapshot_svg(x, fields, 1.0, 5.0, max_points=200))
        for line in root.findall(NS + "polyline"):
            pts = [tuple(map(float, p.split(","))) for p in line.get("points").split()]
            assert len(pts) <= 201
            assert all(0 <= a <= 760 and 0 <= b <= 560 for a, b in pts)

    def test_deterministic(self):
        x, fields = _fields(50)
        assert snapshot_svg(x, fields, 2.0, 5.0) == snapshot_svg(x, fields, 2.0, 5.0)


class TestBarChart:
    def test_well_formed_with_escaping(self):
        svg = bar_chart_svg(["a<b", "c"], {"S & T": [0.2, -0.1]}, {"S & T": [(0.1, 0.3), (-0.2, 0.0)]},
                            title="x < y", ylabel="index")
        root = ET.fromstring(svg)
        texts = [t.text for t in root.iter(NS + "text")]
        assert "a<b" in texts and "S & T" in texts and "x < y" in texts
        assert len(root.findall(NS + "line")) >= 3  # two whiskers plus the zero axis

    def test_non_finite_values_are_skipped(self):
        root = ET.fromstring(bar_chart_svg(["a", "b"], {"s": [math.nan, 0.5]},
                                           {"s": [(math.nan, math.nan), (0.4, 0.6)]}))
        bars = [r for r in root.findall(NS + "rect") if r.get("fill") == "#4c72b0"]
        assert len(bars) == 2  # one bar plus the legend swatch
