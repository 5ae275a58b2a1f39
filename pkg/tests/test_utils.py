import math

import pytest

from lmmgrid.utils.graphics import smile_chart
from lmmgrid.utils.io import provenance_line, read_table, write_table
from lmmgrid.utils.stats import median, standard_error, weighted_mean


def test_table_keeps_provenance_and_blank_cells(tmp_path):
    out = tmp_path / "nested" / "table.csv"
    write_table(str(out), ("p", "seed"), [(1, None), (2, 7)], {"config_hash": "abc", "seed": "none"})
    assert out.read_text().splitlines()[0] == "# config_hash=abc seed=none"
    provenance, header, rows = read_table(str(out))
    assert provenance == {"config_hash": "abc", "seed": "none"}
    assert header == ["p", "seed"]
    assert rows == [["1", ""], ["2", "7"]]


def test_provenance_line():
    assert provenance_line({"model": "gz-mc", "seed": 3}) == "# model=gz-mc seed=3"


def test_stats():
    assert weighted_mean([1.0, 3.0], [3.0, 1.0]) == 1.5
    assert standard_error([2.0]) == 0.0
    assert standard_error([1.0, 3.0]) == pytest.approx(1.0)
    assert median([3.0, 1.0, 2.0]) == 2.0


def test_smile_chart(tmp_path):
    out = tmp_path / "smile.svg"
    smile_chart(str(out), {"exact": [(0.6, 54.2), (1.0, 39.6), (3.4, math.nan)], "gz": [(0.6, 43.7), (1.0, 31.3)]})
    text = out.read_text()
    assert text.count("<polyline") == 2
    assert "exact" in text
    with pytest.raises(ValueError):
        smile_chart(str(out), {"exact": [(3.4, math.nan)]})
