import re

import matplotlib.pyplot as plt
import numpy as np
import pytest

from ethscale.fitting import ScalingSeries, fit_exponential, fit_table
from ethscale.plotting import _draw, plot_all, plot_quantity


def synthetic_rows(Ls=(7, 9, 11, 13)):
    rows = []
    for L in Ls:
        r = {"L": L}
        for k, name in enumerate(["m1", "m2", "m3", "m4", "F11", "F11_L", "F11_T", "F111", "F111_L", "F111_T",
                                  "F1111", "F1111_L", "F1111_T", "F21", "F31", "F211_1", "F211_2", "F22",
                                  "C", "P"]):
            r[name] = (1 + 0.1 * k) * np.exp(-0.5 * L)
        r["P"] = -0.2 / L ** 1.1
        r["m1"] = 0.0
        rows.append(r)
    return rows


def panel_count(path):
    return len(re.findall(r'<g id="axes_\d+"', path.read_text()))


def test_dashed_fit_line_has_slope_minus_b():
    L = np.array([7.0, 9.0, 11.0, 13.0])
    s = ScalingSeries("F11_L", L, 2.0 * np.exp(-0.45 * L))
    fit = fit_exponential(s)
    fig, ax = plt.subplots()
    _draw(ax, s, fit, "C0", loglog=False)
    dashed = [ln for ln in ax.lines if ln.get_linestyle() == "--"]
    assert len(dashed) == 1
    x, y = dashed[0].get_data()
    slope = np.polyfit(x, np.log(y), 1)[0]
    assert slope == pytest.approx(-0.45, rel=1e-10)
    assert x[0] == 7.0 and x[-1] == 13.0
    solid = [ln for ln in ax.lines if ln.get_linestyle() == "-"]
    assert solid and np.allclose(solid[0].get_ydata(), s.values)
    plt.close(fig)


def test_plot_quantity_has_log_and_loglog_panels(tmp_path):
    s = ScalingSeries("C", [7, 9, 11], [0.3, 0.1, 0.03])
    p = tmp_path / "C.svg"
    plot_quantity(s, None, p)
    assert panel_count(p) == 2


def test_empty_series_gives_note_and_no_file(tmp_path):
    rows = synthetic_rows()
    for r in rows:
        r["F211_2"] = 0.0
    table = fit_table({})
    files, notes = plot_all(rows, table, tmp_path)
    assert not (tmp_path / "F211_2.svg").exists()
    assert any("F211_2" in n for n in notes)
    assert (tmp_path / "F11_L.svg") in files


def test_layouts_have_six_panels(tmp_path):
    files, _ = plot_all(synthetic_rows(), fit_table({}), tmp_path)
    assert panel_count(tmp_path / "moments.svg") == 6
    assert panel_count(tmp_path / "mixed.svg") == 6
    # m1 is only plotted for the two-site observable
    assert not (tmp_path / "m1.svg").exists()


def test_svg_output_is_deterministic(tmp_path):
    rows = synthetic_rows()
    a, b = tmp_path / "a", tmp_path / "b"
    plot_all(rows, fit_table({}), a)
    plot_all(rows, fit_table({}), b)
    for p in sorted(a.iterdir()):
        assert p.read_bytes() == (b / p.name).read_bytes()
