"""Artifact rendering: CSV precision, JSON safety, SVG structure."""

import csv
import io
import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from regulata import reporting, scenarios, simkit


def make_traj():
    times = np.array([0.0, 0.1, 1.0 / 3.0, 1.0])
    states = np.array([
        [1e-300, -2.0],
        [0.1, 3.5],
        [1.0 / 3.0, -1e22],
        [7.0, 0.0],
    ])
    derived = {
        "err": np.array([0.5, float("nan"), 0.25, 0.125]),
        "_runtime_seconds": 1.23,
    }
    return simkit.Trajectory(times=times, states=states, labels=("x1", "x2"),
                             derived=derived)


def test_csv_round_trips_doubles_exactly():
    traj = make_traj()
    text = reporting.trajectory_csv(traj)
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["t", "x1", "x2", "err"]
    # underscore-prefixed diagnostics stay out of the file
    assert all("_runtime_seconds" not in cell for cell in rows[0])
    data = np.array([[float(c) for c in row] for row in rows[1:]])
    assert data.shape == (4, 4)
    assert np.array_equal(data[:, 0], traj.times)
    assert np.array_equal(data[:, 1:3], traj.states)
    got_err = data[:, 3]
    assert math.isnan(got_err[1])
    mask = [0, 2, 3]
    assert np.array_equal(got_err[mask], traj.derived["err"][mask])


def test_json_safe_scrubs_non_finite_and_numpy_types():
    report = {
        "a": float("nan"),
        "b": [float("inf"), 1.0, np.float64(2.5)],
        "c": {"n": np.int64(3)},
        "d": (1, 2),
    }
    safe = reporting.json_safe(report)
    assert safe["a"] is None
    assert safe["b"] == [None, 1.0, 2.5]
    assert isinstance(safe["c"]["n"], int)
    assert safe["d"] == [1, 2]
    text = reporting.report_json(report)
    back = json.loads(text)
    assert back["a"] is None
    assert back["b"][0] is None


def svg_root(text):
    root = ET.fromstring(text)
    assert root.tag.endswith("svg")
    return root


def names(root, tag):
    return [el for el in root.iter() if el.tag.endswith(tag)]


def test_svg_renders_and_breaks_on_nan():
    t = np.linspace(0.0, 1.0, 11)
    y = np.sin(t)
    y_broken = y.copy()
    y_broken[5] = float("nan")
    whole = svg_root(reporting.render_svg(t, [("sig", y)], "plain"))
    broken = svg_root(reporting.render_svg(t, [("sig", y_broken)], "plain"))
    assert len(names(whole, "polyline")) == 1
    assert len(names(broken, "polyline")) == 2


def test_svg_escapes_title_and_handles_log_scale():
    t = np.linspace(0.0, 1.0, 5)
    y = np.array([1.0, 0.0, 1e-12, -1e-3, 2.0])
    text = reporting.render_svg(t, [("a<b&c", y)], "err <&> plot", log_y=True)
    root = svg_root(text)
    texts = [el.text for el in names(root, "text")]
    assert "err <&> plot" in texts
    assert "a<b&c" in texts


def test_svg_isolated_finite_sample_becomes_a_point():
    t = np.array([0.0, 1.0, 2.0])
    y = np.array([float("nan"), 4.0, float("nan")])
    root = svg_root(reporting.render_svg(t, [("dot", y)], "dots"))
    assert len(names(root, "circle")) == 1
    assert len(names(root, "polyline")) == 0


def test_svg_decimates_long_runs():
    t = np.linspace(0.0, 10.0, 10001)
    y = np.cos(t)
    text = reporting.render_svg(t, [("c", y)], "long")
    root = svg_root(text)
    pts = names(root, "polyline")[0].attrib["points"].split()
    assert len(pts) <= reporting._MAX_POINTS + 1


def test_svg_constant_signal_keeps_finite_axes():
    t = np.linspace(0.0, 1.0, 5)
    root = svg_root(reporting.render_svg(t, [("flat", np.full(5, 2.0))], "flat"))
    assert len(names(root, "polyline")) == 1


def test_scenario_artifacts_honor_emit_switches():
    cfg = scenarios.parse_config({"scenario": "custom-lti", "t_end": 1.0})
    traj, report = scenarios.run_scenario(cfg)
    arts = reporting.scenario_artifacts(cfg, traj, report)
    assert json.loads(arts["report"])["scenario"] == "custom-lti"
    assert arts["csv"].startswith("t,")
    group_names = [g[0] for g in scenarios.plot_groups(cfg, traj)]
    assert set(arts["svgs"]) == set(group_names)
    for text in arts["svgs"].values():
        svg_root(text)

    cfg.values["emit_csv"] = False
    cfg.values["emit_svg"] = False
    arts = reporting.scenario_artifacts(cfg, traj, report)
    assert arts["csv"] is None
    assert arts["svgs"] == {}
    assert arts["report"] is not None
    cfg.values["emit_report"] = False
    assert reporting.scenario_artifacts(cfg, traj, report)["report"] is None
