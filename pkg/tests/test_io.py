import json
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from walkoff.grids import Axis, JointIntensity
from walkoff.io import (
    ConfigError,
    HistogramParseError,
    format_histogram,
    read_config,
    read_histogram,
    sha256_of,
    write_histogram,
    write_manifest,
)

HEADER = "# x_s_axis: -1.0 1.0 2\n# x_i_axis: -1.0 1.0 2\n"


def _write(tmp_path, text, name="h.txt"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_round_trip_2x2(tmp_path):
    ax = Axis(-1.0, 1.0, 2)
    g = JointIntensity(ax, ax, np.array([[0.1, 2.0], [1 / 3, 7e-300]]), {"z": 0.0125, "magnification": 4.0})
    back = read_histogram(write_histogram(tmp_path / "g.csv", g))
    assert np.array_equal(back.counts, g.counts)
    assert back.x_s_axis == ax and back.x_i_axis == ax
    assert back.meta["z"] == 0.0125
    assert back.meta["magnification"] == 4.0


@settings(max_examples=30, deadline=None)
@given(counts=arrays(np.float64, st.tuples(st.integers(2, 5), st.integers(2, 5)),
                     elements=st.floats(0, 1e6)).filter(lambda a: a.sum() > 0),
       lo=st.floats(-1e3, 0), span=st.floats(1e-3, 1e3))
def test_round_trip_lossless(tmp_path_factory, counts, lo, span):
    ax_s = Axis(lo, lo + span, counts.shape[0])
    ax_i = Axis(-span, 2 * span, counts.shape[1])
    g = JointIntensity(ax_s, ax_i, counts)
    path = tmp_path_factory.mktemp("rt") / "g.txt"
    back = read_histogram(write_histogram(path, g, delimiter=" "))
    assert np.array_equal(back.counts, counts)
    assert back.x_s_axis == ax_s and back.x_i_axis == ax_i


def test_whitespace_and_comma_delimiters(tmp_path):
    a = read_histogram(_write(tmp_path, HEADER + "1 2\n3\t4\n", "a.txt"))
    b = read_histogram(_write(tmp_path, HEADER + "1,2\n3, 4\n", "b.csv"))
    assert np.array_equal(a.counts, b.counts)
    assert np.array_equal(a.counts, [[1, 2], [3, 4]])


def test_free_comments_and_blank_lines(tmp_path):
    g = read_histogram(_write(tmp_path, "# camera run 7\n" + HEADER + "\n1 2\n\n3 4\n"))
    assert g.total() == 10


@pytest.mark.parametrize("body,line,word", [
    ("1 2\n3 -4\n", 4, "negative"),
    ("1 2\n3 nan\n", 4, "non-finite"),
    ("1 2\n3 x\n", 4, "not a number"),
    ("1 2\n3 4 5\n", 4, "columns"),
    ("1 2\n", 3, "rows"),
])
def test_bad_rows_report_line(tmp_path, body, line, word):
    path = _write(tmp_path, HEADER + body)
    with pytest.raises(HistogramParseError) as info:
        read_histogram(path)
    assert info.value.line == line
    assert str(info.value).startswith(f"{path}:{line}:")
    assert word in str(info.value)


@pytest.mark.parametrize("header,word", [
    ("# x_i_axis: -1 1 2\n", "x_s_axis"),
    ("# x_s_axis: -1 1\n# x_i_axis: -1 1 2\n", "min max n"),
    ("# x_s_axis: -1 1 two\n# x_i_axis: -1 1 2\n", "integer"),
    ("# x_s_axis: 1 -1 2\n# x_i_axis: -1 1 2\n", "^.*:1:"),
])
def test_malformed_header(tmp_path, header, word):
    with pytest.raises(HistogramParseError, match=word):
        read_histogram(_write(tmp_path, header + "1 2\n3 4\n"))


def test_all_zero_rejected(tmp_path):
    with pytest.raises(HistogramParseError):
        read_histogram(_write(tmp_path, HEADER + "0 0\n0 0\n"))


def test_magnification(tmp_path):
    text = "# x_s_axis: -8 8 2\n# x_i_axis: -4 4 2\n# magnification: 4\n1 2\n3 4\n"
    path = _write(tmp_path, text)
    camera = read_histogram(path)
    obj = read_histogram(path, apply_magnification=True)
    assert obj.x_s_axis == Axis(-2.0, 2.0, 2)
    assert obj.x_i_axis == Axis(-1.0, 1.0, 2)
    assert obj.meta["object_plane"] is True
    assert np.array_equal(obj.counts, camera.counts)
    assert "object_plane" not in camera.meta


def test_magnification_missing(tmp_path):
    with pytest.raises(HistogramParseError, match="magnification"):
        read_histogram(_write(tmp_path, HEADER + "1 2\n3 4\n"), apply_magnification=True)


def test_format_header_order():
    ax = Axis(0.0, 1.0, 2)
    g = JointIntensity(ax, ax, np.eye(2), {"source": "x", "z": 2.0, "mu": 0.5})
    lines = format_histogram(g).splitlines()
    assert lines[:3] == ["# x_s_axis: 0.0 1.0 2", "# x_i_axis: 0.0 1.0 2", "# z: 2.0"]
    assert lines[3:] == ["# mu: 0.5", "# source: x", "1.0,0.0", "0.0,1.0"]


def test_write_is_atomic_and_respects_umask(tmp_path):
    ax = Axis(0.0, 1.0, 2)
    path = write_histogram(tmp_path / "out" / "g.csv", JointIntensity(ax, ax, np.eye(2)))
    assert [p.name for p in path.parent.iterdir()] == ["g.csv"]
    umask = os.umask(0)
    os.umask(umask)
    assert path.stat().st_mode & 0o777 == 0o666 & ~umask


def test_config_case_and_comments(tmp_path):
    path = _write(tmp_path, "[grid]\nM = 32  # samples\nN = 48 ; more\nratio = 50%\n", "c.ini")
    cfg = read_config(path)
    assert cfg["grid"]["M"] == "32"
    assert cfg["grid"]["N"] == "48"
    assert cfg["grid"]["ratio"] == "50%"


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        read_config(tmp_path / "missing.ini")
    with pytest.raises(ConfigError) as info:
        read_config(_write(tmp_path, "[a]\nx = 1\n[a]\n", "dup.ini"))
    assert "\n" not in str(info.value)
    assert str(info.value).startswith("config-error key=--config")


def test_manifest(tmp_path):
    f = _write(tmp_path, "abc", "out.csv")
    path = write_manifest(tmp_path, verb="fit-sections", config={"b": {"x": "1"}, "a": {}},
                          files=[f], units="dimensionless", warnings=["w"])
    data = json.loads(path.read_text())
    assert data["outputs"] == [{"file": "out.csv", "sha256": sha256_of(f)}]
    assert data["units"] == "dimensionless"
    assert data["warnings"] == ["w"]
    assert sha256_of(f) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
