import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from smoothsgd.stream_data import (FEATURE_DIM, DataError, SeriesPoint, chunk_stream, convert_gefcom,
                                   encode_features, load_csv, series_values, synth_series, write_csv)


def write(tmp_path, text, name="s.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_two_rows(tmp_path):
    pts = load_csv(write(tmp_path, "hour,value\n0,1.0\n1,2.0\n"))
    assert pts == [SeriesPoint(0, 1.0), SeriesPoint(1, 2.0)]


@pytest.mark.parametrize("body, fragment", [
    ("0,1.0\n2,2.0\n", "gap"),
    ("0,1.0\n0,2.0\n", "duplicate"),
    ("0,1.0\n1,abc\n", ":3:"),
    ("0,1.0,7\n", "2 columns"),
    ("0,nan\n", "non-finite"),
    ("", "no data rows"),
])
def test_load_rejects(tmp_path, body, fragment):
    with pytest.raises(DataError, match=fragment):
        load_csv(write(tmp_path, "hour,value\n" + body))


def test_load_rejects_bad_header(tmp_path):
    with pytest.raises(DataError, match="header"):
        load_csv(write(tmp_path, "h,v\n0,1\n"))
    with pytest.raises(DataError):
        load_csv(write(tmp_path, ""))


def test_round_trip_is_byte_identical(tmp_path):
    src = tmp_path / "a.csv"
    write_csv(synth_series(300, noise_sd=0.7, seed=4, trend=0.01), src)
    dst = tmp_path / "b.csv"
    write_csv(load_csv(src), dst)
    assert src.read_bytes() == dst.read_bytes()


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=40))
def test_round_trip_values(tmp_path_factory, values):
    p = tmp_path_factory.mktemp("rt") / "x.csv"
    write_csv(np.array(values), p)
    assert series_values(load_csv(p)).tolist() == [float(v) for v in values]


def test_synth_constant():
    pts = synth_series(50, daily_amp=0, weekly_amp=0, trend=0, noise_sd=0, base=5)
    assert all(p.value == 5.0 for p in pts)


def test_synth_daily_period():
    v = series_values(synth_series(200, daily_amp=1, weekly_amp=0, base=2.5))
    assert v[0] == 2.5
    assert v[24] == pytest.approx(2.5, abs=1e-14)
    np.testing.assert_allclose(v[24:], v[:-24], atol=1e-13)


def test_synth_weekly_period():
    v = series_values(synth_series(500, daily_amp=0.8, weekly_amp=0.3))
    np.testing.assert_allclose(v[168:], v[:-168], atol=1e-13)


def test_synth_deterministic_per_seed():
    a = synth_series(100, noise_sd=1.0, seed=9)
    assert a == synth_series(100, noise_sd=1.0, seed=9)
    assert a != synth_series(100, noise_sd=1.0, seed=10)


def test_synth_noise_is_roughly_gaussian():
    clean = series_values(synth_series(20000, trend=0.001))
    noise = series_values(synth_series(20000, trend=0.001, noise_sd=2.0, seed=1)) - clean
    assert abs(noise.mean()) < 0.05
    assert noise.std() == pytest.approx(2.0, rel=0.03)


def test_synth_domain():
    with pytest.raises(ValueError):
        synth_series(0)
    with pytest.raises(ValueError):
        synth_series(10, noise_sd=-1)


def test_feature_dim():
    assert FEATURE_DIM == 44


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 48), st.integers(0, 20000))
def test_feature_rows_one_hot(window, offset):
    values = np.arange(window + offset + 1, dtype=float) * 0.5
    t = window + offset
    X = encode_features(values, t, window)
    assert X.shape == (window, 44)
    np.testing.assert_array_equal(X[:, 0], values[t - window: t])
    for lo, hi in ((1, 25), (25, 32), (32, 44)):
        np.testing.assert_array_equal(X[:, lo:hi].sum(axis=1), 1.0)
    assert set(np.unique(X[:, 1:])) <= {0.0, 1.0}


def test_feature_calendar_positions():
    h = 24 * 37 + 5  # day 37: weekday 2, month 1
    X = encode_features(np.zeros(h + 1), h + 1, 1)
    row = X[0]
    assert row[1 + 5] == 1
    assert row[25 + 2] == 1
    assert row[32 + 1] == 1


def test_feature_history_required():
    with pytest.raises(IndexError):
        encode_features(np.zeros(10), 3, 4)
    with pytest.raises(IndexError):
        encode_features(np.zeros(10), 11, 4)


def test_chunk_sizes():
    assert [len(c) for c in chunk_stream(synth_series(100), 30)] == [30, 30, 30, 10]
    assert [len(c) for c in chunk_stream(synth_series(100), 500)] == [100]
    with pytest.raises(ValueError):
        chunk_stream(synth_series(5), 0)


@given(st.integers(1, 300), st.integers(1, 100))
def test_chunks_partition(n, size):
    pts = synth_series(n)
    chunks = chunk_stream(pts, size)
    assert [p for c in chunks for p in c.points] == pts
    assert [c.index for c in chunks] == list(range(len(chunks)))
    assert all(len(c) > 0 for c in chunks)
    assert all(a.stop == b.start for a, b in zip(chunks, chunks[1:]))


def test_convert_gefcom(tmp_path):
    src = write(tmp_path, "ZONEID,TIMESTAMP,LOAD,w1\n1,1012001 1:00,,40\n1,1012001 2:00,120.5,41\n"
                          "1,1012001 3:00,118,42\n", "train.csv")
    dst = tmp_path / "out.csv"
    assert convert_gefcom(src, dst) == 2
    assert dst.read_text() == "hour,value\n0,120.5\n1,118.0\n"
    with pytest.raises(DataError):
        convert_gefcom(write(tmp_path, "A,B\n1,2\n", "bad.csv"), dst)
