from datetime import datetime, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from daif.data import (LoadError, MultivariateSeries, SplitError, SplitSpec, Window, WindowSet,
                       destandardize, load_csv, sliding_windows, split, standardize,
                       synth_generate, window_count, write_csv)
from daif.spectral import frequency_filter


def _write(path, text):
    path.write_text(text)
    return path


def test_load_plain_csv(tmp_path):
    s = load_csv(_write(tmp_path / "a.csv", "x,y\n1,2\n3,4\n5,6.5\n"))
    assert s.values.shape == (3, 2) and s.variate_names == ["x", "y"] and s.timestamps is None
    assert s.values[2, 1] == 6.5


def test_load_date_column(tmp_path):
    s = load_csv(_write(tmp_path / "b.csv", "date,a\n2016-07-01 00:00:00,1\n2016-07-01 01:00:00,2\n"))
    assert s.timestamps == ["2016-07-01 00:00:00", "2016-07-01 01:00:00"]
    assert s.values.tolist() == [[1.0], [2.0]]


def test_load_error_names_row(tmp_path):
    rows = ["a,b"] + [f"{i},{i}" for i in range(5)] + ["abc,1"]
    with pytest.raises(LoadError, match="row 7") as exc:
        load_csv(_write(tmp_path / "c.csv", "\n".join(rows) + "\n"))
    assert exc.value.row == 7 and exc.value.column == "a"


@pytest.mark.parametrize("text", ["", "a,b\n", "a,b\n1,2\n3\n", "a,b\n1,nan\n", "a,b\n1,\n"])
def test_load_rejects_bad_files(tmp_path, text):
    with pytest.raises(LoadError):
        load_csv(_write(tmp_path / "d.csv", text))


def test_load_missing_file(tmp_path):
    with pytest.raises(LoadError, match="cannot open"):
        load_csv(tmp_path / "nope.csv")


def test_window_counts():
    assert window_count(200, 96, 96) == 9
    assert window_count(192, 96, 96) == 1
    with pytest.raises(ValueError):
        window_count(191, 96, 96)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 40), st.integers(1, 40), st.integers(1, 10), st.integers(0, 60))
def test_window_count_matches_enumeration(T, S, stride, extra):
    n = T + S + extra
    starts = [i for i in range(0, n) if i % stride == 0 and i + T + S <= n]
    count, it = sliding_windows(np.zeros((n, 1)), T, S, stride)
    assert count == len(starts) == len(list(it))


def test_stride_equal_to_horizon_gives_disjoint_targets():
    n, T, S = 500, 48, 24
    values = np.arange(n, dtype=float)[:, None]
    count, it = sliding_windows(values, T, S, stride=S)
    assert count == -(-(n - T - S + 1) // S)
    seen = []
    for w in it:
        assert w.x[-1, 0] < w.y[0, 0]
        seen.extend(w.y[:, 0].tolist())
    assert len(seen) == len(set(seen))


def test_standardize_examples():
    x = np.column_stack([np.full(10, 3.0), np.linspace(0, 9, 10)])
    w = standardize(Window(x, np.ones((4, 2))))
    assert not w.x[:, 0].any()
    assert w.norm_stats[1][0, 0] == 1e-8
    rng = np.random.default_rng(0)
    x = rng.normal(size=(50, 3))
    x = (x - x.mean(0)) / x.std(0) * 2 + 5
    w = standardize(Window(x, rng.normal(size=(7, 3))))
    assert np.all(np.abs(w.x.mean(0)) < 1e-9) and np.all(np.abs(w.x.std(0) - 1) < 1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 30), st.integers(1, 5), st.integers(0, 2 ** 32 - 1))
def test_standardize_round_trip_property(T, N, seed):
    rng = np.random.default_rng(seed)
    w = Window(rng.normal(size=(T, N)) * 10, rng.normal(size=(5, N)))
    back = destandardize(standardize(w))
    assert np.max(np.abs(back.x - w.x)) <= 1e-12 * max(1, np.abs(w.x).max())
    assert np.max(np.abs(back.y - w.y)) <= 1e-12 * max(1, np.abs(w.x).max())


def test_window_set_batch_matches_single_windows():
    v = np.random.default_rng(1).normal(size=(60, 2))
    ws = WindowSet(v, 10, 5)
    X, Y = ws.batch([3, 7])
    w = standardize(ws.window(7))
    np.testing.assert_array_equal(X[1], w.x)
    np.testing.assert_array_equal(Y[1], w.y)


def _series(n, n_vars=2, timestamps=None):
    return MultivariateSeries(np.arange(n * n_vars, dtype=float).reshape(n, n_vars),
                              [f"v{i}" for i in range(n_vars)], timestamps)


def test_ratio_split_example():
    s = split(_series(1000), SplitSpec(), 96)
    assert s.bounds == {"train": (0, 700), "val": (604, 800), "test": (704, 1000)}
    assert len(s.val) == 196 and len(s.test) == 296


def test_ratio_split_empty_val_names_it():
    with pytest.raises(SplitError, match="val"):
        split(_series(1000), SplitSpec(ratios=(1, 0, 0)), 96)


def test_ett_month_split():
    t0 = datetime(2016, 7, 1)
    n = 17420
    stamps = [(t0 + timedelta(hours=i)).strftime("%Y-%m-%d %H:%M:%S") for i in range(n)]
    s = split(_series(n, 1, stamps), SplitSpec(mode="ett_months"), 96)
    assert s.bounds["train"] == (0, 8640)
    assert s.bounds["val"][1] - s.bounds["val"][0] == 2880 + 96
    assert s.bounds["test"] == (8640 + 2880 - 96, 8640 + 2880 * 2)


@settings(max_examples=40, deadline=None)
@given(st.integers(300, 2000), st.integers(4, 48), st.integers(1, 24))
def test_no_target_leakage_property(n, T, S):
    # row values equal row indices, so targets can be traced back to source rows
    s = split(_series(n, 1), SplitSpec(), T, S)
    tr_end = s.bounds["train"][1]
    va_end = s.bounds["val"][1]

    def targets(seg):
        _, it = sliding_windows(seg, T, S)
        rows = []
        for w in it:
            assert w.x[:, 0].max() < w.y[:, 0].min()
            rows.extend(int(v) for v in w.y[:, 0])
        return rows

    tr, va, te = targets(s.train), targets(s.val), targets(s.test)
    assert max(tr) < tr_end <= min(va) and max(va) < va_end <= min(te)


def test_synth_examples():
    a = synth_generate(3, 500, [[1 / 25]] * 3, 0.0, seed=3)
    for n in range(3):
        col = a.values[:, n]
        assert np.max(np.abs(frequency_filter(col, 1) - col)) <= 1e-9
    b = synth_generate(3, 500, [[1 / 25]] * 3, 0.0, seed=3)
    assert np.array_equal(a.values, b.values) and a.timestamps == b.timestamps
    noisy = synth_generate(3, 4000, [[1 / 25, 1 / 10]] * 3, 0.1, seed=3)
    clean = synth_generate(3, 4000, [[1 / 25, 1 / 10]] * 3, 0.0, seed=3)
    resid = noisy.values - clean.values
    assert abs(resid.std() - 0.1) <= 0.005


def test_csv_write_round_trip(tmp_path):
    s = synth_generate(2, 50, [[0.1], [0.05]], 0.1, seed=1, trend=0.01)
    write_csv(s, tmp_path / "s.csv")
    back = load_csv(tmp_path / "s.csv")
    assert np.array_equal(back.values, s.values) and back.timestamps == s.timestamps
