import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pfnet.data import SeriesMatrix, SplitSpec, build_samples, difference, load_csv, normalize, window_view, write_manifest
from pfnet.errors import ContractError, DataError, EmptySplitError, ParseError


def _write(tmp_path, text, name="d.txt"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_load_csv_transposes(tmp_path):
    s = load_csv(_write(tmp_path, "1.0,2.0\n3.0,4.0\n"))
    assert (s.n, s.T) == (2, 2)
    assert s.values.tolist() == [[1.0, 3.0], [2.0, 4.0]]
    assert s.scale.tolist() == [1.0, 1.0]


def test_load_tsv(tmp_path):
    assert load_csv(_write(tmp_path, "1\t2\n3\t4\n")).values.tolist() == [[1.0, 3.0], [2.0, 4.0]]


def test_load_csv_errors(tmp_path):
    with pytest.raises(ParseError) as err:
        load_csv(_write(tmp_path, "1.0,abc\n"))
    assert (err.value.line, err.value.column) == (1, 2)
    with pytest.raises(ParseError, match="line 2"):
        load_csv(_write(tmp_path, "1,2\n3\n"))
    with pytest.raises(DataError, match="empty"):
        load_csv(_write(tmp_path, ""))


def test_exchange_rate_shaped_file(tmp_path):
    rng = np.random.default_rng(0)
    rows = "\n".join(",".join(f"{v:.6f}" for v in r) for r in rng.uniform(0.1, 2, size=(30, 8)))
    assert load_csv(_write(tmp_path, rows + "\n")).n == 8


def test_normalize_example():
    s = normalize(SeriesMatrix([[1.0, 5.0, 10.0]]), train_fraction=2 / 3)
    np.testing.assert_allclose(s.values, [[0.2, 1.0, 2.0]])
    assert s.scale.tolist() == [5.0]


def test_normalize_zero_variable_and_round_trip(rng):
    raw = np.vstack([np.zeros(20), rng.normal(size=20) * 7])
    s = normalize(SeriesMatrix(raw), 0.6)
    assert s.scale[0] == 1.0
    np.testing.assert_array_equal(s.values[0], 0.0)
    assert np.abs(s.denormalize() - raw).max() < 1e-12


def test_normalize_uses_train_prefix_only():
    s = normalize(SeriesMatrix([[1.0, 2.0, 100.0, 100.0, 100.0]]), 0.4)
    assert s.scale.tolist() == [2.0]


def test_difference_examples():
    assert difference([1.0, 3.0, 6.0, 10.0]).tolist() == [2.0, 3.0, 4.0]
    assert difference(np.full(5, 3.3)).tolist() == [0.0] * 4
    with pytest.raises(ContractError):
        difference([1.0])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=50))
def test_difference_cumsum_round_trip(xs):
    x = np.array(xs)
    rebuilt = np.concatenate([[x[0]], x[0] + np.cumsum(difference(x))])
    assert np.abs(rebuilt - x).max() <= 1e-9


def test_build_samples_hand_example():
    s = SeriesMatrix([[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]])
    samples = build_samples(s, 2, 1, SplitSpec(0.6, 0.2, 0.2))
    first = samples.train[0]
    assert first.anchor == 1  # t=2 in one-based time
    assert first.raw_window.tolist() == [[1.0, 2.0]]
    assert first.diff_window.tolist() == [[1.0]]
    assert first.last_obs.tolist() == [2.0]
    assert first.target_trend.tolist() == [2.0]
    assert first.target_fluct.tolist() == [1.0]
    assert first.target_final.tolist() == [3.0]


def _count_by_enumeration(T, P, h):
    return sum(1 for t in range(T) if t - P + 1 >= 0 and t + h <= T - 1)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 12), st.integers(1, 6), st.integers(0, 40), st.integers(0, 1000))
def test_sample_invariants(P, h, extra, seed):
    T = 5 * (P + h) + extra
    rng = np.random.default_rng(seed)
    s = SeriesMatrix(rng.normal(size=(2, T)))
    samples = build_samples(s, P, h)
    sets = [samples.train, samples.valid, samples.test]
    assert sum(len(x) for x in sets) == T - P - h + 1 == _count_by_enumeration(T, P, h)
    for x in sets:
        np.testing.assert_array_equal(x.final, x.trend + x.fluct)
        assert np.abs(x.final - x.trend - x.fluct).max() <= 4 * np.finfo(float).eps * max(1.0, np.abs(x.final).max())
        np.testing.assert_array_equal(x.diff, x.raw[:, :, 1:] - x.raw[:, :, :-1])
        np.testing.assert_array_equal(x.last, x.raw[:, :, -1])
        # the window ends at the anchor, so inputs stop at index t <= t+h-1
        np.testing.assert_array_equal(x.last, s.values[:, x.anchors].T)
        np.testing.assert_array_equal(x.trend, s.values[:, x.anchors + h - 1].T)
    targets = [x.anchors + h for x in sets]
    assert targets[0].max() < targets[1].min() and targets[1].max() < targets[2].min()
    if h == 1:
        np.testing.assert_array_equal(samples.train.trend, samples.train.last)


def test_build_samples_starved_split_named():
    s = SeriesMatrix(np.arange(12.0)[None])
    with pytest.raises(EmptySplitError) as err:
        build_samples(s, 8, 2)
    assert err.value.split in ("train", "valid", "test")
    with pytest.raises(EmptySplitError):
        build_samples(SeriesMatrix(np.arange(4.0)[None]), 3, 2)


def test_split_spec_validation():
    with pytest.raises(ContractError):
        SplitSpec(0.5, 0.5, 0.5)
    with pytest.raises(ContractError):
        SplitSpec(1.0, 0.0, 0.0)


def test_batches_contiguous_and_shuffled(rng):
    s = SeriesMatrix(rng.normal(size=(1, 400)))
    train = build_samples(s, 4, 2).train
    plain = [b.anchors for b in train.batches(50)]
    assert [len(a) for a in plain][-1] == len(train) % 50 or len(train) % 50 == 0
    shuffled = [b.anchors for b in train.batches(50, np.random.default_rng(0))]
    assert sorted(map(tuple, shuffled)) == sorted(map(tuple, plain))
    for a in shuffled:
        assert np.all(np.diff(a) == 1)


def test_window_view_counts(rng):
    v = rng.normal(size=(3, 20))
    w = window_view(v, 5)
    assert w.shape == (16, 3, 5)
    np.testing.assert_array_equal(w[-1], v[:, -5:])


def test_manifest(tmp_path, rng):
    s = normalize(SeriesMatrix(rng.normal(size=(2, 100))))
    samples = build_samples(s, 8, 3)
    path = tmp_path / "m.txt"
    write_manifest(path, samples, s.scale)
    text = path.read_text()
    assert "window 8" in text and "horizon 3" in text and text.count("_anchors") == 3
