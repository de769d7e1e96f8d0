"""Tests for synthetic generators, standardization, splits, and CSV I/O."""

import math

import numpy as np
import pytest

from splk.data import (
    FLUCTUATED_PRESETS,
    Dataset,
    augment_dimension,
    destandardize_mean,
    destandardize_variance,
    fluctuated_from_preset,
    gen_fluctuated,
    gen_gp_sample,
    load_csv,
    mse,
    save_csv,
    split,
    standardize,
    transform_inputs,
)
from splk.errors import InvalidInputError
from splk.kernel import KernelParams


# ---------------------------------------------------------------------------
# fluctuated generator


def test_preset_parameter_values():
    # frozen so an accidental edit to the preset table fails loudly
    assert FLUCTUATED_PRESETS["syn-3d"] == dict(
        d=3, p=(1.0, 1.0, -1.0), q=(0.2, 0.0, 0.0), c=0.3, a=-5.0, b=5.0)
    assert FLUCTUATED_PRESETS["syn-5d"] == dict(
        d=5, p=(1.0, -1.0, 1.0, 1.0, 1.0), q=(0.2, 0.0, 0.0, 0.0, 0.0),
        c=0.3, a=-2.0, b=2.0)


def test_fluctuated_core_at_origin_is_one():
    # with the box collapsed to the origin and no noise, every target is
    # exp(|0|^c) * cos(0) = 1 exactly
    data = gen_fluctuated(n=5, d=3, p=(1.0, 1.0, -1.0), q=(0.2, 0.0, 0.0),
                          c=0.3, a=0.0, b=0.0, seed=0, box=(0.0, 0.0))
    np.testing.assert_array_equal(data.y, np.ones(5))


def test_fluctuated_matches_scalar_reevaluation():
    """Re-derive every target with scalar math-module arithmetic."""
    data = fluctuated_from_preset("syn-3d", 1000, seed=5, noise=False)
    p = (1.0, 1.0, -1.0)
    q = (0.2, 0.0, 0.0)
    for i in range(data.n):
        dot_p = 0.0
        dot_q = 0.0
        for k in range(3):
            dot_p += p[k] * data.X[i, k]
            dot_q += q[k] * data.X[i, k]
        expected = math.exp(abs(dot_p) ** 0.3) * math.cos(dot_q)
        assert abs(expected - data.y[i]) <= 1e-12 * max(1.0, abs(expected))


def test_fluctuated_noise_within_bounds():
    noisy = fluctuated_from_preset("syn-3d", 2000, seed=7)
    clean = fluctuated_from_preset("syn-3d", 2000, seed=7, noise=False)
    # inputs are drawn before the noise, so both calls share them exactly
    np.testing.assert_array_equal(noisy.X, clean.X)
    eps = noisy.y - clean.y
    assert np.all(eps >= -5.0 - 1e-9)
    assert np.all(eps <= 5.0 + 1e-9)
    assert np.std(eps) > 1.0  # the noise was actually applied
    assert abs(np.mean(eps)) < 3 * (10 / math.sqrt(12)) / math.sqrt(2000)


def test_fluctuated_equal_bounds_mean_constant_shift():
    base = gen_fluctuated(n=50, d=2, p=(1.0, 1.0), q=(0.5, 0.0), c=0.5,
                          a=0.0, b=0.0, seed=11)
    shifted = gen_fluctuated(n=50, d=2, p=(1.0, 1.0), q=(0.5, 0.0), c=0.5,
                             a=2.0, b=2.0, seed=11)
    np.testing.assert_array_equal(shifted.y, base.y + 2.0)


def test_fluctuated_determinism_and_meta():
    a = fluctuated_from_preset("syn-5d", 200, seed=3)
    b = fluctuated_from_preset("syn-5d", 200, seed=3)
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.y, b.y)
    c = fluctuated_from_preset("syn-5d", 200, seed=4)
    assert not np.array_equal(a.y, c.y)
    assert np.all(a.X >= 0.0) and np.all(a.X <= 10.0)
    assert a.meta["generator"] == "fluctuated"
    assert a.meta["p"] == (1.0, -1.0, 1.0, 1.0, 1.0)
    assert a.meta["seed"] == 3


def test_fluctuated_validation():
    ok = dict(n=10, d=2, p=(1.0, 1.0), q=(0.0, 0.0), c=0.3, a=-1.0, b=1.0, seed=0)
    with pytest.raises(InvalidInputError):
        gen_fluctuated(**{**ok, "p": (1.0,)})
    with pytest.raises(InvalidInputError):
        gen_fluctuated(**{**ok, "q": (0.0, 0.0, 0.0)})
    with pytest.raises(InvalidInputError):
        gen_fluctuated(**{**ok, "a": 2.0})  # a > b
    with pytest.raises(InvalidInputError):
        gen_fluctuated(**{**ok, "c": 0.0})
    with pytest.raises(InvalidInputError):
        gen_fluctuated(**{**ok, "n": 0})


def test_unknown_preset_rejected():
    with pytest.raises(InvalidInputError, match="unknown preset"):
        fluctuated_from_preset("syn-9d", 10, seed=0)


def test_preset_noise_toggle_matches_explicit_bounds():
    quiet = fluctuated_from_preset("syn-3d", 40, seed=2, noise=False)
    explicit = gen_fluctuated(n=40, d=3, p=(1.0, 1.0, -1.0), q=(0.2, 0.0, 0.0),
                              c=0.3, a=0.0, b=0.0, seed=2)
    np.testing.assert_array_equal(quiet.y, explicit.y)


# ---------------------------------------------------------------------------
# GP-sample generator


def test_gp_sample_determinism_and_meta():
    params = KernelParams(signal_variance=1.0, lengthscales=[2.0, 2.0],
                          noise_variance=0.1)
    a = gen_gp_sample(60, 2, params, seed=17)
    b = gen_gp_sample(60, 2, params, seed=17)
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.y, b.y)
    assert a.meta["generator"] == "gp-sample"
    assert a.meta["lengthscales"] == (2.0, 2.0)
    assert np.all(a.X >= 0.0) and np.all(a.X <= 10.0)


def test_gp_sample_refuses_oversized_requests():
    params = KernelParams(signal_variance=1.0, lengthscales=[1.0],
                          noise_variance=0.1)
    with pytest.raises(InvalidInputError, match="capped"):
        gen_gp_sample(8001, 1, params, seed=0)
    with pytest.raises(InvalidInputError):
        gen_gp_sample(0, 1, params, seed=0)


def test_gp_sample_noise_dominated_variance():
    # with a vanishing signal the draw is i.i.d. noise; the sample variance
    # of n points should land within a few standard errors of the noise level
    params = KernelParams(signal_variance=1e-12, lengthscales=[1.0],
                          noise_variance=1.0)
    data = gen_gp_sample(3000, 1, params, seed=21)
    v = float(np.var(data.y, ddof=1))
    se = math.sqrt(2.0 / 2999)
    assert abs(v - 1.0) < 3 * se


def test_gp_sample_long_lengthscale_is_nearly_constant():
    params = KernelParams(signal_variance=1.0, lengthscales=[1e5],
                          noise_variance=1e-12)
    data = gen_gp_sample(200, 1, params, seed=22)
    # an independent sample would span ~6 units; a lengthscale far beyond the
    # box forces all values to (numerically) coincide
    assert np.ptp(data.y) < 0.2


# ---------------------------------------------------------------------------
# dimension augmentation


def test_augment_shift_is_exact():
    params = KernelParams(signal_variance=1.0, lengthscales=[2.0, 2.0],
                          noise_variance=0.1)
    base = gen_gp_sample(120, 2, params, seed=9)
    big = Dataset(X=base.X, y=100.0 * base.y)  # wide span: no warning expected
    aug = augment_dimension(big, a=-50.0, b=50.0, seed=3)
    z = aug.X[:, -1]
    assert aug.d == 3
    np.testing.assert_array_equal(aug.X[:, :2], big.X)
    np.testing.assert_array_equal(aug.y, big.y + (-2.5) * np.abs(np.cos(z)))
    assert np.all(z >= -50.0) and np.all(z <= 50.0)
    assert aug.meta["augmented"] == dict(a=-50.0, b=50.0, g="neg-abs-cos", seed=3)


def test_augment_warns_when_shift_rivals_target_span():
    small = Dataset(X=np.linspace(0.0, 1.0, 50)[:, None],
                    y=np.linspace(0.0, 1.0, 50))
    with pytest.warns(UserWarning, match="augmentation shift"):
        augment_dimension(small, seed=0)


def test_augment_custom_callable_and_columns():
    rng = np.random.default_rng(14)
    named = Dataset(X=rng.uniform(0, 1, size=(10, 2)), y=rng.uniform(size=10),
                    columns=["u", "v", "t"])
    aug = augment_dimension(named, a=0.0, b=1.0, g=lambda z: 0.0 * z, seed=1)
    np.testing.assert_array_equal(aug.y, named.y)
    assert aug.columns == ["u", "v", "x3", "t"]
    assert aug.meta["augmented"]["g"] == "custom"


def test_augment_validation():
    data = Dataset(X=np.zeros((5, 1)), y=np.arange(5.0))
    with pytest.raises(InvalidInputError, match="unknown shift"):
        augment_dimension(data, g="pos-abs-sin")
    with pytest.raises(InvalidInputError):
        augment_dimension(data, a=1.0, b=1.0)


# ---------------------------------------------------------------------------
# splits and metrics


def test_split_sizes_and_coverage():
    params = KernelParams(signal_variance=1.0, lengthscales=[2.0, 2.0],
                          noise_variance=0.1)
    data = gen_gp_sample(100, 2, params, seed=13)
    train, test = split(data, frac=0.9, seed=4)
    assert train.n == 90 and test.n == 10
    # every original row appears exactly once across the two sides
    both = np.vstack([np.column_stack([train.X, train.y]),
                      np.column_stack([test.X, test.y])])
    orig = np.column_stack([data.X, data.y])
    np.testing.assert_array_equal(both[np.lexsort(both.T)],
                                  orig[np.lexsort(orig.T)])
    again = split(data, frac=0.9, seed=4)
    np.testing.assert_array_equal(train.X, again[0].X)
    np.testing.assert_array_equal(test.y, again[1].y)


def test_split_rounds_train_count_up():
    params = KernelParams(signal_variance=1.0, lengthscales=[1.0],
                          noise_variance=0.1)
    data = gen_gp_sample(7, 1, params, seed=3)
    train, test = split(data, frac=0.5)
    assert train.n == 4 and test.n == 3


def test_split_validation():
    data = Dataset(X=np.arange(10.0)[:, None], y=np.arange(10.0))
    for frac in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(InvalidInputError):
            split(data, frac=frac)
    lone = Dataset(X=[[0.0]], y=[0.5])
    with pytest.raises(InvalidInputError, match="empty side"):
        split(lone, frac=0.5)


def test_mse_values():
    assert mse([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0
    assert mse([2.0, 3.0], [1.0, 2.0]) == 1.0
    assert mse([1.0, 2.0], [3.0, 0.0]) == 4.0  # (4 + 4) / 2
    with pytest.raises(InvalidInputError):
        mse([1.0, 2.0], [1.0])
    with pytest.raises(InvalidInputError):
        mse([], [])


# ---------------------------------------------------------------------------
# standardization


def test_standardize_targets():
    rng = np.random.default_rng(31)
    data = Dataset(X=rng.uniform(0, 10, size=(80, 2)),
                   y=3.0 + 5.0 * rng.standard_normal(80))
    out, rec = standardize(data)
    assert abs(np.mean(out.y)) < 1e-12
    assert abs(np.std(out.y) - 1.0) < 1e-12
    np.testing.assert_array_equal(out.X, data.X)  # inputs untouched by default
    np.testing.assert_allclose(destandardize_mean(out.y, rec), data.y,
                               rtol=0, atol=1e-12)
    np.testing.assert_allclose(destandardize_variance(np.ones(3), rec),
                               np.full(3, rec.y_scale ** 2))


def test_standardize_inputs_and_transform():
    rng = np.random.default_rng(32)
    data = Dataset(X=rng.uniform(-3, 9, size=(60, 3)), y=rng.standard_normal(60))
    out, rec = standardize(data, inputs=True)
    np.testing.assert_allclose(np.mean(out.X, axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(np.std(out.X, axis=0), 1.0, atol=1e-12)
    # queries transformed with the record reproduce the fitted inputs exactly
    np.testing.assert_array_equal(transform_inputs(data.X, rec), out.X)
    np.testing.assert_array_equal(transform_inputs(data.X, None), data.X)


def test_standardize_constant_target_keeps_unit_scale():
    data = Dataset(X=np.arange(20.0)[:, None], y=np.full(20, 3.7))
    out, rec = standardize(data)
    assert rec.y_scale == 1.0
    np.testing.assert_array_equal(out.y, np.zeros(20))
    np.testing.assert_array_equal(destandardize_mean(out.y, rec), data.y)


# ---------------------------------------------------------------------------
# CSV


def test_csv_round_trip_bit_identical(tmp_path):
    params = KernelParams(signal_variance=1.0, lengthscales=[2.0, 2.0, 2.0],
                          noise_variance=0.1)
    data = gen_gp_sample(50, 3, params, seed=17)
    path = tmp_path / "sample.csv"
    save_csv(data, path, config=dict(preset="syn-3d", n=50, seed=17))
    text = path.read_text()
    assert text.startswith("# preset = syn-3d\n# n = 50\n# seed = 17\n")
    loaded = load_csv(path)
    np.testing.assert_array_equal(loaded.X, data.X)  # 17 digits round-trip
    np.testing.assert_array_equal(loaded.y, data.y)
    assert loaded.columns == ["x1", "x2", "x3", "y"]


def test_csv_target_column_selection(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("a,b,c\n1,2,3\n4,5,6\n")
    by_name = load_csv(path, target_column="b")
    np.testing.assert_array_equal(by_name.X, [[1.0, 3.0], [4.0, 6.0]])
    np.testing.assert_array_equal(by_name.y, [2.0, 5.0])
    assert by_name.columns == ["a", "c", "b"]
    by_index = load_csv(path, target_column=1)
    np.testing.assert_array_equal(by_index.y, by_name.y)
    by_negative = load_csv(path, target_column=-2)
    np.testing.assert_array_equal(by_negative.y, by_name.y)
    by_default = load_csv(path)
    np.testing.assert_array_equal(by_default.y, [3.0, 6.0])


def test_csv_skips_comments_and_blanks(tmp_path):
    path = tmp_path / "c.csv"
    path.write_text("# produced by hand\nx1,y\n\n0.5,1.5\n# mid-file note\n2.5,3.5\n\n")
    data = load_csv(path)
    assert data.n == 2
    np.testing.assert_array_equal(data.X, [[0.5], [2.5]])
    np.testing.assert_array_equal(data.y, [1.5, 3.5])


def test_csv_parse_error_names_line_and_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x1,x2,y\n1,2,3\n4,oops,6\n")
    with pytest.raises(InvalidInputError, match=r"line 3, column 2: cannot parse 'oops'"):
        load_csv(path)


def test_csv_drops_nonfinite_rows_with_warning(tmp_path):
    path = tmp_path / "nf.csv"
    path.write_text("x1,y\n1,2\nnan,4\n5,inf\n7,8\n")
    with pytest.warns(UserWarning, match=r"lines \[3, 4\]"):
        data = load_csv(path)
    assert data.n == 2
    np.testing.assert_array_equal(data.y, [2.0, 8.0])

    allbad = tmp_path / "allbad.csv"
    allbad.write_text("x1,y\nnan,1\n2,nan\n")
    with pytest.warns(UserWarning):
        with pytest.raises(InvalidInputError, match="non-finite"):
            load_csv(allbad)


def test_csv_headerless_mode(tmp_path):
    path = tmp_path / "nh.csv"
    path.write_text("1,2,3\n4,5,6\n")
    data = load_csv(path, has_header=False)
    assert data.d == 2
    assert data.columns == ["x1", "x2", "x3"]
    np.testing.assert_array_equal(data.y, [3.0, 6.0])


def test_csv_structural_errors(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(InvalidInputError, match="not in header"):
        load_csv(path, target_column="z")
    with pytest.raises(InvalidInputError, match="out of range"):
        load_csv(path, target_column=5)

    ragged = tmp_path / "ragged.csv"
    ragged.write_text("a,b\n1,2,3\n")
    with pytest.raises(InvalidInputError, match="header has 2 columns"):
        load_csv(ragged)

    empty = tmp_path / "empty.csv"
    empty.write_text("# only a comment\n")
    with pytest.raises(InvalidInputError, match="no data rows"):
        load_csv(empty)


# ---------------------------------------------------------------------------
# container validation


def test_dataset_validation():
    with pytest.raises(InvalidInputError, match="disagree on size"):
        Dataset(X=np.zeros((3, 2)), y=np.zeros(4))
    with pytest.raises(InvalidInputError, match="empty"):
        Dataset(X=np.empty((0, 2)), y=np.empty(0))
    bad = np.zeros((3, 2))
    bad[1, 0] = np.nan
    with pytest.raises(InvalidInputError, match="non-finite"):
        Dataset(X=bad, y=np.zeros(3))
    with pytest.raises(InvalidInputError, match="column names"):
        Dataset(X=np.zeros((3, 2)), y=np.zeros(3), columns=["a", "y"])
