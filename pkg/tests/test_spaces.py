import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from supround.errors import SuproundError, ValidationError
from supround.spaces import (
    IntervalRadial,
    MarginalSpace,
    ProductSpace,
    interval_grid,
    iter_indices,
    load_space,
    product_distance,
    radial_maximal,
    save_space,
    space_from_dict,
)


def open_ball_oracle(d, w, r):
    return min(float(np.sum(w[d[i] < r])) for i in range(len(w)))


def test_radial_five_point_grid():
    X = interval_grid(5, rule="uniform")
    assert radial_maximal(X, 0.25) == pytest.approx(0.2, abs=1e-15)


def test_radial_zero_and_beyond_diameter():
    X = interval_grid(7)
    assert radial_maximal(X, 0.0) == 0.0
    assert radial_maximal(X, X.diameter * 1.01) == pytest.approx(1.0, abs=1e-12)


def test_radial_rejects_negative_radius():
    with pytest.raises(ValidationError):
        radial_maximal(interval_grid(3), -0.1)


@given(st.integers(2, 9), st.integers(0, 10_000), st.floats(0.0, 3.0))
def test_radial_matches_enumeration(n, seed, r):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 2, size=(n, 2))
    w = rng.uniform(0.1, 1.0, n)
    X = MarginalSpace(pts, w / w.sum(), "euclidean")
    assert radial_maximal(X, r) == pytest.approx(open_ball_oracle(X.distances, X.weights, r), abs=1e-14)


def test_radial_is_left_continuous_step():
    X = interval_grid(4)
    d = 1.0 / 3
    # open ball: radius exactly d does not reach the neighbour
    assert radial_maximal(X, d) == pytest.approx(X.weights[0])
    assert radial_maximal(X, d + 1e-9) == pytest.approx(X.weights[0] + X.weights[1])


def test_interval_radial():
    f = IntervalRadial(2.0)
    assert f(1.0) == 0.5
    assert f(5.0) == 1.0


def test_product_distance_examples():
    two = MarginalSpace([0.0, 1.0], [0.5, 0.5])
    X = ProductSpace([two, two])
    assert product_distance(X, (0, 0), (0, 0)) == 0.0
    assert product_distance(X, (0, 0), (1, 1)) == 2.0
    g = MarginalSpace([0.0, 0.1, 0.3, 0.6], [0.25] * 4)
    Y = ProductSpace([g, g, g])
    assert product_distance(Y, (0, 0, 0), (1, 2, 3)) == pytest.approx(0.1 + 0.3 + 0.6)
    assert product_distance(Y, (0, 1, 0), (0, 3, 3)) == pytest.approx(0.5 + 0.6)


def test_product_distance_out_of_range():
    X = ProductSpace([interval_grid(3), interval_grid(3)])
    with pytest.raises(IndexError):
        product_distance(X, (0, 3), (0, 0))


@pytest.mark.parametrize(
    "weights, fragment",
    [([0.5, 0.6], "sum"), ([1.0, 0.0], "positive"), ([0.5], "length")],
)
def test_weight_validation(weights, fragment):
    with pytest.raises(ValidationError, match=fragment):
        MarginalSpace([0.0, 1.0], weights)


def test_explicit_metric_checks():
    w = [1 / 3] * 3
    good = [[0, 1, 2], [1, 0, 1], [2, 1, 0]]
    assert MarginalSpace([[0], [1], [2]], w, "explicit", good).diameter == 2
    bad = [[0, 1, 5], [1, 0, 1], [5, 1, 0]]
    with pytest.raises(ValidationError, match="triangle"):
        MarginalSpace([[0], [1], [2]], w, "explicit", bad)
    asym = [[0, 1, 2], [1, 0, 1], [2, 2, 0]]
    with pytest.raises(ValidationError, match=r"distances\[1\]\[2\]"):
        MarginalSpace([[0], [1], [2]], w, "explicit", asym)


def test_space_file_roundtrip(tmp_path):
    X = interval_grid(6, -1.0, 2.0)
    path = tmp_path / "x.json"
    save_space(X, path)
    Y = load_space(path)
    np.testing.assert_array_equal(X.points, Y.points)
    np.testing.assert_array_equal(X.weights, Y.weights)


def test_space_file_errors(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"points": [0, 1], "weights": [0.5, 0.5]}))
    with pytest.raises(ValidationError, match="metric"):
        load_space(path)
    path.write_text("{not json")
    with pytest.raises(SuproundError):
        load_space(path)
    with pytest.raises(ValidationError, match="index|positive"):
        space_from_dict({"points": [0, 1, 2], "weights": [0.5, 0.6, -0.1], "metric": "absolute-difference"})


def test_product_needs_two_factors():
    with pytest.raises(ValidationError):
        ProductSpace([interval_grid(3)])


def test_weight_tensor_and_indices():
    X = ProductSpace([interval_grid(3), interval_grid(4, rule="uniform")])
    W = X.weight_tensor()
    assert W.shape == (3, 4)
    assert W.sum() == pytest.approx(1.0)
    assert len(list(iter_indices(X.shape))) == 12
