import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import qmc

from hplandscape.space import (MAX_SOBOL_DIM, HyperparameterDef, SpaceError, build_space, load_space,
                               sobol_points, sobol_sample, unit_distance)


def test_build_space_from_table(dqn_space):
    assert dqn_space.n == 3
    assert dqn_space.names == ["learning_rate", "gamma", "exploration_final_eps"]


def test_minimal_space():
    assert build_space([("x", 0, 1, "linear")]).n == 1


@pytest.mark.parametrize("defs, msg", [
    ([("x", 1, 0, "linear")], "low >= high"),
    ([("x", 0.5, 0.5, "linear")], "low >= high"),
    ([("x", 0, 1, "log")], "log scale"),
    ([("x", 0, 1), ("x", 2, 3)], "duplicate"),
    ([("x", 0, 1, "cubic")], "unknown scale"),
    ([], "at least one"),
])
def test_build_space_errors(defs, msg):
    with pytest.raises(SpaceError, match=msg):
        build_space(defs)


def test_to_config_values(dqn_space):
    lr = build_space([HyperparameterDef("lr", 1e-4, 0.1, "log")])
    assert lr.to_config([0.5])[0] == pytest.approx(10 ** -2.5, rel=1e-12)
    assert dqn_space.to_config([0.3, 0.2, 0.0])[2] == 0.01
    assert dqn_space.to_config([0.3, 1.0, 0.0])[1] == 0.9999


def test_to_unit_values():
    s = build_space([("a", 0, 10, "linear"), ("b", 1e-4, 0.1, "log")])
    np.testing.assert_allclose(s.to_unit([2.5, 1e-4]), [0.25, 0.0], atol=1e-15)
    with pytest.raises(SpaceError):
        s.to_unit([11.0, 1e-3])


def test_round_trip(dqn_space):
    u = sobol_sample(dqn_space, 128, seed=7)
    c = dqn_space.to_config(u)
    back = dqn_space.to_config(dqn_space.to_unit(c))
    assert np.max(np.abs(back - c) / np.abs(c)) < 1e-12


@settings(max_examples=60, deadline=None)
@given(a=st.floats(0, 1), b=st.floats(0, 1))
def test_monotone(a, b):
    s = build_space([("lin", -3, 5, "linear"), ("log", 1e-5, 20, "log")])
    if abs(a - b) < 1e-9:  # below float resolution of the transform
        return
    lo, hi = min(a, b), max(a, b)
    assert np.all(s.to_config([lo, lo]) < s.to_config([hi, hi]))


def test_unit_distance():
    assert unit_distance([0, 0], [1, 1]) == pytest.approx(np.sqrt(2))
    assert unit_distance([0.3, 0.7], [0.3, 0.7]) == 0.0
    assert unit_distance([0.25, 0], [0.25, 0.5]) == 0.5
    with pytest.raises(SpaceError):
        unit_distance([0, 0], [0, 0, 0])


def test_sobol_first_points_1d(backend):
    np.testing.assert_array_equal(sobol_points(1, 5)[:, 0], [0.5, 0.75, 0.25, 0.375, 0.875])


@pytest.mark.parametrize("n", [1, 3, 8, MAX_SOBOL_DIM])
def test_sobol_matches_scipy_reference(n, backend):
    ref = qmc.Sobol(n, scramble=False).random_base2(10)[1:513]
    np.testing.assert_array_equal(sobol_points(n, 512), ref)


def test_sobol_dimension_limit():
    with pytest.raises(SpaceError, match="at most"):
        sobol_points(MAX_SOBOL_DIM + 1, 4)


def test_sobol_deterministic(dqn_space):
    a = sobol_sample(dqn_space, 128, seed=7)
    b = sobol_sample(dqn_space, 128, seed=7)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, sobol_sample(dqn_space, 128, seed=8))


def _dyadic_counts(pts, m):
    return [np.bincount(np.floor(pts[:, d] * 2 ** m).astype(int), minlength=2 ** m)
            for d in range(pts.shape[1])]


@pytest.mark.parametrize("k", [1, 4, 7, 9])
@pytest.mark.parametrize("seed", [None, 11])
def test_dyadic_balance_of_base_net(k, seed):
    pts = sobol_points(4, 2 ** k, seed=seed, skip=0)
    for m in range(1, k + 1):
        for c in _dyadic_counts(pts, m):
            assert np.all(c == 2 ** (k - m))


def test_halves_balanced_and_skip_off_by_one():
    base = sobol_points(3, 128, skip=0)
    assert all(np.sum(base[:, d] < 0.5) == 64 for d in range(3))
    # dropping the origin swaps one point, so counts move by at most one
    pts = sobol_points(3, 128)
    for m in range(1, 8):
        for c in _dyadic_counts(pts, m):
            assert np.max(np.abs(c - 2 ** (7 - m))) <= 1


def test_scrambled_points_in_half_open_cube():
    pts = sobol_points(5, 4096, seed=3)
    assert pts.min() >= 0 and pts.max() < 1
    assert not np.any(np.all(pts == 0, axis=1))


def test_load_space_file(tmp_path):
    p = tmp_path / "space.json"
    p.write_text(json.dumps({"dims": [{"name": "lr", "low": 1e-4, "high": 0.1, "scale": "log"}]}))
    assert load_space(p).dims[0].scale == "log"
    p.write_text("{not json")
    with pytest.raises(SpaceError):
        load_space(p)
