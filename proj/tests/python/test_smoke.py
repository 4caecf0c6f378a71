# Copyright 2026 The cpshap Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import itertools
import json
import math

import numpy as np
import pytest

import cpshap


def brute_shapley(v):
    d = int(math.log2(len(v)))
    phi = np.zeros(d)
    for order in itertools.permutations(range(d)):
        s = 0
        for j in order:
            phi[j] += v[s | (1 << j)] - v[s]
            s |= 1 << j
    return phi / math.factorial(d)


def test_version():
    assert cpshap.__version__ == "0.1.0"


def test_shapley_matches_permutation_average():
    rng = np.random.default_rng(1)
    v = rng.uniform(-10, 10, size=16)
    np.testing.assert_allclose(cpshap.shapley_exact(v), brute_shapley(v), atol=1e-12)


def test_proportional_two_players():
    # v(1)=1, v(2)=3, v(12)=6: surplus 2 split 1:3.
    phi = cpshap.proportional_shapley_exact(np.array([0.0, 1.0, 3.0, 6.0]))
    np.testing.assert_allclose(phi, [1.5, 4.5])


def test_dividends_round_trip():
    v = np.array([0.0, 1.0, 2.0, 5.0])
    np.testing.assert_allclose(cpshap.harsanyi_dividends(v), [0.0, 1.0, 2.0, 2.0])


def test_pmf_and_mc():
    assert cpshap.ps_permutation_pmf(np.array([1.0, 3.0]), [0, 1]) == pytest.approx(0.75)
    v = np.array([0.0, 1.0, 3.0, 6.0])
    est, se = cpshap.weber_mc(v, m=4000, seed=3, sampler="proportional")
    assert est.sum() == pytest.approx(6.0)
    assert np.all(np.abs(est - [1.5, 4.5]) <= 4 * se + 1e-12)


def test_errors_map_to_categories():
    with pytest.raises(cpshap.ConfigError):
        cpshap.shapley_exact(np.zeros(3))
    with pytest.raises(cpshap.NumericError):
        cpshap.proportional_shapley_exact(np.array([0.0, 0.0, 0.0, 1.0]))
    assert issubclass(cpshap.DataError, cpshap.CpshapError)


def test_attribute_is_efficient():
    x, y = cpshap.gen_sobol_levitan(700, seed=2, beta=[0.3, 0.2, 0.1])
    out = cpshap.attribute(x[:400], y[:400], x[400:600], y[400:600], x[600:605],
                           method="lacp", values=["width", "upper"])
    assert out["trained_count"] == 8
    assert out["intervals"].shape == (5, 2)
    for key in ("width/shap", "width/pshap", "upper/shap", "upper/pshap"):
        assert out[key].shape == (5, 3)
    full_width = out["intervals"][:, 1] - out["intervals"][:, 0]
    shap = out["width/shap"]
    pshap = out["width/pshap"]
    np.testing.assert_allclose(shap.sum(axis=1), pshap.sum(axis=1), rtol=1e-9)
    # Differences to the empty-coalition width are constant across points.
    baseline = full_width - shap.sum(axis=1)
    np.testing.assert_allclose(baseline, baseline[0], rtol=1e-6, atol=1e-9)


def test_friedman_shapes():
    x, y, var, mean = cpshap.gen_friedman_variant(100, seed=1)
    assert x.shape == (100, 11)
    assert y.shape == var.shape == mean.shape == (100,)
    assert np.all(var >= 1e-6)


def test_cli_round_trip(tmp_path):
    x, y = cpshap.gen_sobol_levitan(200, seed=4, beta=[0.3, 0.2])
    csv = tmp_path / "data.csv"
    np.savetxt(csv, np.column_stack([x, y]), delimiter=",", header="a,b,y", comments="")
    code, out, err = cpshap.run_cli(["attribute", "--data", str(csv), "--target", "y",
                                     "--max-test", "3", "--out-dir", str(tmp_path / "run")])
    assert code == 0, err
    doc = json.loads((tmp_path / "run" / "allocations.json").read_text())
    assert doc["feature_names"] == ["a", "b"]
    code, _, _ = cpshap.run_cli(["attribute", "--data", str(tmp_path / "none.csv"),
                                 "--target", "y"])
    assert code == 3
