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

"""Shapley attribution of conformal prediction intervals."""

from ._core import (
    ConfigError,
    CpshapError,
    DataError,
    NumericError,
    __version__,
    attribute,
    gen_friedman_variant,
    gen_sobol_levitan,
    harsanyi_dividends,
    proportional_shapley_exact,
    ps_permutation_pmf,
    run_cli,
    shapley_exact,
    weber_mc,
)

__all__ = [
    "ConfigError",
    "CpshapError",
    "DataError",
    "NumericError",
    "__version__",
    "attribute",
    "gen_friedman_variant",
    "gen_sobol_levitan",
    "harsanyi_dividends",
    "proportional_shapley_exact",
    "ps_permutation_pmf",
    "run_cli",
    "shapley_exact",
    "weber_mc",
]
