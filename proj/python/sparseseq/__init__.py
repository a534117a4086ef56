# Copyright 2026 The sparseseq Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Predefined sparse LSTMs and word embeddings (C++ core)."""

from sparseseq._core import (
    ComponentSpec,
    DataError,
    DivergenceError,
    EmbeddingAllocation,
    ExperimentConfig,
    InfeasibleError,
    RecurrentSparsityPlan,
    SparseLstmLayer,
    allocate_for_density,
    count_dense_lstm_params,
    dense_plan,
    evaluate_checkpoint,
    load_config,
    normalize_key,
    param_table,
    parse_config,
    per_dimension_bins,
    plan_matching_dense,
    plan_recurrent_layer,
    run_cli,
    solve_alpha,
    solve_gamma_for_equal_params,
    train,
    uniform_bins,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
