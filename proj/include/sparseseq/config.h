// Copyright 2026 The sparseseq Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Experiment configuration: a flat `key = value` text format.
//
// Keys are normalized before lookup (lower case, every run of characters
// other than letters and digits becomes one underscore), so a hyperparameter
// written as "word level embedding dropout" and "word_level_embedding_dropout"
// name the same field. Sweepable keys accept comma-separated lists, with or
// without surrounding brackets; ExpandSweep yields their cartesian product.

#ifndef SPARSESEQ_CONFIG_H_
#define SPARSESEQ_CONFIG_H_

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sparseseq/sparse_embedding.h"

namespace sparseseq {

// Bad key, bad value or missing mandatory field.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string NormalizeKey(std::string_view key);

struct ExperimentConfig {
  std::string task = "lm";  // lm | pos | recite
  std::string run_id = "run";
  std::vector<std::uint64_t> seeds;  // mandatory

  // Data. For `params` without data, vocab_size / num_tags stand in.
  std::string train_path;
  std::string valid_path;
  std::string test_path;
  std::size_t vocab_size = 0;
  std::size_t num_tags = 0;
  std::size_t min_count = 1;

  // Embedding.
  std::size_t embedding_size = 400;
  double embedding_density = 1.0;
  std::size_t embedding_bins = 0;  // 0: one bin per dimension
  std::vector<OrderStrategy> order_strategies = {OrderStrategy::kUp};
  double embedding_init = 0.1;

  // Recurrent stack (lm / recite). Layer n maps widths[n] -> widths[n+1]
  // with widths = {k, h, ..., h, k} when tie_weights, else {k, h, ..., h}.
  std::size_t hidden_size = 1150;
  std::size_t layers = 3;
  // Components per layer; one entry broadcasts to every layer.
  std::vector<std::size_t> segments = {1};
  // Input window fraction per layer (one entry broadcasts). Ignored for
  // layers whose budget is matched against a dense reference.
  std::vector<double> gamma = {1.0};
  // When both are set, every layer gets the gamma that equalizes its
  // parameter count with the same layer of a dense (k, h) stack.
  std::size_t match_dense_embedding = 0;
  std::size_t match_dense_hidden = 0;
  bool tie_weights = true;

  // POS tagger.
  std::size_t pos_hidden = 10;  // per direction
  std::size_t pos_dense = 10;

  // Optimization.
  std::string optimizer = "sgd";
  std::vector<double> learning_rates = {1.0};
  double momentum = 0.9;
  double lr_decay = 1.0;  // per-epoch multiplicative factor
  int epochs = 1;
  std::size_t batch_size = 20;
  std::size_t bptt = 35;
  // Global gradient-norm bound; 0 disables, negative picks the task default
  // (5 for lm / recite, disabled for pos).
  double clip_norm = -1.0;

  double EffectiveClipNorm() const;

  // Regularization.
  std::vector<double> word_dropout = {0.0};
  std::vector<double> variational_dropout = {0.0};
  std::vector<double> weight_drop = {0.0};

  // Outputs.
  std::string metrics_path;
  std::string checkpoint_dir;
  bool record_time = false;
  // Recite runs stop once memorization accuracy reaches this value, and the
  // sweep skips the remaining learning rates of that sweep point. Values
  // above 1 disable both.
  double stop_accuracy = 1.0;
  bool verbose = false;

  // Throws ConfigError.
  void Set(std::string_view key, std::string_view value);
  void Validate() const;
};

// Parses config text; `source` names the origin in error messages.
ExperimentConfig ParseConfig(std::string_view text,
                             const std::string& source = "<config>");
// Throws DataError when the file cannot be read, ConfigError otherwise.
ExperimentConfig LoadConfig(const std::string& path);
// Canonical text that ParseConfig reads back to an equal configuration.
std::string SerializeConfig(const ExperimentConfig& config);

// One point of the sweep grid.
struct RunSettings {
  std::uint64_t seed = 0;
  double learning_rate = 1.0;
  double word_dropout = 0.0;
  double variational_dropout = 0.0;
  double weight_drop = 0.0;
  OrderStrategy order = OrderStrategy::kUp;
  // Swept dimensions only, e.g. "lr=5;seed=2"; empty for a single run.
  std::string label;
};

// Cartesian product in a fixed order: order strategy, word dropout,
// variational dropout, weight drop, learning rate, seed (fastest).
std::vector<RunSettings> ExpandSweep(const ExperimentConfig& config);

// Copy of `config` pinned to a single sweep point.
ExperimentConfig PinSettings(const ExperimentConfig& config,
                             const RunSettings& settings);

}  // namespace sparseseq

#endif  // SPARSESEQ_CONFIG_H_
