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

// Training and evaluation harnesses for the lm, pos and recite tasks.

#ifndef SPARSESEQ_TASKS_H_
#define SPARSESEQ_TASKS_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sparseseq/config.h"
#include "sparseseq/corpus_io.h"
#include "sparseseq/models.h"

namespace sparseseq {

inline constexpr const char* kMetricsHeader =
    "run_id,task,epoch,split,loss,perplexity,accuracy,lr,seconds";

struct MetricsRow {
  std::string run_id;
  std::string task;
  int epoch = 0;
  std::string split;
  double loss = 0.0;
  bool has_perplexity = false;  // written as exp(loss)
  std::optional<double> accuracy;
  double lr = 0.0;
  double seconds = 0.0;
};

std::string FormatMetricsRow(const MetricsRow& row);

// Writes the header on construction and one line per row. Each line is
// flushed so an aborted run keeps every row written so far.
class MetricsWriter {
 public:
  explicit MetricsWriter(std::ostream& out);
  void Write(const MetricsRow& row);

 private:
  std::ostream& out_;
};

// Raw corpora; which fields are filled depends on the task.
struct TaskData {
  std::vector<std::string> train_tokens;
  std::vector<std::string> valid_tokens;
  std::vector<std::string> test_tokens;
  std::vector<TaggedSentence> train_sentences;
  std::vector<TaggedSentence> valid_sentences;
  std::vector<TaggedSentence> test_sentences;
};

// Throws DataError when a required split is missing or unreadable.
TaskData LoadTaskData(const ExperimentConfig& config);

Vocabulary BuildVocabulary(const ExperimentConfig& config,
                           const TaskData& data, const RunSettings& settings);

// Dropout-free passes. LM evaluation carries state across batches.
CrossEntropyStats EvaluateLm(LmModel& model, std::span<const LmBatch> batches);
CrossEntropyStats EvaluatePos(PosTagger& model,
                              std::span<const TagBatch> batches);
// Greedy next-token accuracy over every target position of `batches`
// (normally the training batches), state carried from batch to batch.
double ReciteAccuracy(LmModel& model, std::span<const LmBatch> batches);

struct RunSummary {
  std::string run_id;
  RunSettings settings;
  std::int64_t num_params = 0;
  int epochs_run = 0;
  int best_epoch = 0;
  // Selection metric source: validation split (lm / pos) or the
  // memorization pass over the training data (recite).
  double best_loss = 0.0;
  double best_accuracy = 0.0;
  std::optional<double> test_loss;
  std::optional<double> test_accuracy;
  bool diverged = false;
  std::string message;
};

// One run at one sweep point. Divergence is reported in the summary after
// a diagnostic metrics row, not thrown.
RunSummary TrainRun(const ExperimentConfig& config,
                    const RunSettings& settings, const TaskData& data,
                    MetricsWriter* metrics, std::ostream* log = nullptr);

struct SweepResult {
  std::vector<RunSummary> runs;
  std::size_t best = 0;  // index into runs
  bool any_diverged = false;
};

// Runs every sweep point sequentially. For recite, a run that reaches
// stop_accuracy skips the remaining learning rates of its sweep point.
// The best run has the highest memorization accuracy (recite) or the
// lowest validation loss (lm / pos).
SweepResult RunSweep(const ExperimentConfig& config, const TaskData& data,
                     MetricsWriter* metrics, std::ostream* log = nullptr);

// Evaluates a checkpoint written by TrainRun on `split` (train, valid or
// test; recite checkpoints report memorization on train). The split's path
// comes from the stored config unless `data_path` is non-empty.
MetricsRow EvaluateCheckpoint(const std::string& dir, const std::string& split,
                              const std::string& data_path = "");

}  // namespace sparseseq

#endif  // SPARSESEQ_TASKS_H_
