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

#include "sparseseq/tasks.h"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

#include "sparseseq/checkpoint.h"
#include "sparseseq/errors.h"
#include "sparseseq/optimization.h"

namespace sparseseq {
namespace {

constexpr std::uint64_t kNoiseStream = 0x9e3779b97f4a7c15ULL;

std::string Number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

double MeanLoss(const CrossEntropyStats& s) {
  return s.count ? s.total_nll / static_cast<double>(s.count) : 0.0;
}

double Accuracy(const CrossEntropyStats& s) {
  return s.count ? static_cast<double>(s.correct) / static_cast<double>(s.count)
                 : 0.0;
}

std::vector<Tensor> Snapshot(std::span<Parameter* const> params) {
  std::vector<Tensor> out;
  for (const Parameter* p : params) out.push_back(p->value);
  return out;
}

void Restore(std::span<Parameter* const> params,
             const std::vector<Tensor>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

// One optimizer update from `loss`. Throws DivergenceError.
double Update(Tape& tape, Var loss, std::span<Parameter* const> params,
              Optimizer& optimizer, double lr, double clip) {
  const double value = loss.value()[0];
  if (!std::isfinite(value)) {
    throw DivergenceError("non-finite training loss " + Number(value));
  }
  for (Parameter* p : params) p->ZeroGrad();
  tape.Backward(loss);
  if (clip > 0.0) ClipGradients(params, clip);
  optimizer.Step(params, lr);
  return value;
}

std::string CheckpointDirFor(const ExperimentConfig& config,
                             const RunSettings& settings) {
  if (config.checkpoint_dir.empty()) return "";
  if (settings.label.empty()) return config.checkpoint_dir;
  std::string sub;
  for (char c : settings.label) {
    sub += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' ||
            c == '-')
               ? c
               : '_';
  }
  return config.checkpoint_dir + "/" + sub;
}

void WriteText(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) throw DataError("cannot write " + path);
}

std::string ReadText(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void SaveRunFiles(const std::string& dir, const ExperimentConfig& pinned,
                  const Vocabulary& vocab, const TagSet* tags) {
  WriteText(dir + "/config.txt", SerializeConfig(pinned));
  std::ostringstream v;
  vocab.Write(v);
  WriteText(dir + "/vocab.txt", v.str());
  if (tags) {
    std::string t;
    for (const auto& tag : tags->tags()) t += tag + "\n";
    WriteText(dir + "/tags.txt", t);
  }
}

TagSet TagSetFromList(const std::vector<std::string>& tags) {
  TaggedSentence s;
  s.tokens = tags;
  s.tags = tags;
  const TaggedSentence one[] = {s};
  return TagSet::Build(one);
}

std::vector<std::string> FlattenTokens(
    const std::vector<TaggedSentence>& sentences) {
  std::vector<std::string> out;
  for (const auto& s : sentences) {
    out.insert(out.end(), s.tokens.begin(), s.tokens.end());
  }
  return out;
}

class Clock {
 public:
  explicit Clock(bool enabled)
      : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}
  double Seconds() const {
    if (!enabled_) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  bool enabled_;
  std::chrono::steady_clock::time_point start_;
};

struct RunContext {
  const ExperimentConfig& config;  // pinned
  const RunSettings& settings;
  MetricsWriter* metrics;
  std::ostream* log;
  Clock clock;
  RunSummary summary;

  void Row(int epoch, const std::string& split, double loss,
           bool perplexity, std::optional<double> accuracy, double lr) {
    if (!metrics) return;
    MetricsRow row;
    row.run_id = config.run_id;
    row.task = config.task;
    row.epoch = epoch;
    row.split = split;
    row.loss = loss;
    row.has_perplexity = perplexity;
    row.accuracy = accuracy;
    row.lr = lr;
    row.seconds = clock.Seconds();
    metrics->Write(row);
  }

  void Log(const std::string& line) {
    if (log && config.verbose) *log << config.run_id << ": " << line << "\n";
  }
};

DropoutSpec SpecFor(const RunSettings& s) {
  DropoutSpec spec;
  spec.word_embedding_p = s.word_dropout;
  spec.variational_p = s.variational_dropout;
  spec.weight_drop_p = s.weight_drop;
  spec.Validate();
  return spec;
}

bool AnyNoise(const DropoutSpec& spec) {
  return spec.word_embedding_p > 0.0 || spec.variational_p > 0.0 ||
         spec.weight_drop_p > 0.0;
}

std::vector<LmBatch> LmBatchesFor(const Vocabulary& vocab,
                                  const std::vector<std::string>& tokens,
                                  const ExperimentConfig& config) {
  if (tokens.empty()) return {};
  const std::vector<int> ids = vocab.Numericalize(tokens);
  return MakeLmBatches(ids, config.batch_size, config.bptt);
}

void TrainLm(RunContext& ctx, const TaskData& data) {
  const ExperimentConfig& config = ctx.config;
  const RunSettings& s = ctx.settings;
  const bool recite = config.task == "recite";
  const Vocabulary vocab = BuildVocabulary(config, data, s);
  const auto train = LmBatchesFor(vocab, data.train_tokens, config);
  const auto valid = recite ? std::vector<LmBatch>{}
                            : LmBatchesFor(vocab, data.valid_tokens, config);
  const auto test = recite ? std::vector<LmBatch>{}
                           : LmBatchesFor(vocab, data.test_tokens, config);

  Rng init_rng(s.seed);
  Rng noise_rng(s.seed ^ kNoiseStream);
  LmModel model(config, vocab.size(), init_rng);
  const std::vector<Parameter*> params = model.Parameters();
  auto optimizer = MakeOptimizer(config.optimizer, config.momentum);
  const DropoutSpec spec = SpecFor(s);
  const TrainNoise noise{spec, &noise_rng};
  const TrainNoise* noise_ptr = AnyNoise(spec) ? &noise : nullptr;
  const double clip = config.EffectiveClipNorm();
  const std::string ckpt = CheckpointDirFor(config, s);

  RunSummary& sum = ctx.summary;
  sum.num_params = model.NumParams();
  sum.best_loss = std::numeric_limits<double>::infinity();
  sum.best_accuracy = -1.0;
  std::vector<Tensor> best;
  double best_lr = s.learning_rate;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = ExpDecay(s.learning_rate, config.lr_decay, epoch - 1);
    std::vector<LstmState> state = model.InitialState(config.batch_size);
    CrossEntropyStats tr;
    try {
      for (const LmBatch& b : train) {
        Tape tape;
        Var loss = model.Forward(tape, b, state, noise_ptr, &tr);
        Update(tape, loss, params, *optimizer, lr, clip);
      }
    } catch (const DivergenceError& e) {
      ctx.Row(epoch, "diverged", std::numeric_limits<double>::quiet_NaN(),
              false, std::nullopt, lr);
      sum.diverged = true;
      sum.message = "epoch " + std::to_string(epoch) + ": " + e.what();
      sum.epochs_run = epoch;
      return;
    }
    sum.epochs_run = epoch;
    ctx.Row(epoch, "train", MeanLoss(tr), true, std::nullopt, lr);

    bool improved = false;
    std::string note;
    if (recite) {
      const CrossEntropyStats ev = EvaluateLm(model, train);
      const double acc = Accuracy(ev);
      ctx.Row(epoch, "recite", MeanLoss(ev), true, acc, lr);
      improved = acc > sum.best_accuracy;
      if (improved) {
        sum.best_accuracy = acc;
        sum.best_loss = MeanLoss(ev);
      }
      note = "recite accuracy " + Number(acc);
    } else {
      const CrossEntropyStats ev =
          EvaluateLm(model, valid.empty() ? train : valid);
      const double loss = MeanLoss(ev);
      ctx.Row(epoch, valid.empty() ? "train_eval" : "valid", loss, true,
              std::nullopt, lr);
      improved = loss < sum.best_loss;
      if (improved) {
        sum.best_loss = loss;
        sum.best_accuracy = Accuracy(ev);
      }
      note = "valid ppl " + Number(std::exp(loss));
    }
    ctx.Log("epoch " + std::to_string(epoch) + " lr " + Number(lr) +
            " train loss " + Number(MeanLoss(tr)) + ", " + note);
    if (improved) {
      sum.best_epoch = epoch;
      best = Snapshot(params);
      best_lr = lr;
      if (!ckpt.empty()) {
        WriteCheckpoint(ckpt, config.task, model.Plans(), params);
        SaveRunFiles(ckpt, config, vocab, nullptr);
      }
    }
    if (recite && sum.best_accuracy >= config.stop_accuracy) {
      break;
    }
  }
  if (!test.empty() && !best.empty()) {
    Restore(params, best);
    const CrossEntropyStats ev = EvaluateLm(model, test);
    sum.test_loss = MeanLoss(ev);
    ctx.Row(sum.best_epoch, "test", MeanLoss(ev), true, std::nullopt, best_lr);
  }
}

void TrainPos(RunContext& ctx, const TaskData& data) {
  const ExperimentConfig& config = ctx.config;
  const RunSettings& s = ctx.settings;
  const Vocabulary vocab = BuildVocabulary(config, data, s);
  const TagSet tags = TagSet::Build(data.train_sentences);
  const auto train = EncodeTagged(data.train_sentences, vocab, tags);
  const auto valid_enc = EncodeTagged(data.valid_sentences, vocab, tags);
  const auto test_enc = EncodeTagged(data.test_sentences, vocab, tags);
  const auto valid = MakeTagBatches(valid_enc, config.batch_size);
  const auto test = MakeTagBatches(test_enc, config.batch_size);

  Rng init_rng(s.seed);
  Rng noise_rng(s.seed ^ kNoiseStream);
  PosTagger model(config, vocab.size(), tags.size(), init_rng);
  const std::vector<Parameter*> params = model.Parameters();
  auto optimizer = MakeOptimizer(config.optimizer, config.momentum);
  const DropoutSpec spec = SpecFor(s);
  const TrainNoise noise{spec, &noise_rng};
  const TrainNoise* noise_ptr = AnyNoise(spec) ? &noise : nullptr;
  const double clip = config.EffectiveClipNorm();
  const std::string ckpt = CheckpointDirFor(config, s);

  RunSummary& sum = ctx.summary;
  sum.num_params = model.NumParams();
  sum.best_loss = std::numeric_limits<double>::infinity();
  std::vector<Tensor> best;
  double best_lr = s.learning_rate;
  std::vector<std::size_t> order(train.size());

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = ExpDecay(s.learning_rate, config.lr_decay, epoch - 1);
    std::iota(order.begin(), order.end(), std::size_t{0});
    noise_rng.Shuffle(order);
    const auto batches = MakeTagBatches(train, config.batch_size, order);
    CrossEntropyStats tr;
    try {
      for (const TagBatch& b : batches) {
        Tape tape;
        Var loss = model.Forward(tape, b, noise_ptr, &tr);
        Update(tape, loss, params, *optimizer, lr, clip);
      }
    } catch (const DivergenceError& e) {
      ctx.Row(epoch, "diverged", std::numeric_limits<double>::quiet_NaN(),
              false, std::nullopt, lr);
      sum.diverged = true;
      sum.message = "epoch " + std::to_string(epoch) + ": " + e.what();
      sum.epochs_run = epoch;
      return;
    }
    sum.epochs_run = epoch;
    ctx.Row(epoch, "train", MeanLoss(tr), false, Accuracy(tr), lr);
    const CrossEntropyStats ev = EvaluatePos(model, valid);
    ctx.Row(epoch, "valid", MeanLoss(ev), false, Accuracy(ev), lr);
    ctx.Log("epoch " + std::to_string(epoch) + " train loss " +
            Number(MeanLoss(tr)) + ", valid acc " + Number(Accuracy(ev)));
    if (MeanLoss(ev) < sum.best_loss) {
      sum.best_loss = MeanLoss(ev);
      sum.best_accuracy = Accuracy(ev);
      sum.best_epoch = epoch;
      best = Snapshot(params);
      best_lr = lr;
      if (!ckpt.empty()) {
        WriteCheckpoint(ckpt, config.task, model.Plans(), params);
        SaveRunFiles(ckpt, config, vocab, &tags);
      }
    }
  }
  if (!test.empty() && !best.empty()) {
    Restore(params, best);
    const CrossEntropyStats ev = EvaluatePos(model, test);
    sum.test_loss = MeanLoss(ev);
    sum.test_accuracy = Accuracy(ev);
    ctx.Row(sum.best_epoch, "test", MeanLoss(ev), false, Accuracy(ev),
            best_lr);
  }
}

}  // namespace

std::string FormatMetricsRow(const MetricsRow& row) {
  std::string out = row.run_id + "," + row.task + "," +
                    std::to_string(row.epoch) + "," + row.split + "," +
                    Number(row.loss) + ",";
  if (row.has_perplexity) out += Number(std::exp(row.loss));
  out += ",";
  if (row.accuracy) out += Number(*row.accuracy);
  out += "," + Number(row.lr) + "," + Number(row.seconds);
  return out;
}

MetricsWriter::MetricsWriter(std::ostream& out) : out_(out) {
  out_ << kMetricsHeader << "\n" << std::flush;
}

void MetricsWriter::Write(const MetricsRow& row) {
  out_ << FormatMetricsRow(row) << "\n" << std::flush;
}

TaskData LoadTaskData(const ExperimentConfig& config) {
  TaskData data;
  auto need = [&](const std::string& path, const char* key) {
    if (path.empty()) {
      throw DataError(std::string("task ") + config.task + " needs " + key);
    }
  };
  need(config.train_path, "train_path");
  if (config.task == "pos") {
    need(config.valid_path, "valid_path");
    data.train_sentences = LoadTaggedCorpus(config.train_path);
    data.valid_sentences = LoadTaggedCorpus(config.valid_path);
    if (!config.test_path.empty()) {
      data.test_sentences = LoadTaggedCorpus(config.test_path);
    }
    return data;
  }
  data.train_tokens = ReadTokens(config.train_path);
  if (config.task == "lm") {
    need(config.valid_path, "valid_path");
    data.valid_tokens = ReadTokens(config.valid_path);
    if (!config.test_path.empty()) {
      data.test_tokens = ReadTokens(config.test_path);
    }
  }
  return data;
}

Vocabulary BuildVocabulary(const ExperimentConfig& config,
                           const TaskData& data, const RunSettings& settings) {
  VocabOptions opts;
  opts.min_count = config.min_count;
  opts.strategy = settings.order;
  opts.seed = settings.seed;
  if (config.task == "pos") {
    opts.add_eos = false;
    return Vocabulary::Build(FlattenTokens(data.train_sentences), opts);
  }
  return Vocabulary::Build(data.train_tokens, opts);
}

CrossEntropyStats EvaluateLm(LmModel& model, std::span<const LmBatch> batches) {
  CrossEntropyStats stats;
  if (batches.empty()) return stats;
  std::vector<LstmState> state = model.InitialState(batches[0].batch);
  for (const LmBatch& b : batches) {
    Tape tape;
    model.Forward(tape, b, state, nullptr, &stats);
  }
  return stats;
}

CrossEntropyStats EvaluatePos(PosTagger& model,
                              std::span<const TagBatch> batches) {
  CrossEntropyStats stats;
  for (const TagBatch& b : batches) {
    Tape tape;
    model.Forward(tape, b, nullptr, &stats);
  }
  return stats;
}

double ReciteAccuracy(LmModel& model, std::span<const LmBatch> batches) {
  return Accuracy(EvaluateLm(model, batches));
}

RunSummary TrainRun(const ExperimentConfig& config,
                    const RunSettings& settings, const TaskData& data,
                    MetricsWriter* metrics, std::ostream* log) {
  config.Validate();
  const ExperimentConfig pinned = PinSettings(config, settings);
  RunContext ctx{pinned, settings, metrics, log, Clock(config.record_time),
                 {}};
  ctx.summary.run_id = pinned.run_id;
  ctx.summary.settings = settings;
  if (config.task == "pos") {
    TrainPos(ctx, data);
  } else {
    TrainLm(ctx, data);
  }
  return ctx.summary;
}

SweepResult RunSweep(const ExperimentConfig& config, const TaskData& data,
                     MetricsWriter* metrics, std::ostream* log) {
  config.Validate();
  SweepResult result;
  using Key = std::tuple<int, double, double, double, std::uint64_t>;
  std::set<Key> memorized;
  for (const RunSettings& s : ExpandSweep(config)) {
    const Key key{static_cast<int>(s.order), s.word_dropout,
                  s.variational_dropout, s.weight_drop, s.seed};
    if (config.task == "recite" && memorized.count(key)) {
      if (log) *log << "skipping " << s.label << " (stop_accuracy reached)\n";
      continue;
    }
    RunSummary r = TrainRun(config, s, data, metrics, log);
    if (log) {
      *log << r.run_id << ": params " << r.num_params << ", epochs "
           << r.epochs_run << ", best epoch " << r.best_epoch;
      if (config.task == "recite") {
        *log << ", best memorization " << Number(r.best_accuracy);
      } else {
        *log << ", best valid loss " << Number(r.best_loss);
        if (config.task == "pos") {
          *log << " (accuracy " << Number(r.best_accuracy) << ")";
        }
      }
      if (r.test_accuracy) *log << ", test accuracy " << Number(*r.test_accuracy);
      if (r.test_loss && config.task == "lm") {
        *log << ", test ppl " << Number(std::exp(*r.test_loss));
      }
      if (r.diverged) *log << ", DIVERGED (" << r.message << ")";
      *log << "\n";
    }
    if (config.task == "recite" && r.best_accuracy >= config.stop_accuracy) {
      memorized.insert(key);
    }
    result.any_diverged |= r.diverged;
    result.runs.push_back(std::move(r));
  }
  for (std::size_t i = 1; i < result.runs.size(); ++i) {
    const RunSummary& a = result.runs[i];
    const RunSummary& b = result.runs[result.best];
    const bool better = config.task == "recite"
                            ? a.best_accuracy > b.best_accuracy
                            : a.best_loss < b.best_loss;
    if (better) result.best = i;
  }
  return result;
}

MetricsRow EvaluateCheckpoint(const std::string& dir, const std::string& split,
                              const std::string& data_path) {
  ExperimentConfig config = ParseConfig(ReadText(dir + "/config.txt"),
                                        dir + "/config.txt");
  config.Validate();
  std::istringstream vocab_text(ReadText(dir + "/vocab.txt"));
  const Vocabulary vocab = Vocabulary::Read(vocab_text);
  const std::string& stored = split == "train"   ? config.train_path
                              : split == "valid" ? config.valid_path
                              : split == "test"  ? config.test_path
                                                 : throw ConfigError(
                                                       "split must be train, "
                                                       "valid or test");
  const std::string path = data_path.empty() ? stored : data_path;
  if (path.empty()) throw DataError("no data path for split " + split);

  MetricsRow row;
  row.run_id = config.run_id;
  row.task = config.task;
  row.split = split;
  row.lr = config.learning_rates.at(0);
  Rng rng(0);
  if (config.task == "pos") {
    std::istringstream tag_text(ReadText(dir + "/tags.txt"));
    std::vector<std::string> tag_list;
    for (std::string t; std::getline(tag_text, t);) {
      if (!t.empty()) tag_list.push_back(t);
    }
    const TagSet tags = TagSetFromList(tag_list);
    PosTagger model(config, vocab.size(), tags.size(), rng);
    const auto params = model.Parameters();
    ReadCheckpoint(dir, config.task, model.Plans(), params);
    model.Renormalize();
    const auto enc = EncodeTagged(LoadTaggedCorpus(path), vocab, tags);
    const auto batches = MakeTagBatches(enc, config.batch_size);
    const CrossEntropyStats ev = EvaluatePos(model, batches);
    row.loss = MeanLoss(ev);
    row.accuracy = Accuracy(ev);
    return row;
  }
  LmModel model(config, vocab.size(), rng);
  const auto params = model.Parameters();
  ReadCheckpoint(dir, config.task, model.Plans(), params);
  model.Renormalize();
  const auto batches = LmBatchesFor(vocab, ReadTokens(path), config);
  const CrossEntropyStats ev = EvaluateLm(model, batches);
  row.loss = MeanLoss(ev);
  row.has_perplexity = true;
  if (config.task == "recite") row.accuracy = Accuracy(ev);
  return row;
}

}  // namespace sparseseq
