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

#include "cli.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "sparseseq/config.h"
#include "sparseseq/corpus_io.h"
#include "sparseseq/errors.h"
#include "sparseseq/models.h"
#include "sparseseq/sparse_embedding.h"
#include "sparseseq/sparsity_plan.h"
#include "sparseseq/tasks.h"

namespace sparseseq {
namespace {

std::string Grouped(std::int64_t n) {
  std::string digits = std::to_string(n < 0 ? -n : n);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i && (digits.size() - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return n < 0 ? "-" + out : out;
}

std::string Millions(std::int64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2fM", static_cast<double>(n) / 1e6);
  return buf;
}

// Config file plus command-line overrides shared by the model subcommands.
struct ConfigOptions {
  std::string path;
  std::vector<std::string> sets;
  std::string task, train, valid, test, metrics, checkpoint_dir, seed, lr;
  std::string epochs, vocab_size;
  bool verbose = false;

  void Register(CLI::App* app, bool require_path) {
    auto* p = app->add_option("config", path, "Experiment config file");
    if (require_path) p->required();
    app->add_option("--set", sets, "Override a config key (key=value)")
        ->take_all();
    app->add_option("--task", task, "lm, pos or recite");
    app->add_option("--train", train, "Training split path");
    app->add_option("--valid", valid, "Validation split path");
    app->add_option("--test", test, "Test split path");
    app->add_option("--metrics", metrics, "Metrics CSV path (default stdout)");
    app->add_option("--checkpoint-dir", checkpoint_dir,
                    "Directory for best checkpoints");
    app->add_option("--seed", seed, "Seed or comma-separated seeds");
    app->add_option("--lr", lr, "Learning rate(s)");
    app->add_option("--epochs", epochs, "Training epochs");
    app->add_option("--vocab-size", vocab_size,
                    "Vocabulary size when no corpus is given");
    app->add_flag("--verbose", verbose, "Per-epoch progress on stderr");
  }

  ExperimentConfig Load() const {
    ExperimentConfig c = path.empty() ? ExperimentConfig{} : LoadConfig(path);
    for (const std::string& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("--set expects key=value, got '" + kv + "'");
      }
      c.Set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    const std::pair<const char*, const std::string*> flags[] = {
        {"task", &task},         {"train_path", &train},
        {"valid_path", &valid},  {"test_path", &test},
        {"metrics_path", &metrics}, {"checkpoint_dir", &checkpoint_dir},
        {"seed", &seed},         {"learning_rate", &lr},
        {"epochs", &epochs},     {"vocab_size", &vocab_size},
    };
    for (const auto& [key, value] : flags) {
      if (!value->empty()) c.Set(key, *value);
    }
    if (verbose) c.verbose = true;
    return c;
  }
};

void PrintPlan(std::ostream& out, const RecurrentSparsityPlan& plan) {
  out << SerializePlan(plan);
  out << "component,input_offset,input_width,output_width,params\n";
  for (std::size_t n = 0; n < plan.components.size(); ++n) {
    const ComponentSpec& c = plan.components[n];
    RecurrentSparsityPlan one{c.input_width, c.output_width,
                              {{0, c.input_width, c.output_width}}};
    out << n << "," << c.input_offset << "," << c.input_width << ","
        << c.output_width << "," << CountLstmParams(one) << "\n";
  }
  out << "window " << plan.components[0].input_width << "\n"
      << "params " << CountLstmParams(plan) << "\n";
}

int CmdPlan(std::ostream& out, std::size_t i, std::size_t h, std::size_t n,
            double gamma, std::size_t match_hidden, std::size_t match_input,
            const ConfigOptions& copts) {
  if (!copts.path.empty()) {
    const ExperimentConfig c = copts.Load();
    c.Validate();
    const auto plans = LmLayerPlans(c);
    for (std::size_t l = 0; l < plans.size(); ++l) {
      out << "layer " << l << "\n";
      PrintPlan(out, plans[l]);
    }
    return kExitOk;
  }
  if (i == 0 || h == 0) throw ConfigError("plan needs --i and --h");
  RecurrentSparsityPlan plan;
  if (match_hidden > 0) {
    const std::size_t di = match_input > 0 ? match_input : match_hidden;
    const double g = SolveGammaForEqualParams(di, match_hidden, i, h, n);
    plan = PlanRecurrentLayer(i, h, n, g);
    out << "gamma " << std::setprecision(8) << g << "\n";
    PrintPlan(out, plan);
    const std::int64_t dense = CountDenseLstmParams(di, match_hidden);
    out << "dense_params " << dense << "\n"
        << "difference " << CountLstmParams(plan) - dense << "\n";
  } else {
    plan = PlanRecurrentLayer(i, h, n, gamma);
    out << "gamma " << std::setprecision(8) << gamma << "\n";
    PrintPlan(out, plan);
  }
  return kExitOk;
}

int CmdSolveAlpha(std::ostream& out, std::size_t k, double delta,
                  std::size_t bins, std::size_t vocab,
                  const std::string& csv_path, const std::string& corpus,
                  const std::string& order) {
  const std::vector<std::size_t> widths =
      bins == 0 ? PerDimensionBins(k) : UniformBins(k, bins);
  std::vector<std::int64_t> freqs;
  std::vector<int> ranks;
  if (!corpus.empty()) {
    VocabOptions opts;
    opts.strategy = ParseOrderStrategy(order);
    const Vocabulary v = Vocabulary::Build(ReadTokens(corpus), opts);
    vocab = v.size();
    freqs = v.frequencies();
  } else {
    freqs.assign(vocab, 0);
  }
  ranks.resize(vocab);
  for (std::size_t r = 0; r < vocab; ++r) ranks[r] = static_cast<int>(r);
  const EmbeddingAllocation a = AllocateForDensity(vocab, k, delta, widths);
  out << std::setprecision(6) << "alpha " << a.alpha << "\n"
      << "vocab_size " << vocab << "\n"
      << "params " << a.TotalParams() << " target "
      << std::llround(delta * static_cast<double>(vocab * k)) << "\n"
      << "realized_density " << a.RealizedDensity() << "\n";
  out << "bin,width,words,fraction\n";
  for (std::size_t m = 0; m < widths.size(); ++m) {
    out << m << "," << widths[m] << "," << a.bin_word_counts[m] << ","
        << static_cast<double>(a.bin_word_counts[m]) /
               static_cast<double>(vocab)
        << "\n";
  }
  if (!csv_path.empty()) {
    std::ofstream f(csv_path);
    if (!f) throw DataError("cannot write " + csv_path);
    WriteAllocationCsv(f, a, ranks, freqs);
  }
  return kExitOk;
}

int CmdParams(std::ostream& out, const ConfigOptions& copts) {
  ExperimentConfig c = copts.Load();
  c.Validate();
  std::size_t vocab = c.vocab_size;
  std::size_t tags = c.num_tags;
  if (vocab == 0 || (c.task == "pos" && tags == 0)) {
    const TaskData data = LoadTaskData(c);
    const auto runs = ExpandSweep(c);
    const Vocabulary v = BuildVocabulary(c, data, runs.at(0));
    if (vocab == 0) vocab = v.size();
    if (c.task == "pos" && tags == 0) {
      tags = TagSet::Build(data.train_sentences).size();
    }
  }
  Rng rng(c.seeds.at(0));
  std::vector<ParamGroup> table;
  if (c.task == "pos") {
    table = PosTagger(c, vocab, tags, rng).ParamTable();
  } else {
    table = LmModel(c, vocab, rng).ParamTable();
  }
  std::size_t width = 5;
  for (const auto& g : table) width = std::max(width, g.name.size());
  for (const auto& g : table) {
    out << std::left << std::setw(static_cast<int>(width) + 2) << g.name
        << std::right << std::setw(14) << Grouped(g.count) << "  " << g.detail
        << "\n";
  }
  const std::int64_t total = TotalCount(table);
  out << std::left << std::setw(static_cast<int>(width) + 2) << "total"
      << std::right << std::setw(14) << Grouped(total) << "  "
      << Millions(total) << "\n";
  return kExitOk;
}

int CmdTrain(std::ostream& out, std::ostream& err, ConfigOptions copts,
             bool force_recite) {
  if (force_recite) copts.task = "recite";
  const ExperimentConfig c = copts.Load();
  c.Validate();
  const TaskData data = LoadTaskData(c);
  std::unique_ptr<std::ofstream> file;
  std::ostream* sink = &out;
  if (!c.metrics_path.empty()) {
    file = std::make_unique<std::ofstream>(c.metrics_path);
    if (!*file) throw DataError("cannot write " + c.metrics_path);
    sink = file.get();
  }
  MetricsWriter metrics(*sink);
  const SweepResult result = RunSweep(c, data, &metrics, &err);
  if (!result.runs.empty()) {
    const RunSummary& best = result.runs[result.best];
    err << "best run: " << best.run_id << " (epoch " << best.best_epoch;
    if (c.task == "recite") {
      err << ", memorization " << best.best_accuracy;
    } else {
      err << ", valid loss " << best.best_loss;
    }
    err << ")\n";
  }
  if (result.any_diverged) {
    err << "error: at least one run diverged\n";
    return kExitDivergence;
  }
  return kExitOk;
}

int CmdEval(std::ostream& out, const std::string& dir,
            const std::string& split, const std::string& data) {
  const MetricsRow row = EvaluateCheckpoint(dir, split, data);
  out << kMetricsHeader << "\n" << FormatMetricsRow(row) << "\n";
  return kExitOk;
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"Sparse recurrent and embedding layers: planners and "
               "experiment harnesses"};
  app.name("sparseseq");
  app.require_subcommand(1);

  std::size_t plan_i = 0, plan_h = 0, plan_n = 1, match_h = 0, match_i = 0;
  double plan_gamma = 1.0;
  ConfigOptions plan_cfg;
  auto* plan = app.add_subcommand("plan", "Plan one sparse LSTM layer");
  plan->set_help_flag("--help", "Print this help message and exit");
  plan->add_option("config", plan_cfg.path,
                   "Config whose layer plans to print instead");
  plan->add_option("--i", plan_i, "Input size");
  plan->add_option("--h", plan_h, "Hidden size");
  plan->add_option("--n", plan_n, "Number of components");
  plan->add_option("--gamma", plan_gamma, "Input window fraction");
  plan->add_option("--match-dense", match_h,
                   "Match the budget of a dense layer with this hidden size");
  plan->add_option("--match-dense-input", match_i,
                   "Dense reference input size (default: --match-dense)");

  std::size_t sa_k = 0, sa_bins = 0, sa_vocab = 10000;
  double sa_delta = 1.0;
  std::string sa_csv, sa_corpus, sa_order = "up";
  auto* solve = app.add_subcommand(
      "solve-alpha", "Solve the embedding decay factor for a density");
  solve->add_option("--k", sa_k, "Embedding size")->required();
  solve->add_option("--delta", sa_delta, "Target density")->required();
  solve->add_option("--bins", sa_bins, "Equal-width bins (0: per dimension)");
  solve->add_option("--vocab", sa_vocab, "Vocabulary size");
  solve->add_option("--corpus", sa_corpus,
                    "Take vocabulary and frequencies from this text file");
  solve->add_option("--order", sa_order, "up, down or none (with --corpus)");
  solve->add_option("--csv", sa_csv, "Write word_rank,frequency,length rows");

  ConfigOptions params_cfg, train_cfg, recite_cfg;
  auto* params = app.add_subcommand("params", "Print a parameter table");
  params_cfg.Register(params, false);
  auto* train = app.add_subcommand("train", "Train (sweeping list values)");
  train_cfg.Register(train, true);
  auto* recite = app.add_subcommand(
      "recite", "Train a memorization run and report recitation accuracy");
  recite_cfg.Register(recite, true);

  std::string ev_dir, ev_split = "test", ev_data;
  auto* eval = app.add_subcommand("eval", "Evaluate a saved checkpoint");
  eval->add_option("checkpoint", ev_dir, "Checkpoint directory")->required();
  eval->add_option("--split", ev_split, "train, valid or test");
  eval->add_option("--data", ev_data, "Override the split's data path");

  std::vector<std::string> rest(args.rbegin(), args.rend() - 1);
  try {
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    if (app.exit(e, out, err) == 0) return kExitOk;
    err << app.help();
    return kExitUsage;
  }

  try {
    if (*plan) {
      return CmdPlan(out, plan_i, plan_h, plan_n, plan_gamma, match_h, match_i,
                     plan_cfg);
    }
    if (*solve) {
      return CmdSolveAlpha(out, sa_k, sa_delta, sa_bins, sa_vocab, sa_csv,
                           sa_corpus, sa_order);
    }
    if (*params) return CmdParams(out, params_cfg);
    if (*train) return CmdTrain(out, err, train_cfg, false);
    if (*recite) return CmdTrain(out, err, recite_cfg, true);
    if (*eval) return CmdEval(out, ev_dir, ev_split, ev_data);
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const DivergenceError& e) {
    err << "diverged: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const InfeasibleError& e) {
    err << "infeasible: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace sparseseq
