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

#include "sparseseq/config.h"

#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "sparseseq/errors.h"

namespace sparseseq {
namespace {

std::string Trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> SplitList(std::string_view value) {
  std::string v = Trim(value);
  if (v.size() >= 2 && v.front() == '[' && v.back() == ']') {
    v = v.substr(1, v.size() - 2);
  }
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    item = Trim(item);
    if (item.empty()) throw ConfigError("empty list item in '" + v + "'");
    out.push_back(item);
  }
  if (out.empty()) throw ConfigError("empty value");
  return out;
}

double ToDouble(const std::string& s) {
  // Fractions such as "1/3".
  if (const auto slash = s.find('/'); slash != std::string::npos) {
    const double den = ToDouble(s.substr(slash + 1));
    if (den == 0.0) throw ConfigError("zero denominator in '" + s + "'");
    return ToDouble(s.substr(0, slash)) / den;
  }
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("expected a number, got '" + s + "'");
  }
  return v;
}

std::uint64_t ToUnsigned(const std::string& s) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

bool ToBool(const std::string& s) {
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw ConfigError("expected a boolean, got '" + s + "'");
}

std::string Single(std::string_view value) {
  auto items = SplitList(value);
  if (items.size() != 1) {
    throw ConfigError("expected a single value, got '" + Trim(value) + "'");
  }
  return items[0];
}

template <typename T, typename F>
std::vector<T> ListOf(std::string_view value, F convert) {
  std::vector<T> out;
  for (const std::string& s : SplitList(value)) out.push_back(convert(s));
  return out;
}

std::string Num(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

template <typename T, typename F>
std::string Join(const std::vector<T>& items, F format) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ",";
    out += format(items[i]);
  }
  return out;
}

using Setter = std::function<void(ExperimentConfig&, std::string_view)>;

const std::map<std::string, Setter>& Setters() {
  static const auto* table = [] {
    auto* m = new std::map<std::string, Setter>;
    auto& t = *m;
    auto size = [](std::size_t ExperimentConfig::*f) {
      return [f](ExperimentConfig& c, std::string_view v) {
        c.*f = static_cast<std::size_t>(ToUnsigned(Single(v)));
      };
    };
    auto real = [](double ExperimentConfig::*f) {
      return [f](ExperimentConfig& c, std::string_view v) {
        c.*f = ToDouble(Single(v));
      };
    };
    auto text = [](std::string ExperimentConfig::*f) {
      return [f](ExperimentConfig& c, std::string_view v) {
        c.*f = Trim(v);
      };
    };
    // Enumerated words such as "Adam" or "POS" are case-insensitive.
    auto word = [](std::string ExperimentConfig::*f) {
      return [f](ExperimentConfig& c, std::string_view v) {
        std::string s = Trim(v);
        for (char& ch : s) {
          ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        }
        c.*f = s;
      };
    };
    auto flag = [](bool ExperimentConfig::*f) {
      return [f](ExperimentConfig& c, std::string_view v) {
        c.*f = ToBool(Single(v));
      };
    };
    auto reals = [](std::vector<double> ExperimentConfig::*f) {
      return [f](ExperimentConfig& c, std::string_view v) {
        c.*f = ListOf<double>(v, ToDouble);
      };
    };
    t["task"] = word(&ExperimentConfig::task);
    t["run_id"] = text(&ExperimentConfig::run_id);
    t["seed"] = [](ExperimentConfig& c, std::string_view v) {
      c.seeds = ListOf<std::uint64_t>(v, ToUnsigned);
    };
    t["train_path"] = text(&ExperimentConfig::train_path);
    t["valid_path"] = text(&ExperimentConfig::valid_path);
    t["test_path"] = text(&ExperimentConfig::test_path);
    t["vocab_size"] = size(&ExperimentConfig::vocab_size);
    t["num_tags"] = size(&ExperimentConfig::num_tags);
    t["min_count"] = size(&ExperimentConfig::min_count);
    t["embedding_size"] = size(&ExperimentConfig::embedding_size);
    t["embedding_density"] = real(&ExperimentConfig::embedding_density);
    t["embedding_bins"] = size(&ExperimentConfig::embedding_bins);
    t["order_strategy"] = [](ExperimentConfig& c, std::string_view v) {
      c.order_strategies = ListOf<OrderStrategy>(v, [](const std::string& s) {
        try {
          return ParseOrderStrategy(s);
        } catch (const std::invalid_argument& e) {
          throw ConfigError(e.what());
        }
      });
    };
    t["embedding_init"] = real(&ExperimentConfig::embedding_init);
    t["hidden_size"] = size(&ExperimentConfig::hidden_size);
    t["layers"] = size(&ExperimentConfig::layers);
    t["segments"] = [](ExperimentConfig& c, std::string_view v) {
      c.segments = ListOf<std::size_t>(v, [](const std::string& s) {
        return static_cast<std::size_t>(ToUnsigned(s));
      });
    };
    t["gamma"] = reals(&ExperimentConfig::gamma);
    t["match_dense_embedding"] =
        size(&ExperimentConfig::match_dense_embedding);
    t["match_dense_hidden"] = size(&ExperimentConfig::match_dense_hidden);
    t["tie_weights"] = flag(&ExperimentConfig::tie_weights);
    t["pos_hidden"] = size(&ExperimentConfig::pos_hidden);
    t["pos_dense"] = size(&ExperimentConfig::pos_dense);
    t["optimizer"] = word(&ExperimentConfig::optimizer);
    t["learning_rate"] = reals(&ExperimentConfig::learning_rates);
    t["momentum"] = real(&ExperimentConfig::momentum);
    t["lr_decay"] = real(&ExperimentConfig::lr_decay);
    t["epochs"] = [](ExperimentConfig& c, std::string_view v) {
      c.epochs = static_cast<int>(ToUnsigned(Single(v)));
    };
    t["batch_size"] = size(&ExperimentConfig::batch_size);
    t["bptt"] = size(&ExperimentConfig::bptt);
    t["clip_norm"] = real(&ExperimentConfig::clip_norm);
    t["word_level_embedding_dropout"] =
        reals(&ExperimentConfig::word_dropout);
    t["variational_embedding_dropout"] =
        reals(&ExperimentConfig::variational_dropout);
    t["dropconnect_on_w_hh"] = reals(&ExperimentConfig::weight_drop);
    t["metrics_path"] = text(&ExperimentConfig::metrics_path);
    t["checkpoint_dir"] = text(&ExperimentConfig::checkpoint_dir);
    t["record_time"] = flag(&ExperimentConfig::record_time);
    t["stop_accuracy"] = real(&ExperimentConfig::stop_accuracy);
    t["verbose"] = flag(&ExperimentConfig::verbose);

    const std::pair<const char*, const char*> aliases[] = {
        {"seeds", "seed"},
        {"train", "train_path"},
        {"valid", "valid_path"},
        {"dev_path", "valid_path"},
        {"test", "test_path"},
        {"k", "embedding_size"},
        {"delta", "embedding_density"},
        {"bins", "embedding_bins"},
        {"order", "order_strategy"},
        {"sparse_segments", "segments"},
        {"lr", "learning_rate"},
        {"word_dropout", "word_level_embedding_dropout"},
        {"variational_dropout", "variational_embedding_dropout"},
        {"weight_drop", "dropconnect_on_w_hh"},
        {"dropconnect_on_whh", "dropconnect_on_w_hh"},
    };
    for (const auto& [alias, target] : aliases) t[alias] = t.at(target);
    return m;
  }();
  return *table;
}

}  // namespace

std::string NormalizeKey(std::string_view key) {
  std::string out;
  bool pending = false;
  for (char ch : key) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isalnum(u)) {
      if (pending && !out.empty()) out += '_';
      pending = false;
      out += static_cast<char>(std::tolower(u));
    } else {
      pending = true;
    }
  }
  // LaTeX-style spellings such as "W_{hh}" or "\mathbf{W}_{hh}".
  for (const char* junk : {"mathbf_", "mathrm_"}) {
    for (std::size_t p; (p = out.find(junk)) != std::string::npos;) {
      out.erase(p, std::char_traits<char>::length(junk));
    }
  }
  return out;
}

void ExperimentConfig::Set(std::string_view key, std::string_view value) {
  const std::string k = NormalizeKey(key);
  const auto& table = Setters();
  auto it = table.find(k);
  if (it == table.end()) {
    throw ConfigError("unknown config key '" + std::string(key) + "'");
  }
  try {
    it->second(*this, value);
  } catch (const ConfigError& e) {
    throw ConfigError(k + ": " + e.what());
  }
}

void ExperimentConfig::Validate() const {
  if (task != "lm" && task != "pos" && task != "recite") {
    throw ConfigError("task must be lm, pos or recite, got '" + task + "'");
  }
  if (seeds.empty()) throw ConfigError("seed is mandatory");
  if (run_id.empty() || run_id.find(',') != std::string::npos) {
    throw ConfigError("run_id must be non-empty and contain no commas");
  }
  if (embedding_size == 0) throw ConfigError("embedding_size must be positive");
  if (!(embedding_density > 0.0 && embedding_density <= 1.0)) {
    throw ConfigError("embedding_density must lie in (0, 1]");
  }
  if (embedding_bins > embedding_size) {
    throw ConfigError("embedding_bins exceeds embedding_size");
  }
  if (hidden_size == 0 || layers == 0) {
    throw ConfigError("hidden_size and layers must be positive");
  }
  if (segments.size() != 1 && segments.size() != layers) {
    throw ConfigError("segments needs one entry or one per layer");
  }
  if (gamma.size() != 1 && gamma.size() != layers) {
    throw ConfigError("gamma needs one entry or one per layer");
  }
  if ((match_dense_embedding == 0) != (match_dense_hidden == 0)) {
    throw ConfigError(
        "match_dense_embedding and match_dense_hidden go together");
  }
  if (optimizer != "sgd" && optimizer != "adam") {
    throw ConfigError("optimizer must be sgd or adam");
  }
  for (double lr : learning_rates) {
    if (!(lr >= 0.0)) throw ConfigError("learning_rate must be >= 0");
  }
  if (!(lr_decay > 0.0)) throw ConfigError("lr_decay must be positive");
  if (batch_size == 0 || bptt == 0) {
    throw ConfigError("batch_size and bptt must be positive");
  }
  for (const auto* list : {&word_dropout, &variational_dropout, &weight_drop}) {
    for (double p : *list) {
      if (!(p >= 0.0 && p < 1.0)) {
        throw ConfigError("dropout probabilities must lie in [0, 1)");
      }
    }
  }
}

double ExperimentConfig::EffectiveClipNorm() const {
  if (clip_norm >= 0.0) return clip_norm;
  return task == "pos" ? 0.0 : 5.0;
}

ExperimentConfig ParseConfig(std::string_view text, const std::string& source) {
  ExperimentConfig config;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    if (Trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(lineno) +
                        ": expected key = value");
    }
    try {
      config.Set(line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": " +
                        e.what());
    }
  }
  return config;
}

ExperimentConfig LoadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return ParseConfig(buf.str(), path);
}

std::string SerializeConfig(const ExperimentConfig& c) {
  auto size = [](std::size_t v) { return std::to_string(v); };
  std::ostringstream out;
  out << "task = " << c.task << "\n"
      << "run_id = " << c.run_id << "\n"
      << "seed = "
      << Join(c.seeds, [](std::uint64_t s) { return std::to_string(s); })
      << "\n";
  if (!c.train_path.empty()) out << "train_path = " << c.train_path << "\n";
  if (!c.valid_path.empty()) out << "valid_path = " << c.valid_path << "\n";
  if (!c.test_path.empty()) out << "test_path = " << c.test_path << "\n";
  out << "vocab_size = " << c.vocab_size << "\n"
      << "num_tags = " << c.num_tags << "\n"
      << "min_count = " << c.min_count << "\n"
      << "embedding_size = " << c.embedding_size << "\n"
      << "embedding_density = " << Num(c.embedding_density) << "\n"
      << "embedding_bins = " << c.embedding_bins << "\n"
      << "order_strategy = " << Join(c.order_strategies, OrderStrategyName)
      << "\n"
      << "embedding_init = " << Num(c.embedding_init) << "\n"
      << "hidden_size = " << c.hidden_size << "\n"
      << "layers = " << c.layers << "\n"
      << "segments = " << Join(c.segments, size) << "\n"
      << "gamma = " << Join(c.gamma, Num) << "\n"
      << "match_dense_embedding = " << c.match_dense_embedding << "\n"
      << "match_dense_hidden = " << c.match_dense_hidden << "\n"
      << "tie_weights = " << (c.tie_weights ? 1 : 0) << "\n"
      << "pos_hidden = " << c.pos_hidden << "\n"
      << "pos_dense = " << c.pos_dense << "\n"
      << "optimizer = " << c.optimizer << "\n"
      << "learning_rate = " << Join(c.learning_rates, Num) << "\n"
      << "momentum = " << Num(c.momentum) << "\n"
      << "lr_decay = " << Num(c.lr_decay) << "\n"
      << "epochs = " << c.epochs << "\n"
      << "batch_size = " << c.batch_size << "\n"
      << "bptt = " << c.bptt << "\n"
      << "clip_norm = " << Num(c.clip_norm) << "\n"
      << "word_level_embedding_dropout = " << Join(c.word_dropout, Num) << "\n"
      << "variational_embedding_dropout = "
      << Join(c.variational_dropout, Num) << "\n"
      << "dropconnect_on_w_hh = " << Join(c.weight_drop, Num) << "\n";
  if (!c.metrics_path.empty()) {
    out << "metrics_path = " << c.metrics_path << "\n";
  }
  if (!c.checkpoint_dir.empty()) {
    out << "checkpoint_dir = " << c.checkpoint_dir << "\n";
  }
  out << "record_time = " << (c.record_time ? 1 : 0) << "\n"
      << "stop_accuracy = " << Num(c.stop_accuracy) << "\n"
      << "verbose = " << (c.verbose ? 1 : 0) << "\n";
  return out.str();
}

std::vector<RunSettings> ExpandSweep(const ExperimentConfig& c) {
  std::vector<RunSettings> out;
  for (OrderStrategy order : c.order_strategies) {
    for (double wd : c.word_dropout) {
      for (double vd : c.variational_dropout) {
        for (double dc : c.weight_drop) {
          for (double lr : c.learning_rates) {
            for (std::uint64_t seed : c.seeds) {
              RunSettings s;
              s.order = order;
              s.word_dropout = wd;
              s.variational_dropout = vd;
              s.weight_drop = dc;
              s.learning_rate = lr;
              s.seed = seed;
              std::string label;
              auto add = [&](bool swept, const std::string& part) {
                if (!swept) return;
                if (!label.empty()) label += ";";
                label += part;
              };
              add(c.order_strategies.size() > 1,
                  "order=" + OrderStrategyName(order));
              add(c.word_dropout.size() > 1, "wdrop=" + Num(wd));
              add(c.variational_dropout.size() > 1, "vdrop=" + Num(vd));
              add(c.weight_drop.size() > 1, "dropconnect=" + Num(dc));
              add(c.learning_rates.size() > 1, "lr=" + Num(lr));
              add(c.seeds.size() > 1, "seed=" + std::to_string(seed));
              s.label = label;
              out.push_back(s);
            }
          }
        }
      }
    }
  }
  return out;
}

ExperimentConfig PinSettings(const ExperimentConfig& config,
                             const RunSettings& s) {
  ExperimentConfig out = config;
  out.seeds = {s.seed};
  out.learning_rates = {s.learning_rate};
  out.word_dropout = {s.word_dropout};
  out.variational_dropout = {s.variational_dropout};
  out.weight_drop = {s.weight_drop};
  out.order_strategies = {s.order};
  if (!s.label.empty()) out.run_id = config.run_id + "[" + s.label + "]";
  return out;
}

}  // namespace sparseseq
