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

#include "sparseseq/corpus_io.h"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "sparseseq/autodiff.h"
#include "sparseseq/errors.h"

namespace sparseseq {

std::vector<std::string> TokenizeText(std::istream& in, bool add_eos) {
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream words(line);
    std::string w;
    bool any = false;
    while (words >> w) {
      out.push_back(w);
      any = true;
    }
    if (add_eos && any) out.emplace_back(kEosToken);
  }
  return out;
}

std::vector<std::string> ReadTokens(const std::string& path, bool add_eos) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read corpus '" + path + "'");
  return TokenizeText(in, add_eos);
}

Vocabulary Vocabulary::Build(std::span<const std::string> tokens,
                             const VocabOptions& options) {
  if (tokens.empty()) throw DataError("cannot build a vocabulary from nothing");
  Vocabulary v;
  v.strategy_ = options.strategy;
  std::int64_t unk_count = 0, eos_count = 0;
  std::vector<std::string> order;
  std::unordered_map<std::string, std::int64_t> counts;
  for (const std::string& t : tokens) {
    if (t == kUnkToken) {
      ++unk_count;
      continue;
    }
    if (options.add_eos && t == kEosToken) {
      ++eos_count;
      continue;
    }
    auto [it, fresh] = counts.try_emplace(t, 0);
    if (fresh) order.push_back(t);
    ++it->second;
  }
  std::vector<std::string> kept;
  std::vector<std::int64_t> kept_freq;
  for (const std::string& t : order) {
    const std::int64_t c = counts[t];
    if (static_cast<std::size_t>(c) < options.min_count) {
      unk_count += c;
    } else {
      kept.push_back(t);
      kept_freq.push_back(c);
    }
  }
  v.tokens_.emplace_back(kUnkToken);
  v.freqs_.push_back(unk_count);
  if (options.add_eos) {
    v.tokens_.emplace_back(kEosToken);
    v.freqs_.push_back(eos_count);
  }
  v.num_specials_ = v.tokens_.size();
  for (int i : ApplyOrderStrategy(kept_freq, options.strategy, options.seed)) {
    v.tokens_.push_back(kept[i]);
    v.freqs_.push_back(kept_freq[i]);
  }
  v.Index();
  return v;
}

void Vocabulary::Index() {
  ids_.clear();
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!ids_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw DataError("duplicate vocabulary entry '" + tokens_[i] + "'");
    }
  }
}

int Vocabulary::Id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

bool Vocabulary::Contains(std::string_view token) const {
  return ids_.count(std::string(token)) > 0;
}

std::vector<int> Vocabulary::Numericalize(
    std::span<const std::string> tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const std::string& t : tokens) out.push_back(Id(t));
  return out;
}

std::vector<std::string> Vocabulary::Denumericalize(
    std::span<const int> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(Token(id));
  return out;
}

void Vocabulary::Write(std::ostream& out) const {
  out << "strategy " << OrderStrategyName(strategy_) << "\n"
      << "specials " << num_specials_ << "\n";
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    out << tokens_[i] << '\t' << freqs_[i] << '\n';
  }
}

Vocabulary Vocabulary::Read(std::istream& in) {
  Vocabulary v;
  std::string key, name;
  if (!(in >> key >> name) || key != "strategy") {
    throw DataError("vocabulary: missing strategy line");
  }
  v.strategy_ = ParseOrderStrategy(name);
  if (!(in >> key >> v.num_specials_) || key != "specials") {
    throw DataError("vocabulary: missing specials line");
  }
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError("vocabulary: malformed line '" + line + "'");
    }
    v.tokens_.push_back(line.substr(0, tab));
    v.freqs_.push_back(std::stoll(line.substr(tab + 1)));
  }
  if (v.tokens_.empty() || v.tokens_[0] != kUnkToken) {
    throw DataError("vocabulary: first entry must be " +
                    std::string(kUnkToken));
  }
  v.Index();
  return v;
}

std::vector<LmBatch> MakeLmBatches(std::span<const int> ids,
                                   std::size_t batch, std::size_t bptt) {
  if (batch == 0 || bptt == 0) {
    throw std::invalid_argument("batch size and bptt must be positive");
  }
  if (ids.size() < 2 * batch) {
    throw DataError("corpus of " + std::to_string(ids.size()) +
                    " tokens is too short for batch size " +
                    std::to_string(batch));
  }
  const std::size_t len = ids.size() / batch;
  std::vector<LmBatch> out;
  for (std::size_t start = 0; start + 1 < len; start += bptt) {
    const std::size_t steps = std::min(bptt, len - 1 - start);
    LmBatch b;
    b.steps = steps;
    b.batch = batch;
    b.inputs.resize(steps * batch);
    b.targets.resize(steps * batch);
    for (std::size_t t = 0; t < steps; ++t) {
      for (std::size_t s = 0; s < batch; ++s) {
        const std::size_t pos = s * len + start + t;
        b.inputs[t * batch + s] = ids[pos];
        b.targets[t * batch + s] = ids[pos + 1];
      }
    }
    out.push_back(std::move(b));
  }
  return out;
}

std::vector<TaggedSentence> ParseTaggedCorpus(std::istream& in,
                                              const std::string& source) {
  std::vector<TaggedSentence> out;
  TaggedSentence current;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      if (!current.tokens.empty()) out.push_back(std::move(current));
      current = {};
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size() ||
        line.find('\t', tab + 1) != std::string::npos) {
      throw DataError(source + ":" + std::to_string(line_no) +
                      ": expected 'token<TAB>tag', got '" + line + "'");
    }
    current.tokens.push_back(line.substr(0, tab));
    current.tags.push_back(line.substr(tab + 1));
  }
  if (!current.tokens.empty()) out.push_back(std::move(current));
  return out;
}

std::vector<TaggedSentence> LoadTaggedCorpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read tagged corpus '" + path + "'");
  return ParseTaggedCorpus(in, path);
}

void WriteTaggedCorpus(std::ostream& out,
                       std::span<const TaggedSentence> sentences) {
  for (const TaggedSentence& s : sentences) {
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      out << s.tokens[i] << '\t' << s.tags[i] << '\n';
    }
    out << '\n';
  }
}

TagSet TagSet::Build(std::span<const TaggedSentence> train) {
  if (train.empty()) throw DataError("training corpus has no sentences");
  TagSet t;
  for (const TaggedSentence& s : train) {
    for (const std::string& tag : s.tags) {
      if (t.ids_.emplace(tag, static_cast<int>(t.tags_.size())).second) {
        t.tags_.push_back(tag);
      }
    }
  }
  return t;
}

int TagSet::Id(std::string_view tag) const {
  auto it = ids_.find(std::string(tag));
  return it == ids_.end() ? unknown_id() : it->second;
}

const std::string& TagSet::Tag(int id) const {
  static const std::string kUnknownTag = "<unk-tag>";
  if (id == unknown_id()) return kUnknownTag;
  return tags_.at(id);
}

std::vector<EncodedSentence> EncodeTagged(
    std::span<const TaggedSentence> sentences, const Vocabulary& vocab,
    const TagSet& tags, EncodeStats* stats) {
  std::vector<EncodedSentence> out;
  EncodeStats local;
  for (const TaggedSentence& s : sentences) {
    EncodedSentence e;
    e.tokens = vocab.Numericalize(s.tokens);
    for (const std::string& tag : s.tags) e.tags.push_back(tags.Id(tag));
    ++local.sentences;
    local.tokens += e.tokens.size();
    for (std::size_t i = 0; i < e.tokens.size(); ++i) {
      local.unknown_tokens += e.tokens[i] == Vocabulary::kUnk;
      local.unknown_tags += e.tags[i] == tags.unknown_id();
    }
    out.push_back(std::move(e));
  }
  if (stats != nullptr) *stats = local;
  return out;
}

std::vector<TagBatch> MakeTagBatches(std::span<const EncodedSentence> sentences,
                                     std::size_t batch_size,
                                     std::span<const std::size_t> order) {
  if (batch_size == 0) throw std::invalid_argument("batch size must be > 0");
  std::vector<std::size_t> idx(order.begin(), order.end());
  if (idx.empty()) {
    idx.resize(sentences.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  }
  std::vector<TagBatch> out;
  for (std::size_t first = 0; first < idx.size(); first += batch_size) {
    const std::size_t n = std::min(batch_size, idx.size() - first);
    TagBatch b;
    b.batch = n;
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t len = sentences[idx[first + j]].tokens.size();
      b.lengths.push_back(len);
      b.steps = std::max(b.steps, len);
    }
    b.tokens.assign(b.steps * n, 0);
    b.targets.assign(b.steps * n, kIgnoreTarget);
    for (std::size_t j = 0; j < n; ++j) {
      const EncodedSentence& s = sentences[idx[first + j]];
      for (std::size_t t = 0; t < s.tokens.size(); ++t) {
        b.tokens[t * n + j] = s.tokens[t];
        b.targets[t * n + j] = s.tags[t];
      }
    }
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace sparseseq
