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

#include "sparseseq/checkpoint.h"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "sparseseq/errors.h"

namespace sparseseq {
namespace {

std::uint64_t ToLittle(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0x00000000000000ffULL) << 56) | ((v & 0x000000000000ff00ULL) << 40) |
        ((v & 0x0000000000ff0000ULL) << 24) | ((v & 0x00000000ff000000ULL) << 8) |
        ((v & 0x000000ff00000000ULL) >> 8) | ((v & 0x0000ff0000000000ULL) >> 24) |
        ((v & 0x00ff000000000000ULL) >> 40) | ((v & 0xff00000000000000ULL) >> 56);
  }
  return v;
}

struct Entry {
  std::vector<std::size_t> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

}  // namespace

void WriteCheckpoint(const std::string& dir, const std::string& task,
                     const NamedPlans& plans,
                     std::span<Parameter* const> params) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir + ": " + ec.message());
  std::ofstream manifest(dir + "/manifest.txt");
  std::ofstream bin(dir + "/params.bin", std::ios::binary);
  if (!manifest || !bin) throw DataError("cannot write checkpoint in " + dir);

  manifest << kCheckpointVersion << "\n"
           << "gate_order i f g o\n"
           << "dtype float64 little_endian\n"
           << "task " << task << "\n";
  for (const auto& [name, plan] : plans) {
    manifest << "plan " << name << "\n" << SerializePlan(plan);
  }
  std::size_t offset = 0;
  for (const Parameter* p : params) {
    manifest << "param " << p->name << " " << p->value.rank();
    for (std::size_t d : p->value.shape()) manifest << " " << d;
    manifest << " offset " << offset << "\n";
    for (double v : p->value.values()) {
      const std::uint64_t bits = ToLittle(std::bit_cast<std::uint64_t>(v));
      bin.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
    }
    offset += p->value.size();
  }
  manifest << "total " << offset << "\n";
  if (!manifest || !bin) throw DataError("failed writing checkpoint " + dir);
}

void ReadCheckpoint(const std::string& dir, const std::string& task,
                    const NamedPlans& plans,
                    std::span<Parameter* const> params) {
  std::ifstream manifest(dir + "/manifest.txt");
  if (!manifest) throw DataError("no checkpoint manifest in " + dir);
  auto fail = [&](const std::string& why) {
    throw DataError("checkpoint " + dir + ": " + why);
  };
  std::string line;
  if (!std::getline(manifest, line) || line != kCheckpointVersion) {
    fail("unsupported version tag '" + line + "'");
  }
  std::map<std::string, RecurrentSparsityPlan> stored_plans;
  std::map<std::string, Entry> entries;
  std::size_t total = 0;
  bool have_total = false;
  while (std::getline(manifest, line)) {
    std::istringstream f(line);
    std::string key;
    f >> key;
    if (key == "gate_order") {
      std::string order, g;
      while (f >> g) order += g;
      if (order != "ifgo") fail("unexpected gate order");
    } else if (key == "dtype") {
      std::string type, endian;
      f >> type >> endian;
      if (type != "float64" || endian != "little_endian") fail("bad dtype");
    } else if (key == "task") {
      std::string t;
      f >> t;
      if (t != task) fail("task is " + t + ", expected " + task);
    } else if (key == "plan") {
      std::string name;
      f >> name;
      std::string text, l;
      while (std::getline(manifest, l)) {
        text += l + "\n";
        if (l == "end") break;
      }
      stored_plans[name] = ParsePlan(text);
    } else if (key == "param") {
      std::string name, word;
      std::size_t rank = 0;
      Entry e;
      if (!(f >> name >> rank)) fail("bad param line: " + line);
      e.shape.resize(rank);
      e.size = 1;
      for (auto& d : e.shape) {
        if (!(f >> d)) fail("bad param line: " + line);
        e.size *= d;
      }
      if (!(f >> word >> e.offset) || word != "offset") {
        fail("bad param line: " + line);
      }
      entries[name] = e;
    } else if (key == "total") {
      if (!(f >> total)) fail("bad total");
      have_total = true;
    } else if (!key.empty()) {
      fail("unknown manifest key '" + key + "'");
    }
  }
  if (!have_total) fail("manifest truncated");
  for (const auto& [name, plan] : plans) {
    auto it = stored_plans.find(name);
    if (it == stored_plans.end()) fail("missing plan for " + name);
    if (!(it->second == plan)) fail("plan mismatch for " + name);
  }
  if (stored_plans.size() != plans.size()) fail("plan count mismatch");
  if (entries.size() != params.size()) fail("parameter count mismatch");

  std::ifstream bin(dir + "/params.bin", std::ios::binary);
  if (!bin) fail("missing params.bin");
  bin.seekg(0, std::ios::end);
  if (static_cast<std::size_t>(bin.tellg()) != total * sizeof(double)) {
    fail("params.bin size does not match the manifest");
  }
  for (Parameter* p : params) {
    auto it = entries.find(p->name);
    if (it == entries.end()) fail("missing parameter " + p->name);
    const Entry& e = it->second;
    if (e.shape != p->value.shape()) {
      fail("shape mismatch for " + p->name + ": stored " +
           ShapeString(e.shape) + ", model " + p->value.ShapeString());
    }
    if (e.offset + e.size > total) fail("offset out of range for " + p->name);
    bin.seekg(static_cast<std::streamoff>(e.offset * sizeof(double)));
    for (double& v : p->value.values()) {
      std::uint64_t bits = 0;
      bin.read(reinterpret_cast<char*>(&bits), sizeof(bits));
      v = std::bit_cast<double>(ToLittle(bits));
    }
    if (!bin) fail("short read for " + p->name);
  }
}

}  // namespace sparseseq
