#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "proglearn/datasets.hpp"
#include "proglearn/dsl.hpp"

namespace proglearn {

struct EnumConfig {
  int l_max = 6;
  std::uint64_t step_budget = 10000;  // interpreter steps per example
};

struct LfpsResult {
  std::optional<std::string> program;  // empty when nothing consistent up to l_max
  int program_length = 0;
  std::uint64_t visited = 0;    // strings examined, valid or not
  std::uint64_t evaluated = 0;  // statically valid programs run against the data
  double wall_seconds = 0.0;
};

// Called for every statically valid candidate before it is run.
using VisitLogger = std::function<void(const std::string&, int length)>;

inline bool consistent_with(const std::string& program, const LabeledDataset& data,
                            std::uint64_t step_budget) {
  for (const auto& s : data.samples) {
    auto out = dsl::interpret(program, s.input, step_budget);
    if (!out.has_value() || *out != s.label) return false;
  }
  return true;
}

// Length-first search: all strings of length 1, then 2, ... in alphabet order within
// a length. Statically invalid strings are skipped without evaluation. Returns the
// first program consistent with every sample.
inline LfpsResult lfps(const LabeledDataset& data, const EnumConfig& config,
                       const VisitLogger& log_visit = {}) {
  auto t0 = std::chrono::steady_clock::now();
  LfpsResult res;
  std::string candidate;
  for (int len = 1; len <= config.l_max; ++len) {
    std::vector<int> odo(static_cast<std::size_t>(len), 0);
    candidate.assign(static_cast<std::size_t>(len), dsl::kAlphabet[0]);
    for (;;) {
      ++res.visited;
      if (dsl::validate(candidate)) {
        if (log_visit) log_visit(candidate, len);
        ++res.evaluated;
        if (consistent_with(candidate, data, config.step_budget)) {
          res.program = candidate;
          res.program_length = len;
          res.wall_seconds =
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
          return res;
        }
      }
      int pos = len - 1;
      while (pos >= 0 && odo[static_cast<std::size_t>(pos)] == dsl::kAlphabetSize - 1) {
        odo[static_cast<std::size_t>(pos)] = 0;
        candidate[static_cast<std::size_t>(pos)] = dsl::kAlphabet[0];
        --pos;
      }
      if (pos < 0) break;
      candidate[static_cast<std::size_t>(pos)] =
          dsl::kAlphabet[++odo[static_cast<std::size_t>(pos)]];
    }
  }
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace proglearn
