#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "proglearn/datasets.hpp"
#include "proglearn/dsl.hpp"
#include "proglearn/lfps.hpp"
#include "proglearn/sandbox.hpp"

namespace proglearn {

// A learned object that can be scored: either an enumerated program or a guest
// candidate run through the sandbox.
struct Hypothesis {
  enum class Kind { dsl_program, guest };
  Kind kind = Kind::dsl_program;
  std::string dsl_program;
  EnumConfig dsl_config;
  Candidate guest;
  SandboxConfig sandbox;
};

inline Hypothesis dsl_hypothesis(std::string program, EnumConfig cfg = {}) {
  Hypothesis h;
  h.kind = Hypothesis::Kind::dsl_program;
  h.dsl_program = std::move(program);
  h.dsl_config = cfg;
  return h;
}

inline Hypothesis guest_hypothesis(Candidate candidate, SandboxConfig cfg = {}) {
  Hypothesis h;
  h.kind = Hypothesis::Kind::guest;
  h.guest = std::move(candidate);
  h.sandbox = std::move(cfg);
  return h;
}

inline std::vector<std::optional<int>> evaluate_hypothesis(const Hypothesis& h,
                                                           const std::vector<std::string>& inputs) {
  if (h.kind == Hypothesis::Kind::dsl_program) {
    if (!dsl::validate(h.dsl_program)) throw std::invalid_argument("invalid program");
    std::vector<std::optional<int>> out;
    out.reserve(inputs.size());
    for (const auto& x : inputs)
      out.push_back(dsl::interpret(h.dsl_program, x, h.dsl_config.step_budget));
    return out;
  }
  return run_guest(h.guest, inputs, h.sandbox).outcomes;
}

// Test accuracy. A hypothesis that fails to produce a defined outcome for every
// input is not scoreable, which is an error rather than a number.
inline double evaluate_on_test(const Hypothesis& h, const LabeledDataset& test) {
  if (test.samples.empty()) throw std::invalid_argument("empty test set");
  std::vector<std::string> inputs;
  inputs.reserve(test.samples.size());
  for (const auto& s : test.samples) inputs.push_back(s.input);
  auto outcomes = evaluate_hypothesis(h, inputs);
  long hit = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (!outcomes[i].has_value())
      throw std::runtime_error("hypothesis is not total on the test set");
    hit += *outcomes[i] == test.samples[i].label;
  }
  return static_cast<double>(hit) / static_cast<double>(outcomes.size());
}

struct ProbePoint {
  int n = 0;
  int m = 0;
  double accuracy = 0.0;
  bool total = false;
};

struct InvarianceProfile {
  enum class Verdict { invariant_exact, partial, length_bound };
  std::vector<ProbePoint> points;
  Verdict verdict = Verdict::length_bound;
};

inline const char* invariance_verdict_name(InvarianceProfile::Verdict v) {
  switch (v) {
    case InvarianceProfile::Verdict::invariant_exact: return "invariant_exact";
    case InvarianceProfile::Verdict::partial: return "partial";
    case InvarianceProfile::Verdict::length_bound: return "length_bound";
  }
  return "length_bound";
}

// Probes whether a hypothesis keeps working on longer inputs than it was learned
// from: fresh balanced datasets at each probe length, never reusing training data.
// Default grid: n, 2n, 5n, and 200.
inline InvarianceProfile dimension_invariance_eval(const Hypothesis& h, const TaskSpec& task,
                                                   int base_n,
                                                   std::vector<int> probe_lengths = {},
                                                   int probe_m = 1000,
                                                   std::uint64_t seed = 977) {
  if (probe_lengths.empty()) probe_lengths = {base_n, 2 * base_n, 5 * base_n, 200};
  std::sort(probe_lengths.begin(), probe_lengths.end());
  probe_lengths.erase(std::unique(probe_lengths.begin(), probe_lengths.end()),
                      probe_lengths.end());

  InvarianceProfile profile;
  bool all_exact = true;
  bool any_partial_outcome = false;
  for (int len : probe_lengths) {
    LabeledDataset probe;
    try {
      probe = generate_balanced(task, len, probe_m, seed ^ (static_cast<std::uint64_t>(len) << 20),
                                "test");
    } catch (const DatasetInfeasible&) {
      continue;  // nothing to measure at this length
    }
    std::vector<std::string> inputs;
    for (const auto& s : probe.samples) inputs.push_back(s.input);
    auto outcomes = evaluate_hypothesis(h, inputs);
    ProbePoint point;
    point.n = len;
    point.m = probe.m();
    long hit = 0, defined = 0;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      if (!outcomes[i].has_value()) continue;
      ++defined;
      hit += *outcomes[i] == probe.samples[i].label;
    }
    point.total = defined == static_cast<long>(outcomes.size());
    point.accuracy = point.total && !outcomes.empty()
                         ? static_cast<double>(hit) / static_cast<double>(outcomes.size())
                         : 0.0;
    if (!point.total) any_partial_outcome = true;
    if (!point.total || point.accuracy != 1.0) all_exact = false;
    profile.points.push_back(point);
  }
  if (profile.points.empty()) throw std::runtime_error("no probe length was feasible");
  profile.verdict = all_exact ? InvarianceProfile::Verdict::invariant_exact
                    : any_partial_outcome ? InvarianceProfile::Verdict::length_bound
                                          : InvarianceProfile::Verdict::partial;
  return profile;
}

}  // namespace proglearn
