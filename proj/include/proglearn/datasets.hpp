#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "proglearn/rng.hpp"
#include "proglearn/tasks.hpp"

namespace proglearn {

struct LabeledSample {
  std::string input;
  int label = 0;
};

struct LabeledDataset {
  TaskSpec task;
  int n = 0;
  std::uint64_t seed = 0;
  std::string role;  // train | validation | test
  std::vector<LabeledSample> samples;

  int m() const { return static_cast<int>(samples.size()); }
};

struct SplitSpec {
  int m_train = 100;
  int m_val = 100;
};

class DatasetError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class DatasetInfeasible : public DatasetError {
  using DatasetError::DatasetError;
};

class DatasetFormatError : public DatasetError {
  using DatasetError::DatasetError;
};

namespace detail {

inline constexpr int kMaxRejectsPerSample = 1'000'000;

inline void check_role(const std::string& role) {
  if (role != "train" && role != "validation" && role != "test")
    throw DatasetError("role must be train, validation, or test");
}

inline std::string random_bits(int n, Rng& rng) {
  std::string s(static_cast<std::size_t>(n), '0');
  for (auto& c : s) c = rng.coin() ? '1' : '0';
  return s;
}

// Random n-digit integer, nonzero leading digit. Digit tasks only.
inline std::string random_digits(int n, Rng& rng, bool restrict_last) {
  static const char* kTail = "1379";
  std::string s(static_cast<std::size_t>(n), '0');
  s[0] = static_cast<char>('1' + rng.below(9));
  for (std::size_t i = 1; i < s.size(); ++i) s[i] = static_cast<char>('0' + rng.below(10));
  if (restrict_last) s[s.size() - 1] = kTail[rng.below(4)];
  return s;
}

// Balanced bracket word of b pairs, uniform choice among the moves legal at each
// position, mapped back to bits.
inline std::string random_balanced_word(int n, Rng& rng) {
  int remaining = n / 2;  // bracket slots left to fill
  std::string bits;
  bits.reserve(static_cast<std::size_t>(n));
  std::vector<int> stack;  // 0 = round, 1 = square
  while (remaining > 0) {
    bool can_open = static_cast<int>(stack.size()) + 1 <= remaining - 1;
    bool can_close = !stack.empty();
    bool open = can_open && (!can_close || rng.coin());
    if (open) {
      int kind = rng.coin() ? 1 : 0;
      stack.push_back(kind);
      bits += (kind == 0) ? "00" : "10";
    } else {
      int kind = stack.back();
      stack.pop_back();
      bits += (kind == 0) ? "01" : "11";
    }
    --remaining;
  }
  return bits;
}

inline double catalan_approx(int k) {
  double c = 1.0;
  for (int i = 0; i < k; ++i) c = c * 2.0 * (2.0 * i + 1.0) / (i + 2.0);
  return c;
}

// Closed-form positive counts where cheap; -1 when only rejection sampling can tell.
inline double positive_count_estimate(const TaskSpec& task, int n) {
  switch (task.id) {
    case TaskId::full_parity:
    case TaskId::k_parity:
      return n >= 63 ? 4.6e18 : static_cast<double>(1ULL << (n - 1));
    case TaskId::first_half_parity:
      if (n / 2 == 0) return 0.0;
      return n >= 63 ? 4.6e18 : static_cast<double>(1ULL << (n - 1));
    case TaskId::palindrome:
      return n >= 124 ? 4.6e18 : static_cast<double>(1ULL << ((n + 1) / 2));
    case TaskId::dyck2: {
      if (n % 4 != 0) return 0.0;
      int pairs = n / 4;
      double words = catalan_approx(pairs);
      for (int i = 0; i < pairs; ++i) words *= 2.0;
      return words;
    }
    default:
      return -1.0;
  }
}

}  // namespace detail

// Balanced dataset: exactly m/2 positives and m/2 negatives, duplicate-free, emitted
// interleaved positive-first. Same arguments always produce the same bytes.
inline LabeledDataset generate_balanced(const TaskSpec& task, int n, int m, std::uint64_t seed,
                                        const std::string& role) {
  if (n < 1) throw DatasetError("n must be positive");
  if (m < 2 || m % 2 != 0) throw DatasetError("m must be even and at least 2");
  detail::check_role(role);
  if (task.id == TaskId::k_parity) {
    if (task.indices.empty()) throw DatasetError("k_parity task has no indices");
    for (int i : task.indices)
      if (i < 0 || i >= n) throw DatasetError("k_parity index outside input length");
  }
  if (task.id == TaskId::pattern_match && static_cast<int>(task.pattern.size()) > n)
    throw DatasetInfeasible("pattern longer than input");

  const int half = m / 2;
  double pos_estimate = detail::positive_count_estimate(task, n);
  if (pos_estimate >= 0.0 && pos_estimate < static_cast<double>(half))
    throw DatasetInfeasible("not enough distinct positives at this length");
  if (task.id == TaskId::palindrome && n < 2)
    throw DatasetInfeasible("no negatives exist at length 1");

  Rng rng(fnv1a64(std::string(task_name(task.id)) + "|" + std::to_string(n) + "|" +
                  std::to_string(m) + "|" + role) ^
          seed);
  std::unordered_set<std::string> seen;
  std::vector<std::string> pos, neg;
  pos.reserve(static_cast<std::size_t>(half));
  neg.reserve(static_cast<std::size_t>(half));
  const bool digits = task_uses_digits(task.id);
  const bool restrict_last = task.id == TaskId::is_prime_restricted;

  auto draw = [&](int want_label) -> std::string {
    int rejects = 0;
    for (;;) {
      std::string x;
      if (digits) {
        x = detail::random_digits(n, rng, restrict_last);
      } else if (want_label == 1 && task.id == TaskId::pattern_match) {
        x = detail::random_bits(n, rng);
        std::size_t off = rng.below(static_cast<std::uint64_t>(n) - task.pattern.size() + 1);
        x.replace(off, task.pattern.size(), task.pattern);
      } else if (want_label == 1 && task.id == TaskId::palindrome) {
        std::string head = detail::random_bits((n + 1) / 2, rng);
        x = head.substr(0, static_cast<std::size_t>(n) / 2);
        std::string mirror(x.rbegin(), x.rend());
        if (n % 2 != 0) x += head[head.size() - 1];
        x += mirror;
      } else if (want_label == 0 && task.id == TaskId::palindrome) {
        std::string head = detail::random_bits((n + 1) / 2, rng);
        x = head.substr(0, static_cast<std::size_t>(n) / 2);
        std::string mirror(x.rbegin(), x.rend());
        if (n % 2 != 0) x += head[head.size() - 1];
        x += mirror;
        std::size_t flip = rng.below(static_cast<std::uint64_t>(n) / 2);
        x[flip] = x[flip] == '1' ? '0' : '1';
      } else if (want_label == 1 && task.id == TaskId::dyck2) {
        x = detail::random_balanced_word(n, rng);
      } else {
        x = detail::random_bits(n, rng);
      }
      if (oracle_label(task, x) == want_label && !seen.count(x)) {
        seen.insert(x);
        return x;
      }
      if (++rejects > detail::kMaxRejectsPerSample)
        throw DatasetInfeasible("rejection budget exhausted for label " +
                                std::to_string(want_label));
    }
  };

  for (int i = 0; i < half; ++i) pos.push_back(draw(1));
  for (int i = 0; i < half; ++i) neg.push_back(draw(0));

  LabeledDataset ds;
  ds.task = task;
  ds.n = n;
  ds.seed = seed;
  ds.role = role;
  ds.samples.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < half; ++i) {
    ds.samples.push_back({pos[static_cast<std::size_t>(i)], 1});
    ds.samples.push_back({neg[static_cast<std::size_t>(i)], 0});
  }
  return ds;
}

// Deterministic class-balanced split into disjoint train and validation sets.
inline std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& pool,
                                                       const SplitSpec& spec,
                                                       std::uint64_t seed) {
  if (spec.m_train < 2 || spec.m_val < 2) throw DatasetError("split sizes must be at least 2");
  if (spec.m_train % 2 != 0 || spec.m_val % 2 != 0)
    throw DatasetError("split sizes must be even to stay balanced");
  if (spec.m_train + spec.m_val > pool.m()) throw DatasetError("pool too small for split");

  std::vector<LabeledSample> pos, neg;
  for (const auto& s : pool.samples) (s.label == 1 ? pos : neg).push_back(s);
  if (static_cast<int>(pos.size()) < (spec.m_train + spec.m_val) / 2 ||
      static_cast<int>(neg.size()) < (spec.m_train + spec.m_val) / 2)
    throw DatasetError("pool classes too small for balanced split");

  Rng rng(seed);
  shuffle_in_place(pos, rng);
  shuffle_in_place(neg, rng);

  auto take = [&](int count, int offset, const std::string& role) {
    LabeledDataset ds;
    ds.task = pool.task;
    ds.n = pool.n;
    ds.seed = seed;
    ds.role = role;
    for (int i = 0; i < count / 2; ++i) {
      ds.samples.push_back(pos[static_cast<std::size_t>(offset + i)]);
      ds.samples.push_back(neg[static_cast<std::size_t>(offset + i)]);
    }
    return ds;
  };
  LabeledDataset train = take(spec.m_train, 0, "train");
  LabeledDataset val = take(spec.m_val, spec.m_train / 2, "validation");
  return {train, val};
}

inline constexpr const char* kDatasetFormat = "plds/1";

inline std::string task_params_string(const TaskSpec& task) {
  switch (task.id) {
    case TaskId::pattern_match:
      return "pattern=" + task.pattern;
    case TaskId::k_parity: {
      std::string out = "indices=";
      for (std::size_t i = 0; i < task.indices.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(task.indices[i]);
      }
      out += ";iseed=" + std::to_string(task.seed);
      return out;
    }
    default:
      return "-";
  }
}

inline std::string serialize(const LabeledDataset& ds) {
  std::ostringstream out;
  out << "# format=" << kDatasetFormat << "\n";
  out << "# task=" << task_name(ds.task.id) << "\n";
  out << "# params=" << task_params_string(ds.task) << "\n";
  out << "# n=" << ds.n << "\n";
  out << "# m=" << ds.samples.size() << "\n";
  out << "# seed=" << ds.seed << "\n";
  out << "# prng=" << kPrngId << "\n";
  out << "# role=" << ds.role << "\n";
  for (const auto& s : ds.samples) out << s.input << " -> " << s.label << "\n";
  return out.str();
}

namespace detail {

inline TaskSpec task_from_header(const std::string& name, const std::string& params) {
  TaskSpec task;
  task.id = task_from_name(name);
  if (params == "-") return task;
  std::istringstream in(params);
  std::string kv;
  while (std::getline(in, kv, ';')) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw DatasetFormatError("bad params entry: " + kv);
    std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
    if (key == "pattern") {
      task.pattern = value;
    } else if (key == "indices") {
      std::istringstream idx(value);
      std::string tok;
      while (std::getline(idx, tok, ',')) task.indices.push_back(std::stoi(tok));
    } else if (key == "iseed") {
      task.seed = std::stoull(value);
    } else {
      throw DatasetFormatError("unknown params key: " + key);
    }
  }
  return task;
}

}  // namespace detail

// Strict parse. Labels are re-derived from the task oracle; any mismatch is an error.
inline LabeledDataset deserialize(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  std::unordered_set<std::string> keys_seen;
  std::string task_name_str, params;
  LabeledDataset ds;
  long declared_m = -1;
  bool header_done = false;
  std::unordered_set<std::string> inputs;

  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) throw DatasetFormatError("line " + std::to_string(lineno) + ": empty line");
    if (!header_done && line.rfind("# ", 0) == 0) {
      auto eq = line.find('=');
      if (eq == std::string::npos)
        throw DatasetFormatError("line " + std::to_string(lineno) + ": malformed header");
      std::string key = line.substr(2, eq - 2), value = line.substr(eq + 1);
      if (!keys_seen.insert(key).second)
        throw DatasetFormatError("line " + std::to_string(lineno) + ": duplicate header " + key);
      if (key == "format") {
        if (value != kDatasetFormat)
          throw DatasetFormatError("unsupported format version: " + value);
      } else if (key == "task") {
        task_name_str = value;
      } else if (key == "params") {
        params = value;
      } else if (key == "n") {
        ds.n = std::stoi(value);
      } else if (key == "m") {
        declared_m = std::stol(value);
      } else if (key == "seed") {
        ds.seed = std::stoull(value);
      } else if (key == "prng") {
        if (value != kPrngId) throw DatasetFormatError("unknown prng id: " + value);
      } else if (key == "role") {
        ds.role = value;
      } else {
        throw DatasetFormatError("line " + std::to_string(lineno) + ": unknown header " + key);
      }
      continue;
    }
    if (!header_done) {
      for (const char* want : {"format", "task", "params", "n", "m", "seed", "prng", "role"}) {
        if (!keys_seen.count(want))
          throw DatasetFormatError(std::string("missing header: ") + want);
      }
      detail::check_role(ds.role);
      ds.task = detail::task_from_header(task_name_str, params);
      header_done = true;
    }
    auto arrow = line.find(" -> ");
    if (arrow == std::string::npos)
      throw DatasetFormatError("line " + std::to_string(lineno) + ": expected 'input -> label'");
    std::string input = line.substr(0, arrow);
    std::string label_str = line.substr(arrow + 4);
    if (label_str != "0" && label_str != "1")
      throw DatasetFormatError("line " + std::to_string(lineno) + ": label must be 0 or 1");
    if (static_cast<int>(input.size()) != ds.n)
      throw DatasetFormatError("line " + std::to_string(lineno) + ": input length != n");
    if (!inputs.insert(input).second)
      throw DatasetFormatError("line " + std::to_string(lineno) + ": duplicate input");
    int label = label_str == "1" ? 1 : 0;
    int expect;
    try {
      expect = oracle_label(ds.task, input);
    } catch (const std::exception& e) {
      throw DatasetFormatError("line " + std::to_string(lineno) + ": " + e.what());
    }
    if (expect != label)
      throw DatasetFormatError("line " + std::to_string(lineno) +
                               ": label disagrees with task oracle");
    ds.samples.push_back({std::move(input), label});
  }
  if (!header_done) throw DatasetFormatError("no samples found");
  if (declared_m != static_cast<long>(ds.samples.size()))
    throw DatasetFormatError("header m does not match sample count");
  return ds;
}

inline void save_dataset(const LabeledDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetError("cannot open for write: " + path);
  out << serialize(ds);
}

inline LabeledDataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open for read: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

}  // namespace proglearn
