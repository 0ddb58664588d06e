#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "proglearn/digest.hpp"
#include "proglearn/primality.hpp"
#include "proglearn/rng.hpp"

namespace proglearn {

enum class TaskId {
  full_parity,
  first_half_parity,
  k_parity,
  pattern_match,
  palindrome,
  dyck2,
  is_prime,
  is_prime_restricted,
  ca_parity,
  sha256_parity,
};

inline const char* task_name(TaskId id) {
  switch (id) {
    case TaskId::full_parity: return "full_parity";
    case TaskId::first_half_parity: return "first_half_parity";
    case TaskId::k_parity: return "k_parity";
    case TaskId::pattern_match: return "pattern_match";
    case TaskId::palindrome: return "palindrome";
    case TaskId::dyck2: return "dyck2";
    case TaskId::is_prime: return "is_prime";
    case TaskId::is_prime_restricted: return "is_prime_restricted";
    case TaskId::ca_parity: return "ca_parity";
    case TaskId::sha256_parity: return "sha256_parity";
  }
  throw std::logic_error("task_name: bad id");
}

inline TaskId task_from_name(std::string_view name) {
  for (TaskId id : {TaskId::full_parity, TaskId::first_half_parity, TaskId::k_parity,
                    TaskId::pattern_match, TaskId::palindrome, TaskId::dyck2, TaskId::is_prime,
                    TaskId::is_prime_restricted, TaskId::ca_parity, TaskId::sha256_parity}) {
    if (name == task_name(id)) return id;
  }
  throw std::invalid_argument("unknown task: " + std::string(name));
}

// Digit tasks read inputs as decimal integers; everything else reads raw bits.
inline bool task_uses_digits(TaskId id) {
  return id == TaskId::is_prime || id == TaskId::is_prime_restricted;
}

struct TaskSpec {
  TaskId id{TaskId::full_parity};
  std::string pattern;        // pattern_match only
  std::vector<int> indices;   // k_parity only
  std::uint64_t seed = 0;     // stream that drew the indices, kept for provenance
};

inline void require_bits(std::string_view x) {
  for (char c : x) {
    if (c != '0' && c != '1') throw std::invalid_argument("input is not a bit string");
  }
}

inline void require_digits(std::string_view x) {
  if (x.empty()) throw std::invalid_argument("empty digit string");
  for (char c : x) {
    if (c < '0' || c > '9') throw std::invalid_argument("input is not a digit string");
  }
}

inline int label_full_parity(std::string_view x) {
  int acc = 0;
  for (char c : x) acc ^= (c == '1');
  return acc;
}

// Parity of the first floor(n/2) bits.
inline int label_first_half_parity(std::string_view x) {
  return label_full_parity(x.substr(0, x.size() / 2));
}

inline int label_k_parity(std::string_view x, const std::vector<int>& indices) {
  int acc = 0;
  for (int i : indices) {
    if (i < 0 || static_cast<std::size_t>(i) >= x.size())
      throw std::out_of_range("k_parity index outside input");
    acc ^= (x[static_cast<std::size_t>(i)] == '1');
  }
  return acc;
}

inline int label_pattern(std::string_view x, std::string_view pattern) {
  if (pattern.empty()) throw std::invalid_argument("empty pattern");
  return x.find(pattern) != std::string_view::npos ? 1 : 0;
}

inline int label_palindrome(std::string_view x) {
  std::size_t n = x.size();
  for (std::size_t i = 0; i < n / 2; ++i) {
    if (x[i] != x[n - 1 - i]) return 0;
  }
  return 1;
}

// Bit pairs map to brackets: 00='(' 01=')' 10='[' 11=']'. Label 1 iff the bracket
// word is balanced. Odd-length inputs cannot encode a word and get label 0.
inline int label_dyck2(std::string_view x) {
  if (x.size() % 2 != 0) return 0;
  std::vector<char> stack;
  for (std::size_t i = 0; i < x.size(); i += 2) {
    int pair = (x[i] == '1' ? 2 : 0) + (x[i + 1] == '1' ? 1 : 0);
    switch (pair) {
      case 0: stack.push_back('('); break;
      case 2: stack.push_back('['); break;
      case 1:
        if (stack.empty() || stack.back() != '(') return 0;
        stack.pop_back();
        break;
      case 3:
        if (stack.empty() || stack.back() != '[') return 0;
        stack.pop_back();
        break;
    }
  }
  return stack.empty() ? 1 : 0;
}

inline int label_is_prime(std::string_view digits) { return is_prime_decimal(digits) ? 1 : 0; }

// One automaton step x'_i = x_{i-1} XOR (x_i OR x_{i+1}) with zero boundaries,
// then the parity of the updated row.
inline int label_ca_parity(std::string_view x) {
  int acc = 0;
  std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) {
    int left = i > 0 ? (x[i - 1] == '1') : 0;
    int mid = x[i] == '1';
    int right = i + 1 < n ? (x[i + 1] == '1') : 0;
    acc ^= left ^ (mid | right);
  }
  return acc;
}

// Parity of the set bits in the digest of the ASCII '0'/'1' bytes, no newline.
inline int label_sha256_parity(std::string_view x) { return sha256_popcount(x) & 1; }

inline std::vector<int> sample_parity_indices(int n, int k, std::uint64_t seed) {
  if (k < 1) throw std::domain_error("sample_parity_indices: k must be positive");
  if (k > n) throw std::domain_error("sample_parity_indices: k exceeds n");
  return sample_distinct(n, k, seed);
}

inline TaskSpec make_task(TaskId id) {
  TaskSpec t;
  t.id = id;
  return t;
}

inline TaskSpec make_pattern_task(std::string pattern) {
  require_bits(pattern);
  if (pattern.empty()) throw std::invalid_argument("empty pattern");
  TaskSpec t;
  t.id = TaskId::pattern_match;
  t.pattern = std::move(pattern);
  return t;
}

inline TaskSpec make_k_parity_task(int n, int k, std::uint64_t seed) {
  TaskSpec t;
  t.id = TaskId::k_parity;
  t.indices = sample_parity_indices(n, k, seed);
  t.seed = seed;
  return t;
}

inline int oracle_label(const TaskSpec& task, std::string_view x) {
  if (task_uses_digits(task.id)) {
    require_digits(x);
  } else {
    require_bits(x);
  }
  switch (task.id) {
    case TaskId::full_parity: return label_full_parity(x);
    case TaskId::first_half_parity: return label_first_half_parity(x);
    case TaskId::k_parity: return label_k_parity(x, task.indices);
    case TaskId::pattern_match: return label_pattern(x, task.pattern);
    case TaskId::palindrome: return label_palindrome(x);
    case TaskId::dyck2: return label_dyck2(x);
    case TaskId::is_prime: return label_is_prime(x);
    case TaskId::is_prime_restricted: return label_is_prime(x);
    case TaskId::ca_parity: return label_ca_parity(x);
    case TaskId::sha256_parity: return label_sha256_parity(x);
  }
  throw std::logic_error("oracle_label: bad id");
}

// The twelve stock task settings exercised by the experiment sweep.
inline std::vector<TaskSpec> stock_tasks(int n, std::uint64_t seed) {
  std::vector<TaskSpec> out;
  out.push_back(make_task(TaskId::full_parity));
  out.push_back(make_task(TaskId::first_half_parity));
  out.push_back(make_k_parity_task(n, 3, seed));
  out.push_back(make_k_parity_task(n, 10, seed));
  out.push_back(make_pattern_task("10101010"));
  out.push_back(make_pattern_task("00111111"));
  out.push_back(make_task(TaskId::palindrome));
  out.push_back(make_task(TaskId::dyck2));
  out.push_back(make_task(TaskId::is_prime));
  out.push_back(make_task(TaskId::is_prime_restricted));
  out.push_back(make_task(TaskId::ca_parity));
  out.push_back(make_task(TaskId::sha256_parity));
  return out;
}

}  // namespace proglearn
