#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace proglearn::dsl {

// Enumeration alphabet, in the order used for lexicographic ranking.
//   I       push the input vector
//   0, 1    push an all-zeros / all-ones vector of input length
//   ~       bitwise not of the top vector
//   & | ^   elementwise and / or / xor of the top two vectors
//   <       keep the first floor(len/2) elements of the top vector
//   R       reverse the top vector
//   P A O   fold the top vector to a scalar with xor / and / or
inline constexpr char kAlphabet[] = {'I', '0', '1', '~', '&', '|', '^', '<', 'R', 'P', 'A', 'O'};
inline constexpr int kAlphabetSize = 12;

inline int symbol_rank(char c) {
  for (int i = 0; i < kAlphabetSize; ++i) {
    if (kAlphabet[i] == c) return i;
  }
  return -1;
}

// Static check: token shapes must fit and the final stack must be one scalar.
// Tracks kinds only; lengths are a runtime concern.
inline bool validate(std::string_view program) {
  if (program.empty()) return false;
  int vectors = 0;
  int scalars = 0;
  for (char c : program) {
    switch (c) {
      case 'I':
      case '0':
      case '1':
        ++vectors;
        break;
      case '~':
      case '<':
      case 'R':
        if (vectors < 1) return false;
        break;
      case '&':
      case '|':
      case '^':
        if (vectors < 2) return false;
        --vectors;
        break;
      case 'P':
      case 'A':
      case 'O':
        if (vectors < 1) return false;
        --vectors;
        ++scalars;
        break;
      default:
        return false;
    }
    if (scalars > 1) return false;  // nothing consumes scalars, so a second can never clear
  }
  return vectors == 0 && scalars == 1;
}

// Runs a validated program on a bit string. Empty result means the run was cut off:
// step budget exhausted, operand lengths disagreed, or a fold hit an empty vector.
// Each token costs the length of the vector it touches (at least one step).
inline std::optional<int> interpret(std::string_view program, std::string_view input,
                                    std::uint64_t step_budget) {
  std::vector<std::vector<std::uint8_t>> stack;
  std::optional<int> result;
  std::uint64_t steps = 0;
  const std::size_t n = input.size();

  auto charge = [&](std::size_t len) {
    steps += len > 0 ? len : 1;
    return steps <= step_budget;
  };

  for (char c : program) {
    switch (c) {
      case 'I': {
        if (!charge(n)) return std::nullopt;
        std::vector<std::uint8_t> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = input[i] == '1';
        stack.push_back(std::move(v));
        break;
      }
      case '0':
      case '1': {
        if (!charge(n)) return std::nullopt;
        stack.push_back(std::vector<std::uint8_t>(n, c == '1' ? 1 : 0));
        break;
      }
      case '~': {
        if (stack.empty()) return std::nullopt;
        auto& v = stack.back();
        if (!charge(v.size())) return std::nullopt;
        for (auto& b : v) b ^= 1;
        break;
      }
      case '&':
      case '|':
      case '^': {
        if (stack.size() < 2) return std::nullopt;
        auto rhs = std::move(stack.back());
        stack.pop_back();
        auto& lhs = stack.back();
        if (lhs.size() != rhs.size()) return std::nullopt;
        if (!charge(lhs.size())) return std::nullopt;
        for (std::size_t i = 0; i < lhs.size(); ++i) {
          if (c == '&') lhs[i] &= rhs[i];
          else if (c == '|') lhs[i] |= rhs[i];
          else lhs[i] ^= rhs[i];
        }
        break;
      }
      case '<': {
        if (stack.empty()) return std::nullopt;
        auto& v = stack.back();
        if (!charge(v.size())) return std::nullopt;
        v.resize(v.size() / 2);
        break;
      }
      case 'R': {
        if (stack.empty()) return std::nullopt;
        auto& v = stack.back();
        if (!charge(v.size())) return std::nullopt;
        std::reverse(v.begin(), v.end());
        break;
      }
      case 'P':
      case 'A':
      case 'O': {
        if (stack.empty() || result.has_value()) return std::nullopt;
        auto v = std::move(stack.back());
        stack.pop_back();
        if (v.empty()) return std::nullopt;
        if (!charge(v.size())) return std::nullopt;
        int acc = c == 'A' ? 1 : 0;
        for (std::uint8_t b : v) {
          if (c == 'P') acc ^= b;
          else if (c == 'A') acc &= b;
          else acc |= b;
        }
        result = acc;
        break;
      }
      default:
        return std::nullopt;
    }
  }
  if (!stack.empty() || !result.has_value()) return std::nullopt;
  return result;
}

}  // namespace proglearn::dsl
