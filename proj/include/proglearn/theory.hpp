#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "proglearn/bounds.hpp"
#include "proglearn/tasks.hpp"

namespace proglearn {

// Exact dyadic rational: num / 2^log2_den, from integer accumulation only.
struct ExactFraction {
  std::int64_t num = 0;
  int log2_den = 0;

  double value() const { return std::ldexp(static_cast<double>(num), -log2_den); }

  // |num| / 2^log2_den <= 1/d, compared in integers.
  bool abs_at_most_inverse(std::uint64_t d) const {
    unsigned __int128 lhs = static_cast<unsigned __int128>(num < 0 ? -num : num) * d;
    unsigned __int128 rhs = static_cast<unsigned __int128>(1) << log2_den;
    return lhs <= rhs;
  }
};

inline constexpr int kMaxExhaustiveBits = 24;

namespace detail {

inline std::uint32_t index_mask(const std::vector<int>& indices, int n) {
  std::uint32_t mask = 0;
  for (int i : indices) {
    if (i < 0 || i >= n) throw std::domain_error("parity index outside [0, n)");
    mask |= 1u << i;
  }
  return mask;
}

}  // namespace detail

// Correlation of two parity functions under the uniform distribution on n bits,
// accumulated exhaustively in integers. Parities map to {-1, +1} internally.
inline ExactFraction parity_correlation(const std::vector<int>& s, const std::vector<int>& t,
                                        int n) {
  if (n < 1 || n > kMaxExhaustiveBits)
    throw std::domain_error("parity_correlation: n must be in [1, 24]");
  std::uint32_t ms = detail::index_mask(s, n);
  std::uint32_t mt = detail::index_mask(t, n);
  std::int64_t acc = 0;
  const std::uint32_t limit = 1u << n;
  for (std::uint32_t x = 0; x < limit; ++x) {
    int a = std::popcount(x & ms) & 1;
    int b = std::popcount(x & mt) & 1;
    acc += (a == b) ? 1 : -1;
  }
  return {acc, n};
}

struct SqReport {
  std::uint64_t d_claim = 0;
  ExactFraction max_offdiag{};  // largest |correlation| over distinct pairs
  bool verdict = false;         // every off-diagonal |corr| <= 1/d_claim
  std::uint64_t pairs_checked = 0;
};

// Witness check for a statistical-dimension claim: all pairwise correlations of the
// listed parity index sets must be at most 1/d_claim in magnitude.
inline SqReport sq_dim_witness_check(const std::vector<std::vector<int>>& parity_sets, int n,
                                     std::uint64_t d_claim) {
  if (d_claim < 1) throw std::domain_error("d_claim must be positive");
  SqReport rep;
  rep.d_claim = d_claim;
  rep.max_offdiag = {0, n};
  rep.verdict = true;
  for (std::size_t i = 0; i < parity_sets.size(); ++i) {
    for (std::size_t j = i + 1; j < parity_sets.size(); ++j) {
      ExactFraction c = parity_correlation(parity_sets[i], parity_sets[j], n);
      ++rep.pairs_checked;
      std::int64_t mag = c.num < 0 ? -c.num : c.num;
      std::int64_t best = rep.max_offdiag.num < 0 ? -rep.max_offdiag.num : rep.max_offdiag.num;
      if (mag > best) rep.max_offdiag = c;
      if (!c.abs_at_most_inverse(d_claim)) rep.verdict = false;
    }
  }
  return rep;
}

// Iteration floor d * eps^2 / B^(3/2) for clipped coordinate queries; holds up to
// universal constants.
inline double sgd_iteration_lower_bound(double d, double eps, double batch) {
  if (d < 1.0) throw std::domain_error("d must be >= 1");
  if (!(eps > 0.0) || eps >= 0.5) throw std::domain_error("eps must be in (0, 0.5)");
  if (batch < 1.0) throw std::domain_error("batch must be >= 1");
  return d * eps * eps / std::pow(batch, 1.5);
}

// Accuracy floor implied by the generalization bound, clamped into [0, 1].
inline double erm_accuracy_floor(const BoundInputs& in, LogBase base = LogBase::natural) {
  double floor = 1.0 - pac_bound(in, base);
  if (floor < 0.0) return 0.0;
  if (floor > 1.0) return 1.0;
  return floor;
}

// Closed form the automaton-parity label collapses to: last bit XOR the parity of
// the number of 01 ascents.
inline int ca_closed_form(std::string_view x) {
  if (x.empty()) throw std::invalid_argument("empty input");
  int ascents = 0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    if (x[i] == '0' && x[i + 1] == '1') ++ascents;
  }
  return ((x.back() == '1') ^ (ascents & 1)) ? 1 : 0;
}

struct CaVerdict {
  int n = 0;
  bool holds = false;
  std::uint64_t evaluations = 0;       // oracle evaluations performed, 2^n when exhaustive
  std::string counterexample;          // first mismatch in counting order, if any
};

using CaRule = std::function<int(std::string_view)>;

// Exhaustively compares a closed-form rule against the automaton oracle for every
// length up to n_max. Stops scanning a length at its first counterexample.
inline std::vector<CaVerdict> ca_identity_check(int n_max, const CaRule& rule) {
  if (n_max < 1 || n_max > kMaxExhaustiveBits)
    throw std::domain_error("ca_identity_check: n_max must be in [1, 24]");
  std::vector<CaVerdict> out;
  for (int n = 1; n <= n_max; ++n) {
    CaVerdict v;
    v.n = n;
    v.holds = true;
    std::string x(static_cast<std::size_t>(n), '0');
    const std::uint64_t limit = 1ull << n;
    for (std::uint64_t bits = 0; bits < limit; ++bits) {
      for (int i = 0; i < n; ++i)
        x[static_cast<std::size_t>(i)] = (bits >> (n - 1 - i)) & 1 ? '1' : '0';
      ++v.evaluations;
      if (label_ca_parity(x) != rule(x)) {
        v.holds = false;
        v.counterexample = x;
        break;
      }
    }
    out.push_back(std::move(v));
  }
  return out;
}

inline std::vector<CaVerdict> ca_identity_check(int n_max) {
  return ca_identity_check(n_max, [](std::string_view x) { return ca_closed_form(x); });
}

}  // namespace proglearn
