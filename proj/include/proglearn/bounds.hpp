#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace proglearn {

enum class LogBase { natural, base2 };

inline double bound_log(double x, LogBase base) {
  return base == LogBase::natural ? std::log(x) : std::log2(x);
}

struct BoundInputs {
  int program_length = 1;   // description length L in alphabet symbols
  int alphabet_size = 2;    // |Sigma|
  double delta = 1e-10;     // confidence parameter
  long sample_count = 1;    // m
};

inline void check_bound_inputs(const BoundInputs& in) {
  if (in.program_length < 1) throw std::domain_error("program_length must be >= 1");
  if (in.alphabet_size < 2) throw std::domain_error("alphabet_size must be >= 2");
  if (!(in.delta > 0.0) || in.delta > 1.0) throw std::domain_error("delta must be in (0, 1]");
  if (in.sample_count < 1) throw std::domain_error("sample_count must be >= 1");
}

// Generalization bound for a consistent program of description length L over an
// alphabet of size |Sigma| on m samples:
//   (L log|Sigma| + log(2 L^2 / delta)) / m
inline double pac_bound(const BoundInputs& in, LogBase base = LogBase::natural) {
  check_bound_inputs(in);
  double l = static_cast<double>(in.program_length);
  return (l * bound_log(static_cast<double>(in.alphabet_size), base) +
          bound_log(2.0 * l * l / in.delta, base)) /
         static_cast<double>(in.sample_count);
}

// Finite-class form: (log|H| + log((pi^2/6) l^2 / delta)) / m.
inline double cor_bound(double class_size, int ell, double delta, long m,
                        LogBase base = LogBase::natural) {
  if (class_size < 1.0) throw std::domain_error("class_size must be >= 1");
  if (ell < 1) throw std::domain_error("ell must be >= 1");
  if (!(delta > 0.0) || delta > 1.0) throw std::domain_error("delta must be in (0, 1]");
  if (m < 1) throw std::domain_error("m must be >= 1");
  double l = static_cast<double>(ell);
  constexpr double kBasel = std::numbers::pi * std::numbers::pi / 6.0;
  return (bound_log(class_size, base) + bound_log(kBasel * l * l / delta, base)) /
         static_cast<double>(m);
}

}  // namespace proglearn
