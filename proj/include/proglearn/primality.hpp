#pragma once

#include <gmp.h>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "proglearn/rng.hpp"

namespace proglearn {

namespace detail {

inline std::uint64_t mulmod_u64(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
  return static_cast<std::uint64_t>(static_cast<unsigned __int128>(a) * b % m);
}

inline std::uint64_t powmod_u64(std::uint64_t base, std::uint64_t exp, std::uint64_t m) {
  std::uint64_t acc = 1 % m;
  base %= m;
  while (exp) {
    if (exp & 1) acc = mulmod_u64(acc, base, m);
    base = mulmod_u64(base, base, m);
    exp >>= 1;
  }
  return acc;
}

// Witnesses proving compositeness for every composite below 3.3e24, so for all of u64.
inline constexpr std::uint64_t kSmallWitnesses[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41};

}  // namespace detail

inline bool is_prime_u64(std::uint64_t n) {
  if (n < 2) return false;
  for (std::uint64_t p : detail::kSmallWitnesses) {
    if (n % p == 0) return n == p;
  }
  std::uint64_t d = n - 1;
  int s = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++s;
  }
  for (std::uint64_t a : detail::kSmallWitnesses) {
    std::uint64_t x = detail::powmod_u64(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool witness = true;
    for (int r = 1; r < s; ++r) {
      x = detail::mulmod_u64(x, x, n);
      if (x == n - 1) {
        witness = false;
        break;
      }
    }
    if (witness) return false;
  }
  return true;
}

namespace detail {

// Thin RAII shell; arithmetic goes through the gmp C calls directly.
class BigInt {
 public:
  BigInt() { mpz_init(v_); }
  explicit BigInt(unsigned long x) { mpz_init_set_ui(v_, x); }
  explicit BigInt(const std::string& dec) {
    if (mpz_init_set_str(v_, dec.c_str(), 10) != 0) {
      mpz_clear(v_);
      throw std::invalid_argument("BigInt: not a decimal string");
    }
  }
  BigInt(const BigInt& o) { mpz_init_set(v_, o.v_); }
  BigInt& operator=(const BigInt& o) {
    if (this != &o) mpz_set(v_, o.v_);
    return *this;
  }
  ~BigInt() { mpz_clear(v_); }

  mpz_ptr raw() { return v_; }
  mpz_srcptr raw() const { return v_; }

 private:
  mpz_t v_;
};

inline bool mr_witness_composite(const BigInt& n, const BigInt& nm1, const BigInt& d,
                                 unsigned long s, const BigInt& base) {
  BigInt a(base), x;
  mpz_mod(a.raw(), a.raw(), n.raw());
  if (mpz_cmp_ui(a.raw(), 1) <= 0 || mpz_cmp(a.raw(), nm1.raw()) == 0) return false;
  mpz_powm(x.raw(), a.raw(), d.raw(), n.raw());
  if (mpz_cmp_ui(x.raw(), 1) == 0 || mpz_cmp(x.raw(), nm1.raw()) == 0) return false;
  for (unsigned long r = 1; r < s; ++r) {
    mpz_mul(x.raw(), x.raw(), x.raw());
    mpz_mod(x.raw(), x.raw(), n.raw());
    if (mpz_cmp(x.raw(), nm1.raw()) == 0) return false;
  }
  return true;
}

// Strong Lucas test with Selfridge's parameter choice. Assumes n odd, > 2, not a
// perfect square, with no prime factor below 100.
inline bool lucas_strong_probable_prime(const BigInt& n) {
  long d_param = 5;
  BigInt dz;
  for (;;) {
    mpz_set_si(dz.raw(), d_param);
    int j = mpz_jacobi(dz.raw(), n.raw());
    if (j == -1) break;
    if (j == 0) return false;
    d_param = d_param > 0 ? -(d_param + 2) : -(d_param - 2);
  }
  const long q_param = (1 - d_param) / 4;

  BigInt nm_j;  // n + 1
  mpz_add_ui(nm_j.raw(), n.raw(), 1);
  unsigned long s = mpz_scan1(nm_j.raw(), 0);
  BigInt dd;
  mpz_fdiv_q_2exp(dd.raw(), nm_j.raw(), s);

  BigInt u(0ul), v(2ul), qk(1ul), q_mod, t, t2;
  mpz_set_si(q_mod.raw(), q_param);
  mpz_mod(q_mod.raw(), q_mod.raw(), n.raw());

  auto halve_mod = [&](BigInt& x) {
    if (mpz_odd_p(x.raw())) mpz_add(x.raw(), x.raw(), n.raw());
    mpz_fdiv_q_2exp(x.raw(), x.raw(), 1);
    mpz_mod(x.raw(), x.raw(), n.raw());
  };

  const std::size_t bits = mpz_sizeinbase(dd.raw(), 2);
  for (std::size_t i = bits; i-- > 0;) {
    // index doubling: (U, V, Q^k) -> (U*V, V^2 - 2 Q^k, Q^2k)
    mpz_mul(u.raw(), u.raw(), v.raw());
    mpz_mod(u.raw(), u.raw(), n.raw());
    mpz_mul(v.raw(), v.raw(), v.raw());
    mpz_submul_ui(v.raw(), qk.raw(), 2);
    mpz_mod(v.raw(), v.raw(), n.raw());
    mpz_mul(qk.raw(), qk.raw(), qk.raw());
    mpz_mod(qk.raw(), qk.raw(), n.raw());
    if (mpz_tstbit(dd.raw(), static_cast<mp_bitcnt_t>(i))) {
      // increment: U' = (P U + V)/2, V' = (D U + P V)/2 with P = 1
      mpz_add(t.raw(), u.raw(), v.raw());
      mpz_mod(t.raw(), t.raw(), n.raw());
      mpz_set_si(t2.raw(), d_param);
      mpz_mul(t2.raw(), t2.raw(), u.raw());
      mpz_add(t2.raw(), t2.raw(), v.raw());
      mpz_mod(t2.raw(), t2.raw(), n.raw());
      halve_mod(t);
      halve_mod(t2);
      mpz_set(u.raw(), t.raw());
      mpz_set(v.raw(), t2.raw());
      mpz_mul(qk.raw(), qk.raw(), q_mod.raw());
      mpz_mod(qk.raw(), qk.raw(), n.raw());
    }
  }

  if (mpz_sgn(u.raw()) == 0 || mpz_sgn(v.raw()) == 0) return true;
  for (unsigned long r = 1; r < s; ++r) {
    mpz_mul(v.raw(), v.raw(), v.raw());
    mpz_submul_ui(v.raw(), qk.raw(), 2);
    mpz_mod(v.raw(), v.raw(), n.raw());
    if (mpz_sgn(v.raw()) == 0) return true;
    mpz_mul(qk.raw(), qk.raw(), qk.raw());
    mpz_mod(qk.raw(), qk.raw(), n.raw());
  }
  return false;
}

// Deterministic-witness cutoff: largest published bound for the first 13 primes.
inline const char* kDeterministicBound = "3317044064679887385961981";
inline constexpr int kLargeRounds = 64;

inline bool is_prime_mpz(const std::string& dec) {
  BigInt n(dec);
  if (mpz_cmp_ui(n.raw(), 2) < 0) return false;
  for (unsigned long p = 2; p < 100; ++p) {
    if (mpz_divisible_ui_p(n.raw(), p)) return mpz_cmp_ui(n.raw(), p) == 0;
  }

  BigInt nm1, d;
  mpz_sub_ui(nm1.raw(), n.raw(), 1);
  unsigned long s = mpz_scan1(nm1.raw(), 0);
  mpz_fdiv_q_2exp(d.raw(), nm1.raw(), s);

  for (std::uint64_t w : kSmallWitnesses) {
    BigInt base(static_cast<unsigned long>(w));
    if (mr_witness_composite(n, nm1, d, s, base)) return false;
  }
  BigInt bound(kDeterministicBound);
  if (mpz_cmp(n.raw(), bound.raw()) < 0) return true;

  if (mpz_perfect_square_p(n.raw())) return false;
  // Extra rounds with bases derived from the input itself, so the answer is a pure
  // function of n. Any 64-bit base is already below n on this path.
  std::string norm = dec;
  norm.erase(0, norm.find_first_not_of('0'));
  Rng rng(0x8f1bbcdcbfa53e0bULL ^ fnv1a64(norm));
  for (int i = 0; i < kLargeRounds; ++i) {
    BigInt base;
    mpz_set_ui(base.raw(), 0);
    std::uint64_t b = 2 + (rng.next() >> 1);
    mpz_import(base.raw(), 1, 1, sizeof(b), 0, 0, &b);
    if (mr_witness_composite(n, nm1, d, s, base)) return false;
  }
  return lucas_strong_probable_prime(n);
}

}  // namespace detail

// Primality of a decimal string (leading zeros tolerated). Deterministic witnesses
// below 3.3e24; above that, 13 + 64 Miller-Rabin rounds plus a strong Lucas test.
inline bool is_prime_decimal(std::string_view digits) {
  if (digits.empty()) throw std::invalid_argument("is_prime_decimal: empty string");
  for (char c : digits) {
    if (c < '0' || c > '9') throw std::invalid_argument("is_prime_decimal: non-digit character");
  }
  if (digits.size() <= 19) {
    std::uint64_t v = 0;
    for (char c : digits) v = v * 10 + static_cast<std::uint64_t>(c - '0');
    return is_prime_u64(v);
  }
  return detail::is_prime_mpz(std::string(digits));
}

}  // namespace proglearn
