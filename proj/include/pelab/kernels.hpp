#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "pelab/bias_spec.hpp"
#include "pelab/errors.hpp"
#include "pelab/matrix.hpp"

namespace pelab {

// Per-head causal additive bias. Only the lower triangle (j <= i) is
// meaningful; entries above the diagonal are masked structurally by
// position, never by a large-negative sentinel, so exported values stay
// exact. Softmax consumes masked(i, j) directly.
template <typename T>
struct BiasMatrix {
  std::size_t heads = 0;
  std::size_t n = 0;
  std::vector<T> values;  // head-major, n*n each

  BiasMatrix() = default;
  BiasMatrix(std::size_t heads, std::size_t n)
      : heads(heads), n(n), values(heads * n * n, T(0)) {}

  static bool masked(std::size_t i, std::size_t j) { return j > i; }

  T& at(std::size_t h, std::size_t i, std::size_t j) {
    return values[(h * n + i) * n + j];
  }
  T at(std::size_t h, std::size_t i, std::size_t j) const {
    return values[(h * n + i) * n + j];
  }
  const T* row(std::size_t h, std::size_t i) const {
    return values.data() + (h * n + i) * n;
  }
};

// ---------------------------------------------------------------------------
// Closed-form additive biases. The *_from_distance forms take the relative
// distance directly (real-valued, handy for tests); the (i, j) forms check
// the causal precondition 0 <= j <= i.

namespace detail {
inline void check_causal(long i, long j) {
  if (j < 0 || j > i)
    throw InvalidParameter("bias: positions must satisfy 0 <= j <= i");
}
}  // namespace detail

inline double alibi_from_distance(double d, double r) {
  if (!(r > 0)) throw InvalidParameter("alibi: r must be > 0");
  return -r * d;
}

inline double bias_alibi(long i, long j, double r) {
  detail::check_causal(i, j);
  return alibi_from_distance(static_cast<double>(i - j), r);
}

inline double kerple_log_from_distance(double d, double r1, double r2) {
  if (!(r1 > 0) || !(r2 > 0))
    throw InvalidParameter("kerple: r1 and r2 must be > 0");
  return -r1 * std::log(1.0 + r2 * d);
}

inline double kerple_power_from_distance(double d, double r1, double r2) {
  if (!(r1 > 0) || !(r2 > 0))
    throw InvalidParameter("kerple: r1 and r2 must be > 0");
  return -r1 * std::pow(d, r2);
}

enum class KerpleVariant { Log, Power };

inline double bias_kerple(long i, long j, double r1, double r2,
                          KerpleVariant variant) {
  detail::check_causal(i, j);
  const double d = static_cast<double>(i - j);
  return variant == KerpleVariant::Log ? kerple_log_from_distance(d, r1, r2)
                                       : kerple_power_from_distance(d, r1, r2);
}

inline double sandwich_from_distance(double d, double r1, long d_prime) {
  if (d_prime < 1) throw InvalidParameter("sandwich: d' must be >= 1");
  double sum = 0.0;
  for (long k = 1; k <= d_prime; ++k) {
    const double freq =
        std::pow(10000.0, static_cast<double>(k) / static_cast<double>(d_prime));
    sum += std::cos(d / freq);
  }
  return r1 * sum;
}

inline double bias_sandwich(long i, long j, double r1, long d_prime) {
  detail::check_causal(i, j);
  return sandwich_from_distance(static_cast<double>(i - j), r1, d_prime);
}

// ---------------------------------------------------------------------------
// T5 bucketing.

// Linear scan over explicit boundaries: k such that s_k <= d < s_{k+1},
// overflow bucket K for d >= s_K. This is the reference the closed-form
// log-binning is checked against.
inline std::size_t t5_bucket_general(long d, const std::vector<long>& s) {
  if (d < 0) throw InvalidParameter("bucket: distance must be non-negative");
  if (s.empty() || s.front() != 0)
    throw InvalidParameter("bucket: boundaries must start at 0");
  for (std::size_t k = 1; k < s.size(); ++k)
    if (s[k] <= s[k - 1])
      throw InvalidParameter("bucket: boundaries must be strictly increasing");
  std::size_t k = s.size() - 1;
  while (k > 0 && d < s[k]) --k;
  return k;
}

// Closed-form log-binned bucket index: identity below num_buckets/2, then
// logarithmically spaced up to max_distance, overflow bucket above.
inline std::size_t t5_bucket_logbin(long d, long num_buckets,
                                    long max_distance) {
  if (d < 0) throw InvalidParameter("bucket: distance must be non-negative");
  if (num_buckets < 2 || num_buckets % 2 != 0)
    throw InvalidParameter("logbin: num_buckets must be even and >= 2");
  if (max_distance <= num_buckets / 2)
    throw InvalidParameter("logbin: max_distance must exceed num_buckets/2");
  const long half = num_buckets / 2;
  if (d < half) return static_cast<std::size_t>(d);
  if (d >= max_distance) return static_cast<std::size_t>(num_buckets - 1);
  const double ratio =
      std::log(2.0 * static_cast<double>(d) / static_cast<double>(num_buckets)) /
      std::log(2.0 * static_cast<double>(max_distance) /
               static_cast<double>(num_buckets));
  const long k = half + static_cast<long>(std::floor(
                            static_cast<double>(half) * ratio));
  // floor noise at an exact bucket edge cannot push past the overflow bucket
  const long clamped = k < num_buckets - 1 ? k : num_buckets - 1;
  return static_cast<std::size_t>(clamped);
}

// Materialize the log-bin boundaries by inverting the closed form:
// bucket k (k >= half) starts at the smallest integer d with
// half * log(2d/num_buckets) / log(2*max_distance/num_buckets) >= k - half,
// i.e. d >= half * (2*max_distance/num_buckets)^((k-half)/half).
inline std::vector<long> t5_logbin_boundaries(long num_buckets,
                                              long max_distance) {
  if (num_buckets < 2 || num_buckets % 2 != 0)
    throw InvalidParameter("logbin: num_buckets must be even and >= 2");
  if (max_distance <= num_buckets / 2)
    throw InvalidParameter("logbin: max_distance must exceed num_buckets/2");
  const long half = num_buckets / 2;
  std::vector<long> s;
  s.reserve(static_cast<std::size_t>(num_buckets));
  for (long k = 0; k < half; ++k) s.push_back(k);
  const double base = 2.0 * static_cast<double>(max_distance) /
                      static_cast<double>(num_buckets);
  for (long k = half; k < num_buckets; ++k) {
    const double lower =
        static_cast<double>(half) *
        std::pow(base,
                 static_cast<double>(k - half) / static_cast<double>(half));
    long d = static_cast<long>(std::ceil(lower));
    // ceil can sit one off when `lower` lands on a representation edge;
    // settle against the closed form
    while (d > 0 &&
           t5_bucket_logbin(d - 1, num_buckets, max_distance) >=
               static_cast<std::size_t>(k))
      --d;
    while (t5_bucket_logbin(d, num_buckets, max_distance) <
           static_cast<std::size_t>(k))
      ++d;
    s.push_back(d);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Dispatcher and matrix construction.

inline double bias_from_spec(const BiasSpec& spec, long i, long j) {
  detail::check_causal(i, j);
  const long d = i - j;
  switch (spec.variant) {
    case BiasVariant::NoPe:
      return 0.0;
    case BiasVariant::T5Simplified: {
      spec.validate();
      const std::size_t k =
          std::min<std::size_t>(static_cast<std::size_t>(d),
                                spec.values.size() - 1);
      return spec.values[k];
    }
    case BiasVariant::T5Bucketed: {
      spec.validate();
      return spec.values[t5_bucket_general(d, spec.boundaries)];
    }
    case BiasVariant::T5LogBin: {
      spec.validate();
      return spec.values[t5_bucket_logbin(d, spec.num_buckets,
                                          spec.max_distance)];
    }
    case BiasVariant::Alibi:
      return bias_alibi(i, j, spec.r);
    case BiasVariant::KerpleLog:
      return bias_kerple(i, j, spec.r1, spec.r2, KerpleVariant::Log);
    case BiasVariant::KerplePower:
      return bias_kerple(i, j, spec.r1, spec.r2, KerpleVariant::Power);
    case BiasVariant::Sandwich:
      return bias_sandwich(i, j, spec.r1, spec.d_prime);
  }
  throw InvalidParameter("bias_from_spec: unhandled variant");
}

// Single-head causal bias matrix for the spec. All variants here depend on
// the distance only, so each distinct d is evaluated once and broadcast
// along the diagonals; this is bit-identical to the entrywise loop.
template <typename T = double>
BiasMatrix<T> build_bias_matrix(const BiasSpec& spec, std::size_t n) {
  if (n == 0) throw EmptyInput("build_bias_matrix: n must be >= 1");
  spec.validate();
  BiasMatrix<T> m(1, n);
  std::vector<T> by_distance(n);
  for (std::size_t d = 0; d < n; ++d)
    by_distance[d] =
        static_cast<T>(bias_from_spec(spec, static_cast<long>(d), 0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) m.at(0, i, j) = by_distance[i - j];
  return m;
}

}  // namespace pelab
