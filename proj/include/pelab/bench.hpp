#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pelab/bias_spec.hpp"
#include "pelab/errors.hpp"
#include "pelab/fire.hpp"
#include "pelab/kernels.hpp"
#include "pelab/microlm.hpp"

namespace pelab {

struct BenchResult {
  std::string variant;
  std::size_t seq_len = 0;
  std::size_t layers = 0;
  bool shared = false;
  std::size_t reps = 0;
  double min_ns = 0.0;
  double median_ns = 0.0;
  double mean_ns = 0.0;
  double checksum = 0.0;
};

namespace detail {

inline constexpr std::size_t kWarmupReps = 3;

inline void compiler_barrier(const void* p) {
  asm volatile("" : : "g"(p) : "memory");
}

inline double elapsed_ns(std::chrono::steady_clock::time_point t0,
                         std::chrono::steady_clock::time_point t1) {
  return static_cast<double>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
}

inline void summarize(std::vector<double> times, BenchResult& result) {
  std::sort(times.begin(), times.end());
  result.min_ns = times.front();
  result.median_ns = times[times.size() / 2];
  double sum = 0.0;
  for (double t : times) sum += t;
  result.mean_ns = sum / static_cast<double>(times.size());
}

// Strided read keeps the consumed-value check cheap next to the build.
inline double strided_sum(const BiasMatrix<double>& m) {
  double sum = 0.0;
  for (std::size_t k = 0; k < m.values.size(); k += 97) sum += m.values[k];
  return sum;
}

// Timed region covers construction only. Shared mode builds the bias once
// per rep regardless of layer count; unshared rebuilds per layer. The
// checksum is accumulated per layer outside the timed region, so it is
// identical for both modes given equal parameters.
inline BenchResult run_bias_bench(
    const std::function<void(BiasMatrix<double>&)>& build,
    std::string variant, std::size_t seq_len, std::size_t layers, bool shared,
    std::size_t reps) {
  if (reps < 10) throw InvalidParameter("bench: reps must be >= 10");
  if (layers == 0) throw InvalidParameter("bench: layers must be >= 1");
  BenchResult result;
  result.variant = std::move(variant);
  result.seq_len = seq_len;
  result.layers = layers;
  result.shared = shared;
  result.reps = reps;

  BiasMatrix<double> buffer;  // reused across reps; allocation untimed
  build(buffer);

  std::vector<double> times;
  times.reserve(reps);
  for (std::size_t rep = 0; rep < kWarmupReps + reps; ++rep) {
    const auto t0 = std::chrono::steady_clock::now();
    if (shared) {
      build(buffer);
      compiler_barrier(buffer.values.data());
    } else {
      for (std::size_t l = 0; l < layers; ++l) {
        build(buffer);
        compiler_barrier(buffer.values.data());
      }
    }
    const auto t1 = std::chrono::steady_clock::now();
    if (rep >= kWarmupReps) times.push_back(elapsed_ns(t0, t1));
  }
  // consume per layer: the shared build is reused by every layer
  result.checksum = 0.0;
  for (std::size_t l = 0; l < layers; ++l)
    result.checksum += strided_sum(buffer);
  summarize(std::move(times), result);
  return result;
}

}  // namespace detail

inline BenchResult time_bias_construction(const BiasSpec& spec,
                                          std::size_t seq_len,
                                          std::size_t layers, bool shared,
                                          std::size_t reps) {
  spec.validate();
  return detail::run_bias_bench(
      [&](BiasMatrix<double>& out) { out = build_bias_matrix(spec, seq_len); },
      variant_name(spec.variant), seq_len, layers, shared, reps);
}

inline BenchResult time_bias_construction(const FireParams<double>& fire,
                                          std::size_t seq_len,
                                          std::size_t layers, bool shared,
                                          std::size_t reps) {
  fire.validate();
  return detail::run_bias_bench(
      [&](BiasMatrix<double>& out) { out = fire_bias_matrix(seq_len, fire); },
      shared ? "FIRE-S" : "FIRE", seq_len, layers, shared, reps);
}

// End-to-end forward wall time on seeded weights and tokens; the positional
// encoding is the only thing that differs between variants built from the
// same base config and seed.
template <typename T = float>
BenchResult time_attention_forward(const ModelConfig& cfg, std::size_t seq_len,
                                   std::size_t reps, std::uint64_t seed,
                                   const std::string& variant = "") {
  if (reps < 10) throw InvalidParameter("bench: reps must be >= 10");
  cfg.validate();
  BenchResult result;
  result.variant = variant.empty() ? pe_kind_name(cfg.pe.kind) : variant;
  result.seq_len = seq_len;
  result.layers = cfg.num_layers;
  result.shared = cfg.share_pe_across_layers;
  result.reps = reps;

  ModelParams<T> params = init_model_params<T>(cfg, seed);
  Rng rng = make_rng(seed + 1);
  std::vector<int> tokens(seq_len);
  for (auto& t : tokens)
    t = static_cast<int>(uniform_int(rng, 0, static_cast<long>(cfg.vocab_size) - 1));

  ForwardCache<T> cache;
  std::vector<double> times;
  times.reserve(reps);
  double checksum = 0.0;
  for (std::size_t rep = 0; rep < detail::kWarmupReps + reps; ++rep) {
    const auto t0 = std::chrono::steady_clock::now();
    forward_lm(tokens, params, cache);
    detail::compiler_barrier(cache.logits.data());
    const auto t1 = std::chrono::steady_clock::now();
    if (rep >= detail::kWarmupReps) times.push_back(detail::elapsed_ns(t0, t1));
  }
  for (std::size_t k = 0; k < cache.logits.size(); k += 97)
    checksum += static_cast<double>(cache.logits.data()[k]);
  result.checksum = checksum;
  detail::summarize(std::move(times), result);
  return result;
}

// Least-squares slope of ys over xs; used by the amortization checks.
inline double fit_slope(const std::vector<double>& xs,
                        const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw InvalidParameter("fit_slope: need matching series of length >= 2");
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    mx += xs[k];
    my += ys[k];
  }
  mx /= static_cast<double>(xs.size());
  my /= static_cast<double>(xs.size());
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    num += (xs[k] - mx) * (ys[k] - my);
    den += (xs[k] - mx) * (xs[k] - mx);
  }
  return num / den;
}

}  // namespace pelab
