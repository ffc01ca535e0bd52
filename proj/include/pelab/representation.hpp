#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pelab/bias_spec.hpp"
#include "pelab/errors.hpp"
#include "pelab/fire.hpp"
#include "pelab/kernels.hpp"
#include "pelab/rng.hpp"

namespace pelab {

enum class ConstructionCase { T5, Alibi, KerpleLog, KerplePower, Sandwich };

inline const char* construction_name(ConstructionCase c) {
  switch (c) {
    case ConstructionCase::T5: return "t5";
    case ConstructionCase::Alibi: return "alibi";
    case ConstructionCase::KerpleLog: return "kerple_log";
    case ConstructionCase::KerplePower: return "kerple_power";
    case ConstructionCase::Sandwich: return "sandwich";
  }
  return "?";
}

struct ConstructionRequest {
  BiasSpec target;
  long l0 = 0;  // grid bound: equality holds on 0 < j <= i <= l0

  void validate() const {
    if (l0 < 1) throw InvalidParameter("construction: L0 must be >= 1");
    target.validate();
    if (target.variant == BiasVariant::NoPe)
      throw InvalidParameter("construction: NoPE has nothing to represent");
  }
};

// Exact FIRE parameters reproducing one baseline on the finite grid. The
// params may carry construction-only activation tags (step/power/cos); the
// fire module refuses gradients for those.
struct ConstructionResult {
  FireParams<double> fire;
  ConstructionCase provenance;
};

namespace detail {

// Shared scaffold: threshold pinned at L0, eps forced to 0 (the proofs
// assume exact division), single head.
inline FireParams<double> construction_base(long l0, PsiKind psi, double c) {
  FireParams<double> fire;
  fire.heads = 1;
  fire.psi = psi;
  fire.c = c;
  fire.init_L = static_cast<double>(l0);
  fire.L_multiplier = 1.0;
  fire.eps = 0.0;
  fire.use_threshold = true;
  return fire;
}

// Normalize the three T5 spec flavors onto explicit boundaries + values.
inline void t5_buckets(const BiasSpec& spec, std::vector<long>& boundaries,
                       std::vector<double>& values) {
  switch (spec.variant) {
    case BiasVariant::T5Simplified:
      boundaries.clear();
      for (std::size_t k = 0; k < spec.values.size(); ++k)
        boundaries.push_back(static_cast<long>(k));
      values = spec.values;
      break;
    case BiasVariant::T5Bucketed:
      boundaries = spec.boundaries;
      values = spec.values;
      break;
    case BiasVariant::T5LogBin:
      boundaries = t5_logbin_boundaries(spec.num_buckets, spec.max_distance);
      values = spec.values;
      break;
    default:
      throw InvalidParameter("construct_t5: target is not a T5 variant");
  }
}

}  // namespace detail

// Two-layer step-activation MLP, one hidden unit per interior boundary:
// f(x) = v2ᵀ 1{L0·x + b1 >= 0} + r_0 with b1 = [-s_1..-s_K] and
// v2 = [r_1-r_0, ..., r_K-r_{K-1}]. With psi = identity and threshold L0
// the MLP input is (i-j)/L0, so preactivations are the integers (i-j)-s_k
// (exact whenever d/L0 round-trips, e.g. any power-of-two L0).
inline ConstructionResult construct_t5(const BiasSpec& target, long l0) {
  if (l0 < 1) throw InvalidParameter("construct_t5: L0 must be >= 1");
  target.validate();
  std::vector<long> boundaries;
  std::vector<double> values;
  detail::t5_buckets(target, boundaries, values);
  if (boundaries.back() > l0)
    throw ConstructionOutOfRange(
        "construct_t5: largest boundary exceeds the grid bound L0");

  FireParams<double> fire =
      detail::construction_base(l0, PsiKind::Identity, 1.0);
  const std::size_t K = boundaries.size() - 1;  // interior boundaries s_1..s_K
  if (K == 0) {
    // single bucket: the hidden sum is empty and only the output bias is left
    AffineLayer<double> out;
    out.weight = Matrix<double>(1, 1, 0.0);
    out.bias = {values[0]};
    fire.mlp.layers.push_back(std::move(out));
  } else {
    AffineLayer<double> hidden;
    hidden.weight = Matrix<double>(K, 1, static_cast<double>(l0));
    hidden.bias.resize(K);
    for (std::size_t k = 0; k < K; ++k)
      hidden.bias[k] = -static_cast<double>(boundaries[k + 1]);
    AffineLayer<double> out;
    out.weight = Matrix<double>(1, K);
    for (std::size_t k = 0; k < K; ++k)
      out.weight(0, k) = values[k + 1] - values[k];
    out.bias = {values[0]};
    fire.mlp.layers.push_back(std::move(hidden));
    fire.mlp.layers.push_back(std::move(out));
    fire.mlp.hidden_activations.push_back({Activation::Step, 1.0});
  }
  fire.validate();
  return {std::move(fire), ConstructionCase::T5};
}

// Single affine layer f(x) = -r·L0·x: f((i-j)/L0) = -r(i-j).
inline ConstructionResult construct_alibi(double r, long l0) {
  if (!(r > 0)) throw InvalidParameter("construct_alibi: r must be > 0");
  if (l0 < 1) throw InvalidParameter("construct_alibi: L0 must be >= 1");
  FireParams<double> fire =
      detail::construction_base(l0, PsiKind::Identity, 1.0);
  AffineLayer<double> layer;
  layer.weight = Matrix<double>(1, 1, -r * static_cast<double>(l0));
  fire.mlp.layers.push_back(std::move(layer));
  fire.validate();
  return {std::move(fire), ConstructionCase::Alibi};
}

// psi(x) = log(r2·x + 1) and f(x) = -r1·log(1 + r2·L0)·x, so the
// normalizer cancels into -r1·log(1 + r2(i-j)).
inline ConstructionResult construct_kerple_log(double r1, double r2, long l0) {
  if (!(r1 > 0) || !(r2 > 0))
    throw InvalidParameter("construct_kerple_log: r1, r2 must be > 0");
  if (l0 < 1) throw InvalidParameter("construct_kerple_log: L0 must be >= 1");
  FireParams<double> fire = detail::construction_base(l0, PsiKind::Log, r2);
  AffineLayer<double> layer;
  layer.weight = Matrix<double>(
      1, 1, -r1 * std::log(1.0 + r2 * static_cast<double>(l0)));
  fire.mlp.layers.push_back(std::move(layer));
  fire.validate();
  return {std::move(fire), ConstructionCase::KerpleLog};
}

// Two-layer MLP with one hidden unit and activation x^{r2}:
// f(x) = -( r1^{1/r2}·L0·x )^{r2} = -r1(i-j)^{r2}. The hidden
// preactivation is non-negative on the causal grid, so the fractional
// power stays in-domain.
inline ConstructionResult construct_kerple_power(double r1, double r2,
                                                 long l0) {
  if (!(r1 > 0) || !(r2 > 0))
    throw InvalidParameter("construct_kerple_power: r1, r2 must be > 0");
  if (l0 < 1)
    throw InvalidParameter("construct_kerple_power: L0 must be >= 1");
  FireParams<double> fire =
      detail::construction_base(l0, PsiKind::Identity, 1.0);
  AffineLayer<double> hidden;
  hidden.weight = Matrix<double>(
      1, 1, std::pow(r1, 1.0 / r2) * static_cast<double>(l0));
  AffineLayer<double> out;
  out.weight = Matrix<double>(1, 1, -1.0);
  fire.mlp.layers.push_back(std::move(hidden));
  fire.mlp.layers.push_back(std::move(out));
  fire.mlp.hidden_activations.push_back({Activation::Power, r2});
  fire.validate();
  return {std::move(fire), ConstructionCase::KerplePower};
}

// Two-layer MLP with cos activation, d' hidden units:
// f(x) = r1·Σ_k cos( (L0/10000^{k/d'})·x ).
inline ConstructionResult construct_sandwich(double r1, long d_prime,
                                             long l0) {
  if (d_prime < 1)
    throw InvalidParameter("construct_sandwich: d' must be >= 1");
  if (l0 < 1) throw InvalidParameter("construct_sandwich: L0 must be >= 1");
  FireParams<double> fire =
      detail::construction_base(l0, PsiKind::Identity, 1.0);
  AffineLayer<double> hidden;
  hidden.weight = Matrix<double>(static_cast<std::size_t>(d_prime), 1);
  for (long k = 1; k <= d_prime; ++k)
    hidden.weight(static_cast<std::size_t>(k - 1), 0) =
        static_cast<double>(l0) /
        std::pow(10000.0,
                 static_cast<double>(k) / static_cast<double>(d_prime));
  AffineLayer<double> out;
  out.weight = Matrix<double>(1, static_cast<std::size_t>(d_prime), r1);
  fire.mlp.layers.push_back(std::move(hidden));
  fire.mlp.layers.push_back(std::move(out));
  fire.mlp.hidden_activations.push_back({Activation::Cos, 1.0});
  fire.validate();
  return {std::move(fire), ConstructionCase::Sandwich};
}

// Route any supported target spec to its construction.
inline ConstructionResult construct_for_spec(const BiasSpec& target, long l0) {
  switch (target.variant) {
    case BiasVariant::T5Simplified:
    case BiasVariant::T5Bucketed:
    case BiasVariant::T5LogBin:
      return construct_t5(target, l0);
    case BiasVariant::Alibi:
      return construct_alibi(target.r, l0);
    case BiasVariant::KerpleLog:
      return construct_kerple_log(target.r1, target.r2, l0);
    case BiasVariant::KerplePower:
      return construct_kerple_power(target.r1, target.r2, l0);
    case BiasVariant::Sandwich:
      return construct_sandwich(target.r1, target.d_prime, l0);
    case BiasVariant::NoPe:
      throw InvalidParameter("construct_for_spec: NoPE has nothing to represent");
  }
  throw InvalidParameter("construct_for_spec: unhandled variant");
}

// Max |b_FIRE - b_0| over the theorem grid 0 < j <= i <= L0. The theorem
// grid is 1-based; the engine is 0-based, so pair (i, j) maps to matrix
// cell (i-1, j-1). Both sides run in double precision.
inline double verify_representation(const ConstructionResult& result,
                                    const BiasSpec& target, long l0) {
  if (l0 < 1) throw InvalidParameter("verify: L0 must be >= 1");
  target.validate();
  const BiasMatrix<double> fire =
      fire_bias_matrix(static_cast<std::size_t>(l0), result.fire);
  double max_err = 0.0;
  for (long i = 1; i <= l0; ++i) {
    for (long j = 1; j <= i; ++j) {
      const double lhs = fire.at(0, static_cast<std::size_t>(i - 1),
                                 static_cast<std::size_t>(j - 1));
      const double rhs = bias_from_spec(target, i, j);
      const double err = std::abs(lhs - rhs);
      if (err > max_err) max_err = err;
    }
  }
  return max_err;
}

// Seeded target draw for one construction case; used by the verification
// CLI and the test suites.
inline BiasSpec draw_target_spec(ConstructionCase c, std::uint64_t seed,
                                 long l0) {
  Rng rng = make_rng(seed);
  BiasSpec spec;
  switch (c) {
    case ConstructionCase::T5: {
      spec.variant = BiasVariant::T5Bucketed;
      const long buckets = uniform_int(rng, 2, 8);
      spec.boundaries.push_back(0);
      long cursor = 0;
      const long headroom = std::max<long>(1, l0 / (buckets + 1));
      for (long k = 1; k < buckets; ++k) {
        cursor += uniform_int(rng, 1, headroom);
        spec.boundaries.push_back(cursor);
      }
      for (long k = 0; k < buckets; ++k)
        spec.values.push_back(uniform_real(rng, -2.0, 2.0));
      break;
    }
    case ConstructionCase::Alibi:
      spec.variant = BiasVariant::Alibi;
      spec.r = uniform_real(rng, 0.1, 2.0);
      break;
    case ConstructionCase::KerpleLog:
      spec.variant = BiasVariant::KerpleLog;
      spec.r1 = uniform_real(rng, 0.1, 2.0);
      spec.r2 = uniform_real(rng, 0.1, 2.0);
      break;
    case ConstructionCase::KerplePower:
      spec.variant = BiasVariant::KerplePower;
      spec.r1 = uniform_real(rng, 0.1, 2.0);
      spec.r2 = uniform_real(rng, 0.5, 2.0);
      break;
    case ConstructionCase::Sandwich: {
      spec.variant = BiasVariant::Sandwich;
      spec.r1 = uniform_real(rng, 0.25, 2.0) *
                (uniform_unit(rng) < 0.5 ? -1.0 : 1.0);
      spec.d_prime = uniform_int(rng, 1, 8);
      break;
    }
  }
  spec.validate();
  return spec;
}

constexpr ConstructionCase kAllConstructionCases[] = {
    ConstructionCase::T5, ConstructionCase::Alibi, ConstructionCase::KerpleLog,
    ConstructionCase::KerplePower, ConstructionCase::Sandwich};

}  // namespace pelab
