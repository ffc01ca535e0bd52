#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pelab/activations.hpp"
#include "pelab/errors.hpp"
#include "pelab/kernels.hpp"
#include "pelab/matrix.hpp"
#include "pelab/rng.hpp"

namespace pelab {

enum class PsiKind { Identity, Log };

inline const char* psi_name(PsiKind p) {
  return p == PsiKind::Identity ? "identity" : "log";
}

inline PsiKind psi_from_name(const std::string& name) {
  if (name == "identity") return PsiKind::Identity;
  if (name == "log") return PsiKind::Log;
  throw InvalidParameter("unknown psi tag: " + name);
}

template <typename T>
struct AffineLayer {
  Matrix<T> weight;     // out×in
  std::vector<T> bias;  // size out, or empty for no bias term
};

// f(x) = final_act(W_n(...act_1(W_1 x + b_1)...) + b_n). Input width 1,
// output width H. Hidden activations are per-layer tags; the final
// activation defaults to absent.
template <typename T>
struct MlpParams {
  std::vector<AffineLayer<T>> layers;
  std::vector<ActivationTag> hidden_activations;
  std::optional<ActivationTag> final_activation;

  std::size_t input_dim() const {
    return layers.empty() ? 0 : layers.front().weight.cols();
  }
  std::size_t output_dim() const {
    return layers.empty() ? 0 : layers.back().weight.rows();
  }

  void validate() const {
    if (layers.empty()) throw InvalidParameter("mlp: needs at least one layer");
    if (input_dim() != 1) throw InvalidParameter("mlp: input width must be 1");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& layer = layers[l];
      if (layer.weight.rows() == 0 || layer.weight.cols() == 0)
        throw InvalidParameter("mlp: empty weight matrix");
      if (!layer.bias.empty() && layer.bias.size() != layer.weight.rows())
        throw InvalidParameter("mlp: bias length must match output width");
      if (l > 0 && layers[l - 1].weight.rows() != layer.weight.cols())
        throw InvalidParameter("mlp: consecutive layer widths incompatible");
    }
    if (hidden_activations.size() != layers.size() - 1)
      throw InvalidParameter("mlp: need one activation tag per hidden layer");
  }

  bool differentiable() const {
    for (const auto& tag : hidden_activations)
      if (!tag.differentiable()) return false;
    if (final_activation && !final_activation->differentiable()) return false;
    return true;
  }
};

template <typename T>
struct FireParams {
  MlpParams<T> mlp;
  T c = static_cast<T>(0.1);          // log-transform scale, used as |c|
  T init_L = static_cast<T>(512);     // fixed
  T L_multiplier = static_cast<T>(1); // trainable; L = |L_multiplier * init_L|
  T eps = static_cast<T>(1e-6);
  PsiKind psi = PsiKind::Log;
  bool use_threshold = true;
  std::size_t heads = 1;

  T threshold() const { return std::abs(L_multiplier * init_L); }

  void validate() const {
    mlp.validate();
    if (mlp.output_dim() != heads)
      throw InvalidParameter("fire: mlp output width must equal head count");
    if (!(eps >= T(0))) throw InvalidParameter("fire: eps must be >= 0");
    if (psi == PsiKind::Log && c == T(0))
      throw InvalidParameter("fire: log transform needs c != 0");
    if (use_threshold && !(threshold() >= T(1)))
      throw InvalidParameter("fire: effective threshold |L_multiplier*init_L| "
                             "must be >= 1");
  }
};

namespace detail {
template <typename T>
T sign(T x) {
  return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0));
}
}  // namespace detail

// psi(x): identity -> x, log -> ln(|c| x + 1). Strictly increasing,
// psi(0) = 0.
template <typename T>
T psi(T x, const FireParams<T>& params) {
  if (x < T(0)) throw DomainError("psi: input must be non-negative");
  if (params.psi == PsiKind::Identity) return x;
  return std::log(std::abs(params.c) * x + T(1));
}

namespace detail {

// Everything downstream needs about one (i, j) evaluation of the
// progressive-interpolation input.
template <typename T>
struct DistanceParts {
  T x;    // normalized distance, the MLP input
  T num;  // psi(d)
  T den;  // psi(m) + eps
  T m;    // normalizer argument max{L, i} (or i without threshold)
  bool threshold_branch;  // m taken from the learnable threshold
};

template <typename T>
DistanceParts<T> normalized_distance_parts(long i, long j,
                                           const FireParams<T>& params) {
  if (j < 0 || j > i)
    throw InvalidParameter("fire: positions must satisfy 0 <= j <= i");
  const T d = static_cast<T>(i - j);
  DistanceParts<T> parts{};
  if (params.use_threshold) {
    const T threshold = params.threshold();
    const T pos = static_cast<T>(i);
    // ties route to the threshold branch, matching max(positions, L)
    parts.threshold_branch = threshold >= pos;
    parts.m = parts.threshold_branch ? threshold : pos;
  } else {
    if (i == 0)
      throw DegeneratePosition(
          "fire: query position 0 has no normalizer without thresholding");
    parts.threshold_branch = false;
    parts.m = static_cast<T>(i);
  }
  parts.num = psi(d, params);
  parts.den = psi(parts.m, params) + params.eps;
  parts.x = parts.num / parts.den;
  return parts;
}

}  // namespace detail

// psi(i-j) / (psi(max{L, i}) + eps); the threshold keeps the normalizer
// positive for every query position including 0.
template <typename T>
T normalized_distance(long i, long j, const FireParams<T>& params) {
  return detail::normalized_distance_parts(i, j, params).x;
}

// ---------------------------------------------------------------------------
// MLP evaluation.

template <typename T>
struct MlpCache {
  std::vector<std::vector<T>> inputs;   // a_{l-1} fed into layer l; inputs[0] = {x}
  std::vector<std::vector<T>> preacts;  // z_l = W_l a_{l-1} + b_l
  std::vector<T> out;
};

template <typename T>
void mlp_forward_cached(T x, const MlpParams<T>& mlp, MlpCache<T>& cache) {
  mlp.validate();
  const std::size_t n_layers = mlp.layers.size();
  cache.inputs.assign(n_layers, {});
  cache.preacts.assign(n_layers, {});
  std::vector<T> act{x};
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto& layer = mlp.layers[l];
    cache.inputs[l] = act;
    std::vector<T> z(layer.weight.rows(), T(0));
    for (std::size_t o = 0; o < layer.weight.rows(); ++o) {
      T acc = layer.bias.empty() ? T(0) : layer.bias[o];
      for (std::size_t in = 0; in < layer.weight.cols(); ++in)
        acc += layer.weight(o, in) * act[in];
      z[o] = acc;
    }
    cache.preacts[l] = z;
    if (l + 1 < n_layers) {
      const auto& tag = mlp.hidden_activations[l];
      act.assign(z.size(), T(0));
      for (std::size_t o = 0; o < z.size(); ++o)
        act[o] = activation_eval(tag, z[o]);
    } else {
      act = z;
      if (mlp.final_activation)
        for (auto& v : act) v = activation_eval(*mlp.final_activation, v);
    }
  }
  cache.out = act;
}

template <typename T>
std::vector<T> mlp_forward(T x, const MlpParams<T>& mlp) {
  MlpCache<T> cache;
  mlp_forward_cached(x, mlp, cache);
  return cache.out;
}

// b(i, j) = f_theta(psi(i-j) / psi(max{L, i})), one value per head.
template <typename T>
std::vector<T> fire_bias(long i, long j, const FireParams<T>& params) {
  params.validate();
  return mlp_forward(normalized_distance(i, j, params), params.mlp);
}

// ---------------------------------------------------------------------------
// Batched bias matrix. Rows whose normalizer is clamped to the threshold all
// share it, so the MLP runs once per distinct distance there and the result
// is broadcast along diagonals; unclamped rows are evaluated per row. The
// arithmetic is identical to the entrywise loop, so results match to the bit.

template <typename T>
BiasMatrix<T> fire_bias_matrix(std::size_t n, const FireParams<T>& params) {
  if (n == 0) throw EmptyInput("fire_bias_matrix: n must be >= 1");
  params.validate();
  BiasMatrix<T> out(params.heads, n);
  const std::size_t heads = params.heads;

  // rows [0, clamped_rows) share the threshold normalizer
  std::size_t clamped_rows = 0;
  if (params.use_threshold) {
    const T threshold = params.threshold();
    while (clamped_rows < n &&
           threshold >= static_cast<T>(clamped_rows))
      ++clamped_rows;
  }

  if (clamped_rows > 0) {
    std::vector<T> per_head;
    for (std::size_t d = 0; d < clamped_rows; ++d) {
      per_head = mlp_forward(
          detail::normalized_distance_parts(static_cast<long>(d), 0, params).x,
          params.mlp);
      for (std::size_t h = 0; h < heads; ++h) {
        const T value = per_head[h];
        for (std::size_t i = d; i < clamped_rows; ++i)
          out.at(h, i, i - d) = value;
      }
    }
  }
  for (std::size_t i = clamped_rows; i < n; ++i) {
    for (std::size_t d = 0; d <= i; ++d) {
      const auto bias = mlp_forward(
          detail::normalized_distance_parts(static_cast<long>(i),
                                            static_cast<long>(i - d), params)
              .x,
          params.mlp);
      for (std::size_t h = 0; h < heads; ++h) out.at(h, i, i - d) = bias[h];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gradients.

template <typename T>
struct AffineGrads {
  Matrix<T> weight;
  std::vector<T> bias;  // empty when the layer has no bias
};

template <typename T>
struct FireGrads {
  std::vector<AffineGrads<T>> layers;
  T c = T(0);
  T L_multiplier = T(0);

  static FireGrads zeros_like(const FireParams<T>& params) {
    FireGrads g;
    g.layers.reserve(params.mlp.layers.size());
    for (const auto& layer : params.mlp.layers) {
      AffineGrads<T> lg;
      lg.weight = Matrix<T>(layer.weight.rows(), layer.weight.cols(), T(0));
      lg.bias.assign(layer.bias.size(), T(0));
      g.layers.push_back(std::move(lg));
    }
    return g;
  }

  void accumulate(const FireGrads& other) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto dst = layers[l].weight.flat();
      auto src = other.layers[l].weight.flat();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
      for (std::size_t k = 0; k < layers[l].bias.size(); ++k)
        layers[l].bias[k] += other.layers[l].bias[k];
    }
    c += other.c;
    L_multiplier += other.L_multiplier;
  }
};

namespace detail {

template <typename T>
void require_differentiable(const FireParams<T>& params) {
  if (!params.mlp.differentiable())
    throw NonDifferentiableConfig(
        "fire_grad: params carry construction-only activation tags");
}

// Backward through the MLP alone. Accumulates parameter gradients into
// `grads` and returns dL/dx.
template <typename T>
T mlp_backward_accumulate(const MlpParams<T>& mlp, const MlpCache<T>& cache,
                          const std::vector<T>& upstream,
                          FireGrads<T>& grads) {
  const std::size_t n_layers = mlp.layers.size();
  std::vector<T> delta = upstream;  // dL/d(output of current layer)
  if (mlp.final_activation) {
    const auto& z = cache.preacts[n_layers - 1];
    for (std::size_t o = 0; o < delta.size(); ++o)
      delta[o] *= activation_derivative(*mlp.final_activation, z[o]);
  }
  for (std::size_t l = n_layers; l-- > 0;) {
    const auto& layer = mlp.layers[l];
    auto& lg = grads.layers[l];
    const auto& input = cache.inputs[l];
    // delta is dL/dz_l here
    for (std::size_t o = 0; o < layer.weight.rows(); ++o) {
      for (std::size_t in = 0; in < layer.weight.cols(); ++in)
        lg.weight(o, in) += delta[o] * input[in];
      if (!lg.bias.empty()) lg.bias[o] += delta[o];
    }
    std::vector<T> d_input(layer.weight.cols(), T(0));
    for (std::size_t o = 0; o < layer.weight.rows(); ++o)
      for (std::size_t in = 0; in < layer.weight.cols(); ++in)
        d_input[in] += delta[o] * layer.weight(o, in);
    if (l == 0) return d_input[0];
    const auto& tag = mlp.hidden_activations[l - 1];
    const auto& z_prev = cache.preacts[l - 1];
    delta.assign(z_prev.size(), T(0));
    for (std::size_t o = 0; o < z_prev.size(); ++o)
      delta[o] = d_input[o] * activation_derivative(tag, z_prev[o]);
  }
  return T(0);  // unreachable
}

// d psi(t) / d t at fixed c.
template <typename T>
T psi_slope(T t, const FireParams<T>& params) {
  if (params.psi == PsiKind::Identity) return T(1);
  const T ca = std::abs(params.c);
  return ca / (ca * t + T(1));
}

// d psi(t) / d c (t fixed). |c| differentiates through sign(c), sign(0)=0.
template <typename T>
T psi_dc(T t, const FireParams<T>& params) {
  if (params.psi == PsiKind::Identity) return T(0);
  const T ca = std::abs(params.c);
  return t * sign(params.c) / (ca * t + T(1));
}

}  // namespace detail

// Analytic gradients of fire_bias(i, j) against every MLP entry, c, and
// L_multiplier, contracted with `upstream` (one weight per head).
template <typename T>
FireGrads<T> fire_grad(long i, long j, const FireParams<T>& params,
                       const std::vector<T>& upstream) {
  params.validate();
  detail::require_differentiable(params);
  if (upstream.size() != params.heads)
    throw InvalidParameter("fire_grad: upstream length must equal heads");

  FireGrads<T> grads = FireGrads<T>::zeros_like(params);
  const auto parts = detail::normalized_distance_parts(i, j, params);
  MlpCache<T> cache;
  mlp_forward_cached(parts.x, params.mlp, cache);
  const T d_x =
      detail::mlp_backward_accumulate(params.mlp, cache, upstream, grads);

  const T dist = static_cast<T>(i - j);
  const T den2 = parts.den * parts.den;
  if (params.psi == PsiKind::Log) {
    const T dnum_dc = detail::psi_dc(dist, params);
    const T dden_dc = detail::psi_dc(parts.m, params);
    grads.c = d_x * (dnum_dc * parts.den - parts.num * dden_dc) / den2;
  }
  if (params.use_threshold && parts.threshold_branch) {
    // m = |L_multiplier * init_L|; the position branch is constant in it
    const T dden_dm = detail::psi_slope(parts.m, params);
    const T dm = detail::sign(params.L_multiplier) * params.init_L;
    grads.L_multiplier = d_x * (-parts.num / den2) * dden_dm * dm;
  }
  return grads;
}

// Batched gradient of an n×n bias matrix against FIRE parameters, given the
// upstream gradient for every lower-triangle cell. Upstream layout matches
// BiasMatrix (head-major, n*n). Cells above the diagonal are ignored.
template <typename T>
FireGrads<T> fire_bias_matrix_grad(std::size_t n, const FireParams<T>& params,
                                   const BiasMatrix<T>& upstream) {
  params.validate();
  detail::require_differentiable(params);
  if (upstream.heads != params.heads || upstream.n != n)
    throw InvalidParameter("fire_bias_matrix_grad: upstream shape mismatch");

  FireGrads<T> grads = FireGrads<T>::zeros_like(params);
  const std::size_t heads = params.heads;

  std::size_t clamped_rows = 0;
  if (params.use_threshold) {
    const T threshold = params.threshold();
    while (clamped_rows < n && threshold >= static_cast<T>(clamped_rows))
      ++clamped_rows;
  }

  MlpCache<T> cache;
  std::vector<T> upstream_sum(heads, T(0));

  // Clamped rows share (normalizer, distance) cells: one backward per d.
  for (std::size_t d = 0; d < clamped_rows; ++d) {
    std::fill(upstream_sum.begin(), upstream_sum.end(), T(0));
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t i = d; i < clamped_rows; ++i)
        upstream_sum[h] += upstream.at(h, i, i - d);
    const auto parts =
        detail::normalized_distance_parts(static_cast<long>(d), 0, params);
    mlp_forward_cached(parts.x, params.mlp, cache);
    const T d_x =
        detail::mlp_backward_accumulate(params.mlp, cache, upstream_sum, grads);
    const T dist = static_cast<T>(d);
    const T den2 = parts.den * parts.den;
    if (params.psi == PsiKind::Log)
      grads.c += d_x *
                 (detail::psi_dc(dist, params) * parts.den -
                  parts.num * detail::psi_dc(parts.m, params)) /
                 den2;
    if (parts.threshold_branch)
      grads.L_multiplier += d_x * (-parts.num / den2) *
                            detail::psi_slope(parts.m, params) *
                            detail::sign(params.L_multiplier) * params.init_L;
  }
  // Unclamped rows: per-cell.
  std::vector<T> cell_upstream(heads, T(0));
  for (std::size_t i = clamped_rows; i < n; ++i) {
    for (std::size_t d = 0; d <= i; ++d) {
      for (std::size_t h = 0; h < heads; ++h)
        cell_upstream[h] = upstream.at(h, i, i - d);
      const auto parts = detail::normalized_distance_parts(
          static_cast<long>(i), static_cast<long>(i - d), params);
      mlp_forward_cached(parts.x, params.mlp, cache);
      const T d_x = detail::mlp_backward_accumulate(params.mlp, cache,
                                                    cell_upstream, grads);
      const T dist = static_cast<T>(d);
      const T den2 = parts.den * parts.den;
      if (params.psi == PsiKind::Log)
        grads.c += d_x *
                   (detail::psi_dc(dist, params) * parts.den -
                    parts.num * detail::psi_dc(parts.m, params)) /
                   den2;
      // i > L here, so the max picked the position: no threshold gradient
    }
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Ablations (position-transformation variants).

enum class FireAblation { Raw, LogOnly, Full };

template <typename T>
FireParams<T> make_ablation_variant(const FireParams<T>& base,
                                    FireAblation variant) {
  FireParams<T> out = base;
  switch (variant) {
    case FireAblation::Raw:
      out.psi = PsiKind::Identity;
      out.use_threshold = false;
      break;
    case FireAblation::LogOnly:
      out.psi = PsiKind::Log;
      out.use_threshold = false;
      break;
    case FireAblation::Full:
      out.psi = PsiKind::Log;
      out.use_threshold = true;
      break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Initialization.

struct FireInit {
  std::size_t hidden_layers = 2;
  std::size_t hidden_size = 32;
  Activation activation = Activation::Relu;
  bool final_activation = false;
  PsiKind psi = PsiKind::Log;
  bool use_threshold = true;
  double init_c = 0.1;
  double init_L = 512.0;
  double eps = 1e-6;
};

// Fan-in uniform init, U[-1/sqrt(fan_in), 1/sqrt(fan_in)], weights then bias
// per layer, layers in order; the rng state fully determines the draw.
template <typename T>
FireParams<T> make_fire_params_rng(std::size_t heads, Rng& rng,
                                   const FireInit& init = {}) {
  if (heads == 0) throw InvalidParameter("fire: heads must be >= 1");
  FireParams<T> params;
  params.heads = heads;
  params.c = static_cast<T>(init.init_c);
  params.init_L = static_cast<T>(init.init_L);
  params.L_multiplier = T(1);
  params.eps = static_cast<T>(init.eps);
  params.psi = init.psi;
  params.use_threshold = init.use_threshold;

  std::vector<std::size_t> widths;
  widths.push_back(1);
  for (std::size_t l = 0; l < init.hidden_layers; ++l)
    widths.push_back(init.hidden_size);
  widths.push_back(heads);

  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    AffineLayer<T> layer;
    const std::size_t fan_in = widths[l];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    layer.weight = Matrix<T>(widths[l + 1], widths[l]);
    for (auto& w : layer.weight.flat())
      w = static_cast<T>(uniform_real(rng, -bound, bound));
    layer.bias.resize(widths[l + 1]);
    for (auto& b : layer.bias)
      b = static_cast<T>(uniform_real(rng, -bound, bound));
    params.mlp.layers.push_back(std::move(layer));
    if (l + 2 < widths.size())
      params.mlp.hidden_activations.push_back({init.activation, 1.0});
  }
  if (init.final_activation)
    params.mlp.final_activation = ActivationTag{init.activation, 1.0};
  params.validate();
  return params;
}

template <typename T>
FireParams<T> make_fire_params(std::size_t heads, std::uint64_t seed,
                               const FireInit& init = {}) {
  Rng rng = make_rng(seed);
  return make_fire_params_rng<T>(heads, rng, init);
}

// ---------------------------------------------------------------------------
// Serialization (versioned; weights row-major; doubles round-trip exactly
// through the shortest-decimal encoding the JSON writer emits).

inline nlohmann::json activation_tag_to_json(const ActivationTag& tag) {
  if (tag.kind == Activation::Power)
    return nlohmann::json{{"kind", "power"}, {"exponent", tag.exponent}};
  return nlohmann::json(activation_name(tag.kind));
}

inline ActivationTag activation_tag_from_json(const nlohmann::json& j) {
  if (j.is_string()) return {activation_from_name(j.get<std::string>()), 1.0};
  ActivationTag tag{activation_from_name(j.at("kind").get<std::string>()),
                    j.at("exponent").get<double>()};
  return tag;
}

template <typename T>
nlohmann::json fire_params_to_json(const FireParams<T>& params) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : params.mlp.layers) {
    nlohmann::json weight = nlohmann::json::array();
    for (std::size_t r = 0; r < layer.weight.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (std::size_t col = 0; col < layer.weight.cols(); ++col)
        row.push_back(static_cast<double>(layer.weight(r, col)));
      weight.push_back(std::move(row));
    }
    nlohmann::json jl{{"weight", std::move(weight)}};
    if (layer.bias.empty()) {
      jl["bias"] = nullptr;
    } else {
      nlohmann::json bias = nlohmann::json::array();
      for (const auto& b : layer.bias) bias.push_back(static_cast<double>(b));
      jl["bias"] = std::move(bias);
    }
    layers.push_back(std::move(jl));
  }
  nlohmann::json hidden = nlohmann::json::array();
  for (const auto& tag : params.mlp.hidden_activations)
    hidden.push_back(activation_tag_to_json(tag));

  nlohmann::json j{
      {"schema", "fire_params"},
      {"version", 1},
      {"heads", params.heads},
      {"psi", psi_name(params.psi)},
      {"use_threshold", params.use_threshold},
      {"c", static_cast<double>(params.c)},
      {"init_L", static_cast<double>(params.init_L)},
      {"L_multiplier", static_cast<double>(params.L_multiplier)},
      {"eps", static_cast<double>(params.eps)},
      {"mlp",
       {{"layers", std::move(layers)},
        {"hidden_activations", std::move(hidden)},
        {"final_activation", params.mlp.final_activation
                                 ? activation_tag_to_json(
                                       *params.mlp.final_activation)
                                 : nlohmann::json(nullptr)}}},
  };
  return j;
}

template <typename T>
FireParams<T> fire_params_from_json(const nlohmann::json& j) {
  if (j.at("schema").get<std::string>() != "fire_params")
    throw InvalidParameter("fire params: wrong schema tag");
  if (j.at("version").get<int>() != 1)
    throw InvalidParameter("fire params: unsupported version");
  FireParams<T> params;
  params.heads = j.at("heads").get<std::size_t>();
  params.psi = psi_from_name(j.at("psi").get<std::string>());
  params.use_threshold = j.at("use_threshold").get<bool>();
  params.c = static_cast<T>(j.at("c").get<double>());
  params.init_L = static_cast<T>(j.at("init_L").get<double>());
  params.L_multiplier = static_cast<T>(j.at("L_multiplier").get<double>());
  params.eps = static_cast<T>(j.at("eps").get<double>());
  const auto& jm = j.at("mlp");
  for (const auto& jl : jm.at("layers")) {
    AffineLayer<T> layer;
    const auto& w = jl.at("weight");
    const std::size_t rows = w.size();
    const std::size_t cols = rows ? w.at(0).size() : 0;
    layer.weight = Matrix<T>(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t col = 0; col < cols; ++col)
        layer.weight(r, col) = static_cast<T>(w.at(r).at(col).get<double>());
    if (!jl.at("bias").is_null())
      for (const auto& b : jl.at("bias"))
        layer.bias.push_back(static_cast<T>(b.get<double>()));
    params.mlp.layers.push_back(std::move(layer));
  }
  for (const auto& tag : jm.at("hidden_activations"))
    params.mlp.hidden_activations.push_back(activation_tag_from_json(tag));
  if (!jm.at("final_activation").is_null())
    params.mlp.final_activation =
        activation_tag_from_json(jm.at("final_activation"));
  params.validate();
  return params;
}

}  // namespace pelab
