#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pelab/activations.hpp"
#include "pelab/copy_task.hpp"
#include "pelab/errors.hpp"
#include "pelab/fire.hpp"
#include "pelab/kernels.hpp"
#include "pelab/matrix.hpp"
#include "pelab/rng.hpp"
#include "pelab/rope.hpp"

namespace pelab {

// ---------------------------------------------------------------------------
// Configuration.

enum class PeKind { NoPe, Rope, Additive, Fire };

inline const char* pe_kind_name(PeKind k) {
  switch (k) {
    case PeKind::NoPe: return "NoPE";
    case PeKind::Rope: return "RoPE";
    case PeKind::Additive: return "additive";
    case PeKind::Fire: return "FIRE";
  }
  return "?";
}

struct PeConfig {
  PeKind kind = PeKind::NoPe;
  RopeConfig rope{};                // kind == Rope
  std::vector<BiasSpec> additive;   // kind == Additive; one spec or one per head
  FireInit fire{};                  // kind == Fire
};

struct ModelConfig {
  std::size_t num_layers = 2;
  std::size_t num_heads = 4;
  std::size_t d_model = 64;
  std::size_t d_head = 16;
  std::size_t ffn_mult = 4;
  std::size_t vocab_size = 16;
  std::size_t train_len = 65;
  PeConfig pe;
  bool share_pe_across_layers = false;  // FIRE-S when pe.kind == Fire

  void validate() const {
    if (num_layers == 0 || num_heads == 0 || d_model == 0 || d_head == 0 ||
        ffn_mult == 0 || vocab_size == 0)
      throw InvalidParameter("model config: dimensions must be positive");
    if (d_model != num_heads * d_head)
      throw InvalidParameter("model config: d_model must equal heads*d_head");
    if (train_len < 2)
      throw InvalidParameter("model config: train_len must be >= 2");
    if (pe.kind == PeKind::Rope) {
      RopeConfig rc = pe.rope;
      if (rc.head_dim == 0) rc.head_dim = d_head;
      if (rc.head_dim != d_head)
        throw InvalidParameter("model config: rope head_dim must match d_head");
      rc.validate();
    }
    if (pe.kind == PeKind::Additive) {
      if (pe.additive.size() != 1 && pe.additive.size() != num_heads)
        throw InvalidParameter(
            "model config: additive PE needs one spec or one per head");
      for (const auto& spec : pe.additive) spec.validate();
    }
  }

  RopeConfig rope_config() const {
    RopeConfig rc = pe.rope;
    if (rc.head_dim == 0) rc.head_dim = d_head;
    return rc;
  }
};

// ---------------------------------------------------------------------------
// Parameters and gradients.

template <typename T>
struct LayerParams {
  std::vector<T> ln1_gain, ln2_gain;   // d_model
  Matrix<T> wq, wk, wv, wo;            // d_model × d_model
  Matrix<T> ff1;                       // d_model × d_ff
  std::vector<T> ff1_bias;             // d_ff
  Matrix<T> ff2;                       // d_ff × d_model
  std::vector<T> ff2_bias;             // d_model
};

template <typename T>
struct ModelParams {
  ModelConfig config;
  Matrix<T> embedding;    // vocab × d_model
  std::vector<LayerParams<T>> layers;
  std::vector<T> final_gain;
  Matrix<T> unembedding;  // d_model × vocab
  // FIRE state: one entry when shared across layers, else one per layer.
  std::vector<FireParams<T>> fire;

  std::size_t fire_sets() const { return fire.size(); }
  const FireParams<T>& fire_for_layer(std::size_t l) const {
    return fire[config.share_pe_across_layers ? 0 : l];
  }
};

template <typename T>
struct ModelGrads {
  Matrix<T> embedding;
  std::vector<LayerParams<T>> layers;  // same shapes as the parameters
  std::vector<T> final_gain;
  Matrix<T> unembedding;
  std::vector<FireGrads<T>> fire;

  static ModelGrads zeros_like(const ModelParams<T>& p) {
    ModelGrads g;
    g.embedding = Matrix<T>(p.embedding.rows(), p.embedding.cols());
    g.layers.resize(p.layers.size());
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      const auto& src = p.layers[l];
      auto& dst = g.layers[l];
      dst.ln1_gain.assign(src.ln1_gain.size(), T(0));
      dst.ln2_gain.assign(src.ln2_gain.size(), T(0));
      dst.wq = Matrix<T>(src.wq.rows(), src.wq.cols());
      dst.wk = Matrix<T>(src.wk.rows(), src.wk.cols());
      dst.wv = Matrix<T>(src.wv.rows(), src.wv.cols());
      dst.wo = Matrix<T>(src.wo.rows(), src.wo.cols());
      dst.ff1 = Matrix<T>(src.ff1.rows(), src.ff1.cols());
      dst.ff1_bias.assign(src.ff1_bias.size(), T(0));
      dst.ff2 = Matrix<T>(src.ff2.rows(), src.ff2.cols());
      dst.ff2_bias.assign(src.ff2_bias.size(), T(0));
    }
    g.final_gain.assign(p.final_gain.size(), T(0));
    g.unembedding = Matrix<T>(p.unembedding.rows(), p.unembedding.cols());
    for (const auto& f : p.fire) g.fire.push_back(FireGrads<T>::zeros_like(f));
    return g;
  }

  void scale(T factor) {
    for (auto& v : embedding.flat()) v *= factor;
    for (auto& layer : layers) {
      for (auto& v : layer.ln1_gain) v *= factor;
      for (auto& v : layer.ln2_gain) v *= factor;
      for (auto& v : layer.wq.flat()) v *= factor;
      for (auto& v : layer.wk.flat()) v *= factor;
      for (auto& v : layer.wv.flat()) v *= factor;
      for (auto& v : layer.wo.flat()) v *= factor;
      for (auto& v : layer.ff1.flat()) v *= factor;
      for (auto& v : layer.ff1_bias) v *= factor;
      for (auto& v : layer.ff2.flat()) v *= factor;
      for (auto& v : layer.ff2_bias) v *= factor;
    }
    for (auto& v : final_gain) v *= factor;
    for (auto& v : unembedding.flat()) v *= factor;
    for (auto& f : fire) {
      for (auto& layer : f.layers) {
        for (auto& v : layer.weight.flat()) v *= factor;
        for (auto& v : layer.bias) v *= factor;
      }
      f.c *= factor;
      f.L_multiplier *= factor;
    }
  }
};

// Flat view of every trainable tensor, in a fixed order shared between
// parameters and gradients (and used by the optimizer and checkpoints).
template <typename T>
struct TensorRef {
  std::string name;
  T* data;
  std::size_t size;
  std::vector<std::size_t> dims;  // row-major shape; {size} when flat
};

namespace detail {

template <typename T>
void append_ref(std::vector<TensorRef<T>>& out, std::string name,
                Matrix<T>& m) {
  out.push_back({std::move(name), m.data(), m.size(), {m.rows(), m.cols()}});
}

template <typename T>
void append_ref(std::vector<TensorRef<T>>& out, std::string name,
                std::vector<T>& v) {
  out.push_back({std::move(name), v.data(), v.size(), {v.size()}});
}

template <typename T>
void append_ref(std::vector<TensorRef<T>>& out, std::string name, T* scalar) {
  out.push_back({std::move(name), scalar, 1, {1}});
}

template <typename T>
void append_fire_refs(const std::string& prefix,
                      std::vector<AffineLayer<T>>* layers, T* c, T* l_mult,
                      std::vector<AffineGrads<T>>* grad_layers,
                      std::vector<TensorRef<T>>& out) {
  const std::size_t count = layers ? layers->size() : grad_layers->size();
  for (std::size_t l = 0; l < count; ++l) {
    Matrix<T>& w = layers ? (*layers)[l].weight : (*grad_layers)[l].weight;
    std::vector<T>& b = layers ? (*layers)[l].bias : (*grad_layers)[l].bias;
    append_ref(out, prefix + ".mlp" + std::to_string(l) + ".weight", w);
    if (!b.empty())
      append_ref(out, prefix + ".mlp" + std::to_string(l) + ".bias", b);
  }
  append_ref(out, prefix + ".c", c);
  append_ref(out, prefix + ".L_multiplier", l_mult);
}

template <typename T>
void append_layer_refs(const std::string& prefix, LayerParams<T>& layer,
                       std::vector<TensorRef<T>>& out) {
  append_ref(out, prefix + ".ln1_gain", layer.ln1_gain);
  append_ref(out, prefix + ".wq", layer.wq);
  append_ref(out, prefix + ".wk", layer.wk);
  append_ref(out, prefix + ".wv", layer.wv);
  append_ref(out, prefix + ".wo", layer.wo);
  append_ref(out, prefix + ".ln2_gain", layer.ln2_gain);
  append_ref(out, prefix + ".ff1", layer.ff1);
  append_ref(out, prefix + ".ff1_bias", layer.ff1_bias);
  append_ref(out, prefix + ".ff2", layer.ff2);
  append_ref(out, prefix + ".ff2_bias", layer.ff2_bias);
}

}  // namespace detail

template <typename T>
std::vector<TensorRef<T>> model_tensors(ModelParams<T>& p) {
  std::vector<TensorRef<T>> out;
  detail::append_ref(out, "embedding", p.embedding);
  for (std::size_t l = 0; l < p.layers.size(); ++l)
    detail::append_layer_refs("layer" + std::to_string(l), p.layers[l], out);
  detail::append_ref(out, "final_gain", p.final_gain);
  detail::append_ref(out, "unembedding", p.unembedding);
  for (std::size_t s = 0; s < p.fire.size(); ++s)
    detail::append_fire_refs<T>("pe" + std::to_string(s),
                                &p.fire[s].mlp.layers, &p.fire[s].c,
                                &p.fire[s].L_multiplier, nullptr, out);
  return out;
}

template <typename T>
std::vector<TensorRef<T>> model_tensors(ModelGrads<T>& g) {
  std::vector<TensorRef<T>> out;
  detail::append_ref(out, "embedding", g.embedding);
  for (std::size_t l = 0; l < g.layers.size(); ++l)
    detail::append_layer_refs("layer" + std::to_string(l), g.layers[l], out);
  detail::append_ref(out, "final_gain", g.final_gain);
  detail::append_ref(out, "unembedding", g.unembedding);
  for (std::size_t s = 0; s < g.fire.size(); ++s)
    detail::append_fire_refs<T>("pe" + std::to_string(s), nullptr,
                                &g.fire[s].c, &g.fire[s].L_multiplier,
                                &g.fire[s].layers, out);
  return out;
}

// ---------------------------------------------------------------------------
// Initialization. Weights are fan-in uniform, gains 1, biases 0; the draw
// order below is part of the seed contract.

template <typename T>
ModelParams<T> init_model_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng = make_rng(seed);
  ModelParams<T> p;
  p.config = cfg;

  auto fill_fan_in = [&](Matrix<T>& m, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& w : m.flat())
      w = static_cast<T>(uniform_real(rng, -bound, bound));
  };

  p.embedding = Matrix<T>(cfg.vocab_size, cfg.d_model);
  fill_fan_in(p.embedding, cfg.d_model);

  const std::size_t d_ff = cfg.ffn_mult * cfg.d_model;
  p.layers.resize(cfg.num_layers);
  for (auto& layer : p.layers) {
    layer.ln1_gain.assign(cfg.d_model, T(1));
    layer.ln2_gain.assign(cfg.d_model, T(1));
    layer.wq = Matrix<T>(cfg.d_model, cfg.d_model);
    layer.wk = Matrix<T>(cfg.d_model, cfg.d_model);
    layer.wv = Matrix<T>(cfg.d_model, cfg.d_model);
    layer.wo = Matrix<T>(cfg.d_model, cfg.d_model);
    fill_fan_in(layer.wq, cfg.d_model);
    fill_fan_in(layer.wk, cfg.d_model);
    fill_fan_in(layer.wv, cfg.d_model);
    fill_fan_in(layer.wo, cfg.d_model);
    layer.ff1 = Matrix<T>(cfg.d_model, d_ff);
    layer.ff1_bias.assign(d_ff, T(0));
    layer.ff2 = Matrix<T>(d_ff, cfg.d_model);
    layer.ff2_bias.assign(cfg.d_model, T(0));
    fill_fan_in(layer.ff1, cfg.d_model);
    fill_fan_in(layer.ff2, d_ff);
  }
  p.final_gain.assign(cfg.d_model, T(1));
  p.unembedding = Matrix<T>(cfg.d_model, cfg.vocab_size);
  fill_fan_in(p.unembedding, cfg.d_model);

  if (cfg.pe.kind == PeKind::Fire) {
    const std::size_t sets = cfg.share_pe_across_layers ? 1 : cfg.num_layers;
    for (std::size_t s = 0; s < sets; ++s)
      p.fire.push_back(
          make_fire_params_rng<T>(cfg.num_heads, rng, cfg.pe.fire));
  }
  return p;
}

// ---------------------------------------------------------------------------
// Primitive layers.

inline constexpr double kLayerNormEps = 1e-5;

template <typename T>
void layernorm_forward(const Matrix<T>& x, const std::vector<T>& gain,
                       Matrix<T>& y, std::vector<T>& mean,
                       std::vector<T>& rstd) {
  const std::size_t n = x.rows(), d = x.cols();
  y = Matrix<T>(n, d);
  mean.assign(n, T(0));
  rstd.assign(n, T(0));
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = x.row(i);
    T mu = T(0);
    for (std::size_t k = 0; k < d; ++k) mu += row[k];
    mu /= static_cast<T>(d);
    T var = T(0);
    for (std::size_t k = 0; k < d; ++k) {
      const T c = row[k] - mu;
      var += c * c;
    }
    var /= static_cast<T>(d);
    const T r = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
    mean[i] = mu;
    rstd[i] = r;
    T* out = y.row(i);
    for (std::size_t k = 0; k < d; ++k) out[k] = gain[k] * (row[k] - mu) * r;
  }
}

// Accumulates into dx and dgain.
template <typename T>
void layernorm_backward(const Matrix<T>& x, const std::vector<T>& gain,
                        const std::vector<T>& mean, const std::vector<T>& rstd,
                        const Matrix<T>& dy, Matrix<T>& dx,
                        std::vector<T>& dgain) {
  const std::size_t n = x.rows(), d = x.cols();
  for (std::size_t i = 0; i < n; ++i) {
    const T* xrow = x.row(i);
    const T* dyrow = dy.row(i);
    T* dxrow = dx.row(i);
    const T mu = mean[i];
    const T r = rstd[i];
    T sum_dxhat = T(0);
    T sum_dxhat_xhat = T(0);
    for (std::size_t k = 0; k < d; ++k) {
      const T xhat = (xrow[k] - mu) * r;
      const T dxhat = dyrow[k] * gain[k];
      dgain[k] += dyrow[k] * xhat;
      sum_dxhat += dxhat;
      sum_dxhat_xhat += dxhat * xhat;
    }
    const T inv_d = T(1) / static_cast<T>(d);
    for (std::size_t k = 0; k < d; ++k) {
      const T xhat = (xrow[k] - mu) * r;
      const T dxhat = dyrow[k] * gain[k];
      dxrow[k] += r * (dxhat - sum_dxhat * inv_d - xhat * sum_dxhat_xhat * inv_d);
    }
  }
}

// In-place causal softmax of one logits row: entries j > i become exactly 0,
// entries j <= i are softmax-normalized with max subtraction.
template <typename T>
void softmax_causal(std::span<T> row, std::size_t i) {
  if (row.size() < i + 1)
    throw InvalidParameter("softmax_causal: row shorter than i+1");
  T mx = row[0];
  for (std::size_t j = 1; j <= i; ++j) mx = std::max(mx, row[j]);
  if (!(mx == mx) || mx == -std::numeric_limits<T>::infinity())
    throw DegenerateRow("softmax_causal: no finite unmasked entry");
  T sum = T(0);
  for (std::size_t j = 0; j <= i; ++j) {
    const T e = std::exp(row[j] - mx);
    row[j] = e;
    sum += e;
  }
  for (std::size_t j = 0; j <= i; ++j) row[j] /= sum;
  for (std::size_t j = i + 1; j < row.size(); ++j) row[j] = T(0);
}

// ---------------------------------------------------------------------------
// Per-layer bias resolution.

// Heads-many causal bias matrix from either one broadcast spec or one spec
// per head. A single spec yields a 1-head matrix; attention broadcasts it.
template <typename T>
BiasMatrix<T> make_additive_bias(const std::vector<BiasSpec>& specs,
                                 std::size_t heads, std::size_t n) {
  if (specs.empty()) throw InvalidParameter("additive bias: no specs");
  if (specs.size() != 1 && specs.size() != heads)
    throw InvalidParameter("additive bias: need 1 or `heads` specs");
  if (specs.size() == 1) return build_bias_matrix<T>(specs[0], n);
  BiasMatrix<T> out(heads, n);
  for (std::size_t h = 0; h < heads; ++h) {
    const BiasMatrix<T> one = build_bias_matrix<T>(specs[h], n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j) out.at(h, i, j) = one.at(0, i, j);
  }
  return out;
}

// Per-layer bias pointers; entries alias a single matrix for shared PE and
// stay null for NoPE/RoPE.
template <typename T>
struct BiasSet {
  std::vector<BiasMatrix<T>> owned;
  std::vector<const BiasMatrix<T>*> per_layer;
};

template <typename T>
BiasSet<T> build_bias_set(const ModelParams<T>& params, std::size_t n) {
  const ModelConfig& cfg = params.config;
  BiasSet<T> set;
  set.per_layer.assign(cfg.num_layers, nullptr);
  switch (cfg.pe.kind) {
    case PeKind::NoPe:
    case PeKind::Rope:
      break;
    case PeKind::Additive: {
      set.owned.push_back(
          make_additive_bias<T>(cfg.pe.additive, cfg.num_heads, n));
      for (auto& ptr : set.per_layer) ptr = &set.owned[0];
      break;
    }
    case PeKind::Fire: {
      if (cfg.share_pe_across_layers) {
        set.owned.push_back(fire_bias_matrix(n, params.fire[0]));
        for (auto& ptr : set.per_layer) ptr = &set.owned[0];
      } else {
        set.owned.reserve(cfg.num_layers);
        for (std::size_t l = 0; l < cfg.num_layers; ++l)
          set.owned.push_back(fire_bias_matrix(n, params.fire[l]));
        for (std::size_t l = 0; l < cfg.num_layers; ++l)
          set.per_layer[l] = &set.owned[l];
      }
      break;
    }
  }
  return set;
}

// ---------------------------------------------------------------------------
// Attention.

template <typename T>
struct AttentionCache {
  Matrix<T> q, k, v;              // n×d_model, q/k post-rotation
  std::vector<Matrix<T>> probs;   // per head, n×n
  Matrix<T> ctx;                  // n×d_model
};

// Pre-softmax logits are scaled query-key dot products plus the optional
// additive bias; rows are causally softmax-normalized. `x` is the already
// normalized layer input.
template <typename T>
Matrix<T> causal_attention(const Matrix<T>& x, const LayerParams<T>& layer,
                           std::size_t num_heads,
                           const BiasMatrix<T>* bias,
                           const RopeConfig* rope,
                           AttentionCache<T>* cache_out = nullptr) {
  const std::size_t n = x.rows(), d = x.cols();
  if (d % num_heads != 0)
    throw InvalidParameter("attention: d_model not divisible by heads");
  const std::size_t dh = d / num_heads;
  if (bias) {
    if (bias->n < n)
      throw InvalidParameter("attention: bias matrix smaller than sequence");
    if (bias->heads != 1 && bias->heads != num_heads)
      throw InvalidParameter("attention: bias head count mismatch");
  }

  AttentionCache<T> local;
  AttentionCache<T>& cache = cache_out ? *cache_out : local;
  cache.q = Matrix<T>(n, d);
  cache.k = Matrix<T>(n, d);
  cache.v = Matrix<T>(n, d);
  matmul(x, layer.wq, cache.q);
  matmul(x, layer.wk, cache.k);
  matmul(x, layer.wv, cache.v);

  if (rope) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t h = 0; h < num_heads; ++h) {
        rope_apply_inplace(std::span<T>(cache.q.row(i) + h * dh, dh),
                           static_cast<long>(i), *rope);
        rope_apply_inplace(std::span<T>(cache.k.row(i) + h * dh, dh),
                           static_cast<long>(i), *rope);
      }
  }

  const T scale = T(1) / static_cast<T>(std::sqrt(static_cast<double>(dh)));
  cache.probs.assign(num_heads, Matrix<T>(n, n));
  cache.ctx = Matrix<T>(n, d);
  for (std::size_t h = 0; h < num_heads; ++h) {
    Matrix<T>& p = cache.probs[h];
    const std::size_t bh = bias && bias->heads > 1 ? h : 0;
    for (std::size_t i = 0; i < n; ++i) {
      const T* qi = cache.q.row(i) + h * dh;
      T* prow = p.row(i);
      for (std::size_t j = 0; j <= i; ++j) {
        const T* kj = cache.k.row(j) + h * dh;
        T acc = T(0);
        for (std::size_t e = 0; e < dh; ++e) acc += qi[e] * kj[e];
        acc *= scale;
        if (bias) acc += bias->at(bh, i, j);
        prow[j] = acc;
      }
      softmax_causal(std::span<T>(prow, n), i);
      T* ci = cache.ctx.row(i) + h * dh;
      for (std::size_t j = 0; j <= i; ++j) {
        const T w = prow[j];
        const T* vj = cache.v.row(j) + h * dh;
        for (std::size_t e = 0; e < dh; ++e) ci[e] += w * vj[e];
      }
    }
  }
  Matrix<T> out(n, d);
  matmul(cache.ctx, layer.wo, out);
  return out;
}

// ---------------------------------------------------------------------------
// Full forward pass.

template <typename T>
struct LayerFwdCache {
  Matrix<T> x_in;
  Matrix<T> ln1_out;
  std::vector<T> ln1_mean, ln1_rstd;
  AttentionCache<T> attn;
  Matrix<T> attn_out;
  Matrix<T> x_mid;
  Matrix<T> ln2_out;
  std::vector<T> ln2_mean, ln2_rstd;
  Matrix<T> ff_pre, ff_act;
};

template <typename T>
struct ForwardCache {
  std::vector<int> tokens;
  std::vector<LayerFwdCache<T>> layers;
  Matrix<T> x_final;
  Matrix<T> final_ln;
  std::vector<T> final_mean, final_rstd;
  Matrix<T> logits;
  BiasSet<T> bias;                 // built here unless supplied externally
  const BiasSet<T>* bias_in_use = nullptr;
};

// Pre-LN decoder stack: x += Attn(LN1(x)); x += FFN(LN2(x)); final LN and
// unembedding. Deterministic given (params, tokens, biases).
template <typename T>
void forward_lm(const std::vector<int>& tokens, const ModelParams<T>& params,
                ForwardCache<T>& cache,
                const BiasSet<T>* external_bias = nullptr) {
  const ModelConfig& cfg = params.config;
  cfg.validate();
  const std::size_t n = tokens.size();
  if (n == 0) throw EmptyInput("forward_lm: empty token sequence");
  for (int t : tokens)
    if (t < 0 || static_cast<std::size_t>(t) >= cfg.vocab_size)
      throw InvalidInput("forward_lm: token id out of range");

  cache.tokens = tokens;
  if (external_bias) {
    cache.bias_in_use = external_bias;
  } else {
    cache.bias = build_bias_set(params, n);
    cache.bias_in_use = &cache.bias;
  }
  const BiasSet<T>& bias = *cache.bias_in_use;

  const RopeConfig rope = cfg.rope_config();
  const bool use_rope = cfg.pe.kind == PeKind::Rope;

  Matrix<T> x(n, cfg.d_model);
  for (std::size_t t = 0; t < n; ++t) {
    const T* src = params.embedding.row(static_cast<std::size_t>(tokens[t]));
    T* dst = x.row(t);
    for (std::size_t k = 0; k < cfg.d_model; ++k) dst[k] = src[k];
  }

  cache.layers.assign(cfg.num_layers, {});
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    LayerFwdCache<T>& lc = cache.layers[l];
    const LayerParams<T>& lp = params.layers[l];
    lc.x_in = x;
    layernorm_forward(lc.x_in, lp.ln1_gain, lc.ln1_out, lc.ln1_mean,
                      lc.ln1_rstd);
    lc.attn_out = causal_attention(lc.ln1_out, lp, cfg.num_heads,
                                   bias.per_layer[l],
                                   use_rope ? &rope : nullptr, &lc.attn);
    lc.x_mid = Matrix<T>(n, cfg.d_model);
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t k = 0; k < cfg.d_model; ++k)
        lc.x_mid(t, k) = lc.x_in(t, k) + lc.attn_out(t, k);

    layernorm_forward(lc.x_mid, lp.ln2_gain, lc.ln2_out, lc.ln2_mean,
                      lc.ln2_rstd);
    const std::size_t d_ff = cfg.ffn_mult * cfg.d_model;
    lc.ff_pre = Matrix<T>(n, d_ff);
    matmul(lc.ln2_out, lp.ff1, lc.ff_pre);
    for (std::size_t t = 0; t < n; ++t) {
      T* row = lc.ff_pre.row(t);
      for (std::size_t k = 0; k < d_ff; ++k) row[k] += lp.ff1_bias[k];
    }
    lc.ff_act = Matrix<T>(n, d_ff);
    const ActivationTag gelu{Activation::Gelu, 1.0};
    for (std::size_t t = 0; t < n; ++t) {
      const T* pre = lc.ff_pre.row(t);
      T* act = lc.ff_act.row(t);
      for (std::size_t k = 0; k < d_ff; ++k)
        act[k] = activation_eval(gelu, pre[k]);
    }
    Matrix<T> ff_out(n, cfg.d_model);
    matmul(lc.ff_act, lp.ff2, ff_out);
    for (std::size_t t = 0; t < n; ++t) {
      T* row = ff_out.row(t);
      for (std::size_t k = 0; k < cfg.d_model; ++k) row[k] += lp.ff2_bias[k];
    }
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t k = 0; k < cfg.d_model; ++k)
        x(t, k) = lc.x_mid(t, k) + ff_out(t, k);
  }

  cache.x_final = x;
  layernorm_forward(cache.x_final, params.final_gain, cache.final_ln,
                    cache.final_mean, cache.final_rstd);
  cache.logits = Matrix<T>(n, cfg.vocab_size);
  matmul(cache.final_ln, params.unembedding, cache.logits);
}

// ---------------------------------------------------------------------------
// Loss.

struct LossStats {
  double loss = 0.0;      // mean masked cross-entropy
  double accuracy = 0.0;  // mean masked argmax hit rate
  long count = 0;         // supervised positions
};

// Next-token objective: position t is supervised when loss_mask[t] is set
// and t >= 1; the prediction comes from logits row t-1.
template <typename T>
LossStats masked_loss(const Matrix<T>& logits, const std::vector<int>& tokens,
                      const std::vector<std::uint8_t>& loss_mask) {
  const std::size_t n = tokens.size();
  if (loss_mask.size() != n)
    throw InvalidParameter("masked_loss: mask length mismatch");
  LossStats stats;
  double loss_sum = 0.0;
  long hits = 0;
  for (std::size_t t = 1; t < n; ++t) {
    if (!loss_mask[t]) continue;
    const T* row = logits.row(t - 1);
    const std::size_t vocab = logits.cols();
    T mx = row[0];
    std::size_t argmax = 0;
    for (std::size_t j = 1; j < vocab; ++j)
      if (row[j] > mx) {
        mx = row[j];
        argmax = j;
      }
    double sum = 0.0;
    for (std::size_t j = 0; j < vocab; ++j)
      sum += std::exp(static_cast<double>(row[j] - mx));
    const double lse = static_cast<double>(mx) + std::log(sum);
    loss_sum += lse - static_cast<double>(row[static_cast<std::size_t>(
                          tokens[t])]);
    hits += argmax == static_cast<std::size_t>(tokens[t]) ? 1 : 0;
    ++stats.count;
  }
  if (stats.count > 0) {
    stats.loss = loss_sum / static_cast<double>(stats.count);
    stats.accuracy = static_cast<double>(hits) /
                     static_cast<double>(stats.count);
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Backward pass.

// Analytic reverse pass for the mean masked cross-entropy. Accumulates into
// `grads`; when `external_bias_grads` is given (training loop), the
// pre-softmax bias gradients are accumulated there instead of being pushed
// through the FIRE parameters immediately.
template <typename T>
void backward_lm(const ModelParams<T>& params, const ForwardCache<T>& cache,
                 const std::vector<int>& targets,
                 const std::vector<std::uint8_t>& loss_mask,
                 ModelGrads<T>& grads,
                 std::vector<BiasMatrix<T>>* external_bias_grads = nullptr) {
  const ModelConfig& cfg = params.config;
  const std::size_t n = cache.tokens.size();
  if (targets.size() != n || loss_mask.size() != n)
    throw InvalidParameter("backward_lm: targets/mask length mismatch");
  if (cfg.pe.kind == PeKind::Fire)
    for (const auto& f : params.fire)
      if (!f.mlp.differentiable())
        throw NonDifferentiableConfig(
            "backward_lm: FIRE params carry construction-only activations");

  long count = 0;
  for (std::size_t t = 1; t < n; ++t)
    if (loss_mask[t]) ++count;
  if (count == 0) return;  // no supervision, all gradients zero
  const T inv_count = T(1) / static_cast<T>(count);

  // d loss / d logits
  Matrix<T> dlogits(n, cfg.vocab_size);
  for (std::size_t t = 1; t < n; ++t) {
    if (!loss_mask[t]) continue;
    const T* row = cache.logits.row(t - 1);
    T* drow = dlogits.row(t - 1);
    T mx = row[0];
    for (std::size_t j = 1; j < cfg.vocab_size; ++j) mx = std::max(mx, row[j]);
    T sum = T(0);
    for (std::size_t j = 0; j < cfg.vocab_size; ++j)
      sum += std::exp(row[j] - mx);
    const T inv_sum = T(1) / sum;
    for (std::size_t j = 0; j < cfg.vocab_size; ++j)
      drow[j] += std::exp(row[j] - mx) * inv_sum * inv_count;
    drow[static_cast<std::size_t>(targets[t])] -= inv_count;
  }

  // unembedding and final LN
  matmul_tn(cache.final_ln, dlogits, grads.unembedding, /*accumulate=*/true);
  Matrix<T> dfinal_ln(n, cfg.d_model);
  matmul_nt(dlogits, params.unembedding, dfinal_ln);
  Matrix<T> dx(n, cfg.d_model);
  layernorm_backward(cache.x_final, params.final_gain, cache.final_mean,
                     cache.final_rstd, dfinal_ln, dx, grads.final_gain);

  const RopeConfig rope = cfg.rope_config();
  const bool use_rope = cfg.pe.kind == PeKind::Rope;
  const std::size_t dh = cfg.d_head;
  const T scale = T(1) / static_cast<T>(std::sqrt(static_cast<double>(dh)));
  const std::size_t d_ff = cfg.ffn_mult * cfg.d_model;

  // Local bias-gradient buffers when FIRE gradients are pushed through here.
  std::vector<BiasMatrix<T>> local_bias_grads;
  std::vector<BiasMatrix<T>>* bias_grads = external_bias_grads;
  if (cfg.pe.kind == PeKind::Fire && !bias_grads) {
    local_bias_grads.assign(params.fire.size(),
                            BiasMatrix<T>(cfg.num_heads, n));
    bias_grads = &local_bias_grads;
  }

  for (std::size_t l = cfg.num_layers; l-- > 0;) {
    const LayerFwdCache<T>& lc = cache.layers[l];
    const LayerParams<T>& lp = params.layers[l];
    LayerParams<T>& lg = grads.layers[l];

    // FFN branch: dx is d(loss)/d(x_out)
    const Matrix<T>& d_xout = dx;
    matmul_tn(lc.ff_act, d_xout, lg.ff2, true);
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t k = 0; k < cfg.d_model; ++k)
        lg.ff2_bias[k] += d_xout(t, k);
    Matrix<T> dff_act(n, d_ff);
    matmul_nt(d_xout, lp.ff2, dff_act);
    const ActivationTag gelu{Activation::Gelu, 1.0};
    Matrix<T> dff_pre(n, d_ff);
    for (std::size_t t = 0; t < n; ++t) {
      const T* pre = lc.ff_pre.row(t);
      const T* da = dff_act.row(t);
      T* dp = dff_pre.row(t);
      for (std::size_t k = 0; k < d_ff; ++k)
        dp[k] = da[k] * activation_derivative(gelu, pre[k]);
    }
    matmul_tn(lc.ln2_out, dff_pre, lg.ff1, true);
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t k = 0; k < d_ff; ++k) lg.ff1_bias[k] += dff_pre(t, k);
    Matrix<T> dln2(n, cfg.d_model);
    matmul_nt(dff_pre, lp.ff1, dln2);

    Matrix<T> dx_mid = d_xout;  // residual passthrough
    layernorm_backward(lc.x_mid, lp.ln2_gain, lc.ln2_mean, lc.ln2_rstd, dln2,
                       dx_mid, lg.ln2_gain);

    // Attention branch: dx_mid is d(loss)/d(x_mid)
    const Matrix<T>& d_attn_out = dx_mid;
    matmul_tn(lc.attn.ctx, d_attn_out, lg.wo, true);
    Matrix<T> dctx(n, cfg.d_model);
    matmul_nt(d_attn_out, lp.wo, dctx);

    Matrix<T> dq(n, cfg.d_model);
    Matrix<T> dk(n, cfg.d_model);
    Matrix<T> dv(n, cfg.d_model);
    std::vector<T> dprobs(n);
    const std::size_t fire_set =
        cfg.pe.kind == PeKind::Fire && !cfg.share_pe_across_layers ? l : 0;
    for (std::size_t h = 0; h < cfg.num_heads; ++h) {
      const Matrix<T>& probs = lc.attn.probs[h];
      for (std::size_t i = 0; i < n; ++i) {
        const T* dctx_i = dctx.row(i) + h * dh;
        const T* prow = probs.row(i);
        // dP and dv
        T dot_dp_p = T(0);
        for (std::size_t j = 0; j <= i; ++j) {
          const T* vj = lc.attn.v.row(j) + h * dh;
          T acc = T(0);
          for (std::size_t e = 0; e < dh; ++e) acc += dctx_i[e] * vj[e];
          dprobs[j] = acc;
          dot_dp_p += acc * prow[j];
          T* dvj = dv.row(j) + h * dh;
          const T w = prow[j];
          for (std::size_t e = 0; e < dh; ++e) dvj[e] += w * dctx_i[e];
        }
        // softmax backward + bias/qk gradients
        T* dqi = dq.row(i) + h * dh;
        const T* qi = lc.attn.q.row(i) + h * dh;
        for (std::size_t j = 0; j <= i; ++j) {
          const T ds = prow[j] * (dprobs[j] - dot_dp_p);
          if (cfg.pe.kind == PeKind::Fire)
            (*bias_grads)[fire_set].at(h, i, j) += ds;
          const T* kj = lc.attn.k.row(j) + h * dh;
          T* dkj = dk.row(j) + h * dh;
          const T ds_scaled = ds * scale;
          for (std::size_t e = 0; e < dh; ++e) {
            dqi[e] += ds_scaled * kj[e];
            dkj[e] += ds_scaled * qi[e];
          }
        }
      }
    }
    if (use_rope) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t h = 0; h < cfg.num_heads; ++h) {
          rope_unapply_inplace(std::span<T>(dq.row(i) + h * dh, dh),
                               static_cast<long>(i), rope);
          rope_unapply_inplace(std::span<T>(dk.row(i) + h * dh, dh),
                               static_cast<long>(i), rope);
        }
    }
    matmul_tn(lc.ln1_out, dq, lg.wq, true);
    matmul_tn(lc.ln1_out, dk, lg.wk, true);
    matmul_tn(lc.ln1_out, dv, lg.wv, true);
    Matrix<T> dln1(n, cfg.d_model);
    matmul_nt(dq, lp.wq, dln1);
    matmul_nt(dk, lp.wk, dln1, true);
    matmul_nt(dv, lp.wv, dln1, true);

    Matrix<T> dx_in = dx_mid;  // residual passthrough
    layernorm_backward(lc.x_in, lp.ln1_gain, lc.ln1_mean, lc.ln1_rstd, dln1,
                       dx_in, lg.ln1_gain);
    dx = std::move(dx_in);
  }

  // embedding rows
  for (std::size_t t = 0; t < n; ++t) {
    T* dst = grads.embedding.row(static_cast<std::size_t>(cache.tokens[t]));
    const T* src = dx.row(t);
    for (std::size_t k = 0; k < cfg.d_model; ++k) dst[k] += src[k];
  }

  // push local bias gradients through the FIRE parameters
  if (cfg.pe.kind == PeKind::Fire && bias_grads == &local_bias_grads) {
    for (std::size_t s = 0; s < params.fire.size(); ++s) {
      const FireGrads<T> fg =
          fire_bias_matrix_grad(n, params.fire[s], local_bias_grads[s]);
      grads.fire[s].accumulate(fg);
    }
  }
}

// ---------------------------------------------------------------------------
// Optimizer and training.

struct TrainOptions {
  long steps = 3000;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 8;
};

template <typename T>
class AdamOptimizer {
 public:
  AdamOptimizer(const TrainOptions& opt) : opt_(opt) {}

  void step(std::vector<TensorRef<T>>& params,
            const std::vector<TensorRef<T>>& grads) {
    if (params.size() != grads.size())
      throw InvalidParameter("adam: parameter/gradient registry mismatch");
    std::size_t total = 0;
    for (const auto& p : params) total += p.size;
    if (m_.empty()) {
      m_.assign(total, 0.0);
      v_.assign(total, 0.0);
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    std::size_t offset = 0;
    for (std::size_t k = 0; k < params.size(); ++k) {
      T* p = params[k].data;
      const T* g = grads[k].data;
      for (std::size_t e = 0; e < params[k].size; ++e) {
        const double ge = static_cast<double>(g[e]);
        double& m = m_[offset + e];
        double& v = v_[offset + e];
        m = opt_.beta1 * m + (1.0 - opt_.beta1) * ge;
        v = opt_.beta2 * v + (1.0 - opt_.beta2) * ge * ge;
        const double mhat = m / bc1;
        const double vhat = v / bc2;
        p[e] = static_cast<T>(static_cast<double>(p[e]) -
                              opt_.lr * mhat / (std::sqrt(vhat) + opt_.adam_eps));
      }
      offset += params[k].size;
    }
  }

 private:
  TrainOptions opt_;
  std::vector<double> m_, v_;
  long t_ = 0;
};

struct StepStats {
  double loss = 0.0;
  double accuracy = 0.0;
};

template <typename T>
struct TrainResult {
  ModelParams<T> params;
  std::vector<StepStats> curve;
};

// From-scratch Adam training on the copy task. Fully deterministic under
// (config, task, options, seed); throws TrainingDiverged on NaN loss.
template <typename T>
TrainResult<T> train(const ModelConfig& cfg, const CopyTaskConfig& task,
                     const TrainOptions& opt, std::uint64_t seed) {
  cfg.validate();
  task.validate();
  if (opt.steps < 0) throw InvalidParameter("train: steps must be >= 0");
  if (opt.batch_size == 0)
    throw InvalidParameter("train: batch_size must be >= 1");

  TrainResult<T> result;
  result.params = init_model_params<T>(cfg, seed);
  ModelParams<T>& params = result.params;
  CopyTaskGenerator gen(task, seed + 0x9E3779B97F4A7C15ULL);
  AdamOptimizer<T> adam(opt);

  const std::size_t n_max = static_cast<std::size_t>(task.max_sample_len());
  const bool is_fire = cfg.pe.kind == PeKind::Fire;

  // Fixed additive biases never change during training.
  BiasSet<T> static_bias;
  if (cfg.pe.kind == PeKind::Additive)
    static_bias = build_bias_set(params, n_max);

  ModelGrads<T> grads = ModelGrads<T>::zeros_like(params);
  std::vector<BiasMatrix<T>> bias_grads;
  ForwardCache<T> cache;

  auto param_refs = model_tensors(params);

  for (long step = 0; step < opt.steps; ++step) {
    grads = ModelGrads<T>::zeros_like(params);
    BiasSet<T> fire_bias_set;
    const BiasSet<T>* bias_set = nullptr;
    if (is_fire) {
      fire_bias_set = build_bias_set(params, n_max);
      bias_set = &fire_bias_set;
      bias_grads.assign(params.fire.size(),
                        BiasMatrix<T>(cfg.num_heads, n_max));
    } else if (cfg.pe.kind == PeKind::Additive) {
      bias_set = &static_bias;
    }

    double loss_sum = 0.0, acc_sum = 0.0;
    for (std::size_t b = 0; b < opt.batch_size; ++b) {
      const TaskSample sample = gen.next();
      forward_lm(sample.tokens, params, cache, bias_set);
      const LossStats stats =
          masked_loss(cache.logits, sample.tokens, sample.loss_mask);
      loss_sum += stats.loss;
      acc_sum += stats.accuracy;
      backward_lm(params, cache, sample.tokens, sample.loss_mask, grads,
                  is_fire ? &bias_grads : nullptr);
    }
    if (is_fire) {
      for (std::size_t s = 0; s < params.fire.size(); ++s) {
        const FireGrads<T> fg =
            fire_bias_matrix_grad(n_max, params.fire[s], bias_grads[s]);
        grads.fire[s].accumulate(fg);
      }
    }
    grads.scale(T(1) / static_cast<T>(opt.batch_size));

    const double step_loss = loss_sum / static_cast<double>(opt.batch_size);
    const double step_acc = acc_sum / static_cast<double>(opt.batch_size);
    if (!std::isfinite(step_loss))
      throw TrainingDiverged("train: non-finite loss", step);
    result.curve.push_back({step_loss, step_acc});

    auto grad_refs = model_tensors(grads);
    adam.step(param_refs, grad_refs);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Length-sweep evaluation.

struct EvalRow {
  long length = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

struct EvalReport {
  std::string variant;
  std::uint64_t seed = 0;
  std::vector<EvalRow> rows;  // sorted by length
};

// Masked loss/accuracy per payload length, one forward pass per sample.
template <typename T>
EvalReport eval_lengths(const ModelParams<T>& params,
                        const CopyTaskConfig& task, std::vector<long> lengths,
                        std::size_t samples_per_length, std::uint64_t seed,
                        const std::string& variant = "") {
  task.validate();
  if (samples_per_length == 0)
    throw InvalidParameter("eval_lengths: need at least one sample");
  for (long k : lengths)
    if (k < 1)
      throw InvalidParameter("eval_lengths: length below minimum task size");
  std::sort(lengths.begin(), lengths.end());

  EvalReport report;
  report.variant = variant.empty() ? pe_kind_name(params.config.pe.kind)
                                   : variant;
  report.seed = seed;
  ForwardCache<T> cache;
  for (long k : lengths) {
    CopyTaskGenerator gen(task,
                          seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(k));
    double loss_sum = 0.0;
    long count = 0;
    double acc_sum = 0.0;
    for (std::size_t s = 0; s < samples_per_length; ++s) {
      const TaskSample sample = gen.next_fixed(k);
      forward_lm(sample.tokens, params, cache);
      const LossStats stats =
          masked_loss(cache.logits, sample.tokens, sample.loss_mask);
      loss_sum += stats.loss * static_cast<double>(stats.count);
      acc_sum += stats.accuracy * static_cast<double>(stats.count);
      count += stats.count;
    }
    EvalRow row;
    row.length = k;
    row.loss = count ? loss_sum / static_cast<double>(count) : 0.0;
    row.accuracy = count ? acc_sum / static_cast<double>(count) : 0.0;
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace pelab
