#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "pelab/errors.hpp"

namespace pelab {

struct RopeConfig {
  std::size_t head_dim = 0;
  double base = 10000.0;
  // Position-interpolation factor L_train/L_test; positions are scaled by
  // this before rotation. Absent means 1 (plain RoPE).
  std::optional<double> pi_scale;

  void validate() const {
    if (head_dim == 0 || head_dim % 2 != 0)
      throw InvalidParameter("rope: head_dim must be even and positive");
    if (!(base > 0)) throw InvalidParameter("rope: base must be > 0");
    if (pi_scale && !(*pi_scale > 0 && *pi_scale <= 1))
      throw InvalidParameter("rope: pi_scale must be in (0, 1]");
  }
};

// Rotate each 2-plane (v[2k], v[2k+1]) by angle p_eff / base^(2k/head_dim),
// p_eff = pos * pi_scale. In-place; norm preserved per plane.
template <typename T>
void rope_apply_inplace(std::span<T> v, long pos, const RopeConfig& cfg) {
  cfg.validate();
  if (v.size() != cfg.head_dim)
    throw InvalidParameter("rope: vector length must equal head_dim");
  const double p_eff =
      static_cast<double>(pos) * (cfg.pi_scale ? *cfg.pi_scale : 1.0);
  const std::size_t planes = cfg.head_dim / 2;
  for (std::size_t k = 0; k < planes; ++k) {
    const double angle =
        p_eff / std::pow(cfg.base, static_cast<double>(2 * k) /
                                       static_cast<double>(cfg.head_dim));
    const T c = static_cast<T>(std::cos(angle));
    const T s = static_cast<T>(std::sin(angle));
    const T a = v[2 * k];
    const T b = v[2 * k + 1];
    v[2 * k] = a * c - b * s;
    v[2 * k + 1] = a * s + b * c;
  }
}

// Inverse rotation; used when back-propagating through the rotated vectors.
template <typename T>
void rope_unapply_inplace(std::span<T> v, long pos, const RopeConfig& cfg) {
  cfg.validate();
  if (v.size() != cfg.head_dim)
    throw InvalidParameter("rope: vector length must equal head_dim");
  const double p_eff =
      static_cast<double>(pos) * (cfg.pi_scale ? *cfg.pi_scale : 1.0);
  const std::size_t planes = cfg.head_dim / 2;
  for (std::size_t k = 0; k < planes; ++k) {
    const double angle =
        p_eff / std::pow(cfg.base, static_cast<double>(2 * k) /
                                       static_cast<double>(cfg.head_dim));
    const T c = static_cast<T>(std::cos(angle));
    const T s = static_cast<T>(std::sin(angle));
    const T a = v[2 * k];
    const T b = v[2 * k + 1];
    v[2 * k] = a * c + b * s;
    v[2 * k + 1] = -a * s + b * c;
  }
}

template <typename T>
std::vector<T> rope_apply(std::span<const T> v, long pos,
                          const RopeConfig& cfg) {
  std::vector<T> out(v.begin(), v.end());
  rope_apply_inplace(std::span<T>(out), pos, cfg);
  return out;
}

}  // namespace pelab
