#pragma once

#include <cmath>
#include <string>

#include "pelab/errors.hpp"

namespace pelab {

enum class Activation {
  Identity,
  Relu,
  Gelu,
  // Construction-only tags used by the representation module. step is
  // 1{x >= 0}; power is x^exponent on non-negative preactivations.
  Step,
  Power,
  Cos,
};

struct ActivationTag {
  Activation kind = Activation::Relu;
  double exponent = 1.0;  // Power only

  bool differentiable() const {
    return kind == Activation::Identity || kind == Activation::Relu ||
           kind == Activation::Gelu;
  }
};

inline const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::Gelu: return "gelu";
    case Activation::Step: return "step";
    case Activation::Power: return "power";
    case Activation::Cos: return "cos";
  }
  return "?";
}

inline Activation activation_from_name(const std::string& name) {
  if (name == "identity") return Activation::Identity;
  if (name == "relu") return Activation::Relu;
  if (name == "gelu") return Activation::Gelu;
  if (name == "step") return Activation::Step;
  if (name == "power") return Activation::Power;
  if (name == "cos") return Activation::Cos;
  throw InvalidParameter("unknown activation: " + name);
}

template <typename T>
T activation_eval(const ActivationTag& tag, T z) {
  switch (tag.kind) {
    case Activation::Identity:
      return z;
    case Activation::Relu:
      return z > T(0) ? z : T(0);
    case Activation::Gelu: {
      // exact erf form
      const T inv_sqrt2 = static_cast<T>(0.7071067811865475244);
      return z * T(0.5) * (T(1) + std::erf(z * inv_sqrt2));
    }
    case Activation::Step:
      return z >= T(0) ? T(1) : T(0);
    case Activation::Power: {
      if (z < T(0) &&
          tag.exponent != std::floor(tag.exponent))
        throw DomainError("power activation: negative preactivation under "
                          "fractional exponent");
      return static_cast<T>(std::pow(static_cast<double>(z), tag.exponent));
    }
    case Activation::Cos:
      return std::cos(z);
  }
  throw InvalidParameter("unhandled activation");
}

// d activation / d z. Only defined for differentiable tags; relu uses
// subgradient 0 at z = 0.
template <typename T>
T activation_derivative(const ActivationTag& tag, T z) {
  switch (tag.kind) {
    case Activation::Identity:
      return T(1);
    case Activation::Relu:
      return z > T(0) ? T(1) : T(0);
    case Activation::Gelu: {
      const T inv_sqrt2 = static_cast<T>(0.7071067811865475244);
      const T inv_sqrt2pi = static_cast<T>(0.3989422804014326779);
      const T cdf = T(0.5) * (T(1) + std::erf(z * inv_sqrt2));
      const T pdf = inv_sqrt2pi * std::exp(z * z * T(-0.5));
      return cdf + z * pdf;
    }
    default:
      throw NonDifferentiableConfig(
          std::string("activation '") + activation_name(tag.kind) +
          "' is construction-only and has no gradient");
  }
}

}  // namespace pelab
