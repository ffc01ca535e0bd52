#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "pelab/errors.hpp"

namespace pelab {

enum class BiasVariant {
  NoPe,
  T5Simplified,
  T5Bucketed,
  T5LogBin,
  Alibi,
  KerpleLog,
  KerplePower,
  Sandwich,
};

inline const char* variant_name(BiasVariant v) {
  switch (v) {
    case BiasVariant::NoPe: return "NoPE";
    case BiasVariant::T5Simplified: return "T5Simplified";
    case BiasVariant::T5Bucketed: return "T5Bucketed";
    case BiasVariant::T5LogBin: return "T5LogBin";
    case BiasVariant::Alibi: return "Alibi";
    case BiasVariant::KerpleLog: return "KerpleLog";
    case BiasVariant::KerplePower: return "KerplePower";
    case BiasVariant::Sandwich: return "Sandwich";
  }
  return "?";
}

inline BiasVariant variant_from_name(const std::string& name) {
  if (name == "NoPE") return BiasVariant::NoPe;
  if (name == "T5Simplified") return BiasVariant::T5Simplified;
  if (name == "T5Bucketed") return BiasVariant::T5Bucketed;
  if (name == "T5LogBin") return BiasVariant::T5LogBin;
  if (name == "Alibi") return BiasVariant::Alibi;
  if (name == "KerpleLog") return BiasVariant::KerpleLog;
  if (name == "KerplePower") return BiasVariant::KerplePower;
  if (name == "Sandwich") return BiasVariant::Sandwich;
  throw InvalidParameter("unknown bias variant: " + name);
}

// One additive positional-encoding variant plus its parameters. Unused
// fields stay at their defaults; validate() enforces the per-variant rules.
struct BiasSpec {
  BiasVariant variant = BiasVariant::NoPe;

  // T5Simplified: values[k] = bias for clamped distance k, k = 0..K.
  // T5Bucketed / T5LogBin: values[k] = bias of bucket k.
  std::vector<double> values;
  // T5Bucketed only: strictly increasing boundaries, boundaries[0] = 0.
  std::vector<long> boundaries;
  // T5LogBin only.
  long num_buckets = 0;   // K+1, even
  long max_distance = 0;  // L1

  // Alibi: slope. KerpleLog/KerplePower: r1, r2. Sandwich: multiplier r1.
  double r = 0.0;
  double r1 = 0.0;
  double r2 = 0.0;
  // Sandwich frequency count d'.
  long d_prime = 0;

  void validate() const {
    switch (variant) {
      case BiasVariant::NoPe:
        break;
      case BiasVariant::T5Simplified:
        if (values.empty())
          throw InvalidParameter("T5Simplified: values must be non-empty");
        break;
      case BiasVariant::T5Bucketed: {
        if (boundaries.empty() || boundaries.front() != 0)
          throw InvalidParameter("T5Bucketed: boundaries must start at 0");
        for (std::size_t k = 1; k < boundaries.size(); ++k)
          if (boundaries[k] <= boundaries[k - 1])
            throw InvalidParameter(
                "T5Bucketed: boundaries must be strictly increasing");
        if (values.size() != boundaries.size())
          throw InvalidParameter(
              "T5Bucketed: need one value per bucket (K+1)");
        break;
      }
      case BiasVariant::T5LogBin:
        if (num_buckets < 2 || num_buckets % 2 != 0)
          throw InvalidParameter("T5LogBin: num_buckets must be even and >= 2");
        if (max_distance <= num_buckets / 2)
          throw InvalidParameter(
              "T5LogBin: max_distance must exceed num_buckets/2");
        if (!values.empty() &&
            values.size() != static_cast<std::size_t>(num_buckets))
          throw InvalidParameter("T5LogBin: values must have num_buckets entries");
        break;
      case BiasVariant::Alibi:
        if (!(r > 0)) throw InvalidParameter("Alibi: slope r must be > 0");
        break;
      case BiasVariant::KerpleLog:
      case BiasVariant::KerplePower:
        if (!(r1 > 0) || !(r2 > 0))
          throw InvalidParameter("Kerple: r1 and r2 must be > 0");
        break;
      case BiasVariant::Sandwich:
        if (d_prime < 1)
          throw InvalidParameter("Sandwich: d' must be a positive integer");
        break;
    }
  }
};

inline nlohmann::json to_json(const BiasSpec& spec) {
  nlohmann::json params = nlohmann::json::object();
  switch (spec.variant) {
    case BiasVariant::NoPe:
      break;
    case BiasVariant::T5Simplified:
      params["values"] = spec.values;
      break;
    case BiasVariant::T5Bucketed:
      params["boundaries"] = spec.boundaries;
      params["values"] = spec.values;
      break;
    case BiasVariant::T5LogBin:
      params["num_buckets"] = spec.num_buckets;
      params["max_distance"] = spec.max_distance;
      params["values"] = spec.values;
      break;
    case BiasVariant::Alibi:
      params["r"] = spec.r;
      break;
    case BiasVariant::KerpleLog:
    case BiasVariant::KerplePower:
      params["r1"] = spec.r1;
      params["r2"] = spec.r2;
      break;
    case BiasVariant::Sandwich:
      params["r1"] = spec.r1;
      params["d_prime"] = spec.d_prime;
      break;
  }
  return nlohmann::json{{"variant", variant_name(spec.variant)},
                        {"params", params}};
}

inline BiasSpec bias_spec_from_json(const nlohmann::json& j) {
  BiasSpec spec;
  spec.variant = variant_from_name(j.at("variant").get<std::string>());
  const auto& params = j.at("params");
  switch (spec.variant) {
    case BiasVariant::NoPe:
      break;
    case BiasVariant::T5Simplified:
      spec.values = params.at("values").get<std::vector<double>>();
      break;
    case BiasVariant::T5Bucketed:
      spec.boundaries = params.at("boundaries").get<std::vector<long>>();
      spec.values = params.at("values").get<std::vector<double>>();
      break;
    case BiasVariant::T5LogBin:
      spec.num_buckets = params.at("num_buckets").get<long>();
      spec.max_distance = params.at("max_distance").get<long>();
      spec.values = params.at("values").get<std::vector<double>>();
      break;
    case BiasVariant::Alibi:
      spec.r = params.at("r").get<double>();
      break;
    case BiasVariant::KerpleLog:
    case BiasVariant::KerplePower:
      spec.r1 = params.at("r1").get<double>();
      spec.r2 = params.at("r2").get<double>();
      break;
    case BiasVariant::Sandwich:
      spec.r1 = params.at("r1").get<double>();
      spec.d_prime = params.at("d_prime").get<long>();
      break;
  }
  spec.validate();
  return spec;
}

}  // namespace pelab
