#pragma once

#include <string>

#include <json.hpp>

#include "pelab/bias_spec.hpp"
#include "pelab/errors.hpp"
#include "pelab/fire.hpp"
#include "pelab/microlm.hpp"

namespace pelab {

inline nlohmann::json fire_init_to_json(const FireInit& init) {
  return nlohmann::json{
      {"hidden_layers", init.hidden_layers},
      {"hidden_size", init.hidden_size},
      {"activation", activation_name(init.activation)},
      {"final_activation", init.final_activation},
      {"psi", psi_name(init.psi)},
      {"use_threshold", init.use_threshold},
      {"init_c", init.init_c},
      {"init_L", init.init_L},
      {"eps", init.eps},
  };
}

inline FireInit fire_init_from_json(const nlohmann::json& j) {
  FireInit init;
  if (j.contains("hidden_layers"))
    init.hidden_layers = j.at("hidden_layers").get<std::size_t>();
  if (j.contains("hidden_size"))
    init.hidden_size = j.at("hidden_size").get<std::size_t>();
  if (j.contains("activation"))
    init.activation = activation_from_name(j.at("activation").get<std::string>());
  if (j.contains("final_activation"))
    init.final_activation = j.at("final_activation").get<bool>();
  if (j.contains("psi")) init.psi = psi_from_name(j.at("psi").get<std::string>());
  if (j.contains("use_threshold"))
    init.use_threshold = j.at("use_threshold").get<bool>();
  if (j.contains("init_c")) init.init_c = j.at("init_c").get<double>();
  if (j.contains("init_L")) init.init_L = j.at("init_L").get<double>();
  if (j.contains("eps")) init.eps = j.at("eps").get<double>();
  return init;
}

inline nlohmann::json pe_config_to_json(const PeConfig& pe) {
  switch (pe.kind) {
    case PeKind::NoPe:
      return nlohmann::json{{"variant", "NoPE"}};
    case PeKind::Rope: {
      nlohmann::json params{{"head_dim", pe.rope.head_dim},
                            {"base", pe.rope.base}};
      if (pe.rope.pi_scale) params["pi_scale"] = *pe.rope.pi_scale;
      return nlohmann::json{{"variant", "RoPE"}, {"params", params}};
    }
    case PeKind::Additive: {
      nlohmann::json specs = nlohmann::json::array();
      for (const auto& s : pe.additive) specs.push_back(to_json(s));
      return nlohmann::json{{"variant", "additive"},
                            {"params", {{"specs", specs}}}};
    }
    case PeKind::Fire:
      return nlohmann::json{{"variant", "FIRE"},
                            {"params", fire_init_to_json(pe.fire)}};
  }
  throw InvalidParameter("pe_config_to_json: unhandled kind");
}

inline PeConfig pe_config_from_json(const nlohmann::json& j) {
  PeConfig pe;
  const std::string variant = j.at("variant").get<std::string>();
  if (variant == "NoPE") {
    pe.kind = PeKind::NoPe;
  } else if (variant == "RoPE") {
    pe.kind = PeKind::Rope;
    if (j.contains("params")) {
      const auto& p = j.at("params");
      if (p.contains("head_dim"))
        pe.rope.head_dim = p.at("head_dim").get<std::size_t>();
      if (p.contains("base")) pe.rope.base = p.at("base").get<double>();
      if (p.contains("pi_scale"))
        pe.rope.pi_scale = p.at("pi_scale").get<double>();
    }
  } else if (variant == "additive") {
    pe.kind = PeKind::Additive;
    for (const auto& s : j.at("params").at("specs"))
      pe.additive.push_back(bias_spec_from_json(s));
  } else if (variant == "FIRE") {
    pe.kind = PeKind::Fire;
    if (j.contains("params")) pe.fire = fire_init_from_json(j.at("params"));
  } else {
    // a bare BiasSpec variant name means a single-spec additive PE
    pe.kind = PeKind::Additive;
    pe.additive.push_back(bias_spec_from_json(j));
  }
  return pe;
}

inline nlohmann::json model_config_to_json(const ModelConfig& cfg) {
  return nlohmann::json{
      {"num_layers", cfg.num_layers},
      {"num_heads", cfg.num_heads},
      {"d_model", cfg.d_model},
      {"d_head", cfg.d_head},
      {"ffn_mult", cfg.ffn_mult},
      {"vocab_size", cfg.vocab_size},
      {"train_len", cfg.train_len},
      {"share_pe_across_layers", cfg.share_pe_across_layers},
      {"pe", pe_config_to_json(cfg.pe)},
  };
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.num_layers = j.at("num_layers").get<std::size_t>();
  cfg.num_heads = j.at("num_heads").get<std::size_t>();
  cfg.d_model = j.at("d_model").get<std::size_t>();
  cfg.d_head = j.at("d_head").get<std::size_t>();
  if (j.contains("ffn_mult")) cfg.ffn_mult = j.at("ffn_mult").get<std::size_t>();
  cfg.vocab_size = j.at("vocab_size").get<std::size_t>();
  if (j.contains("train_len"))
    cfg.train_len = j.at("train_len").get<std::size_t>();
  if (j.contains("share_pe_across_layers"))
    cfg.share_pe_across_layers = j.at("share_pe_across_layers").get<bool>();
  cfg.pe = pe_config_from_json(j.at("pe"));
  cfg.validate();
  return cfg;
}

}  // namespace pelab
