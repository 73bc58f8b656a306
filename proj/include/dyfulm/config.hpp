#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace dyfulm {

struct ModelConfig {
  int vocab_size = 50;
  int width = 32;          // token representation size d
  int depth = 4;           // encoder blocks per branch
  int ffn_hidden = 64;
  int t_max = 64;
  int fusion_hidden = 16;  // BiLSTM hidden size in the layer scorer
  double dropout = 0.1;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 16;
  int epochs = 6;
  std::uint64_t seed = 7;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 5.0;
  bool check_finite = false;
};

struct DataConfig {
  int min_frequency = 1;
  int max_vocab = 20000;
  int synth_rows = 2000;
  int synth_vocab = 50;
};

struct AblationToggles {
  bool gated_fusion = true;
  bool hierarchical_guidance = true;
  bool dynamic_loss = true;
  bool layer_fusion = true;
};

struct Config {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  AblationToggles ablation;
};

// missing keys keep their defaults, so partial config files are fine

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.width = j.value("width", c.width);
  c.depth = j.value("depth", c.depth);
  c.ffn_hidden = j.value("ffn_hidden", c.ffn_hidden);
  c.t_max = j.value("t_max", c.t_max);
  c.fusion_hidden = j.value("fusion_hidden", c.fusion_hidden);
  c.dropout = j.value("dropout", c.dropout);
}

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"vocab_size", c.vocab_size}, {"width", c.width},
       {"depth", c.depth},           {"ffn_hidden", c.ffn_hidden},
       {"t_max", c.t_max},           {"fusion_hidden", c.fusion_hidden},
       {"dropout", c.dropout}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.seed = j.value("seed", c.seed);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.check_finite = j.value("check_finite", c.check_finite);
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
       {"epochs", c.epochs},               {"seed", c.seed},
       {"beta1", c.beta1},                 {"beta2", c.beta2},
       {"epsilon", c.epsilon},             {"clip_norm", c.clip_norm},
       {"check_finite", c.check_finite}};
}

inline void from_json(const nlohmann::json& j, DataConfig& c) {
  c.min_frequency = j.value("min_frequency", c.min_frequency);
  c.max_vocab = j.value("max_vocab", c.max_vocab);
  c.synth_rows = j.value("synth_rows", c.synth_rows);
  c.synth_vocab = j.value("synth_vocab", c.synth_vocab);
}

inline void to_json(nlohmann::json& j, const DataConfig& c) {
  j = {{"min_frequency", c.min_frequency},
       {"max_vocab", c.max_vocab},
       {"synth_rows", c.synth_rows},
       {"synth_vocab", c.synth_vocab}};
}

inline void from_json(const nlohmann::json& j, AblationToggles& c) {
  c.gated_fusion = j.value("gated_fusion", c.gated_fusion);
  c.hierarchical_guidance = j.value("hierarchical_guidance", c.hierarchical_guidance);
  c.dynamic_loss = j.value("dynamic_loss", c.dynamic_loss);
  c.layer_fusion = j.value("layer_fusion", c.layer_fusion);
}

inline void to_json(nlohmann::json& j, const AblationToggles& c) {
  j = {{"gated_fusion", c.gated_fusion},
       {"hierarchical_guidance", c.hierarchical_guidance},
       {"dynamic_loss", c.dynamic_loss},
       {"layer_fusion", c.layer_fusion}};
}

inline void from_json(const nlohmann::json& j, Config& c) {
  if (j.contains("model")) j.at("model").get_to(c.model);
  if (j.contains("train")) j.at("train").get_to(c.train);
  if (j.contains("data")) j.at("data").get_to(c.data);
  if (j.contains("ablation")) j.at("ablation").get_to(c.ablation);
}

inline void to_json(nlohmann::json& j, const Config& c) {
  j = {{"model", c.model}, {"train", c.train}, {"data", c.data}, {"ablation", c.ablation}};
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("config: " + path + " is not valid JSON: " + e.what());
  }
  return j.get<Config>();
}

// ablation variants, from the full model down to the plain multi-task stack
inline AblationToggles toggles_for_variant(const std::string& name) {
  AblationToggles t;
  if (name == "full") return t;
  if (name == "wo-dl") {
    t.dynamic_loss = false;
    return t;
  }
  if (name == "wo-hg-dl") {
    t.dynamic_loss = false;
    t.hierarchical_guidance = false;
    return t;
  }
  if (name == "wo-gf-hg-dl") {
    t.dynamic_loss = false;
    t.hierarchical_guidance = false;
    t.gated_fusion = false;
    return t;
  }
  throw std::invalid_argument("unknown variant '" + name +
                              "' (expected full, wo-dl, wo-hg-dl, wo-gf-hg-dl)");
}

inline std::string variant_name(const AblationToggles& t) {
  if (!t.layer_fusion) return "custom";
  if (t.gated_fusion && t.hierarchical_guidance && t.dynamic_loss) return "full";
  if (t.gated_fusion && t.hierarchical_guidance && !t.dynamic_loss) return "wo-dl";
  if (t.gated_fusion && !t.hierarchical_guidance && !t.dynamic_loss) return "wo-hg-dl";
  if (!t.gated_fusion && !t.hierarchical_guidance && !t.dynamic_loss) return "wo-gf-hg-dl";
  return "custom";
}

}  // namespace dyfulm
