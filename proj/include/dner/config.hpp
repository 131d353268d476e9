#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace dner {

// Model and training hyperparameters shared by the CLI and the library.
// dropout is the probability of dropping a unit.
struct TrainConfig {
  int emb_dim = 32;
  int word_hidden = 32;
  int span_hidden = 24;
  int entity_hidden = 16;
  int max_seg_len = 3;
  int max_merge_segments = 3;
  bool shared_encoder = true;
  double dropout = 0.2;
  double l2 = 1e-6;
  double lr = 0.003;
  int epochs = 30;
  int patience = 8;
  uint64_t seed = 0;
  double unk_prob = 0.5;
  int unk_max_freq = 1;

  void validate() const {
    if (emb_dim < 1 || word_hidden < 1 || span_hidden < 1 || entity_hidden < 1)
      throw std::invalid_argument("config: layer sizes must be positive");
    if (max_seg_len < 1) throw std::invalid_argument("config: max_seg_len must be positive");
    if (max_merge_segments < 1)
      throw std::invalid_argument("config: max_merge_segments must be positive");
    if (dropout < 0 || dropout >= 1) throw std::invalid_argument("config: dropout must be in [0,1)");
    if (l2 < 0) throw std::invalid_argument("config: l2 must be nonnegative");
    if (lr <= 0) throw std::invalid_argument("config: lr must be positive");
    if (epochs < 1) throw std::invalid_argument("config: epochs must be positive");
    if (patience < 1) throw std::invalid_argument("config: patience must be positive");
    if (unk_prob < 0 || unk_prob > 1)
      throw std::invalid_argument("config: unk_prob must be in [0,1]");
  }
};

// "paper": dimensions sized for real annotated data. "synthetic": a small
// setup that trains in minutes on the bundled generator's output.
inline TrainConfig preset_config(const std::string& name) {
  TrainConfig cfg;
  if (name == "synthetic") return cfg;
  if (name == "paper") {
    cfg.emb_dim = 200;
    cfg.word_hidden = 128;
    cfg.span_hidden = 128;
    cfg.entity_hidden = 64;
    cfg.max_seg_len = 6;
    cfg.dropout = 0.8;
    cfg.l2 = 1e-4;
    cfg.lr = 0.001;
    cfg.epochs = 30;
    cfg.patience = 10;
    return cfg;
  }
  throw std::invalid_argument("unknown preset: " + name + " (expected synthetic or paper)");
}

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"emb_dim", c.emb_dim},
          {"word_hidden", c.word_hidden},
          {"span_hidden", c.span_hidden},
          {"entity_hidden", c.entity_hidden},
          {"max_seg_len", c.max_seg_len},
          {"max_merge_segments", c.max_merge_segments},
          {"shared_encoder", c.shared_encoder},
          {"dropout", c.dropout},
          {"l2", c.l2},
          {"lr", c.lr},
          {"epochs", c.epochs},
          {"patience", c.patience},
          {"seed", c.seed},
          {"unk_prob", c.unk_prob},
          {"unk_max_freq", c.unk_max_freq}};
}

inline TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.emb_dim = j.at("emb_dim").get<int>();
  c.word_hidden = j.at("word_hidden").get<int>();
  c.span_hidden = j.at("span_hidden").get<int>();
  c.entity_hidden = j.at("entity_hidden").get<int>();
  c.max_seg_len = j.at("max_seg_len").get<int>();
  c.max_merge_segments = j.at("max_merge_segments").get<int>();
  c.shared_encoder = j.at("shared_encoder").get<bool>();
  c.dropout = j.at("dropout").get<double>();
  c.l2 = j.at("l2").get<double>();
  c.lr = j.at("lr").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.patience = j.at("patience").get<int>();
  c.seed = j.at("seed").get<uint64_t>();
  c.unk_prob = j.at("unk_prob").get<double>();
  c.unk_max_freq = j.at("unk_max_freq").get<int>();
  c.validate();
  return c;
}

}  // namespace dner
