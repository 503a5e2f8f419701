#pragma once

// Model checkpoints: variant tag, model dimensions, every parameter
// array by name, the vocabulary hash of the corpus the model was
// prepared against, and a snapshot of the run configuration.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "stance/container.hpp"
#include "stance/model.hpp"

namespace stance {

constexpr char kCheckpointMagic[8] = {'S', 'T', 'C', 'K', 'P', 'T', '0', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

inline nlohmann::json model_config_to_json(const ModelConfig& c) {
  return {
      {"variant", to_string(c.variant)},
      {"e_dim", c.e_dim},
      {"lstm_dim", c.lstm_dim},
      {"cnn_channels", c.cnn_channels},
      {"cnn_width", c.cnn_width},
      {"k_maxout", c.k_maxout},
      {"p", c.p},
      {"L", c.L},
      {"claim_len", c.claim_len},
      {"mlp_hidden", c.mlp_hidden},
      {"bow_dim", c.bow_dim},
      {"bow_proj", c.bow_proj},
      {"lstm_summary",
       c.summary == nn::LstmSummary::last_state ? "last" : "mean"},
      {"seed", c.seed},
  };
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  auto v = parse_variant(j.at("variant").get<std::string>());
  if (!v) throw std::runtime_error("checkpoint: unknown variant");
  c.variant = *v;
  c.e_dim = j.at("e_dim").get<int>();
  c.lstm_dim = j.at("lstm_dim").get<int>();
  c.cnn_channels = j.at("cnn_channels").get<int>();
  c.cnn_width = j.at("cnn_width").get<int>();
  c.k_maxout = j.at("k_maxout").get<int>();
  c.p = j.at("p").get<int>();
  c.L = j.at("L").get<int>();
  c.claim_len = j.at("claim_len").get<int>();
  c.mlp_hidden = j.at("mlp_hidden").get<int>();
  c.bow_dim = j.at("bow_dim").get<int>();
  c.bow_proj = j.at("bow_proj").get<int>();
  c.summary = j.at("lstm_summary").get<std::string>() == "mean"
                  ? nn::LstmSummary::mean_over_time
                  : nn::LstmSummary::last_state;
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

inline void save_checkpoint(const std::string& path, const StanceModel& model,
                            std::uint64_t vocab_hash,
                            const nlohmann::json& run_config) {
  nlohmann::json meta;
  meta["model"] = model_config_to_json(model.config());
  meta["variant"] = to_string(model.config().variant);
  meta["vocab_hash"] = vocab_hash;
  meta["run_config"] = run_config;
  nlohmann::json arrays = nlohmann::json::array();
  std::vector<const double*> blocks;
  std::vector<std::size_t> sizes;
  for (const auto& p : model.params().all()) {
    arrays.push_back({{"name", p->name},
                      {"rows", p->value.rows()},
                      {"cols", p->value.cols()}});
    blocks.push_back(p->value.data());
    sizes.push_back(p->size());
  }
  meta["params"] = std::move(arrays);
  container::write_container(path, kCheckpointMagic, kCheckpointVersion, meta,
                             blocks, sizes);
}

struct LoadedCheckpoint {
  std::unique_ptr<StanceModel> model;
  std::uint64_t vocab_hash = 0;
  nlohmann::json run_config;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  auto r = container::open_container(path, kCheckpointMagic, kCheckpointVersion);
  LoadedCheckpoint out;
  out.model = std::make_unique<StanceModel>(
      model_config_from_json(r.meta.at("model")));
  out.vocab_hash = r.meta.at("vocab_hash").get<std::uint64_t>();
  out.run_config = r.meta.value("run_config", nlohmann::json::object());
  for (const auto& a : r.meta.at("params")) {
    std::string name = a.at("name").get<std::string>();
    nn::Param* p = out.model->params().find(name);
    if (!p) throw std::runtime_error(path + ": unexpected parameter " + name);
    if (p->value.rows() != a.at("rows").get<Eigen::Index>() ||
        p->value.cols() != a.at("cols").get<Eigen::Index>())
      throw std::runtime_error(path + ": shape mismatch for " + name);
    container::read_block(r, p->value.data(), p->size(), name);
  }
  return out;
}

}  // namespace stance
