#pragma once

// Flat key=value run configuration. Every run's outputs embed the exact
// configuration used; unknown keys are rejected so typos surface
// immediately instead of silently training with defaults.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "stance/model.hpp"
#include "stance/nn.hpp"

namespace stance {

struct RunConfig {
  // model
  std::string variant = "smemnn";
  int e_dim = 100;
  int lstm_dim = 100;
  int cnn_channels = 100;
  int cnn_width = 5;
  int k_maxout = 2;
  int p = 9;
  int L = 100;
  int claim_len = 30;
  int mlp_hidden = 100;
  int bow_proj = 256;
  std::string lstm_summary = "last";  // or "mean"
  // training
  std::uint64_t seed = 42;
  double lr = 1e-3;
  int batch = 64;
  int epochs = 50;
  int patience = 5;
  double val_fraction = 0.2;
  // explanation
  int topk = 5;
  int topk_snippets = 5;
  double merge_tolerance = 0.05;
  // paths
  std::string bodies, stances, embeddings, cache, checkpoint, out, log;

  void set(const std::string& key, const std::string& value) {
    auto to_i = [&] { return std::stoi(value); };
    auto to_d = [&] { return std::stod(value); };
    auto to_u = [&] { return static_cast<std::uint64_t>(std::stoull(value)); };
    if (key == "variant") variant = value;
    else if (key == "e_dim") e_dim = to_i();
    else if (key == "lstm_dim") lstm_dim = to_i();
    else if (key == "cnn_channels") cnn_channels = to_i();
    else if (key == "cnn_width") cnn_width = to_i();
    else if (key == "k_maxout") k_maxout = to_i();
    else if (key == "p") p = to_i();
    else if (key == "L") L = to_i();
    else if (key == "claim_len") claim_len = to_i();
    else if (key == "mlp_hidden") mlp_hidden = to_i();
    else if (key == "bow_proj") bow_proj = to_i();
    else if (key == "lstm_summary") lstm_summary = value;
    else if (key == "seed") seed = to_u();
    else if (key == "lr") lr = to_d();
    else if (key == "batch") batch = to_i();
    else if (key == "epochs") epochs = to_i();
    else if (key == "patience") patience = to_i();
    else if (key == "val_fraction") val_fraction = to_d();
    else if (key == "topk") topk = to_i();
    else if (key == "topk_snippets") topk_snippets = to_i();
    else if (key == "merge_tolerance") merge_tolerance = to_d();
    else if (key == "bodies") bodies = value;
    else if (key == "stances") stances = value;
    else if (key == "embeddings") embeddings = value;
    else if (key == "cache") cache = value;
    else if (key == "checkpoint") checkpoint = value;
    else if (key == "out") out = value;
    else if (key == "log") log = value;
    else throw std::runtime_error("unknown config key: " + key);
  }

  static RunConfig from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    RunConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::size_t hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      std::size_t eq = line.find('=');
      if (eq == std::string::npos) {
        bool blank = line.find_first_not_of(" \t\r") == std::string::npos;
        if (blank) continue;
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": expected key = value");
      }
      auto trim = [](std::string s) {
        std::size_t b = s.find_first_not_of(" \t\r");
        std::size_t e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
  }

  ModelConfig model_config(int vocab_size) const {
    ModelConfig mc;
    auto v = parse_variant(variant);
    if (!v) throw std::runtime_error("unknown variant: " + variant);
    mc.variant = *v;
    mc.e_dim = e_dim;
    mc.lstm_dim = lstm_dim;
    mc.cnn_channels = cnn_channels;
    mc.cnn_width = cnn_width;
    mc.k_maxout = k_maxout;
    mc.p = p;
    mc.L = L;
    mc.claim_len = claim_len;
    mc.mlp_hidden = mlp_hidden;
    mc.bow_dim = mc.variant == Variant::with_tf ? vocab_size : 0;
    mc.bow_proj = bow_proj;
    if (lstm_summary == "mean") mc.summary = nn::LstmSummary::mean_over_time;
    else if (lstm_summary == "last") mc.summary = nn::LstmSummary::last_state;
    else throw std::runtime_error("lstm_summary must be 'last' or 'mean'");
    mc.seed = seed;
    return mc;
  }

  nlohmann::json to_json() const {
    return {{"variant", variant},
            {"e_dim", e_dim},
            {"lstm_dim", lstm_dim},
            {"cnn_channels", cnn_channels},
            {"cnn_width", cnn_width},
            {"k_maxout", k_maxout},
            {"p", p},
            {"L", L},
            {"claim_len", claim_len},
            {"mlp_hidden", mlp_hidden},
            {"bow_proj", bow_proj},
            {"lstm_summary", lstm_summary},
            {"seed", seed},
            {"lr", lr},
            {"batch", batch},
            {"epochs", epochs},
            {"patience", patience},
            {"val_fraction", val_fraction},
            {"topk", topk},
            {"topk_snippets", topk_snippets},
            {"merge_tolerance", merge_tolerance}};
  }
};

}  // namespace stance
