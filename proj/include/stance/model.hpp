#pragma once

// The stance memory network. A claim and up to p evidence paragraphs are
// encoded by separate LSTM and CNN(+maxout) networks; paragraph memories
// are gated by claim-paragraph TF.IDF cosine, scored against the claim
// through a trainable similarity matrix, gated again, scored through a
// second similarity matrix, and summarized into a fixed output vector
// that an MLP maps to the four stance classes.
//
// Variants: the similarity matrices can be replaced by a projected dot
// product, and the feature vector can be extended with projected
// bag-of-words blocks for the full documents.

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stance/autodiff.hpp"
#include "stance/corpus.hpp"
#include "stance/nn.hpp"
#include "stance/tfidf.hpp"

namespace stance {

enum class Variant { smemnn, dot_product, with_tf };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::smemnn: return "smemnn";
    case Variant::dot_product: return "dot";
    case Variant::with_tf: return "tf";
  }
  return "?";
}

inline std::optional<Variant> parse_variant(std::string_view s) {
  if (s == "smemnn") return Variant::smemnn;
  if (s == "dot" || s == "dot_product" || s == "dotProduct")
    return Variant::dot_product;
  if (s == "tf" || s == "with_tf" || s == "withTF") return Variant::with_tf;
  return std::nullopt;
}

struct ModelConfig {
  Variant variant = Variant::smemnn;
  int e_dim = 100;
  int lstm_dim = 100;      // d: evidence and claim LSTM code size
  int cnn_channels = 100;  // d': CNN code size
  int cnn_width = 5;
  int k_maxout = 2;
  int p = 9;         // paragraph slots
  int L = 100;       // token budget per paragraph
  int claim_len = 30;
  int mlp_hidden = 100;
  int bow_dim = 0;    // vocabulary size; used by with_tf
  int bow_proj = 256; // with_tf projection width
  nn::LstmSummary summary = nn::LstmSummary::last_state;
  std::uint64_t seed = 1;

  void validate() const {
    if (L < cnn_width || claim_len < cnn_width)
      throw std::invalid_argument("token budgets must be >= filter width");
    if (p < 1) throw std::invalid_argument("p must be >= 1");
    if (k_maxout < 1) throw std::invalid_argument("k_maxout must be >= 1");
    if (variant == Variant::with_tf && bow_dim < 1)
      throw std::invalid_argument("with_tf variant needs bow_dim");
  }
};

// One claim-document pair, featurized and ready for the network.
struct Instance {
  EvidenceTensor tensor;
  std::vector<int> claim_ids;   // already truncated to claim_len
  std::vector<double> p_tfidf;  // per slot; 0 on padded slots
  SparseVec doc_bow;            // with_tf: TF.IDF over the full document
  SparseVec claim_bow;
  double bow_cosine = 0.0;
  std::optional<Stance> gold;
};

struct SimilarityProfile {
  std::vector<double> lstm, cnn, tfidf;
};

struct ForwardResult {
  Eigen::Vector4d probs = Eigen::Vector4d::Zero();
  Stance predicted = Stance::unrelated;
  SimilarityProfile profile;
  Eigen::VectorXd output_vec;  // o: [mean(c); max/mean of each profile]
  Eigen::VectorXd s_cnn;       // claim CNN code value
  Eigen::VectorXd snippet_scorer;  // w with score(t) = w . positions.row(t)
  std::vector<Eigen::MatrixXd> positions;  // per slot: T x channels
  double loss = std::numeric_limits<double>::quiet_NaN();

  // Kept alive for training; backward() through loss_var populates
  // parameter gradients.
  std::unique_ptr<ad::Tape> tape;
  ad::Var loss_var;
};

class StanceModel {
 public:
  explicit StanceModel(ModelConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    std::mt19937_64 rng(cfg_.seed);
    ev_lstm_ = nn::make_lstm(params_, "ev_lstm", cfg_.e_dim, cfg_.lstm_dim, rng);
    cl_lstm_ = nn::make_lstm(params_, "cl_lstm", cfg_.e_dim, cfg_.lstm_dim, rng);
    ev_cnn_ = nn::make_conv(params_, "ev_cnn", cfg_.cnn_width, cfg_.e_dim,
                            cfg_.cnn_channels, cfg_.k_maxout, rng);
    cl_cnn_ = nn::make_conv(params_, "cl_cnn", cfg_.cnn_width, cfg_.e_dim,
                            cfg_.cnn_channels, cfg_.k_maxout, rng);
    if (cfg_.variant == Variant::dot_product) {
      proj_lstm_ = nn::make_dense(params_, "proj_lstm", cfg_.lstm_dim,
                                  cfg_.lstm_dim, rng);
      proj_cnn_ = nn::make_dense(params_, "proj_cnn", cfg_.cnn_channels,
                                 cfg_.cnn_channels, rng);
    } else {
      sim_lstm_ = params_.add("sim_lstm.M", cfg_.lstm_dim, cfg_.lstm_dim);
      sim_cnn_ = params_.add("sim_cnn.M", cfg_.cnn_channels, cfg_.cnn_channels);
      nn::glorot_init(sim_lstm_->value, rng);
      nn::glorot_init(sim_cnn_->value, rng);
    }
    int feat = feature_dim();
    if (cfg_.variant == Variant::with_tf) {
      bow_doc_ = nn::make_dense(params_, "bow_doc", cfg_.bow_dim, cfg_.bow_proj, rng);
      bow_claim_ =
          nn::make_dense(params_, "bow_claim", cfg_.bow_dim, cfg_.bow_proj, rng);
    }
    mlp1_ = nn::make_dense(params_, "mlp1", feat, cfg_.mlp_hidden, rng);
    mlp2_ = nn::make_dense(params_, "mlp2", cfg_.mlp_hidden, kNumStances, rng);
  }

  const ModelConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  std::size_t trainable_parameter_count() const { return params_.total_size(); }

  int feature_dim() const {
    int feat = (cfg_.cnn_channels + 6) + cfg_.lstm_dim + cfg_.cnn_channels;
    if (cfg_.variant == Variant::with_tf) feat += 2 * cfg_.bow_proj + 1;
    return feat;
  }

  ForwardResult forward(const Instance& inst, const EmbeddingTable& emb,
                        bool want_positions = false) const {
    if (inst.tensor.num_slots() != cfg_.p ||
        inst.tensor.budget() != cfg_.L)
      throw std::invalid_argument("instance tensor does not match model config");
    if (static_cast<int>(inst.p_tfidf.size()) != cfg_.p)
      throw std::invalid_argument("tfidf profile length mismatch");
    if (emb.dim() != cfg_.e_dim)
      throw std::invalid_argument("embedding dimension mismatch");

    ForwardResult res;
    res.tape = std::make_unique<ad::Tape>();
    ad::Tape& t = *res.tape;

    nn::BoundLstm ev_lstm = nn::bind(t, ev_lstm_);
    nn::BoundLstm cl_lstm = nn::bind(t, cl_lstm_);
    nn::BoundConv ev_cnn = nn::bind(t, ev_cnn_);
    nn::BoundConv cl_cnn = nn::bind(t, cl_cnn_);

    // Claim codes; the claim budget applies even if the caller skipped it.
    std::vector<int> claim_ids = inst.claim_ids;
    if (static_cast<int>(claim_ids.size()) > cfg_.claim_len)
      claim_ids.resize(cfg_.claim_len);
    ad::Var s_lstm =
        nn::lstm_run(t, cl_lstm, embed_steps(t, claim_ids, emb), cfg_.summary);
    ad::Var s_cnn =
        nn::conv_run(t, cl_cnn,
                     t.constant(nn::make_windows(
                         embed_padded(claim_ids, cfg_.claim_len, emb),
                         cfg_.cnn_width)))
            .pooled;

    // Dot-product variant: the claim is projected once, then scored
    // against each memory row with an inner product.
    ad::Var s_lstm_score = s_lstm, s_cnn_score = s_cnn;
    ad::Var simL, simC;
    if (cfg_.variant == Variant::dot_product) {
      s_lstm_score = nn::dense(t, nn::bind(t, proj_lstm_), s_lstm);
      s_cnn_score = nn::dense(t, nn::bind(t, proj_cnn_), s_cnn);
    } else {
      simL = t.leaf(sim_lstm_->value, &sim_lstm_->grad);
      simC = t.leaf(sim_cnn_->value, &sim_cnn_->grad);
    }

    std::vector<ad::Var> p_lstm_vars, p_cnn_vars, p_tfidf_vars;
    std::vector<ad::Var> c_gated_rows;
    if (want_positions) res.positions.reserve(cfg_.p);

    for (int j = 0; j < cfg_.p; ++j) {
      std::vector<int> ids(inst.tensor.token_counts[j]);
      for (int i = 0; i < inst.tensor.token_counts[j]; ++i)
        ids[i] = inst.tensor.token_ids(j, i);

      ad::Var m_j = nn::lstm_run(t, ev_lstm, embed_steps(t, ids, emb), cfg_.summary);
      nn::ConvOut conv = nn::conv_run(
          t, ev_cnn,
          t.constant(nn::make_windows(embed_padded(ids, cfg_.L, emb),
                                      cfg_.cnn_width)));
      if (want_positions) res.positions.push_back(t.value(conv.positions));

      double ptf = inst.tensor.mask[j] ? inst.p_tfidf[j] : 0.0;
      p_tfidf_vars.push_back(t.scalar(ptf));

      ad::Var m_gated = t.scale(m_j, ptf);
      ad::Var p_lstm = cfg_.variant == Variant::dot_product
                           ? t.dot(s_lstm_score, m_gated)
                           : t.dot(s_lstm_score, t.matmul(simL, m_gated));
      ad::Var c_gated = t.scale_by(conv.pooled, p_lstm);
      ad::Var p_cnn = cfg_.variant == Variant::dot_product
                          ? t.dot(s_cnn_score, c_gated)
                          : t.dot(s_cnn_score, t.matmul(simC, c_gated));

      p_lstm_vars.push_back(p_lstm);
      p_cnn_vars.push_back(p_cnn);
      c_gated_rows.push_back(c_gated);
    }

    // Output vector o: mean memory row then max/mean of each profile.
    ad::Var o = t.vstack({t.mean_vars(c_gated_rows), t.max_of(p_cnn_vars),
                          t.mean_of(p_cnn_vars), t.max_of(p_lstm_vars),
                          t.mean_of(p_lstm_vars), t.max_of(p_tfidf_vars),
                          t.mean_of(p_tfidf_vars)});

    std::vector<ad::Var> feat_parts = {o, s_lstm, s_cnn};
    if (cfg_.variant == Variant::with_tf) {
      feat_parts.push_back(
          nn::dense(t, nn::bind(t, bow_doc_), t.constant(densify(inst.doc_bow))));
      feat_parts.push_back(nn::dense(t, nn::bind(t, bow_claim_),
                                     t.constant(densify(inst.claim_bow))));
      feat_parts.push_back(t.scalar(inst.bow_cosine));
    }
    ad::Var feats = t.vstack(feat_parts);
    ad::Var hidden = t.relu(nn::dense(t, nn::bind(t, mlp1_), feats));
    ad::Var logits = nn::dense(t, nn::bind(t, mlp2_), hidden);

    Eigen::Vector4d probs = ad::softmax(t.value(logits).col(0));
    res.probs = probs;
    Eigen::Index best = 0;
    probs.maxCoeff(&best);
    res.predicted = static_cast<Stance>(best);

    res.profile.lstm.resize(cfg_.p);
    res.profile.cnn.resize(cfg_.p);
    res.profile.tfidf.resize(cfg_.p);
    for (int j = 0; j < cfg_.p; ++j) {
      res.profile.lstm[j] = t.value(p_lstm_vars[j])(0, 0);
      res.profile.cnn[j] = t.value(p_cnn_vars[j])(0, 0);
      res.profile.tfidf[j] = t.value(p_tfidf_vars[j])(0, 0);
    }
    res.output_vec = t.value(o).col(0);
    res.s_cnn = t.value(s_cnn).col(0);
    if (cfg_.variant == Variant::dot_product)
      res.snippet_scorer = t.value(s_cnn_score).col(0);
    else
      res.snippet_scorer = sim_cnn_->value.transpose() * res.s_cnn;

    if (inst.gold) {
      res.loss_var =
          t.softmax_cross_entropy(logits, static_cast<int>(*inst.gold));
      res.loss = t.value(res.loss_var)(0, 0);
    }
    return res;
  }

  // Span of the n-gram at conv position t: token indices [t, t + width).
  std::pair<int, int> ngram_span(int position) const {
    return {position, position + cfg_.cnn_width};
  }

 private:
  Eigen::MatrixXd densify(const SparseVec& v) const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(cfg_.bow_dim, 1);
    for (const auto& [id, w] : v) m(id, 0) = w;
    return m;
  }

  std::vector<ad::Var> embed_steps(ad::Tape& t, const std::vector<int>& ids,
                                   const EmbeddingTable& emb) const {
    std::vector<ad::Var> steps;
    steps.reserve(ids.size());
    for (int id : ids)
      steps.push_back(t.constant(emb.rows.row(id).transpose()));
    return steps;
  }

  Eigen::MatrixXd embed_padded(const std::vector<int>& ids, int budget,
                               const EmbeddingTable& emb) const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(budget, cfg_.e_dim);
    for (int i = 0; i < budget && i < static_cast<int>(ids.size()); ++i)
      m.row(i) = emb.rows.row(ids[i]);
    return m;
  }

  ModelConfig cfg_;
  nn::ParamStore params_;
  nn::LstmParams ev_lstm_, cl_lstm_;
  nn::ConvMaxoutParams ev_cnn_, cl_cnn_;
  nn::Param* sim_lstm_ = nullptr;
  nn::Param* sim_cnn_ = nullptr;
  nn::DenseParams proj_lstm_, proj_cnn_;
  nn::DenseParams bow_doc_, bow_claim_;
  nn::DenseParams mlp1_, mlp2_;
};

}  // namespace stance
