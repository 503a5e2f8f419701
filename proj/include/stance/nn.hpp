#pragma once

// Parameter storage, Glorot initialization, Adam, and the two encoder
// primitives: an LSTM run over embedded steps and a width-w convolution
// with maxout over k affine maps plus max-over-time pooling. Encoders
// are bound to a tape once per forward pass and reused across paragraph
// slots, so evidence slots share one parameter set.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "stance/autodiff.hpp"

namespace stance::nn {

using Matrix = Eigen::MatrixXd;

struct Param {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix adam_m;
  Matrix adam_v;

  Param(std::string n, int rows, int cols)
      : name(std::move(n)),
        value(Matrix::Zero(rows, cols)),
        grad(Matrix::Zero(rows, cols)),
        adam_m(Matrix::Zero(rows, cols)),
        adam_v(Matrix::Zero(rows, cols)) {}

  std::size_t size() const { return static_cast<std::size_t>(value.size()); }
};

class ParamStore {
 public:
  Param* add(const std::string& name, int rows, int cols) {
    for (const auto& p : params_)
      if (p->name == name)
        throw std::logic_error("duplicate parameter name: " + name);
    params_.push_back(std::make_unique<Param>(name, rows, cols));
    return params_.back().get();
  }

  Param* find(const std::string& name) const {
    for (const auto& p : params_)
      if (p->name == name) return p.get();
    return nullptr;
  }

  const std::vector<std::unique_ptr<Param>>& all() const { return params_; }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->size();
    return n;
  }

  void zero_grads() {
    for (auto& p : params_) p->grad.setZero();
  }

  void scale_grads(double k) {
    for (auto& p : params_) p->grad *= k;
  }

  std::vector<Matrix> snapshot() const {
    std::vector<Matrix> vals;
    vals.reserve(params_.size());
    for (const auto& p : params_) vals.push_back(p->value);
    return vals;
  }

  void restore(const std::vector<Matrix>& vals) {
    if (vals.size() != params_.size())
      throw std::invalid_argument("restore: parameter count mismatch");
    for (std::size_t i = 0; i < vals.size(); ++i) params_[i]->value = vals[i];
  }

 private:
  std::vector<std::unique_ptr<Param>> params_;
};

inline void glorot_init(Matrix& m, std::mt19937_64& rng) {
  double limit = std::sqrt(6.0 / (m.rows() + m.cols()));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
}

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(ParamStore& store) {
    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (const auto& p : store.all()) {
      p->adam_m = cfg_.beta1 * p->adam_m + (1.0 - cfg_.beta1) * p->grad;
      p->adam_v = cfg_.beta2 * p->adam_v +
                  (1.0 - cfg_.beta2) * p->grad.cwiseProduct(p->grad);
      p->value.array() -= cfg_.lr * (p->adam_m.array() / bc1) /
                          ((p->adam_v.array() / bc2).sqrt() + cfg_.eps);
    }
  }

  int steps() const { return t_; }

 private:
  AdamConfig cfg_;
  int t_ = 0;
};

// ---------------------------------------------------------------------------
// LSTM

enum class LstmSummary { last_state, mean_over_time };

// Gate-stacked layout: rows [0,h) input gate, [h,2h) forget, [2h,3h)
// output, [3h,4h) candidate.
struct LstmParams {
  Param* Wx = nullptr;  // 4h x in
  Param* Wh = nullptr;  // 4h x h
  Param* b = nullptr;   // 4h x 1
  int in_dim = 0;
  int hidden = 0;
};

inline LstmParams make_lstm(ParamStore& store, const std::string& prefix,
                            int in_dim, int hidden, std::mt19937_64& rng) {
  LstmParams p;
  p.in_dim = in_dim;
  p.hidden = hidden;
  p.Wx = store.add(prefix + ".Wx", 4 * hidden, in_dim);
  p.Wh = store.add(prefix + ".Wh", 4 * hidden, hidden);
  p.b = store.add(prefix + ".b", 4 * hidden, 1);
  glorot_init(p.Wx->value, rng);
  glorot_init(p.Wh->value, rng);
  return p;
}

struct BoundLstm {
  ad::Var Wx, Wh, b;
  int hidden = 0;
};

inline BoundLstm bind(ad::Tape& t, const LstmParams& p) {
  return {t.leaf(p.Wx->value, &p.Wx->grad), t.leaf(p.Wh->value, &p.Wh->grad),
          t.leaf(p.b->value, &p.b->grad), p.hidden};
}

// Runs the cell over the given steps; an empty sequence yields the zero
// initial state, so all-padding slots share one deterministic row.
inline ad::Var lstm_run(ad::Tape& t, const BoundLstm& lstm,
                        const std::vector<ad::Var>& steps,
                        LstmSummary summary = LstmSummary::last_state) {
  int h = lstm.hidden;
  ad::Var hv = t.constant(Matrix::Zero(h, 1));
  ad::Var cv = t.constant(Matrix::Zero(h, 1));
  if (steps.empty()) return hv;
  std::vector<ad::Var> hs;
  hs.reserve(steps.size());
  for (ad::Var x : steps) {
    ad::Var gates =
        t.add(t.add(t.matmul(lstm.Wx, x), t.matmul(lstm.Wh, hv)), lstm.b);
    ad::Var ig = t.sigmoid(t.rows(gates, 0, h));
    ad::Var fg = t.sigmoid(t.rows(gates, h, h));
    ad::Var og = t.sigmoid(t.rows(gates, 2 * h, h));
    ad::Var cand = t.tanh(t.rows(gates, 3 * h, h));
    cv = t.add(t.cwise_mul(fg, cv), t.cwise_mul(ig, cand));
    hv = t.cwise_mul(og, t.tanh(cv));
    hs.push_back(hv);
  }
  return summary == LstmSummary::last_state ? hv : t.mean_vars(hs);
}

// ---------------------------------------------------------------------------
// Convolution with maxout

struct ConvMaxoutParams {
  std::vector<Param*> W;  // k maps, each (width*in) x channels
  std::vector<Param*> b;  // k biases, channels x 1
  int width = 0;
  int in_dim = 0;
  int channels = 0;
  int k = 0;
};

inline ConvMaxoutParams make_conv(ParamStore& store, const std::string& prefix,
                                  int width, int in_dim, int channels, int k,
                                  std::mt19937_64& rng) {
  if (k < 1) throw std::invalid_argument("maxout needs k >= 1");
  ConvMaxoutParams p;
  p.width = width;
  p.in_dim = in_dim;
  p.channels = channels;
  p.k = k;
  for (int i = 0; i < k; ++i) {
    p.W.push_back(store.add(prefix + ".W" + std::to_string(i), width * in_dim,
                            channels));
    p.b.push_back(store.add(prefix + ".b" + std::to_string(i), channels, 1));
    glorot_init(p.W.back()->value, rng);
  }
  return p;
}

struct BoundConv {
  std::vector<ad::Var> W, b;
  int width = 0;
  int channels = 0;
};

inline BoundConv bind(ad::Tape& t, const ConvMaxoutParams& p) {
  BoundConv bc;
  bc.width = p.width;
  bc.channels = p.channels;
  for (int i = 0; i < p.k; ++i) {
    bc.W.push_back(t.leaf(p.W[i]->value, &p.W[i]->grad));
    bc.b.push_back(t.leaf(p.b[i]->value, &p.b[i]->grad));
  }
  return bc;
}

// Stacks sliding windows of a (L x in_dim) embedded sequence into the
// (T x width*in_dim) matrix the convolution consumes; T = L - width + 1.
inline Matrix make_windows(const Matrix& embedded, int width) {
  Eigen::Index L = embedded.rows(), e = embedded.cols();
  if (L < width) throw std::invalid_argument("sequence shorter than filter width");
  Eigen::Index T = L - width + 1;
  Matrix win(T, width * e);
  for (Eigen::Index s = 0; s < T; ++s)
    for (int w = 0; w < width; ++w)
      win.block(s, w * e, 1, e) = embedded.row(s + w);
  return win;
}

struct ConvOut {
  ad::Var positions;  // T x channels, post-maxout per-n-gram features
  ad::Var pooled;     // channels x 1, max over time
};

inline ConvOut conv_run(ad::Tape& t, const BoundConv& conv, ad::Var windows) {
  ad::Var z = t.add_rowvec(t.matmul(windows, conv.W[0]), conv.b[0]);
  for (std::size_t i = 1; i < conv.W.size(); ++i)
    z = t.cwise_max(z, t.add_rowvec(t.matmul(windows, conv.W[i]), conv.b[i]));
  return {z, t.colwise_max(z)};
}

// ---------------------------------------------------------------------------
// Dense

struct DenseParams {
  Param* W = nullptr;
  Param* b = nullptr;
};

inline DenseParams make_dense(ParamStore& store, const std::string& prefix,
                              int in_dim, int out_dim, std::mt19937_64& rng) {
  DenseParams p;
  p.W = store.add(prefix + ".W", out_dim, in_dim);
  p.b = store.add(prefix + ".b", out_dim, 1);
  glorot_init(p.W->value, rng);
  return p;
}

struct BoundDense {
  ad::Var W, b;
};

inline BoundDense bind(ad::Tape& t, const DenseParams& p) {
  return {t.leaf(p.W->value, &p.W->grad), t.leaf(p.b->value, &p.b->grad)};
}

inline ad::Var dense(ad::Tape& t, const BoundDense& d, ad::Var x) {
  return t.add(t.matmul(d.W, x), d.b);
}

}  // namespace stance::nn
