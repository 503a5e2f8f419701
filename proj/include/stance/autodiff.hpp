#pragma once

// Reverse-mode automatic differentiation over Eigen double matrices.
// A Tape is built once per forward pass; backward() walks the nodes in
// reverse creation order. Vectors are n x 1 matrices, scalars 1 x 1.
// Parameter leaves accumulate their gradient into an external sink so
// parameters can persist across tapes.

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace stance::ad {

using Matrix = Eigen::MatrixXd;

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Tape {
 public:
  const Matrix& value(Var v) const { return node(v).val; }
  const Matrix& grad(Var v) const { return node(v).grad; }
  bool needs_grad(Var v) const { return node(v).needs_grad; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(Matrix m) { return push(std::move(m), false); }

  Var scalar(double x) {
    Matrix m(1, 1);
    m(0, 0) = x;
    return constant(std::move(m));
  }

  // Parameter leaf; after backward() the leaf's gradient has been added
  // into *sink (which must outlive the tape).
  Var leaf(const Matrix& value, Matrix* sink) {
    Var v = push(value, true);
    int id = v.id;
    nodes_[id].back = [this, id, sink] { *sink += nodes_[id].grad; };
    return v;
  }

  Var matmul(Var a, Var b) {
    check_inner(a, b);
    Var out = push(node(a).val * node(b).val, any_grad({a, b}));
    attach(out, [this, a, b, out] {
      const Matrix& g = node(out).grad;
      if (node(a).needs_grad) node(a).grad.noalias() += g * node(b).val.transpose();
      if (node(b).needs_grad) node(b).grad.noalias() += node(a).val.transpose() * g;
    });
    return out;
  }

  Var add(Var a, Var b) {
    check_same(a, b);
    Var out = push(node(a).val + node(b).val, any_grad({a, b}));
    attach(out, [this, a, b, out] {
      const Matrix& g = node(out).grad;
      if (node(a).needs_grad) node(a).grad += g;
      if (node(b).needs_grad) node(b).grad += g;
    });
    return out;
  }

  // m (T x C) plus bias b (C x 1) broadcast across rows.
  Var add_rowvec(Var m, Var b) {
    if (node(m).val.cols() != node(b).val.rows() || node(b).val.cols() != 1)
      throw std::invalid_argument("add_rowvec: shape mismatch");
    Matrix out_val = node(m).val;
    out_val.rowwise() += node(b).val.col(0).transpose();
    Var out = push(std::move(out_val), any_grad({m, b}));
    attach(out, [this, m, b, out] {
      const Matrix& g = node(out).grad;
      if (node(m).needs_grad) node(m).grad += g;
      if (node(b).needs_grad)
        node(b).grad += g.colwise().sum().transpose();
    });
    return out;
  }

  Var cwise_mul(Var a, Var b) {
    check_same(a, b);
    Var out = push(node(a).val.cwiseProduct(node(b).val), any_grad({a, b}));
    attach(out, [this, a, b, out] {
      const Matrix& g = node(out).grad;
      if (node(a).needs_grad) node(a).grad += g.cwiseProduct(node(b).val);
      if (node(b).needs_grad) node(b).grad += g.cwiseProduct(node(a).val);
    });
    return out;
  }

  Var scale(Var a, double k) {
    Var out = push(node(a).val * k, node(a).needs_grad);
    attach(out, [this, a, out, k] {
      if (node(a).needs_grad) node(a).grad += node(out).grad * k;
    });
    return out;
  }

  // a scaled by a 1x1 tape scalar (gating a memory row by a score).
  Var scale_by(Var a, Var s) {
    if (node(s).val.size() != 1) throw std::invalid_argument("scale_by: s not scalar");
    Var out = push(node(a).val * node(s).val(0, 0), any_grad({a, s}));
    attach(out, [this, a, s, out] {
      const Matrix& g = node(out).grad;
      if (node(a).needs_grad) node(a).grad += g * node(s).val(0, 0);
      if (node(s).needs_grad)
        node(s).grad(0, 0) += g.cwiseProduct(node(a).val).sum();
    });
    return out;
  }

  Var sigmoid(Var a) {
    Matrix v = (1.0 + (-node(a).val.array()).exp()).inverse().matrix();
    Var out = push(std::move(v), node(a).needs_grad);
    attach(out, [this, a, out] {
      if (!node(a).needs_grad) return;
      const Matrix& v = node(out).val;
      node(a).grad.array() +=
          node(out).grad.array() * v.array() * (1.0 - v.array());
    });
    return out;
  }

  Var tanh(Var a) {
    Var out = push(node(a).val.array().tanh().matrix(), node(a).needs_grad);
    attach(out, [this, a, out] {
      if (!node(a).needs_grad) return;
      const Matrix& v = node(out).val;
      node(a).grad.array() +=
          node(out).grad.array() * (1.0 - v.array().square());
    });
    return out;
  }

  Var relu(Var a) {
    Var out = push(node(a).val.cwiseMax(0.0), node(a).needs_grad);
    attach(out, [this, a, out] {
      if (!node(a).needs_grad) return;
      node(a).grad.array() +=
          node(out).grad.array() * (node(out).val.array() > 0.0).cast<double>();
    });
    return out;
  }

  Var dot(Var a, Var b) {
    if (node(a).val.cols() != 1 || node(b).val.cols() != 1 ||
        node(a).val.rows() != node(b).val.rows())
      throw std::invalid_argument("dot: expects equal-length column vectors");
    Matrix v(1, 1);
    v(0, 0) = node(a).val.col(0).dot(node(b).val.col(0));
    Var out = push(std::move(v), any_grad({a, b}));
    attach(out, [this, a, b, out] {
      double g = node(out).grad(0, 0);
      if (node(a).needs_grad) node(a).grad += g * node(b).val;
      if (node(b).needs_grad) node(b).grad += g * node(a).val;
    });
    return out;
  }

  Var vstack(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("vstack: empty");
    Eigen::Index total = 0;
    for (Var p : parts) {
      if (node(p).val.cols() != 1)
        throw std::invalid_argument("vstack: expects column vectors");
      total += node(p).val.rows();
    }
    Matrix v(total, 1);
    Eigen::Index at = 0;
    for (Var p : parts) {
      v.middleRows(at, node(p).val.rows()) = node(p).val;
      at += node(p).val.rows();
    }
    Var out = push(std::move(v), any_grad(parts));
    attach(out, [this, parts, out] {
      Eigen::Index at = 0;
      for (Var p : parts) {
        Eigen::Index n = node(p).val.rows();
        if (node(p).needs_grad) node(p).grad += node(out).grad.middleRows(at, n);
        at += n;
      }
    });
    return out;
  }

  // Elementwise mean of same-shaped vars.
  Var mean_vars(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("mean_vars: empty");
    Matrix v = node(parts[0]).val;
    for (std::size_t i = 1; i < parts.size(); ++i) {
      check_same(parts[0], parts[i]);
      v += node(parts[i]).val;
    }
    v /= static_cast<double>(parts.size());
    Var out = push(std::move(v), any_grad(parts));
    attach(out, [this, parts, out] {
      double inv = 1.0 / static_cast<double>(parts.size());
      for (Var p : parts)
        if (node(p).needs_grad) node(p).grad += node(out).grad * inv;
    });
    return out;
  }

  // Coordinatewise max of two same-shaped vars; ties go to a.
  Var cwise_max(Var a, Var b) {
    check_same(a, b);
    Var out = push(node(a).val.cwiseMax(node(b).val), any_grad({a, b}));
    attach(out, [this, a, b, out] {
      Eigen::ArrayXXd win_a =
          (node(a).val.array() >= node(b).val.array()).cast<double>();
      if (node(a).needs_grad)
        node(a).grad.array() += node(out).grad.array() * win_a;
      if (node(b).needs_grad)
        node(b).grad.array() += node(out).grad.array() * (1.0 - win_a);
    });
    return out;
  }

  // (T x C) -> (C x 1), max over rows per column; first max wins.
  Var colwise_max(Var a) {
    const Matrix& m = node(a).val;
    Matrix v(m.cols(), 1);
    std::vector<int> argrow(m.cols());
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      Eigen::Index r = 0;
      m.col(c).maxCoeff(&r);
      argrow[c] = static_cast<int>(r);
      v(c, 0) = m(r, c);
    }
    Var out = push(std::move(v), node(a).needs_grad);
    attach(out, [this, a, out, argrow = std::move(argrow)] {
      if (!node(a).needs_grad) return;
      for (std::size_t c = 0; c < argrow.size(); ++c)
        node(a).grad(argrow[c], static_cast<Eigen::Index>(c)) +=
            node(out).grad(static_cast<Eigen::Index>(c), 0);
    });
    return out;
  }

  // Max / mean over a list of 1x1 scalars; max ties go to the first.
  Var max_of(const std::vector<Var>& scalars) {
    if (scalars.empty()) throw std::invalid_argument("max_of: empty");
    std::size_t best = 0;
    for (std::size_t i = 1; i < scalars.size(); ++i)
      if (node(scalars[i]).val(0, 0) > node(scalars[best]).val(0, 0)) best = i;
    Var winner = scalars[best];
    Var out = push(node(winner).val, node(winner).needs_grad);
    attach(out, [this, winner, out] {
      if (node(winner).needs_grad) node(winner).grad += node(out).grad;
    });
    return out;
  }

  Var mean_of(const std::vector<Var>& scalars) { return mean_vars(scalars); }

  Var rows(Var a, int start, int n) {
    Var out = push(node(a).val.middleRows(start, n), node(a).needs_grad);
    attach(out, [this, a, out, start, n] {
      if (node(a).needs_grad)
        node(a).grad.middleRows(start, n) += node(out).grad;
    });
    return out;
  }

  // Fused softmax + negative log-likelihood of the target index.
  Var softmax_cross_entropy(Var logits, int target) {
    const Matrix& z = node(logits).val;
    if (z.cols() != 1) throw std::invalid_argument("softmax_ce: expects vector");
    Eigen::VectorXd p = (z.col(0).array() - z.col(0).maxCoeff()).exp();
    p /= p.sum();
    Matrix v(1, 1);
    v(0, 0) = -std::log(p(target));
    Var out = push(std::move(v), node(logits).needs_grad);
    attach(out, [this, logits, out, target, p = std::move(p)] {
      if (!node(logits).needs_grad) return;
      double g = node(out).grad(0, 0);
      node(logits).grad.col(0) += g * p;
      node(logits).grad(target, 0) -= g;
    });
    return out;
  }

  void backward(Var loss) {
    if (node(loss).val.size() != 1)
      throw std::invalid_argument("backward: loss must be scalar");
    if (!node(loss).needs_grad) return;
    nodes_[loss.id].grad(0, 0) = 1.0;
    for (int i = loss.id; i >= 0; --i)
      if (nodes_[i].needs_grad && nodes_[i].back) nodes_[i].back();
  }

 private:
  struct Node {
    Matrix val;
    Matrix grad;
    bool needs_grad = false;
    std::function<void()> back;
  };

  Node& node(Var v) { return nodes_.at(v.id); }
  const Node& node(Var v) const { return nodes_.at(v.id); }

  bool any_grad(const std::vector<Var>& vs) const {
    for (Var v : vs)
      if (node(v).needs_grad) return true;
    return false;
  }

  Var push(Matrix val, bool needs_grad) {
    Node n;
    n.val = std::move(val);
    n.needs_grad = needs_grad;
    if (needs_grad) n.grad = Matrix::Zero(n.val.rows(), n.val.cols());
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  template <class F>
  void attach(Var v, F&& f) {
    if (nodes_[v.id].needs_grad) nodes_[v.id].back = std::forward<F>(f);
  }

  void check_same(Var a, Var b) const {
    if (node(a).val.rows() != node(b).val.rows() ||
        node(a).val.cols() != node(b).val.cols())
      throw std::invalid_argument("shape mismatch");
  }
  void check_inner(Var a, Var b) const {
    if (node(a).val.cols() != node(b).val.rows())
      throw std::invalid_argument("matmul: inner dimension mismatch");
  }

  std::vector<Node> nodes_;
};

inline Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  Eigen::VectorXd p = (logits.array() - logits.maxCoeff()).exp();
  return p / p.sum();
}

}  // namespace stance::ad
