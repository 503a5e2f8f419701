#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "stance/autodiff.hpp"
#include "stance/nn.hpp"
#include "testutil.hpp"

using namespace stance;
using ad::Matrix;

namespace {

Matrix random_matrix(int r, int c, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = dist(rng);
  return m;
}

}  // namespace

TEST_CASE("softmax cross entropy value and probabilities") {
  ad::Tape t;
  Matrix logits(4, 1);
  logits << 1.0, 0.0, 0.0, 0.0;
  ad::Var loss = t.softmax_cross_entropy(t.constant(logits), 0);
  double e = std::exp(1.0);
  CHECK_THAT(t.value(loss)(0, 0),
             Catch::Matchers::WithinAbs(-std::log(e / (e + 3.0)), 1e-12));

  Eigen::VectorXd p = ad::softmax(logits.col(0));
  CHECK_THAT(p(0), Catch::Matchers::WithinAbs(0.47536688641117308, 1e-10));
  CHECK_THAT(p(1), Catch::Matchers::WithinAbs(0.17487770452960898, 1e-10));
  CHECK_THAT(p.sum(), Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("value semantics of max and stack ops") {
  ad::Tape t;
  Matrix a(2, 3), b(2, 3);
  a << 1, 5, 3, 4, 2, 6;
  b << 2, 4, 3, 1, 9, 0;
  ad::Var m = t.cwise_max(t.constant(a), t.constant(b));
  Matrix want(2, 3);
  want << 2, 5, 3, 4, 9, 6;
  CHECK(t.value(m) == want);

  ad::Var cm = t.colwise_max(t.constant(a));
  CHECK(t.value(cm)(0, 0) == 4);
  CHECK(t.value(cm)(1, 0) == 5);
  CHECK(t.value(cm)(2, 0) == 6);

  ad::Var s = t.vstack({t.scalar(1.0), t.scalar(2.0), t.scalar(3.0)});
  CHECK(t.value(s).rows() == 3);
  CHECK(t.value(s)(1, 0) == 2.0);

  ad::Var mx = t.max_of({t.scalar(0.3), t.scalar(0.9), t.scalar(0.9)});
  CHECK(t.value(mx)(0, 0) == 0.9);
  ad::Var mn = t.mean_of({t.scalar(1.0), t.scalar(2.0)});
  CHECK(t.value(mn)(0, 0) == 1.5);
}

TEST_CASE("dense + relu + softmax gradients match finite differences") {
  std::mt19937_64 rng(21);
  nn::ParamStore store;
  nn::DenseParams d1 = nn::make_dense(store, "d1", 5, 4, rng);
  nn::DenseParams d2 = nn::make_dense(store, "d2", 4, 3, rng);
  Matrix x = random_matrix(5, 1, rng);

  auto loss_fn = [&]() {
    ad::Tape t;
    ad::Var h = t.relu(nn::dense(t, nn::bind(t, d1), t.constant(x)));
    ad::Var logits = nn::dense(t, nn::bind(t, d2), h);
    return t.value(t.softmax_cross_entropy(logits, 1))(0, 0);
  };

  store.zero_grads();
  {
    ad::Tape t;
    ad::Var h = t.relu(nn::dense(t, nn::bind(t, d1), t.constant(x)));
    ad::Var logits = nn::dense(t, nn::bind(t, d2), h);
    ad::Var loss = t.softmax_cross_entropy(logits, 1);
    t.backward(loss);
  }
  auto res = testutil::finite_difference_check(store, loss_fn);
  INFO(res.worst);
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("bilinear, gating and reduction gradients match finite differences") {
  std::mt19937_64 rng(22);
  nn::ParamStore store;
  nn::Param* s = store.add("s", 3, 1);
  nn::Param* M = store.add("M", 3, 4);
  nn::Param* mrow = store.add("mrow", 4, 1);
  nn::Param* crow = store.add("crow", 4, 1);
  for (auto* p : {s, M, mrow, crow}) p->value = random_matrix(
      static_cast<int>(p->value.rows()), static_cast<int>(p->value.cols()), rng);

  auto build = [&](ad::Tape& t) {
    ad::Var sv = t.leaf(s->value, &s->grad);
    ad::Var Mv = t.leaf(M->value, &M->grad);
    ad::Var mv = t.leaf(mrow->value, &mrow->grad);
    ad::Var cv = t.leaf(crow->value, &crow->grad);
    ad::Var p1 = t.dot(sv, t.matmul(Mv, mv));         // bilinear
    ad::Var gated = t.scale_by(cv, p1);               // gate by tape scalar
    ad::Var half = t.scale(gated, 0.5);
    ad::Var p2 = t.dot(half, t.constant(Matrix::Ones(4, 1)));
    ad::Var stats = t.vstack({t.max_of({p1, p2}), t.mean_of({p1, p2})});
    return t.softmax_cross_entropy(stats, 0);
  };

  auto loss_fn = [&]() {
    ad::Tape t;
    return t.value(build(t))(0, 0);
  };
  store.zero_grads();
  {
    ad::Tape t;
    t.backward(build(t));
  }
  auto res = testutil::finite_difference_check(store, loss_fn);
  INFO(res.worst);
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("gate nonlinearities and slicing gradients match finite differences") {
  std::mt19937_64 rng(23);
  nn::ParamStore store;
  nn::Param* W = store.add("W", 6, 2);
  nn::Param* x = store.add("x", 2, 1);
  W->value = random_matrix(6, 2, rng);
  x->value = random_matrix(2, 1, rng);

  auto build = [&](ad::Tape& t) {
    ad::Var g = t.matmul(t.leaf(W->value, &W->grad), t.leaf(x->value, &x->grad));
    ad::Var a = t.sigmoid(t.rows(g, 0, 2));
    ad::Var b = t.tanh(t.rows(g, 2, 2));
    ad::Var c = t.relu(t.rows(g, 4, 2));
    ad::Var h = t.cwise_mul(t.cwise_mul(a, b), c);
    ad::Var stacked = t.vstack({h, t.mean_vars({a, b})});
    return t.softmax_cross_entropy(stacked, 2);
  };

  auto loss_fn = [&]() {
    ad::Tape t;
    return t.value(build(t))(0, 0);
  };
  store.zero_grads();
  {
    ad::Tape t;
    t.backward(build(t));
  }
  auto res = testutil::finite_difference_check(store, loss_fn);
  INFO(res.worst);
  CHECK(res.max_rel_err < 1e-5);
}

TEST_CASE("maxout and max-over-time pooling gradients match finite differences") {
  std::mt19937_64 rng(24);
  nn::ParamStore store;
  nn::Param* A = store.add("A", 5, 3);  // windows x in beats
  nn::Param* B = store.add("B", 5, 3);
  nn::Param* bias = store.add("bias", 3, 1);
  A->value = random_matrix(5, 3, rng);
  B->value = random_matrix(5, 3, rng);
  bias->value = random_matrix(3, 1, rng);
  Matrix X = random_matrix(5, 5, rng);  // fixed "windows"... rows x cols

  auto build = [&](ad::Tape& t) {
    ad::Var Xv = t.constant(X);
    ad::Var za = t.add_rowvec(t.matmul(Xv, t.leaf(A->value, &A->grad)),
                              t.leaf(bias->value, &bias->grad));
    ad::Var zb = t.matmul(Xv, t.leaf(B->value, &B->grad));
    ad::Var z = t.cwise_max(za, zb);
    ad::Var pooled = t.colwise_max(z);  // 3 x 1
    return t.softmax_cross_entropy(pooled, 0);
  };

  auto loss_fn = [&]() {
    ad::Tape t;
    return t.value(build(t))(0, 0);
  };
  store.zero_grads();
  {
    ad::Tape t;
    t.backward(build(t));
  }
  auto res = testutil::finite_difference_check(store, loss_fn);
  INFO(res.worst);
  CHECK(res.max_rel_err < 1e-5);
}

TEST_CASE("leaf gradients accumulate across two backward passes") {
  nn::ParamStore store;
  nn::Param* w = store.add("w", 2, 1);
  w->value << 1.0, 2.0;
  store.zero_grads();
  for (int pass = 0; pass < 2; ++pass) {
    ad::Tape t;
    ad::Var loss = t.dot(t.leaf(w->value, &w->grad), t.constant(Matrix::Ones(2, 1)));
    t.backward(loss);
  }
  CHECK(w->grad(0, 0) == 2.0);
  CHECK(w->grad(1, 0) == 2.0);
}

TEST_CASE("constants stay gradient-free") {
  ad::Tape t;
  ad::Var c = t.constant(Matrix::Ones(3, 1));
  ad::Var d = t.scale(c, 2.0);
  CHECK_FALSE(t.needs_grad(c));
  CHECK_FALSE(t.needs_grad(d));
  ad::Var loss = t.dot(d, c);
  t.backward(loss);  // no-op, nothing trainable
  CHECK_FALSE(t.needs_grad(loss));
}

TEST_CASE("shape mismatches are hard errors") {
  ad::Tape t;
  ad::Var a = t.constant(Matrix::Ones(2, 3));
  ad::Var b = t.constant(Matrix::Ones(2, 3));
  CHECK_THROWS(t.matmul(a, b));
  CHECK_THROWS(t.dot(a, b));
  CHECK_THROWS(t.add(a, t.constant(Matrix::Ones(3, 2))));
}
