#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "hopchain/gradcheck.hpp"
#include "hopchain/rng.hpp"
#include "hopchain/tape.hpp"

using namespace hopchain;
using namespace hopchain::ad;

namespace {

Mat<double> randn(Rng& rng, Eigen::Index r, Eigen::Index c, double std = 1.0) {
  Mat<double> m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = rng.normal(0.0, std);
  return m;
}

}  // namespace

TEST_CASE("scalar helpers match closed forms") {
  CHECK(sigmoid_value(0.0) == doctest::Approx(0.5));
  CHECK(sigmoid_value(2.0) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));
  // Stable in both tails: no overflow, exact asymptote.
  CHECK(std::isfinite(log_sigmoid_value(-745.0)));
  CHECK(log_sigmoid_value(-745.0) == doctest::Approx(-745.0));
  CHECK(log_sigmoid_value(40.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(log_sigmoid_value(0.0) == doctest::Approx(-std::log(2.0)));

  std::vector<double> probs = softmax_values<double>({2.0, 0.0});
  CHECK(probs[0] == doctest::Approx(std::exp(2.0) / (std::exp(2.0) + 1.0)));
  CHECK(probs[0] + probs[1] == doctest::Approx(1.0));
  // Shift invariance up to rounding.
  std::vector<double> shifted = softmax_values<double>({702.0, 700.0});
  CHECK(shifted[0] == doctest::Approx(probs[0]));
}

TEST_CASE("forward values of composite expressions") {
  Tape<double> t;
  Mat<double> a(2, 2), b(2, 2);
  a << 1, 2, 3, 4;
  b << 5, 6, 7, 8;
  Value<double> va = t.input(a), vb = t.input(b);
  CHECK((add(va, vb).val() - (a + b).eval()).norm() == 0.0);
  CHECK((matmul(va, vb).val() - (a * b).eval()).norm() == 0.0);
  CHECK((hadamard(va, vb).val() - (a.array() * b.array()).matrix().eval()).norm() == 0.0);
  CHECK(transpose(va).val()(0, 1) == 3.0);
  CHECK(sum(va).scalar() == 10.0);
  CHECK(mean(va).scalar() == 2.5);
  CHECK(block(va, 0, 1, 2, 1).val()(1, 0) == 4.0);

  Mat<double> col(3, 1);
  col << 1.0, -2.0, 0.5;
  Value<double> vc = t.input(col);
  CHECK(dot(vc, vc).scalar() == doctest::Approx(1.0 + 4.0 + 0.25));
  Mat<double> sm = softmax_col(vc).val();
  CHECK(sm.sum() == doctest::Approx(1.0));
  CHECK(sm(0, 0) > sm(2, 0));
  CHECK(sm(2, 0) > sm(1, 0));
}

TEST_CASE("backward matches finite differences for every kernel") {
  Rng rng(42);
  ParamStore<double> store;
  store.add("A", randn(rng, 3, 4));
  store.add("B", randn(rng, 4, 3));
  store.add("v", randn(rng, 3, 1));
  store.add("g", Mat<double>::Ones(4, 1) + 0.1 * randn(rng, 4, 1));
  store.add("b", 0.1 * randn(rng, 4, 1));

  // A single loss touching every kernel at least once.
  auto loss_fn = [](ParamStore<double>& p, GradMap<double>* grads) {
    Tape<double> t;
    Value<double> A = t.param(p, "A");
    Value<double> B = t.param(p, "B");
    Value<double> v = t.param(p, "v");
    Value<double> g = t.param(p, "g");
    Value<double> b = t.param(p, "b");

    Value<double> X = matmul(A, B);     // 3x3
    X = add(X, transpose(X));           // transpose
    Value<double> Y = layer_norm_rows(matmul(X, A), g, b);  // 3x4 normalized
    Y = add_rowwise(Y, b);
    Y = relu(Y);
    Value<double> S = softmax_rows(scale(Y, 0.7));
    Value<double> H = hadamard(S, tanh(Y));
    Value<double> C = concat_cols<double>({H, sigmoid(Y)});               // 3x8
    Value<double> R = concat_rows<double>({row_vec(C, 0), row_vec(C, 2)});  // 16x1
    Value<double> G = gather_rows(transpose(R), std::vector<int>{0, 0, 0});  // 3x16 (reuse row)
    Value<double> z = dot(v, neg(block(transpose(G), 0, 0, 3, 1)));
    Value<double> l = sub(mean(G), log_sigmoid(z));
    l = add(l, scale_by(exp(scale(z, 0.01)), sum(log(add(sigmoid(Y), scale(S, 0.5))))));
    l = add(l, sum(softmax_col(v)));
    if (grads) *grads = t.backward(l);
    return l.scalar();
  };

  auto report = grad_check<double>(loss_fn, store, 1e-5, 200, 7);
  INFO(report.summary());
  CHECK(report.deterministic);
  CHECK(report.max_rel_err < 1e-6);
}

TEST_CASE("aliasing accumulates correctly") {
  ParamStore<double> store;
  Mat<double> x(2, 1);
  x << 1.5, -0.5;
  store.add("x", x);

  Tape<double> t;
  Value<double> vx = t.param(store, "x");
  Value<double> l = sum(add(vx, vx));  // d/dx = 2
  GradMap<double> g = t.backward(l);
  CHECK(g["x"](0, 0) == doctest::Approx(2.0));
  CHECK(g["x"](1, 0) == doctest::Approx(2.0));

  Tape<double> t2;
  Value<double> vy = t2.param(store, "x");
  GradMap<double> g2 = t2.backward(sum(hadamard(vy, vy)));  // d/dx = 2x
  CHECK(g2["x"](0, 0) == doctest::Approx(3.0));
  CHECK(g2["x"](1, 0) == doctest::Approx(-1.0));
}

TEST_CASE("parameters unreachable from the loss get zero gradients") {
  ParamStore<double> store;
  store.add("used", Mat<double>::Constant(1, 1, 2.0));
  store.add("unused", Mat<double>::Constant(3, 2, 1.0));

  Tape<double> t;
  Value<double> u = t.param(store, "used");
  t.param(store, "unused");  // on the tape but not in the loss
  GradMap<double> g = t.backward(scale(u, 3.0));
  CHECK(g["used"](0, 0) == doctest::Approx(3.0));
  CHECK(g["unused"].rows() == 3);
  CHECK(g["unused"].norm() == 0.0);
}

TEST_CASE("replaying the same graph gives bit-identical values and gradients") {
  Rng rng(3);
  ParamStore<double> store;
  store.add("W", randn(rng, 4, 4));
  store.add("v", randn(rng, 4, 1));

  auto build = [&](GradMap<double>* grads) {
    Tape<double> t;
    Value<double> W = t.param(store, "W");
    Value<double> v = t.param(store, "v");
    Value<double> l = dot(v, tanh(matmul(W, sigmoid(v))));
    if (grads) *grads = t.backward(l);
    return l.scalar();
  };
  GradMap<double> g1, g2;
  const double l1 = build(&g1);
  const double l2 = build(&g2);
  CHECK(l1 == l2);
  for (const auto& [name, m] : g1) CHECK((m - g2.at(name)).norm() == 0.0);
}

TEST_CASE("shape violations are rejected") {
  Tape<double> t;
  Value<double> a = t.input(Mat<double>::Zero(2, 3));
  Value<double> b = t.input(Mat<double>::Zero(2, 3));
  CHECK_THROWS_AS((void)matmul(a, b), contract_error);
  CHECK_THROWS_AS((void)dot(a, b), contract_error);
  CHECK_THROWS_AS((void)block(a, 1, 1, 3, 3), contract_error);
  CHECK_THROWS_AS((void)softmax_col(a), contract_error);
  CHECK_THROWS_AS((void)t.backward(a), contract_error);

  Tape<double> other;
  Value<double> c = other.input(Mat<double>::Zero(2, 3));
  CHECK_THROWS_AS((void)add(a, c), contract_error);
}

TEST_CASE("gradcheck flags a deliberately wrong gradient") {
  ParamStore<double> store;
  store.add("x", Mat<double>::Constant(2, 1, 0.3));

  auto bad_loss = [](ParamStore<double>& p, GradMap<double>* grads) {
    Tape<double> t;
    Value<double> x = t.param(p, "x");
    Value<double> l = sum(hadamard(x, x));
    if (grads) {
      *grads = t.backward(l);
      (*grads)["x"] *= 1.5;  // corrupt
    }
    return l.scalar();
  };
  auto report = grad_check<double>(bad_loss, store, 1e-5, 50, 11);
  CHECK(report.max_rel_err > 0.1);
  CHECK(report.worst_param == "x");
}

TEST_CASE("log_sigmoid node is stable deep in both tails") {
  Tape<double> t;
  Mat<double> x(2, 1);
  x << -300.0, 300.0;
  Value<double> v = t.input(x);
  Mat<double> y = log_sigmoid(v).val();
  CHECK(y(0, 0) == doctest::Approx(-300.0));
  CHECK(y(1, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::isfinite(y(0, 0)));
}
