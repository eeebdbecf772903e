#include <doctest.h>

#include <random>

#include "fd_check.hpp"
#include "quill/graph.hpp"

using namespace quill;
using G = Graph<double>;

TEST_SUITE_BEGIN("graph");

namespace {

Mat<double> random_mat(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Mat<double> m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = dist(rng);
  }
  return m;
}

// Reduce any graph output to a scalar through a fixed random projection so
// every op can be gradient-checked with one harness.
double project(const Mat<double>& m, const Mat<double>& proj) {
  return (m.array() * proj.array()).sum();
}

template <class BuildFn>
void op_grad_check(std::vector<Parameter<double>*> params, BuildFn&& build) {
  // build: (Graph&) -> Var
  G g0;
  auto out0 = build(g0);
  const Mat<double> proj = random_mat(g0.value(out0).rows(), g0.value(out0).cols(), 999);
  auto loss_of = [&]() {
    G g;
    auto out = build(g);
    return project(g.value(out), proj);
  };
  for (auto* p : params) p->zero_grad();
  {
    G g;
    auto out = build(g);
    // scalar = sum(out .* proj): mean over all elements times element count
    auto masked = g.cwise_mul_const(out, proj);
    auto rowsum = g.mean_rows(masked);
    auto scalar = g.scale(g.mean_rows(g.transpose(rowsum)),
                          static_cast<double>(g.value(out).size()));
    g.backward(scalar);
  }
  auto res = testutil::check_gradients(params, loss_of);
  CHECK_MESSAGE(res.ok, "worst block ", res.worst_block, " analytic ", res.worst_analytic,
                " fd ", res.worst_fd);
}

}  // namespace

TEST_CASE("backward of sum gives all-ones gradient") {
  Parameter<double> p("p", random_mat(3, 4, 1));
  G g;
  auto x = g.leaf(p);
  auto total = g.scale(g.mean_rows(g.transpose(g.mean_rows(x))), 12.0);
  g.backward(total);
  CHECK(p.grad.isApprox(Mat<double>::Ones(3, 4), 1e-12));
}

TEST_CASE("parameter not used by the loss keeps a zero gradient") {
  Parameter<double> used("used", random_mat(2, 2, 2));
  Parameter<double> unused("unused", random_mat(2, 2, 3));
  G g;
  auto x = g.leaf(used);
  g.leaf(unused);
  auto loss = g.nll(x, {{0}, {1}});
  g.backward(loss);
  CHECK(unused.grad.isZero(0.0));
  CHECK_FALSE(used.grad.isZero(0.0));
}

TEST_CASE("backward rejects non-scalar losses") {
  Parameter<double> p("p", random_mat(2, 3, 4));
  G g;
  auto x = g.leaf(p);
  CHECK_THROWS_AS(g.backward(x), std::invalid_argument);
}

TEST_CASE("matmul gradients match central differences") {
  Parameter<double> a("a", random_mat(3, 4, 5));
  Parameter<double> b("b", random_mat(4, 2, 6));
  op_grad_check({&a, &b}, [&](G& g) { return g.matmul(g.leaf(a), g.leaf(b)); });
}

TEST_CASE("add and add_rowvec gradients") {
  Parameter<double> a("a", random_mat(3, 4, 7));
  Parameter<double> b("b", random_mat(3, 4, 8));
  Parameter<double> row("row", random_mat(1, 4, 9));
  op_grad_check({&a, &b, &row}, [&](G& g) {
    return g.add_rowvec(g.add(g.leaf(a), g.leaf(b)), g.leaf(row));
  });
}

TEST_CASE("gelu gradients") {
  Parameter<double> a("a", random_mat(4, 5, 10));
  op_grad_check({&a}, [&](G& g) { return g.gelu(g.leaf(a)); });
}

TEST_CASE("softmax_rows gradients and normalization") {
  Parameter<double> a("a", random_mat(4, 6, 11));
  {
    G g;
    auto p = g.softmax_rows(g.leaf(a));
    const auto& v = g.value(p);
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      CHECK(v.row(r).minCoeff() >= 0.0);
      CHECK(std::abs(v.row(r).sum() - 1.0) < 1e-12);
    }
  }
  op_grad_check({&a}, [&](G& g) { return g.softmax_rows(g.leaf(a)); });
}

TEST_CASE("layer_norm gradients") {
  Parameter<double> x("x", random_mat(3, 8, 12));
  Parameter<double> gain("gain", random_mat(1, 8, 13));
  Parameter<double> bias("bias", random_mat(1, 8, 14));
  op_grad_check({&x, &gain, &bias}, [&](G& g) {
    return g.layer_norm(g.leaf(x), g.leaf(gain), g.leaf(bias));
  });
}

TEST_CASE("gather, slice, concat, transpose, mean gradients") {
  Parameter<double> table("table", random_mat(6, 8, 15));
  op_grad_check({&table}, [&](G& g) {
    auto rows = g.gather_rows(g.leaf(table), {0, 3, 3, 5});
    auto left = g.slice_cols(rows, 0, 4);
    auto right = g.slice_cols(rows, 4, 4);
    auto swapped = g.concat_cols({right, left});
    return g.mean_rows(g.transpose(swapped));
  });
}

TEST_CASE("gather_rows rejects out-of-range indices") {
  Parameter<double> table("table", random_mat(4, 2, 16));
  G g;
  CHECK_THROWS_AS(g.gather_rows(g.leaf(table), {4}), std::invalid_argument);
}

TEST_CASE("nll value matches a direct log-softmax computation") {
  Parameter<double> logits("logits", random_mat(3, 5, 17));
  G g;
  auto loss = g.nll(g.leaf(logits), {{2}, {}, {0, 4}});
  double expected = 0.0;
  for (Eigen::Index r : {Eigen::Index(0), Eigen::Index(2)}) {
    Eigen::ArrayXd row = logits.value.row(r).array();
    const double logz = std::log(row.exp().sum());
    if (r == 0) expected += logz - row(2);
    if (r == 2) expected += (logz - row(0)) + (logz - row(4));
  }
  CHECK(g.value(loss)(0, 0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("nll gradients (multi-target rows)") {
  Parameter<double> logits("logits", random_mat(3, 5, 18));
  auto loss_of = [&]() {
    G g;
    return g.value(g.nll(g.leaf(logits), {{2}, {}, {0, 4}}))(0, 0);
  };
  logits.zero_grad();
  {
    G g;
    g.backward(g.nll(g.leaf(logits), {{2}, {}, {0, 4}}));
  }
  auto res = testutil::check_gradients({&logits}, loss_of);
  CHECK_MESSAGE(res.ok, "worst block ", res.worst_block);
  CHECK(logits.grad.row(1).isZero(0.0));
}

TEST_CASE("cwise_mul_const doubles as dropout mask") {
  Parameter<double> a("a", random_mat(2, 3, 19));
  Mat<double> mask(2, 3);
  mask << 2, 0, 2, 0, 2, 0;
  G g;
  auto out = g.cwise_mul_const(g.leaf(a), mask);
  CHECK(g.value(out)(0, 1) == 0.0);
  CHECK(g.value(out)(0, 0) == doctest::Approx(2 * a.value(0, 0)));
}

TEST_SUITE_END();
