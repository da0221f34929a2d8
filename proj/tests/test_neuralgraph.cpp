#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "gradient_cases.hpp"
#include "openstreets/nn/adam.hpp"
#include "openstreets/nn/attribution.hpp"
#include "openstreets/nn/checkpoint.hpp"
#include "openstreets/nn/layers.hpp"
#include "support.hpp"

using namespace openstreets;
using namespace openstreets::nn;
using namespace testsupport;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

MatrixD dense_adjacency(const DualGraph& g) {
  MatrixD a = MatrixD::Zero(g.vertex_count(), g.vertex_count());
  for (std::size_t v = 0; v < g.vertex_count(); ++v)
    for (std::size_t u : g.neighbors(v)) a(v, u) = 1.0 / std::sqrt(double(g.degree(u) * g.degree(v)));
  return a;
}

}  // namespace

// Graph convolution ---------------------------------------------------------------

TEST_CASE("gcn: identity layer copies the single neighbour") {
  DualGraph g({{1}, {0}});
  GraphConvLayer layer("t", MatrixD::Identity(2, 2), Activation::Identity);
  MatrixD x(2, 2);
  x << 1, 2, 3, 4;
  MatrixD y = gcn_forward(layer, x, g);
  CHECK(y.row(0) == x.row(1));
  CHECK(y.row(1) == x.row(0));
}

TEST_CASE("gcn: isolated vertex under relu is a zero row") {
  DualGraph g({{1}, {0}, {}});
  std::mt19937_64 rng(1);
  GraphConvLayer layer("t", random_matrix(3, 2, rng), Activation::Relu);
  MatrixD y = gcn_forward(layer, random_matrix(3, 2, rng), g);
  CHECK(y.row(2).isZero(0.0));
}

TEST_CASE("gcn matches the dense computation act(A X Theta^T)") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    DualGraph g = random_dual(5, 0.5, rng);
    MatrixD x = random_matrix(5, 3, rng);
    for (Activation act : {Activation::Identity, Activation::Relu, Activation::Sigmoid, Activation::Tanh}) {
      GraphConvLayer layer("t", random_matrix(2, 3, rng), act);
      MatrixD dense = dense_adjacency(g) * x * layer.theta.value.transpose();
      for (Eigen::Index i = 0; i < dense.size(); ++i) {
        double& d = dense.data()[i];
        if (act == Activation::Relu) d = std::max(0.0, d);
        if (act == Activation::Sigmoid) d = sigmoid(d);
        if (act == Activation::Tanh) d = std::tanh(d);
      }
      CHECK((gcn_forward(layer, x, g) - dense).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("gcn is linear before activation and permutation equivariant") {
  std::mt19937_64 rng(8);
  DualGraph g = random_dual(7, 0.4, rng);
  GraphConvLayer lin("t", random_matrix(3, 4, rng), Activation::Identity);
  MatrixD x1 = random_matrix(7, 4, rng), x2 = random_matrix(7, 4, rng);
  const double a = 1.7, b = -0.4;
  MatrixD lhs = gcn_forward(lin, MatrixD(a * x1 + b * x2), g);
  MatrixD rhs = a * gcn_forward(lin, x1, g) + b * gcn_forward(lin, x2, g);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);

  GraphConvLayer act("t", random_matrix(3, 4, rng), Activation::Tanh);
  std::vector<std::size_t> perm(7);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);  // new vertex i is old vertex perm[i]
  std::vector<std::size_t> inverse(7);
  for (std::size_t i = 0; i < 7; ++i) inverse[perm[i]] = i;
  std::vector<std::vector<std::size_t>> nb(7);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t u : g.neighbors(perm[i])) nb[i].push_back(inverse[u]);
  DualGraph pg(nb);
  MatrixD px(7, 4);
  for (std::size_t i = 0; i < 7; ++i) px.row(i) = x1.row(perm[i]);
  MatrixD y = gcn_forward(act, x1, g), py = gcn_forward(act, px, pg);
  for (std::size_t i = 0; i < 7; ++i) CHECK((py.row(i) - y.row(perm[i])).cwiseAbs().maxCoeff() < 1e-14);

  CHECK_THROWS_AS(gcn_forward(act, random_matrix(6, 4, rng), g), Error);
}

// Recurrent cell ------------------------------------------------------------------

TEST_CASE("rgnn: zero parameters and zero state stay at zero") {
  std::mt19937_64 rng(0);
  GatedRecurrentGraphCell cell("c", 2, 3, rng);
  for (auto* p : cell.parameters()) p->value.setZero();
  DualGraph g({{1}, {0, 2}, {1}});
  MatrixD h = rgnn_step<double>(cell, random_matrix(3, 2, rng), MatrixD::Zero(3, 3), g.normalized_adjacency());
  CHECK(h.isZero(0.0));

  // Zero input and hidden with random weights and zero candidate bias also stays at zero.
  GatedRecurrentGraphCell random_cell("c", 2, 3, rng);
  MatrixD h2 = rgnn_step<double>(random_cell, MatrixD::Zero(3, 2), MatrixD::Zero(3, 3), g.normalized_adjacency());
  CHECK(h2.isZero(0.0));
}

TEST_CASE("rgnn: a saturated update gate carries the hidden state through") {
  std::mt19937_64 rng(2);
  GatedRecurrentGraphCell cell("c", 2, 3, rng);
  cell.bz.value.setConstant(40.0);
  DualGraph g({{1}, {0, 2}, {1}});
  MatrixD prev = random_matrix(3, 3, rng, 0.5);
  MatrixD h = rgnn_step(cell, random_matrix(3, 2, rng), prev, g.normalized_adjacency());
  CHECK((h - prev).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("rgnn matches a scalar recomputation on a 3-vertex graph") {
  std::mt19937_64 rng(6);
  GatedRecurrentGraphCell cell("c", 2, 3, rng);
  for (auto* p : cell.parameters()) p->value = random_matrix(p->value.rows(), p->value.cols(), rng, 0.8);
  DualGraph g({{1, 2}, {0}, {0}});
  MatrixD x = random_matrix(3, 2, rng), hp = random_matrix(3, 3, rng, 0.5);
  MatrixD h = rgnn_step(cell, x, hp, g.normalized_adjacency());

  auto agg = [&](const MatrixD& m, std::size_t v, Eigen::Index c) {
    double s = 0.0;
    for (std::size_t u : g.neighbors(v)) s += m(u, c) / std::sqrt(double(g.degree(u) * g.degree(v)));
    return s;
  };
  auto conv = [&](const MatrixD& theta, const MatrixD& m, std::size_t v, Eigen::Index out) {
    double s = 0.0;
    for (Eigen::Index c = 0; c < m.cols(); ++c) s += theta(out, c) * agg(m, v, c);
    return s;
  };
  MatrixD r(3, 3), z(3, 3);
  for (std::size_t v = 0; v < 3; ++v)
    for (Eigen::Index j = 0; j < 3; ++j) {
      z(v, j) = sigmoid(conv(cell.wz.value, x, v, j) + conv(cell.uz.value, hp, v, j) + cell.bz.value(0, j));
      r(v, j) = sigmoid(conv(cell.wr.value, x, v, j) + conv(cell.ur.value, hp, v, j) + cell.br.value(0, j));
    }
  MatrixD rh = r.cwiseProduct(hp);
  for (std::size_t v = 0; v < 3; ++v)
    for (Eigen::Index j = 0; j < 3; ++j) {
      const double c = std::tanh(conv(cell.wc.value, x, v, j) + conv(cell.uc.value, rh, v, j) + cell.bc.value(0, j));
      const double expected = z(v, j) * hp(v, j) + (1 - z(v, j)) * c;
      CHECK(h(v, j) == doctest::Approx(expected).epsilon(1e-12));
    }
}

// Loss ----------------------------------------------------------------------------

TEST_CASE("weighted bce values") {
  MatrixD p(1, 1), y(1, 1);
  p << 0.5;
  y << 1;
  CHECK(weighted_bce<double>(p, y, 1.0) == doctest::Approx(std::log(2.0)));

  MatrixD perfect(4, 1), labels(4, 1);
  perfect << 1.0, 0.0, 1.0, 0.0;
  labels << 1, 0, 1, 0;
  CHECK(weighted_bce<double>(perfect, labels, 1.0) <= 1e-6);

  CHECK_THROWS_AS(weighted_bce<double>(MatrixD::Zero(3, 1), MatrixD::Zero(2, 1), 1.0), Error);
}

TEST_CASE("pos_weight from a 0.76% positive rate balances the two classes") {
  const double rate = 0.0076;
  const double w = (1 - rate) / rate;
  CHECK(w == doctest::Approx(130.6).epsilon(0.001));
  MatrixD p = MatrixD::Constant(131, 1, 0.5), y = MatrixD::Zero(131, 1);
  y(0, 0) = 1;
  const double total = weighted_bce<double>(p, y, w) * 131;
  const double pos = weighted_bce<double>(MatrixD::Constant(1, 1, 0.5), MatrixD::Ones(1, 1), w);
  const double neg = weighted_bce<double>(MatrixD::Constant(130, 1, 0.5), MatrixD::Zero(130, 1), w) * 130;
  CHECK(total == doctest::Approx(pos + neg));
  CHECK(std::abs(pos - neg) / neg < 0.01);
}

// Backward --------------------------------------------------------------------------

TEST_CASE("gradient of half squared norm through identity theta equals x") {
  std::mt19937_64 rng(3);
  Tape t;
  MatrixD x0 = random_matrix(1, 4, rng);
  auto x = t.input(x0);
  auto y = t.linear(x, t.constant(MatrixD::Identity(4, 4)));
  t.backward(t.scale(t.sum(t.square(y)), 0.5));
  CHECK((t.grad(x) - x0).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("gradient of weighted bce with respect to the logit at p=0.5, y=1") {
  Tape t;
  auto logit = t.input(MatrixD::Zero(1, 1));
  MatrixD y = MatrixD::Ones(1, 1);
  t.backward(t.weighted_bce(t.sigmoid(logit), y, 1.0));
  CHECK(t.grad(logit)(0, 0) == doctest::Approx(-0.5));
}

TEST_CASE("finite-difference gradient checks for every layer type") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    CAPTURE(seed);
    using Case = std::pair<const char*, GradCheck (*)(std::uint64_t)>;
    const Case cases[] = {{"gcn", &gcn_case}, {"gru", &gru_case}, {"head", &head_case},
                          {"bce", &bce_case}, {"collision model", &collision_model_case}, {"td", &td_case}};
    for (auto [name, check] : cases) {
      CAPTURE(name);
      GradCheck r = check(seed);
      CAPTURE(r.worst);
      CHECK(r.max_rel_error < kGradTolerance);
    }
  }
}

TEST_CASE("parameters enter as constants on a tape without gradients") {
  Parameter<double> p("p", MatrixD::Ones(2, 2));
  Tape t(false);
  auto loss = t.sum(t.param(p));
  t.backward(loss);
  CHECK(p.grad.size() == 0);
}

// Adam ------------------------------------------------------------------------------

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Parameter<double> p("p", MatrixD::Constant(2, 3, 0.7));
  p.zero_grad();
  Adam adam;
  std::vector<Parameter<double>*> ps{&p};
  for (int i = 0; i < 10; ++i) adam.step(ps);
  CHECK(p.value == MatrixD::Constant(2, 3, 0.7));
}

TEST_CASE("adam: constant gradient gives steps of size lr with the gradient's sign") {
  Parameter<double> p("p", MatrixD::Zero(1, 2));
  Adam adam(AdamConfig{0.01});
  std::vector<Parameter<double>*> ps{&p};
  MatrixD prev = p.value;
  for (int i = 0; i < 500; ++i) {
    p.grad = MatrixD(1, 2);
    p.grad << 3.0, -0.2;
    prev = p.value;
    adam.step(ps);
  }
  MatrixD step = p.value - prev;
  CHECK(step(0, 0) == doctest::Approx(-0.01).epsilon(1e-4));
  CHECK(step(0, 1) == doctest::Approx(0.01).epsilon(1e-4));
}

TEST_CASE("adam: 200 steps on a convex quadratic come within 1e-3 of the optimum") {
  // f(x) = sum a_i (x_i - c_i)^2, optimum 0 at x = c.
  MatrixD a(1, 4), c(1, 4);
  a << 1.0, 2.0, 0.5, 3.0;
  c << 1.0, -2.0, 0.5, 1.5;
  Parameter<double> x("x", MatrixD::Zero(1, 4));
  Adam adam(AdamConfig{0.1});
  std::vector<Parameter<double>*> ps{&x};
  for (int i = 0; i < 200; ++i) {
    x.grad = (2.0 * a.array() * (x.value - c).array()).matrix();
    adam.step(ps);
  }
  const double f = (a.array() * (x.value - c).array().square()).sum();
  CHECK(f < 1e-3);
}

TEST_CASE("adam rejects a gradient of the wrong shape") {
  Parameter<double> p("p", MatrixD::Zero(2, 2));
  p.grad = MatrixD::Zero(1, 2);
  Adam adam;
  std::vector<Parameter<double>*> ps{&p};
  CHECK_THROWS_AS(adam.step(ps), Error);
}

// Integrated gradients ------------------------------------------------------------

TEST_CASE("integrated gradients on a linear model is exact") {
  std::mt19937_64 rng(5);
  MatrixD w = random_matrix(3, 2, rng);
  ValueAndGradient<double> f = [&](const MatrixD& x) { return std::pair{x.cwiseProduct(w).sum(), w}; };
  MatrixD x = random_matrix(3, 2, rng), x0 = random_matrix(3, 2, rng);
  MatrixD attr = integrated_gradients(f, x, x0, 16);
  CHECK((attr - w.cwiseProduct(x - x0)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(integrated_gradients(f, x, x, 16).isZero(0.0));
  CHECK_THROWS_AS(integrated_gradients(f, x, x0, 8), Error);
  CHECK_THROWS_AS(integrated_gradients(f, x, MatrixD(2, 2), 16), Error);
}

TEST_CASE("integrated gradients completeness on a two-layer model at 256 steps") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    DualGraph g = random_dual(5, 0.5, rng);
    Dense enc("enc", 3, 6, Activation::Tanh, rng);
    Dense head("head", 6, 1, Activation::Sigmoid, rng);
    GraphConvLayer conv("conv", random_matrix(6, 6, rng, 0.5), Activation::Tanh);
    ValueAndGradient<double> f = [&](const MatrixD& x) {
      Tape t(false);
      auto in = t.input(x);
      auto y = t.mean(head.forward(t, conv.forward(t, enc.forward(t, in), g.normalized_adjacency())));
      t.backward(y);
      return std::pair{t.value(y)(0, 0), t.grad(in)};
    };
    MatrixD x = random_matrix(5, 3, rng, 1.5), x0 = MatrixD::Zero(5, 3);
    MatrixD attr = integrated_gradients(f, x, x0, 256);
    const double gap = f(x).first - f(x0).first;
    CHECK(std::abs(attr.sum() - gap) < 0.01 * std::abs(gap));
  }
}

// Checkpoints ---------------------------------------------------------------------

TEST_CASE("checkpoint round trip and corruption") {
  Checkpoint c;
  c.kind = CheckpointKind::QNetwork;
  c.config = R"({"hidden":4})";
  std::mt19937_64 rng(1);
  c.add("a", random_matrix(2, 3, rng));
  c.add("b", random_matrix(1, 1, rng));
  std::stringstream buf;
  write_checkpoint(buf, c);
  const std::string bytes = buf.str();
  CHECK(bytes.substr(0, 4) == "OSLM");
  Checkpoint back = read_checkpoint(buf);
  CHECK(back.kind == c.kind);
  CHECK(back.config == c.config);
  REQUIRE(back.blocks.size() == 2);
  CHECK(back.block("a") == c.block("a"));
  CHECK(back.block("b") == c.block("b"));
  CHECK_THROWS_AS(back.block("missing"), Error);

  auto desc = nlohmann::json::parse(describe_checkpoint(back));
  CHECK(desc["blocks"][0]["rows"] == 2);
  CHECK(desc["blocks"][0]["cols"] == 3);

  std::stringstream bad("XXXX" + bytes.substr(4));
  CHECK_THROWS_AS(read_checkpoint(bad), Error);
  std::stringstream truncated(bytes.substr(0, bytes.size() - 5));
  CHECK_THROWS_AS(read_checkpoint(truncated), Error);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/model.oslm"), Error);
}
