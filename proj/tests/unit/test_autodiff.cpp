#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sparselab/error.hpp"
#include "sparselab/model.hpp"

using namespace sparselab;

namespace {

NetworkSpec small_conv_spec() {
  NetworkSpec s;
  s.name = "conv-small";
  s.input = {1, 6, 6};
  s.layers = {LayerSpec::conv(2, 3, Padding::Same, Activation::Tanh), LayerSpec::max_pool(),
              LayerSpec::conv(3, 2, Padding::Valid, Activation::Relu), LayerSpec::flatten(),
              LayerSpec::linear(4, Activation::None)};
  return s;
}

double max_rel_error(const std::vector<double>& analytic, const oracle::FdGradient& fd, std::size_t* skipped) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    if (fd.kink[i]) {
      ++*skipped;
      continue;
    }
    const double n = static_cast<double>(fd.grad[i]);
    worst = std::max(worst, std::abs(analytic[i] - n) / (std::abs(analytic[i]) + 1e-8));
  }
  return worst;
}

}  // namespace

TEST_CASE("identity linear net gives the closed-form two-class loss") {
  MaskedNetwork net = MaskedNetwork::build(mlp_spec({2, 2}, Activation::None, false));
  net.assign(std::vector<double>{1, 0, 0, 1});
  Tensor x({1, 2}, std::vector<double>{1, 0});
  const std::vector<int> y{0};
  CHECK(forward(net, x, y).loss == doctest::Approx(std::log(1 + std::exp(-1.0))).epsilon(1e-15));
}

TEST_CASE("zero weights give ln C for any input") {
  MaskedNetwork net = MaskedNetwork::build(mlp_spec({5, 7, 10}, Activation::Relu, true));
  const Tensor x = oracle::random_batch(net.spec(), 4, 3);
  CHECK(forward(net, x, oracle::random_labels(4, 10, 1)).loss == doctest::Approx(std::log(10.0)).epsilon(1e-14));
}

TEST_CASE("forward matches the straight-line oracle") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const NetworkSpec spec = seed % 2 ? small_conv_spec() : mlp_spec({6, 9, 7, 4}, Activation::Tanh, true);
    const MaskedNetwork net = oracle::random_network(spec, 0.6, seed);
    const Tensor x = oracle::random_batch(spec, 5, seed);
    const auto y = oracle::random_labels(5, 4, seed);
    const auto ref = oracle::forward(net, oracle::flat_params(net), x, y);
    CHECK(std::abs(forward(net, x, y).loss - static_cast<double>(ref.loss)) < 1e-12);
  }
}

TEST_CASE("quadratic heads on the tape") {
  SUBCASE("half squared norm gradient is the input") {
    Tape tape;
    Tensor theta({3}, std::vector<double>{0.5, -2.0, 3.25});
    const SlotId leaf = tape.leaf(theta);
    const SlotId out = tape.apply<HalfSquaredNormOp>({leaf});
    tape.backward(out);
    CHECK(*tape.adjoint(leaf) == theta);
  }
  SUBCASE("hvp of a quadratic form against e1 is the first column") {
    MatrixRM a(3, 3);
    a << 2, 1, 0, 1, 3, -1, 0, -1, 4;
    Tape tape(true);
    const SlotId leaf = tape.leaf(Tensor({3}, std::vector<double>{0.3, 0.1, -0.7}),
                                  Tensor({3}, std::vector<double>{1, 0, 0}));
    const SlotId out = tape.apply<QuadraticFormOp>({leaf}, a);
    tape.backward(out);
    const Tensor& hv = *tape.adjoint_tangent(leaf);
    CHECK(hv[0] == doctest::Approx(2));
    CHECK(hv[1] == doctest::Approx(1));
    CHECK(hv[2] == doctest::Approx(0));
  }
}

TEST_CASE("a consumed tape cannot run backward again") {
  MaskedNetwork net = oracle::random_network(mlp_spec({3, 4, 2}), 1.0, 2);
  const Tensor x = oracle::random_batch(net.spec(), 2, 2);
  const std::vector<int> y{0, 1};
  ForwardPass pass = forward(net, x, y);
  backward(pass);
  CHECK_THROWS_AS(backward(pass), Error);
}

TEST_CASE("shape and numeric errors") {
  MaskedNetwork net = oracle::random_network(mlp_spec({3, 4, 2}), 1.0, 2);
  const std::vector<int> y{0, 1};
  CHECK_THROWS_AS(forward(net, Tensor({2, 5}), y), ShapeError);
  Tensor bad({2, 3}, 1.0);
  bad[4] = std::nan("");
  CHECK_THROWS_AS(forward(net, bad, y), NumericError);
  MaskedNetwork broken = net;
  broken.layer(1).weight = Tensor({2, 7});
  try {
    forward(broken, Tensor({2, 3}), y);
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("layer 1") != std::string::npos);
  }
}

TEST_CASE("masked coordinates get zero gradient and do not affect results") {
  MaskedNetwork net = oracle::random_network(mlp_spec({6, 8, 3}, Activation::Tanh, true), 0.5, 11);
  const Tensor x = oracle::random_batch(net.spec(), 4, 11);
  const auto y = oracle::random_labels(4, 3, 11);
  const auto [loss, g] = loss_and_gradient(net, x, y);
  const auto mask = net.flat_mask();
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i] == 0.0) CHECK(g.values[i] == 0.0);

  // Mask absorption: whatever sits at masked positions is ignored.
  MaskedNetwork dirty = net;
  for (std::size_t li : dirty.weighted_layers()) {
    auto& layer = dirty.layer(li);
    for (std::size_t i = 0; i < layer.weight.size(); ++i)
      if (!layer.mask.active(i)) layer.weight[i] = 123.0;
  }
  const auto [loss2, g2] = loss_and_gradient(dirty, x, y);
  CHECK(loss2 == loss);
  CHECK(g2.values == g.values);
}

TEST_CASE("gradients match long-double central differences") {
  std::size_t skipped = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const NetworkSpec spec = seed % 3 == 0   ? small_conv_spec()
                             : seed % 3 == 1 ? mlp_spec({5, 7, 6, 3}, Activation::Relu, true)
                                             : mlp_spec({5, 7, 3}, Activation::Tanh, false);
    const MaskedNetwork net = oracle::random_network(spec, 0.5, seed);
    const Tensor x = oracle::random_batch(spec, 3, seed);
    const auto y = oracle::random_labels(3, spec.layers.back().out, seed);
    const auto g = loss_and_gradient(net, x, y).second;
    worst = std::max(worst, max_rel_error(g.values, oracle::fd_gradient(net, x, y), &skipped));
  }
  CHECK(worst < 1e-4);
  MESSAGE("worst relative error " << worst << ", kink coordinates skipped " << skipped);
}

TEST_CASE("hvp columns match the finite-difference Hessian") {
  const NetworkSpec spec = mlp_spec({4, 5, 3}, Activation::Tanh, true);
  const MaskedNetwork net = oracle::random_network(spec, 0.7, 5);
  const Tensor x = oracle::random_batch(spec, 4, 5);
  const auto y = oracle::random_labels(4, 3, 5);
  const auto fd = oracle::fd_hessian(net, x, y);
  REQUIRE_FALSE(fd.kink);
  const std::size_t n = net.active_coordinates().size();
  REQUIRE(fd.h.size() == n);
  double worst = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> e(n, 0.0);
    e[j] = 1.0;
    const auto col = hvp(net, x, y, e);
    for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(col[i] - static_cast<double>(fd.h[i][j])));
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("hvp is linear and symmetric") {
  const NetworkSpec spec = small_conv_spec();
  const MaskedNetwork net = oracle::random_network(spec, 0.6, 9);
  const Tensor x = oracle::random_batch(spec, 3, 9);
  const auto y = oracle::random_labels(3, 4, 9);
  const std::size_t n = net.active_coordinates().size();
  std::mt19937_64 gen(4);
  std::normal_distribution<double> nd;
  std::vector<double> u(n), v(n), w(n);
  for (std::size_t i = 0; i < n; ++i) {
    u[i] = nd(gen);
    v[i] = nd(gen);
    w[i] = 2.0 * u[i] - 0.5 * v[i];
  }
  const auto hu = hvp(net, x, y, u), hv = hvp(net, x, y, v), hw = hvp(net, x, y, w);
  double lin = 0.0, uhv = 0.0, vhu = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    lin = std::max(lin, std::abs(hw[i] - (2.0 * hu[i] - 0.5 * hv[i])));
    uhv += u[i] * hv[i];
    vhu += v[i] * hu[i];
  }
  CHECK(lin < 1e-9);
  CHECK(std::abs(uhv - vhu) < 1e-8);
  CHECK(hvp(net, x, y, std::vector<double>(n, 0.0)) == std::vector<double>(n, 0.0));
  CHECK_THROWS_AS(hvp(net, x, y, std::vector<double>(n + 1, 0.0)), ShapeError);
}

TEST_CASE("evaluate agrees with forward and slices rows") {
  const MaskedNetwork net = oracle::random_network(mlp_spec({4, 6, 3}, Activation::Relu, true), 0.8, 1);
  const Tensor x = oracle::random_batch(net.spec(), 10, 1);
  const auto y = oracle::random_labels(10, 3, 1);
  const EvalResult ev = evaluate(net, x, y, true, 3);
  CHECK(ev.loss == doctest::Approx(forward(net, x, y).loss).epsilon(1e-13));
  CHECK(ev.probabilities.rows() == 10);
  const Tensor rows = slice_rows(x, 2, 5);
  CHECK(rows.dim(0) == 3);
  CHECK(rows[0] == x[2 * 4]);
  const std::vector<std::size_t> pick{7, 0};
  CHECK(gather_rows(x, pick)[4] == x[0]);
}
