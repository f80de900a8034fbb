#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "sparselab/analysis.hpp"
#include "sparselab/error.hpp"
#include "sparselab/model.hpp"

using namespace sparselab;

namespace {

struct Problem {
  MaskedNetwork net;
  Tensor x;
  std::vector<int> y;
};

Problem tiny_problem(std::uint64_t seed, std::size_t n = 40) {
  const NetworkSpec spec = mlp_spec({6, 8, 3}, Activation::Tanh, true);
  return {oracle::random_network(spec, 0.6, seed), oracle::random_batch(spec, n, seed), oracle::random_labels(n, 3, seed)};
}

}  // namespace

TEST_CASE("gradient flow is the squared masked gradient norm") {
  Problem p = tiny_problem(1);
  const auto [loss, g] = loss_and_gradient(p.net, p.x, p.y);
  double s = 0.0;
  for (double v : g.values) s += v * v;
  CHECK(gradient_flow(p.net, p.x, p.y) == doctest::Approx(s).epsilon(1e-14));
  const GradientVector d = dense_gradient(p.net, p.x, p.y);
  const auto mask = p.net.flat_mask();
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i] != 0.0) CHECK(d.values[i] == doctest::Approx(g.values[i]).epsilon(1e-14));
}

TEST_CASE("a no-op mask update has delta exactly zero") {
  Problem p = tiny_problem(2);
  const MaskedNetwork before = p.net;
  const FlowDelta d = mask_update_delta(p.net, p.x, p.y, [](MaskedNetwork&) { return UpdateReport{}; });
  CHECK(d.delta == 0.0);
  CHECK(d.before == d.after);
  CHECK(p.net == before);
}

TEST_CASE("full Hessian equals assembled hvp columns and is symmetric") {
  Problem p = tiny_problem(3, 30);
  const MatrixRM h = full_hessian(p.net, p.x, p.y, {5000, 7, 1});  // uneven chunks
  const std::size_t n = p.net.active_coordinates().size();
  REQUIRE(static_cast<std::size_t>(h.rows()) == n);
  for (std::size_t j = 0; j < n; j += 5) {
    std::vector<double> e(n, 0.0);
    e[j] = 1.0;
    const auto col = hvp(p.net, p.x, p.y, e);
    for (std::size_t i = 0; i < n; ++i) CHECK(h(i, j) == doctest::Approx(col[i]).epsilon(1e-10).scale(1.0));
  }
  CHECK(symmetry_defect(h) <= 1e-12);
  const MatrixRM threaded = full_hessian(p.net, p.x, p.y, {5000, 7, 3});
  CHECK((threaded - h).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(full_hessian(p.net, p.x, p.y, {10}), Error);
}

TEST_CASE("eigenvalues agree with a Jacobi solver") {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> nd;
  const int n = 40;
  MatrixRM a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) a(i, j) = a(j, i) = nd(gen);
  std::vector<std::vector<oracle::Real>> ref(n, std::vector<oracle::Real>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) ref[i][j] = a(i, j);
  const auto expect = oracle::jacobi_eigenvalues(ref);
  const auto got = symmetric_eigenvalues(a);
  for (int i = 0; i < n; ++i) CHECK(std::abs(got[i] - static_cast<double>(expect[i])) < 1e-10);

  MatrixRM asym = a;
  asym(0, 1) += 1.0;
  CHECK_THROWS_AS(symmetric_eigenvalues(asym), ShapeError);
  CHECK_THROWS_AS(symmetric_eigenvalues(MatrixRM(2, 3)), ShapeError);
}

TEST_CASE("spectral density") {
  SUBCASE("integrates to one and peaks at the eigenvalues") {
    const SpectrumEstimate s = spectrum_from_eigenvalues({-1.0, 0.0, 0.5, 2.0, 2.0});
    CHECK(s.sigma == doctest::Approx(0.03));
    CHECK(std::abs(s.integral() - 1.0) < 0.01);
    CHECK(s.grid.front() <= -1.0 - 3 * s.sigma + 1e-12);
    CHECK(s.grid.back() >= 2.0 + 3 * s.sigma - 1e-12);
  }
  SUBCASE("single eigenvalue is a normal density") {
    const SpectrumEstimate s = spectrum_from_eigenvalues({1.5}, 0.2);
    const auto peak = std::max_element(s.density.begin(), s.density.end());
    CHECK(s.grid[static_cast<std::size_t>(peak - s.density.begin())] == doctest::Approx(1.5).epsilon(0.01));
    CHECK(*peak == doctest::Approx(1.0 / (0.2 * std::sqrt(2 * std::numbers::pi))).epsilon(0.01));
  }
  SUBCASE("negative magnitude and tracks") {
    const std::vector<double> ev{-0.3, -0.1, 0.2};
    CHECK(largest_negative_magnitude(ev) == doctest::Approx(0.3));
    CHECK(largest_negative_magnitude(std::vector<double>{0.1, 0.2}) == 0.0);
    const auto track = largest_negative_eigenvalue_track(
        {{10, spectrum_from_eigenvalues(ev)}, {20, spectrum_from_eigenvalues({-0.5, 1.0})}});
    REQUIRE(track.size() == 2);
    CHECK(track[1].step == 20);
    CHECK(track[1].magnitude == doctest::Approx(0.5));
  }
}

TEST_CASE("Hessian of a tiny net matches finite differences") {
  Problem p = tiny_problem(6, 10);
  const MatrixRM h = full_hessian(p.net, p.x, p.y);
  const auto fd = oracle::fd_hessian(p.net, p.x, p.y);
  double worst = 0.0;
  for (std::size_t i = 0; i < fd.h.size(); ++i)
    for (std::size_t j = 0; j < fd.h.size(); ++j)
      worst = std::max(worst, std::abs(h(i, j) - static_cast<double>(fd.h[i][j])));
  CHECK(worst <= 1e-6);
}
