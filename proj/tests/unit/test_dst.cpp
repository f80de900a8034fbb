#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "oracles.hpp"
#include "sparselab/dst.hpp"
#include "sparselab/error.hpp"
#include "sparselab/schedule.hpp"

using namespace sparselab;

namespace {

struct Fixture {
  MaskedNetwork net;
  GradientVector grad;
};

Fixture make_fixture(std::uint64_t seed, double density = 0.4) {
  Fixture f{oracle::random_network(mlp_spec({12, 10, 4}, Activation::Relu, true), density, seed), {}};
  std::mt19937_64 gen(seed + 100);
  std::normal_distribution<double> nd;
  f.grad.values.resize(f.net.layout().total);
  for (double& g : f.grad.values) g = nd(gen);
  return f;
}

/// Indices of `pool` ordered by (key, index); first k returned.
std::vector<std::size_t> smallest_k(std::vector<std::size_t> pool, const std::vector<double>& key, std::size_t k) {
  std::sort(pool.begin(), pool.end(), [&](std::size_t a, std::size_t b) {
    return key[a] != key[b] ? key[a] < key[b] : a < b;
  });
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

TEST_CASE("learning-rate schedules") {
  const LrSchedule cos{LrScheduleKind::Cosine, 0.1, 1000};
  CHECK(cos.at(0) == doctest::Approx(0.1));
  CHECK(cos.at(500) == doctest::Approx(0.05));
  CHECK(cos.at(250) == doctest::Approx(0.05 * (1 + std::cos(std::numbers::pi / 4))));
  CHECK(cos.at(1000) == 0.0);

  const LrSchedule ws{LrScheduleKind::WarmupStep, 0.2, 1000, 10, {300, 600}, 0.1};
  CHECK(ws.at(0) == doctest::Approx(0.02));
  CHECK(ws.at(9) == doctest::Approx(0.2));
  CHECK(ws.at(299) == doctest::Approx(0.2));
  CHECK(ws.at(300) == doctest::Approx(0.02));
  CHECK(ws.at(600) == doctest::Approx(0.002));
  CHECK(LrSchedule{LrScheduleKind::Constant, 0.3}.at(77) == 0.3);
  CHECK_THROWS_AS(parse_lr_schedule("linear"), ConfigError);
}

TEST_CASE("drop-fraction schedules and update steps") {
  DstConfig c{DstMethod::Rigl, 0.3, 100, 1000, DropSchedule::Cosine};
  CHECK(drop_fraction(c, 0) == doctest::Approx(0.3));
  CHECK(drop_fraction(c, 500) == doctest::Approx(0.15));
  CHECK(drop_fraction(c, 1000) == doctest::Approx(0.0));
  CHECK(drop_fraction(c, 1001) == 0.0);
  CHECK_FALSE(c.is_update_step(0));
  CHECK(c.is_update_step(100));
  CHECK_FALSE(c.is_update_step(150));
  CHECK_FALSE(c.is_update_step(1000));

  c.schedule = DropSchedule::LrCoupled;
  const LrSchedule lr{LrScheduleKind::Cosine, 0.1, 1000};
  CHECK(drop_fraction(c, 250, &lr) == doctest::Approx(0.3 * lr.at(250) / 0.1));
  CHECK_THROWS_AS(drop_fraction(c, 250), ConfigError);

  CHECK_THROWS_AS((DstConfig{DstMethod::Set, 1.0}.validate()), ConfigError);
  CHECK_THROWS_AS((DstConfig{DstMethod::Set, 0.3, 0}.validate()), ConfigError);
  CHECK_NOTHROW((DstConfig{DstMethod::None, 5.0}.validate()));
}

TEST_CASE("drop and grow follow the method's criterion") {
  for (DstMethod method : {DstMethod::Rigl, DstMethod::RiglInverted, DstMethod::Set}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Fixture f = make_fixture(seed);
      const MaskedNetwork before = f.net;
      Rng rng = make_rng(seed, {kStreamDst});
      const UpdateReport rep = dst_update_fraction(f.net, f.grad, method, 0.3, rng);

      for (const LayerUpdate& u : rep.layers) {
        const Layer& old = before.layer(u.layer);
        const Layer& now = f.net.layer(u.layer);
        std::vector<std::size_t> active, inactive;
        std::vector<double> mag(old.weight.size()), gabs(old.weight.size()), neg(old.weight.size());
        const auto block = std::find_if(f.net.layout().blocks.begin(), f.net.layout().blocks.end(),
                                        [&](const ParamBlock& b) { return b.layer == u.layer && !b.is_bias; });
        for (std::size_t i = 0; i < old.weight.size(); ++i) {
          (old.mask.active(i) ? active : inactive).push_back(i);
          mag[i] = std::abs(old.weight[i]);
          gabs[i] = std::abs(f.grad.values[block->offset + i]);
          neg[i] = -gabs[i];
        }
        const std::size_t k = static_cast<std::size_t>(std::llround(0.3 * static_cast<double>(active.size())));
        CHECK(now.mask.count() == old.mask.count());
        CHECK(u.dropped == smallest_k(active, mag, k));
        if (method == DstMethod::Rigl) CHECK(u.grown == smallest_k(inactive, neg, k));
        if (method == DstMethod::RiglInverted) CHECK(u.grown == smallest_k(inactive, gabs, k));
        for (std::size_t i : u.grown) {
          CHECK_FALSE(old.mask.active(i));
          CHECK(now.mask.active(i));
          CHECK(now.weight[i] == 0.0);
        }
        for (std::size_t i : u.dropped) {
          CHECK_FALSE(now.mask.active(i));
          CHECK(now.weight[i] == 0.0);
        }
      }
    }
  }
}

TEST_CASE("SET growth equals an independent rejection sampler") {
  Fixture f = make_fixture(3);
  const MaskedNetwork before = f.net;
  Rng rng = make_rng(9, {kStreamDst, 100});
  const UpdateReport rep = dst_update_fraction(f.net, f.grad, DstMethod::Set, 0.3, rng);

  std::mt19937_64 ref = make_rng(9, {kStreamDst, 100});
  for (const LayerUpdate& u : rep.layers) {
    const Layer& old = before.layer(u.layer);
    const std::size_t n = old.weight.size();
    std::set<std::size_t> got;
    std::vector<std::size_t> order;
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    while (order.size() < u.grown.size()) {
      const std::size_t i = pick(ref);
      if (old.mask.active(i) || got.count(i)) continue;
      got.insert(i);
      order.push_back(i);
    }
    std::sort(order.begin(), order.end());
    CHECK(u.grown == order);
  }
}

TEST_CASE("SET growth is uniform over eligible positions") {
  const std::size_t n = 20;
  std::vector<std::uint8_t> eligible(n, 0);
  for (std::size_t i = 0; i < n; i += 2) eligible[i] = 1;
  std::vector<double> hits(n, 0.0);
  Rng rng = make_rng(1);
  const int rounds = 20000;
  for (int r = 0; r < rounds; ++r)
    for (std::size_t i : set_grow_sample(n, eligible, 3, rng)) hits[i] += 1;
  double chi2 = 0.0;
  const double expected = rounds * 3.0 / 10.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!eligible[i]) CHECK(hits[i] == 0.0);
    else chi2 += (hits[i] - expected) * (hits[i] - expected) / expected;
  }
  CHECK(chi2 < 27.9);  // 9 dof, p = 0.001
}

TEST_CASE("ties go to the lowest index") {
  MaskedNetwork net = MaskedNetwork::build(mlp_spec({4, 2}));
  net.set_mask(0, Mask({2, 4}, {1, 1, 1, 1, 0, 0, 0, 0}));
  net.assign(std::vector<double>{1, 1, 1, 1, 0, 0, 0, 0});
  GradientVector g{std::vector<double>(8, 0.5)};
  Rng rng = make_rng(0);
  const UpdateReport rep = dst_update_fraction(net, g, DstMethod::Rigl, 0.5, rng);
  CHECK(rep.layers[0].dropped == std::vector<std::size_t>{0, 1});
  CHECK(rep.layers[0].grown == std::vector<std::size_t>{4, 5});
  CHECK(rep.changed_coordinates(net) == std::vector<std::size_t>{0, 1, 4, 5});
  CHECK(rep.total_moved() == 2);
}

TEST_CASE("shortfall when too few positions are free, no-op at alpha 0") {
  MaskedNetwork net = MaskedNetwork::build(mlp_spec({5, 2}));
  net.set_mask(0, Mask({2, 5}, {1, 1, 1, 1, 1, 1, 1, 1, 1, 0}));
  GradientVector g{std::vector<double>(10, 1.0)};
  Rng rng = make_rng(0);
  MaskedNetwork copy = net;
  const UpdateReport rep = dst_update_fraction(copy, g, DstMethod::Rigl, 0.5, rng);
  CHECK(rep.layers[0].grown.size() == 1);
  CHECK(rep.layers[0].shortfall == 4);  // k = round(4.5) = 5
  CHECK(copy.layer(0).mask.count() == 9);

  MaskedNetwork same = net;
  const UpdateReport none = dst_update_fraction(same, g, DstMethod::Set, 0.0, rng);
  CHECK(none.total_moved() == 0);
  CHECK(same == net);
  CHECK_THROWS_AS(dst_update_fraction(same, GradientVector{{1.0}}, DstMethod::Set, 0.3, rng), ShapeError);
}

TEST_CASE("cubic pruning schedule") {
  PruneConfig p{0.9, 100, 500, 50};
  CHECK(prune_target(p, 100) == 0.0);
  CHECK(prune_target(p, 500) == 0.9);
  CHECK(prune_target(p, 300) == doctest::Approx(0.9 * (1 - 0.125)));
  CHECK(p.is_prune_step(100));
  CHECK(p.is_prune_step(150));
  CHECK_FALSE(p.is_prune_step(160));
  CHECK_FALSE(p.is_prune_step(550));
  PruneConfig q{0.9, 0, 95, 10};
  CHECK(q.is_prune_step(95));
  CHECK_THROWS_AS((PruneConfig{0.9, 5, 5}.validate()), ConfigError);
  CHECK_THROWS_AS((PruneConfig{1.0, 0, 5}.validate()), ConfigError);
}

TEST_CASE("magnitude pruning removes the smallest weights and never regrows") {
  for (PruneScope scope : {PruneScope::PerLayer, PruneScope::Global}) {
    MaskedNetwork net = oracle::random_network(mlp_spec({30, 20, 10}), 1.0, 8);
    MaskedNetwork prev = net;
    PruneConfig cfg{0.8, 0, 100, 10, scope};
    for (std::uint64_t t = 0; t <= 100; t += 10) {
      prune_step(net, cfg, t);
      for (std::size_t li : net.weighted_layers())
        for (std::size_t i = 0; i < net.layer(li).mask.size(); ++i)
          if (net.layer(li).mask.active(i)) REQUIRE(prev.layer(li).mask.active(i));
      prev = net;
    }
    CHECK(net.global_sparsity() == doctest::Approx(0.8).epsilon(1e-3));
    // Every surviving magnitude is at least every removed one (within scope).
    const MaskedNetwork ref = oracle::random_network(mlp_spec({30, 20, 10}), 1.0, 8);
    double min_kept = INFINITY, max_removed = 0.0;
    for (std::size_t li : net.weighted_layers()) {
      if (scope == PruneScope::PerLayer) min_kept = INFINITY, max_removed = 0.0;
      for (std::size_t i = 0; i < net.layer(li).mask.size(); ++i) {
        const double m = std::abs(ref.layer(li).weight[i]);
        if (net.layer(li).mask.active(i)) min_kept = std::min(min_kept, m);
        else max_removed = std::max(max_removed, m);
      }
      if (scope == PruneScope::PerLayer) CHECK(min_kept >= max_removed);
    }
    CHECK(min_kept >= max_removed);
  }
}

TEST_CASE("pruning respects excluded layers") {
  MaskedNetwork net = oracle::random_network(mlp_spec({30, 20, 10}), 1.0, 8);
  prune_to(net, 0.5, PruneScope::PerLayer, {1});
  CHECK(net.layer(1).mask.density() == 1.0);
  CHECK(net.layer(0).mask.density() == doctest::Approx(0.5));
}

TEST_CASE("lottery ticket extraction") {
  MaskedNetwork init = oracle::random_network(mlp_spec({8, 6, 3}), 1.0, 1);
  MaskedNetwork later = oracle::random_network(mlp_spec({8, 6, 3}), 1.0, 2);
  MaskedNetwork solution = oracle::random_network(mlp_spec({8, 6, 3}), 1.0, 3);
  prune_to(solution, 0.7, PruneScope::Global);
  std::map<std::uint64_t, MaskedNetwork> ckpts{{0, init}, {40, later}};

  const LotteryState k0 = extract_lottery(ckpts, solution, 0);
  CHECK(same_masks(k0.ticket, solution));
  for (std::size_t li : init.weighted_layers())
    for (std::size_t i = 0; i < init.layer(li).weight.size(); ++i)
      CHECK(k0.ticket.layer(li).weight[i] == (solution.layer(li).mask.active(i) ? init.layer(li).weight[i] : 0.0));
  CHECK(extract_lottery(ckpts, solution, 40).ticket.layer(0).weight[0] ==
        (solution.layer(0).mask.active(0) ? later.layer(0).weight[0] : 0.0));
  CHECK_THROWS_AS(extract_lottery(ckpts, solution, 7), Error);
  CHECK_THROWS_AS(extract_lottery({{40, later}}, solution, 40), Error);

  Rng rng = make_rng(4);
  const MaskedNetwork scratch = make_scratch(solution, InitScheme::parse("per-neuron"), rng);
  CHECK(same_masks(scratch, solution));
  CHECK(scratch.step == 0);
  CHECK_FALSE(scratch == k0.ticket);
}
