// Acceptance suite: one PASS/FAIL line per criterion.
//
//   sparselab_acceptance [--criterion N]... [--data DIR] [--verbose]
//
// MNIST is read from --data or $SPARSELAB_DATA. Criteria that need it fail
// when it is missing.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "oracles.hpp"
#include "sparselab/analysis.hpp"
#include "sparselab/config.hpp"
#include "sparselab/csv.hpp"
#include "sparselab/data.hpp"
#include "sparselab/dst.hpp"
#include "sparselab/error.hpp"
#include "sparselab/init.hpp"
#include "sparselab/landscape.hpp"
#include "sparselab/probe.hpp"
#include "sparselab/recipes.hpp"
#include "sparselab/sparsity.hpp"
#include "sparselab/train.hpp"

using namespace sparselab;
namespace fs = std::filesystem;

namespace {

bool g_verbose = false;

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    notes.push_back(fmt::format("{}{}", ok ? "" : "NOT ", what));
  }
  void note(const std::string& what) { notes.push_back(what); }
};

double mean(const std::vector<double>& v) {
  return v.empty() ? NAN : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

void attach_log(RecipeOptions& o) {
  if (g_verbose) o.log = [](const std::string& s) { std::cerr << "  " << s << "\n"; };
}

// ---- 1: gradient and Hessian correctness -----------------------------------

NetworkSpec random_spec(std::mt19937_64& gen) {
  std::uniform_int_distribution<int> width(2, 7);
  const Activation act = gen() % 2 ? Activation::Relu : Activation::Tanh;
  const bool bias = gen() % 2;
  switch (gen() % 3) {
    case 0: {
      NetworkSpec s;
      s.name = "conv";
      s.input = {static_cast<std::size_t>(1 + gen() % 2), 6, 6};
      s.layers = {LayerSpec::conv(static_cast<std::size_t>(width(gen) % 4 + 1), 3, Padding::Same, act, bias),
                  LayerSpec::max_pool(), LayerSpec::conv(2, 2, Padding::Valid, act, bias), LayerSpec::flatten(),
                  LayerSpec::linear(3, Activation::None, bias)};
      return s;
    }
    case 1:
      return mlp_spec({static_cast<std::size_t>(width(gen)), static_cast<std::size_t>(width(gen)),
                       static_cast<std::size_t>(width(gen)), 3},
                      act, bias);
    default:
      return mlp_spec({static_cast<std::size_t>(width(gen)), static_cast<std::size_t>(width(gen)), 4}, act, bias);
  }
}

Outcome criterion_gradients() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  double worst_grad = 0.0, worst_hess = 0.0;
  std::size_t kinks = 0, coords = 0, hess_cases = 0, hess_kink = 0;
  for (std::uint64_t c = 0; c < 50; ++c) {
    std::mt19937_64 gen(1000 + c);
    const NetworkSpec spec = random_spec(gen);
    const double density = std::uniform_real_distribution<double>(0.2, 1.0)(gen);
    const std::size_t batch = 1 + gen() % 6;
    const MaskedNetwork net = oracle::random_network(spec, density, c);
    const Tensor x = oracle::random_batch(spec, batch, c);
    const auto y = oracle::random_labels(batch, spec.layers.back().out, c);

    const auto g = loss_and_gradient(net, x, y).second;
    const auto fd = oracle::fd_gradient(net, x, y);
    for (std::size_t i = 0; i < g.values.size(); ++i) {
      if (fd.kink[i]) {
        ++kinks;
        continue;
      }
      ++coords;
      const double n = static_cast<double>(fd.grad[i]);
      worst_grad = std::max(worst_grad, std::abs(g.values[i] - n) / (std::abs(g.values[i]) + 1e-8));
    }

    if (net.active_weight_count() > 200) continue;
    const auto fh = oracle::fd_hessian(net, x, y);
    if (fh.kink) {
      ++hess_kink;
      continue;
    }
    ++hess_cases;
    const MatrixRM h = full_hessian(net, x, y);
    for (std::size_t i = 0; i < fh.h.size(); ++i)
      for (std::size_t j = 0; j < fh.h.size(); ++j)
        worst_hess = std::max(worst_hess, std::abs(h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) -
                                                   static_cast<double>(fh.h[i][j])));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.require(worst_grad < 1e-4, fmt::format("max relative gradient error {:.3g} < 1e-4 over {} coordinates", worst_grad, coords));
  out.note(fmt::format("{} coordinates within a finite-difference step of a ReLU/max-pool kink skipped", kinks));
  out.require(hess_cases >= 20 && worst_hess <= 1e-6,
              fmt::format("Hessian max abs error {:.3g} <= 1e-6 on {} nets with <= 200 active weights ({} skipped at kinks)",
                          worst_hess, hess_cases, hess_kink));
  out.require(secs < 120.0, fmt::format("runtime {:.1f} s < 120 s", secs));
  return out;
}

// ---- 2: init variances -------------------------------------------------------

Outcome criterion_init_variance() {
  Outcome out;
  std::size_t exact = 0, total = 0;
  for (const NetworkSpec& spec : {lenet5_spec(), mlp_spec({784, 300, 100, 10})}) {
    const MaskedNetwork net = MaskedNetwork::build(spec);
    for (std::size_t li : net.weighted_layers()) {
      const Layer& l = net.layer(li);
      const double n_in = static_cast<double>(l.weight.size() / l.weight.dim(0));
      for (double v : weight_variances(l, InitScheme::parse("per-neuron"))) {
        exact += v == 2.0 / n_in;
        ++total;
      }
    }
  }
  out.require(exact == total, fmt::format("dense per-neuron variance == 2/n_in exactly for {}/{} weights", exact, total));

  // Monte-Carlo: re-initialize one sparse layer until every neuron has 1e5 draws.
  MaskedNetwork net = MaskedNetwork::build(mlp_spec({200, 10}));
  Rng mask_rng = make_rng(3, {kStreamMask});
  allocate_sparsity(net, {DistributionKind::Uniform, 0.9, {}, {}}, mask_rng);
  const Layer& layer = net.layer(0);
  const std::size_t rows = 10, cols = 200;
  std::vector<std::size_t> fan(rows, 0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) fan[r] += layer.mask.active(r * cols + c);
  const std::size_t min_fan = *std::min_element(fan.begin(), fan.end());
  const std::size_t reps = (100000 + min_fan - 1) / min_fan;

  for (const auto& [name, gain] : {std::pair<const char*, double>{"per-neuron", 2.0}, {"per-neuron-glorot", 1.0}}) {
    const InitScheme scheme = InitScheme::parse(name);
    std::vector<double> sum(rows, 0.0), sq(rows, 0.0);
    std::vector<std::size_t> count(rows, 0);
    Rng rng = make_rng(11, {kStreamInit});
    for (std::size_t rep = 0; rep < reps; ++rep) {
      initialize(net, scheme, rng);
      const Layer& l = net.layer(0);
      for (std::size_t i = 0; i < l.weight.size(); ++i) {
        if (!l.mask.active(i)) continue;
        const std::size_t r = i / cols;
        sum[r] += l.weight[i];
        sq[r] += l.weight[i] * l.weight[i];
        ++count[r];
      }
    }
    double worst = 0.0;
    std::size_t fewest = SIZE_MAX;
    for (std::size_t r = 0; r < rows; ++r) {
      const double n = static_cast<double>(count[r]);
      const double var = (sq[r] - sum[r] * sum[r] / n) / (n - 1.0);
      worst = std::max(worst, std::abs(var / (gain / static_cast<double>(fan[r])) - 1.0));
      fewest = std::min(fewest, count[r]);
    }
    out.require(worst < 0.05 && fewest >= 100000,
                fmt::format("{}: worst per-neuron sample variance off by {:.2f}% of gain/fan_in ({} neurons, >= {} draws each)",
                            name, 100.0 * worst, rows, fewest));
  }
  return out;
}

// ---- 3: signal propagation in LeNet5 -----------------------------------------

Outcome criterion_signal() {
  Outcome out;
  const std::vector<std::string> schemes{"masked-dense", "layer-scaled", "per-neuron"};
  ProbeSweep sweep;
  sweep.sparsities = {0.0, 0.95};
  for (const auto& s : schemes) sweep.schemes.push_back(InitScheme::parse(s));
  sweep.seeds = 5;
  sweep.n_samples = 1024;
  const auto records = sweep_sparsity_probe(lenet5_spec(), sweep);
  std::size_t last = 0;
  for (const auto& r : records) last = std::max(last, r.layer_index);
  std::map<std::pair<double, std::string>, std::vector<double>> out_std;
  for (const auto& r : records)
    if (r.layer_index == last) out_std[{r.sparsity, r.scheme}].push_back(r.std);

  const auto& md = out_std[{0.95, "masked-dense"}];
  const auto& pn = out_std[{0.95, "per-neuron"}];
  const auto& ls = out_std[{0.95, "layer-scaled"}];
  bool ratio_ok = true;
  for (std::size_t s = 0; s < md.size(); ++s) ratio_ok = ratio_ok && md[s] < 0.1 * pn[s];
  out.require(ratio_ok, fmt::format("95%: masked-dense std < per-neuron std / 10 on every seed (means {:.3g} vs {:.3g})",
                                    mean(md), mean(pn)));
  // The band applies to the seed mean, the quantity plotted per sparsity level.
  auto band = [&](const char* name, const std::vector<double>& v) {
    const double m = mean(v);
    out.require(m >= 0.5 && m <= 2.0,
                fmt::format("95%: {} std, mean over seeds {:.3f} in [0.5, 2] (seeds {:.3f}..{:.3f})", name, m,
                            *std::min_element(v.begin(), v.end()), *std::max_element(v.begin(), v.end())));
  };
  band("per-neuron", pn);
  band("layer-scaled", ls);

  std::vector<double> dense_means;
  for (const auto& s : schemes) dense_means.push_back(mean(out_std[{0.0, s}]));
  const double lo = *std::min_element(dense_means.begin(), dense_means.end());
  const double hi = *std::max_element(dense_means.begin(), dense_means.end());
  out.require(hi <= 1.1 * lo, fmt::format("0%: schemes agree within 10% ({:.4g}..{:.4g})", lo, hi));
  return out;
}

// ---- MNIST runs ----------------------------------------------------------------

constexpr std::size_t kDeskEpochs = 3;

const Dataset& mnist() {
  static const Dataset data = [] {
    TrainConfig cfg;
    return load_dataset(cfg);
  }();
  return data;
}

Outcome criterion_init_accuracy() {
  Outcome out;
  RecipeOptions o = recipe_defaults("table1-init");
  attach_log(o);
  o.base.epochs = kDeskEpochs;
  o.seeds = 5;
  o.inits = {"masked-dense", "per-neuron"};
  o.methods = {"static"};
  const Table1Result r = run_table1(o, mnist());
  auto pct = [](std::vector<double> v) {
    for (double& x : v) x *= 100.0;
    return v;
  };
  const auto md = pct(r.find("masked-dense", "static")->accuracy);
  const auto pn = pct(r.find("per-neuron", "static")->accuracy);
  out.require(mean(pn) - mean(md) >= 1.0,
              fmt::format("mean accuracy per-neuron {:.2f} - masked-dense {:.2f} = {:.2f} >= 1.0 points", mean(pn), mean(md),
                          mean(pn) - mean(md)));
  out.require(sample_sd(pn) < sample_sd(md),
              fmt::format("seed std per-neuron {:.3f} < masked-dense {:.3f}", sample_sd(pn), sample_sd(md)));
  out.note(fmt::format("{} epochs, 5 seeds, 95% ERK sparsity, {}", kDeskEpochs, o.base.model));
  return out;
}

Outcome criterion_deltas() {
  Outcome out;
  RecipeOptions o = recipe_defaults("fig4-dst-delta");
  attach_log(o);
  o.base.epochs = kDeskEpochs;
  o.seeds = 2;
  const DeltaResult r = run_fig4(o, mnist());

  // Pair updates of different methods by (seed, step); only the first half counts.
  std::map<std::string, std::map<std::pair<std::uint64_t, std::uint64_t>, double>> delta;
  std::size_t min_updates = SIZE_MAX;
  for (const auto& s : r.series) {
    std::size_t n = 0;
    for (const auto& d : s.deltas)
      if (2 * d.step < s.total_steps) {
        delta[s.method][{s.seed, d.step}] = d.delta;
        ++n;
      }
    min_updates = std::min(min_updates, n);
  }
  out.require(min_updates >= 20, fmt::format("{} mask updates in the first half of every run (>= 20)", min_updates));
  auto values = [](const std::map<std::pair<std::uint64_t, std::uint64_t>, double>& m) {
    std::vector<double> v;
    for (const auto& [k, d] : m) v.push_back(d);
    return v;
  };
  const double rigl = mean(values(delta["rigl"]));
  for (const std::string other : {"set", "rigl-inverted"}) {
    std::size_t wins = 0, losses = 0;
    for (const auto& [key, d] : delta["rigl"]) {
      const auto it = delta[other].find(key);
      if (it == delta[other].end()) continue;
      wins += d > it->second;
      losses += d < it->second;
    }
    const double p = sign_test_p(wins, losses);
    const double m = mean(values(delta[other]));
    out.require(rigl > m && p < 0.05, fmt::format("mean delta rigl {:.4g} > {} {:.4g}, sign test {}/{} p = {:.3g}", rigl, other,
                                                  m, wins, wins + losses, p));
  }

  // A no-op update: zero drop fraction, and an update that touches nothing.
  TrainConfig cfg = o.base;
  MaskedNetwork net = prepare_network(cfg);
  const auto idx = batch_indices(cfg, mnist().train_size(), 100);
  const Tensor xb = gather_rows(mnist().train_x, idx);
  std::vector<int> yb;
  for (std::size_t i : idx) yb.push_back(mnist().train_y[i]);
  const GradientVector g = dense_gradient(net, xb, yb);
  Rng rng = make_rng(0, {kStreamDst});
  const FlowDelta zero = mask_update_delta(net, xb, yb, [&](MaskedNetwork& n) {
    return dst_update_fraction(n, g, DstMethod::Rigl, 0.0, rng);
  });
  const FlowDelta none = mask_update_delta(net, xb, yb, [](MaskedNetwork&) { return UpdateReport{}; });
  out.require(zero.delta == 0.0 && none.delta == 0.0,
              fmt::format("no-op update delta exactly 0 (alpha = 0: {}, empty update: {})", zero.delta, none.delta));
  return out;
}

Outcome criterion_dst_accuracy() {
  Outcome out;
  RecipeOptions o = recipe_defaults("table1-init");
  attach_log(o);
  o.base.epochs = kDeskEpochs;
  o.seeds = 5;
  o.inits = {"per-neuron"};
  o.methods = {"static", "set", "rigl"};
  const Table1Result r = run_table1(o, mnist());
  auto acc = [&](const char* m) { return 100.0 * mean(r.find("per-neuron", m)->accuracy); };
  const double st = acc("static"), set = acc("set"), rigl = acc("rigl");
  out.require(rigl >= set - 0.2, fmt::format("rigl {:.2f} >= set {:.2f} (0.2 point tie allowance)", rigl, set));
  out.require(set >= st, fmt::format("set {:.2f} >= static {:.2f}", set, st));
  out.note(fmt::format("{} epochs, 5 seeds, per-neuron init, 95% ERK sparsity", kDeskEpochs));
  return out;
}

Outcome criterion_lottery() {
  Outcome out;
  RecipeOptions o = recipe_defaults("lottery-suite");
  attach_log(o);
  o.base.epochs = 5;
  o.seeds = 5;
  o.rewind_k = 0;
  const LotteryResult r = run_lottery(o, mnist());
  const auto& lt = r.lt;
  const auto& sc = r.scratch;
  out.require(mean(lt.d_start) < mean(sc.d_start) && mean(lt.d_end) < mean(sc.d_end),
              fmt::format("distance to pruned solution LT < scratch: start {:.2f} < {:.2f}, end {:.2f} < {:.2f}",
                          mean(lt.d_start), mean(sc.d_start), mean(lt.d_end), mean(sc.d_end)));

  const double margin = 0.05 * r.loss_range;
  auto excess = [](const std::vector<InterpolationPoint>& path) {
    double top = -INFINITY;
    for (const auto& p : path) top = std::max(top, p.loss);
    return top - std::max(path.front().loss, path.back().loss);
  };
  double lt_worst = -INFINITY, sc_least = INFINITY;
  for (const auto& p : lt.solution_paths) lt_worst = std::max(lt_worst, excess(p));
  for (const auto& p : sc.solution_paths) sc_least = std::min(sc_least, excess(p));
  out.require(lt_worst <= margin, fmt::format("LT solution path rises {:.3g} above its endpoints <= margin {:.3g} (5% of loss range {:.3g})",
                                              lt_worst, margin, r.loss_range));
  out.require(sc_least >= 3.0 * margin, fmt::format("scratch solution path rises {:.3g} >= 3 x margin {:.3g}", sc_least, 3.0 * margin));

  const double lt_dis = mean(lt.similarity.disagreement_with_pruned);
  const double sc_dis = mean(sc.similarity.disagreement_with_pruned);
  out.require(lt_dis < sc_dis, fmt::format("disagreement with pruned LT {:.4f} < scratch {:.4f}", lt_dis, sc_dis));
  const double lt_gain = lt.similarity.ensemble_accuracy - lt.mean_accuracy;
  const double sc_gain = sc.similarity.ensemble_accuracy - sc.mean_accuracy;
  out.require(sc_gain > lt_gain, fmt::format("ensemble gain scratch {:.4f} > LT {:.4f}", sc_gain, lt_gain));
  out.note(fmt::format("{} epochs, {} seeds, K = 0", o.base.epochs, o.seeds));
  return out;
}

Outcome criterion_hessian() {
  Outcome out;
  RecipeOptions o = recipe_defaults("hessian-suite");
  attach_log(o);
  const Dataset data = load_dataset(o.base);
  const HessianResult r = run_hessian(o, data);
  out.require(r.max_symmetry_defect <= 1e-7,
              fmt::format("max symmetry defect {:.3g} <= 1e-7 ({} active coordinates)", r.max_symmetry_defect, r.active_coordinates));

  // Eigenvalues against a long-double Jacobi solver on a partly trained network.
  TrainConfig cfg = o.base;
  const RunArtifacts warm = train_network(prepare_network(cfg), {}, cfg, data, steps_per_epoch(cfg, data.train_size()) * 3);
  const std::size_t n = std::min(o.hessian_samples, data.train_size());
  const std::vector<int> hy(data.train_y.begin(), data.train_y.begin() + static_cast<std::ptrdiff_t>(n));
  const MatrixRM h = full_hessian(warm.final_net, slice_rows(data.train_x, 0, n), hy);
  std::vector<std::vector<oracle::Real>> ref(static_cast<std::size_t>(h.rows()),
                                             std::vector<oracle::Real>(static_cast<std::size_t>(h.cols())));
  for (Eigen::Index i = 0; i < h.rows(); ++i)
    for (Eigen::Index j = 0; j < h.cols(); ++j)
      ref[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = 0.5L * (static_cast<oracle::Real>(h(i, j)) + h(j, i));
  const auto expect = oracle::jacobi_eigenvalues(ref);
  const SpectrumEstimate s = spectrum(h);
  double worst = 0.0;
  for (std::size_t i = 0; i < expect.size(); ++i)
    worst = std::max(worst, std::abs(s.eigenvalues[i] - static_cast<double>(expect[i])));
  out.require(worst <= 1e-8, fmt::format("eigenvalues vs Jacobi max abs difference {:.3g} <= 1e-8 ({} x {})", worst, h.rows(), h.cols()));
  out.require(std::abs(s.integral() - 1.0) <= 0.01, fmt::format("spectral density integral {:.5f} within 1% of 1", s.integral()));

  std::size_t nondecrease = 0;
  std::vector<double> rigl, set;
  for (const auto& u : r.updates) {
    nondecrease += u.after_rigl >= u.before;
    rigl.push_back(u.after_rigl - u.before);
    set.push_back(u.after_set - u.before);
  }
  const double frac = r.updates.empty() ? 0.0 : static_cast<double>(nondecrease) / static_cast<double>(r.updates.size());
  out.require(r.updates.size() >= 20 && frac >= 0.7,
              fmt::format("RigL keeps or grows the negative-eigenvalue magnitude on {}/{} constructed updates (>= 70%)",
                          nondecrease, r.updates.size()));
  out.require(mean(rigl) > mean(set), fmt::format("mean magnitude change rigl {:.4g} > set {:.4g}", mean(rigl), mean(set)));
  return out;
}

// ---- 9: metric identities --------------------------------------------------------

Outcome criterion_metrics() {
  Outcome out;
  std::mt19937_64 gen(9);
  auto distributions = [&](int rows, int cols) {
    std::gamma_distribution<double> g(0.7);
    MatrixRM p(rows, cols);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) p(r, c) = g(gen) + 1e-12;
      p.row(r) /= p.row(r).sum();
    }
    return p;
  };

  double kl_self = 0.0, jsd_excess = -INFINITY;
  for (int t = 0; t < 200; ++t) {
    const int classes = 2 + static_cast<int>(gen() % 9);
    const MatrixRM p = distributions(1 + static_cast<int>(gen() % 20), classes);
    kl_self = std::max(kl_self, std::abs(kl_divergence(p, p).total));
    const int models = 2 + static_cast<int>(gen() % 6);
    std::vector<MatrixRM> ms;
    for (int m = 0; m < models; ++m) ms.push_back(distributions(static_cast<int>(p.rows()), classes));
    std::vector<const MatrixRM*> ptrs;
    for (const auto& m : ms) ptrs.push_back(&m);
    jsd_excess = std::max(jsd_excess, jensen_shannon(ptrs).per_example - std::log(static_cast<double>(models)));
  }
  out.require(kl_self == 0.0, fmt::format("KL(p||p) = {} on 200 fuzzed inputs", kl_self));
  out.require(jsd_excess <= 1e-12, fmt::format("JSD - ln(n) <= {:.3g} (<= 0) on 200 fuzzed model sets", jsd_excess));

  std::size_t violations = 0;
  std::uniform_int_distribution<int> label(0, 9);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + gen() % 100;
    std::vector<int> a(n), b(n), c(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = label(gen);
      b[i] = gen() % 2 ? a[i] : label(gen);
      c[i] = gen() % 2 ? b[i] : label(gen);
    }
    const double ab = disagreement(a, b), ba = disagreement(b, a), bc = disagreement(b, c), ac = disagreement(a, c);
    violations += disagreement(a, a) != 0.0 || ab != ba || ac > ab + bc + 1e-15 || ab < 0.0 || ab > 1.0;
  }
  out.require(violations == 0, fmt::format("disagreement pseudometric axioms hold on 1000 fuzzed triples ({} violations)", violations));

  MatrixRM pts(10, 2);
  std::normal_distribution<double> nd(0.0, 2.0);
  for (int i = 0; i < 10; ++i) pts(i, 0) = nd(gen), pts(i, 1) = nd(gen);
  MatrixRM d(10, 10);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) d(i, j) = (pts.row(i) - pts.row(j)).norm();
  const MdsResult m = mds_embed(d, 2);
  const double mds_err = (m.embedded - d).cwiseAbs().maxCoeff();
  out.require(mds_err <= 1e-6, fmt::format("MDS of 10 planar points reproduces distances to {:.3g} (<= 1e-6)", mds_err));

  const NetworkSpec spec = mlp_spec({6, 8, 3}, Activation::Relu, true);
  const MaskedNetwork a = oracle::random_network(spec, 0.5, 1);
  MaskedNetwork b = a;
  std::vector<double> flat = b.flatten();
  for (double& v : flat) v = v * 1.7 - 0.3;
  b.assign(flat);
  b.apply_masks();
  const Tensor x = oracle::random_batch(spec, 20, 2);
  const auto y = oracle::random_labels(20, 3, 2);
  const auto path = interpolate_loss(a, b, alpha_grid(21), x, y);
  const bool exact = path.front().loss == evaluate(a, x, y).loss && path.back().loss == evaluate(b, x, y).loss &&
                     path.front().alpha == 0.0 && path.back().alpha == 1.0;
  out.require(exact, "interpolation endpoints evaluate exactly to the endpoint networks");
  return out;
}

// ---- 10: determinism -------------------------------------------------------------

std::map<std::string, std::string> output_files(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_text(e.path());
  return out;
}

Outcome criterion_determinism() {
  Outcome out;
  const std::map<std::string, std::vector<std::string>> overrides{
      {"fig1c-signal", {"sparsities=[0.0, 0.9]", "probe_samples=64", "seeds=2"}},
      {"fig3-gradflow", {"train_subset=2000", "test_subset=500", "epochs=1", "seeds=1", "log_every=4"}},
      {"fig4-dst-delta", {"train_subset=2000", "test_subset=500", "epochs=1", "seeds=1", "dst.frequency=4"}},
      {"table1-init", {"train_subset=2000", "test_subset=500", "epochs=1", "seeds=1"}},
      {"lottery-suite", {"train_subset=2000", "test_subset=500", "epochs=2", "seeds=2"}},
      {"hessian-suite", {"train_subset=300", "test_subset=300", "epochs=2", "hessian_samples=200", "constructed_updates=3"}},
  };
  const fs::path root = fs::temp_directory_path() / "sparselab_acceptance_determinism";
  for (const std::string& name : recipe_names()) {
    std::vector<std::map<std::string, std::string>> files;
    for (int rep = 0; rep < 2; ++rep) {
      RecipeOptions o = recipe_defaults(name);
      attach_log(o);
      for (const auto& a : overrides.at(name)) apply_recipe_override(o, a);
      o.out_dir = root / fmt::format("{}-{}", name, rep);
      fs::remove_all(o.out_dir);
      run_experiment(name, o);
      files.push_back(output_files(o.out_dir));
    }
    std::size_t csvs = 0;
    for (const auto& [f, bytes] : files[0]) csvs += f.ends_with(".csv");
    std::vector<std::string> differ;
    for (const auto& [f, bytes] : files[0]) {
      const auto it = files[1].find(f);
      if (it == files[1].end() || it->second != bytes) differ.push_back(f);
    }
    out.require(csvs > 0 && differ.empty() && files[0].size() == files[1].size(),
                fmt::format("{}: {} files ({} CSV) byte-identical on rerun{}", name, files[0].size(), csvs,
                            differ.empty() ? "" : " except " + differ.front()));
  }
  fs::remove_all(root);
  return out;
}

struct Criterion {
  int id;
  const char* title;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparselab acceptance suite"};
  std::vector<int> selected;
  std::string data;
  app.add_option("-c,--criterion", selected, "criterion number (repeatable); default all")->check(CLI::Range(1, 10));
  app.add_option("--data", data, "MNIST directory (default $SPARSELAB_DATA)");
  app.add_flag("-v,--verbose", g_verbose, "log run progress to stderr");
  CLI11_PARSE(app, argc, argv);
  if (!data.empty()) setenv("SPARSELAB_DATA", data.c_str(), 1);

  const std::vector<Criterion> criteria{
      {1, "gradient and Hessian correctness", criterion_gradients},
      {2, "initialization variance", criterion_init_variance},
      {3, "signal propagation at 95% sparsity", criterion_signal},
      {4, "per-neuron init beats masked-dense init", criterion_init_accuracy},
      {5, "gradient-flow change of mask updates", criterion_deltas},
      {6, "dynamic sparse training ordering", criterion_dst_accuracy},
      {7, "lottery ticket basin", criterion_lottery},
      {8, "Hessian spectrum", criterion_hessian},
      {9, "metric identities", criterion_metrics},
      {10, "recipe determinism", criterion_determinism},
  };
  const std::set<int> want(selected.begin(), selected.end());
  int failed = 0;
  for (const auto& c : criteria) {
    if (!want.empty() && !want.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.notes = {fmt::format("error: {}", e.what())};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::string detail;
    for (const auto& n : o.notes) detail += (detail.empty() ? "" : "; ") + n;
    std::cout << fmt::format("[{}] {} {}: {} ({:.0f} s)", o.pass ? "PASS" : "FAIL", c.id, c.title, detail, secs) << std::endl;
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
