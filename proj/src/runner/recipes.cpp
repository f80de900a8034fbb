#include "sparselab/recipes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Core>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <json.hpp>

#include "sparselab/csv.hpp"
#include "sparselab/error.hpp"
#include "sparselab/plot.hpp"

namespace sparselab {

namespace {

constexpr const char* kVersion = "1.0.0";

void say(const RecipeOptions& o, const std::string& msg) {
  if (o.log) o.log(msg);
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::string t = s;
  t.erase(std::remove_if(t.begin(), t.end(), [](char c) { return c == '[' || c == ']' || c == '"' || c == ' '; }),
          t.end());
  std::vector<std::string> out;
  std::stringstream ss(t);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::uint64_t parse_count(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const unsigned long long x = std::stoull(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw ConfigError(fmt::format("{}: expected a non-negative integer, got '{}'", key, v));
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw ConfigError(fmt::format("{}: expected a number, got '{}'", key, v));
}

/// Weight decay of the table-1 setups: per-neuron/layer-scaled runs use the
/// larger value, masked-dense the smaller one.
double init_weight_decay(const InitScheme& s) { return s.family == InitFamily::MaskedDense ? 1e-5 : 2e-4; }

TrainConfig with_seed(TrainConfig c, std::uint64_t seed) {
  c.seed = seed;
  return c;
}

/// Splits a method label into (dst method, static init override).
struct RunSpec {
  std::string label;
  TrainConfig cfg;
};

RunSpec run_spec(const TrainConfig& base, const std::string& label) {
  RunSpec r{label, base};
  TrainConfig& c = r.cfg;
  if (label == "dense") {
    c.sparsity = 0.0;
    c.dst.method = DstMethod::None;
  } else if (label == "static" || label == "none") {
    c.dst.method = DstMethod::None;
  } else if (label.rfind("static-", 0) == 0) {
    c.dst.method = DstMethod::None;
    c.init = InitScheme::parse(label.substr(7));
  } else if (label == "prune") {
    const double target = c.sparsity > 0.0 ? c.sparsity : 0.95;
    c.sparsity = 0.0;
    c.dst.method = DstMethod::None;
    c.prune.target = target;
  } else {
    c.dst.method = parse_dst_method(label);
  }
  return r;
}

/// Pruning window when not given explicitly: from 25.6% to 59.7% of the run,
/// pruning every total/117 steps.
void default_prune_window(TrainConfig& c, std::uint64_t total) {
  if (!c.prune.enabled() || c.prune.t_end != 0) return;
  c.prune.t_start = static_cast<std::uint64_t>(std::llround(0.256 * static_cast<double>(total)));
  c.prune.t_end = std::max(c.prune.t_start + 1, static_cast<std::uint64_t>(std::llround(0.597 * static_cast<double>(total))));
  c.prune.frequency = std::max<std::uint64_t>(1, total / 117);
}

}  // namespace

std::vector<std::string> recipe_names() {
  return {"fig1c-signal", "fig3-gradflow", "fig4-dst-delta", "table1-init", "lottery-suite", "hessian-suite"};
}

RecipeOptions recipe_defaults(const std::string& name) {
  RecipeOptions o;
  TrainConfig& c = o.base;
  // Shared schedule: 30 epochs, batch 128, lr 0.1 cosine, momentum 0.9.
  c.epochs = 30;
  c.batch_size = 128;
  c.lr = 0.1;
  c.lr_schedule = LrScheduleKind::Cosine;
  c.momentum = 0.9;
  c.init = InitScheme::parse("per-neuron");
  c.dst.alpha0 = 0.3;
  c.dst.frequency = 100;
  c.dst.schedule = DropSchedule::LrCoupled;

  if (name == "fig1c-signal") {
    c.model = "lenet5";
  } else if (name == "fig3-gradflow") {
    c.model = "mlp-784-300-100-10";
    c.sparsity = 0.95;
    c.distribution = DistributionKind::Erk;
    c.weight_decay = 2e-4;
    o.methods = {"dense", "static-masked-dense", "static-per-neuron", "set", "rigl", "prune"};
  } else if (name == "fig4-dst-delta") {
    c.model = "mlp-784-300-300-300-300-100-10";
    c.sparsity = 0.95;
    c.distribution = DistributionKind::Erk;
    c.weight_decay = 2e-4;
    c.measure_deltas = true;
    c.dst.frequency = 25;
    o.methods = {"rigl", "set", "rigl-inverted"};
  } else if (name == "table1-init") {
    c.model = "mlp-784-300-300-300-300-100-10";
    c.sparsity = 0.95;
    c.distribution = DistributionKind::Erk;
    o.inits = {"masked-dense", "layer-scaled", "per-neuron"};
    o.methods = {"static", "set", "rigl"};
  } else if (name == "lottery-suite") {
    c.model = "mlp-784-300-100-10";
    c.weight_decay = 0.0;
    c.sparsity = 0.95;  // pruning target
    c.prune.scope = PruneScope::Global;
    c.init = InitScheme::parse("masked-dense");  // dense run: plain He init
  } else if (name == "hessian-suite") {
    c.model = "mlp-bias-49-24-10";
    c.downsample = 4;
    c.train_subset = 1000;
    c.test_subset = 1000;
    c.epochs = 30;
    c.batch_size = 100;
    c.sparsity = 0.8;
    c.dst.frequency = 10;
    o.seeds = 1;
    o.methods = {"rigl", "set"};
  } else {
    throw ConfigError(fmt::format("unknown recipe '{}' (known: {})", name, fmt::join(recipe_names(), ", ")));
  }
  return o;
}

void apply_recipe_override(RecipeOptions& o, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError(fmt::format("override '{}' is not key=value", assignment));
  const std::string key = assignment.substr(0, eq), value = assignment.substr(eq + 1);
  if (key == "seeds") o.seeds = parse_count(key, value);
  else if (key == "sparsities") {
    o.sparsities.clear();
    for (const auto& s : split_list(value)) o.sparsities.push_back(parse_real(key, s));
  } else if (key == "schemes") o.schemes = split_list(value);
  else if (key == "methods") o.methods = split_list(value);
  else if (key == "inits") o.inits = split_list(value);
  else if (key == "k") o.rewind_k = parse_count(key, value);
  else if (key == "alpha_points") o.alpha_points = parse_count(key, value);
  else if (key == "interpolation_split") {
    if (value != "train" && value != "test") throw ConfigError("interpolation_split must be train or test");
    o.interpolation_split = value;
  } else if (key == "scratch_init") o.scratch_init = InitScheme::parse(value).name();
  else if (key == "probe_samples") o.probe_samples = parse_count(key, value);
  else if (key == "hessian_samples") o.hessian_samples = parse_count(key, value);
  else if (key == "constructed_updates") o.constructed_updates = parse_count(key, value);
  else if (key == "hessian_drop_fraction") o.hessian_drop_fraction = parse_real(key, value);
  else apply_override(o.base, assignment);
}

double sign_test_p(std::size_t wins, std::size_t losses) {
  const std::size_t n = wins + losses;
  if (n == 0) return 1.0;
  // log-space binomial tail
  double p = 0.0;
  for (std::size_t j = wins; j <= n; ++j) {
    const double lc = std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(j) + 1) -
                      std::lgamma(static_cast<double>(n - j) + 1);
    p += std::exp(lc - static_cast<double>(n) * std::log(2.0));
  }
  return std::min(1.0, p);
}

const AccuracyCell* Table1Result::find(const std::string& init, const std::string& method) const {
  for (const auto& c : cells)
    if (c.init == init && c.method == method) return &c;
  return nullptr;
}

// ---- fig1c ------------------------------------------------------------------

SignalResult run_fig1c(const RecipeOptions& o) {
  ProbeSweep sweep;
  sweep.sparsities = o.sparsities;
  for (const auto& s : o.schemes) sweep.schemes.push_back(InitScheme::parse(s));
  sweep.seeds = o.seeds;
  sweep.base_seed = o.base.seed;
  sweep.n_samples = o.probe_samples;
  sweep.distribution = o.base.distribution;
  say(o, fmt::format("signal probe: {} sparsities x {} schemes x {} seeds", sweep.sparsities.size(),
                     sweep.schemes.size(), sweep.seeds));
  return {sweep_sparsity_probe(model_spec(o.base.model), sweep)};
}

// ---- fig3 -------------------------------------------------------------------

std::vector<GradFlowRun> run_fig3(const RecipeOptions& o, const Dataset& data) {
  std::vector<GradFlowRun> out;
  const std::uint64_t total = total_steps(o.base, data.train_size());
  for (const std::string& m : o.methods) {
    for (std::size_t s = 0; s < o.seeds; ++s) {
      RunSpec r = run_spec(with_seed(o.base, o.base.seed + s), m);
      if (r.cfg.log_every == 0) r.cfg.log_every = std::max<std::uint64_t>(1, total / 50);
      default_prune_window(r.cfg, total);
      say(o, fmt::format("gradient flow: {} seed {}", m, r.cfg.seed));
      RunArtifacts a = train(r.cfg, data);
      out.push_back({m, r.cfg.seed, std::move(a.grad_flow)});
    }
  }
  return out;
}

// ---- fig4 -------------------------------------------------------------------

DeltaResult run_fig4(const RecipeOptions& o, const Dataset& data) {
  DeltaResult res;
  const std::uint64_t total = total_steps(o.base, data.train_size());
  for (const std::string& m : o.methods) {
    for (std::size_t s = 0; s < o.seeds; ++s) {
      RunSpec r = run_spec(with_seed(o.base, o.base.seed + s), m);
      r.cfg.measure_deltas = true;
      say(o, fmt::format("mask-update deltas: {} seed {}", m, r.cfg.seed));
      RunArtifacts a = train(r.cfg, data);
      res.series.push_back({m, r.cfg.seed, std::move(a.deltas), total});
    }
  }
  return res;
}

// ---- table1 -----------------------------------------------------------------

Table1Result run_table1(const RecipeOptions& o, const Dataset& data) {
  Table1Result res;
  for (const std::string& init : o.inits) {
    const InitScheme scheme = InitScheme::parse(init);
    for (const std::string& m : o.methods) {
      AccuracyCell cell{scheme.name(), m, {}, {}};
      for (std::size_t s = 0; s < o.seeds; ++s) {
        RunSpec r = run_spec(with_seed(o.base, o.base.seed + s), m);
        r.cfg.init = scheme;
        // Weight decay follows the init unless set explicitly.
        if (o.base.weight_decay == 0.0) r.cfg.weight_decay = init_weight_decay(scheme);
        say(o, fmt::format("init comparison: init {} method {} seed {}", cell.init, m, r.cfg.seed));
        const RunArtifacts a = train(r.cfg, data);
        cell.accuracy.push_back(a.test_accuracy);
        cell.loss.push_back(a.test_loss);
      }
      res.cells.push_back(std::move(cell));
    }
  }
  return res;
}

// ---- lottery ----------------------------------------------------------------

LotteryResult run_lottery(const RecipeOptions& o, const Dataset& data) {
  LotteryResult res;
  const std::uint64_t total = total_steps(o.base, data.train_size());

  TrainConfig dense = o.base;
  dense.prune.target = o.base.sparsity;
  dense.sparsity = 0.0;
  dense.dst.method = DstMethod::None;
  default_prune_window(dense, total);
  dense.checkpoint_steps = {0, o.rewind_k};
  say(o, fmt::format("lottery: dense run pruned to {} (steps {}..{} every {})", dense.prune.target,
                     dense.prune.t_start, dense.prune.t_end, dense.prune.frequency));
  RunArtifacts pruning = train(dense, data);
  const LotteryState lottery = extract_lottery(pruning.checkpoints, pruning.final_net, o.rewind_k);
  res.pruned_accuracy = pruning.test_accuracy;
  res.pruned_loss = pruning.test_loss;

  const bool on_train = o.interpolation_split == "train";
  const Tensor& ix = on_train ? data.train_x : data.test_x;
  const std::vector<int>& iy = on_train ? data.train_y : data.test_y;
  const std::vector<double> grid = alpha_grid(o.alpha_points);

  const ParamPoint pruned_pt = make_point(lottery.pruned_solution, "pruned-soln", o.base.seed);
  const ModelOutputs pruned_out = model_outputs(lottery.pruned_solution, data.test_x, data.test_y);

  std::vector<ParamPoint> points{pruned_pt};
  TrainConfig retrain = o.base;
  retrain.sparsity = 0.0;  // masks come from the ticket
  retrain.prune = PruneConfig{};
  retrain.dst.method = DstMethod::None;
  retrain.checkpoint_steps.clear();

  auto run_group = [&](bool is_lt, GroupSimilarity& g) {
    std::vector<ModelOutputs> outs;
    const std::string prefix = is_lt ? "lt" : "scratch";
    for (std::size_t s = 0; s < o.seeds; ++s) {
      const std::uint64_t seed = o.base.seed + 1 + s;
      MaskedNetwork init_net;
      if (is_lt) {
        init_net = lottery.ticket;
      } else {
        Rng rng = make_rng(seed, {kStreamInit});
        init_net = make_scratch(lottery.pruned_solution, InitScheme::parse(o.scratch_init), rng);
      }
      init_net.step = 0;
      say(o, fmt::format("lottery: {} retrain seed {}", prefix, seed));
      RunArtifacts run = train_network(init_net, {}, with_seed(retrain, seed), data);
      const ParamPoint ip = make_point(init_net, prefix + "-init", seed);
      const ParamPoint sp = make_point(run.final_net, prefix + "-soln", seed);
      g.d_start.push_back(l2_distance(ip, pruned_pt));
      g.d_end.push_back(l2_distance(sp, pruned_pt));
      g.solution_paths.push_back(interpolate_loss(run.final_net, lottery.pruned_solution, grid, ix, iy));
      g.init_paths.push_back(interpolate_loss(init_net, lottery.pruned_solution, grid, ix, iy));
      // With K = 0 every ticket starts from the same point; embed it once.
      if (!is_lt || s == 0) points.push_back(ip);
      points.push_back(sp);
      outs.push_back(model_outputs(run.final_net, data.test_x, data.test_y));
    }
    g.similarity = compare_models(outs, &pruned_out, data.test_y);
    g.mean_accuracy = mean(g.similarity.accuracy);
  };
  run_group(true, res.lt);
  run_group(false, res.scratch);

  double lo = INFINITY, hi = -INFINITY;
  for (const GroupSimilarity* g : {&res.lt, &res.scratch}) {
    for (const auto* paths : {&g->solution_paths, &g->init_paths})
      for (const auto& path : *paths)
        for (const auto& p : path) {
          lo = std::min(lo, p.loss);
          hi = std::max(hi, p.loss);
        }
  }
  res.loss_range = hi - lo;
  res.mds = mds_embed(points, 2);
  for (const auto& p : points) res.mds_labels.push_back(fmt::format("{}:{}", p.label, p.seed));
  return res;
}

// ---- hessian ----------------------------------------------------------------

HessianResult run_hessian(const RecipeOptions& o, const Dataset& data) {
  HessianResult res;
  const std::size_t n = std::min(o.hessian_samples, data.train_size());
  const Tensor hx = slice_rows(data.train_x, 0, n);
  const std::vector<int> hy(data.train_y.begin(), data.train_y.begin() + static_cast<std::ptrdiff_t>(n));
  const std::uint64_t total = total_steps(o.base, data.train_size());

  auto magnitude = [&](const MaskedNetwork& net) {
    const MatrixRM h = full_hessian(net, hx, hy);
    res.max_symmetry_defect = std::max(res.max_symmetry_defect, symmetry_defect(h));
    return largest_negative_magnitude(symmetric_eigenvalues(h));
  };

  const std::size_t points = std::max<std::size_t>(o.constructed_updates, 1);
  std::vector<std::uint64_t> steps;
  for (std::size_t i = 0; i < points; ++i) steps.push_back(total * (i + 1) / (points + 1));

  for (const std::string& m : o.methods) {
    for (std::size_t s = 0; s < o.seeds; ++s) {
      RunSpec r = run_spec(with_seed(o.base, o.base.seed + s), m);
      r.cfg.checkpoint_steps = steps;
      say(o, fmt::format("hessian: training {} seed {}", m, r.cfg.seed));
      RunArtifacts a = train(r.cfg, data);
      std::vector<EigenTrackPoint> track;
      for (const auto& [step, net] : a.checkpoints) {
        track.push_back({step, magnitude(net)});
        res.active_coordinates = net.active_coordinates().size();
      }
      res.tracks.emplace_back(fmt::format("{}:{}", m, r.cfg.seed), std::move(track));

      // Constructed updates: from each checkpoint of the RigL run, apply one
      // RigL and one SET update to copies and compare the spectra.
      if (r.cfg.dst.method != DstMethod::Rigl) continue;
      for (const auto& [step, net] : a.checkpoints) {
        if (res.updates.size() >= o.constructed_updates) break;
        const std::vector<std::size_t> idx = batch_indices(r.cfg, data.train_size(), step);
        const Tensor xb = gather_rows(data.train_x, idx);
        std::vector<int> yb;
        for (std::size_t i : idx) yb.push_back(data.train_y[i]);
        const GradientVector g = dense_gradient(net, xb, yb);
        ConstructedUpdate u{step, magnitude(net), 0.0, 0.0};
        MaskedNetwork rigl = net, set = net;
        Rng rng_r = make_rng(r.cfg.seed, {kStreamDst, step});
        dst_update_fraction(rigl, g, DstMethod::Rigl, o.hessian_drop_fraction, rng_r);
        Rng rng_s = make_rng(r.cfg.seed, {kStreamDst, step});
        dst_update_fraction(set, g, DstMethod::Set, o.hessian_drop_fraction, rng_s);
        u.after_rigl = magnitude(rigl);
        u.after_set = magnitude(set);
        say(o, fmt::format("hessian: update at step {}: before {:.4g} rigl {:.4g} set {:.4g}", step, u.before,
                           u.after_rigl, u.after_set));
        res.updates.push_back(u);
      }
    }
  }
  return res;
}

// ---- output -----------------------------------------------------------------

namespace {

std::vector<std::string> write_fig1c(const std::filesystem::path& dir, const SignalResult& r) {
  CsvTable t({"sparsity", "scheme", "seed", "layer_index", "std"});
  for (const auto& p : r.records) t.add(p.sparsity, p.scheme, p.seed, p.layer_index, p.std);
  t.write(dir / "signal.csv");

  std::size_t last = 0;
  for (const auto& p : r.records) last = std::max(last, p.layer_index);
  std::vector<std::pair<double, std::string>> keys;
  for (const auto& p : r.records)
    if (std::find(keys.begin(), keys.end(), std::make_pair(p.sparsity, p.scheme)) == keys.end())
      keys.emplace_back(p.sparsity, p.scheme);
  CsvTable s({"sparsity", "scheme", "seeds", "mean_output_std", "sd_output_std"});
  for (const auto& [sp, scheme] : keys) {
    std::vector<double> v;
    for (const auto& p : r.records)
      if (p.sparsity == sp && p.scheme == scheme && p.layer_index == last) v.push_back(p.std);
    s.add(sp, scheme, v.size(), mean(v), stddev(v));
  }
  s.write(dir / "signal_summary.csv");

  PlotSpec plot{"signal.png", "Pre-softmax std at initialization", "sparsity", "std", "signal_summary.csv", true, {}};
  for (const auto& scheme : {"masked-dense", "layer-scaled", "per-neuron"})
    plot.series.push_back({scheme, "1:4:5", 2, scheme, "yerrorlines"});
  write_plot(dir, "signal.gp", plot);
  return {"signal.csv", "signal_summary.csv", "signal.gp"};
}

std::vector<std::string> write_fig3(const std::filesystem::path& dir, const std::vector<GradFlowRun>& runs) {
  CsvTable t({"run", "seed", "step", "grad_flow", "per_parameter", "tag"});
  std::vector<std::string> names;
  for (const auto& r : runs) {
    if (std::find(names.begin(), names.end(), r.run) == names.end()) names.push_back(r.run);
    for (const auto& g : r.records) t.add(r.run, r.seed, g.step, g.grad_flow, g.per_parameter, g.tag);
  }
  t.write(dir / "gradflow.csv");
  PlotSpec plot{"gradflow.png", "Gradient flow during training", "step", "grad flow", "gradflow.csv", true, {}};
  for (const auto& n : names) plot.series.push_back({n, "3:4", 1, n, "lines"});
  write_plot(dir, "gradflow.gp", plot);
  return {"gradflow.csv", "gradflow.gp"};
}

std::vector<std::string> write_fig4(const std::filesystem::path& dir, const DeltaResult& r) {
  CsvTable t({"method", "seed", "update_index", "step", "drop_fraction", "flow_before", "flow_after", "delta"});
  std::vector<std::string> names;
  for (const auto& s : r.series) {
    if (std::find(names.begin(), names.end(), s.method) == names.end()) names.push_back(s.method);
    for (std::size_t i = 0; i < s.deltas.size(); ++i) {
      const auto& d = s.deltas[i];
      t.add(s.method, s.seed, i, d.step, d.drop_fraction, d.before, d.after, d.delta);
    }
  }
  t.write(dir / "deltas.csv");
  CsvTable sum({"method", "seeds", "updates_first_half", "mean_delta_first_half", "mean_delta_all"});
  for (const auto& n : names) {
    std::vector<double> first, all;
    std::size_t seeds = 0;
    for (const auto& s : r.series) {
      if (s.method != n) continue;
      ++seeds;
      for (const auto& d : s.deltas) {
        all.push_back(d.delta);
        if (2 * d.step < s.total_steps) first.push_back(d.delta);
      }
    }
    sum.add(n, seeds, first.size(), mean(first), mean(all));
  }
  sum.write(dir / "deltas_summary.csv");
  PlotSpec plot{"deltas.png", "Gradient flow change at mask updates", "step", "delta", "deltas.csv", false, {}};
  for (const auto& n : names) plot.series.push_back({n, "4:8", 1, n, "points"});
  write_plot(dir, "deltas.gp", plot);
  return {"deltas.csv", "deltas_summary.csv", "deltas.gp"};
}

std::vector<std::string> write_table1(const std::filesystem::path& dir, const Table1Result& r) {
  CsvTable t({"init", "method", "seed_index", "test_accuracy", "test_loss"});
  CsvTable s({"init", "method", "seeds", "mean_accuracy", "sd_accuracy"});
  for (const auto& c : r.cells) {
    for (std::size_t i = 0; i < c.accuracy.size(); ++i) t.add(c.init, c.method, i, c.accuracy[i], c.loss[i]);
    s.add(c.init, c.method, c.accuracy.size(), mean(c.accuracy), stddev(c.accuracy));
  }
  t.write(dir / "results.csv");
  s.write(dir / "summary.csv");
  return {"results.csv", "summary.csv"};
}

std::vector<std::string> write_lottery(const std::filesystem::path& dir, const LotteryResult& r) {
  CsvTable dist({"group", "seed_index", "d_start", "d_end"});
  CsvTable interp({"group", "path", "seed_index", "alpha", "loss", "accuracy"});
  CsvTable sim({"group", "metric", "mean", "sd"});
  for (const auto& [name, g] : {std::pair<std::string, const GroupSimilarity*>{"lt", &r.lt}, {"scratch", &r.scratch}}) {
    for (std::size_t i = 0; i < g->d_start.size(); ++i) dist.add(name, i, g->d_start[i], g->d_end[i]);
    for (std::size_t i = 0; i < g->solution_paths.size(); ++i) {
      for (const auto& p : g->solution_paths[i]) interp.add(name, "solution", i, p.alpha, p.loss, p.accuracy);
      for (const auto& p : g->init_paths[i]) interp.add(name, "init", i, p.alpha, p.loss, p.accuracy);
    }
    const SimilarityReport& s = g->similarity;
    std::vector<double> pair_dis, pair_kl;
    for (Eigen::Index i = 0; i < s.disagreement.rows(); ++i)
      for (Eigen::Index j = 0; j < s.disagreement.cols(); ++j)
        if (i != j) {
          if (i < j) pair_dis.push_back(s.disagreement(i, j));
          pair_kl.push_back(s.kl(i, j));
        }
    sim.add(name, "pairwise_disagreement", mean(pair_dis), stddev(pair_dis));
    sim.add(name, "disagreement_with_pruned", mean(s.disagreement_with_pruned), stddev(s.disagreement_with_pruned));
    sim.add(name, "pairwise_kl", mean(pair_kl), stddev(pair_kl));
    sim.add(name, "kl_with_pruned", mean(s.kl_with_pruned), stddev(s.kl_with_pruned));
    sim.add(name, "jsd", s.jsd, 0.0);
    sim.add(name, "jsd_with_pruned", mean(s.jsd_with_pruned), stddev(s.jsd_with_pruned));
    sim.add(name, "test_accuracy", mean(s.accuracy), stddev(s.accuracy));
    sim.add(name, "ensemble_accuracy", s.ensemble_accuracy, 0.0);
    sim.add(name, "ensemble_gain", s.ensemble_accuracy - mean(s.accuracy), 0.0);
    sim.add(name, "floored_probabilities", static_cast<double>(s.floored), 0.0);
  }
  sim.add("pruned", "test_accuracy", r.pruned_accuracy, 0.0);
  sim.add("all", "loss_range", r.loss_range, 0.0);
  dist.write(dir / "distances.csv");
  interp.write(dir / "interpolation.csv");
  sim.write(dir / "similarity.csv");

  CsvTable mds({"label", "seed", "x", "y", "stress"});
  for (std::size_t i = 0; i < r.mds_labels.size(); ++i) {
    const auto colon = r.mds_labels[i].find(':');
    mds.add(r.mds_labels[i].substr(0, colon), r.mds_labels[i].substr(colon + 1),
            r.mds.coords(static_cast<Eigen::Index>(i), 0), r.mds.coords(static_cast<Eigen::Index>(i), 1), r.mds.stress);
  }
  mds.write(dir / "mds.csv");

  PlotSpec ip{"interpolation.png", "Loss along linear paths to the pruned solution", "alpha", "loss",
              "interpolation.csv", false, {}};
  ip.series.push_back({"lt", "4:5", 1, "lt", "points"});
  ip.series.push_back({"scratch", "4:5", 1, "scratch", "points"});
  write_plot(dir, "interpolation.gp", ip);
  PlotSpec mp{"mds.png", "2D MDS embedding", "x", "y", "mds.csv", false, {}};
  for (const auto& l : {"lt-init", "lt-soln", "scratch-init", "scratch-soln", "pruned-soln"})
    mp.series.push_back({l, "3:4", 1, l, "points"});
  write_plot(dir, "mds.gp", mp);
  return {"distances.csv", "interpolation.csv", "mds.csv", "similarity.csv", "interpolation.gp", "mds.gp"};
}

std::vector<std::string> write_hessian(const std::filesystem::path& dir, const HessianResult& r) {
  CsvTable track({"run", "step", "negative_magnitude"});
  for (const auto& [run, pts] : r.tracks)
    for (const auto& p : pts) track.add(run, p.step, p.magnitude);
  track.write(dir / "negative_track.csv");
  CsvTable up({"step", "before", "after_rigl", "after_set"});
  for (const auto& u : r.updates) up.add(u.step, u.before, u.after_rigl, u.after_set);
  up.write(dir / "constructed_updates.csv");
  PlotSpec plot{"negative_track.png", "Largest negative eigenvalue magnitude", "step", "|lambda_min|",
                "negative_track.csv", false, {}};
  for (const auto& [run, pts] : r.tracks) plot.series.push_back({run, "2:3", 1, run, "linespoints"});
  write_plot(dir, "negative_track.gp", plot);
  return {"negative_track.csv", "constructed_updates.csv", "negative_track.gp"};
}

/// Spectrum dumps for the final network of each hessian-suite method.
std::vector<std::string> write_spectra(const std::filesystem::path& dir, const RecipeOptions& o, const Dataset& data) {
  std::vector<std::string> files;
  const std::size_t n = std::min(o.hessian_samples, data.train_size());
  const Tensor hx = slice_rows(data.train_x, 0, n);
  const std::vector<int> hy(data.train_y.begin(), data.train_y.begin() + static_cast<std::ptrdiff_t>(n));
  CsvTable dens({"method", "lambda", "density"});
  for (const std::string& m : o.methods) {
    RunSpec r = run_spec(o.base, m);
    const RunArtifacts a = train(r.cfg, data);
    const SpectrumEstimate s = spectrum(full_hessian(a.final_net, hx, hy));
    for (std::size_t i = 0; i < s.grid.size(); ++i) dens.add(m, s.grid[i], s.density[i]);
    std::string ev;
    for (double l : s.eigenvalues) ev += format_real(l) + "\n";
    write_text(dir / fmt::format("eigenvalues_{}.txt", m), ev);
    files.push_back(fmt::format("eigenvalues_{}.txt", m));
  }
  dens.write(dir / "spectrum.csv");
  PlotSpec plot{"spectrum.png", "Hessian spectral density", "lambda", "density", "spectrum.csv", true, {}};
  for (const auto& m : o.methods) plot.series.push_back({m, "2:3", 1, m, "lines"});
  write_plot(dir, "spectrum.gp", plot);
  files.push_back("spectrum.csv");
  files.push_back("spectrum.gp");
  return files;
}

}  // namespace

void write_manifest(const std::filesystem::path& dir, const std::string& recipe, const RecipeOptions& o,
                    const std::vector<std::string>& outputs) {
  nlohmann::ordered_json j;
  j["tool"] = "sparselab";
  j["version"] = kVersion;
  j["recipe"] = recipe;
  j["config_hash"] = o.base.hash();
  j["seed"] = o.base.seed;
  j["seeds"] = o.seeds;
  j["config"] = o.base.to_toml();
  j["data_augmentation"] = "none";
  j["probe_samples"] = o.probe_samples;
  j["rewind_k"] = o.rewind_k;
  j["interpolation_split"] = o.interpolation_split;
  j["methods"] = o.methods;
  j["inits"] = o.inits;
  j["eigen_version"] = fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION);
  j["compiler"] = __VERSION__;
  j["outputs"] = outputs;
  write_text(dir / "manifest.json", j.dump(2) + "\n");
}

std::filesystem::path run_experiment(const std::string& name, RecipeOptions o) {
  if (o.out_dir.empty()) o.out_dir = std::filesystem::path("runs") / name;
  std::filesystem::create_directories(o.out_dir);
  o.base.validate();
  std::vector<std::string> outputs;
  if (name == "fig1c-signal") {
    outputs = write_fig1c(o.out_dir, run_fig1c(o));
  } else {
    const Dataset data = load_dataset(o.base);
    if (name == "fig3-gradflow") outputs = write_fig3(o.out_dir, run_fig3(o, data));
    else if (name == "fig4-dst-delta") outputs = write_fig4(o.out_dir, run_fig4(o, data));
    else if (name == "table1-init") outputs = write_table1(o.out_dir, run_table1(o, data));
    else if (name == "lottery-suite") outputs = write_lottery(o.out_dir, run_lottery(o, data));
    else if (name == "hessian-suite") {
      outputs = write_hessian(o.out_dir, run_hessian(o, data));
      const auto more = write_spectra(o.out_dir, o, data);
      outputs.insert(outputs.end(), more.begin(), more.end());
    } else {
      throw ConfigError(fmt::format("unknown recipe '{}' (known: {})", name, fmt::join(recipe_names(), ", ")));
    }
  }
  write_manifest(o.out_dir, name, o, outputs);
  return o.out_dir;
}

}  // namespace sparselab
