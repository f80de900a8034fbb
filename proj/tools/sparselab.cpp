// Command-line front end: train, analyze, recipe, probe.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include "sparselab/checkpoint.hpp"
#include "sparselab/csv.hpp"
#include "sparselab/error.hpp"
#include "sparselab/recipes.hpp"

using namespace sparselab;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

// TrainConfig keys exposed as --<key> flags. Values use --set syntax.
const std::vector<std::string> kConfigKeys = {
    "model",         "dataset",        "data_dir",        "train_subset",   "test_subset",  "downsample",
    "synthetic_n",   "synthetic_dim",  "synthetic_classes", "epochs",       "batch_size",   "lr",
    "lr_schedule",   "warmup_epochs",  "lr_drop_epochs",  "momentum",       "weight_decay", "sparsity",
    "distribution",  "dense_layers",   "densities",       "init",           "seed",         "out_dir",
    "checkpoint_steps", "log_every",   "probe_batch",     "measure_deltas", "dst.method",   "dst.alpha0",
    "dst.frequency", "dst.t_end",      "dst.schedule",    "prune.target",   "prune.t_start", "prune.t_end",
    "prune.frequency", "prune.scope",  "prune.exclude"};

/// Config sources shared by the subcommands: a TOML file, per-field flags and
/// --set overrides, applied in that order.
struct ConfigArgs {
  std::string config_path;
  std::map<std::string, std::string> fields;
  std::vector<std::string> sets;

  void attach(CLI::App* app, bool with_fields) {
    app->add_option("-c,--config", config_path, "TOML config file")->check(CLI::ExistingFile);
    app->add_option("-s,--set", sets, "key=value override (repeatable)");
    if (!with_fields) return;
    for (const auto& key : kConfigKeys)
      app->add_option("--" + key, fields[key], "config field " + key)->group("Config fields");
  }

  std::vector<std::string> assignments() const {
    std::vector<std::string> out;
    for (const auto& key : kConfigKeys) {
      const auto it = fields.find(key);
      if (it != fields.end() && !it->second.empty()) out.push_back(key + "=" + it->second);
    }
    out.insert(out.end(), sets.begin(), sets.end());
    return out;
  }

  /// `fallback` is read when no --config is given and the file exists.
  TrainConfig build(const std::filesystem::path& fallback = {}) const {
    TrainConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    else if (!fallback.empty() && std::filesystem::exists(fallback)) cfg = load_config(fallback);
    for (const auto& a : assignments()) apply_override(cfg, a);
    cfg.validate();
    return cfg;
  }
};

void log_line(const std::string& msg) {
  static const auto t0 = std::chrono::steady_clock::now();
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cerr << fmt::format("[{:8.1f}s] {}\n", s, msg);
}

int cmd_train(const ConfigArgs& args) {
  TrainConfig cfg = args.build();
  if (cfg.out_dir.empty()) cfg.out_dir = fmt::format("runs/train-{}", cfg.hash());
  const Dataset data = load_dataset(cfg);
  log_line(fmt::format("training {} on {} ({} train / {} test), {} epochs, config {}", cfg.model, data.name,
                       data.train_size(), data.test_y.size(), cfg.epochs, cfg.hash()));
  const RunArtifacts run = train(cfg, data);
  for (const auto& e : run.epochs)
    log_line(fmt::format("epoch {:3d} lr {:.4g} train loss {:.4f} test loss {:.4f} acc {:.4f} sparsity {:.4f}",
                         e.epoch, e.lr, e.train_loss, e.test_loss, e.test_accuracy, e.sparsity));
  const auto files = write_run(cfg.out_dir, cfg, run);
  log_line(fmt::format("wrote {} files to {}", files.size(), cfg.out_dir));
  std::cout << fmt::format("test_accuracy={} test_loss={}\n", format_real(run.test_accuracy),
                           format_real(run.test_loss));
  return 0;
}

struct AnalyzeArgs {
  std::string checkpoint;
  std::string other;
  std::string out_dir;
  bool hessian = false;
  std::size_t hessian_samples = 1000;
  std::size_t alpha_points = 21;
  std::string split = "test";
};

int cmd_analyze(const ConfigArgs& cargs, const AnalyzeArgs& a) {
  const TrainConfig cfg = cargs.build(std::filesystem::path(a.checkpoint).parent_path() / "config.toml");
  const Checkpoint ck = load_state(a.checkpoint);
  const Dataset data = load_dataset(cfg);
  const bool on_train = a.split == "train";
  const Tensor& x = on_train ? data.train_x : data.test_x;
  const std::vector<int>& y = on_train ? data.train_y : data.test_y;

  const EvalResult ev = evaluate(ck.net, x, y);
  const std::vector<std::size_t> probe = probe_indices(cfg, data.test_y.size());
  std::vector<int> py;
  for (std::size_t i : probe) py.push_back(data.test_y[i]);
  const double flow = gradient_flow(ck.net, gather_rows(data.test_x, probe), py);
  std::cout << fmt::format("step={} active={} sparsity={} {}_loss={} {}_accuracy={} grad_flow={}\n", ck.net.step,
                           ck.net.active_coordinates().size(), format_real(ck.net.global_sparsity()), a.split, format_real(ev.loss),
                           a.split, format_real(ev.accuracy), format_real(flow));
  if (!a.out_dir.empty()) std::filesystem::create_directories(a.out_dir);

  if (!a.other.empty()) {
    const Checkpoint other = load_state(a.other);
    const double d = l2_distance(make_point(ck.net, "a", 0), make_point(other.net, "b", 0));
    const auto path = interpolate_loss(ck.net, other.net, alpha_grid(a.alpha_points), x, y);
    const ModelOutputs oa = model_outputs(ck.net, data.test_x, data.test_y);
    const ModelOutputs ob = model_outputs(other.net, data.test_x, data.test_y);
    std::cout << fmt::format("l2_distance={} disagreement={}\n", format_real(d),
                             format_real(disagreement(oa.predictions, ob.predictions)));
    CsvTable t({"alpha", "loss", "accuracy"});
    for (const auto& p : path) t.add(p.alpha, p.loss, p.accuracy);
    if (a.out_dir.empty()) std::cout << t.str();
    else t.write(std::filesystem::path(a.out_dir) / "interpolation.csv");
  }

  if (a.hessian) {
    const std::size_t n = std::min(a.hessian_samples, data.train_size());
    const Tensor hx = slice_rows(data.train_x, 0, n);
    const std::vector<int> hy(data.train_y.begin(), data.train_y.begin() + static_cast<std::ptrdiff_t>(n));
    log_line(fmt::format("hessian over {} active coordinates, {} samples", ck.net.active_coordinates().size(), n));
    const MatrixRM h = full_hessian(ck.net, hx, hy);
    const SpectrumEstimate s = spectrum(h);
    std::cout << fmt::format("symmetry_defect={} min_eigenvalue={} max_eigenvalue={} negative_magnitude={}\n",
                             format_real(symmetry_defect(h)), format_real(s.eigenvalues.front()),
                             format_real(s.eigenvalues.back()), format_real(largest_negative_magnitude(s.eigenvalues)));
    if (!a.out_dir.empty()) {
      CsvTable t({"lambda", "density"});
      for (std::size_t i = 0; i < s.grid.size(); ++i) t.add(s.grid[i], s.density[i]);
      t.write(std::filesystem::path(a.out_dir) / "spectrum.csv");
      CsvTable e({"index", "eigenvalue"});
      for (std::size_t i = 0; i < s.eigenvalues.size(); ++i) e.add(i, s.eigenvalues[i]);
      e.write(std::filesystem::path(a.out_dir) / "eigenvalues.csv");
    }
  }
  return 0;
}

struct RecipeArgs {
  std::string name;
  std::string out_dir;
  bool list = false;
};

int cmd_recipe(const ConfigArgs& cargs, const RecipeArgs& r) {
  if (r.list || r.name.empty()) {
    for (const auto& n : recipe_names()) std::cout << n << "\n";
    return r.list ? 0 : kExitConfig;
  }
  RecipeOptions o = recipe_defaults(r.name);
  if (!cargs.config_path.empty()) o.base = load_config(cargs.config_path);
  for (const auto& a : cargs.assignments()) apply_recipe_override(o, a);
  o.out_dir = r.out_dir.empty() ? std::filesystem::path("runs") / r.name : std::filesystem::path(r.out_dir);
  o.log = log_line;
  const auto dir = run_experiment(r.name, o);
  std::cout << dir.string() << "\n";
  return 0;
}

struct ProbeArgs {
  std::string model = "lenet5";
  std::vector<double> sparsities{0.95};
  std::vector<std::string> schemes{"masked-dense", "layer-scaled", "per-neuron"};
  std::string distribution = "uniform";
  std::size_t seeds = 5;
  std::uint64_t seed = 0;
  std::size_t samples = 1024;
  std::string out;
};

int cmd_probe(const ProbeArgs& p) {
  ProbeSweep sweep;
  sweep.sparsities = p.sparsities;
  for (const auto& s : p.schemes) sweep.schemes.push_back(InitScheme::parse(s));
  sweep.seeds = p.seeds;
  sweep.base_seed = p.seed;
  sweep.n_samples = p.samples;
  sweep.distribution = parse_distribution(p.distribution);
  CsvTable t({"sparsity", "scheme", "seed", "layer_index", "std"});
  for (const auto& r : sweep_sparsity_probe(model_spec(p.model), sweep))
    t.add(r.sparsity, r.scheme, r.seed, r.layer_index, r.std);
  if (p.out.empty()) std::cout << t.str();
  else t.write(p.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse network training and analysis toolkit"};
  app.require_subcommand(1);

  ConfigArgs train_args, analyze_cfg, recipe_cfg;
  auto* train_cmd = app.add_subcommand("train", "train one configuration and write its logs and checkpoints");
  train_args.attach(train_cmd, true);

  AnalyzeArgs analyze_args;
  auto* analyze_cmd = app.add_subcommand("analyze", "evaluate a checkpoint; optional Hessian spectrum and interpolation");
  analyze_cfg.attach(analyze_cmd, true);
  analyze_cmd->add_option("checkpoint", analyze_args.checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  analyze_cmd->add_option("--compare", analyze_args.other, "second checkpoint: distance, disagreement, interpolation")
      ->check(CLI::ExistingFile);
  analyze_cmd->add_flag("--hessian", analyze_args.hessian, "full Hessian spectrum over active coordinates");
  analyze_cmd->add_option("--hessian-samples", analyze_args.hessian_samples, "training examples in the Hessian");
  analyze_cmd->add_option("--alpha-points", analyze_args.alpha_points, "interpolation grid size")
      ->check(CLI::Range(2, 100000));
  analyze_cmd->add_option("--split", analyze_args.split, "evaluation split")->check(CLI::IsMember({"train", "test"}));
  analyze_cmd->add_option("-o,--out", analyze_args.out_dir, "directory for CSV outputs");

  RecipeArgs recipe_args;
  auto* recipe_cmd = app.add_subcommand("recipe", "run a reproduction recipe");
  recipe_cfg.attach(recipe_cmd, false);
  recipe_cmd->add_option("name", recipe_args.name, "recipe name");
  recipe_cmd->add_option("-o,--out", recipe_args.out_dir, "output directory (default runs/<name>)");
  recipe_cmd->add_flag("--list", recipe_args.list, "list recipes");

  ProbeArgs probe_args;
  auto* probe_cmd = app.add_subcommand("probe", "signal-propagation probe at initialization");
  probe_cmd->add_option("--model", probe_args.model, "model name");
  probe_cmd->add_option("--sparsity", probe_args.sparsities, "sparsity levels")->delimiter(',');
  probe_cmd->add_option("--init", probe_args.schemes, "init schemes")->delimiter(',');
  probe_cmd->add_option("--distribution", probe_args.distribution, "uniform | erk");
  probe_cmd->add_option("--seeds", probe_args.seeds, "number of seeds");
  probe_cmd->add_option("--seed", probe_args.seed, "first seed");
  probe_cmd->add_option("--samples", probe_args.samples, "probe inputs per seed");
  probe_cmd->add_option("-o,--out", probe_args.out, "CSV file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train_cmd) return cmd_train(train_args);
    if (*analyze_cmd) return cmd_analyze(analyze_cfg, analyze_args);
    if (*recipe_cmd) return cmd_recipe(recipe_cfg, recipe_args);
    if (*probe_cmd) return cmd_probe(probe_args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}
