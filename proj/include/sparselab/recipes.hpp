#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sparselab/analysis.hpp"
#include "sparselab/config.hpp"
#include "sparselab/data.hpp"
#include "sparselab/landscape.hpp"
#include "sparselab/probe.hpp"
#include "sparselab/train.hpp"

namespace sparselab {

/// Knobs shared by the reproduction recipes. `base` is the training config
/// every run starts from; recipe-specific fields sit beside it.
struct RecipeOptions {
  TrainConfig base;
  std::size_t seeds = 5;
  std::filesystem::path out_dir;  // empty: nothing is written

  // fig1c-signal
  std::vector<double> sparsities{0.0, 0.5, 0.8, 0.9, 0.95, 0.98};
  std::vector<std::string> schemes{"masked-dense", "layer-scaled", "per-neuron"};
  std::size_t probe_samples = 1024;

  // fig3-gradflow, fig4-dst-delta, table1-init
  std::vector<std::string> methods;
  std::vector<std::string> inits;

  // lottery-suite
  std::uint64_t rewind_k = 0;
  std::size_t alpha_points = 21;
  std::string interpolation_split = "test";  // train | test
  std::string scratch_init = "per-neuron";

  // hessian-suite
  std::size_t hessian_samples = 1000;
  std::size_t constructed_updates = 20;
  double hessian_drop_fraction = 0.3;

  std::function<void(const std::string&)> log;
};

std::vector<std::string> recipe_names();

/// Recipe defaults (model, schedule, methods, ...) for `name`; throws
/// ConfigError for an unknown recipe.
RecipeOptions recipe_defaults(const std::string& name);

/// Applies `key=value`: recipe keys (seeds, sparsities, schemes, methods,
/// inits, k, alpha_points, interpolation_split, scratch_init, probe_samples,
/// hessian_samples, constructed_updates, hessian_drop_fraction) first, then
/// TrainConfig keys.
void apply_recipe_override(RecipeOptions& opts, const std::string& assignment);

// ---- structured results -----------------------------------------------------

struct SignalResult {
  std::vector<ProbeRecord> records;
};

struct GradFlowRun {
  std::string run;
  std::uint64_t seed;
  std::vector<GradFlowRecord> records;
};

struct DeltaSeries {
  std::string method;
  std::uint64_t seed;
  std::vector<DeltaRecord> deltas;
  std::uint64_t total_steps;
};

struct DeltaResult {
  std::vector<DeltaSeries> series;
};

struct AccuracyCell {
  std::string init;
  std::string method;
  std::vector<double> accuracy;  // per seed
  std::vector<double> loss;
};

struct Table1Result {
  std::vector<AccuracyCell> cells;
  const AccuracyCell* find(const std::string& init, const std::string& method) const;
};

struct GroupSimilarity {
  std::vector<double> d_start;  // distance to the pruned solution, per seed
  std::vector<double> d_end;
  std::vector<std::vector<InterpolationPoint>> solution_paths;  // solution -> pruned
  std::vector<std::vector<InterpolationPoint>> init_paths;      // init -> pruned
  SimilarityReport similarity;
  double mean_accuracy = 0.0;
};

struct LotteryResult {
  double pruned_accuracy = 0.0;
  double pruned_loss = 0.0;
  GroupSimilarity lt;
  GroupSimilarity scratch;
  MdsResult mds;
  std::vector<std::string> mds_labels;
  double loss_range = 0.0;  // max - min loss over every interpolation curve
};

struct ConstructedUpdate {
  std::uint64_t step;
  double before;       // |most negative eigenvalue| before the update
  double after_rigl;
  double after_set;
};

struct HessianResult {
  std::vector<std::pair<std::string, std::vector<EigenTrackPoint>>> tracks;
  std::vector<ConstructedUpdate> updates;
  double max_symmetry_defect = 0.0;
  std::size_t active_coordinates = 0;
};

SignalResult run_fig1c(const RecipeOptions& opts);
std::vector<GradFlowRun> run_fig3(const RecipeOptions& opts, const Dataset& data);
DeltaResult run_fig4(const RecipeOptions& opts, const Dataset& data);
Table1Result run_table1(const RecipeOptions& opts, const Dataset& data);
LotteryResult run_lottery(const RecipeOptions& opts, const Dataset& data);
HessianResult run_hessian(const RecipeOptions& opts, const Dataset& data);

/// One-sided sign test: P(X >= wins) for X ~ Binomial(wins + losses, 1/2).
double sign_test_p(std::size_t wins, std::size_t losses);

/// Runs a recipe by name: loads data if needed, writes CSVs, plot scripts and
/// manifest.json into opts.out_dir. Returns the output directory.
std::filesystem::path run_experiment(const std::string& name, RecipeOptions opts);

/// Writes manifest.json (recipe, config hash, seeds, versions, data notes).
void write_manifest(const std::filesystem::path& dir, const std::string& recipe, const RecipeOptions& opts,
                    const std::vector<std::string>& outputs);

}  // namespace sparselab
