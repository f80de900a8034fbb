#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sparselab/dst.hpp"
#include "sparselab/init.hpp"
#include "sparselab/network.hpp"
#include "sparselab/schedule.hpp"
#include "sparselab/sparsity.hpp"

namespace sparselab {

/// Everything a training run depends on. Keys in TOML files and --set
/// overrides use the field names below (dst.* and prune.* for the nested ones).
struct TrainConfig {
  std::string model = "mlp-784-300-100-10";
  std::string dataset = "mnist";  // mnist | synthetic
  std::string data_dir;           // empty: $SPARSELAB_DATA
  std::size_t train_subset = 0;   // 0 = full split
  std::size_t test_subset = 0;
  std::size_t downsample = 1;     // pixel block size for image datasets
  std::size_t synthetic_n = 2000;
  std::size_t synthetic_dim = 20;
  std::size_t synthetic_classes = 4;

  std::size_t epochs = 30;
  std::size_t batch_size = 128;
  double lr = 0.1;
  LrScheduleKind lr_schedule = LrScheduleKind::Cosine;
  std::size_t warmup_epochs = 0;
  std::vector<std::size_t> lr_drop_epochs;
  double momentum = 0.9;
  double weight_decay = 0.0;

  double sparsity = 0.0;
  DistributionKind distribution = DistributionKind::Uniform;
  std::vector<std::size_t> dense_layers;
  std::vector<double> densities;  // per weighted layer, distribution = explicit
  InitScheme init;

  DstConfig dst;   // dst.t_end == 0 means "end of training"
  PruneConfig prune;

  std::uint64_t seed = 0;
  std::string out_dir;
  std::vector<std::uint64_t> checkpoint_steps;
  std::uint64_t log_every = 0;    // periodic gradient-flow logging (0 = off)
  std::size_t probe_batch = 512;
  bool measure_deltas = false;    // gradient flow before/after each mask update

  void validate() const;
  /// Canonical TOML text; equal configs give equal text.
  std::string to_toml() const;
  /// crc32 of to_toml(), hex.
  std::string hash() const;
};

TrainConfig load_config(const std::filesystem::path& path);
TrainConfig parse_config(const std::string& toml_text, const std::string& source = "config");
/// Applies `key=value` (TOML value syntax; bare strings accepted).
void apply_override(TrainConfig& cfg, const std::string& assignment);

/// "lenet5" or "mlp[-tanh][-bias]-<w0>-<w1>-...".
NetworkSpec model_spec(const std::string& model);

}  // namespace sparselab
