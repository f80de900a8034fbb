#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sparselab/analysis.hpp"
#include "sparselab/config.hpp"
#include "sparselab/data.hpp"
#include "sparselab/init.hpp"
#include "sparselab/network.hpp"
#include "sparselab/schedule.hpp"

namespace sparselab {

struct EpochRecord {
  std::size_t epoch;
  std::uint64_t step;  // global step at the end of the epoch
  double lr;
  double train_loss;   // mean over the epoch's SGD steps
  double test_loss;
  double test_accuracy;
  double sparsity;
};

/// One row per layer per mask update; flows are whole-network values on the
/// update's batch (filled when deltas are measured).
struct UpdateRecord {
  std::uint64_t step;
  std::size_t layer;
  std::size_t n_dropped;
  std::size_t n_grown;
  double grad_norm_before;
  double grad_norm_after;
};

struct DeltaRecord {
  std::uint64_t step;
  double drop_fraction;
  double before;
  double after;
  double delta;
};

struct RunArtifacts {
  MaskedNetwork final_net;
  std::vector<double> velocity;
  std::map<std::uint64_t, MaskedNetwork> checkpoints;  // state before the step
  std::vector<EpochRecord> epochs;
  std::vector<GradFlowRecord> grad_flow;
  std::vector<UpdateRecord> updates;
  std::vector<DeltaRecord> deltas;
  InitReport init_report;
  double test_loss = 0.0;
  double test_accuracy = 0.0;
};

/// Steps per epoch (last partial batch included) and in total.
std::uint64_t steps_per_epoch(const TrainConfig& cfg, std::size_t n_train);
std::uint64_t total_steps(const TrainConfig& cfg, std::size_t n_train);
LrSchedule make_lr_schedule(const TrainConfig& cfg, std::size_t n_train);

/// Network after mask allocation and initialization, as a pure function of the
/// config (seed, model, sparsity, init).
MaskedNetwork prepare_network(const TrainConfig& cfg, InitReport* report = nullptr);

/// Loads the dataset a config names.
Dataset load_dataset(const TrainConfig& cfg);

/// One momentum step on active coordinates (mask != 0):
/// v = m v + g + wd theta, theta -= lr v.
void sgd_step(std::span<double> theta, std::span<double> velocity, std::span<const double> grad,
              std::span<const double> mask, double lr, double momentum, double weight_decay);

/// Full run from prepare_network.
RunArtifacts train(const TrainConfig& cfg, const Dataset& data);

/// Continues training `net` (from net.step) with the given velocity (empty =
/// zeros) until `stop_step` or the end of the schedule. All randomness is a
/// function of (seed, step), so a resumed run matches an uninterrupted one.
RunArtifacts train_network(MaskedNetwork net, std::vector<double> velocity, const TrainConfig& cfg,
                           const Dataset& data, std::uint64_t stop_step = UINT64_MAX);

/// Training example indices of `step`'s minibatch.
std::vector<std::size_t> batch_indices(const TrainConfig& cfg, std::size_t n_train, std::uint64_t step);

/// Writes epochs.csv, gradflow.csv, updates.csv, deltas.csv, config.toml,
/// final.ckpt and step_<t>.ckpt for every checkpoint. Returns the file names.
std::vector<std::string> write_run(const std::filesystem::path& dir, const TrainConfig& cfg, const RunArtifacts& run);

/// Fixed held-out probe batch (first `probe_batch` of a seeded test-set permutation).
std::vector<std::size_t> probe_indices(const TrainConfig& cfg, std::size_t n_test);

}  // namespace sparselab
