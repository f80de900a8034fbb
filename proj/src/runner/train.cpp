#include "sparselab/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "sparselab/checkpoint.hpp"
#include "sparselab/error.hpp"
#include "sparselab/model.hpp"
#include "sparselab/rng.hpp"

namespace sparselab {

std::uint64_t steps_per_epoch(const TrainConfig& cfg, std::size_t n_train) {
  return (n_train + cfg.batch_size - 1) / cfg.batch_size;
}

std::uint64_t total_steps(const TrainConfig& cfg, std::size_t n_train) {
  return steps_per_epoch(cfg, n_train) * cfg.epochs;
}

LrSchedule make_lr_schedule(const TrainConfig& cfg, std::size_t n_train) {
  const std::uint64_t spe = steps_per_epoch(cfg, n_train);
  LrSchedule s;
  s.kind = cfg.lr_schedule;
  s.lr0 = cfg.lr;
  s.total_steps = total_steps(cfg, n_train);
  s.warmup_steps = cfg.warmup_epochs * spe;
  for (std::size_t e : cfg.lr_drop_epochs) s.drop_steps.push_back(e * spe);
  return s;
}

MaskedNetwork prepare_network(const TrainConfig& cfg, InitReport* report) {
  MaskedNetwork net = MaskedNetwork::build(model_spec(cfg.model));
  if (cfg.sparsity > 0.0 || cfg.distribution == DistributionKind::Explicit) {
    Rng mask_rng = make_rng(cfg.seed, {kStreamMask});
    allocate_sparsity(net, {.kind = cfg.distribution, .sparsity = cfg.sparsity, .dense_layers = cfg.dense_layers,
                            .densities = cfg.densities},
                      mask_rng);
  }
  Rng init_rng = make_rng(cfg.seed, {kStreamInit});
  const InitReport r = initialize(net, cfg.init, init_rng);
  if (report) *report = r;
  return net;
}

Dataset load_dataset(const TrainConfig& cfg) {
  Dataset d;
  if (cfg.dataset == "synthetic") {
    d = make_synthetic(cfg.synthetic_n, cfg.synthetic_classes, cfg.synthetic_dim, cfg.seed);
  } else if (cfg.dataset == "mnist") {
    const auto dir = data_dir(cfg.data_dir);
    if (!dir) throw ConfigError("no MNIST directory: set data_dir or SPARSELAB_DATA");
    d = load_mnist(*dir);
  } else {
    throw ConfigError(fmt::format("unknown dataset '{}'", cfg.dataset));
  }
  if (cfg.train_subset || cfg.test_subset) d = subset(d, cfg.train_subset, cfg.test_subset);
  if (cfg.downsample > 1) d = downsample(d, cfg.downsample);
  return d;
}

namespace {

std::vector<std::size_t> epoch_permutation(std::uint64_t seed, std::size_t n, std::uint64_t epoch) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng = make_rng(seed, {kStreamData, epoch});
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

std::vector<std::size_t> slice(const std::vector<std::size_t>& perm, std::uint64_t pos, std::size_t batch) {
  const std::size_t b = static_cast<std::size_t>(pos) * batch;
  const std::size_t e = std::min(perm.size(), b + batch);
  return {perm.begin() + static_cast<std::ptrdiff_t>(b), perm.begin() + static_cast<std::ptrdiff_t>(e)};
}

}  // namespace

std::vector<std::size_t> batch_indices(const TrainConfig& cfg, std::size_t n_train, std::uint64_t step) {
  const std::uint64_t spe = steps_per_epoch(cfg, n_train);
  return slice(epoch_permutation(cfg.seed, n_train, step / spe), step % spe, cfg.batch_size);
}

std::vector<std::size_t> probe_indices(const TrainConfig& cfg, std::size_t n_test) {
  std::vector<std::size_t> perm(n_test);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng = make_rng(cfg.seed, {kStreamProbe});
  std::shuffle(perm.begin(), perm.end(), rng);
  perm.resize(std::min(n_test, cfg.probe_batch));
  return perm;
}

void sgd_step(std::span<double> theta, std::span<double> velocity, std::span<const double> grad,
              std::span<const double> mask, double lr, double momentum, double weight_decay) {
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (mask[i] == 0.0) continue;
    velocity[i] = momentum * velocity[i] + grad[i] + weight_decay * theta[i];
    theta[i] -= lr * velocity[i];
  }
}

RunArtifacts train(const TrainConfig& cfg, const Dataset& data) {
  InitReport report;
  MaskedNetwork net = prepare_network(cfg, &report);
  RunArtifacts run = train_network(std::move(net), {}, cfg, data);
  run.init_report = report;
  return run;
}

RunArtifacts train_network(MaskedNetwork net, std::vector<double> velocity, const TrainConfig& cfg,
                           const Dataset& data, std::uint64_t stop_step) {
  cfg.validate();
  const std::size_t n = data.train_size();
  if (n == 0) throw DataError("training split is empty");
  const std::size_t total = net.layout().total;
  if (velocity.empty()) velocity.assign(total, 0.0);
  if (velocity.size() != total) throw ShapeError("velocity does not match the network parameters");

  const std::uint64_t spe = steps_per_epoch(cfg, n);
  const std::uint64_t last = std::min(total_steps(cfg, n), stop_step);
  const LrSchedule lr = make_lr_schedule(cfg, n);
  DstConfig dst = cfg.dst;
  if (dst.t_end == 0) dst.t_end = total_steps(cfg, n);

  std::vector<std::size_t> probe;
  Tensor probe_x;
  std::vector<int> probe_y;
  if (cfg.log_every > 0) {
    probe = probe_indices(cfg, data.test_size());
    probe_x = gather_rows(data.test_x, probe);
    for (std::size_t i : probe) probe_y.push_back(data.test_y[i]);
  }

  RunArtifacts run;
  std::vector<double> mask = net.flat_mask();
  std::vector<double> theta;
  std::vector<std::size_t> perm;
  std::uint64_t perm_epoch = UINT64_MAX;
  double epoch_loss = 0.0;
  std::size_t epoch_steps = 0;

  auto snapshot_and_throw = [&](std::uint64_t t, double loss) {
    if (!cfg.out_dir.empty()) save_state(net, std::filesystem::path(cfg.out_dir) / "nan_snapshot.ckpt", velocity);
    throw NumericError(fmt::format("non-finite loss {} at step {}{}", loss, t,
                                   cfg.out_dir.empty() ? "" : " (snapshot written to nan_snapshot.ckpt)"));
  };

  for (std::uint64_t t = net.step; t < last; ++t) {
    net.step = t;
    if (std::find(cfg.checkpoint_steps.begin(), cfg.checkpoint_steps.end(), t) != cfg.checkpoint_steps.end()) {
      run.checkpoints.emplace(t, net);
    }
    if (cfg.log_every > 0 && t % cfg.log_every == 0) {
      const double flow = gradient_flow(net, probe_x, probe_y);
      run.grad_flow.push_back({t, flow, flow / static_cast<double>(net.active_coordinates().size()), "periodic",
                               "probe"});
    }
    if (cfg.prune.is_prune_step(t)) {
      prune_step(net, cfg.prune, t);
      mask = net.flat_mask();
      for (std::size_t i = 0; i < total; ++i)
        if (mask[i] == 0.0) velocity[i] = 0.0;
    }

    const std::uint64_t epoch = t / spe;
    if (epoch != perm_epoch) {
      perm = epoch_permutation(cfg.seed, n, epoch);
      perm_epoch = epoch;
    }
    const std::vector<std::size_t> idx = slice(perm, t % spe, cfg.batch_size);
    const Tensor xb = gather_rows(data.train_x, idx);
    std::vector<int> yb(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) yb[i] = data.train_y[idx[i]];

    ForwardPass pass = forward(net, xb, yb);
    if (!std::isfinite(pass.loss)) snapshot_and_throw(t, pass.loss);
    epoch_loss += pass.loss;
    ++epoch_steps;

    if (dst.is_update_step(t)) {
      // The mask update takes the place of the optimizer step at this iteration.
      const GradientVector g = backward(pass, GradientMode::Dense);
      double before = 0.0;
      for (std::size_t i = 0; i < total; ++i)
        if (mask[i] != 0.0) before += g.values[i] * g.values[i];
      Rng rng = make_rng(cfg.seed, {kStreamDst, t});
      const UpdateReport rep = dst_update(net, g, dst, t, rng, &lr);
      mask = net.flat_mask();
      for (std::size_t i : rep.changed_coordinates(net)) velocity[i] = 0.0;
      double after = std::nan("");
      if (cfg.measure_deltas) {
        after = gradient_flow(net, xb, yb);
        run.deltas.push_back({t, rep.drop_fraction, before, after, after - before});
        const std::string id = fmt::format("step-{}", t);
        const double active = static_cast<double>(net.active_coordinates().size());
        run.grad_flow.push_back({t, before, before / active, "pre-mask-update", id});
        run.grad_flow.push_back({t, after, after / active, "post-mask-update", id});
      }
      for (const LayerUpdate& u : rep.layers) {
        run.updates.push_back({t, u.layer, u.dropped.size(), u.grown.size(), cfg.measure_deltas ? before : std::nan(""),
                               after});
      }
    } else {
      const GradientVector g = backward(pass, GradientMode::Masked);
      theta = net.flatten();
      sgd_step(theta, velocity, g.values, mask, lr.at(t), cfg.momentum, cfg.weight_decay);
      net.assign(theta);
    }

    if ((t + 1) % spe == 0 || t + 1 == total_steps(cfg, n)) {
      const EvalResult ev = evaluate(net, data.test_x, data.test_y);
      run.epochs.push_back({static_cast<std::size_t>(epoch), t + 1, lr.at(t), epoch_loss / static_cast<double>(epoch_steps),
                            ev.loss, ev.accuracy, net.global_sparsity()});
      epoch_loss = 0.0;
      epoch_steps = 0;
    }
  }
  net.step = std::max(net.step, last);
  if (std::find(cfg.checkpoint_steps.begin(), cfg.checkpoint_steps.end(), last) != cfg.checkpoint_steps.end()) {
    run.checkpoints.emplace(last, net);
  }
  if (!run.epochs.empty() && run.epochs.back().step == last) {
    run.test_loss = run.epochs.back().test_loss;
    run.test_accuracy = run.epochs.back().test_accuracy;
  } else {
    const EvalResult ev = evaluate(net, data.test_x, data.test_y);
    run.test_loss = ev.loss;
    run.test_accuracy = ev.accuracy;
  }
  run.final_net = std::move(net);
  run.velocity = std::move(velocity);
  return run;
}

}  // namespace sparselab
