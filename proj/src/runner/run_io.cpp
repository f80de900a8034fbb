#include <fmt/format.h>

#include "sparselab/checkpoint.hpp"
#include "sparselab/csv.hpp"
#include "sparselab/train.hpp"

namespace sparselab {

std::vector<std::string> write_run(const std::filesystem::path& dir, const TrainConfig& cfg, const RunArtifacts& run) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> files;

  CsvTable epochs({"epoch", "step", "lr", "train_loss", "test_loss", "test_accuracy", "sparsity"});
  for (const auto& e : run.epochs)
    epochs.add(e.epoch, e.step, e.lr, e.train_loss, e.test_loss, e.test_accuracy, e.sparsity);
  epochs.write(dir / "epochs.csv");
  files.push_back("epochs.csv");

  CsvTable flow({"step", "grad_flow", "per_parameter", "tag", "batch_id"});
  for (const auto& g : run.grad_flow) flow.add(g.step, g.grad_flow, g.per_parameter, g.tag, g.batch_id);
  flow.write(dir / "gradflow.csv");
  files.push_back("gradflow.csv");

  CsvTable updates({"step", "layer", "n_dropped", "n_grown", "grad_norm_before", "grad_norm_after"});
  for (const auto& u : run.updates)
    updates.add(u.step, u.layer, u.n_dropped, u.n_grown, u.grad_norm_before, u.grad_norm_after);
  updates.write(dir / "updates.csv");
  files.push_back("updates.csv");

  CsvTable deltas({"step", "drop_fraction", "flow_before", "flow_after", "delta"});
  for (const auto& d : run.deltas) deltas.add(d.step, d.drop_fraction, d.before, d.after, d.delta);
  deltas.write(dir / "deltas.csv");
  files.push_back("deltas.csv");

  write_text(dir / "config.toml", cfg.to_toml());
  files.push_back("config.toml");

  save_state(run.final_net, dir / "final.ckpt", run.velocity);
  files.push_back("final.ckpt");
  for (const auto& [step, net] : run.checkpoints) {
    const std::string name = fmt::format("step_{}.ckpt", step);
    save_state(net, dir / name);
    files.push_back(name);
  }
  return files;
}

}  // namespace sparselab
