#include "sparselab/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <toml.hpp>
#include <zlib.h>

#include "sparselab/error.hpp"

namespace sparselab {

namespace {

class TableReader {
 public:
  TableReader(const toml::table& t, std::string source, std::string prefix = "")
      : t_(t), source_(std::move(source)), prefix_(std::move(prefix)) {}

  template <class F>
  void field(const std::string& key, F&& assign) {
    const toml::node* n = t_.get(key);
    seen_.push_back(key);
    if (!n) return;
    try {
      assign(*n);
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("{}: {}{}: {}", source_, prefix_, key, e.what()));
    }
  }

  void reject_unknown() const {
    for (const auto& [k, v] : t_) {
      if (std::find(seen_.begin(), seen_.end(), std::string(k.str())) == seen_.end()) {
        throw ConfigError(fmt::format("{}: unknown key '{}{}'", source_, prefix_, k.str()));
      }
    }
  }

 private:
  const toml::table& t_;
  std::string source_, prefix_;
  std::vector<std::string> seen_;
};

std::string as_string(const toml::node& n) {
  if (auto v = n.value<std::string>()) return *v;
  throw ConfigError("expected a string");
}

double as_real(const toml::node& n) {
  if (n.is_floating_point() || n.is_integer()) return *n.value<double>();
  throw ConfigError("expected a number");
}

std::uint64_t as_count(const toml::node& n) {
  if (!n.is_integer()) throw ConfigError("expected an integer");
  const std::int64_t v = *n.value<std::int64_t>();
  if (v < 0) throw ConfigError("expected a non-negative integer");
  return static_cast<std::uint64_t>(v);
}

bool as_bool(const toml::node& n) {
  if (auto v = n.value<bool>()) return *v;
  throw ConfigError("expected true or false");
}

template <class T>
std::vector<T> as_counts(const toml::node& n) {
  const toml::array* a = n.as_array();
  if (!a) throw ConfigError("expected an array of integers");
  std::vector<T> out;
  for (const toml::node& e : *a) out.push_back(static_cast<T>(as_count(e)));
  return out;
}

std::vector<double> as_reals(const toml::node& n) {
  const toml::array* a = n.as_array();
  if (!a) throw ConfigError("expected an array of numbers");
  std::vector<double> out;
  for (const toml::node& e : *a) out.push_back(as_real(e));
  return out;
}

PruneScope parse_scope(const std::string& s) {
  if (s == "layer" || s == "per-layer") return PruneScope::PerLayer;
  if (s == "global") return PruneScope::Global;
  throw ConfigError(fmt::format("unknown prune scope '{}'", s));
}

void apply_table(TrainConfig& c, const toml::table& t, const std::string& source) {
  TableReader r(t, source);
  r.field("model", [&](const auto& n) { c.model = as_string(n); });
  r.field("dataset", [&](const auto& n) { c.dataset = as_string(n); });
  r.field("data_dir", [&](const auto& n) { c.data_dir = as_string(n); });
  r.field("train_subset", [&](const auto& n) { c.train_subset = as_count(n); });
  r.field("test_subset", [&](const auto& n) { c.test_subset = as_count(n); });
  r.field("downsample", [&](const auto& n) { c.downsample = as_count(n); });
  r.field("synthetic_n", [&](const auto& n) { c.synthetic_n = as_count(n); });
  r.field("synthetic_dim", [&](const auto& n) { c.synthetic_dim = as_count(n); });
  r.field("synthetic_classes", [&](const auto& n) { c.synthetic_classes = as_count(n); });
  r.field("epochs", [&](const auto& n) { c.epochs = as_count(n); });
  r.field("batch_size", [&](const auto& n) { c.batch_size = as_count(n); });
  r.field("lr", [&](const auto& n) { c.lr = as_real(n); });
  r.field("lr_schedule", [&](const auto& n) { c.lr_schedule = parse_lr_schedule(as_string(n)); });
  r.field("warmup_epochs", [&](const auto& n) { c.warmup_epochs = as_count(n); });
  r.field("lr_drop_epochs", [&](const auto& n) { c.lr_drop_epochs = as_counts<std::size_t>(n); });
  r.field("momentum", [&](const auto& n) { c.momentum = as_real(n); });
  r.field("weight_decay", [&](const auto& n) { c.weight_decay = as_real(n); });
  r.field("sparsity", [&](const auto& n) { c.sparsity = as_real(n); });
  r.field("distribution", [&](const auto& n) { c.distribution = parse_distribution(as_string(n)); });
  r.field("dense_layers", [&](const auto& n) { c.dense_layers = as_counts<std::size_t>(n); });
  r.field("densities", [&](const auto& n) { c.densities = as_reals(n); });
  r.field("init", [&](const auto& n) { c.init = InitScheme::parse(as_string(n)); });
  r.field("seed", [&](const auto& n) { c.seed = as_count(n); });
  r.field("out_dir", [&](const auto& n) { c.out_dir = as_string(n); });
  r.field("checkpoint_steps", [&](const auto& n) { c.checkpoint_steps = as_counts<std::uint64_t>(n); });
  r.field("log_every", [&](const auto& n) { c.log_every = as_count(n); });
  r.field("probe_batch", [&](const auto& n) { c.probe_batch = as_count(n); });
  r.field("measure_deltas", [&](const auto& n) { c.measure_deltas = as_bool(n); });
  r.field("dst", [&](const toml::node& n) {
    const toml::table* d = n.as_table();
    if (!d) throw ConfigError("expected a table");
    TableReader dr(*d, source, "dst.");
    dr.field("method", [&](const auto& v) { c.dst.method = parse_dst_method(as_string(v)); });
    dr.field("alpha0", [&](const auto& v) { c.dst.alpha0 = as_real(v); });
    dr.field("frequency", [&](const auto& v) { c.dst.frequency = as_count(v); });
    dr.field("t_end", [&](const auto& v) { c.dst.t_end = as_count(v); });
    dr.field("schedule", [&](const auto& v) { c.dst.schedule = parse_drop_schedule(as_string(v)); });
    dr.reject_unknown();
  });
  r.field("prune", [&](const toml::node& n) {
    const toml::table* p = n.as_table();
    if (!p) throw ConfigError("expected a table");
    TableReader pr(*p, source, "prune.");
    pr.field("target", [&](const auto& v) { c.prune.target = as_real(v); });
    pr.field("t_start", [&](const auto& v) { c.prune.t_start = as_count(v); });
    pr.field("t_end", [&](const auto& v) { c.prune.t_end = as_count(v); });
    pr.field("frequency", [&](const auto& v) { c.prune.frequency = as_count(v); });
    pr.field("scope", [&](const auto& v) { c.prune.scope = parse_scope(as_string(v)); });
    pr.field("exclude", [&](const auto& v) { c.prune.exclude = as_counts<std::size_t>(v); });
    pr.reject_unknown();
  });
  r.reject_unknown();
}

toml::table parse_toml(const std::string& text, const std::string& source) {
  try {
    return toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    const auto& b = e.source().begin;
    throw ConfigError(fmt::format("{}:{}:{}: {}", source, b.line, b.column, e.description()));
  }
}

std::string quote(const std::string& s) {
  std::ostringstream ss;
  ss << toml::value<std::string>(s);
  return ss.str();
}

}  // namespace

void TrainConfig::validate() const {
  model_spec(model);
  if (dataset != "mnist" && dataset != "synthetic") throw ConfigError(fmt::format("unknown dataset '{}'", dataset));
  if (epochs == 0) throw ConfigError("epochs must be at least 1");
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (!(lr >= 0.0)) throw ConfigError("lr must be non-negative");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (!(sparsity >= 0.0 && sparsity < 1.0)) throw ConfigError("sparsity must lie in [0, 1)");
  if (lr_schedule == LrScheduleKind::WarmupStep && warmup_epochs > epochs) {
    throw ConfigError("warmup_epochs exceeds epochs");
  }
  if (probe_batch == 0) throw ConfigError("probe_batch must be at least 1");
  if (downsample == 0) throw ConfigError("downsample must be at least 1");
  dst.validate();
  prune.validate();
  if (dst.method != DstMethod::None && prune.enabled()) {
    throw ConfigError("dynamic sparse training and gradual pruning cannot run together");
  }
}

std::string TrainConfig::to_toml() const {
  std::string s;
  auto line = [&s](const std::string& k, const std::string& v) { s += fmt::format("{} = {}\n", k, v); };
  auto real = [](double v) {
    std::string r = fmt::format("{}", v);
    if (r.find_first_of(".en") == std::string::npos) r += ".0";
    return r;
  };
  line("model", quote(model));
  line("dataset", quote(dataset));
  line("data_dir", quote(data_dir));
  line("train_subset", std::to_string(train_subset));
  line("test_subset", std::to_string(test_subset));
  line("downsample", std::to_string(downsample));
  line("synthetic_n", std::to_string(synthetic_n));
  line("synthetic_dim", std::to_string(synthetic_dim));
  line("synthetic_classes", std::to_string(synthetic_classes));
  line("epochs", std::to_string(epochs));
  line("batch_size", std::to_string(batch_size));
  line("lr", real(lr));
  line("lr_schedule", quote(to_string(lr_schedule)));
  line("warmup_epochs", std::to_string(warmup_epochs));
  line("lr_drop_epochs", fmt::format("[{}]", fmt::join(lr_drop_epochs, ", ")));
  line("momentum", real(momentum));
  line("weight_decay", real(weight_decay));
  line("sparsity", real(sparsity));
  line("distribution", quote(to_string(distribution)));
  line("dense_layers", fmt::format("[{}]", fmt::join(dense_layers, ", ")));
  line("densities", fmt::format("[{}]", fmt::join(densities, ", ")));
  line("init", quote(init.name()));
  line("seed", std::to_string(seed));
  line("out_dir", quote(out_dir));
  line("checkpoint_steps", fmt::format("[{}]", fmt::join(checkpoint_steps, ", ")));
  line("log_every", std::to_string(log_every));
  line("probe_batch", std::to_string(probe_batch));
  line("measure_deltas", measure_deltas ? "true" : "false");
  s += "\n[dst]\n";
  line("method", quote(to_string(dst.method)));
  line("alpha0", real(dst.alpha0));
  line("frequency", std::to_string(dst.frequency));
  line("t_end", std::to_string(dst.t_end));
  line("schedule", quote(to_string(dst.schedule)));
  s += "\n[prune]\n";
  line("target", real(prune.target));
  line("t_start", std::to_string(prune.t_start));
  line("t_end", std::to_string(prune.t_end));
  line("frequency", std::to_string(prune.frequency));
  line("scope", quote(prune.scope == PruneScope::Global ? "global" : "layer"));
  line("exclude", fmt::format("[{}]", fmt::join(prune.exclude, ", ")));
  return s;
}

std::string TrainConfig::hash() const {
  const std::string t = to_toml();
  const uLong c = crc32(crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(t.data()), static_cast<uInt>(t.size()));
  return fmt::format("{:08x}", static_cast<std::uint32_t>(c));
}

TrainConfig parse_config(const std::string& toml_text, const std::string& source) {
  TrainConfig c;
  apply_table(c, parse_toml(toml_text, source), source);
  c.validate();
  return c;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config {}", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

void apply_override(TrainConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError(fmt::format("override '{}' is not key=value", assignment));
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  toml::table t;
  try {
    t = toml::parse(fmt::format("{} = {}", key, value));
  } catch (const toml::parse_error&) {
    t = parse_toml(fmt::format("{} = {}", key, quote(value)), "override");
  }
  apply_table(cfg, t, "override");
}

NetworkSpec model_spec(const std::string& model) {
  if (model == "lenet5") return lenet5_spec();
  std::stringstream ss(model);
  std::string tok;
  std::getline(ss, tok, '-');
  if (tok != "mlp") throw ConfigError(fmt::format("unknown model '{}'", model));
  Activation act = Activation::Relu;
  bool bias = false;
  std::vector<std::size_t> widths;
  while (std::getline(ss, tok, '-')) {
    if (tok == "tanh") act = Activation::Tanh;
    else if (tok == "relu") act = Activation::Relu;
    else if (tok == "bias") bias = true;
    else {
      std::size_t used = 0;
      std::size_t w = 0;
      try {
        w = std::stoul(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size() || w == 0) throw ConfigError(fmt::format("bad width '{}' in model '{}'", tok, model));
      widths.push_back(w);
    }
  }
  if (widths.size() < 2) throw ConfigError(fmt::format("model '{}' needs at least two widths", model));
  NetworkSpec spec = mlp_spec(widths, act, bias);
  spec.name = model;
  return spec;
}

}  // namespace sparselab
